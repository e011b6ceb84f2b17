use std::fs;
use std::io::Write;
use std::path::Path;

use super::{GeometryError, Point, PointCloud, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    /// Whitespace separated `x y z` per line.
    Xyz,
    /// ASCII PLY with vertex properties `x y z [nx ny nz]`.
    Ply,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xyz" | "txt" => Some(Self::Xyz),
            "ply" => Some(Self::Ply),
            _ => None,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GeometryError + '_ {
    move |source| GeometryError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, GeometryError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    match format {
        CloudFormat::Xyz => parse_xyz(&text),
        CloudFormat::Ply => parse_ply(&text),
    }
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<(), GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::ZeroPoints);
    }
    let text = match format {
        CloudFormat::Xyz => {
            if cloud.has_normals() {
                return Err(GeometryError::FormatCannotHoldNormals);
            }
            let mut s = String::new();
            for p in cloud.points() {
                s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
            }
            s
        }
        CloudFormat::Ply => write_ply(cloud),
    };
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(text.as_bytes()).map_err(io_err(path))
}

fn parse_numbers(line: &str, lineno: usize) -> Result<Vec<f64>, GeometryError> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| GeometryError::Malformed {
                    line: lineno,
                    reason: format!("not a finite number: {tok:?}"),
                })
        })
        .collect()
}

fn parse_xyz(text: &str) -> Result<PointCloud, GeometryError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = parse_numbers(line, i + 1)?;
        if v.len() != 3 {
            return Err(GeometryError::Malformed {
                line: i + 1,
                reason: format!("expected 3 values, found {}", v.len()),
            });
        }
        points.push(Point::new(v[0], v[1], v[2]));
    }
    if points.is_empty() {
        return Err(GeometryError::ZeroPoints);
    }
    PointCloud::new(points)
}

fn malformed(line: usize, reason: impl Into<String>) -> GeometryError {
    GeometryError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn parse_ply(text: &str) -> Result<PointCloud, GeometryError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, "ply")) => {}
        Some((n, _)) => return Err(malformed(n, "missing 'ply' magic")),
        None => return Err(GeometryError::ZeroPoints),
    }

    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut header_done = false;
    for (n, line) in lines.by_ref() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            [] => continue,
            ["format", "ascii", _] => {}
            ["format", other, ..] => return Err(malformed(n, format!("unsupported format {other}"))),
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                in_vertex = *name == "vertex";
                if in_vertex {
                    if vertex_count.is_some() {
                        return Err(malformed(n, "duplicate vertex element"));
                    }
                    vertex_count = Some(count.parse::<usize>().map_err(|_| malformed(n, "bad vertex count"))?);
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(malformed(n, "list properties on vertices are not supported"))
            }
            ["property", _ty, name] => {
                if in_vertex {
                    props.push(name.to_string());
                }
            }
            ["property", ..] => {}
            ["end_header"] => {
                header_done = true;
                break;
            }
            _ => return Err(malformed(n, format!("unexpected header line {line:?}"))),
        }
    }
    if !header_done {
        return Err(malformed(0, "missing end_header"));
    }
    let count = vertex_count.ok_or_else(|| malformed(0, "no vertex element"))?;
    if count == 0 {
        return Err(GeometryError::ZeroPoints);
    }
    let col = |name: &str| props.iter().position(|p| p == name);
    let (x, y, z) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(malformed(0, "vertex element lacks x/y/z")),
    };
    let normal_cols = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };

    let mut points = Vec::with_capacity(count);
    let mut normals = Vec::with_capacity(if normal_cols.is_some() { count } else { 0 });
    for (n, line) in lines {
        if points.len() == count {
            break;
        }
        if line.is_empty() {
            continue;
        }
        let v = parse_numbers(line, n)?;
        if v.len() != props.len() {
            return Err(malformed(
                n,
                format!("expected {} values, found {}", props.len(), v.len()),
            ));
        }
        points.push(Point::new(v[x], v[y], v[z]));
        if let Some((a, b, c)) = normal_cols {
            let nrm = Vector::new(v[a], v[b], v[c]);
            let len = nrm.norm();
            if !(len > 0.0) {
                return Err(malformed(n, "zero-length normal"));
            }
            normals.push(nrm / len);
        }
    }
    if points.len() != count {
        return Err(malformed(
            0,
            format!("header declares {count} vertices, file has {}", points.len()),
        ));
    }
    if normal_cols.is_some() {
        PointCloud::with_normals(points, normals)
    } else {
        PointCloud::new(points)
    }
}

fn write_ply(cloud: &PointCloud) -> String {
    let mut s = String::from("ply\nformat ascii 1.0\n");
    s.push_str(&format!("element vertex {}\n", cloud.len()));
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if cloud.has_normals() {
        s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
    }
    s.push_str("end_header\n");
    match cloud.normals() {
        Some(ns) => {
            for (p, n) in cloud.points().iter().zip(ns) {
                s.push_str(&format!("{} {} {} {} {} {}\n", p.x, p.y, p.z, n.x, n.y, n.z));
            }
        }
        None => {
            for p in cloud.points() {
                s.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn parses_xyz() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.xyz", "0 0 0\n1 0 0\n0 1 0\n");
        let c = load_cloud(&p, CloudFormat::Xyz).unwrap();
        assert_eq!(c.len(), 3);
        assert!(!c.has_normals());
        assert_eq!(c.points()[1], Point::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn parses_ply_with_normals() {
        let dir = tempfile::tempdir().unwrap();
        let body = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
                    property float z\nproperty float nx\nproperty float ny\nproperty float nz\n\
                    element face 0\nproperty list uchar int vertex_indices\nend_header\n\
                    0 0 0 0 0 1\n1 0 0 0 0 1\n0 1 0 0 0 1\n";
        let p = write(&dir, "a.ply", body);
        let c = load_cloud(&p, CloudFormat::Ply).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.normals().unwrap()[2], Vector::z());
    }

    #[test]
    fn empty_and_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "e.xyz", "");
        assert!(matches!(
            load_cloud(&p, CloudFormat::Xyz),
            Err(GeometryError::ZeroPoints)
        ));
        let p = write(&dir, "m.xyz", "0 0 0\n1 0\n");
        assert!(matches!(
            load_cloud(&p, CloudFormat::Xyz),
            Err(GeometryError::Malformed { line: 2, .. })
        ));
        let p = write(&dir, "m2.xyz", "0 0 0\n1 zz 0\n");
        assert!(matches!(
            load_cloud(&p, CloudFormat::Xyz),
            Err(GeometryError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            load_cloud(&dir.path().join("missing.xyz"), CloudFormat::Xyz),
            Err(GeometryError::Io { .. })
        ));
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pts: Vec<Point> = (0..100)
            .map(|_| Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen()))
            .collect();
        let ns: Vec<Vector> = (0..100)
            .map(|_| Vector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 1.0).normalize())
            .collect();
        let plain = PointCloud::new(pts.clone()).unwrap();
        let p = dir.path().join("r.xyz");
        save_cloud(&plain, &p, CloudFormat::Xyz).unwrap();
        let back = load_cloud(&p, CloudFormat::Xyz).unwrap();
        for (a, b) in back.points().iter().zip(plain.points()) {
            assert!((a - b).amax() < 1e-6);
        }

        let oriented = PointCloud::with_normals(pts, ns).unwrap();
        assert!(matches!(
            save_cloud(&oriented, &p, CloudFormat::Xyz),
            Err(GeometryError::FormatCannotHoldNormals)
        ));
        let p = dir.path().join("r.ply");
        save_cloud(&oriented, &p, CloudFormat::Ply).unwrap();
        let back = load_cloud(&p, CloudFormat::Ply).unwrap();
        for (a, b) in back.normals().unwrap().iter().zip(oriented.normals().unwrap()) {
            assert!((a - b).amax() < 1e-6);
        }
        for (a, b) in back.points().iter().zip(oriented.points()) {
            assert!((a - b).amax() < 1e-6);
        }
    }
}
