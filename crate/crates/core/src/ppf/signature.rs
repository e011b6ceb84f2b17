use std::io::Write;
use std::path::Path;

use super::reconstruct::reconstruct_projected;
use super::{Ppf, PpfError, PpfFormulation, PpfSet};

/// A lossless 2D rendering of a feature set.
///
/// Each feature is posed in the canonical frame with its difference vector in
/// the x–z plane. The pixel is the polar plot of `(‖d‖/radius, ∠(n_r, d))`
/// with angle 0 pointing up; the color is `(n_i + 1)/2` of the posed second
/// normal. Pixels hit several times hold the average color.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top row first.
    pub rgb: Vec<[f64; 3]>,
    pub radius: f64,
}

impl SignatureImage {
    pub fn blank(width: usize, height: usize, radius: f64) -> Self {
        Self {
            width,
            height,
            rgb: vec![[0.0; 3]; width * height],
            radius,
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        self.rgb[y * self.width + x]
    }

    /// Places panels left to right, top aligned.
    pub fn hstack(panels: &[SignatureImage]) -> Self {
        let width = panels.iter().map(|p| p.width).sum();
        let height = panels.iter().map(|p| p.height).max().unwrap_or(0);
        let radius = panels.first().map_or(0.0, |p| p.radius);
        let mut out = Self::blank(width, height, radius);
        let mut x0 = 0;
        for p in panels {
            for y in 0..p.height {
                for x in 0..p.width {
                    out.rgb[y * width + x0 + x] = p.pixel(x, y);
                }
            }
            x0 += p.width;
        }
        out
    }

    /// Binary PPM (P6, 8 bits per channel).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for px in &self.rgb {
            for c in px {
                out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<(), PpfError> {
        std::fs::File::create(path)?.write_all(&self.to_ppm())?;
        Ok(())
    }

    /// Raw little-endian `f32` triplets, row-major, no header.
    pub fn write_raw(&self, path: &Path) -> Result<(), PpfError> {
        let mut bytes = Vec::with_capacity(self.rgb.len() * 12);
        for px in &self.rgb {
            for c in px {
                bytes.extend_from_slice(&(*c as f32).to_le_bytes());
            }
        }
        std::fs::write(path, bytes)?;
        Ok(())
    }
}

/// Renders a paper-formulation feature set as a `resolution²` signature.
///
/// Features that are not exactly consistent (decoder outputs) are projected
/// onto the nearest realizable pair before posing.
pub fn render_signature(set: &PpfSet, resolution: usize) -> Result<SignatureImage, PpfError> {
    if set.formulation != PpfFormulation::Paper {
        return Err(PpfError::Malformed(
            "signatures are defined for the paper formulation only".into(),
        ));
    }
    if !(set.radius > 0.0) {
        return Err(PpfError::BadRadius(set.radius));
    }
    let res = resolution.max(1);
    let mut sum = vec![[0.0f64; 3]; res * res];
    let mut count = vec![0u32; res * res];
    let half = (res as f64 - 1.0) / 2.0;
    for f in &set.rows {
        let f = Ppf::new(
            f.f1().clamp(0.0, std::f64::consts::PI),
            f.f2().clamp(0.0, std::f64::consts::PI),
            f.f3().clamp(0.0, std::f64::consts::PI),
            f.f4().max(0.0),
        );
        let pose = reconstruct_projected(&f).in_xz_plane();
        let d = -pose.second_point.coords / set.radius;
        let scale = d.norm().max(1.0);
        let (u, v) = (d.x / scale, d.z / scale);
        let px = (half + u * half).round().clamp(0.0, res as f64 - 1.0) as usize;
        let py = (half - v * half).round().clamp(0.0, res as f64 - 1.0) as usize;
        let k = py * res + px;
        let n = pose.second_normal;
        for (c, comp) in [n.x, n.y, n.z].into_iter().enumerate() {
            sum[k][c] += (comp + 1.0) / 2.0;
        }
        count[k] += 1;
    }
    let rgb = sum
        .into_iter()
        .zip(count)
        .map(|(s, c)| if c == 0 { [0.0; 3] } else { s.map(|v| v / c as f64) })
        .collect();
    Ok(SignatureImage {
        width: res,
        height: res,
        rgb,
        radius: set.radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: Vec<Ppf>) -> PpfSet {
        PpfSet {
            rows,
            radius: 0.3,
            formulation: PpfFormulation::Paper,
            dropped: 0,
        }
    }

    #[test]
    fn aligned_feature_lands_on_top_of_the_disk() {
        let img = render_signature(&set(vec![Ppf::new(0.0, 0.0, 0.0, 0.3)]), 256).unwrap();
        let lit: Vec<(usize, usize)> = (0..256)
            .flat_map(|y| (0..256).map(move |x| (x, y)))
            .filter(|&(x, y)| img.pixel(x, y) != [0.0; 3])
            .collect();
        assert_eq!(lit.len(), 1);
        let (x, y) = lit[0];
        assert_eq!(y, 0);
        assert!(x == 127 || x == 128);
        let c = img.pixel(x, y);
        assert!((c[0] - 0.5).abs() < 1e-9 && (c[1] - 0.5).abs() < 1e-9 && (c[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn overlapping_splats_average() {
        let s = set(vec![
            Ppf::new(0.0, 0.0, 0.0, 0.3),
            Ppf::new(0.0, std::f64::consts::PI, std::f64::consts::PI, 0.3),
        ]);
        let img = render_signature(&s, 64).unwrap();
        let lit: Vec<[f64; 3]> = img.rgb.iter().copied().filter(|c| *c != [0.0; 3]).collect();
        assert_eq!(lit.len(), 1);
        assert!((lit[0][2] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn deterministic_ppm() {
        let s = set(vec![Ppf::new(0.4, 1.2, 0.9, 0.1), Ppf::new(1.4, 2.0, 0.5, 0.25)]);
        let a = render_signature(&s, 32).unwrap().to_ppm();
        let b = render_signature(&s, 32).unwrap().to_ppm();
        assert_eq!(a, b);
        assert!(a.starts_with(b"P6\n32 32\n255\n"));
        assert_eq!(a.len(), b"P6\n32 32\n255\n".len() + 32 * 32 * 3);
    }

    #[test]
    fn hstack_layout() {
        let a = SignatureImage::blank(4, 3, 0.3);
        let mut b = SignatureImage::blank(5, 3, 0.3);
        b.rgb[0] = [1.0, 0.0, 0.0];
        let s = SignatureImage::hstack(&[a, b]);
        assert_eq!((s.width, s.height), (9, 3));
        assert_eq!(s.pixel(4, 0), [1.0, 0.0, 0.0]);
    }
}
