use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Codeword, DecoderConfig, EncoderConfig, Model, NetworkConfig, NetworkError};
use crate::autodiff::ParamStore;

const MAGIC: &[u8; 8] = b"PPFFOLD\0";
pub const MODEL_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> NetworkError + '_ {
    move |source| NetworkError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_widths(w: &mut impl Write, v: &[usize]) -> std::io::Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for &x in v {
        w.write_all(&(x as u64).to_le_bytes())?;
    }
    Ok(())
}

/// Header, network config, then the parameter store including Adam state.
pub fn save_model(model: &Model, path: &Path) -> Result<(), NetworkError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let run = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        let c = model.config();
        write_widths(w, &c.encoder.pointwise_widths)?;
        write_widths(w, &c.encoder.post_widths)?;
        w.write_all(&(c.decoder.grid_side as u64).to_le_bytes())?;
        w.write_all(&c.decoder.grid_extent.0.to_le_bytes())?;
        w.write_all(&c.decoder.grid_extent.1.to_le_bytes())?;
        write_widths(w, &c.decoder.fold_widths)?;
        model.params().write_to(w)?;
        w.flush()
    };
    run(&mut w).map_err(io_err(path))
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N], NetworkError> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| NetworkError::Corrupt(format!("truncated header: {e}")))?;
        Ok(buf)
    }

    fn u64(&mut self) -> Result<u64, NetworkError> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64, NetworkError> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn widths(&mut self) -> Result<Vec<usize>, NetworkError> {
        let n = self.u64()?;
        if n > 64 {
            return Err(NetworkError::Corrupt(format!("{n} layers")));
        }
        (0..n).map(|_| self.u64().map(|x| x as usize)).collect()
    }
}

pub fn load_model(path: &Path) -> Result<Model, NetworkError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = Reader {
        inner: BufReader::new(file),
    };
    if &r.bytes::<8>()? != MAGIC {
        return Err(NetworkError::Corrupt("not a model file".into()));
    }
    let version = u32::from_le_bytes(r.bytes()?);
    if version != MODEL_VERSION {
        return Err(NetworkError::VersionMismatch {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    let encoder = EncoderConfig {
        pointwise_widths: r.widths()?,
        post_widths: r.widths()?,
    };
    let grid_side = r.u64()? as usize;
    let grid_extent = (r.f64()?, r.f64()?);
    let decoder = DecoderConfig {
        grid_side,
        grid_extent,
        fold_widths: r.widths()?,
    };
    let config = NetworkConfig { encoder, decoder };
    config.validate().map_err(|e| NetworkError::Corrupt(e.to_string()))?;
    if grid_side > 4096 {
        return Err(NetworkError::Corrupt(format!("grid side {grid_side}")));
    }
    let params = ParamStore::read_from(&mut r.inner).map_err(|e| NetworkError::Corrupt(e.to_string()))?;
    let mut trailing = [0u8; 1];
    if r.inner.read(&mut trailing).map_err(io_err(path))? != 0 {
        return Err(NetworkError::Corrupt("trailing bytes".into()));
    }
    Model::new(config, 0)?.with_params(params)
}

/// Loads a model and checks it has the given architecture.
pub fn load_model_expecting(path: &Path, expected: &NetworkConfig) -> Result<Model, NetworkError> {
    let model = load_model(path)?;
    if model.config() != expected {
        return Err(NetworkError::ConfigMismatch {
            found: model.config().describe(),
            expected: expected.describe(),
        });
    }
    Ok(model)
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".idx");
    PathBuf::from(s)
}

/// Flat little-endian `[count × dim]` doubles, plus `<path>.idx` listing the
/// keypoint index of each row.
pub fn write_codewords(path: &Path, codes: &[Codeword], indices: &[usize]) -> Result<(), NetworkError> {
    assert_eq!(codes.len(), indices.len(), "one index per codeword");
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for c in codes {
        for v in c.values() {
            w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))?;
    let idx_path = sidecar(path);
    let mut text = String::new();
    for i in indices {
        text.push_str(&i.to_string());
        text.push('\n');
    }
    std::fs::write(&idx_path, text).map_err(io_err(&idx_path))
}

pub fn read_codewords(path: &Path, dim: usize) -> Result<(Vec<Codeword>, Vec<usize>), NetworkError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    if dim == 0 || bytes.len() % (dim * 8) != 0 {
        return Err(NetworkError::Corrupt(format!(
            "{} bytes is not a whole number of {dim}-d codewords",
            bytes.len()
        )));
    }
    let codes: Vec<Codeword> = bytes
        .chunks_exact(dim * 8)
        .map(|row| {
            Codeword(
                row.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        })
        .collect();
    let idx_path = sidecar(path);
    let text = std::fs::read_to_string(&idx_path).map_err(io_err(&idx_path))?;
    let indices = text
        .lines()
        .map(|l| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| NetworkError::Corrupt(format!("bad index line {l:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if indices.len() != codes.len() {
        return Err(NetworkError::Corrupt(format!(
            "{} indices for {} codewords",
            indices.len(),
            codes.len()
        )));
    }
    Ok((codes, indices))
}
