//! Flat binary feature set records.
//!
//! Layout, little-endian: magic `PPFS`, `u32` version, `u8` formulation,
//! `u8` normalized flag, `u64` row count, `f64` radius, then `4 × f64` per row.

use std::path::Path;

use super::{NormalizedPpfSet, Ppf, PpfError, PpfFormulation, PpfSet};

const MAGIC: &[u8; 4] = b"PPFS";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 1 + 1 + 8 + 8;

fn encode(rows: &[[f64; 4]], radius: f64, formulation: PpfFormulation, normalized: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + rows.len() * 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(formulation.code());
    out.push(normalized as u8);
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    out.extend_from_slice(&radius.to_le_bytes());
    for r in rows {
        for v in r {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// A decoded record, raw or normalized.
#[derive(Debug, Clone, PartialEq)]
pub enum PpfRecord {
    Raw(PpfSet),
    Normalized(NormalizedPpfSet),
}

impl PpfRecord {
    /// The record in raw (unnormalized) units.
    pub fn into_raw(self) -> PpfSet {
        match self {
            Self::Raw(s) => s,
            Self::Normalized(n) => n.denormalize(),
        }
    }
}

pub fn encode_ppf_set(set: &PpfSet) -> Vec<u8> {
    let rows: Vec<[f64; 4]> = set.rows.iter().map(|r| r.0).collect();
    encode(&rows, set.radius, set.formulation, false)
}

pub fn encode_normalized(set: &NormalizedPpfSet) -> Vec<u8> {
    encode(&set.rows, set.radius, set.formulation, true)
}

pub fn decode_ppf_record(bytes: &[u8]) -> Result<PpfRecord, PpfError> {
    let bad = |m: &str| PpfError::Malformed(m.to_string());
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing PPFS header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(PpfError::Malformed(format!("unsupported version {version}")));
    }
    let formulation = PpfFormulation::from_code(bytes[8]).ok_or_else(|| bad("unknown formulation"))?;
    let normalized = match bytes[9] {
        0 => false,
        1 => true,
        _ => return Err(bad("bad normalized flag")),
    };
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap()) as usize;
    let radius = f64::from_le_bytes(bytes[18..26].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    if count.checked_mul(32) != Some(body.len()) {
        return Err(bad("row count does not match payload length"));
    }
    let rows: Vec<[f64; 4]> = body
        .chunks_exact(32)
        .map(|c| std::array::from_fn(|k| f64::from_le_bytes(c[8 * k..8 * k + 8].try_into().unwrap())))
        .collect();
    Ok(if normalized {
        PpfRecord::Normalized(NormalizedPpfSet {
            rows,
            radius,
            formulation,
        })
    } else {
        PpfRecord::Raw(PpfSet {
            rows: rows.into_iter().map(Ppf).collect(),
            radius,
            formulation,
            dropped: 0,
        })
    })
}

pub fn write_ppf_set(set: &PpfSet, path: &Path) -> Result<(), PpfError> {
    std::fs::write(path, encode_ppf_set(set))?;
    Ok(())
}

pub fn read_ppf_set(path: &Path) -> Result<PpfRecord, PpfError> {
    decode_ppf_record(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn records_round_trip(rows in prop::collection::vec(prop::array::uniform4(-10.0f64..10.0), 0..40),
                              radius in 0.01f64..2.0, normalized: bool) {
            if normalized {
                let set = NormalizedPpfSet { rows, radius, formulation: PpfFormulation::Paper };
                prop_assert_eq!(decode_ppf_record(&encode_normalized(&set)).unwrap(), PpfRecord::Normalized(set));
            } else {
                let set = PpfSet { rows: rows.into_iter().map(Ppf).collect(), radius, formulation: PpfFormulation::FpfhStyle, dropped: 0 };
                prop_assert_eq!(decode_ppf_record(&encode_ppf_set(&set)).unwrap(), PpfRecord::Raw(set));
            }
        }
    }

    #[test]
    fn truncated_record_is_rejected() {
        let set = PpfSet {
            rows: vec![Ppf::new(1.0, 2.0, 3.0, 0.1)],
            radius: 0.3,
            formulation: PpfFormulation::Paper,
            dropped: 0,
        };
        let bytes = encode_ppf_set(&set);
        assert!(decode_ppf_record(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_ppf_record(b"nope").is_err());
    }
}
