use std::io::{Read, Write};

use super::{shape_err, AutodiffError, Tensor2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Slot {
    name: String,
    value: Tensor2,
    m: Tensor2,
    v: Tensor2,
}

/// Named parameters in insertion order, with their Adam moments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    slots: Vec<Slot>,
    step: u64,
}

/// One gradient per parameter, indexed like the owning [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    grads: Vec<Tensor2>,
}

impl ParamGrads {
    pub fn get(&self, i: usize) -> &Tensor2 {
        &self.grads[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor2 {
        &mut self.grads[i]
    }

    pub fn as_slice(&self) -> &[Tensor2] {
        &self.grads
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.add_assign(b);
        }
    }

    pub fn scale_assign(&mut self, k: f64) {
        for g in &mut self.grads {
            g.scale_assign(k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(Tensor2::is_finite)
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a parameter and returns its index. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor2) -> usize {
        let name = name.into();
        assert!(self.index_of(&name).is_none(), "duplicate parameter {name}");
        let (r, c) = value.shape();
        self.slots.push(Slot {
            name,
            value,
            m: Tensor2::zeros(r, c),
            v: Tensor2::zeros(r, c),
        });
        self.slots.len() - 1
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn name(&self, i: usize) -> &str {
        &self.slots[i].name
    }

    pub fn value(&self, i: usize) -> &Tensor2 {
        &self.slots[i].value
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor2 {
        &mut self.slots[i].value
    }

    pub fn get(&self, name: &str) -> Result<&Tensor2, AutodiffError> {
        self.index_of(name)
            .map(|i| &self.slots[i].value)
            .ok_or_else(|| AutodiffError::UnknownParam(name.to_string()))
    }

    pub fn values(&self) -> impl Iterator<Item = &Tensor2> {
        self.slots.iter().map(|s| &s.value)
    }

    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.value.len()).sum()
    }

    pub fn zero_grads(&self) -> ParamGrads {
        ParamGrads {
            grads: self
                .slots
                .iter()
                .map(|s| Tensor2::zeros(s.value.rows(), s.value.cols()))
                .collect(),
        }
    }

    /// Wraps per-parameter gradients, checking shapes.
    pub fn grads_from(&self, grads: Vec<Tensor2>) -> Result<ParamGrads, AutodiffError> {
        self.check_shapes(&grads)?;
        Ok(ParamGrads { grads })
    }

    fn check_shapes(&self, grads: &[Tensor2]) -> Result<(), AutodiffError> {
        if grads.len() != self.slots.len() {
            return Err(shape_err(
                "adam_step",
                format!("{} gradients for {} parameters", grads.len(), self.slots.len()),
            ));
        }
        for (s, g) in self.slots.iter().zip(grads) {
            if s.value.shape() != g.shape() {
                return Err(shape_err(
                    "adam_step",
                    format!("{}: {:?} vs {:?}", s.name, s.value.shape(), g.shape()),
                ));
            }
        }
        Ok(())
    }

    /// One bias-corrected Adam update.
    pub fn adam_step(&mut self, grads: &ParamGrads, lr: f64, cfg: &AdamConfig) -> Result<(), AutodiffError> {
        self.check_shapes(&grads.grads)?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for (s, g) in self.slots.iter_mut().zip(&grads.grads) {
            let w = s.value.data_mut();
            let m = s.m.data_mut();
            let v = s.v.data_mut();
            for i in 0..w.len() {
                let gi = g.data()[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                w[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
        Ok(())
    }

    /// Binary form: step, count, then per parameter name, shape, value, m, v.
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&self.step.to_le_bytes())?;
        w.write_all(&(self.slots.len() as u64).to_le_bytes())?;
        for s in &self.slots {
            w.write_all(&(s.name.len() as u64).to_le_bytes())?;
            w.write_all(s.name.as_bytes())?;
            w.write_all(&(s.value.rows() as u64).to_le_bytes())?;
            w.write_all(&(s.value.cols() as u64).to_le_bytes())?;
            for t in [&s.value, &s.m, &s.v] {
                for x in t.data() {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, AutodiffError> {
        let corrupt = |e: std::io::Error| AutodiffError::Corrupt(e.to_string());
        let mut u64_buf = [0u8; 8];
        let mut read_u64 = |r: &mut dyn Read| -> Result<u64, AutodiffError> {
            r.read_exact(&mut u64_buf).map_err(corrupt)?;
            Ok(u64::from_le_bytes(u64_buf))
        };
        let step = read_u64(r)?;
        let count = read_u64(r)?;
        let mut store = ParamStore {
            slots: Vec::new(),
            step,
        };
        for _ in 0..count {
            let name_len = read_u64(r)? as usize;
            if name_len > 4096 {
                return Err(AutodiffError::Corrupt(format!("name length {name_len}")));
            }
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name).map_err(corrupt)?;
            let name = String::from_utf8(name).map_err(|e| AutodiffError::Corrupt(e.to_string()))?;
            let rows = read_u64(r)? as usize;
            let cols = read_u64(r)? as usize;
            let n = rows
                .checked_mul(cols)
                .filter(|&n| n <= 1 << 28)
                .ok_or_else(|| AutodiffError::Corrupt(format!("shape {rows}x{cols}")))?;
            let read_tensor = |r: &mut dyn Read| -> Result<Tensor2, AutodiffError> {
                let mut bytes = vec![0u8; n * 8];
                r.read_exact(&mut bytes).map_err(corrupt)?;
                let data: Vec<f64> = bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                if data.iter().any(|x| !x.is_finite()) {
                    return Err(AutodiffError::Corrupt(format!("non-finite value in {name}")));
                }
                Tensor2::from_vec(rows, cols, data)
            };
            let value = read_tensor(r)?;
            let m = read_tensor(r)?;
            let v = read_tensor(r)?;
            if store.index_of(&name).is_some() {
                return Err(AutodiffError::Corrupt(format!("duplicate parameter {name}")));
            }
            store.slots.push(Slot { name, value, m, v });
        }
        Ok(store)
    }
}
