//! Named parameter collections with a flat-vector view.
//!
//! The flat view (a fixed concatenation order) is what checkpoints store,
//! what the optimizer walks, and what the freeze audit hashes.

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    tensors: Vec<NamedTensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> usize {
        self.tensors.push(NamedTensor {
            name: name.into(),
            tensor,
        });
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, idx: usize) -> &NamedTensor {
        &self.tensors[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut NamedTensor {
        &mut self.tensors[idx]
    }

    pub fn iter(&self) -> impl Iterator<Item = &NamedTensor> {
        self.tensors.iter()
    }

    pub fn num_params(&self) -> usize {
        self.tensors.iter().map(|t| t.tensor.len()).sum()
    }

    /// All parameter values concatenated in declaration order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for t in &self.tensors {
            out.extend_from_slice(t.tensor.data());
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.num_params() {
            return Err(Error::Checkpoint(format!(
                "parameter blob holds {} values, model expects {}",
                values.len(),
                self.num_params()
            )));
        }
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.tensor.len();
            t.tensor.data_mut().copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Mutate a single entry of the flat view (used by finite-difference
    /// probes in tests).
    pub fn nudge_flat(&mut self, index: usize, delta: f64) {
        let mut offset = 0;
        for t in &mut self.tensors {
            let n = t.tensor.len();
            if index < offset + n {
                t.tensor.data_mut()[index - offset] += delta;
                return;
            }
            offset += n;
        }
        panic!("flat index {index} out of range");
    }

    /// The (tensor index, name, flat offset, length) layout of the flat view.
    pub fn layout(&self) -> Vec<(usize, String, usize, usize)> {
        let mut out = Vec::with_capacity(self.tensors.len());
        let mut offset = 0;
        for (i, t) in self.tensors.iter().enumerate() {
            out.push((i, t.name.clone(), offset, t.tensor.len()));
            offset += t.tensor.len();
        }
        out
    }

    /// SHA-256 of the little-endian byte image of the flat view: bit-exact
    /// equality of parameters implies equal hashes and vice versa.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tensors {
            for v in t.tensor.data() {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// A tensor with entries drawn from N(0, std^2).
pub fn normal_tensor(rng: &mut ChaCha20Rng, rows: usize, cols: usize, std: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| standard_normal(rng) * std)
        .collect();
    Tensor::from_vec(rows, cols, data)
}

/// Xavier/Glorot scaling for a linear layer weight.
pub fn xavier_tensor(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Tensor {
    let std = (2.0 / (rows + cols) as f64).sqrt();
    normal_tensor(rng, rows, cols, std)
}

fn standard_normal(rng: &mut ChaCha20Rng) -> f64 {
    // Box-Muller; two uniform draws per sample keeps the stream simple.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> ParamSet {
        let mut set = ParamSet::new();
        set.add("a", Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        set.add("b", Tensor::from_vec(1, 3, vec![5.0, 6.0, 7.0]));
        set
    }

    #[test]
    fn flat_round_trips() {
        let mut set = sample_set();
        let flat = set.flat();
        assert_eq!(flat, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        set.set_flat(&[9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0]).unwrap();
        assert_eq!(set.get(0).tensor.data(), &[9.0, 8.0, 7.0, 6.0]);
        assert_eq!(set.get(1).tensor.data(), &[5.0, 4.0, 3.0]);
    }

    #[test]
    fn set_flat_rejects_wrong_length() {
        let mut set = sample_set();
        assert!(set.set_flat(&[1.0]).is_err());
    }

    #[test]
    fn hash_changes_with_any_bit() {
        let mut set = sample_set();
        let h0 = set.content_hash();
        set.nudge_flat(6, 1e-12);
        assert_ne!(set.content_hash(), h0);
    }

    #[test]
    fn init_is_deterministic() {
        let mut a = crate::seeding::substream_rng(1, "init");
        let mut b = crate::seeding::substream_rng(1, "init");
        assert_eq!(
            normal_tensor(&mut a, 3, 3, 0.02),
            normal_tensor(&mut b, 3, 3, 0.02)
        );
    }
}
