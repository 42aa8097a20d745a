use crate::error::{Error, Result};

/// Maps a continuous state to a discrete stratum key using per-dimension
/// boundaries. A value equal to a boundary falls in the upper bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningRule {
    boundaries: Vec<Vec<f64>>,
}

impl BinningRule {
    pub fn new(boundaries: Vec<Vec<f64>>) -> Result<Self> {
        for (d, b) in boundaries.iter().enumerate() {
            if b.iter().any(|v| !v.is_finite()) || b.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config(format!(
                    "binning boundaries for dimension {d} must be finite and strictly increasing"
                )));
            }
        }
        Ok(Self { boundaries })
    }

    /// One boundary at zero per dimension.
    pub fn sign(dims: usize) -> Self {
        Self {
            boundaries: vec![vec![0.0]; dims],
        }
    }

    /// Every state lands in a single stratum.
    pub fn single(dims: usize) -> Self {
        Self {
            boundaries: vec![Vec::new(); dims],
        }
    }

    pub fn boundaries(&self) -> &[Vec<f64>] {
        &self.boundaries
    }

    pub fn n_strata(&self) -> u64 {
        self.boundaries.iter().map(|b| b.len() as u64 + 1).product()
    }

    /// Mixed-radix key; dimension 0 is the least significant digit.
    pub fn key(&self, state: &[f64]) -> u64 {
        let mut key = 0u64;
        let mut radix = 1u64;
        for (b, &v) in self.boundaries.iter().zip(state) {
            let bin = b.partition_point(|&edge| edge <= v) as u64;
            key += bin * radix;
            radix *= b.len() as u64 + 1;
        }
        key
    }
}
