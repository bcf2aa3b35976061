use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Context;

/// Encodes `(x, a_{1:l})` as `x` followed by one one-hot block of width
/// `|A|` per prefix item, `d + l|A|` values in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub dim: usize,
    pub n_actions: usize,
}

impl FeatureEncoder {
    pub fn new(dim: usize, n_actions: usize) -> Self {
        Self { dim, n_actions }
    }

    pub fn len(&self, prefix_len: usize) -> usize {
        self.dim + prefix_len * self.n_actions
    }

    pub fn encode(&self, x: &Context, prefix: &[usize]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len(prefix.len()));
        self.encode_into(x, prefix, &mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, x: &Context, prefix: &[usize], out: &mut Vec<f64>) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        if let Some(&action) = prefix.iter().find(|&&a| a >= self.n_actions) {
            return Err(Error::ActionOutOfRange {
                action,
                n_actions: self.n_actions,
            });
        }
        out.clear();
        out.extend_from_slice(x.values());
        for &a in prefix {
            let start = out.len();
            out.resize(start + self.n_actions, 0.0);
            out[start + a] = 1.0;
        }
        Ok(())
    }
}
