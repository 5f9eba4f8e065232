use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

/// Train/validation/test proportions and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratios: [f64; 3], seed: u64) -> Result<Self> {
        if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios {ratios:?} must be non-negative and sum to 1"
            )));
        }
        Ok(SplitSpec { ratios, seed })
    }

    /// 7:1:2.
    pub fn standard(seed: u64) -> Self {
        SplitSpec {
            ratios: [0.7, 0.1, 0.2],
            seed,
        }
    }

    /// Partition boundaries ⌊r₀·n⌋ and ⌊(r₀+r₁)·n⌋. A 1e-9 guard absorbs
    /// representation error such as (0.7 + 0.1)·10 = 7.999….
    pub fn boundaries(&self, n: usize) -> (usize, usize) {
        let nf = n as f64;
        let first = ((self.ratios[0] * nf) + 1e-9).floor() as usize;
        let second = (((self.ratios[0] + self.ratios[1]) * nf) + 1e-9).floor() as usize;
        (first.min(n), second.clamp(first.min(n), n))
    }
}

/// Seeded shuffle, then contiguous slices at the floor boundaries.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (a, b) = spec.boundaries(ds.len());
    Ok((
        ds.subset(&order[..a]),
        ds.subset(&order[a..b]),
        ds.subset(&order[b..]),
    ))
}
