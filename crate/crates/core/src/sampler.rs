//! Uniform random n-subsets of the block index set.

use rand::Rng;

use crate::error::{Error, Result};

/// Distinct block indices in ascending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSample {
    pub indices: Vec<usize>,
}

impl SubsetSample {
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Draws a uniformly random `n`-subset of `{0, …, total−1}`.
///
/// Partial Fisher–Yates over a fresh index array, then sorted, so every
/// subset has probability `1 / C(total, n)`.
pub fn sample_subset<R: Rng + ?Sized>(rng: &mut R, total: usize, n: usize) -> Result<SubsetSample> {
    let mut scratch = Vec::new();
    sample_subset_with(rng, total, n, &mut scratch)
}

pub(crate) fn sample_subset_with<R: Rng + ?Sized>(
    rng: &mut R,
    total: usize,
    n: usize,
    scratch: &mut Vec<usize>,
) -> Result<SubsetSample> {
    check_sample_size(total, n)?;
    scratch.clear();
    scratch.extend(0..total);
    for k in 0..n {
        let j = rng.random_range(k..total);
        scratch.swap(k, j);
    }
    let mut indices = scratch[..n].to_vec();
    indices.sort_unstable();
    Ok(SubsetSample { indices })
}

pub fn check_sample_size(total: usize, n: usize) -> Result<()> {
    if n < 1 || n > total {
        return Err(Error::param(format!(
            "sample size {n} violates 1 <= n <= {total} required by uniform subset sampling"
        )));
    }
    Ok(())
}
