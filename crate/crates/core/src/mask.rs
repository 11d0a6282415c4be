//! Synthetic missingness: contiguous block masks emulating long measurement
//! intermittences, isolated-hour masks for the MCAR baseline, and the seed
//! derivation that makes every mask a pure function of the master seed.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A block of `ratio · n` consecutive missing hours starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub ratio: f64,
    pub start: usize,
    /// Continue the block at index 0 when it runs past the end of the grid.
    pub wrap: bool,
}

impl MaskSpec {
    pub fn new(ratio: f64, start: usize) -> Self {
        Self {
            ratio,
            start,
            wrap: true,
        }
    }
}

/// Number of masked points for a ratio: `ratio · n` rounded half away from zero.
pub fn masked_count(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).round() as usize
}

/// Observation mask (`true` = observed) with one contiguous missing block.
pub fn block_mask(n: usize, spec: &MaskSpec) -> Result<Vec<bool>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&spec.ratio) {
        return Err(Error::invalid("ratio", "must lie in [0, 1]"));
    }
    if spec.start >= n {
        return Err(Error::invalid("start", "must be inside the grid"));
    }
    let count = masked_count(n, spec.ratio);
    if count >= n {
        return Err(Error::AllMissing);
    }
    let mut mask = vec![true; n];
    for k in 0..count {
        let i = spec.start + k;
        if i < n {
            mask[i] = false;
        } else if spec.wrap {
            mask[i - n] = false;
        } else {
            break;
        }
    }
    Ok(mask)
}

/// Observation mask with `ratio · n` isolated hours missing, chosen uniformly
/// without replacement.
pub fn scattered_mask(n: usize, ratio: f64, seed: u64) -> Result<Vec<bool>> {
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid("ratio", "must lie in [0, 1]"));
    }
    let count = masked_count(n, ratio);
    if count >= n {
        return Err(Error::AllMissing);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = vec![true; n];
    for i in index::sample(&mut rng, n, count) {
        mask[i] = false;
    }
    Ok(mask)
}

/// `count` block start indices in `0..n`, distinct whenever `count <= n`.
pub fn sample_starts(n: usize, count: usize, seed: u64) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if count <= n {
        index::sample(&mut rng, n, count).into_vec()
    } else {
        (0..count).map(|_| rng.random_range(0..n)).collect()
    }
}

/// Observed only where both masks are observed.
pub fn compose_mask(base: &[bool], synthetic: &[bool]) -> Result<Vec<bool>> {
    if base.len() != synthetic.len() {
        return Err(Error::LengthMismatch {
            expected: base.len(),
            got: synthetic.len(),
        });
    }
    let out: Vec<bool> = base.iter().zip(synthetic).map(|(a, b)| *a && *b).collect();
    if !out.iter().any(|&m| m) {
        return Err(Error::AllMissing);
    }
    Ok(out)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-stream seed from a master seed and a coordinate path, so a
/// stream does not depend on the order in which streams are consumed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
