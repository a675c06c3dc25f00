//! Exact path sampling, last-exit extraction and reproducible batch studies.
//!
//! Randomness is keyed by `(seed, domain, index)`: a ChaCha8 key built from
//! `seed` and a per-purpose domain tag, with the index selecting the stream.
//! Circulant draws come in pairs, so replicate `r` is the real (even `r`) or
//! imaginary (odd `r`) half of pair `⌊r/2⌋`. Results never depend on thread
//! scheduling.

mod circulant;
mod exit;
mod slepian;
mod study;
mod tail;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use circulant::{GaussianSampler, CHOLESKY_MAX_N, DEFAULT_MAX_POINTS, EIGEN_TOL, MAX_PADDING};
pub use exit::{boundary_levels, last_exit_on_grid, last_exit_time, ExitOutcome};
pub use slepian::{slepian_ordering_test, Interval, SlepianDirection, SlepianReport};
pub use study::{run_study, ExitTimeStudy, GridPolicy, ReplicateRecord, ResolvedGrid};
pub use tail::{max_exceedance, TailEstimate};

use crate::covariance::CovarianceModel;
use crate::{Error, Result};

/// RNG domain tags. Changing any of these changes every downstream number.
pub(crate) mod domain {
    pub const PATHS: u64 = 0x7061_7468;
    pub const SLEPIAN_ORIGINAL: u64 = 0x736c_6f72;
    pub const SLEPIAN_BLOCKS: u64 = 0x736c_626c;
    pub const SLEPIAN_SHIFT: u64 = 0x736c_7869;
    pub const TAIL: u64 = 0x7461_696c;
}

/// Deterministic generator for `(seed, domain, stream)`.
pub fn stream_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// One sampled path on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub grid_start: f64,
    pub grid_step: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate_index: u64,
}

impl PathSample {
    pub fn new(grid_start: f64, grid_step: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("values", "a path needs at least 2 points"));
        }
        if !(grid_step > 0.0) || !grid_start.is_finite() {
            return Err(Error::invalid("grid_step", "must be > 0 with a finite start"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        Ok(Self { grid_start, grid_step, values, seed: 0, replicate_index: 0 })
    }

    pub fn time(&self, i: usize) -> f64 {
        self.grid_start + i as f64 * self.grid_step
    }
}

impl GaussianSampler {
    /// Both members of replicate pair `pair` for `(seed, domain)`.
    pub fn pair(&self, seed: u64, domain: u64, pair: u64) -> (Vec<f64>, Vec<f64>) {
        self.draw_pair(&mut stream_rng(seed, domain, pair))
    }

    /// Replicate `replicate` of the path family keyed by `seed`, on `[0, (n−1)·step]`.
    pub fn path(&self, seed: u64, replicate: u64) -> PathSample {
        let (re, im) = self.pair(seed, domain::PATHS, replicate / 2);
        PathSample {
            grid_start: 0.0,
            grid_step: self.step(),
            values: if replicate % 2 == 0 { re } else { im },
            seed,
            replicate_index: replicate,
        }
    }
}

/// One exact draw of `n` values at spacing `step`, a pure function of
/// `(model, n, step, seed, replicate)`.
pub fn sample_path(model: &CovarianceModel, n: usize, step: f64, seed: u64, replicate: u64) -> Result<PathSample> {
    Ok(GaussianSampler::new(model, n, step)?.path(seed, replicate))
}

/// Lower Cholesky factor (row-major `n×n`) of the symmetric Toeplitz matrix
/// with first row `gram`, after adding `jitter` to the diagonal.
pub fn cholesky_toeplitz(gram: &[f64], jitter: f64) -> Result<Vec<f64>> {
    let n = gram.len();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = gram[i - j] + if i == j { jitter } else { 0.0 };
            s -= l[i * n..i * n + j].iter().zip(&l[j * n..j * n + j]).map(|(a, b)| a * b).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::NotPositiveDefinite(format!("pivot {i} is {s:e}")));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}
