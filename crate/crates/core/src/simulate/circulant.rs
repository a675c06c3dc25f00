//! Exact sampling of stationary Gaussian sequences by circulant embedding.
//!
//! The covariance sequence `ρ(k·step)`, `k = 0..=m` (`m ≥ n − 1`), is
//! reflected into a symmetric circulant of size `M = 2m`. When its
//! eigenvalues `λ_j` are nonnegative, `w_j = √(λ_j/M)(Z₁ + iZ₂)` pushed through
//! one FFT yields two independent exact paths (real and imaginary parts).
//! `m` is enlarged (up to 16× the base) until the embedding is nonnegative.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::covariance::{CovarianceKind, CovarianceModel};
use crate::{Error, Result};

/// Eigenvalues in `[−EIGEN_TOL·ρ(0), 0)` are clipped to 0; lower ones reject.
pub const EIGEN_TOL: f64 = 1e-10;
/// Largest padding factor over the base embedding.
pub const MAX_PADDING: usize = 16;
/// Largest grid the dense Cholesky fallback accepts.
pub const CHOLESKY_MAX_N: usize = 1 << 13;
/// Default per-path grid budget.
pub const DEFAULT_MAX_POINTS: usize = 1 << 22;

enum Method {
    Circulant { scale: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky { lower: Vec<f64> },
}

/// A reusable exact sampler for `n` equispaced values of a stationary model.
pub struct GaussianSampler {
    n: usize,
    step: f64,
    method: Method,
}

impl std::fmt::Debug for GaussianSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaussianSampler")
            .field("n", &self.n)
            .field("step", &self.step)
            .field("embedding_size", &self.embedding_size())
            .finish()
    }
}

/// Smallest `2^a 3^b 5^c ≥ x`.
fn next_smooth(x: usize) -> usize {
    let mut k = x.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

impl GaussianSampler {
    pub fn new(model: &CovarianceModel, n: usize, step: f64) -> Result<Self> {
        Self::with_budget(model, n, step, DEFAULT_MAX_POINTS)
    }

    pub fn with_budget(model: &CovarianceModel, n: usize, step: f64, max_points: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", "grid needs at least 2 points"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("step", format!("must be > 0, got {step}")));
        }
        if n > max_points {
            return Err(Error::ResourceBudget { required: n, budget: max_points });
        }
        let var = model.evaluate(0.0)?;
        let base = next_smooth(n - 1);
        let mut planner = FftPlanner::new();
        let mut worst = (f64::NEG_INFINITY, 0usize);
        let mut factor = 1;
        while factor <= MAX_PADDING {
            let m = base * factor;
            factor *= 2;
            if m as f64 * step > model.max_lag() {
                break;
            }
            let size = 2 * m;
            let fft = planner.plan_fft_forward(size);
            let mut row: Vec<Complex64> = (0..size)
                .map(|k| {
                    let lag = if k <= m { k } else { size - k };
                    model.evaluate(lag as f64 * step).map(|r| Complex64::new(r, 0.0))
                })
                .collect::<Result<_>>()?;
            fft.process(&mut row);
            let min = row.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            if min >= -EIGEN_TOL * var {
                let scale = row.iter().map(|z| (z.re.max(0.0) / size as f64).sqrt()).collect();
                return Ok(Self { n, step, method: Method::Circulant { scale, fft } });
            }
            if worst.1 == 0 || min > worst.0 {
                worst = (min, size);
            }
        }
        if matches!(model.kind(), CovarianceKind::Tabulated(_)) && n <= CHOLESKY_MAX_N {
            log::warn!("circulant embedding failed; falling back to dense Cholesky for n = {n} (O(n³) setup, O(n²) per path)");
            let gram: Vec<f64> = (0..n).map(|k| model.evaluate(k as f64 * step)).collect::<Result<_>>()?;
            let lower = super::cholesky_toeplitz(&gram, EIGEN_TOL * var)?;
            return Ok(Self { n, step, method: Method::Cholesky { lower } });
        }
        Err(Error::EmbeddingFailure { min_eigenvalue: worst.0, size: worst.1 })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Circulant size `M`, or `None` for the Cholesky fallback.
    pub fn embedding_size(&self) -> Option<usize> {
        match &self.method {
            Method::Circulant { scale, .. } => Some(scale.len()),
            Method::Cholesky { .. } => None,
        }
    }

    /// Two independent exact draws.
    pub fn draw_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        match &self.method {
            Method::Circulant { scale, fft } => {
                let mut buf: Vec<Complex64> = scale
                    .iter()
                    .map(|&s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(self.n);
                buf.into_iter().map(|z| (z.re, z.im)).unzip()
            }
            Method::Cholesky { lower } => {
                let n = self.n;
                let mut draw = || {
                    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    (0..n)
                        .map(|i| lower[i * n..i * n + i + 1].iter().zip(&z).map(|(l, z)| l * z).sum())
                        .collect::<Vec<f64>>()
                };
                let a = draw();
                (a, draw())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::TabulatedCovariance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn smooth_sizes() {
        assert_eq!(next_smooth(5000), 5000);
        assert_eq!(next_smooth(63), 64);
        assert_eq!(next_smooth(7), 8);
        assert_eq!(next_smooth(1), 1);
    }

    #[test]
    fn ou_embeds_at_base_size() {
        let s = GaussianSampler::new(&CovarianceModel::ornstein_uhlenbeck(), 5001, 0.002).unwrap();
        assert_eq!(s.embedding_size(), Some(10_000));
    }

    #[test]
    fn gaussian_kernel_needs_padding() {
        let s = GaussianSampler::new(&CovarianceModel::gaussian_kernel(), 64, 0.01).unwrap();
        assert!(s.embedding_size().unwrap() > 128);
    }

    #[test]
    fn budget_is_enforced() {
        let e = GaussianSampler::with_budget(&CovarianceModel::ornstein_uhlenbeck(), 1000, 0.01, 100).unwrap_err();
        assert!(matches!(e, Error::ResourceBudget { required: 1000, budget: 100 }));
    }

    #[test]
    fn short_table_falls_back_to_cholesky() {
        // Table too short to embed 40 points at this step, but long enough
        // for the Gram matrix itself.
        // 44 points need a half-period of next_smooth(43) = 45 lags.
        let lags: Vec<f64> = (0..=43).map(|k| k as f64 * 0.1).collect();
        let values = lags.iter().map(|t| (-t).exp()).collect();
        let m = CovarianceModel::tabulated(TabulatedCovariance::new(lags, values).unwrap(), Some((1.0, 1.0))).unwrap();
        let s = GaussianSampler::new(&m, 44, 0.1).unwrap();
        assert_eq!(s.embedding_size(), None);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = s.draw_pair(&mut rng);
        assert_eq!((a.len(), b.len()), (44, 44));
        assert_ne!(a, b);
    }
}
