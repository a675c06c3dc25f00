//! Monte Carlo estimates of `P{max_{s∈[0,t]} Y(s) ≥ x}`.
//!
//! The raw estimate is the grid maximum. For `α = 1` paths are rough enough
//! that the grid misses a visible share of excursions, so a Brownian-bridge
//! correction is also reported: given consecutive grid values `y_i, y_{i+1}`
//! below `x`, the path crosses in between with probability
//! `exp(−2(x−y_i)(x−y_{i+1})/σ²)`, `σ² = Var(Y(Δ) − Y(0)) = 2(v² − ρ(Δ))`.

use serde::Serialize;

use super::{domain, GaussianSampler};
use crate::covariance::CovarianceModel;
use crate::{Error, Execution, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub level: f64,
    /// Fraction of paths whose grid maximum reaches `level`.
    pub raw: f64,
    pub raw_se: f64,
    /// Bridge-corrected continuous-time estimate (`α = 1` only).
    pub bridge: Option<f64>,
    pub bridge_se: Option<f64>,
    pub n_paths: u64,
}

/// Skip bridge terms below `e^{−40}`.
const BRIDGE_CUTOFF: f64 = 40.0;

/// Exceedance probabilities of `max_{[0, horizon]} Y` over `levels`.
pub fn max_exceedance(
    model: &CovarianceModel,
    levels: &[f64],
    horizon: f64,
    step: f64,
    n_paths: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<TailEstimate>> {
    if levels.is_empty() || n_paths < 2 {
        return Err(Error::invalid("levels", "need at least one level and two paths"));
    }
    let n = (horizon / step).round() as usize + 1;
    if ((n - 1) as f64 * step - horizon).abs() > 1e-9 * horizon {
        return Err(Error::invalid("step", "horizon must be a multiple of the step"));
    }
    let sampler = GaussianSampler::new(model, n, step)?;
    let bridge = model.alpha() == 1.0;
    let two_over_var = 2.0 / (2.0 * (model.evaluate(0.0)? - model.evaluate(step)?));

    // Per path and level: (grid hit, continuous-time crossing probability).
    let score = |path: &[f64]| -> Vec<(bool, f64)> {
        let max = path.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        levels
            .iter()
            .map(|&x| {
                if max >= x {
                    return (true, 1.0);
                }
                if !bridge {
                    return (false, 0.0);
                }
                let mut ln_stay = 0.0;
                for w in path.windows(2) {
                    let e = two_over_var * (x - w[0]) * (x - w[1]);
                    if e < BRIDGE_CUTOFF {
                        ln_stay += (-(-e).exp()).ln_1p();
                    }
                }
                (false, -ln_stay.exp_m1())
            })
            .collect()
    };
    let pairs = n_paths.div_ceil(2);
    let per_pair = exec.map(pairs as usize, |p| {
        let (a, b) = sampler.pair(seed, domain::TAIL, p as u64);
        (score(&a), (2 * p as u64 + 1 < n_paths).then(|| score(&b)))
    });

    let nf = n_paths as f64;
    let mut res = Vec::with_capacity(levels.len());
    for (li, &level) in levels.iter().enumerate() {
        let (mut hits, mut sum, mut sum_sq) = (0u64, 0.0, 0.0);
        for (first, second) in &per_pair {
            for (h, p) in std::iter::once(first[li]).chain(second.as_ref().map(|s| s[li])) {
                hits += h as u64;
                sum += p;
                sum_sq += p * p;
            }
        }
        let raw = hits as f64 / nf;
        let mean = sum / nf;
        let var = (sum_sq / nf - mean * mean).max(0.0);
        res.push(TailEstimate {
            level,
            raw,
            raw_se: (raw * (1.0 - raw) / nf).sqrt(),
            bridge: bridge.then_some(mean),
            bridge_se: bridge.then_some((var / nf).sqrt()),
            n_paths,
        });
    }
    Ok(res)
}
