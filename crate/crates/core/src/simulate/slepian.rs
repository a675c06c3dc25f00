//! Monte Carlo check of the Slepian covariance-comparison inequality.
//!
//! The original process `V = Y` is compared with
//! `U = √(1−δ²)·Ỹ + δ·v·ξ`, where `Ỹ` holds independent copies of `Y` on
//! each interval and `ξ` is a common standard normal shift. Variances match.
//! Within an interval `U` has the larger covariance; across intervals it has
//! `δ²v²` against `ρ(|t − s|)`. When one process's covariances dominate the
//! other's, the dominated one must have the *larger* union-exceedance
//! probability `P{∃j: max_{T_j} ≥ r_j}`.

use serde::Serialize;

use super::{domain, GaussianSampler};
use crate::covariance::CovarianceModel;
use crate::{Error, Execution, Result};

/// Closed interval `[start, end]` sampled at the test's grid step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

/// Which probability the covariance ordering says must be larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SlepianDirection {
    /// `U` dominates `V` in covariance: expect `p_original ≥ p_inflated`.
    OriginalAtLeastInflated,
    /// `V` dominates `U`: expect `p_inflated ≥ p_original`.
    InflatedAtLeastOriginal,
    /// Both orderings hold (identical laws): expect agreement.
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlepianReport {
    pub delta_sq: f64,
    pub p_original: f64,
    pub p_inflated: f64,
    pub se_original: f64,
    pub se_inflated: f64,
    /// `√(SE_U² + SE_V²)`: the two estimates use independent draws.
    pub se_combined: f64,
    pub direction: SlepianDirection,
    /// Largest cross-interval covariance of the original process.
    pub max_cross_covariance: f64,
    pub passed: bool,
    pub n_replicates: u64,
}

fn grid_index(t: f64, origin: f64, step: f64) -> Result<usize> {
    let k = (t - origin) / step;
    let r = k.round();
    if (k - r).abs() > 1e-6 || r < 0.0 {
        return Err(Error::invalid("intervals", format!("endpoint {t} is not on the step-{step} grid")));
    }
    Ok(r as usize)
}

/// Estimate both union-exceedance probabilities and test the ordering the
/// covariances imply, with a `2·SE` allowance.
#[allow(clippy::too_many_arguments)]
pub fn slepian_ordering_test(
    model: &CovarianceModel,
    delta_sq: f64,
    intervals: &[Interval],
    levels: &[f64],
    step: f64,
    n_replicates: u64,
    seed: u64,
    exec: Execution,
) -> Result<SlepianReport> {
    if !(0.0..1.0).contains(&delta_sq) {
        return Err(Error::invalid("delta_sq", format!("must lie in [0, 1), got {delta_sq}")));
    }
    if intervals.is_empty() || intervals.len() != levels.len() {
        return Err(Error::invalid("levels", "need one positive level per interval"));
    }
    if levels.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::invalid("levels", "levels must be positive"));
    }
    if n_replicates < 2 {
        return Err(Error::invalid("n_replicates", "need at least 2"));
    }
    let origin = intervals.iter().map(|i| i.start).fold(f64::INFINITY, f64::min);
    let mut spans = Vec::with_capacity(intervals.len());
    for iv in intervals {
        if !(iv.end > iv.start) {
            return Err(Error::invalid("intervals", "each interval needs end > start"));
        }
        let (lo, hi) = (grid_index(iv.start, origin, step)?, grid_index(iv.end, origin, step)?);
        spans.push((lo, hi));
    }
    let mut sorted = spans.clone();
    sorted.sort();
    if sorted.windows(2).any(|w| w[1].0 <= w[0].1) {
        return Err(Error::invalid("intervals", "intervals must be disjoint"));
    }

    // Covariance ordering on the grid.
    let v2 = model.v() * model.v();
    let (mut cross_max, mut cross_min) = (f64::NEG_INFINITY, f64::INFINITY);
    for (i, &(a0, a1)) in spans.iter().enumerate() {
        for &(b0, b1) in &spans[i + 1..] {
            let (lo, hi) = if b0 > a1 { (b0 - a1, b1 - a0) } else { (a0 - b1, a1 - b0) };
            for lag in lo..=hi {
                let r = model.evaluate(lag as f64 * step)?;
                cross_max = cross_max.max(r);
                cross_min = cross_min.min(r);
            }
        }
    }
    let single = spans.len() == 1;
    let u_dominates = single || delta_sq * v2 >= cross_max;
    let v_dominates = delta_sq == 0.0 && (single || cross_min >= 0.0);
    let direction = match (u_dominates, v_dominates) {
        (true, true) if single || cross_max == 0.0 && cross_min == 0.0 => SlepianDirection::Equal,
        (true, _) => SlepianDirection::OriginalAtLeastInflated,
        (false, true) => SlepianDirection::InflatedAtLeastOriginal,
        (false, false) => {
            return Err(Error::OrderingUndetermined(format!(
                "δ²v² = {} is below the largest cross-interval covariance {cross_max} and δ² > 0",
                delta_sq * v2
            )))
        }
    };

    let joint_n = sorted.last().expect("non-empty").1 + 1;
    let joint = GaussianSampler::new(model, joint_n, step)?;
    let blocks: Vec<GaussianSampler> = spans
        .iter()
        .map(|&(lo, hi)| GaussianSampler::new(model, hi - lo + 1, step))
        .collect::<Result<_>>()?;
    let (shrink, shift) = ((1.0 - delta_sq).sqrt(), delta_sq.sqrt() * model.v());

    let exceeds_original = |path: &[f64]| {
        spans
            .iter()
            .zip(levels)
            .any(|(&(lo, hi), &r)| path[lo..=hi].iter().any(|&y| y >= r))
    };
    let pairs = n_replicates.div_ceil(2);
    let hits = exec.map(pairs as usize, |p| {
        let p = p as u64;
        let (v0, v1) = joint.pair(seed, domain::SLEPIAN_ORIGINAL, p);
        let mut xi_rng = super::stream_rng(seed, domain::SLEPIAN_SHIFT, p);
        let xi: [f64; 2] = [rand::Rng::sample(&mut xi_rng, rand_distr::StandardNormal), rand::Rng::sample(&mut xi_rng, rand_distr::StandardNormal)];
        let mut u_hit = [false; 2];
        for (j, (sampler, &r)) in blocks.iter().zip(levels).enumerate() {
            let stream = p * spans.len() as u64 + j as u64;
            let (b0, b1) = sampler.pair(seed, domain::SLEPIAN_BLOCKS, stream);
            for (h, (block, x)) in u_hit.iter_mut().zip([(b0, xi[0]), (b1, xi[1])]) {
                *h |= block.iter().any(|&y| shrink * y + shift * x >= r);
            }
        }
        let keep_second = 2 * p + 1 < n_replicates;
        let v = exceeds_original(&v0) as u64 + (keep_second && exceeds_original(&v1)) as u64;
        let u = u_hit[0] as u64 + (keep_second && u_hit[1]) as u64;
        (v, u)
    });
    let (v_hits, u_hits) = hits.into_iter().fold((0, 0), |(a, b), (v, u)| (a + v, b + u));

    let n = n_replicates as f64;
    let (pv, pu) = (v_hits as f64 / n, u_hits as f64 / n);
    let (se_v, se_u) = ((pv * (1.0 - pv) / n).sqrt(), (pu * (1.0 - pu) / n).sqrt());
    let se = (se_v * se_v + se_u * se_u).sqrt();
    let passed = match direction {
        SlepianDirection::OriginalAtLeastInflated => pv >= pu - 2.0 * se,
        SlepianDirection::InflatedAtLeastOriginal => pu >= pv - 2.0 * se,
        SlepianDirection::Equal => (pu - pv).abs() <= 2.0 * se,
    };
    Ok(SlepianReport {
        delta_sq,
        p_original: pv,
        p_inflated: pu,
        se_original: se_v,
        se_inflated: se_u,
        se_combined: se,
        direction,
        max_cross_covariance: if single { 0.0 } else { cross_max },
        passed,
        n_replicates,
    })
}
