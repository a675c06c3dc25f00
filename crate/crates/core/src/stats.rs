//! Gumbel limit law, Kolmogorov–Smirnov distance and the
//! Pickands–Piterbarg tail approximation.

use std::f64::consts::PI;

use serde::Serialize;

use crate::covariance::CovarianceModel;
use crate::{Error, Result};

/// `F(r) = exp(−c·e^{−r})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GumbelLaw {
    pub c: f64,
}

impl GumbelLaw {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("c", format!("rate constant must be finite and > 0, got {c}")));
        }
        Ok(Self { c })
    }

    /// Evaluated as `exp(−exp(ln c − r))` so that very negative `r`
    /// underflows cleanly to 0 instead of forming `c·∞`.
    pub fn cdf(&self, r: f64) -> f64 {
        (-(self.c.ln() - r).exp()).exp()
    }

    /// `r = −ln(−ln p / c)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid("p", format!("probability must lie in (0, 1), got {p}")));
        }
        Ok(self.c.ln() - (-p.ln()).ln())
    }

    pub fn median(&self) -> f64 {
        self.c.ln() - std::f64::consts::LN_2.ln()
    }
}

/// Fraction of `samples` that are `≤ x`.
pub fn empirical_cdf(samples: &[f64], x: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    samples.iter().filter(|&&s| s <= x).count() as f64 / samples.len() as f64
}

/// One-sample KS statistic `sup |F_n − F|`. `samples` need not be sorted.
pub fn ks_distance(samples: &[f64], law: &GumbelLaw) -> Result<f64> {
    ks_distance_by(samples, |x| law.cdf(x))
}

/// KS statistic against an arbitrary continuous CDF.
pub fn ks_distance_by(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "KS distance needs at least one sample"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("samples", "samples must be finite"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max))
}

/// Empirical versus theoretical quantiles at the given probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileRow {
    pub p: f64,
    pub empirical: f64,
    pub theoretical: f64,
}

/// Quantile table for plotting; empirical quantiles use the type-7 rule.
pub fn quantile_table(samples: &[f64], law: &GumbelLaw, probs: &[f64]) -> Result<Vec<QuantileRow>> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "quantile table needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    probs
        .iter()
        .map(|&p| {
            let theoretical = law.quantile(p)?;
            let h = (sorted.len() - 1) as f64 * p;
            let (lo, frac) = (h.floor() as usize, h.fract());
            let hi = (lo + 1).min(sorted.len() - 1);
            let empirical = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
            Ok(QuantileRow { p, empirical, theoretical })
        })
        .collect()
}

/// Smallest accepted `t·Q^{1/α}·(x/v)^{2/α}` (the "t·x^{2/α} → ∞" proxy).
pub const PP_MIN_SCALE: f64 = 50.0;
/// Largest accepted formula value (the "right-hand side → 0" proxy).
pub const PP_MAX_VALUE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpTail {
    pub x: f64,
    pub t: f64,
    /// `(Q^{1/α}H_α/√(2π))·t·(x/v)^{2/α−1}·e^{−x²/2v²}`.
    pub value: f64,
    /// `t·Q^{1/α}·(x/v)^{2/α}`, the number of independent "clusters" in `[0, t]`.
    pub scale: f64,
    pub scale_ok: bool,
    pub value_ok: bool,
}

impl PpTail {
    pub fn in_regime(&self) -> bool {
        self.scale_ok && self.value_ok
    }
}

/// The formula together with its regime flags, never failing on regime.
pub fn pp_tail_report(model: &CovarianceModel, x: f64, t: f64) -> Result<PpTail> {
    if !(x > 0.0 && x.is_finite()) || !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("x", format!("level and interval length must be positive, got x={x}, t={t}")));
    }
    let (alpha, u) = (model.alpha(), x / model.v());
    let q_root = model.q().powf(1.0 / alpha);
    let h = model.pickands_constant()?;
    let value = q_root * h / (2.0 * PI).sqrt() * t * u.powf(2.0 / alpha - 1.0) * (-0.5 * u * u).exp();
    let scale = t * q_root * u.powf(2.0 / alpha);
    Ok(PpTail { x, t, value, scale, scale_ok: scale >= PP_MIN_SCALE, value_ok: value < PP_MAX_VALUE })
}

/// Asymptotic `P{max_{[0,t]} Y ≥ x}`; outside the regime proxies this is an
/// [`Error::OutOfRegime`] that still carries the formula value.
pub fn pp_tail(model: &CovarianceModel, x: f64, t: f64) -> Result<PpTail> {
    let r = pp_tail_report(model, x, t)?;
    if !r.in_regime() {
        let mut why = Vec::new();
        if !r.scale_ok {
            why.push(format!("t·Q^(1/α)·(x/v)^(2/α) = {:.3} < {PP_MIN_SCALE}", r.scale));
        }
        if !r.value_ok {
            why.push(format!("value {:.4} ≥ {PP_MAX_VALUE}", r.value));
        }
        return Err(Error::OutOfRegime { value: r.value, reason: why.join(", ") });
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cdf_examples() {
        let one = GumbelLaw::new(1.0).unwrap();
        assert!((one.cdf(0.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(one.cdf(1e4), 1.0);
        assert_eq!(one.cdf(-1e4), 0.0);
        let c = GumbelLaw::new(1.0 / (2.0 * PI).sqrt()).unwrap();
        assert!((c.cdf(0.0) - 0.671_03).abs() < 1e-5);
        assert!(GumbelLaw::new(0.0).is_err());
    }

    #[test]
    fn quantile_examples() {
        let one = GumbelLaw::new(1.0).unwrap();
        assert!(one.quantile((-1.0f64).exp()).unwrap().abs() < 1e-15);
        assert!((one.quantile(0.5).unwrap() - 0.366_512_920_581_664_3).abs() < 1e-12);
        assert!((one.median() - 0.366_512_920_581_664_3).abs() < 1e-12);
        assert!(one.quantile(0.0).is_err() && one.quantile(1.0).is_err() && one.quantile(f64::NAN).is_err());
        for i in 1..100 {
            let p = i as f64 / 100.0;
            assert!((one.cdf(one.quantile(p).unwrap()) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_small_cases() {
        let law = GumbelLaw::new(1.0).unwrap();
        assert!((ks_distance(&[law.median()], &law).unwrap() - 0.5).abs() < 1e-12);
        assert!(ks_distance(&[], &law).is_err());
        assert!(ks_distance(&[f64::NAN], &law).is_err());
    }

    fn gumbel_sample(law: &GumbelLaw, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| law.quantile(rng.random_range(1e-300..1.0)).unwrap()).collect()
    }

    #[test]
    fn ks_null_frequency() {
        // Under H0 P{√n·D < 1.95} ≈ 0.999; with 100 seeds at least 90 must pass.
        let law = GumbelLaw::new(1.0 / (2.0 * PI).sqrt()).unwrap();
        let n = 10_000;
        let ok = (0..100)
            .filter(|&s| ks_distance(&gumbel_sample(&law, n, s), &law).unwrap() < 1.95 / (n as f64).sqrt())
            .count();
        assert!(ok >= 90, "{ok}/100");
    }

    #[test]
    fn ks_shifted_sample() {
        let law = GumbelLaw::new(1.0).unwrap();
        let shifted: Vec<f64> = gumbel_sample(&law, 20_000, 5).iter().map(|x| x + 5.0).collect();
        let d = ks_distance(&shifted, &law).unwrap();
        let sup = (0..=200_000)
            .map(|i| {
                let x = -20.0 + i as f64 * 2e-4;
                (law.cdf(x) - law.cdf(x - 5.0)).abs()
            })
            .fold(0.0, f64::max);
        assert!((d - sup).abs() < 0.02, "{d} vs {sup}");
    }

    #[test]
    fn quantile_table_tracks_law() {
        let law = GumbelLaw::new(1.0).unwrap();
        let rows = quantile_table(&gumbel_sample(&law, 50_000, 1), &law, &[0.1, 0.5, 0.9]).unwrap();
        for r in rows {
            assert!((r.empirical - r.theoretical).abs() < 0.05, "{r:?}");
        }
        assert!((empirical_cdf(&[1.0, 2.0, 3.0, 4.0], 2.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pp_tail_ou_value() {
        let m = CovarianceModel::ornstein_uhlenbeck();
        let oracle = 10.0 * 3.5 * (-6.125f64).exp() / (2.0 * PI).sqrt();
        let r = pp_tail(&m, 3.5, 10.0).unwrap();
        assert!((r.value - oracle).abs() < 1e-15);
        assert!((r.value - 0.030_544).abs() < 1e-6);
        match pp_tail(&m, 1.0, 10.0) {
            Err(Error::OutOfRegime { value, .. }) => assert!(value > 0.5),
            o => panic!("{o:?}"),
        }
        assert!(matches!(pp_tail(&m, 3.5, 1.0), Err(Error::OutOfRegime { .. })));
    }

    #[test]
    fn pp_tail_v_scaling_exact() {
        let a = CovarianceModel::power_exponential(1.0, 1.0, 1.0).unwrap();
        let b = CovarianceModel::power_exponential(1.0, 1.0, 2.0).unwrap();
        for x in [3.0, 3.5, 4.0, 5.0] {
            assert_eq!(pp_tail_report(&a, x, 10.0).unwrap().value, pp_tail_report(&b, 2.0 * x, 10.0).unwrap().value);
        }
    }

    proptest! {
        #[test]
        fn pp_tail_monotone_in_x_linear_in_t(x in 2.0f64..8.0, dx in 0.01f64..1.0, t in 1.0f64..100.0, k in 1.0f64..10.0) {
            for m in [CovarianceModel::ornstein_uhlenbeck(), CovarianceModel::gaussian_kernel()] {
                let lo = pp_tail_report(&m, x, t).unwrap().value;
                let hi = pp_tail_report(&m, x + dx, t).unwrap().value;
                prop_assert!(hi < lo);
                let kt = pp_tail_report(&m, x, k * t).unwrap().value;
                prop_assert!((kt - k * lo).abs() <= 1e-12 * kt.abs());
            }
        }

        #[test]
        fn ks_invariant_under_monotone_relabeling(seed in 0u64..1000, n in 1usize..300) {
            // Pairing (x_i, F) with (g(x_i), F∘g⁻¹) for increasing g preserves D.
            let law = GumbelLaw::new(0.7).unwrap();
            let xs = gumbel_sample(&law, n, seed);
            let d = ks_distance(&xs, &law).unwrap();
            let g = |x: f64| x.exp();
            let ys: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
            let d2 = ks_distance_by(&ys, |y| law.cdf(y.ln())).unwrap();
            prop_assert!((d - d2).abs() < 1e-12);
        }
    }
}
