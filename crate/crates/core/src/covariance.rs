//! Stationary covariance models `ρ(t) = E[Y(t)Y(0)]`.
//!
//! Two standing assumptions drive everything downstream:
//!
//! - local (Pickands) behaviour `ρ(t) = v²(1 − Q|t|^α + o(|t|^α))` as `t → 0`;
//! - weak mixing (Berman) `ρ(t) = o(1/ln t)` as `t → ∞`.
//!
//! Analytic models are the power-exponential family
//! `ρ(t) = v² exp(−κ|t|^α)`, for which `Q = κ` exactly. Tabulated models carry
//! a `(t, ρ(t))` table with linear interpolation and no extrapolation.

use std::f64::consts::PI;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

/// A tabulated covariance: strictly increasing lags starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCovariance {
    lags: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedCovariance {
    pub fn new(lags: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if lags.len() != values.len() {
            return Err(Error::invalid("table", "lag and value columns differ in length"));
        }
        if lags.len() < 3 {
            return Err(Error::invalid("table", "need at least 3 rows"));
        }
        if lags[0] != 0.0 {
            return Err(Error::invalid("table", format!("first lag must be 0, got {}", lags[0])));
        }
        if let Some(w) = lags.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(
                "table",
                format!("lags must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        if values.iter().chain(&lags).any(|x| !x.is_finite()) {
            return Err(Error::invalid("table", "non-finite entry"));
        }
        let var = values[0];
        if var <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!("ρ(0) = {var} must be > 0")));
        }
        if let Some((t, r)) = lags.iter().zip(&values).find(|(_, r)| r.abs() > var * (1.0 + 1e-12)) {
            return Err(Error::NotPositiveDefinite(format!("|ρ({t})| = {} exceeds ρ(0) = {var}", r.abs())));
        }
        Ok(Self { lags, values })
    }

    /// Parse whitespace-separated `t value` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lags = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let mut next = |what| -> Result<f64> {
                cols.next()
                    .ok_or_else(|| Error::invalid("table", format!("line {}: missing {what}", lineno + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::invalid("table", format!("line {}: {what}: {e}", lineno + 1)))
            };
            lags.push(next("lag")?);
            values.push(next("value")?);
        }
        Self::new(lags, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn max_lag(&self) -> f64 {
        *self.lags.last().expect("non-empty table")
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn interpolate(&self, t: f64) -> Result<f64> {
        let max = self.max_lag();
        if t > max {
            return Err(Error::OutOfTableRange { lag: t, max });
        }
        let k = self.lags.partition_point(|&x| x <= t);
        if k == self.lags.len() {
            return Ok(self.values[k - 1]);
        }
        let (t0, t1) = (self.lags[k - 1], self.lags[k]);
        let (r0, r1) = (self.values[k - 1], self.values[k]);
        Ok(r0 + (r1 - r0) * (t - t0) / (t1 - t0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceKind {
    /// `ρ(t) = v² exp(−κ|t|^α)`, `α ∈ (0, 2]`, `κ > 0`.
    PowerExponential { alpha: f64, kappa: f64 },
    Tabulated(TabulatedCovariance),
}

/// A stationary covariance with its declared local parameters `(v, Q, α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    kind: CovarianceKind,
    v: f64,
    q: f64,
    alpha: f64,
    pickands_constant: Option<f64>,
}

impl CovarianceModel {
    pub fn power_exponential(alpha: f64, kappa: f64, v: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::invalid("alpha", format!("must lie in (0, 2], got {alpha}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("kappa", format!("must be > 0, got {kappa}")));
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid("v", format!("must be > 0, got {v}")));
        }
        Ok(Self {
            kind: CovarianceKind::PowerExponential { alpha, kappa },
            v,
            q: kappa,
            alpha,
            pickands_constant: None,
        })
    }

    /// `ρ(t) = e^{−|t|}`.
    pub fn ornstein_uhlenbeck() -> Self {
        Self::power_exponential(1.0, 1.0, 1.0).expect("valid parameters")
    }

    /// `ρ(t) = e^{−t²}`.
    pub fn gaussian_kernel() -> Self {
        Self::power_exponential(2.0, 1.0, 1.0).expect("valid parameters")
    }

    /// A tabulated model. `(α, Q)` are taken from `declared` when given,
    /// otherwise read off the two smallest positive lags by a log–log slope.
    pub fn tabulated(table: TabulatedCovariance, declared: Option<(f64, f64)>) -> Result<Self> {
        let v = table.values[0].sqrt();
        let (alpha, q) = match declared {
            Some(p) => p,
            None => {
                let var = table.values[0];
                let (t1, t2) = (table.lags[1], table.lags[2]);
                let (r1, r2) = (var - table.values[1], var - table.values[2]);
                if !(r1 > 0.0 && r2 > r1) {
                    return Err(Error::invalid(
                        "table",
                        "cannot read (α, Q) from the first lags: v² − ρ(t) must be positive and increasing",
                    ));
                }
                let alpha = (r2 / r1).ln() / (t2 / t1).ln();
                (alpha, r1 / (var * t1.powf(alpha)))
            }
        };
        if !(alpha > 0.0 && alpha <= 2.0 + 1e-9) {
            return Err(Error::invalid("alpha", format!("tabulated α = {alpha} outside (0, 2]")));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::invalid("Q", format!("tabulated Q = {q} must be > 0")));
        }
        let model = Self { kind: CovarianceKind::Tabulated(table), v, q, alpha: alpha.min(2.0), pickands_constant: None };
        model.check_psd()?;
        Ok(model)
    }

    /// Override the declared `(v, Q, α)` without touching the covariance
    /// itself. Certification then checks the declaration against `ρ`.
    pub fn with_declared(mut self, v: f64, q: f64, alpha: f64) -> Self {
        self.v = v;
        self.q = q;
        self.alpha = alpha;
        self
    }

    /// Supply `H_α` for `α ∉ {1, 2}` (or override the closed forms).
    pub fn with_pickands_constant(mut self, h: f64) -> Self {
        self.pickands_constant = Some(h);
        self
    }

    pub fn kind(&self) -> &CovarianceKind {
        &self.kind
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `H_α`: the supplied value, else `1` for `α = 1` and `π^{−1/2}` for `α = 2`.
    pub fn pickands_constant(&self) -> Result<f64> {
        if let Some(h) = self.pickands_constant {
            return Ok(h);
        }
        if self.alpha == 1.0 {
            Ok(1.0)
        } else if self.alpha == 2.0 {
            Ok(1.0 / PI.sqrt())
        } else {
            Err(Error::MissingPickandsConstant { alpha: self.alpha })
        }
    }

    /// `ρ(lag)`, symmetric in the sign of `lag`.
    pub fn evaluate(&self, lag: f64) -> Result<f64> {
        let t = lag.abs();
        match &self.kind {
            CovarianceKind::PowerExponential { alpha, kappa } => {
                Ok(self.v * self.v * (-kappa * t.powf(*alpha)).exp())
            }
            CovarianceKind::Tabulated(table) => table.interpolate(t),
        }
    }

    /// Largest lag at which [`CovarianceModel::evaluate`] succeeds.
    pub fn max_lag(&self) -> f64 {
        match &self.kind {
            CovarianceKind::PowerExponential { .. } => f64::INFINITY,
            CovarianceKind::Tabulated(t) => t.max_lag(),
        }
    }

    /// Time over which correlation drops to `1/e`; the mixing scale used by
    /// grid policies.
    pub fn correlation_length(&self) -> f64 {
        match &self.kind {
            CovarianceKind::PowerExponential { alpha, kappa } => kappa.powf(-1.0 / alpha),
            CovarianceKind::Tabulated(table) => {
                let target = table.values[0] / std::f64::consts::E;
                table
                    .lags
                    .iter()
                    .zip(&table.values)
                    .find(|(_, &r)| r <= target)
                    .map_or(table.max_lag(), |(&t, _)| t)
            }
        }
    }

    /// Standardised copy: `v → 1` by value rescaling and `Q → 1` by the time
    /// change `t ↦ Q^{1/α} t`.
    pub fn standardized(&self) -> Self {
        let s = self.q.powf(1.0 / self.alpha);
        let kind = match &self.kind {
            CovarianceKind::PowerExponential { alpha, kappa } => {
                CovarianceKind::PowerExponential { alpha: *alpha, kappa: kappa / s.powf(*alpha) }
            }
            CovarianceKind::Tabulated(t) => {
                let var = self.v * self.v;
                CovarianceKind::Tabulated(TabulatedCovariance {
                    lags: t.lags.iter().map(|x| x * s).collect(),
                    values: t.values.iter().map(|r| r / var).collect(),
                })
            }
        };
        Self { kind, v: 1.0, q: 1.0, alpha: self.alpha, pickands_constant: self.pickands_constant }
    }

    /// Spot-check positive semidefiniteness of a tabulated model through a
    /// Cholesky factorisation of the Toeplitz matrix on its leading lags.
    fn check_psd(&self) -> Result<()> {
        let CovarianceKind::Tabulated(table) = &self.kind else {
            return Ok(());
        };
        let step = table.lags[1];
        let n = ((table.max_lag() / step).floor() as usize + 1).min(256);
        let gram: Vec<f64> = (0..n).map(|k| table.interpolate(k as f64 * step)).collect::<Result<_>>()?;
        let jitter = 1e-10 * gram[0];
        crate::simulate::cholesky_toeplitz(&gram, jitter)
            .map(|_| ())
            .map_err(|_| Error::NotPositiveDefinite(format!("Toeplitz matrix on {n} leading lags is not PSD")))
    }
}

/// Outcome of [`certify_pickands`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PickandsCertificate {
    pub v: f64,
    pub q: f64,
    pub alpha: f64,
    /// Largest relative deviation of the fitted `(v, Q, α)` from the declaration.
    pub max_relative_deviation: f64,
    pub tolerance: f64,
    /// `(t, |(v²−ρ(t))/(v²Qt^α) − 1|)` along the ladder.
    pub residuals: Vec<(f64, f64)>,
}

/// Default relative tolerance for [`certify_pickands`].
pub fn default_pickands_tolerance(model: &CovarianceModel) -> f64 {
    match model.kind {
        CovarianceKind::PowerExponential { .. } => 1e-3,
        CovarianceKind::Tabulated(_) => 1e-2,
    }
}

/// `2^{−k}` for `k` in `from..=to`.
pub fn dyadic_ladder(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}

/// Verify the local expansion `ρ(t) = v²(1 − Q t^α + o(t^α))` on a
/// decreasing lag ladder.
///
/// `α` is read off the log–log slope of `v² − ρ(t)` between the two finest
/// lags; `Q` is the finest-lag ratio `(v² − ρ)/(v² t^α)` at the declared `α`
/// for analytic models (which verifies rather than refits) and at the fitted
/// `α` for tabulated ones. Passes iff every fitted parameter is within
/// `tolerance` of its declaration and the residual curve shrinks toward 0.
pub fn certify_pickands(model: &CovarianceModel, lag_ladder: &[f64], tolerance: f64) -> Result<PickandsCertificate> {
    if lag_ladder.len() < 8 {
        return Err(Error::invalid("lag_ladder", format!("need ≥ 8 lags, got {}", lag_ladder.len())));
    }
    if lag_ladder.windows(2).any(|w| !(w[1] < w[0])) || !(lag_ladder[lag_ladder.len() - 1] > 0.0) {
        return Err(Error::invalid("lag_ladder", "must be strictly decreasing and positive"));
    }
    let var = model.evaluate(0.0)?;
    let (v, q, alpha) = (model.v, model.q, model.alpha);
    let decl_var = v * v;
    let mut deficits = Vec::with_capacity(lag_ladder.len());
    let mut residuals = Vec::with_capacity(lag_ladder.len());
    for &t in lag_ladder {
        let deficit = var - model.evaluate(t)?;
        deficits.push(deficit);
        residuals.push((t, (deficit / (decl_var * q * t.powf(alpha)) - 1.0).abs()));
    }
    let fail = |detail: String, residuals: Vec<(f64, f64)>| Error::CertificationFailed {
        what: "Pickands",
        detail,
        residuals,
    };

    let n = lag_ladder.len();
    let (t1, t2) = (lag_ladder[n - 2], lag_ladder[n - 1]);
    let (d1, d2) = (deficits[n - 2], deficits[n - 1]);
    if !(d1 > 0.0 && d2 > 0.0) {
        return Err(fail("v² − ρ(t) is not positive at the finest lags".into(), residuals));
    }
    let alpha_fit = (d1 / d2).ln() / (t1 / t2).ln();
    let q_alpha = match model.kind {
        CovarianceKind::PowerExponential { .. } => alpha,
        CovarianceKind::Tabulated(_) => alpha_fit,
    };
    let v_fit = var.sqrt();
    let q_fit = d2 / (var * t2.powf(q_alpha));
    if !(alpha_fit.is_finite() && q_fit.is_finite()) {
        return Err(fail("log–log fit produced non-finite parameters".into(), residuals));
    }

    // Residuals must shrink toward the origin; allow round-off-sized wobble.
    let noisy = residuals
        .windows(2)
        .any(|w| w[1].1 > w[0].1 * (1.0 + 1e-6) + 1e-9);
    if noisy {
        return Err(fail("residual curve is not monotone toward t = 0".into(), residuals));
    }

    let dev = [(v_fit - v) / v, (q_fit - q) / q, (alpha_fit - alpha) / alpha]
        .into_iter()
        .map(f64::abs)
        .fold(0.0, f64::max);
    let cert = PickandsCertificate { v: v_fit, q: q_fit, alpha: alpha_fit, max_relative_deviation: dev, tolerance, residuals };
    if dev < tolerance {
        Ok(cert)
    } else {
        Err(fail(
            format!("fitted (v, Q, α) = ({v_fit:.6}, {q_fit:.6}, {alpha_fit:.6}) deviates {dev:.3e} from declared ({v}, {q}, {alpha})"),
            cert.residuals,
        ))
    }
}

/// Outcome of [`certify_berman`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BermanCertificate {
    pub passed: bool,
    /// `(t, |ρ(t)|·ln t)` along the ladder.
    pub witness: Vec<(f64, f64)>,
    pub reason: String,
}

/// Check `ρ(t) = o(1/ln t)`: beyond a burn-in (lags with `ln t < 1`) the
/// witness `|ρ(t)| ln t` must be non-increasing and end below a tenth of its
/// post-burn-in start (or below `1e-12` absolutely).
pub fn certify_berman(model: &CovarianceModel, horizon_ladder: &[f64]) -> BermanCertificate {
    let failed = |reason: String, witness| BermanCertificate { passed: false, witness, reason };
    if horizon_ladder.windows(2).any(|w| !(w[1] > w[0])) {
        return failed("horizon ladder must be strictly increasing".into(), vec![]);
    }
    match horizon_ladder.last() {
        Some(&t) if t >= 1e3 => {}
        _ => return failed("horizon ladder must reach t ≥ 10³".into(), vec![]),
    }
    let mut witness = Vec::with_capacity(horizon_ladder.len());
    for &t in horizon_ladder {
        match model.evaluate(t) {
            Ok(r) => witness.push((t, r.abs() * t.ln())),
            Err(e) => return failed(format!("cannot evaluate ρ({t}): {e}"), witness),
        }
    }
    let tail: Vec<f64> = witness.iter().filter(|(t, _)| t.ln() >= 1.0).map(|&(_, w)| w).collect();
    if tail.len() < 2 {
        return failed("fewer than two ladder points beyond the burn-in t ≥ e".into(), witness);
    }
    if tail.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-9) + 1e-300) {
        return failed("witness |ρ(t)|·ln t is not non-increasing".into(), witness);
    }
    let (first, last) = (tail[0], tail[tail.len() - 1]);
    if last <= 0.1 * first || last < 1e-12 {
        BermanCertificate { passed: true, witness, reason: "witness decays toward 0".into() }
    } else {
        failed(format!("witness stalls: {last:.3e} at the horizon vs {first:.3e} after burn-in"), witness)
    }
}

/// Geometric horizon ladder `10^{k/2}`, `k = 0..=8` (1 to 10⁴).
pub fn default_berman_ladder() -> Vec<f64> {
    (0..=8).map(|k| 10f64.powf(k as f64 / 2.0)).collect()
}
