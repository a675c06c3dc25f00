//! Boundary functions `f` and the exponents the limit theorem reads off them.
//!
//! A boundary is increasing with `f → ∞` on its validity ray `[x_min, ∞)`.
//! Besides `f`, `f′`, `f″`, `f⁻¹`, `(f⁻¹)′` it exposes log-space forms
//! (`ln f`, `f′/f`, `ln f(x+h) − ln f(x)`, inverse evaluated at `e^ℓ`) so the
//! asymptotic verifiers can be pushed to drifts far below `f64::MIN_POSITIVE`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{Drift, Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Callables for a user-supplied boundary.
#[derive(Clone)]
pub struct UserBoundary {
    pub name: String,
    pub f: RealFn,
    pub df: RealFn,
    pub d2f: RealFn,
    pub inverse: RealFn,
    pub inverse_deriv: RealFn,
    /// Smallest `x` at which the callables may be evaluated.
    pub domain_min: f64,
}

impl UserBoundary {
    pub fn new<F, D, D2, I, ID>(name: impl Into<String>, f: F, df: D, d2f: D2, inverse: I, inverse_deriv: ID) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        D2: Fn(f64) -> f64 + Send + Sync + 'static,
        I: Fn(f64) -> f64 + Send + Sync + 'static,
        ID: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
            df: Arc::new(df),
            d2f: Arc::new(d2f),
            inverse: Arc::new(inverse),
            inverse_deriv: Arc::new(inverse_deriv),
            domain_min: 0.0,
        }
    }

    pub fn with_domain_min(mut self, x: f64) -> Self {
        self.domain_min = x;
        self
    }
}

impl fmt::Debug for UserBoundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserBoundary").field("name", &self.name).finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum BoundaryKind {
    /// `f(x) = x^d`, `d > 0`, `d ≠ 1`.
    Polynomial { d: f64 },
    /// `f(x) = exp(x^q)`, `0 < q < 1`.
    StretchedExponential { q: f64 },
    UserDefined(UserBoundary),
}

/// Growth-rate and regularity exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryExponents {
    /// `f″/f′ ≍ x^{−λ}`, `λ ∈ (0, 1]`.
    pub lambda: f64,
    /// Near-critical regularity exponent.
    pub beta: f64,
    /// Far-from-critical regularity exponent.
    pub beta_tilde: f64,
    /// Half-width of the near-critical window, `(0, 1)`.
    pub reg_radius: f64,
    /// Start of the validity ray.
    pub x_min: f64,
    /// Constant in `f″/f′ ∼ ν x^{−λ}` when known (enables the refined `γ`).
    pub nu: Option<f64>,
}

/// Default half-width of the near-critical regularity window.
pub const DEFAULT_REG_RADIUS: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct Boundary {
    kind: BoundaryKind,
    exponents: BoundaryExponents,
}

impl Boundary {
    pub fn polynomial(d: f64) -> Result<Self> {
        if d == 1.0 {
            return Err(Error::UnsupportedBoundary(
                "linear boundary f(x) = x (d = 1) is the regime of the earlier linear-drift result; \
                 λ is undefined since f″ ≡ 0"
                    .into(),
            ));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::invalid("d", format!("polynomial exponent must be > 0, got {d}")));
        }
        let beta = 1.0 / d - 1.0;
        Ok(Self {
            kind: BoundaryKind::Polynomial { d },
            exponents: BoundaryExponents {
                lambda: 1.0,
                beta,
                beta_tilde: beta,
                reg_radius: DEFAULT_REG_RADIUS,
                x_min: 1.0,
                nu: Some(d - 1.0),
            },
        })
    }

    pub fn stretched_exponential(q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::invalid("q", format!("stretched-exponential exponent must lie in (0, 1), got {q}")));
        }
        Ok(Self {
            kind: BoundaryKind::StretchedExponential { q },
            exponents: BoundaryExponents {
                lambda: 1.0 - q,
                beta: -1.0,
                beta_tilde: 0.0,
                reg_radius: DEFAULT_REG_RADIUS,
                x_min: 1.0,
                nu: Some(q),
            },
        })
    }

    /// A user boundary with declared exponents. Monotonicity and inverse
    /// consistency are spot-checked on a probe ladder over `[x_min, 10⁶ x_min]`.
    pub fn user_defined(user: UserBoundary, exponents: BoundaryExponents) -> Result<Self> {
        let e = exponents;
        if !(e.lambda > 0.0 && e.lambda <= 1.0) {
            return Err(Error::invalid("lambda", format!("must lie in (0, 1], got {}", e.lambda)));
        }
        if !(e.reg_radius > 0.0 && e.reg_radius < 1.0) {
            return Err(Error::invalid("reg_radius", format!("must lie in (0, 1), got {}", e.reg_radius)));
        }
        if !(e.x_min.is_finite() && e.x_min >= user.domain_min) {
            return Err(Error::invalid("x_min", "must be finite and inside the callables' domain"));
        }
        if !(e.beta.is_finite() && e.beta_tilde.is_finite()) {
            return Err(Error::invalid("beta", "regularity exponents must be finite"));
        }
        let b = Self { kind: BoundaryKind::UserDefined(user), exponents: e };
        let start = e.x_min.max(1e-3);
        let probe: Vec<f64> = (0..=24).map(|k| start * 10f64.powf(k as f64 / 4.0)).collect();
        for &x in &probe {
            let d = b.deriv(x);
            if !(d > 0.0) {
                return Err(Error::UnsupportedBoundary(format!(
                    "boundary must be increasing on its validity ray: f′({x}) = {d}"
                )));
            }
            let y = b.value(x);
            if y.is_finite() {
                let back = b.inverse(y);
                if ((back - x) / x).abs() > 1e-8 {
                    return Err(Error::invalid("inverse", format!("f⁻¹(f({x})) = {back}")));
                }
            }
        }
        Ok(b)
    }

    pub fn kind(&self) -> &BoundaryKind {
        &self.kind
    }

    pub fn exponents(&self) -> &BoundaryExponents {
        &self.exponents
    }

    pub fn lambda(&self) -> f64 {
        self.exponents.lambda
    }

    pub fn beta(&self) -> f64 {
        self.exponents.beta
    }

    pub fn beta_tilde(&self) -> f64 {
        self.exponents.beta_tilde
    }

    pub fn x_min(&self) -> f64 {
        self.exponents.x_min
    }

    /// Smallest argument at which `f` may be evaluated (0 for built-ins).
    pub fn domain_min(&self) -> f64 {
        match &self.kind {
            BoundaryKind::UserDefined(u) => u.domain_min,
            _ => 0.0,
        }
    }

    pub fn with_reg_radius(mut self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::invalid("reg_radius", format!("must lie in (0, 1), got {r}")));
        }
        self.exponents.reg_radius = r;
        Ok(self)
    }

    pub fn label(&self) -> String {
        match &self.kind {
            BoundaryKind::Polynomial { d } => format!("polynomial(d={d})"),
            BoundaryKind::StretchedExponential { q } => format!("stretched_exp(q={q})"),
            BoundaryKind::UserDefined(u) => format!("user({})", u.name),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => x.powf(*d),
            BoundaryKind::StretchedExponential { q } => x.powf(*q).exp(),
            BoundaryKind::UserDefined(u) => (u.f)(x),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => d * x.powf(d - 1.0),
            BoundaryKind::StretchedExponential { q } => q * x.powf(q - 1.0) * x.powf(*q).exp(),
            BoundaryKind::UserDefined(u) => (u.df)(x),
        }
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => d * (d - 1.0) * x.powf(d - 2.0),
            BoundaryKind::StretchedExponential { q } => {
                let xq = x.powf(*q);
                xq.exp() * (q * q * x.powf(2.0 * q - 2.0) + q * (q - 1.0) * x.powf(q - 2.0))
            }
            BoundaryKind::UserDefined(u) => (u.d2f)(x),
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => y.powf(1.0 / d),
            BoundaryKind::StretchedExponential { q } => y.ln().powf(1.0 / q),
            BoundaryKind::UserDefined(u) => (u.inverse)(y),
        }
    }

    pub fn inverse_deriv(&self, y: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => y.powf(1.0 / d - 1.0) / d,
            BoundaryKind::StretchedExponential { q } => y.ln().powf(1.0 / q - 1.0) / (q * y),
            BoundaryKind::UserDefined(u) => (u.inverse_deriv)(y),
        }
    }

    /// `f″(x)/f′(x)`.
    pub fn curvature_ratio(&self, x: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => (d - 1.0) / x,
            BoundaryKind::StretchedExponential { q } => q * x.powf(q - 1.0) + (q - 1.0) / x,
            BoundaryKind::UserDefined(u) => (u.d2f)(x) / (u.df)(x),
        }
    }

    /// `ln f(x)`.
    pub fn ln_value(&self, x: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => d * x.ln(),
            BoundaryKind::StretchedExponential { q } => x.powf(*q),
            BoundaryKind::UserDefined(u) => (u.f)(x).ln(),
        }
    }

    /// `f′(x)/f(x)`.
    pub fn log_deriv(&self, x: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => d / x,
            BoundaryKind::StretchedExponential { q } => q * x.powf(q - 1.0),
            BoundaryKind::UserDefined(u) => (u.df)(x) / (u.f)(x),
        }
    }

    /// `ln f(x + h) − ln f(x)`, accurate when `|h| ≪ x`.
    pub fn ln_ratio(&self, x: f64, h: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => d * (h / x).ln_1p(),
            BoundaryKind::StretchedExponential { q } => x.powf(*q) * (q * (h / x).ln_1p()).exp_m1(),
            BoundaryKind::UserDefined(u) => ((u.f)(x + h) / (u.f)(x)).ln(),
        }
    }

    /// `f⁻¹(e^ℓ)`.
    pub fn inverse_from_ln(&self, ln_y: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => (ln_y / d).exp(),
            BoundaryKind::StretchedExponential { q } => ln_y.powf(1.0 / q),
            BoundaryKind::UserDefined(u) => (u.inverse)(ln_y.exp()),
        }
    }

    /// `ln (f⁻¹)′(e^ℓ)`.
    pub fn ln_inverse_deriv_from_ln(&self, ln_y: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => (1.0 / d - 1.0) * ln_y - d.ln(),
            BoundaryKind::StretchedExponential { q } => (1.0 / q - 1.0) * ln_y.ln() - q.ln() - ln_y,
            BoundaryKind::UserDefined(u) => (u.inverse_deriv)(ln_y.exp()).ln(),
        }
    }

    /// `ln[y·(f⁻¹)′(y)]` at `y = e^ℓ` — the log-elasticity of the inverse.
    ///
    /// `γ² = 2 ln[(f⁻¹)′(1/ε)/ε]` is twice this at `ℓ = −ln ε`; the closed
    /// forms avoid the cancellation `ℓ + ln (f⁻¹)′(e^ℓ)` would suffer.
    pub fn ln_inverse_elasticity(&self, ln_y: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Polynomial { d } => ln_y / d - d.ln(),
            BoundaryKind::StretchedExponential { q } => (1.0 / q - 1.0) * ln_y.ln() - q.ln(),
            BoundaryKind::UserDefined(u) => ln_y + (u.inverse_deriv)(ln_y.exp()).ln(),
        }
    }
}

/// Result of [`estimate_lambda`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaEstimate {
    /// Minus the least-squares log–log slope of `|f″/f′|` against `x`.
    pub lambda_hat: f64,
    /// `min |f″/f′|·x^λ` over the grid (declared `λ`).
    pub band_min: f64,
    /// `max |f″/f′|·x^λ` over the grid (declared `λ`).
    pub band_max: f64,
    /// `band_max / band_min < 10`.
    pub passed: bool,
}

/// Estimate `λ` from `f″/f′ ≍ x^{−λ}` on a probe grid.
pub fn estimate_lambda(b: &Boundary, probe_grid: &[f64]) -> Result<LambdaEstimate> {
    if probe_grid.len() < 3 || probe_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("probe_grid", "need ≥ 3 strictly increasing points"));
    }
    let (lo, hi) = (probe_grid[0], probe_grid[probe_grid.len() - 1]);
    if lo < b.x_min() {
        return Err(Error::invalid("probe_grid", format!("starts at {lo}, below the validity ray x_min = {}", b.x_min())));
    }
    if hi / lo < 1e3 {
        return Err(Error::invalid("probe_grid", "must span at least three decades"));
    }
    let ratios: Vec<f64> = probe_grid.iter().map(|&x| b.curvature_ratio(x)).collect();
    if ratios.iter().any(|r| !r.is_finite() || *r == 0.0) {
        return Err(Error::LambdaEstimation("f″/f′ vanishes or is not finite on the grid".into()));
    }
    if ratios.iter().any(|r| r.signum() != ratios[0].signum()) {
        return Err(Error::LambdaEstimation("f″/f′ changes sign on the grid".into()));
    }
    let xs: Vec<f64> = probe_grid.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = ratios.iter().map(|r| r.abs().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let lambda = b.lambda();
    let band = probe_grid.iter().zip(&ratios).map(|(x, r)| r.abs() * x.powf(lambda));
    let (band_min, band_max) = band.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(LambdaEstimate { lambda_hat: -sxy / sxx, band_min, band_max, passed: band_max / band_min < 10.0 })
}

/// Log-spaced grid with `per_decade` points per decade over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).ceil().max(1.0) as usize;
    (0..=n).map(|k| lo * (hi / lo).powf(k as f64 / n as f64)).collect()
}

/// Result of [`probe_regularity`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `max |(f⁻¹)′(y/ε) / (y^β (f⁻¹)′(1/ε)) − 1|` over `[(1−ρ)γ, (1+ρ)γ]`.
    pub reg1_max_deviation: f64,
    /// `max (f⁻¹)′(y/ε) / (y^{β̃} (f⁻¹)′(1/ε))` over `[(1+ρ)γ, Y_max]`.
    pub reg2_max_ratio: f64,
    /// Upper end of the far window (`10γ`).
    pub y_max: f64,
}

const REGULARITY_POINTS: usize = 257;

/// Probe both regularity relations at drift `eps` around level `gamma`.
pub fn probe_regularity(b: &Boundary, eps: Drift, gamma: f64) -> Result<RegularityReport> {
    let rho = b.exponents.reg_radius;
    if !(gamma > 1.0 / (1.0 - rho)) {
        return Err(Error::Precondition(format!(
            "γ = {gamma} must exceed 1/(1 − ρ_reg) = {} for a nondegenerate window",
            1.0 / (1.0 - rho)
        )));
    }
    if eps.ln() >= 0.0 {
        return Err(Error::invalid("eps", "must lie in (0, 1)"));
    }
    let base = b.ln_inverse_deriv_from_ln(-eps.ln());
    if !base.is_finite() {
        return Err(Error::Range { y: 1.0 / eps.value() });
    }
    let log_ratio = |y: f64, exponent: f64| -> Result<f64> {
        let v = b.ln_inverse_deriv_from_ln(y.ln() - eps.ln()) - exponent * y.ln() - base;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Range { y })
        }
    };
    let window = |lo: f64, hi: f64| (0..REGULARITY_POINTS).map(move |k| lo + (hi - lo) * k as f64 / (REGULARITY_POINTS - 1) as f64);

    let mut reg1 = 0.0f64;
    for y in window((1.0 - rho) * gamma, (1.0 + rho) * gamma) {
        reg1 = reg1.max(log_ratio(y, b.beta())?.exp_m1().abs());
    }
    let y_max = 10.0 * gamma;
    let mut reg2 = 0.0f64;
    for y in window((1.0 + rho) * gamma, y_max) {
        reg2 = reg2.max(log_ratio(y, b.beta_tilde())?.exp());
    }
    Ok(RegularityReport { reg1_max_deviation: reg1, reg2_max_ratio: reg2, y_max })
}
