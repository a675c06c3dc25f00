//! Experiment configuration: a TOML file, overridden by command-line flags.
//!
//! Precedence is flags > config file > built-in defaults. Unknown keys are
//! rejected so that typos surface as configuration errors.

use std::path::{Path, PathBuf};

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Node, Value};
use gumbel_exit::boundary::{BoundaryExponents, UserBoundary, DEFAULT_REG_RADIUS};
use gumbel_exit::covariance::{dyadic_ladder, TabulatedCovariance};
use gumbel_exit::simulate::{GridPolicy, Interval, DEFAULT_MAX_POINTS};
use gumbel_exit::{Boundary, CovarianceModel, Drift};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceSpec {
    /// `ρ(t) = v² exp(−κ|t|^α)`.
    PowerExponential {
        alpha: f64,
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default = "one")]
        v: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pickands_constant: Option<f64>,
    },
    #[serde(alias = "ou")]
    OrnsteinUhlenbeck {
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default = "one")]
        v: f64,
    },
    Gaussian {
        #[serde(default = "one")]
        kappa: f64,
        #[serde(default = "one")]
        v: f64,
    },
    /// Two-column `t value` file; `(α, Q)` are read off the first lags unless
    /// both are declared.
    Tabulated {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pickands_constant: Option<f64>,
    },
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        CovarianceSpec::OrnsteinUhlenbeck { kappa: 1.0, v: 1.0 }
    }
}

/// A user boundary given as expressions in `x` (or `y` for the inverse).
/// Omitted inverses are computed numerically from `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserBoundarySpec {
    #[serde(default = "user_name")]
    pub name: String,
    pub f: String,
    pub df: String,
    pub d2f: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse_deriv: Option<String>,
    pub lambda: f64,
    pub beta: f64,
    pub beta_tilde: f64,
    #[serde(default = "one")]
    pub x_min: f64,
    #[serde(default)]
    pub domain_min: f64,
    #[serde(default = "reg_radius")]
    pub reg_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    Polynomial { d: f64 },
    #[serde(alias = "stretched_exponential")]
    StretchedExp { q: f64 },
    User(UserBoundarySpec),
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec::Polynomial { d: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonPolicy {
    #[serde(default = "tail_multiple")]
    pub tail_multiple: f64,
    #[serde(default = "guard_multiple")]
    pub guard_multiple: f64,
}

impl Default for HorizonPolicy {
    fn default() -> Self {
        Self { tail_multiple: tail_multiple(), guard_multiple: guard_multiple() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default)]
    pub horizon_policy: HorizonPolicy,
    #[serde(default = "max_points")]
    pub max_points: usize,
    #[serde(default = "censoring_budget")]
    pub censoring_budget: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { step: None, horizon_policy: HorizonPolicy::default(), max_points: max_points(), censoring_budget: censoring_budget() }
    }
}

impl GridSpec {
    pub fn policy(&self) -> GridPolicy {
        GridPolicy {
            step: self.step,
            tail_multiple: self.horizon_policy.tail_multiple,
            guard_multiple: self.horizon_policy.guard_multiple,
            max_points: self.max_points,
            censoring_budget: self.censoring_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpTailSpec {
    #[serde(default = "pp_levels")]
    pub levels: Vec<f64>,
    #[serde(default = "pp_t")]
    pub t: f64,
    #[serde(default = "pp_paths")]
    pub n_paths: u64,
    #[serde(default = "pp_step")]
    pub step: f64,
}

impl Default for PpTailSpec {
    fn default() -> Self {
        Self { levels: pp_levels(), t: pp_t(), n_paths: pp_paths(), step: pp_step() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlepianSpec {
    #[serde(default = "slepian_deltas")]
    pub delta_sq: Vec<f64>,
    #[serde(default = "slepian_intervals")]
    pub intervals: Vec<[f64; 2]>,
    #[serde(default = "slepian_level")]
    pub level: f64,
    #[serde(default = "slepian_step")]
    pub step: f64,
    #[serde(default = "slepian_replicates")]
    pub n_replicates: u64,
}

impl Default for SlepianSpec {
    fn default() -> Self {
        Self {
            delta_sq: slepian_deltas(),
            intervals: slepian_intervals(),
            level: slepian_level(),
            step: slepian_step(),
            n_replicates: slepian_replicates(),
        }
    }
}

impl SlepianSpec {
    pub fn intervals(&self) -> Vec<Interval> {
        self.intervals.iter().map(|&[start, end]| Interval { start, end }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "lattice_product")]
    pub lattice_product: f64,
    #[serde(default = "r_values")]
    pub r_values: Vec<f64>,
    #[serde(default)]
    pub pp_tail: PpTailSpec,
    #[serde(default)]
    pub slepian: SlepianSpec,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { lattice_product: lattice_product(), r_values: r_values(), pp_tail: PpTailSpec::default(), slepian: SlepianSpec::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    /// Pickands lag ladder `2^{−k}`, `k ∈ [from, to]`.
    #[serde(default = "pickands_ladder")]
    pub pickands_ladder: [i32; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pickands_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub berman_ladder: Option<Vec<f64>>,
}

impl Default for CertifySpec {
    fn default() -> Self {
        Self { pickands_ladder: pickands_ladder(), pickands_tolerance: None, berman_ladder: None }
    }
}

impl CertifySpec {
    pub fn lag_ladder(&self) -> Vec<f64> {
        dyadic_ladder(self.pickands_ladder[0], self.pickands_ladder[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub covariance: CovarianceSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    /// Drift ladder. Mutually exclusive with `ln_eps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Vec<f64>>,
    /// Drift ladder given as `ln ε`, for drifts below the `f64` range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ln_eps: Option<Vec<f64>>,
    #[serde(default = "n_replicates")]
    pub n_replicates: u64,
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub certify: CertifySpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config deserialises to defaults")
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub eps: Option<Vec<f64>>,
    pub ln_eps: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub n_replicates: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ExperimentConfig {
    /// Read `path` (if any), apply `overrides`, and resolve relative table
    /// paths against the config file's directory.
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                let mut cfg: ExperimentConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("malformed config {}: {e}", p.display())))?;
                if let CovarianceSpec::Tabulated { path: table, .. } = &mut cfg.covariance {
                    if table.is_relative() {
                        if let Some(dir) = p.parent() {
                            *table = dir.join(&*table);
                        }
                    }
                }
                cfg
            }
            None => ExperimentConfig::default(),
        };
        if overrides.eps.is_some() || overrides.ln_eps.is_some() {
            cfg.eps = overrides.eps;
            cfg.ln_eps = overrides.ln_eps;
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(n) = overrides.n_replicates {
            cfg.n_replicates = n;
        }
        if overrides.out.is_some() {
            cfg.out = overrides.out;
        }
        if let Some(f) = overrides.format {
            cfg.format = f;
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<CovarianceModel, CliError> {
        let m = match &self.covariance {
            CovarianceSpec::PowerExponential { alpha, kappa, v, pickands_constant } => {
                let m = CovarianceModel::power_exponential(*alpha, *kappa, *v)?;
                match pickands_constant {
                    Some(h) => m.with_pickands_constant(*h),
                    None => m,
                }
            }
            CovarianceSpec::OrnsteinUhlenbeck { kappa, v } => CovarianceModel::power_exponential(1.0, *kappa, *v)?,
            CovarianceSpec::Gaussian { kappa, v } => CovarianceModel::power_exponential(2.0, *kappa, *v)?,
            CovarianceSpec::Tabulated { path, alpha, q, pickands_constant } => {
                let declared = match (alpha, q) {
                    (Some(a), Some(q)) => Some((*a, *q)),
                    (None, None) => None,
                    _ => return Err(CliError::Config("covariance: declare both `alpha` and `q`, or neither".into())),
                };
                let m = CovarianceModel::tabulated(TabulatedCovariance::load(path)?, declared)?;
                match pickands_constant {
                    Some(h) => m.with_pickands_constant(*h),
                    None => m,
                }
            }
        };
        Ok(m)
    }

    pub fn boundary(&self) -> Result<Boundary, CliError> {
        Ok(match &self.boundary {
            BoundarySpec::Polynomial { d } => Boundary::polynomial(*d)?,
            BoundarySpec::StretchedExp { q } => Boundary::stretched_exponential(*q)?,
            BoundarySpec::User(u) => user_boundary(u)?,
        })
    }

    /// The drift ladder, checked to be strictly decreasing.
    pub fn ladder(&self) -> Result<Vec<Drift>, CliError> {
        let drifts: Vec<Drift> = match (&self.eps, &self.ln_eps) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either `eps` or `ln_eps`, not both".into())),
            (Some(e), None) => e.iter().map(|&x| Drift::new(x)).collect::<Result<_, _>>()?,
            (None, Some(l)) => l.iter().map(|&x| Drift::from_ln(x)).collect::<Result<_, _>>()?,
            (None, None) => [0.1, 0.05, 0.02].iter().map(|&x| Drift::new(x)).collect::<Result<_, _>>()?,
        };
        if drifts.is_empty() {
            return Err(CliError::Config("eps ladder is empty".into()));
        }
        if drifts.windows(2).any(|w| !(w[1].ln() < w[0].ln())) {
            return Err(CliError::Config("eps ladder must be strictly decreasing".into()));
        }
        Ok(drifts)
    }

    /// The resolved configuration as recorded in artifacts. `out` is left
    /// out so identical experiments produce identical bytes wherever they
    /// are written.
    pub fn header(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(map) = v.as_object_mut() {
            map.remove("out");
        }
        v
    }

    /// One-line form of [`ExperimentConfig::header`].
    pub fn header_json(&self) -> String {
        self.header().to_string()
    }
}

fn compile(key: &str, src: &str, var: &str) -> Result<Node<DefaultNumericTypes>, CliError> {
    build_operator_tree::<DefaultNumericTypes>(src)
        .map_err(|e| CliError::Config(format!("boundary.{key}: cannot parse `{src}`: {e}")))
        .and_then(|node| {
            // One trial evaluation catches unknown identifiers early.
            let probe = 2.0;
            eval(&node, var, probe).map(|_| node).map_err(|e| CliError::Config(format!("boundary.{key}: {e}")))
        })
}

fn eval(node: &Node<DefaultNumericTypes>, var: &str, x: f64) -> Result<f64, String> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    ctx.set_value(var.into(), Value::Float(x)).map_err(|e| e.to_string())?;
    node.eval_number_with_context(&ctx).map_err(|e| e.to_string())
}

fn expr_fn(node: Node<DefaultNumericTypes>, var: &'static str) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    move |x| eval(&node, var, x).unwrap_or(f64::NAN)
}

/// Solve `f(x) = y` for increasing `f` by bracketing then bisection.
fn numeric_inverse(f: &(dyn Fn(f64) -> f64 + Send + Sync), lo: f64, y: f64) -> f64 {
    if !(f(lo) < y) {
        return lo;
    }
    let mut a = lo;
    let mut b = lo.abs().max(1.0) * 2.0;
    while f(b) < y {
        a = b;
        b *= 2.0;
        if !b.is_finite() {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if f(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn user_boundary(u: &UserBoundarySpec) -> Result<Boundary, CliError> {
    let f = std::sync::Arc::new(expr_fn(compile("f", &u.f, "x")?, "x"));
    let df = std::sync::Arc::new(expr_fn(compile("df", &u.df, "x")?, "x"));
    let d2f = expr_fn(compile("d2f", &u.d2f, "x")?, "x");
    let lo = u.domain_min;
    let inverse: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync> = match &u.inverse {
        Some(src) => std::sync::Arc::new(expr_fn(compile("inverse", src, "y")?, "y")),
        None => {
            let f = f.clone();
            std::sync::Arc::new(move |y| numeric_inverse(&*f, lo, y))
        }
    };
    let inverse_deriv: std::sync::Arc<dyn Fn(f64) -> f64 + Send + Sync> = match &u.inverse_deriv {
        Some(src) => std::sync::Arc::new(expr_fn(compile("inverse_deriv", src, "y")?, "y")),
        None => {
            let (inv, df) = (inverse.clone(), df.clone());
            std::sync::Arc::new(move |y| 1.0 / df(inv(y)))
        }
    };
    let f2 = f.clone();
    let df2 = df.clone();
    let user = UserBoundary::new(u.name.clone(), move |x| f2(x), move |x| df2(x), d2f, move |y| inverse(y), move |y| {
        inverse_deriv(y)
    })
    .with_domain_min(u.domain_min);
    let exponents = BoundaryExponents {
        lambda: u.lambda,
        beta: u.beta,
        beta_tilde: u.beta_tilde,
        reg_radius: u.reg_radius,
        x_min: u.x_min,
        nu: u.nu,
    };
    Ok(Boundary::user_defined(user, exponents)?)
}

fn one() -> f64 {
    1.0
}
fn user_name() -> String {
    "user".into()
}
fn reg_radius() -> f64 {
    DEFAULT_REG_RADIUS
}
fn tail_multiple() -> f64 {
    10.0
}
fn guard_multiple() -> f64 {
    2.0
}
fn max_points() -> usize {
    DEFAULT_MAX_POINTS
}
fn censoring_budget() -> f64 {
    1e-3
}
fn pp_levels() -> Vec<f64> {
    vec![3.0, 3.5, 4.0]
}
fn pp_t() -> f64 {
    10.0
}
fn pp_paths() -> u64 {
    100_000
}
fn pp_step() -> f64 {
    0.002
}
fn slepian_deltas() -> Vec<f64> {
    vec![0.05, 0.1]
}
fn slepian_intervals() -> Vec<[f64; 2]> {
    vec![[0.0, 1.0], [4.0, 5.0]]
}
fn slepian_level() -> f64 {
    2.0
}
fn slepian_step() -> f64 {
    0.01
}
fn slepian_replicates() -> u64 {
    100_000
}
fn lattice_product() -> f64 {
    0.05
}
fn r_values() -> Vec<f64> {
    vec![-1.0, 0.0, 1.0]
}
fn pickands_ladder() -> [i32; 2] {
    [4, 12]
}
fn n_replicates() -> u64 {
    1_000
}
fn seed() -> u64 {
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(c.covariance, CovarianceSpec::OrnsteinUhlenbeck { kappa: 1.0, v: 1.0 });
        assert_eq!(c.ladder().unwrap().len(), 3);
        let back: ExperimentConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = toml::from_str::<ExperimentConfig>("seeed = 3").unwrap_err().to_string();
        assert!(e.contains("seeed"), "{e}");
        let e = toml::from_str::<ExperimentConfig>("[boundary]\nkind = \"polynomial\"\ndd = 2").unwrap_err().to_string();
        assert!(e.contains("dd"), "{e}");
    }

    #[test]
    fn ladder_checks() {
        let mut c = ExperimentConfig { eps: Some(vec![0.01, 0.1]), ..Default::default() };
        assert!(matches!(c.ladder(), Err(CliError::Config(_))));
        c.eps = Some(vec![]);
        assert!(matches!(c.ladder(), Err(CliError::Config(_))));
        c.eps = None;
        c.ln_eps = Some(vec![-10.0, -1e6]);
        assert_eq!(c.ladder().unwrap()[1].ln(), -1e6);
    }

    #[test]
    fn user_boundary_matches_builtin() {
        let spec = r#"
            [boundary]
            kind = "user"
            f = "x^2"
            df = "2*x"
            d2f = "2"
            lambda = 1.0
            beta = -0.5
            beta_tilde = -0.5
        "#;
        let c: ExperimentConfig = toml::from_str(spec).unwrap();
        let user = c.boundary().unwrap();
        let poly = Boundary::polynomial(2.0).unwrap();
        for x in [1.0, 3.7, 250.0] {
            assert!((user.value(x) - poly.value(x)).abs() < 1e-12 * poly.value(x));
            let y = poly.value(x);
            assert!((user.inverse(y) - x).abs() < 1e-9 * x);
            assert!((user.inverse_deriv(y) - poly.inverse_deriv(y)).abs() < 1e-9 * poly.inverse_deriv(y));
        }
    }

    #[test]
    fn bad_expression_is_config_error() {
        let spec = "[boundary]\nkind = \"user\"\nf = \"x^^2\"\ndf = \"1\"\nd2f = \"0\"\nlambda = 1\nbeta = 0\nbeta_tilde = 0";
        let c: ExperimentConfig = toml::from_str(spec).unwrap();
        assert!(matches!(c.boundary(), Err(CliError::Config(m)) if m.contains("boundary.f")));
    }
}
