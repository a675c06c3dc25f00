use std::io::Write;

use serde::Serialize;

use super::exit::{boundary_levels, last_exit_on_grid, ExitOutcome};
use super::{domain, GaussianSampler, DEFAULT_MAX_POINTS};
use crate::boundary::Boundary;
use crate::covariance::CovarianceModel;
use crate::normalize::{constants, NormalizingConstants};
use crate::{Drift, Error, Execution, Result};

/// How the simulation window and spacing are chosen from the constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPolicy {
    /// Fixed spacing; `None` picks `min(0.1·B, 0.01·correlation length)`.
    pub step: Option<f64>,
    /// Horizon is `A + tail_multiple·B` before the guard window.
    pub tail_multiple: f64,
    /// Guard window length in units of `B`; exits there count as censored.
    pub guard_multiple: f64,
    pub max_points: usize,
    /// Largest tolerated censored fraction before the study is invalid.
    pub censoring_budget: f64,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { step: None, tail_multiple: 10.0, guard_multiple: 2.0, max_points: DEFAULT_MAX_POINTS, censoring_budget: 1e-3 }
    }
}

/// A concrete grid `start + i·step`, `i < n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedGrid {
    pub start: f64,
    pub step: f64,
    pub n: usize,
    /// Exits beyond this time are censored.
    pub guard_start: f64,
    pub horizon: f64,
}

impl GridPolicy {
    /// Largest admissible spacing: `min(0.1·B, correlation length / 10)`.
    pub fn max_step(model: &CovarianceModel, k: &NormalizingConstants) -> f64 {
        (0.1 * k.b).min(model.correlation_length() / 10.0)
    }

    pub fn resolve(&self, model: &CovarianceModel, k: &NormalizingConstants) -> Result<ResolvedGrid> {
        if !(self.tail_multiple >= 10.0) {
            return Err(Error::invalid("grid.tail_multiple", "horizon must reach at least A + 10·B"));
        }
        if !(self.guard_multiple > 0.0) {
            return Err(Error::invalid("grid.guard_multiple", "must be > 0"));
        }
        let bound = Self::max_step(model, k);
        let step = match self.step {
            None => (0.1 * k.b).min(0.01 * model.correlation_length()),
            Some(s) if s > 0.0 && s <= bound * (1.0 + 1e-12) => s,
            Some(s) => {
                return Err(Error::invalid(
                    "grid.step",
                    format!("{s} exceeds min(0.1·B, correlation length/10) = {bound}"),
                ))
            }
        };
        let guard_start = k.a + self.tail_multiple * k.b;
        let horizon = guard_start + self.guard_multiple * k.b;
        if !(guard_start > 0.0) {
            return Err(Error::Precondition(format!("A + {}·B = {guard_start} is not positive", self.tail_multiple)));
        }
        let required = (horizon / step).ceil();
        if !(required.is_finite() && required < self.max_points as f64) {
            return Err(Error::ResourceBudget { required: required.min(usize::MAX as f64) as usize + 1, budget: self.max_points });
        }
        let n = required as usize + 1;
        Ok(ResolvedGrid { start: 0.0, step, n, guard_start, horizon: (n - 1) as f64 * step })
    }
}

/// One replicate of a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate: u64,
    pub outcome: ExitOutcome,
}

/// A batch of last-exit times at one drift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitTimeStudy {
    pub eps: f64,
    pub ln_eps: f64,
    pub seed: u64,
    pub n_replicates: u64,
    pub grid: ResolvedGrid,
    pub constants: NormalizingConstants,
    /// Non-censored exit times in replicate order.
    pub raw_exit_times: Vec<f64>,
    /// `(T − A)/B` for each raw exit time.
    pub normalized: Vec<f64>,
    pub censored_count: u64,
    /// Replicates whose path stayed below the boundary at every node; they
    /// carry no exit time and are excluded from `normalized`.
    pub no_exit_count: u64,
    pub censoring_budget: f64,
    pub valid: bool,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
}

impl ExitTimeStudy {
    pub fn censored_fraction(&self) -> f64 {
        self.censored_count as f64 / self.n_replicates as f64
    }

    /// `replicate,raw_T,normalized_T,censored` rows. No-exit and censored
    /// replicates leave both time columns empty. `preamble` lines are written
    /// first, each prefixed with `# `.
    pub fn write_csv<W: Write>(&self, mut w: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "replicate,raw_T,normalized_T,censored")?;
        for r in &self.records {
            match r.outcome {
                ExitOutcome::Exit(t) => writeln!(w, "{},{},{},0", r.replicate, t, self.constants.normalize(t))?,
                ExitOutcome::NoExit => writeln!(w, "{},,,0", r.replicate)?,
                ExitOutcome::Censored => writeln!(w, "{},,,1", r.replicate)?,
            }
        }
        Ok(())
    }
}

/// Simulate `n_replicates` exact paths on `[0, A + (10+2)·B]` and extract
/// their last exits, normalised by the theorem constants.
pub fn run_study(
    model: &CovarianceModel,
    b: &Boundary,
    eps: Drift,
    n_replicates: u64,
    grid: &GridPolicy,
    seed: u64,
    exec: Execution,
) -> Result<ExitTimeStudy> {
    if n_replicates == 0 {
        return Err(Error::invalid("n_replicates", "must be > 0"));
    }
    let k = constants(model, b, eps)?;
    let g = grid.resolve(model, &k)?;
    if g.start < b.domain_min() {
        return Err(Error::Precondition("grid starts below the boundary's domain".into()));
    }
    let sampler = GaussianSampler::with_budget(model, g.n, g.step, grid.max_points)?;
    let levels = boundary_levels(b, eps, g.start, g.step, g.n);
    let classify = |values: &[f64]| match last_exit_on_grid(values, &levels, g.start, g.step) {
        ExitOutcome::Exit(t) if t > g.guard_start => ExitOutcome::Censored,
        o => o,
    };
    let pairs = n_replicates.div_ceil(2);
    let outcomes = exec.map(pairs as usize, |p| {
        let (re, im) = sampler.pair(seed, domain::PATHS, p as u64);
        (classify(&re), classify(&im))
    });

    let mut records = Vec::with_capacity(n_replicates as usize);
    for (p, (a, b)) in outcomes.into_iter().enumerate() {
        for (r, outcome) in [(2 * p as u64, a), (2 * p as u64 + 1, b)] {
            if r < n_replicates {
                records.push(ReplicateRecord { replicate: r, outcome });
            }
        }
    }
    let raw_exit_times: Vec<f64> = records
        .iter()
        .filter_map(|r| match r.outcome {
            ExitOutcome::Exit(t) => Some(t),
            _ => None,
        })
        .collect();
    let count = |want: ExitOutcome| records.iter().filter(|r| r.outcome == want).count() as u64;
    let censored_count = count(ExitOutcome::Censored);
    let no_exit_count = count(ExitOutcome::NoExit);
    let normalized = raw_exit_times.iter().map(|&t| k.normalize(t)).collect();
    Ok(ExitTimeStudy {
        eps: eps.value(),
        ln_eps: eps.ln(),
        seed,
        n_replicates,
        grid: g,
        constants: k,
        raw_exit_times,
        normalized,
        censored_count,
        no_exit_count,
        censoring_budget: grid.censoring_budget,
        valid: censored_count as f64 <= grid.censoring_budget * n_replicates as f64,
        records,
    })
}
