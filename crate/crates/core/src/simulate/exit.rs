use serde::Serialize;

use super::PathSample;
use crate::boundary::Boundary;
use crate::{Drift, Error, Result};

/// Last exit of a sampled path above `ε·f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "time", rename_all = "snake_case")]
pub enum ExitOutcome {
    /// Linear-interpolation root of the last sign change of `Y − εf`.
    Exit(f64),
    /// `Y < εf` at every node.
    NoExit,
    /// The exit may lie beyond the simulated window.
    Censored,
}

/// `ε·f(t_i)` on the grid `start + i·step`, evaluated in log space.
pub fn boundary_levels(b: &Boundary, eps: Drift, start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (eps.ln() + b.ln_value(start + i as f64 * step)).exp())
        .collect()
}

/// Scan `values − levels` from the end; see [`ExitOutcome`].
pub fn last_exit_on_grid(values: &[f64], levels: &[f64], start: f64, step: f64) -> ExitOutcome {
    let n = values.len().min(levels.len());
    if n == 0 {
        return ExitOutcome::NoExit;
    }
    if values[n - 1] >= levels[n - 1] {
        return ExitOutcome::Censored;
    }
    for i in (0..n - 1).rev() {
        let d = values[i] - levels[i];
        if d >= 0.0 {
            let next = values[i + 1] - levels[i + 1];
            let frac = d / (d - next);
            return ExitOutcome::Exit(start + (i as f64 + frac) * step);
        }
    }
    ExitOutcome::NoExit
}

/// `T(ε) = max{t : Y(t) = εf(t)}` on the path's grid.
pub fn last_exit_time(path: &PathSample, b: &Boundary, eps: Drift) -> Result<ExitOutcome> {
    if path.grid_start < b.domain_min() {
        return Err(Error::Precondition(format!(
            "grid starts at {} below the boundary's domain {}",
            path.grid_start,
            b.domain_min()
        )));
    }
    let levels = boundary_levels(b, eps, path.grid_start, path.grid_step, path.values.len());
    Ok(last_exit_on_grid(&path.values, &levels, path.grid_start, path.grid_step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly2() -> Boundary {
        Boundary::polynomial(2.0).unwrap()
    }

    #[test]
    fn constant_path() {
        let path = PathSample::new(0.0, 0.01, vec![0.5; 201]).unwrap();
        match last_exit_time(&path, &poly2(), Drift::new(1.0).unwrap()).unwrap() {
            ExitOutcome::Exit(t) => assert!((t - 0.5f64.sqrt()).abs() < 0.01),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn below_everywhere_and_censored() {
        let below = PathSample::new(1.0, 0.01, vec![-1.0; 100]).unwrap();
        assert_eq!(last_exit_time(&below, &poly2(), Drift::new(1.0).unwrap()).unwrap(), ExitOutcome::NoExit);
        let above = PathSample::new(0.0, 0.01, vec![10.0; 100]).unwrap();
        assert_eq!(last_exit_time(&above, &poly2(), Drift::new(1.0).unwrap()).unwrap(), ExitOutcome::Censored);
    }

    /// Every root of the piecewise-linear `Y − εf`, by brute force.
    fn all_crossings(values: &[f64], levels: &[f64], step: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..values.len() - 1 {
            let (d0, d1) = (values[i] - levels[i], values[i + 1] - levels[i + 1]);
            if d0 >= 0.0 && d1 < 0.0 {
                out.push((i as f64 + d0 / (d0 - d1)) * step);
            }
        }
        out
    }

    #[test]
    fn sawtooth_returns_last_crossing() {
        let step = 0.01;
        let values: Vec<f64> = (0..=300).map(|i| {
            let t = i as f64 * step;
            2.0 * ((t * 1.5).fract() - 0.5).abs() * 3.0
        }).collect();
        let path = PathSample::new(0.0, step, values.clone()).unwrap();
        let b = poly2();
        let eps = Drift::new(0.5).unwrap();
        let levels = boundary_levels(&b, eps, 0.0, step, values.len());
        let crossings = all_crossings(&values, &levels, step);
        assert!(crossings.len() >= 3, "{crossings:?}");
        assert_eq!(last_exit_time(&path, &b, eps).unwrap(), ExitOutcome::Exit(*crossings.last().unwrap()));
    }

    #[test]
    fn refinement_stable_on_smooth_path() {
        let f = |t: f64| 3.0 * (-0.3 * t).exp() * (1.0 + 0.2 * (5.0 * t).sin());
        let b = poly2();
        let eps = Drift::new(0.2).unwrap();
        let exit = |step: f64| {
            let n = (6.0 / step) as usize + 1;
            let p = PathSample::new(0.0, step, (0..n).map(|i| f(i as f64 * step)).collect()).unwrap();
            match last_exit_time(&p, &b, eps).unwrap() {
                ExitOutcome::Exit(t) => t,
                o => panic!("{o:?}"),
            }
        };
        let (coarse, fine) = (exit(0.02), exit(0.01));
        assert!((coarse - fine).abs() <= 0.02);
    }

    proptest! {
        #[test]
        fn raising_the_boundary_never_delays_exit(
            values in prop::collection::vec(-3.0f64..3.0, 10..200),
            e1 in 0.01f64..1.0,
            factor in 1.0f64..5.0,
        ) {
            let path = PathSample::new(0.0, 0.05, values).unwrap();
            let b = poly2();
            let low = last_exit_time(&path, &b, Drift::new(e1).unwrap()).unwrap();
            let high = last_exit_time(&path, &b, Drift::new(e1 * factor).unwrap()).unwrap();
            match (low, high) {
                (ExitOutcome::Exit(t1), ExitOutcome::Exit(t2)) => prop_assert!(t2 <= t1 + 1e-12),
                (ExitOutcome::NoExit, h) => prop_assert_eq!(h, ExitOutcome::NoExit),
                (ExitOutcome::Exit(_), h) => prop_assert!(h == ExitOutcome::NoExit || matches!(h, ExitOutcome::Exit(_))),
                (ExitOutcome::Censored, _) => {}
            }
        }
    }
}
