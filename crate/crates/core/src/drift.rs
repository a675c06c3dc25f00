use crate::{Error, Result};

/// Drift parameter `ε > 0`, stored as `ln ε`.
///
/// Asymptotic checks need ε like `e^{-10⁹}`; keeping the logarithm makes
/// those representable. [`Drift::value`] underflows to `0.0` there, so
/// numerics that must survive such ε work with [`Drift::ln`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Drift {
    ln: f64,
}

impl Drift {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be finite and > 0, got {eps}")));
        }
        Ok(Self { ln: eps.ln() })
    }

    pub fn from_ln(ln_eps: f64) -> Result<Self> {
        if !ln_eps.is_finite() {
            return Err(Error::invalid("ln_eps", format!("must be finite, got {ln_eps}")));
        }
        Ok(Self { ln: ln_eps })
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.ln
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    /// `ε / v`.
    pub fn scaled_by(self, v: f64) -> Self {
        Self { ln: self.ln - v.ln() }
    }

    /// `10^{-k}` for each exponent, a convenience for ε ladders.
    pub fn decades(exponents: &[f64]) -> Vec<Self> {
        exponents
            .iter()
            .map(|k| Self { ln: -k * std::f64::consts::LN_10 })
            .collect()
    }
}

impl std::fmt::Display for Drift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = self.value();
        if v > 0.0 && v.is_normal() {
            write!(f, "{v:e}")
        } else {
            write!(f, "exp({})", self.ln)
        }
    }
}
