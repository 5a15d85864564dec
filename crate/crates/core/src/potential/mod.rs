//! The periodic Riesz potential `W_s` with Fourier coefficients `|k|^{s-d}`,
//! its singular part near the origin, and the mollified potential `W^ε`.

mod constants;
mod ewald;
mod mollified;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma;
use crate::torus::TorusPoint;

pub use constants::{fit_w_bound_constants, BoundConstants, SampleGrid};
pub use ewald::{direct_fourier_sum, Ewald, EwaldParams};
pub use mollified::{MollifiedPotential, MollifiedSpectral};

/// Default extra margin on the stability exponent for `d = 1, s = 0`.
pub const DEFAULT_LOG_GAMMA_MARGIN: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularityKind {
    Power,
    LogFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RieszSpec {
    dim: usize,
    s: f64,
    a_s: Option<f64>,
    gamma: f64,
    kind: SingularityKind,
}

impl RieszSpec {
    pub fn new(dim: usize, s: f64) -> Result<Self> {
        Self::with_log_gamma_margin(dim, s, DEFAULT_LOG_GAMMA_MARGIN)
    }

    /// As [`RieszSpec::new`], choosing `γ = 1/2 + margin` when `d = 1, s = 0`.
    pub fn with_log_gamma_margin(dim: usize, s: f64, margin: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Usage("dimension must be positive".into()));
        }
        if !s.is_finite() || s >= dim as f64 {
            return Err(Error::Usage(format!("need s < d, got s = {s}, d = {dim}")));
        }
        if !(margin > 0.0 && margin <= 0.5) {
            return Err(Error::Usage(format!("log gamma margin must lie in (0, 1/2], got {margin}")));
        }
        let kind = if s <= 0.0 && (s / 2.0).fract() == 0.0 { SingularityKind::LogFamily } else { SingularityKind::Power };
        let d = dim as f64;
        let a_s = if s == 0.0 {
            Some(2.0 * std::f64::consts::PI.powf(d / 2.0) / gamma(d / 2.0))
        } else if kind == SingularityKind::Power {
            Some(std::f64::consts::PI.powf(d / 2.0 - s) * gamma(s / 2.0) / gamma((d - s) / 2.0))
        } else {
            None
        };
        let gamma = if dim >= 2 || s < 0.0 {
            1.0 / (2.0 * d - s)
        } else if s > 0.0 {
            0.5
        } else {
            0.5 + margin
        };
        Ok(Self { dim, s, a_s, gamma, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Stability exponent `γ`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn kind(&self) -> SingularityKind {
        self.kind
    }

    pub fn is_log(&self) -> bool {
        self.s == 0.0
    }

    /// `a_s`, or `a_0` (the coefficient of `-ln|x|`) when `s = 0`.
    pub fn singular_coefficient(&self) -> Result<f64> {
        self.a_s.ok_or_else(|| {
            Error::Unsupported(format!("singular expansion for negative even s = {} is not implemented", self.s))
        })
    }

    /// `a_s |x|^{-s}` or `-a_0 ln|x|`.
    pub fn singular_part(&self, r: f64) -> Result<f64> {
        let a = self.singular_coefficient()?;
        Ok(if self.is_log() { -a * r.ln() } else { a * r.powf(-self.s) })
    }
}

pub fn singular_coefficient(spec: &RieszSpec) -> Result<f64> {
    spec.singular_coefficient()
}

/// `|k|^{s-d}` for `k ≠ 0`, zero at the origin.
pub fn riesz_fourier_coeff(spec: &RieszSpec, k: &[i64]) -> f64 {
    let k2: i64 = k.iter().map(|c| c * c).sum();
    if k2 == 0 {
        0.0
    } else {
        (k2 as f64).powf((spec.s - spec.dim as f64) / 2.0)
    }
}

/// `W_s(x)`; builds a fresh evaluator, so prefer [`Ewald`] for repeated calls.
pub fn eval_w(spec: &RieszSpec, x: &TorusPoint, params: &EwaldParams) -> Result<f64> {
    Ewald::new(spec, params)?.value(x)
}

/// `∇W_s(x)`; builds a fresh evaluator.
pub fn eval_w_gradient(spec: &RieszSpec, x: &TorusPoint, params: &EwaldParams) -> Result<Vec<f64>> {
    Ewald::new(spec, params)?.gradient(x)
}

/// Evaluators usable inside pair sums.
pub trait PairPotential: Sync {
    fn dim(&self) -> usize;

    /// Value at a minimal-image displacement; `+inf` where singular.
    fn value_at(&self, dx: &[f64]) -> f64;

    /// Value at the origin, `+inf` if singular there.
    fn value_at_origin(&self) -> f64 {
        self.value_at(&vec![0.0; self.dim()])
    }
}
