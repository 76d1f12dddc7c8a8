use crate::error::Result;
use crate::models::{coin_face, ModelKind, PopulationModel};
use crate::Scalar;

/// Slack, in lattice steps, when comparing a lattice sum with a threshold.
const LATTICE_TOL: f64 = 1e-9;

/// Running log-likelihood ratio of one population.
///
/// The coin pair's per-flip ratio is always `+step` or `-step`, so its sum is
/// kept as an integer number of steps. Comparisons against thresholds happen
/// in step units, which keeps boundary ties (e.g. a lower threshold of exactly
/// one step) exact no matter how long the walk runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LlrSum<F> {
    Real(F),
    Lattice { steps: i64, unit: F },
}

impl<F: Scalar> LlrSum<F> {
    pub fn start(model: &PopulationModel<F>) -> Self {
        match model.kind() {
            ModelKind::CoinPair { .. } => LlrSum::Lattice {
                steps: 0,
                unit: model.coin_log_step().unwrap(),
            },
            _ => LlrSum::Real(F::zero()),
        }
    }

    #[inline]
    pub fn add(&mut self, model: &PopulationModel<F>, y: F) -> Result<()> {
        match self {
            LlrSum::Real(v) => *v = *v + model.log_lr(y)?,
            LlrSum::Lattice { steps, .. } => *steps += if coin_face(y)? { 1 } else { -1 },
        }
        Ok(())
    }

    /// Current value; `+-inf` once a deterministic coin has flipped.
    pub fn value(&self) -> F {
        match *self {
            LlrSum::Real(v) => v,
            LlrSum::Lattice { steps: 0, .. } => F::zero(),
            LlrSum::Lattice { steps, unit } => F::from_i64(steps).unwrap() * unit,
        }
    }

    #[inline]
    pub fn at_or_below(&self, log_threshold: F) -> bool {
        match *self {
            LlrSum::Lattice { steps, unit } if unit.is_finite() => {
                F::from_i64(steps).unwrap() <= log_threshold / unit + F::lit(LATTICE_TOL)
            }
            _ => self.value() <= log_threshold,
        }
    }

    #[inline]
    pub fn at_or_above(&self, log_threshold: F) -> bool {
        match *self {
            LlrSum::Lattice { steps, unit } if unit.is_finite() => {
                F::from_i64(steps).unwrap() >= log_threshold / unit - F::lit(LATTICE_TOL)
            }
            _ => self.value() >= log_threshold,
        }
    }
}
