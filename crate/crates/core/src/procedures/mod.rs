//! Search procedures over an unbounded sequence of populations.
//!
//! Every procedure follows the same framework: sample the current
//! population, move on to the next one, or terminate and return the current
//! index. Populations are never revisited.

mod accumulator;
mod nonadaptive;
mod seqthresh;
mod source;
mod sprt;

pub use accumulator::LlrSum;
pub use nonadaptive::{
    nonadaptive_error_rates, run_nonadaptive, tune_nonadaptive, NonAdaptiveConfig,
};
pub use seqthresh::{run_seq_thresh, seq_thresh_params, SeqThreshConfig, SeqThreshParams, SeqThreshPlan};
pub use source::{PopulationSource, ScriptedPopulations, SimulatedPopulations};
pub use sprt::{default_sprt_config, run_sprt, sprt_single, GammaLPolicy, SprtConfig, SprtExit};

use crate::error::Result;
use crate::models::{Label, PopulationModel};
use crate::Scalar;

/// Hard cap on the samples of a single trial.
pub const SAMPLE_CAP: u64 = 1_000_000_000;

/// One population as seen by a procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationVisit {
    pub label: Label,
    pub samples: u64,
}

/// Result of one complete search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    /// 1-based index of the returned population.
    pub returned_index: u64,
    /// True label of the returned population.
    pub returned_label: Label,
    pub total_samples: u64,
    /// Every visited population in order; the last one was returned, all
    /// earlier ones were abandoned.
    pub visits: Vec<PopulationVisit>,
}

impl TrialOutcome {
    pub fn per_population_samples(&self) -> impl Iterator<Item = u64> + '_ {
        self.visits.iter().map(|v| v.samples)
    }

    pub fn is_error(&self) -> bool {
        self.returned_label == Label::Typical
    }
}

/// Collects visits and enforces the sample cap while a procedure runs.
pub(crate) struct TrialLog {
    visits: Vec<PopulationVisit>,
    total: u64,
    cap: u64,
}

impl TrialLog {
    pub(crate) fn new(cap: u64) -> Self {
        Self {
            visits: Vec::new(),
            total: 0,
            cap,
        }
    }

    /// Records an abandoned population.
    pub(crate) fn abandon(&mut self, label: Label, samples: u64) -> Result<()> {
        self.push(label, samples)
    }

    pub(crate) fn finish(mut self, label: Label, samples: u64) -> Result<TrialOutcome> {
        self.push(label, samples)?;
        Ok(TrialOutcome {
            returned_index: self.visits.len() as u64,
            returned_label: label,
            total_samples: self.total,
            visits: self.visits,
        })
    }

    /// Remaining sample budget, for procedures that check the cap mid-population.
    pub(crate) fn remaining(&self) -> u64 {
        self.cap - self.total
    }

    pub(crate) fn overrun(&self) -> crate::Error {
        crate::Error::NonTermination { cap: self.cap }
    }

    fn push(&mut self, label: Label, samples: u64) -> Result<()> {
        self.total += samples;
        if self.total > self.cap {
            return Err(self.overrun());
        }
        self.visits.push(PopulationVisit { label, samples });
        Ok(())
    }
}

/// A fully resolved procedure.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcedureConfig<F> {
    Sprt(SprtConfig<F>),
    SeqThresh(SeqThreshPlan<F>),
    NonAdaptive(NonAdaptiveConfig<F>),
}

impl<F: Scalar> ProcedureConfig<F> {
    pub fn name(&self) -> &'static str {
        match self {
            ProcedureConfig::Sprt(_) => "ssprt",
            ProcedureConfig::SeqThresh(_) => "seqthresh",
            ProcedureConfig::NonAdaptive(_) => "nonadaptive",
        }
    }

    pub fn run<S: PopulationSource<F>>(
        &self,
        model: &PopulationModel<F>,
        source: &mut S,
    ) -> Result<TrialOutcome> {
        self.run_capped(model, source, SAMPLE_CAP)
    }

    /// As [`run`](Self::run) with a per-trial sample cap of `cap` instead of
    /// [`SAMPLE_CAP`].
    pub fn run_capped<S: PopulationSource<F>>(
        &self,
        model: &PopulationModel<F>,
        source: &mut S,
        cap: u64,
    ) -> Result<TrialOutcome> {
        match self {
            ProcedureConfig::Sprt(c) => sprt::run_sprt_capped(model, c, source, cap),
            ProcedureConfig::SeqThresh(p) => seqthresh::run_seq_thresh_capped(model, p, source, cap),
            ProcedureConfig::NonAdaptive(c) => {
                nonadaptive::run_nonadaptive_capped(model, c, source, cap)
            }
        }
    }
}
