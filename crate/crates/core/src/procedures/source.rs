use rand::Rng;

use crate::models::{Label, PopulationModel};
use crate::Scalar;

/// Supplies populations and their observations to a procedure.
pub trait PopulationSource<F> {
    /// Moves to the next (fresh) population and returns its hidden label.
    /// The first call yields population 1.
    fn next_population(&mut self) -> Label;

    /// Draws one observation from the current population.
    fn observe(&mut self) -> F;
}

/// Lazily generated populations: each label is drawn on first visit, never
/// ahead of time.
#[derive(Debug)]
pub struct SimulatedPopulations<'a, F, R> {
    model: &'a PopulationModel<F>,
    prior: Prior,
    rng: R,
    current: Label,
}

#[derive(Debug, Clone, Copy)]
enum Prior {
    Bernoulli(f64),
    Fixed(Label),
}

impl<'a, F: Scalar, R: Rng> SimulatedPopulations<'a, F, R> {
    /// Labels i.i.d. atypical with probability `pi`.
    pub fn new(model: &'a PopulationModel<F>, pi: f64, rng: R) -> Self {
        Self {
            model,
            prior: Prior::Bernoulli(pi),
            rng,
            current: Label::Typical,
        }
    }

    /// Every population carries the same label.
    pub fn fixed(model: &'a PopulationModel<F>, label: Label, rng: R) -> Self {
        Self {
            model,
            prior: Prior::Fixed(label),
            rng,
            current: label,
        }
    }

    pub fn into_rng(self) -> R {
        self.rng
    }
}

impl<F: Scalar, R: Rng> PopulationSource<F> for SimulatedPopulations<'_, F, R> {
    fn next_population(&mut self) -> Label {
        self.current = match self.prior {
            Prior::Bernoulli(pi) => Label::draw(&mut self.rng, pi),
            Prior::Fixed(l) => l,
        };
        self.current
    }

    #[inline]
    fn observe(&mut self) -> F {
        self.model.sample(self.current, &mut self.rng)
    }
}

/// Replays fixed labels and observation sequences; population `i` yields
/// `script[i].1` in order. Panics when a script runs out.
#[derive(Debug, Clone)]
pub struct ScriptedPopulations<F> {
    script: Vec<(Label, Vec<F>)>,
    population: Option<usize>,
    cursor: usize,
}

impl<F> ScriptedPopulations<F> {
    pub fn new(script: Vec<(Label, Vec<F>)>) -> Self {
        Self {
            script,
            population: None,
            cursor: 0,
        }
    }
}

impl<F: Copy> PopulationSource<F> for ScriptedPopulations<F> {
    fn next_population(&mut self) -> Label {
        let next = self.population.map_or(0, |p| p + 1);
        self.population = Some(next);
        self.cursor = 0;
        self.script
            .get(next)
            .unwrap_or_else(|| panic!("script has no population {}", next + 1))
            .0
    }

    fn observe(&mut self) -> F {
        let p = self.population.expect("observe before next_population");
        let y = *self.script[p]
            .1
            .get(self.cursor)
            .unwrap_or_else(|| panic!("script for population {} exhausted", p + 1));
        self.cursor += 1;
        y
    }
}
