//! Plain samplers: uniform random configurations and single-spin-flip
//! Metropolis chains.

use rand::Rng;

use crate::dos::EnergyHistogram;
use crate::error::{Error, Result};
use crate::model::{EnergyLevel, InverseTemperature, IsingModel};
use crate::rng::{rng_for, TaskRng};
use crate::state::{metropolis_step, Acceptance, random_spins, LevelCounter, SpinState};

/// Independent uniformly random configurations (the infinite-temperature
/// baseline).
pub struct UniformSampler<'m> {
    model: &'m IsingModel,
    rng: TaskRng,
    spins: Vec<i8>,
}

impl<'m> UniformSampler<'m> {
    pub fn new(model: &'m IsingModel, seed: u64) -> Self {
        UniformSampler {
            model,
            rng: rng_for(seed, 0),
            spins: vec![1; model.num_spins()],
        }
    }

    fn next_units(&mut self) -> i64 {
        for s in self.spins.iter_mut() {
            *s = if self.rng.random::<bool>() { 1 } else { -1 };
        }
        self.model.units_of(&self.spins)
    }

    pub fn next_level(&mut self) -> EnergyLevel {
        EnergyLevel::from_quanta(self.next_units() * self.model.unit())
    }

    pub fn fill(&mut self, hist: &mut EnergyHistogram, samples: u64) {
        let mut counter = LevelCounter::new(self.model);
        for _ in 0..samples {
            let units = self.next_units();
            counter.add(units);
        }
        hist.merge(&counter.to_histogram());
    }
}

pub fn uniform_histogram(model: &IsingModel, samples: u64, seed: u64) -> EnergyHistogram {
    let mut hist = EnergyHistogram::new();
    UniformSampler::new(model, seed).fill(&mut hist, samples);
    hist
}

/// A single Metropolis walker started from a uniformly random configuration.
pub struct MetropolisChain<'m> {
    state: SpinState<'m>,
    acceptance: Acceptance,
    rng: TaskRng,
}

impl<'m> MetropolisChain<'m> {
    /// `beta` may be zero (every proposal accepted).
    pub fn new(model: &'m IsingModel, beta: f64, seed: u64, stream: u64) -> Self {
        let mut rng = rng_for(seed, stream);
        let spins = random_spins(model.num_spins(), &mut rng);
        MetropolisChain {
            state: SpinState::new(model, spins),
            acceptance: Acceptance::new(model, beta),
            rng,
        }
    }

    /// One proposal; returns the energy level afterwards.
    #[inline]
    pub fn step(&mut self) -> EnergyLevel {
        self.advance();
        self.state.level()
    }

    #[inline]
    fn advance(&mut self) {
        metropolis_step(&mut self.state, &self.acceptance, &mut self.rng);
    }

    pub fn level(&self) -> EnergyLevel {
        self.state.level()
    }
}

/// Post-burn-in energies of one Metropolis run at inverse temperature β_i,
/// kept as a histogram H_i(E).
#[derive(Debug, Clone, PartialEq)]
pub struct McmcRun {
    pub beta: InverseTemperature,
    pub histogram: EnergyHistogram,
}

impl McmcRun {
    pub fn n_samples(&self) -> u64 {
        self.histogram.total()
    }
}

/// Runs `n_steps` proposals and records the energy after each of the last
/// `n_steps − burn_in`.
pub fn metropolis_chain(
    model: &IsingModel,
    beta: InverseTemperature,
    n_steps: u64,
    burn_in: u64,
    seed: u64,
) -> Result<McmcRun> {
    if n_steps <= burn_in {
        return Err(Error::domain(format!(
            "n_steps ({n_steps}) must exceed burn_in ({burn_in})"
        )));
    }
    let mut chain = MetropolisChain::new(model, beta.value(), seed, 0);
    for _ in 0..burn_in {
        chain.advance();
    }
    let mut counter = LevelCounter::new(model);
    for _ in burn_in..n_steps {
        chain.advance();
        counter.add(chain.state.units());
    }
    Ok(McmcRun {
        beta,
        histogram: counter.to_histogram(),
    })
}

/// Energy sequence of a chain, for diagnostics and determinism checks.
pub fn metropolis_trace(model: &IsingModel, beta: f64, n_steps: usize, seed: u64) -> Vec<f64> {
    let mut chain = MetropolisChain::new(model, beta, seed, 0);
    (0..n_steps).map(|_| chain.step().value()).collect()
}
