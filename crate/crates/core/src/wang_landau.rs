//! Wang-Landau flat-histogram estimation of the density of states.
//!
//! The walk proposes uniform single-spin flips and accepts x → x' with
//! probability min{1, g(E)/g(E')} using the current running estimate, then
//! multiplies g at the occupied level by f. Whenever the visit histogram of
//! the current stage is flat the histogram is cleared and ln f is halved
//! (f ← √f), until ln f ≤ ε.

use rand::Rng;

use crate::dos::DosEstimate;
use crate::error::{Error, Result};
use crate::model::{EnergyLevel, IsingModel};
use crate::rng::{rng_for, TaskRng};
use crate::state::{LevelIndex, SpinState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlParams {
    /// Flatness fraction p: a stage ends once min H ≥ p · mean H over the
    /// levels visited in that stage.
    pub flatness: f64,
    /// Initial ln f.
    pub ln_f0: f64,
    /// The run converges when ln f ≤ epsilon.
    pub epsilon: f64,
    /// Maximum number of proposed spin updates.
    pub step_budget: u64,
    /// Proposals between flatness checks, which is also the shortest a stage
    /// can be. The default lets the 27 halvings from ln f = 1 down to 1e-8
    /// fit inside the default budget with long, well-sampled stages.
    pub check_interval: u64,
}

impl Default for WlParams {
    fn default() -> Self {
        WlParams {
            flatness: 0.90,
            ln_f0: 1.0,
            epsilon: 1e-8,
            step_budget: 100_000_000,
            check_interval: 3_500_000,
        }
    }
}

impl WlParams {
    fn validate(&self) -> Result<()> {
        if !(self.flatness > 0.0 && self.flatness < 1.0) {
            return Err(Error::domain(format!("flatness {} not in (0, 1)", self.flatness)));
        }
        if !(self.epsilon > 0.0 && self.ln_f0 > self.epsilon && self.ln_f0.is_finite()) {
            return Err(Error::domain(format!(
                "need ln_f0 > epsilon > 0, got ln_f0 = {}, epsilon = {}",
                self.ln_f0, self.epsilon
            )));
        }
        if self.check_interval == 0 {
            return Err(Error::domain("check_interval must be positive"));
        }
        Ok(())
    }
}

/// min_k H_k ≥ p · mean(H) over the nonzero entries of `visits`.
pub fn is_flat(visits: &[u64], flatness: f64) -> bool {
    let (mut min, mut sum, mut n) = (u64::MAX, 0u64, 0u64);
    for &v in visits.iter().filter(|&&v| v > 0) {
        min = min.min(v);
        sum += v;
        n += 1;
    }
    n > 0 && min as f64 >= flatness * (sum as f64 / n as f64)
}

/// Live state of a Wang-Landau walker.
pub struct WlState<'m> {
    index: LevelIndex,
    ln_g: Vec<f64>,
    visits: Vec<u64>,
    known: Vec<bool>,
    ln_f: f64,
    flatness: f64,
    current: SpinState<'m>,
    current_slot: usize,
    steps: u64,
    stages: u32,
}

impl<'m> WlState<'m> {
    fn new(model: &'m IsingModel, params: &WlParams, rng: &mut TaskRng) -> Self {
        let mut index = LevelIndex::for_model(model);
        let current = SpinState::random(model, rng);
        let current_slot = index.slot(current.units());
        let mut state = WlState {
            ln_g: Vec::new(),
            visits: Vec::new(),
            known: Vec::new(),
            index,
            ln_f: params.ln_f0,
            flatness: params.flatness,
            current,
            current_slot,
            steps: 0,
            stages: 0,
        };
        state.grow();
        state.known[current_slot] = true;
        state
    }

    fn grow(&mut self) {
        let n = self.index.len();
        if self.ln_g.len() < n {
            self.ln_g.resize(n, 0.0);
            self.visits.resize(n, 0);
            self.known.resize(n, false);
        }
    }

    #[inline]
    fn step(&mut self, rng: &mut TaskRng) {
        let spin = rng.random_range(0..self.current.num_spins());
        let slot = self.index.slot(self.current.units() + self.current.delta(spin));
        if slot >= self.ln_g.len() {
            self.grow();
        }
        let log_ratio = self.ln_g[self.current_slot] - self.ln_g[slot];
        if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
            self.current.flip(spin);
            self.current_slot = slot;
            self.known[slot] = true;
        }
        self.ln_g[self.current_slot] += self.ln_f;
        self.visits[self.current_slot] += 1;
        self.steps += 1;
    }

    pub fn ln_f(&self) -> f64 {
        self.ln_f
    }

    pub fn flatness(&self) -> f64 {
        self.flatness
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Completed f-stages.
    pub fn stages(&self) -> u32 {
        self.stages
    }

    pub fn current_level(&self) -> EnergyLevel {
        self.current.level()
    }

    /// Visit counts of the current stage, by level.
    pub fn visits(&self) -> Vec<(EnergyLevel, u64)> {
        self.known_slots().map(|s| (self.index.level(s), self.visits[s])).collect()
    }

    /// Unnormalized ln g over every level reached so far.
    pub fn ln_g(&self) -> Vec<(EnergyLevel, f64)> {
        let mut out: Vec<_> = self.known_slots().map(|s| (self.index.level(s), self.ln_g[s])).collect();
        out.sort_by_key(|&(e, _)| e);
        out
    }

    fn known_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.known.iter().enumerate().filter(|(_, &k)| k).map(|(s, _)| s)
    }

    /// Current estimate normalized to 2^N configurations.
    pub fn estimate(&self) -> DosEstimate {
        DosEstimate::from_ln_g(self.current.num_spins(), self.ln_g()).expect("at least one level is known")
    }
}

#[derive(Debug, Clone)]
pub struct WlResult {
    pub dos: DosEstimate,
    /// Total proposed spin updates.
    pub steps: u64,
    pub converged: bool,
    pub stages: u32,
    pub final_ln_f: f64,
}

pub fn wl_run(model: &IsingModel, params: &WlParams, seed: u64) -> Result<WlResult> {
    wl_run_observed(model, params, seed, |_| {})
}

/// Like [`wl_run`], calling `observer` after every `2^k`-th proposal.
pub fn wl_run_observed<F>(model: &IsingModel, params: &WlParams, seed: u64, mut observer: F) -> Result<WlResult>
where
    F: FnMut(&WlState<'_>),
{
    params.validate()?;
    let mut rng = rng_for(seed, 0);
    let mut state = WlState::new(model, params, &mut rng);
    let mut next_report = 1u64;

    let converged = 'outer: loop {
        if state.ln_f <= params.epsilon {
            break true;
        }
        state.visits.iter_mut().for_each(|v| *v = 0);
        loop {
            if state.steps >= params.step_budget {
                break 'outer false;
            }
            state.step(&mut rng);
            if state.steps == next_report {
                observer(&state);
                next_report = next_report.saturating_mul(2);
            }
            if state.steps % params.check_interval == 0 && is_flat(&state.visits, params.flatness) {
                break;
            }
        }
        state.ln_f *= 0.5;
        state.stages += 1;
    };

    Ok(WlResult {
        dos: state.estimate(),
        steps: state.steps,
        converged,
        stages: state.stages,
        final_ln_f: state.ln_f,
    })
}
