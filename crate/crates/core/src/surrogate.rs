//! Classical stand-ins for the two annealer sampling protocols.
//!
//! This is a deliberately non-physical model. Anneal time and coupling
//! scale are folded into a single effective inverse temperature β_eff, and
//! each protocol is then a short Metropolis relaxation at β_eff:
//!
//! * forward annealing: every read starts from a uniform random
//!   configuration and relaxes for a fixed number of proposals;
//! * iterated reverse annealing (QEMC): each iterate perturbs the previous
//!   configuration, flipping every spin with probability (1 − s)/2, and then
//!   relaxes.
//!
//! Only the monotone control relationships are modelled: longer anneals and
//! stronger couplings sample colder, s → 0 randomizes, s → 1 freezes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IsingModel, SpinConfiguration};
use crate::rng::{rng_for, TaskRng};
use crate::state::{metropolis_step, random_spins, Acceptance, SpinState};

pub const MIN_ANNEAL_TIME_NS: f64 = 5.0;
pub const MAX_ANNEAL_TIME_NS: f64 = 2.0e6;
pub const MIN_J_SCALE: f64 = 1e-4;
pub const MAX_J_SCALE: f64 = 1.0;

/// β_eff = clamp(κ · j · ln(t / t0), 0, β_max).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTemperatureModel {
    pub kappa: f64,
    /// Reference anneal time in ns; anneals this short sample uniformly.
    pub t0: f64,
    pub beta_max: f64,
}

impl Default for EffectiveTemperatureModel {
    fn default() -> Self {
        EffectiveTemperatureModel { kappa: 0.35, t0: 4.0, beta_max: 5.0 }
    }
}

impl EffectiveTemperatureModel {
    pub fn new(kappa: f64, t0: f64, beta_max: f64) -> Result<Self> {
        let m = EffectiveTemperatureModel { kappa, t0, beta_max };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kappa", self.kappa), ("t0", self.t0), ("beta_max", self.beta_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn effective_beta(&self, anneal_time: f64, j_scale: f64) -> Result<f64> {
        if !(anneal_time >= 0.0) || !(j_scale >= 0.0) || !anneal_time.is_finite() || !j_scale.is_finite() {
            return Err(Error::domain(format!(
                "anneal time and J scale must be nonnegative, got {anneal_time} and {j_scale}"
            )));
        }
        if anneal_time <= self.t0 || j_scale == 0.0 {
            return Ok(0.0);
        }
        Ok((self.kappa * j_scale * (anneal_time / self.t0).ln()).min(self.beta_max))
    }
}

fn check_hardware_range(anneal_time_ns: f64, j_scale: f64) -> Result<()> {
    if !(MIN_ANNEAL_TIME_NS..=MAX_ANNEAL_TIME_NS).contains(&anneal_time_ns) {
        return Err(Error::domain(format!(
            "anneal time {anneal_time_ns} ns outside [{MIN_ANNEAL_TIME_NS}, {MAX_ANNEAL_TIME_NS}]"
        )));
    }
    if !(MIN_J_SCALE..=MAX_J_SCALE).contains(&j_scale) {
        return Err(Error::domain(format!("J scale {j_scale} outside [{MIN_J_SCALE}, {MAX_J_SCALE}]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardAnnealParams {
    pub anneal_time_ns: f64,
    pub j_scale: f64,
    pub num_reads: u64,
    /// Metropolis proposals per spin for each read.
    pub proposals_per_spin: u64,
}

impl ForwardAnnealParams {
    pub const DEFAULT_PROPOSALS_PER_SPIN: u64 = 50;

    pub fn new(anneal_time_ns: f64, j_scale: f64, num_reads: u64) -> Result<Self> {
        let p = ForwardAnnealParams {
            anneal_time_ns,
            j_scale,
            num_reads,
            proposals_per_spin: Self::DEFAULT_PROPOSALS_PER_SPIN,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_hardware_range(self.anneal_time_ns, self.j_scale)?;
        if self.num_reads == 0 {
            return Err(Error::domain("num_reads must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReverseAnnealParams {
    /// Pause location s in [0, 1]; the open interval is the physical range,
    /// the endpoints are accepted as limiting cases.
    pub s_pause: f64,
    pub j_scale: f64,
    pub anneal_time_ns: f64,
    pub chain_length: u64,
    /// Metropolis sweeps (N proposals each) after every perturbation.
    pub relax_sweeps: u64,
}

impl ReverseAnnealParams {
    pub const DEFAULT_RELAX_SWEEPS: u64 = 5;
    pub const DEFAULT_ANNEAL_TIME_NS: f64 = 20_000.0;

    pub fn new(s_pause: f64, j_scale: f64, chain_length: u64) -> Result<Self> {
        let p = ReverseAnnealParams {
            s_pause,
            j_scale,
            anneal_time_ns: Self::DEFAULT_ANNEAL_TIME_NS,
            chain_length,
            relax_sweeps: Self::DEFAULT_RELAX_SWEEPS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_hardware_range(self.anneal_time_ns, self.j_scale)?;
        if !(0.0..=1.0).contains(&self.s_pause) {
            return Err(Error::domain(format!("s_pause {} outside [0, 1]", self.s_pause)));
        }
        if self.chain_length == 0 {
            return Err(Error::domain("chain_length must be at least 1"));
        }
        Ok(())
    }

    /// Per-spin flip probability of the perturbation, (1 − s)/2.
    pub fn flip_probability(&self) -> f64 {
        (1.0 - self.s_pause) / 2.0
    }
}

/// One forward read: random start, `proposals` Metropolis steps at `beta`.
fn forward_read<'m>(model: &'m IsingModel, acceptance: &Acceptance, proposals: u64, rng: &mut TaskRng) -> SpinState<'m> {
    let mut state = SpinState::random(model, rng);
    if acceptance.beta() > 0.0 {
        for _ in 0..proposals {
            metropolis_step(&mut state, acceptance, rng);
        }
    }
    state
}

/// Streams forward-anneal reads; read `k` always draws from stream `k` of
/// the seed, so any prefix of reads is reproducible on its own.
pub(crate) struct ForwardReads<'m> {
    model: &'m IsingModel,
    acceptance: Acceptance,
    proposals: u64,
    seed: u64,
    next: u64,
}

impl<'m> ForwardReads<'m> {
    pub fn new(model: &'m IsingModel, beta: f64, proposals_per_spin: u64, seed: u64, first: u64) -> Self {
        ForwardReads {
            model,
            acceptance: Acceptance::new(model, beta),
            proposals: proposals_per_spin * model.num_spins() as u64,
            seed,
            next: first,
        }
    }

    pub fn next_read(&mut self) -> SpinState<'m> {
        let mut rng = rng_for(self.seed, self.next);
        self.next += 1;
        forward_read(self.model, &self.acceptance, self.proposals, &mut rng)
    }
}

/// Independent forward-anneal reads at β_eff(anneal time, J scale).
pub fn sample_forward(
    model: &IsingModel,
    params: &ForwardAnnealParams,
    temp_model: &EffectiveTemperatureModel,
    seed: u64,
) -> Result<Vec<SpinConfiguration>> {
    params.validate()?;
    let beta = temp_model.effective_beta(params.anneal_time_ns, params.j_scale)?;
    let mut reads = ForwardReads::new(model, beta, params.proposals_per_spin, seed, 0);
    Ok((0..params.num_reads).map(|_| reads.next_read().to_configuration()).collect())
}

/// Visits the iterates of a QEMC chain without materializing them.
pub(crate) fn qemc_walk<F>(
    model: &IsingModel,
    params: &ReverseAnnealParams,
    beta: f64,
    init: Vec<i8>,
    rng: &mut TaskRng,
    mut visit: F,
) where
    F: FnMut(&SpinState<'_>),
{
    let acceptance = Acceptance::new(model, beta);
    let p_flip = params.flip_probability();
    let relax = params.relax_sweeps * model.num_spins() as u64;
    let mut state = SpinState::new(model, init);
    for _ in 0..params.chain_length {
        if p_flip > 0.0 {
            for spin in 0..state.num_spins() {
                if rng.random::<f64>() < p_flip {
                    state.flip(spin);
                }
            }
        }
        for _ in 0..relax {
            metropolis_step(&mut state, &acceptance, rng);
        }
        visit(&state);
    }
}

/// Iterated reverse-anneal chain started from `init`.
pub fn qemc_chain(
    model: &IsingModel,
    params: &ReverseAnnealParams,
    temp_model: &EffectiveTemperatureModel,
    init: &SpinConfiguration,
    seed: u64,
) -> Result<Vec<SpinConfiguration>> {
    params.validate()?;
    model.check_len(init)?;
    let beta = temp_model.effective_beta(params.anneal_time_ns, params.j_scale)?;
    let mut rng = rng_for(seed, 0);
    let mut out = Vec::with_capacity(params.chain_length as usize);
    qemc_walk(model, params, beta, init.spins().to_vec(), &mut rng, |s| out.push(s.to_configuration()));
    Ok(out)
}

/// Uniform random starting configuration for a QEMC chain, drawn from its
/// own stream so it does not perturb the chain's randomness.
pub fn random_configuration(num_spins: usize, seed: u64) -> SpinConfiguration {
    let mut rng = rng_for(seed, u64::MAX);
    SpinConfiguration::from_spins_unchecked(random_spins(num_spins, &mut rng))
}
