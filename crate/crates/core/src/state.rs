//! Hot-loop machinery shared by the samplers.
//!
//! Levels here are integers in the model's internal unit (see
//! [`IsingModel::unit`]). A single flip always changes them by an even
//! amount, and neighbouring reachable levels are two units apart.

use std::collections::HashMap;

use rand::Rng;

use crate::model::{EnergyLevel, IsingModel, SpinConfiguration};

/// Spin configuration with cached local fields for O(degree) single flips.
#[derive(Debug, Clone)]
pub(crate) struct SpinState<'m> {
    model: &'m IsingModel,
    spins: Vec<i8>,
    local: Vec<i64>,
    units: i64,
}

impl<'m> SpinState<'m> {
    pub fn new(model: &'m IsingModel, spins: Vec<i8>) -> Self {
        debug_assert_eq!(spins.len(), model.num_spins());
        let mut local = model.field_units().to_vec();
        for (i, l) in local.iter_mut().enumerate() {
            for &(j, q) in model.neighbors(i) {
                *l += q * spins[j] as i64;
            }
        }
        let units = model.units_of(&spins);
        SpinState { model, spins, local, units }
    }

    pub fn random<R: Rng>(model: &'m IsingModel, rng: &mut R) -> Self {
        let spins = random_spins(model.num_spins(), rng);
        Self::new(model, spins)
    }

    /// Level change, in internal units, if `spin` were flipped.
    #[inline]
    pub fn delta(&self, spin: usize) -> i64 {
        -2 * self.spins[spin] as i64 * self.local[spin]
    }

    #[inline]
    pub fn flip(&mut self, spin: usize) {
        self.units += self.delta(spin);
        let s = -self.spins[spin];
        self.spins[spin] = s;
        for &(j, q) in self.model.neighbors(spin) {
            self.local[j] += 2 * q * s as i64;
        }
    }

    #[inline]
    pub fn units(&self) -> i64 {
        self.units
    }

    pub fn level(&self) -> EnergyLevel {
        EnergyLevel::from_quanta(self.units * self.model.unit())
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn to_configuration(&self) -> SpinConfiguration {
        SpinConfiguration::from_spins_unchecked(self.spins.clone())
    }

    pub fn num_spins(&self) -> usize {
        self.spins.len()
    }
}

pub(crate) fn random_spins<R: Rng>(n: usize, rng: &mut R) -> Vec<i8> {
    (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()
}

/// Metropolis acceptance probabilities e^{-βΔE}, tabulated for small
/// uphill moves.
#[derive(Debug, Clone)]
pub(crate) struct Acceptance {
    beta: f64,
    unit_energy: f64,
    table: Vec<f64>,
}

const ACCEPTANCE_TABLE_LEN: usize = 256;

impl Acceptance {
    pub fn new(model: &IsingModel, beta: f64) -> Self {
        let unit_energy = EnergyLevel::from_quanta(model.unit()).value();
        let table = (0..ACCEPTANCE_TABLE_LEN)
            .map(|k| (-beta * (2 * k) as f64 * unit_energy).exp())
            .collect();
        Acceptance { beta, unit_energy, table }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// e^{-βΔE} for a positive even `delta` in internal units.
    #[inline]
    pub fn probability(&self, delta: i64) -> f64 {
        match self.table.get((delta >> 1) as usize) {
            Some(&p) => p,
            None => (-self.beta * delta as f64 * self.unit_energy).exp(),
        }
    }
}

/// One Metropolis proposal: a uniformly chosen single-spin flip accepted
/// with probability min{1, e^{-βΔE}}.
#[inline]
pub(crate) fn metropolis_step<R: Rng>(state: &mut SpinState<'_>, acceptance: &Acceptance, rng: &mut R) -> bool {
    let spin = rng.random_range(0..state.num_spins());
    let delta = state.delta(spin);
    if delta <= 0 || acceptance.beta == 0.0 || rng.random::<f64>() < acceptance.probability(delta) {
        state.flip(spin);
        true
    } else {
        false
    }
}

/// Maps levels (in internal units) to dense slot indices: directly through
/// the model's level lattice when it is small, otherwise by first-seen order.
#[derive(Debug, Clone)]
pub(crate) enum LevelIndex {
    Lattice { min: i64, slots: usize, unit: i64 },
    Discovered { slots: HashMap<i64, usize>, levels: Vec<i64>, unit: i64 },
}

const LATTICE_SLOT_LIMIT: usize = 1 << 20;

impl LevelIndex {
    pub fn for_model(model: &IsingModel) -> Self {
        let lattice = model.lattice();
        let unit = model.unit();
        if lattice.slots <= LATTICE_SLOT_LIMIT {
            LevelIndex::Lattice { min: lattice.min / unit, slots: lattice.slots, unit }
        } else {
            LevelIndex::Discovered { slots: HashMap::new(), levels: Vec::new(), unit }
        }
    }

    /// Slot of the level `units`, allocating one if needed.
    #[inline]
    pub fn slot(&mut self, units: i64) -> usize {
        match self {
            LevelIndex::Lattice { min, .. } => ((units - *min) >> 1) as usize,
            LevelIndex::Discovered { slots, levels, .. } => *slots.entry(units).or_insert_with(|| {
                levels.push(units);
                levels.len() - 1
            }),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            LevelIndex::Lattice { slots, .. } => *slots,
            LevelIndex::Discovered { levels, .. } => levels.len(),
        }
    }

    pub fn level(&self, slot: usize) -> EnergyLevel {
        match self {
            LevelIndex::Lattice { min, unit, .. } => EnergyLevel::from_quanta((min + 2 * slot as i64) * unit),
            LevelIndex::Discovered { levels, unit, .. } => EnergyLevel::from_quanta(levels[slot] * unit),
        }
    }
}

/// Per-level sample counter backed by a [`LevelIndex`].
#[derive(Debug, Clone)]
pub(crate) struct LevelCounter {
    index: LevelIndex,
    counts: Vec<u64>,
}

impl LevelCounter {
    pub fn new(model: &IsingModel) -> Self {
        let index = LevelIndex::for_model(model);
        let counts = vec![0; index.len()];
        LevelCounter { index, counts }
    }

    #[inline]
    pub fn add(&mut self, units: i64) {
        let slot = self.index.slot(units);
        if slot >= self.counts.len() {
            self.counts.resize(self.index.len(), 0);
        }
        self.counts[slot] += 1;
    }

    pub fn to_histogram(&self) -> crate::dos::EnergyHistogram {
        crate::dos::EnergyHistogram::from_counts(
            self.counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(slot, &c)| (self.index.level(slot), c)),
        )
    }
}
