//! Brute-force ground truth: the exact density of states and ln Z.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{EnergyLevel, InverseTemperature, IsingModel};
use crate::state::SpinState;

pub const DEFAULT_MAX_ENUMERATION_SPINS: usize = 30;

const DENSE_SLOT_LIMIT: usize = 1 << 22;
const CHUNK_BITS: usize = 6;

/// Exact number of configurations at every energy level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactSpectrum {
    dos: BTreeMap<EnergyLevel, u64>,
    num_spins: usize,
}

impl ExactSpectrum {
    pub fn from_counts(num_spins: usize, dos: BTreeMap<EnergyLevel, u64>) -> Result<Self> {
        let total: u128 = dos.values().map(|&c| c as u128).sum();
        if num_spins >= 64 || total != 1u128 << num_spins {
            return Err(Error::domain(format!(
                "spectrum mass {total} does not equal 2^{num_spins}"
            )));
        }
        if dos.values().any(|&c| c == 0) {
            return Err(Error::domain("spectrum contains a zero count"));
        }
        Ok(ExactSpectrum { dos, num_spins })
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn counts(&self) -> &BTreeMap<EnergyLevel, u64> {
        &self.dos
    }

    pub fn total(&self) -> u64 {
        self.dos.values().sum()
    }

    pub fn min_energy(&self) -> EnergyLevel {
        *self.dos.keys().next().expect("spectrum is never empty")
    }

    pub fn max_energy(&self) -> EnergyLevel {
        *self.dos.keys().next_back().expect("spectrum is never empty")
    }

    /// Boltzmann mean energy ⟨E⟩ at `beta` (β = 0 allowed).
    pub fn mean_energy(&self, beta: f64) -> f64 {
        let ln_z = log_sum_exp(self.dos.iter().map(|(e, &c)| (c as f64).ln() - beta * e.value()));
        self.dos
            .iter()
            .map(|(e, &c)| e.value() * ((c as f64).ln() - beta * e.value() - ln_z).exp())
            .sum()
    }

    /// Boltzmann probability of each level at `beta`.
    pub fn boltzmann_weights(&self, beta: f64) -> BTreeMap<EnergyLevel, f64> {
        let ln_z = log_sum_exp(self.dos.iter().map(|(e, &c)| (c as f64).ln() - beta * e.value()));
        self.dos
            .iter()
            .map(|(e, &c)| (*e, ((c as f64).ln() - beta * e.value() - ln_z).exp()))
            .collect()
    }
}

pub fn enumerate_exact(model: &IsingModel) -> Result<ExactSpectrum> {
    enumerate_exact_with_limit(model, DEFAULT_MAX_ENUMERATION_SPINS)
}

/// Visits all 2^N configurations in Gray-code order, one spin flip per step.
///
/// The configuration space is split on the top spins into independent
/// chunks that run in parallel; per-level counts are summed afterwards, so
/// the result does not depend on scheduling.
pub fn enumerate_exact_with_limit(model: &IsingModel, max_spins: usize) -> Result<ExactSpectrum> {
    let n = model.num_spins();
    if n > max_spins || n >= 63 {
        return Err(Error::TooLarge {
            num_spins: n,
            limit: max_spins.min(62),
        });
    }
    let chunk_bits = CHUNK_BITS.min(n);
    let low_bits = n - chunk_bits;
    let lattice = model.lattice();
    let dense = lattice.slots <= DENSE_SLOT_LIMIT;
    let unit = model.unit();
    let min_units = lattice.min / unit;

    // `record` receives levels in the model's internal units.
    let visit_chunk = |chunk: u64, mut record: Box<dyn FnMut(i64) + '_>| {
        let mut spins = vec![-1i8; n];
        for b in 0..chunk_bits {
            if (chunk >> b) & 1 == 1 {
                spins[low_bits + b] = 1;
            }
        }
        let mut state = SpinState::new(model, spins);
        record(state.units());
        for k in 1u64..(1u64 << low_bits) {
            state.flip(k.trailing_zeros() as usize);
            record(state.units());
        }
    };

    let chunks = 0u64..(1u64 << chunk_bits);
    let dos: BTreeMap<EnergyLevel, u64> = if dense {
        let merged = chunks
            .into_par_iter()
            .map(|c| {
                let mut counts = vec![0u64; lattice.slots];
                visit_chunk(c, Box::new(|u| counts[((u - min_units) >> 1) as usize] += 1));
                counts
            })
            .reduce(
                || vec![0u64; lattice.slots],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        merged
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(slot, c)| (lattice.level(slot), c))
            .collect()
    } else {
        let merged = chunks
            .into_par_iter()
            .map(|c| {
                let mut counts: HashMap<EnergyLevel, u64> = HashMap::new();
                visit_chunk(
                    c,
                    Box::new(|u| *counts.entry(EnergyLevel::from_quanta(u * unit)).or_default() += 1),
                );
                counts
            })
            .reduce(HashMap::new, |mut a, b| {
                for (e, c) in b {
                    *a.entry(e).or_default() += c;
                }
                a
            });
        merged.into_iter().collect()
    };

    ExactSpectrum::from_counts(n, dos)
}

/// ln Σ_E g(E) e^{−βE} over levels in ascending energy order.
pub(crate) fn ln_partition_terms<I>(levels: I, beta: f64) -> f64
where
    I: Iterator<Item = (EnergyLevel, f64)> + Clone,
{
    log_sum_exp(levels.map(move |(e, ln_g)| ln_g - beta * e.value()))
}

/// Exact ln Z at `beta`; β = 0 gives N ln 2.
pub fn exact_partition(spectrum: &ExactSpectrum, beta: InverseTemperature) -> Result<f64> {
    if spectrum.dos.is_empty() {
        return Err(Error::domain("empty spectrum"));
    }
    Ok(ln_partition_terms(
        spectrum.dos.iter().map(|(e, &c)| (*e, (c as f64).ln())),
        beta.value(),
    ))
}
