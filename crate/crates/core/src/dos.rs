//! Energy histograms and the density-of-states estimates built from them.
//!
//! A histogram of sampled energies is turned into g(E) by scaling its
//! counts so the estimate holds 2^N configurations in total. Levels that
//! were never sampled are absent (g = 0).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::enumerate::{ln_partition_terms, ExactSpectrum};
use crate::error::{Error, Result};
use crate::model::{EnergyLevel, InverseTemperature};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnergyHistogram {
    counts: BTreeMap<EnergyLevel, u64>,
    total: u64,
}

impl EnergyHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (EnergyLevel, u64)>) -> Self {
        let mut h = Self::new();
        for (e, c) in counts {
            h.add_count(e, c);
        }
        h
    }

    pub fn counts(&self) -> &BTreeMap<EnergyLevel, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, level: EnergyLevel) -> u64 {
        self.counts.get(&level).copied().unwrap_or(0)
    }

    pub fn add(&mut self, level: EnergyLevel) {
        self.add_count(level, 1);
    }

    pub fn add_count(&mut self, level: EnergyLevel, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(level).or_default() += count;
        self.total += count;
    }

    pub fn merge(&mut self, other: &EnergyHistogram) {
        for (&e, &c) in &other.counts {
            self.add_count(e, c);
        }
    }

    pub fn merged(mut self, other: &EnergyHistogram) -> Self {
        self.merge(other);
        self
    }

    /// Writes `energy,count` rows sorted by energy.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "energy,count")?;
        for (e, c) in &self.counts {
            writeln!(out, "{e},{c}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != "energy,count" {
            return Err(Error::Parse(format!(
                "line 1: expected header `energy,count`, got `{}`",
                header.trim()
            )));
        }
        let mut h = Self::new();
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = idx + 2;
            let (e, c) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("line {row}: expected two columns")))?;
            let level: EnergyLevel = e
                .parse()
                .map_err(|err| Error::Parse(format!("line {row}: {err}")))?;
            let count: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("line {row}: invalid count `{}`", c.trim())))?;
            h.add_count(level, count);
        }
        Ok(h)
    }
}

/// Folds a batch of sampled energies into `hist`.
pub fn accumulate(mut hist: EnergyHistogram, energies: &[f64]) -> EnergyHistogram {
    for &e in energies {
        hist.add(EnergyLevel::from_f64(e));
    }
    hist
}

/// Estimated number of configurations per energy level, normalized so
/// Σ g(E) = 2^N.
#[derive(Debug, Clone, PartialEq)]
pub struct DosEstimate {
    g: BTreeMap<EnergyLevel, f64>,
    num_spins: usize,
}

impl DosEstimate {
    /// Builds an estimate from log-domain values, rescaling to total mass 2^N.
    /// Levels with ln g = −∞ are dropped.
    pub fn from_ln_g(num_spins: usize, ln_g: impl IntoIterator<Item = (EnergyLevel, f64)>) -> Result<Self> {
        let ln_g: Vec<(EnergyLevel, f64)> = ln_g
            .into_iter()
            .filter(|(_, v)| *v > f64::NEG_INFINITY)
            .collect();
        if ln_g.is_empty() {
            return Err(Error::domain("density of states has no support"));
        }
        if ln_g.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::domain("density of states contains non-finite values"));
        }
        let mass = crate::math::log_sum_exp(ln_g.iter().map(|&(_, v)| v));
        let shift = num_spins as f64 * std::f64::consts::LN_2 - mass;
        Ok(DosEstimate {
            g: ln_g.into_iter().map(|(e, v)| (e, (v + shift).exp())).collect(),
            num_spins,
        })
    }

    pub fn from_exact(spectrum: &ExactSpectrum) -> Self {
        DosEstimate {
            g: spectrum.counts().iter().map(|(&e, &c)| (e, c as f64)).collect(),
            num_spins: spectrum.num_spins(),
        }
    }

    pub fn g(&self) -> &BTreeMap<EnergyLevel, f64> {
        &self.g
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    pub fn mass(&self) -> f64 {
        self.g.values().sum()
    }

    /// Writes `energy,count,g` rows; `count` comes from `hist` when given.
    pub fn write_csv<W: Write>(&self, hist: Option<&EnergyHistogram>, mut out: W) -> Result<()> {
        match hist {
            Some(h) => {
                writeln!(out, "energy,count,g")?;
                for (e, g) in &self.g {
                    writeln!(out, "{e},{},{g:e}", h.count(*e))?;
                }
            }
            None => {
                writeln!(out, "energy,g")?;
                for (e, g) in &self.g {
                    writeln!(out, "{e},{g:e}")?;
                }
            }
        }
        Ok(())
    }
}

/// g(E) = 2^N · count(E) / total.
pub fn dos_from_histogram(hist: &EnergyHistogram, num_spins: usize) -> Result<DosEstimate> {
    if hist.total == 0 {
        return Err(Error::domain("cannot estimate a density of states from an empty histogram"));
    }
    if num_spins > 1000 {
        return Err(Error::domain("2^N overflows for N > 1000"));
    }
    let scale = 2f64.powi(num_spins as i32);
    let total = hist.total as f64;
    Ok(DosEstimate {
        g: hist
            .counts
            .iter()
            .map(|(&e, &c)| (e, scale * c as f64 / total))
            .collect(),
        num_spins,
    })
}

/// ln Z* = ln Σ_E g(E) e^{−βE}.
pub fn estimate_partition(dos: &DosEstimate, beta: InverseTemperature) -> Result<f64> {
    if dos.g.is_empty() {
        return Err(Error::domain("empty density of states"));
    }
    Ok(ln_partition_terms(
        dos.g.iter().map(|(e, &g)| (*e, g.ln())),
        beta.value(),
    ))
}

/// Convenience: ln Z* straight from a histogram.
pub fn histogram_ln_z(hist: &EnergyHistogram, num_spins: usize, beta: InverseTemperature) -> Result<f64> {
    estimate_partition(&dos_from_histogram(hist, num_spins)?, beta)
}
