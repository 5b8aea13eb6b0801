//! Multiple histogram reweighting (WHAM) over Metropolis runs.
//!
//! Given histograms H_i(E) with N_i samples at inverse temperatures β_i,
//!
//!   g(E) = Σ_i H_i(E) / Σ_j N_j e^{−β_j E + f_j}
//!   e^{−f_i} = Σ_E g(E) e^{−β_i E}
//!
//! are iterated to a fixed point in the log domain. WHAM fixes g only up to
//! a constant factor; the converged g is rescaled to hold 2^N
//! configurations, which gives ln Z an absolute scale.

use std::collections::BTreeMap;

use crate::dos::{estimate_partition, DosEstimate};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{EnergyLevel, InverseTemperature};
use crate::sampler::McmcRun;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhrOptions {
    /// Stop once max_i |Δf_i| < tol.
    pub tol: f64,
    pub max_iter: usize,
    /// λ in f ← (1 − λ) f + λ f_raw.
    pub damping: f64,
    /// Value f_1 is pinned to during iteration.
    pub gauge: f64,
}

impl Default for MhrOptions {
    fn default() -> Self {
        MhrOptions {
            tol: 1e-12,
            max_iter: 100_000,
            damping: 0.5,
            gauge: 0.0,
        }
    }
}

/// A run given as (possibly fractional) counts per level.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedRun {
    pub beta: f64,
    pub counts: BTreeMap<EnergyLevel, f64>,
}

impl From<&McmcRun> for WeightedRun {
    fn from(run: &McmcRun) -> Self {
        WeightedRun {
            beta: run.beta.value(),
            counts: run.histogram.counts().iter().map(|(&e, &c)| (e, c as f64)).collect(),
        }
    }
}

/// Dimensionless free energies f_i = −ln Z(β_i), one per run, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeEnergies {
    pub f: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MhrResult {
    pub ln_z: f64,
    /// Free energies recomputed from the normalized g.
    pub free_energies: FreeEnergies,
    pub dos: DosEstimate,
    pub iterations: usize,
    pub converged: bool,
    /// Some pair of neighboring temperatures shares no sampled level.
    pub overlap_warning: bool,
    /// The target lies outside the sampled temperature range.
    pub extrapolated: bool,
}

pub fn mhr_estimate(
    runs: &[McmcRun],
    num_spins: usize,
    target: InverseTemperature,
    options: &MhrOptions,
) -> Result<MhrResult> {
    let weighted: Vec<WeightedRun> = runs.iter().map(WeightedRun::from).collect();
    mhr_estimate_weighted(&weighted, num_spins, target, options)
}

pub fn mhr_estimate_weighted(
    runs: &[WeightedRun],
    num_spins: usize,
    target: InverseTemperature,
    options: &MhrOptions,
) -> Result<MhrResult> {
    if runs.is_empty() {
        return Err(Error::domain("MHR needs at least one run"));
    }
    if !(options.tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {}", options.tol)));
    }
    if !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::domain(format!("damping {} not in (0, 1]", options.damping)));
    }

    let mut total: BTreeMap<EnergyLevel, f64> = BTreeMap::new();
    let mut ln_n = Vec::with_capacity(runs.len());
    for run in runs {
        if !run.beta.is_finite() || run.beta < 0.0 {
            return Err(Error::domain(format!("invalid run temperature β = {}", run.beta)));
        }
        let mut n = 0.0;
        for (&e, &c) in &run.counts {
            if c < 0.0 || !c.is_finite() {
                return Err(Error::domain(format!("invalid count {c} at level {e}")));
            }
            if c > 0.0 {
                *total.entry(e).or_default() += c;
                n += c;
            }
        }
        if n <= 0.0 {
            return Err(Error::domain("MHR run without samples"));
        }
        ln_n.push(f64::ln(n));
    }
    let levels: Vec<(f64, f64)> = total.iter().map(|(e, &c)| (e.value(), c.ln())).collect();
    let betas: Vec<f64> = runs.iter().map(|r| r.beta).collect();

    let ln_g_given = |f: &[f64]| -> Vec<f64> {
        levels
            .iter()
            .map(|&(e, ln_h)| {
                ln_h - log_sum_exp((0..betas.len()).map(|j| ln_n[j] - betas[j] * e + f[j]))
            })
            .collect()
    };
    let free_given = |ln_g: &[f64]| -> Vec<f64> {
        betas
            .iter()
            .map(|&b| -log_sum_exp(levels.iter().zip(ln_g).map(|(&(e, _), &lg)| lg - b * e)))
            .collect()
    };

    let mut f = vec![options.gauge; runs.len()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        let raw = free_given(&ln_g_given(&f));
        let shift = options.gauge - raw[0];
        let mut change: f64 = 0.0;
        for (fi, ri) in f.iter_mut().zip(&raw) {
            let next = (1.0 - options.damping) * *fi + options.damping * (ri + shift);
            change = change.max((next - *fi).abs());
            *fi = next;
        }
        if change < options.tol {
            converged = true;
            break;
        }
    }

    let ln_g = ln_g_given(&f);
    let dos = DosEstimate::from_ln_g(
        num_spins,
        total.keys().copied().zip(ln_g.iter().copied()),
    )?;
    let normalized: Vec<f64> = total.keys().map(|e| dos.g()[e].ln()).collect();
    let free_energies = FreeEnergies { f: free_given(&normalized) };
    let ln_z = estimate_partition(&dos, target)?;

    let (lo, hi) = betas
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)));
    let t = target.value();
    Ok(MhrResult {
        ln_z,
        free_energies,
        dos,
        iterations,
        converged,
        overlap_warning: neighbors_lack_overlap(runs),
        extrapolated: t < lo || t > hi,
    })
}

fn neighbors_lack_overlap(runs: &[WeightedRun]) -> bool {
    let mut order: Vec<&WeightedRun> = runs.iter().collect();
    order.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    order.windows(2).any(|pair| {
        !pair[0]
            .counts
            .iter()
            .any(|(e, &c)| c > 0.0 && pair[1].counts.get(e).is_some_and(|&d| d > 0.0))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dos::{dos_from_histogram, EnergyHistogram};
    use crate::enumerate::{enumerate_exact, exact_partition, ExactSpectrum};
    use crate::model::IsingModel;

    fn ring4() -> IsingModel {
        IsingModel::new(4, [], [(0, 1, -1.0), (1, 2, -1.0), (2, 3, -1.0), (3, 0, -1.0)]).unwrap()
    }

    fn expected_run(spectrum: &ExactSpectrum, beta: f64, samples: f64) -> WeightedRun {
        WeightedRun {
            beta,
            counts: spectrum
                .boltzmann_weights(beta)
                .into_iter()
                .map(|(e, p)| (e, samples * p))
                .collect(),
        }
    }

    #[test]
    fn exact_expected_counts_recover_true_dos() {
        let m = IsingModel::new(6, [], [(0, 1, 1.0), (1, 2, -1.0), (2, 3, 1.0), (3, 4, 1.0),
            (4, 5, -1.0), (5, 0, 1.0), (0, 3, -1.0)]).unwrap();
        let spectrum = enumerate_exact(&m).unwrap();
        let runs = [expected_run(&spectrum, 0.2, 1e5), expected_run(&spectrum, 0.3, 3e5),
            expected_run(&spectrum, 0.5, 2e5)];
        let res = mhr_estimate_weighted(&runs, 6, InverseTemperature::new(0.25).unwrap(),
            &MhrOptions::default()).unwrap();
        assert!(res.converged);
        assert!(!res.overlap_warning && !res.extrapolated);
        for (e, &c) in spectrum.counts() {
            let g = res.dos.g()[e];
            assert!((g - c as f64).abs() / c as f64 <= 1e-6, "{e}: {g} vs {c}");
        }
        let exact = exact_partition(&spectrum, InverseTemperature::new(0.25).unwrap()).unwrap();
        assert!((res.ln_z - exact).abs() < 1e-8);
        for (f, b) in res.free_energies.f.iter().zip([0.2, 0.3, 0.5]) {
            let z = exact_partition(&spectrum, InverseTemperature::new(b).unwrap()).unwrap();
            assert!((f + z).abs() < 1e-8);
        }
    }

    #[test]
    fn ring_runs_bracketing_target() {
        let spectrum = enumerate_exact(&ring4()).unwrap();
        let runs = [expected_run(&spectrum, 0.2, 1e4), expected_run(&spectrum, 0.3, 1e4)];
        let res = mhr_estimate_weighted(&runs, 4, InverseTemperature::new(0.25).unwrap(),
            &MhrOptions::default()).unwrap();
        let exact = exact_partition(&spectrum, InverseTemperature::new(0.25).unwrap()).unwrap();
        assert!((res.ln_z - exact).abs() < 1e-9);
    }

    #[test]
    fn single_run_reduces_to_single_histogram_reweighting() {
        let beta = 0.25;
        let hist = EnergyHistogram::from_counts([
            (EnergyLevel::from_int(-4), 40),
            (EnergyLevel::from_int(0), 150),
            (EnergyLevel::from_int(4), 10),
        ]);
        let run = McmcRun { beta: InverseTemperature::new(beta).unwrap(), histogram: hist.clone() };
        let target = InverseTemperature::new(beta).unwrap();
        let res = mhr_estimate(&[run], 4, target, &MhrOptions::default()).unwrap();
        assert!(res.converged);

        // g ∝ H(E) e^{βE}, normalized to 2^N.
        let reweighted = DosEstimate::from_ln_g(
            4,
            hist.counts().iter().map(|(e, &c)| (*e, (c as f64).ln() + beta * e.value())),
        )
        .unwrap();
        let direct = estimate_partition(&reweighted, target).unwrap();
        assert!((res.ln_z - direct).abs() < 1e-12);
        // Closed form: ln Z = N ln 2 + ln N_1 − ln Σ H(E) e^{βE}.
        let closed = 4.0 * std::f64::consts::LN_2 + 200f64.ln()
            - log_sum_exp(hist.counts().iter().map(|(e, &c)| (c as f64).ln() + beta * e.value()));
        assert!((res.ln_z - closed).abs() < 1e-12);
        // Unweighted reading of the same histogram differs unless β = 0.
        let naive = estimate_partition(&dos_from_histogram(&hist, 4).unwrap(), target).unwrap();
        assert!((res.ln_z - naive).abs() > 1e-3);
    }

    #[test]
    fn gauge_choice_does_not_change_result() {
        let spectrum = enumerate_exact(&ring4()).unwrap();
        let mut runs = vec![expected_run(&spectrum, 0.2, 1e4), expected_run(&spectrum, 0.35, 1e4)];
        runs[0].counts.values_mut().for_each(|c| *c = c.round());
        runs[1].counts.values_mut().for_each(|c| *c = c.round() + 3.0);
        let target = InverseTemperature::new(0.25).unwrap();
        let a = mhr_estimate_weighted(&runs, 4, target, &MhrOptions::default()).unwrap();
        let b = mhr_estimate_weighted(&runs, 4, target, &MhrOptions { gauge: 37.5, ..Default::default() })
            .unwrap();
        assert!((a.ln_z - b.ln_z).abs() <= 1e-10);
    }

    #[test]
    fn flags_disjoint_supports_and_iteration_limit() {
        let run = |beta: f64, e: i64| WeightedRun {
            beta,
            counts: [(EnergyLevel::from_int(e), 10.0)].into_iter().collect(),
        };
        let target = InverseTemperature::new(0.3).unwrap();
        let res = mhr_estimate_weighted(&[run(0.2, 0), run(0.4, -4)], 4, target, &MhrOptions::default())
            .unwrap();
        assert!(res.overlap_warning);
        let opts = MhrOptions { max_iter: 1, ..Default::default() };
        let spectrum = enumerate_exact(&ring4()).unwrap();
        let runs = [expected_run(&spectrum, 0.2, 1e4), expected_run(&spectrum, 0.3, 1e4)];
        let res = mhr_estimate_weighted(&runs, 4, target, &opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn rejects_empty_input() {
        let t = InverseTemperature::new(0.3).unwrap();
        assert!(mhr_estimate(&[], 4, t, &MhrOptions::default()).is_err());
        let bad = MhrOptions { tol: 0.0, ..Default::default() };
        let run = WeightedRun { beta: 0.3, counts: [(EnergyLevel::from_int(0), 1.0)].into_iter().collect() };
        assert!(mhr_estimate_weighted(&[run], 4, t, &bad).is_err());
    }
}
