//! Parameter sweeps over the surrogate samplers.
//!
//! A sweep visits a grid of (anneal time, s pause, J scale) points. The J
//! scale is the sweep axis: with cumulative accumulation the histogram
//! reported at J_k merges every point J_1..J_k that shares its anneal time
//! and pause, the way a growing sample pool is built up while ramping the
//! coupling strength.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dos::{histogram_ln_z, EnergyHistogram};
use crate::error::{Error, Result};
use crate::math::log_relative_error;
use crate::model::{InverseTemperature, IsingModel};
use crate::rng::{rng_for, stream_id};
use crate::state::SpinState;
use crate::surrogate::{
    qemc_walk, random_configuration, EffectiveTemperatureModel, ForwardAnnealParams, ForwardReads,
    ReverseAnnealParams,
};

/// Coupling scales from near the hardware precision floor up to full scale.
pub const DEFAULT_J_SCALES: [f64; 19] = [
    1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
];
/// Anneal times in ns, 5 ns to 100 µs.
pub const DEFAULT_ANNEAL_TIMES_NS: [f64; 13] = [
    5.0, 8.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1e3, 2e3, 1e4, 5e4, 1e5,
];
pub const DEFAULT_S_PAUSES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

const POINT_SEED_GROUP: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Forward,
    Reverse,
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Forward => "forward",
            Protocol::Reverse => "reverse",
        })
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Protocol::Forward),
            "reverse" => Ok(Protocol::Reverse),
            other => Err(Error::Parse(format!("unknown protocol '{other}' (expected forward or reverse)"))),
        }
    }
}

/// Seed of grid point `index`. Points draw from unrelated streams, so a
/// point's samples are the same in every sweep that contains it.
pub fn point_seed(root_seed: u64, index: u64) -> u64 {
    rng_for(root_seed, stream_id(POINT_SEED_GROUP, index)).next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub protocol: Protocol,
    pub anneal_times_ns: Vec<f64>,
    /// The sweep axis.
    pub j_scales: Vec<f64>,
    /// Pause locations; only used by the reverse protocol.
    pub s_pauses: Vec<f64>,
    /// Reads per point (forward) or chain length per point (reverse).
    pub reads_per_point: u64,
    pub proposals_per_spin: u64,
    pub relax_sweeps: u64,
}

impl SweepGrid {
    pub fn forward(anneal_times_ns: Vec<f64>, j_scales: Vec<f64>, reads_per_point: u64) -> Self {
        SweepGrid {
            protocol: Protocol::Forward,
            anneal_times_ns,
            j_scales,
            s_pauses: Vec::new(),
            reads_per_point,
            proposals_per_spin: ForwardAnnealParams::DEFAULT_PROPOSALS_PER_SPIN,
            relax_sweeps: ReverseAnnealParams::DEFAULT_RELAX_SWEEPS,
        }
    }

    pub fn reverse(anneal_times_ns: Vec<f64>, j_scales: Vec<f64>, s_pauses: Vec<f64>, chain_length: u64) -> Self {
        SweepGrid {
            protocol: Protocol::Reverse,
            s_pauses,
            ..Self::forward(anneal_times_ns, j_scales, chain_length)
        }
    }

    /// All points, anneal time outermost and J scale innermost.
    pub fn points(&self) -> Vec<SweepPoint> {
        let pauses: Vec<Option<f64>> = match self.protocol {
            Protocol::Forward => vec![None],
            Protocol::Reverse => self.s_pauses.iter().copied().map(Some).collect(),
        };
        let mut out = Vec::new();
        for &t in &self.anneal_times_ns {
            for &s in &pauses {
                for &j in &self.j_scales {
                    let index = out.len() as u64;
                    out.push(SweepPoint { protocol: self.protocol, anneal_time_ns: t, j_scale: j, s_pause: s, index });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let points = self.points();
        if points.is_empty() {
            return Err(Error::domain("sweep grid is empty"));
        }
        for p in &points {
            match self.protocol {
                Protocol::Forward => self.forward_params(p).validate()?,
                Protocol::Reverse => self.reverse_params(p).validate()?,
            }
        }
        Ok(())
    }

    fn forward_params(&self, p: &SweepPoint) -> ForwardAnnealParams {
        ForwardAnnealParams {
            anneal_time_ns: p.anneal_time_ns,
            j_scale: p.j_scale,
            num_reads: self.reads_per_point,
            proposals_per_spin: self.proposals_per_spin,
        }
    }

    fn reverse_params(&self, p: &SweepPoint) -> ReverseAnnealParams {
        ReverseAnnealParams {
            s_pause: p.s_pause.unwrap_or(0.5),
            j_scale: p.j_scale,
            anneal_time_ns: p.anneal_time_ns,
            chain_length: self.reads_per_point,
            relax_sweeps: self.relax_sweeps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub protocol: Protocol,
    pub anneal_time_ns: f64,
    pub j_scale: f64,
    pub s_pause: Option<f64>,
    /// Position in [`SweepGrid::points`]; selects the point's seed.
    pub index: u64,
}

/// Target temperature and the true ln Z it is scored against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub beta: InverseTemperature,
    pub ln_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    /// Samples behind this row (cumulative when the sweep is).
    pub reads: u64,
    pub unique_fraction: f64,
    pub ln_z_est: f64,
    pub log_rel_error: f64,
    pub histogram: EnergyHistogram,
}

/// Samples of one grid point plus the distinct configurations among them.
#[derive(Debug, Clone, Default)]
pub(crate) struct PointSamples {
    pub histogram: EnergyHistogram,
    pub distinct: HashSet<Vec<u64>>,
}

impl PointSamples {
    fn record(&mut self, state: &SpinState<'_>) {
        self.histogram.add(state.level());
        self.distinct.insert(pack_spins(state.spins()));
    }

    fn merge(&mut self, other: &PointSamples) {
        self.histogram.merge(&other.histogram);
        self.distinct.extend(other.distinct.iter().cloned());
    }

    fn unique_fraction(&self) -> f64 {
        self.distinct.len() as f64 / self.histogram.total() as f64
    }
}

/// Bit-packs a configuration (+1 → 1) for cheap hashing.
pub(crate) fn pack_spins(spins: &[i8]) -> Vec<u64> {
    spins
        .chunks(64)
        .map(|c| c.iter().enumerate().fold(0u64, |w, (i, &s)| w | (((s > 0) as u64) << i)))
        .collect()
}

fn sample_point(
    model: &IsingModel,
    grid: &SweepGrid,
    point: &SweepPoint,
    temp_model: &EffectiveTemperatureModel,
    root_seed: u64,
) -> Result<PointSamples> {
    let seed = point_seed(root_seed, point.index);
    let beta = temp_model.effective_beta(point.anneal_time_ns, point.j_scale)?;
    let mut samples = PointSamples::default();
    match grid.protocol {
        Protocol::Forward => {
            let mut reads = ForwardReads::new(model, beta, grid.proposals_per_spin, seed, 0);
            for _ in 0..grid.reads_per_point {
                samples.record(&reads.next_read());
            }
        }
        Protocol::Reverse => {
            let params = grid.reverse_params(point);
            let init = random_configuration(model.num_spins(), seed);
            let mut rng = rng_for(seed, 0);
            qemc_walk(model, &params, beta, init.into_inner(), &mut rng, |s| samples.record(s));
        }
    }
    Ok(samples)
}

/// Samples every grid point and scores each row's ln Z* against
/// `reference`. Points run in parallel; results do not depend on the
/// thread count.
pub fn run_sweep(
    model: &IsingModel,
    grid: &SweepGrid,
    cumulative: bool,
    temp_model: &EffectiveTemperatureModel,
    seed: u64,
    reference: Reference,
) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    temp_model.validate()?;
    let points = grid.points();
    let samples: Vec<PointSamples> = points
        .par_iter()
        .map(|p| sample_point(model, grid, p, temp_model, seed))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(points.len());
    let mut pool = PointSamples::default();
    for (k, (point, own)) in points.iter().zip(&samples).enumerate() {
        let first_on_line = k % grid.j_scales.len() == 0;
        let current = if cumulative {
            if first_on_line {
                pool = PointSamples::default();
            }
            pool.merge(own);
            &pool
        } else {
            own
        };
        let ln_z_est = histogram_ln_z(&current.histogram, model.num_spins(), reference.beta)?;
        rows.push(SweepRow {
            point: *point,
            reads: current.histogram.total(),
            unique_fraction: current.unique_fraction(),
            ln_z_est,
            log_rel_error: log_relative_error(ln_z_est, reference.ln_z)?,
            histogram: current.histogram.clone(),
        });
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "protocol,anneal_time_ns,j_scale,s_pause,reads,unique_fraction,lnZ_est,log_rel_error";

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        let s_pause = r.point.s_pause.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.point.protocol,
            r.point.anneal_time_ns,
            r.point.j_scale,
            s_pause,
            r.reads,
            r.unique_fraction,
            r.ln_z_est,
            r.log_rel_error
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dos::estimate_partition;
    use crate::dos::dos_from_histogram;
    use crate::enumerate::{enumerate_exact, exact_partition};
    use crate::surrogate::sample_forward;

    fn ring4() -> IsingModel {
        IsingModel::new(4, [], [(0, 1, -1.0), (1, 2, -1.0), (2, 3, -1.0), (3, 0, -1.0)]).unwrap()
    }

    fn reference(model: &IsingModel) -> Reference {
        let beta = InverseTemperature::from_temperature(4.0).unwrap();
        let ln_z = exact_partition(&enumerate_exact(model).unwrap(), beta).unwrap();
        Reference { beta, ln_z }
    }

    #[test]
    fn single_point_matches_direct_sampling() {
        let m = ring4();
        let r = reference(&m);
        let temp = EffectiveTemperatureModel::default();
        let grid = SweepGrid::forward(vec![20.0], vec![0.3], 500);
        let rows = run_sweep(&m, &grid, true, &temp, 17, r).unwrap();
        assert_eq!(rows.len(), 1);

        let params = ForwardAnnealParams::new(20.0, 0.3, 500).unwrap();
        let reads = sample_forward(&m, &params, &temp, point_seed(17, 0)).unwrap();
        let mut hist = EnergyHistogram::new();
        for c in &reads {
            hist.add(m.energy_level(c).unwrap());
        }
        assert_eq!(rows[0].histogram, hist);
        let ln_z = estimate_partition(&dos_from_histogram(&hist, 4).unwrap(), r.beta).unwrap();
        assert_eq!(rows[0].ln_z_est, ln_z);
        assert_eq!(rows[0].log_rel_error, log_relative_error(ln_z, r.ln_z).unwrap());
    }

    #[test]
    fn cumulative_rows_add_up() {
        let m = ring4();
        let temp = EffectiveTemperatureModel::default();
        let grid = SweepGrid::forward(vec![20.0, 100.0], vec![0.1, 0.9], 300);
        let plain = run_sweep(&m, &grid, false, &temp, 2, reference(&m)).unwrap();
        let cum = run_sweep(&m, &grid, true, &temp, 2, reference(&m)).unwrap();
        assert_eq!(cum[0].histogram, plain[0].histogram);
        assert_eq!(cum[1].reads, 600);
        assert_eq!(cum[1].histogram, plain[0].histogram.clone().merged(&plain[1].histogram));
        // A new anneal time restarts the pool.
        assert_eq!(cum[2].histogram, plain[2].histogram);
        assert!(cum.iter().all(|r| r.unique_fraction > 0.0 && r.unique_fraction <= 1.0));
    }

    #[test]
    fn reverse_sweep_matches_chain() {
        let m = ring4();
        let temp = EffectiveTemperatureModel::default();
        let grid = SweepGrid::reverse(vec![1000.0], vec![0.5], vec![0.3, 0.7], 200);
        let rows = run_sweep(&m, &grid, false, &temp, 5, reference(&m)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].point.s_pause, Some(0.7));
        let seed = point_seed(5, 1);
        let params = ReverseAnnealParams { relax_sweeps: grid.relax_sweeps, anneal_time_ns: 1000.0, ..ReverseAnnealParams::new(0.7, 0.5, 200).unwrap() };
        let chain = crate::surrogate::qemc_chain(&m, &params, &temp, &random_configuration(4, seed), seed).unwrap();
        let mut hist = EnergyHistogram::new();
        for c in &chain {
            hist.add(m.energy_level(c).unwrap());
        }
        assert_eq!(rows[1].histogram, hist);
    }

    #[test]
    fn csv_schema() {
        let m = ring4();
        let grid = SweepGrid::forward(vec![10.0], vec![0.5], 10);
        let rows = run_sweep(&m, &grid, true, &EffectiveTemperatureModel::default(), 0, reference(&m)).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(SWEEP_CSV_HEADER));
        let fields: Vec<_> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 8);
        assert_eq!(fields[0], "forward");
        assert_eq!(fields[3], "");
    }

    #[test]
    fn empty_grid_is_rejected() {
        let m = ring4();
        let grid = SweepGrid::forward(vec![10.0], vec![], 10);
        assert!(run_sweep(&m, &grid, true, &EffectiveTemperatureModel::default(), 0, reference(&m)).is_err());
        assert!("sideways".parse::<Protocol>().is_err());
        assert_eq!("reverse".parse::<Protocol>().unwrap(), Protocol::Reverse);
    }
}
