use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use isingpf::dos::histogram_ln_z;
use isingpf::embed::{pack_disjoint, verify_packing, PackingResult, SearchOptions, UndirectedGraph};
use isingpf::enumerate::{enumerate_exact_with_limit, DEFAULT_MAX_ENUMERATION_SPINS};
use isingpf::ga::{evolve, Evaluator, FitnessReport, GaConfig, Genome, GenomeReport, SearchSpace};
use isingpf::mhr::{mhr_estimate, MhrOptions};
use isingpf::sampler::{McmcRun, MetropolisChain, UniformSampler};
use isingpf::surrogate::{qemc_chain, random_configuration, ReverseAnnealParams};
use isingpf::sweep::{
    point_seed, run_sweep, write_sweep_csv, Protocol, Reference, SweepGrid, SweepRow, DEFAULT_ANNEAL_TIMES_NS,
    DEFAULT_J_SCALES, DEFAULT_S_PAUSES,
};
use isingpf::wang_landau::wl_run_observed;
use isingpf::{estimate_partition, exact_partition, log_relative_error, EnergyHistogram, InverseTemperature, IsingModel};

use crate::args::{EmbedArgs, EnumerateArgs, EstimateArgs, GaArgs, Method, SweepArgs};
use crate::output::{companion, io_error, CliError, CliResult, RunOutput, MAX_SPINS_ENV};

fn load_model(path: &Path) -> CliResult<IsingModel> {
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    IsingModel::from_json_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> CliResult<UndirectedGraph> {
    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
    UndirectedGraph::read_text(std::io::BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Largest N the enumeration oracle accepts, overridable from the environment.
pub fn enumeration_limit() -> CliResult<usize> {
    match std::env::var(MAX_SPINS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{MAX_SPINS_ENV}={v} is not a nonnegative integer"))),
        Err(_) => Ok(DEFAULT_MAX_ENUMERATION_SPINS),
    }
}

fn beta_at(temp: f64) -> CliResult<InverseTemperature> {
    Ok(InverseTemperature::from_temperature(temp)?)
}

fn exact_reference(model: &IsingModel, temp: f64) -> CliResult<Reference> {
    let beta = beta_at(temp)?;
    let spectrum = enumerate_exact_with_limit(model, enumeration_limit()?)?;
    Ok(Reference { beta, ln_z: exact_partition(&spectrum, beta)? })
}

/// Powers of two up to `total`, then `total` itself.
pub fn checkpoints(total: u64) -> Vec<u64> {
    let mut out: Vec<u64> = std::iter::successors(Some(1u64), |c| c.checked_mul(2)).take_while(|&c| c < total).collect();
    out.push(total);
    out
}

#[derive(Debug, Serialize)]
struct LnZAt {
    temperature: f64,
    ln_z: f64,
}

#[derive(Debug, Serialize)]
struct EnumerateSummary {
    num_spins: usize,
    total_states: u64,
    min_energy: f64,
    max_energy: f64,
    num_levels: usize,
    ln_z: Vec<LnZAt>,
}

pub fn enumerate(a: &EnumerateArgs, args: &[String]) -> CliResult<()> {
    let model = load_model(&a.model)?;
    let spectrum = enumerate_exact_with_limit(&model, enumeration_limit()?)?;
    let ln_z = a
        .temp
        .iter()
        .map(|&t| Ok(LnZAt { temperature: t, ln_z: exact_partition(&spectrum, beta_at(t)?)? }))
        .collect::<CliResult<Vec<_>>>()?;

    let mut csv = Vec::new();
    EnergyHistogram::from_counts(spectrum.counts().iter().map(|(&e, &c)| (e, c))).write_csv(&mut csv)?;
    let summary = EnumerateSummary {
        num_spins: spectrum.num_spins(),
        total_states: spectrum.total(),
        min_energy: spectrum.min_energy().value(),
        max_energy: spectrum.max_energy().value(),
        num_levels: spectrum.counts().len(),
        ln_z,
    };
    let mut out = RunOutput::new(&a.out);
    out.add(a.out.clone(), csv);
    out.add_json(companion(&a.out, "summary.json"), &summary);
    out.finish("enumerate", Some(&a.model), None, a, args)
}

#[derive(Debug, Clone, Copy)]
struct ConvergenceRow {
    samples: u64,
    ln_z_est: f64,
    log_rel_error: f64,
}

fn convergence_csv(rows: &[ConvergenceRow]) -> Vec<u8> {
    let mut text = String::from("samples,lnZ_est,log_rel_error\n");
    for r in rows {
        text += &format!("{},{},{}\n", r.samples, r.ln_z_est, r.log_rel_error);
    }
    text.into_bytes()
}

#[derive(Debug, Serialize)]
struct EstimateSummary {
    method: Method,
    temperature: f64,
    ln_z_exact: f64,
    samples: u64,
    ln_z_est: f64,
    log_rel_error: f64,
    /// Estimator-specific diagnostics.
    details: serde_json::Value,
}

pub fn estimate(a: &EstimateArgs, args: &[String]) -> CliResult<()> {
    let model = load_model(&a.common.model)?;
    let reference = exact_reference(&model, a.temp)?;
    let seed = a.common.seed;
    let mut out = RunOutput::new(&a.out);

    let score = |samples: u64, ln_z_est: f64| -> CliResult<ConvergenceRow> {
        Ok(ConvergenceRow { samples, ln_z_est, log_rel_error: log_relative_error(ln_z_est, reference.ln_z)? })
    };

    let (rows, details) = match a.method {
        Method::Random => {
            let total = a.samples.unwrap_or(1_000_000);
            if total == 0 {
                return Err(CliError::Usage("--samples must be positive".into()));
            }
            let mut sampler = UniformSampler::new(&model, seed);
            let mut hist = EnergyHistogram::new();
            let mut rows = Vec::new();
            for c in checkpoints(total) {
                let more = c - hist.total();
                sampler.fill(&mut hist, more);
                rows.push(score(c, histogram_ln_z(&hist, model.num_spins(), reference.beta)?)?);
            }
            (rows, serde_json::json!({ "levels_seen": hist.counts().len() }))
        }
        Method::Wl => {
            let params = a.wl.params();
            let mut trace = Vec::new();
            let result = wl_run_observed(&model, &params, seed, |state| {
                trace.push((state.steps(), estimate_partition(&state.estimate(), reference.beta)));
            })?;
            let mut rows = Vec::with_capacity(trace.len() + 1);
            for (steps, ln_z) in trace {
                rows.push(score(steps, ln_z?)?);
            }
            if rows.last().is_none_or(|r| r.samples != result.steps) {
                rows.push(score(result.steps, estimate_partition(&result.dos, reference.beta)?)?);
            }
            let details = serde_json::json!({
                "converged": result.converged,
                "stages": result.stages,
                "final_ln_f": result.final_ln_f,
            });
            (rows, details)
        }
        Method::Mhr => estimate_mhr(a, &model, reference, &score)?,
        Method::Qemc => estimate_qemc(a, &model, &score)?,
        Method::Forward => {
            let mut grid =
                SweepGrid::forward(a.forward.anneal_times.clone(), a.forward.j_scales.clone(), a.forward.reads);
            grid.proposals_per_spin = a.surrogate.proposals_per_spin;
            let rows = run_sweep(&model, &grid, a.forward.cumulative, &a.surrogate.model(), seed, reference)?;
            let mut csv = Vec::new();
            write_sweep_csv(&rows, &mut csv)?;
            out.add(a.out.clone(), csv);
            out.add_json(companion(&a.out, "summary.json"), &sweep_summary(&rows, a.temp, reference));
            return out.finish("estimate", Some(&a.common.model), Some(seed), a, args);
        }
    };

    let last = *rows.last().expect("at least one checkpoint");
    let summary = EstimateSummary {
        method: a.method,
        temperature: a.temp,
        ln_z_exact: reference.ln_z,
        samples: last.samples,
        ln_z_est: last.ln_z_est,
        log_rel_error: last.log_rel_error,
        details,
    };
    out.add(a.out.clone(), convergence_csv(&rows));
    out.add_json(companion(&a.out, "summary.json"), &summary);
    out.finish("estimate", Some(&a.common.model), Some(seed), a, args)
}

type Scorer<'a> = dyn Fn(u64, f64) -> CliResult<ConvergenceRow> + 'a;

/// Metropolis runs at every run temperature, reweighted at checkpoints of
/// the per-run sample count. The sample column counts all runs together.
fn estimate_mhr(
    a: &EstimateArgs,
    model: &IsingModel,
    reference: Reference,
    score: &Scorer<'_>,
) -> CliResult<(Vec<ConvergenceRow>, serde_json::Value)> {
    let per_run = a.samples.unwrap_or(200_000);
    if per_run == 0 || a.mhr.run_temps.is_empty() {
        return Err(CliError::Usage("MHR needs at least one run temperature and a positive --samples".into()));
    }
    let betas = a.mhr.run_temps.iter().map(|&t| beta_at(t)).collect::<CliResult<Vec<_>>>()?;
    let cps = checkpoints(per_run);
    let snapshots: Vec<Vec<EnergyHistogram>> = betas
        .par_iter()
        .enumerate()
        .map(|(k, beta)| {
            let mut chain = MetropolisChain::new(model, beta.value(), a.common.seed, k as u64);
            for _ in 0..a.mhr.burn_in {
                chain.step();
            }
            let mut hist = EnergyHistogram::new();
            let mut snaps = Vec::with_capacity(cps.len());
            for &c in &cps {
                while hist.total() < c {
                    hist.add(chain.step());
                }
                snaps.push(hist.clone());
            }
            snaps
        })
        .collect();

    let options = MhrOptions { tol: a.mhr.tol, max_iter: a.mhr.max_iter, ..MhrOptions::default() };
    let mut rows = Vec::with_capacity(cps.len());
    let mut last = None;
    for (ci, &c) in cps.iter().enumerate() {
        let runs: Vec<McmcRun> = betas
            .iter()
            .zip(&snapshots)
            .map(|(&beta, s)| McmcRun { beta, histogram: s[ci].clone() })
            .collect();
        let result = mhr_estimate(&runs, model.num_spins(), reference.beta, &options)?;
        rows.push(score(c * runs.len() as u64, result.ln_z)?);
        last = Some(result);
    }
    let last = last.expect("at least one checkpoint");
    let details = serde_json::json!({
        "runs": a.mhr.run_temps.len(),
        "samples_per_run": per_run,
        "burn_in": a.mhr.burn_in,
        "converged": last.converged,
        "iterations": last.iterations,
        "overlap_warning": last.overlap_warning,
        "extrapolated": last.extrapolated,
        "free_energies": last.free_energies.f,
    });
    Ok((rows, details))
}

/// Parallel QEMC chains; samples are counted iteration by iteration across
/// all chains.
fn estimate_qemc(
    a: &EstimateArgs,
    model: &IsingModel,
    score: &Scorer<'_>,
) -> CliResult<(Vec<ConvergenceRow>, serde_json::Value)> {
    let q = &a.qemc;
    if q.chains == 0 {
        return Err(CliError::Usage("--chains must be positive".into()));
    }
    let params = ReverseAnnealParams {
        s_pause: q.s_pause,
        j_scale: q.j_scale,
        anneal_time_ns: q.anneal_time,
        chain_length: q.chain_length,
        relax_sweeps: q.relax_sweeps,
    };
    let temp_model = a.surrogate.model();
    let beta_eff = temp_model.effective_beta(q.anneal_time, q.j_scale)?;
    let chains: Vec<Vec<isingpf::EnergyLevel>> = (0..q.chains)
        .into_par_iter()
        .map(|c| {
            let seed = point_seed(a.common.seed, c);
            let init = random_configuration(model.num_spins(), seed);
            let configs = qemc_chain(model, &params, &temp_model, &init, seed)?;
            configs.iter().map(|s| model.energy_level(s)).collect::<isingpf::Result<Vec<_>>>()
        })
        .collect::<isingpf::Result<_>>()?;

    let total = q.chains * q.chain_length;
    let mut hist = EnergyHistogram::new();
    let mut rows = Vec::new();
    let mut next = 0usize;
    for c in checkpoints(total) {
        while hist.total() < c {
            let (iter, chain) = (next / q.chains as usize, next % q.chains as usize);
            hist.add(chains[chain][iter]);
            next += 1;
        }
        rows.push(score(c, histogram_ln_z(&hist, model.num_spins(), beta_at(a.temp)?)?)?);
    }
    Ok((rows, serde_json::json!({ "chains": q.chains, "beta_eff": beta_eff })))
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    temperature: f64,
    ln_z_exact: f64,
    rows: usize,
    best: Option<BestRow>,
}

#[derive(Debug, Serialize)]
struct BestRow {
    anneal_time_ns: f64,
    j_scale: f64,
    s_pause: Option<f64>,
    reads: u64,
    ln_z_est: f64,
    log_rel_error: f64,
}

fn sweep_summary(rows: &[SweepRow], temp: f64, reference: Reference) -> SweepSummary {
    let best = rows.iter().min_by(|a, b| a.log_rel_error.total_cmp(&b.log_rel_error)).map(|r| BestRow {
        anneal_time_ns: r.point.anneal_time_ns,
        j_scale: r.point.j_scale,
        s_pause: r.point.s_pause,
        reads: r.reads,
        ln_z_est: r.ln_z_est,
        log_rel_error: r.log_rel_error,
    });
    SweepSummary { temperature: temp, ln_z_exact: reference.ln_z, rows: rows.len(), best }
}

pub fn sweep(a: &SweepArgs, args: &[String]) -> CliResult<()> {
    let model = load_model(&a.common.model)?;
    let reference = exact_reference(&model, a.temp)?;
    let j_scales = a.j_scales.clone().unwrap_or_else(|| DEFAULT_J_SCALES.to_vec());
    let mut grid = match a.protocol {
        Protocol::Forward => SweepGrid::forward(
            a.anneal_times.clone().unwrap_or_else(|| DEFAULT_ANNEAL_TIMES_NS.to_vec()),
            j_scales,
            a.reads,
        ),
        Protocol::Reverse => SweepGrid::reverse(
            a.anneal_times.clone().unwrap_or_else(|| vec![ReverseAnnealParams::DEFAULT_ANNEAL_TIME_NS]),
            j_scales,
            a.s_pauses.clone().unwrap_or_else(|| DEFAULT_S_PAUSES.to_vec()),
            a.chain_length,
        ),
    };
    grid.proposals_per_spin = a.surrogate.proposals_per_spin;
    grid.relax_sweeps = a.relax_sweeps;
    let rows = run_sweep(&model, &grid, a.cumulative, &a.surrogate.model(), a.common.seed, reference)?;

    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    let mut out = RunOutput::new(&a.out);
    out.add(a.out.clone(), csv);
    out.add_json(companion(&a.out, "summary.json"), &sweep_summary(&rows, a.temp, reference));
    out.finish("sweep", Some(&a.common.model), Some(a.common.seed), a, args)
}

#[derive(Debug, Serialize)]
struct GaOutput {
    best: GenomeReport,
    fitness: FitnessReport,
    genome: Genome,
    ln_z_exact: f64,
}

pub fn ga_search(a: &GaArgs, args: &[String]) -> CliResult<()> {
    let model = load_model(&a.common.model)?;
    let reference = exact_reference(&model, a.temp)?;
    let mut space = match a.protocol {
        Protocol::Forward => SearchSpace::forward(a.anneal_times.clone(), a.j_scales.clone(), a.reads_choices.clone()),
        Protocol::Reverse => SearchSpace::reverse(
            a.anneal_times.clone(),
            a.j_scales.clone(),
            a.s_pauses.clone(),
            a.reads_choices.clone(),
        ),
    };
    space.proposals_per_spin = a.surrogate.proposals_per_spin;
    space.relax_sweeps = a.relax_sweeps;
    let evaluator = Evaluator::new(&model, space, a.surrogate.model(), reference, a.lambda, a.common.seed)?;
    let config = GaConfig {
        population: a.population,
        generations: a.generations,
        mutation_rate: a.mutation_rate,
        crossover_fraction: a.crossover_fraction,
        sample_penalty_lambda: a.lambda,
        rng_seed: a.common.seed,
    };
    let result = evolve(&config, &evaluator)?;

    let mut csv = String::from("generation,best_fitness,mean_fitness,best_so_far,best_log_rel_error\n");
    for g in &result.trace {
        csv += &format!(
            "{},{},{},{},{}\n",
            g.generation, g.best_fitness, g.mean_fitness, g.best_so_far, g.best_log_rel_error
        );
    }
    let genome = GaOutput {
        best: result.best.describe(evaluator.space()),
        fitness: result.best_report,
        genome: result.best.clone(),
        ln_z_exact: reference.ln_z,
    };
    let mut out = RunOutput::new(&a.out);
    out.add(a.out.clone(), csv.into_bytes());
    out.add_json(companion(&a.out, "genome.json"), &genome);
    out.finish("ga-search", Some(&a.common.model), Some(a.common.seed), a, args)
}

#[derive(Debug, Serialize)]
struct PackingOutput {
    count: usize,
    verified: bool,
    #[serde(flatten)]
    packing: PackingResult,
}

pub fn embed(a: &EmbedArgs, args: &[String]) -> CliResult<()> {
    let pattern = load_graph(&a.pattern)?;
    let host = load_graph(&a.host)?;
    let opts = SearchOptions { seed: a.seed, node_budget: a.budget };
    let packing = pack_disjoint(&pattern, &host, opts)?;
    verify_packing(&pattern, &host, &packing).map_err(|m| CliError::Runtime(format!("packing failed verification: {m}")))?;

    let mut out = RunOutput::new(&a.out);
    out.add_json(a.out.clone(), &PackingOutput { count: packing.count(), verified: true, packing });
    out.finish("embed", None, a.seed, a, args)
}
