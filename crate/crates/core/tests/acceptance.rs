//! End-to-end acceptance checks on the shipped 25-spin instance and small
//! oracles. Runs without the libtest harness so that every criterion prints
//! exactly one PASS or FAIL line, even when output capture is on.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;

use isingpf::dos::histogram_ln_z;
use isingpf::embed::{find_one, pack_disjoint, verify_embedding, verify_packing, Embedding, SearchOptions, SearchOutcome, UndirectedGraph};
use isingpf::ga::{best_single_point, evolve, Evaluator, GaConfig, GaResult, SearchSpace};
use isingpf::instance::shipped_instance;
use isingpf::mhr::{mhr_estimate, MhrOptions};
use isingpf::rng::rng_for;
use isingpf::sampler::{metropolis_chain, uniform_histogram, McmcRun};
use isingpf::surrogate::{qemc_chain, random_configuration, EffectiveTemperatureModel, ReverseAnnealParams};
use isingpf::sweep::{run_sweep, Reference, SweepGrid, DEFAULT_J_SCALES};
use isingpf::wang_landau::{wl_run, WlParams};
use isingpf::{
    enumerate_exact, estimate_partition, exact_partition, log_relative_error, EnergyHistogram, InverseTemperature,
    IsingModel, SpinConfiguration,
};

const SEEDS: u64 = 20;
const MHR_TEMPERATURES: [f64; 5] = [3.5, 3.75, 4.0, 4.25, 4.5];
const BASELINE_SAMPLES: u64 = 1_000_000;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Exact ln Z of the shipped instance at T = 4, computed once.
struct Oracle {
    model: IsingModel,
    reference: Reference,
}

impl Oracle {
    fn new() -> Self {
        let model = shipped_instance();
        let beta = InverseTemperature::from_temperature(4.0).unwrap();
        let ln_z = exact_partition(&enumerate_exact(&model).unwrap(), beta).unwrap();
        Oracle { model, reference: Reference { beta, ln_z } }
    }

    fn error(&self, ln_z_est: f64) -> f64 {
        log_relative_error(ln_z_est, self.reference.ln_z).unwrap()
    }

    /// 20-seed median error of ln Z* from 10^6 uniform samples.
    fn uniform_baseline(&self) -> f64 {
        median(
            (0..SEEDS)
                .map(|seed| {
                    let hist = uniform_histogram(&self.model, BASELINE_SAMPLES, 1000 + seed);
                    self.error(histogram_ln_z(&hist, self.model.num_spins(), self.reference.beta).unwrap())
                })
                .collect(),
        )
    }
}

fn enumeration_is_tractable() -> Outcome {
    let start = Instant::now();
    let spectrum = enumerate_exact(&shipped_instance()).unwrap();
    let elapsed = start.elapsed();
    ensure(
        elapsed <= Duration::from_secs(60) && spectrum.total() == 1 << 25,
        format!("mass {} in {:.2?} over {} levels", spectrum.total(), elapsed, spectrum.counts().len()),
    )
}

fn open_chains_match_closed_form() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in [3usize, 10, 20] {
        for j in [1.0, -1.0] {
            let model = IsingModel::new(n, [], (1..n).map(|i| (i - 1, i, j))).unwrap();
            let spectrum = enumerate_exact(&model).unwrap();
            for beta in [0.1, 0.25, 1.0] {
                let exact = exact_partition(&spectrum, InverseTemperature::new(beta).unwrap()).unwrap();
                let closed = (2.0f64).ln() + (n - 1) as f64 * (2.0 * (beta * j).cosh()).ln();
                worst = worst.max(((exact - closed) / closed).abs());
            }
        }
    }
    ensure(worst <= 1e-10, format!("worst relative error {worst:.2e} over 18 chains"))
}

fn scaled_spectrum_recovers_ln_z(o: &Oracle) -> Outcome {
    let spectrum = enumerate_exact(&o.model).unwrap();
    let mut worst: f64 = 0.0;
    for scale in [1u64, 3, 1000] {
        let hist = EnergyHistogram::from_counts(spectrum.counts().iter().map(|(&e, &c)| (e, c * scale)));
        let ln_z = histogram_ln_z(&hist, o.model.num_spins(), o.reference.beta).unwrap();
        worst = worst.max(o.error(ln_z));
    }
    ensure(worst <= 1e-12, format!("worst log relative error {worst:.2e} for scales 1, 3, 1000"))
}

fn wang_landau_beats_uniform(o: &Oracle, baseline: f64) -> Outcome {
    let params = WlParams { flatness: 0.90, step_budget: 100_000_000, ..WlParams::default() };
    assert_eq!(params.check_interval, 3_500_000);
    let mut errors = Vec::new();
    let mut max_steps = 0;
    for seed in 0..SEEDS {
        let run = wl_run(&o.model, &params, seed).unwrap();
        max_steps = max_steps.max(run.steps);
        errors.push(o.error(estimate_partition(&run.dos, o.reference.beta).unwrap()));
    }
    let med = median(errors);
    ensure(
        med <= 1e-2 && med < baseline,
        format!("median error {med:.3e} vs uniform baseline {baseline:.3e}, at most {max_steps} proposals"),
    )
}

fn mhr_runs(o: &Oracle, samples: u64, seed: u64) -> Vec<McmcRun> {
    const BURN_IN: u64 = 10_000;
    MHR_TEMPERATURES
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let beta = InverseTemperature::from_temperature(t).unwrap();
            metropolis_chain(&o.model, beta, samples + BURN_IN, BURN_IN, seed * 10 + k as u64).unwrap()
        })
        .collect()
}

fn mhr_beats_uniform(o: &Oracle, baseline: f64) -> Outcome {
    const SAMPLES: u64 = 10_000_000;
    let errors: Vec<f64> = (0..SEEDS)
        .map(|seed| {
            let runs = mhr_runs(o, SAMPLES, seed);
            let result = mhr_estimate(&runs, o.model.num_spins(), o.reference.beta, &MhrOptions::default()).unwrap();
            o.error(result.ln_z)
        })
        .collect();
    let med = median(errors);
    ensure(
        med <= 1e-2 && med < baseline,
        format!("median error {med:.3e} vs uniform baseline {baseline:.3e}, {SAMPLES} samples per run"),
    )
}

fn mhr_is_gauge_invariant(o: &Oracle) -> Outcome {
    let runs = mhr_runs(o, 200_000, 99);
    let n = o.model.num_spins();
    let a = mhr_estimate(&runs, n, o.reference.beta, &MhrOptions::default()).unwrap();
    let b = mhr_estimate(&runs, n, o.reference.beta, &MhrOptions { gauge: 7.5, ..MhrOptions::default() }).unwrap();
    let diff = (a.ln_z - b.ln_z).abs();
    ensure(diff <= 1e-10 && a.converged && b.converged, format!("|Δ ln Z*| = {diff:.2e} between gauges 0 and 7.5"))
}

fn forward_sweep_crosses_over(o: &Oracle) -> Outcome {
    const ANNEAL_TIME_NS: f64 = 8.0;
    let grid = SweepGrid::forward(vec![ANNEAL_TIME_NS], DEFAULT_J_SCALES.to_vec(), 2000);
    let temp = EffectiveTemperatureModel::default();
    let traces: Vec<Vec<f64>> = (0..SEEDS)
        .map(|seed| {
            run_sweep(&o.model, &grid, true, &temp, seed, o.reference)
                .unwrap()
                .iter()
                .map(|r| r.ln_z_est - o.reference.ln_z)
                .collect()
        })
        .collect();
    let trace: Vec<f64> = (0..DEFAULT_J_SCALES.len()).map(|k| median(traces.iter().map(|t| t[k]).collect())).collect();
    let changes = trace.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
    let first_over = trace.iter().position(|&d| d > 0.0).map(|k| DEFAULT_J_SCALES[k]);
    ensure(
        changes == 1 && trace[0] < 0.0,
        format!("{changes} sign change(s); median trace starts at {:+.2e}, first over-estimate at j = {first_over:?}", trace[0]),
    )
}

fn forward_grid_has_sweet_spot(o: &Oracle) -> Outcome {
    const SEED: u64 = 2025;
    let grid = SweepGrid::forward(vec![5.0, 8.0], vec![1e-4, 1e-3, 5e-3, 0.01, 0.02], 50_000);
    let rows = run_sweep(&o.model, &grid, true, &EffectiveTemperatureModel::default(), SEED, o.reference).unwrap();
    let best = rows
        .iter()
        .filter(|r| r.reads <= 500_000)
        .min_by(|a, b| a.log_rel_error.total_cmp(&b.log_rel_error))
        .unwrap();
    ensure(
        best.log_rel_error <= 1e-3,
        format!(
            "best error {:.3e} at t = {} ns, j = {}, {} samples (seed {SEED})",
            best.log_rel_error, best.point.anneal_time_ns, best.point.j_scale, best.reads
        ),
    )
}

fn qemc_boundaries_and_descent() -> Outcome {
    let temp = EffectiveTemperatureModel::default();
    let model = shipped_instance();

    let frozen = ReverseAnnealParams { relax_sweeps: 0, ..ReverseAnnealParams::new(1.0, 1.0, 20).unwrap() };
    let init = random_configuration(25, 5);
    let frozen_ok = qemc_chain(&model, &frozen, &temp, &init, 5).unwrap().iter().all(|c| *c == init);

    // s = 0 with no relaxation: each iterate is a fresh uniform draw.
    let ring = IsingModel::new(4, [], [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)]).unwrap();
    let hot = ReverseAnnealParams { relax_sweeps: 0, ..ReverseAnnealParams::new(0.0, 1.0, 64_000).unwrap() };
    let mut counts = [0u64; 16];
    let start = SpinConfiguration::all_up(4);
    for c in qemc_chain(&ring, &hot, &temp, &start, 6).unwrap() {
        counts[c.spins().iter().fold(0, |acc, &s| acc * 2 + usize::from(s > 0))] += 1;
    }
    let expected = 64_000.0 / 16.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 15 degrees of freedom.
    let uniform_ok = hot.flip_probability() == 0.5 && chi2 < 37.7;

    // Per-iteration median energy over 50 chains, then its running mean.
    const CHAINS: u64 = 50;
    const LENGTH: u64 = 100;
    let params = ReverseAnnealParams::new(0.9, 1.0, LENGTH).unwrap();
    let energies: Vec<Vec<f64>> = (0..CHAINS)
        .map(|seed| {
            let init = random_configuration(25, seed);
            qemc_chain(&model, &params, &temp, &init, seed).unwrap().iter().map(|c| model.energy(c).unwrap()).collect()
        })
        .collect();
    let mut sum = 0.0;
    let running: Vec<f64> = (0..LENGTH as usize)
        .map(|k| {
            sum += median(energies.iter().map(|e| e[k]).collect());
            sum / (k + 1) as f64
        })
        .collect();
    let rises = running.windows(2).filter(|w| w[1] > w[0] + 1e-12).count();

    ensure(
        frozen_ok && uniform_ok && rises == 0,
        format!(
            "frozen {frozen_ok}, s = 0 chi2 {chi2:.1}, running median energy {:.3} -> {:.3} with {rises} rises",
            running[0],
            running[running.len() - 1]
        ),
    )
}

fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> UndirectedGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    UndirectedGraph::new(n, edges).unwrap()
}

/// Tries every injective map of pattern vertices into host vertices.
fn brute_force_embeds(pattern: &UndirectedGraph, host: &UndirectedGraph) -> bool {
    fn extend(p: &UndirectedGraph, h: &UndirectedGraph, map: &mut Vec<usize>) -> bool {
        if map.len() == p.num_vertices() {
            return verify_embedding(p, h, &Embedding { map: map.clone() }).is_ok();
        }
        for v in 0..h.num_vertices() {
            if !map.contains(&v) {
                map.push(v);
                if extend(p, h, map) {
                    return true;
                }
                map.pop();
            }
        }
        false
    }
    extend(pattern, host, &mut Vec::new())
}

fn embedding_matches_oracle() -> Outcome {
    let mut rng = rng_for(10, 0);
    let mut disagreements = 0;
    let mut satisfiable = 0;
    let mut invalid_packings = 0;
    for _ in 0..100 {
        let pattern = random_graph(rng.random_range(1..=5), 0.5, &mut rng);
        let host = random_graph(rng.random_range(pattern.num_vertices()..=10), 0.45, &mut rng);
        let expected = brute_force_embeds(&pattern, &host);
        satisfiable += usize::from(expected);
        let found = match find_one(&pattern, &host, &HashSet::new(), SearchOptions::default()).unwrap() {
            SearchOutcome::Found(e) => verify_embedding(&pattern, &host, &e).is_ok(),
            SearchOutcome::NotFound => false,
            SearchOutcome::Unknown => {
                disagreements += 1;
                continue;
            }
        };
        disagreements += usize::from(found != expected);
        let packing = pack_disjoint(&pattern, &host, SearchOptions::default()).unwrap();
        invalid_packings += usize::from(verify_packing(&pattern, &host, &packing).is_err());
    }

    let graph = |n, e: &[(usize, usize)]| UndirectedGraph::new(n, e.iter().copied()).unwrap();
    let edge = graph(2, &[(0, 1)]);
    let p5 = graph(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
    let triangle = graph(3, &[(0, 1), (1, 2), (0, 2)]);
    let k4 = graph(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    let p5_count = pack_disjoint(&edge, &p5, SearchOptions::default()).unwrap().count();
    let k4_count = pack_disjoint(&triangle, &k4, SearchOptions::default()).unwrap().count();

    ensure(
        disagreements == 0 && invalid_packings == 0 && p5_count == 2 && k4_count == 1,
        format!(
            "{disagreements} disagreements on 100 instances ({satisfiable} satisfiable), {invalid_packings} invalid packings, P5 {p5_count}, K4 {k4_count}"
        ),
    )
}

fn is_monotone(result: &GaResult) -> bool {
    result.trace.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far && w[1].best_fitness <= w[0].best_fitness)
}

fn ga_beats_best_grid_point(o: &Oracle) -> Outcome {
    const SEED: u64 = 11;
    let space = SearchSpace::forward(
        vec![5.0, 8.0, 10.0, 20.0, 50.0],
        vec![1e-4, 1e-3, 5e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
        vec![500, 1000, 2000, 5000],
    );
    let config = GaConfig { generations: 30, sample_penalty_lambda: 1e-11, rng_seed: SEED, ..GaConfig::default() };
    let evaluator =
        Evaluator::new(&o.model, space, EffectiveTemperatureModel::default(), o.reference, config.sample_penalty_lambda, SEED)
            .unwrap();
    let (_, baseline) = best_single_point(&evaluator).unwrap();
    let runs: Vec<GaResult> =
        [SEED, SEED + 1, SEED + 2].iter().map(|&s| evolve(&GaConfig { rng_seed: s, ..config }, &evaluator).unwrap()).collect();
    let monotone = runs.iter().all(is_monotone);
    let best = &runs[0].best_report;
    ensure(
        monotone && best.fitness < baseline.fitness && best.log_rel_error < baseline.log_rel_error,
        format!(
            "monotone on {} runs: {monotone}; GA error {:.3e} with {} samples vs grid point {:.3e} with {}",
            runs.len(),
            best.log_rel_error,
            best.total_samples,
            baseline.log_rel_error,
            baseline.total_samples
        ),
    )
}

fn main() {
    let start = Instant::now();
    let oracle = Oracle::new();
    let baseline = oracle.uniform_baseline();
    println!("uniform baseline: median log relative error {baseline:.3e} from {BASELINE_SAMPLES} samples, {SEEDS} seeds");

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("enumeration tractable, mass 2^25", Box::new(enumeration_is_tractable)),
        ("open chains match closed form", Box::new(open_chains_match_closed_form)),
        ("scaled spectrum reproduces ln Z", Box::new(|| scaled_spectrum_recovers_ln_z(&oracle))),
        ("Wang-Landau beats uniform sampling", Box::new(|| wang_landau_beats_uniform(&oracle, baseline))),
        ("MHR beats uniform sampling", Box::new(|| mhr_beats_uniform(&oracle, baseline))),
        ("MHR gauge invariance", Box::new(|| mhr_is_gauge_invariant(&oracle))),
        ("forward sweep under/over crossover", Box::new(|| forward_sweep_crosses_over(&oracle))),
        ("forward sweep sweet spot", Box::new(|| forward_grid_has_sweet_spot(&oracle))),
        ("QEMC boundaries and descent", Box::new(qemc_boundaries_and_descent)),
        ("embedding oracle equivalence", Box::new(embedding_matches_oracle)),
        ("GA monotone and beats the grid", Box::new(|| ga_beats_best_grid_point(&oracle))),
    ];

    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {:>2}: {name}: {detail} [{:.1?}]", k + 1, t.elapsed());
    }
    println!("{} of {} criteria passed in {:.1?}", criteria.len() - failures, criteria.len(), start.elapsed());
    if failures > 0 {
        std::process::exit(1);
    }
}
