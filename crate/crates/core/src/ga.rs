//! Genetic search over surrogate sampling plans.
//!
//! A genome switches grid traits on or off (which J scales and anneal times
//! to sample, which pause to use) and picks a read count per active point.
//! Its fitness is the log relative error of ln Z* from the merged samples
//! of all active points, plus a small penalty per sample.
//!
//! Samples are common random numbers: a grid point always draws from the
//! same seed, and a smaller read count is a prefix of a larger one. Two
//! genomes that share a point therefore share its samples, and every point
//! is simulated at most once per search.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dos::{histogram_ln_z, EnergyHistogram};
use crate::error::{Error, Result};
use crate::math::log_relative_error;
use crate::model::IsingModel;
use crate::rng::{rng_for, stream_id, TaskRng};
use crate::surrogate::{qemc_walk, random_configuration, EffectiveTemperatureModel, ForwardReads, ReverseAnnealParams};
use crate::sweep::{point_seed, Protocol, Reference};

const GA_STREAM_GROUP: u64 = 2;

/// The traits a genome can switch on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub protocol: Protocol,
    pub j_scales: Vec<f64>,
    pub anneal_times_ns: Vec<f64>,
    /// Pause choices; only used by the reverse protocol.
    pub s_pauses: Vec<f64>,
    /// Allowed reads (forward) or chain lengths (reverse) per active point.
    pub reads_choices: Vec<u64>,
    pub proposals_per_spin: u64,
    pub relax_sweeps: u64,
}

impl SearchSpace {
    pub fn forward(anneal_times_ns: Vec<f64>, j_scales: Vec<f64>, reads_choices: Vec<u64>) -> Self {
        SearchSpace {
            protocol: Protocol::Forward,
            j_scales,
            anneal_times_ns,
            s_pauses: Vec::new(),
            reads_choices,
            proposals_per_spin: crate::surrogate::ForwardAnnealParams::DEFAULT_PROPOSALS_PER_SPIN,
            relax_sweeps: ReverseAnnealParams::DEFAULT_RELAX_SWEEPS,
        }
    }

    pub fn reverse(anneal_times_ns: Vec<f64>, j_scales: Vec<f64>, s_pauses: Vec<f64>, reads_choices: Vec<u64>) -> Self {
        SearchSpace { protocol: Protocol::Reverse, s_pauses, ..Self::forward(anneal_times_ns, j_scales, reads_choices) }
    }

    fn validate(&self) -> Result<()> {
        if self.j_scales.is_empty() || self.anneal_times_ns.is_empty() || self.reads_choices.is_empty() {
            return Err(Error::domain("search space needs at least one J scale, anneal time and read count"));
        }
        if self.protocol == Protocol::Reverse && self.s_pauses.is_empty() {
            return Err(Error::domain("reverse search space needs at least one pause"));
        }
        if self.reads_choices.contains(&0) {
            return Err(Error::domain("read counts must be positive"));
        }
        for &t in &self.anneal_times_ns {
            for &j in &self.j_scales {
                crate::surrogate::ForwardAnnealParams {
                    anneal_time_ns: t,
                    j_scale: j,
                    num_reads: 1,
                    proposals_per_spin: self.proposals_per_spin,
                }
                .validate()?;
            }
        }
        for &s in &self.s_pauses {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::domain(format!("s_pause {s} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn num_pauses(&self) -> usize {
        match self.protocol {
            Protocol::Forward => 1,
            Protocol::Reverse => self.s_pauses.len(),
        }
    }

    fn point_index(&self, t: usize, s: usize, j: usize) -> usize {
        (t * self.num_pauses() + s) * self.j_scales.len() + j
    }

    fn num_points(&self) -> usize {
        self.anneal_times_ns.len() * self.num_pauses() * self.j_scales.len()
    }
}

/// One candidate plan. Traits index into a [`SearchSpace`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub active_j: Vec<bool>,
    pub active_t: Vec<bool>,
    pub s_pause: Option<usize>,
    pub reads: usize,
}

impl Genome {
    fn random(space: &SearchSpace, rng: &mut TaskRng) -> Self {
        let mut g = Genome {
            active_j: (0..space.j_scales.len()).map(|_| rng.random()).collect(),
            active_t: (0..space.anneal_times_ns.len()).map(|_| rng.random()).collect(),
            s_pause: (space.protocol == Protocol::Reverse).then(|| rng.random_range(0..space.s_pauses.len())),
            reads: rng.random_range(0..space.reads_choices.len()),
        };
        g.repair(rng);
        g
    }

    /// Genome with exactly one active J scale and anneal time.
    pub fn single_point(space: &SearchSpace, t: usize, j: usize, s: Option<usize>, reads: usize) -> Self {
        let mut active_t = vec![false; space.anneal_times_ns.len()];
        let mut active_j = vec![false; space.j_scales.len()];
        active_t[t] = true;
        active_j[j] = true;
        Genome { active_j, active_t, s_pause: s, reads }
    }

    /// Re-activates a random trait when a mask would otherwise be empty.
    fn repair(&mut self, rng: &mut TaskRng) {
        for mask in [&mut self.active_j, &mut self.active_t] {
            if !mask.iter().any(|&b| b) {
                let k = rng.random_range(0..mask.len());
                mask[k] = true;
            }
        }
    }

    pub fn is_valid(&self, space: &SearchSpace) -> bool {
        self.active_j.len() == space.j_scales.len()
            && self.active_t.len() == space.anneal_times_ns.len()
            && self.active_j.iter().any(|&b| b)
            && self.active_t.iter().any(|&b| b)
            && self.reads < space.reads_choices.len()
            && match space.protocol {
                Protocol::Forward => self.s_pause.is_none(),
                Protocol::Reverse => self.s_pause.is_some_and(|s| s < space.s_pauses.len()),
            }
    }

    pub fn num_points(&self) -> u64 {
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count() as u64;
        count(&self.active_j) * count(&self.active_t)
    }

    pub fn total_samples(&self, space: &SearchSpace) -> u64 {
        self.num_points() * space.reads_choices[self.reads]
    }

    /// Human-readable trait listing.
    pub fn describe(&self, space: &SearchSpace) -> GenomeReport {
        let pick = |mask: &[bool], values: &[f64]| {
            mask.iter().zip(values).filter(|(&on, _)| on).map(|(_, &v)| v).collect()
        };
        GenomeReport {
            protocol: space.protocol,
            j_scales: pick(&self.active_j, &space.j_scales),
            anneal_times_ns: pick(&self.active_t, &space.anneal_times_ns),
            s_pause: self.s_pause.map(|s| space.s_pauses[s]),
            reads_per_param: space.reads_choices[self.reads],
            total_samples: self.total_samples(space),
        }
    }

    fn crossover(&self, other: &Genome, rng: &mut TaskRng) -> Genome {
        let mix = |a: &[bool], b: &[bool], rng: &mut TaskRng| {
            a.iter().zip(b).map(|(&x, &y)| if rng.random() { x } else { y }).collect()
        };
        Genome {
            active_j: mix(&self.active_j, &other.active_j, rng),
            active_t: mix(&self.active_t, &other.active_t, rng),
            s_pause: if rng.random() { self.s_pause } else { other.s_pause },
            reads: if rng.random() { self.reads } else { other.reads },
        }
    }

    fn mutate(&mut self, space: &SearchSpace, rate: f64, rng: &mut TaskRng) {
        for bit in self.active_j.iter_mut().chain(self.active_t.iter_mut()) {
            if rng.random::<f64>() < rate {
                *bit = !*bit;
            }
        }
        if let Some(s) = self.s_pause.as_mut() {
            if rng.random::<f64>() < rate {
                *s = rng.random_range(0..space.s_pauses.len());
            }
        }
        if rng.random::<f64>() < rate {
            self.reads = rng.random_range(0..space.reads_choices.len());
        }
    }
}

/// A genome's active traits by value, for output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeReport {
    pub protocol: Protocol,
    pub j_scales: Vec<f64>,
    pub anneal_times_ns: Vec<f64>,
    pub s_pause: Option<f64>,
    pub reads_per_param: u64,
    pub total_samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Share of children produced by crossover; the rest are copies of a
    /// tournament winner before mutation.
    pub crossover_fraction: f64,
    /// Fitness cost per sample.
    pub sample_penalty_lambda: f64,
    pub rng_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 24,
            generations: 30,
            mutation_rate: 0.05,
            crossover_fraction: 0.7,
            sample_penalty_lambda: 1e-11,
            rng_seed: 0,
        }
    }
}

impl GaConfig {
    fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::domain("population must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.mutation_rate) {
            return Err(Error::domain(format!("mutation rate {} not in [0, 1)", self.mutation_rate)));
        }
        if !(0.0..=1.0).contains(&self.crossover_fraction) {
            return Err(Error::domain(format!("crossover fraction {} not in [0, 1]", self.crossover_fraction)));
        }
        if !(self.sample_penalty_lambda >= 0.0) {
            return Err(Error::domain("sample penalty must be nonnegative"));
        }
        Ok(())
    }
}

/// error + λ · samples; lower is better.
pub fn penalized_fitness(log_rel_error: f64, total_samples: u64, lambda: f64) -> f64 {
    log_rel_error + lambda * total_samples as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub fitness: f64,
    pub log_rel_error: f64,
    pub ln_z_est: f64,
    pub total_samples: u64,
}

/// Scores genomes against a reference ln Z, sharing samples between them.
pub struct Evaluator<'m> {
    model: &'m IsingModel,
    space: SearchSpace,
    temp_model: EffectiveTemperatureModel,
    reference: Reference,
    lambda: f64,
    seed: u64,
    /// Per point: histograms of the first `reads_choices[k]` samples.
    points: Vec<OnceLock<Vec<EnergyHistogram>>>,
    memo: Mutex<HashMap<Genome, FitnessReport>>,
}

impl<'m> Evaluator<'m> {
    pub fn new(
        model: &'m IsingModel,
        space: SearchSpace,
        temp_model: EffectiveTemperatureModel,
        reference: Reference,
        lambda: f64,
        seed: u64,
    ) -> Result<Self> {
        space.validate()?;
        temp_model.validate()?;
        let points = (0..space.num_points()).map(|_| OnceLock::new()).collect();
        Ok(Evaluator { model, space, temp_model, reference, lambda, seed, points, memo: Mutex::new(HashMap::new()) })
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    fn prefix_histograms(&self, t: usize, s: usize, j: usize) -> &[EnergyHistogram] {
        let index = self.space.point_index(t, s, j);
        self.points[index].get_or_init(|| {
            let space = &self.space;
            let seed = point_seed(self.seed, index as u64);
            let anneal_time = space.anneal_times_ns[t];
            let beta = self
                .temp_model
                .effective_beta(anneal_time, space.j_scales[j])
                .expect("space was validated");
            let max_reads = *space.reads_choices.iter().max().expect("nonempty");
            let mut levels = Vec::with_capacity(max_reads as usize);
            match space.protocol {
                Protocol::Forward => {
                    let mut reads = ForwardReads::new(self.model, beta, space.proposals_per_spin, seed, 0);
                    for _ in 0..max_reads {
                        levels.push(reads.next_read().level());
                    }
                }
                Protocol::Reverse => {
                    let params = ReverseAnnealParams {
                        s_pause: space.s_pauses[s],
                        j_scale: space.j_scales[j],
                        anneal_time_ns: anneal_time,
                        chain_length: max_reads,
                        relax_sweeps: space.relax_sweeps,
                    };
                    let init = random_configuration(self.model.num_spins(), seed);
                    let mut rng = rng_for(seed, 0);
                    qemc_walk(self.model, &params, beta, init.into_inner(), &mut rng, |st| levels.push(st.level()));
                }
            }
            space
                .reads_choices
                .iter()
                .map(|&r| EnergyHistogram::from_counts(levels[..r as usize].iter().map(|&e| (e, 1))))
                .collect()
        })
    }

    /// Pure in the genome: repeated calls return identical reports.
    pub fn evaluate(&self, genome: &Genome) -> Result<FitnessReport> {
        if !genome.is_valid(&self.space) {
            return Err(Error::domain("genome does not match the search space"));
        }
        if let Some(r) = self.memo.lock().expect("memo lock").get(genome) {
            return Ok(*r);
        }
        let s = genome.s_pause.unwrap_or(0);
        let mut merged = EnergyHistogram::new();
        for (t, _) in genome.active_t.iter().enumerate().filter(|(_, &on)| on) {
            for (j, _) in genome.active_j.iter().enumerate().filter(|(_, &on)| on) {
                merged.merge(&self.prefix_histograms(t, s, j)[genome.reads]);
            }
        }
        let ln_z_est = histogram_ln_z(&merged, self.model.num_spins(), self.reference.beta)?;
        let log_rel_error = log_relative_error(ln_z_est, self.reference.ln_z)?;
        let total_samples = genome.total_samples(&self.space);
        let report = FitnessReport {
            fitness: penalized_fitness(log_rel_error, total_samples, self.lambda),
            log_rel_error,
            ln_z_est,
            total_samples,
        };
        self.memo.lock().expect("memo lock").insert(genome.clone(), report);
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_so_far: f64,
    pub best_log_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub best: Genome,
    pub best_report: FitnessReport,
    pub trace: Vec<GenerationStats>,
}

fn tournament<'a>(pop: &'a [Genome], scores: &[f64], rng: &mut TaskRng) -> &'a Genome {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    if scores[b] < scores[a] {
        &pop[b]
    } else {
        &pop[a]
    }
}

/// Runs the search from a random initial population.
pub fn evolve(config: &GaConfig, evaluator: &Evaluator<'_>) -> Result<GaResult> {
    config.validate()?;
    let mut rng = rng_for(config.rng_seed, stream_id(GA_STREAM_GROUP, 0));
    let initial = (0..config.population).map(|_| Genome::random(evaluator.space(), &mut rng)).collect();
    evolve_from(config, evaluator, initial, rng)
}

/// Runs the search from a given initial population.
pub fn evolve_with_population(config: &GaConfig, evaluator: &Evaluator<'_>, initial: Vec<Genome>) -> Result<GaResult> {
    config.validate()?;
    let rng = rng_for(config.rng_seed, stream_id(GA_STREAM_GROUP, 0));
    evolve_from(config, evaluator, initial, rng)
}

fn evolve_from(config: &GaConfig, evaluator: &Evaluator<'_>, mut pop: Vec<Genome>, mut rng: TaskRng) -> Result<GaResult> {
    let space = evaluator.space().clone();
    if pop.len() < 2 || pop.iter().any(|g| !g.is_valid(&space)) {
        return Err(Error::domain("initial population must hold at least two valid genomes"));
    }
    let mut trace = Vec::with_capacity(config.generations);
    let mut best: Option<(Genome, FitnessReport)> = None;

    for generation in 0..config.generations.max(1) {
        let reports: Vec<FitnessReport> = pop.par_iter().map(|g| evaluator.evaluate(g)).collect::<Result<_>>()?;
        let scores: Vec<f64> = reports.iter().map(|r| r.fitness).collect();
        let elite = (0..pop.len())
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .expect("population is nonempty");
        if best.as_ref().is_none_or(|(_, r)| reports[elite].fitness < r.fitness) {
            best = Some((pop[elite].clone(), reports[elite]));
        }
        let (_, best_report) = best.as_ref().expect("set above");
        trace.push(GenerationStats {
            generation,
            best_fitness: scores[elite],
            mean_fitness: scores.iter().sum::<f64>() / scores.len() as f64,
            best_so_far: best_report.fitness,
            best_log_rel_error: best_report.log_rel_error,
        });
        if generation + 1 == config.generations {
            break;
        }

        let mut next = Vec::with_capacity(pop.len());
        next.push(pop[elite].clone());
        while next.len() < pop.len() {
            let mut child = if rng.random::<f64>() < config.crossover_fraction {
                let a = tournament(&pop, &scores, &mut rng);
                let b = tournament(&pop, &scores, &mut rng);
                a.crossover(b, &mut rng)
            } else {
                tournament(&pop, &scores, &mut rng).clone()
            };
            child.mutate(&space, config.mutation_rate, &mut rng);
            child.repair(&mut rng);
            next.push(child);
        }
        pop = next;
    }

    let (best, best_report) = best.expect("at least one generation ran");
    Ok(GaResult { best, best_report, trace })
}

/// Best single (anneal time, J scale) point at the largest read count.
pub fn best_single_point(evaluator: &Evaluator<'_>) -> Result<(Genome, FitnessReport)> {
    let space = evaluator.space();
    let reads = (0..space.reads_choices.len()).max_by_key(|&k| space.reads_choices[k]).expect("nonempty");
    let pauses: Vec<Option<usize>> = match space.protocol {
        Protocol::Forward => vec![None],
        Protocol::Reverse => (0..space.s_pauses.len()).map(Some).collect(),
    };
    let mut best: Option<(Genome, FitnessReport)> = None;
    for t in 0..space.anneal_times_ns.len() {
        for &s in &pauses {
            for j in 0..space.j_scales.len() {
                let g = Genome::single_point(space, t, j, s, reads);
                let r = evaluator.evaluate(&g)?;
                if best.as_ref().is_none_or(|(_, b)| r.log_rel_error < b.log_rel_error) {
                    best = Some((g, r));
                }
            }
        }
    }
    Ok(best.expect("space is nonempty"))
}

/// Random valid genomes, drawn independently of any search's own stream.
pub fn random_population(space: &SearchSpace, size: usize, seed: u64) -> Vec<Genome> {
    let mut rng = rng_for(seed, stream_id(GA_STREAM_GROUP, 1));
    (0..size).map(|_| Genome::random(space, &mut rng)).collect()
}
