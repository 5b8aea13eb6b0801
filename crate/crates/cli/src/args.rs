use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use isingpf::ga::GaConfig;
use isingpf::surrogate::{EffectiveTemperatureModel, ForwardAnnealParams, ReverseAnnealParams};
use isingpf::sweep::Protocol;
use isingpf::wang_landau::WlParams;

#[derive(Debug, Parser)]
#[command(name = "isingpf", version, about = "Ising partition functions from density-of-states histograms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact spectrum by enumerating all 2^N configurations.
    Enumerate(EnumerateArgs),
    /// Convergence of one estimator against the exact ln Z.
    Estimate(EstimateArgs),
    /// Surrogate annealer sweep over a parameter grid.
    Sweep(SweepArgs),
    /// Genetic search over sets of surrogate parameters.
    GaSearch(GaArgs),
    /// Greedy packing of disjoint native embeddings.
    Embed(EmbedArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Root seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Temperatures at which to report ln Z; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', default_value = "4")]
    pub temp: Vec<f64>,
    /// Spectrum CSV; the summary and manifest are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wl,
    Mhr,
    Random,
    Forward,
    Qemc,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long, default_value_t = 4.0)]
    pub temp: f64,
    /// Convergence CSV (sweep CSV for the forward method).
    #[arg(long)]
    pub out: PathBuf,
    /// Uniform samples (random) or post-burn-in samples per run (mhr).
    #[arg(long)]
    pub samples: Option<u64>,
    #[command(flatten)]
    pub wl: WlArgs,
    #[command(flatten)]
    pub mhr: MhrArgs,
    #[command(flatten)]
    pub forward: ForwardArgs,
    #[command(flatten)]
    pub qemc: QemcArgs,
    #[command(flatten)]
    pub surrogate: SurrogateArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct WlArgs {
    /// Maximum proposed spin updates.
    #[arg(long, default_value_t = WlParams::default().step_budget)]
    pub steps: u64,
    #[arg(long, default_value_t = WlParams::default().flatness)]
    pub flatness: f64,
    #[arg(long, default_value_t = WlParams::default().ln_f0)]
    pub ln_f0: f64,
    #[arg(long, default_value_t = WlParams::default().epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = WlParams::default().check_interval)]
    pub check_interval: u64,
}

impl WlArgs {
    pub fn params(&self) -> WlParams {
        WlParams {
            flatness: self.flatness,
            ln_f0: self.ln_f0,
            epsilon: self.epsilon,
            step_budget: self.steps,
            check_interval: self.check_interval,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct MhrArgs {
    /// Temperatures of the Metropolis runs.
    #[arg(long, value_delimiter = ',', default_value = "3.5,3.75,4,4.25,4.5")]
    pub run_temps: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub burn_in: u64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ForwardArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,8,10,20,50")]
    pub anneal_times: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.005,0.01,0.02,0.05,0.1,0.2,0.5,1")]
    pub j_scales: Vec<f64>,
    /// Reads per grid point.
    #[arg(long, default_value_t = 1000)]
    pub reads: u64,
    /// Pool samples along the J axis of each anneal-time line.
    #[arg(long)]
    pub cumulative: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct QemcArgs {
    #[arg(long, default_value_t = 0.9)]
    pub s_pause: f64,
    #[arg(long, default_value_t = 1.0)]
    pub j_scale: f64,
    #[arg(long, default_value_t = ReverseAnnealParams::DEFAULT_ANNEAL_TIME_NS)]
    pub anneal_time: f64,
    #[arg(long, default_value_t = 100)]
    pub chain_length: u64,
    #[arg(long, default_value_t = 50)]
    pub chains: u64,
    #[arg(long, default_value_t = ReverseAnnealParams::DEFAULT_RELAX_SWEEPS)]
    pub relax_sweeps: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SurrogateArgs {
    #[arg(long, default_value_t = EffectiveTemperatureModel::default().kappa)]
    pub kappa: f64,
    #[arg(long, default_value_t = EffectiveTemperatureModel::default().t0)]
    pub t0: f64,
    #[arg(long, default_value_t = EffectiveTemperatureModel::default().beta_max)]
    pub beta_max: f64,
    /// Metropolis proposals per spin in each forward read.
    #[arg(long, default_value_t = ForwardAnnealParams::DEFAULT_PROPOSALS_PER_SPIN)]
    pub proposals_per_spin: u64,
}

impl SurrogateArgs {
    pub fn model(&self) -> EffectiveTemperatureModel {
        EffectiveTemperatureModel { kappa: self.kappa, t0: self.t0, beta_max: self.beta_max }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, default_value = "forward")]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 4.0)]
    pub temp: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Anneal times in ns; defaults to the full 5 ns to 100 µs grid.
    #[arg(long, value_delimiter = ',')]
    pub anneal_times: Option<Vec<f64>>,
    /// Defaults to 19 values from 1e-4 to 1.
    #[arg(long, value_delimiter = ',')]
    pub j_scales: Option<Vec<f64>>,
    /// Reverse protocol only; defaults to 0.1 to 0.9.
    #[arg(long, value_delimiter = ',')]
    pub s_pauses: Option<Vec<f64>>,
    /// Forward reads per point.
    #[arg(long, default_value_t = 1000)]
    pub reads: u64,
    /// Reverse chain length per point.
    #[arg(long, default_value_t = 100)]
    pub chain_length: u64,
    #[arg(long, default_value_t = ReverseAnnealParams::DEFAULT_RELAX_SWEEPS)]
    pub relax_sweeps: u64,
    #[arg(long)]
    pub cumulative: bool,
    #[command(flatten)]
    pub surrogate: SurrogateArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct GaArgs {
    #[command(flatten)]
    pub common: ModelArgs,
    #[arg(long, default_value = "forward")]
    pub protocol: Protocol,
    #[arg(long, default_value_t = 4.0)]
    pub temp: f64,
    /// Per-generation trace CSV; the best genome goes to a JSON file beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "5,8,10,20,50")]
    pub anneal_times: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.005,0.01,0.02,0.05,0.1,0.2,0.5,1")]
    pub j_scales: Vec<f64>,
    /// Reverse protocol only.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    pub s_pauses: Vec<f64>,
    /// Reads (forward) or chain lengths (reverse) the genome picks from.
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000,5000")]
    pub reads_choices: Vec<u64>,
    #[arg(long, default_value_t = GaConfig::default().population)]
    pub population: usize,
    #[arg(long, default_value_t = GaConfig::default().generations)]
    pub generations: usize,
    #[arg(long, default_value_t = GaConfig::default().mutation_rate)]
    pub mutation_rate: f64,
    #[arg(long, default_value_t = GaConfig::default().crossover_fraction)]
    pub crossover_fraction: f64,
    /// Fitness penalty per sample.
    #[arg(long, default_value_t = GaConfig::default().sample_penalty_lambda)]
    pub lambda: f64,
    #[arg(long, default_value_t = ReverseAnnealParams::DEFAULT_RELAX_SWEEPS)]
    pub relax_sweeps: u64,
    #[command(flatten)]
    pub surrogate: SurrogateArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    /// Pattern graph ("V E" header, then one "u v" edge per line).
    #[arg(long)]
    pub pattern: PathBuf,
    #[arg(long)]
    pub host: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Shuffle candidate order with this seed instead of vertex order.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Placement budget per search.
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}
