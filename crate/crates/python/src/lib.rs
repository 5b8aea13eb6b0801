//! Python bindings: models, exact enumeration, the classical estimators,
//! the surrogate annealer, sweeps, the GA search and embedding packing.
//!
//! Energy spectra and histograms cross the boundary as lists of
//! `(energy, value)` tuples sorted by energy.

use std::collections::HashSet;

use pyo3::exceptions::{PyIOError, PyOverflowError, PyValueError};
use pyo3::prelude::*;

use isingpf::dos::histogram_ln_z;
use isingpf::embed::{self, SearchOptions, UndirectedGraph};
use isingpf::ga::{self, Evaluator, GaConfig, SearchSpace};
use isingpf::mhr::{mhr_estimate, MhrOptions};
use isingpf::sampler::{metropolis_chain, uniform_histogram};
use isingpf::surrogate::{self, EffectiveTemperatureModel, ForwardAnnealParams, ReverseAnnealParams};
use isingpf::sweep::{self as sw, Protocol, Reference, SweepGrid};
use isingpf::wang_landau::{wl_run, WlParams};
use isingpf::{enumerate_exact, estimate_partition, exact_partition, EnergyHistogram, InverseTemperature, SpinConfiguration};

fn py_err(e: isingpf::Error) -> PyErr {
    match e {
        isingpf::Error::Io(io) => PyIOError::new_err(io.to_string()),
        isingpf::Error::TooLarge { .. } => PyOverflowError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for isingpf::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn beta(temperature: f64) -> PyResult<InverseTemperature> {
    InverseTemperature::from_temperature(temperature).py()
}

fn hist_pairs(h: &EnergyHistogram) -> Vec<(f64, u64)> {
    h.counts().iter().map(|(e, &c)| (e.value(), c)).collect()
}

fn hist_from_pairs(pairs: Vec<(f64, u64)>) -> EnergyHistogram {
    EnergyHistogram::from_counts(pairs.into_iter().map(|(e, c)| (isingpf::EnergyLevel::from_f64(e), c)))
}

fn spin_lists(configs: Vec<SpinConfiguration>) -> Vec<Vec<i8>> {
    configs.into_iter().map(SpinConfiguration::into_inner).collect()
}

#[pyclass(name = "IsingModel", frozen)]
struct PyIsingModel {
    inner: isingpf::IsingModel,
}

#[pymethods]
impl PyIsingModel {
    /// `couplings` holds `(i, j, J)` triples; `fields` may be empty.
    #[new]
    #[pyo3(signature = (num_spins, couplings, fields = Vec::new()))]
    fn new(num_spins: usize, couplings: Vec<(usize, usize, f64)>, fields: Vec<(usize, f64)>) -> PyResult<Self> {
        let inner = isingpf::IsingModel::new(num_spins, fields, couplings).py()?;
        Ok(PyIsingModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyIsingModel { inner: isingpf::IsingModel::from_json_str(text).py()? })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(PyIsingModel { inner: isingpf::IsingModel::from_json_file(path).py()? })
    }

    /// The bundled 25-spin ±J benchmark.
    #[staticmethod]
    fn shipped() -> Self {
        PyIsingModel { inner: isingpf::instance::shipped_instance() }
    }

    #[getter]
    fn num_spins(&self) -> usize {
        self.inner.num_spins()
    }

    fn energy(&self, spins: Vec<i8>) -> PyResult<f64> {
        let config = SpinConfiguration::new(spins).py()?;
        self.inner.energy(&config).py()
    }

    fn to_json(&self) -> String {
        self.inner.to_json_string()
    }

    fn __repr__(&self) -> String {
        format!("IsingModel(num_spins={}, couplings={})", self.inner.num_spins(), self.inner.couplings().len())
    }
}

/// Exact `(energy, count)` spectrum from all 2^N configurations.
#[pyfunction]
fn enumerate(py: Python<'_>, model: &PyIsingModel) -> PyResult<Vec<(f64, u64)>> {
    let spectrum = py.detach(|| enumerate_exact(&model.inner)).py()?;
    Ok(spectrum.counts().iter().map(|(e, &c)| (e.value(), c)).collect())
}

#[pyfunction]
#[pyo3(signature = (model, temperature = 4.0))]
fn exact_ln_z(py: Python<'_>, model: &PyIsingModel, temperature: f64) -> PyResult<f64> {
    let b = beta(temperature)?;
    let spectrum = py.detach(|| enumerate_exact(&model.inner)).py()?;
    exact_partition(&spectrum, b).py()
}

/// ln Z* from a histogram taken as proportional to g(E), scaled to 2^N states.
#[pyfunction]
#[pyo3(signature = (histogram, num_spins, temperature = 4.0))]
fn ln_z_from_histogram(histogram: Vec<(f64, u64)>, num_spins: usize, temperature: f64) -> PyResult<f64> {
    histogram_ln_z(&hist_from_pairs(histogram), num_spins, beta(temperature)?).py()
}

#[pyfunction]
#[pyo3(signature = (model, samples, seed = 0))]
fn uniform_samples(py: Python<'_>, model: &PyIsingModel, samples: u64, seed: u64) -> Vec<(f64, u64)> {
    hist_pairs(&py.detach(|| uniform_histogram(&model.inner, samples, seed)))
}

#[pyfunction]
#[pyo3(signature = (model, temperature, n_steps, burn_in = 0, seed = 0))]
fn metropolis(
    py: Python<'_>,
    model: &PyIsingModel,
    temperature: f64,
    n_steps: u64,
    burn_in: u64,
    seed: u64,
) -> PyResult<Vec<(f64, u64)>> {
    let b = beta(temperature)?;
    let run = py.detach(|| metropolis_chain(&model.inner, b, n_steps, burn_in, seed)).py()?;
    Ok(hist_pairs(&run.histogram))
}

#[pyclass(get_all, frozen)]
struct WangLandauResult {
    ln_z: f64,
    converged: bool,
    steps: u64,
    stages: u32,
    /// `(energy, g)` with Σ g = 2^N.
    dos: Vec<(f64, f64)>,
}

#[pyfunction]
#[pyo3(signature = (model, temperature = 4.0, seed = 0, flatness = 0.9, ln_f0 = 1.0, epsilon = 1e-8, step_budget = 100_000_000, check_interval = 3_500_000))]
#[allow(clippy::too_many_arguments)]
fn wang_landau(
    py: Python<'_>,
    model: &PyIsingModel,
    temperature: f64,
    seed: u64,
    flatness: f64,
    ln_f0: f64,
    epsilon: f64,
    step_budget: u64,
    check_interval: u64,
) -> PyResult<WangLandauResult> {
    let b = beta(temperature)?;
    let params = WlParams { flatness, ln_f0, epsilon, step_budget, check_interval };
    let result = py.detach(|| wl_run(&model.inner, &params, seed)).py()?;
    Ok(WangLandauResult {
        ln_z: estimate_partition(&result.dos, b).py()?,
        converged: result.converged,
        steps: result.steps,
        stages: result.stages,
        dos: result.dos.g().iter().map(|(e, &g)| (e.value(), g)).collect(),
    })
}

#[pyclass(get_all, frozen)]
struct MhrResult {
    ln_z: f64,
    converged: bool,
    iterations: usize,
    overlap_warning: bool,
    free_energies: Vec<f64>,
}

/// Metropolis runs at `run_temperatures` combined by multiple histogram
/// reweighting at `temperature`. Each run draws its own seed from `seed`.
#[pyfunction]
#[pyo3(signature = (model, run_temperatures, samples_per_run, temperature = 4.0, burn_in = 10_000, seed = 0))]
fn mhr(
    py: Python<'_>,
    model: &PyIsingModel,
    run_temperatures: Vec<f64>,
    samples_per_run: u64,
    temperature: f64,
    burn_in: u64,
    seed: u64,
) -> PyResult<MhrResult> {
    let target = beta(temperature)?;
    let betas = run_temperatures.iter().map(|&t| beta(t)).collect::<PyResult<Vec<_>>>()?;
    let result = py
        .detach(|| {
            let runs = betas
                .iter()
                .enumerate()
                .map(|(k, &b)| {
                    let run_seed = sw::point_seed(seed, k as u64);
                    metropolis_chain(&model.inner, b, burn_in + samples_per_run, burn_in, run_seed)
                })
                .collect::<isingpf::Result<Vec<_>>>()?;
            mhr_estimate(&runs, model.inner.num_spins(), target, &MhrOptions::default())
        })
        .py()?;
    Ok(MhrResult {
        ln_z: result.ln_z,
        converged: result.converged,
        iterations: result.iterations,
        overlap_warning: result.overlap_warning,
        free_energies: result.free_energies.f,
    })
}

/// Surrogate inverse temperature for an anneal time (ns) and J scale.
#[pyfunction]
#[pyo3(signature = (anneal_time, j_scale, kappa = 0.35, t0 = 4.0, beta_max = 5.0))]
fn effective_beta(anneal_time: f64, j_scale: f64, kappa: f64, t0: f64, beta_max: f64) -> PyResult<f64> {
    EffectiveTemperatureModel::new(kappa, t0, beta_max).py()?.effective_beta(anneal_time, j_scale).py()
}

#[pyfunction]
#[pyo3(signature = (model, anneal_time, j_scale, num_reads, seed = 0))]
fn sample_forward(
    py: Python<'_>,
    model: &PyIsingModel,
    anneal_time: f64,
    j_scale: f64,
    num_reads: u64,
    seed: u64,
) -> PyResult<Vec<Vec<i8>>> {
    let params = ForwardAnnealParams::new(anneal_time, j_scale, num_reads).py()?;
    let reads = py
        .detach(|| surrogate::sample_forward(&model.inner, &params, &EffectiveTemperatureModel::default(), seed))
        .py()?;
    Ok(spin_lists(reads))
}

/// One QEMC chain from `init`, or from a seeded random start.
#[pyfunction]
#[pyo3(signature = (model, s_pause, j_scale, chain_length, seed = 0, init = None, relax_sweeps = ReverseAnnealParams::DEFAULT_RELAX_SWEEPS))]
#[allow(clippy::too_many_arguments)]
fn qemc_chain(
    py: Python<'_>,
    model: &PyIsingModel,
    s_pause: f64,
    j_scale: f64,
    chain_length: u64,
    seed: u64,
    init: Option<Vec<i8>>,
    relax_sweeps: u64,
) -> PyResult<Vec<Vec<i8>>> {
    let mut params = ReverseAnnealParams::new(s_pause, j_scale, chain_length).py()?;
    params.relax_sweeps = relax_sweeps;
    let init = match init {
        Some(spins) => SpinConfiguration::new(spins).py()?,
        None => surrogate::random_configuration(model.inner.num_spins(), seed),
    };
    let chain = py
        .detach(|| surrogate::qemc_chain(&model.inner, &params, &EffectiveTemperatureModel::default(), &init, seed))
        .py()?;
    Ok(spin_lists(chain))
}

#[pyclass(get_all, frozen)]
struct SweepRow {
    protocol: String,
    anneal_time_ns: f64,
    j_scale: f64,
    s_pause: Option<f64>,
    reads: u64,
    unique_fraction: f64,
    ln_z_est: f64,
    log_rel_error: f64,
}

#[pymethods]
impl SweepRow {
    fn __repr__(&self) -> String {
        format!(
            "SweepRow(t={}, j={}, s={:?}, reads={}, log_rel_error={:e})",
            self.anneal_time_ns, self.j_scale, self.s_pause, self.reads, self.log_rel_error
        )
    }
}

fn reference(model: &isingpf::IsingModel, temperature: f64) -> PyResult<Reference> {
    let b = beta(temperature)?;
    let spectrum = enumerate_exact(model).py()?;
    Ok(Reference { beta: b, ln_z: exact_partition(&spectrum, b).py()? })
}

fn protocol(name: &str) -> PyResult<Protocol> {
    name.parse().py()
}

/// Surrogate sweep scored against the exact ln Z. `reads` is reads per
/// point (forward) or chain length (reverse).
#[pyfunction]
#[pyo3(signature = (model, protocol_name, anneal_times, j_scales, reads, s_pauses = Vec::new(), cumulative = false, seed = 0, temperature = 4.0))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    model: &PyIsingModel,
    protocol_name: &str,
    anneal_times: Vec<f64>,
    j_scales: Vec<f64>,
    reads: u64,
    s_pauses: Vec<f64>,
    cumulative: bool,
    seed: u64,
    temperature: f64,
) -> PyResult<Vec<SweepRow>> {
    let grid = match protocol(protocol_name)? {
        Protocol::Forward => SweepGrid::forward(anneal_times, j_scales, reads),
        Protocol::Reverse => SweepGrid::reverse(anneal_times, j_scales, s_pauses, reads),
    };
    let rows = py
        .detach(|| {
            let r = reference(&model.inner, temperature)?;
            sw::run_sweep(&model.inner, &grid, cumulative, &EffectiveTemperatureModel::default(), seed, r)
                .map_err(py_err)
        })?;
    Ok(rows
        .into_iter()
        .map(|r| SweepRow {
            protocol: r.point.protocol.to_string(),
            anneal_time_ns: r.point.anneal_time_ns,
            j_scale: r.point.j_scale,
            s_pause: r.point.s_pause,
            reads: r.reads,
            unique_fraction: r.unique_fraction,
            ln_z_est: r.ln_z_est,
            log_rel_error: r.log_rel_error,
        })
        .collect())
}

#[pyclass(get_all, frozen)]
struct GaResult {
    j_scales: Vec<f64>,
    anneal_times_ns: Vec<f64>,
    s_pause: Option<f64>,
    reads_per_param: u64,
    total_samples: u64,
    fitness: f64,
    log_rel_error: f64,
    /// Best-so-far fitness after each generation.
    trace: Vec<f64>,
}

/// Genetic search over surrogate parameter sets (forward protocol).
#[pyfunction]
#[pyo3(signature = (model, anneal_times, j_scales, reads_choices, generations = 30, population = 24, sample_penalty = 1e-11, seed = 0, temperature = 4.0))]
#[allow(clippy::too_many_arguments)]
fn ga_search(
    py: Python<'_>,
    model: &PyIsingModel,
    anneal_times: Vec<f64>,
    j_scales: Vec<f64>,
    reads_choices: Vec<u64>,
    generations: usize,
    population: usize,
    sample_penalty: f64,
    seed: u64,
    temperature: f64,
) -> PyResult<GaResult> {
    let space = SearchSpace::forward(anneal_times, j_scales, reads_choices);
    let config = GaConfig { generations, population, sample_penalty_lambda: sample_penalty, rng_seed: seed, ..GaConfig::default() };
    py.detach(|| {
        let r = reference(&model.inner, temperature)?;
        let evaluator =
            Evaluator::new(&model.inner, space, EffectiveTemperatureModel::default(), r, sample_penalty, seed).py()?;
        let result = ga::evolve(&config, &evaluator).py()?;
        let report = result.best.describe(evaluator.space());
        Ok(GaResult {
            j_scales: report.j_scales,
            anneal_times_ns: report.anneal_times_ns,
            s_pause: report.s_pause,
            reads_per_param: report.reads_per_param,
            total_samples: report.total_samples,
            fitness: result.best_report.fitness,
            log_rel_error: result.best_report.log_rel_error,
            trace: result.trace.iter().map(|g| g.best_so_far).collect(),
        })
    })
}

#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    inner: UndirectedGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(num_vertices: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Ok(PyGraph { inner: UndirectedGraph::new(num_vertices, edges).py()? })
    }

    /// Parses the "V E" header plus edge-list text format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyGraph { inner: UndirectedGraph::read_text(text.as_bytes()).py()? })
    }

    #[staticmethod]
    fn from_model(model: &PyIsingModel) -> Self {
        PyGraph { inner: UndirectedGraph::from_model(&model.inner) }
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

/// One embedding as a list mapping pattern vertex to host vertex, or None
/// when none exists. Raises if the budget runs out first.
#[pyfunction]
#[pyo3(signature = (pattern, host, forbidden = Vec::new(), seed = None, budget = None))]
fn find_embedding(
    pattern: &PyGraph,
    host: &PyGraph,
    forbidden: Vec<usize>,
    seed: Option<u64>,
    budget: Option<u64>,
) -> PyResult<Option<Vec<usize>>> {
    let forbidden: HashSet<usize> = forbidden.into_iter().collect();
    let opts = SearchOptions { seed, node_budget: budget };
    match embed::find_one(&pattern.inner, &host.inner, &forbidden, opts).py()? {
        embed::SearchOutcome::Found(e) => Ok(Some(e.map)),
        embed::SearchOutcome::NotFound => Ok(None),
        embed::SearchOutcome::Unknown => Err(PyValueError::new_err("search budget exhausted before a decision")),
    }
}

/// Greedy vertex-disjoint embeddings, each checked by the verifier.
#[pyfunction]
#[pyo3(signature = (pattern, host, seed = None, budget = None))]
fn pack_disjoint(
    py: Python<'_>,
    pattern: &PyGraph,
    host: &PyGraph,
    seed: Option<u64>,
    budget: Option<u64>,
) -> PyResult<Vec<Vec<usize>>> {
    let opts = SearchOptions { seed, node_budget: budget };
    let packing = py.detach(|| embed::pack_disjoint(&pattern.inner, &host.inner, opts)).py()?;
    embed::verify_packing(&pattern.inner, &host.inner, &packing).map_err(PyValueError::new_err)?;
    Ok(packing.embeddings.into_iter().map(|e| e.map).collect())
}

#[pymodule]
#[pyo3(name = "isingpf")]
fn isingpf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyIsingModel>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<WangLandauResult>()?;
    m.add_class::<MhrResult>()?;
    m.add_class::<SweepRow>()?;
    m.add_class::<GaResult>()?;
    m.add_function(wrap_pyfunction!(enumerate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_ln_z, m)?)?;
    m.add_function(wrap_pyfunction!(ln_z_from_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_samples, m)?)?;
    m.add_function(wrap_pyfunction!(metropolis, m)?)?;
    m.add_function(wrap_pyfunction!(wang_landau, m)?)?;
    m.add_function(wrap_pyfunction!(mhr, m)?)?;
    m.add_function(wrap_pyfunction!(effective_beta, m)?)?;
    m.add_function(wrap_pyfunction!(sample_forward, m)?)?;
    m.add_function(wrap_pyfunction!(qemc_chain, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(ga_search, m)?)?;
    m.add_function(wrap_pyfunction!(find_embedding, m)?)?;
    m.add_function(wrap_pyfunction!(pack_disjoint, m)?)?;
    Ok(())
}
