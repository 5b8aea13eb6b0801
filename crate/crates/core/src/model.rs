//! Ising models, spin configurations and exact energy levels.
//!
//! Energies are kept twice: as the plain floating point sum of the model
//! coefficients, and as an exact integer [`EnergyLevel`] counted in units of
//! [`ENERGY_QUANTUM`]. Every coefficient is rounded to that quantum once, so
//! level arithmetic (incremental updates, histogram keys) is exact integer
//! arithmetic. For integer-valued models the two views coincide.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution of energy levels.
pub const ENERGY_QUANTUM: f64 = 1e-9;
const LEVELS_PER_UNIT: i64 = 1_000_000_000;
const MAX_COEFFICIENT: f64 = 1e6;

/// An exact energy level, stored as an integer multiple of [`ENERGY_QUANTUM`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct EnergyLevel(i64);

impl EnergyLevel {
    pub const fn from_quanta(quanta: i64) -> Self {
        EnergyLevel(quanta)
    }

    pub const fn from_int(energy: i64) -> Self {
        EnergyLevel(energy * LEVELS_PER_UNIT)
    }

    /// Rounds `energy` to the nearest level.
    pub fn from_f64(energy: f64) -> Self {
        EnergyLevel((energy / ENERGY_QUANTUM).round() as i64)
    }

    pub const fn quanta(self) -> i64 {
        self.0
    }

    /// Divides rather than multiplying by the quantum, so whole-number
    /// levels convert exactly.
    pub fn value(self) -> f64 {
        self.0 as f64 / LEVELS_PER_UNIT as f64
    }
}

impl fmt::Display for EnergyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / LEVELS_PER_UNIT;
        let frac = (self.0 % LEVELS_PER_UNIT).abs();
        if frac == 0 {
            return write!(f, "{whole}");
        }
        let sign = if self.0 < 0 && whole == 0 { "-" } else { "" };
        let digits = format!("{frac:09}");
        write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl std::str::FromStr for EnergyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(v) = s.parse::<i64>() {
            return Ok(EnergyLevel::from_int(v));
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::Parse(format!("invalid energy value `{s}`")))?;
        if !v.is_finite() {
            return Err(Error::Parse(format!("non-finite energy value `{s}`")));
        }
        Ok(EnergyLevel::from_f64(v))
    }
}

/// Inverse temperature in natural units (k_B = 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InverseTemperature(f64);

impl InverseTemperature {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::domain(format!(
                "inverse temperature must be positive and finite, got {beta}"
            )));
        }
        Ok(InverseTemperature(beta))
    }

    pub fn from_temperature(temperature: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::domain(format!(
                "temperature must be positive and finite, got {temperature}"
            )));
        }
        Self::new(1.0 / temperature)
    }

    /// β = 0. Only meaningful for quantities with a well-defined infinite
    /// temperature limit (the exact partition function, samplers).
    pub const fn infinite_temperature() -> Self {
        InverseTemperature(0.0)
    }

    pub const fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// Evenly spaced lattice containing every reachable energy level of a model.
///
/// Each term of the energy is ±q for a quantized coefficient q, so all
/// levels are congruent to Σq modulo 2g where g is the gcd of the
/// coefficients, and lie within ±Σ|q|.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelLattice {
    pub min: i64,
    pub stride: i64,
    pub slots: usize,
}

impl LevelLattice {
    pub fn slot(&self, level: EnergyLevel) -> usize {
        ((level.0 - self.min) / self.stride) as usize
    }

    pub fn level(&self, slot: usize) -> EnergyLevel {
        EnergyLevel(self.min + slot as i64 * self.stride)
    }
}

/// Sparse Ising Hamiltonian E(s) = Σ h_i s_i + Σ J_ij s_i s_j over N spins.
#[derive(Debug, Clone)]
pub struct IsingModel {
    num_spins: usize,
    fields: Vec<f64>,
    couplings: Vec<Coupling>,
    // Coefficients below are in units of `unit` (the gcd of the quantized
    // coefficients), so every single-flip level change is an even integer.
    unit: i64,
    field_units: Vec<i64>,
    adj_offsets: Vec<usize>,
    adj: Vec<(usize, i64)>,
    lattice: LevelLattice,
    metadata: Option<serde_json::Value>,
}

impl IsingModel {
    /// Builds a model from sparse fields and couplings. Pairs are unordered;
    /// `(i, j)` and `(j, i)` name the same coupling and may appear only once.
    pub fn new(
        num_spins: usize,
        fields: impl IntoIterator<Item = (usize, f64)>,
        couplings: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if num_spins == 0 {
            return Err(Error::InvalidModel("num_spins must be positive".into()));
        }
        let check_value = |what: &str, v: f64| -> Result<()> {
            if !v.is_finite() || v.abs() > MAX_COEFFICIENT {
                return Err(Error::InvalidModel(format!(
                    "{what} coefficient {v} must be finite with magnitude at most {MAX_COEFFICIENT}"
                )));
            }
            Ok(())
        };

        let mut dense_fields = vec![0.0; num_spins];
        let mut seen_fields = HashSet::new();
        for (i, h) in fields {
            if i >= num_spins {
                return Err(Error::InvalidModel(format!(
                    "field index {i} out of range for {num_spins} spins"
                )));
            }
            if !seen_fields.insert(i) {
                return Err(Error::InvalidModel(format!("field {i} given twice")));
            }
            check_value("field", h)?;
            dense_fields[i] = h;
        }

        let mut pairs = HashSet::new();
        let mut list = Vec::new();
        for (a, b, value) in couplings {
            if a >= num_spins || b >= num_spins {
                return Err(Error::InvalidModel(format!(
                    "coupling ({a}, {b}) out of range for {num_spins} spins"
                )));
            }
            if a == b {
                return Err(Error::InvalidModel(format!("self-coupling on spin {a}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !pairs.insert((i, j)) {
                return Err(Error::InvalidModel(format!("coupling ({i}, {j}) given twice")));
            }
            check_value("coupling", value)?;
            list.push(Coupling { i, j, value });
        }
        list.sort_by_key(|c| (c.i, c.j));

        let quantize = |v: f64| (v / ENERGY_QUANTUM).round() as i64;
        let field_quanta: Vec<i64> = dense_fields.iter().map(|&h| quantize(h)).collect();
        let all_quanta = field_quanta
            .iter()
            .copied()
            .chain(list.iter().map(|c| quantize(c.value)));
        let lattice = lattice_for(all_quanta);
        let unit = lattice.stride / 2;
        let reduce = |v: f64| quantize(v) / unit;

        let mut degree = vec![0usize; num_spins];
        for c in &list {
            degree[c.i] += 1;
            degree[c.j] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(num_spins + 1);
        adj_offsets.push(0);
        for d in &degree {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0usize, 0i64); adj_offsets[num_spins]];
        for c in &list {
            let q = reduce(c.value);
            adj[fill[c.i]] = (c.j, q);
            fill[c.i] += 1;
            adj[fill[c.j]] = (c.i, q);
            fill[c.j] += 1;
        }

        Ok(IsingModel {
            num_spins,
            fields: dense_fields,
            couplings: list,
            unit,
            field_units: field_quanta.iter().map(|q| q / unit).collect(),
            adj_offsets,
            adj,
            lattice,
            metadata: None,
        })
    }

    pub fn num_spins(&self) -> usize {
        self.num_spins
    }

    /// Dense local fields, one per spin.
    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    /// Couplings with `i < j`, sorted by pair.
    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn metadata(&self) -> Option<&serde_json::Value> {
        self.metadata.as_ref()
    }

    pub fn with_metadata(mut self, metadata: serde_json::Value) -> Self {
        self.metadata = Some(metadata);
        self
    }

    pub fn has_zero_fields(&self) -> bool {
        self.fields.iter().all(|&h| h == 0.0)
    }

    /// True for the ±J class: every coupling is ±1 and every field is zero.
    pub fn is_plus_minus_j(&self) -> bool {
        self.has_zero_fields() && self.couplings.iter().all(|c| c.value.abs() == 1.0)
    }

    pub fn lattice(&self) -> LevelLattice {
        self.lattice
    }

    /// Quanta per internal level unit.
    pub(crate) fn unit(&self) -> i64 {
        self.unit
    }

    pub(crate) fn field_units(&self) -> &[i64] {
        &self.field_units
    }

    pub(crate) fn neighbors(&self, spin: usize) -> &[(usize, i64)] {
        &self.adj[self.adj_offsets[spin]..self.adj_offsets[spin + 1]]
    }

    pub fn degree(&self, spin: usize) -> usize {
        self.adj_offsets[spin + 1] - self.adj_offsets[spin]
    }

    /// E(s) = Σ h_i s_i + Σ J_ij s_i s_j.
    pub fn energy(&self, config: &SpinConfiguration) -> Result<f64> {
        self.check_len(config)?;
        let s = config.spins();
        let field: f64 = self.fields.iter().zip(s).map(|(&h, &si)| h * si as f64).sum();
        let coupling: f64 = self
            .couplings
            .iter()
            .map(|c| c.value * (s[c.i] * s[c.j]) as f64)
            .sum();
        Ok(field + coupling)
    }

    pub fn energy_level(&self, config: &SpinConfiguration) -> Result<EnergyLevel> {
        self.check_len(config)?;
        Ok(self.level_of(config.spins()))
    }

    pub(crate) fn level_of(&self, spins: &[i8]) -> EnergyLevel {
        EnergyLevel(self.units_of(spins) * self.unit)
    }

    /// Energy of `spins` in internal units.
    pub(crate) fn units_of(&self, spins: &[i8]) -> i64 {
        let mut total: i64 = self
            .field_units
            .iter()
            .zip(spins)
            .map(|(&q, &s)| q * s as i64)
            .sum();
        for i in 0..self.num_spins {
            for &(j, q) in self.neighbors(i) {
                if j > i {
                    total += q * (spins[i] * spins[j]) as i64;
                }
            }
        }
        total
    }

    pub(crate) fn check_len(&self, config: &SpinConfiguration) -> Result<()> {
        if config.len() != self.num_spins {
            return Err(Error::Dimension {
                expected: self.num_spins,
                got: config.len(),
            });
        }
        Ok(())
    }

    /// Undirected interaction graph as a sorted edge list.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.couplings.iter().map(|c| (c.i, c.j)).collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse(format!(
                "at `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        file.into_model()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json_str(&text)
    }

    /// Serializes to the model file format, one coupling per line.
    pub fn to_json_string(&self) -> String {
        let file = ModelFile::from_model(self);
        let mut out = format!("{{\n  \"num_spins\": {},\n", file.num_spins);
        out += &format!("  \"h\": {},\n", serde_json::to_string(&file.h).expect("serializes"));
        out += "  \"j\": [";
        for (k, row) in file.j.iter().enumerate() {
            out += if k == 0 { "\n    " } else { ",\n    " };
            out += &serde_json::to_string(row).expect("serializes");
        }
        out += if file.j.is_empty() { "]" } else { "\n  ]" };
        if let Some(meta) = &file.metadata {
            out += &format!(",\n  \"metadata\": {}", serde_json::to_string(meta).expect("serializes"));
        }
        out += "\n}\n";
        out
    }
}

fn lattice_for(quanta: impl Iterator<Item = i64>) -> LevelLattice {
    let mut g: i64 = 0;
    let mut abs_sum: i64 = 0;
    for q in quanta {
        g = gcd(g, q.abs());
        abs_sum += q.abs();
    }
    if g == 0 {
        return LevelLattice { min: 0, stride: 2, slots: 1 };
    }
    LevelLattice {
        min: -abs_sum,
        stride: 2 * g,
        slots: (abs_sum / g) as usize + 1,
    }
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    num_spins: usize,
    #[serde(default)]
    h: BTreeMap<String, f64>,
    #[serde(default)]
    j: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<serde_json::Value>,
}

impl ModelFile {
    fn into_model(self) -> Result<IsingModel> {
        let mut fields = Vec::with_capacity(self.h.len());
        for (key, value) in &self.h {
            let idx: usize = key
                .parse()
                .map_err(|_| Error::Parse(format!("at `h.{key}`: field key is not a spin index")))?;
            fields.push((idx, *value));
        }
        let model = IsingModel::new(self.num_spins, fields, self.j)?;
        Ok(match self.metadata {
            Some(m) => model.with_metadata(m),
            None => model,
        })
    }

    fn from_model(model: &IsingModel) -> Self {
        ModelFile {
            num_spins: model.num_spins,
            h: model
                .fields
                .iter()
                .enumerate()
                .filter(|(_, &h)| h != 0.0)
                .map(|(i, &h)| (i.to_string(), h))
                .collect(),
            j: model.couplings.iter().map(|c| (c.i, c.j, c.value)).collect(),
            metadata: model.metadata.clone(),
        }
    }
}

/// A configuration of N spins, each ±1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfiguration(Vec<i8>);

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::domain(format!("spin value {bad} is not ±1")));
        }
        Ok(SpinConfiguration(spins))
    }

    pub(crate) fn from_spins_unchecked(spins: Vec<i8>) -> Self {
        SpinConfiguration(spins)
    }

    /// Bit k set means spin k is +1, clear means −1.
    pub fn from_bits(num_spins: usize, bits: u64) -> Self {
        SpinConfiguration(
            (0..num_spins)
                .map(|k| if (bits >> k) & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn all_up(num_spins: usize) -> Self {
        SpinConfiguration(vec![1; num_spins])
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Global spin flip.
    pub fn flipped(&self) -> Self {
        SpinConfiguration(self.0.iter().map(|s| -s).collect())
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }
}
