//! Seeded ±J spin-glass instances, including the shipped 25-spin benchmark.

use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::rng::rng_for;

/// Repository path of the shipped benchmark, relative to the core crate.
pub const SHIPPED_INSTANCE_PATH: &str = "data/pm_j_25.json";
pub const SHIPPED_INSTANCE_SPINS: usize = 25;
pub const SHIPPED_INSTANCE_COUPLINGS: usize = 40;
pub const SHIPPED_INSTANCE_SEED: u64 = 20_251_016;

const SHIPPED_JSON: &str = include_str!("../data/pm_j_25.json");

/// The 25-spin ±J benchmark instance bundled with the crate.
pub fn shipped_instance() -> IsingModel {
    IsingModel::from_json_str(SHIPPED_JSON).expect("bundled instance parses")
}

/// Random connected ±J model: a uniformly shuffled random spanning tree
/// (each vertex attaches to a random earlier vertex) plus distinct extra
/// edges drawn uniformly until `num_couplings` edges exist, each with an
/// independent fair ±1 sign. Fields are zero.
pub fn random_pm_j(num_spins: usize, num_couplings: usize, seed: u64) -> Result<IsingModel> {
    let max_edges = num_spins * num_spins.saturating_sub(1) / 2;
    if num_spins < 2 || num_couplings < num_spins - 1 || num_couplings > max_edges {
        return Err(Error::domain(format!(
            "cannot build a connected graph on {num_spins} vertices with {num_couplings} edges"
        )));
    }
    let mut rng = rng_for(seed, 0);
    let mut order: Vec<usize> = (0..num_spins).collect();
    order.shuffle(&mut rng);

    let mut edges = std::collections::BTreeSet::new();
    for k in 1..num_spins {
        let parent = order[rng.random_range(0..k)];
        let child = order[k];
        edges.insert((parent.min(child), parent.max(child)));
    }
    while edges.len() < num_couplings {
        let a = rng.random_range(0..num_spins);
        let b = rng.random_range(0..num_spins);
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let couplings: Vec<(usize, usize, f64)> = edges
        .into_iter()
        .map(|(i, j)| (i, j, if rng.random::<bool>() { 1.0 } else { -1.0 }))
        .collect();
    let model = IsingModel::new(num_spins, [], couplings)?;
    Ok(model.with_metadata(json!({
        "generator": "random_pm_j",
        "seed": seed,
        "num_couplings": num_couplings,
        "class": "plus-minus-J spin glass, zero fields, random connected graph",
    })))
}
