//! Regenerates the shipped benchmark instance file.
//!
//! cargo run -p isingpf --example generate_instance > crates/core/data/pm_j_25.json

use isingpf::instance::{
    random_pm_j, SHIPPED_INSTANCE_COUPLINGS, SHIPPED_INSTANCE_SEED, SHIPPED_INSTANCE_SPINS,
};

fn main() {
    let model = random_pm_j(SHIPPED_INSTANCE_SPINS, SHIPPED_INSTANCE_COUPLINGS, SHIPPED_INSTANCE_SEED)
        .expect("valid generator parameters");
    println!("{}", model.to_json_string());
}
