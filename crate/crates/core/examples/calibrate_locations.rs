//! Searches seeds for 1000 uniform locations on [0, 5]² whose signal field
//! under the main coefficients has exactly 216 alternatives, then writes the
//! winning set as `data/locations.csv`.
//!
//!     cargo run -p dart2 --example calibrate_locations [out.csv]

use std::fmt::Write as _;

use dart2::sim::{eta_field, Coefficients, CENTERS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const SIDE: f64 = 5.0;
const M: usize = 1000;
const TARGET: usize = 216;

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/locations.csv").to_string());
    for seed in 0u64.. {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let locs: Vec<[f64; 2]> = (0..M)
            .map(|_| [SIDE * rng.random::<f64>(), SIDE * rng.random::<f64>()])
            .collect();
        let field = eta_field(&locs, Coefficients::MAIN, CENTERS).expect("centres in range");
        let count = field.alternatives().len();
        if count == TARGET {
            let mut csv = String::from("x,y\n");
            for p in &locs {
                writeln!(csv, "{},{}", p[0], p[1]).unwrap();
            }
            std::fs::write(&out, csv).expect("write fixture");
            println!("seed {seed}: {count} alternatives, written to {out}");
            return;
        }
    }
}
