//! Speeds across densities from one family of coupled walks.
//!
//! `cargo run --release --example speed_scan -- [n] [reps]`

use driftlab::env::EnvParams;
use driftlab::estimators::monotone_speed_scan;
use driftlab::walk::{ModelParams, WalkParams};

fn main() -> driftlab::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("integer argument"));
    let n = args.next().unwrap_or(5_000);
    let reps = args.next().unwrap_or(32);
    let model = ModelParams::new(EnvParams::sep(0.5, 1.0)?, WalkParams::new(0.8, 0.2)?)?;
    let rhos = [0.1, 0.3, 0.5, 0.7, 0.9];
    let scan = monotone_speed_scan(&model, &rhos, n, reps, 2024)?;
    println!("rho      v          SE");
    for (rho, e) in scan.rhos.iter().zip(&scan.estimates) {
        println!("{rho:.2}  {:>9.5}  {:.5}", e.mean, e.stderr);
    }
    for (w, d) in scan.rhos.windows(2).zip(&scan.differences) {
        println!("v({:.1}) - v({:.1}) = {:.5} ± {:.5}", w[1], w[0], d.mean, d.stderr);
    }
    println!("replications with an ordering violation: {}", scan.order_violations);
    Ok(())
}
