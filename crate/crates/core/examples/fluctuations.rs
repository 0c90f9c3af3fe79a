//! Exploratory: growth of `Var(X_n)` at the self-dual point, where the speed
//! vanishes. Prints `n`, the variance and `Var(X_n)/n`.

use driftlab::env::EnvParams;
use driftlab::rng::replication_seed;
use driftlab::stats::Summary;
use driftlab::walk::{run_annealed, ModelParams, WalkParams};

fn main() -> driftlab::Result<()> {
    let m = ModelParams::new(EnvParams::sep(0.5, 1.0)?, WalkParams::new(0.7, 0.3)?)?;
    let ns = [250u64, 500, 1_000, 2_000, 4_000];
    let top = *ns.last().unwrap();
    let mut sums = vec![Summary::default(); ns.len()];
    for r in 0..200 {
        let (t, _) = run_annealed(&m.env, &m.walk, top, replication_seed(5, r), m.options)?;
        for (s, &n) in sums.iter_mut().zip(&ns) {
            s.push(t.position(n as usize) as f64);
        }
    }
    for (s, n) in sums.iter().zip(ns) {
        println!("{n:>5}  {:>10.1}  {:.3}", s.variance(), s.variance() / n as f64);
    }
    Ok(())
}
