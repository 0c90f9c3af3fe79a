//! Bisection for the density at which the speed changes sign.
//!
//! With `p• = 1 − p∘` the model is symmetric under particle-hole exchange
//! combined with reflection, so the bracket should straddle 1/2.

use driftlab::env::EnvParams;
use driftlab::estimators::{estimate_rho_c, RhoCConfig};
use driftlab::walk::{ModelParams, WalkParams};

fn main() -> driftlab::Result<()> {
    let n: u64 = std::env::args().nth(1).map(|a| a.parse().expect("horizon")).unwrap_or(2_000);
    let model = ModelParams::new(EnvParams::sep(0.5, 1.0)?, WalkParams::new(0.7, 0.3)?)?;
    let cfg = RhoCConfig { tol: 0.05, ..RhoCConfig::default() };
    let b = estimate_rho_c(&model, n, cfg, 7)?;
    for p in &b.probes {
        let sign = match p.sign {
            Some(1) => "+",
            Some(_) => "-",
            None => "?",
        };
        println!("rho={:.4}  v={:>9.5} ± {:.5}  {sign}", p.rho, p.estimate.mean, p.estimate.stderr);
    }
    println!("{:?}: [{:.4}, {:.4}]", b.verdict, b.lo, b.hi);
    if b.near_critical {
        println!("stopped early: probes around the middle stayed unresolved");
    }
    Ok(())
}
