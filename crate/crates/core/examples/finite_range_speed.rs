//! Range-`L` walks: the environment is redrawn every `L` steps, so block
//! increments are i.i.d. and `v_L` is a plain mean.

use driftlab::env::EnvParams;
use driftlab::finite_range::{estimate_vl, regeneration_check, RangeL, RangeLParams};
use driftlab::walk::{ModelParams, WalkParams};

fn main() -> driftlab::Result<()> {
    let model = ModelParams::new(EnvParams::sep(0.35, 1.0)?, WalkParams::new(0.8, 0.2)?)?;
    for l in [1u64, 10, 100, 1_000] {
        let p = RangeLParams::new(model, RangeL::Finite(l))?;
        let v = estimate_vl(&p, 400, 5)?;
        println!("L={l:>5}  v_L = {:>8.5}  [{:.5}, {:.5}]", v.mean, v.ci.0, v.ci.1);
    }
    let p = RangeLParams::new(model, RangeL::Finite(50))?;
    let r = regeneration_check(&p, 4, 1_000, 6)?;
    println!(
        "blocks of 50: lag-1 autocorrelation {:.4} (SE {:.4}), Var(X_200)/Var(X_50) = {:.3}",
        r.autocorrelation, r.autocorrelation_se, r.variance_ratio
    );
    Ok(())
}
