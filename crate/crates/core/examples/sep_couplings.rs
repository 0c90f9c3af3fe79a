//! The two-layer exclusion couplings: drift, covering, sprinkler and the
//! scale-doubling coupling of two walks.

use driftlab::couplings::*;
use driftlab::env::{sample_ordered_pair, EnvParams, LatticeWindow};
use driftlab::rng::{replication_seed, RngStream};
use driftlab::walk::{ModelParams, WalkParams};

fn main() -> driftlab::Result<()> {
    let reps = 40u64;

    let drift = DriftConfig { nu: 1.0, h: 200, t: 20.0, k: 1 };
    let window = LatticeWindow::new(300)?;
    let params = EnvParams::sep(0.3, 1.0)?;
    let mut tally = Tally::default();
    for r in 0..reps {
        let s = replication_seed(1, r);
        let (low, high) = sample_ordered_pair(&params, 0.6, window, &mut RngStream::derive(s, &[0]))?;
        tally.add(&drift_coupling(&low, &high, &drift, s)?);
    }
    println!("drift: sustained {:.3} (failure bound {:.3})", tally.frequency("sustained"), drift_failure_bound(1, 1.0, 20.0));

    let (nu, t, w) = (0.25, 1296.0, 256);
    let h = (4.0 * nu * t) as i64 + w;
    let cov = CoveringConfig { probe: Some(w), ..CoveringConfig::new(0.3, 0.2, nu, t, h) };
    let window = LatticeWindow::new(h as usize + 64)?;
    let mut tally = Tally::default();
    for r in 0..reps {
        let s = replication_seed(2, r);
        let (high, low) = sample_covering_pair(&cov, window, 0.7, 0.15, &mut RngStream::derive(s, &[0]))?;
        tally.add(&covering_coupling(&high, &low, &cov, s)?);
    }
    let (kept, total) = tally.thinning.totals();
    println!(
        "covering t={t}: covered {:.3}, all stages matched {:.3}, thinning {kept}/{total}",
        tally.frequency("covered"),
        tally.frequency("all_stages_matched")
    );

    let sp = SprinklerConfig { nu: 1.0, rho: 0.3, ell: 1, h: 40 };
    let window = LatticeWindow::new(60)?;
    let mut tally = Tally::default();
    for r in 0..1_000 {
        let s = replication_seed(3, r);
        let (high, low) = sample_sprinkler_pair(&sp, window, 0.5, &mut RngStream::derive(s, &[0]))?;
        tally.add(&sprinkler_coupling(&high, &low, &sp, s)?);
    }
    println!("sprinkler: target_0 {:.3} (2δ = {:.2e})", tally.frequency("target_0"), 2.0 * sprinkler_delta(1.0, 0.3, 1));

    let model = ModelParams::new(EnvParams::sep(0.2, 1.0)?, WalkParams::new(0.8, 0.2)?)?;
    let cfg = ScaleConfig { model, eps: 0.5, l: 400, f: 512, mesh: None, policy: Policy::BestEffort };
    let mut good = 0;
    for r in 0..10 {
        let c = sprinkled_scale_coupling(&cfg, replication_seed(4, r))?;
        good += usize::from(c.good());
        println!("scale: X1={:>5} X2={:>5} min gap {:>5} good {}", c.traj1.end(), c.traj2.end(), c.min_gap, c.good());
    }
    println!("scale: good on {good} of 10 (gap bound -{})", 2 * cfg.t());
    Ok(())
}
