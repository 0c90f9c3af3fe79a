//! `θ_n(ρ) = P(H_n < H_{−1})` for a few densities and levels, plus the
//! backtracking probability on the other side.

use driftlab::env::EnvParams;
use driftlab::estimators::{estimate_backtracking, theta_profile};
use driftlab::walk::{ModelParams, WalkParams};

fn main() -> driftlab::Result<()> {
    let ns = [1, 2, 4, 8, 16, 32];
    let walk = WalkParams::new(0.8, 0.2)?;
    for rho in [0.2, 0.5, 0.8] {
        let model = ModelParams::new(EnvParams::sep(rho, 1.0)?, walk)?;
        let prof = theta_profile(&model, &ns, 2_000, 11)?;
        let row: Vec<String> = prof.estimates.iter().map(|e| format!("{:.3}", e.mean)).collect();
        let back = estimate_backtracking(&model, 16, 2_000, 12)?;
        println!("rho={rho}: theta_n for n={ns:?} = [{}]  backtrack(16) = {:.3}", row.join(", "), back.estimate.mean);
        assert_eq!(prof.nesting_violations, 0);
    }
    Ok(())
}
