//! Soft local times for a cloud of lazy walks and the Poisson sandwich
//! built on them.

use driftlab::pcrw::{lazy_heat_kernel, poisson_sandwich_coupling, soft_local_time};

fn main() -> driftlab::Result<()> {
    let positions: Vec<i64> = (-20..=20).step_by(2).collect();
    let t = 25;
    let f = soft_local_time(&positions, t, (-10, 10), 3)?;
    println!(" z     G(z)    sum q_t   placed");
    for z in -10..=10 {
        let mean: f64 = positions.iter().map(|&x| lazy_heat_kernel(t, z - x)).sum();
        println!("{z:>3}  {:>7.3}  {mean:>7.3}  {:>5}", f.g_at(z), f.h_at(z));
    }

    // The start must be close to density ρ on every ℓ-window, so use an
    // alternating 1,3 profile rather than a Poisson draw.
    let (rho, eps, ell) = (2.0, 0.5, 4usize);
    let eta0: Vec<u32> = (0..=400).map(|x| if x % 2 == 0 { 1 } else { 3 }).collect();
    let mut ok = 0;
    for seed in 0..50 {
        let s = poisson_sandwich_coupling(&eta0, rho, eps, ell, 100, seed)?;
        ok += usize::from(s.success);
    }
    println!("sandwich Poi(ρ−ε) ≤ cloud ≤ Poi(ρ+ε) held in {ok} of 50 runs");
    Ok(())
}
