//! Oracles and fixtures shared by the integration suites. The oracles use
//! their own random numbers and none of the library's samplers.

#![allow(dead_code)]

use driftlab::env::{EnvParams, Model};
use driftlab::walk::{ModelParams, WalkParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

pub fn model(kind: Model, rho: f64, nu: f64, p_bullet: f64, p_circ: f64) -> ModelParams {
    let env = EnvParams::boundary(kind, rho, nu).unwrap();
    ModelParams::new(env, WalkParams::new(p_bullet, p_circ).unwrap()).unwrap()
}

pub fn sep(rho: f64, p_bullet: f64, p_circ: f64) -> ModelParams {
    model(Model::Sep, rho, 1.0, p_bullet, p_circ)
}

pub fn oracle_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ 0x5EED_0F_0AC1E)
}

/// Exclusion dynamics by rejection: every site carries a rate-`ν` clock; a
/// ring at an occupied site proposes a uniform neighbour and the move is
/// dropped when the neighbour is occupied. Periodic boundary.
pub fn rejection_sep(init: &[u32], nu: f64, t: f64, rng: &mut ChaCha12Rng) -> Vec<u32> {
    let n = init.len();
    let mut s = init.to_vec();
    let mut now = 0.0;
    loop {
        let u: f64 = rng.random();
        now += -(1.0 - u).ln() / (nu * n as f64);
        if now >= t {
            return s;
        }
        let i = rng.random_range(0..n);
        if s[i] == 0 {
            continue;
        }
        let j = if rng.random::<bool>() { (i + 1) % n } else { (i + n - 1) % n };
        if s[j] == 0 {
            s[i] = 0;
            s[j] = 1;
        }
    }
}

/// Law of the occupation of one site under the stationary marginal,
/// enumerated: `(occupancy, probability)` pairs.
pub fn site_law(kind: Model, rho: f64) -> Vec<(u32, f64)> {
    match kind {
        Model::Sep => vec![(0, 1.0 - rho), (1, rho)],
        Model::Pcrw => {
            let mut out = Vec::new();
            let mut p = (-rho).exp();
            let mut k = 0u32;
            let mut mass = 0.0;
            while mass < 1.0 - 1e-15 && k < 200 {
                out.push((k, p));
                mass += p;
                k += 1;
                p *= rho / k as f64;
            }
            out
        }
    }
}

/// `P(first step is +1)` by summing over the occupation of the origin.
pub fn one_step_right(kind: Model, rho: f64, p_bullet: f64, p_circ: f64) -> f64 {
    site_law(kind, rho).into_iter().map(|(k, p)| p * if k > 0 { p_bullet } else { p_circ }).sum()
}

/// `P(reach n before −1)` for a walk stepping right with probability `p`,
/// by iterating the first-step equations `h(x) = p h(x+1) + (1−p) h(x−1)`
/// on `{−1, …, n}` to convergence.
pub fn ruin_by_iteration(p: f64, n: usize) -> f64 {
    let m = n + 2;
    let mut h = vec![0.0f64; m];
    h[m - 1] = 1.0;
    for _ in 0..200_000 {
        let mut delta: f64 = 0.0;
        for i in 1..m - 1 {
            let v = p * h[i + 1] + (1.0 - p) * h[i - 1];
            delta = delta.max((v - h[i]).abs());
            h[i] = v;
        }
        if delta < 1e-15 {
            break;
        }
    }
    h[1]
}

/// `(1−r)/(1−r^{n+1})`, `r = (1−p)/p`.
pub fn ruin_closed_form(p: f64, n: u32) -> f64 {
    let r = (1.0 - p) / p;
    (1.0 - r) / (1.0 - r.powi(n as i32 + 1))
}

pub fn quick() -> bool {
    std::env::var_os("DRIFTLAB_ACCEPTANCE_QUICK").is_some_and(|v| !v.is_empty() && v != "0")
}

/// Mean occupations after time `t` from the heat equation
/// `u' = (ν/2) Δu` on the ring, integrated with RK4.
pub fn sep_mean_profile(init: &[u32], nu: f64, t: f64) -> Vec<f64> {
    let n = init.len();
    let lap = |u: &[f64]| -> Vec<f64> { (0..n).map(|i| 0.5 * nu * (u[(i + 1) % n] + u[(i + n - 1) % n] - 2.0 * u[i])).collect() };
    let steps = ((t / 1e-3).ceil() as usize).max(1);
    let h = t / steps as f64;
    let mut u: Vec<f64> = init.iter().map(|&v| v as f64).collect();
    for _ in 0..steps {
        let k1 = lap(&u);
        let u2: Vec<f64> = u.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
        let k2 = lap(&u2);
        let u3: Vec<f64> = u.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
        let k3 = lap(&u3);
        let u4: Vec<f64> = u.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
        let k4 = lap(&u4);
        for i in 0..n {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    u
}

/// Two-sample comparison of the event-driven engine and [`rejection_sep`]
/// from a step profile on a 51-site ring. Returns `(statistic, p-value)` per
/// observable, plus the largest standardized deviation of the engine's mean
/// profile from [`sep_mean_profile`].
pub fn engine_vs_rejection(runs: usize, seed: u64) -> (Vec<(&'static str, driftlab::stats::TestOutcome)>, f64) {
    use driftlab::env::EnvState;
    use driftlab::rng::replication_seed;
    use driftlab::sep::{evolve_sep, SepClocks};
    use driftlab::stats::chi_square_two_sample;

    const SITES: usize = 51;
    let (nu, t) = (1.0, 3.0);
    let init: Vec<u32> = (0..SITES).map(|i| u32::from(i < 25)).collect();
    let engine: Vec<Vec<u32>> = (0..runs)
        .map(|r| {
            let mut s = EnvState::from_sites(Model::Sep, init.clone()).unwrap();
            evolve_sep(&mut s, t, &mut SepClocks::new(replication_seed(seed, r as u64), 0, nu)).unwrap();
            s.occupancy
        })
        .collect();
    let mut rng = oracle_rng(seed);
    let oracle: Vec<Vec<u32>> = (0..runs).map(|_| rejection_sep(&init, nu, t, &mut rng)).collect();

    type Obs = fn(&[u32]) -> usize;
    let observables: [(&'static str, Obs, usize); 4] = [
        ("count_front", |s| s[20..30].iter().sum::<u32>() as usize, 11),
        ("pattern_front", |s| (s[23] + 2 * s[24] + 4 * s[25]) as usize, 8),
        ("right_half", |s| s[25..].iter().sum::<u32>() as usize, 27),
        ("seam", |s| (s[49] + 2 * s[50] + 4 * s[0] + 8 * s[1]) as usize, 16),
    ];
    let mut out = Vec::new();
    for (name, f, bins) in observables {
        let mut a = vec![0u64; bins];
        let mut b = vec![0u64; bins];
        for s in &engine {
            a[f(s).min(bins - 1)] += 1;
        }
        for s in &oracle {
            b[f(s).min(bins - 1)] += 1;
        }
        out.push((name, chi_square_two_sample(&a, &b, 10).unwrap()));
    }
    let mean = sep_mean_profile(&init, nu, t);
    let mut worst: f64 = 0.0;
    for i in 0..SITES {
        let m = engine.iter().map(|s| s[i] as f64).sum::<f64>() / runs as f64;
        let sd = (mean[i] * (1.0 - mean[i]) / runs as f64).sqrt().max(1e-12);
        worst = worst.max((m - mean[i]).abs() / sd);
    }
    (out, worst)
}

/// Outcome of one zero-tolerance invariant suite: the number of
/// replications in which the invariant failed at least once.
#[derive(Debug, Clone)]
pub struct Suite {
    pub name: &'static str,
    pub reps: u64,
    pub failing: u64,
}

/// Domination under monotone couplings, ordering and coalescence of coupled
/// walks, unit steps and parity, particle conservation, nested first-passage
/// events and ordering across densities.
pub fn invariant_suites(reps: u64, seed: u64) -> Vec<Suite> {
    use driftlab::couplings::{EdgeMode, Layer, TwoLayer};
    use driftlab::driver::build;
    use driftlab::env::{sample_ordered_pair, LatticeWindow};
    use driftlab::finite_range::{run_density_family, RangeL, RangeLParams};
    use driftlab::pcrw::{evolve_pcrw, monotone_coupled_evolve_pcrw};
    use driftlab::rng::{replication_seed, RngStream};
    use driftlab::sep::{evolve_sep, monotone_coupled_evolve, SepClocks};
    use driftlab::walk::{hitting_times, run_annealed, run_coupled_family, ArrowSource, HitTime, SpaceTimePoint};
    use rayon::prelude::*;

    let count = |name: &'static str, f: &(dyn Fn(u64) -> bool + Sync)| Suite {
        name,
        reps,
        failing: (0..reps).into_par_iter().filter(|&r| !f(replication_seed(seed, r))).count() as u64,
    };
    let window = LatticeWindow::new(40).unwrap();
    let mut out = Vec::new();

    out.push(count("sep_monotone_domination", &|s| {
        let p = EnvParams::sep(0.3, 1.0).unwrap();
        let mut rng = RngStream::derive(s, &[1]);
        let (mut low, mut high) = sample_ordered_pair(&p, 0.6, window, &mut rng).unwrap();
        let v = monotone_coupled_evolve(&mut low, &mut high, 8.0, &mut SepClocks::new(s, 0, 1.0)).unwrap();
        v == 0 && low.occupancy.iter().zip(&high.occupancy).all(|(a, b)| a <= b)
    }));
    out.push(count("pcrw_monotone_domination", &|s| {
        let p = EnvParams::pcrw(0.5, 1.0).unwrap();
        let mut rng = RngStream::derive(s, &[2]);
        let (mut low, mut high) = sample_ordered_pair(&p, 1.2, window, &mut rng).unwrap();
        let v = monotone_coupled_evolve_pcrw(&mut low, &mut high, 20, &mut RngStream::derive(s, &[3])).unwrap();
        v == 0 && low.occupancy.iter().zip(&high.occupancy).all(|(a, b)| a <= b)
    }));
    out.push(count("two_layer_shared_domination", &|s| {
        let p = EnvParams::sep(0.2, 1.0).unwrap();
        let mut rng = RngStream::derive(s, &[4]);
        let (low, high) = sample_ordered_pair(&p, 0.7, window, &mut rng).unwrap();
        let mut eng = TwoLayer::new(&high, &low, 1.0, s).unwrap();
        eng.set_modes(|_| EdgeMode::Shared);
        let w = eng.add_watch(-40, 40);
        eng.advance(8.0).unwrap();
        eng.watch(w).0 == 0 && eng.coalescence_violations() == 0 && eng.state(Layer::Low).dominated_on(&eng.state(Layer::High), -40, 40)
    }));

    let starts: Vec<SpaceTimePoint> = (-3..=3).map(|k| SpaceTimePoint::new(2 * k, 0).unwrap()).collect();
    for (name, kind, rho) in [("sep_walk_order_coalescence", Model::Sep, 0.5), ("pcrw_walk_order_coalescence", Model::Pcrw, 0.7)] {
        let m = model(kind, rho, 1.0, 0.8, 0.2);
        let starts = &starts;
        out.push(count(name, &move |s| {
            let n = 300;
            let mut env = build(&m.env, s, 0, n + 8, m.options).unwrap();
            let fam = run_coupled_family(env.as_mut(), starts, n, &ArrowSource::new(s), &m.walk).unwrap();
            fam.order_violations == 0 && fam.coalescence_violations == 0
        }));
    }

    let m = sep(0.4, 0.75, 0.3);
    out.push(count("unit_steps_and_parity", &|s| {
        let (t, _) = run_annealed(&m.env, &m.walk, 400, s, m.options).unwrap();
        t.check_invariants().is_ok() && t.positions().windows(2).all(|w| (w[1] - w[0]).abs() == 1)
    }));
    out.push(count("nested_first_passage", &|s| {
        let (t, _) = run_annealed(&m.env, &m.walk, 2000, s, m.options).unwrap();
        let levels: Vec<i64> = (-1..=30).collect();
        let h = hitting_times(&t, &levels);
        let below = h[&-1];
        let event = |n: i64| match (h[&n], below) {
            (HitTime::At(a), HitTime::At(b)) => a < b,
            (HitTime::At(_), HitTime::NotWithin(_)) => true,
            _ => false,
        };
        (1..30).all(|n| !event(n + 1) || event(n))
    }));
    out.push(count("density_family_order", &|s| {
        let p = RangeLParams::new(sep(0.1, 0.8, 0.2), RangeL::Finite(64)).unwrap();
        let fam = run_density_family(&p, &[0.1, 0.35, 0.6, 0.9], 256, s).unwrap();
        let ends: Vec<i64> = fam.trajectories.iter().map(|t| t.end()).collect();
        fam.order_violations == 0 && ends.windows(2).all(|w| w[0] <= w[1])
    }));

    out.push(count("particle_conservation", &|s| {
        let mut rng = RngStream::derive(s, &[5]);
        let sp = EnvParams::sep(0.45, 2.0).unwrap();
        let pp = EnvParams::pcrw(1.5, 1.0).unwrap();
        let (mut a, _) = sample_ordered_pair(&sp, 0.45, window, &mut rng).unwrap();
        let (mut b, _) = sample_ordered_pair(&pp, 1.5, window, &mut rng).unwrap();
        let (ta, tb) = (a.total(), b.total());
        evolve_sep(&mut a, 5.0, &mut SepClocks::new(s, 1, 2.0)).unwrap();
        evolve_pcrw(&mut b, 25, &mut RngStream::derive(s, &[6])).unwrap();
        let (low, high) = sample_ordered_pair(&sp, 0.8, window, &mut rng).unwrap();
        let (tl, th) = (low.total(), high.total());
        let mut eng = TwoLayer::new(&high, &low, 1.0, s).unwrap();
        eng.set_modes(|x| if x % 3 == 0 { EdgeMode::Independent } else { EdgeMode::Thinned });
        eng.advance(5.0).unwrap();
        a.total() == ta && b.total() == tb && eng.state(Layer::Low).total() == tl && eng.state(Layer::High).total() == th
    }));
    out
}

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|j| (j as f64).ln()).sum()
}

/// Count law of `len` sites under the stationary product measure.
pub fn count_law(kind: Model, rho: f64, len: u64, bins: usize) -> Vec<f64> {
    (0..bins as u64)
        .map(|k| match kind {
            Model::Sep if k <= len => {
                (ln_factorial(len) - ln_factorial(k) - ln_factorial(len - k) + k as f64 * rho.ln() + (len - k) as f64 * (1.0 - rho).ln()).exp()
            }
            Model::Sep => 0.0,
            Model::Pcrw => (k as f64 * (rho * len as f64).ln() - rho * len as f64 - ln_factorial(k)).exp(),
        })
        .collect()
}

/// Stationarity and reflection-symmetry checks for one model: the sampled
/// law, the law after evolution (window engine and infinite-volume driver),
/// the joint law of three neighbours, and left/right symmetry of the spread
/// of a symmetric block.
pub fn stationarity_suites(kind: Model, rho: f64, reps: u64, seed: u64) -> Vec<(String, driftlab::stats::TestOutcome)> {
    use driftlab::driver::build;
    use driftlab::env::{sample_stationary, EnvState, LatticeWindow};
    use driftlab::pcrw::evolve_pcrw;
    use driftlab::rng::{replication_seed, RngStream};
    use driftlab::sep::{evolve_sep, SepClocks};
    use driftlab::stats::{chi_square_gof, chi_square_two_sample};
    use driftlab::walk::AnnealedOptions;
    use rayon::prelude::*;

    let nu = 1.0;
    let params = EnvParams::new(kind, rho, nu).unwrap();
    let window = LatticeWindow::new(60).unwrap();
    let len = 10u64;
    let bins = match kind {
        Model::Sep => len as usize + 1,
        Model::Pcrw => (rho * len as f64 + 8.0 * (rho * len as f64).sqrt() + 8.0) as usize,
    };
    let law = count_law(kind, rho, len, bins);
    let evolve = |s: &mut EnvState, r: u64| match kind {
        Model::Sep => {
            evolve_sep(s, 6.0, &mut SepClocks::new(r, 0, nu)).unwrap();
        }
        Model::Pcrw => evolve_pcrw(s, 36, &mut RngStream::derive(r, &[1])).unwrap(),
    };
    let count = |s: &EnvState| (1..=len as i64).map(|x| s.get(x)).sum::<u32>() as usize;
    let runs: Vec<(usize, usize, usize, [u32; 3])> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let r = replication_seed(seed, r);
            let mut s = sample_stationary(&params, window, &mut RngStream::derive(r, &[0])).unwrap();
            let before = count(&s);
            evolve(&mut s, r);
            let after = count(&s);
            let mut env = build(&params, r, 0, 40, AnnealedOptions::default()).unwrap();
            let lazy = (1..=len as i64).map(|x| env.occupancy(x, 30).unwrap()).sum::<u32>() as usize;
            (before, after, lazy, [s.get(-1), s.get(0), s.get(1)])
        })
        .collect();
    let hist = |f: &dyn Fn(&(usize, usize, usize, [u32; 3])) -> usize| {
        let mut h = vec![0u64; bins];
        for x in &runs {
            h[f(x).min(bins - 1)] += 1;
        }
        h
    };
    let mut out = vec![
        ("sampled_count_law".to_string(), chi_square_gof(&hist(&|x| x.0), &law, 5.0).unwrap()),
        ("evolved_count_law".to_string(), chi_square_gof(&hist(&|x| x.1), &law, 5.0).unwrap()),
        ("driver_count_law".to_string(), chi_square_gof(&hist(&|x| x.2), &law, 5.0).unwrap()),
    ];
    // Joint law of three neighbours, capped at 2 particles per site.
    let site = count_law(kind, rho, 1, 3);
    let cap = |v: u32| v.min(2) as usize;
    let mut joint = vec![0u64; 27];
    for x in &runs {
        joint[cap(x.3[0]) * 9 + cap(x.3[1]) * 3 + cap(x.3[2])] += 1;
    }
    let tail = 1.0 - site[0] - site[1];
    let p = |k: usize| if k < 2 { site[k] } else { tail.max(0.0) };
    let jp: Vec<f64> = (0..27).map(|i| p(i / 9) * p(i / 3 % 3) * p(i % 3)).collect();
    out.push(("evolved_neighbour_law".to_string(), chi_square_gof(&joint, &jp, 5.0).unwrap()));

    // A symmetric block around the origin spreads symmetrically.
    let spread: Vec<(usize, usize)> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let r = replication_seed(seed ^ 0xA5A5, r);
            let mut s = EnvState::empty(kind, window);
            for x in -4..=4 {
                s.set(x, 1);
            }
            evolve(&mut s, r);
            let right = (5..=12).map(|x| s.get(x)).sum::<u32>() as usize;
            let left = (-12..=-5).map(|x| s.get(x)).sum::<u32>() as usize;
            (left, right)
        })
        .collect();
    let mut l = vec![0u64; 10];
    let mut rr = vec![0u64; 10];
    for (i, (a, b)) in spread.iter().enumerate() {
        // Alternate replications so the two samples are independent.
        if i % 2 == 0 {
            l[(*a).min(9)] += 1;
        } else {
            rr[(*b).min(9)] += 1;
        }
    }
    out.push(("reflection_symmetry".to_string(), chi_square_two_sample(&l, &rr, 10).unwrap()));
    out
}
