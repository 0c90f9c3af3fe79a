//! One line per acceptance criterion. Full scale by default; set
//! `DRIFTLAB_ACCEPTANCE_QUICK=1` for a reduced smoke run.

mod common;

use std::time::Instant;

use common::{engine_vs_rejection, invariant_suites, one_step_right, quick, ruin_by_iteration, ruin_closed_form, sep, stationarity_suites};
use driftlab::couplings::*;
use driftlab::env::{sample_ordered_pair, EnvParams, LatticeWindow, Model};
use driftlab::estimators::{estimate_rho_c, estimate_speed, estimate_theta_n, monotone_speed_scan, RhoCConfig};
use driftlab::finite_range::{regeneration_check, RangeL, RangeLParams};
use driftlab::rng::{replication_seed, RngStream};
use rayon::prelude::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn scale(full: u64, reduced: u64) -> u64 {
    if quick() {
        reduced
    } else {
        full
    }
}

fn frozen_speeds() -> Verdict {
    let start = Instant::now();
    let (n, reps) = (scale(10_000, 2_000), scale(1_000, 200));
    let mut ok = true;
    let mut parts = Vec::new();
    for (pb, pc) in [(0.8, 0.2), (0.7, 0.3)] {
        for (rho, target) in [(1.0, 2.0 * pb - 1.0), (0.0, 2.0 * pc - 1.0)] {
            let e = estimate_speed(&sep(rho, pb, pc), n, reps, 1).unwrap();
            ok &= e.within(target, 3.0);
            parts.push(format!("v({rho}; {pb},{pc})={:.5}±{:.5} (target {target:.1})", e.mean, e.stderr));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= quick() || secs <= 60.0;
    verdict(ok, format!("{}; {secs:.1}s", parts.join(", ")))
}

fn self_dual_zero_speed() -> Verdict {
    let (n, reps) = (scale(100_000, 10_000), scale(400, 64));
    let e = estimate_speed(&sep(0.5, 0.7, 0.3), n, reps, 2).unwrap();
    verdict(e.within(0.0, 3.0), format!("n={n} reps={reps}: v={:.5} SE={:.5} (z={:.2})", e.mean, e.stderr, e.z_score(0.0)))
}

fn self_dual_bracket() -> Verdict {
    let n = scale(100_000, 10_000);
    let cfg = RhoCConfig { tol: 0.1, lo: 0.4, hi: 0.6, ..RhoCConfig::default() };
    let b = estimate_rho_c(&sep(0.5, 0.7, 0.3), n, cfg, 3).unwrap();
    verdict(
        b.contains(0.5) && b.width() <= 0.1,
        format!("n={n}: [{:.4}, {:.4}] width {:.4}, verdict {:?}, {} probes", b.lo, b.hi, b.width(), b.verdict, b.probes.len()),
    )
}

fn one_step_laws() -> Verdict {
    let reps = scale(50_000, 10_000);
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (rho, pb, pc)) in [(0.3, 0.8, 0.2), (0.5, 0.7, 0.4), (0.85, 0.9, 0.1)].into_iter().enumerate() {
        let m = sep(rho, pb, pc);
        let q = one_step_right(Model::Sep, rho, pb, pc);
        let th = estimate_theta_n(&m, 1, reps, 40 + i as u64).unwrap().estimate;
        let v = estimate_speed(&m, 1, reps, 50 + i as u64).unwrap();
        ok &= th.within(q, 3.0) && v.within(2.0 * q - 1.0, 3.0);
        parts.push(format!("({rho},{pb},{pc}): θ₁ z={:.2}, v₁ z={:.2}", th.z_score(q), v.z_score(2.0 * q - 1.0)));
    }
    verdict(ok, parts.join("; "))
}

fn gamblers_ruin() -> Verdict {
    let reps = scale(10_000, 2_000);
    let p = 0.7;
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [5u64, 10, 20] {
        let exact = ruin_by_iteration(p, n as usize);
        ok &= (exact - ruin_closed_form(p, n as u32)).abs() < 1e-9;
        let e = estimate_theta_n(&sep(1.0, p, 0.3), n, reps, 60 + n).unwrap().estimate;
        ok &= e.within(exact, 3.0);
        parts.push(format!("n={n}: {:.4} vs {exact:.4} (z={:.2})", e.mean, e.z_score(exact)));
    }
    verdict(ok, parts.join("; "))
}

fn invariants() -> Verdict {
    let suites = invariant_suites(scale(1_000, 200), 6);
    let failing: u64 = suites.iter().map(|s| s.failing).sum();
    let detail = suites.iter().map(|s| format!("{} {}/{}", s.name, s.failing, s.reps)).collect::<Vec<_>>().join(", ");
    verdict(failing == 0, detail)
}

fn stationarity() -> Verdict {
    let reps = scale(10_000, 2_000);
    let mut ok = true;
    let mut worst = (1.0f64, String::new());
    let mut count = 0;
    for (kind, rho) in [(Model::Sep, 0.3), (Model::Sep, 0.5), (Model::Pcrw, 0.5), (Model::Pcrw, 1.5)] {
        for (name, t) in stationarity_suites(kind, rho, reps, 7) {
            ok &= t.passes(1e-3);
            count += 1;
            if t.p_value < worst.0 {
                worst = (t.p_value, format!("{kind} ρ={rho} {name}"));
            }
        }
    }
    verdict(ok, format!("{count} tests at level 1e-3, smallest p={:.4} ({})", worst.0, worst.1))
}

fn interchange_oracle() -> Verdict {
    let (tests, worst) = engine_vs_rejection(10_000, 8);
    let ok = tests.iter().all(|(_, t)| t.passes(1e-3)) && worst < 4.5;
    let ps = tests.iter().map(|(n, t)| format!("{n} p={:.3}", t.p_value)).collect::<Vec<_>>().join(", ");
    verdict(ok, format!("51 sites, 10⁴ runs each: {ps}; mean profile within {worst:.2} SD"))
}

fn coupling_bounds() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();

    let drift = DriftConfig { nu: 1.0, h: 200, t: 20.0, k: 1 };
    let params = EnvParams::sep(0.3, 1.0).unwrap();
    let window = LatticeWindow::new(300).unwrap();
    let reps = scale(1_000, 200);
    let reports: Vec<CouplingReport> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = replication_seed(9, r);
            let (low, high) = sample_ordered_pair(&params, 0.6, window, &mut RngStream::derive(s, &[0])).unwrap();
            drift_coupling(&low, &high, &drift, s).unwrap()
        })
        .collect();
    let tally: Tally = reports.iter().collect();
    let fail = 1.0 - tally.frequency("sustained");
    let bound = drift_failure_bound(1, 1.0, 20.0);
    ok &= fail <= bound + 3.0 * tally.stderr("sustained") && tally.coalescence_violations == 0;
    parts.push(format!("drift failure {fail:.4} ≤ {bound:.4}"));

    let sp = SprinklerConfig { nu: 1.0, rho: 0.3, ell: 1, h: 40 };
    let w = LatticeWindow::new(60).unwrap();
    let reps = scale(10_000, 2_000);
    let reports: Vec<CouplingReport> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = replication_seed(10, r);
            let (high, low) = sample_sprinkler_pair(&sp, w, 0.5, &mut RngStream::derive(s, &[0])).unwrap();
            sprinkler_coupling(&high, &low, &sp, s).unwrap()
        })
        .collect();
    let tally: Tally = reports.iter().collect();
    let delta = sprinkler_delta(1.0, 0.3, 1);
    let f = tally.frequency("target_0");
    ok &= f >= 2.0 * delta - 3.0 * tally.stderr("target_0");
    parts.push(format!("sprinkler {f:.4} ≥ 2δ={:.2e}", 2.0 * delta));

    // Registered covering parameters: ρ=0.3, ε=0.2, ν=0.25, H = 4νt + 256.
    let (nu, w_probe) = (0.25, 256i64);
    let reps = scale(200, 40);
    let mut freqs = Vec::new();
    for t in [1296.0, 2401.0, 4096.0] {
        let h = (4.0 * nu * t) as i64 + w_probe;
        let cfg = CoveringConfig { probe: Some(w_probe), ..CoveringConfig::new(0.3, 0.2, nu, t, h) };
        let win = LatticeWindow::new(h as usize + 64).unwrap();
        let reports: Vec<CouplingReport> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let s = replication_seed(11, r);
                let (high, low) = sample_covering_pair(&cfg, win, 0.7, 0.15, &mut RngStream::derive(s, &[0])).unwrap();
                covering_coupling(&high, &low, &cfg, s).unwrap()
            })
            .collect();
        let tally: Tally = reports.iter().collect();
        ok &= tally.coalescence_violations == 0;
        freqs.push((t, tally.frequency("covered"), tally.stderr("covered")));
    }
    ok &= freqs.iter().all(|&(_, p, _)| p >= 0.9);
    ok &= freqs.windows(2).all(|w| w[1].1 >= w[0].1 - 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
    parts.push(format!(
        "covering {}",
        freqs.iter().map(|(t, p, se)| format!("t={t}: {p:.3}±{se:.3}")).collect::<Vec<_>>().join(", ")
    ));
    verdict(ok, parts.join("; "))
}

fn regeneration() -> Verdict {
    let p = RangeLParams::new(sep(0.5, 0.8, 0.2), RangeL::Finite(50)).unwrap();
    let r = regeneration_check(&p, 4, scale(4_000, 1_000), 12).unwrap();
    verdict(
        r.autocorrelation_ok(3.0) && r.variance_ratio_ok(0.15),
        format!("lag-1 autocorrelation {:.4} (SE {:.4}), Var(X_4L)/Var(X_L) = {:.3}", r.autocorrelation, r.autocorrelation_se, r.variance_ratio),
    )
}

fn strict_monotonicity() -> Verdict {
    let (n, reps) = (scale(100_000, 10_000), scale(4, 8));
    let s = monotone_speed_scan(&sep(0.2, 0.8, 0.2), &[0.2, 0.8], n, reps, 13).unwrap();
    let d = &s.differences[0];
    verdict(
        d.mean > 3.0 * d.stderr && s.order_violations == 0,
        format!(
            "n={n} reps={reps}: v(0.8)−v(0.2) = {:.4} (SE {:.5}), ordering violations {}",
            d.mean, d.stderr, s.order_violations
        ),
    )
}

fn main() {
    type Criterion = fn() -> Verdict;
    let criteria: [(&str, Criterion); 11] = [
        ("frozen-lattice speeds", frozen_speeds),
        ("self-dual zero speed", self_dual_zero_speed),
        ("self-dual critical bracket", self_dual_bracket),
        ("one-step laws", one_step_laws),
        ("gambler's ruin at full occupation", gamblers_ruin),
        ("deterministic invariants", invariants),
        ("stationarity and symmetry", stationarity),
        ("interchange vs rejection oracle", interchange_oracle),
        ("coupling bounds", coupling_bounds),
        ("regeneration", regeneration),
        ("strict monotonicity", strict_monotonicity),
    ];
    println!("acceptance ({} scale)", if quick() { "reduced" } else { "full" });
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        println!(
            "criterion {:>2} {}: {} [{}] ({:.1}s)",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            name,
            v.detail,
            start.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
