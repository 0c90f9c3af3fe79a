mod common;

use common::{model, one_step_right, ruin_by_iteration, ruin_closed_form, sep};
use driftlab::driver::DriverKind;
use driftlab::env::Model;
use driftlab::estimators::{estimate_backtracking, estimate_rho_c, estimate_speed, estimate_theta_n, theta_profile, RhoCConfig};
use driftlab::rng::replication_seed;
use driftlab::stats::chi_square_two_sample;
use driftlab::walk::run_annealed;

#[test]
fn one_step_laws_match_enumeration() {
    let cases = [
        (Model::Sep, 0.3, 0.8, 0.2),
        (Model::Sep, 0.5, 0.7, 0.4),
        (Model::Sep, 0.85, 0.9, 0.1),
        (Model::Pcrw, 0.6, 0.75, 0.35),
    ];
    for (i, &(kind, rho, pb, pc)) in cases.iter().enumerate() {
        let m = model(kind, rho, 1.0, pb, pc);
        let q = one_step_right(kind, rho, pb, pc);
        let th = estimate_theta_n(&m, 1, 20_000, 100 + i as u64).unwrap();
        assert!(th.estimate.within(q, 3.0), "{kind} θ₁ {:?} vs {q}", th.estimate);
        let v = estimate_speed(&m, 1, 20_000, 200 + i as u64).unwrap();
        assert!(v.within(2.0 * q - 1.0, 3.0), "{kind} v₁ {v:?} vs {}", 2.0 * q - 1.0);
    }
}

#[test]
fn ruin_oracles_agree() {
    for p in [0.55, 0.7, 0.8, 0.95] {
        for n in [1u32, 5, 10, 20] {
            let a = ruin_by_iteration(p, n as usize);
            let b = ruin_closed_form(p, n);
            assert!((a - b).abs() < 1e-9, "p={p} n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn frozen_occupied_lattice_is_gamblers_ruin() {
    let m = sep(1.0, 0.7, 0.3);
    for n in [5u64, 10, 20] {
        let th = estimate_theta_n(&m, n, 4000, n).unwrap();
        let exact = ruin_by_iteration(0.7, n as usize);
        assert!(th.estimate.within(exact, 3.0), "n={n}: {:?} vs {exact}", th.estimate);
        assert_eq!(th.unresolved, 0);
    }
    // Backtracking on the empty lattice is ruin with the roles swapped.
    let empty = sep(0.0, 0.8, 0.25);
    let b = estimate_backtracking(&empty, 10, 4000, 9).unwrap();
    let exact = ruin_by_iteration(0.75, 10);
    assert!(b.estimate.within(exact, 3.0), "{:?} vs {exact}", b.estimate);
}

#[test]
fn frozen_speeds() {
    for (pb, pc) in [(0.8, 0.2), (0.7, 0.3)] {
        let full = estimate_speed(&sep(1.0, pb, pc), 2000, 200, 1).unwrap();
        let empty = estimate_speed(&sep(0.0, pb, pc), 2000, 200, 2).unwrap();
        assert!(full.within(2.0 * pb - 1.0, 3.0), "{full:?}");
        assert!(empty.within(2.0 * pc - 1.0, 3.0), "{empty:?}");
    }
}

#[test]
fn theta_decreases_and_nests_below_the_bracket() {
    let m = sep(0.15, 0.8, 0.2);
    let prof = theta_profile(&m, &[1, 2, 4, 8, 16], 3000, 4).unwrap();
    assert_eq!(prof.nesting_violations, 0);
    let means: Vec<f64> = prof.estimates.iter().map(|e| e.mean).collect();
    assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
    assert!(means[4] < 0.05, "{means:?}");
}

#[test]
fn lazy_and_windowed_drivers_agree_in_law() {
    let m = sep(0.4, 0.75, 0.3);
    let windowed = m.with_driver(DriverKind::Windowed);
    let n = 150;
    let reps = 4000;
    let hist = |mp: &driftlab::walk::ModelParams, salt: u64| {
        let mut h = vec![0u64; 2 * n as usize + 1];
        for r in 0..reps {
            let (t, _) = run_annealed(&mp.env, &mp.walk, n, replication_seed(salt, r), mp.options).unwrap();
            h[(t.end() + n as i64) as usize] += 1;
        }
        h
    };
    let a = hist(&m, 10);
    let b = hist(&windowed, 20);
    let t = chi_square_two_sample(&a, &b, 20).unwrap();
    assert!(t.passes(1e-3), "{t:?}");
}

#[test]
fn pcrw_drivers_agree_in_law() {
    let m = model(Model::Pcrw, 0.5, 1.0, 0.8, 0.2);
    let windowed = m.with_driver(DriverKind::Windowed);
    let n = 100;
    let reps = 3000;
    let hist = |mp: &driftlab::walk::ModelParams, salt: u64| {
        let mut h = vec![0u64; 2 * n as usize + 1];
        for r in 0..reps {
            let (t, _) = run_annealed(&mp.env, &mp.walk, n, replication_seed(salt, r), mp.options).unwrap();
            h[(t.end() + n as i64) as usize] += 1;
        }
        h
    };
    let t = chi_square_two_sample(&hist(&m, 30), &hist(&windowed, 40), 20).unwrap();
    assert!(t.passes(1e-3), "{t:?}");
}

#[test]
fn critical_bracket_at_small_horizon() {
    let m = sep(0.5, 0.7, 0.3);
    let cfg = RhoCConfig { tol: 0.1, ..RhoCConfig::default() };
    let b = estimate_rho_c(&m, 1000, cfg, 5).unwrap();
    assert!(b.contains(0.5), "{b:?}");
    assert!(b.width() <= 0.25, "{b:?}");
}
