mod common;

use driftlab::env::Model;

#[test]
fn sep_is_stationary_and_symmetric() {
    for rho in [0.2, 0.5] {
        for (name, t) in common::stationarity_suites(Model::Sep, rho, 4000, 3) {
            assert!(t.passes(1e-3), "SEP ρ={rho} {name}: {t:?}");
        }
    }
}

#[test]
fn pcrw_is_stationary_and_symmetric() {
    for rho in [0.4, 1.5] {
        for (name, t) in common::stationarity_suites(Model::Pcrw, rho, 4000, 5) {
            assert!(t.passes(1e-3), "PCRW ρ={rho} {name}: {t:?}");
        }
    }
}

#[test]
fn count_law_oracle_sums_to_one() {
    let s: f64 = common::count_law(Model::Sep, 0.3, 12, 13).iter().sum();
    assert!((s - 1.0).abs() < 1e-12);
    let p: f64 = common::count_law(Model::Pcrw, 2.0, 5, 60).iter().sum();
    assert!((p - 1.0).abs() < 1e-12);
}
