mod common;

use driftlab::couplings::*;
use driftlab::env::{sample_ordered_pair, EnvParams, LatticeWindow};
use driftlab::finite_range::{estimate_vl, RangeL, RangeLParams};
use driftlab::rng::{replication_seed, RngStream};
use driftlab::stats::chi_square_two_sample;
use rayon::prelude::*;

fn small_covering() -> (CoveringConfig, LatticeWindow) {
    let (nu, t, w) = (0.25, 81.0, 48);
    let h = (4.0 * nu * t) as i64 + w;
    let cfg = CoveringConfig { probe: Some(w), ..CoveringConfig::new(0.3, 0.2, nu, t, h) };
    (cfg, LatticeWindow::new(h as usize + 32).unwrap())
}

#[test]
fn coupled_layers_keep_their_marginal_laws() {
    let (cfg, window) = small_covering();
    let (high, low) = sample_covering_pair(&cfg, window, 0.7, 0.15, &mut RngStream::derive(1, &[0])).unwrap();
    let reps = 3000u64;
    let reports: Vec<CouplingReport> =
        (0..reps).into_par_iter().map(|r| covering_coupling(&high, &low, &cfg, replication_seed(2, r)).unwrap()).collect();
    let interval = (-cfg.probe.unwrap(), cfg.probe.unwrap());
    let times = reports[0].probe_times.clone();
    for (layer, init) in [(Layer::High, &high), (Layer::Low, &low)] {
        let direct: Vec<Vec<u32>> =
            (0..reps).into_par_iter().map(|r| direct_marginals(init, cfg.nu, &times, interval, replication_seed(3, r)).unwrap()).collect();
        for k in 0..times.len() {
            let bins = (interval.1 - interval.0 + 2) as usize;
            let mut a = vec![0u64; bins];
            let mut b = vec![0u64; bins];
            for rep in &reports {
                let s = rep.marginal_samples.iter().find(|m| m.layer == layer && m.time_index == k).unwrap();
                a[s.count as usize] += 1;
            }
            for d in &direct {
                b[d[k] as usize] += 1;
            }
            let t = chi_square_two_sample(&a, &b, 20).unwrap();
            assert!(t.passes(1e-3), "{layer:?} at t={}: {t:?}", times[k]);
        }
    }
}

#[test]
fn thinning_marks_are_fair_coins() {
    let (cfg, window) = small_covering();
    let reports: Vec<CouplingReport> = (0..200u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::derive(r, &[1]);
            let (high, low) = sample_covering_pair(&cfg, window, 0.7, 0.15, &mut rng).unwrap();
            covering_coupling(&high, &low, &cfg, replication_seed(5, r)).unwrap()
        })
        .collect();
    let tally: Tally = reports.iter().collect();
    let (kept, total) = tally.thinning.totals();
    assert!(total > 10_000);
    let z = (kept as f64 - total as f64 / 2.0) / (total as f64 / 4.0).sqrt();
    assert!(z.abs() < 4.0, "z = {z}");
    // Per-edge chi-square over edges with enough marks.
    let (mut stat, mut dof) = (0.0, 0.0);
    for (&r, &n) in tally.thinning.retained.iter().zip(&tally.thinning.total) {
        if n >= 40 {
            let e = n as f64 / 2.0;
            stat += (r as f64 - e).powi(2) / (n as f64 / 4.0);
            dof += 1.0;
        }
    }
    assert!(dof > 50.0);
    assert!((stat - dof).abs() < 5.0 * (2.0 * dof).sqrt(), "χ² = {stat} on {dof}");
    assert_eq!(tally.coalescence_violations, 0);
}

#[test]
fn drift_and_sprinkler_basics() {
    let drift = DriftConfig { nu: 1.0, h: 120, t: 20.0, k: 1 };
    let params = EnvParams::sep(0.3, 1.0).unwrap();
    let window = LatticeWindow::new(200).unwrap();
    let reports: Vec<CouplingReport> = (0..200u64)
        .into_par_iter()
        .map(|r| {
            let (low, high) = sample_ordered_pair(&params, 0.6, window, &mut RngStream::derive(r, &[2])).unwrap();
            drift_coupling(&low, &high, &drift, r).unwrap()
        })
        .collect();
    let tally: Tally = reports.iter().collect();
    assert!(1.0 - tally.frequency("sustained") <= drift_failure_bound(1, 1.0, 20.0) + 3.0 * tally.stderr("sustained"));
    assert_eq!(tally.coalescence_violations, 0);

    let sp = SprinklerConfig { nu: 1.0, rho: 0.3, ell: 1, h: 40 };
    let w = LatticeWindow::new(60).unwrap();
    let reports: Vec<CouplingReport> = (0..2000u64)
        .into_par_iter()
        .map(|r| {
            let (high, low) = sample_sprinkler_pair(&sp, w, 0.5, &mut RngStream::derive(r, &[3])).unwrap();
            sprinkler_coupling(&high, &low, &sp, r).unwrap()
        })
        .collect();
    let tally: Tally = reports.iter().collect();
    let delta = sprinkler_delta(1.0, 0.3, 1);
    assert!(tally.frequency("target_0") >= 2.0 * delta - 3.0 * tally.stderr("target_0"));
    assert_eq!(tally.frequency("dominated"), 1.0);
}

#[test]
fn surgery_needs_its_second_step() {
    let base = SurgeryConfig {
        rho: 0.3,
        eps: 0.2,
        nu: 0.25,
        h1: 2700,
        h2: 6600,
        t: 2400.0,
        mesh: 6,
        t1: None,
        repair: RepairPlan { piece: 24, tau: 256.0, stages: 4 },
        policy: Policy::BestEffort,
    };
    let window = LatticeWindow::new(6664).unwrap();
    let run = |cfg: &SurgeryConfig| -> Tally {
        let reports: Vec<CouplingReport> = (0..12u64)
            .into_par_iter()
            .map(|r| {
                let (high, low) = sample_surgery_pair(cfg, window, 0.7, 0.15, &mut RngStream::derive(r, &[4])).unwrap();
                surgery_coupling(&high, &low, cfg, r).unwrap()
            })
            .collect();
        reports.iter().collect()
    };
    let with = run(&base);
    let without = run(&SurgeryConfig { repair: RepairPlan { stages: 0, ..base.repair }, ..base });
    assert!(with.frequency("outer_final") >= 0.9, "{with:?}");
    assert!(with.frequency("inner_sustained") >= 0.9, "{with:?}");
    assert!(without.frequency("outer_final") <= 0.25, "{without:?}");
    assert_eq!(with.coalescence_violations + without.coalescence_violations, 0);
}

fn scale(f: u64) -> ScaleConfig {
    ScaleConfig { model: common::sep(0.2, 0.8, 0.2), eps: 0.5, l: 400, f, mesh: None, policy: Policy::BestEffort }
}

#[test]
fn scale_coupling_keeps_the_gap_on_its_good_event() {
    let cfg = scale(512);
    let runs: Vec<ScaleCoupling> = (0..40u64).into_par_iter().map(|r| sprinkled_scale_coupling(&cfg, replication_seed(8, r)).unwrap()).collect();
    let good = runs.iter().filter(|r| r.good()).count();
    assert!(good >= 30, "good on {good} of 40");
    for r in runs.iter().filter(|r| r.good()) {
        assert!(r.min_gap >= -2 * cfg.t() as i64, "min gap {}", r.min_gap);
    }
    assert!(runs.iter().all(|r| r.coalescence_violations == 0));

    // The first walk is a range-L walk over two blocks.
    let ends: Vec<f64> = runs.iter().map(|r| r.traj1.end() as f64 / 800.0).collect();
    let m = ends.iter().sum::<f64>() / ends.len() as f64;
    let var = ends.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (ends.len() - 1) as f64;
    let vl = estimate_vl(&RangeLParams::new(cfg.model, RangeL::Finite(400)).unwrap(), 200, 77).unwrap();
    let se = (var / ends.len() as f64 + vl.stderr * vl.stderr).sqrt();
    assert!((m - vl.mean).abs() <= 3.0 * se, "{m} vs {:?}", vl);
}

#[test]
fn small_gap_scale_rarely_falls_behind() {
    let cfg = scale(64);
    let runs: Vec<ScaleCoupling> = (0..40u64).into_par_iter().map(|r| sprinkled_scale_coupling(&cfg, replication_seed(9, r)).unwrap()).collect();
    let behind = runs.iter().filter(|r| r.min_gap <= -64).count();
    assert!(behind <= 2, "{behind} of 40 fell behind by f");
}
