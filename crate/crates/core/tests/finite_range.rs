mod common;

use common::{one_step_right, sep};
use driftlab::env::Model;
use driftlab::finite_range::{estimate_vl, regeneration_check, run_density_family, run_finite_range, RangeL, RangeLParams};
use driftlab::walk::run_annealed;

#[test]
fn long_range_reproduces_the_plain_walk() {
    let m = sep(0.45, 0.8, 0.2);
    for seed in 0..20 {
        let (a, _) = run_annealed(&m.env, &m.walk, 300, seed, m.options).unwrap();
        let (b, blocks) = run_finite_range(&RangeLParams::new(m, RangeL::Finite(1000)).unwrap(), 300, seed).unwrap();
        let (c, _) = run_finite_range(&RangeLParams::new(m, RangeL::Infinite).unwrap(), 300, seed).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(blocks.0.is_empty());
    }
}

#[test]
fn unit_range_is_the_one_step_law() {
    let m = sep(0.3, 0.9, 0.2);
    let e = estimate_vl(&RangeLParams::new(m, RangeL::Finite(1)).unwrap(), 20_000, 3).unwrap();
    let q = one_step_right(Model::Sep, 0.3, 0.9, 0.2);
    assert!(e.within(2.0 * q - 1.0, 3.0), "{e:?}");
}

#[test]
fn blocks_renew() {
    let p = RangeLParams::new(sep(0.5, 0.8, 0.2), RangeL::Finite(50)).unwrap();
    let r = regeneration_check(&p, 4, 1500, 6).unwrap();
    assert!(r.autocorrelation_ok(3.0), "{r:?}");
    assert!(r.variance_ratio_ok(0.15), "{r:?}");
}

#[test]
fn block_increments_add_up() {
    let p = RangeLParams::new(sep(0.6, 0.8, 0.3), RangeL::Finite(16)).unwrap();
    let (t, b) = run_finite_range(&p, 100, 12).unwrap();
    assert_eq!(b.0.len(), 6);
    assert_eq!(b.0.iter().sum::<i64>(), t.position(96));
    let fam = run_density_family(&p, &[0.1, 0.6, 0.95], 100, 12).unwrap();
    assert_eq!(fam.trajectories[1], t);
    assert_eq!(fam.order_violations, 0);
}
