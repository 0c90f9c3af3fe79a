//! Monte Carlo estimators of hitting probabilities, speeds and the critical
//! density.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{self, DriverKind};
use crate::error::{Error, Result};
use crate::finite_range::{run_density_family, RangeL, RangeLParams};
use crate::rng::replication_seed;
use crate::stats::{estimate_batch_means, estimate_mean, estimate_proportion, EstimateWithCI};
use crate::walk::{arrow, run_annealed, ArrowSource, Arrows, HitTime, ModelParams};

/// Horizon multiplier: a replication of the `n`-level exit problem runs for
/// at most `100·n²` steps.
pub const EXIT_HORIZON_FACTOR: u64 = 100;

/// Which barrier of `[−down, up]` the walk from 0 reached first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exit {
    Up(u64),
    Down(u64),
    /// Neither barrier within the horizon.
    Neither(u64),
}

/// Runs the annealed walk from the origin until it leaves `(−down, up)` or
/// `horizon` steps have passed.
pub fn first_exit(model: &ModelParams, up: i64, down: i64, horizon: u64, seed: u64) -> Result<Exit> {
    if up < 1 || down < 1 {
        return Err(Error::param("barriers must be at distance at least 1"));
    }
    let arrows = ArrowSource::new(seed);
    // The cloud of walks needs its horizon up front; try a short one first.
    // Its particles are keyed independently of the horizon, so the longer
    // attempt replays the same path.
    let tries: Vec<u64> = match (model.env.model, model.options.driver) {
        (crate::env::Model::Pcrw, DriverKind::Lazy) => {
            let short = (4 * (up.max(down) as u64).pow(2) + 64).min(horizon);
            if short < horizon {
                vec![short, horizon]
            } else {
                vec![horizon]
            }
        }
        _ => vec![horizon],
    };
    let mut out = Exit::Neither(horizon);
    for h in tries {
        let mut env = driver::build(&model.env, seed, 0, h, model.options)?;
        let mut x = 0i64;
        out = Exit::Neither(h);
        for t in 0..h {
            let occ = env.occupancy(x, t)?;
            x += arrow(occ, arrows.u(x, t), &model.walk) as i64;
            if x == up {
                out = Exit::Up(t + 1);
                break;
            }
            if x == -down {
                out = Exit::Down(t + 1);
                break;
            }
        }
        if !matches!(out, Exit::Neither(_)) {
            break;
        }
    }
    Ok(out)
}

/// A probability estimate together with the replications in which neither
/// barrier was reached. Those count as failures of the event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEstimate {
    pub estimate: EstimateWithCI,
    pub unresolved: u64,
}

fn exit_probability(model: &ModelParams, up: i64, down: i64, reps: u64, seed: u64, want_up: bool) -> Result<ProbabilityEstimate> {
    let n = up.max(down) as u64;
    let horizon = EXIT_HORIZON_FACTOR * n * n;
    let exits = (0..reps)
        .into_par_iter()
        .map(|r| first_exit(model, up, down, horizon, replication_seed(seed, r)))
        .collect::<Result<Vec<Exit>>>()?;
    let hits = exits
        .iter()
        .filter(|e| matches!((e, want_up), (Exit::Up(_), true) | (Exit::Down(_), false)))
        .count() as u64;
    let unresolved = exits.iter().filter(|e| matches!(e, Exit::Neither(_))).count() as u64;
    Ok(ProbabilityEstimate { estimate: estimate_proportion(hits, reps, 0.95, seed)?.with_horizon(horizon), unresolved })
}

/// `θ_n(ρ) = P(H_n < H_{−1})`.
pub fn estimate_theta_n(model: &ModelParams, n: u64, reps: u64, seed: u64) -> Result<ProbabilityEstimate> {
    if n < 1 {
        return Err(Error::param("n must be at least 1"));
    }
    exit_probability(model, n as i64, 1, reps, seed, true)
}

/// `P(H_{−n} < H_1)`.
pub fn estimate_backtracking(model: &ModelParams, n: u64, reps: u64, seed: u64) -> Result<ProbabilityEstimate> {
    if n < 1 {
        return Err(Error::param("n must be at least 1"));
    }
    exit_probability(model, 1, n as i64, reps, seed, false)
}

/// `θ_n` for several `n` on shared replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaProfile {
    pub ns: Vec<u64>,
    pub estimates: Vec<EstimateWithCI>,
    /// Replications where `{H_m < H_{−1}}` held but `{H_n < H_{−1}}` failed
    /// for some `n < m`.
    pub nesting_violations: u64,
}

pub fn theta_profile(model: &ModelParams, ns: &[u64], reps: u64, seed: u64) -> Result<ThetaProfile> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::param("levels must be positive"));
    }
    let mut ns = ns.to_vec();
    ns.sort_unstable();
    ns.dedup();
    let top = *ns.last().expect("non-empty");
    let horizon = EXIT_HORIZON_FACTOR * top * top;
    let levels: Vec<i64> = ns.iter().map(|&n| n as i64).chain([-1]).collect();
    let rows = (0..reps)
        .into_par_iter()
        .map(|r| {
            let s = replication_seed(seed, r);
            let hits = first_hits(model, &levels, top as i64, horizon, s)?;
            let down = hits[&-1];
            Ok(ns.iter().map(|&n| hits[&(n as i64)].before(&down)).collect::<Vec<bool>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let nesting_violations = rows.iter().filter(|row| row.windows(2).any(|w| !w[0] && w[1])).count() as u64;
    let estimates = (0..ns.len())
        .map(|i| {
            let k = rows.iter().filter(|row| row[i]).count() as u64;
            estimate_proportion(k, reps, 0.95, seed).map(|e| e.with_horizon(horizon))
        })
        .collect::<Result<_>>()?;
    Ok(ThetaProfile { ns, estimates, nesting_violations })
}

/// Hitting times of `levels` for a walk stopped on leaving `(−1, top)`.
fn first_hits(model: &ModelParams, levels: &[i64], top: i64, horizon: u64, seed: u64) -> Result<BTreeMap<i64, HitTime>> {
    let arrows = ArrowSource::new(seed);
    let mut env = driver::build(&model.env, seed, 0, horizon, model.options)?;
    let mut out: BTreeMap<i64, HitTime> = levels.iter().map(|&k| (k, HitTime::NotWithin(horizon))).collect();
    let mut x = 0i64;
    for t in 0..horizon {
        let occ = env.occupancy(x, t)?;
        x += arrow(occ, arrows.u(x, t), &model.walk) as i64;
        if let Some(h) = out.get_mut(&x) {
            if matches!(h, HitTime::NotWithin(_)) {
                *h = HitTime::At(t + 1);
            }
        }
        if x == top || x == -1 {
            break;
        }
    }
    Ok(out)
}

/// Batches used for the standard error of speed estimates.
pub const SPEED_BATCHES: usize = 32;

/// `X_n / n` averaged over independent annealed replications.
pub fn estimate_speed(model: &ModelParams, n: u64, reps: u64, seed: u64) -> Result<EstimateWithCI> {
    let xs = speed_samples(model, n, 0..reps, seed)?;
    speed_estimate(&xs, n, seed)
}

fn speed_samples(model: &ModelParams, n: u64, reps: std::ops::Range<u64>, seed: u64) -> Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::param("n must be at least 1"));
    }
    reps.into_par_iter()
        .map(|r| {
            run_annealed(&model.env, &model.walk, n, replication_seed(seed, r), model.options)
                .map(|(t, _)| t.end() as f64 / n as f64)
        })
        .collect()
}

fn speed_estimate(xs: &[f64], n: u64, seed: u64) -> Result<EstimateWithCI> {
    Ok(estimate_batch_means(xs, SPEED_BATCHES, 0.95, seed)?.with_horizon(n))
}

/// Speeds at increasing densities from shared arrows and ordered
/// environments, with the pathwise ordering certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedScan {
    pub rhos: Vec<f64>,
    pub estimates: Vec<EstimateWithCI>,
    /// Paired estimates of `v(ρ_{i+1}) − v(ρ_i)`.
    pub differences: Vec<EstimateWithCI>,
    /// Replications in which `X_n` failed to be nondecreasing in the density
    /// at some time.
    pub order_violations: u64,
}

pub fn monotone_speed_scan(model: &ModelParams, rhos: &[f64], n: u64, reps: u64, seed: u64) -> Result<SpeedScan> {
    if rhos.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("densities must be strictly increasing"));
    }
    if model.env.model == crate::env::Model::Pcrw && model.options.driver == DriverKind::Windowed {
        return Err(Error::param("the windowed cloud is not coupled across densities; use the lazy driver"));
    }
    let params = RangeLParams { model: *model, range: RangeL::Infinite };
    let runs = (0..reps)
        .into_par_iter()
        .map(|r| {
            let fam = run_density_family(&params, rhos, n, replication_seed(seed, r))?;
            let ends: Vec<f64> = fam.trajectories.iter().map(|t| t.end() as f64 / n as f64).collect();
            Ok((ends, fam.order_violations))
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |i: usize| runs.iter().map(|(e, _)| e[i]).collect::<Vec<f64>>();
    let estimates = (0..rhos.len()).map(|i| speed_estimate(&column(i), n, seed)).collect::<Result<_>>()?;
    let differences = (1..rhos.len())
        .map(|i| {
            let d: Vec<f64> = runs.iter().map(|(e, _)| e[i] - e[i - 1]).collect();
            estimate_mean(&d, 0.95, seed).map(|e| e.with_horizon(n))
        })
        .collect::<Result<_>>()?;
    Ok(SpeedScan {
        rhos: rhos.to_vec(),
        estimates,
        differences,
        order_violations: runs.iter().filter(|(_, v)| *v > 0).count() as u64,
    })
}

/// Sign of the speed at a probe, or `None` when it is not resolved at the
/// required number of standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub rho: f64,
    pub estimate: EstimateWithCI,
    pub sign: Option<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoCConfig {
    /// First batch of replications at each probe.
    pub reps_per_probe: u64,
    /// Sequential sampling stops here and declares the probe unresolved.
    pub max_reps_per_probe: u64,
    /// Replications over all probes.
    pub total_budget: u64,
    pub tol: f64,
    /// Standard errors required to call a sign.
    pub z: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Default for RhoCConfig {
    fn default() -> Self {
        RhoCConfig { reps_per_probe: 8, max_reps_per_probe: 64, total_budget: 2000, tol: 0.05, z: 3.0, lo: 0.0, hi: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoCVerdict {
    /// `v̂(lo) < 0 < v̂(hi)` at the stated confidence.
    Bracket,
    /// The speed is positive at both ends.
    NoSignChangePositive,
    /// The speed is negative at both ends.
    NoSignChangeNegative,
    /// An end could not be resolved.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoCBracket {
    pub verdict: RhoCVerdict,
    pub lo: f64,
    pub hi: f64,
    pub resolution: f64,
    /// Speed estimates at `lo` and `hi`.
    pub evidence: (EstimateWithCI, EstimateWithCI),
    pub probes: Vec<Probe>,
    /// The bracket stopped shrinking because probes near the middle stayed
    /// unresolved.
    pub near_critical: bool,
    pub budget_exhausted: bool,
}

impl RhoCBracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, rho: f64) -> bool {
        self.verdict == RhoCVerdict::Bracket && self.lo <= rho && rho <= self.hi
    }
}

struct ProbeRunner<'a> {
    model: &'a ModelParams,
    n: u64,
    seed: u64,
    cfg: RhoCConfig,
    spent: u64,
    cache: Vec<Probe>,
}

impl ProbeRunner<'_> {
    fn probe(&mut self, rho: f64) -> Result<Probe> {
        if let Some(p) = self.cache.iter().find(|p| p.rho == rho) {
            return Ok(p.clone());
        }
        let mut model = *self.model;
        model.env.boundary_mode = true;
        let model = model.with_rho(rho)?;
        let mut xs: Vec<f64> = Vec::new();
        let mut want = self.cfg.reps_per_probe.max(2);
        loop {
            let have = xs.len() as u64;
            let take = (want - have).min(self.cfg.total_budget.saturating_sub(self.spent));
            xs.extend(speed_samples(&model, self.n, have..have + take, self.seed)?);
            self.spent += take;
            if xs.len() < 2 {
                return Err(Error::Budget("no replications left for a probe".into()));
            }
            let est = speed_estimate(&xs, self.n, self.seed)?;
            let resolved = est.mean.abs() > self.cfg.z * est.stderr;
            let capped = want >= self.cfg.max_reps_per_probe || self.spent >= self.cfg.total_budget;
            if resolved || capped {
                let sign = resolved.then(|| if est.mean > 0.0 { 1 } else { -1 });
                let p = Probe { rho, estimate: est, sign };
                self.cache.push(p.clone());
                return Ok(p);
            }
            want = (want * 2).min(self.cfg.max_reps_per_probe);
        }
    }

    fn exhausted(&self) -> bool {
        self.spent >= self.cfg.total_budget
    }
}

/// Locates the sign change of `ρ ↦ v(ρ)` by bisection with sequentially
/// sampled probes. A probe whose sign is not resolved is replaced by the
/// two probes a quarter width to either side.
pub fn estimate_rho_c(model: &ModelParams, n: u64, cfg: RhoCConfig, seed: u64) -> Result<RhoCBracket> {
    if cfg.tol < 1e-3 {
        return Err(Error::param("tolerance must be at least 1e-3"));
    }
    if !(cfg.lo < cfg.hi) {
        return Err(Error::param("need lo < hi"));
    }
    let mut run = ProbeRunner { model, n, seed, cfg, spent: 0, cache: Vec::new() };
    let mut lo = run.probe(cfg.lo)?;
    let mut hi = run.probe(cfg.hi)?;
    let finish = |verdict, lo: Probe, hi: Probe, run: ProbeRunner, near_critical| RhoCBracket {
        verdict,
        lo: lo.rho,
        hi: hi.rho,
        resolution: hi.rho - lo.rho,
        evidence: (lo.estimate, hi.estimate),
        budget_exhausted: run.exhausted(),
        probes: run.cache,
        near_critical,
    };
    match (lo.sign, hi.sign) {
        (Some(1), Some(1)) => return Ok(finish(RhoCVerdict::NoSignChangePositive, lo, hi, run, false)),
        (Some(-1), Some(-1)) => return Ok(finish(RhoCVerdict::NoSignChangeNegative, lo, hi, run, false)),
        (Some(-1), Some(1)) => {}
        _ => return Ok(finish(RhoCVerdict::Unresolved, lo, hi, run, false)),
    }
    let mut near_critical = false;
    while hi.rho - lo.rho > cfg.tol && !run.exhausted() {
        let w = hi.rho - lo.rho;
        let mid = run.probe(lo.rho + w / 2.0)?;
        match mid.sign {
            Some(-1) => lo = mid,
            Some(_) => hi = mid,
            None => {
                let left = run.probe(lo.rho + w / 4.0)?;
                let right = run.probe(lo.rho + 3.0 * w / 4.0)?;
                let mut moved = false;
                for p in [left, right] {
                    match p.sign {
                        Some(-1) if p.rho > lo.rho && p.rho < hi.rho => {
                            lo = p;
                            moved = true;
                        }
                        Some(1) if p.rho > lo.rho && p.rho < hi.rho => {
                            hi = p;
                            moved = true;
                        }
                        _ => {}
                    }
                }
                if !moved {
                    near_critical = true;
                    break;
                }
            }
        }
    }
    Ok(finish(RhoCVerdict::Bracket, lo, hi, run, near_critical))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{EnvParams, Model};
    use crate::walk::WalkParams;

    fn frozen(rho: f64, pb: f64, pc: f64) -> ModelParams {
        ModelParams::new(EnvParams::boundary(Model::Sep, rho, 1.0).unwrap(), WalkParams::new(pb, pc).unwrap()).unwrap()
    }

    #[test]
    fn gamblers_ruin_frozen() {
        let m = frozen(1.0, 0.8, 0.2);
        let e = estimate_theta_n(&m, 10, 20_000, 3).unwrap();
        let r: f64 = 0.25;
        let exact = (1.0 - r) / (1.0 - r.powi(11));
        assert!(e.estimate.within(exact, 4.0), "{:?} vs {exact}", e.estimate);
        assert_eq!(e.unresolved, 0);
    }

    #[test]
    fn frozen_bracket_verdicts() {
        let m = frozen(0.5, 0.8, 0.6);
        let cfg = RhoCConfig { lo: 0.0, hi: 1.0, ..Default::default() };
        let b = estimate_rho_c(&m, 100, cfg, 1).unwrap();
        assert_eq!(b.verdict, RhoCVerdict::NoSignChangePositive);
    }
}
