//! The range-`L` model: the environment is replaced by a fresh stationary
//! sample at every multiple of `L`, which makes the walk increments over
//! consecutive blocks i.i.d.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::driver::{self, Environment};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, domain, replication_seed};
use crate::stats::{estimate_mean, EstimateWithCI, Summary};
use crate::walk::{arrow, ArrowSource, Arrows, ModelParams, SpaceTimePoint, Trajectory};

/// Renewal period. `Infinite` is the plain model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeL {
    Finite(u64),
    Infinite,
}

impl RangeL {
    pub fn finite(self) -> Option<u64> {
        match self {
            RangeL::Finite(l) => Some(l),
            RangeL::Infinite => None,
        }
    }
}

impl fmt::Display for RangeL {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RangeL::Finite(l) => write!(f, "{l}"),
            RangeL::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for RangeL {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            RangeL::Finite(l) => s.serialize_u64(*l),
            RangeL::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for RangeL {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(0) => Err(serde::de::Error::custom("L must be at least 1")),
            Raw::N(l) => Ok(RangeL::Finite(l)),
            Raw::S(s) if s == "inf" || s == "infinity" => Ok(RangeL::Infinite),
            Raw::S(s) => Err(serde::de::Error::custom(format!("L must be a positive integer or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeLParams {
    pub model: ModelParams,
    pub range: RangeL,
}

impl RangeLParams {
    pub fn new(model: ModelParams, range: RangeL) -> Result<Self> {
        if range == RangeL::Finite(0) {
            return Err(Error::param("L must be at least 1"));
        }
        Ok(RangeLParams { model, range })
    }
}

/// `X_{kL} − X_{(k−1)L}` for the completed blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockIncrements(pub Vec<i64>);

/// Seed of the environment used during block `k`. Block 0 uses the run
/// seed itself, so a range larger than the horizon reproduces the plain
/// model path for path.
pub fn block_seed(seed: u64, k: u64) -> u64 {
    if k == 0 {
        seed
    } else {
        derive_seed(seed, &[domain::BLOCK, k])
    }
}

/// Block lengths covering `[0, n)`.
fn blocks(range: RangeL, n: u64) -> impl Iterator<Item = (u64, u64)> {
    let l = range.finite().unwrap_or(n.max(1));
    (0..n.div_ceil(l)).map(move |k| (k, (n - k * l).min(l)))
}

/// Walks `n` steps under the range-`L` law. Arrows are read at absolute
/// times; environments at block-local times.
pub fn run_finite_range(params: &RangeLParams, n: u64, seed: u64) -> Result<(Trajectory, BlockIncrements)> {
    let fam = run_density_family(params, &[params.model.env.rho], n, seed)?;
    let traj = fam.trajectories.into_iter().next().expect("one density");
    let incs = fam.blocks.into_iter().next().expect("one density");
    Ok((traj, incs))
}

/// Walks at several densities sharing arrows and per-block environment
/// seeds. The environments are ordered sitewise, so the positions are
/// ordered in the density at all times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityFamily {
    pub rhos: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
    pub blocks: Vec<BlockIncrements>,
    /// Times at which a lower density was strictly right of a higher one.
    pub order_violations: u64,
}

pub fn run_density_family(params: &RangeLParams, rhos: &[f64], n: u64, seed: u64) -> Result<DensityFamily> {
    if rhos.is_empty() {
        return Err(Error::param("no densities given"));
    }
    if rhos.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("densities must be nondecreasing"));
    }
    let models = rhos.iter().map(|&r| params.model.with_rho(r)).collect::<Result<Vec<_>>>()?;
    let arrows = ArrowSource::new(seed);
    let m = rhos.len();
    let mut pos = vec![0i64; m];
    let mut trajs: Vec<Trajectory> =
        (0..m).map(|_| Trajectory { start: SpaceTimePoint::origin(), steps: Vec::with_capacity(n as usize) }).collect();
    let mut incs = vec![Vec::new(); m];
    let full = params.range.finite();
    let mut violations = 0u64;
    let mut t0 = 0u64;
    for (k, len) in blocks(params.range, n) {
        let bs = block_seed(seed, k);
        let mut envs: Vec<Box<dyn Environment>> = models
            .iter()
            .zip(&pos)
            .map(|(mp, &x)| driver::build(&mp.env, bs, x, len, mp.options))
            .collect::<Result<_>>()?;
        let before = pos.clone();
        for s in 0..len {
            for i in 0..m {
                let occ = envs[i].occupancy(pos[i], s)?;
                let step = arrow(occ, arrows.u(pos[i], t0 + s), &models[i].walk);
                pos[i] += step as i64;
                trajs[i].steps.push(step);
            }
            violations += pos.windows(2).filter(|w| w[0] > w[1]).count() as u64;
        }
        if full.is_some_and(|l| l == len) {
            for i in 0..m {
                incs[i].push(pos[i] - before[i]);
            }
        }
        t0 += len;
    }
    Ok(DensityFamily {
        rhos: rhos.to_vec(),
        trajectories: trajs,
        blocks: incs.into_iter().map(BlockIncrements).collect(),
        order_violations: violations,
    })
}

fn require_finite(params: &RangeLParams) -> Result<u64> {
    params.range.finite().ok_or_else(|| Error::param("the range-L speed needs a finite L"))
}

/// `v_L(ρ) = E[X_L / L]`, one independent replication per seed epoch.
pub fn estimate_vl(params: &RangeLParams, reps: u64, seed: u64) -> Result<EstimateWithCI> {
    let l = require_finite(params)?;
    let xs = (0..reps)
        .into_par_iter()
        .map(|r| run_finite_range(params, l, replication_seed(seed, r)).map(|(t, _)| t.end() as f64 / l as f64))
        .collect::<Result<Vec<f64>>>()?;
    Ok(estimate_mean(&xs, 0.95, seed)?.with_horizon(l))
}

/// Diagnostics for the i.i.d. structure of the block increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerationReport {
    pub k_blocks: u64,
    pub reps: u64,
    /// Pooled lag-1 autocorrelation of consecutive block increments.
    pub autocorrelation: f64,
    pub autocorrelation_se: f64,
    /// `Var(X_{kL}) / Var(X_L)`; `k` for i.i.d. blocks.
    pub variance_ratio: f64,
    pub block_mean: f64,
    pub block_variance: f64,
}

impl RegenerationReport {
    pub fn autocorrelation_ok(&self, k_se: f64) -> bool {
        self.autocorrelation.abs() <= k_se * self.autocorrelation_se
    }

    pub fn variance_ratio_ok(&self, rel_tol: f64) -> bool {
        let k = self.k_blocks as f64;
        (self.variance_ratio - k).abs() <= rel_tol * k
    }
}

pub fn regeneration_check(params: &RangeLParams, k_blocks: u64, reps: u64, seed: u64) -> Result<RegenerationReport> {
    let l = require_finite(params)?;
    if k_blocks < 2 {
        return Err(Error::param("need at least two blocks"));
    }
    if reps < 2 {
        return Err(Error::param("need at least two replications"));
    }
    let runs = (0..reps)
        .into_par_iter()
        .map(|r| run_finite_range(params, k_blocks * l, replication_seed(seed, r)).map(|(_, b)| b.0))
        .collect::<Result<Vec<Vec<i64>>>>()?;
    let all: Summary = runs.iter().flatten().map(|&d| d as f64).collect();
    let m = all.mean;
    let (mut num, mut pairs) = (0.0, 0u64);
    for b in &runs {
        for w in b.windows(2) {
            num += (w[0] as f64 - m) * (w[1] as f64 - m);
            pairs += 1;
        }
    }
    let den = all.variance() * (all.n as f64 - 1.0) / all.n as f64;
    let autocorrelation = if den > 0.0 { num / pairs as f64 / den } else { 0.0 };
    let first: Summary = runs.iter().map(|b| b[0] as f64).collect();
    let total: Summary = runs.iter().map(|b| b.iter().sum::<i64>() as f64).collect();
    let variance_ratio = if first.variance() > 0.0 { total.variance() / first.variance() } else { f64::NAN };
    Ok(RegenerationReport {
        k_blocks,
        reps,
        autocorrelation,
        autocorrelation_se: 1.0 / (pairs as f64).sqrt(),
        variance_ratio,
        block_mean: m,
        block_variance: all.variance(),
    })
}
