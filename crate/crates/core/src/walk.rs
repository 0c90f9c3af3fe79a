//! The walk as a deterministic function of an environment and a fixed field of
//! uniforms indexed by space-time points.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::driver::{self, DriverKind, Environment};
use crate::env::EnvParams;
use crate::error::{Error, Result};
use crate::rng::{domain, signed, uniform};

/// A point `(x, n)` of space-time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpaceTimePoint {
    pub x: i64,
    pub n: u64,
}

impl SpaceTimePoint {
    /// A point of the even sublattice (`x + n` even).
    pub fn new(x: i64, n: u64) -> Result<Self> {
        let w = SpaceTimePoint { x, n };
        if !w.in_lattice() {
            return Err(Error::param(format!("({x}, {n}) is off the lattice: x + n must be even")));
        }
        Ok(w)
    }

    pub fn origin() -> Self {
        SpaceTimePoint { x: 0, n: 0 }
    }

    #[inline]
    pub fn in_lattice(&self) -> bool {
        (self.x + self.n as i64).rem_euclid(2) == 0
    }
}

/// Jump probabilities on occupied (`p_bullet`) and empty (`p_circ`) sites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub p_bullet: f64,
    pub p_circ: f64,
}

impl WalkParams {
    pub fn new(p_bullet: f64, p_circ: f64) -> Result<Self> {
        let w = WalkParams { p_bullet, p_circ };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let open = |p: f64| p > 0.0 && p < 1.0;
        if !open(self.p_bullet) || !open(self.p_circ) {
            return Err(Error::param("jump probabilities must lie in (0,1)"));
        }
        if self.p_bullet <= self.p_circ {
            return Err(Error::param(format!(
                "need p_bullet > p_circ, got {} ≤ {}",
                self.p_bullet, self.p_circ
            )));
        }
        Ok(())
    }

    /// Probability of a right step from a site with occupancy `occ`.
    #[inline]
    pub fn right_prob(&self, occ: u32) -> f64 {
        if occ > 0 {
            self.p_bullet
        } else {
            self.p_circ
        }
    }

    /// One-step right probability averaged over a density-`ρ` site
    /// occupation probability `p_occ`.
    pub fn mixed(&self, p_occ: f64) -> f64 {
        p_occ * self.p_bullet + (1.0 - p_occ) * self.p_circ
    }
}

/// `+1` iff `u ≤ (p∘ − p•)·1{occ = 0} + p•`.
#[inline]
pub fn arrow(occ: u32, u: f64, params: &WalkParams) -> i8 {
    if u <= params.right_prob(occ) {
        1
    } else {
        -1
    }
}

/// A field of uniforms indexed by space-time.
pub trait Arrows: Sync {
    fn u(&self, x: i64, n: u64) -> f64;
}

/// `U_w` as a pure function of `(seed, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrowSource {
    pub seed: u64,
}

impl ArrowSource {
    pub fn new(seed: u64) -> Self {
        ArrowSource { seed }
    }

    pub fn arrow(&self, occ: u32, w: SpaceTimePoint, params: &WalkParams) -> i8 {
        arrow(occ, self.u(w.x, w.n), params)
    }
}

impl Arrows for ArrowSource {
    #[inline]
    fn u(&self, x: i64, n: u64) -> f64 {
        uniform(self.seed, &[domain::ARROWS, signed(x), n])
    }
}

/// Reads another field with a spatial shift from time `from` on:
/// `U'(x, s) = U(x − shift, s)` for `s ≥ from`, `U(x, s)` before.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedArrows<A> {
    pub base: A,
    pub shift: i64,
    pub from: u64,
}

impl<A: Arrows> Arrows for ShiftedArrows<A> {
    fn u(&self, x: i64, n: u64) -> f64 {
        if n >= self.from {
            self.base.u(x - self.shift, n)
        } else {
            self.base.u(x, n)
        }
    }
}

/// A nearest-neighbour path on the space-time lattice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: SpaceTimePoint,
    pub steps: Vec<i8>,
}

impl Trajectory {
    pub fn new(start: SpaceTimePoint) -> Self {
        Trajectory { start, steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `X_0, …, X_n`.
    pub fn positions(&self) -> Vec<i64> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut x = self.start.x;
        out.push(x);
        for &s in &self.steps {
            x += s as i64;
            out.push(x);
        }
        out
    }

    pub fn end(&self) -> i64 {
        self.start.x + self.steps.iter().map(|&s| s as i64).sum::<i64>()
    }

    /// `X_k`, the position after `k` steps.
    pub fn position(&self, k: usize) -> i64 {
        self.start.x + self.steps[..k].iter().map(|&s| s as i64).sum::<i64>()
    }

    /// Displacement `X_n − X_0`.
    pub fn displacement(&self) -> i64 {
        self.end() - self.start.x
    }

    /// Checks unit increments and lattice parity at every time.
    pub fn check_invariants(&self) -> Result<()> {
        if !self.start.in_lattice() {
            return Err(Error::pre("start off the lattice"));
        }
        let mut x = self.start.x;
        for (k, &s) in self.steps.iter().enumerate() {
            if s != 1 && s != -1 {
                return Err(Error::pre(format!("step {k} is {s}")));
            }
            x += s as i64;
            if (x + self.start.n as i64 + k as i64 + 1).rem_euclid(2) != 0 {
                return Err(Error::pre(format!("parity broken after step {k}")));
            }
        }
        Ok(())
    }
}

/// First passage time to a level, or the statement that the level was not
/// reached within the observed horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitTime {
    At(u64),
    NotWithin(u64),
}

impl HitTime {
    pub fn time(&self) -> Option<u64> {
        match *self {
            HitTime::At(t) => Some(t),
            HitTime::NotWithin(_) => None,
        }
    }

    /// `self < other` with unhit levels treated as infinite.
    pub fn before(&self, other: &HitTime) -> bool {
        match (self.time(), other.time()) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            _ => false,
        }
    }
}

/// First hitting time `H_k` of every level `k` in `levels`.
pub fn hitting_times(traj: &Trajectory, levels: &[i64]) -> BTreeMap<i64, HitTime> {
    let horizon = traj.len() as u64;
    let mut out: BTreeMap<i64, HitTime> = levels.iter().map(|&k| (k, HitTime::NotWithin(horizon))).collect();
    for (n, x) in traj.positions().into_iter().enumerate() {
        if let Some(h) = out.get_mut(&x) {
            if matches!(h, HitTime::NotWithin(_)) {
                *h = HitTime::At(n as u64);
            }
        }
    }
    out
}

/// `H_k` of a single level.
pub fn first_hit(traj: &Trajectory, level: i64) -> HitTime {
    let mut x = traj.start.x;
    if x == level {
        return HitTime::At(0);
    }
    for (n, &s) in traj.steps.iter().enumerate() {
        x += s as i64;
        if x == level {
            return HitTime::At(n as u64 + 1);
        }
    }
    HitTime::NotWithin(traj.len() as u64)
}

/// Runs `n` steps of the walk from `start` on `env`; the `k`-th step reads
/// the environment and the arrow at absolute time `start.n + k`.
pub fn run_quenched<E: Environment + ?Sized, A: Arrows + ?Sized>(
    env: &mut E,
    start: SpaceTimePoint,
    n: u64,
    arrows: &A,
    params: &WalkParams,
) -> Result<Trajectory> {
    if !start.in_lattice() {
        return Err(Error::param("start off the lattice"));
    }
    let mut traj = Trajectory { start, steps: Vec::with_capacity(n as usize) };
    let mut x = start.x;
    for k in 0..n {
        let t = start.n + k;
        let occ = env.occupancy(x, t)?;
        let s = arrow(occ, arrows.u(x, t), params);
        x += s as i64;
        traj.steps.push(s);
    }
    Ok(traj)
}

/// Several walks on one environment and one arrow field, stepped in lockstep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRun {
    pub trajectories: Vec<Trajectory>,
    /// Times at which a walk started to the left was strictly right of a
    /// walk started to its right.
    pub order_violations: u64,
    /// Times at which two walks that had met occupied different sites.
    pub coalescence_violations: u64,
}

pub fn run_coupled_family<E: Environment + ?Sized, A: Arrows + ?Sized>(
    env: &mut E,
    starts: &[SpaceTimePoint],
    n: u64,
    arrows: &A,
    params: &WalkParams,
) -> Result<FamilyRun> {
    if starts.is_empty() {
        return Ok(FamilyRun { trajectories: Vec::new(), order_violations: 0, coalescence_violations: 0 });
    }
    let t0 = starts[0].n;
    if starts.iter().any(|w| w.n != t0 || !w.in_lattice()) {
        return Err(Error::param("family starts must be lattice points with a common time"));
    }
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by_key(|&i| starts[i].x);
    let mut pos: Vec<i64> = starts.iter().map(|w| w.x).collect();
    let mut trajs: Vec<Trajectory> = starts.iter().map(|&w| Trajectory { start: w, steps: Vec::with_capacity(n as usize) }).collect();
    let mut met = vec![false; starts.len().saturating_sub(1)];
    let (mut ord_v, mut coal_v) = (0u64, 0u64);
    for k in 0..n {
        let t = t0 + k;
        for i in 0..pos.len() {
            let occ = env.occupancy(pos[i], t)?;
            let s = arrow(occ, arrows.u(pos[i], t), params);
            pos[i] += s as i64;
            trajs[i].steps.push(s);
        }
        for (j, w) in order.windows(2).enumerate() {
            let (a, b) = (pos[w[0]], pos[w[1]]);
            if a > b {
                ord_v += 1;
            }
            if met[j] && a != b {
                coal_v += 1;
            }
            if a == b {
                met[j] = true;
            }
        }
    }
    debug_assert_eq!(ord_v, 0);
    debug_assert_eq!(coal_v, 0);
    Ok(FamilyRun { trajectories: trajs, order_violations: ord_v, coalescence_violations: coal_v })
}

/// Half-width of a periodic window for an `n`-step walk:
/// `n + ⌈safety·(1+ν)·n⌉ + 64`.
pub fn compute_window(n: u64, nu: f64, safety: f64) -> Result<usize> {
    if n == 0 {
        return Err(Error::param("horizon must be at least 1"));
    }
    Ok(n as usize + (safety * (1.0 + nu) * n as f64).ceil() as usize + 64)
}

/// How [`run_annealed`] realizes the environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealedOptions {
    pub driver: DriverKind,
    /// Window safety factor for [`DriverKind::Windowed`].
    pub safety: f64,
}

impl Default for AnnealedOptions {
    fn default() -> Self {
        AnnealedOptions { driver: DriverKind::Lazy, safety: 4.0 }
    }
}

/// Environment, walk and driver of an annealed experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub env: EnvParams,
    pub walk: WalkParams,
    #[serde(default)]
    pub options: AnnealedOptions,
}

impl ModelParams {
    pub fn new(env: EnvParams, walk: WalkParams) -> Result<Self> {
        env.validate()?;
        walk.validate()?;
        Ok(ModelParams { env, walk, options: AnnealedOptions::default() })
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Ok(ModelParams { env: self.env.with_rho(rho)?, ..*self })
    }

    pub fn with_driver(mut self, driver: DriverKind) -> Self {
        self.options.driver = driver;
        self
    }
}

/// What the annealed runner did besides producing the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub driver: DriverKind,
    pub window_half_width: Option<usize>,
    pub env_work: u64,
    pub warnings: Vec<String>,
}

/// Samples a stationary environment, evolves it and runs the walk from the
/// origin for `n` steps. Everything is a function of `seed`.
pub fn run_annealed(
    env_params: &EnvParams,
    walk_params: &WalkParams,
    n: u64,
    seed: u64,
    opts: AnnealedOptions,
) -> Result<(Trajectory, Diagnostics)> {
    env_params.validate()?;
    walk_params.validate()?;
    let arrows = ArrowSource::new(seed);
    let mut env = driver::build(env_params, seed, 0, n, opts)?;
    let traj = run_quenched(env.as_mut(), SpaceTimePoint::origin(), n, &arrows, walk_params)?;
    let diag = Diagnostics {
        driver: opts.driver,
        window_half_width: env.window_half_width(),
        env_work: env.work(),
        warnings: env_params.warnings(),
    };
    Ok((traj, diag))
}
