//! Environments the walk can query at integer times.
//!
//! [`LazySep`] and [`ConePcrw`] realize the infinite-volume dynamics and only
//! compute what the walk reads. The windowed drivers evolve a whole periodic
//! window and serve as reference implementations.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::{stationary_site, EnvParams, EnvState, LatticeWindow, Model};
use crate::error::{Error, Result};
use crate::pcrw::{evolve_pcrw, lazy_step_from_bits};
use crate::rng::{derive_seed, domain, mix64, prf, signed, to_unit, uniform, PoissonTable, RngStream};
use crate::sep::{evolve_sep, SepClocks};
use crate::walk::{compute_window, AnnealedOptions};

/// Occupancies at integer times. Successive queries must not go back in time.
pub trait Environment {
    fn occupancy(&mut self, x: i64, t: u64) -> Result<u32>;

    fn window_half_width(&self) -> Option<usize> {
        None
    }

    /// Elementary operations spent so far (clock lookups, particle steps, events).
    fn work(&self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverKind {
    /// Infinite volume, computed on demand.
    Lazy,
    /// Periodic window sized by [`compute_window`].
    Windowed,
}

/// Uniform attached to initial site `y`; the initial occupancy is a monotone
/// function of it, so environments at different densities built from the
/// same seed are ordered sitewise.
#[inline]
pub fn initial_uniform(seed: u64, y: i64) -> f64 {
    uniform(seed, &[domain::ENV_INIT, signed(y)])
}

/// Initial configuration on a window, read from the per-site uniforms.
pub fn initial_state(params: &EnvParams, window: LatticeWindow, seed: u64) -> EnvState {
    let occ = window.sites().map(|y| stationary_site(params.model, params.rho, initial_uniform(seed, y))).collect();
    EnvState { window, model: params.model, occupancy: occ, time: 0.0 }
}

/// The occupancy never changes.
#[derive(Debug, Clone, Copy)]
pub struct Frozen {
    pub value: u32,
}

impl Environment for Frozen {
    fn occupancy(&mut self, _x: i64, _t: u64) -> Result<u32> {
        Ok(self.value)
    }
}

/// Interchange clocks and initial uniforms of an infinite SEP, evaluated
/// lazily. The clock of edge `{e, e+1}` in the unit slot `[j, j+1)` rings a
/// `Poisson(ν/2)` number of times at uniform positions, all pure functions
/// of `(seed, e, j)`.
///
/// The occupancy at `(x, t)` is the initial occupancy at the origin of the
/// interchange path through `(x, t)`, found by walking the path backwards.
#[derive(Debug, Clone)]
pub struct SepField {
    seed: u64,
    clock_key: u64,
    table: PoissonTable,
    memo: HashMap<(i64, u64), i64>,
    work: u64,
    edge_keys: [(i64, u64); 16],
}

const MEMO_STRIDE: u64 = 16;
const MEMO_KEEP: usize = 4;
const MEMO_CAP: usize = 1 << 22;
const EDGE_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const SLOT_MUL: u64 = 0x9E37_79B9_7F4A_7C15;

/// Rings of one edge in one unit slot: a count and the word their
/// positions are derived from.
#[derive(Debug, Clone, Copy)]
struct SlotRings {
    count: u32,
    word: u64,
}

impl SlotRings {
    /// Latest ring strictly before `tau`, as an offset in `[0, 1)`.
    #[inline]
    fn latest_before(self, tau: f64) -> Option<f64> {
        let mut best = -1.0f64;
        let mut h = self.word;
        for _ in 0..self.count {
            h = mix64(h.wrapping_add(SLOT_MUL));
            let s = to_unit(h);
            if s < tau && s > best {
                best = s;
            }
        }
        (best >= 0.0).then_some(best)
    }
}

impl SepField {
    pub fn new(seed: u64, nu: f64) -> Self {
        SepField {
            seed,
            clock_key: derive_seed(seed, &[domain::ENV_CLOCKS]),
            table: PoissonTable::new(0.5 * nu),
            memo: HashMap::new(),
            work: 0,
            edge_keys: [(i64::MIN, 0); 16],
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn work(&self) -> u64 {
        self.work
    }

    #[inline]
    fn rings(&mut self, e: i64, j: u64) -> SlotRings {
        let slot = &mut self.edge_keys[(e & 15) as usize];
        if slot.0 != e {
            *slot = (e, mix64(self.clock_key ^ (e as u64).wrapping_mul(EDGE_MUL)));
        }
        let word = mix64(slot.1 ^ j.wrapping_mul(SLOT_MUL));
        let count = self.table.sample(to_unit(word));
        self.work += 1 + count as u64;
        SlotRings { count, word }
    }

    /// Ring times of edge `{e, e+1}` in slot `j`, unsorted.
    pub fn slot_rings(&mut self, e: i64, j: u64) -> Vec<f64> {
        let r = self.rings(e, j);
        let mut h = r.word;
        (0..r.count)
            .map(|_| {
                h = mix64(h.wrapping_add(SLOT_MUL));
                j as f64 + to_unit(h)
            })
            .collect()
    }

    /// Position at time `j` of the path that sits at `p` at time `j + 1`.
    fn back_through_slot(&mut self, mut p: i64, j: u64) -> i64 {
        let mut left = self.rings(p - 1, j);
        let mut right = self.rings(p, j);
        if left.count == 0 && right.count == 0 {
            return p;
        }
        // Times are offsets within the slot.
        let mut tau = 1.0;
        loop {
            let a = if left.count > 0 { left.latest_before(tau) } else { None };
            let b = if right.count > 0 { right.latest_before(tau) } else { None };
            // A tie between the two edges has probability zero; it resolves left.
            match (a, b) {
                (None, None) => return p,
                (Some(a), b) if b.is_none_or(|b| a >= b) => {
                    p -= 1;
                    tau = a;
                    right = left;
                    left = self.rings(p - 1, j);
                }
                (_, Some(b)) => {
                    p += 1;
                    tau = b;
                    left = right;
                    right = self.rings(p, j);
                }
                _ => unreachable!(),
            }
        }
    }

    /// Site at time 0 of the interchange path through `(x, t)`.
    pub fn origin(&mut self, x: i64, t: u64) -> i64 {
        if let Some(&o) = self.memo.get(&(x, t)) {
            return o;
        }
        let mut p = x;
        let mut s = t;
        let mut seen: Vec<(i64, u64)> = Vec::with_capacity(MEMO_KEEP + 1);
        seen.push((x, t));
        let mut found = None;
        while s > 0 {
            p = self.back_through_slot(p, s - 1);
            s -= 1;
            if s > 0 && s % MEMO_STRIDE == 0 {
                if let Some(&o) = self.memo.get(&(p, s)) {
                    found = Some(o);
                    break;
                }
                if seen.len() <= MEMO_KEEP {
                    seen.push((p, s));
                }
            }
        }
        let o = found.unwrap_or(p);
        if self.memo.len() > MEMO_CAP {
            self.memo.clear();
        }
        for key in seen {
            self.memo.insert(key, o);
        }
        o
    }

    /// Occupancy at `(x, t)` of the environment of density `rho` built on
    /// this field.
    #[inline]
    pub fn occupancy(&mut self, model: Model, rho: f64, x: i64, t: u64) -> u32 {
        let o = self.origin(x, t);
        stationary_site(model, rho, initial_uniform(self.seed, o))
    }

    /// The configuration on `[a, b]` at time `t`.
    pub fn snapshot(&mut self, rho: f64, a: i64, b: i64, t: u64) -> Vec<u32> {
        (a..=b).map(|x| self.occupancy(Model::Sep, rho, x, t)).collect()
    }
}

/// Infinite-volume SEP at density `rho`, computed on demand.
#[derive(Debug, Clone)]
pub struct LazySep {
    pub field: SepField,
    pub rho: f64,
}

impl LazySep {
    pub fn new(params: &EnvParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if params.model != Model::Sep {
            return Err(Error::ModelMismatch { expected: Model::Sep, found: params.model });
        }
        Ok(LazySep { field: SepField::new(seed, params.nu), rho: params.rho })
    }
}

impl Environment for LazySep {
    fn occupancy(&mut self, x: i64, t: u64) -> Result<u32> {
        Ok(self.field.occupancy(Model::Sep, self.rho, x, t))
    }

    fn work(&self) -> u64 {
        self.field.work
    }
}

#[derive(Debug, Clone, Copy)]
struct ConeParticle {
    pos: i64,
    home: i64,
    index: u32,
}

/// Poisson cloud of lazy walks restricted to the particles that can reach
/// a walk started at `center` within `horizon` steps. Particle `i` of
/// initial site `y` takes its step at time `s` from `(seed, y, i, s)` alone,
/// so clouds at different densities share the trajectories of common
/// particles.
#[derive(Debug, Clone)]
pub struct ConePcrw {
    seed: u64,
    center: i64,
    horizon: u64,
    time: u64,
    lo: i64,
    counts: Vec<u32>,
    particles: Vec<ConeParticle>,
    qmin: i64,
    qmax: i64,
    work: u64,
}

impl ConePcrw {
    pub fn new(params: &EnvParams, seed: u64, center: i64, horizon: u64) -> Result<Self> {
        params.validate()?;
        if params.model != Model::Pcrw {
            return Err(Error::ModelMismatch { expected: Model::Pcrw, found: params.model });
        }
        let h = horizon as i64;
        let reach = 2 * h + 2;
        let lo = center - 3 * h - 4;
        let mut counts = vec![0u32; (6 * h + 9) as usize];
        let mut particles = Vec::new();
        for y in center - reach..=center + reach {
            let c = stationary_site(Model::Pcrw, params.rho, initial_uniform(seed, y));
            counts[(y - lo) as usize] += c;
            particles.extend((0..c).map(|index| ConeParticle { pos: y, home: y, index }));
        }
        Ok(ConePcrw { seed, center, horizon, time: 0, lo, counts, particles, qmin: i64::MAX, qmax: i64::MIN, work: 0 })
    }

    fn step(&mut self) {
        let m = 2 * (self.horizon.saturating_sub(self.time)) as i64 + 2;
        if self.qmin <= self.qmax {
            let (a, b) = (self.qmin - m, self.qmax + m);
            let (lo, counts) = (self.lo, &mut self.counts);
            self.particles.retain(|q| {
                let keep = q.pos >= a && q.pos <= b;
                if !keep {
                    counts[(q.pos - lo) as usize] -= 1;
                }
                keep
            });
        }
        let s = self.time;
        for q in self.particles.iter_mut() {
            let d = lazy_step_from_bits(prf(self.seed, &[domain::ENV_EVOLVE, signed(q.home), q.index as u64, s]));
            if d != 0 {
                self.counts[(q.pos - self.lo) as usize] -= 1;
                q.pos += d;
                self.counts[(q.pos - self.lo) as usize] += 1;
            }
        }
        self.work += self.particles.len() as u64;
        self.time += 1;
        self.qmin = i64::MAX;
        self.qmax = i64::MIN;
    }

    pub fn particles(&self) -> usize {
        self.particles.len()
    }
}

impl Environment for ConePcrw {
    fn occupancy(&mut self, x: i64, t: u64) -> Result<u32> {
        if t < self.time {
            return Err(Error::pre(format!("query at time {t} after the cloud reached {}", self.time)));
        }
        if t > self.horizon || (x - self.center).unsigned_abs() > self.horizon {
            return Err(Error::pre(format!("query ({x}, {t}) outside the light cone of the cloud")));
        }
        while self.time < t {
            self.step();
        }
        self.qmin = self.qmin.min(x);
        self.qmax = self.qmax.max(x);
        Ok(self.counts[(x - self.lo) as usize])
    }

    fn work(&self) -> u64 {
        self.work
    }
}

/// Distance to the seam at which a windowed driver aborts.
pub const SEAM_GUARD: usize = 32;

fn seam_check(window: &LatticeWindow, center: i64, x: i64, t: u64) -> Result<()> {
    let half = window.half_width;
    if (x - center).unsigned_abs() as usize + SEAM_GUARD > half {
        return Err(Error::SeamBreach { time: t, position: x, half_width: half });
    }
    Ok(())
}

/// SEP evolved on a whole periodic window with aggregate clocks.
#[derive(Debug, Clone)]
pub struct WindowedSep {
    pub state: EnvState,
    clocks: SepClocks,
    center: i64,
    events: u64,
}

impl WindowedSep {
    pub fn new(params: &EnvParams, seed: u64, window: LatticeWindow) -> Result<Self> {
        params.validate()?;
        if params.model != Model::Sep {
            return Err(Error::ModelMismatch { expected: Model::Sep, found: params.model });
        }
        Ok(WindowedSep { state: initial_state(params, window, seed), clocks: SepClocks::new(seed, 0, params.nu), center: 0, events: 0 })
    }

    pub fn from_state(state: EnvState, nu: f64, seed: u64) -> Result<Self> {
        state.expect_model(Model::Sep)?;
        Ok(WindowedSep { state, clocks: SepClocks::new(seed, 0, nu), center: 0, events: 0 })
    }
}

impl Environment for WindowedSep {
    fn occupancy(&mut self, x: i64, t: u64) -> Result<u32> {
        seam_check(&self.state.window, self.center, x, t)?;
        let dt = t as f64 - self.state.time;
        if dt < 0.0 {
            return Err(Error::pre("environment queried backwards in time"));
        }
        if dt > 0.0 {
            self.events += evolve_sep(&mut self.state, dt, &mut self.clocks)?;
            self.state.time = t as f64;
        }
        Ok(self.state.get(x))
    }

    fn window_half_width(&self) -> Option<usize> {
        Some(self.state.window.half_width)
    }

    fn work(&self) -> u64 {
        self.events
    }
}

/// Poisson cloud evolved on a whole periodic window.
#[derive(Debug, Clone)]
pub struct WindowedPcrw {
    pub state: EnvState,
    rng: RngStream,
    center: i64,
}

impl WindowedPcrw {
    pub fn new(params: &EnvParams, seed: u64, window: LatticeWindow) -> Result<Self> {
        params.validate()?;
        if params.model != Model::Pcrw {
            return Err(Error::ModelMismatch { expected: Model::Pcrw, found: params.model });
        }
        Ok(WindowedPcrw {
            state: initial_state(params, window, seed),
            rng: RngStream::derive(seed, &[domain::ENV_EVOLVE]),
            center: 0,
        })
    }
}

impl Environment for WindowedPcrw {
    fn occupancy(&mut self, x: i64, t: u64) -> Result<u32> {
        seam_check(&self.state.window, self.center, x, t)?;
        let now = self.state.time as u64;
        if t < now {
            return Err(Error::pre("environment queried backwards in time"));
        }
        evolve_pcrw(&mut self.state, t - now, &mut self.rng)?;
        Ok(self.state.get(x))
    }

    fn window_half_width(&self) -> Option<usize> {
        Some(self.state.window.half_width)
    }
}

/// The environment for an annealed run of `horizon` steps from `center`.
pub fn build(params: &EnvParams, seed: u64, center: i64, horizon: u64, opts: AnnealedOptions) -> Result<Box<dyn Environment>> {
    params.validate()?;
    if params.is_frozen() {
        return Ok(Box::new(Frozen { value: stationary_site(params.model, params.rho, 0.5) }));
    }
    let env_seed = derive_seed(seed, &[domain::ENV_INIT]);
    Ok(match (params.model, opts.driver) {
        (Model::Sep, DriverKind::Lazy) => Box::new(LazySep::new(params, env_seed)?),
        (Model::Pcrw, DriverKind::Lazy) => Box::new(ConePcrw::new(params, env_seed, center, horizon)?),
        (model, DriverKind::Windowed) => {
            let window = LatticeWindow::new(compute_window(horizon.max(1), params.nu, opts.safety)?)?;
            match model {
                Model::Sep => {
                    let mut d = WindowedSep::new(params, env_seed, window)?;
                    d.center = center;
                    Box::new(d)
                }
                Model::Pcrw => {
                    let mut d = WindowedPcrw::new(params, env_seed, window)?;
                    d.center = center;
                    Box::new(d)
                }
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lazy_sep_conserves_and_is_replayable() {
        let mut f = SepField::new(7, 1.0);
        let a = f.snapshot(0.5, -50, 50, 40);
        let mut g = SepField::new(7, 1.0);
        let b = g.snapshot(0.5, -50, 50, 40);
        assert_eq!(a, b);
        // Origins at a fixed time form a permutation of the sites they come from.
        let mut o: Vec<i64> = (-30..=30).map(|x| f.origin(x, 25)).collect();
        o.sort();
        o.dedup();
        assert_eq!(o.len(), 61);
    }

    #[test]
    fn lazy_sep_is_monotone_in_density() {
        let mut f = SepField::new(3, 1.0);
        for t in [0, 5, 17, 64] {
            for x in -20..=20 {
                let lo = f.occupancy(Model::Sep, 0.3, x, t);
                let hi = f.occupancy(Model::Sep, 0.6, x, t);
                assert!(lo <= hi);
            }
        }
    }

    #[test]
    fn cone_matches_across_densities() {
        let lo = EnvParams::pcrw(0.5, 1.0).unwrap();
        let hi = EnvParams::pcrw(1.5, 1.0).unwrap();
        let mut a = ConePcrw::new(&lo, 9, 0, 30).unwrap();
        let mut b = ConePcrw::new(&hi, 9, 0, 30).unwrap();
        for t in 0..30 {
            for x in -3..=3 {
                assert!(a.occupancy(x, t).unwrap() <= b.occupancy(x, t).unwrap());
            }
        }
    }

    #[test]
    fn windowed_seam_breach() {
        let p = EnvParams::sep(0.5, 1.0).unwrap();
        let mut d = WindowedSep::new(&p, 1, LatticeWindow::new(40).unwrap()).unwrap();
        assert!(d.occupancy(5, 1).is_ok());
        assert!(matches!(d.occupancy(20, 2), Err(Error::SeamBreach { .. })));
    }
}
