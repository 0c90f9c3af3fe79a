//! Poisson cloud of independent lazy random walks: evolution, the matched
//! monotone coupling, the lazy heat kernel and the soft-local-time coupling
//! with product Poisson fields.

use serde::{Deserialize, Serialize};

use crate::env::{EnvState, LatticeWindow, Model};
use crate::error::{Error, Result};
use crate::rng::{domain, signed, RngStream};

/// Particle view of a PCRW configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticleCloud {
    /// Sorted particle sites.
    pub positions: Vec<i64>,
    pub time: u64,
}

impl ParticleCloud {
    pub fn from_state(state: &EnvState) -> Self {
        let mut positions = Vec::with_capacity(state.total() as usize);
        for x in state.window.sites() {
            for _ in 0..state.get(x) {
                positions.push(x);
            }
        }
        ParticleCloud { positions, time: state.time as u64 }
    }

    pub fn to_state(&self, window: LatticeWindow) -> EnvState {
        let mut s = EnvState::empty(Model::Pcrw, window);
        for &x in &self.positions {
            let i = window.index(x);
            s.occupancy[i] += 1;
        }
        s.time = self.time as f64;
        s
    }
}

/// Lazy steps drawn two bits at a time: `00 → −1`, `11 → +1`, else stay.
pub(crate) struct LazySteps<'a> {
    rng: &'a mut RngStream,
    word: u64,
    left: u32,
}

impl<'a> LazySteps<'a> {
    pub(crate) fn new(rng: &'a mut RngStream) -> Self {
        LazySteps { rng, word: 0, left: 0 }
    }

    #[inline]
    pub(crate) fn step(&mut self) -> i64 {
        use rand::RngCore;
        if self.left == 0 {
            self.word = self.rng.next_u64();
            self.left = 32;
        }
        let b = self.word & 3;
        self.word >>= 2;
        self.left -= 1;
        lazy_step_from_bits(b)
    }
}

#[inline]
pub(crate) fn lazy_step_from_bits(b: u64) -> i64 {
    match b & 3 {
        0 => -1,
        3 => 1,
        _ => 0,
    }
}

fn check_pcrw(state: &EnvState) -> Result<()> {
    state.expect_model(Model::Pcrw)
}

/// Moves every particle `steps` times: stay with probability 1/2, otherwise
/// one site left or right.
pub fn evolve_pcrw(state: &mut EnvState, steps: u64, rng: &mut RngStream) -> Result<()> {
    check_pcrw(state)?;
    let n = state.occupancy.len();
    let mut next = vec![0u32; n];
    let mut bits = LazySteps::new(rng);
    for _ in 0..steps {
        next.iter_mut().for_each(|v| *v = 0);
        for i in 0..n {
            for _ in 0..state.occupancy[i] {
                let j = match bits.step() {
                    -1 => if i == 0 { n - 1 } else { i - 1 },
                    1 => if i + 1 == n { 0 } else { i + 1 },
                    _ => i,
                };
                next[j] += 1;
            }
        }
        std::mem::swap(&mut state.occupancy, &mut next);
    }
    state.time += steps as f64;
    Ok(())
}

/// Evolves `low ≤ high`: at every step each low particle is matched with a
/// high particle on its site and the pair moves together; the surplus high
/// particles move independently. Returns the number of sites where the
/// domination failed, zero by construction.
pub fn monotone_coupled_evolve_pcrw(low: &mut EnvState, high: &mut EnvState, steps: u64, rng: &mut RngStream) -> Result<u64> {
    check_pcrw(low)?;
    check_pcrw(high)?;
    low.same_window(high)?;
    if low.occupancy.iter().zip(&high.occupancy).any(|(a, b)| a > b) {
        return Err(Error::pre("coupled evolution needs low ≤ high sitewise"));
    }
    let n = low.occupancy.len();
    let mut nl = vec![0u32; n];
    let mut nh = vec![0u32; n];
    let mut bits = LazySteps::new(rng);
    let mut violations = 0;
    let wrap = |i: usize, d: i64| -> usize {
        match d {
            -1 => if i == 0 { n - 1 } else { i - 1 },
            1 => if i + 1 == n { 0 } else { i + 1 },
            _ => i,
        }
    };
    for _ in 0..steps {
        nl.iter_mut().for_each(|v| *v = 0);
        nh.iter_mut().for_each(|v| *v = 0);
        for i in 0..n {
            let paired = low.occupancy[i];
            for _ in 0..paired {
                let j = wrap(i, bits.step());
                nl[j] += 1;
                nh[j] += 1;
            }
            for _ in paired..high.occupancy[i] {
                nh[wrap(i, bits.step())] += 1;
            }
        }
        std::mem::swap(&mut low.occupancy, &mut nl);
        std::mem::swap(&mut high.occupancy, &mut nh);
        violations += low.occupancy.iter().zip(&high.occupancy).filter(|(a, b)| a > b).count() as u64;
    }
    low.time += steps as f64;
    high.time += steps as f64;
    Ok(violations)
}

/// `q_t(0, dx)` for the lazy walk: `C(2t, t+dx) / 4^t`.
pub fn lazy_heat_kernel(t: u64, dx: i64) -> f64 {
    if dx.unsigned_abs() > t {
        return 0.0;
    }
    if t <= EXACT_KERNEL_MAX {
        let num = heat_kernel_exact(t).expect("within exact range")[(dx + t as i64) as usize];
        return num as f64 * (-2.0 * t as f64).exp2();
    }
    heat_kernel_row(t)[(dx + t as i64) as usize]
}

/// Largest `t` for which [`heat_kernel_exact`] fits in 128-bit integers.
pub const EXACT_KERNEL_MAX: u64 = 64;

/// Numerators of `q_t(0, ·)` over `dx = −t..=t`, with common denominator
/// `4^t`, by repeated convolution with `(1, 2, 1)`.
pub fn heat_kernel_exact(t: u64) -> Result<Vec<u128>> {
    if t > EXACT_KERNEL_MAX {
        return Err(Error::param(format!("exact kernel limited to t ≤ {EXACT_KERNEL_MAX}")));
    }
    let mut row = vec![1u128];
    for _ in 0..t {
        let mut next = vec![0u128; row.len() + 2];
        for (k, &v) in row.iter().enumerate() {
            next[k] += v;
            next[k + 1] += 2 * v;
            next[k + 2] += v;
        }
        row = next;
    }
    Ok(row)
}

/// `q_t(0, ·)` over `dx = −t..=t` in floating point, normalized to sum one.
pub fn heat_kernel_row(t: u64) -> Vec<f64> {
    if t <= EXACT_KERNEL_MAX {
        let scale = (-2.0 * t as f64).exp2();
        return heat_kernel_exact(t).expect("exact range").iter().map(|&v| v as f64 * scale).collect();
    }
    // Binomial(2t, 1/2) pmf: value at the mode, then ratios outward.
    let n = 2 * t;
    let mode = t as usize;
    let ln = |k: f64| statrs::function::gamma::ln_gamma(k + 1.0);
    let mut row = vec![0.0; (n + 1) as usize];
    row[mode] = (ln(n as f64) - 2.0 * ln(t as f64) - n as f64 * std::f64::consts::LN_2).exp();
    for k in mode..n as usize {
        row[k + 1] = row[k] * (n as f64 - k as f64) / (k as f64 + 1.0);
    }
    for k in (1..=mode).rev() {
        row[k - 1] = row[k] * k as f64 / (n as f64 - k as f64 + 1.0);
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    row
}

/// The kernel restricted to `|dx| ≤ w`, where `w` is the smallest width
/// beyond which every value is below `rel_tol` times the peak.
pub fn heat_kernel_truncated(t: u64, rel_tol: f64) -> (i64, Vec<f64>) {
    let row = heat_kernel_row(t);
    let peak = row[t as usize];
    let mut w = t as usize;
    while w > 0 && row[t as usize + w] < rel_tol * peak {
        w -= 1;
    }
    (w as i64, row[t as usize - w..=t as usize + w].to_vec())
}

/// Unit-intensity Poisson points on `{z} × (0, ∞)`, materialized lazily per
/// column from a key `(seed, z)`.
#[derive(Debug, Clone)]
pub struct PoissonSpace {
    seed: u64,
    z0: i64,
    columns: Vec<Column>,
}

#[derive(Debug, Clone)]
struct Column {
    rng: Option<RngStream>,
    points: Vec<f64>,
}

impl PoissonSpace {
    pub fn new(seed: u64, z0: i64, z1: i64) -> Self {
        let columns = (z0..=z1).map(|_| Column { rng: None, points: Vec::new() }).collect();
        PoissonSpace { seed, z0, columns }
    }

    fn column(&mut self, z: i64) -> &mut Column {
        let seed = self.seed;
        let c = &mut self.columns[(z - self.z0) as usize];
        if c.rng.is_none() {
            c.rng = Some(RngStream::derive(seed, &[domain::POISSON_SPACE, signed(z)]));
        }
        c
    }

    /// Height of the `k`-th point (0-based) of column `z`.
    pub fn point(&mut self, z: i64, k: usize) -> f64 {
        let c = self.column(z);
        while c.points.len() <= k {
            let last = c.points.last().copied().unwrap_or(0.0);
            let gap = c.rng.as_mut().expect("initialized").exp(1.0);
            c.points.push(last + gap);
        }
        c.points[k]
    }

    /// `Λ({z} × (0, a])`.
    pub fn count_below(&mut self, z: i64, a: f64) -> u32 {
        let mut k = 0;
        while self.point(z, k) <= a {
            k += 1;
        }
        k as u32
    }
}

/// The accumulated soft local time and the placement it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLocalTimeField {
    /// First site of the reported range.
    pub z0: i64,
    /// `G(z)` for `z` in the reported range.
    pub g: Vec<f64>,
    /// Number of particles placed at each `z` of the reported range.
    pub h: Vec<u32>,
    /// The marks `ξ_i` in particle order.
    pub marks: Vec<f64>,
    /// Where each particle was placed.
    pub destinations: Vec<i64>,
}

impl SoftLocalTimeField {
    pub fn g_at(&self, z: i64) -> f64 {
        self.g.get((z - self.z0) as usize).copied().unwrap_or(0.0)
    }

    pub fn h_at(&self, z: i64) -> u32 {
        self.h.get((z - self.z0) as usize).copied().unwrap_or(0)
    }
}

/// Relative kernel cut-off used by the soft-local-time engine.
pub const KERNEL_REL_TOL: f64 = 1e-16;

struct SoftEngine {
    space: PoissonSpace,
    /// Offset of the engine's z range.
    z0: i64,
    g: Vec<f64>,
    consumed: Vec<usize>,
}

impl SoftEngine {
    fn run(positions: &[i64], t: u64, seed: u64) -> (SoftEngine, Vec<f64>, Vec<i64>) {
        let (w, kernel) = heat_kernel_truncated(t, KERNEL_REL_TOL);
        let lo = positions.iter().copied().min().unwrap_or(0) - w;
        let hi = positions.iter().copied().max().unwrap_or(0) + w;
        let width = (hi - lo + 1) as usize;
        let mut eng = SoftEngine { space: PoissonSpace::new(seed, lo, hi), z0: lo, g: vec![0.0; width], consumed: vec![0; width] };
        let mut marks = Vec::with_capacity(positions.len());
        let mut dest = Vec::with_capacity(positions.len());
        for &x in positions {
            let mut best = f64::INFINITY;
            let mut arg = x;
            for (k, &q) in kernel.iter().enumerate() {
                let z = x - w + k as i64;
                let j = (z - lo) as usize;
                let next = eng.space.point(z, eng.consumed[j]);
                let r = (next - eng.g[j]) / q;
                if r < best {
                    best = r;
                    arg = z;
                }
            }
            for (k, &q) in kernel.iter().enumerate() {
                let j = (x - w + k as i64 - lo) as usize;
                eng.g[j] += best * q;
            }
            eng.consumed[(arg - lo) as usize] += 1;
            marks.push(best);
            dest.push(arg);
        }
        (eng, marks, dest)
    }
}

/// Soft-local-time construction for particles at `positions` run for `t`
/// lazy steps: particle `i` is sent to the column where the kernel curve
/// `ξ q_t(x_i, ·)` stacked on the previous total first touches an unused
/// Poisson point. `G` and `h` are reported on `zrange` (inclusive).
pub fn soft_local_time(positions: &[i64], t: u64, zrange: (i64, i64), seed: u64) -> Result<SoftLocalTimeField> {
    if t == 0 {
        return Err(Error::param("soft local times need t ≥ 1"));
    }
    if zrange.1 < zrange.0 {
        return Err(Error::param("empty z range"));
    }
    let (eng, marks, destinations) = SoftEngine::run(positions, t, seed);
    let mut g = Vec::with_capacity((zrange.1 - zrange.0 + 1) as usize);
    let mut h = Vec::with_capacity(g.capacity());
    for z in zrange.0..=zrange.1 {
        let j = z - eng.z0;
        if j >= 0 && (j as usize) < eng.g.len() {
            g.push(eng.g[j as usize]);
            h.push(eng.consumed[j as usize] as u32);
        } else {
            g.push(0.0);
            h.push(0);
        }
    }
    Ok(SoftLocalTimeField { z0: zrange.0, g, h, marks, destinations })
}

/// Output of [`poisson_sandwich_coupling`]; vectors cover sites `0..=H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub low: Vec<u32>,
    pub evolved: Vec<u32>,
    pub high: Vec<u32>,
    /// Whether `low ≤ evolved ≤ high` held on `[t, H − t]`.
    pub success: bool,
    pub violations: usize,
    /// Whether `4ℓ² < t < H/2` held.
    pub regime_ok: bool,
}

/// Couples `Poi(ρ−ε)`, the cloud started from `eta0` (sites `0..=H`) after
/// `t` steps, and `Poi(ρ+ε)`, all read off one Poisson point field: the
/// product fields count points below the constant heights `ρ ± ε`, the
/// evolved cloud counts points below the soft local time.
pub fn poisson_sandwich_coupling(eta0: &[u32], rho: f64, eps: f64, ell: usize, t: u64, seed: u64) -> Result<Sandwich> {
    if !(eps > 0.0 && eps <= rho) {
        return Err(Error::param("need 0 < ε ≤ ρ"));
    }
    if ell == 0 || eta0.len() < ell {
        return Err(Error::param("need 1 ≤ ℓ ≤ H + 1"));
    }
    if t == 0 {
        return Err(Error::param("need t ≥ 1"));
    }
    let h_len = eta0.len() as i64 - 1;
    let (lo, hi) = ((rho - eps / 2.0) * ell as f64, (rho + eps / 2.0) * ell as f64);
    let mut s: u64 = eta0[..ell].iter().map(|&v| v as u64).sum();
    for start in 0..=eta0.len() - ell {
        if start > 0 {
            s = s + eta0[start + ell - 1] as u64 - eta0[start - 1] as u64;
        }
        if (s as f64) < lo - 1e-9 || s as f64 > hi + 1e-9 {
            return Err(Error::Hypothesis(format!(
                "interval [{start},{}] holds {s} particles, outside [{lo:.2}, {hi:.2}]",
                start + ell - 1
            )));
        }
    }
    let positions: Vec<i64> =
        eta0.iter().enumerate().flat_map(|(x, &c)| std::iter::repeat_n(x as i64, c as usize)).collect();
    let (mut eng, _, _) = SoftEngine::run(&positions, t, seed);
    let mut low = Vec::with_capacity(eta0.len());
    let mut high = Vec::with_capacity(eta0.len());
    let mut evolved = Vec::with_capacity(eta0.len());
    for z in 0..=h_len {
        let j = z - eng.z0;
        let inside = j >= 0 && (j as usize) < eng.g.len();
        evolved.push(if inside { eng.consumed[j as usize] as u32 } else { 0 });
        if inside {
            low.push(eng.space.count_below(z, rho - eps));
            high.push(eng.space.count_below(z, rho + eps));
        } else {
            let mut sp = PoissonSpace::new(seed, z, z);
            low.push(sp.count_below(z, rho - eps));
            high.push(sp.count_below(z, rho + eps));
        }
    }
    let t_i = t as i64;
    let violations = (t_i..=h_len - t_i)
        .filter(|&z| {
            let k = z as usize;
            low[k] > evolved[k] || evolved[k] > high[k]
        })
        .count();
    Ok(Sandwich {
        success: violations == 0,
        violations,
        regime_ok: (4 * ell * ell) < t as usize && 2 * t_i < h_len,
        low,
        evolved,
        high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_small_values() {
        assert_eq!(lazy_heat_kernel(0, 0), 1.0);
        assert_eq!(lazy_heat_kernel(0, 1), 0.0);
        assert_eq!(lazy_heat_kernel(1, 0), 0.5);
        assert_eq!(lazy_heat_kernel(1, -1), 0.25);
        assert_eq!(lazy_heat_kernel(2, 0), 0.375);
    }

    #[test]
    fn float_row_normalized_and_symmetric() {
        for t in [65u64, 200, 5000] {
            let r = heat_kernel_row(t);
            let s: f64 = r.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            for d in 0..=t as usize {
                let (a, b) = (r[t as usize + d], r[t as usize - d]);
                assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
            }
        }
    }

    #[test]
    fn evolve_conserves() {
        let w = LatticeWindow::new(10).unwrap();
        let mut s = EnvState::filled(Model::Pcrw, w, 2);
        let mut r = RngStream::from_seed(1);
        evolve_pcrw(&mut s, 50, &mut r).unwrap();
        assert_eq!(s.total(), 42);
    }

    #[test]
    fn no_particles_no_local_time() {
        let f = soft_local_time(&[], 5, (0, 10), 3).unwrap();
        assert!(f.g.iter().all(|&g| g == 0.0));
        assert!(f.h.iter().all(|&h| h == 0));
    }

    #[test]
    fn soft_local_time_places_every_particle() {
        let pos = [0i64, 0, 3, 7, 7, 7];
        let f = soft_local_time(&pos, 4, (-10, 20), 9).unwrap();
        assert_eq!(f.h.iter().sum::<u32>() as usize, pos.len());
        for (&x, &d) in pos.iter().zip(&f.destinations) {
            assert!((d - x).abs() <= 4);
        }
    }
}
