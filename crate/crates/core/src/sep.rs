//! Event-driven exclusion dynamics on a periodic window, in interchange form:
//! every edge carries a rate `ν/2` clock and each ring swaps the two endpoint
//! states.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::env::{EnvState, Model};
use crate::error::{Error, Result};
use crate::rng::{domain, RngStream};

/// Aggregate clock of all edges of a window: the next ring is
/// `Exp(ν/2 · #edges)` away and lands on a uniformly chosen edge.
#[derive(Debug, Clone)]
pub struct SepClocks {
    rng: RngStream,
    pub nu: f64,
}

impl SepClocks {
    pub fn new(seed: u64, epoch: u64, nu: f64) -> Self {
        SepClocks { rng: RngStream::derive(seed, &[domain::ENV_CLOCKS, epoch]), nu }
    }

    /// Gap to the next ring and the edge index it lands on.
    #[inline]
    pub fn next(&mut self, edges: usize) -> (f64, usize) {
        let dt = self.rng.exp(0.5 * self.nu * edges as f64);
        (dt, self.rng.below(edges))
    }
}

/// Arrival times of a single edge's clock, replayable from its key.
#[derive(Debug, Clone)]
pub struct EdgeClockStream {
    pub edge: i64,
    pub rate: f64,
    rng: RngStream,
    last: f64,
}

impl EdgeClockStream {
    pub fn new(seed: u64, epoch: u64, edge: i64, nu: f64) -> Self {
        EdgeClockStream {
            edge,
            rate: 0.5 * nu,
            rng: RngStream::derive(seed, &[domain::ENV_CLOCKS, epoch, crate::rng::signed(edge)]),
            last: 0.0,
        }
    }

    /// The next arrival, strictly after the previous one.
    pub fn next_arrival(&mut self) -> f64 {
        loop {
            let t = self.last + self.rng.exp(self.rate);
            if t > self.last {
                self.last = t;
                return t;
            }
        }
    }
}

fn check_sep(state: &EnvState) -> Result<()> {
    state.expect_model(Model::Sep)?;
    state.check_model()
}

#[inline]
fn edge_ends(len: usize, e: usize) -> (usize, usize) {
    (e, if e + 1 == len { 0 } else { e + 1 })
}

/// Advances a SEP state by `duration` with aggregate clocks. Returns the
/// number of clock rings processed. Rings are ordered by the draw sequence,
/// so two rings whose time stamps round to the same float are not a tie.
pub fn evolve_sep(state: &mut EnvState, duration: f64, clocks: &mut SepClocks) -> Result<u64> {
    check_sep(state)?;
    if duration < 0.0 {
        return Err(Error::param("duration must be non-negative"));
    }
    let n = state.occupancy.len();
    let start = state.time;
    let end = start + duration;
    let mut t = start;
    let mut events = 0u64;
    if duration > 0.0 {
        loop {
            let (dt, e) = clocks.next(n);
            let next = t + dt;
            if next >= end {
                break;
            }
            t = next;
            let (i, j) = edge_ends(n, e);
            state.occupancy.swap(i, j);
            events += 1;
        }
    }
    debug_assert!(state.occupancy.iter().all(|&v| v <= 1));
    state.time = end;
    Ok(events)
}

#[derive(PartialEq)]
struct Arrival(f64, usize);

impl Eq for Arrival {}

impl PartialOrd for Arrival {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Arrival {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// Same dynamics as [`evolve_sep`], driven by one keyed stream per edge and
/// merged chronologically. The clocks of edge `e` depend only on
/// `(seed, epoch, e)` and start at time 0 of the epoch.
pub fn evolve_sep_keyed(state: &mut EnvState, duration: f64, seed: u64, epoch: u64, nu: f64) -> Result<u64> {
    check_sep(state)?;
    let n = state.occupancy.len();
    let mut streams: Vec<EdgeClockStream> =
        (0..n).map(|e| EdgeClockStream::new(seed, epoch, state.window.site(e), nu)).collect();
    let mut heap: BinaryHeap<Arrival> = streams.iter_mut().enumerate().map(|(e, s)| Arrival(s.next_arrival(), e)).collect();
    let mut events = 0;
    let mut last = f64::NEG_INFINITY;
    while let Some(Arrival(t, e)) = heap.pop() {
        if t >= duration {
            break;
        }
        if t == last {
            return Err(Error::ClockTie { time: t });
        }
        last = t;
        let (i, j) = edge_ends(n, e);
        state.occupancy.swap(i, j);
        events += 1;
        heap.push(Arrival(streams[e].next_arrival(), e));
    }
    state.time += duration;
    Ok(events)
}

/// Positions of labelled particles through an interchange evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterchangeTrace {
    /// Starting sites of the labels.
    pub initial: Vec<i64>,
    /// Requested sampling times (relative to the start).
    pub times: Vec<f64>,
    /// `positions[k][j]`: unwrapped position of label `k` at `times[j]`.
    pub positions: Vec<Vec<i64>>,
    /// Number of jumps each label made over the whole duration.
    pub jumps: Vec<u64>,
    /// Final unwrapped displacement of each label.
    pub displacement: Vec<i64>,
}

/// [`evolve_sep`] that also follows the particles started at `labels`.
/// Sample times outside `[0, duration]` are rejected.
pub fn evolve_interchange_traced(
    state: &mut EnvState,
    duration: f64,
    clocks: &mut SepClocks,
    labels: &[i64],
    sample_times: &[f64],
) -> Result<InterchangeTrace> {
    check_sep(state)?;
    if duration < 0.0 {
        return Err(Error::param("duration must be non-negative"));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|&s| s < 0.0 || s > duration) {
        return Err(Error::param("sample times must be sorted and within the duration"));
    }
    let n = state.occupancy.len();
    let mut label_at: Vec<Option<u32>> = vec![None; n];
    for (k, &x) in labels.iter().enumerate() {
        let i = state.window.index(x);
        if state.occupancy[i] == 0 {
            return Err(Error::pre(format!("label on empty site {x}")));
        }
        if label_at[i].is_some() {
            return Err(Error::pre(format!("site {x} labelled twice")));
        }
        label_at[i] = Some(k as u32);
    }
    let mut disp = vec![0i64; labels.len()];
    let mut jumps = vec![0u64; labels.len()];
    let mut positions = vec![Vec::with_capacity(sample_times.len()); labels.len()];
    let mut next_sample = 0;
    let mut t = 0.0;
    let record = |positions: &mut Vec<Vec<i64>>, disp: &[i64]| {
        for (k, p) in positions.iter_mut().enumerate() {
            p.push(labels[k] + disp[k]);
        }
    };
    loop {
        let (dt, e) = clocks.next(n);
        let next = t + dt;
        while next_sample < sample_times.len() && sample_times[next_sample] < next {
            record(&mut positions, &disp);
            next_sample += 1;
        }
        if next >= duration {
            break;
        }
        t = next;
        let (i, j) = edge_ends(n, e);
        state.occupancy.swap(i, j);
        let (a, b) = (label_at[i], label_at[j]);
        label_at[i] = b;
        label_at[j] = a;
        if let Some(k) = a {
            disp[k as usize] += 1;
            jumps[k as usize] += 1;
        }
        if let Some(k) = b {
            disp[k as usize] -= 1;
            jumps[k as usize] += 1;
        }
    }
    while next_sample < sample_times.len() {
        record(&mut positions, &disp);
        next_sample += 1;
    }
    state.time += duration;
    Ok(InterchangeTrace {
        initial: labels.to_vec(),
        times: sample_times.to_vec(),
        positions,
        jumps,
        displacement: disp,
    })
}

/// Evolves `low ≤ high` with one shared clock realization. Returns the number
/// of times domination failed at an updated site, which is zero whenever the
/// precondition held.
pub fn monotone_coupled_evolve(low: &mut EnvState, high: &mut EnvState, duration: f64, clocks: &mut SepClocks) -> Result<u64> {
    check_sep(low)?;
    check_sep(high)?;
    low.same_window(high)?;
    if low.occupancy.iter().zip(&high.occupancy).any(|(a, b)| a > b) {
        return Err(Error::pre("coupled evolution needs low ≤ high sitewise"));
    }
    let n = low.occupancy.len();
    let end = duration;
    let mut t = 0.0;
    let mut violations = 0u64;
    if duration > 0.0 {
        loop {
            let (dt, e) = clocks.next(n);
            let next = t + dt;
            if next >= end {
                break;
            }
            t = next;
            let (i, j) = edge_ends(n, e);
            low.occupancy.swap(i, j);
            high.occupancy.swap(i, j);
            violations += u64::from(low.occupancy[i] > high.occupancy[i]) + u64::from(low.occupancy[j] > high.occupancy[j]);
        }
    }
    low.time += duration;
    high.time += duration;
    Ok(violations)
}

/// Continuous-time simple random walk with jump rate `ν` run for time `t`.
/// Returns the final position, the largest `|Z_s|` and the jump count.
pub fn tagged_walk(nu: f64, t: f64, rng: &mut RngStream) -> (i64, i64, u64) {
    let mut s = 0.0;
    let (mut z, mut max, mut jumps) = (0i64, 0i64, 0u64);
    loop {
        s += rng.exp(nu);
        if s >= t {
            break;
        }
        z += if rng.coin() { 1 } else { -1 };
        jumps += 1;
        max = max.max(z.abs());
    }
    (z, max, jumps)
}

/// Outcome of comparing an empirical tail frequency with a closed-form bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
    pub reps: usize,
    pub passed: bool,
}

/// Frequency of `max_{s ≤ t} |Z_s| ≥ 2kνt + a` for a rate-`ν` tagged particle
/// against the bound `exp(−(2kνt + a)/8)`.
pub fn max_displacement_bound_check(k: u32, nu: f64, t: f64, a: u64, reps: usize, seed: u64) -> Result<BoundCheck> {
    if k == 0 || t <= 0.0 || nu <= 0.0 || reps == 0 {
        return Err(Error::param("need k ≥ 1, t > 0, ν > 0 and reps ≥ 1"));
    }
    let level = 2.0 * k as f64 * nu * t + a as f64;
    let mut rng = RngStream::derive(seed, &[domain::PROBE]);
    let hits = (0..reps).filter(|_| tagged_walk(nu, t, &mut rng).1 as f64 >= level).count();
    let p = hits as f64 / reps as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    let bound = (-level / 8.0).exp();
    Ok(BoundCheck { empirical: p, stderr: se, bound, reps, passed: p <= bound + 3.0 * se })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::LatticeWindow;

    #[test]
    fn zero_duration_is_identity() {
        let mut s = EnvState::from_sites(Model::Sep, vec![1, 0, 1, 1, 0]).unwrap();
        let before = s.clone();
        let mut c = SepClocks::new(1, 0, 1.0);
        evolve_sep(&mut s, 0.0, &mut c).unwrap();
        assert_eq!(s.occupancy, before.occupancy);
    }

    #[test]
    fn conserves_particles_and_replays() {
        let w = LatticeWindow::new(20).unwrap();
        let mut a = EnvState::empty(Model::Sep, w);
        for x in -20..=20 {
            a.set(x, u32::from(x % 3 == 0));
        }
        let mut b = a.clone();
        let n = a.total();
        evolve_sep(&mut a, 37.5, &mut SepClocks::new(9, 0, 1.3)).unwrap();
        evolve_sep(&mut b, 37.5, &mut SepClocks::new(9, 0, 1.3)).unwrap();
        assert_eq!(a.total(), n);
        assert_eq!(a, b);
    }

    #[test]
    fn non_sep_rejected() {
        let mut s = EnvState::from_sites(Model::Pcrw, vec![0, 2, 0]).unwrap();
        assert!(evolve_sep(&mut s, 1.0, &mut SepClocks::new(0, 0, 1.0)).is_err());
    }

    #[test]
    fn edge_streams_replay() {
        let mut a = EdgeClockStream::new(5, 1, -3, 1.0);
        let mut b = EdgeClockStream::new(5, 1, -3, 1.0);
        let xa: Vec<f64> = (0..10).map(|_| a.next_arrival()).collect();
        let xb: Vec<f64> = (0..10).map(|_| b.next_arrival()).collect();
        assert_eq!(xa, xb);
        assert!(xa.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn labels_follow_swaps() {
        let mut s = EnvState::filled(Model::Sep, LatticeWindow::new(5).unwrap(), 1);
        let mut c = SepClocks::new(3, 0, 1.0);
        let tr = evolve_interchange_traced(&mut s, 10.0, &mut c, &[0, 1], &[0.0, 5.0, 10.0]).unwrap();
        assert_eq!(tr.positions[0][0], 0);
        assert_eq!(tr.positions[1][0], 1);
        assert_eq!(tr.positions[0].len(), 3);
    }
}
