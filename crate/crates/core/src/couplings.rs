//! Joint evolutions of a dense configuration `high` and a sparse one `low`
//! that keep or create sitewise domination `low ≤ high`.
//!
//! SEP couplings run on a two-layer interchange engine. Every edge carries a
//! merged clock of rate `ν` whose arrivals have fair labels `X ∈ {0, 1}`; the
//! edge mode decides which layer swaps:
//!
//! * `Shared`: both layers swap iff `X = 1`;
//! * `Independent`: `high` swaps iff `X = 1`, `low` iff `X = 0`;
//! * `Thinned`: `high` swaps iff `X = 1`; `low` swaps iff `X = 1` when a
//!   matched pair sits together on an endpoint, iff `X = 0` otherwise.
//!
//! Each layer sees independent rate-`ν/2` edge clocks in every mode, so the
//! marginals are exact SEP laws on the periodic window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::env::{sample_banded, sample_ordered_pair, sample_stationary, Band, EnvParams, EnvState, LatticeWindow, Model};
use crate::error::{Error, Result};
use crate::pcrw::LazySteps;
use crate::rng::{derive_seed, domain, RngStream};
use crate::sep::{evolve_sep, SepClocks};
use crate::walk::{arrow, ArrowSource, Arrows, ModelParams, ShiftedArrows, SpaceTimePoint, Trajectory};

const NONE: u32 = u32::MAX;
const MAX_LISTED: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMode {
    Shared,
    Independent,
    Thinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    High,
    Low,
}

/// What to do at a stage whose interval-density check fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Fall back to independent clocks on the coupled edges from then on.
    Strict,
    /// Match whatever fits inside each piece and carry on.
    #[default]
    BestEffort,
}

/// Count of one layer in `interval` at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalSample {
    pub layer: Layer,
    pub time_index: usize,
    pub interval: (i64, i64),
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub index: usize,
    pub start: f64,
    /// Every piece-sized interval had the density gap.
    pub density_ok: bool,
    pub paired: usize,
    pub matched: usize,
    /// Unpaired low particles left without a match.
    pub unmatched: usize,
    pub fallback: bool,
}

/// Per-edge counts of retained (`X = 1`) arrivals among all merged arrivals
/// on thinned edges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThinningCounts {
    pub retained: Vec<u32>,
    pub total: Vec<u32>,
}

impl ThinningCounts {
    pub fn totals(&self) -> (u64, u64) {
        let r = self.retained.iter().map(|&v| v as u64).sum();
        let n = self.total.iter().map(|&v| v as u64).sum();
        (r, n)
    }

    fn merge(&mut self, other: &ThinningCounts) {
        if self.total.is_empty() {
            *self = other.clone();
            return;
        }
        for (a, b) in self.retained.iter_mut().zip(&other.retained) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub coupling: String,
    /// Outcome of every declared event.
    pub success: BTreeMap<String, bool>,
    /// Sites where a checked domination failed (truncated).
    pub violation_sites: Vec<i64>,
    pub marginal_samples: Vec<MarginalSample>,
    pub probe_times: Vec<f64>,
    pub stages: Vec<StageReport>,
    /// Matched pairs that split on an edge where they must move together.
    pub coalescence_violations: u64,
    pub thinning: ThinningCounts,
    pub parameters: serde_json::Value,
    /// Whether the asymptotic regime of the underlying guarantee holds.
    pub regime_ok: bool,
    pub notes: Vec<String>,
}

impl CouplingReport {
    fn new(coupling: &str, parameters: serde_json::Value) -> Self {
        CouplingReport {
            coupling: coupling.to_string(),
            success: BTreeMap::new(),
            violation_sites: Vec::new(),
            marginal_samples: Vec::new(),
            probe_times: Vec::new(),
            stages: Vec::new(),
            coalescence_violations: 0,
            thinning: ThinningCounts::default(),
            parameters,
            regime_ok: false,
            notes: Vec::new(),
        }
    }

    pub fn event(&self, name: &str) -> Option<bool> {
        self.success.get(name).copied()
    }

    fn push_violations(&mut self, sites: impl IntoIterator<Item = i64>) {
        for x in sites {
            if self.violation_sites.len() >= MAX_LISTED {
                break;
            }
            if !self.violation_sites.contains(&x) {
                self.violation_sites.push(x);
            }
        }
    }
}

/// Successes per event over a set of reports.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub reps: u64,
    pub successes: BTreeMap<String, u64>,
    pub coalescence_violations: u64,
    pub thinning: ThinningCounts,
}

impl Tally {
    pub fn add(&mut self, r: &CouplingReport) {
        self.reps += 1;
        for (k, &v) in &r.success {
            *self.successes.entry(k.clone()).or_default() += u64::from(v);
        }
        self.coalescence_violations += r.coalescence_violations;
        self.thinning.merge(&r.thinning);
    }

    pub fn frequency(&self, event: &str) -> f64 {
        self.successes.get(event).copied().unwrap_or(0) as f64 / self.reps.max(1) as f64
    }

    /// Binomial standard error of [`frequency`](Self::frequency).
    pub fn stderr(&self, event: &str) -> f64 {
        let p = self.frequency(event);
        (p * (1.0 - p) / self.reps.max(1) as f64).sqrt()
    }
}

impl<'a> FromIterator<&'a CouplingReport> for Tally {
    fn from_iter<I: IntoIterator<Item = &'a CouplingReport>>(iter: I) -> Self {
        let mut t = Tally::default();
        for r in iter {
            t.add(r);
        }
        t
    }
}

/// Current pairing: co-located pairs and the injection from the remaining
/// low particles to high particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchState {
    pub paired: Vec<i64>,
    /// `(low site, high site)` of matched but separated particles.
    pub matched: Vec<(i64, i64)>,
}

impl MatchState {
    pub fn separations(&self) -> Vec<i64> {
        self.matched.iter().map(|(a, b)| (a - b).abs()).collect()
    }
}

#[derive(Debug, Clone)]
struct Watch {
    a: i64,
    b: i64,
    hits: u64,
    sites: Vec<i64>,
}

/// Two SEP layers on one periodic window with labelled particles.
#[derive(Debug, Clone)]
pub struct TwoLayer {
    window: LatticeWindow,
    nu: f64,
    high: Vec<u8>,
    low: Vec<u8>,
    high_id: Vec<u32>,
    low_id: Vec<u32>,
    /// Indexed by low label.
    partner: Vec<u32>,
    modes: Vec<EdgeMode>,
    rng: RngStream,
    time: f64,
    events: u64,
    watches: Vec<Watch>,
    coalescence_violations: u64,
    thinning: ThinningCounts,
}

impl TwoLayer {
    pub fn new(high: &EnvState, low: &EnvState, nu: f64, seed: u64) -> Result<Self> {
        high.expect_model(Model::Sep)?;
        low.expect_model(Model::Sep)?;
        high.check_model()?;
        low.check_model()?;
        high.same_window(low)?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::param("ν must be positive"));
        }
        let n = high.window.len();
        let ids = |s: &EnvState| (0..n).map(|i| if s.occupancy[i] == 1 { i as u32 } else { NONE }).collect();
        Ok(TwoLayer {
            window: high.window,
            nu,
            high: high.occupancy.iter().map(|&v| v as u8).collect(),
            low: low.occupancy.iter().map(|&v| v as u8).collect(),
            high_id: ids(high),
            low_id: ids(low),
            partner: vec![NONE; n],
            modes: vec![EdgeMode::Shared; n],
            rng: RngStream::derive(seed, &[domain::COUPLING]),
            time: 0.0,
            events: 0,
            watches: Vec::new(),
            coalescence_violations: 0,
            thinning: ThinningCounts { retained: vec![0; n], total: vec![0; n] },
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn window(&self) -> LatticeWindow {
        self.window
    }

    pub fn coalescence_violations(&self) -> u64 {
        self.coalescence_violations
    }

    pub fn thinning(&self) -> &ThinningCounts {
        &self.thinning
    }

    #[inline]
    pub fn get(&self, layer: Layer, x: i64) -> u32 {
        let i = self.window.index(x);
        match layer {
            Layer::High => self.high[i] as u32,
            Layer::Low => self.low[i] as u32,
        }
    }

    pub fn state(&self, layer: Layer) -> EnvState {
        let occ = match layer {
            Layer::High => &self.high,
            Layer::Low => &self.low,
        };
        EnvState { window: self.window, model: Model::Sep, occupancy: occ.iter().map(|&v| v as u32).collect(), time: self.time }
    }

    pub fn count(&self, layer: Layer, a: i64, b: i64) -> u32 {
        (a..=b).map(|x| self.get(layer, x)).sum()
    }

    /// Sites of `[a, b]` where `low > high`.
    pub fn excess_sites(&self, a: i64, b: i64) -> Vec<i64> {
        (a..=b).filter(|&x| self.get(Layer::Low, x) > self.get(Layer::High, x)).collect()
    }

    /// Mode of every edge `{x, x+1}`, chosen by its left endpoint. The seam
    /// edge has left endpoint `M`.
    pub fn set_modes(&mut self, f: impl Fn(i64) -> EdgeMode) {
        for e in 0..self.modes.len() {
            self.modes[e] = f(self.window.site(e));
        }
    }

    pub fn mode(&self, left: i64) -> EdgeMode {
        self.modes[self.window.index(left)]
    }

    /// Starts recording `low > high` on `[a, b]` at every later update,
    /// counting the current excess sites too.
    pub fn add_watch(&mut self, a: i64, b: i64) -> usize {
        let sites = if a <= b { self.excess_sites(a, b) } else { Vec::new() };
        let hits = sites.len() as u64;
        self.watches.push(Watch { a, b, hits, sites: sites.into_iter().take(MAX_LISTED).collect() });
        self.watches.len() - 1
    }

    /// Number of excess events seen by a watch and the first sites involved.
    pub fn watch(&self, id: usize) -> (u64, &[i64]) {
        let w = &self.watches[id];
        (w.hits, &w.sites)
    }

    #[inline]
    fn colocated(&self, i: usize) -> bool {
        let l = self.low_id[i];
        l != NONE && self.high[i] == 1 && self.partner[l as usize] == self.high_id[i]
    }

    /// Runs the merged clocks for `duration`.
    pub fn advance(&mut self, duration: f64) -> Result<()> {
        if duration < 0.0 || duration.is_nan() {
            return Err(Error::param("duration must be non-negative"));
        }
        let n = self.high.len();
        let end = self.time + duration;
        let rate = self.nu * n as f64;
        let mut t = self.time;
        loop {
            let next = t + self.rng.exp(rate);
            if next >= end {
                break;
            }
            t = next;
            let e = self.rng.below(n);
            let x = self.rng.coin();
            let (i, j) = (e, if e + 1 == n { 0 } else { e + 1 });
            let mode = self.modes[e];
            let pair = mode != EdgeMode::Independent && (self.colocated(i) || self.colocated(j));
            let (mh, ml) = match mode {
                EdgeMode::Shared => (x, x),
                EdgeMode::Independent => (x, !x),
                EdgeMode::Thinned => {
                    self.thinning.total[e] += 1;
                    self.thinning.retained[e] += u32::from(x);
                    (x, if pair { x } else { !x })
                }
            };
            if pair && mh != ml {
                self.coalescence_violations += 1;
            }
            if mh {
                self.high.swap(i, j);
                self.high_id.swap(i, j);
            }
            if ml {
                self.low.swap(i, j);
                self.low_id.swap(i, j);
            }
            self.events += 1;
            if !self.watches.is_empty() && (mh || ml) {
                for k in [i, j] {
                    if self.low[k] > self.high[k] {
                        let x = self.window.site(k);
                        for w in self.watches.iter_mut().filter(|w| w.a <= x && x <= w.b) {
                            w.hits += 1;
                            if w.sites.len() < MAX_LISTED && !w.sites.contains(&x) {
                                w.sites.push(x);
                            }
                        }
                    }
                }
            }
        }
        self.time = end;
        Ok(())
    }

    /// Whether every interval of `[a, b]` with length in
    /// `⌊mesh/2⌋..=mesh` has `high ≥ θ|I| ≥ low`.
    pub fn density_gap(&self, a: i64, b: i64, mesh: usize, theta: f64) -> bool {
        let ph = self.prefix(Layer::High, a, b);
        let pl = self.prefix(Layer::Low, a, b);
        let len = ph.len() - 1;
        for m in (mesh / 2).max(1)..=mesh.min(len) {
            let bound = theta * m as f64;
            for s in 0..=len - m {
                let h = (ph[s + m] - ph[s]) as f64;
                let l = (pl[s + m] - pl[s]) as f64;
                if h < bound - 1e-9 || l > bound + 1e-9 {
                    return false;
                }
            }
        }
        true
    }

    fn prefix(&self, layer: Layer, a: i64, b: i64) -> Vec<u32> {
        let mut p = Vec::with_capacity((b - a + 2).max(1) as usize);
        p.push(0);
        for x in a..=b {
            p.push(p.last().unwrap() + self.get(layer, x));
        }
        p
    }

    /// Rebuilds the matching on the given intervals: co-located particles
    /// are paired, and inside each paving piece the remaining low particles
    /// are matched leftmost to leftmost with the remaining high ones. All
    /// earlier matches are dropped.
    pub fn rematch(&mut self, intervals: &[(i64, i64)], mesh: usize) -> (usize, usize, usize) {
        self.partner.iter_mut().for_each(|p| *p = NONE);
        let (mut paired, mut matched, mut unmatched) = (0, 0, 0);
        for &(a, b) in intervals {
            for (pa, pb) in pave(a, b, mesh) {
                let mut lows = Vec::new();
                let mut highs = Vec::new();
                for x in pa..=pb {
                    let i = self.window.index(x);
                    match (self.low[i], self.high[i]) {
                        (1, 1) => {
                            self.partner[self.low_id[i] as usize] = self.high_id[i];
                            paired += 1;
                        }
                        (1, 0) => lows.push(i),
                        (0, 1) => highs.push(i),
                        _ => {}
                    }
                }
                for (k, &i) in lows.iter().enumerate() {
                    match highs.get(k) {
                        Some(&h) => {
                            self.partner[self.low_id[i] as usize] = self.high_id[h];
                            matched += 1;
                        }
                        None => unmatched += 1,
                    }
                }
            }
        }
        (paired, matched, unmatched)
    }

    pub fn match_state(&self) -> MatchState {
        let n = self.high.len();
        let mut where_high = vec![NONE; n];
        for i in 0..n {
            if self.high_id[i] != NONE {
                where_high[self.high_id[i] as usize] = i as u32;
            }
        }
        let mut paired = Vec::new();
        let mut matched = Vec::new();
        for i in 0..n {
            let l = self.low_id[i];
            if l == NONE || self.partner[l as usize] == NONE {
                continue;
            }
            let h = where_high[self.partner[l as usize] as usize] as usize;
            if h == i {
                paired.push(self.window.site(i));
            } else {
                matched.push((self.window.site(i), self.window.site(h)));
            }
        }
        MatchState { paired, matched }
    }
}

/// Splits `[a, b]` into contiguous pieces of length `mesh` from the left.
/// A remainder of at least `⌊mesh/2⌋` sites is its own piece; a shorter one
/// is merged into the second half of the last full piece.
pub fn pave(a: i64, b: i64, mesh: usize) -> Vec<(i64, i64)> {
    if b < a || mesh == 0 {
        return Vec::new();
    }
    let len = (b - a + 1) as usize;
    let m = mesh as i64;
    let half = (mesh / 2) as i64;
    let full = len / mesh;
    let rem = (len % mesh) as i64;
    if full == 0 {
        return vec![(a, b)];
    }
    let mut out: Vec<(i64, i64)> = (0..full as i64).map(|k| (a + k * m, a + (k + 1) * m - 1)).collect();
    if rem == 0 {
        return out;
    }
    if rem >= half.max(1) {
        out.push((b - rem + 1, b));
    } else {
        let (s, _) = out.pop().unwrap();
        out.push((s, s + half - 1));
        out.push((s + half, b));
    }
    out
}

/// Records the counts of both layers on the probe interval at fixed times.
struct Recorder {
    times: Vec<f64>,
    next: usize,
    interval: (i64, i64),
    out: Vec<MarginalSample>,
}

impl Recorder {
    fn new(times: Vec<f64>, interval: (i64, i64)) -> Self {
        Recorder { times, next: 0, interval, out: Vec::new() }
    }

    fn advance_to(&mut self, eng: &mut TwoLayer, target: f64) -> Result<()> {
        while self.next < self.times.len() && self.times[self.next] <= target {
            eng.advance(self.times[self.next] - eng.time())?;
            let (a, b) = self.interval;
            for layer in [Layer::High, Layer::Low] {
                self.out.push(MarginalSample { layer, time_index: self.next, interval: self.interval, count: eng.count(layer, a, b) });
            }
            self.next += 1;
        }
        eng.advance((target - eng.time()).max(0.0))
    }
}

fn probe_times(t: f64) -> Vec<f64> {
    vec![t / 3.0, 2.0 * t / 3.0, t]
}

/// The same probe counts from a direct, uncoupled SEP run of `init`.
pub fn direct_marginals(init: &EnvState, nu: f64, times: &[f64], interval: (i64, i64), seed: u64) -> Result<Vec<u32>> {
    let mut s = init.clone();
    let mut clocks = SepClocks::new(seed, 0, nu);
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        evolve_sep(&mut s, t - now, &mut clocks)?;
        now = t;
        out.push((interval.0..=interval.1).map(|x| s.get(x)).sum());
    }
    Ok(out)
}

/// Failure bound `20 e^{−kνt/4}` for the drift coupling.
pub fn drift_failure_bound(k: u32, nu: f64, t: f64) -> f64 {
    20.0 * (-(k as f64) * nu * t / 4.0).exp()
}

/// `δ = (ν / 2e^ν)^{6(ρ+1)ℓ}`.
pub fn sprinkler_delta(nu: f64, rho: f64, ell: u64) -> f64 {
    (nu / (2.0 * nu.exp())).powf(6.0 * (rho + 1.0) * ell as f64)
}

fn check_half_width(state: &EnvState, h: i64) -> Result<()> {
    if h < 1 || h >= state.window.half_width as i64 {
        return Err(Error::param(format!("need 1 ≤ H < {} (window half-width)", state.window.half_width)));
    }
    Ok(())
}

/// No particle drifting in from the side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub nu: f64,
    pub h: i64,
    pub t: f64,
    pub k: u32,
}

/// Starts from `low ≤ high` on `[−H, H]` and evolves both with the same
/// clocks (SEP) or with co-located particles moving together (PCRW).
/// Event `sustained`: domination on `[−H+2νkt, H−2νkt]` throughout `[0, t]`
/// (PCRW: `[−H+kt, H−kt]`).
pub fn drift_coupling(low: &EnvState, high: &EnvState, cfg: &DriftConfig, seed: u64) -> Result<CouplingReport> {
    high.same_window(low)?;
    low.expect_model(high.model)?;
    check_half_width(low, cfg.h)?;
    if cfg.k == 0 || cfg.t < 0.0 {
        return Err(Error::param("drift coupling needs k ≥ 1 and t ≥ 0"));
    }
    if let Some(x) = low.first_excess(high, -cfg.h, cfg.h) {
        return Err(Error::pre(format!("low exceeds high at {x} inside [−H, H]")));
    }
    let mut rep = CouplingReport::new("drift", serde_json::to_value(cfg).unwrap_or_default());
    match low.model {
        Model::Sep => drift_sep(low, high, cfg, seed, &mut rep)?,
        Model::Pcrw => drift_pcrw(low, high, cfg, seed, &mut rep)?,
    }
    Ok(rep)
}

fn drift_sep(low: &EnvState, high: &EnvState, cfg: &DriftConfig, seed: u64, rep: &mut CouplingReport) -> Result<()> {
    let r = (2.0 * cfg.nu * cfg.k as f64 * cfg.t).ceil() as i64;
    let mut eng = TwoLayer::new(high, low, cfg.nu, seed)?;
    let w = eng.add_watch(-cfg.h + r, cfg.h - r);
    let mut rec = Recorder::new(probe_times(cfg.t), (-cfg.h, cfg.h));
    rec.advance_to(&mut eng, cfg.t)?;
    let (hits, sites) = eng.watch(w);
    rep.push_violations(sites.to_vec());
    rep.success.insert("sustained".into(), hits == 0);
    rep.marginal_samples = rec.out;
    rep.probe_times = rec.times;
    rep.coalescence_violations = eng.coalescence_violations();
    rep.regime_ok = true;
    Ok(())
}

fn drift_pcrw(low: &EnvState, high: &EnvState, cfg: &DriftConfig, seed: u64, rep: &mut CouplingReport) -> Result<()> {
    let n = low.window.len();
    let w = low.window;
    let steps = cfg.t.floor() as u64;
    let mut both = vec![0u32; n];
    let mut lone_low = vec![0u32; n];
    let mut lone_high = vec![0u32; n];
    for i in 0..n {
        let x = w.site(i);
        let (l, h) = (low.occupancy[i], high.occupancy[i]);
        let p = if (-cfg.h..=cfg.h).contains(&x) { l.min(h) } else { 0 };
        both[i] = p;
        lone_low[i] = l - p;
        lone_high[i] = h - p;
    }
    let r = cfg.k as i64 * steps as i64;
    let (za, zb) = (w.index(-cfg.h + r), w.index(cfg.h - r));
    let mut rng = RngStream::derive(seed, &[domain::COUPLING]);
    let mut bits = LazySteps::new(&mut rng);
    let mut ok = true;
    let wrap = |i: usize, d: i64| (i as i64 + d).rem_euclid(n as i64) as usize;
    let times = probe_times(steps as f64);
    let mut samples = Vec::new();
    for s in 1..=steps {
        let mut nb = vec![0u32; n];
        let mut nl = vec![0u32; n];
        let mut nh = vec![0u32; n];
        for i in 0..n {
            for _ in 0..both[i] {
                nb[wrap(i, bits.step())] += 1;
            }
            for _ in 0..lone_low[i] {
                nl[wrap(i, bits.step())] += 1;
            }
            for _ in 0..lone_high[i] {
                nh[wrap(i, bits.step())] += 1;
            }
        }
        both = nb;
        lone_low = nl;
        lone_high = nh;
        if za <= zb {
            for i in za..=zb {
                if lone_low[i] > lone_high[i] {
                    ok = false;
                    rep.push_violations([w.site(i)]);
                }
            }
        }
        for (k, &pt) in times.iter().enumerate() {
            if pt.floor() as u64 == s {
                let (a, b) = (w.index(-cfg.h), w.index(cfg.h));
                let lc: u32 = (a..=b).map(|i| both[i] + lone_low[i]).sum();
                let hc: u32 = (a..=b).map(|i| both[i] + lone_high[i]).sum();
                samples.push(MarginalSample { layer: Layer::High, time_index: k, interval: (-cfg.h, cfg.h), count: hc });
                samples.push(MarginalSample { layer: Layer::Low, time_index: k, interval: (-cfg.h, cfg.h), count: lc });
            }
        }
    }
    rep.success.insert("sustained".into(), ok);
    rep.marginal_samples = samples;
    rep.probe_times = times;
    rep.regime_ok = true;
    Ok(())
}

/// Stage layout of a covering run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringConfig {
    pub rho: f64,
    pub eps: f64,
    pub nu: f64,
    pub t: f64,
    pub h: i64,
    /// Paving length; `⌊t^{1/4}⌋` when absent.
    pub mesh: Option<usize>,
    /// Number of stages; `mesh` when absent.
    pub stages: Option<usize>,
    /// Stage length; `mesh³` when absent.
    pub tau: Option<f64>,
    #[serde(default)]
    pub policy: Policy,
    /// Half-width of the centred interval used for marginal probes;
    /// `H` when absent.
    pub probe: Option<i64>,
}

impl CoveringConfig {
    pub fn new(rho: f64, eps: f64, nu: f64, t: f64, h: i64) -> Self {
        CoveringConfig { rho, eps, nu, t, h, mesh: None, stages: None, tau: None, policy: Policy::default(), probe: None }
    }

    pub fn mesh(&self) -> usize {
        self.mesh.unwrap_or_else(|| (self.t.max(0.0).powf(0.25) + 1e-9).floor() as usize)
    }

    pub fn plan(&self) -> (usize, usize, f64) {
        let m = self.mesh();
        let stages = self.stages.unwrap_or(m);
        let tau = self.tau.unwrap_or((m * m * m) as f64);
        (m, stages, tau)
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) || !(0.0..1.0).contains(&self.rho) || self.rho + self.eps > 1.0 {
            return Err(Error::param("covering needs ε > 0 and 0 ≤ ρ < ρ+ε ≤ 1"));
        }
        if !(self.nu > 0.0) || !(self.t >= 0.0) {
            return Err(Error::param("covering needs ν > 0 and t ≥ 0"));
        }
        if self.mesh() < 2 {
            return Err(Error::param("mesh must be at least 2"));
        }
        Ok(())
    }

    /// Bands on `[a, b]` required of the inputs.
    pub fn bands(&self, a: i64, b: i64) -> (Band, Band) {
        let m = self.mesh();
        let high = Band { region: (a, b), min_len: (m / 2).max(1), max_len: m, lower: Some(self.rho + 0.75 * self.eps), upper: None };
        let low = Band { region: (a, b), min_len: (m / 2).max(1), max_len: m, lower: None, upper: Some(self.rho + 0.25 * self.eps) };
        (high, low)
    }

    /// Whether `νt^{1/4}` clears `ε^{−2}(1 + |log³(νt)|)`, the shape of the
    /// regime in which the guarantee is stated (constants set to one).
    pub fn regime_ok(&self) -> bool {
        let nt = self.nu * self.t;
        self.nu * self.t.powf(0.25) > (1.0 + nt.ln().abs().powi(3)) / (self.eps * self.eps)
    }
}

fn check_bands(high: &EnvState, low: &EnvState, hb: &Band, lb: &Band) -> Result<()> {
    if let Some((x, len, c)) = hb.check(high) {
        return Err(Error::Hypothesis(format!("high has {c} particles on [{x}, {}]", x + len as i64 - 1)));
    }
    if let Some((x, len, c)) = lb.check(low) {
        return Err(Error::Hypothesis(format!("low has {c} particles on [{x}, {}]", x + len as i64 - 1)));
    }
    Ok(())
}

/// Staged construction on a set of shrinking regions. Returns whether a
/// strict fallback fired.
#[allow(clippy::too_many_arguments)]
fn run_stages(
    eng: &mut TwoLayer,
    rec: &mut Recorder,
    regions: &[(i64, i64)],
    mesh: usize,
    stages: usize,
    tau: f64,
    end: f64,
    theta: Option<f64>,
    policy: Policy,
    rep: &mut CouplingReport,
) -> Result<bool> {
    let start = eng.time();
    let nu = eng.nu;
    for i in 0..stages {
        let s0 = start + i as f64 * tau;
        if s0 >= end {
            break;
        }
        rec.advance_to(eng, s0)?;
        let shrink = (2.0 * nu * (s0 - start)).ceil() as i64;
        let ivs: Vec<(i64, i64)> = regions.iter().map(|&(a, b)| (a + shrink, b - shrink)).filter(|(a, b)| a <= b).collect();
        let density_ok = match theta {
            Some(th) => ivs.iter().all(|&(a, b)| eng.density_gap(a, b, mesh, th)),
            None => ivs.iter().all(|&(a, b)| pave(a, b, mesh).iter().all(|&(pa, pb)| eng.count(Layer::High, pa, pb) >= eng.count(Layer::Low, pa, pb))),
        };
        if !density_ok && policy == Policy::Strict {
            rep.stages.push(StageReport { index: i, start: s0, density_ok, paired: 0, matched: 0, unmatched: 0, fallback: true });
            return Ok(true);
        }
        let (paired, matched, unmatched) = eng.rematch(&ivs, mesh);
        rep.stages.push(StageReport { index: i, start: s0, density_ok, paired, matched, unmatched, fallback: false });
        rec.advance_to(eng, (s0 + tau).min(end))?;
    }
    Ok(false)
}

fn edge_in(a: i64, b: i64) -> impl Fn(i64) -> bool {
    move |x| a <= x && x < b
}

/// Covering the sparse configuration by the dense one.
///
/// Events: `covered` (domination on `[−H+4νt, H−4νt]` at time `t`) and
/// `all_stages_matched`.
pub fn covering_coupling(high: &EnvState, low: &EnvState, cfg: &CoveringConfig, seed: u64) -> Result<CouplingReport> {
    cfg.validate()?;
    high.same_window(low)?;
    check_half_width(high, cfg.h)?;
    let (hb, lb) = cfg.bands(-cfg.h, cfg.h);
    check_bands(high, low, &hb, &lb)?;
    let (mesh, stages, tau) = cfg.plan();
    let mut rep = CouplingReport::new("covering", serde_json::to_value(cfg).unwrap_or_default());
    rep.regime_ok = cfg.regime_ok();
    if !rep.regime_ok {
        rep.notes.push("parameters lie outside the asymptotic regime of the covering guarantee".into());
    }
    let mut eng = TwoLayer::new(high, low, cfg.nu, seed)?;
    let in_h = edge_in(-cfg.h, cfg.h);
    eng.set_modes(|x| if in_h(x) { EdgeMode::Thinned } else { EdgeMode::Independent });
    let p = cfg.probe.unwrap_or(cfg.h).min(cfg.h);
    let mut rec = Recorder::new(probe_times(cfg.t), (-p, p));
    let fallback = run_stages(
        &mut eng,
        &mut rec,
        &[(-cfg.h, cfg.h)],
        mesh,
        stages,
        tau,
        cfg.t,
        Some(cfg.rho + 0.5 * cfg.eps),
        cfg.policy,
        &mut rep,
    )?;
    if fallback {
        eng.set_modes(|_| EdgeMode::Independent);
        rep.notes.push("interval densities failed at a stage; layers evolved independently afterwards".into());
    } else {
        rec.advance_to(&mut eng, (stages as f64 * tau).min(cfg.t))?;
        eng.set_modes(|_| EdgeMode::Shared);
    }
    rec.advance_to(&mut eng, cfg.t)?;
    let r = (4.0 * cfg.nu * cfg.t).ceil() as i64;
    let bad = if cfg.h - r >= -cfg.h + r { eng.excess_sites(-cfg.h + r, cfg.h - r) } else { Vec::new() };
    rep.success.insert("covered".into(), bad.is_empty());
    rep.success.insert("all_stages_matched".into(), rep.stages.iter().all(|s| s.unmatched == 0 && !s.fallback));
    rep.push_violations(bad);
    rep.marginal_samples = rec.out;
    rep.probe_times = rec.times;
    rep.coalescence_violations = eng.coalescence_violations();
    rep.thinning = eng.thinning().clone();
    Ok(rep)
}

/// Scaled-down layout of the second re-pairing step of the surgery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepairPlan {
    /// Paving length.
    pub piece: usize,
    pub tau: f64,
    pub stages: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurgeryConfig {
    pub rho: f64,
    pub eps: f64,
    pub nu: f64,
    pub h1: i64,
    pub h2: i64,
    pub t: f64,
    pub mesh: usize,
    /// Length of the first step; `mesh⁴` when absent.
    pub t1: Option<f64>,
    pub repair: RepairPlan,
    #[serde(default)]
    pub policy: Policy,
}

impl SurgeryConfig {
    pub fn t1(&self) -> f64 {
        self.t1.unwrap_or((self.mesh as f64).powi(4))
    }

    pub fn t2(&self) -> f64 {
        self.t1() + self.repair.tau * self.repair.stages as f64
    }

    fn covering(&self) -> CoveringConfig {
        CoveringConfig {
            mesh: Some(self.mesh),
            policy: self.policy,
            ..CoveringConfig::new(self.rho, self.eps, self.nu, self.t1(), self.h2)
        }
    }
}

/// Drift coupling inside `[−H1, H1]`, covering on the two flanks of
/// `[−H2, H2]`, then a longer-range re-pairing of what is left near `±H1`.
///
/// Events: `inner_sustained` (domination on `[−H1+4νt, H1−4νt]` for all
/// times up to `t`), `outer_final` (domination on `[−H2+6νt, H2−6νt]` at
/// `t`), and the intermediate `g1`, `g2`.
pub fn surgery_coupling(high: &EnvState, low: &EnvState, cfg: &SurgeryConfig, seed: u64) -> Result<CouplingReport> {
    let cov = cfg.covering();
    cov.validate()?;
    high.same_window(low)?;
    check_half_width(high, cfg.h2)?;
    if cfg.h1 < 1 || cfg.h1 >= cfg.h2 {
        return Err(Error::param("surgery needs 1 ≤ H1 < H2"));
    }
    let (t1, t2) = (cfg.t1(), cfg.t2());
    if t2 > cfg.t || cfg.repair.piece < 2 || cfg.repair.tau <= 0.0 {
        return Err(Error::param("surgery needs t ≥ t1 + stages·τ₂ and a repair piece of at least 2"));
    }
    if let Some(x) = low.first_excess(high, -cfg.h1, cfg.h1) {
        return Err(Error::pre(format!("low exceeds high at {x} inside [−H1, H1]")));
    }
    let (hb, lb) = cov.bands(-cfg.h2, cfg.h2);
    check_band_flanks(high, low, &hb, &lb, cfg.h1)?;
    let mut rep = CouplingReport::new("surgery", serde_json::to_value(cfg).unwrap_or_default());
    rep.regime_ok = cov.regime_ok();
    let nu = cfg.nu;
    let mut eng = TwoLayer::new(high, low, nu, seed)?;
    let (h1, h2) = (cfg.h1, cfg.h2);
    let flank = move |x: i64| (-h2 <= x && x < -h1 - 1) || (h1 < x && x < h2);
    eng.set_modes(|x| if flank(x) { EdgeMode::Thinned } else { EdgeMode::Shared });
    let inner_r = (4.0 * nu * cfg.t).ceil() as i64;
    let inner = eng.add_watch(-h1 + inner_r, h1 - inner_r);
    let g1_r = (2.0 * nu * t1).ceil() as i64;
    let g1 = eng.add_watch(-h1 + g1_r, h1 - g1_r);
    let mut rec = Recorder::new(probe_times(cfg.t), (-h2, h2));
    let (mesh, stages, tau) = cov.plan();
    let regions = [(-h2, -h1 - 1), (h1 + 1, h2)];
    let fallback = run_stages(&mut eng, &mut rec, &regions, mesh, stages, tau, t1, Some(cfg.rho + 0.5 * cfg.eps), cfg.policy, &mut rep)?;
    if fallback {
        eng.set_modes(|x| if flank(x) { EdgeMode::Independent } else { EdgeMode::Shared });
    }
    rec.advance_to(&mut eng, t1)?;
    let g1_ok = eng.watch(g1).0 == 0;
    let mut g2_bad = eng.excess_sites(-h2 + g1_r, -h1 - g1_r - 1);
    g2_bad.extend(eng.excess_sites(h1 + g1_r + 1, h2 - g1_r));
    let g2_ok = g2_bad.is_empty();
    rep.success.insert("g1".into(), g1_ok);
    rep.success.insert("g2".into(), g2_ok);
    if g1_ok && g2_ok {
        eng.set_modes(|x| if (-h2..h2).contains(&x) { EdgeMode::Thinned } else { EdgeMode::Independent });
        let plan = cfg.repair;
        let fb = run_stages(
            &mut eng,
            &mut rec,
            &[(-h2 + g1_r, h2 - g1_r)],
            plan.piece,
            plan.stages,
            plan.tau,
            t2,
            None,
            cfg.policy,
            &mut rep,
        )?;
        if fb {
            eng.set_modes(|_| EdgeMode::Shared);
        }
        rec.advance_to(&mut eng, t2)?;
    } else {
        rep.notes.push("first step failed; shared clocks afterwards".into());
    }
    eng.set_modes(|_| EdgeMode::Shared);
    rec.advance_to(&mut eng, cfg.t)?;
    let (inner_hits, inner_sites) = eng.watch(inner);
    rep.push_violations(inner_sites.to_vec());
    rep.success.insert("inner_sustained".into(), inner_hits == 0);
    let r2 = (6.0 * nu * cfg.t).ceil() as i64;
    let outer_bad = if h2 - r2 >= -h2 + r2 { eng.excess_sites(-h2 + r2, h2 - r2) } else { Vec::new() };
    rep.success.insert("outer_final".into(), outer_bad.is_empty());
    rep.push_violations(outer_bad);
    rep.marginal_samples = rec.out;
    rep.probe_times = rec.times;
    rep.coalescence_violations = eng.coalescence_violations();
    rep.thinning = eng.thinning().clone();
    Ok(rep)
}

fn check_band_flanks(high: &EnvState, low: &EnvState, hb: &Band, lb: &Band, h1: i64) -> Result<()> {
    let (a, b) = hb.region;
    for region in [(a, -h1 - 1), (h1 + 1, b)] {
        if region.1 - region.0 + 1 < hb.max_len as i64 {
            return Err(Error::param("flanks are shorter than the mesh"));
        }
        check_bands(high, low, &Band { region, ..*hb }, &Band { region, ..*lb })?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprinklerConfig {
    pub nu: f64,
    pub rho: f64,
    pub ell: u64,
    /// Half-width of the window on which `low ≤ high` is given.
    pub h: i64,
}

/// Shared clocks; the surplus particle of `high` in `[0, ℓ]` keeps an empty
/// low site under it. Events `target_0`, `target_1`
/// (`{η_ℓ(x) > 0, η′_ℓ(x) = 0}`) and `dominated` (on `[−h+2νℓ, h−2νℓ]` at
/// all times).
pub fn sprinkler_coupling(high: &EnvState, low: &EnvState, cfg: &SprinklerConfig, seed: u64) -> Result<CouplingReport> {
    high.same_window(low)?;
    check_half_width(high, cfg.h)?;
    let l = cfg.ell as i64;
    if cfg.ell == 0 || cfg.h < 3 * l {
        return Err(Error::param("sprinkler needs ℓ ≥ 1 and h ≥ 3ℓ"));
    }
    if let Some(x) = low.first_excess(high, -cfg.h, cfg.h) {
        return Err(Error::pre(format!("low exceeds high at {x}")));
    }
    let count = |s: &EnvState, a: i64, b: i64| (a..=b).map(|x| s.get(x) as u64).sum::<u64>();
    if count(high, 0, l) < count(low, 0, l) + 1 {
        return Err(Error::pre("no surplus particle of high in [0, ℓ]"));
    }
    if count(low, -3 * l + 1, 3 * l) as f64 > 6.0 * (cfg.rho + 1.0) * l as f64 {
        return Err(Error::pre("low is too dense around the origin"));
    }
    let mut rep = CouplingReport::new("sprinkler", serde_json::to_value(cfg).unwrap_or_default());
    let mut eng = TwoLayer::new(high, low, cfg.nu, seed)?;
    let r = (2.0 * cfg.nu * l as f64).ceil() as i64;
    let w = eng.add_watch(-cfg.h + r, cfg.h - r);
    let t = l as f64;
    let mut rec = Recorder::new(probe_times(t), (-cfg.h, cfg.h));
    rec.advance_to(&mut eng, t)?;
    for x in [0, 1] {
        let hit = eng.get(Layer::High, x) > 0 && eng.get(Layer::Low, x) == 0;
        rep.success.insert(format!("target_{x}"), hit);
    }
    let (hits, sites) = eng.watch(w);
    rep.push_violations(sites.to_vec());
    rep.success.insert("dominated".into(), hits == 0);
    rep.marginal_samples = rec.out;
    rep.probe_times = rec.times;
    rep.regime_ok = true;
    Ok(rep)
}

/// Inputs of the scale-doubling coupling between `P^{ρ,L}` and
/// `P^{ρ+ε,2L}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleConfig {
    pub model: ModelParams,
    pub eps: f64,
    pub l: u64,
    /// Sprinkling scale; the covering runs for `t = ⌊f/2⌋`.
    pub f: u64,
    /// Paving length of the covering; `⌊t^{1/4}⌋` (at least 2) when absent.
    pub mesh: Option<usize>,
    #[serde(default)]
    pub policy: Policy,
}

impl ScaleConfig {
    pub fn t(&self) -> u64 {
        self.f / 2
    }

    pub fn window(&self) -> Result<LatticeWindow> {
        let nu = self.model.env.nu;
        LatticeWindow::new((3.0 * self.l as f64 + 4.0 * nu * self.l as f64).ceil() as usize + 32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCoupling {
    pub traj1: Trajectory,
    pub traj2: Trajectory,
    /// `min_{s ≤ 2L} (X²_s − X¹_s)`.
    pub min_gap: i64,
    /// Interval densities at the renewal allowed the covering.
    pub g_density: bool,
    /// Shifted domination on `[−3L, 3L]` at `L + t`.
    pub g_cover: bool,
    /// Shifted domination on `[−3L, 3L]` during `[L+t, 2L)`.
    pub g_sustained: bool,
    pub stages: Vec<StageReport>,
    pub coalescence_violations: u64,
    pub notes: Vec<String>,
}

impl ScaleCoupling {
    pub fn good(&self) -> bool {
        self.g_cover && self.g_sustained
    }
}

/// Both walks share arrows up to `L` on monotone environments. At `L` the
/// first environment is resampled; the second, shifted right by `2t`, is
/// coupled to cover it within `t`, and from then on the second walk reads
/// the arrows of the first shifted by `2t`. On the good event the second
/// walk never falls more than `2t` behind.
pub fn sprinkled_scale_coupling(cfg: &ScaleConfig, seed: u64) -> Result<ScaleCoupling> {
    let env = cfg.model.env;
    if env.model != Model::Sep {
        return Err(Error::param("the scale coupling is implemented for SEP"));
    }
    let hi_params = env.with_rho(env.rho + cfg.eps)?;
    if !(cfg.eps > 0.0) || cfg.l == 0 || cfg.f < 2 {
        return Err(Error::param("scale coupling needs ε > 0, L ≥ 1 and f ≥ 2"));
    }
    let (l, t) = (cfg.l, cfg.t());
    if t >= l {
        return Err(Error::param("need ⌊f/2⌋ < L"));
    }
    let window = cfg.window()?;
    let mut rng = RngStream::derive(seed, &[domain::ENV_INIT]);
    let (low0, high0) = sample_ordered_pair(&env, hi_params.rho, window, &mut rng)?;
    let arrows = ArrowSource::new(derive_seed(seed, &[domain::ARROWS]));
    let arrows2 = ShiftedArrows { base: arrows.clone(), shift: -2 * t as i64, from: l };
    let walk = cfg.model.walk;
    let mut x1 = 0i64;
    let mut x2 = 0i64;
    let mut traj1 = Trajectory::new(SpaceTimePoint::origin());
    let mut traj2 = Trajectory::new(SpaceTimePoint::origin());
    let mut min_gap = 0i64;
    let mut eng = TwoLayer::new(&high0, &low0, env.nu, derive_seed(seed, &[domain::COUPLING, 0]))?;
    let mut notes = Vec::new();
    let shift = 2 * t as i64;
    let step = |eng: &TwoLayer, s: u64, x1: &mut i64, x2: &mut i64, t1: &mut Trajectory, t2: &mut Trajectory, off: i64| {
        let a = arrow(eng.get(Layer::Low, *x1), arrows.u(*x1, s), &walk);
        let b = arrow(eng.get(Layer::High, *x2 + off), arrows2.u(*x2, s), &walk);
        *x1 += a as i64;
        *x2 += b as i64;
        t1.steps.push(a);
        t2.steps.push(b);
    };
    let zone = 3 * l as i64;
    for s in 0..l {
        step(&eng, s, &mut x1, &mut x2, &mut traj1, &mut traj2, 0);
        min_gap = min_gap.min(x2 - x1);
        eng.advance(1.0)?;
    }
    let mut high1 = eng.state(Layer::High);
    let n = window.len();
    let rotated: Vec<u32> = (0..n).map(|i| high1.occupancy[(i + n - (shift as usize % n)) % n]).collect();
    high1.occupancy = rotated;
    high1.time = 0.0;
    let low1 = sample_stationary(&env, window, &mut RngStream::derive(seed, &[domain::BLOCK, 1]))?;
    let cov = CoveringConfig {
        mesh: Some(cfg.mesh.unwrap_or_else(|| ((t as f64).powf(0.25) + 1e-9).floor() as usize).max(2)),
        policy: cfg.policy,
        ..CoveringConfig::new(env.rho, cfg.eps, env.nu, t as f64, window.half_width as i64 - 1)
    };
    let (mesh, stages, tau) = cov.plan();
    let h = cov.h;
    let mut eng = TwoLayer::new(&high1, &low1, env.nu, derive_seed(seed, &[domain::COUPLING, 1]))?;
    let (hb, lb) = cov.bands(-h, h);
    let g_density = hb.check(&high1).is_none() && lb.check(&low1).is_none();
    let mut stage_reports = Vec::new();
    let proceed = g_density || cfg.policy == Policy::BestEffort;
    let mut covering = proceed;
    let in_h = edge_in(-h, h);
    eng.set_modes(|x| if proceed && in_h(x) { EdgeMode::Thinned } else { EdgeMode::Independent });
    if !proceed {
        notes.push("interval densities failed at the renewal; independent evolution".into());
    } else if !g_density {
        notes.push("interval densities failed at the renewal; covering ran best-effort".into());
    }
    let tau = tau.round().max(1.0) as u64;
    for k in 0..t {
        if covering && k % tau == 0 && ((k / tau) as usize) < stages {
            let i = (k / tau) as usize;
            let shrink = (2.0 * env.nu * k as f64).ceil() as i64;
            let density_ok = eng.density_gap(-h + shrink, h - shrink, mesh, env.rho + 0.5 * cfg.eps);
            if !density_ok && cfg.policy == Policy::Strict {
                stage_reports.push(StageReport { index: i, start: k as f64, density_ok, paired: 0, matched: 0, unmatched: 0, fallback: true });
                eng.set_modes(|_| EdgeMode::Independent);
                covering = false;
            } else {
                let (paired, matched, unmatched) = eng.rematch(&[(-h + shrink, h - shrink)], mesh);
                stage_reports.push(StageReport { index: i, start: k as f64, density_ok, paired, matched, unmatched, fallback: false });
            }
        }
        if covering && k == tau * stages as u64 {
            eng.set_modes(|_| EdgeMode::Shared);
        }
        step(&eng, l + k, &mut x1, &mut x2, &mut traj1, &mut traj2, shift);
        min_gap = min_gap.min(x2 - x1);
        eng.advance(1.0)?;
    }
    let cover_end = covering.then_some(());
    if covering {
        eng.set_modes(|_| EdgeMode::Shared);
    }
    let g_cover = cover_end.is_some() && eng.excess_sites(-zone, zone).is_empty();
    if !g_cover {
        eng.set_modes(|_| EdgeMode::Independent);
    }
    let w = eng.add_watch(-zone, zone);
    for k in t..l {
        step(&eng, l + k, &mut x1, &mut x2, &mut traj1, &mut traj2, shift);
        min_gap = min_gap.min(x2 - x1);
        eng.advance(1.0)?;
    }
    let g_sustained = g_cover && eng.watch(w).0 == 0;
    Ok(ScaleCoupling {
        traj1,
        traj2,
        min_gap,
        g_density,
        g_cover,
        g_sustained,
        stages: stage_reports,
        coalescence_violations: eng.coalescence_violations(),
        notes,
    })
}

/// Independent draws of a covering input pair: on `[−H, H]` both
/// configurations satisfy the density bands, elsewhere they are stationary
/// at `rho_high` and `rho_low`.
pub fn sample_covering_pair(
    cfg: &CoveringConfig,
    window: LatticeWindow,
    rho_high: f64,
    rho_low: f64,
    rng: &mut RngStream,
) -> Result<(EnvState, EnvState)> {
    let (hb, lb) = cfg.bands(-cfg.h, cfg.h);
    let high = sample_banded(&EnvParams::sep(rho_high, cfg.nu)?, window, &[hb], rng)?;
    let low = sample_banded(&EnvParams::sep(rho_low, cfg.nu)?, window, &[lb], rng)?;
    Ok((high, low))
}

/// A surgery input: banded configurations on `[−H2, H2]` with `low`
/// thinned to lie under `high` on `[−H1, H1]`.
pub fn sample_surgery_pair(
    cfg: &SurgeryConfig,
    window: LatticeWindow,
    rho_high: f64,
    rho_low: f64,
    rng: &mut RngStream,
) -> Result<(EnvState, EnvState)> {
    let cov = cfg.covering();
    let (high, mut low) = sample_covering_pair(&cov, window, rho_high, rho_low, rng)?;
    for x in -cfg.h1..=cfg.h1 {
        let v = low.get(x).min(high.get(x));
        low.set(x, v);
    }
    Ok((high, low))
}

/// A sprinkler input: an ordered stationary pair with the low particles in
/// `[0, ℓ]` removed from one site that `high` occupies (one is added if
/// needed).
pub fn sample_sprinkler_pair(
    cfg: &SprinklerConfig,
    window: LatticeWindow,
    rho_high: f64,
    rng: &mut RngStream,
) -> Result<(EnvState, EnvState)> {
    let params = EnvParams::sep(cfg.rho, cfg.nu)?;
    let (mut low, mut high) = sample_ordered_pair(&params, rho_high, window, rng)?;
    let l = cfg.ell as i64;
    let x0 = (0..=l).find(|&x| high.get(x) == 1 && low.get(x) == 0).unwrap_or_else(|| rng.below(cfg.ell as usize + 1) as i64);
    high.set(x0, 1);
    low.set(x0, 0);
    Ok((high, low))
}
