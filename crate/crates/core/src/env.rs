//! Lattice-window configurations, stationary samplers and density statistics
//! shared by both particle systems.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{poisson_inverse, RngStream};

/// Which particle system drives the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Symmetric simple exclusion, at most one particle per site.
    Sep,
    /// Poisson cloud of independent lazy random walks.
    Pcrw,
}

impl std::fmt::Display for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Model::Sep => "sep",
            Model::Pcrw => "pcrw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Periodic,
}

/// Sites `−M..=M`, wrapping modulo `2M+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeWindow {
    pub half_width: usize,
    pub boundary: Boundary,
}

impl LatticeWindow {
    pub fn new(half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::param("window half-width must be at least 1"));
        }
        Ok(LatticeWindow { half_width, boundary: Boundary::Periodic })
    }

    /// Number of sites, `2M+1`.
    #[inline]
    pub fn len(&self) -> usize {
        2 * self.half_width + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Storage index of site `x` after wrapping.
    #[inline]
    pub fn index(&self, x: i64) -> usize {
        (x + self.half_width as i64).rem_euclid(self.len() as i64) as usize
    }

    /// Site label of storage index `i`.
    #[inline]
    pub fn site(&self, i: usize) -> i64 {
        i as i64 - self.half_width as i64
    }

    #[inline]
    pub fn contains(&self, x: i64) -> bool {
        x.unsigned_abs() as usize <= self.half_width
    }

    pub fn sites(&self) -> std::ops::RangeInclusive<i64> {
        -(self.half_width as i64)..=self.half_width as i64
    }
}

/// Density, rate and model of an environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    pub model: Model,
    pub rho: f64,
    pub nu: f64,
    /// Admits the degenerate densities `ρ = 0` and (for SEP) `ρ = 1`.
    #[serde(default)]
    pub boundary_mode: bool,
}

/// Densities above this trigger a memory warning for the Poisson cloud.
pub const PCRW_SOFT_LIMIT: f64 = 1e3;

impl EnvParams {
    pub fn new(model: Model, rho: f64, nu: f64) -> Result<Self> {
        let p = EnvParams { model, rho, nu, boundary_mode: false };
        p.validate()?;
        Ok(p)
    }

    /// Parameters that additionally allow the frozen densities `ρ ∈ {0, 1}`.
    pub fn boundary(model: Model, rho: f64, nu: f64) -> Result<Self> {
        let p = EnvParams { model, rho, nu, boundary_mode: true };
        p.validate()?;
        Ok(p)
    }

    pub fn sep(rho: f64, nu: f64) -> Result<Self> {
        Self::new(Model::Sep, rho, nu)
    }

    pub fn pcrw(rho: f64, nu: f64) -> Result<Self> {
        Self::new(Model::Pcrw, rho, nu)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::param(format!("rate nu must be positive, got {}", self.nu)));
        }
        if !self.rho.is_finite() {
            return Err(Error::param("density must be finite"));
        }
        match self.model {
            Model::Sep => {
                let ok = if self.boundary_mode {
                    (0.0..=1.0).contains(&self.rho)
                } else {
                    self.rho > 0.0 && self.rho < 1.0
                };
                if !ok {
                    return Err(Error::param(format!("SEP density must lie in (0,1), got {}", self.rho)));
                }
            }
            Model::Pcrw => {
                let ok = if self.boundary_mode { self.rho >= 0.0 } else { self.rho > 0.0 };
                if !ok {
                    return Err(Error::param(format!("PCRW density must be positive, got {}", self.rho)));
                }
            }
        }
        Ok(())
    }

    /// Parameters at another density, keeping model, rate and mode.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        let p = EnvParams { rho, ..*self };
        p.validate()?;
        Ok(p)
    }

    /// `true` when the environment never changes: SEP at `ρ ∈ {0,1}` or
    /// an empty cloud.
    pub fn is_frozen(&self) -> bool {
        self.rho == 0.0 || (self.model == Model::Sep && self.rho == 1.0)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.model == Model::Pcrw && self.rho > PCRW_SOFT_LIMIT {
            w.push(format!("PCRW density {} exceeds {PCRW_SOFT_LIMIT}; particle storage grows linearly", self.rho));
        }
        w
    }
}

/// Stationary occupancy of one site as a monotone function of a uniform
/// `v`: a larger density never yields a smaller value for the same `v`.
#[inline]
pub fn stationary_site(model: Model, rho: f64, v: f64) -> u32 {
    match model {
        Model::Sep => u32::from(v < rho),
        Model::Pcrw => {
            if rho <= 0.0 {
                0
            } else {
                poisson_inverse(rho, v)
            }
        }
    }
}

/// Occupancy configuration on a periodic window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub window: LatticeWindow,
    pub model: Model,
    pub occupancy: Vec<u32>,
    pub time: f64,
}

impl EnvState {
    pub fn empty(model: Model, window: LatticeWindow) -> Self {
        EnvState { window, model, occupancy: vec![0; window.len()], time: 0.0 }
    }

    pub fn filled(model: Model, window: LatticeWindow, value: u32) -> Self {
        EnvState { window, model, occupancy: vec![value; window.len()], time: 0.0 }
    }

    /// Builds a state from occupancies listed for sites `−M..=M` in order.
    pub fn from_sites(model: Model, occupancy: Vec<u32>) -> Result<Self> {
        if occupancy.len() % 2 == 0 || occupancy.len() < 3 {
            return Err(Error::param("a periodic window needs an odd number (≥3) of sites"));
        }
        let window = LatticeWindow::new(occupancy.len() / 2)?;
        let s = EnvState { window, model, occupancy, time: 0.0 };
        s.check_model()?;
        Ok(s)
    }

    #[inline]
    pub fn get(&self, x: i64) -> u32 {
        self.occupancy[self.window.index(x)]
    }

    #[inline]
    pub fn set(&mut self, x: i64, v: u32) {
        let i = self.window.index(x);
        self.occupancy[i] = v;
    }

    pub fn total(&self) -> u64 {
        self.occupancy.iter().map(|&v| v as u64).sum()
    }

    pub fn check_model(&self) -> Result<()> {
        if self.model == Model::Sep && self.occupancy.iter().any(|&v| v > 1) {
            return Err(Error::pre("SEP occupancy must be 0 or 1"));
        }
        Ok(())
    }

    pub fn expect_model(&self, model: Model) -> Result<()> {
        if self.model != model {
            return Err(Error::ModelMismatch { expected: model, found: self.model });
        }
        Ok(())
    }

    pub fn same_window(&self, other: &EnvState) -> Result<()> {
        if self.window != other.window {
            return Err(Error::WindowMismatch { left: self.window.len(), right: other.window.len() });
        }
        Ok(())
    }

    /// `true` when `self ≤ other` at every site of `[a, b]`.
    pub fn dominated_on(&self, other: &EnvState, a: i64, b: i64) -> bool {
        (a..=b).all(|x| self.get(x) <= other.get(x))
    }

    /// First site of `[a, b]` where `self > other`.
    pub fn first_excess(&self, other: &EnvState, a: i64, b: i64) -> Option<i64> {
        (a..=b).find(|&x| self.get(x) > other.get(x))
    }
}

/// The particle count of a site range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalCount {
    pub a: i64,
    pub b: i64,
    pub count: u64,
}

impl IntervalCount {
    /// `b − a + 1`.
    pub fn len(&self) -> u64 {
        (self.b - self.a + 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.b < self.a
    }
}

/// Draws every site independently from `Ber(ρ)` (SEP) or `Poi(ρ)` (PCRW).
pub fn sample_stationary(params: &EnvParams, window: LatticeWindow, rng: &mut RngStream) -> Result<EnvState> {
    params.validate()?;
    let mut s = EnvState::empty(params.model, window);
    for v in s.occupancy.iter_mut() {
        *v = match params.model {
            Model::Sep => u32::from(rng.unit() < params.rho),
            Model::Pcrw => rng.poisson(params.rho),
        };
    }
    Ok(s)
}

/// Samples `low ≤ high` sitewise with stationary marginals at densities
/// `rho_low ≤ rho_high`: a shared uniform per site for SEP, an additive
/// Poisson surplus for PCRW.
pub fn sample_ordered_pair(
    params: &EnvParams,
    rho_high: f64,
    window: LatticeWindow,
    rng: &mut RngStream,
) -> Result<(EnvState, EnvState)> {
    params.validate()?;
    params.with_rho(rho_high)?;
    if rho_high < params.rho {
        return Err(Error::param("the dominating density must not be smaller"));
    }
    let mut low = EnvState::empty(params.model, window);
    let mut high = low.clone();
    for i in 0..window.len() {
        match params.model {
            Model::Sep => {
                let u = rng.unit();
                low.occupancy[i] = u32::from(u < params.rho);
                high.occupancy[i] = u32::from(u < rho_high);
            }
            Model::Pcrw => {
                let a = rng.poisson(params.rho);
                low.occupancy[i] = a;
                high.occupancy[i] = a + rng.poisson(rho_high - params.rho);
            }
        }
    }
    Ok((low, high))
}

/// Exact `η(I)` for `I = [a, b]` (wrapping).
pub fn interval_count(state: &EnvState, a: i64, b: i64) -> Result<IntervalCount> {
    if b < a {
        return Ok(IntervalCount { a, b, count: 0 });
    }
    if (b - a + 1) as usize > state.window.len() {
        return Err(Error::pre(format!("interval [{a},{b}] is longer than the window")));
    }
    let count = (a..=b).map(|x| state.get(x) as u64).sum();
    Ok(IntervalCount { a, b, count })
}

/// Counts of all length-`len` intervals with left end in `[a, b − len + 1]`.
pub fn sliding_counts(state: &EnvState, a: i64, b: i64, len: usize) -> Vec<u64> {
    if len == 0 || b - a + 1 < len as i64 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity((b - a + 2) as usize - len);
    let mut s: u64 = (a..a + len as i64).map(|x| state.get(x) as u64).sum();
    out.push(s);
    for left in a + 1..=b - len as i64 + 1 {
        s = s + state.get(left + len as i64 - 1) as u64 - state.get(left - 1) as u64;
        out.push(s);
    }
    out
}

/// Which clause of the balance condition failed first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BalanceViolation {
    /// `high(x) < low(x)`.
    Domination { site: i64 },
    /// A mesh interval starting at `start` has too few `high` particles.
    HighDensity { start: i64, count: u64 },
    /// A mesh interval starting at `start` has too many `low` particles.
    LowDensity { start: i64, count: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Balance {
    pub balanced: bool,
    pub witness: Option<BalanceViolation>,
}

/// Sitewise domination plus the two mesh-density clauses on `[−M, M]`:
/// every length-`mesh` interval holds at least `(ρ + 99ε/100)·mesh` high
/// particles and at most `(ρ + ε/100)·mesh` low particles.
pub fn check_balanced(high: &EnvState, low: &EnvState, m: usize, mesh: usize, rho: f64, eps: f64) -> Result<Balance> {
    high.same_window(low)?;
    if mesh == 0 {
        return Err(Error::param("mesh must be at least 1"));
    }
    if m > high.window.half_width {
        return Err(Error::pre("balance window exceeds the lattice window"));
    }
    let (a, b) = (-(m as i64), m as i64);
    if let Some(site) = low.first_excess(high, a, b) {
        return Ok(Balance { balanced: false, witness: Some(BalanceViolation::Domination { site }) });
    }
    let need = (rho + 0.99 * eps) * mesh as f64;
    for (k, &c) in sliding_counts(high, a, b, mesh).iter().enumerate() {
        if (c as f64) < need {
            let w = BalanceViolation::HighDensity { start: a + k as i64, count: c };
            return Ok(Balance { balanced: false, witness: Some(w) });
        }
    }
    let cap = (rho + 0.01 * eps) * mesh as f64;
    for (k, &c) in sliding_counts(low, a, b, mesh).iter().enumerate() {
        if c as f64 > cap {
            let w = BalanceViolation::LowDensity { start: a + k as i64, count: c };
            return Ok(Balance { balanced: false, witness: Some(w) });
        }
    }
    Ok(Balance { balanced: true, witness: None })
}

/// The tail bounds for Poisson and binomial counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Concentration {
    /// `P(X ≥ λ + x)` for `X ~ Poi(λ)`, `λ, x > 0`.
    PoissonUpper { lambda: f64, x: f64 },
    /// `P(X ≤ λ − x)` for `X ~ Poi(λ)`, `x ∈ [0, λ]`.
    PoissonLower { lambda: f64, x: f64 },
    /// `P(X ≥ (p+q)m)` for `X ~ Bin(m, p)`, `q ∈ (0, 1−p)`.
    BinomialUpper { m: u64, p: f64, q: f64 },
    /// `P(X ≤ (p−q)m)` for `X ~ Bin(m, p)`, `q ∈ (0, p)`.
    BinomialLower { m: u64, p: f64, q: f64 },
}

pub fn concentration_bound(kind: Concentration) -> Result<f64> {
    match kind {
        Concentration::PoissonUpper { lambda, x } => {
            if !(lambda > 0.0 && x > 0.0) {
                return Err(Error::param("Poisson upper bound needs λ, x > 0"));
            }
            Ok((-x * x / (2.0 * (lambda + x))).exp())
        }
        Concentration::PoissonLower { lambda, x } => {
            if !(lambda > 0.0 && (0.0..=lambda).contains(&x)) {
                return Err(Error::param("Poisson lower bound needs λ > 0 and x ∈ [0, λ]"));
            }
            Ok((-x * x / (2.0 * (lambda + x))).exp())
        }
        Concentration::BinomialUpper { m, p, q } => {
            if !(m > 0 && (0.0..=1.0).contains(&p) && q > 0.0 && q < 1.0 - p) {
                return Err(Error::param("binomial upper bound needs q ∈ (0, 1−p)"));
            }
            Ok((-(m as f64) * q * q / 3.0).exp())
        }
        Concentration::BinomialLower { m, p, q } => {
            if !(m > 0 && (0.0..=1.0).contains(&p) && q > 0.0 && q < p) {
                return Err(Error::param("binomial lower bound needs q ∈ (0, p)"));
            }
            Ok((-(m as f64) * q * q / 2.0).exp())
        }
    }
}

/// Interval-density constraints for [`sample_banded`]: every interval inside
/// `[region.0, region.1]` whose length lies in `min_len..=max_len` must hold
/// between `lower·|I|` and `upper·|I|` particles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub region: (i64, i64),
    pub min_len: usize,
    pub max_len: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Band {
    pub fn check(&self, state: &EnvState) -> Option<(i64, usize, u64)> {
        let (a, b) = self.region;
        for len in self.min_len.max(1)..=self.max_len {
            for (k, &c) in sliding_counts(state, a, b, len).iter().enumerate() {
                let lo_bad = self.lower.is_some_and(|l| (c as f64) < l * len as f64 - 1e-9);
                let hi_bad = self.upper.is_some_and(|u| c as f64 > u * len as f64 + 1e-9);
                if lo_bad || hi_bad {
                    return Some((a + k as i64, len, c));
                }
            }
        }
        None
    }
}

/// Stationary proposals clamped site by site (left to right) so that every
/// constrained interval ending at the current site stays within its band.
/// Sites outside all bands keep their stationary draw.
pub fn sample_banded(params: &EnvParams, window: LatticeWindow, bands: &[Band], rng: &mut RngStream) -> Result<EnvState> {
    let mut s = sample_stationary(params, window, rng)?;
    let cap = if params.model == Model::Sep { 1u64 } else { u64::MAX };
    let (lo_site, hi_site) = (-(window.half_width as i64), window.half_width as i64);
    for band in bands {
        if band.region.0 < lo_site || band.region.1 > hi_site || band.min_len == 0 || band.max_len < band.min_len {
            return Err(Error::param("band region must lie in the window with 1 ≤ min_len ≤ max_len"));
        }
    }
    let mut prefix = vec![0u64; window.len() + 1];
    for x in lo_site..=hi_site {
        let i = (x - lo_site) as usize;
        let mut need = 0u64;
        let mut allow = cap;
        for band in bands {
            if x < band.region.0 || x > band.region.1 {
                continue;
            }
            for len in band.min_len..=band.max_len {
                let len_i = len as i64;
                let first = (x - len_i + 1).max(band.region.0);
                let last = x.min(band.region.1 - len_i + 1);
                for start in first..=last {
                    let before = prefix[i] - prefix[(start - lo_site) as usize];
                    let after = (start + len_i - 1 - x) as u64;
                    if let Some(l) = band.lower {
                        let req = (l * len as f64 - 1e-9).ceil().max(0.0) as u64;
                        let later = cap.saturating_mul(after);
                        need = need.max(req.saturating_sub(before).saturating_sub(later));
                    }
                    if let Some(u) = band.upper {
                        let lim = (u * len as f64 + 1e-9).floor().max(0.0) as u64;
                        if lim < before {
                            return Err(Error::pre(format!("band infeasible at site {x}")));
                        }
                        allow = allow.min(lim - before);
                    }
                }
            }
        }
        if need > allow {
            return Err(Error::pre(format!("band constraints infeasible at site {x}")));
        }
        let v = (s.occupancy[i] as u64).clamp(need, allow) as u32;
        s.occupancy[i] = v;
        prefix[i + 1] = prefix[i] + v as u64;
    }
    Ok(s)
}

/// Inputs of [`density_conservation_test`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityTest {
    pub params: EnvParams,
    pub window: LatticeWindow,
    pub t: f64,
    pub mesh: usize,
    pub eps: f64,
    pub reps: usize,
    /// Largest acceptable exceedance rate.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub exceedances: usize,
    pub reps: usize,
    pub rate: f64,
    pub threshold: f64,
    pub passed: bool,
    /// Whether `mesh² < νt` held, the regime the guarantee speaks about.
    pub regime_ok: bool,
    pub max_deviation: f64,
}

/// Starts from configurations whose every mesh interval count is within
/// `ε·mesh` of `ρ·mesh`, evolves them for time `t` and counts replications
/// in which some mesh interval of the shrunken window deviates by more than
/// `3ε·mesh`.
pub fn density_conservation_test(cfg: &DensityTest, seed: u64) -> Result<DensityReport> {
    use rayon::prelude::*;
    cfg.params.validate()?;
    if cfg.mesh == 0 || cfg.reps == 0 || cfg.t < 0.0 {
        return Err(Error::param("density test needs mesh ≥ 1, reps ≥ 1, t ≥ 0"));
    }
    let m = cfg.window.half_width as i64;
    let speed = match cfg.params.model {
        Model::Sep => 4.0 * cfg.params.nu,
        Model::Pcrw => 1.0,
    };
    let shrink = ((speed * cfg.t).ceil() as i64).min(m / 2);
    let (a, b) = (-m + shrink, m - shrink);
    let target = cfg.params.rho * cfg.mesh as f64;
    let band = Band {
        region: (-m, m),
        min_len: cfg.mesh,
        max_len: cfg.mesh,
        lower: Some(cfg.params.rho - cfg.eps),
        upper: Some(cfg.params.rho + cfg.eps),
    };
    let outcomes: Vec<Result<f64>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let rs = crate::rng::replication_seed(seed, rep as u64);
            let mut rng = RngStream::derive(rs, &[crate::rng::domain::ENV_INIT]);
            let mut s = if cfg.params.is_frozen() {
                sample_stationary(&cfg.params, cfg.window, &mut rng)?
            } else {
                sample_banded(&cfg.params, cfg.window, &[band], &mut rng)?
            };
            match cfg.params.model {
                Model::Sep => {
                    let mut clocks = crate::sep::SepClocks::new(rs, 0, cfg.params.nu);
                    crate::sep::evolve_sep(&mut s, cfg.t, &mut clocks)?;
                }
                Model::Pcrw => {
                    let mut r = RngStream::derive(rs, &[crate::rng::domain::ENV_EVOLVE]);
                    crate::pcrw::evolve_pcrw(&mut s, cfg.t.round() as u64, &mut r)?;
                }
            }
            let dev = sliding_counts(&s, a, b, cfg.mesh)
                .iter()
                .map(|&c| (c as f64 - target).abs())
                .fold(0.0, f64::max);
            Ok(dev)
        })
        .collect();
    let mut exceed = 0;
    let mut max_dev: f64 = 0.0;
    for o in outcomes {
        let d = o?;
        max_dev = max_dev.max(d);
        if d > 3.0 * cfg.eps * cfg.mesh as f64 {
            exceed += 1;
        }
    }
    let rate = exceed as f64 / cfg.reps as f64;
    Ok(DensityReport {
        exceedances: exceed,
        reps: cfg.reps,
        rate,
        threshold: cfg.threshold,
        passed: rate <= cfg.threshold,
        regime_ok: ((cfg.mesh * cfg.mesh) as f64) < cfg.params.nu * cfg.t,
        max_deviation: max_dev,
    })
}
