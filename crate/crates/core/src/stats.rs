//! Estimates with confidence intervals and the goodness-of-fit machinery the
//! statistical test suites are built on.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// How a confidence interval was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    /// Normal quantiles around the sample mean.
    Normal,
    /// Normal quantiles with a batch-means standard error.
    BatchMeans,
    /// Wilson score interval for a proportion.
    Wilson,
}

/// Point estimate with standard error, confidence interval and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub mean: f64,
    pub stderr: f64,
    pub ci: (f64, f64),
    pub level: f64,
    pub reps: u64,
    pub seed: u64,
    pub method: CiMethod,
    /// Time horizon of each replication, where meaningful.
    pub horizon: Option<u64>,
}

impl EstimateWithCI {
    /// Distance of `value` from the mean in standard errors. Infinite when
    /// the standard error vanishes and the values differ.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = self.mean - value;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }

    /// `|mean − value| ≤ k·stderr`.
    pub fn within(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci.0 <= value && value <= self.ci.1
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = Some(horizon);
        self
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

fn two_sided_z(level: f64) -> f64 {
    normal_quantile(0.5 + level / 2.0)
}

/// Running mean and variance (Welford). `merge` is associative, so
/// partial summaries can be combined in any grouping.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Summary {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Summary) -> Summary {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        Summary { n, mean, m2 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Summary {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Summary::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<Summary>().variance()
}

/// Normal-theory estimate of a mean from i.i.d. replications.
pub fn estimate_mean(samples: &[f64], level: f64, seed: u64) -> Result<EstimateWithCI> {
    if samples.len() < 2 {
        return Err(Error::param("an estimate needs at least two replications"));
    }
    let s: Summary = samples.iter().copied().collect();
    let se = s.stderr();
    let z = two_sided_z(level);
    Ok(EstimateWithCI {
        mean: s.mean,
        stderr: se,
        ci: (s.mean - z * se, s.mean + z * se),
        level,
        reps: samples.len() as u64,
        seed,
        method: CiMethod::Normal,
        horizon: None,
    })
}

/// Batch-means estimate: the samples are split into `batches` contiguous
/// groups and the standard error is computed from the batch averages.
/// With i.i.d. replications this agrees with [`estimate_mean`] in
/// expectation; it stays honest when neighbouring samples are correlated.
pub fn estimate_batch_means(
    samples: &[f64],
    batches: usize,
    level: f64,
    seed: u64,
) -> Result<EstimateWithCI> {
    let batches = batches.min(samples.len());
    if batches < 2 {
        return Err(Error::param("batch means needs at least two batches"));
    }
    let per = samples.len() / batches;
    let used = per * batches;
    let batch_avgs: Vec<f64> = samples[..used].chunks(per).map(mean).collect();
    let bs: Summary = batch_avgs.iter().copied().collect();
    let m = mean(samples);
    let se = bs.stderr();
    let z = two_sided_z(level);
    Ok(EstimateWithCI {
        mean: m,
        stderr: se,
        ci: (m - z * se, m + z * se),
        level,
        reps: samples.len() as u64,
        seed,
        method: CiMethod::BatchMeans,
        horizon: None,
    })
}

/// Wilson score interval for `successes` out of `n` trials.
pub fn wilson_interval(successes: u64, n: u64, level: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = two_sided_z(level);
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

/// Proportion estimate with a Wilson interval.
pub fn estimate_proportion(successes: u64, n: u64, level: f64, seed: u64) -> Result<EstimateWithCI> {
    if n < 2 {
        return Err(Error::param("a proportion needs at least two trials"));
    }
    let p = successes as f64 / n as f64;
    Ok(EstimateWithCI {
        mean: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        ci: wilson_interval(successes, n, level),
        level,
        reps: n,
        seed,
        method: CiMethod::Wilson,
        horizon: None,
    })
}

/// Outcome of a goodness-of-fit or homogeneity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub dof: f64,
    pub p_value: f64,
}

impl TestOutcome {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value >= level
    }
}

fn chi_square_sf(stat: f64, dof: f64) -> f64 {
    if dof <= 0.0 {
        return 1.0;
    }
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

/// Pearson chi-square goodness of fit of observed bin counts against bin
/// probabilities. Adjacent bins are pooled left to right until each pooled
/// bin expects at least `min_expected` observations; any probability mass
/// not covered by `probs` is lumped into the last bin.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> Result<TestOutcome> {
    if observed.len() != probs.len() || observed.is_empty() {
        return Err(Error::param("observed and probability vectors must align"));
    }
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut probs = probs.to_vec();
    let total: f64 = probs.iter().sum();
    if let Some(last) = probs.last_mut() {
        *last += (1.0 - total).max(0.0);
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(&probs) {
        o_acc += o as f64;
        e_acc += p * nf;
        if e_acc >= min_expected {
            pooled.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => pooled.push((o_acc, e_acc)),
        }
    }
    let mut stat = 0.0;
    for &(o, e) in &pooled {
        if e > 0.0 {
            stat += (o - e) * (o - e) / e;
        } else if o > 0.0 {
            stat = f64::INFINITY;
        }
    }
    let dof = pooled.len() as f64 - 1.0;
    Ok(TestOutcome { statistic: stat, dof, p_value: if stat.is_finite() { chi_square_sf(stat, dof) } else { 0.0 } })
}

/// Chi-square test of homogeneity between two histograms over the same bins.
/// Bins are pooled until the combined count reaches `min_total`.
pub fn chi_square_two_sample(a: &[u64], b: &[u64], min_total: u64) -> Result<TestOutcome> {
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0);
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::param("both samples must be non-empty"));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut ca, mut cb) = (0u64, 0u64);
    for i in 0..len {
        ca += get(a, i);
        cb += get(b, i);
        if ca + cb >= min_total {
            pooled.push((ca as f64, cb as f64));
            ca = 0;
            cb = 0;
        }
    }
    if ca + cb > 0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += ca as f64;
                last.1 += cb as f64;
            }
            None => pooled.push((ca as f64, cb as f64)),
        }
    }
    let (naf, nbf) = (na as f64, nb as f64);
    let n = naf + nbf;
    let mut stat = 0.0;
    for &(x, y) in &pooled {
        let t = x + y;
        let ea = t * naf / n;
        let eb = t * nbf / n;
        stat += (x - ea).powi(2) / ea + (y - eb).powi(2) / eb;
    }
    let dof = pooled.len() as f64 - 1.0;
    Ok(TestOutcome { statistic: stat, dof, p_value: chi_square_sf(stat, dof) })
}

/// Histogram of non-negative integer observations; the last bin collects
/// everything at or beyond `bins − 1`.
pub fn histogram<I: IntoIterator<Item = u64>>(values: I, bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    for v in values {
        let i = (v as usize).min(bins - 1);
        h[i] += 1;
    }
    h
}

/// Histogram of signed integer observations shifted by `offset`.
pub fn histogram_signed<I: IntoIterator<Item = i64>>(values: I, offset: i64, bins: usize) -> Vec<u64> {
    histogram(values.into_iter().map(|v| (v + offset).max(0) as u64), bins)
}

/// Kolmogorov survival function `P(K > λ)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> TestOutcome {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs()).max((f - i as f64 / n).abs());
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    TestOutcome { statistic: d, dof: n, p_value: kolmogorov_sf(lambda) }
}

/// Lag-1 sample autocorrelation and its standard error under independence.
pub fn lag1_autocorrelation(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 3 {
        return (0.0, f64::INFINITY);
    }
    let m = mean(xs);
    let den: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    if den == 0.0 {
        return (0.0, 1.0 / (n as f64).sqrt());
    }
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    (num / den, 1.0 / (n as f64).sqrt())
}

/// Welch z-statistic for a difference of two means.
pub fn two_sample_z(a: &[f64], b: &[f64]) -> f64 {
    let sa: Summary = a.iter().copied().collect();
    let sb: Summary = b.iter().copied().collect();
    let se = (sa.variance() / sa.n as f64 + sb.variance() / sb.n as f64).sqrt();
    if se == 0.0 {
        if sa.mean == sb.mean {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (sa.mean - sb.mean) / se
    }
}

/// Poisson probability mass function.
pub fn poisson_pmf(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let lg = statrs::function::gamma::ln_gamma(k as f64 + 1.0);
    (k as f64 * mean.ln() - mean - lg).exp()
}

/// Poisson probabilities for `0..bins`, the last bin holding the upper tail.
pub fn poisson_bins(mean: f64, bins: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..bins as u64).map(|k| poisson_pmf(mean, k)).collect();
    let head: f64 = p[..bins - 1].iter().sum();
    p[bins - 1] = (1.0 - head).max(0.0);
    p
}

/// Binomial probability mass function.
pub fn binomial_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    use statrs::function::gamma::ln_gamma;
    let (nf, kf) = (n as f64, k as f64);
    let lc = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    (lc + kf * p.ln() + (nf - kf) * (1.0 - p).ln()).exp()
}

/// Binomial CDF `P(X ≤ k)`.
pub fn binomial_cdf(n: u64, p: f64, k: u64) -> f64 {
    (0..=k.min(n)).map(|j| binomial_pmf(n, p, j)).sum::<f64>().min(1.0)
}
