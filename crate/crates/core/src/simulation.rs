//! Synthetic error sets and the Monte Carlo studies that check the
//! inference machinery.
//!
//! Error sets are drawn from g-and-h margins coupled through a bivariate
//! standard normal (Gaussian copula). Each margin is shifted and scaled so
//! that its mean and standard deviation are the requested `mu` and `sigma`.
//! Every repetition of a study draws from its own substream, so the studies
//! are reproducible bit for bit whatever the thread count.

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::pearson;
use crate::error::{Error, Result};
use crate::estimators::{quantile_type7, QuantileMethod, StatKind};
use crate::inference::{diff_sample, generalized_p, BootstrapPlan};
use crate::rng::{derive_seed, substream};
use crate::special::{normal_cdf, normal_sf};

/// Quadrature steps on the standard normal scale.
const QUAD_STEP_1D: f64 = 0.02;
const QUAD_STEP_2D: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GhParams {
    /// Asymmetry.
    pub g: f64,
    /// Tail weight.
    pub h: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl GhParams {
    pub fn new(g: f64, h: f64, mu: f64, sigma: f64) -> Result<Self> {
        let p = GhParams { g, h, mu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn normal(mu: f64, sigma: f64) -> Self {
        GhParams { g: 0.0, h: 0.0, mu, sigma }
    }

    pub fn standard(g: f64, h: f64) -> Self {
        GhParams { g, h, mu: 0.0, sigma: 1.0 }
    }

    pub fn is_normal(&self) -> bool {
        self.g == 0.0 && self.h == 0.0
    }

    /// The variance is finite only for h < 1/2.
    pub fn validate(&self) -> Result<()> {
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::invalid(format!("g = {} must be finite and >= 0", self.g)));
        }
        if !(0.0..0.5).contains(&self.h) {
            return Err(Error::invalid(format!("h = {} must lie in [0, 0.5)", self.h)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma = {} must be positive", self.sigma)));
        }
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu must be finite"));
        }
        Ok(())
    }
}

impl fmt::Display for GhParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g={},h={},mu={},sigma={}", self.g, self.h, self.mu, self.sigma)
    }
}

/// The four shapes commonly used in simulation studies: normal,
/// heavy-tailed symmetric, light-tailed asymmetric, heavy-tailed asymmetric.
pub fn standard_scenarios() -> Vec<GhParams> {
    vec![
        GhParams::standard(0.0, 0.0),
        GhParams::standard(0.0, 0.2),
        GhParams::standard(0.2, 0.0),
        GhParams::standard(0.2, 0.2),
    ]
}

/// g-and-h transform of a standard normal deviate.
pub fn gh_transform(z: f64, g: f64, h: f64) -> f64 {
    let tail = (0.5 * h * z * z).exp();
    if g > 0.0 {
        (g * z).exp_m1() / g * tail
    } else {
        z * tail
    }
}

fn normal_density(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Half-width of the quadrature range: the integrands decay like
/// exp(-(1 - 2h) z^2 / 2).
fn quad_limit(h: f64) -> f64 {
    (80.0 / (1.0 - 2.0 * h)).sqrt().max(10.0)
}

/// Trapezoid nodes and weights for E[f(Z)], Z ~ N(0, 1).
fn normal_nodes(step: f64, limit: f64) -> Vec<(f64, f64)> {
    let m = (limit / step).round() as i64;
    (-m..=m)
        .map(|k| {
            let z = k as f64 * step;
            (z, step * normal_density(z))
        })
        .collect()
}

/// A g-and-h margin standardized to the requested mean and SD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GhMargin {
    pub params: GhParams,
    /// Mean of the raw transform.
    pub raw_mean: f64,
    /// SD of the raw transform.
    pub raw_sd: f64,
}

impl GhMargin {
    pub fn new(params: GhParams) -> Result<Self> {
        params.validate()?;
        if params.is_normal() {
            return Ok(GhMargin { params, raw_mean: 0.0, raw_sd: 1.0 });
        }
        let (mut m1, mut m2) = (0.0, 0.0);
        for (z, w) in normal_nodes(QUAD_STEP_1D, quad_limit(params.h)) {
            let x = gh_transform(z, params.g, params.h);
            m1 += w * x;
            m2 += w * x * x;
        }
        Ok(GhMargin {
            params,
            raw_mean: m1,
            raw_sd: (m2 - m1 * m1).sqrt(),
        })
    }

    pub fn apply(&self, z: f64) -> f64 {
        let x = gh_transform(z, self.params.g, self.params.h);
        self.params.mu + self.params.sigma * (x - self.raw_mean) / self.raw_sd
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| self.apply(rng.sample(StandardNormal))).collect()
    }
}

/// Pearson correlation of two standardized margins when the underlying
/// normals have correlation `rho_z`.
pub fn margin_correlation(rho_z: f64, a: &GhMargin, b: &GhMargin) -> f64 {
    if a.params.is_normal() && b.params.is_normal() {
        return rho_z;
    }
    let nodes = normal_nodes(QUAD_STEP_2D, quad_limit(a.params.h.max(b.params.h)));
    let c = (1.0 - rho_z * rho_z).max(0.0).sqrt();
    let mut s = 0.0;
    for &(z, wz) in &nodes {
        let fa = gh_transform(z, a.params.g, a.params.h) - a.raw_mean;
        let mut inner = 0.0;
        for &(v, wv) in &nodes {
            inner += wv * (gh_transform(rho_z * z + c * v, b.params.g, b.params.h) - b.raw_mean);
        }
        s += wz * fa * inner;
    }
    (s / (a.raw_sd * b.raw_sd)).clamp(-1.0, 1.0)
}

/// How a prescribed correlation is applied to a pair of margins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RhoScale {
    /// rho is the correlation of the underlying normals.
    #[default]
    Gaussian,
    /// rho is the Pearson correlation of the margins themselves; the latent
    /// normal correlation is solved for numerically.
    Pearson,
}

/// Latent normal correlation giving Pearson correlation `rho` between the
/// two margins.
pub fn calibrate_latent_rho(rho: f64, a: &GhMargin, b: &GhMargin) -> Result<f64> {
    check_rho(rho)?;
    if a.params.is_normal() && b.params.is_normal() {
        return Ok(rho);
    }
    let (lo_r, hi_r) = (margin_correlation(-1.0, a, b), margin_correlation(1.0, a, b));
    if rho < lo_r - 1e-12 || rho > hi_r + 1e-12 {
        return Err(Error::invalid(format!(
            "correlation {rho} is not attainable for these margins (range [{lo_r:.4}, {hi_r:.4}])"
        )));
    }
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if margin_correlation(mid, a, b) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::invalid(format!("correlation {rho} outside [-1, 1]")));
    }
    Ok(())
}

/// Draws correlated pairs of error sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSampler {
    pub first: GhMargin,
    pub second: GhMargin,
    /// Correlation of the underlying normals.
    pub latent_rho: f64,
}

impl PairSampler {
    pub fn new(rho: f64, first: GhParams, second: GhParams, scale: RhoScale) -> Result<Self> {
        check_rho(rho)?;
        let (first, second) = (GhMargin::new(first)?, GhMargin::new(second)?);
        let latent_rho = match scale {
            RhoScale::Gaussian => rho,
            RhoScale::Pearson => calibrate_latent_rho(rho, &first, &second)?,
        };
        Ok(PairSampler { first, second, latent_rho })
    }

    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
        let c = (1.0 - self.latent_rho * self.latent_rho).max(0.0).sqrt();
        let mut e1 = Vec::with_capacity(n);
        let mut e2 = Vec::with_capacity(n);
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            e1.push(self.first.apply(z));
            e2.push(self.second.apply(self.latent_rho * z + c * v));
        }
        (e1, e2)
    }
}

/// Two error sets of size `n` whose underlying normals have correlation
/// `rho`.
pub fn correlated_pairs(
    rho: f64,
    first: GhParams,
    second: GhParams,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(PairSampler::new(rho, first, second, RhoScale::Gaussian)?.sample(n, rng))
}

/// Population statistics of errors distributed as N(mu, sigma^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldedStats {
    pub mse: f64,
    pub rmsd: f64,
    pub mue: f64,
    pub q95: f64,
}

/// CDF of |X| for X ~ N(mu, sigma^2).
fn folded_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    normal_cdf((x - mu) / sigma) - normal_cdf((-x - mu) / sigma)
}

/// Quantile `q` of |X|, X ~ N(mu, sigma^2), by bisection.
pub fn folded_normal_quantile(mu: f64, sigma: f64, q: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!("sigma = {sigma} must be positive")));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1)")));
    }
    let (mut lo, mut hi) = (0.0, mu.abs() + 40.0 * sigma);
    while hi - lo > 1e-12 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if folded_cdf(mid, mu, sigma) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn population_folded_stats(mu: f64, sigma: f64) -> Result<FoldedStats> {
    if !(sigma > 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!("sigma = {sigma} must be positive")));
    }
    let mue = sigma * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * sigma * sigma)).exp()
        + mu * (1.0 - 2.0 * normal_cdf(-mu / sigma));
    Ok(FoldedStats {
        mse: mu,
        rmsd: sigma,
        mue,
        q95: folded_normal_quantile(mu, sigma, 0.95)?,
    })
}

/// Empirical MUE and Q95 of `draws` absolute normal deviates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalFolded {
    pub draws: usize,
    pub mue: f64,
    pub q95: f64,
}

pub fn empirical_folded_stats(mu: f64, sigma: f64, draws: usize, seed: u64) -> Result<EmpiricalFolded> {
    let margin = GhMargin::new(GhParams::normal(mu, sigma))?;
    if draws < 2 {
        return Err(Error::TooFewSystems { found: draws, required: 2 });
    }
    let mut rng = substream(seed, 0);
    let e = margin.sample(draws, &mut rng);
    Ok(EmpiricalFolded {
        draws,
        mue: StatKind::Mue.prepare(draws)?.eval(&e, &mut Vec::new()),
        q95: StatKind::q95().prepare(draws)?.eval(&e, &mut Vec::new()),
    })
}

/// Settings shared by the studies. Each study reads the fields it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n_values: Vec<usize>,
    pub rho_values: Vec<f64>,
    /// Monte Carlo repetitions M.
    pub reps: usize,
    /// Bootstrap replicates B.
    pub replicates: usize,
    pub scenarios: Vec<GhParams>,
    pub seed: u64,
}

impl StudyConfig {
    pub const MIN_REPS: usize = 100;
    pub const MIN_N: usize = 10;

    /// N = 100, M = 1000, rho from -1 to 1 by 0.1, four g-and-h shapes.
    pub fn corr_transfer_default() -> Self {
        StudyConfig {
            n_values: vec![100],
            rho_values: (-10..=10).map(|k| k as f64 / 10.0).collect(),
            reps: 1000,
            replicates: 0,
            scenarios: standard_scenarios(),
            seed: 0,
        }
    }

    /// N from 20 to 70, rho in {0, 0.5, 0.9}, M = 2000, B = 1000.
    pub fn type1_default() -> Self {
        StudyConfig {
            n_values: (2..=7).map(|k| 10 * k).collect(),
            rho_values: vec![0.0, 0.5, 0.9],
            reps: 2000,
            replicates: 1000,
            scenarios: standard_scenarios(),
            seed: 0,
        }
    }

    /// N from 20 to 500, M = 10^4, errors N(0.1, 1).
    pub fn hd_default() -> Self {
        StudyConfig {
            n_values: vec![20, 50, 100, 200, 300, 400, 500],
            rho_values: Vec::new(),
            reps: 10_000,
            replicates: 0,
            scenarios: vec![GhParams::normal(0.1, 1.0)],
            seed: 0,
        }
    }

    /// N in {20, 50, 100, 500}, rho = 0.9, errors N(0, 1.1) and N(0.1, 1).
    pub fn pvalue_default() -> Self {
        StudyConfig {
            n_values: vec![20, 50, 100, 500],
            rho_values: vec![0.9],
            reps: 100,
            replicates: 1000,
            scenarios: vec![GhParams::normal(0.0, 1.1), GhParams::normal(0.1, 1.0)],
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < Self::MIN_REPS {
            return Err(Error::InvalidPlan(format!(
                "{} repetitions requested, at least {} required",
                self.reps,
                Self::MIN_REPS
            )));
        }
        if self.n_values.is_empty() {
            return Err(Error::invalid("no dataset sizes given"));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < Self::MIN_N) {
            return Err(Error::invalid(format!(
                "dataset size {n} below the minimum of {}",
                Self::MIN_N
            )));
        }
        for &rho in &self.rho_values {
            check_rho(rho)?;
        }
        if self.scenarios.is_empty() {
            return Err(Error::invalid("no g-and-h scenario given"));
        }
        for s in &self.scenarios {
            s.validate()?;
        }
        Ok(())
    }

    fn require_rho(&self) -> Result<()> {
        if self.rho_values.is_empty() {
            return Err(Error::invalid("no correlation values given"));
        }
        Ok(())
    }

    fn plan(&self, seed: u64) -> BootstrapPlan {
        BootstrapPlan::new(self.replicates, seed)
    }
}

/// Runs `f` for repetitions 0..reps in parallel; repetition `r` gets
/// substream `r` of `cell_seed`.
fn repetitions<T, F>(reps: usize, cell_seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(cell_seed, r as u64);
            f(r, &mut rng)
        })
        .collect()
}

/// Correlation with a 95 % Fisher-z sampling interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrEstimate {
    pub cor: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn fisher_interval(r: f64, m: usize) -> CorrEstimate {
    let z = r.clamp(-1.0, 1.0).atanh();
    let half = 1.959963984540054 / ((m as f64) - 3.0).sqrt();
    CorrEstimate {
        cor: r,
        lo: (z - half).tanh(),
        hi: (z + half).tanh(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrTransferRow {
    pub scenario: GhParams,
    pub n: usize,
    pub rho: f64,
    pub latent_rho: f64,
    pub mse: CorrEstimate,
    pub mue: CorrEstimate,
    pub q95: CorrEstimate,
}

/// Correlation between the statistics of two correlated error sets, for
/// each scenario, size and correlation.
pub fn corr_transfer_study(config: &StudyConfig, scale: RhoScale) -> Result<Vec<CorrTransferRow>> {
    config.validate()?;
    config.require_rho()?;
    let kinds = [StatKind::Mse, StatKind::Mue, StatKind::q95()];
    let mut rows = Vec::new();
    for (si, &scenario) in config.scenarios.iter().enumerate() {
        for (ni, &n) in config.n_values.iter().enumerate() {
            let prepared = kinds.iter().map(|k| k.prepare(n)).collect::<Result<Vec<_>>>()?;
            for (ri, &rho) in config.rho_values.iter().enumerate() {
                let sampler = PairSampler::new(rho, scenario, scenario, scale)?;
                let cell = derive_seed(config.seed, &[si as u64, ni as u64, ri as u64]);
                let stats = repetitions(config.reps, cell, |_, rng| {
                    let (e1, e2) = sampler.sample(n, rng);
                    let mut scratch = Vec::new();
                    Ok(prepared
                        .iter()
                        .map(|p| (p.eval(&e1, &mut scratch), p.eval(&e2, &mut scratch)))
                        .collect::<Vec<_>>())
                })?;
                let cor = |k: usize| -> Result<CorrEstimate> {
                    let s1: Vec<f64> = stats.iter().map(|s| s[k].0).collect();
                    let s2: Vec<f64> = stats.iter().map(|s| s[k].1).collect();
                    Ok(fisher_interval(pearson(&s1, &s2)?, config.reps))
                };
                rows.push(CorrTransferRow {
                    scenario,
                    n,
                    rho,
                    latent_rho: sampler.latent_rho,
                    mse: cor(0)?,
                    mue: cor(1)?,
                    q95: cor(2)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Level of the test whose false rejections are counted.
pub const TYPE1_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Type1Row {
    pub scenario: GhParams,
    pub n: usize,
    pub rho: f64,
    pub stat: StatKind,
    pub reps: usize,
    pub rejections: usize,
    pub alpha: f64,
    /// Binomial standard error of alpha.
    pub se: f64,
}

/// Rejection rate of a true null s1 = s2: both error sets share one
/// distribution and p_g < 0.05 counts as a rejection.
pub fn type1_study(config: &StudyConfig, stats: &[StatKind]) -> Result<Vec<Type1Row>> {
    config.validate()?;
    config.require_rho()?;
    let mut rows = Vec::new();
    for (si, &scenario) in config.scenarios.iter().enumerate() {
        for (ni, &n) in config.n_values.iter().enumerate() {
            for (ri, &rho) in config.rho_values.iter().enumerate() {
                let sampler = PairSampler::new(rho, scenario, scenario, RhoScale::Gaussian)?;
                for (ki, &kind) in stats.iter().enumerate() {
                    kind.validate()?;
                    let cell = derive_seed(config.seed, &[si as u64, ni as u64, ri as u64, ki as u64]);
                    let rejected = repetitions(config.reps, cell, |r, rng| {
                        let (e1, e2) = sampler.sample(n, rng);
                        let d = diff_sample(&e1, &e2, kind, &config.plan(derive_seed(cell, &[r as u64])))?;
                        Ok(generalized_p(&d) < TYPE1_LEVEL)
                    })?;
                    let k = rejected.iter().filter(|&&x| x).count();
                    let alpha = k as f64 / config.reps as f64;
                    rows.push(Type1Row {
                        scenario,
                        n,
                        rho,
                        stat: kind,
                        reps: config.reps,
                        rejections: k,
                        alpha,
                        se: (alpha * (1.0 - alpha) / config.reps as f64).sqrt(),
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HdMode {
    /// Fresh samples for every repetition.
    A,
    /// Bootstrap of subsets of one fixed sample.
    B,
}

/// Levels of the five-quantile summary.
pub const SUMMARY_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HdRow {
    pub mode: HdMode,
    pub n: usize,
    pub method: QuantileMethod,
    /// Quantiles of the estimates at [`SUMMARY_LEVELS`].
    pub summary: [f64; 5],
    /// Population value of the quantile.
    pub reference: f64,
    /// Median estimate minus the reference.
    pub median_bias: f64,
    /// Number of distinct estimates.
    pub distinct: usize,
}

/// Size of the fixed sample bootstrapped in mode B.
pub const HD_BASE_SAMPLE: usize = 500;

/// Sampling distribution of the Q95 estimate of |e| by HD and type 7,
/// for errors drawn from the first scenario of `config`.
pub fn hd_convergence_study(config: &StudyConfig) -> Result<Vec<HdRow>> {
    config.validate()?;
    let params = config.scenarios[0];
    let margin = GhMargin::new(params)?;
    let reference = if params.is_normal() {
        folded_normal_quantile(params.mu, params.sigma, StatKind::DEFAULT_Q)?
    } else {
        // Large-sample value standing in for the population quantile.
        let mut rng = substream(derive_seed(config.seed, &[u64::MAX]), 0);
        let big: Vec<f64> = margin.sample(1_000_000, &mut rng).iter().map(|v| v.abs()).collect();
        quantile_type7(&big, StatKind::DEFAULT_Q)?
    };
    let methods = [QuantileMethod::Hd, QuantileMethod::Type7];
    let base_len = HD_BASE_SAMPLE.max(*config.n_values.iter().max().unwrap_or(&0));
    let base = margin.sample(base_len, &mut substream(derive_seed(config.seed, &[1]), 0));

    let mut rows = Vec::new();
    for mode in [HdMode::A, HdMode::B] {
        for (ni, &n) in config.n_values.iter().enumerate() {
            let prepared = methods
                .iter()
                .map(|&m| StatKind::quantile(StatKind::DEFAULT_Q, m)?.prepare(n))
                .collect::<Result<Vec<_>>>()?;
            let cell = derive_seed(config.seed, &[mode as u64 + 2, ni as u64]);
            let estimates = repetitions(config.reps, cell, |_, rng| {
                let e = match mode {
                    HdMode::A => margin.sample(n, rng),
                    HdMode::B => (0..n).map(|_| base[rng.random_range(0..n)]).collect(),
                };
                let mut scratch = Vec::new();
                Ok(prepared.iter().map(|p| p.eval(&e, &mut scratch)).collect::<Vec<_>>())
            })?;
            for (mi, &method) in methods.iter().enumerate() {
                let mut values: Vec<f64> = estimates.iter().map(|e| e[mi]).collect();
                let mut summary = [0.0; 5];
                for (s, &q) in summary.iter_mut().zip(&SUMMARY_LEVELS) {
                    *s = quantile_type7(&values, q)?;
                }
                values.sort_unstable_by(f64::total_cmp);
                values.dedup();
                rows.push(HdRow {
                    mode,
                    n,
                    method,
                    summary,
                    reference,
                    median_bias: summary[2] - reference,
                    distinct: values.len(),
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValueRow {
    pub n: usize,
    pub rho: f64,
    pub stat: StatKind,
    pub reps: usize,
    pub mean_p_g: f64,
    /// Normal-theory p-value for the difference of means; MSE only.
    pub mean_p_t: Option<f64>,
    pub mean_abs_diff: Option<f64>,
    pub max_abs_diff: Option<f64>,
}

/// Two-sided p-value of the paired difference of means,
/// xi = |mean(d)| / (sd(d) / sqrt(N)).
pub fn analytic_p_t_means(e1: &[f64], e2: &[f64]) -> Result<f64> {
    if e1.len() != e2.len() {
        return Err(Error::LengthMismatch { expected: e1.len(), found: e2.len() });
    }
    let n = e1.len() as f64;
    let d: Vec<f64> = e1.iter().zip(e2).map(|(a, b)| a - b).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let u = (var / n).sqrt();
    if !(u > 0.0) {
        return Err(Error::DegenerateUncertainty("paired differences are constant".into()));
    }
    Ok(2.0 * normal_sf(mean.abs() / u))
}

/// Generalized p-values for pairs drawn from the first two scenarios of
/// `config` at each size and correlation. For the MSE the analytic p-value
/// is computed on the same samples.
pub fn pvalue_study(config: &StudyConfig, kind: StatKind) -> Result<Vec<PValueRow>> {
    config.validate()?;
    config.require_rho()?;
    kind.validate()?;
    let (first, second) = match config.scenarios.as_slice() {
        [a, b, ..] => (*a, *b),
        [a] => (*a, *a),
        [] => unreachable!("validated"),
    };
    let mut rows = Vec::new();
    for (ni, &n) in config.n_values.iter().enumerate() {
        for (ri, &rho) in config.rho_values.iter().enumerate() {
            let sampler = PairSampler::new(rho, first, second, RhoScale::Gaussian)?;
            let cell = derive_seed(config.seed, &[ni as u64, ri as u64]);
            let pairs = repetitions(config.reps, cell, |r, rng| {
                let (e1, e2) = sampler.sample(n, rng);
                let d = diff_sample(&e1, &e2, kind, &config.plan(derive_seed(cell, &[r as u64])))?;
                let p_t = match kind {
                    StatKind::Mse => Some(analytic_p_t_means(&e1, &e2)?),
                    _ => None,
                };
                Ok((generalized_p(&d), p_t))
            })?;
            let m = config.reps as f64;
            let mean_p_g = pairs.iter().map(|p| p.0).sum::<f64>() / m;
            let (mean_p_t, mean_abs_diff, max_abs_diff) = if kind == StatKind::Mse {
                let diffs: Vec<f64> = pairs.iter().map(|(g, t)| (g - t.unwrap_or(f64::NAN)).abs()).collect();
                (
                    Some(pairs.iter().filter_map(|p| p.1).sum::<f64>() / m),
                    Some(diffs.iter().sum::<f64>() / m),
                    Some(diffs.iter().cloned().fold(0.0, f64::max)),
                )
            } else {
                (None, None, None)
            };
            rows.push(PValueRow {
                n,
                rho,
                stat: kind,
                reps: config.reps,
                mean_p_g,
                mean_p_t,
                mean_abs_diff,
                max_abs_diff,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Closed-form mean and SD of the raw g-and-h transform.
    fn gh_moments_closed(g: f64, h: f64) -> (f64, f64) {
        if g == 0.0 {
            return (0.0, (1.0 - 2.0 * h).powf(-1.5).sqrt());
        }
        let m1 = ((g * g / (2.0 * (1.0 - h))).exp() - 1.0) / (g * (1.0 - h).sqrt());
        let m2 = ((2.0 * g * g / (1.0 - 2.0 * h)).exp() - 2.0 * (g * g / (2.0 * (1.0 - 2.0 * h))).exp() + 1.0)
            / (g * g * (1.0 - 2.0 * h).sqrt());
        (m1, (m2 - m1 * m1).sqrt())
    }

    #[test]
    fn transform_examples() {
        for z in [-3.0, -0.5, 0.0, 1.7] {
            assert_eq!(gh_transform(z, 0.0, 0.0), z);
        }
        assert!((gh_transform(1.0, 0.0, 0.2) - 0.1f64.exp()).abs() < 1e-15);
        assert!((gh_transform(1.0, 0.0, 0.2) - 1.10517).abs() < 1e-5);
        assert_eq!(gh_transform(0.0, 0.2, 0.0), 0.0);
    }

    #[test]
    fn quadrature_moments_match_closed_forms() {
        for (g, h) in [(0.0, 0.2), (0.2, 0.0), (0.2, 0.2), (0.5, 0.1), (0.0, 0.4)] {
            let m = GhMargin::new(GhParams::standard(g, h)).unwrap();
            let (mean, sd) = gh_moments_closed(g, h);
            assert!((m.raw_mean - mean).abs() < 1e-10, "mean g={g} h={h}: {} vs {mean}", m.raw_mean);
            assert!((m.raw_sd - sd).abs() < 1e-9 * sd, "sd g={g} h={h}: {} vs {sd}", m.raw_sd);
        }
    }

    #[test]
    fn params_validation() {
        assert!(GhParams::new(0.0, 0.0, 0.0, 0.0).is_err());
        assert!(GhParams::new(-0.1, 0.0, 0.0, 1.0).is_err());
        assert!(GhParams::new(0.0, 0.5, 0.0, 1.0).is_err());
        assert!(GhParams::new(0.2, 0.2, -1.0, 2.0).is_ok());
    }

    #[test]
    fn comonotone_pairs_are_identical() {
        let p = GhParams::standard(0.2, 0.2);
        let (a, b) = correlated_pairs(1.0, p, p, 500, &mut substream(3, 0)).unwrap();
        assert_eq!(a, b);
        assert!(correlated_pairs(1.01, p, p, 5, &mut substream(3, 0)).is_err());
    }

    #[test]
    fn sample_correlation_matches_prescription() {
        let p = GhParams::standard(0.0, 0.0);
        for (rho, seed) in [(0.0, 1), (0.7, 2), (-0.7, 3)] {
            let (a, b) = correlated_pairs(rho, p, p, 100_000, &mut substream(seed, 0)).unwrap();
            let r = pearson(&a, &b).unwrap();
            assert!((r - rho).abs() < 0.02, "rho {rho}: {r}");
        }
    }

    #[test]
    fn standardized_margins_have_requested_moments() {
        let params = GhParams::new(0.2, 0.2, -0.2, 2.0).unwrap();
        let m = GhMargin::new(params).unwrap();
        let x = m.sample(400_000, &mut substream(9, 0));
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean + 0.2).abs() < 0.02, "{mean}");
        assert!((sd - 2.0).abs() < 0.05, "{sd}");
    }

    #[test]
    fn pearson_calibration_hits_target() {
        let p = GhParams::standard(0.2, 0.2);
        let s = PairSampler::new(-0.9, p, p, RhoScale::Pearson).unwrap();
        assert!(s.latent_rho < -0.9);
        let r = margin_correlation(s.latent_rho, &s.first, &s.second);
        assert!((r + 0.9).abs() < 1e-8);
        let (a, b) = s.sample(200_000, &mut substream(4, 0));
        assert!((pearson(&a, &b).unwrap() + 0.9).abs() < 0.02);
        // Below the attainable minimum for these margins.
        assert!(PairSampler::new(-0.99, p, p, RhoScale::Pearson).is_err());
    }

    #[test]
    fn two_dimensional_rule_matches_normal_moments() {
        // E[Z^2 Y^2] = 1 + 2 rho^2 for standard normals with correlation rho.
        let rho: f64 = 0.9;
        let nodes = normal_nodes(QUAD_STEP_2D, 10.0);
        let c = (1.0 - rho * rho).sqrt();
        let mut exy = 0.0;
        for &(z, wz) in &nodes {
            for &(v, wv) in &nodes {
                let y = rho * z + c * v;
                exy += wz * wv * z * z * y * y;
            }
        }
        assert!((exy - (1.0 + 2.0 * rho * rho)).abs() < 1e-10, "{exy}");
    }

    #[test]
    fn folded_stats_reference_values() {
        let s = population_folded_stats(0.0, 1.1).unwrap();
        assert_eq!(format!("{:.2}", s.mue), "0.88");
        assert_eq!(format!("{:.2}", s.q95), "2.16");
        let s = population_folded_stats(0.1, 1.0).unwrap();
        assert_eq!(format!("{:.2}", s.mue), "0.80");
        assert_eq!(format!("{:.2}", s.q95), "1.97");
        assert_eq!((s.mse, s.rmsd), (0.1, 1.0));
        let s = population_folded_stats(0.0, 1.0).unwrap();
        assert!((s.mue - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-10);
        assert!((s.q95 - 1.959963984540054).abs() < 1e-8);
        assert!(population_folded_stats(0.0, 0.0).is_err());
    }

    #[test]
    fn folded_quantile_solves_cdf() {
        for (mu, sigma) in [(0.1, 1.0), (-2.0, 0.5), (3.0, 1.0)] {
            let x = folded_normal_quantile(mu, sigma, 0.95).unwrap();
            assert!((folded_cdf(x, mu, sigma) - 0.95).abs() < 1e-10);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = StudyConfig::type1_default();
        assert!(c.validate().is_ok());
        c.reps = 99;
        assert!(c.validate().is_err());
        let mut c = StudyConfig::type1_default();
        c.n_values = vec![9];
        assert!(c.validate().is_err());
        let mut c = StudyConfig::type1_default();
        c.rho_values = vec![1.5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn fisher_interval_brackets_estimate() {
        let e = fisher_interval(0.5, 1000);
        assert!(e.lo < 0.5 && 0.5 < e.hi);
        assert!((e.hi - e.lo - 2.0 * 1.96 * (1.0 - 0.25) / 1000f64.sqrt()).abs() < 0.01);
    }

    #[test]
    fn studies_are_reproducible() {
        let mut c = StudyConfig::corr_transfer_default();
        c.rho_values = vec![0.5];
        c.scenarios = vec![GhParams::standard(0.2, 0.0)];
        c.reps = 100;
        c.seed = 11;
        let a = corr_transfer_study(&c, RhoScale::Pearson).unwrap();
        let b = corr_transfer_study(&c, RhoScale::Pearson).unwrap();
        assert_eq!(a, b);

        let mut c = StudyConfig::type1_default();
        c.n_values = vec![20];
        c.rho_values = vec![0.5];
        c.scenarios = vec![GhParams::standard(0.0, 0.0)];
        c.reps = 100;
        c.replicates = 100;
        let a = type1_study(&c, &[StatKind::Mue]).unwrap();
        assert_eq!(a, type1_study(&c, &[StatKind::Mue]).unwrap());
        assert_eq!(a[0].reps, 100);
        assert!(a[0].alpha < 0.3);
    }

    #[test]
    fn hd_study_shape() {
        let mut c = StudyConfig::hd_default();
        c.n_values = vec![20, 100];
        c.reps = 200;
        let rows = hd_convergence_study(&c).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2);
        for r in &rows {
            assert!(r.summary.windows(2).all(|w| w[0] <= w[1]));
            assert!((r.reference - 1.97).abs() < 0.005);
        }
    }

    proptest! {
        #[test]
        fn transform_is_increasing(g in 0.0f64..1.0, h in 0.0f64..0.49, z in -6.0f64..6.0, dz in 1e-3f64..1.0) {
            prop_assert!(gh_transform(z + dz, g, h) > gh_transform(z, g, h));
        }

        #[test]
        fn transform_continuous_at_zero_g(h in 0.0f64..0.25, z in -4.0f64..4.0) {
            prop_assert!((gh_transform(z, 1e-8, h) - gh_transform(z, 0.0, h)).abs() < 1e-6);
        }
    }

    #[test]
    fn opposite_rho_gives_mirrored_correlation() {
        let p = GhParams::standard(0.0, 0.0);
        let (a, b) = correlated_pairs(0.6, p, p, 50_000, &mut substream(21, 0)).unwrap();
        let (c, d) = correlated_pairs(-0.6, p, p, 50_000, &mut substream(22, 0)).unwrap();
        let (r1, r2) = (pearson(&a, &b).unwrap(), pearson(&c, &d).unwrap());
        assert!((r1 + r2).abs() < 0.03, "{r1} {r2}");
    }
}
