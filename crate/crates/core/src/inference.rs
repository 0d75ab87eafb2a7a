//! Paired bootstrap engine and the comparison and ranking probabilities
//! built on top of it.
//!
//! Every replicate resamples row indices once and applies them to all
//! methods, so the correlation between error sets is carried into the
//! statistics. Replicate `j` draws its indices from substream `j` of the
//! plan's seed, which makes every output independent of thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ErrorMatrix;
use crate::error::{Error, Result};
use crate::estimators::StatKind;
use crate::rng::substream;
use crate::sip::msip_of_columns;
use crate::special::normal_sf;

pub const DEFAULT_REPLICATES: usize = 1000;
pub const MIN_REPLICATES: usize = 100;
/// Default enlargement factor used when reporting significance.
pub const DEFAULT_KAPPA: f64 = 1.96;
/// Minimum dataset size recommended for MUE comparisons.
pub const MIN_N_MUE: usize = 30;
/// Minimum dataset size recommended for high-quantile comparisons.
pub const MIN_N_QUANTILE: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub replicates: usize,
    pub seed: u64,
    /// Resample size N' for N'-out-of-N bootstrap; `None` means N.
    pub n_prime: Option<usize>,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        BootstrapPlan {
            replicates: DEFAULT_REPLICATES,
            seed: 0,
            n_prime: None,
        }
    }
}

impl BootstrapPlan {
    pub fn new(replicates: usize, seed: u64) -> Self {
        BootstrapPlan {
            replicates,
            seed,
            n_prime: None,
        }
    }

    pub fn with_n_prime(mut self, n_prime: usize) -> Self {
        self.n_prime = Some(n_prime);
        self
    }

    /// Validates the plan against a dataset of `n` rows and returns the
    /// resample size.
    pub fn resample_size(&self, n: usize) -> Result<usize> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidPlan(format!(
                "{} replicates requested, at least {MIN_REPLICATES} required",
                self.replicates
            )));
        }
        if n == 0 {
            return Err(Error::InvalidPlan("empty dataset".into()));
        }
        match self.n_prime {
            None => Ok(n),
            Some(m) if (2..=n).contains(&m) => Ok(m),
            Some(m) => Err(Error::InvalidPlan(format!(
                "resample size N' = {m} must satisfy 2 <= N' <= N = {n}"
            ))),
        }
    }
}

fn draw_indices(seed: u64, replicate: usize, n: usize, m: usize, out: &mut Vec<usize>) {
    let mut rng = substream(seed, replicate as u64);
    out.clear();
    out.extend((0..m).map(|_| rng.random_range(0..n)));
}

/// Row indices used by replicate `replicate` on a dataset of `n` rows.
pub fn resample_indices(plan: &BootstrapPlan, n: usize, replicate: usize) -> Result<Vec<usize>> {
    let m = plan.resample_size(n)?;
    let mut out = Vec::with_capacity(m);
    draw_indices(plan.seed, replicate, n, m, &mut out);
    Ok(out)
}

/// Replicate `replicate` of the paired bootstrap: the same row indices are
/// applied to every column.
pub fn paired_resample(m: &ErrorMatrix, plan: &BootstrapPlan, replicate: usize) -> Result<ErrorMatrix> {
    let idx = resample_indices(plan, m.n_systems(), replicate)?;
    Ok(m.select_rows(&idx))
}

/// Runs `f` on the resampled indices of every replicate, in parallel, and
/// returns the results in replicate order. `init` builds per-worker scratch
/// state.
pub fn replicate_map<S, T, I, F>(plan: &BootstrapPlan, n: usize, init: I, f: F) -> Result<Vec<T>>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &[usize]) -> T + Sync + Send,
{
    let m = plan.resample_size(n)?;
    let seed = plan.seed;
    Ok((0..plan.replicates)
        .into_par_iter()
        .map_init(
            || (init(), Vec::with_capacity(m)),
            |(state, idx), j| {
                draw_indices(seed, j, n, m, idx);
                f(state, idx)
            },
        )
        .collect())
}

/// Central percentile interval of `values` at coverage `level`
/// (type 7 quantiles). `values` must not be empty.
pub fn percentile_interval(values: &[f64], level: f64) -> (f64, f64) {
    assert!(!values.is_empty(), "percentile interval of an empty sample");
    let mut s = values.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (s.len() as f64 - 1.0) * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(s.len() - 1);
        s[lo] + (h - lo as f64) * (s[hi] - s[lo])
    };
    let tail = (1.0 - level) / 2.0;
    (q(tail), q(1.0 - tail))
}

fn sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn check_columns(columns: &[&[f64]]) -> Result<usize> {
    let n = columns.first().map_or(0, |c| c.len());
    for c in columns {
        if c.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: c.len(),
            });
        }
    }
    if n < 2 {
        return Err(Error::TooFewSystems {
            found: n,
            required: 2,
        });
    }
    Ok(n)
}

/// Statistic values of every column on every replicate (B rows of K values).
pub fn replicate_statistics(columns: &[&[f64]], kind: StatKind, plan: &BootstrapPlan) -> Result<Vec<Vec<f64>>> {
    let n = check_columns(columns)?;
    let stat = kind.prepare(plan.resample_size(n)?)?;
    replicate_map(
        plan,
        n,
        || (Vec::new(), Vec::new()),
        |(col, scratch): &mut (Vec<f64>, Vec<f64>), idx| {
            columns
                .iter()
                .map(|c| {
                    col.clear();
                    col.extend(idx.iter().map(|&i| c[i]));
                    stat.eval(col, scratch)
                })
                .collect()
        },
    )
}

/// Bootstrap standard error of a statistic (SD of the replicate values,
/// denominator B - 1).
pub fn bootstrap_se(e: &[f64], kind: StatKind, plan: &BootstrapPlan) -> Result<f64> {
    let reps = replicate_statistics(&[e], kind, plan)?;
    let values: Vec<f64> = reps.iter().map(|r| r[0]).collect();
    Ok(sd(&values))
}

/// Replicate differences d_j = S(ei*) - S(ej*) under paired resampling.
pub fn diff_sample(ei: &[f64], ej: &[f64], kind: StatKind, plan: &BootstrapPlan) -> Result<Vec<f64>> {
    let reps = replicate_statistics(&[ei, ej], kind, plan)?;
    Ok(reps.iter().map(|r| r[0] - r[1]).collect())
}

/// Discrepancy xi = |s1 - s2| / u(s1 - s2) and its two-sided normal p-value.
pub fn p_t_value(s1: f64, s2: f64, u_diff: f64) -> Result<(f64, f64)> {
    if !(u_diff > 0.0) || !u_diff.is_finite() {
        return Err(Error::DegenerateUncertainty(format!(
            "u(s1 - s2) = {u_diff} must be positive and finite"
        )));
    }
    let xi = (s1 - s2).abs() / u_diff;
    Ok((xi, 2.0 * normal_sf(xi)))
}

/// Same as [`p_t_value`] but ignoring the covariance of the two statistics.
pub fn p_unc_value(s1: f64, s2: f64, u1: f64, u2: f64) -> Result<(f64, f64)> {
    let u = u1.hypot(u2);
    if !(u > 0.0) {
        return Err(Error::DegenerateUncertainty(
            "both statistic uncertainties are zero".into(),
        ));
    }
    p_t_value(s1, s2, u)
}

/// Generalized p-value 2 min(p*, 1 - p*) with p* = (A + C/2) / B, where A
/// counts negative and C null differences.
pub fn generalized_p(d: &[f64]) -> f64 {
    let a = d.iter().filter(|&&v| v < 0.0).count() as f64;
    let c = d.iter().filter(|&&v| v == 0.0).count() as f64;
    let b = d.len() as f64;
    // The minimum is taken on counts so that p_g / 2 equals P_inv exactly
    // when there are no null differences.
    let below = a + 0.5 * c;
    2.0 * below.min(b - below) / b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionProbability {
    pub value: f64,
    /// Set when s1 == s2, where the observed order is undefined and 0.5 is
    /// reported.
    pub degenerate: bool,
}

/// Fraction of replicate differences whose sign is strictly opposite to
/// that of s1 - s2.
pub fn p_inv(d: &[f64], s1: f64, s2: f64) -> InversionProbability {
    if s1 == s2 {
        return InversionProbability {
            value: 0.5,
            degenerate: true,
        };
    }
    let reversed = if s1 > s2 {
        d.iter().filter(|&&v| v < 0.0).count()
    } else {
        d.iter().filter(|&&v| v > 0.0).count()
    };
    InversionProbability {
        value: reversed as f64 / d.len() as f64,
        degenerate: false,
    }
}

/// Warning when a dataset is too small for a reliable comparison of `kind`.
pub fn sample_size_warning(kind: StatKind, n: usize) -> Option<String> {
    let min = match kind {
        StatKind::Mue => MIN_N_MUE,
        StatKind::Quantile { .. } => MIN_N_QUANTILE,
        _ => return None,
    };
    (n < min).then(|| format!("N = {n} is below the recommended minimum of {min} for {kind} comparisons"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub methods: (String, String),
    pub stat: StatKind,
    pub n_systems: usize,
    pub replicates: usize,
    pub s1: f64,
    pub s2: f64,
    pub u1: f64,
    pub u2: f64,
    pub u_diff: f64,
    /// `None` when u_diff = 0.
    pub xi: Option<f64>,
    pub p_t: Option<f64>,
    /// `None` when u1 = u2 = 0.
    pub xi_unc: Option<f64>,
    pub p_unc: Option<f64>,
    pub p_g: f64,
    pub p_inv: f64,
    pub p_inv_degenerate: bool,
    pub n_zero_diffs: usize,
    pub warnings: Vec<String>,
}

impl PairComparison {
    /// Whether |s1 - s2| > kappa u(s1 - s2); `None` if u_diff = 0.
    pub fn exceeds(&self, kappa: f64) -> Option<bool> {
        self.xi.map(|xi| xi > kappa)
    }
}

/// Compares methods `i` and `j` of `m` on statistic `kind` from a single
/// paired bootstrap run.
pub fn compare_pair(m: &ErrorMatrix, i: usize, j: usize, kind: StatKind, plan: &BootstrapPlan) -> Result<PairComparison> {
    let k = m.n_methods();
    if i >= k || j >= k {
        return Err(Error::invalid(format!("method index out of range (K = {k})")));
    }
    if i == j {
        return Err(Error::invalid("cannot compare a method with itself"));
    }
    let (e1, e2) = (m.column(i), m.column(j));
    let reps = replicate_statistics(&[e1, e2], kind, plan)?;
    let r1: Vec<f64> = reps.iter().map(|r| r[0]).collect();
    let r2: Vec<f64> = reps.iter().map(|r| r[1]).collect();
    let d: Vec<f64> = reps.iter().map(|r| r[0] - r[1]).collect();

    let stat = kind.prepare(m.n_systems())?;
    let mut scratch = Vec::new();
    let s1 = stat.eval(e1, &mut scratch);
    let s2 = stat.eval(e2, &mut scratch);
    let (u1, u2, u_diff) = (sd(&r1), sd(&r2), sd(&d));

    let (xi, p_t) = p_t_value(s1, s2, u_diff).map_or((None, None), |(x, p)| (Some(x), Some(p)));
    let (xi_unc, p_unc) = p_unc_value(s1, s2, u1, u2).map_or((None, None), |(x, p)| (Some(x), Some(p)));
    let inv = p_inv(&d, s1, s2);

    Ok(PairComparison {
        methods: (m.method_names()[i].clone(), m.method_names()[j].clone()),
        stat: kind,
        n_systems: m.n_systems(),
        replicates: plan.replicates,
        s1,
        s2,
        u1,
        u2,
        u_diff,
        xi,
        p_t,
        xi_unc,
        p_unc,
        p_g: generalized_p(&d),
        p_inv: inv.value,
        p_inv_degenerate: inv.degenerate,
        n_zero_diffs: d.iter().filter(|&&v| v == 0.0).count(),
        warnings: sample_size_warning(kind, m.n_systems()).into_iter().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Smallest score gets rank 1 (error statistics).
    LowerIsRank1,
    /// Largest score gets rank 1 (MSIP-like scores).
    HigherIsRank1,
}

/// Score used to rank the methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankCriterion {
    Statistic(StatKind),
    Msip,
}

impl RankCriterion {
    pub fn default_orientation(&self) -> Orientation {
        match self {
            RankCriterion::Statistic(_) => Orientation::LowerIsRank1,
            RankCriterion::Msip => Orientation::HigherIsRank1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankSummary {
    /// Most probable rank (1-based; lowest rank wins ties).
    pub mode: usize,
    pub probability: f64,
    /// Shortest contiguous rank window holding at least 90 % probability.
    pub interval: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankMatrix {
    pub labels: Vec<String>,
    pub criterion: RankCriterion,
    pub orientation: Orientation,
    pub replicates: usize,
    /// p[j][k]: probability that method j has rank k + 1.
    pub p: Vec<Vec<f64>>,
    pub summary: Vec<RankSummary>,
}

/// Ranks of `scores` (0-based), ties going to the lowest index.
fn ranks_of(scores: &[f64], orientation: Orientation, order: &mut Vec<usize>, ranks: &mut [usize]) {
    order.clear();
    order.extend(0..scores.len());
    match orientation {
        Orientation::LowerIsRank1 => order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b])),
        Orientation::HigherIsRank1 => order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a])),
    }
    for (r, &j) in order.iter().enumerate() {
        ranks[j] = r;
    }
}

/// Probability of each method occupying each rank under paired bootstrap.
pub fn rank_probability_matrix(
    m: &ErrorMatrix,
    criterion: RankCriterion,
    plan: &BootstrapPlan,
    orientation: Orientation,
) -> Result<RankMatrix> {
    let k = m.n_methods();
    if k < 2 {
        return Err(Error::invalid("ranking needs at least two methods"));
    }
    let columns: Vec<&[f64]> = m.columns().iter().map(Vec::as_slice).collect();
    let n = check_columns(&columns)?;

    let rank_vectors: Vec<Vec<usize>> = match criterion {
        RankCriterion::Statistic(kind) => {
            let stats = replicate_statistics(&columns, kind, plan)?;
            let mut order = Vec::new();
            stats
                .iter()
                .map(|s| {
                    let mut r = vec![0; k];
                    ranks_of(s, orientation, &mut order, &mut r);
                    r
                })
                .collect()
        }
        RankCriterion::Msip => replicate_map(
            plan,
            n,
            Vec::new,
            |order: &mut Vec<usize>, idx| {
                let resampled: Vec<Vec<f64>> = columns
                    .iter()
                    .map(|c| idx.iter().map(|&i| c[i]).collect())
                    .collect();
                let views: Vec<&[f64]> = resampled.iter().map(Vec::as_slice).collect();
                let mut r = vec![0; k];
                ranks_of(&msip_of_columns(&views), orientation, order, &mut r);
                r
            },
        )?,
    };

    let mut counts = vec![vec![0usize; k]; k];
    for r in &rank_vectors {
        for (j, &rank) in r.iter().enumerate() {
            counts[j][rank] += 1;
        }
    }
    let b = plan.replicates as f64;
    let p: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / b).collect())
        .collect();
    let summary = rank_summary(&p);
    Ok(RankMatrix {
        labels: m.method_names().to_vec(),
        criterion,
        orientation,
        replicates: plan.replicates,
        p,
        summary,
    })
}

/// Coverage of the rank intervals in [`rank_summary`].
pub const RANK_INTERVAL_LEVEL: f64 = 0.90;

/// Modal rank and shortest 90 % rank window of every row of a ranking
/// probability matrix. Among windows of equal length the one with the
/// largest mass, then the lowest start, is kept.
pub fn rank_summary(p: &[Vec<f64>]) -> Vec<RankSummary> {
    const SLACK: f64 = 1e-12;
    p.iter()
        .map(|row| {
            let k = row.len();
            let mut mode = 0;
            for (r, &v) in row.iter().enumerate() {
                if v > row[mode] {
                    mode = r;
                }
            }
            let mut best: Option<(usize, usize, f64)> = None;
            'len: for len in 1..=k {
                for start in 0..=(k - len) {
                    let mass: f64 = row[start..start + len].iter().sum();
                    if mass >= RANK_INTERVAL_LEVEL - SLACK && best.is_none_or(|(_, _, m)| mass > m) {
                        best = Some((start, start + len - 1, mass));
                    }
                }
                if best.is_some() {
                    break 'len;
                }
            }
            let (lo, hi, _) = best.unwrap_or((0, k - 1, 1.0));
            RankSummary {
                mode: mode + 1,
                probability: row[mode],
                interval: (lo + 1, hi + 1),
            }
        })
        .collect()
}
