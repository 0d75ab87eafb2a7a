//! Scalar statistics of a single error set.
//!
//! RMSD is the sample standard deviation of the errors about their mean
//! (denominator N-1), not the root of the mean squared error.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::special::beta_reg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QuantileMethod {
    /// Harrell-Davis: beta-weighted average of all order statistics.
    #[default]
    Hd,
    /// Hyndman-Fan type 7: linear interpolation between two order statistics.
    Type7,
}

/// Statistic summarising an error set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StatKind {
    /// Mean signed error.
    Mse,
    /// Mean unsigned error.
    Mue,
    /// Standard deviation of the errors.
    Rmsd,
    /// Quantile of the absolute errors at level `q`.
    Quantile { q: f64, method: QuantileMethod },
}

impl StatKind {
    pub const DEFAULT_Q: f64 = 0.95;

    /// Q95 of absolute errors with the Harrell-Davis estimator.
    pub fn q95() -> Self {
        StatKind::Quantile {
            q: Self::DEFAULT_Q,
            method: QuantileMethod::Hd,
        }
    }

    pub fn quantile(q: f64, method: QuantileMethod) -> Result<Self> {
        let k = StatKind::Quantile { q, method };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StatKind::Quantile { q, .. } if !(q > 0.0 && q < 1.0) => Err(Error::invalid(format!(
                "quantile level must lie strictly inside (0, 1), got {q}"
            ))),
            _ => Ok(()),
        }
    }

    /// Precomputes whatever the statistic needs for samples of size `n`.
    pub fn prepare(&self, n: usize) -> Result<PreparedStat> {
        self.validate()?;
        if n < 2 {
            return Err(Error::TooFewSystems {
                found: n,
                required: 2,
            });
        }
        let hd = match *self {
            StatKind::Quantile {
                q,
                method: QuantileMethod::Hd,
            } => Some(HdWeights::new(n, q)),
            _ => None,
        };
        Ok(PreparedStat { kind: *self, n, hd })
    }
}

impl fmt::Display for StatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatKind::Mse => f.write_str("MSE"),
            StatKind::Mue => f.write_str("MUE"),
            StatKind::Rmsd => f.write_str("RMSD"),
            StatKind::Quantile { q, method } => {
                let pct = q * 100.0;
                let m = match method {
                    QuantileMethod::Hd => "HD",
                    QuantileMethod::Type7 => "type7",
                };
                if (pct - pct.round()).abs() < 1e-9 {
                    write!(f, "Q{}[{m}]", pct.round())
                } else {
                    write!(f, "Q{pct}[{m}]")
                }
            }
        }
    }
}

/// Harrell-Davis weights for one (n, q), restricted to the window of order
/// statistics whose weight is not exactly zero.
#[derive(Debug, Clone)]
pub struct HdWeights {
    /// 0-based index of the first order statistic carrying weight.
    start: usize,
    weights: Vec<f64>,
}

impl HdWeights {
    pub fn new(n: usize, q: f64) -> Self {
        assert!(n >= 1 && q > 0.0 && q < 1.0);
        let nf = n as f64;
        let a = (nf + 1.0) * q;
        let b = (nf + 1.0) * (1.0 - q);
        let cdf = |i: usize| beta_reg(a, b, i as f64 / nf);

        // Outside [lo, hi] the beta CDF is exactly 0 or 1 in double precision.
        let mut lo = 0;
        let mut hi = n;
        let (mut l, mut r) = (0usize, n);
        while l < r {
            let m = (l + r) / 2;
            if cdf(m) > 0.0 {
                r = m;
            } else {
                l = m + 1;
            }
        }
        if l > 0 {
            lo = l - 1;
        }
        let (mut l, mut r) = (lo, n);
        while l < r {
            let m = (l + r) / 2;
            if cdf(m) >= 1.0 {
                r = m;
            } else {
                l = m + 1;
            }
        }
        if l < n {
            hi = l;
        }

        let mut prev = cdf(lo);
        let weights = (lo + 1..=hi)
            .map(|i| {
                let c = if i == n { 1.0 } else { cdf(i) };
                let w = c - prev;
                prev = c;
                w
            })
            .collect();
        HdWeights { start: lo, weights }
    }

    /// Estimate from an ascending-sorted sample of the prepared size.
    pub fn apply_sorted(&self, sorted: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&sorted[self.start..])
            .map(|(w, x)| w * x)
            .sum()
    }

    /// Full weight vector of length n (mostly zeros for large n).
    pub fn dense(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; n];
        w[self.start..self.start + self.weights.len()].copy_from_slice(&self.weights);
        w
    }
}

/// A statistic ready to be evaluated repeatedly on samples of one size.
#[derive(Debug, Clone)]
pub struct PreparedStat {
    kind: StatKind,
    n: usize,
    hd: Option<HdWeights>,
}

impl PreparedStat {
    pub fn kind(&self) -> StatKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Evaluates the statistic; `scratch` is reused between calls to avoid
    /// allocating. `e.len()` must equal the prepared size.
    pub fn eval(&self, e: &[f64], scratch: &mut Vec<f64>) -> f64 {
        debug_assert_eq!(e.len(), self.n);
        let n = e.len() as f64;
        match self.kind {
            StatKind::Mse => e.iter().sum::<f64>() / n,
            StatKind::Mue => e.iter().map(|x| x.abs()).sum::<f64>() / n,
            StatKind::Rmsd => sample_variance(e).sqrt(),
            StatKind::Quantile { q, method } => {
                scratch.clear();
                scratch.extend(e.iter().map(|x| x.abs()));
                scratch.sort_unstable_by(f64::total_cmp);
                match method {
                    QuantileMethod::Hd => self.hd.as_ref().unwrap().apply_sorted(scratch),
                    QuantileMethod::Type7 => type7_sorted(scratch, q),
                }
            }
        }
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Value of statistic `kind` on the error vector `e`.
pub fn evaluate(kind: StatKind, e: &[f64]) -> Result<f64> {
    if e.is_empty() {
        return Err(Error::invalid("empty error vector"));
    }
    let stat = kind.prepare(e.len())?;
    Ok(stat.eval(e, &mut Vec::new()))
}

fn check_sample(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::TooFewSystems {
            found: x.len(),
            required: 2,
        });
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("NaN in sample"));
    }
    Ok(())
}

fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// Harrell-Davis estimate of the level-`q` quantile of `x`.
pub fn quantile_hd(x: &[f64], q: f64) -> Result<f64> {
    check_sample(x)?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::invalid(format!("quantile level {q} outside (0, 1)")));
    }
    Ok(HdWeights::new(x.len(), q).apply_sorted(&sorted_copy(x)))
}

fn type7_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Hyndman-Fan type 7 estimate of the level-`q` quantile of `x`
/// (`q` in [0, 1]).
pub fn quantile_type7(x: &[f64], q: f64) -> Result<f64> {
    check_sample(x)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
    }
    Ok(type7_sorted(&sorted_copy(x), q))
}

/// Standard error of the mean, s_e / sqrt(N), optionally inflated by
/// sqrt((N-1)/(N-3)) to account for the uncertainty on s_e.
pub fn mean_standard_error(e: &[f64], small_n_correction: bool) -> Result<f64> {
    check_sample(e)?;
    let n = e.len();
    if small_n_correction && n <= 3 {
        return Err(Error::TooFewSystems {
            found: n,
            required: 4,
        });
    }
    let se = (sample_variance(e) / n as f64).sqrt();
    if small_n_correction {
        let nf = n as f64;
        Ok(se * ((nf - 1.0) / (nf - 3.0)).sqrt())
    } else {
        Ok(se)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedMeanResult {
    pub mean: f64,
    pub uncertainty: f64,
    pub weights: Vec<f64>,
    /// Model-error variance (zero for the plain weighted mean).
    pub sigma2_model: f64,
    pub chi2w: f64,
    pub chi2_dof: usize,
    /// Whether `chi2w` lies in the central 95 % interval of chi2(N-1).
    pub consistent: bool,
    pub iterations: usize,
    pub converged: bool,
}

fn check_uncertainties(e: &[f64], u: &[f64], strictly_positive: bool) -> Result<()> {
    check_sample(e)?;
    if u.len() != e.len() {
        return Err(Error::LengthMismatch {
            expected: e.len(),
            found: u.len(),
        });
    }
    let bad = |v: f64| !v.is_finite() || v < 0.0 || (strictly_positive && v == 0.0);
    if let Some(v) = u.iter().copied().find(|&v| bad(v)) {
        return Err(Error::invalid(format!(
            "uncertainty {v} not allowed (must be {})",
            if strictly_positive { "> 0" } else { ">= 0" }
        )));
    }
    Ok(())
}

fn chi2_interval(dof: usize) -> (f64, f64) {
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    (dist.inverse_cdf(0.025), dist.inverse_cdf(0.975))
}

/// Weighted chi-squared of `e` about `mean`, and whether it falls inside the
/// central 95 % interval of a chi-squared law with N-1 degrees of freedom.
pub fn chi2_weighted(e: &[f64], u: &[f64], mean: f64) -> Result<(f64, bool)> {
    check_uncertainties(e, u, true)?;
    let chi2: f64 = e
        .iter()
        .zip(u)
        .map(|(x, s)| ((x - mean) / s).powi(2))
        .sum();
    let (lo, hi) = chi2_interval(e.len() - 1);
    Ok((chi2, chi2 >= lo && chi2 <= hi))
}

/// Inverse-variance weighted mean of `e`.
pub fn weighted_mean(e: &[f64], u: &[f64]) -> Result<WeightedMeanResult> {
    check_uncertainties(e, u, true)?;
    let inv: Vec<f64> = u.iter().map(|s| 1.0 / (s * s)).collect();
    let total: f64 = inv.iter().sum();
    let weights: Vec<f64> = inv.iter().map(|w| w / total).collect();
    let mean = weights.iter().zip(e).map(|(w, x)| w * x).sum();
    let (chi2w, consistent) = chi2_weighted(e, u, mean)?;
    Ok(WeightedMeanResult {
        mean,
        uncertainty: total.sqrt().recip(),
        weights,
        sigma2_model: 0.0,
        chi2w,
        chi2_dof: e.len() - 1,
        consistent,
        iterations: 0,
        converged: true,
    })
}

/// Default relative tolerance for [`cochran_rescale`].
pub const COCHRAN_TOL: f64 = 1e-8;
/// Default iteration cap for [`cochran_rescale`].
pub const COCHRAN_MAX_ITER: usize = 100;

/// Weighted mean with a model-error variance estimated by Cochran's ANOVA
/// decomposition var(e) = sigma^2 + mean(u^2), iterated to self-consistency.
///
/// Hitting `max_iter` is not an error: the last iterate is returned with
/// `converged == false`.
pub fn cochran_rescale(e: &[f64], u: &[f64], max_iter: usize, tol: f64) -> Result<WeightedMeanResult> {
    check_uncertainties(e, u, false)?;
    let n = e.len();
    if n < 3 {
        return Err(Error::TooFewSystems {
            found: n,
            required: 3,
        });
    }
    let nf = n as f64;
    let s_e = sample_variance(e).sqrt();
    let mean_u2 = u.iter().map(|s| s * s).sum::<f64>() / nf;

    let mut center = mean(e);
    let mut sigma2 = 0.0;
    let mut weights = vec![1.0 / nf; n];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let var = e.iter().map(|x| (x - center).powi(2)).sum::<f64>() / (nf - 1.0);
        sigma2 = (var - mean_u2).max(0.0);
        weights = cochran_weights(sigma2, u);
        let next: f64 = weights.iter().zip(e).map(|(w, x)| w * x).sum();
        let step = (next - center).abs();
        center = next;
        if step <= tol * s_e {
            converged = true;
            break;
        }
    }

    let eff: Vec<f64> = u.iter().map(|s| sigma2 + s * s).collect();
    let uncertainty = if eff.iter().any(|&v| v == 0.0) {
        0.0
    } else {
        eff.iter().map(|v| v.recip()).sum::<f64>().sqrt().recip()
    };
    let chi2w = if eff.iter().all(|&v| v > 0.0) {
        e.iter().zip(&eff).map(|(x, v)| (x - center).powi(2) / v).sum()
    } else {
        0.0
    };
    let (lo, hi) = chi2_interval(n - 1);
    Ok(WeightedMeanResult {
        mean: center,
        uncertainty,
        weights,
        sigma2_model: sigma2,
        chi2w,
        chi2_dof: n - 1,
        consistent: chi2w >= lo && chi2w <= hi,
        iterations,
        converged,
    })
}

fn cochran_weights(sigma2: f64, u: &[f64]) -> Vec<f64> {
    let eff: Vec<f64> = u.iter().map(|s| sigma2 + s * s).collect();
    let zeros = eff.iter().filter(|&&v| v == 0.0).count();
    if zeros > 0 {
        // Points with zero total variance carry all the weight.
        let w = 1.0 / zeros as f64;
        return eff.iter().map(|&v| if v == 0.0 { w } else { 0.0 }).collect();
    }
    let total: f64 = eff.iter().map(|v| v.recip()).sum();
    eff.iter().map(|v| v.recip() / total).collect()
}
