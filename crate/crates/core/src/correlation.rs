//! Pearson and Spearman correlation between paired samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CorrMethod {
    #[default]
    Spearman,
    Pearson,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrMatrix {
    pub labels: Vec<String>,
    pub method: CorrMethod,
    /// Row-major K x K coefficients.
    pub values: Vec<Vec<f64>>,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewSystems {
            found: x.len(),
            required: 3,
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value in correlation input"));
    }
    Ok(())
}

fn product_moment(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    product_moment(x, y)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && x[order[j]] == x[order[i]] {
            j += 1;
        }
        // Positions i..j hold ranks i+1..=j.
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Spearman rank correlation: Pearson correlation of the midranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    product_moment(&midranks(x), &midranks(y))
}

pub fn correlation(x: &[f64], y: &[f64], method: CorrMethod) -> Result<f64> {
    match method {
        CorrMethod::Pearson => pearson(x, y),
        CorrMethod::Spearman => spearman(x, y),
    }
}

/// Pairwise correlations between the columns, with a unit diagonal.
pub fn correlation_matrix(
    columns: &[Vec<f64>],
    labels: &[String],
    method: CorrMethod,
) -> Result<CorrMatrix> {
    let k = columns.len();
    if k < 2 {
        return Err(Error::invalid("correlation matrix needs at least two columns"));
    }
    if labels.len() != k {
        return Err(Error::LengthMismatch {
            expected: k,
            found: labels.len(),
        });
    }
    // Rank once per column for Spearman.
    let prepared: Vec<Vec<f64>> = match method {
        CorrMethod::Pearson => columns.to_vec(),
        CorrMethod::Spearman => columns.iter().map(|c| midranks(c)).collect(),
    };
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in 0..i {
            check_pair(&columns[i], &columns[j])?;
            let r = product_moment(&prepared[i], &prepared[j]).map_err(|_| {
                Error::UndefinedCorrelation(format!(
                    "constant column among `{}` and `{}`",
                    labels[i], labels[j]
                ))
            })?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrMatrix {
        labels: labels.to_vec(),
        method,
        values,
    })
}
