//! System-wise comparison of absolute errors.
//!
//! For two methods i and j, the per-system differences
//! `delta_k = |e_k(i)| - |e_k(j)|` are summarised by:
//!
//! - SIP(i, j): fraction of systems where method i strictly improves on j;
//! - MG(i, j): mean of the negative deltas (mean gain, only defined when
//!   SIP(i, j) > 0);
//! - ML(i, j) = -MG(j, i): mean loss.
//!
//! These decompose the MUE difference exactly:
//! `MUE(i) - MUE(j) = SIP(i,j) MG(i,j) + SIP(j,i) ML(i,j)`.

use serde::Serialize;

use crate::dataset::ErrorMatrix;
use crate::error::{Error, Result};
use crate::inference::{percentile_interval, replicate_map, BootstrapPlan};

/// Elementwise |ei| - |ej|.
pub fn abs_error_deltas(ei: &[f64], ej: &[f64]) -> Result<Vec<f64>> {
    if ei.len() != ej.len() {
        return Err(Error::LengthMismatch {
            expected: ei.len(),
            found: ej.len(),
        });
    }
    Ok(ei.iter().zip(ej).map(|(a, b)| a.abs() - b.abs()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SipPair {
    pub sip: f64,
    pub ties: usize,
    pub n: usize,
}

fn sip_from_deltas(deltas: &[f64]) -> SipPair {
    let wins = deltas.iter().filter(|&&d| d < 0.0).count();
    let ties = deltas.iter().filter(|&&d| d == 0.0).count();
    SipPair {
        sip: wins as f64 / deltas.len() as f64,
        ties,
        n: deltas.len(),
    }
}

/// Fraction of systems where `ei` has a strictly smaller absolute error
/// than `ej`, and the number of exact ties.
pub fn sip_pair(ei: &[f64], ej: &[f64]) -> Result<SipPair> {
    let d = abs_error_deltas(ei, ej)?;
    if d.is_empty() {
        return Err(Error::TooFewSystems {
            found: 0,
            required: 1,
        });
    }
    Ok(sip_from_deltas(&d))
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

fn mean_gain_from_deltas(deltas: &[f64]) -> Option<f64> {
    mean_of(deltas.iter().copied().filter(|&d| d < 0.0))
}

fn mean_loss_from_deltas(deltas: &[f64]) -> Option<f64> {
    mean_of(deltas.iter().copied().filter(|&d| d > 0.0))
}

/// Mean of the negative deltas; `None` when `ei` never improves on `ej`.
pub fn mean_gain(ei: &[f64], ej: &[f64]) -> Result<Option<f64>> {
    Ok(mean_gain_from_deltas(&abs_error_deltas(ei, ej)?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SipReport {
    pub labels: Vec<String>,
    pub n_systems: usize,
    pub sip: Vec<Vec<f64>>,
    pub ties: Vec<Vec<usize>>,
    pub mg: Vec<Vec<Option<f64>>>,
    pub ml: Vec<Vec<Option<f64>>>,
    /// Row means of `sip` off the diagonal, divided by K.
    pub msip: Vec<f64>,
    /// Method indices by decreasing MSIP (ties keep the original order).
    pub order: Vec<usize>,
}

/// MSIP(i) = (1/K) sum_{j != i} SIP(i, j).
///
/// The divisor is K, not K - 1, so the maximum attainable value is
/// (K - 1) / K.
pub fn msip_from_sip(sip: &[Vec<f64>]) -> Vec<f64> {
    let k = sip.len() as f64;
    sip.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v)
                .sum::<f64>()
                / k
        })
        .collect()
}

/// MSIP of every column of `columns`, without building a full report.
pub(crate) fn msip_of_columns(columns: &[&[f64]]) -> Vec<f64> {
    let k = columns.len();
    let n = columns[0].len();
    let mut wins = vec![vec![0usize; k]; k];
    for s in 0..n {
        for i in 0..k {
            let ai = columns[i][s].abs();
            for j in (i + 1)..k {
                let aj = columns[j][s].abs();
                if ai < aj {
                    wins[i][j] += 1;
                } else if aj < ai {
                    wins[j][i] += 1;
                }
            }
        }
    }
    let sip: Vec<Vec<f64>> = wins
        .iter()
        .map(|row| row.iter().map(|&w| w as f64 / n as f64).collect())
        .collect();
    msip_from_sip(&sip)
}

/// All pairwise SIP, MG and ML values of an error matrix.
pub fn sip_matrix(m: &ErrorMatrix) -> Result<SipReport> {
    let k = m.n_methods();
    if k < 2 {
        return Err(Error::invalid("SIP matrix needs at least two methods"));
    }
    let mut sip = vec![vec![0.0; k]; k];
    let mut ties = vec![vec![0usize; k]; k];
    let mut mg = vec![vec![None; k]; k];
    for i in 0..k {
        ties[i][i] = m.n_systems();
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = abs_error_deltas(m.column(i), m.column(j))?;
            let p = sip_from_deltas(&d);
            sip[i][j] = p.sip;
            ties[i][j] = p.ties;
            mg[i][j] = mean_gain_from_deltas(&d);
        }
    }
    let ml = (0..k)
        .map(|i| (0..k).map(|j| mg[j][i].map(|v: f64| -v)).collect())
        .collect();
    let msip = msip_from_sip(&sip);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| msip[b].total_cmp(&msip[a]));
    Ok(SipReport {
        labels: m.method_names().to_vec(),
        n_systems: m.n_systems(),
        sip,
        ties,
        mg,
        ml,
        msip,
        order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MueDecomposition {
    /// MUE(ei) - MUE(ej).
    pub delta_mue: f64,
    /// SIP(i,j) MG(i,j) + SIP(j,i) ML(i,j); undefined terms count as zero.
    pub reconstructed: f64,
}

pub fn mue_decomposition(ei: &[f64], ej: &[f64]) -> Result<MueDecomposition> {
    let d = abs_error_deltas(ei, ej)?;
    if d.is_empty() {
        return Err(Error::TooFewSystems {
            found: 0,
            required: 1,
        });
    }
    let n = d.len() as f64;
    let mue = |e: &[f64]| e.iter().map(|v| v.abs()).sum::<f64>() / n;
    let delta_mue = mue(ei) - mue(ej);

    let sip_ij = d.iter().filter(|&&v| v < 0.0).count() as f64 / n;
    let sip_ji = d.iter().filter(|&&v| v > 0.0).count() as f64 / n;
    let gain = mean_gain_from_deltas(&d).map_or(0.0, |mg| sip_ij * mg);
    let loss = mean_loss_from_deltas(&d).map_or(0.0, |ml| sip_ji * ml);
    Ok(MueDecomposition {
        delta_mue,
        reconstructed: gain + loss,
    })
}

/// A statistic with its bootstrap percentile interval. Any field may be
/// absent when the statistic is undefined (e.g. MG with SIP = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnotatedStat {
    pub value: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl AnnotatedStat {
    fn new(value: Option<f64>, replicates: &[f64], level: f64) -> Self {
        let (lo, hi) = if replicates.is_empty() {
            (None, None)
        } else {
            let (l, h) = percentile_interval(replicates, level);
            (Some(l), Some(h))
        };
        AnnotatedStat { value, lo, hi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaEcdfReport {
    /// Original row index of each sorted delta.
    pub systems: Vec<usize>,
    /// Deltas |ei| - |ej| in ascending order.
    pub deltas: Vec<f64>,
    /// Empirical CDF at each delta: #{delta <= x} / N.
    pub ecdf: Vec<f64>,
    pub band_lo: Vec<f64>,
    pub band_hi: Vec<f64>,
    pub level: f64,
    pub sip: AnnotatedStat,
    pub mg: AnnotatedStat,
    pub ml: AnnotatedStat,
    pub delta_mue: AnnotatedStat,
    pub uncertainty_bar: Option<f64>,
}

impl DeltaEcdfReport {
    /// Attaches a user-supplied dataset uncertainty level for display.
    pub fn with_uncertainty_bar(mut self, u: f64) -> Self {
        self.uncertainty_bar = Some(u);
        self
    }
}

/// Coverage of the ECDF band and statistic intervals.
pub const ECDF_LEVEL: f64 = 0.95;

/// ECDF of the absolute-error differences with pointwise 95 % percentile
/// bootstrap bands and intervals for SIP, MG, ML and the MUE difference.
///
/// The band is widened where needed so that it always contains the ECDF
/// itself.
pub fn delta_ecdf(ei: &[f64], ej: &[f64], plan: &BootstrapPlan) -> Result<DeltaEcdfReport> {
    let d = abs_error_deltas(ei, ej)?;
    let n = d.len();
    let resample_size = plan.resample_size(n)?;
    if n < 2 {
        return Err(Error::TooFewSystems {
            found: n,
            required: 2,
        });
    }

    let mut systems: Vec<usize> = (0..n).collect();
    systems.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let sorted: Vec<f64> = systems.iter().map(|&i| d[i]).collect();
    let ecdf: Vec<f64> = sorted
        .iter()
        .map(|x| sorted.partition_point(|v| v <= x) as f64 / n as f64)
        .collect();

    struct Replicate {
        cdf: Vec<f64>,
        sip: f64,
        mg: Option<f64>,
        ml: Option<f64>,
        delta_mue: f64,
    }

    let reps = replicate_map(
        plan,
        n,
        Vec::new,
        |buf: &mut Vec<f64>, idx: &[usize]| {
            buf.clear();
            buf.extend(idx.iter().map(|&i| d[i]));
            let m = resample_size as f64;
            let sip = buf.iter().filter(|&&v| v < 0.0).count() as f64 / m;
            let mg = mean_gain_from_deltas(buf);
            let ml = mean_loss_from_deltas(buf);
            let delta_mue = buf.iter().sum::<f64>() / m;
            buf.sort_unstable_by(f64::total_cmp);
            let cdf = sorted
                .iter()
                .map(|x| buf.partition_point(|v| v <= x) as f64 / m)
                .collect();
            Replicate {
                cdf,
                sip,
                mg,
                ml,
                delta_mue,
            }
        },
    )?;

    let mut band_lo = Vec::with_capacity(n);
    let mut band_hi = Vec::with_capacity(n);
    let mut column = Vec::with_capacity(reps.len());
    for (k, &f) in ecdf.iter().enumerate() {
        column.clear();
        column.extend(reps.iter().map(|r| r.cdf[k]));
        let (lo, hi) = percentile_interval(&column, ECDF_LEVEL);
        band_lo.push(lo.min(f));
        band_hi.push(hi.max(f));
    }

    let pick = |f: &dyn Fn(&Replicate) -> Option<f64>| -> Vec<f64> { reps.iter().filter_map(f).collect() };
    let point = sip_from_deltas(&d);
    Ok(DeltaEcdfReport {
        systems,
        deltas: sorted,
        ecdf,
        band_lo,
        band_hi,
        level: ECDF_LEVEL,
        sip: AnnotatedStat::new(Some(point.sip), &pick(&|r| Some(r.sip)), ECDF_LEVEL),
        mg: AnnotatedStat::new(mean_gain_from_deltas(&d), &pick(&|r| r.mg), ECDF_LEVEL),
        ml: AnnotatedStat::new(mean_loss_from_deltas(&d), &pick(&|r| r.ml), ECDF_LEVEL),
        delta_mue: AnnotatedStat::new(
            Some(d.iter().sum::<f64>() / n as f64),
            &pick(&|r| Some(r.delta_mue)),
            ECDF_LEVEL,
        ),
        uncertainty_bar: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matrix(cols: Vec<Vec<f64>>) -> ErrorMatrix {
        let names = (0..cols.len()).map(|i| format!("M{i}")).collect();
        ErrorMatrix::new(names, cols).unwrap()
    }

    #[test]
    fn delta_examples() {
        assert_eq!(abs_error_deltas(&[1.0, -2.0], &[2.0, 1.0]).unwrap(), vec![-1.0, 1.0]);
        assert_eq!(abs_error_deltas(&[1.0, -2.0], &[1.0, -2.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(
            abs_error_deltas(&[-1.0, 2.0], &[2.0, 1.0]).unwrap(),
            abs_error_deltas(&[1.0, -2.0], &[2.0, 1.0]).unwrap()
        );
        assert!(abs_error_deltas(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sip_pair_examples() {
        let e = [0.5, -1.0, 2.0];
        let p = sip_pair(&e, &e).unwrap();
        assert_eq!((p.sip, p.ties), (0.0, 3));
        let p = sip_pair(&[0.1, 0.1], &[1.0, 1.0]).unwrap();
        assert_eq!((p.sip, p.ties), (1.0, 0));
    }

    #[test]
    fn sip_pair_matches_element_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            // Coarse grid to produce ties.
            let ei: Vec<f64> = (0..5).map(|_| rng.random_range(-3i32..=3) as f64).collect();
            let ej: Vec<f64> = (0..5).map(|_| rng.random_range(-3i32..=3) as f64).collect();
            let mut wins = 0;
            let mut ties = 0;
            for k in 0..5 {
                if ei[k].abs() < ej[k].abs() {
                    wins += 1;
                }
                if ei[k].abs() == ej[k].abs() {
                    ties += 1;
                }
            }
            let p = sip_pair(&ei, &ej).unwrap();
            assert_eq!(p.sip, wins as f64 / 5.0);
            assert_eq!(p.ties, ties);
        }
    }

    #[test]
    fn total_dominance_matrix() {
        let r = sip_matrix(&matrix(vec![vec![0.1, 0.1], vec![1.0, 1.0]])).unwrap();
        assert_eq!(r.sip, vec![vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(r.msip, vec![0.5, 0.0]);
        assert_eq!(r.order, vec![0, 1]);
        assert!(r.mg[1][0].is_none());
        assert!((r.mg[0][1].unwrap() + 0.9).abs() < 1e-15);
        assert!((r.ml[1][0].unwrap() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn identical_methods() {
        let e = vec![0.3, -0.2, 1.0];
        let r = sip_matrix(&matrix(vec![e.clone(), e.clone(), e])).unwrap();
        assert!(r.msip.iter().all(|&v| v == 0.0));
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r.sip[i][j], 0.0);
                assert_eq!(r.ties[i][j], 3);
            }
        }
    }

    #[test]
    fn matrix_equals_pairwise_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..6).map(|_| rng.random_range(-4i32..=4) as f64 * 0.5).collect())
            .collect();
        let r = sip_matrix(&matrix(cols.clone())).unwrap();
        for i in 0..4 {
            let mut row_sum = 0.0;
            for j in 0..4 {
                if i == j {
                    continue;
                }
                let mut wins = 0;
                let mut gains = Vec::new();
                for k in 0..6 {
                    let dk = cols[i][k].abs() - cols[j][k].abs();
                    if dk < 0.0 {
                        wins += 1;
                        gains.push(dk);
                    }
                }
                assert_eq!(r.sip[i][j], wins as f64 / 6.0);
                let mg = (!gains.is_empty()).then(|| gains.iter().sum::<f64>() / gains.len() as f64);
                assert_eq!(r.mg[i][j], mg);
                row_sum += wins as f64 / 6.0;
            }
            assert_eq!(r.msip[i], row_sum / 4.0);
        }
        let msip = msip_of_columns(&cols.iter().map(Vec::as_slice).collect::<Vec<_>>());
        assert_eq!(msip, r.msip);
    }

    #[test]
    fn decomposition_examples() {
        let e = [0.4, -0.3];
        let d = mue_decomposition(&e, &e).unwrap();
        assert_eq!((d.delta_mue, d.reconstructed), (0.0, 0.0));
        let d = mue_decomposition(&[0.1, 0.1], &[1.0, 1.0]).unwrap();
        assert!((d.delta_mue + 0.9).abs() < 1e-15);
        assert!((d.reconstructed + 0.9).abs() < 1e-15);
    }

    #[test]
    fn decomposition_random_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let ei: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ej: Vec<f64> = (0..50).map(|_| rng.random_range(-2.0..2.0)).collect();
        let d = mue_decomposition(&ei, &ej).unwrap();
        assert!((d.delta_mue - d.reconstructed).abs() <= 1e-12 * d.delta_mue.abs().max(1e-300) + 1e-15);
    }

    #[test]
    fn ecdf_degenerate_pair() {
        let e = [0.2, -0.5, 1.0, 0.0];
        let r = delta_ecdf(&e, &e, &BootstrapPlan::new(200, 1)).unwrap();
        assert!(r.deltas.iter().all(|&v| v == 0.0));
        assert!(r.ecdf.iter().all(|&v| v == 1.0));
        assert_eq!(r.sip.value, Some(0.0));
        assert_eq!(r.mg.value, None);
        assert_eq!(r.mg.lo, None);
    }

    #[test]
    fn ecdf_report_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ei: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ej: Vec<f64> = (0..40).map(|_| rng.random_range(-1.5..1.5)).collect();
        let r = delta_ecdf(&ei, &ej, &BootstrapPlan::new(300, 9)).unwrap();
        assert_eq!(r.sip.value, Some(sip_pair(&ei, &ej).unwrap().sip));
        assert!((r.ecdf[0] - 1.0 / 40.0).abs() < 1e-15);
        assert_eq!(*r.ecdf.last().unwrap(), 1.0);
        for k in 0..40 {
            assert!(r.band_lo[k] <= r.ecdf[k] && r.ecdf[k] <= r.band_hi[k]);
            if k > 0 {
                assert!(r.ecdf[k] >= r.ecdf[k - 1]);
                assert!(r.deltas[k] >= r.deltas[k - 1]);
            }
            assert_eq!(r.deltas[k], ei[r.systems[k]].abs() - ej[r.systems[k]].abs());
        }
        let s = r.sip;
        assert!(s.lo.unwrap() <= s.value.unwrap() && s.value.unwrap() <= s.hi.unwrap());
        let again = delta_ecdf(&ei, &ej, &BootstrapPlan::new(300, 9)).unwrap();
        assert_eq!(r, again);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decomposition_identity(pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..=100)) {
            let (ei, ej): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let d = mue_decomposition(&ei, &ej).unwrap();
            let scale = d.delta_mue.abs().max(ei.iter().chain(&ej).fold(0.0f64, |m, v| m.max(v.abs())) * 1e-3);
            prop_assert!((d.delta_mue - d.reconstructed).abs() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn sip_matrix_identities(cols in prop::collection::vec(prop::collection::vec(-3i32..=3, 8), 2..5)) {
            let cols: Vec<Vec<f64>> = cols.into_iter().map(|c| c.into_iter().map(f64::from).collect()).collect();
            let r = sip_matrix(&matrix(cols)).unwrap();
            let k = r.sip.len();
            for i in 0..k {
                prop_assert_eq!(r.sip[i][i], 0.0);
                for j in 0..k {
                    if i == j { continue; }
                    prop_assert_eq!(r.sip[i][j] + r.sip[j][i] + r.ties[i][j] as f64 / 8.0, 1.0);
                    prop_assert_eq!(r.ml[i][j], r.mg[j][i].map(|v| -v));
                    prop_assert_eq!(r.mg[i][j].is_some(), r.sip[i][j] > 0.0);
                    if let Some(g) = r.mg[i][j] { prop_assert!(g < 0.0); }
                    if let Some(l) = r.ml[i][j] { prop_assert!(l > 0.0); }
                }
            }
        }

        #[test]
        fn sip_scale_invariant(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40), s in 0.01f64..100.0) {
            let (ei, ej): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let si: Vec<f64> = ei.iter().map(|v| v * s).collect();
            let sj: Vec<f64> = ej.iter().map(|v| v * s).collect();
            prop_assert_eq!(sip_pair(&ei, &ej).unwrap().sip, sip_pair(&si, &sj).unwrap().sip);
        }
    }
}
