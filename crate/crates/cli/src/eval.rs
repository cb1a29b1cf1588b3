//! Evaluation: pair epochs by time tag, score every estimator on the same
//! eligible epochs, and sweep the candidate CNR threshold.
//!
//! Fairness rule: an epoch counts toward *every* method's average only when
//! the double-difference pipeline accepts it (enough shared satellites and a
//! reference-grade satellite) and all methods produce a solution. That keeps
//! the per-method averages comparable — identical sample sets, identical
//! counts.

use covr_core::estimate::{baseline_distance, estimate_baseline, EstimateConfig, Method};
use covr_core::measurement::ReceiverEpoch;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no epoch pairs to evaluate")]
    NoPairs,
    #[error("threshold list is empty")]
    NoThresholds,
    #[error("cannot average an empty estimate list")]
    EmptyEstimates,
    #[error("time tag {tag} has {count} records; need exactly 2 to pair")]
    UnpairedTag { tag: u32, count: usize },
    #[error("time tag {tag} has two records from receiver '{receiver_id}'")]
    DuplicateReceiver { tag: u32, receiver_id: String },
}

/// One method's score over the eligible epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodStats {
    pub method: Method,
    /// Mean of |d_i - d_B| over eligible epochs; absent when none were.
    pub mean_abs_error_m: Option<f64>,
    pub valid_samples: usize,
    /// Per-epoch absolute errors, in input order.
    pub errors: Vec<f64>,
}

/// Five-way comparison over one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub stats: Vec<MethodStats>,
    pub total_pairs: usize,
}

impl EvalReport {
    pub fn stats_for(&self, method: Method) -> &MethodStats {
        self.stats
            .iter()
            .find(|s| s.method == method)
            .expect("every method is reported")
    }

    /// Count shared by all methods (the fairness rule makes them equal).
    pub fn valid_samples(&self) -> usize {
        self.stats.first().map_or(0, |s| s.valid_samples)
    }
}

/// One row of a CNR-threshold sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold_dbhz: f64,
    pub mean_abs_error_m: Option<f64>,
    pub valid_samples: usize,
}

/// Groups a flat epoch list into (a, b) pairs by identical time tag. Each
/// tag must carry exactly two records from distinct receivers; within a
/// pair, the lexicographically smaller receiver id is `a`.
pub fn pair_epochs(
    epochs: Vec<ReceiverEpoch>,
) -> Result<Vec<(ReceiverEpoch, ReceiverEpoch)>, EvalError> {
    let mut by_tag: BTreeMap<u32, Vec<ReceiverEpoch>> = BTreeMap::new();
    for epoch in epochs {
        by_tag.entry(epoch.gps_time_tag).or_default().push(epoch);
    }
    let mut pairs = Vec::with_capacity(by_tag.len());
    for (tag, mut group) in by_tag {
        if group.len() != 2 {
            return Err(EvalError::UnpairedTag {
                tag,
                count: group.len(),
            });
        }
        group.sort_by(|x, y| x.receiver_id.cmp(&y.receiver_id));
        if group[0].receiver_id == group[1].receiver_id {
            return Err(EvalError::DuplicateReceiver {
                tag,
                receiver_id: group[0].receiver_id.clone(),
            });
        }
        let b = group.pop().expect("two records");
        let a = group.pop().expect("two records");
        pairs.push((a, b));
    }
    Ok(pairs)
}

/// Mean absolute deviation of estimated distances from the true distance.
pub fn avg_distance_error(estimates: &[f64], d_b: f64) -> Result<f64, EvalError> {
    if estimates.is_empty() {
        return Err(EvalError::EmptyEstimates);
    }
    Ok(estimates.iter().map(|d| (d - d_b).abs()).sum::<f64>() / estimates.len() as f64)
}

/// Runs all five methods over the epoch pairs and scores them on the shared
/// eligible subset. `d_b` is the true inter-receiver distance in meters.
pub fn run_comparison(
    pairs: &[(ReceiverEpoch, ReceiverEpoch)],
    d_b: f64,
    cfg: &EstimateConfig,
) -> Result<EvalReport, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoPairs);
    }
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); Method::ALL.len()];
    for (a, b) in pairs {
        let mut distances = Vec::with_capacity(Method::ALL.len());
        for method in Method::ALL {
            match estimate_baseline(a, b, method, cfg) {
                Ok(est) => distances.push(baseline_distance(&est.r)),
                Err(_) => break,
            }
        }
        // The epoch counts only when every method solved it; the double
        // difference gates are the binding ones.
        if distances.len() == Method::ALL.len() {
            for (errs, d) in errors.iter_mut().zip(distances) {
                errs.push((d - d_b).abs());
            }
        }
    }
    let stats = Method::ALL
        .iter()
        .zip(errors)
        .map(|(&method, errs)| MethodStats {
            method,
            mean_abs_error_m: if errs.is_empty() {
                None
            } else {
                Some(errs.iter().sum::<f64>() / errs.len() as f64)
            },
            valid_samples: errs.len(),
            errors: errs,
        })
        .collect();
    Ok(EvalReport {
        stats,
        total_pairs: pairs.len(),
    })
}

/// Sweeps the candidate CNR threshold and scores plain least squares on
/// double differences at each setting. The reference satellite is the
/// best-CNR shared satellite with no reference gate applied, so the
/// threshold under study is the only gate.
pub fn cnr_threshold_sweep(
    pairs: &[(ReceiverEpoch, ReceiverEpoch)],
    thresholds: &[f64],
    d_b: f64,
) -> Result<Vec<SweepRow>, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoPairs);
    }
    if thresholds.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    let mut rows = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let cfg = EstimateConfig {
            cnr_min: threshold,
            cnr_ref: f64::NEG_INFINITY,
        };
        let mut errors = Vec::new();
        for (a, b) in pairs {
            if let Ok(est) = estimate_baseline(a, b, Method::LsDd, &cfg) {
                errors.push((baseline_distance(&est.r) - d_b).abs());
            }
        }
        rows.push(SweepRow {
            threshold_dbhz: threshold,
            mean_abs_error_m: if errors.is_empty() {
                None
            } else {
                Some(errors.iter().sum::<f64>() / errors.len() as f64)
            },
            valid_samples: errors.len(),
        });
    }
    Ok(rows)
}

fn fmt_mean(mean: Option<f64>) -> String {
    mean.map_or_else(String::new, |m| format!("{m:.3}"))
}

/// Machine-readable comparison report.
pub fn comparison_csv(report: &EvalReport) -> String {
    let mut out = String::from("method,mean_abs_error_m,valid_samples\n");
    for s in &report.stats {
        out.push_str(&format!(
            "{},{},{}\n",
            s.method.name(),
            fmt_mean(s.mean_abs_error_m),
            s.valid_samples
        ));
    }
    out
}

/// Human-readable comparison table.
pub fn comparison_table(report: &EvalReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8}  {:>18}  {:>13}\n",
        "method", "mean_abs_error_m", "valid_samples"
    ));
    for s in &report.stats {
        let mean = s
            .mean_abs_error_m
            .map_or_else(|| "-".to_string(), |m| format!("{m:.3}"));
        out.push_str(&format!(
            "{:<8}  {:>18}  {:>13}\n",
            s.method.name(),
            mean,
            s.valid_samples
        ));
    }
    out.push_str(&format!(
        "({} of {} epoch pairs eligible)\n",
        report.valid_samples(),
        report.total_pairs
    ));
    out
}

/// Machine-readable sweep report.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("threshold_dbhz,mean_abs_error_m,valid_samples\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{}\n",
            r.threshold_dbhz,
            fmt_mean(r.mean_abs_error_m),
            r.valid_samples
        ));
    }
    out
}

/// Human-readable sweep table.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>14}  {:>18}  {:>13}\n",
        "threshold_dbhz", "mean_abs_error_m", "valid_samples"
    ));
    for r in rows {
        let mean = r
            .mean_abs_error_m
            .map_or_else(|| "-".to_string(), |m| format!("{m:.3}"));
        out.push_str(&format!(
            "{:>14}  {:>18}  {:>13}\n",
            r.threshold_dbhz, mean, r.valid_samples
        ));
    }
    out
}
