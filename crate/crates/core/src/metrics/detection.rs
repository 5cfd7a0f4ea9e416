//! Detection-style classification metrics: confusion counts, precision /
//! recall / F-beta with explicit degenerate-case conventions, average
//! precision, FROC and calibration curves, operating-point selection, and
//! resimulation-based false-positive resolution. True negatives are never
//! used; mode detection has no meaningful TN.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assignment::MatchResult;
use crate::error::{Error, Result};
use crate::model::Mode;
use crate::numeric;

/// TP/FP/FN totals over a set of cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_count: usize,
    /// FP totals are an upper bound (non-exhaustive reference without
    /// resimulation) rather than an exact count.
    pub fp_is_upper_bound: bool,
}

/// One point of a threshold sweep. `precision`/`fppi` stay `None` on
/// curves that do not carry them (FROC has no precision, PR no FPPI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub recall: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fppi: Option<f64>,
}

pub fn confusion_from_matches(results: &[MatchResult]) -> ConfusionCounts {
    ConfusionCounts {
        tp: results.iter().map(|r| r.matches.len()).sum(),
        fp: results.iter().map(|r| r.unmatched_pred.len()).sum(),
        fn_count: results.iter().map(|r| r.unmatched_ref.len()).sum(),
        fp_is_upper_bound: results.iter().any(|r| r.fp_upper_bound_flag),
    }
}

/// Precision/recall/F-beta with conventions for empty denominators.
/// `None` means undefined (flagged, not silently zeroed): that happens
/// only when the dataset has neither references nor predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrfMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_beta: Option<f64>,
    pub beta: f64,
    /// Precision was computed from an upper-bound FP count, so it is a
    /// lower bound on the true precision.
    pub precision_from_upper_bound: bool,
    /// Convention notes for degenerate denominators.
    pub degenerate: Vec<String>,
}

/// Conventions: precision = 1 when tp+fp = 0; recall = 1 when tp+fn = 0
/// but predictions exist (no references to miss); both undefined when the
/// dataset has no references and no predictions.
pub fn prf_metrics(counts: &ConfusionCounts, beta: f64) -> Result<PrfMetrics> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Config(format!("beta {beta} must be positive")));
    }
    let (tp, fp, fn_count) = (counts.tp as f64, counts.fp as f64, counts.fn_count as f64);
    let mut degenerate = Vec::new();

    if counts.tp == 0 && counts.fp == 0 && counts.fn_count == 0 {
        degenerate.push("no references and no predictions: metrics undefined".to_string());
        return Ok(PrfMetrics {
            precision: None,
            recall: None,
            f_beta: None,
            beta,
            precision_from_upper_bound: counts.fp_is_upper_bound,
            degenerate,
        });
    }

    let precision = if counts.tp + counts.fp == 0 {
        degenerate.push("no predictions: precision = 1 by convention".to_string());
        1.0
    } else {
        tp / (tp + fp)
    };
    let recall = if counts.tp + counts.fn_count == 0 {
        degenerate.push("no references: recall = 1 by convention".to_string());
        1.0
    } else {
        tp / (tp + fn_count)
    };
    let b2 = beta * beta;
    let f_beta = if precision == 0.0 && recall == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / (b2 * precision + recall)
    };
    Ok(PrfMetrics {
        precision: Some(precision),
        recall: Some(recall),
        f_beta: Some(f_beta),
        beta,
        precision_from_upper_bound: counts.fp_is_upper_bound,
        degenerate,
    })
}

/// Average precision with all-points interpolation: predictions ranked by
/// descending confidence (stable on ties), AP = sum over recall steps of
/// the interpolated precision max_{r' >= r} p(r').
pub fn average_precision(scored: &[(f64, bool)], total_positives: usize) -> Result<f64> {
    if total_positives == 0 {
        return Err(Error::Config(
            "average precision needs at least one positive".into(),
        ));
    }
    for (i, (conf, _)) in scored.iter().enumerate() {
        if !conf.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite confidence at prediction {i}"
            )));
        }
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));

    let mut precision_at = Vec::with_capacity(scored.len());
    let mut is_tp_at = Vec::with_capacity(scored.len());
    let mut tp = 0usize;
    for (rank, &idx) in order.iter().enumerate() {
        if scored[idx].1 {
            tp += 1;
        }
        precision_at.push(tp as f64 / (rank + 1) as f64);
        is_tp_at.push(scored[idx].1);
    }
    // running max from the tail turns the staircase into its envelope
    let mut best = 0.0f64;
    let mut ap = 0.0;
    for k in (0..precision_at.len()).rev() {
        best = best.max(precision_at[k]);
        if is_tp_at[k] {
            ap += best;
        }
    }
    Ok(ap / total_positives as f64)
}

/// One case's ranked predictions plus its reference count, the unit the
/// FROC sweep consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCase {
    /// (confidence, is_tp) per prediction of this case.
    pub scored_preds: Vec<(f64, bool)>,
    pub n_refs: usize,
}

/// Recall vs false positives per case, swept over the observed confidence
/// values in descending order. Cases without predictions still count in
/// the FPPI denominator.
pub fn froc_curve(cases: &[ScoredCase]) -> Result<Vec<CurvePoint>> {
    if cases.is_empty() {
        return Err(Error::EmptyInput("froc curve over zero cases".into()));
    }
    let total_refs: usize = cases.iter().map(|c| c.n_refs).sum();
    let mut thresholds: Vec<f64> = cases
        .iter()
        .flat_map(|c| c.scored_preds.iter().map(|p| p.0))
        .collect();
    if thresholds.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numeric("non-finite confidence in froc sweep".into()));
    }
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();

    let mut points = Vec::with_capacity(thresholds.len());
    for t in thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for case in cases {
            for &(conf, is_tp) in &case.scored_preds {
                if conf >= t {
                    if is_tp {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
        }
        let recall = if total_refs == 0 {
            0.0
        } else {
            tp as f64 / total_refs as f64
        };
        points.push(CurvePoint {
            threshold: t,
            recall,
            precision: None,
            fppi: Some(fp as f64 / cases.len() as f64),
        });
    }
    Ok(points)
}

/// Uninterpolated precision-recall staircase over ranked predictions, one
/// point per distinct confidence.
pub fn pr_curve(scored: &[(f64, bool)], total_positives: usize) -> Result<Vec<CurvePoint>> {
    if total_positives == 0 {
        return Err(Error::Config("pr curve needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
    let mut points: Vec<CurvePoint> = Vec::new();
    let mut tp = 0usize;
    for (rank, &idx) in order.iter().enumerate() {
        let (conf, is_tp) = scored[idx];
        if !conf.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite confidence at prediction {idx}"
            )));
        }
        if is_tp {
            tp += 1;
        }
        let next_is_tie = order
            .get(rank + 1)
            .is_some_and(|&n| scored[n].0 == conf);
        if !next_is_tie {
            points.push(CurvePoint {
                threshold: conf,
                recall: tp as f64 / total_positives as f64,
                precision: Some(tp as f64 / (rank + 1) as f64),
                fppi: None,
            });
        }
    }
    Ok(points)
}

/// One bin of a calibration curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub mean_confidence: Option<f64>,
    pub empirical_precision: Option<f64>,
    pub count: usize,
}

pub const DEFAULT_CALIBRATION_BINS: usize = 10;

/// Equal-width bins over [0, 1]; a confidence of exactly 1.0 lands in the
/// top bin. Empty bins are emitted with count 0 and undefined precision.
pub fn calibration_curve(scored: &[(f64, bool)], num_bins: usize) -> Result<Vec<CalibrationBin>> {
    if num_bins == 0 {
        return Err(Error::Config("calibration needs at least one bin".into()));
    }
    let mut counts = vec![0usize; num_bins];
    let mut tps = vec![0usize; num_bins];
    let mut conf_sums = vec![0.0f64; num_bins];
    for (i, &(conf, is_tp)) in scored.iter().enumerate() {
        if !(0.0..=1.0).contains(&conf) {
            return Err(Error::Validation {
                case: format!("prediction {i}"),
                field: "confidence".into(),
                detail: format!("{conf} outside [0, 1]"),
            });
        }
        let bin = ((conf * num_bins as f64) as usize).min(num_bins - 1);
        counts[bin] += 1;
        conf_sums[bin] += conf;
        if is_tp {
            tps[bin] += 1;
        }
    }
    Ok((0..num_bins)
        .map(|b| {
            let width = 1.0 / num_bins as f64;
            CalibrationBin {
                lo: b as f64 * width,
                hi: (b + 1) as f64 * width,
                mean_confidence: (counts[b] > 0).then(|| conf_sums[b] / counts[b] as f64),
                empirical_precision: (counts[b] > 0).then(|| tps[b] as f64 / counts[b] as f64),
                count: counts[b],
            }
        })
        .collect())
}

/// One operating point of a sweep with its metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub operating_point: f64,
    pub metrics: BTreeMap<String, f64>,
}

/// Outcome of Metric@Target selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricAtTarget {
    pub point: SweepPoint,
    pub reported_value: f64,
    pub target_met: bool,
}

/// Metric names where a smaller value is the better one; everything else
/// is treated as higher-is-better.
fn lower_is_better(metric: &str) -> bool {
    matches!(metric, "fppi" | "mean_distance" | "median_distance")
        || metric.contains("error")
        || metric.contains("wasserstein")
        || metric.contains("kl")
        || metric.contains("mmd")
}

/// Picks the sweep point where `target_metric` >= `target_value` with the
/// best value of `report_metric` (ties to the earlier point). If no point
/// reaches the target, returns the closest one flagged `target_met:
/// false`.
pub fn metric_at_target(
    sweep: &[SweepPoint],
    target_metric: &str,
    target_value: f64,
    report_metric: &str,
) -> Result<MetricAtTarget> {
    if sweep.is_empty() {
        return Err(Error::EmptyInput("metric@target over an empty sweep".into()));
    }
    for point in sweep {
        for name in [target_metric, report_metric] {
            if !point.metrics.contains_key(name) {
                return Err(Error::Config(format!(
                    "metric {name:?} missing at operating point {}",
                    point.operating_point
                )));
            }
        }
    }
    let report_key = |p: &SweepPoint| {
        let v = p.metrics[report_metric];
        if lower_is_better(report_metric) {
            -v
        } else {
            v
        }
    };
    let qualifying = sweep
        .iter()
        .filter(|p| p.metrics[target_metric] >= target_value)
        .max_by(|a, b| report_key(a).total_cmp(&report_key(b)));
    let (chosen, met) = match qualifying {
        Some(p) => (p, true),
        None => {
            let closest = sweep
                .iter()
                .min_by(|a, b| {
                    let da = (a.metrics[target_metric] - target_value).abs();
                    let db = (b.metrics[target_metric] - target_value).abs();
                    da.total_cmp(&db)
                })
                .expect("sweep nonempty");
            (closest, false)
        }
    };
    Ok(MetricAtTarget {
        point: chosen.clone(),
        reported_value: chosen.metrics[report_metric],
        target_met: met,
    })
}

/// A forward model mapping solution-space points to observable space.
pub trait ForwardModel {
    fn simulate(&self, z: &[f64], params: &BTreeMap<String, f64>) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plausibility {
    Plausible,
    Implausible,
}

/// Resimulates a predicted mode center through the forward model and
/// compares against the observation in observable space (Euclidean,
/// absolute tolerance). Plausible unmatched predictions are alternative
/// valid solutions, not false positives.
pub fn resimulation_fp_check(
    pred: &Mode,
    forward: &dyn ForwardModel,
    params: &BTreeMap<String, f64>,
    observation: &[f64],
    tol: f64,
) -> Result<Plausibility> {
    let simulated = forward.simulate(&pred.center, params)?;
    if simulated.len() != observation.len() {
        return Err(Error::Dimension(format!(
            "forward model produced {} observables, observation has {}",
            simulated.len(),
            observation.len()
        )));
    }
    let dist = numeric::euclidean(&simulated, observation);
    Ok(if dist <= tol {
        Plausibility::Plausible
    } else {
        Plausibility::Implausible
    })
}

/// A match result after resimulation screening of its FP candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ResimulationOutcome {
    pub result: MatchResult,
    /// Unmatched predictions that resimulated within tolerance; excluded
    /// from the FP count and reported separately.
    pub plausible_alternatives: Vec<usize>,
}

/// Screens every FP candidate of `result` through the forward model;
/// plausible ones move out of `unmatched_pred` into the alternatives
/// list, and the FP upper-bound flag is dropped since the count is now
/// exact.
pub fn apply_resimulation(
    result: &MatchResult,
    pred_modes: &[Mode],
    forward: &dyn ForwardModel,
    params: &BTreeMap<String, f64>,
    observation: &[f64],
    tol: f64,
) -> Result<ResimulationOutcome> {
    let mut kept = Vec::new();
    let mut plausible = Vec::new();
    for &i in &result.unmatched_pred {
        match resimulation_fp_check(&pred_modes[i], forward, params, observation, tol)? {
            Plausibility::Plausible => plausible.push(i),
            Plausibility::Implausible => kept.push(i),
        }
    }
    let mut adjusted = result.clone();
    adjusted.unmatched_pred = kept;
    adjusted.fp_upper_bound_flag = false;
    Ok(ResimulationOutcome {
        result: adjusted,
        plausible_alternatives: plausible,
    })
}
