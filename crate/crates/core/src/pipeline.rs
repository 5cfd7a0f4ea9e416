//! End-to-end evaluation: cluster the predicted samples into modes, match
//! them against the reference, compute the requested metrics, and assemble
//! a deterministic report.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_hierarchical, AggregationSpec};
use crate::assignment::{assign, AssignmentStrategy, MatchResult};
use crate::detect::{
    dbscan, extract_modes, unidip, CenterRule, ClusterLabeling, DbscanParams, UnidipParams,
};
use crate::detect::bootstrap_confidence;
use crate::error::{Error, Result};
use crate::localization::LocalizationCriterion;
use crate::metrics::{
    average_precision, calibration_curve, confusion_from_matches, cross_entropy, froc_curve,
    kl_discretized, ks_two_sample, marginal_wasserstein, mmd2, pr_curve, prf_metrics,
    wasserstein_1d, apply_resimulation, DiscretizationSpec, ForwardModel, KernelSpec,
    MarginalAggregate, MmdEstimator, ScoredCase, SweepPoint, DEFAULT_CALIBRATION_BINS,
};
use crate::model::{Diagnostic, Fingerprint, PosteriorSamples, ValidationCase};
use crate::numeric::splitmix64;
use crate::recommend::{recommend_with_options, RecommendOptions};
use crate::report::{config_hash, tool_version, MetricReport, Provenance, Scalar};

/// Mode detector to run on the predicted samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DetectMethod {
    Dbscan(DbscanParams),
    Unidip(UnidipParams),
}

// no deny_unknown_fields here: serde cannot combine it with flatten
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    #[serde(flatten)]
    pub method: DetectMethod,
    /// `None` picks median for 1-D samples and the cluster mean otherwise.
    #[serde(default)]
    pub center_rule: Option<CenterRule>,
    /// Stability bootstrap replicates behind mode confidences; 0 disables
    /// confidence attachment.
    #[serde(default)]
    pub bootstrap_resamples: usize,
}

/// Surplus-prediction screening through the problem's forward model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResimulationConfig {
    /// Forward model family name; see [`forward_model`].
    pub family: String,
    /// Tolerance as a fraction of the observation norm.
    #[serde(default = "default_tol_rel")]
    pub tol_rel: f64,
}

fn default_tol_rel() -> f64 {
    0.05
}

/// Which metrics to compute: the literal string `"auto"` defers to the
/// fingerprint-driven recommender, an explicit list pins them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSelection {
    Named(String),
    Explicit(Vec<String>),
}

impl Default for MetricSelection {
    fn default() -> Self {
        MetricSelection::Named("auto".to_string())
    }
}

pub const DETECTION_METRIC_NAMES: [&str; 9] = [
    "recall",
    "precision",
    "f_beta",
    "ap",
    "froc",
    "fppi",
    "calibration_curve",
    "matched_distance",
    "resimulation_screen",
];

pub const DISTRIBUTION_METRIC_NAMES: [&str; 6] = [
    "cross_entropy",
    "kl_discretized",
    "ks_two_sample",
    "wasserstein_1d",
    "marginal_wasserstein",
    "mmd2",
];

fn default_assignment() -> AssignmentStrategy {
    AssignmentStrategy::GreedyByLocalization
}

fn default_beta() -> f64 {
    1.0
}

fn default_calibration_bins() -> usize {
    DEFAULT_CALIBRATION_BINS
}

fn default_mmd_estimator() -> MmdEstimator {
    MmdEstimator::Biased
}

fn default_marginal_aggregate() -> MarginalAggregate {
    MarginalAggregate::Mean
}

/// Full configuration of one evaluation run. Serializes canonically, so
/// [`config_hash`] over it is stable across runs and platforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOptions {
    pub fingerprint: Fingerprint,
    /// Required whenever a detection-family metric is requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detect: Option<DetectConfig>,
    /// Required whenever a detection-family metric is requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization: Option<LocalizationCriterion>,
    #[serde(default = "default_assignment")]
    pub assignment: AssignmentStrategy,
    #[serde(default)]
    pub metrics: MetricSelection,
    #[serde(default)]
    pub aggregation: AggregationSpec,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_calibration_bins")]
    pub calibration_bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resimulation: Option<ResimulationConfig>,
    /// Histogram grid for discretized KL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretization: Option<DiscretizationSpec>,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default = "default_mmd_estimator")]
    pub mmd_estimator: MmdEstimator,
    #[serde(default = "default_marginal_aggregate")]
    pub marginal_aggregate: MarginalAggregate,
    /// Feeds the recommender: an operating-point sweep is planned.
    #[serde(default)]
    pub sweep_declared: bool,
    /// Feeds the recommender: too many dimensions to histogram.
    #[serde(default)]
    pub high_dimensional: bool,
    #[serde(default)]
    pub seed: u64,
}

impl EvalOptions {
    /// Minimal options for a detection-style run.
    pub fn new(fingerprint: Fingerprint, detect: DetectConfig, localization: LocalizationCriterion) -> Self {
        EvalOptions {
            fingerprint,
            detect: Some(detect),
            localization: Some(localization),
            assignment: default_assignment(),
            metrics: MetricSelection::default(),
            aggregation: AggregationSpec::default(),
            beta: default_beta(),
            calibration_bins: default_calibration_bins(),
            resimulation: None,
            discretization: None,
            kernel: KernelSpec::default(),
            mmd_estimator: default_mmd_estimator(),
            marginal_aggregate: default_marginal_aggregate(),
            sweep_declared: false,
            high_dimensional: false,
            seed: 0,
        }
    }
}

/// Looks up a forward model by family name.
pub fn forward_model(family: &str) -> Result<Box<dyn ForwardModel>> {
    match family {
        "complex_roots" => Ok(Box::new(crate::toybench::ComplexRootsForward)),
        other => Err(Error::Config(format!(
            "unknown forward model family '{other}' (known: complex_roots)"
        ))),
    }
}

fn run_detect_method(samples: &PosteriorSamples, method: &DetectMethod) -> Result<ClusterLabeling> {
    match method {
        DetectMethod::Dbscan(p) => dbscan(samples, p),
        DetectMethod::Unidip(p) => unidip(samples, p),
    }
}

/// Expands `"auto"` through the recommender and validates explicit lists.
/// Returns the metric names plus any notes worth surfacing in the report.
fn resolve_metrics(opts: &EvalOptions) -> Result<(Vec<String>, Vec<Diagnostic>)> {
    let mut notes = Vec::new();
    let mut names: Vec<String> = match &opts.metrics {
        MetricSelection::Named(s) if s == "auto" => {
            let plan = recommend_with_options(
                &opts.fingerprint,
                &RecommendOptions {
                    sweep_declared: opts.sweep_declared,
                    high_dimensional: opts.high_dimensional,
                },
            );
            let mut names: Vec<String> = plan
                .distribution_metrics
                .iter()
                .map(|m| m.name.clone())
                .collect();
            if let Some(det) = &plan.detection_plan {
                names.extend(det.classification_metrics.iter().cloned());
                if det.matched_mode_distance {
                    names.push("matched_distance".to_string());
                }
            }
            // The recommender can suggest the screen without knowing whether
            // a forward model is configured; dropping it beats erroring out.
            if names.iter().any(|n| n == "resimulation_screen") && opts.resimulation.is_none() {
                names.retain(|n| n != "resimulation_screen");
                notes.push(Diagnostic::new(
                    "metric selection".to_string(),
                    "recommended resimulation screen skipped: no forward model configured"
                        .to_string(),
                ));
            }
            names
        }
        MetricSelection::Named(other) => {
            return Err(Error::Config(format!(
                "metric selection '{other}' not recognized; use \"auto\" or an explicit list"
            )))
        }
        MetricSelection::Explicit(list) => {
            if list.is_empty() {
                return Err(Error::Config("explicit metric list is empty".into()));
            }
            for name in list {
                if !DETECTION_METRIC_NAMES.contains(&name.as_str())
                    && !DISTRIBUTION_METRIC_NAMES.contains(&name.as_str())
                {
                    return Err(Error::Config(format!(
                        "unknown metric '{name}' (detection: {}; distribution: {})",
                        DETECTION_METRIC_NAMES.join(", "),
                        DISTRIBUTION_METRIC_NAMES.join(", ")
                    )));
                }
            }
            list.clone()
        }
    };
    // dedupe, keeping first occurrence
    let mut seen = BTreeSet::new();
    names.retain(|n| seen.insert(n.clone()));
    Ok((names, notes))
}

fn requested(names: &[String], name: &str) -> bool {
    names.iter().any(|n| n == name)
}

fn needs_detection(names: &[String]) -> bool {
    names
        .iter()
        .any(|n| DETECTION_METRIC_NAMES.contains(&n.as_str()))
}

fn needs_scores(names: &[String]) -> bool {
    ["ap", "froc", "calibration_curve"]
        .iter()
        .any(|n| requested(names, n))
}

/// Rejects metric requests the fingerprint or configuration cannot honor.
/// Inconsistencies that only degrade a metric become diagnostics instead.
fn guard_request(cases: &[ValidationCase], opts: &EvalOptions, names: &[String]) -> Result<()> {
    let fp = &opts.fingerprint;
    let detection = needs_detection(names);

    if detection {
        if !fp.reference_granularity.provides_modes() {
            return Err(Error::Fingerprint(
                "detection metrics requested, but the fingerprint's reference granularity \
                 carries no mode list"
                    .to_string(),
            ));
        }
        if opts.detect.is_none() {
            return Err(Error::Config(
                "detection metrics requested but no detector is configured".into(),
            ));
        }
        if opts.localization.is_none() {
            return Err(Error::Config(
                "detection metrics requested but no localization criterion is configured".into(),
            ));
        }
    }

    let scores_needed =
        needs_scores(names) || (detection && opts.assignment == AssignmentStrategy::GreedyByScore);
    if scores_needed {
        if !fp.confidence_scores.is_available() {
            return Err(Error::Fingerprint(
                "ranking or calibration over confidence scores requested, but the fingerprint \
                 marks confidence scores unavailable"
                    .to_string(),
            ));
        }
        let resamples = opts.detect.map(|d| d.bootstrap_resamples).unwrap_or(0);
        if resamples == 0 {
            return Err(Error::Config(
                "confidence scores are needed (ranking metric or score-greedy assignment) \
                 but bootstrap_resamples is 0"
                    .to_string(),
            ));
        }
    }

    if requested(names, "resimulation_screen") {
        if !fp.resimulation.is_available() {
            return Err(Error::Fingerprint(
                "resimulation screen requested, but the fingerprint marks the forward model \
                 unavailable"
                    .to_string(),
            ));
        }
        if opts.resimulation.is_none() {
            return Err(Error::Config(
                "resimulation screen requested but no forward model family is configured".into(),
            ));
        }
        for case in cases {
            if case.observation.is_none() {
                return Err(Error::Validation {
                    case: case.id.clone(),
                    field: "observation".into(),
                    detail: "resimulation screen needs the observation that was inverted".into(),
                });
            }
        }
    }

    // fingerprint- and config-level gates first; per-case data checks after
    if requested(names, "cross_entropy") && !fp.log_density.is_available() {
        return Err(Error::Fingerprint(
            "cross entropy requested, but the fingerprint marks the prediction log-density \
             unavailable"
                .to_string(),
        ));
    }
    if requested(names, "kl_discretized") {
        if !fp.discretization.is_available() {
            return Err(Error::Fingerprint(
                "discretized KL requested, but the fingerprint marks discretization \
                 unavailable"
                    .to_string(),
            ));
        }
        if opts.discretization.is_none() {
            return Err(Error::Config(
                "discretized KL requested but no histogram grid is configured".into(),
            ));
        }
    }

    let distribution_names: Vec<&String> = names
        .iter()
        .filter(|n| DISTRIBUTION_METRIC_NAMES.contains(&n.as_str()))
        .collect();
    if !distribution_names.is_empty() {
        for case in cases {
            if case.reference.samples.is_none() {
                return Err(Error::Validation {
                    case: case.id.clone(),
                    field: "reference.samples".into(),
                    detail: format!(
                        "distribution metric '{}' needs reference samples",
                        distribution_names[0]
                    ),
                });
            }
        }
    }

    if requested(names, "cross_entropy") {
        for case in cases {
            match (&case.prediction_log_density, &case.reference.samples) {
                (None, _) => {
                    return Err(Error::Validation {
                        case: case.id.clone(),
                        field: "prediction_log_density".into(),
                        detail: "cross entropy needs the predicted log-density at the reference \
                                 samples"
                            .into(),
                    })
                }
                (Some(ld), Some(rs)) if ld.len() != rs.len() => {
                    return Err(Error::Validation {
                        case: case.id.clone(),
                        field: "prediction_log_density".into(),
                        detail: format!(
                            "{} log-density values for {} reference samples",
                            ld.len(),
                            rs.len()
                        ),
                    })
                }
                _ => {}
            }
        }
    }

    for name in ["ks_two_sample", "wasserstein_1d"] {
        if requested(names, name) {
            for case in cases {
                if case.prediction.dim() != 1 {
                    return Err(Error::Dimension(format!(
                        "{name} needs univariate samples; case '{}' has dimension {}",
                        case.id,
                        case.prediction.dim()
                    )));
                }
            }
        }
    }

    Ok(())
}

/// Everything the detection path extracts from one case.
struct CaseEval {
    result: MatchResult,
    /// Unmatched predictions vindicated by resimulation.
    plausible: Vec<usize>,
    scored: Option<ScoredCase>,
    matched_distances: Vec<f64>,
}

fn detect_and_match(
    cases: &[ValidationCase],
    opts: &EvalOptions,
    names: &[String],
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<Vec<CaseEval>> {
    let detect_cfg = opts.detect.as_ref().expect("guarded");
    let criterion = opts.localization.as_ref().expect("guarded");
    let attach_conf = needs_scores(names)
        || opts.assignment == AssignmentStrategy::GreedyByScore;
    let screen = requested(names, "resimulation_screen");
    let forward = match (&opts.resimulation, screen) {
        (Some(cfg), true) => Some((forward_model(&cfg.family)?, cfg.tol_rel)),
        _ => None,
    };
    let fp_upper_bound = !opts.fingerprint.reference_granularity.is_exhaustive() && !screen;

    let mut evals = Vec::with_capacity(cases.len());
    for (idx, case) in cases.iter().enumerate() {
        let labeling = run_detect_method(&case.prediction, &detect_cfg.method)?;
        let rule = detect_cfg
            .center_rule
            .unwrap_or_else(|| CenterRule::default_for_dim(case.prediction.dim()));
        let mut detected = extract_modes(&case.prediction, &labeling, rule)?;
        for d in &detected.diagnostics {
            diagnostics.push(Diagnostic::new(
                format!("case {}: {}", case.id, d.context),
                d.detail.clone(),
            ));
        }
        if attach_conf && detect_cfg.bootstrap_resamples > 0 {
            let method = detect_cfg.method;
            let recluster = move |s: &PosteriorSamples| run_detect_method(s, &method);
            // one deterministic stream per case, decorrelated across cases
            let case_seed = splitmix64(opts.seed ^ idx as u64);
            detected = bootstrap_confidence(
                &case.prediction,
                &detected,
                &recluster,
                detect_cfg.bootstrap_resamples,
                case_seed,
            )?;
        }

        let preds = detected.modes;
        let refs = &case.reference.modes;
        let mut result = assign(opts.assignment, &preds, refs, criterion)?;
        result.fp_upper_bound_flag = fp_upper_bound;

        let mut plausible = Vec::new();
        if let Some((model, tol_rel)) = &forward {
            let obs = case.observation.as_ref().expect("guarded");
            let norm = obs.y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tol = if norm > 0.0 { tol_rel * norm } else { *tol_rel };
            let outcome = apply_resimulation(
                &result,
                preds.modes(),
                model.as_ref(),
                &obs.params,
                &obs.y,
                tol,
            )?;
            result = outcome.result;
            plausible = outcome.plausible_alternatives;
            for &p in &plausible {
                diagnostics.push(Diagnostic::new(
                    format!("case {}", case.id),
                    format!(
                        "prediction mode {p} resimulates within tolerance {tol:.3e}; \
                         kept out of the FP count"
                    ),
                ));
            }
        }

        let scored = if attach_conf {
            let matched: BTreeSet<usize> = result.matches.iter().map(|m| m.pred).collect();
            let excluded: BTreeSet<usize> = plausible.iter().copied().collect();
            let mut scored_preds = Vec::new();
            for (k, mode) in preds.modes().iter().enumerate() {
                if excluded.contains(&k) {
                    continue;
                }
                let c = mode.confidence.ok_or_else(|| {
                    Error::Config(format!(
                        "case '{}': prediction mode {k} carries no confidence score",
                        case.id
                    ))
                })?;
                scored_preds.push((c, matched.contains(&k)));
            }
            Some(ScoredCase {
                scored_preds,
                n_refs: refs.modes().len(),
            })
        } else {
            None
        };

        // Matched-mode distance = the localization score where that score
        // is a distance; inside/outside criteria carry no magnitude, so
        // fall back to the center gap.
        let matched_distances: Vec<f64> = result
            .matches
            .iter()
            .map(|m| match criterion {
                LocalizationCriterion::ConfidenceEllipsoid { .. } => crate::numeric::euclidean(
                    &preds.modes()[m.pred].center,
                    &refs.modes()[m.reference].center,
                ),
                _ => m.score,
            })
            .collect();

        evals.push(CaseEval {
            result,
            plausible,
            scored,
            matched_distances,
        });
    }
    Ok(evals)
}

fn opt_scalar(value: Option<f64>, flags: &[String]) -> Scalar {
    let mut s = Scalar {
        value,
        flags: flags.to_vec(),
    };
    if s.value.is_none() && s.flags.is_empty() {
        s.flags.push("undefined".to_string());
    }
    s
}

fn reduce_across(values: &[f64], opts: &EvalOptions) -> f64 {
    use crate::aggregate::Reducer;
    match opts.aggregation.across_cases {
        Reducer::Mean => crate::numeric::mean(values),
        Reducer::Median => {
            let mut v = values.to_vec();
            v.sort_by(f64::total_cmp);
            crate::numeric::median_sorted(&v)
        }
    }
}

/// Runs the full evaluation over a dataset and assembles the report.
pub fn evaluate_cases(cases: &[ValidationCase], opts: &EvalOptions) -> Result<MetricReport> {
    if cases.is_empty() {
        return Err(Error::EmptyInput("evaluation over zero cases".into()));
    }
    let (names, selection_notes) = resolve_metrics(opts)?;
    guard_request(cases, opts, &names)?;

    let mut report = MetricReport::new(Provenance {
        config_hash: config_hash(opts),
        seed: opts.seed,
        version: tool_version(),
    });
    report.diagnostics.extend(selection_notes);
    for case in cases {
        report
            .diagnostics
            .extend(check_case_diagnostics(case, &opts.fingerprint));
    }

    if needs_detection(&names) {
        let evals = detect_and_match(cases, opts, &names, &mut report.diagnostics)?;
        let results: Vec<MatchResult> = evals.iter().map(|e| e.result.clone()).collect();
        let counts = confusion_from_matches(&results);
        let prf = prf_metrics(&counts, opts.beta)?;

        let mut shared_flags = prf.degenerate.clone();
        if counts.fp_is_upper_bound {
            shared_flags.push("fp_count_upper_bound".to_string());
        }
        if requested(&names, "recall") {
            report
                .scalars
                .insert("recall".into(), opt_scalar(prf.recall, &prf.degenerate));
        }
        if requested(&names, "precision") {
            report
                .scalars
                .insert("precision".into(), opt_scalar(prf.precision, &shared_flags));
        }
        if requested(&names, "f_beta") {
            let s = opt_scalar(prf.f_beta, &shared_flags).with_flag(&format!("beta={}", opts.beta));
            report.scalars.insert("f_beta".into(), s);
        }
        if requested(&names, "fppi") {
            let mut s = Scalar::defined(counts.fp as f64 / cases.len() as f64);
            if counts.fp_is_upper_bound {
                s = s.with_flag("fp_count_upper_bound");
            }
            report.scalars.insert("fppi".into(), s);
        }
        if requested(&names, "resimulation_screen") {
            let screened: usize = evals.iter().map(|e| e.plausible.len()).sum();
            report.scalars.insert(
                "resimulation_screened".into(),
                Scalar::defined(screened as f64),
            );
        }

        if needs_scores(&names) {
            let scored_cases: Vec<ScoredCase> = evals
                .iter()
                .map(|e| e.scored.clone().expect("scores attached"))
                .collect();
            let pooled: Vec<(f64, bool)> = scored_cases
                .iter()
                .flat_map(|c| c.scored_preds.iter().copied())
                .collect();
            let total_refs: usize = scored_cases.iter().map(|c| c.n_refs).sum();
            if requested(&names, "ap") {
                if total_refs == 0 {
                    report.scalars.insert(
                        "ap".into(),
                        Scalar::undefined("no reference modes in the dataset"),
                    );
                } else {
                    report.scalars.insert(
                        "ap".into(),
                        Scalar::defined(average_precision(&pooled, total_refs)?),
                    );
                    report
                        .curves
                        .insert("pr".into(), pr_curve(&pooled, total_refs)?);
                }
            }
            if requested(&names, "froc") {
                report.curves.insert("froc".into(), froc_curve(&scored_cases)?);
            }
            if requested(&names, "calibration_curve") {
                report.calibration = Some(calibration_curve(&pooled, opts.calibration_bins)?);
            }
        }

        if requested(&names, "matched_distance") {
            let per_case: Vec<Vec<f64>> =
                evals.iter().map(|e| e.matched_distances.clone()).collect();
            match aggregate_hierarchical(&per_case, &opts.aggregation) {
                Ok(agg) => {
                    report.diagnostics.extend(agg.diagnostics.clone());
                    report
                        .scalars
                        .insert("matched_distance".into(), Scalar::defined(agg.location));
                    if opts.aggregation.spread != crate::aggregate::SpreadKind::None {
                        let s = match agg.spread {
                            Some(v) => Scalar::defined(v),
                            None => Scalar::undefined(
                                "spread needs at least two cases with matches",
                            ),
                        };
                        report.scalars.insert("matched_distance_spread".into(), s);
                    }
                }
                Err(_) => {
                    report.scalars.insert(
                        "matched_distance".into(),
                        Scalar::undefined("no matched modes in any case"),
                    );
                }
            }
        }
    }

    for name in &names {
        if !DISTRIBUTION_METRIC_NAMES.contains(&name.as_str()) {
            continue;
        }
        compute_distribution_metric(cases, opts, name, &mut report)?;
    }

    Ok(report)
}

/// Per-case consistency checks relabeled with the case id.
fn check_case_diagnostics(case: &ValidationCase, fp: &Fingerprint) -> Vec<Diagnostic> {
    crate::model::check_case_consistency(case, fp, false)
}

fn compute_distribution_metric(
    cases: &[ValidationCase],
    opts: &EvalOptions,
    name: &str,
    report: &mut MetricReport,
) -> Result<()> {
    match name {
        "cross_entropy" => {
            let per_case: Vec<f64> = cases
                .iter()
                .map(|c| cross_entropy(c.prediction_log_density.as_ref().expect("guarded")))
                .collect::<Result<_>>()?;
            report.scalars.insert(
                "cross_entropy".into(),
                Scalar::defined(reduce_across(&per_case, opts)),
            );
        }
        "kl_discretized" => {
            let spec = opts.discretization.as_ref().expect("guarded");
            let mut per_case = Vec::with_capacity(cases.len());
            let mut zero_q_total = 0usize;
            let mut clamped_total = 0usize;
            for case in cases {
                let reference = case.reference.samples.as_ref().expect("guarded");
                let r = kl_discretized(reference, &case.prediction, spec)?;
                zero_q_total += r.zero_q_bins;
                clamped_total += r.clamped_p_samples + r.clamped_q_samples;
                per_case.push(r.value);
            }
            let mut s = Scalar::defined(reduce_across(&per_case, opts));
            if zero_q_total > 0 {
                s = s.with_flag(&format!(
                    "zero_q_bins={zero_q_total} (value there set by smoothing epsilon)"
                ));
            }
            if clamped_total > 0 {
                s = s.with_flag(&format!("samples_clamped_to_grid={clamped_total}"));
            }
            report.scalars.insert("kl_discretized".into(), s);
        }
        "ks_two_sample" => {
            let mut stats = Vec::with_capacity(cases.len());
            let mut pvals = Vec::with_capacity(cases.len());
            for case in cases {
                let reference = case.reference.samples.as_ref().expect("guarded");
                let r = ks_two_sample(&reference.column(0), &case.prediction.column(0))?;
                stats.push(r.statistic);
                pvals.push(r.p_value);
            }
            report.scalars.insert(
                "ks_statistic".into(),
                Scalar::defined(reduce_across(&stats, opts)),
            );
            report.scalars.insert(
                "ks_p_value".into(),
                Scalar::defined(reduce_across(&pvals, opts)),
            );
        }
        "wasserstein_1d" => {
            let per_case: Vec<f64> = cases
                .iter()
                .map(|c| {
                    let reference = c.reference.samples.as_ref().expect("guarded");
                    wasserstein_1d(&reference.column(0), &c.prediction.column(0))
                })
                .collect::<Result<_>>()?;
            report.scalars.insert(
                "wasserstein_1d".into(),
                Scalar::defined(reduce_across(&per_case, opts)),
            );
        }
        "marginal_wasserstein" => {
            let per_case: Vec<f64> = cases
                .iter()
                .map(|c| {
                    let reference = c.reference.samples.as_ref().expect("guarded");
                    marginal_wasserstein(reference, &c.prediction, opts.marginal_aggregate)
                })
                .collect::<Result<_>>()?;
            report.scalars.insert(
                "marginal_wasserstein".into(),
                Scalar::defined(reduce_across(&per_case, opts)),
            );
        }
        "mmd2" => {
            let per_case: Vec<f64> = cases
                .iter()
                .map(|c| {
                    let reference = c.reference.samples.as_ref().expect("guarded");
                    mmd2(reference, &c.prediction, &opts.kernel, opts.mmd_estimator)
                })
                .collect::<Result<_>>()?;
            report
                .scalars
                .insert("mmd2".into(), Scalar::defined(reduce_across(&per_case, opts)));
        }
        _ => unreachable!("validated metric name"),
    }
    Ok(())
}

/// Which knob an operating-point sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// DBSCAN neighborhood radius.
    Eps,
    /// DBSCAN core-point threshold.
    MinSamples,
    /// Localization match threshold (centroid or Mahalanobis).
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn apply_sweep_value(opts: &mut EvalOptions, parameter: SweepParameter, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::Config(format!("sweep value {value} is not finite")));
    }
    match parameter {
        SweepParameter::Eps | SweepParameter::MinSamples => {
            let detect = opts.detect.as_mut().ok_or_else(|| {
                Error::Config("sweep over a detector knob needs a detector configured".into())
            })?;
            match (&mut detect.method, parameter) {
                (DetectMethod::Dbscan(p), SweepParameter::Eps) => p.eps = value,
                (DetectMethod::Dbscan(p), SweepParameter::MinSamples) => {
                    let rounded = value.round();
                    if rounded < 1.0 {
                        return Err(Error::Config(format!(
                            "min_samples sweep value {value} rounds below 1"
                        )));
                    }
                    p.min_samples = rounded as usize;
                }
                (DetectMethod::Unidip(_), _) => {
                    return Err(Error::Config(
                        "eps / min_samples sweeps apply to the dbscan detector".into(),
                    ))
                }
                _ => unreachable!(),
            }
        }
        SweepParameter::Threshold => {
            let loc = opts.localization.as_mut().ok_or_else(|| {
                Error::Config("threshold sweep needs a localization criterion configured".into())
            })?;
            match loc {
                LocalizationCriterion::Centroid { threshold, .. } => *threshold = value,
                LocalizationCriterion::Mahalanobis { threshold } => *threshold = value,
                LocalizationCriterion::ConfidenceEllipsoid { .. } => {
                    return Err(Error::Config(
                        "threshold sweep needs a thresholded criterion, not an ellipsoid test"
                            .into(),
                    ))
                }
            }
        }
    }
    Ok(())
}

/// Re-evaluates the dataset at each sweep value; the resulting points feed
/// single-metric-at-target selection.
pub fn run_sweep(
    cases: &[ValidationCase],
    base: &EvalOptions,
    spec: &SweepSpec,
) -> Result<Vec<SweepPoint>> {
    if spec.values.is_empty() {
        return Err(Error::Config("sweep with no values".into()));
    }
    let mut points = Vec::with_capacity(spec.values.len());
    for &value in &spec.values {
        let mut opts = base.clone();
        apply_sweep_value(&mut opts, spec.parameter, value)?;
        let report = evaluate_cases(cases, &opts)?;
        let metrics = report
            .scalars
            .iter()
            .filter_map(|(k, s)| s.value.map(|v| (k.clone(), v)))
            .collect();
        points.push(SweepPoint {
            operating_point: value,
            metrics,
        });
    }
    Ok(points)
}
