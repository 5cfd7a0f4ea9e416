//! Rule-table recommender: a problem fingerprint goes in, a metric plan
//! with per-rule rationale comes out. The rules are an explicit ordered
//! table rather than nested conditionals so every note can cite the rule
//! that produced it and tests can enumerate coverage of all 256
//! fingerprints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Fingerprint, ReferenceGranularity};

/// One recommended distribution metric with display parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedMetric {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
}

impl PlannedMetric {
    fn new(name: &str, params: &[(&str, &str)]) -> Self {
        PlannedMetric {
            name: name.to_string(),
            params: params
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

/// Object-detection-style part of a plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionPlan {
    /// Primary localization criterion kind.
    pub localization_criterion: String,
    pub localization_alternatives: Vec<String>,
    /// Primary assignment strategy.
    pub assignment_strategy: String,
    pub assignment_alternatives: Vec<String>,
    pub classification_metrics: Vec<String>,
    /// FP-derived numbers (precision denominator, FPPI) are upper bounds.
    pub fppi_upper_bound: bool,
    /// Matched-mode distances are reported with hierarchical aggregation.
    pub matched_mode_distance: bool,
}

impl DetectionPlan {
    fn empty() -> Self {
        DetectionPlan {
            localization_criterion: String::new(),
            localization_alternatives: Vec::new(),
            assignment_strategy: String::new(),
            assignment_alternatives: Vec::new(),
            classification_metrics: Vec::new(),
            fppi_upper_bound: false,
            matched_mode_distance: false,
        }
    }
}

/// Complete recommendation for one fingerprint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPlan {
    pub distribution_metrics: Vec<PlannedMetric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_plan: Option<DetectionPlan>,
    /// A sweep grid was declared, so single-metric-at-target reporting
    /// (e.g. precision at a recall floor) is applicable.
    pub metric_at_target_offered: bool,
    /// Rationale lines, each prefixed with the id of the rule that fired.
    pub notes: Vec<String>,
}

impl MetricPlan {
    fn empty() -> Self {
        MetricPlan {
            distribution_metrics: Vec::new(),
            detection_plan: None,
            metric_at_target_offered: false,
            notes: Vec::new(),
        }
    }

    fn detection(&mut self) -> &mut DetectionPlan {
        self.detection_plan.get_or_insert_with(DetectionPlan::empty)
    }
}

/// Configuration bits that shape a recommendation but are not part of the
/// problem fingerprint itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendOptions {
    /// An operating-point sweep grid is declared in the run config.
    pub sweep_declared: bool,
    /// Solution space too high-dimensional for histogram discretization.
    pub high_dimensional: bool,
}

struct Rule {
    id: &'static str,
    when: fn(&Fingerprint, &RecommendOptions) -> bool,
    describe: &'static str,
    apply: fn(&mut MetricPlan, &Fingerprint, &RecommendOptions),
}

fn posterior_reference(fp: &Fingerprint) -> bool {
    matches!(
        fp.reference_granularity,
        ReferenceGranularity::PosteriorLabeled | ReferenceGranularity::PosteriorUnlabeled
    )
}

fn fp_count_exact(fp: &Fingerprint) -> bool {
    fp.reference_granularity.is_exhaustive() || fp.resimulation.is_available()
}

const RULES: &[Rule] = &[
    // S1: distribution-level comparison, possible when the reference is a
    // full posterior
    Rule {
        id: "S1-CE",
        when: |fp, _| posterior_reference(fp) && fp.log_density.is_available(),
        describe: "prediction log-density in hand: cross entropy against the \
                   reference samples is the most direct density-aware score",
        apply: |plan, _, _| {
            plan.distribution_metrics
                .push(PlannedMetric::new("cross_entropy", &[]));
        },
    },
    Rule {
        id: "S1-KL",
        when: |fp, opts| {
            posterior_reference(fp) && fp.discretization.is_available() && !opts.high_dimensional
        },
        describe: "a natural discretization scale exists and the space is small \
                   enough to histogram: discretized KL divergence applies with \
                   no hyperparameters beyond the grid",
        apply: |plan, _, _| {
            plan.distribution_metrics.push(PlannedMetric::new(
                "kl_discretized",
                &[("epsilon", "1e-10")],
            ));
        },
    },
    Rule {
        id: "S1-KS",
        when: |fp, _| posterior_reference(fp) && fp.univariate,
        describe: "univariate solution space: the KS statistic and the 1-D \
                   Wasserstein distance compare the full CDFs directly",
        apply: |plan, _, _| {
            plan.distribution_metrics
                .push(PlannedMetric::new("ks_two_sample", &[]));
            plan.distribution_metrics
                .push(PlannedMetric::new("wasserstein_1d", &[]));
        },
    },
    Rule {
        id: "S1-FALLBACK",
        when: |fp, opts| {
            posterior_reference(fp)
                && !fp.log_density.is_available()
                && !(fp.discretization.is_available() && !opts.high_dimensional)
                && !fp.univariate
        },
        describe: "no density, no usable discretization, multivariate: fall back \
                   to marginal Wasserstein (a marginals-only surrogate) plus MMD \
                   for a joint-space signal",
        apply: |plan, _, _| {
            plan.distribution_metrics.push(PlannedMetric::new(
                "marginal_wasserstein",
                &[("aggregate", "mean")],
            ));
            plan.distribution_metrics.push(PlannedMetric::new(
                "mmd2",
                &[("kernel", "rbf"), ("bandwidth", "median_heuristic")],
            ));
        },
    },
    // S2: object-detection-style evaluation, possible when the reference
    // provides modes (directly or via labels)
    Rule {
        id: "S2-LOC-COV",
        when: |fp, _| fp.reference_granularity.provides_modes() && fp.uncertainty_required,
        describe: "per-mode uncertainty matters: Mahalanobis distance (or the \
                   confidence ellipsoid) folds the predicted covariance into \
                   the localization decision",
        apply: |plan, _, _| {
            let det = plan.detection();
            det.localization_criterion = "mahalanobis".to_string();
            det.localization_alternatives
                .push("confidence_ellipsoid".to_string());
            det.matched_mode_distance = true;
        },
    },
    Rule {
        id: "S2-LOC-CENT",
        when: |fp, _| fp.reference_granularity.provides_modes() && !fp.uncertainty_required,
        describe: "point accuracy is what counts: centroid distance with a \
                   fixed admissibility threshold",
        apply: |plan, _, _| {
            let det = plan.detection();
            det.localization_criterion = "centroid_distance".to_string();
            det.matched_mode_distance = true;
        },
    },
    Rule {
        id: "S2-LOC-DIST",
        when: |fp, _| {
            fp.reference_granularity == ReferenceGranularity::PosteriorLabeled
        },
        describe: "labeled reference posterior: per-mode sample subsets exist, \
                   so a distribution distance between matched mode samples is \
                   available as an additional localization criterion",
        apply: |plan, _, _| {
            plan.detection()
                .localization_alternatives
                .push("distribution_distance".to_string());
        },
    },
    Rule {
        id: "S2-ASSIGN-SCORE",
        when: |fp, _| {
            fp.reference_granularity.provides_modes() && fp.confidence_scores.is_available()
        },
        describe: "confidence scores available: greedy matching in score order \
                   lets the strongest predictions claim references first, \
                   consistent with the ranking metrics",
        apply: |plan, _, _| {
            let det = plan.detection();
            det.assignment_strategy = "greedy_by_score".to_string();
            det.assignment_alternatives.extend([
                "greedy_by_localization".to_string(),
                "hungarian".to_string(),
                "fixed_threshold".to_string(),
            ]);
        },
    },
    Rule {
        id: "S2-ASSIGN-LOC",
        when: |fp, _| {
            fp.reference_granularity.provides_modes() && !fp.confidence_scores.is_available()
        },
        describe: "no confidence scores: greedy matching by localization score; \
                   Hungarian minimizes total distance but can over-match, and a \
                   fixed threshold suits exact mode-count applications",
        apply: |plan, _, _| {
            let det = plan.detection();
            det.assignment_strategy = "greedy_by_localization".to_string();
            det.assignment_alternatives
                .extend(["hungarian".to_string(), "fixed_threshold".to_string()]);
        },
    },
    Rule {
        id: "S2-CLS-RECALL",
        when: |fp, _| fp.reference_granularity.provides_modes(),
        describe: "every reference mode should be found: recall is always \
                   reportable (TN-free)",
        apply: |plan, _, _| {
            plan.detection()
                .classification_metrics
                .push("recall".to_string());
        },
    },
    Rule {
        id: "S2-CLS-PREC",
        when: |fp, _| fp.reference_granularity.provides_modes() && fp_count_exact(fp),
        describe: "false positives are decidable (exhaustive reference, or \
                   resimulation screens surplus predictions): precision and \
                   F-beta are meaningful",
        apply: |plan, fp, _| {
            let det = plan.detection();
            det.classification_metrics.push("precision".to_string());
            det.classification_metrics.push("f_beta".to_string());
            if !fp.reference_granularity.is_exhaustive() {
                det.classification_metrics
                    .push("resimulation_screen".to_string());
            }
        },
    },
    Rule {
        id: "S2-CLS-RANK",
        when: |fp, _| {
            fp.reference_granularity.provides_modes() && fp.confidence_scores.is_available()
        },
        describe: "confidence scores enable threshold-free ranking metrics: \
                   average precision and the FROC curve over the score sweep",
        apply: |plan, _, _| {
            let det = plan.detection();
            det.classification_metrics.push("ap".to_string());
            det.classification_metrics.push("froc".to_string());
        },
    },
    Rule {
        id: "S2-FPPI",
        when: |fp, _| fp.reference_granularity.provides_modes(),
        describe: "false positives per case tracks over-detection without TNs",
        apply: |plan, fp, _| {
            let det = plan.detection();
            det.classification_metrics.push("fppi".to_string());
            if !fp_count_exact(fp) {
                det.fppi_upper_bound = true;
            }
        },
    },
    Rule {
        id: "S2-FPPI-UB",
        when: |fp, _| fp.reference_granularity.provides_modes() && !fp_count_exact(fp),
        describe: "non-exhaustive reference without resimulation: unmatched \
                   predictions may be real unlisted solutions, so FP-derived \
                   numbers are upper bounds and precision is withheld",
        apply: |_, _, _| {},
    },
    Rule {
        id: "S2-CLS-CAL",
        when: |fp, _| {
            fp.reference_granularity.provides_modes()
                && fp.uncertainty_required
                && fp.confidence_scores.is_available()
        },
        describe: "uncertainty quality matters and scores exist: the \
                   calibration curve checks confidence against empirical \
                   precision",
        apply: |plan, _, _| {
            plan.detection()
                .classification_metrics
                .push("calibration_curve".to_string());
        },
    },
    Rule {
        id: "S2-CAL-NEEDS-SCORES",
        when: |fp, _| {
            fp.reference_granularity.provides_modes()
                && fp.uncertainty_required
                && !fp.confidence_scores.is_available()
        },
        describe: "calibration would be the right check here but needs \
                   per-mode confidence scores, which this problem lacks \
                   (inferred gating: a curve over absent scores is empty)",
        apply: |_, _, _| {},
    },
    Rule {
        id: "TARGET",
        when: |_, opts| opts.sweep_declared,
        describe: "an operating-point sweep is declared: report one metric at \
                   the point where another meets a target (for example \
                   precision at a recall floor)",
        apply: |plan, _, _| {
            plan.metric_at_target_offered = true;
        },
    },
];

/// Recommends metrics for a fingerprint with default options.
pub fn recommend(fp: &Fingerprint) -> MetricPlan {
    recommend_with_options(fp, &RecommendOptions::default())
}

/// Walks the rule table in order; every firing rule contributes its plan
/// fragment and one note.
pub fn recommend_with_options(fp: &Fingerprint, opts: &RecommendOptions) -> MetricPlan {
    let mut plan = MetricPlan::empty();
    for rule in RULES {
        if (rule.when)(fp, opts) {
            (rule.apply)(&mut plan, fp, opts);
            plan.notes.push(format!("[{}] {}", rule.id, rule.describe));
        }
    }
    plan
}
