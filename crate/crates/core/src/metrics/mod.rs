//! Metric computation: classification-style detection metrics over match
//! results, and distribution-level distances between posterior samples.

pub mod detection;
pub mod distribution;

pub use detection::{
    apply_resimulation, average_precision, calibration_curve, confusion_from_matches, froc_curve,
    metric_at_target, pr_curve, prf_metrics, resimulation_fp_check, CalibrationBin,
    ConfusionCounts, CurvePoint, ForwardModel, MetricAtTarget, Plausibility, PrfMetrics,
    ResimulationOutcome, ScoredCase, SweepPoint, DEFAULT_CALIBRATION_BINS,
};
pub use distribution::{
    cross_entropy, kl_discretized, ks_two_sample, marginal_wasserstein, mmd2, wasserstein_1d,
    Bandwidth, DiscretizationSpec, DimBins, KernelFamily, KernelSpec, KlResult, KsResult,
    MarginalAggregate, MmdEstimator,
};
