//! Hierarchical aggregation: per-mode values reduce to one value per
//! case first, then per-case values reduce to a dataset location and
//! spread. Flat pooling would let cases with many modes dominate; the
//! two-stage order keeps each posterior's vote equal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Diagnostic;
use crate::numeric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reducer {
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadKind {
    Std,
    Iqr,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationSpec {
    pub within_case: Reducer,
    pub across_cases: Reducer,
    pub spread: SpreadKind,
}

impl Default for AggregationSpec {
    fn default() -> Self {
        AggregationSpec {
            within_case: Reducer::Mean,
            across_cases: Reducer::Mean,
            spread: SpreadKind::Std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub location: f64,
    /// Stage-2 spread; `None` when not requested or undefined (sample
    /// std over a single case).
    pub spread: Option<f64>,
    /// True when a spread was requested but could not be computed.
    pub spread_undefined: bool,
    pub per_case_values: Vec<f64>,
    /// Cases excluded for having no values (zero matched modes).
    pub excluded_empty_cases: usize,
    pub diagnostics: Vec<Diagnostic>,
}

fn reduce(sorted: &[f64], reducer: Reducer) -> f64 {
    match reducer {
        Reducer::Mean => numeric::mean(sorted),
        Reducer::Median => numeric::median_sorted(sorted),
    }
}

/// Two-stage aggregation of per-case value lists. Cases with no values
/// are excluded and counted; spread uses divisor n-1 for std and linear
/// quartile interpolation for IQR.
pub fn aggregate_hierarchical(
    values: &[Vec<f64>],
    spec: &AggregationSpec,
) -> Result<AggregateResult> {
    let mut diagnostics = Vec::new();
    let mut per_case = Vec::with_capacity(values.len());
    let mut excluded = 0usize;
    for (i, case) in values.iter().enumerate() {
        if case.is_empty() {
            excluded += 1;
            diagnostics.push(Diagnostic::new(
                format!("case {i}"),
                "no matched modes: excluded from distance aggregation",
            ));
            continue;
        }
        if case.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value in case {i}")));
        }
        let mut sorted = case.clone();
        sorted.sort_by(f64::total_cmp);
        per_case.push(reduce(&sorted, spec.within_case));
    }
    if per_case.is_empty() {
        return Err(Error::EmptyInput(
            "every case was empty: nothing to aggregate".into(),
        ));
    }
    let mut sorted_cases = per_case.clone();
    sorted_cases.sort_by(f64::total_cmp);
    let location = reduce(&sorted_cases, spec.across_cases);
    let (spread, spread_undefined) = match spec.spread {
        SpreadKind::None => (None, false),
        SpreadKind::Std => match numeric::sample_std(&sorted_cases) {
            Some(s) => (Some(s), false),
            None => {
                diagnostics.push(Diagnostic::new(
                    "spread",
                    "sample std undefined for a single case",
                ));
                (None, true)
            }
        },
        SpreadKind::Iqr => {
            let q1 = numeric::quantile_sorted(&sorted_cases, 0.25);
            let q3 = numeric::quantile_sorted(&sorted_cases, 0.75);
            (Some(q3 - q1), false)
        }
    };
    Ok(AggregateResult {
        location,
        spread,
        spread_undefined,
        per_case_values: per_case,
        excluded_empty_cases: excluded,
        diagnostics,
    })
}
