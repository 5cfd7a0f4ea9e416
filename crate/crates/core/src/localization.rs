//! Localization criteria: how close a predicted mode must be to a
//! reference mode to count as the same solution. Distance-style criteria
//! compare a score against a threshold; the confidence-ellipsoid criterion
//! is a boolean with an implicit 0/1 score so the assignment layer can
//! treat every criterion uniformly (smaller score = better).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mode, PeriodicDim};
use crate::numeric;

/// Relative ridge added to covariances before inversion:
/// sigma' = sigma + RIDGE_SCALE * trace(sigma)/d * I.
pub const RIDGE_SCALE: f64 = 1e-9;

/// Distance specification for the centroid criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CentroidSpec {
    /// Minkowski distance with exponent p >= 1; dimensions listed in
    /// `periodic` use the shortest wrapped difference (periods in degrees
    /// when the coordinate is an angle in degrees).
    Lp {
        p: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        periodic: Vec<PeriodicDim>,
    },
    /// Sum of 1 - cos over angular dimensions; every dimension must be
    /// declared periodic. Suited to purely rotational parameter spaces.
    CosineAngular { periodic: Vec<PeriodicDim> },
}

impl CentroidSpec {
    /// Euclidean distance with no wrapping.
    pub fn euclidean() -> Self {
        CentroidSpec::Lp {
            p: 2.0,
            periodic: Vec::new(),
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let check_periods = |periodic: &[PeriodicDim]| -> Result<()> {
            let mut seen = std::collections::BTreeSet::new();
            for pd in periodic {
                if pd.index >= d {
                    return Err(Error::Dimension(format!(
                        "periodic index {} out of range for d = {d}",
                        pd.index
                    )));
                }
                if !(pd.period.is_finite() && pd.period > 0.0) {
                    return Err(Error::Config(format!("period {} must be positive", pd.period)));
                }
                if !seen.insert(pd.index) {
                    return Err(Error::Config(format!("periodic index {} repeated", pd.index)));
                }
            }
            Ok(())
        };
        match self {
            CentroidSpec::Lp { p, periodic } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::Config(format!("Lp exponent {p} must be >= 1")));
                }
                check_periods(periodic)
            }
            CentroidSpec::CosineAngular { periodic } => {
                check_periods(periodic)?;
                if periodic.len() != d {
                    return Err(Error::Config(format!(
                        "cosine criterion requires all {d} dimensions to be periodic, got {}",
                        periodic.len()
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Shortest wrapped absolute difference on a circle of the given period.
fn wrapped_abs_diff(a: f64, b: f64, period: f64) -> f64 {
    let r = (a - b).rem_euclid(period);
    r.min(period - r)
}

/// Distance between two centers under a centroid spec.
pub fn centroid_distance(a: &[f64], b: &[f64], spec: &CentroidSpec) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "centers of dimension {} vs {}",
            a.len(),
            b.len()
        )));
    }
    spec.validate(a.len())?;
    match spec {
        CentroidSpec::Lp { p, periodic } => {
            let mut period_of = vec![None; a.len()];
            for pd in periodic {
                period_of[pd.index] = Some(pd.period);
            }
            let mut acc = 0.0;
            for k in 0..a.len() {
                let delta = match period_of[k] {
                    Some(period) => wrapped_abs_diff(a[k], b[k], period),
                    None => (a[k] - b[k]).abs(),
                };
                acc += delta.powf(*p);
            }
            Ok(acc.powf(1.0 / *p))
        }
        CentroidSpec::CosineAngular { periodic } => {
            let mut acc = 0.0;
            for pd in periodic {
                let delta = wrapped_abs_diff(a[pd.index], b[pd.index], pd.period);
                let radians = delta / pd.period * std::f64::consts::TAU;
                acc += 1.0 - radians.cos();
            }
            Ok(acc)
        }
    }
}

/// Mahalanobis distance of a point from a mode, using the mode covariance
/// with the relative ridge applied. Fails on modes without covariance and
/// on covariances that stay singular after the ridge (e.g. the zero matrix
/// of a singleton cluster).
pub fn mahalanobis_distance(point: &[f64], mode: &Mode) -> Result<f64> {
    let d = mode.dim();
    if point.len() != d {
        return Err(Error::Dimension(format!(
            "point of dimension {} vs mode of dimension {d}",
            point.len()
        )));
    }
    let cov = mode
        .covariance
        .as_ref()
        .ok_or_else(|| Error::Numeric("mahalanobis requires a mode covariance".into()))?;
    let trace: f64 = (0..d).map(|i| cov[i][i]).sum();
    let ridge = RIDGE_SCALE * trace / d as f64;
    let mut reg = cov.clone();
    for i in 0..d {
        reg[i][i] += ridge;
    }
    let l = numeric::cholesky(&reg).ok_or_else(|| {
        Error::Numeric("covariance singular even after ridge regularization".into())
    })?;
    // forward-solve z = L^-1 (x - mu); the quadratic form is |z|^2 >= 0
    let diff: Vec<f64> = point.iter().zip(&mode.center).map(|(x, m)| x - m).collect();
    let mut z = vec![0.0; d];
    for i in 0..d {
        let mut s = diff[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    Ok(z.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Whether a point falls inside the mode's chi-square confidence ellipsoid
/// at the given level: squared Mahalanobis distance <= chi^2_d(level).
pub fn point_in_confidence_ellipsoid(point: &[f64], mode: &Mode, level: f64) -> Result<bool> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!(
            "ellipsoid level {level} must lie in (0, 1)"
        )));
    }
    let dist = mahalanobis_distance(point, mode)?;
    let threshold = numeric::chi_square_quantile(mode.dim(), level);
    Ok(dist * dist <= threshold)
}

/// A complete localization criterion: scoring rule plus match condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "criterion", rename_all = "snake_case")]
pub enum LocalizationCriterion {
    Centroid { spec: CentroidSpec, threshold: f64 },
    Mahalanobis { threshold: f64 },
    ConfidenceEllipsoid { level: f64 },
}

impl LocalizationCriterion {
    /// Scores a predicted mode against a reference mode. Returns
    /// (score, admissible); scores order candidates (smaller is better)
    /// and boolean criteria score 0 on a hit and 1 on a miss.
    pub fn evaluate(&self, pred: &Mode, reference: &Mode) -> Result<(f64, bool)> {
        match self {
            LocalizationCriterion::Centroid { spec, threshold } => {
                let score = centroid_distance(&pred.center, &reference.center, spec)?;
                Ok((score, score <= *threshold))
            }
            LocalizationCriterion::Mahalanobis { threshold } => {
                let score = mahalanobis_distance(&pred.center, reference)?;
                Ok((score, score <= *threshold))
            }
            LocalizationCriterion::ConfidenceEllipsoid { level } => {
                let inside = point_in_confidence_ellipsoid(&pred.center, reference, *level)?;
                Ok((if inside { 0.0 } else { 1.0 }, inside))
            }
        }
    }
}
