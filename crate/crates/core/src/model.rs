//! Data model for validation runs: posterior sample sets, modes, reference
//! specifications, problem fingerprints, and the line-delimited case file
//! format. One JSON record per line; the loader validates every structural
//! invariant up front so downstream metric code can assume well-formed data.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// Symmetry tolerance for covariance matrices (max abs entry difference).
pub const COV_SYMMETRY_TOL: f64 = 1e-9;

/// Eigenvalues of a covariance matrix may undershoot zero by at most this
/// much; anything in (-COV_PSD_TOL, 0) is clamped to exactly zero.
pub const COV_PSD_TOL: f64 = 1e-9;

/// Tolerance for sample-weight normalization.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A weighted set of posterior draws. All points share one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    points: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl PosteriorSamples {
    /// Builds a sample set, enforcing non-emptiness, a common dimension,
    /// and (when given) strictly positive weights summing to one.
    pub fn new(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("posterior sample set".into()));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::Dimension("sample points must have d >= 1".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::Dimension(format!(
                    "sample {i} has dimension {} but expected {d}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("sample {i} contains a non-finite value")));
            }
        }
        if let Some(w) = &weights {
            if w.len() != points.len() {
                return Err(Error::Dimension(format!(
                    "{} weights for {} samples",
                    w.len(),
                    points.len()
                )));
            }
            if w.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                return Err(Error::Numeric("sample weights must be positive".into()));
            }
            let sum: f64 = w.iter().sum();
            if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                return Err(Error::Numeric(format!(
                    "sample weights sum to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { points, weights })
    }

    /// Unweighted constructor for the common equally-weighted case.
    pub fn unweighted(points: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one point
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Values of one coordinate across all samples.
    pub fn column(&self, dim: usize) -> Vec<f64> {
        self.points.iter().map(|p| p[dim]).collect()
    }
}

/// A single posterior mode: center, optional covariance, relative mass,
/// and optional detector confidence / semantic label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub center: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    pub relative_mass: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Mode {
    /// Validates center/covariance shape, symmetry, and positive
    /// semi-definiteness. Eigenvalues in (-1e-9, 0) are clamped to zero and
    /// the matrix reconstructed; more negative ones are rejected.
    pub fn new(
        center: Vec<f64>,
        covariance: Option<Vec<Vec<f64>>>,
        relative_mass: f64,
        confidence: Option<f64>,
        label: Option<String>,
    ) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Dimension("mode center must have d >= 1".into()));
        }
        if center.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("mode center contains a non-finite value".into()));
        }
        if !(0.0..=1.0).contains(&relative_mass) || !relative_mass.is_finite() {
            return Err(Error::Numeric(format!(
                "relative mass {relative_mass} outside [0, 1]"
            )));
        }
        if let Some(c) = &confidence {
            if !c.is_finite() || !(0.0..=1.0).contains(c) {
                return Err(Error::Numeric(format!("confidence {c} outside [0, 1]")));
            }
        }
        let covariance = match covariance {
            None => None,
            Some(cov) => Some(Self::validate_covariance(cov, center.len())?),
        };
        Ok(Self {
            center,
            covariance,
            relative_mass,
            confidence,
            label,
        })
    }

    fn validate_covariance(cov: Vec<Vec<f64>>, d: usize) -> Result<Vec<Vec<f64>>> {
        if cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::Dimension(format!("covariance must be {d}x{d}")));
        }
        for row in &cov {
            if row.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric("covariance contains a non-finite value".into()));
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[i][j] - cov[j][i]).abs() > COV_SYMMETRY_TOL {
                    return Err(Error::Numeric(format!(
                        "covariance asymmetric at ({i}, {j}): {} vs {}",
                        cov[i][j], cov[j][i]
                    )));
                }
            }
        }
        let (values, vectors) = numeric::sym_eigen(&cov);
        if values.iter().any(|&v| v < -COV_PSD_TOL) {
            return Err(Error::Numeric(format!(
                "covariance not positive semi-definite (min eigenvalue {:e})",
                values.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        if values.iter().all(|&v| v >= 0.0) {
            return Ok(cov);
        }
        // Rebuild with the slightly negative eigenvalues clamped to zero.
        let clamped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
        let mut out = vec![vec![0.0; d]; d];
        for (k, vec_k) in vectors.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    out[i][j] += clamped[k] * vec_k[i] * vec_k[j];
                }
            }
        }
        // restore exact symmetry after the rank-1 accumulation
        for i in 0..d {
            for j in (i + 1)..d {
                let s = 0.5 * (out[i][j] + out[j][i]);
                out[i][j] = s;
                out[j][i] = s;
            }
        }
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// A collection of modes ordered by descending relative mass (stable for
/// ties, preserving insertion order). Total mass may be below one; the
/// remainder is unclustered/noise mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    modes: Vec<Mode>,
}

impl ModeSet {
    pub fn new(mut modes: Vec<Mode>) -> Result<Self> {
        let total: f64 = modes.iter().map(|m| m.relative_mass).sum();
        if total > 1.0 + WEIGHT_SUM_TOL {
            return Err(Error::Numeric(format!(
                "mode masses sum to {total}, exceeding 1"
            )));
        }
        if let Some(d) = modes.first().map(Mode::dim) {
            if modes.iter().any(|m| m.dim() != d) {
                return Err(Error::Dimension("modes mix dimensions".into()));
            }
        }
        modes.sort_by(|a, b| b.relative_mass.partial_cmp(&a.relative_mass).unwrap());
        Ok(Self { modes })
    }

    pub fn empty() -> Self {
        Self { modes: Vec::new() }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.modes.iter().map(|m| m.relative_mass).sum()
    }
}

/// How the reference (ground truth) of a case is specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferenceGranularity {
    /// Reference posterior samples with per-mode labeling available.
    #[serde(rename = "posterior_labeled")]
    PosteriorLabeled,
    /// Reference posterior samples without mode labels.
    #[serde(rename = "posterior_unlabeled")]
    PosteriorUnlabeled,
    /// The complete list of true modes.
    #[serde(rename = "modes_exhaustive")]
    ModesExhaustive,
    /// A known-incomplete list of true modes.
    #[serde(rename = "modes_nonexhaustive")]
    ModesNonExhaustive,
}

impl ReferenceGranularity {
    pub const ALL: [ReferenceGranularity; 4] = [
        ReferenceGranularity::PosteriorLabeled,
        ReferenceGranularity::PosteriorUnlabeled,
        ReferenceGranularity::ModesExhaustive,
        ReferenceGranularity::ModesNonExhaustive,
    ];

    /// True when the reference enumerates every true mode, directly or via
    /// a fully labeled posterior.
    pub fn is_exhaustive(&self) -> bool {
        matches!(
            self,
            ReferenceGranularity::PosteriorLabeled | ReferenceGranularity::ModesExhaustive
        )
    }

    /// True when reference modes are available at all (needed for matching).
    pub fn provides_modes(&self) -> bool {
        !matches!(self, ReferenceGranularity::PosteriorUnlabeled)
    }
}

/// Ground-truth side of a validation case.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub granularity: ReferenceGranularity,
    pub modes: ModeSet,
    pub samples: Option<PosteriorSamples>,
}

/// The observable a posterior conditions on, plus problem parameters
/// needed to re-run the forward model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

/// Declares one periodic (angular) dimension; periods are in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicDim {
    pub index: usize,
    pub period: f64,
}

/// One evaluation unit: a predicted posterior with its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCase {
    pub id: String,
    pub prediction: PosteriorSamples,
    /// Predicted log-density evaluated at the reference samples, parallel
    /// to `reference.samples`.
    pub prediction_log_density: Option<Vec<f64>>,
    pub reference: Reference,
    pub observation: Option<Observation>,
    pub periodic_dims: Vec<PeriodicDim>,
}

impl ValidationCase {
    pub fn new(
        id: String,
        prediction: PosteriorSamples,
        prediction_log_density: Option<Vec<f64>>,
        reference: Reference,
        observation: Option<Observation>,
        periodic_dims: Vec<PeriodicDim>,
    ) -> Result<Self> {
        let fail = |field: &str, detail: String| {
            Err(Error::Validation {
                case: id.clone(),
                field: field.into(),
                detail,
            })
        };
        if id.trim().is_empty() {
            return Err(Error::Validation {
                case: "<unnamed>".into(),
                field: "id".into(),
                detail: "case id must be non-empty".into(),
            });
        }
        let d = prediction.dim();
        match reference.granularity {
            ReferenceGranularity::ModesExhaustive | ReferenceGranularity::ModesNonExhaustive => {
                if reference.modes.is_empty() {
                    return fail(
                        "reference.modes",
                        "mode-level granularity requires at least one reference mode".into(),
                    );
                }
            }
            ReferenceGranularity::PosteriorLabeled | ReferenceGranularity::PosteriorUnlabeled => {
                if reference.samples.is_none() {
                    return fail(
                        "reference.samples",
                        "posterior-level granularity requires reference samples".into(),
                    );
                }
            }
        }
        for (k, m) in reference.modes.modes().iter().enumerate() {
            if m.dim() != d {
                return fail(
                    "reference.modes",
                    format!("mode {k} has dimension {} but prediction has {d}", m.dim()),
                );
            }
        }
        if let Some(rs) = &reference.samples {
            if rs.dim() != d {
                return fail(
                    "reference.samples",
                    format!("reference samples have dimension {} but prediction has {d}", rs.dim()),
                );
            }
        }
        if let Some(ld) = &prediction_log_density {
            let n_ref = reference.samples.as_ref().map_or(0, PosteriorSamples::len);
            if reference.samples.is_none() {
                return fail(
                    "prediction.log_density",
                    "log-density values require reference samples to evaluate at".into(),
                );
            }
            if ld.len() != n_ref {
                return fail(
                    "prediction.log_density",
                    format!("{} log-density values for {n_ref} reference samples", ld.len()),
                );
            }
            if ld.iter().any(|x| x.is_nan()) {
                return fail("prediction.log_density", "log-density contains NaN".into());
            }
        }
        let mut seen = BTreeSet::new();
        for p in &periodic_dims {
            if p.index >= d {
                return fail(
                    "dims.periodic",
                    format!("periodic index {} out of range for d = {d}", p.index),
                );
            }
            if !(p.period.is_finite() && p.period > 0.0) {
                return fail("dims.periodic", format!("period {} must be positive", p.period));
            }
            if !seen.insert(p.index) {
                return fail(
                    "dims.periodic",
                    format!("periodic index {} declared twice", p.index),
                );
            }
        }
        Ok(Self {
            id,
            prediction,
            prediction_log_density,
            reference,
            observation,
            periodic_dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.prediction.dim()
    }
}

/// Whether a capability of the problem setup is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Availability {
    Available,
    Unavailable,
}

impl Availability {
    pub fn is_available(&self) -> bool {
        matches!(self, Availability::Available)
    }
}

/// The seven-property fingerprint of an inverse problem that drives
/// metric recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fingerprint {
    /// Granularity of the available reference.
    pub reference_granularity: ReferenceGranularity,
    /// Can candidate solutions be pushed through the forward model?
    pub resimulation: Availability,
    /// Does the model supply confidence scores for its modes?
    pub confidence_scores: Availability,
    /// Can the predicted posterior density be evaluated pointwise?
    pub log_density: Availability,
    /// Is the parameter space low-dimensional enough to discretize?
    pub discretization: Availability,
    /// Is the parameter space univariate?
    pub univariate: bool,
    /// Does the application require accurate uncertainty quantification?
    pub uncertainty_required: bool,
}

impl Fingerprint {
    /// Every expressible fingerprint, in a fixed enumeration order.
    pub fn enumerate_all() -> Vec<Fingerprint> {
        let mut out = Vec::with_capacity(256);
        let avail = [Availability::Available, Availability::Unavailable];
        for g in ReferenceGranularity::ALL {
            for r in avail {
                for c in avail {
                    for l in avail {
                        for disc in avail {
                            for u in [false, true] {
                                for q in [false, true] {
                                    out.push(Fingerprint {
                                        reference_granularity: g,
                                        resimulation: r,
                                        confidence_scores: c,
                                        log_density: l,
                                        discretization: disc,
                                        univariate: u,
                                        uncertainty_required: q,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// A non-fatal observation attached to a case or a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub context: String,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            context: context.into(),
            detail: detail.into(),
        }
    }
}

/// Cross-checks a case against the declared problem fingerprint and
/// returns a diagnostic per mismatch. `density_callback` reports whether
/// the pipeline has a registered way to evaluate the predicted density
/// besides stored values.
pub fn check_case_consistency(
    case: &ValidationCase,
    fingerprint: &Fingerprint,
    density_callback: bool,
) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if case.reference.granularity != fingerprint.reference_granularity {
        out.push(Diagnostic::new(
            case.id.clone(),
            format!(
                "reference granularity {:?} does not match fingerprint {:?}",
                case.reference.granularity, fingerprint.reference_granularity
            ),
        ));
    }
    if fingerprint.log_density.is_available()
        && case.prediction_log_density.is_none()
        && !density_callback
    {
        out.push(Diagnostic::new(
            case.id.clone(),
            "fingerprint declares evaluable density but the case carries no \
             log-density values and no density callback is registered",
        ));
    }
    if fingerprint.univariate && case.dim() != 1 {
        out.push(Diagnostic::new(
            case.id.clone(),
            format!("fingerprint declares a univariate problem but d = {}", case.dim()),
        ));
    }
    if fingerprint.resimulation.is_available() && case.observation.is_none() {
        out.push(Diagnostic::new(
            case.id.clone(),
            "fingerprint declares resimulation but the case carries no observation",
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Line-delimited case file schema

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    id: String,
    prediction: RawPrediction,
    reference: RawReference,
    #[serde(skip_serializing_if = "Option::is_none")]
    observation: Option<Observation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dims: Option<RawDims>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrediction {
    samples: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_density: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReference {
    granularity: ReferenceGranularity,
    modes: Vec<RawMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    center: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    covariance: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_mass: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDims {
    periodic: Vec<PeriodicDim>,
}

fn case_from_raw(raw: RawCase) -> Result<ValidationCase> {
    let with_case = |field: &str, e: Error| match e {
        Error::Validation { .. } => e,
        other => Error::Validation {
            case: raw.id.clone(),
            field: field.into(),
            detail: other.to_string(),
        },
    };
    let prediction = PosteriorSamples::new(raw.prediction.samples, raw.prediction.weights)
        .map_err(|e| with_case("prediction.samples", e))?;
    let n_modes = raw.reference.modes.len();
    let given_masses = raw
        .reference
        .modes
        .iter()
        .filter(|m| m.relative_mass.is_some())
        .count();
    if given_masses != 0 && given_masses != n_modes {
        return Err(Error::Validation {
            case: raw.id,
            field: "reference.modes".into(),
            detail: "relative_mass must be given for all modes or none".into(),
        });
    }
    let uniform = if n_modes > 0 { 1.0 / n_modes as f64 } else { 0.0 };
    let mut modes = Vec::with_capacity(n_modes);
    for m in raw.reference.modes {
        let mass = m.relative_mass.unwrap_or(uniform);
        modes.push(
            Mode::new(m.center, m.covariance, mass, None, m.label)
                .map_err(|e| with_case("reference.modes", e))?,
        );
    }
    let modes = ModeSet::new(modes).map_err(|e| with_case("reference.modes", e))?;
    let ref_samples = match raw.reference.samples {
        Some(pts) => {
            Some(PosteriorSamples::unweighted(pts).map_err(|e| with_case("reference.samples", e))?)
        }
        None => None,
    };
    ValidationCase::new(
        raw.id,
        prediction,
        raw.prediction.log_density,
        Reference {
            granularity: raw.reference.granularity,
            modes,
            samples: ref_samples,
        },
        raw.observation,
        raw.dims.map(|d| d.periodic).unwrap_or_default(),
    )
}

fn case_to_raw(case: &ValidationCase) -> RawCase {
    RawCase {
        id: case.id.clone(),
        prediction: RawPrediction {
            samples: case.prediction.points().to_vec(),
            weights: case.prediction.weights().map(|w| w.to_vec()),
            log_density: case.prediction_log_density.clone(),
        },
        reference: RawReference {
            granularity: case.reference.granularity,
            modes: case
                .reference
                .modes
                .modes()
                .iter()
                .map(|m| RawMode {
                    center: m.center.clone(),
                    covariance: m.covariance.clone(),
                    label: m.label.clone(),
                    relative_mass: Some(m.relative_mass),
                })
                .collect(),
            samples: case.reference.samples.as_ref().map(|s| s.points().to_vec()),
        },
        observation: case.observation.clone(),
        dims: if case.periodic_dims.is_empty() {
            None
        } else {
            Some(RawDims {
                periodic: case.periodic_dims.clone(),
            })
        },
    }
}

/// Parses a line-delimited case file. Blank lines are permitted; any
/// malformed or invariant-violating record aborts the load with an error
/// naming the line (parse) or case id and field (validation).
pub fn load_dataset(path: &Path) -> Result<Vec<ValidationCase>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut cases = Vec::new();
    let mut ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawCase = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: idx + 1,
            detail: e.to_string(),
        })?;
        let case = case_from_raw(raw)?;
        if !ids.insert(case.id.clone()) {
            return Err(Error::Validation {
                case: case.id,
                field: "id".into(),
                detail: "duplicate case id".into(),
            });
        }
        cases.push(case);
    }
    if cases.is_empty() {
        return Err(Error::EmptyInput(format!(
            "case file {} contains no records",
            path.display()
        )));
    }
    Ok(cases)
}

/// Writes cases in the same line-delimited format `load_dataset` reads.
/// Numbers keep full round-trip precision.
pub fn write_dataset(path: &Path, cases: &[ValidationCase]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut w = std::io::BufWriter::new(file);
    for case in cases {
        let raw = case_to_raw(case);
        let line = serde_json::to_string(&raw)
            .map_err(|e| Error::Config(format!("serializing case '{}': {e}", case.id)))?;
        writeln!(w, "{line}").map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}
