//! Synthetic complex-roots benchmark: the forward process w = z^n has n
//! enumerable inverse solutions, so ground truth is exact and the whole
//! evaluation stack can be exercised end to end without training anything.
//!
//! Two synthetic predictors bracket the interesting behavior: `multimodal`
//! places a mixture component on every true root, `mean_point` collapses to
//! the arithmetic mean of the roots (the classic failure of summarizing an
//! ambiguous posterior by one point). A conventional single-point error is
//! computed alongside the detection metrics to show how it ranks the
//! collapsed predictor as good or better while recall tells the real story.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentStrategy;
use crate::detect::DbscanParams;
use crate::error::{Error, Result};
use crate::localization::{CentroidSpec, LocalizationCriterion};
use crate::metrics::ForwardModel;
use crate::model::{
    Availability, Fingerprint, Mode, ModeSet, Observation, PosteriorSamples, Reference,
    ReferenceGranularity, ValidationCase,
};
use crate::numeric::splitmix64;
use crate::pipeline::{
    evaluate_cases, run_sweep, DetectConfig, DetectMethod, EvalOptions, MetricSelection,
    ResimulationConfig, SweepSpec,
};
use crate::report::MetricReport;

pub const TOY_EPS: f64 = 0.2;
pub const TOY_MIN_SAMPLES: usize = 20;
pub const TOY_MATCH_THRESHOLD: f64 = 0.2;
pub const TOY_BOOTSTRAP_RESAMPLES: usize = 2;

/// One ground-truth problem: the observable w, its polar decomposition,
/// and all n solutions of z^n = w.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyInstance {
    pub n: u32,
    pub w: Complex64,
    /// The n roots, k ascending in the angle (phi + 2 pi k) / n.
    pub roots: Vec<Complex64>,
    /// |w|; in [0.8^n, 1.2^n] under the annulus sampling.
    pub r: f64,
    /// Principal argument of w, in radians.
    pub phi: f64,
}

/// All n solutions of z^n = w: |w|^(1/n) * e^(i (arg w + 2 pi k) / n),
/// k = 0..n-1 ascending.
pub fn enumerate_roots(n: u32, w: Complex64) -> Result<Vec<Complex64>> {
    if n == 0 {
        return Err(Error::Config("root enumeration needs n >= 1".into()));
    }
    if w.norm() == 0.0 {
        return Err(Error::Config(
            "z^n = 0 has only the degenerate solution; w must be nonzero".into(),
        ));
    }
    let radius = w.norm().powf(1.0 / n as f64);
    let phi = w.arg();
    Ok((0..n)
        .map(|k| Complex64::from_polar(radius, (phi + TAU * k as f64) / n as f64))
        .collect())
}

/// z^n by repeated multiplication; deliberately not the polar route the
/// root enumeration takes, so the two sides check each other.
pub fn forward_power(z: Complex64, n: u32) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..n {
        acc *= z;
    }
    acc
}

/// Forward model registered under the family name "complex_roots":
/// simulates w = z^n with n taken from the problem parameters.
pub struct ComplexRootsForward;

impl ForwardModel for ComplexRootsForward {
    fn simulate(&self, z: &[f64], params: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        if z.len() != 2 {
            return Err(Error::Dimension(format!(
                "complex_roots forward model expects a 2-D solution, got {}",
                z.len()
            )));
        }
        let n_raw = *params.get("n").ok_or_else(|| {
            Error::Config("complex_roots forward model needs parameter 'n'".into())
        })?;
        let n = n_raw.round();
        if !(n_raw.is_finite() && n >= 1.0 && (n_raw - n).abs() < 1e-9) {
            return Err(Error::Config(format!(
                "parameter 'n' must be a positive integer, got {n_raw}"
            )));
        }
        let w = forward_power(Complex64::new(z[0], z[1]), n as u32);
        Ok(vec![w.re, w.im])
    }
}

/// Synthetic stand-in for a trained posterior model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    /// Isotropic Gaussian mixture with one component per true root.
    Multimodal,
    /// Single Gaussian at the arithmetic mean of the roots (0 for n >= 2).
    MeanPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticPosteriorConfig {
    pub predictor: Predictor,
    pub samples_per_posterior: usize,
    /// Per-axis standard deviation of each mixture component.
    pub component_spread: f64,
    /// Component k gets weight (1 + skew)^(-k); 0 keeps the mixture even.
    pub mode_mass_skew: f64,
}

impl Default for SyntheticPosteriorConfig {
    fn default() -> Self {
        SyntheticPosteriorConfig {
            predictor: Predictor::Multimodal,
            samples_per_posterior: 1024,
            component_spread: 0.05,
            mode_mass_skew: 0.0,
        }
    }
}

impl SyntheticPosteriorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples_per_posterior == 0 {
            return Err(Error::Config("samples_per_posterior must be >= 1".into()));
        }
        if !(self.component_spread.is_finite() && self.component_spread > 0.0) {
            return Err(Error::Config(format!(
                "component_spread {} must be positive",
                self.component_spread
            )));
        }
        if !(self.mode_mass_skew.is_finite() && self.mode_mass_skew >= 0.0) {
            return Err(Error::Config(format!(
                "mode_mass_skew {} must be >= 0",
                self.mode_mass_skew
            )));
        }
        Ok(())
    }
}

fn draw_instance(rng: &mut ChaCha8Rng) -> ToyInstance {
    let n = rng.gen_range(1..=3u32);
    // area-uniform on the annulus [0.8, 1.2]: invert the r^2 CDF
    let u: f64 = rng.gen();
    let radius = (0.64 + 0.8 * u).sqrt();
    let angle = rng.gen_range(0.0..TAU);
    let z = Complex64::from_polar(radius, angle);
    let w = forward_power(z, n);
    let roots = enumerate_roots(n, w).expect("annulus excludes w = 0");
    ToyInstance {
        n,
        w,
        roots,
        r: w.norm(),
        phi: w.arg(),
    }
}

/// Deterministic instance stream; instance i depends only on seed ^ i.
pub fn sample_instances(count: usize, seed: u64) -> Vec<ToyInstance> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            draw_instance(&mut rng)
        })
        .collect()
}

/// Draws the synthetic posterior for one instance.
pub fn synthesize_posterior(
    inst: &ToyInstance,
    cfg: &SyntheticPosteriorConfig,
    seed: u64,
) -> Result<PosteriorSamples> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = cfg.component_spread;
    let mut points = Vec::with_capacity(cfg.samples_per_posterior);
    match cfg.predictor {
        Predictor::Multimodal => {
            let weights = component_weights(inst.n, cfg.mode_mass_skew);
            let pick = WeightedIndex::new(&weights)
                .map_err(|e| Error::Config(format!("bad component weights: {e}")))?;
            for _ in 0..cfg.samples_per_posterior {
                let root = inst.roots[pick.sample(&mut rng)];
                points.push(vec![
                    root.re + spread * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    root.im + spread * rng.sample::<f64, _>(rand_distr::StandardNormal),
                ]);
            }
        }
        Predictor::MeanPoint => {
            let mean = inst.roots.iter().sum::<Complex64>() / inst.n as f64;
            for _ in 0..cfg.samples_per_posterior {
                points.push(vec![
                    mean.re + spread * rng.sample::<f64, _>(rand_distr::StandardNormal),
                    mean.im + spread * rng.sample::<f64, _>(rand_distr::StandardNormal),
                ]);
            }
        }
    }
    PosteriorSamples::unweighted(points)
}

fn component_weights(n: u32, skew: f64) -> Vec<f64> {
    (0..n).map(|k| (1.0 + skew).powi(-(k as i32))).collect()
}

/// Reference mode set for an instance: one mode per root, masses matching
/// the generator weights.
pub fn reference_modes(inst: &ToyInstance, skew: f64) -> Result<ModeSet> {
    let weights = component_weights(inst.n, skew);
    let total: f64 = weights.iter().sum();
    let modes = inst
        .roots
        .iter()
        .zip(&weights)
        .map(|(root, w)| Mode::new(vec![root.re, root.im], None, w / total, None, None))
        .collect::<Result<Vec<_>>>()?;
    ModeSet::new(modes)
}

/// Builds the validation dataset for one predictor. Instances and the
/// downstream comparator draws depend only on (seed, case index), so both
/// predictors see identical problems.
pub fn build_cases(
    count: usize,
    seed: u64,
    cfg: &SyntheticPosteriorConfig,
) -> Result<Vec<ValidationCase>> {
    if count == 0 {
        return Err(Error::EmptyInput("toy benchmark with zero cases".into()));
    }
    cfg.validate()?;
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let base = seed ^ i as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(base);
        let inst = draw_instance(&mut rng);
        let prediction = synthesize_posterior(&inst, cfg, splitmix64(base))?;
        let reference = Reference {
            granularity: ReferenceGranularity::ModesExhaustive,
            modes: reference_modes(&inst, cfg.mode_mass_skew)?,
            samples: None,
        };
        let observation = Observation {
            y: vec![inst.w.re, inst.w.im],
            params: BTreeMap::from([("n".to_string(), inst.n as f64)]),
        };
        cases.push(ValidationCase::new(
            format!("toy-{i:05}"),
            prediction,
            None,
            reference,
            Some(observation),
            Vec::new(),
        )?);
    }
    Ok(cases)
}

/// Fingerprint of the toy problem: exhaustive root list, forward model in
/// hand, bootstrap confidences on, no density, no natural discretization.
pub fn toy_fingerprint() -> Fingerprint {
    Fingerprint {
        reference_granularity: ReferenceGranularity::ModesExhaustive,
        resimulation: Availability::Available,
        confidence_scores: Availability::Available,
        log_density: Availability::Unavailable,
        discretization: Availability::Unavailable,
        univariate: false,
        uncertainty_required: false,
    }
}

/// Evaluation options the toy benchmark runs under.
pub fn toy_eval_options(seed: u64, resimulation: bool) -> EvalOptions {
    let mut opts = EvalOptions::new(
        toy_fingerprint(),
        DetectConfig {
            method: DetectMethod::Dbscan(DbscanParams {
                eps: TOY_EPS,
                min_samples: TOY_MIN_SAMPLES,
            }),
            center_rule: None,
            bootstrap_resamples: TOY_BOOTSTRAP_RESAMPLES,
        },
        LocalizationCriterion::Centroid {
            spec: CentroidSpec::euclidean(),
            threshold: TOY_MATCH_THRESHOLD,
        },
    );
    opts.assignment = AssignmentStrategy::GreedyByScore;
    let mut metrics = vec![
        "recall".to_string(),
        "precision".to_string(),
        "f_beta".to_string(),
        "ap".to_string(),
        "froc".to_string(),
        "fppi".to_string(),
        "matched_distance".to_string(),
    ];
    if resimulation {
        metrics.push("resimulation_screen".to_string());
        opts.resimulation = Some(ResimulationConfig {
            family: "complex_roots".to_string(),
            tol_rel: 0.05,
        });
    }
    opts.metrics = MetricSelection::Explicit(metrics);
    opts.seed = seed;
    opts
}

/// The conventional scalar baseline: collapse the posterior to its sample
/// mean and measure the distance to one true solution, drawn uniformly per
/// case. For ambiguous problems this is exactly the comparison that makes
/// a mode-collapsed predictor look fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalComparison {
    /// (n, |sample mean - drawn root|) per case, in case order.
    pub per_case: Vec<(u32, f64)>,
}

impl ConventionalComparison {
    pub fn mean_error(&self) -> f64 {
        let sum: f64 = self.per_case.iter().map(|(_, e)| e).sum();
        sum / self.per_case.len() as f64
    }

    /// Mean error over the cases whose n is in `ns`.
    pub fn mean_error_for(&self, ns: &[u32]) -> Option<f64> {
        let picked: Vec<f64> = self
            .per_case
            .iter()
            .filter(|(n, _)| ns.contains(n))
            .map(|(_, e)| *e)
            .collect();
        if picked.is_empty() {
            return None;
        }
        Some(picked.iter().sum::<f64>() / picked.len() as f64)
    }

    pub fn count_by_n(&self) -> BTreeMap<u32, usize> {
        let mut out = BTreeMap::new();
        for (n, _) in &self.per_case {
            *out.entry(*n).or_insert(0) += 1;
        }
        out
    }
}

/// Runs the conventional comparator over a built dataset. The reference
/// root draw depends only on (seed, case index), so it pairs across
/// predictors.
pub fn conventional_comparison(
    cases: &[ValidationCase],
    seed: u64,
) -> Result<ConventionalComparison> {
    let mut per_case = Vec::with_capacity(cases.len());
    for (i, case) in cases.iter().enumerate() {
        let refs = case.reference.modes.modes();
        if refs.is_empty() {
            return Err(Error::Validation {
                case: case.id.clone(),
                field: "reference.modes".into(),
                detail: "conventional comparison needs at least one reference mode".into(),
            });
        }
        // MAP proxy: plain sample mean of the predicted posterior
        let pts = case.prediction.points();
        let n_pts = pts.len() as f64;
        let mut mean = [0.0f64; 2];
        for p in pts {
            mean[0] += p[0] / n_pts;
            mean[1] += p[1] / n_pts;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(splitmix64(seed ^ i as u64)));
        let chosen = &refs[rng.gen_range(0..refs.len())];
        let err = ((mean[0] - chosen.center[0]).powi(2) + (mean[1] - chosen.center[1]).powi(2))
            .sqrt();
        per_case.push((refs.len() as u32, err));
    }
    Ok(ConventionalComparison { per_case })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyBenchConfig {
    pub cases: usize,
    pub seed: u64,
    pub samples_per_posterior: usize,
    pub component_spread: f64,
    pub mode_mass_skew: f64,
    pub resimulation: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl Default for ToyBenchConfig {
    fn default() -> Self {
        let synth = SyntheticPosteriorConfig::default();
        ToyBenchConfig {
            cases: 2000,
            seed: 0,
            samples_per_posterior: synth.samples_per_posterior,
            component_spread: synth.component_spread,
            mode_mass_skew: synth.mode_mass_skew,
            resimulation: false,
            sweep: None,
        }
    }
}

impl ToyBenchConfig {
    fn synth(&self, predictor: Predictor) -> SyntheticPosteriorConfig {
        SyntheticPosteriorConfig {
            predictor,
            samples_per_posterior: self.samples_per_posterior,
            component_spread: self.component_spread,
            mode_mass_skew: self.mode_mass_skew,
        }
    }
}

/// Everything one predictor produced.
#[derive(Debug, Clone)]
pub struct PredictorRun {
    pub predictor: Predictor,
    pub cases: Vec<ValidationCase>,
    pub report: MetricReport,
    pub conventional: ConventionalComparison,
    pub sweep: Option<Vec<crate::metrics::SweepPoint>>,
}

#[derive(Debug, Clone)]
pub struct ToyBenchResult {
    pub multimodal: PredictorRun,
    pub mean_point: PredictorRun,
    /// The options both runs were evaluated under (sans sweep overrides).
    pub options: EvalOptions,
}

fn run_predictor(cfg: &ToyBenchConfig, predictor: Predictor) -> Result<PredictorRun> {
    let cases = build_cases(cfg.cases, cfg.seed, &cfg.synth(predictor))?;
    let opts = toy_eval_options(cfg.seed, cfg.resimulation);
    let report = evaluate_cases(&cases, &opts)?;
    let conventional = conventional_comparison(&cases, cfg.seed)?;
    let sweep = match &cfg.sweep {
        Some(spec) => Some(run_sweep(&cases, &opts, spec)?),
        None => None,
    };
    Ok(PredictorRun {
        predictor,
        cases,
        report,
        conventional,
        sweep,
    })
}

/// Full benchmark: both predictors over identical problems, detection
/// metrics plus the conventional comparator for each.
pub fn run_toy_benchmark(cfg: &ToyBenchConfig) -> Result<ToyBenchResult> {
    let options = toy_eval_options(cfg.seed, cfg.resimulation);
    Ok(ToyBenchResult {
        multimodal: run_predictor(cfg, Predictor::Multimodal)?,
        mean_point: run_predictor(cfg, Predictor::MeanPoint)?,
        options,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::dbscan;

    #[test]
    fn roots_match_the_known_closed_forms() {
        let w = Complex64::new(0.3, -1.1);
        let r1 = enumerate_roots(1, w).unwrap();
        assert_eq!(r1.len(), 1);
        assert!((r1[0] - w).norm() < 1e-12);

        let r2 = enumerate_roots(2, Complex64::new(1.0, 0.0)).unwrap();
        assert!((r2[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((r2[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);

        let r3 = enumerate_roots(3, Complex64::new(8.0, 0.0)).unwrap();
        let sqrt3 = 3.0f64.sqrt();
        assert!((r3[0] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!((r3[1] - Complex64::new(-1.0, sqrt3)).norm() < 1e-12);
        assert!((r3[2] - Complex64::new(-1.0, -sqrt3)).norm() < 1e-12);
    }

    #[test]
    fn zero_w_and_zero_n_are_rejected() {
        assert!(enumerate_roots(2, Complex64::new(0.0, 0.0)).is_err());
        assert!(enumerate_roots(0, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn forward_power_known_values() {
        assert!((forward_power(Complex64::new(0.0, 1.0), 2) - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        for n in 0..6 {
            assert!(
                (forward_power(Complex64::new(1.0, 0.0), n) - Complex64::new(1.0, 0.0)).norm()
                    < 1e-15
            );
        }
    }

    #[test]
    fn roots_and_forward_are_inverses() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let n = rng.gen_range(1..=3u32);
            let w = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if w.norm() < 1e-3 {
                continue;
            }
            for root in enumerate_roots(n, w).unwrap() {
                assert!(
                    (forward_power(root, n) - w).norm() <= 1e-9,
                    "n={n} w={w} root={root}"
                );
            }
        }
    }

    #[test]
    fn forward_model_trait_plumbs_n_through() {
        let fm = ComplexRootsForward;
        let params = BTreeMap::from([("n".to_string(), 2.0)]);
        let out = fm.simulate(&[0.0, 1.0], &params).unwrap();
        assert!((out[0] + 1.0).abs() < 1e-12 && out[1].abs() < 1e-12);
        assert!(fm.simulate(&[0.0], &params).is_err());
        assert!(fm.simulate(&[0.0, 1.0], &BTreeMap::new()).is_err());
        let bad = BTreeMap::from([("n".to_string(), 2.5)]);
        assert!(fm.simulate(&[0.0, 1.0], &bad).is_err());
    }

    #[test]
    fn instance_stream_is_deterministic() {
        let a = sample_instances(50, 9);
        let b = sample_instances(50, 9);
        assert_eq!(a, b);
        let c = sample_instances(50, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn instance_radii_follow_the_annulus_law() {
        let instances = sample_instances(100_000, 4);
        let mut n1 = 0usize;
        let mut radii = Vec::with_capacity(instances.len());
        for inst in &instances {
            assert_eq!(inst.roots.len(), inst.n as usize);
            let lo = 0.8f64.powi(inst.n as i32);
            let hi = 1.2f64.powi(inst.n as i32);
            assert!(inst.r >= lo - 1e-12 && inst.r <= hi + 1e-12, "R={}", inst.r);
            if inst.n == 1 {
                n1 += 1;
            }
            // |z| for any root of w: all share radius |w|^(1/n)
            radii.push(inst.r.powf(1.0 / inst.n as f64));
        }
        let frac_n1 = n1 as f64 / instances.len() as f64;
        assert!((frac_n1 - 1.0 / 3.0).abs() < 0.01, "frac_n1={frac_n1}");

        // area-uniform annulus: F(r) = (r^2 - 0.64) / 0.8 on [0.8, 1.2]
        radii.sort_by(f64::total_cmp);
        let n = radii.len() as f64;
        let mut d_max: f64 = 0.0;
        for (i, r) in radii.iter().enumerate() {
            let f = ((r * r - 0.64) / 0.8).clamp(0.0, 1.0);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d_max = d_max.max((f - lo).abs()).max((f - hi).abs());
        }
        // KS acceptance at the 1% level for 1e5 draws
        let crit = 1.6276 / n.sqrt();
        assert!(d_max < crit, "D={d_max} crit={crit}");
    }

    #[test]
    fn mean_point_posterior_sits_at_the_root_mean() {
        let inst = ToyInstance {
            n: 2,
            w: Complex64::new(1.0, 0.0),
            roots: enumerate_roots(2, Complex64::new(1.0, 0.0)).unwrap(),
            r: 1.0,
            phi: 0.0,
        };
        let cfg = SyntheticPosteriorConfig {
            predictor: Predictor::MeanPoint,
            ..SyntheticPosteriorConfig::default()
        };
        let samples = synthesize_posterior(&inst, &cfg, 21).unwrap();
        let pts = samples.points();
        let n = pts.len() as f64;
        let mx: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let my: f64 = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        // roots of w=1 are +1 and -1; their mean is the origin
        let bound = 3.0 * cfg.component_spread / n.sqrt();
        assert!(mx.abs() < 3.0 * bound && my.abs() < 3.0 * bound, "({mx},{my})");
    }

    #[test]
    fn multimodal_n3_recovers_three_clusters() {
        let params = DbscanParams {
            eps: TOY_EPS,
            min_samples: TOY_MIN_SAMPLES,
        };
        let mut ok = 0;
        for seed in 0..100u64 {
            // fixed three-root instance, fresh sampling noise each round
            let inst = ToyInstance {
                n: 3,
                w: Complex64::new(1.0, 0.0),
                roots: enumerate_roots(3, Complex64::new(1.0, 0.0)).unwrap(),
                r: 1.0,
                phi: 0.0,
            };
            let samples =
                synthesize_posterior(&inst, &SyntheticPosteriorConfig::default(), 1000 + seed)
                    .unwrap();
            let labeling = dbscan(&samples, &params).unwrap();
            if labeling.n_clusters() == 3 {
                ok += 1;
            }
        }
        assert!(ok >= 99, "3 clusters in {ok}/100 rounds");
    }

    #[test]
    fn multimodal_n1_is_one_cloud_at_w() {
        let w = Complex64::new(-0.7, 0.6);
        let inst = ToyInstance {
            n: 1,
            w,
            roots: vec![w],
            r: w.norm(),
            phi: w.arg(),
        };
        let samples =
            synthesize_posterior(&inst, &SyntheticPosteriorConfig::default(), 5).unwrap();
        let labeling = dbscan(
            &samples,
            &DbscanParams {
                eps: TOY_EPS,
                min_samples: TOY_MIN_SAMPLES,
            },
        )
        .unwrap();
        assert_eq!(labeling.n_clusters(), 1);
        let pts = samples.points();
        let n = pts.len() as f64;
        let mx: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / n;
        let my: f64 = pts.iter().map(|p| p[1]).sum::<f64>() / n;
        assert!((mx - w.re).abs() < 0.01 && (my - w.im).abs() < 0.01);
    }

    #[test]
    fn built_cases_are_deterministic_and_well_formed() {
        let cfg = SyntheticPosteriorConfig::default();
        let a = build_cases(10, 3, &cfg).unwrap();
        let b = build_cases(10, 3, &cfg).unwrap();
        assert_eq!(a, b);
        for case in &a {
            assert_eq!(case.reference.granularity, ReferenceGranularity::ModesExhaustive);
            let total: f64 = case.reference.modes.modes().iter().map(|m| m.relative_mass).sum();
            assert!((total - 1.0).abs() < 1e-9);
            let obs = case.observation.as_ref().unwrap();
            assert_eq!(obs.y.len(), 2);
            assert!(obs.params.contains_key("n"));
        }
    }

    #[test]
    fn skewed_masses_stay_sorted_and_normalized() {
        let cfg = SyntheticPosteriorConfig {
            mode_mass_skew: 0.5,
            ..SyntheticPosteriorConfig::default()
        };
        let cases = build_cases(20, 8, &cfg).unwrap();
        let multi = cases
            .iter()
            .find(|c| c.reference.modes.modes().len() == 3)
            .expect("some case has n = 3");
        let masses: Vec<f64> = multi
            .reference
            .modes
            .modes()
            .iter()
            .map(|m| m.relative_mass)
            .collect();
        assert!(masses.windows(2).all(|w| w[0] >= w[1]));
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!((masses[0] / masses[1] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn toy_benchmark_contrast_small_scale() {
        let cfg = ToyBenchConfig {
            cases: 60,
            seed: 17,
            ..ToyBenchConfig::default()
        };
        let result = run_toy_benchmark(&cfg).unwrap();

        let multi = &result.multimodal.report;
        assert_eq!(multi.scalar("recall"), Some(1.0));
        assert_eq!(multi.scalar("precision"), Some(1.0));
        assert_eq!(multi.scalar("ap"), Some(1.0));
        assert_eq!(multi.scalar("fppi"), Some(0.0));
        // centers are sample means over hundreds of points: tight
        assert!(multi.scalar("matched_distance").unwrap() < 0.02);

        let mean = &result.mean_point.report;
        let recall = mean.scalar("recall").unwrap();
        let precision = mean.scalar("precision").unwrap();
        assert!((recall - 1.0 / 6.0).abs() < 0.1, "recall={recall}");
        assert!((precision - 1.0 / 3.0).abs() < 0.2, "precision={precision}");
        assert!(multi.scalar("recall") > mean.scalar("recall"));

        // the pitfall: the conventional scalar does not penalize collapse
        let m = result.multimodal.conventional.mean_error_for(&[2, 3]).unwrap();
        let p = result.mean_point.conventional.mean_error_for(&[2, 3]).unwrap();
        assert!(p <= m + 0.05, "mean_point={p} multimodal={m}");
        // both sit near the mean annulus radius
        assert!((p - 1.01).abs() < 0.15, "conventional error {p}");
    }

    #[test]
    fn resimulation_screen_leaves_exact_counts_alone() {
        let cfg = ToyBenchConfig {
            cases: 12,
            seed: 23,
            resimulation: true,
            ..ToyBenchConfig::default()
        };
        let result = run_toy_benchmark(&cfg).unwrap();
        let mean = &result.mean_point.report;
        // collapsed predictions resimulate far from w, so none are screened
        assert_eq!(mean.scalar("resimulation_screened"), Some(0.0));
        assert!(mean.scalars["precision"].flags.iter().all(|f| f != "fp_count_upper_bound"));
    }

    #[test]
    fn conventional_error_for_collapsed_predictor_tracks_the_radius() {
        let cfg = SyntheticPosteriorConfig {
            predictor: Predictor::MeanPoint,
            ..SyntheticPosteriorConfig::default()
        };
        let cases = build_cases(40, 31, &cfg).unwrap();
        let comparison = conventional_comparison(&cases, 31).unwrap();
        for (n, err) in &comparison.per_case {
            if *n >= 2 {
                // proxy sits at the origin; the drawn root sits on radius |z|
                assert!((0.75..1.25).contains(err), "n={n} err={err}");
            } else {
                assert!(*err < 0.05, "n=1 err={err}");
            }
        }
    }
}
