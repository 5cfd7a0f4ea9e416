//! Distribution-level distances between predicted and reference
//! posteriors: 1-D Wasserstein with exact quantile integration, marginal
//! aggregation for multivariate samples, MMD with an RBF kernel,
//! discretized KL divergence, the two-sample KS test, and cross-entropy
//! from supplied log-densities. All logarithms are natural (nats).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PosteriorSamples;
use crate::numeric;

/// W1 between two empirical univariate distributions, integrating the
/// quantile-function gap exactly over the merged level grid. For
/// equal-size inputs this reduces to the mean absolute difference of the
/// sorted samples.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("wasserstein over an empty sample set".into()));
    }
    for (name, xs) in [("first", a), ("second", b)] {
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value in {name} sample set")));
        }
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let n = sa.len();
    let m = sb.len();
    // level cuts are i/n and j/m; track numerators over the common
    // denominator n*m so segment widths stay exact integers
    let mut acc = 0.0f64;
    let mut i = 0usize;
    let mut j = 0usize;
    let mut level = 0u64;
    let (n64, m64) = (n as u64, m as u64);
    while i < n && j < m {
        let next_a = (i as u64 + 1) * m64;
        let next_b = (j as u64 + 1) * n64;
        let next = next_a.min(next_b);
        acc += (next - level) as f64 * (sa[i] - sb[j]).abs();
        if next == next_a {
            i += 1;
        }
        if next == next_b {
            j += 1;
        }
        level = next;
    }
    Ok(acc / (n64 * m64) as f64)
}

/// How to combine per-dimension W1 values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginalAggregate {
    Mean,
    Max,
}

/// Aggregated W1 over all 1-D marginals. A surrogate, not the full
/// multivariate distance: distinct joint distributions can share
/// marginals, so zero here does not imply equal distributions.
pub fn marginal_wasserstein(
    a: &PosteriorSamples,
    b: &PosteriorSamples,
    aggregate: MarginalAggregate,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "marginal wasserstein between dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let per_dim: Vec<f64> = (0..a.dim())
        .map(|k| wasserstein_1d(&a.column(k), &b.column(k)))
        .collect::<Result<_>>()?;
    Ok(match aggregate {
        MarginalAggregate::Mean => per_dim.iter().sum::<f64>() / per_dim.len() as f64,
        MarginalAggregate::Max => per_dim.iter().cloned().fold(0.0, f64::max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median of the nonzero pairwise distances of the pooled samples;
    /// falls back to 1.0 when every pooled point coincides.
    MedianHeuristic,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec {
            family: KernelFamily::Rbf,
            bandwidth: Bandwidth::MedianHeuristic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MmdEstimator {
    /// V-statistic, always >= 0, biased upward.
    Biased,
    /// U-statistic, unbiased, may go slightly negative.
    Unbiased,
}

fn resolve_bandwidth(a: &PosteriorSamples, b: &PosteriorSamples, spec: &KernelSpec) -> Result<f64> {
    match spec.bandwidth {
        Bandwidth::Fixed(sigma) => {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::Config(format!("kernel bandwidth {sigma} must be positive")));
            }
            Ok(sigma)
        }
        Bandwidth::MedianHeuristic => {
            let pooled: Vec<&Vec<f64>> = a.points().iter().chain(b.points().iter()).collect();
            let mut dists = Vec::new();
            for i in 0..pooled.len() {
                for j in (i + 1)..pooled.len() {
                    let d = numeric::euclidean(pooled[i], pooled[j]);
                    if d > 0.0 {
                        dists.push(d);
                    }
                }
            }
            if dists.is_empty() {
                return Ok(1.0);
            }
            dists.sort_by(f64::total_cmp);
            Ok(numeric::median_sorted(&dists))
        }
    }
}

/// Squared maximum mean discrepancy under an RBF kernel
/// k(x, y) = exp(-|x-y|^2 / (2 sigma^2)). Summation order is fixed
/// (row-major over both sample sets) so results are bitwise stable.
pub fn mmd2(
    a: &PosteriorSamples,
    b: &PosteriorSamples,
    kernel: &KernelSpec,
    estimator: MmdEstimator,
) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "mmd between dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let n = a.len();
    let m = b.len();
    if estimator == MmdEstimator::Unbiased && (n < 2 || m < 2) {
        return Err(Error::Config(
            "unbiased mmd needs at least 2 points per set".into(),
        ));
    }
    let sigma = resolve_bandwidth(a, b, kernel)?;
    let gamma = 1.0 / (2.0 * sigma * sigma);
    let kern = |x: &[f64], y: &[f64]| {
        let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
        (-gamma * d2).exp()
    };

    let mut sum_aa = 0.0;
    let mut sum_bb = 0.0;
    let mut sum_ab = 0.0;
    for i in 0..n {
        for j in 0..n {
            if estimator == MmdEstimator::Biased || i != j {
                sum_aa += kern(&a.points()[i], &a.points()[j]);
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            if estimator == MmdEstimator::Biased || i != j {
                sum_bb += kern(&b.points()[i], &b.points()[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..m {
            sum_ab += kern(&a.points()[i], &b.points()[j]);
        }
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(match estimator {
        MmdEstimator::Biased => {
            sum_aa / (nf * nf) + sum_bb / (mf * mf) - 2.0 * sum_ab / (nf * mf)
        }
        MmdEstimator::Unbiased => {
            sum_aa / (nf * (nf - 1.0)) + sum_bb / (mf * (mf - 1.0)) - 2.0 * sum_ab / (nf * mf)
        }
    })
}

/// Bin layout for one dimension of the discretization grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimBins {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

pub const DEFAULT_KL_EPSILON: f64 = 1e-10;

/// Shared histogram grid for discretized KL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationSpec {
    pub dims: Vec<DimBins>,
    /// Mass added to every q bin before renormalizing, guarding
    /// against ln(p/0).
    pub epsilon: f64,
}

impl DiscretizationSpec {
    pub fn uniform(d: usize, bins: usize, lo: f64, hi: f64) -> Self {
        DiscretizationSpec {
            dims: vec![DimBins { bins, lo, hi }; d],
            epsilon: DEFAULT_KL_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(Error::Config("discretization needs at least one dimension".into()));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "smoothing epsilon {} must be positive",
                self.epsilon
            )));
        }
        let mut total: usize = 1;
        for (k, dim) in self.dims.iter().enumerate() {
            if dim.bins == 0 {
                return Err(Error::Config(format!("dimension {k}: bin count must be >= 1")));
            }
            if !(dim.lo.is_finite() && dim.hi.is_finite() && dim.lo < dim.hi) {
                return Err(Error::Config(format!(
                    "dimension {k}: range [{}, {}] must satisfy lo < hi",
                    dim.lo, dim.hi
                )));
            }
            total = total
                .checked_mul(dim.bins)
                .filter(|&t| t <= 50_000_000)
                .ok_or_else(|| Error::Config("discretization grid too large".into()))?;
        }
        Ok(())
    }

    fn total_bins(&self) -> usize {
        self.dims.iter().map(|d| d.bins).product()
    }

    /// Flattened bin index; out-of-range coordinates clamp to the edge
    /// bins. Returns (index, was_clamped).
    fn bin_index(&self, point: &[f64]) -> (usize, bool) {
        let mut idx = 0usize;
        let mut clamped = false;
        for (x, dim) in point.iter().zip(&self.dims) {
            let width = (dim.hi - dim.lo) / dim.bins as f64;
            let raw = ((x - dim.lo) / width).floor();
            let b = if raw < 0.0 {
                clamped = true;
                0
            } else if raw >= dim.bins as f64 {
                if *x > dim.hi {
                    clamped = true;
                }
                dim.bins - 1
            } else {
                raw as usize
            };
            idx = idx * dim.bins + b;
        }
        (idx, clamped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlResult {
    pub value: f64,
    /// Bins where p has mass but the raw q histogram was empty; the
    /// value there is controlled entirely by the smoothing epsilon.
    pub zero_q_bins: usize,
    pub clamped_p_samples: usize,
    pub clamped_q_samples: usize,
}

/// KL(p || q) between histograms of the two sample sets on the shared
/// grid, with epsilon smoothing on q. 0 * ln(0/x) contributes 0.
pub fn kl_discretized(
    p_samples: &PosteriorSamples,
    q_samples: &PosteriorSamples,
    spec: &DiscretizationSpec,
) -> Result<KlResult> {
    spec.validate()?;
    for (name, s) in [("p", p_samples), ("q", q_samples)] {
        if s.dim() != spec.dims.len() {
            return Err(Error::Dimension(format!(
                "{name} samples have dimension {}, grid has {}",
                s.dim(),
                spec.dims.len()
            )));
        }
    }
    let bins = spec.total_bins();
    let histogram = |s: &PosteriorSamples| -> (Vec<f64>, usize, usize) {
        let mut h = vec![0.0f64; bins];
        let mut clamped = 0usize;
        let mut in_range = 0usize;
        for p in s.points() {
            let (idx, was_clamped) = spec.bin_index(p);
            h[idx] += 1.0;
            if was_clamped {
                clamped += 1;
            } else {
                in_range += 1;
            }
        }
        for v in &mut h {
            *v /= s.len() as f64;
        }
        (h, clamped, in_range)
    };
    let (p, clamped_p, in_range_p) = histogram(p_samples);
    let (q_raw, clamped_q, in_range_q) = histogram(q_samples);
    if in_range_p == 0 || in_range_q == 0 {
        return Err(Error::Numeric(
            "all samples fall outside the discretization range".into(),
        ));
    }
    let norm = 1.0 + bins as f64 * spec.epsilon;
    let mut value = 0.0;
    let mut zero_q = 0usize;
    for (pi, qi_raw) in p.iter().zip(&q_raw) {
        if *pi > 0.0 {
            if *qi_raw == 0.0 {
                zero_q += 1;
            }
            let qi = (qi_raw + spec.epsilon) / norm;
            value += pi * (pi / qi).ln();
        }
    }
    Ok(KlResult {
        value,
        zero_q_bins: zero_q,
        clamped_p_samples: clamped_p,
        clamped_q_samples: clamped_q,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov-Smirnov: D = sup |ECDF_a - ECDF_b| and the
/// asymptotic p-value Q(D * sqrt(nm/(n+m))).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("ks test over an empty sample set".into()));
    }
    for (name, xs) in [("first", a), ("second", b)] {
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite value in {name} sample set")));
        }
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let (n, m) = (sa.len(), sb.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d = 0.0f64;
    while i < n || j < m {
        let v = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < n && sa[i] == v {
            i += 1;
        }
        while j < m && sb[j] == v {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(gap);
    }
    let lambda = d * ((n * m) as f64 / (n + m) as f64).sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: numeric::kolmogorov_q(lambda),
    })
}

/// Cross-entropy of the prediction density against reference samples:
/// -mean of the supplied log q values (natural log).
pub fn cross_entropy(log_q_at_ref: &[f64]) -> Result<f64> {
    if log_q_at_ref.is_empty() {
        return Err(Error::EmptyInput("cross entropy over zero log-density values".into()));
    }
    for (i, v) in log_q_at_ref.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite log-density {v} at reference sample {i}"
            )));
        }
    }
    Ok(-log_q_at_ref.iter().sum::<f64>() / log_q_at_ref.len() as f64)
}
