//! Mode detection: clustering posterior samples and turning clusters into
//! mode summaries with bootstrap stability scores.

mod bootstrap;
mod dbscan;
mod dip;
mod unidip;

pub use bootstrap::bootstrap_confidence;
pub use dbscan::{dbscan, DbscanParams};
pub use dip::{dip_statistic, dip_with_modal_interval, uniform_null_pvalue};
pub use unidip::{unidip, UnidipParams};

use crate::error::{Error, Result};
use crate::model::{Diagnostic, Mode, ModeSet, PosteriorSamples};

/// Label for points assigned to no cluster.
pub const NOISE: i32 = -1;

/// A cluster assignment over a sample set: `labels[i]` is the cluster of
/// sample i, or `NOISE`. Cluster ids are contiguous from zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLabeling {
    labels: Vec<i32>,
    n_clusters: usize,
}

impl ClusterLabeling {
    /// Wraps a raw label vector, checking contiguity: every id in
    /// 0..n_clusters occurs at least once and nothing else besides NOISE.
    pub fn new(labels: Vec<i32>, n_clusters: usize) -> Result<Self> {
        let mut seen = vec![false; n_clusters];
        for &l in &labels {
            if l == NOISE {
                continue;
            }
            if l < 0 || l as usize >= n_clusters {
                return Err(Error::Numeric(format!(
                    "cluster label {l} outside 0..{n_clusters}"
                )));
            }
            seen[l as usize] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Numeric("cluster ids are not contiguous".into()));
        }
        Ok(Self { labels, n_clusters })
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Sample indices of each cluster, in ascending index order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            if l != NOISE {
                out[l as usize].push(i);
            }
        }
        out
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

/// How a cluster is summarized into a mode center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterRule {
    Mean,
    Median,
}

impl CenterRule {
    /// Component-wise median for univariate problems (the classical MAP
    /// stand-in there), mean otherwise.
    pub fn default_for_dim(d: usize) -> CenterRule {
        if d == 1 {
            CenterRule::Median
        } else {
            CenterRule::Mean
        }
    }
}

/// Modes extracted from a labeling, keeping the member indices of each
/// mode for bootstrap scoring and per-mode sample comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedModes {
    pub modes: ModeSet,
    /// members[k] holds the sample indices behind modes[k].
    pub members: Vec<Vec<usize>>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Summarizes clusters into modes: center by the given rule, unbiased
/// covariance (zero matrix plus a diagnostic for singleton clusters), and
/// relative mass = cluster size / total sample count, so noise keeps its
/// share of mass out of the mode list.
pub fn extract_modes(
    samples: &PosteriorSamples,
    labeling: &ClusterLabeling,
    center_rule: CenterRule,
) -> Result<DetectedModes> {
    if labeling.len() != samples.len() {
        return Err(Error::Dimension(format!(
            "labeling covers {} samples but the set has {}",
            labeling.len(),
            samples.len()
        )));
    }
    let d = samples.dim();
    let n_total = samples.len() as f64;
    let mut diagnostics = Vec::new();
    // (mode, members) per cluster, then sort together by descending mass.
    let mut entries: Vec<(Mode, Vec<usize>)> = Vec::with_capacity(labeling.n_clusters());
    for (cluster_id, members) in labeling.members().into_iter().enumerate() {
        let pts: Vec<&[f64]> = members
            .iter()
            .map(|&i| samples.points()[i].as_slice())
            .collect();
        let center = match center_rule {
            CenterRule::Mean => {
                let mut c = vec![0.0; d];
                for p in &pts {
                    for (acc, x) in c.iter_mut().zip(*p) {
                        *acc += x;
                    }
                }
                c.iter_mut().for_each(|x| *x /= pts.len() as f64);
                c
            }
            CenterRule::Median => (0..d)
                .map(|k| {
                    let mut col: Vec<f64> = pts.iter().map(|p| p[k]).collect();
                    col.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    crate::numeric::median_sorted(&col)
                })
                .collect(),
        };
        let cov = if pts.len() < 2 {
            diagnostics.push(Diagnostic::new(
                format!("cluster {cluster_id}"),
                "singleton cluster: covariance set to zero",
            ));
            vec![vec![0.0; d]; d]
        } else {
            let mut mean = vec![0.0; d];
            for p in &pts {
                for (acc, x) in mean.iter_mut().zip(*p) {
                    *acc += x;
                }
            }
            mean.iter_mut().for_each(|x| *x /= pts.len() as f64);
            let mut cov = vec![vec![0.0; d]; d];
            for p in &pts {
                for i in 0..d {
                    for j in 0..d {
                        cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
                    }
                }
            }
            let denom = (pts.len() - 1) as f64;
            for row in cov.iter_mut() {
                for x in row.iter_mut() {
                    *x /= denom;
                }
            }
            cov
        };
        let mass = members.len() as f64 / n_total;
        entries.push((Mode::new(center, Some(cov), mass, None, None)?, members));
    }
    entries.sort_by(|a, b| b.0.relative_mass.partial_cmp(&a.0.relative_mass).unwrap());
    let members: Vec<Vec<usize>> = entries.iter().map(|(_, m)| m.clone()).collect();
    let modes = ModeSet::new(entries.into_iter().map(|(m, _)| m).collect())?;
    Ok(DetectedModes {
        modes,
        members,
        diagnostics,
    })
}
