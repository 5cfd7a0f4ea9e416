//! Density-based clustering with exact pairwise distances. At the sample
//! counts posteriors produce (a few thousand draws) the O(n^2) scan is
//! cheap, fully deterministic, and needs no spatial index.

use serde::{Deserialize, Serialize};

use super::{ClusterLabeling, NOISE};
use crate::error::{Error, Result};
use crate::model::PosteriorSamples;

/// Neighborhood radius and core-point threshold. A point's neighborhood
/// count includes the point itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    pub eps: f64,
    pub min_samples: usize,
}

impl DbscanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::Config(format!("dbscan eps {} must be positive", self.eps)));
        }
        if self.min_samples == 0 {
            return Err(Error::Config("dbscan min_samples must be at least 1".into()));
        }
        Ok(())
    }
}

/// Euclidean DBSCAN. Points are processed in index order: clusters are
/// seeded at the lowest-index unclaimed core point, and a border point in
/// reach of several clusters goes to the one created first. That rule is
/// part of the contract; relabeling runs of the same input are identical.
pub fn dbscan(samples: &PosteriorSamples, params: &DbscanParams) -> Result<ClusterLabeling> {
    params.validate()?;
    let n = samples.len();
    let d = samples.dim();
    // flatten for cache-friendly pairwise scans
    let mut flat = Vec::with_capacity(n * d);
    for p in samples.points() {
        flat.extend_from_slice(p);
    }
    let eps2 = params.eps * params.eps;
    let dist2 = |i: usize, j: usize| -> f64 {
        let (a, b) = (&flat[i * d..(i + 1) * d], &flat[j * d..(j + 1) * d]);
        let mut acc = 0.0;
        for k in 0..d {
            let t = a[k] - b[k];
            acc += t * t;
        }
        acc
    };

    let mut core = vec![false; n];
    for i in 0..n {
        let mut count = 0usize;
        for j in 0..n {
            if dist2(i, j) <= eps2 {
                count += 1;
            }
        }
        core[i] = count >= params.min_samples;
    }

    const UNVISITED: i32 = -2;
    let mut labels = vec![UNVISITED; n];
    let mut next_cluster = 0i32;
    for seed in 0..n {
        if labels[seed] != UNVISITED {
            continue;
        }
        if !core[seed] {
            labels[seed] = NOISE; // may be claimed as border later
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        labels[seed] = cluster;
        // frontier holds core points whose neighborhoods still need expansion
        let mut frontier = vec![seed];
        let mut head = 0;
        while head < frontier.len() {
            let p = frontier[head];
            head += 1;
            for j in 0..n {
                if (labels[j] == UNVISITED || labels[j] == NOISE) && dist2(p, j) <= eps2 {
                    labels[j] = cluster;
                    if core[j] {
                        frontier.push(j);
                    }
                }
            }
        }
    }
    ClusterLabeling::new(labels, next_cluster as usize)
}
