//! Bootstrap stability scores for detected modes: resample the posterior
//! draws with replacement, re-cluster with the same procedure, and score
//! each original cluster by its best Intersection-over-Union against the
//! new clustering. The average IoU over resamples becomes the mode's
//! confidence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClusterLabeling, DetectedModes};
use crate::error::{Error, Result};
use crate::model::{Mode, ModeSet, PosteriorSamples};

/// Re-clustering procedure applied to each bootstrap resample; must use
/// the same parameters as the original clustering.
pub type Reclusterer<'a> = &'a dyn Fn(&PosteriorSamples) -> Result<ClusterLabeling>;

/// Attaches bootstrap confidences to `detected`, preserving mode order and
/// membership. IoU is computed over original sample indices; a resampled
/// index participates once no matter how often it was drawn, and both the
/// original and the new clustering are restricted to the drawn index set,
/// so a clustering that is perfectly stable under resampling scores 1.
pub fn bootstrap_confidence(
    samples: &PosteriorSamples,
    detected: &DetectedModes,
    recluster: Reclusterer,
    resamples: usize,
    seed: u64,
) -> Result<DetectedModes> {
    if resamples == 0 {
        return Err(Error::Config("bootstrap needs at least one resample".into()));
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut score_sums = vec![0.0f64; detected.members.len()];
    for _ in 0..resamples {
        let draw: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let mut distinct = draw.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let resampled = PosteriorSamples::unweighted(
            draw.iter().map(|&i| samples.points()[i].clone()).collect(),
        )?;
        let relabeling = recluster(&resampled)?;
        // new clusters as sorted distinct original indices
        let new_clusters: Vec<Vec<usize>> = relabeling
            .members()
            .into_iter()
            .map(|m| {
                let mut orig: Vec<usize> = m.into_iter().map(|ri| draw[ri]).collect();
                orig.sort_unstable();
                orig.dedup();
                orig
            })
            .collect();
        for (k, members) in detected.members.iter().enumerate() {
            let restricted = intersect_sorted(members, &distinct);
            if restricted.is_empty() {
                continue; // cluster absent from this resample scores 0
            }
            let best = new_clusters
                .iter()
                .map(|c| iou_sorted(&restricted, c))
                .fold(0.0f64, f64::max);
            score_sums[k] += best;
        }
    }
    let mut modes = Vec::with_capacity(detected.members.len());
    for (mode, sum) in detected.modes.modes().iter().zip(&score_sums) {
        let confidence = (sum / resamples as f64).clamp(0.0, 1.0);
        modes.push(Mode::new(
            mode.center.clone(),
            mode.covariance.clone(),
            mode.relative_mass,
            Some(confidence),
            mode.label.clone(),
        )?);
    }
    // Mass order is unchanged, so ModeSet sorting leaves order intact.
    Ok(DetectedModes {
        modes: ModeSet::new(modes)?,
        members: detected.members.clone(),
        diagnostics: detected.diagnostics.clone(),
    })
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn iou_sorted(a: &[usize], b: &[usize]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let inter = intersect_sorted(a, b).len();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}
