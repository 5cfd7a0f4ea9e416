//! Univariate clustering by recursive dip testing: isolate a modal
//! interval, recurse inside it, then re-test each flank with the nearest
//! accepted mode included as an anchor. Points outside every accepted
//! interval are noise. All significance calls share the deterministic
//! Monte Carlo null from the dip module.

use serde::{Deserialize, Serialize};

use super::dip::{dip_with_modal_interval, uniform_null_pvalue};
use super::{ClusterLabeling, NOISE};
use crate::error::{Error, Result};
use crate::model::PosteriorSamples;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnidipParams {
    /// Significance level for each dip test.
    pub alpha: f64,
    /// Monte Carlo draws per null distribution.
    pub bootstrap_draws: usize,
}

impl Default for UnidipParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bootstrap_draws: 1000,
        }
    }
}

impl UnidipParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "unidip alpha {} must lie in (0, 1)",
                self.alpha
            )));
        }
        if self.bootstrap_draws == 0 {
            return Err(Error::Config("unidip needs at least one null draw".into()));
        }
        Ok(())
    }
}

/// Runs the recursion on univariate samples. Clusters are numbered left to
/// right along the value axis.
pub fn unidip(samples: &PosteriorSamples, params: &UnidipParams) -> Result<ClusterLabeling> {
    params.validate()?;
    if samples.dim() != 1 {
        return Err(Error::Dimension(format!(
            "unidip expects univariate samples, got d = {}",
            samples.dim()
        )));
    }
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let values: Vec<f64> = samples.points().iter().map(|p| p[0]).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("unidip input contains a non-finite value".into()));
    }
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let mut intervals = Vec::new();
    recurse(&sorted, 0, params, &mut intervals)?;
    intervals.sort_by_key(|&(a, _)| a);
    // merge genuinely overlapping intervals (flank passes re-find anchors)
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (a, b) in intervals {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }

    let mut labels = vec![NOISE; n];
    for (cluster, &(a, b)) in merged.iter().enumerate() {
        for &pos in &order[a..=b] {
            labels[pos] = cluster as i32;
        }
    }
    ClusterLabeling::new(labels, merged.len())
}

/// Core recursion over a sorted window; `offset` positions the window in
/// the full sorted array. A window whose dip test accepts unimodality is
/// one mode in full. Otherwise the modal interval is resolved first, then
/// each flank is re-tested together with the nearest accepted mode as an
/// anchor: a significant anchored test means the flank holds more than a
/// tail of that mode, and only then does the flank recurse, on its points
/// alone. Every recursive call covers a strictly shorter window, so the
/// recursion needs no other termination guard.
fn recurse(
    x: &[f64],
    offset: usize,
    params: &UnidipParams,
    out: &mut Vec<(usize, usize)>,
) -> Result<()> {
    let n = x.len();
    if n < 4 {
        out.push((offset, offset + n - 1));
        return Ok(());
    }
    let (dip, lo, hi) = dip_with_modal_interval(x)?;
    let p = uniform_null_pvalue(dip, n, params.bootstrap_draws)?;
    if p >= params.alpha {
        out.push((offset, offset + n - 1));
        return Ok(());
    }
    if lo == 0 && hi == n - 1 {
        // Significant dip but no narrowing possible; accept as one mode.
        out.push((offset, offset + n - 1));
        return Ok(());
    }
    let mut inner = Vec::new();
    recurse(&x[lo..=hi], offset + lo, params, &mut inner)?;
    // anchors: the leftmost accepted mode's upper end and the rightmost's
    // lower end, in window-local positions
    let leftmost_hi = inner.iter().map(|&(_, b)| b).min().unwrap_or(offset + hi) - offset;
    let rightmost_lo = inner.iter().map(|&(a, _)| a).max().unwrap_or(offset + lo) - offset;
    out.extend(inner);
    if lo > 0 && flank_is_multimodal(&x[..=leftmost_hi], params)? {
        recurse(&x[..lo], offset, params, out)?;
    }
    if hi < n - 1 && flank_is_multimodal(&x[rightmost_lo..], params)? {
        recurse(&x[hi + 1..], offset + hi + 1, params, out)?;
    }
    Ok(())
}

/// Dip test on a flank window extended to include its anchor mode.
fn flank_is_multimodal(x: &[f64], params: &UnidipParams) -> Result<bool> {
    if x.len() < 4 {
        return Ok(false);
    }
    let (dip, _, _) = dip_with_modal_interval(x)?;
    Ok(uniform_null_pvalue(dip, x.len(), params.bootstrap_draws)? < params.alpha)
}
