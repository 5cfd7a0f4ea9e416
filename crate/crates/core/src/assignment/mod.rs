//! One-to-one matching of predicted modes to reference modes. Every
//! strategy consumes the same localization scores and produces a
//! [`MatchResult`] splitting both sides into matches, FP candidates, and
//! misses; downstream classification metrics never look at raw distances
//! again.

pub mod hungarian;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localization::LocalizationCriterion;
use crate::model::ModeSet;

/// One matched (prediction, reference) pair and its localization score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: usize,
    pub reference: usize,
    pub score: f64,
}

/// Outcome of assigning one case's predictions to its references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matches: Vec<MatchedPair>,
    /// Predictions matched to nothing: FP candidates (see flag below).
    pub unmatched_pred: Vec<usize>,
    /// References matched to nothing: false negatives.
    pub unmatched_ref: Vec<usize>,
    /// True when the reference is non-exhaustive and no resimulation was
    /// applied, so unmatched predictions only bound the FP count above.
    pub fp_upper_bound_flag: bool,
}

impl MatchResult {
    /// Index-hygiene check: every index at most once, matches sorted by
    /// prediction index, no index out of range.
    pub fn check(&self, n_pred: usize, n_ref: usize) -> Result<()> {
        let mut pred_seen = vec![false; n_pred];
        let mut ref_seen = vec![false; n_ref];
        let mark = |seen: &mut Vec<bool>, idx: usize, side: &str| -> Result<()> {
            if idx >= seen.len() || seen[idx] {
                return Err(Error::Numeric(format!(
                    "match result reuses or overflows {side} index {idx}"
                )));
            }
            seen[idx] = true;
            Ok(())
        };
        for pair in &self.matches {
            mark(&mut pred_seen, pair.pred, "pred")?;
            mark(&mut ref_seen, pair.reference, "ref")?;
        }
        for &i in &self.unmatched_pred {
            mark(&mut pred_seen, i, "pred")?;
        }
        for &j in &self.unmatched_ref {
            mark(&mut ref_seen, j, "ref")?;
        }
        if !ref_seen.iter().all(|&b| b) {
            return Err(Error::Numeric(
                "match result drops a reference index".into(),
            ));
        }
        Ok(())
    }

    pub fn total_score(&self) -> f64 {
        self.matches.iter().map(|p| p.score).sum()
    }
}

/// Iteration order for greedy matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyOrder {
    /// Predictions in descending confidence claim their closest reference.
    ByScore,
    /// Candidate pairs in ascending localization score.
    ByLocalization,
}

/// Matching strategy selected by run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStrategy {
    GreedyByScore,
    GreedyByLocalization,
    Hungarian,
    FixedThreshold,
}

impl AssignmentStrategy {
    pub const ALL: [AssignmentStrategy; 4] = [
        AssignmentStrategy::GreedyByScore,
        AssignmentStrategy::GreedyByLocalization,
        AssignmentStrategy::Hungarian,
        AssignmentStrategy::FixedThreshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AssignmentStrategy::GreedyByScore => "greedy_by_score",
            AssignmentStrategy::GreedyByLocalization => "greedy_by_localization",
            AssignmentStrategy::Hungarian => "hungarian",
            AssignmentStrategy::FixedThreshold => "fixed_threshold",
        }
    }
}

/// Pairwise localization scores; `None` marks inadmissible pairs.
fn score_matrix(
    preds: &ModeSet,
    refs: &ModeSet,
    criterion: &LocalizationCriterion,
) -> Result<Vec<Vec<Option<f64>>>> {
    preds
        .modes()
        .iter()
        .map(|p| {
            refs.modes()
                .iter()
                .map(|r| {
                    let (score, admissible) = criterion.evaluate(p, r)?;
                    if admissible && !score.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite localization score {score} on an admissible pair"
                        )));
                    }
                    Ok(admissible.then_some(score))
                })
                .collect()
        })
        .collect()
}

fn collect_result(
    matrix: &[Vec<Option<f64>>],
    n_ref: usize,
    pred_to_ref: &[Option<usize>],
) -> MatchResult {
    let mut matches = Vec::new();
    let mut ref_taken = vec![false; n_ref];
    let mut unmatched_pred = Vec::new();
    for (i, m) in pred_to_ref.iter().enumerate() {
        match m {
            Some(j) => {
                ref_taken[*j] = true;
                matches.push(MatchedPair {
                    pred: i,
                    reference: *j,
                    score: matrix[i][*j].expect("matched pair must be admissible"),
                });
            }
            None => unmatched_pred.push(i),
        }
    }
    let unmatched_ref = (0..n_ref).filter(|&j| !ref_taken[j]).collect();
    MatchResult {
        matches,
        unmatched_pred,
        unmatched_ref,
        fp_upper_bound_flag: false,
    }
}

/// Greedy one-to-one matching. `ByScore` walks predictions in descending
/// confidence (ties to the lower index) and gives each its closest
/// still-free admissible reference; `ByLocalization` walks candidate
/// pairs in ascending score, ties by (pred, ref) index.
pub fn greedy_assign(
    preds: &ModeSet,
    refs: &ModeSet,
    criterion: &LocalizationCriterion,
    order: GreedyOrder,
) -> Result<MatchResult> {
    let matrix = score_matrix(preds, refs, criterion)?;
    let n_pred = preds.modes().len();
    let n_ref = refs.modes().len();
    let mut pred_to_ref: Vec<Option<usize>> = vec![None; n_pred];
    let mut ref_free = vec![true; n_ref];

    match order {
        GreedyOrder::ByScore => {
            let mut order_idx: Vec<usize> = (0..n_pred).collect();
            for (i, mode) in preds.modes().iter().enumerate() {
                if mode.confidence.is_none() {
                    return Err(Error::Config(format!(
                        "greedy matching by score requires a confidence on every \
                         predicted mode; mode {i} has none"
                    )));
                }
            }
            // stable sort keeps index order within equal confidences
            order_idx.sort_by(|&a, &b| {
                let ca = preds.modes()[a].confidence.unwrap();
                let cb = preds.modes()[b].confidence.unwrap();
                cb.total_cmp(&ca)
            });
            for i in order_idx {
                let best = matrix[i]
                    .iter()
                    .enumerate()
                    .filter(|(j, s)| ref_free[*j] && s.is_some())
                    .min_by(|(ja, sa), (jb, sb)| {
                        sa.unwrap().total_cmp(&sb.unwrap()).then(ja.cmp(jb))
                    });
                if let Some((j, _)) = best {
                    pred_to_ref[i] = Some(j);
                    ref_free[j] = false;
                }
            }
        }
        GreedyOrder::ByLocalization => {
            let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
            for (i, row) in matrix.iter().enumerate() {
                for (j, s) in row.iter().enumerate() {
                    if let Some(score) = s {
                        pairs.push((*score, i, j));
                    }
                }
            }
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            for (_, i, j) in pairs {
                if pred_to_ref[i].is_none() && ref_free[j] {
                    pred_to_ref[i] = Some(j);
                    ref_free[j] = false;
                }
            }
        }
    }
    Ok(collect_result(&matrix, n_ref, &pred_to_ref))
}

/// Optimal one-to-one matching: maximizes the number of admissible
/// matches, then minimizes their total localization score.
pub fn hungarian_assign(
    preds: &ModeSet,
    refs: &ModeSet,
    criterion: &LocalizationCriterion,
) -> Result<MatchResult> {
    let matrix = score_matrix(preds, refs, criterion)?;
    let pred_to_ref = hungarian::solve(&matrix);
    Ok(collect_result(&matrix, refs.modes().len(), &pred_to_ref))
}

/// Coverage-style matching for mode-counting applications: a reference is
/// hit when at least one admissible prediction exists (one-to-one on
/// representatives, lowest score first); only predictions admissible to
/// no reference at all count as FP candidates. Surplus admissible
/// predictions are deliberately dropped from both lists, so
/// |matches| + |unmatched_pred| can fall short of |preds|.
pub fn threshold_assign(
    preds: &ModeSet,
    refs: &ModeSet,
    criterion: &LocalizationCriterion,
) -> Result<MatchResult> {
    let mut result = greedy_assign(preds, refs, criterion, GreedyOrder::ByLocalization)?;
    let matrix = score_matrix(preds, refs, criterion)?;
    result
        .unmatched_pred
        .retain(|&i| matrix[i].iter().all(|s| s.is_none()));
    Ok(result)
}

/// Dispatches on the configured strategy.
pub fn assign(
    strategy: AssignmentStrategy,
    preds: &ModeSet,
    refs: &ModeSet,
    criterion: &LocalizationCriterion,
) -> Result<MatchResult> {
    match strategy {
        AssignmentStrategy::GreedyByScore => {
            greedy_assign(preds, refs, criterion, GreedyOrder::ByScore)
        }
        AssignmentStrategy::GreedyByLocalization => {
            greedy_assign(preds, refs, criterion, GreedyOrder::ByLocalization)
        }
        AssignmentStrategy::Hungarian => hungarian_assign(preds, refs, criterion),
        AssignmentStrategy::FixedThreshold => threshold_assign(preds, refs, criterion),
    }
}
