//! Dense linear assignment solver (potentials + shortest augmenting
//! paths, O(n^2 m)). Inadmissible pairs are encoded as `None` and can
//! never appear in the returned matching: they are padded with a cost
//! larger than the sum of all admissible costs, which makes the solver
//! maximize the number of admissible matches first and minimize their
//! total cost second.

/// Solves min-cost assignment on a rectangular matrix of optional costs.
/// Returns, for each row, the matched column (or None). All `Some` costs
/// must be finite and non-negative.
pub fn solve(costs: &[Vec<Option<f64>>]) -> Vec<Option<usize>> {
    let rows = costs.len();
    let cols = costs.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    debug_assert!(costs.iter().all(|r| r.len() == cols));

    if rows > cols {
        // transpose so the augmenting loop runs over the short side
        let t: Vec<Vec<Option<f64>>> = (0..cols)
            .map(|j| (0..rows).map(|i| costs[i][j]).collect())
            .collect();
        let col_to_row = solve(&t);
        let mut out = vec![None; rows];
        for (j, m) in col_to_row.iter().enumerate() {
            if let Some(i) = m {
                out[*i] = Some(j);
            }
        }
        return out;
    }

    let admissible_sum: f64 = costs
        .iter()
        .flatten()
        .filter_map(|c| *c)
        .sum();
    let big = admissible_sum + 1.0;
    let cost_at = |i: usize, j: usize| costs[i][j].unwrap_or(big);

    // 1-indexed potentials; p[j] = row matched to column j (0 = free)
    let n = rows;
    let m = cols;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost_at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out = vec![None; rows];
    for j in 1..=m {
        let i = p[j];
        if i > 0 && costs[i - 1][j - 1].is_some() {
            out[i - 1] = Some(j - 1);
        }
    }
    out
}

/// Total cost of a row-to-column matching against the same matrix.
pub fn matching_cost(costs: &[Vec<Option<f64>>], matching: &[Option<usize>]) -> f64 {
    matching
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| costs[i][j].expect("matched pair must be admissible")))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn full(costs: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
        costs.iter().map(|r| r.iter().map(|&c| Some(c)).collect()).collect()
    }

    /// Brute force over all injections of rows into columns, maximizing
    /// cardinality first, then minimizing cost.
    fn brute_force(costs: &[Vec<Option<f64>>]) -> (usize, f64) {
        let rows = costs.len();
        let cols = costs.first().map_or(0, Vec::len);
        let mut best = (0usize, 0.0f64);
        let mut assigned = vec![false; cols];
        fn recurse(
            i: usize,
            rows: usize,
            cols: usize,
            costs: &[Vec<Option<f64>>],
            assigned: &mut Vec<bool>,
            count: usize,
            cost: f64,
            best: &mut (usize, f64),
        ) {
            if i == rows {
                if count > best.0 || (count == best.0 && cost < best.1) {
                    *best = (count, cost);
                }
                return;
            }
            recurse(i + 1, rows, cols, costs, assigned, count, cost, best);
            for j in 0..cols {
                if !assigned[j] {
                    if let Some(c) = costs[i][j] {
                        assigned[j] = true;
                        recurse(i + 1, rows, cols, costs, assigned, count + 1, cost + c, best);
                        assigned[j] = false;
                    }
                }
            }
        }
        recurse(0, rows, cols, costs, &mut assigned, 0, 0.0, &mut best);
        best
    }

    #[test]
    fn diagonal_is_optimal() {
        let costs = full(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let m = solve(&costs);
        assert_eq!(m, vec![Some(0), Some(1)]);
        assert!((matching_cost(&costs, &m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn anti_diagonal_is_optimal() {
        let costs = full(&[vec![4.0, 1.0], vec![2.0, 3.0]]);
        let m = solve(&costs);
        assert_eq!(m, vec![Some(1), Some(0)]);
        assert!((matching_cost(&costs, &m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn prefers_more_matches_over_cheaper_partial() {
        // matching both rows costs 101, matching only row 1 costs 1
        let costs = vec![
            vec![Some(100.0), None],
            vec![Some(1.0), Some(1.0)],
        ];
        let m = solve(&costs);
        assert_eq!(m, vec![Some(0), Some(1)]);
    }

    #[test]
    fn fully_inadmissible_matrix_matches_nothing() {
        let costs = vec![vec![None, None], vec![None, None]];
        assert_eq!(solve(&costs), vec![None, None]);
    }

    #[test]
    fn rectangular_both_orientations() {
        let wide = full(&[vec![5.0, 1.0, 9.0]]);
        assert_eq!(solve(&wide), vec![Some(1)]);
        let tall = full(&[vec![5.0], vec![1.0], vec![9.0]]);
        assert_eq!(solve(&tall), vec![None, Some(0), None]);
    }

    #[test]
    fn random_instances_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for trial in 0..60 {
            let rows = rng.gen_range(1..=5);
            let cols = rng.gen_range(1..=5);
            let costs: Vec<Vec<Option<f64>>> = (0..rows)
                .map(|_| {
                    (0..cols)
                        .map(|_| {
                            if rng.gen_bool(0.2) {
                                None
                            } else {
                                Some(rng.gen_range(0.0..10.0))
                            }
                        })
                        .collect()
                })
                .collect();
            let m = solve(&costs);
            let count = m.iter().filter(|x| x.is_some()).count();
            let cost = matching_cost(&costs, &m);
            let (best_count, best_cost) = brute_force(&costs);
            assert_eq!(count, best_count, "cardinality mismatch on trial {trial}");
            assert!(
                (cost - best_cost).abs() < 1e-9,
                "cost mismatch on trial {trial}: {cost} vs {best_cost}"
            );
            // one-to-one
            let mut seen = std::collections::BTreeSet::new();
            for j in m.into_iter().flatten() {
                assert!(seen.insert(j));
            }
        }
    }
}
