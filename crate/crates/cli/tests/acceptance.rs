//! End-to-end acceptance gate. Each test prints exactly one PASS/FAIL
//! line; tolerances live in the consts below and nowhere else.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use modeval::assignment::hungarian;
use modeval::detect::{dbscan, dip_statistic, unidip, DbscanParams, UnidipParams, NOISE};
use modeval::metrics::{
    average_precision, cross_entropy, froc_curve, kl_discretized, ks_two_sample, mmd2,
    wasserstein_1d, Bandwidth, DiscretizationSpec, KernelFamily, KernelSpec, MmdEstimator,
    ScoredCase,
};
use modeval::pipeline::{run_sweep, SweepParameter, SweepSpec};
use modeval::recommend::recommend;
use modeval::toybench::{
    build_cases, run_toy_benchmark, toy_eval_options, toy_fingerprint, ToyBenchConfig, TOY_EPS,
    TOY_MATCH_THRESHOLD, TOY_MIN_SAMPLES,
};
use modeval::{write_dataset, Availability, Fingerprint, PosteriorSamples, ReferenceGranularity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

/// Floor for the sharply bimodal predictor on the recall and AP scalars.
const MIN_DETECT_RECALL: f64 = 0.98;
const MIN_DETECT_AP: f64 = 0.98;
/// Window around the analytic mean-point rates (1/6 recall, 1/3 precision).
const RATE_TOL: f64 = 0.02;
/// Near-equality band for the conventional-error comparison on the
/// multi-root subset: the two predictors collapse to the same point
/// estimate there, so the paired difference is noise around zero.
const CONVENTIONAL_TOL: f64 = 5e-3;
/// Wall-clock budget for the full 2000-case benchmark, both predictors.
const MAX_BENCH_SECS: f64 = 120.0;
/// Exact-arithmetic oracles (assignment, W1, KS, AP).
const EXACT_TOL: f64 = 1e-12;
/// Kernel double sums accumulate over n*m terms; slightly looser.
const MMD_TOL: f64 = 1e-10;
const CROSS_ENTROPY_TOL: f64 = 0.02;
const KL_TOL: f64 = 1e-9;
/// Allowed miscount rate for the dip-recursion detector on clean shapes.
const MAX_UNIDIP_ERR_RATE: f64 = 0.05;

fn verdict(name: &str, detail: String, fails: Vec<String>) {
    if fails.is_empty() {
        println!("acceptance {name}: PASS ({detail})");
    } else {
        println!("acceptance {name}: FAIL ({})", fails.join("; "));
        panic!("{name} failed: {}", fails.join("; "));
    }
}

#[test]
fn toy_benchmark_contrast() {
    let mut fails = Vec::new();
    // operating point under test, pinned
    assert_eq!(TOY_EPS, 0.2);
    assert_eq!(TOY_MIN_SAMPLES, 20);
    assert_eq!(TOY_MATCH_THRESHOLD, 0.2);
    let cfg = ToyBenchConfig {
        cases: 2000,
        seed: 0,
        ..Default::default()
    };
    assert_eq!(cfg.component_spread, 0.05);

    let t0 = Instant::now();
    let res = run_toy_benchmark(&cfg).expect("benchmark run");
    let elapsed = t0.elapsed().as_secs_f64();

    let mm = &res.multimodal;
    let mp = &res.mean_point;
    let mm_recall = mm.report.scalar("recall").expect("multimodal recall");
    let mm_ap = mm.report.scalar("ap").expect("multimodal ap");
    let mp_recall = mp.report.scalar("recall").expect("mean-point recall");
    let mp_precision = mp.report.scalar("precision").expect("mean-point precision");
    // conventional single-point errors on the cases where the root is
    // not unique; restricting to n >= 2 removes the trivial n = 1 ties
    let err_mm = mm.conventional.mean_error_for(&[2, 3]).expect("n>=2 subset");
    let err_mp = mp.conventional.mean_error_for(&[2, 3]).expect("n>=2 subset");

    if mm_recall < MIN_DETECT_RECALL {
        fails.push(format!("multimodal recall {mm_recall:.4} < {MIN_DETECT_RECALL}"));
    }
    if mm_ap < MIN_DETECT_AP {
        fails.push(format!("multimodal ap {mm_ap:.4} < {MIN_DETECT_AP}"));
    }
    if (mp_recall - 1.0 / 6.0).abs() > RATE_TOL {
        fails.push(format!("mean-point recall {mp_recall:.4} not within {RATE_TOL} of 1/6"));
    }
    if (mp_precision - 1.0 / 3.0).abs() > RATE_TOL {
        fails.push(format!(
            "mean-point precision {mp_precision:.4} not within {RATE_TOL} of 1/3"
        ));
    }
    if err_mp > err_mm + CONVENTIONAL_TOL {
        fails.push(format!(
            "conventional error ranks the predictors apart: mean-point {err_mp:.6} vs multimodal {err_mm:.6}"
        ));
    }
    if elapsed > MAX_BENCH_SECS {
        fails.push(format!("took {elapsed:.0}s > {MAX_BENCH_SECS}s"));
    }

    verdict(
        "1/7 toy benchmark contrast",
        format!(
            "multimodal recall {mm_recall:.4} ap {mm_ap:.4}; mean-point recall {mp_recall:.4} \
             precision {mp_precision:.4}; conventional error {err_mp:.4} vs {err_mm:.4}; {elapsed:.0}s"
        ),
        fails,
    );
}

#[test]
fn froc_monotone_and_sweep_machinery() {
    let mut fails = Vec::new();

    // random scored datasets: recall and per-case FP rate must both be
    // monotone as the confidence threshold drops
    let mut rng = ChaCha8Rng::seed_from_u64(0xF20C);
    let mut curves = 0usize;
    for ds in 0..100 {
        let n_cases = rng.gen_range(1..=12);
        let mut cases = Vec::with_capacity(n_cases);
        for _ in 0..n_cases {
            let n_refs = rng.gen_range(1..=4usize);
            let n_preds = rng.gen_range(0..=6usize);
            let tp_count = rng.gen_range(0..=n_preds.min(n_refs));
            let scored_preds: Vec<(f64, bool)> = (0..n_preds)
                .map(|i| (rng.gen::<f64>(), i < tp_count))
                .collect();
            cases.push(ScoredCase { scored_preds, n_refs });
        }
        if cases.iter().all(|c| c.scored_preds.is_empty()) {
            continue; // nothing to sweep
        }
        let curve = froc_curve(&cases).expect("froc curve");
        curves += 1;
        for w in curve.windows(2) {
            if w[1].threshold >= w[0].threshold {
                fails.push(format!("dataset {ds}: thresholds not strictly decreasing"));
                break;
            }
            if w[1].recall < w[0].recall - EXACT_TOL {
                fails.push(format!("dataset {ds}: recall dropped as the threshold fell"));
                break;
            }
            let (f0, f1) = (w[0].fppi.unwrap_or(0.0), w[1].fppi.unwrap_or(0.0));
            if f1 < f0 - EXACT_TOL {
                fails.push(format!("dataset {ds}: fppi dropped as the threshold fell"));
                break;
            }
        }
        if curve.iter().any(|p| !(0.0..=1.0).contains(&p.recall)) {
            fails.push(format!("dataset {ds}: recall outside [0, 1]"));
        }
    }
    if curves < 90 {
        fails.push(format!("only {curves} non-degenerate datasets generated"));
    }

    // operating-point sweeps on a live dataset: raising the cluster size
    // floor can only lose modes, loosening the match radius can only
    // gain them
    let cases = build_cases(60, 5, &Default::default()).expect("sweep dataset");
    let opts = toy_eval_options(5, false);
    let spec = SweepSpec {
        parameter: SweepParameter::MinSamples,
        values: vec![3.0, 100.0, 340.0, 500.0],
    };
    let pts = run_sweep(&cases, &opts, &spec).expect("min_samples sweep");
    let recalls: Vec<f64> = pts
        .iter()
        .map(|p| *p.metrics.get("recall").expect("recall at sweep point"))
        .collect();
    if recalls.len() != 4 {
        fails.push(format!("min_samples sweep produced {} points, wanted 4", recalls.len()));
    }
    if recalls.first() != Some(&1.0) {
        fails.push(format!("recall at min_samples=3 is {:?}, wanted 1.0", recalls.first()));
    }
    if recalls.windows(2).any(|w| w[1] > w[0] + EXACT_TOL) {
        fails.push(format!("recall not non-increasing over min_samples: {recalls:?}"));
    }
    let spec = SweepSpec {
        parameter: SweepParameter::Threshold,
        values: vec![0.05, 0.2, 0.5],
    };
    let pts = run_sweep(&cases, &opts, &spec).expect("threshold sweep");
    let t_recalls: Vec<f64> = pts
        .iter()
        .map(|p| *p.metrics.get("recall").expect("recall at sweep point"))
        .collect();
    if t_recalls.windows(2).any(|w| w[1] < w[0] - EXACT_TOL) {
        fails.push(format!("recall not non-decreasing over threshold: {t_recalls:?}"));
    }

    verdict(
        "2/7 froc monotonicity and sweeps",
        format!(
            "{curves} random curves monotone; min_samples sweep recall {recalls:?}; \
             threshold sweep recall {t_recalls:?}"
        ),
        fails,
    );
}

/// Cardinality-first, then cheapest: enumerate every injective matching.
fn brute_force_assignment(costs: &[Vec<Option<f64>>]) -> (usize, f64) {
    fn go(
        row: usize,
        costs: &[Vec<Option<f64>>],
        used: &mut Vec<bool>,
        count: usize,
        total: f64,
        best: &mut (usize, f64),
    ) {
        if row == costs.len() {
            if count > best.0 || (count == best.0 && total < best.1) {
                *best = (count, total);
            }
            return;
        }
        go(row + 1, costs, used, count, total, best);
        for col in 0..used.len() {
            if !used[col] {
                if let Some(c) = costs[row][col] {
                    used[col] = true;
                    go(row + 1, costs, used, count + 1, total + c, best);
                    used[col] = false;
                }
            }
        }
    }
    let cols = costs.first().map_or(0, Vec::len);
    let mut best = (0usize, f64::INFINITY);
    go(0, costs, &mut vec![false; cols], 0, 0.0, &mut best);
    if best.0 == 0 {
        best.1 = 0.0;
    }
    best
}

#[test]
fn exact_metric_oracles() {
    let mut fails = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x43A1);

    // assignment solver vs exhaustive enumeration
    for trial in 0..200 {
        let rows = rng.gen_range(1..=5);
        let cols = rng.gen_range(1..=5);
        let costs: Vec<Vec<Option<f64>>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| {
                        if rng.gen_bool(0.25) {
                            None
                        } else {
                            Some(rng.gen_range(0.0..10.0))
                        }
                    })
                    .collect()
            })
            .collect();
        let matching = hungarian::solve(&costs);
        let count = matching.iter().flatten().count();
        let total = hungarian::matching_cost(&costs, &matching);
        let mut seen = BTreeSet::new();
        if !matching.iter().flatten().all(|j| seen.insert(*j)) {
            fails.push(format!("assignment trial {trial}: column used twice"));
            break;
        }
        let (best_count, best_total) = brute_force_assignment(&costs);
        if count != best_count || (total - best_total).abs() > EXACT_TOL {
            fails.push(format!(
                "assignment trial {trial}: got {count} pairs at {total}, optimum {best_count} at {best_total}"
            ));
            break;
        }
    }

    // 1-D Wasserstein vs the sorted-difference form (equal sizes)
    for trial in 0..150 {
        let n = rng.gen_range(1..=40);
        let a: Vec<f64> = (0..n).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..n).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal) + 1.0).collect();
        let got = wasserstein_1d(&a, &b).expect("w1");
        let mut sa = a.clone();
        let mut sb = b.clone();
        sa.sort_by(f64::total_cmp);
        sb.sort_by(f64::total_cmp);
        let want: f64 =
            sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        if (got - want).abs() > EXACT_TOL {
            fails.push(format!("w1 trial {trial}: {got} vs sorted-difference {want}"));
            break;
        }
    }

    // KS statistic vs the ECDF gap evaluated at every pooled point
    let fixed = ks_two_sample(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0]).expect("ks fixed");
    if (fixed.statistic - 1.0 / 3.0).abs() > EXACT_TOL {
        fails.push(format!("ks on the shifted triple: {} vs 1/3", fixed.statistic));
    }
    for trial in 0..150 {
        let n = rng.gen_range(1..=40);
        let m = rng.gen_range(1..=40);
        let lattice = rng.gen_bool(0.5);
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            let x: f64 = rng.sample(StandardNormal);
            if lattice {
                (x * 4.0).round() / 4.0 // force ties across the two sets
            } else {
                x
            }
        };
        let a: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let b: Vec<f64> = (0..m).map(|_| draw(&mut rng)).collect();
        let got = ks_two_sample(&a, &b).expect("ks").statistic;
        let ecdf = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x <= t).count() as f64 / xs.len() as f64;
        let want = a
            .iter()
            .chain(&b)
            .map(|&t| (ecdf(&a, t) - ecdf(&b, t)).abs())
            .fold(0.0, f64::max);
        if (got - want).abs() > EXACT_TOL {
            fails.push(format!("ks trial {trial}: {got} vs ecdf sup {want}"));
            break;
        }
    }

    // kernel discrepancy vs naive double sums, both estimators
    let sigma = 0.7;
    let kernel = KernelSpec {
        family: KernelFamily::Rbf,
        bandwidth: Bandwidth::Fixed(sigma),
    };
    for trial in 0..50 {
        let d = rng.gen_range(1..=3);
        let n = rng.gen_range(2..=20);
        let m = rng.gen_range(2..=20);
        let mk = |rng: &mut ChaCha8Rng, count: usize| -> Vec<Vec<f64>> {
            (0..count)
                .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect()
        };
        let xa = mk(&mut rng, n);
        let xb = mk(&mut rng, m);
        let k = |x: &[f64], y: &[f64]| -> f64 {
            let d2: f64 = x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum();
            (-d2 / (2.0 * sigma * sigma)).exp()
        };
        let sum_all = |xs: &[Vec<f64>], ys: &[Vec<f64>]| -> f64 {
            xs.iter().map(|x| ys.iter().map(|y| k(x, y)).sum::<f64>()).sum()
        };
        let sum_off = |xs: &[Vec<f64>]| -> f64 {
            let mut acc = 0.0;
            for (i, x) in xs.iter().enumerate() {
                for (j, y) in xs.iter().enumerate() {
                    if i != j {
                        acc += k(x, y);
                    }
                }
            }
            acc
        };
        let (nf, mf) = (n as f64, m as f64);
        let cross = sum_all(&xa, &xb);
        let naive_biased =
            sum_all(&xa, &xa) / (nf * nf) + sum_all(&xb, &xb) / (mf * mf) - 2.0 * cross / (nf * mf);
        let naive_unbiased = sum_off(&xa) / (nf * (nf - 1.0)) + sum_off(&xb) / (mf * (mf - 1.0))
            - 2.0 * cross / (nf * mf);
        let pa = PosteriorSamples::unweighted(xa).unwrap();
        let pb = PosteriorSamples::unweighted(xb).unwrap();
        let got_b = mmd2(&pa, &pb, &kernel, MmdEstimator::Biased).expect("mmd biased");
        let got_u = mmd2(&pa, &pb, &kernel, MmdEstimator::Unbiased).expect("mmd unbiased");
        if (got_b - naive_biased).abs() > MMD_TOL || (got_u - naive_unbiased).abs() > MMD_TOL {
            fails.push(format!(
                "mmd trial {trial}: biased {got_b} vs {naive_biased}, unbiased {got_u} vs {naive_unbiased}"
            ));
            break;
        }
    }

    // ranking metric on worked examples
    let ap1 = average_precision(&[(0.9, true), (0.8, true), (0.1, false)], 2).expect("ap");
    if (ap1 - 1.0).abs() > EXACT_TOL {
        fails.push(format!("ap with both hits ranked first: {ap1} vs 1"));
    }
    let ap2 = average_precision(&[(0.9, true), (0.8, false), (0.7, true)], 2).expect("ap");
    let want = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
    if (ap2 - want).abs() > EXACT_TOL {
        fails.push(format!("ap with an interleaved miss: {ap2} vs {want}"));
    }

    verdict(
        "3/7 exact metric oracles",
        "assignment x200, wasserstein x150, ks x150, mmd x50, ap worked examples".to_string(),
        fails,
    );
}

#[test]
fn statistical_sanity() {
    let mut fails = Vec::new();

    // cross entropy of a standard normal against its own density:
    // differential entropy 0.5 ln(2 pi e)
    let mut rng = ChaCha8Rng::seed_from_u64(0xCE);
    let logs: Vec<f64> = (0..100_000)
        .map(|_| {
            let x: f64 = rng.sample(StandardNormal);
            -0.5 * x * x - 0.5 * (2.0 * PI).ln()
        })
        .collect();
    let ce = cross_entropy(&logs).expect("cross entropy");
    let want_ce = 0.5 * ((2.0 * PI).ln() + 1.0);
    if (ce - want_ce).abs() > CROSS_ENTROPY_TOL {
        fails.push(format!("cross entropy {ce:.5} vs {want_ce:.5}"));
    }

    // two-bin histogram KL with hand-countable masses:
    // p = (1/2, 1/2), q = (1/4, 3/4)
    let p = PosteriorSamples::unweighted(vec![vec![0.25], vec![0.75]]).unwrap();
    let q = PosteriorSamples::unweighted(vec![vec![0.2], vec![0.6], vec![0.7], vec![0.8]]).unwrap();
    let spec = DiscretizationSpec::uniform(1, 2, 0.0, 1.0);
    let kl = kl_discretized(&p, &q, &spec).expect("kl");
    let want_kl = 0.5 * 2.0f64.ln() + 0.5 * (2.0 / 3.0f64).ln();
    if (kl.value - want_kl).abs() > KL_TOL {
        fails.push(format!("two-bin kl {} vs {want_kl}", kl.value));
    }
    if kl.zero_q_bins != 0 {
        fails.push(format!("unexpected empty q bins: {}", kl.zero_q_bins));
    }

    // the two-point dip is exactly 1/4, the universal floor is 1/(2n)
    // and the ceiling 1/2
    let d2 = dip_statistic(&[0.0, 1.0]).expect("dip of a pair");
    if d2 != 0.25 {
        fails.push(format!("dip of two points: {d2} vs exactly 0.25"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1B);
    for trial in 0..1000 {
        let n = rng.gen_range(2..=200);
        let shape = rng.gen_range(0..3);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let x: f64 = match shape {
                    0 => rng.gen(),
                    1 => rng.sample(StandardNormal),
                    _ => {
                        let side = if rng.gen_bool(0.5) { -2.0 } else { 2.0 };
                        side + rng.sample::<f64, _>(StandardNormal) * 0.3
                    }
                };
                if n >= 8 && trial % 4 == 0 {
                    (x * 5.0).round() / 5.0 // rounded variant exercises ties
                } else {
                    x
                }
            })
            .collect();
        let d = dip_statistic(&xs).expect("dip");
        let floor = 1.0 / (2.0 * n as f64);
        if !(floor - 1e-15..=0.5 + 1e-15).contains(&d) {
            fails.push(format!("trial {trial}: dip {d} outside [{floor}, 0.5] at n={n}"));
            break;
        }
    }

    verdict(
        "4/7 statistical sanity",
        format!("cross entropy {ce:.4}, two-bin kl {:.4}, dip bounds x1000", kl.value),
        fails,
    );
}

/// Density-connectivity reference clustering: core points are those with
/// min_samples neighbors (self included), clusters are the connected
/// components of the core-to-core adjacency, and every non-core point
/// joins the earliest-seeded component it is adjacent to. Component
/// numbering follows the smallest core index, which is also the order
/// the scan-order implementation seeds them in.
fn dbscan_reference(points: &[Vec<f64>], eps: f64, min_samples: usize) -> Vec<i32> {
    let n = points.len();
    let eps2 = eps * eps;
    let dist2 = |i: usize, j: usize| -> f64 {
        points[i]
            .iter()
            .zip(&points[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist2(i, j) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|ns| ns.len() >= min_samples).collect();

    // flood-fill core components in ascending index order
    let mut comp = vec![usize::MAX; n];
    let mut next = 0usize;
    for i in 0..n {
        if !core[i] || comp[i] != usize::MAX {
            continue;
        }
        let id = next;
        next += 1;
        let mut stack = vec![i];
        comp[i] = id;
        while let Some(p) = stack.pop() {
            for &q in &neighbors[p] {
                if core[q] && comp[q] == usize::MAX {
                    comp[q] = id;
                    stack.push(q);
                }
            }
        }
    }

    (0..n)
        .map(|i| {
            if core[i] {
                comp[i] as i32
            } else {
                neighbors[i]
                    .iter()
                    .filter(|&&j| core[j])
                    .map(|&j| comp[j] as i32)
                    .min()
                    .unwrap_or(NOISE)
            }
        })
        .collect()
}

#[test]
fn clustering_oracles() {
    let mut fails = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(0xDB5C);
    for trial in 0..100 {
        let n = rng.gen_range(5..=300);
        let d = rng.gen_range(1..=3);
        let blobs = rng.gen_range(1..=4);
        let centers: Vec<Vec<f64>> = (0..blobs)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let spread = rng.gen_range(0.05..0.3);
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.7) {
                    let c = &centers[rng.gen_range(0..blobs)];
                    c.iter()
                        .map(|&ck| ck + spread * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                } else {
                    (0..d).map(|_| rng.gen_range(-1.5..1.5)).collect()
                }
            })
            .collect();
        let eps = rng.gen_range(0.05..0.6);
        let min_samples = rng.gen_range(1..=12);

        let want = dbscan_reference(&points, eps, min_samples);
        let samples = PosteriorSamples::unweighted(points).unwrap();
        let got = dbscan(&samples, &DbscanParams { eps, min_samples }).expect("dbscan");
        if got.labels() != want.as_slice() {
            let diff = got
                .labels()
                .iter()
                .zip(&want)
                .filter(|(a, b)| a != b)
                .count();
            fails.push(format!(
                "dbscan trial {trial} (n={n} d={d} eps={eps:.3} min_samples={min_samples}): \
                 {diff} labels differ from the reference clustering"
            ));
            break;
        }
    }

    // dip-recursion detector on clean shapes, counted over 200 draws each
    let params = UnidipParams::default();
    let mut bimodal_errs = 0usize;
    let mut unimodal_errs = 0usize;
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lo = Normal::new(0.2, 0.02).unwrap();
        let hi = Normal::new(0.8, 0.02).unwrap();
        let mut pts: Vec<Vec<f64>> = (0..250).map(|_| vec![lo.sample(&mut rng)]).collect();
        pts.extend((0..250).map(|_| vec![hi.sample(&mut rng)]));
        let s = PosteriorSamples::new(pts, None).unwrap();
        if unidip(&s, &params).expect("unidip").n_clusters() != 2 {
            bimodal_errs += 1;
        }
        let mid = Normal::new(0.5, 0.05).unwrap();
        let pts: Vec<Vec<f64>> = (0..500).map(|_| vec![mid.sample(&mut rng)]).collect();
        let s = PosteriorSamples::new(pts, None).unwrap();
        if unidip(&s, &params).expect("unidip").n_clusters() != 1 {
            unimodal_errs += 1;
        }
    }
    if (bimodal_errs as f64) / 200.0 > MAX_UNIDIP_ERR_RATE {
        fails.push(format!("bimodal miscount rate {bimodal_errs}/200"));
    }
    if (unimodal_errs as f64) / 200.0 > MAX_UNIDIP_ERR_RATE {
        fails.push(format!("unimodal miscount rate {unimodal_errs}/200"));
    }

    verdict(
        "5/7 clustering oracles",
        format!(
            "dbscan matched the density-connectivity reference x100; \
             dip recursion misses {bimodal_errs}/200 bimodal, {unimodal_errs}/200 unimodal"
        ),
        fails,
    );
}

#[test]
fn recommender_totality() {
    let mut fails = Vec::new();

    let all = Fingerprint::enumerate_all();
    if all.len() != 256 {
        fails.push(format!("{} fingerprints enumerated, wanted 256", all.len()));
    }
    let distinct: BTreeSet<String> = all
        .iter()
        .map(|fp| serde_json::to_string(fp).unwrap())
        .collect();
    if distinct.len() != all.len() {
        fails.push("duplicate fingerprints in the enumeration".to_string());
    }

    for fp in &all {
        let plan = recommend(fp);
        let has_detection = plan
            .detection_plan
            .as_ref()
            .map_or(false, |d| !d.classification_metrics.is_empty());
        if plan.distribution_metrics.is_empty() && !has_detection {
            fails.push(format!("empty plan for {fp:?}"));
            continue;
        }
        let dist_names: Vec<&str> =
            plan.distribution_metrics.iter().map(|m| m.name.as_str()).collect();
        if dist_names.len() != dist_names.iter().collect::<BTreeSet<_>>().len() {
            fails.push(format!("duplicate distribution metrics for {fp:?}"));
        }
        if dist_names.contains(&"cross_entropy") && !fp.log_density.is_available() {
            fails.push(format!("cross entropy planned without a density for {fp:?}"));
        }
        if dist_names.contains(&"kl_discretized") && !fp.discretization.is_available() {
            fails.push(format!("discretized kl planned without a grid for {fp:?}"));
        }
        if (dist_names.contains(&"ks_two_sample") || dist_names.contains(&"wasserstein_1d"))
            && !fp.univariate
        {
            fails.push(format!("univariate-only metric planned for {fp:?}"));
        }
        if plan.detection_plan.is_some() != fp.reference_granularity.provides_modes() {
            fails.push(format!("detection plan presence disagrees with granularity for {fp:?}"));
        }
        if let Some(det) = &plan.detection_plan {
            let cls: Vec<&str> = det.classification_metrics.iter().map(String::as_str).collect();
            if cls.len() != cls.iter().collect::<BTreeSet<_>>().len() {
                fails.push(format!("duplicate classification metrics for {fp:?}"));
            }
            if det.localization_criterion.is_empty() || det.assignment_strategy.is_empty() {
                fails.push(format!("detection plan missing a primary choice for {fp:?}"));
            }
            if !cls.contains(&"recall") {
                fails.push(format!("recall missing from a detection plan for {fp:?}"));
            }
            let exact_fp = fp.reference_granularity.is_exhaustive()
                || fp.resimulation.is_available();
            if det.fppi_upper_bound == exact_fp {
                fails.push(format!("upper-bound flag disagrees with the fingerprint for {fp:?}"));
            }
            if cls.contains(&"precision") != exact_fp {
                fails.push(format!("precision availability disagrees for {fp:?}"));
            }
            if cls.contains(&"f_beta") && !(cls.contains(&"precision") && cls.contains(&"recall"))
            {
                fails.push(format!("f_beta planned without its factors for {fp:?}"));
            }
            if (cls.contains(&"ap") || cls.contains(&"froc") || cls.contains(&"calibration_curve"))
                && !fp.confidence_scores.is_available()
            {
                fails.push(format!("score-based metric planned without scores for {fp:?}"));
            }
        }
        if plan.notes.is_empty() {
            fails.push(format!("no rationale recorded for {fp:?}"));
        }
    }

    // anchored examples: an incomplete mode list without a forward model,
    // a raw posterior with a density, and the toy problem
    let partial = Fingerprint {
        reference_granularity: ReferenceGranularity::ModesNonExhaustive,
        resimulation: Availability::Unavailable,
        confidence_scores: Availability::Available,
        log_density: Availability::Unavailable,
        discretization: Availability::Unavailable,
        univariate: false,
        uncertainty_required: false,
    };
    let det = recommend(&partial).detection_plan.expect("detection plan");
    let cls: Vec<&str> = det.classification_metrics.iter().map(String::as_str).collect();
    if cls != ["recall", "ap", "froc", "fppi"] {
        fails.push(format!("incomplete-list plan picked {cls:?}"));
    }
    if !det.fppi_upper_bound {
        fails.push("incomplete-list plan not flagged as an upper bound".to_string());
    }

    let density = Fingerprint {
        reference_granularity: ReferenceGranularity::PosteriorUnlabeled,
        resimulation: Availability::Unavailable,
        confidence_scores: Availability::Unavailable,
        log_density: Availability::Available,
        discretization: Availability::Unavailable,
        univariate: false,
        uncertainty_required: false,
    };
    let plan = recommend(&density);
    if !plan.distribution_metrics.iter().any(|m| m.name == "cross_entropy") {
        fails.push("posterior-with-density plan lacks cross entropy".to_string());
    }

    let toy = recommend(&toy_fingerprint());
    let det = toy.detection_plan.expect("toy detection plan");
    let cls: Vec<&str> = det.classification_metrics.iter().map(String::as_str).collect();
    for needed in ["recall", "precision", "f_beta", "ap"] {
        if !cls.contains(&needed) {
            fails.push(format!("toy plan lacks {needed}"));
        }
    }
    if cls.contains(&"calibration_curve") {
        fails.push("toy plan includes calibration despite no uncertainty requirement".to_string());
    }
    if det.fppi_upper_bound {
        fails.push("toy plan flagged as an upper bound despite the exhaustive list".to_string());
    }
    if !det.matched_mode_distance {
        fails.push("toy plan omits matched-mode distances".to_string());
    }
    if !toy.distribution_metrics.is_empty() {
        fails.push("toy plan plans distribution metrics without a reference posterior".to_string());
    }

    verdict(
        "6/7 recommender totality",
        "256/256 non-empty consistent plans; three anchored fingerprints as expected".to_string(),
        fails,
    );
}

#[test]
fn cli_evaluate_is_deterministic() {
    let mut fails = Vec::new();

    let dir = tempfile::tempdir().expect("tempdir");
    let ds = dir.path().join("cases.jsonl");
    let cases = build_cases(32, 9, &Default::default()).expect("dataset");
    write_dataset(&ds, &cases).expect("write dataset");

    let cfg_path = dir.path().join("run.json");
    let cfg = serde_json::json!({
        "dataset": ds,
        "eval": serde_json::to_value(toy_eval_options(9, false)).unwrap(),
    });
    std::fs::write(&cfg_path, serde_json::to_vec_pretty(&cfg).unwrap()).expect("write config");

    let mut reports = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(env!("CARGO_BIN_EXE_modeval"))
            .args(["evaluate", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .output()
            .expect("spawn evaluate");
        if !status.status.success() {
            fails.push(format!(
                "run {run} exited with {:?}: {}",
                status.status.code(),
                String::from_utf8_lossy(&status.stderr)
            ));
            continue;
        }
        reports.push((
            std::fs::read(out.join("run.report.json")).expect("report bytes"),
            std::fs::read(out.join("run.froc.csv")).expect("curve bytes"),
        ));
    }
    if reports.len() == 2 {
        if reports[0].0.is_empty() {
            fails.push("empty report body".to_string());
        }
        if reports[0].0 != reports[1].0 {
            fails.push("report bytes differ between identical runs".to_string());
        }
        if reports[0].1 != reports[1].1 {
            fails.push("curve bytes differ between identical runs".to_string());
        }
    }

    verdict(
        "7/7 cli determinism",
        format!(
            "two evaluate runs, report bodies identical ({} bytes)",
            reports.first().map_or(0, |r| r.0.len())
        ),
        fails,
    );
}
