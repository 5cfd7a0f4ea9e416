//! The dip statistic of unimodality: the sup-norm distance between an
//! empirical CDF and the closest unimodal CDF. Computed exactly by the
//! classical greatest-convex-minorant / least-concave-majorant cycling
//! construction, in O(n log n) after sorting. The returned value always
//! lies in [1/(2n), 1/2]; 1/(2n) is the floor any n-point staircase admits.
//!
//! Significance is assessed against the uniform null by Monte Carlo: null
//! dip distributions are tabulated per sample size from a fixed internal
//! seed, so p-values are deterministic for a given (n, draws).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numeric::splitmix64;

/// Dip of an arbitrary univariate sample (need not be sorted). n >= 2.
pub fn dip_statistic(values: &[f64]) -> Result<f64> {
    let (dip, _, _) = dip_with_modal_interval_unsorted(values)?;
    Ok(dip)
}

/// Dip plus the modal interval the fit converged to, as inclusive indices
/// into the ascending-sorted sample.
pub fn dip_with_modal_interval(sorted: &[f64]) -> Result<(f64, usize, usize)> {
    if sorted.len() < 2 {
        return Err(Error::EmptyInput("dip statistic needs at least 2 samples".into()));
    }
    if sorted.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Numeric("dip input must be sorted ascending".into()));
    }
    Ok(dip_sorted(sorted))
}

fn dip_with_modal_interval_unsorted(values: &[f64]) -> Result<(f64, usize, usize)> {
    if values.len() < 2 {
        return Err(Error::EmptyInput("dip statistic needs at least 2 samples".into()));
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("dip input contains a non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(dip_sorted(&sorted))
}

/// Core algorithm on sorted data. Distances are tracked in units of
/// 1/(2n) steps and rescaled at the end.
fn dip_sorted(x: &[f64]) -> (f64, usize, usize) {
    let n = x.len();
    let scale = 1.0 / (2.0 * n as f64);
    if x[n - 1] == x[0] {
        // Degenerate sample: report the floor with the full interval.
        return (scale, 0, n - 1);
    }

    let fidx = |a: usize, b: usize| (a as i64 - b as i64) as f64;

    // mn[j]: previous change point of the convex minorant through j.
    let mut mn = vec![0usize; n];
    for j in 1..n {
        mn[j] = j - 1;
        loop {
            let mnj = mn[j];
            if mnj == 0 {
                break;
            }
            let mnmnj = mn[mnj];
            if (x[j] - x[mnj]) * fidx(mnj, mnmnj) < (x[mnj] - x[mnmnj]) * fidx(j, mnj) {
                break;
            }
            mn[j] = mnmnj;
        }
    }
    // mj[k]: next change point of the concave majorant through k.
    let mut mj = vec![0usize; n];
    mj[n - 1] = n - 1;
    for k in (0..n - 1).rev() {
        mj[k] = k + 1;
        loop {
            let mjk = mj[k];
            if mjk == n - 1 {
                break;
            }
            let mjmjk = mj[mjk];
            if (x[k] - x[mjk]) * fidx(mjk, mjmjk) < (x[mjk] - x[mjmjk]) * fidx(k, mjk) {
                break;
            }
            mj[k] = mjmjk;
        }
    }

    let mut low = 0usize;
    let mut high = n - 1;
    let mut dip = 1.0; // floor in step units; final value is dip * scale
    let mut gcm = vec![0usize; n + 1];
    let mut lcm = vec![0usize; n + 1];

    loop {
        // Convex minorant change points walking from high down to low.
        gcm[0] = high;
        let mut l_gcm = 1;
        while gcm[l_gcm - 1] > low {
            gcm[l_gcm] = mn[gcm[l_gcm - 1]];
            l_gcm += 1;
        }
        // Concave majorant change points from low up to high.
        lcm[0] = low;
        let mut l_lcm = 1;
        while lcm[l_lcm - 1] < high {
            lcm[l_lcm] = mj[lcm[l_lcm - 1]];
            l_lcm += 1;
        }

        // Largest vertical gap between the two fits, and where it sits.
        let mut d = 0.0;
        let mut ig = l_gcm - 1; // gcm position of the modal-interval low end
        let mut ih = l_lcm - 1; // lcm position of the modal-interval high end
        if l_gcm != 2 || l_lcm != 2 {
            let mut ix = l_gcm as i64 - 2;
            let mut iv = 1i64;
            loop {
                let gcmix = gcm[ix as usize];
                let lcmiv = lcm[iv as usize];
                if gcmix > lcmiv {
                    // next change point comes from the majorant side
                    let gcmi1 = gcm[ix as usize + 1];
                    let dx = fidx(lcmiv, gcmi1) + 1.0
                        - (x[lcmiv] - x[gcmi1]) * fidx(gcmix, gcmi1) / (x[gcmix] - x[gcmi1]);
                    let iv_old = iv;
                    iv += 1;
                    if dx >= d {
                        d = dx;
                        ig = ix as usize + 1;
                        ih = iv_old as usize;
                    }
                } else {
                    // next change point comes from the minorant side
                    let lcmiv1 = lcm[iv as usize - 1];
                    let dx = (x[gcmix] - x[lcmiv1]) * fidx(lcmiv, lcmiv1)
                        / (x[lcmiv] - x[lcmiv1])
                        - (fidx(gcmix, lcmiv1) - 1.0);
                    let ix_old = ix;
                    ix -= 1;
                    if dx >= d {
                        d = dx;
                        ig = ix_old as usize;
                        ih = iv as usize;
                    }
                }
                if ix < 0 {
                    ix = 0;
                }
                if iv as usize > l_lcm - 1 {
                    iv = l_lcm as i64 - 1;
                }
                if gcm[ix as usize] == lcm[iv as usize] {
                    break;
                }
            }
        } else {
            d = 1.0;
        }

        if d < dip {
            break;
        }

        // Largest ECDF deviation from the minorant left of the modal
        // interval; each visited chord contributes at least one step.
        let mut dip_l = 0.0;
        for j in ig..l_gcm.saturating_sub(1) {
            let mut max_t = 1.0;
            let (jb, je) = (gcm[j + 1], gcm[j]);
            if je > jb + 1 && x[je] != x[jb] {
                let c = fidx(je, jb) / (x[je] - x[jb]);
                for i in jb..=je {
                    let t = fidx(i, jb) + 1.0 - (x[i] - x[jb]) * c;
                    if t > max_t {
                        max_t = t;
                    }
                }
            }
            if dip_l < max_t {
                dip_l = max_t;
            }
        }
        // Mirror image against the majorant right of the modal interval.
        let mut dip_u = 0.0;
        for j in ih..l_lcm.saturating_sub(1) {
            let mut max_t = 1.0;
            let (jb, je) = (lcm[j], lcm[j + 1]);
            if je > jb + 1 && x[je] != x[jb] {
                let c = fidx(je, jb) / (x[je] - x[jb]);
                for i in jb..=je {
                    let t = (x[i] - x[jb]) * c - (fidx(i, jb) - 1.0);
                    if t > max_t {
                        max_t = t;
                    }
                }
            }
            if dip_u < max_t {
                dip_u = max_t;
            }
        }

        let dip_new = dip_l.max(dip_u);
        if dip < dip_new {
            dip = dip_new;
        }
        // Narrow to the current modal interval and iterate.
        if low == gcm[ig] && high == lcm[ih] {
            break;
        }
        low = gcm[ig];
        high = lcm[ih];
    }

    (dip * scale, low, high)
}

type NullCache = Mutex<HashMap<(usize, usize), Arc<Vec<f64>>>>;

fn null_cache() -> &'static NullCache {
    static CACHE: OnceLock<NullCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Sorted dip values of `draws` uniform samples of size n, generated from
/// a fixed internal seed so repeated calls agree bit for bit.
fn null_distribution(n: usize, draws: usize) -> Arc<Vec<f64>> {
    if let Some(hit) = null_cache().lock().unwrap().get(&(n, draws)) {
        return hit.clone();
    }
    let seed = splitmix64(splitmix64(0x6e70_1d1b_u64 ^ (n as u64)) ^ (draws as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dips = Vec::with_capacity(draws);
    let mut buf = vec![0.0f64; n];
    for _ in 0..draws {
        for b in buf.iter_mut() {
            *b = rng.gen::<f64>();
        }
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        dips.push(dip_sorted(&buf).0);
    }
    dips.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let arc = Arc::new(dips);
    null_cache()
        .lock()
        .unwrap()
        .insert((n, draws), arc.clone());
    arc
}

/// Monte Carlo p-value of an observed dip against the uniform null of the
/// same sample size: (1 + #{null >= observed}) / (1 + draws).
pub fn uniform_null_pvalue(observed_dip: f64, n: usize, draws: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::EmptyInput("dip p-value needs n >= 2".into()));
    }
    if draws == 0 {
        return Err(Error::Config("dip p-value needs at least one null draw".into()));
    }
    let null = null_distribution(n, draws);
    // first index with null[i] >= observed
    let idx = null.partition_point(|&v| v < observed_dip);
    let ge = draws - idx;
    Ok((1.0 + ge as f64) / (1.0 + draws as f64))
}
