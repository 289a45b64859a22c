//! Slow reference computations used to cross-check the fast kernels.
//!
//! Nothing here shares code with the routines it verifies. The self-test
//! command and the test suites both depend on these.

/// Simplex projection by enumerating every candidate support set.
///
/// For a support `S` the KKT system gives `p_S = v_S - (sum v_S - 1) / |S|`
/// and zero elsewhere; among the candidates with `p >= 0` the closest to `v`
/// is the projection. Exponential in `v.len()`, so keep it small (<= 16).
pub fn simplex_projection_bruteforce(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    assert!((1..=16).contains(&m), "brute force supports 1..=16 coordinates");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1u32 << m) {
        let support: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let s: f64 = support.iter().map(|&k| v[k]).sum();
        let shift = (s - 1.0) / support.len() as f64;
        let mut p = vec![0.0; m];
        let mut feasible = true;
        for &k in &support {
            p[k] = v[k] - shift;
            if p[k] < -1e-14 {
                feasible = false;
                break;
            }
        }
        if !feasible {
            continue;
        }
        for x in p.iter_mut() {
            *x = x.max(0.0);
        }
        let dist: f64 = p.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, p));
        }
    }
    best.expect("some support is always feasible").1
}

/// Empirical CVaR at level `alpha` of `values` under probability weights `p`:
/// the mean of the upper `1 - alpha` tail, splitting the boundary atom.
pub fn cvar_sorted(values: &[f64], p: &[f64], alpha: f64) -> f64 {
    assert_eq!(values.len(), p.len());
    let tail = 1.0 - alpha;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut remaining = tail;
    let mut acc = 0.0;
    for &k in &order {
        if remaining <= 0.0 {
            break;
        }
        let take = p[k].min(remaining);
        acc += take * values[k];
        remaining -= take;
    }
    acc / tail
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            if n - j < k - cur.len() {
                break;
            }
            cur.push(j);
            rec(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}
