//! Minimum-cost assignment between estimated and true source tuples.
//! Exhaustive for up to 6 sources, Hungarian (shortest augmenting path)
//! above that.

use crate::linalg::RMatrix;

const EXHAUSTIVE_LIMIT: usize = 6;

/// Column assignment minimizing `Σ_i cost[(i, perm[i])]` for a square cost
/// matrix. Returns `perm` with `perm[i]` the column matched to row `i`.
pub fn min_cost_assignment(cost: &RMatrix) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    if n == 0 {
        return Vec::new();
    }
    if n <= EXHAUSTIVE_LIMIT {
        exhaustive(cost)
    } else {
        hungarian(cost)
    }
}

fn exhaustive(cost: &RMatrix) -> Vec<usize> {
    let n = cost.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = f64::INFINITY;
    // Heap's algorithm over all permutations.
    let mut stack = vec![0usize; n];
    let eval = |p: &[usize], best: &mut Vec<usize>, best_cost: &mut f64| {
        let total: f64 = p.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
        if total < *best_cost {
            *best_cost = total;
            best.copy_from_slice(p);
        }
    };
    eval(&perm, &mut best, &mut best_cost);
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            eval(&perm, &mut best, &mut best_cost);
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    best
}

/// O(n³) shortest-augmenting-path Hungarian algorithm with potentials.
fn hungarian(cost: &RMatrix) -> Vec<usize> {
    let n = cost.nrows();
    // 1-based internal arrays; p[j] = row assigned to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
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
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    perm
}

/// Matches estimated frequency columns to true ones by minimum total squared
/// error over all modes. Returns `(perm, total)` with `perm[i]` the estimate
/// column assigned to true source `i` and `total` the summed squared error.
pub fn match_columns(truth: &RMatrix, est: &RMatrix) -> (Vec<usize>, f64) {
    assert_eq!(truth.shape(), est.shape());
    let d = truth.ncols();
    let cost = RMatrix::from_fn(d, d, |i, j| {
        (0..truth.nrows())
            .map(|r| {
                let e = truth[(r, i)] - est[(r, j)];
                e * e
            })
            .sum()
    });
    let perm = min_cost_assignment(&cost);
    let total = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    (perm, total)
}
