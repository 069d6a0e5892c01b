//! Brute-force reference computations that share no code path with the
//! production solvers: simplex grids with zoom passes, closed forms written
//! out independently, and seeded random instances.

use rand::Rng;
use rand_chacha::ChaCha20Rng;

/// Points `c / resolution` for every composition `c` of `resolution` into `k` parts.
pub fn simplex_grid(k: usize, resolution: usize) -> Vec<Vec<f64>> {
    fn rec(left: usize, idx: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx + 1 == cur.len() {
            cur[idx] = left;
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur[idx] = c;
            rec(left - c, idx + 1, cur, out);
        }
    }
    let mut raw = Vec::new();
    rec(resolution, 0, &mut vec![0; k], &mut raw);
    let inv = 1.0 / resolution as f64;
    raw.into_iter()
        .map(|c| c.iter().map(|&v| v as f64 * inv).collect())
        .collect()
}

/// Minimum of `f` over the probability simplex in `k` symbols: a uniform grid
/// followed by `zooms` local grids of `local` points per free coordinate,
/// each centred on the incumbent and spanning two cells of the previous grid.
pub fn simplex_min(
    k: usize,
    resolution: usize,
    zooms: usize,
    local: usize,
    f: impl Fn(&[f64]) -> f64,
) -> (f64, Vec<f64>) {
    let mut best = (f64::INFINITY, vec![1.0 / k as f64; k]);
    for p in simplex_grid(k, resolution) {
        let v = f(&p);
        if v < best.0 {
            best = (v, p);
        }
    }
    let mut cell = 1.0 / resolution as f64;
    for _ in 0..zooms {
        let centre = best.1.clone();
        let half = 2.0 * cell;
        let step = 2.0 * half / (local - 1) as f64;
        let mut idx = vec![0usize; k - 1];
        'outer: loop {
            let mut p = vec![0.0; k];
            let mut rest = 1.0;
            let mut ok = true;
            for i in 0..k - 1 {
                p[i] = centre[i] - half + step * idx[i] as f64;
                if p[i] < 0.0 {
                    ok = false;
                }
                rest -= p[i];
            }
            p[k - 1] = rest;
            if ok && rest >= 0.0 {
                let v = f(&p);
                if v < best.0 {
                    best = (v, p);
                }
            }
            for i in 0..k - 1 {
                idx[i] += 1;
                if idx[i] < local {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        cell = step;
    }
    best
}

pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.log2()).sum()
}

pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return f64::INFINITY;
            }
            d += a * (a / b).log2();
        }
    }
    d.max(0.0)
}

/// Sibson's closed form `α/(α−1) log2 Σ_y (Σ_x p(x) W(y|x)^α)^{1/α}`.
pub fn sibson_renyi(alpha: f64, p: &[f64], w: &[Vec<f64>]) -> f64 {
    let ny = w[0].len();
    let total: f64 = (0..ny)
        .map(|y| {
            let inner: f64 = p.iter().zip(w).map(|(&px, row)| px * row[y].powf(alpha)).sum();
            inner.powf(1.0 / alpha)
        })
        .sum();
    alpha / (alpha - 1.0) * total.log2()
}

/// Grid value of `min_Q D(Q‖P_Y) + E_Q[f]`.
pub fn gibbs_grid(f: &[f64], py: &[f64]) -> f64 {
    let k = py.len();
    let res = if k <= 2 { 2000 } else { 200 };
    simplex_min(k, res, 4, 41, |q| {
        kl(q, py) + q.iter().zip(f).map(|(a, b)| a * b).sum::<f64>()
    })
    .0
}

/// Grid value of `min_{V̄} D(V̄‖W̄|Q_Y) + λ E_{Q_Y V̄}[ι]`, which separates
/// over output symbols. `backward[y]` and `iota[y]` are indexed by input.
pub fn tilted_grid(lambda: f64, qy: &[f64], backward: &[Vec<f64>], iota: &[Vec<f64>]) -> f64 {
    qy.iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(y, &w)| {
            let k = backward[y].len();
            let res = if k <= 2 { 2000 } else { 200 };
            let (v, _) = simplex_min(k, res, 4, 41, |vb| {
                let penalty: f64 = vb
                    .iter()
                    .zip(&iota[y])
                    .filter(|(&a, _)| a > 0.0)
                    .map(|(&a, &i)| a * i)
                    .sum();
                kl(vb, &backward[y]) + lambda * penalty
            });
            w * v
        })
        .sum()
}

fn h2(a: f64) -> f64 {
    entropy(&[a, 1.0 - a])
}

fn d2(a: f64, b: f64) -> f64 {
    kl(&[a, 1.0 - a], &[b, 1.0 - b])
}

/// Grid value of `min { D(V‖W|q) : H(V|q) ≥ H(W|q) + s }` for binary
/// alphabets: a `cells × cells` grid over `(V(0|0), V(0|1))`, then the same
/// grid again on a window of ±3 cells around the best point.
pub fn inner_out_grid(q: [f64; 2], w: [[f64; 2]; 2], s: f64, cells: usize) -> f64 {
    let target = q[0] * h2(w[0][0]) + q[1] * h2(w[1][0]) + s;
    let eval = |a: f64, b: f64| -> f64 {
        if q[0] * h2(a) + q[1] * h2(b) < target {
            return f64::INFINITY;
        }
        q[0] * d2(a, w[0][0]) + q[1] * d2(b, w[1][0])
    };
    let scan = |lo: [f64; 2], hi: [f64; 2]| -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.5, 0.5);
        for i in 0..cells {
            let a = lo[0] + (hi[0] - lo[0]) * i as f64 / (cells - 1) as f64;
            for j in 0..cells {
                let b = lo[1] + (hi[1] - lo[1]) * j as f64 / (cells - 1) as f64;
                let v = eval(a, b);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        best
    };
    let (v, a, b) = scan([0.0, 0.0], [1.0, 1.0]);
    if !v.is_finite() {
        return v;
    }
    let h = 3.0 / (cells - 1) as f64;
    let (v2, _, _) = scan(
        [(a - h).max(0.0), (b - h).max(0.0)],
        [(a + h).min(1.0), (b + h).min(1.0)],
    );
    v.min(v2)
}

/// `min H(Y|X)` over couplings with row sums `a` and column sums `b`, by
/// enumerating every basis of the transportation system and solving it with
/// Gaussian elimination.
pub fn min_coupling_cond_entropy(a: &[f64], b: &[f64]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let k = m + n - 1;
    let cells = m * n;
    // Equations: all row sums and all but the last column sum.
    let rhs: Vec<f64> = a.iter().chain(&b[..n - 1]).copied().collect();
    let coeff = |eq: usize, cell: usize| -> f64 {
        let (r, c) = (cell / n, cell % n);
        if eq < m {
            (r == eq) as u8 as f64
        } else {
            (c == eq - m) as u8 as f64
        }
    };
    let mut best = f64::INFINITY;
    let mut subset: Vec<usize> = (0..k).collect();
    loop {
        let mut mat: Vec<Vec<f64>> = (0..k)
            .map(|eq| {
                let mut row: Vec<f64> = subset.iter().map(|&c| coeff(eq, c)).collect();
                row.push(rhs[eq]);
                row
            })
            .collect();
        let mut ok = true;
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&i, &j| mat[i][col].abs().partial_cmp(&mat[j][col].abs()).unwrap())
                .unwrap();
            if mat[piv][col].abs() < 1e-12 {
                ok = false;
                break;
            }
            mat.swap(col, piv);
            for r in 0..k {
                if r != col {
                    let f = mat[r][col] / mat[col][col];
                    for c in col..=k {
                        mat[r][c] -= f * mat[col][c];
                    }
                }
            }
        }
        if ok {
            let mut joint = vec![0.0; cells];
            for (i, &c) in subset.iter().enumerate() {
                joint[c] = mat[i][k] / mat[i][i];
            }
            if joint.iter().all(|&v| v >= -1e-12) {
                let joint: Vec<f64> = joint.iter().map(|v| v.max(0.0)).collect();
                let col_ok = (0..n).all(|c| {
                    ((0..m).map(|r| joint[r * n + c]).sum::<f64>() - b[c]).abs() < 1e-9
                });
                if col_ok {
                    best = best.min(entropy(&joint) - entropy(a));
                }
            }
        }
        // Next k-subset of the cells in lexicographic order.
        let mut i = k;
        loop {
            if i == 0 {
                return best.max(0.0);
            }
            i -= 1;
            if subset[i] < cells - k + i {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..k {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Grid value of `min { D(t‖P_Y) + |H(t) − cap − R|^+ : h_min(q, t) ≤ cap }`
/// over output distributions `t`, with inputs of zero weight dropped.
pub fn inner_in_output_grid(
    q: &[f64],
    py: &[f64],
    cap: f64,
    rate: f64,
    resolution: usize,
    zooms: usize,
) -> f64 {
    let qa: Vec<f64> = q.iter().copied().filter(|&v| v > 0.0).collect();
    simplex_min(py.len(), resolution, zooms, 21, |t| {
        let d = kl(t, py);
        if !d.is_finite() || min_coupling_cond_entropy(&qa, t) > cap {
            return f64::INFINITY;
        }
        d + (entropy(t) - cap - rate).max(0.0)
    })
    .0
}

/// Dirichlet(1) sample mixed with `floor` of the uniform distribution.
pub fn random_pmf(rng: &mut ChaCha20Rng, k: usize, floor: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.iter()
        .map(|v| (1.0 - floor) * v / total + floor / k as f64)
        .collect()
}

pub fn random_channel(rng: &mut ChaCha20Rng, nx: usize, ny: usize, floor: f64) -> Vec<Vec<f64>> {
    (0..nx).map(|_| random_pmf(rng, ny, floor)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid(2, 4).len(), 5);
        assert_eq!(simplex_grid(3, 6).len(), 28);
    }

    #[test]
    fn zoom_finds_interior_minimum() {
        let target = [0.123456, 0.654321, 0.222223];
        let (v, p) = simplex_min(3, 50, 4, 41, |q| kl(q, &target));
        assert!(v < 1e-9, "{v}");
        assert!((p[0] - target[0]).abs() < 1e-4);
    }

    #[test]
    fn sibson_at_half_on_bsc() {
        let w = vec![vec![0.9, 0.1], vec![0.1, 0.9]];
        let v = sibson_renyi(0.5, &[0.5, 0.5], &w);
        let expect = 1.0 - 2.0 * (0.9f64.sqrt() + 0.1f64.sqrt()).log2();
        assert!((v - expect).abs() < 1e-12);
    }

    #[test]
    fn min_coupling_examples() {
        // Product marginals of a deterministic map: zero.
        assert!(min_coupling_cond_entropy(&[0.5, 0.5], &[0.5, 0.5]) < 1e-12);
        // A point mass row forces H(Y|X) = H(b).
        let h = min_coupling_cond_entropy(&[1.0], &[0.25, 0.75]);
        assert!((h - entropy(&[0.25, 0.75])).abs() < 1e-12);
        // q = (0.5, 0.5), b = (0.7, 0.3): best is X=0 -> Y=0, X=1 split 0.4/0.6.
        let h = min_coupling_cond_entropy(&[0.5, 0.5], &[0.7, 0.3]);
        assert!((h - 0.5 * entropy(&[0.4, 0.6])).abs() < 1e-12, "{h}");
    }

    #[test]
    fn inner_out_grid_at_zero_slack() {
        let v = inner_out_grid([0.5, 0.5], [[0.9, 0.1], [0.1, 0.9]], 0.0, 400);
        assert!(v < 1e-4);
    }
}
