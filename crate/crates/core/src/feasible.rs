//! The feasible input set `S = {P_X : P_X W = P_Y}` and a lattice-plus-descent
//! minimizer over it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prob::{push_forward_unchecked, Channel, Pmf};
use crate::scalar::Real;

/// Feasibility tolerance on `‖p W − P_Y‖_∞`.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Cap on lattice evaluations in [`FeasiblePolytope::minimize_over`].
pub const LATTICE_BUDGET: usize = 1_000_000;

/// Exact vertex enumeration is supported up to this many input symbols.
pub const MAX_INPUT_SYMBOLS: usize = 8;

/// `S` as an anchor point plus an orthonormal basis of the directions that
/// keep both the output and the total mass fixed.
#[derive(Debug, Clone)]
pub struct FeasiblePolytope<T> {
    channel: Channel<T>,
    target: Pmf<T>,
    anchor: Pmf<T>,
    basis: Vec<Vec<T>>,
    vertices: Vec<Pmf<T>>,
    bounds: Vec<(T, T)>,
}

/// Minimizer returned by [`FeasiblePolytope::minimize_over`].
#[derive(Debug, Clone)]
pub struct PolytopeMinimum<T> {
    pub point: Pmf<T>,
    pub value: T,
    pub evaluations: usize,
    /// Lattice points per basis direction after budget coarsening.
    pub resolution_used: usize,
    /// Lattice points whose value ties the lattice minimum within `1e-12`;
    /// the lexicographically smallest one seeds the refinement.
    pub lattice_ties: usize,
}

/// Row-reduces `m` in place, pivoting only within the first `ncols` columns.
/// Returns the pivot column of each non-zero row.
fn rref<T: Real>(m: &mut [Vec<T>], ncols: usize, tol: T) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..ncols {
        if row == m.len() {
            break;
        }
        let (best, mag) = (row..m.len())
            .map(|r| (r, m[r][col].abs()))
            .fold((row, T::zero()), |acc, c| if c.1 > acc.1 { c } else { acc });
        if mag <= tol {
            continue;
        }
        m.swap(row, best);
        let p = m[row][col];
        for v in m[row].iter_mut() {
            *v = *v / p;
        }
        for r in 0..m.len() {
            if r != row {
                let factor = m[r][col];
                if factor != T::zero() {
                    for c in 0..m[r].len() {
                        let sub = factor * m[row][c];
                        m[r][c] = m[r][c] - sub;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Solves the square system `a x = b`; `None` when singular.
fn solve_square<T: Real>(a: &[Vec<T>], b: &[T], tol: T) -> Option<Vec<T>> {
    let n = b.len();
    let mut m: Vec<Vec<T>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    let pivots = rref(&mut m, n, tol);
    if pivots.len() < n {
        return None;
    }
    Some(m.iter().map(|r| r[n]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn residual<T: Real>(p: &[T], w: &Channel<T>, target: &Pmf<T>) -> T {
    push_forward_unchecked(p, w)
        .iter()
        .zip(target.probs())
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max)
}

impl<T: Real> FeasiblePolytope<T> {
    /// Builds `S` for `(W, P_Y)`, or [`Error::Infeasible`] when no input
    /// distribution reaches `P_Y`.
    pub fn build(w: &Channel<T>, target: &Pmf<T>) -> Result<Self> {
        let nx = w.in_size();
        let ny = w.out_size();
        if target.alphabet_size() != ny {
            return Err(Error::DimensionMismatch {
                expected: ny,
                found: target.alphabet_size(),
            });
        }
        if nx > MAX_INPUT_SYMBOLS {
            return Err(Error::InvalidArgument(format!(
                "vertex enumeration supports at most {MAX_INPUT_SYMBOLS} input symbols, got {nx}"
            )));
        }
        let lin_tol = T::tol(1e-12);
        let feas_tol = T::tol(FEASIBILITY_TOL);

        // Rows: one per output symbol plus the unit-mass row; augmented by the rhs.
        let mut m: Vec<Vec<T>> = (0..ny)
            .map(|y| {
                let mut r: Vec<T> = (0..nx).map(|x| w.get(x, y)).collect();
                r.push(target.get(y));
                r
            })
            .collect();
        m.push({
            let mut r = vec![T::one(); nx];
            r.push(T::one());
            r
        });
        let pivots = rref(&mut m, nx, lin_tol);
        let rank = pivots.len();
        if m[rank..].iter().any(|r| r[nx].abs() > feas_tol) {
            return Err(Error::Infeasible);
        }
        let reduced: Vec<Vec<T>> = m[..rank].iter().map(|r| r[..nx].to_vec()).collect();
        let rhs: Vec<T> = m[..rank].iter().map(|r| r[nx]).collect();

        let mut vertices: Vec<Pmf<T>> = Vec::new();
        for cols in combinations(nx, rank) {
            let a: Vec<Vec<T>> = reduced
                .iter()
                .map(|r| cols.iter().map(|&c| r[c]).collect())
                .collect();
            let Some(sol) = solve_square(&a, &rhs, lin_tol) else {
                continue;
            };
            if sol.iter().any(|&v| v < -lin_tol) {
                continue;
            }
            let mut p = vec![T::zero(); nx];
            for (&c, &v) in cols.iter().zip(&sol) {
                p[c] = v.max(T::zero());
            }
            let p = Pmf::from_noisy(p);
            if residual(p.probs(), w, target) > feas_tol {
                continue;
            }
            let dup = vertices.iter().any(|v| {
                v.probs()
                    .iter()
                    .zip(p.probs())
                    .all(|(a, b)| (*a - *b).abs() <= lin_tol)
            });
            if !dup {
                vertices.push(p);
            }
        }
        if vertices.is_empty() {
            return Err(Error::Infeasible);
        }

        let inv = T::one() / T::from_usize_lossy(vertices.len());
        let mut centroid = vec![T::zero(); nx];
        for v in &vertices {
            for (c, &p) in centroid.iter_mut().zip(v.probs()) {
                *c = *c + p * inv;
            }
        }
        let anchor = Pmf::from_noisy(centroid);

        // Null-space directions from the free columns, then Gram-Schmidt.
        let mut basis: Vec<Vec<T>> = Vec::new();
        for free in (0..nx).filter(|c| !pivots.contains(c)) {
            let mut d = vec![T::zero(); nx];
            d[free] = T::one();
            for (r, &pc) in pivots.iter().enumerate() {
                d[pc] = -reduced[r][free];
            }
            for b in &basis {
                let dot: T = d.iter().zip(b).map(|(a, b)| *a * *b).sum();
                for (di, &bi) in d.iter_mut().zip(b) {
                    *di = *di - dot * bi;
                }
            }
            let norm = d.iter().map(|v| *v * *v).sum::<T>().sqrt();
            if norm > lin_tol {
                basis.push(d.into_iter().map(|v| v / norm).collect());
            }
        }

        let bounds = basis
            .iter()
            .map(|b| {
                vertices.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| {
                    let c: T = v
                        .probs()
                        .iter()
                        .zip(anchor.probs())
                        .zip(b)
                        .map(|((p, a), bi)| (*p - *a) * *bi)
                        .sum();
                    (lo.min(c), hi.max(c))
                })
            })
            .collect();

        Ok(Self {
            channel: w.clone(),
            target: target.clone(),
            anchor,
            basis,
            vertices,
            bounds,
        })
    }

    pub fn anchor(&self) -> &Pmf<T> {
        &self.anchor
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    pub fn vertices(&self) -> &[Pmf<T>] {
        &self.vertices
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn channel(&self) -> &Channel<T> {
        &self.channel
    }

    pub fn target(&self) -> &Pmf<T> {
        &self.target
    }

    /// `‖p W − P_Y‖_∞`.
    pub fn residual(&self, p: &Pmf<T>) -> T {
        residual(p.probs(), &self.channel, &self.target)
    }

    fn point(&self, coeffs: &[T]) -> Option<Pmf<T>> {
        let mut p = self.anchor.probs().to_vec();
        for (c, b) in coeffs.iter().zip(&self.basis) {
            for (pi, &bi) in p.iter_mut().zip(b) {
                *pi = *pi + *c * bi;
            }
        }
        if p.iter().any(|&v| v < -T::tol(1e-12)) {
            return None;
        }
        Some(Pmf::from_noisy(p))
    }

    /// Minimizes `objective` over `S`: a lattice of `resolution` points per
    /// basis direction (coarsened so the lattice stays within
    /// [`LATTICE_BUDGET`]), then coordinate descent along the basis down to a
    /// step of `1e-6`.
    pub fn minimize_over<F>(&self, objective: F, resolution: usize) -> Result<PolytopeMinimum<T>>
    where
        F: Fn(&Pmf<T>) -> T + Sync,
    {
        if resolution < 2 {
            return Err(Error::InvalidArgument(
                "polytope resolution must be at least 2".into(),
            ));
        }
        let anchor_value = sanitize(objective(&self.anchor));
        let dim = self.dimension();
        if dim == 0 {
            return Ok(PolytopeMinimum {
                point: self.anchor.clone(),
                value: anchor_value,
                evaluations: 1,
                resolution_used: 1,
                lattice_ties: 0,
            });
        }

        let per_dim_cap = (LATTICE_BUDGET as f64).powf(1.0 / dim as f64).floor() as usize;
        let res = resolution.min(per_dim_cap).max(2);
        let total = res.pow(dim as u32);
        let step_of = |i: usize| (self.bounds[i].1 - self.bounds[i].0) / T::from_usize_lossy(res - 1);
        let coeffs_of = |mut idx: usize| {
            let mut c = vec![T::zero(); dim];
            for i in (0..dim).rev() {
                let k = idx % res;
                idx /= res;
                c[i] = self.bounds[i].0 + step_of(i) * T::from_usize_lossy(k);
            }
            c
        };

        let values: Vec<(usize, T)> = (0..total)
            .into_par_iter()
            .filter_map(|idx| {
                self.point(&coeffs_of(idx))
                    .map(|p| (idx, sanitize(objective(&p))))
            })
            .collect();
        let mut evaluations = values.len() + 1;

        let (mut coeffs, mut best) = (vec![T::zero(); dim], anchor_value);
        let mut lattice_ties = 0;
        if let Some(&(idx, v)) = values
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
        {
            lattice_ties = values
                .iter()
                .filter(|(_, u)| (*u - v).abs() <= T::tol(1e-12))
                .count();
            if v < best {
                best = v;
                coeffs = coeffs_of(idx);
            }
        }

        let mut step = (0..dim).map(step_of).fold(T::zero(), T::max);
        let min_step = T::tol(1e-6);
        while step >= min_step {
            let mut improved = false;
            for i in 0..dim {
                for sign in [T::one(), -T::one()] {
                    let mut trial = coeffs.clone();
                    trial[i] = trial[i] + sign * step;
                    if let Some(p) = self.point(&trial) {
                        let v = sanitize(objective(&p));
                        evaluations += 1;
                        if v < best {
                            best = v;
                            coeffs = trial;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step = step / T::lit(2.0);
            }
        }

        let point = self.point(&coeffs).unwrap_or_else(|| self.anchor.clone());
        Ok(PolytopeMinimum {
            point,
            value: best,
            evaluations,
            resolution_used: res,
            lattice_ties,
        })
    }

    /// Largest midpoint-convexity violation `f((a+b)/2) − (f(a)+f(b))/2` over
    /// all pairs drawn from the vertices and the anchor.
    pub fn midpoint_convexity_gap<F: Fn(&Pmf<T>) -> T>(&self, objective: F) -> T {
        let mut pts: Vec<&Pmf<T>> = self.vertices.iter().collect();
        pts.push(&self.anchor);
        let mut worst = T::neg_infinity();
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let mid = Pmf::from_noisy(
                    pts[i]
                        .probs()
                        .iter()
                        .zip(pts[j].probs())
                        .map(|(a, b)| (*a + *b) / T::lit(2.0))
                        .collect(),
                );
                let gap = objective(&mid) - (objective(pts[i]) + objective(pts[j])) / T::lit(2.0);
                worst = worst.max(gap);
            }
        }
        worst
    }
}

fn sanitize<T: Real>(v: T) -> T {
    if v.is_nan() {
        T::infinity()
    } else {
        v
    }
}
