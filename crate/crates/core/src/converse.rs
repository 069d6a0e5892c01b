//! Lower bound `E_c(R)` on the strong converse exponent.
//!
//! For an input type `q` and slack `s`, the exponent balances
//!
//! * `f(s) = min { D(qV‖P_Y) + |I(q;V) − R|^+ : H(V|q) ≤ H(W|q) + s }` (non-increasing), against
//! * `g(s) = min { D(V‖W|q) : H(V|q) ≥ H(W|q) + s }` (non-decreasing),
//!
//! and `E_c(R)` is the minimum over `q` of the common value at the crossing.
//!
//! `g` is solved exactly on the tilted family `V_t ∝ W^t`. For `f`, the
//! objective depends on `V` only through the output `Q_Y = qV` and `H(V|q)`,
//! and it is non-increasing in `H(V|q)` for fixed `Q_Y`; since the achievable
//! conditional entropies at fixed `Q_Y` form the interval
//! `[h_min(Q_Y), H(Q_Y)]`, the problem reduces to
//!
//! `f(s) = min { D(Q_Y‖P_Y) + |H(Q_Y) − cap − R|^+ : h_min(Q_Y) ≤ cap }`,
//!
//! where `h_min` is the smallest `H(Y|X)` over couplings of `q` and `Q_Y`,
//! attained at a vertex of the transportation polytope (a spanning tree of
//! the bipartite support graph). A lattice over `V` re-verifies every
//! solution.

use rayon::prelude::*;

use crate::curve::{CurvePoint, ExponentCurve};
use crate::error::{Error, Result};
use crate::prob::{
    cond_entropy_unchecked, cond_kl_unchecked, entropy_slice, kl_slice,
    mutual_information_unchecked, push_forward_unchecked, Channel, Pmf,
};
use crate::scalar::Real;

pub const DEFAULT_QX_RESOLUTION: usize = 16;
pub const DEFAULT_V_RESOLUTION: usize = 32;
pub const DEFAULT_S_TOLERANCE: f64 = 1e-6;
pub const MIN_RESOLUTION: usize = 16;

/// Raw inner values may disagree with monotonicity by at most this much.
pub const SOLVER_NOISE: f64 = 1e-6;
/// Slack for the monotonicity of the `f` and `g` envelopes.
pub const ENVELOPE_SLACK: f64 = 1e-9;

/// Upper bound on `Q_Y` grid points in the reduced `f` solver.
const OUTPUT_GRID_BUDGET: usize = 20_000;
/// Upper bound on channel lattice points in the `f` cross-check.
const CHANNEL_LATTICE_BUDGET: usize = 200_000;
/// Root-finding steps when pulling a trial point back into the feasible set.
const PULL_BACK_ITERATIONS: usize = 60;
/// Smallest step of the outer `Q_X` refinement.
const QX_MIN_STEP: f64 = 1e-5;

/// Problem data for one converse evaluation.
#[derive(Debug, Clone)]
pub struct ConverseInstance<T> {
    pub channel: Channel<T>,
    pub target: Pmf<T>,
    pub rate: T,
    pub qx_resolution: usize,
    pub v_resolution: usize,
    pub s_tolerance: T,
}

impl<T: Real> ConverseInstance<T> {
    pub fn new(channel: Channel<T>, target: Pmf<T>, rate: T) -> Result<Self> {
        let inst = Self {
            channel,
            target,
            rate,
            qx_resolution: DEFAULT_QX_RESOLUTION,
            v_resolution: DEFAULT_V_RESOLUTION,
            s_tolerance: T::lit(DEFAULT_S_TOLERANCE),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_resolutions(mut self, qx: usize, v: usize) -> Result<Self> {
        self.qx_resolution = qx;
        self.v_resolution = v;
        self.validate()?;
        Ok(self)
    }

    pub fn with_s_tolerance(mut self, tol: T) -> Result<Self> {
        self.s_tolerance = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel.out_size() != self.target.alphabet_size() {
            return Err(Error::DimensionMismatch {
                expected: self.channel.out_size(),
                found: self.target.alphabet_size(),
            });
        }
        if self.qx_resolution < MIN_RESOLUTION || self.v_resolution < MIN_RESOLUTION {
            return Err(Error::InvalidArgument(format!(
                "resolutions must be >= {MIN_RESOLUTION}"
            )));
        }
        if !(self.s_tolerance > T::zero()) {
            return Err(Error::InvalidArgument("s tolerance must be positive".into()));
        }
        if !(self.rate >= T::zero()) {
            return Err(Error::InvalidArgument("rate must be >= 0".into()));
        }
        Ok(())
    }
}

/// Value and minimizer of an inner problem; `channel` is `None` when the
/// constraint set is empty (value `+inf`).
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolution<T> {
    pub value: T,
    pub channel: Option<Channel<T>>,
}

impl<T: Real> InnerSolution<T> {
    pub fn is_feasible(&self) -> bool {
        self.channel.is_some()
    }
}

fn check_shapes<T: Real>(q: &Pmf<T>, w: &Channel<T>) -> Result<()> {
    if q.alphabet_size() != w.in_size() {
        return Err(Error::DimensionMismatch {
            expected: w.in_size(),
            found: q.alphabet_size(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// g(s): tilted family

#[derive(Debug, Clone)]
struct OutSample<T> {
    entropy: T,
    value: T,
    channel: Channel<T>,
}

struct OutSolver<'a, T> {
    q: &'a [T],
    w: &'a Channel<T>,
    base_entropy: T,
    max_entropy: T,
    memory: Vec<OutSample<T>>,
}

impl<'a, T: Real> OutSolver<'a, T> {
    fn new(q: &'a [T], w: &'a Channel<T>) -> Self {
        let max_entropy = q
            .iter()
            .zip(w.rows())
            .filter(|(p, _)| **p > T::zero())
            .map(|(&p, row)| {
                let support = row.iter().filter(|v| **v > T::zero()).count();
                p * T::from_usize_lossy(support).log2()
            })
            .sum();
        Self {
            q,
            w,
            base_entropy: cond_entropy_unchecked(w, q),
            max_entropy,
            memory: Vec::new(),
        }
    }

    fn sample(&self, t: T) -> OutSample<T> {
        let channel = self.w.tilted(t);
        OutSample {
            entropy: cond_entropy_unchecked(&channel, self.q),
            value: cond_kl_unchecked(&channel, self.w, self.q),
            channel,
        }
    }

    fn solve(&mut self, s: T) -> InnerSolution<T> {
        if s <= T::zero() {
            return InnerSolution {
                value: T::zero(),
                channel: Some(self.w.clone()),
            };
        }
        let target = self.base_entropy + s;
        let tol = T::tol(1e-12);
        if target > self.max_entropy + tol {
            return InnerSolution {
                value: T::infinity(),
                channel: None,
            };
        }
        let best = if target >= self.max_entropy - tol {
            self.sample(T::zero())
        } else {
            // H(V_t|q) decreases in t; keep the high-entropy end feasible.
            let (mut lo, mut hi) = (T::zero(), T::one());
            let mut lo_sample = self.sample(lo);
            for _ in 0..200 {
                if hi - lo <= T::epsilon() {
                    break;
                }
                let mid = (lo + hi) / T::lit(2.0);
                let m = self.sample(mid);
                if m.entropy >= target {
                    lo = mid;
                    lo_sample = m;
                    if lo_sample.entropy - target <= T::tol(1e-14) {
                        break;
                    }
                } else {
                    hi = mid;
                }
            }
            lo_sample
        };
        let out = InnerSolution {
            value: best.value,
            channel: Some(best.channel.clone()),
        };
        self.memory.push(best);
        out
    }

    /// Smallest stored divergence among channels feasible at slack `s`.
    fn envelope(&self, s: T) -> T {
        if s <= T::zero() {
            return T::zero();
        }
        let cap = self.base_entropy + s;
        self.memory
            .iter()
            .filter(|m| m.entropy >= cap)
            .map(|m| m.value)
            .fold(T::infinity(), T::min)
    }
}

/// `min_{V : H(V|q) ≥ H(W|q) + s} D(V‖W|q)` on the tilted family
/// `V_t ∝ W^t`, bisected until the entropy constraint is tight.
/// Returns `(0, W)` for `s = 0` and an infeasible solution when `s` exceeds
/// the largest achievable entropy slack.
pub fn inner_min_out<T: Real>(q: &Pmf<T>, w: &Channel<T>, s: T) -> Result<InnerSolution<T>> {
    check_shapes(q, w)?;
    if !(s >= T::zero()) {
        return Err(Error::InvalidArgument(format!("slack must be >= 0, got {s}")));
    }
    Ok(OutSolver::new(q.probs(), w).solve(s))
}

// ---------------------------------------------------------------------------
// f(s): reduction to the output distribution

/// Spanning trees of the complete bipartite graph between `rows` and `cols`
/// nodes, as lists of `(row, col)` edges.
fn spanning_trees(rows: usize, cols: usize) -> Vec<Vec<(usize, usize)>> {
    let cells: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .collect();
    let k = rows + cols - 1;
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(k);
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    fn rec(
        start: usize,
        cells: &[(usize, usize)],
        k: usize,
        rows: usize,
        chosen: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if chosen.len() == k {
            let mut parent: Vec<usize> = (0..rows + cells.len()).collect();
            for &(r, c) in chosen.iter() {
                let a = find(&mut parent, r);
                let b = find(&mut parent, rows + c);
                if a == b {
                    return;
                }
                parent[a] = b;
            }
            out.push(chosen.clone());
            return;
        }
        for i in start..cells.len() {
            if cells.len() - i < k - chosen.len() {
                break;
            }
            chosen.push(cells[i]);
            rec(i + 1, cells, k, rows, chosen, out);
            chosen.pop();
        }
    }
    rec(0, &cells, k, rows, &mut chosen, &mut out);
    out
}

/// Leaf-elimination order of a spanning tree: each step fixes cell
/// `(row, col)` to the remaining mass of the row (`true`) or column (`false`).
/// The order depends only on the tree's shape.
#[derive(Debug, Clone)]
struct TreePlan {
    steps: Vec<(usize, usize, bool)>,
}

impl TreePlan {
    fn new(tree: &[(usize, usize)], rows: usize, cols: usize) -> Self {
        let mut row_deg = vec![0usize; rows];
        let mut col_deg = vec![0usize; cols];
        for &(r, c) in tree {
            row_deg[r] += 1;
            col_deg[c] += 1;
        }
        let mut done = vec![false; tree.len()];
        let mut steps = Vec::with_capacity(tree.len());
        for _ in 0..tree.len() {
            let pick = tree.iter().enumerate().find_map(|(e, &(r, c))| {
                if done[e] {
                    None
                } else if row_deg[r] == 1 {
                    Some((e, true))
                } else if col_deg[c] == 1 {
                    Some((e, false))
                } else {
                    None
                }
            });
            let (e, from_row) = pick.expect("a tree always has a leaf");
            let (r, c) = tree[e];
            steps.push((r, c, from_row));
            row_deg[r] -= 1;
            col_deg[c] -= 1;
            done[e] = true;
        }
        TreePlan { steps }
    }

    /// Runs the plan with row sums `qa` and column sums `t`, calling `cell`
    /// for every fixed cell; `None` if any cell would be negative.
    fn run<T: Real>(
        &self,
        qa: &[T],
        t: &[T],
        row_mass: &mut Vec<T>,
        col_mass: &mut Vec<T>,
        mut cell: impl FnMut(usize, usize, T),
    ) -> Option<()> {
        row_mass.clear();
        row_mass.extend_from_slice(qa);
        col_mass.clear();
        col_mass.extend_from_slice(t);
        let neg = -T::tol(1e-13);
        for &(r, c, from_row) in &self.steps {
            let value = if from_row { row_mass[r] } else { col_mass[c] };
            if value < neg {
                return None;
            }
            let value = value.max(T::zero());
            cell(r, c, value);
            row_mass[r] = row_mass[r] - value;
            col_mass[c] = col_mass[c] - value;
        }
        Some(())
    }

    /// Joint entropy of the plan's coupling, in bits.
    fn joint_entropy<T: Real>(
        &self,
        qa: &[T],
        t: &[T],
        row_mass: &mut Vec<T>,
        col_mass: &mut Vec<T>,
    ) -> Option<T> {
        let mut h = T::zero();
        self.run(qa, t, row_mass, col_mass, |_, _, v| {
            if v > T::zero() {
                h = h - v * v.log2();
            }
        })?;
        Some(h)
    }

    fn table<T: Real>(&self, qa: &[T], t: &[T]) -> Option<Vec<T>> {
        let cols = t.len();
        let mut table = vec![T::zero(); qa.len() * cols];
        let (mut rm, mut cm) = (Vec::new(), Vec::new());
        self.run(qa, t, &mut rm, &mut cm, |r, c, v| table[r * cols + c] = v)?;
        Some(table)
    }
}

#[derive(Debug, Clone)]
struct OutputPoint<T> {
    t: Vec<T>,
    divergence: T,
    entropy: T,
    h_min: T,
}

/// Side of the hinge in `|H(t) − cap − R|^+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Below,
    Above,
}

#[derive(Debug, Clone)]
struct LatticeEntry<T> {
    entropy: T,
    value: T,
    channel: Vec<T>,
}

struct InSolver<'a, T> {
    q: &'a [T],
    w: &'a Channel<T>,
    py: &'a Pmf<T>,
    rate: T,
    active: Vec<usize>,
    qa: Vec<T>,
    qa_entropy: T,
    trees: Vec<TreePlan>,
    grid: Vec<OutputPoint<T>>,
    grid_step: T,
    memory: Vec<OutputPoint<T>>,
    /// Channel lattice sorted by conditional entropy, with running minima.
    lattice: Vec<LatticeEntry<T>>,
    lattice_prefix_best: Vec<usize>,
    lattice_overrides: usize,
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
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
    let mut out = Vec::new();
    let mut cur = vec![0; parts];
    rec(total, 0, &mut cur, &mut out);
    out
}

fn n_compositions(total: usize, parts: usize) -> f64 {
    (0..parts - 1).fold(1.0, |acc, i| {
        acc * (total + parts - 1 - i) as f64 / (i + 1) as f64
    })
}

impl<'a, T: Real> InSolver<'a, T> {
    fn new(q: &'a [T], w: &'a Channel<T>, py: &'a Pmf<T>, rate: T, v_resolution: usize) -> Self {
        let ny = w.out_size();
        let active: Vec<usize> = (0..q.len()).filter(|&x| q[x] > T::zero()).collect();
        let qa: Vec<T> = active.iter().map(|&x| q[x]).collect();
        let qa_entropy = entropy_slice(&qa);
        let trees = spanning_trees(active.len(), ny)
            .iter()
            .map(|tree| TreePlan::new(tree, active.len(), ny))
            .collect();

        let mut n = (v_resolution * 8).max(1);
        while n > 1 && n_compositions(n, ny) > OUTPUT_GRID_BUDGET as f64 {
            n -= 1;
        }
        let inv = T::one() / T::from_usize_lossy(n);
        let mut solver = Self {
            q,
            w,
            py,
            rate,
            active,
            qa,
            qa_entropy,
            trees,
            grid: Vec::new(),
            grid_step: inv,
            memory: Vec::new(),
            lattice: Vec::new(),
            lattice_prefix_best: Vec::new(),
            lattice_overrides: 0,
        };
        solver.grid = compositions(n, ny)
            .into_iter()
            .filter_map(|c| {
                solver.output_point(c.iter().map(|&v| T::from_usize_lossy(v) * inv).collect())
            })
            .collect();
        solver.build_lattice(v_resolution);
        solver
    }

    fn output_point(&self, t: Vec<T>) -> Option<OutputPoint<T>> {
        let divergence = kl_slice(&t, self.py.probs());
        if !divergence.is_finite() {
            return None;
        }
        let (h_min, _) = self.min_entropy_coupling(&t)?;
        Some(OutputPoint {
            divergence,
            entropy: entropy_slice(&t),
            h_min,
            t,
        })
    }

    /// `min H(Y|X)` over couplings of `q` (active part) and `t`, with the
    /// index of the minimizing tree.
    fn min_entropy_coupling(&self, t: &[T]) -> Option<(T, usize)> {
        let mut best: Option<(T, usize)> = None;
        let (mut rm, mut cm) = (Vec::with_capacity(self.qa.len()), Vec::with_capacity(t.len()));
        for (i, plan) in self.trees.iter().enumerate() {
            if let Some(hj) = plan.joint_entropy(&self.qa, t, &mut rm, &mut cm) {
                let h = (hj - self.qa_entropy).max(T::zero());
                if best.map_or(true, |(b, _)| h < b) {
                    best = Some((h, i));
                }
            }
        }
        best
    }

    fn reduced(&self, p: &OutputPoint<T>, cap: T) -> T {
        if p.h_min > cap {
            return T::infinity();
        }
        p.divergence + (p.entropy - cap - self.rate).max(T::zero())
    }

    fn full_objective(&self, v: &Channel<T>) -> T {
        let out = push_forward_unchecked(self.q, v);
        kl_slice(&out, self.py.probs())
            + (mutual_information_unchecked(self.q, v) - self.rate).max(T::zero())
    }

    fn build_lattice(&mut self, v_resolution: usize) {
        let ny = self.w.out_size();
        let rows = self.active.len();
        let mut r = v_resolution;
        while r > 1 && n_compositions(r, ny).powi(rows as i32) > CHANNEL_LATTICE_BUDGET as f64 {
            r -= 1;
        }
        let inv = T::one() / T::from_usize_lossy(r);
        let row_points: Vec<Vec<T>> = compositions(r, ny)
            .into_iter()
            .map(|c| c.iter().map(|&v| T::from_usize_lossy(v) * inv).collect())
            .collect();
        let per_row = row_points.len();
        let total = per_row.pow(rows as u32);
        let mut entries = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut data = self.w.as_flat().to_vec();
            for &x in &self.active {
                let k = idx % per_row;
                idx /= per_row;
                data[x * ny..(x + 1) * ny].copy_from_slice(&row_points[k]);
            }
            let v = Channel::from_flat_unchecked(self.w.in_size(), ny, data);
            let value = self.full_objective(&v);
            if value.is_finite() {
                entries.push(LatticeEntry {
                    entropy: cond_entropy_unchecked(&v, self.q),
                    value,
                    channel: v.as_flat().to_vec(),
                });
            }
        }
        entries.sort_by(|a, b| a.entropy.partial_cmp(&b.entropy).unwrap());
        let mut prefix: Vec<usize> = Vec::with_capacity(entries.len());
        for i in 0..entries.len() {
            let best = match prefix.last() {
                Some(&j) if entries[j].value <= entries[i].value => j,
                _ => i,
            };
            prefix.push(best);
        }
        self.lattice = entries;
        self.lattice_prefix_best = prefix;
    }

    fn lattice_best(&self, cap: T) -> Option<&LatticeEntry<T>> {
        let n = self.lattice.partition_point(|e| e.entropy <= cap);
        (n > 0).then(|| &self.lattice[self.lattice_prefix_best[n - 1]])
    }

    /// Builds the channel realizing `H(V|q) = min(cap, H(t))` at output `t`.
    fn realize(&self, p: &OutputPoint<T>, cap: T) -> Channel<T> {
        let ny = self.w.out_size();
        let (_, tree_idx) = self
            .min_entropy_coupling(&p.t)
            .expect("grid points admit a coupling");
        let j_min = self.trees[tree_idx].table(&self.qa, &p.t).expect("feasible tree");
        let j_ind: Vec<T> = self
            .qa
            .iter()
            .flat_map(|&a| p.t.iter().map(move |&b| a * b))
            .collect();
        let target = cap.min(p.entropy);
        let cond = |lam: T| -> (Vec<T>, T) {
            let j: Vec<T> = j_min
                .iter()
                .zip(&j_ind)
                .map(|(&a, &b)| a + lam * (b - a))
                .collect();
            let h = entropy_slice(&j) - self.qa_entropy;
            (j, h)
        };
        let (mut lo, mut hi) = (T::zero(), T::one());
        let (mut joint, h1) = cond(T::one());
        if h1 > target {
            joint = j_min.clone();
            for _ in 0..200 {
                if hi - lo <= T::epsilon() {
                    break;
                }
                let mid = (lo + hi) / T::lit(2.0);
                let (j, h) = cond(mid);
                if h > target {
                    hi = mid;
                } else {
                    lo = mid;
                    joint = j;
                }
            }
        }
        let mut data = self.w.as_flat().to_vec();
        for (i, &x) in self.active.iter().enumerate() {
            for y in 0..ny {
                data[x * ny + y] = (joint[i * ny + y] / self.qa[i]).max(T::zero());
            }
            let total: T = data[x * ny..(x + 1) * ny].iter().copied().sum();
            for y in 0..ny {
                data[x * ny + y] = data[x * ny + y] / total;
            }
        }
        Channel::from_flat_unchecked(self.w.in_size(), ny, data)
    }

    /// Objective restricted to one side of the hinge `H(t) = cap + R`: below
    /// it the value is `D(t‖P_Y)`, above it `D(t‖P_Y) + H(t) − cap − R`.
    fn branch_value(&self, p: &OutputPoint<T>, cap: T, branch: Branch) -> T {
        if p.h_min > cap {
            return T::infinity();
        }
        let top = cap + self.rate;
        match branch {
            Branch::Below if p.entropy <= top => p.divergence,
            Branch::Above if p.entropy >= top => p.divergence + p.entropy - top,
            _ => T::infinity(),
        }
    }

    /// Signed distance to the branch's constraints: `min(cap − h_min, hinge)`,
    /// non-negative exactly on the feasible set.
    fn margin(&self, p: &OutputPoint<T>, cap: T, branch: Branch) -> T {
        let top = cap + self.rate;
        let hinge = match branch {
            Branch::Below => top - p.entropy,
            Branch::Above => p.entropy - top,
        };
        (cap - p.h_min).min(hinge)
    }

    /// The grid or memory point deepest inside the branch's feasible set,
    /// used to pull infeasible trial points back onto its boundary.
    fn reference(&self, cap: T, branch: Branch) -> Option<OutputPoint<T>> {
        self.grid
            .iter()
            .chain(self.memory.iter())
            .map(|p| (self.margin(p, cap, branch), p))
            .filter(|(m, _)| *m > T::tol(1e-9))
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .map(|(_, p)| p.clone())
    }

    /// Feasible point near the boundary crossing on the segment from
    /// infeasible `t` to `reference`, by Illinois regula falsi on the margin.
    fn pull_back(
        &self,
        t: &[T],
        reference: &OutputPoint<T>,
        cap: T,
        branch: Branch,
    ) -> Option<OutputPoint<T>> {
        let at = |lam: T| -> Option<OutputPoint<T>> {
            self.output_point(
                t.iter()
                    .zip(&reference.t)
                    .map(|(&a, &b)| (a + lam * (b - a)).max(T::zero()))
                    .collect(),
            )
        };
        let start = at(T::zero())?;
        let (mut lo, mut m_lo) = (T::zero(), self.margin(&start, cap, branch));
        let (mut hi, mut m_hi) = (T::one(), self.margin(reference, cap, branch));
        if !(m_lo < T::zero()) || !(m_hi > T::zero()) {
            return None;
        }
        let mut best = reference.clone();
        let mut side = 0i8;
        for _ in 0..PULL_BACK_ITERATIONS {
            if hi - lo <= T::tol(1e-15) {
                break;
            }
            let mut mid = lo - m_lo * (hi - lo) / (m_hi - m_lo);
            if !(mid > lo && mid < hi) {
                mid = (lo + hi) / T::lit(2.0);
            }
            let p = at(mid)?;
            let m = self.margin(&p, cap, branch);
            if m >= T::zero() {
                hi = mid;
                m_hi = m;
                best = p;
                if side == 1 {
                    m_lo = m_lo / T::lit(2.0);
                }
                side = 1;
                if m <= T::tol(1e-14) {
                    break;
                }
            } else {
                lo = mid;
                m_lo = m;
                if side == -1 {
                    m_hi = m_hi / T::lit(2.0);
                }
                side = -1;
            }
        }
        self.branch_value(&best, cap, branch)
            .is_finite()
            .then_some(best)
    }

    /// Pairwise mass-transfer search within one branch, with infeasible trial
    /// points pulled back towards `reference`.
    fn refine(
        &self,
        start: &OutputPoint<T>,
        cap: T,
        branch: Branch,
        reference: Option<&OutputPoint<T>>,
    ) -> (OutputPoint<T>, T) {
        const MAX_PASSES_PER_STEP: usize = 64;
        let ny = start.t.len();
        let mut cur = start.clone();
        let mut cur_val = self.branch_value(&cur, cap, branch);
        let mut step = self.grid_step;
        let floor = T::tol(1e-13);
        let mut passes = 0;
        while step > floor {
            let mut improved = false;
            for i in 0..ny {
                for j in 0..ny {
                    if i == j || cur.t[i] <= T::zero() {
                        continue;
                    }
                    let delta = step.min(cur.t[i]);
                    let mut t = cur.t.clone();
                    t[i] = t[i] - delta;
                    t[j] = t[j] + delta;
                    let direct = self
                        .output_point(t.clone())
                        .filter(|p| self.branch_value(p, cap, branch).is_finite());
                    let cand = match (direct, reference) {
                        (Some(p), _) => Some(p),
                        (None, Some(r)) => self.pull_back(&t, r, cap, branch),
                        (None, None) => None,
                    };
                    if let Some(p) = cand {
                        let v = self.branch_value(&p, cap, branch);
                        if v < cur_val {
                            cur = p;
                            cur_val = v;
                            improved = true;
                        }
                    }
                }
            }
            passes += 1;
            if !improved || passes >= MAX_PASSES_PER_STEP {
                step = step / T::lit(2.0);
                passes = 0;
            }
        }
        (cur, cur_val)
    }

    fn solve(&mut self, cap: T) -> InnerSolution<T> {
        let mut best: Option<(OutputPoint<T>, T)> = None;
        for branch in [Branch::Below, Branch::Above] {
            let start = self
                .grid
                .iter()
                .chain(self.memory.iter())
                .map(|p| (self.branch_value(p, cap, branch), p))
                .filter(|(v, _)| v.is_finite())
                .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
                .map(|(_, p)| p.clone());
            let Some(start) = start else { continue };
            let reference = self.reference(cap, branch);
            let (p, v) = self.refine(&start, cap, branch, reference.as_ref());
            if best.as_ref().map_or(true, |(_, b)| v < *b) {
                best = Some((p, v));
            }
        }
        let (best, _) = best.expect("deterministic outputs are always feasible");
        let channel = self.realize(&best, cap);
        let mut value = self.full_objective(&channel);
        let mut channel = channel;
        self.memory.push(best);

        if let Some(entry) = self.lattice_best(cap).cloned() {
            if entry.value < value - T::tol(1e-9) {
                log::warn!(
                    "channel lattice beat the reduced solver ({} < {})",
                    entry.value,
                    value
                );
                self.lattice_overrides += 1;
                value = entry.value;
                channel = Channel::from_flat_unchecked(
                    self.w.in_size(),
                    self.w.out_size(),
                    entry.channel,
                );
                let t = push_forward_unchecked(self.q, &channel);
                if let Some(p) = self.output_point(t) {
                    self.memory.push(p);
                }
            }
        }
        InnerSolution {
            value,
            channel: Some(channel),
        }
    }

    /// Smallest objective among stored outputs feasible at `cap`.
    fn envelope(&self, cap: T) -> T {
        self.memory
            .iter()
            .map(|p| self.reduced(p, cap))
            .fold(T::infinity(), T::min)
    }
}

/// `min_{V : H(V|q) ≤ H(W|q) + s} D(qV‖P_Y) + |I(q;V) − R|^+`.
pub fn inner_min_in<T: Real>(
    q: &Pmf<T>,
    w: &Channel<T>,
    py: &Pmf<T>,
    s: T,
    rate: T,
) -> Result<InnerSolution<T>> {
    inner_min_in_with(q, w, py, s, rate, DEFAULT_V_RESOLUTION)
}

pub fn inner_min_in_with<T: Real>(
    q: &Pmf<T>,
    w: &Channel<T>,
    py: &Pmf<T>,
    s: T,
    rate: T,
    v_resolution: usize,
) -> Result<InnerSolution<T>> {
    check_shapes(q, w)?;
    if py.alphabet_size() != w.out_size() {
        return Err(Error::DimensionMismatch {
            expected: w.out_size(),
            found: py.alphabet_size(),
        });
    }
    if !(s >= T::zero()) {
        return Err(Error::InvalidArgument(format!("slack must be >= 0, got {s}")));
    }
    let cap = cond_entropy_unchecked(w, q.probs()) + s;
    Ok(InSolver::new(q.probs(), w, py, rate, v_resolution).solve(cap))
}

// ---------------------------------------------------------------------------
// Balancing

/// One bisection iterate: raw solver values and the monotone envelopes.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry<T> {
    pub s: T,
    pub f_raw: T,
    pub g_raw: T,
    pub f: T,
    pub g: T,
}

/// Crossing of `f` and `g` for one input distribution.
#[derive(Debug, Clone)]
pub struct BalancedSolution<T> {
    pub qx: Pmf<T>,
    pub s_star: T,
    pub value: T,
    pub inner_in_value: T,
    pub inner_out_value: T,
    pub v_in: Channel<T>,
    pub v_out: Option<Channel<T>>,
    /// Iterates sorted by `s`.
    pub trace: Vec<TraceEntry<T>>,
    /// Largest departure of the raw inner values from monotonicity.
    pub max_raw_violation: T,
    /// `(|f(hi) − f(lo)| + |g(hi) − g(lo)|) / (hi − lo)` at the final bracket;
    /// `+inf` when `g` jumps to infeasible inside it.
    pub slope_bound: T,
    pub bisection_passes: usize,
    pub lattice_overrides: usize,
}

impl<T: Real> BalancedSolution<T> {
    pub fn crossing_gap(&self) -> T {
        (self.inner_in_value - self.inner_out_value).abs()
    }
}

fn violation<T: Real>(earlier: T, later: T, non_increasing: bool) -> T {
    let (a, b) = if non_increasing { (later, earlier) } else { (earlier, later) };
    // a must not exceed b.
    if a == T::infinity() && b == T::infinity() {
        return T::zero();
    }
    if a == T::infinity() {
        return T::infinity();
    }
    (a - b).max(T::zero())
}

/// Largest monotonicity violation along a trace sorted by `s`; `f` must be
/// non-increasing and `g` non-decreasing.
pub fn trace_violation<T: Real>(trace: &[TraceEntry<T>], raw: bool) -> T {
    trace
        .windows(2)
        .map(|p| {
            let (f0, f1, g0, g1) = if raw {
                (p[0].f_raw, p[1].f_raw, p[0].g_raw, p[1].g_raw)
            } else {
                (p[0].f, p[1].f, p[0].g, p[1].g)
            };
            violation(f0, f1, true).max(violation(g0, g1, false))
        })
        .fold(T::zero(), T::max)
}

struct Evaluation<T> {
    s: T,
    f_raw: T,
    g_raw: T,
    v_in: Channel<T>,
    v_out: Option<Channel<T>>,
}

/// Bisects the slack `s ∈ [0, log2|Y|]` for the crossing of `f` (non-increasing)
/// and `g` (non-decreasing) and returns the common value.
pub fn balance_s<T: Real>(
    q: &Pmf<T>,
    w: &Channel<T>,
    py: &Pmf<T>,
    rate: T,
    tol: T,
) -> Result<BalancedSolution<T>> {
    balance_s_with(q, w, py, rate, tol, DEFAULT_V_RESOLUTION)
}

pub fn balance_s_with<T: Real>(
    q: &Pmf<T>,
    w: &Channel<T>,
    py: &Pmf<T>,
    rate: T,
    tol: T,
    v_resolution: usize,
) -> Result<BalancedSolution<T>> {
    check_shapes(q, w)?;
    if py.alphabet_size() != w.out_size() {
        return Err(Error::DimensionMismatch {
            expected: w.out_size(),
            found: py.alphabet_size(),
        });
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("s tolerance must be positive".into()));
    }
    let qp = q.probs();
    let base = cond_entropy_unchecked(w, qp);
    let s_max = T::from_usize_lossy(w.out_size()).log2();
    let mut in_solver = InSolver::new(qp, w, py, rate, v_resolution);
    let mut out_solver = OutSolver::new(qp, w);
    let mut evals: Vec<Evaluation<T>> = Vec::new();

    let evaluate = |s: T,
                        evals: &mut Vec<Evaluation<T>>,
                        in_solver: &mut InSolver<'_, T>,
                        out_solver: &mut OutSolver<'_, T>| {
        if let Some(i) = evals.iter().position(|e| e.s == s) {
            return i;
        }
        let fin = in_solver.solve(base + s);
        let gout = out_solver.solve(s);
        evals.push(Evaluation {
            s,
            f_raw: fin.value,
            g_raw: gout.value,
            v_in: fin.channel.expect("in-set problem is always feasible"),
            v_out: gout.channel,
        });
        evals.len() - 1
    };
    let env_f = |s: T, raw: T, solver: &InSolver<'_, T>| raw.min(solver.envelope(base + s));
    let env_g = |s: T, raw: T, solver: &OutSolver<'_, T>| raw.min(solver.envelope(s));

    let zero = T::zero();
    let i0 = evaluate(zero, &mut evals, &mut in_solver, &mut out_solver);
    let mut passes = 0;
    let (mut lo, mut hi);
    loop {
        passes += 1;
        lo = zero;
        hi = s_max;
        evaluate(hi, &mut evals, &mut in_solver, &mut out_solver);
        if env_f(zero, evals[i0].f_raw, &in_solver) <= T::tol(1e-12) {
            break;
        }
        while hi - lo > tol {
            let mid = (lo + hi) / T::lit(2.0);
            let i = evaluate(mid, &mut evals, &mut in_solver, &mut out_solver);
            let f = env_f(mid, evals[i].f_raw, &in_solver);
            let g = env_g(mid, evals[i].g_raw, &out_solver);
            if f > g {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // Later iterates may have improved the envelope at earlier decisions.
        let consistent = evals.iter().all(|e| {
            let f = env_f(e.s, e.f_raw, &in_solver);
            let g = env_g(e.s, e.g_raw, &out_solver);
            if e.s <= lo && e.s > zero {
                f > g
            } else if e.s >= hi {
                f <= g
            } else {
                true
            }
        });
        if consistent || passes >= 3 {
            break;
        }
    }

    let mut trace: Vec<TraceEntry<T>> = evals
        .iter()
        .map(|e| TraceEntry {
            s: e.s,
            f_raw: e.f_raw,
            g_raw: e.g_raw,
            f: env_f(e.s, e.f_raw, &in_solver),
            g: env_g(e.s, e.g_raw, &out_solver),
        })
        .collect();
    trace.sort_by(|a, b| a.s.partial_cmp(&b.s).unwrap());

    let max_raw_violation = trace_violation(&trace, true);
    if max_raw_violation > T::lit(SOLVER_NOISE) {
        return Err(Error::MonotonicityViolation {
            which: "raw inner values",
            amount: max_raw_violation.to_f64_lossy(),
            limit: SOLVER_NOISE,
        });
    }
    let env_violation = trace_violation(&trace, false);
    if env_violation > T::tol(ENVELOPE_SLACK) {
        return Err(Error::MonotonicityViolation {
            which: "inner envelopes",
            amount: env_violation.to_f64_lossy(),
            limit: ENVELOPE_SLACK,
        });
    }

    let at = |s: T| trace.iter().find(|e| e.s == s).expect("evaluated");
    let eval_at = |s: T| evals.iter().find(|e| e.s == s).expect("evaluated");
    let f0 = at(zero).f;
    let lattice_overrides = in_solver.lattice_overrides;
    if f0 <= T::tol(1e-12) {
        let e = eval_at(zero);
        return Ok(BalancedSolution {
            qx: q.clone(),
            s_star: zero,
            value: zero,
            inner_in_value: f0,
            inner_out_value: zero,
            v_in: e.v_in.clone(),
            v_out: e.v_out.clone(),
            trace,
            max_raw_violation,
            slope_bound: zero,
            bisection_passes: passes,
            lattice_overrides,
        });
    }

    let (lo_e, hi_e) = (at(lo), at(hi));
    let lo_min = lo_e.f.min(lo_e.g);
    let hi_min = hi_e.f.min(hi_e.g);
    let (s_star, entry) = if lo_min >= hi_min { (lo, lo_e) } else { (hi, hi_e) };
    let width = hi - lo;
    let slope_bound = if width > zero {
        ((hi_e.f - lo_e.f).abs() + (hi_e.g - lo_e.g).abs()) / width
    } else {
        T::infinity()
    };
    let slope_bound = if slope_bound.is_nan() { T::infinity() } else { slope_bound };
    let e = eval_at(s_star);
    Ok(BalancedSolution {
        qx: q.clone(),
        s_star,
        value: lo_min.max(hi_min),
        inner_in_value: entry.f,
        inner_out_value: entry.g,
        v_in: e.v_in.clone(),
        v_out: e.v_out.clone(),
        trace,
        max_raw_violation,
        slope_bound,
        bisection_passes: passes,
        lattice_overrides,
    })
}

// ---------------------------------------------------------------------------
// Outer minimization over Q_X

/// `E_c` at the instance's rate: a `Q_X` lattice over the whole simplex plus
/// pairwise refinement around the best point.
pub fn ec_value<T: Real>(instance: &ConverseInstance<T>) -> Result<(BalancedSolution<T>, usize)> {
    instance.validate()?;
    let w = &instance.channel;
    let nx = w.in_size();
    let n = instance.qx_resolution;
    let inv = T::one() / T::from_usize_lossy(n);
    let solve = |q: &[T]| {
        balance_s_with(
            &Pmf::from_noisy(q.to_vec()),
            w,
            &instance.target,
            instance.rate,
            instance.s_tolerance,
            instance.v_resolution,
        )
    };
    let lattice: Vec<Vec<T>> = compositions(n, nx)
        .into_iter()
        .map(|c| c.iter().map(|&v| T::from_usize_lossy(v) * inv).collect())
        .collect();
    let solved: Vec<BalancedSolution<T>> = lattice
        .par_iter()
        .map(|q| solve(q))
        .collect::<Result<Vec<_>>>()?;
    let mut evaluations = solved.len();
    let mut best = solved
        .into_iter()
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("lattice is non-empty");

    let mut step = inv;
    let min_step = T::tol(QX_MIN_STEP);
    while step >= min_step && best.value > T::zero() {
        let mut improved = false;
        for i in 0..nx {
            for j in 0..nx {
                let q = best.qx.probs();
                if i == j || q[i] <= T::zero() {
                    continue;
                }
                let delta = step.min(q[i]);
                let mut trial = q.to_vec();
                trial[i] = trial[i] - delta;
                trial[j] = trial[j] + delta;
                let cand = solve(&trial)?;
                evaluations += 1;
                if cand.value < best.value {
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step = step / T::lit(2.0);
        }
    }
    Ok((best, evaluations))
}

/// `E_c(R)` over a rate grid.
pub fn ec_curve<T: Real>(instance: &ConverseInstance<T>, rates: &[T]) -> Result<ExponentCurve<T>> {
    instance.validate()?;
    let points = rates
        .par_iter()
        .map(|&rate| {
            let mut inst = instance.clone();
            inst.rate = rate;
            let (sol, evaluations) = ec_value(&inst)?;
            Ok(CurvePoint {
                rate,
                value: sol.value,
                alpha_star: None,
                s_star: Some(sol.s_star),
                optimizer: sol.qx,
                evaluations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExponentCurve { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{kl, mutual_information};

    fn pmf(v: &[f64]) -> Pmf<f64> {
        Pmf::from_f64(v).unwrap()
    }

    fn bsc(p: f64) -> Channel<f64> {
        Channel::bsc(p).unwrap()
    }

    #[test]
    fn spanning_tree_counts() {
        // Cayley's formula for K_{a,b}: a^(b-1) b^(a-1).
        assert_eq!(spanning_trees(2, 2).len(), 4);
        assert_eq!(spanning_trees(2, 3).len(), 12);
        assert_eq!(spanning_trees(3, 3).len(), 81);
        assert_eq!(spanning_trees(1, 3).len(), 1);
    }

    #[test]
    fn out_zero_slack_returns_w() {
        let q = pmf(&[0.48, 0.52]);
        let sol = inner_min_out(&q, &bsc(0.1), 0.0).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.channel.unwrap(), bsc(0.1));
    }

    #[test]
    fn out_maximal_slack_reaches_uniform() {
        let q = pmf(&[0.48, 0.52]);
        let h = crate::prob::entropy(&pmf(&[0.1, 0.9]));
        let sol = inner_min_out(&q, &bsc(0.1), 1.0 - h).unwrap();
        assert!((sol.value - 0.736_966).abs() < 1e-5);
        let v = sol.channel.unwrap();
        assert!((v.get(0, 0) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn out_beyond_maximal_slack_is_infeasible() {
        let q = pmf(&[0.48, 0.52]);
        let sol = inner_min_out(&q, &bsc(0.1), 0.6).unwrap();
        assert!(!sol.is_feasible());
        assert_eq!(sol.value, f64::INFINITY);
    }

    #[test]
    fn in_zero_when_w_is_feasible_and_rate_is_large() {
        let q = pmf(&[0.48, 0.52]);
        let py = pmf(&[0.484, 0.516]);
        let sol = inner_min_in(&q, &bsc(0.1), &py, 0.0, 0.6).unwrap();
        assert!(sol.value < 1e-12);
    }

    #[test]
    fn in_solution_respects_entropy_cap() {
        let q = pmf(&[0.3, 0.7]);
        let w = Channel::from_f64(&[&[0.8, 0.2], &[0.25, 0.75]]).unwrap();
        let py = pmf(&[0.5, 0.5]);
        for s in [0.0, 0.05, 0.2] {
            let sol = inner_min_in(&q, &w, &py, s, 0.1).unwrap();
            let v = sol.channel.unwrap();
            let cap = crate::prob::cond_entropy(&w, &q).unwrap() + s;
            assert!(crate::prob::cond_entropy(&v, &q).unwrap() <= cap + 1e-12);
            // A constant deterministic channel is always feasible.
            let det_value = kl(&pmf(&[0.0, 1.0]), &py).unwrap();
            assert!(sol.value <= det_value + 1e-12);
        }
    }

    #[test]
    fn balance_vanishes_at_high_rate_on_feasible_input() {
        let q = pmf(&[0.48, 0.52]);
        let py = pmf(&[0.484, 0.516]);
        let i = mutual_information(&q, &bsc(0.1)).unwrap();
        let sol = balance_s(&q, &bsc(0.1), &py, i + 0.01, 1e-6).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.s_star, 0.0);
    }

    #[test]
    fn balance_is_positive_below_information() {
        let py = pmf(&[0.484, 0.516]);
        for q in [[0.48, 0.52], [0.3, 0.7], [1.0, 0.0]] {
            let sol = balance_s(&pmf(&q), &bsc(0.1), &py, 0.25, 1e-6).unwrap();
            assert!(sol.value > 0.0, "q = {q:?}");
            assert!(sol.s_star >= 0.0 && sol.s_star <= 1.0);
            assert!(sol.max_raw_violation <= SOLVER_NOISE);
            assert!(trace_violation(&sol.trace, false) <= ENVELOPE_SLACK);
            if sol.slope_bound.is_finite() {
                assert!(sol.crossing_gap() <= 10.0 * 1e-6 * sol.slope_bound + 1e-12);
            }
        }
    }

    #[test]
    fn instance_validation() {
        let w = bsc(0.1);
        let py = pmf(&[0.484, 0.516]);
        assert!(ConverseInstance::new(w.clone(), py.clone(), 0.1)
            .unwrap()
            .with_resolutions(8, 32)
            .is_err());
        assert!(ConverseInstance::new(w.clone(), pmf(&[0.2, 0.3, 0.5]), 0.1).is_err());
        assert!(ConverseInstance::new(w, py, 0.1)
            .unwrap()
            .with_s_tolerance(0.0)
            .is_err());
    }
}
