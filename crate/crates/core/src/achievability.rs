//! Upper bound `E_a(R)` on the strong converse exponent.
//!
//! The production path maximizes `λ · [I_{1/(1+λ)}(P_X, W) − R]` over
//! `λ ∈ [0, 1]` (equivalently `α = 1/(1+λ) ∈ [1/2, 1]`) and then minimizes over
//! the feasible inputs. [`ea_primal_oracle`] minimizes the joint-distribution
//! form directly and only serves as a cross-check.

use rayon::prelude::*;

use crate::curve::{CurvePoint, ExponentCurve};
use crate::error::{Error, Result};
use crate::feasible::FeasiblePolytope;
use crate::prob::{joint_of, BackwardChannel, Channel, InfoDensity, Pmf, RenyiProfile};
use crate::scalar::{log2_sum_exp2, Real};
use crate::search::golden_section_max;

/// Grid points of the fallback λ scan (65 points including both ends).
pub const LAMBDA_SCAN_INTERVALS: usize = 64;
pub const LAMBDA_TOL: f64 = 1e-7;
/// Depth of an interior dip in the λ scan above which the objective is
/// reported as not unimodal.
pub const VALLEY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AchievabilityDiagnostics<T> {
    pub evaluations: usize,
    /// Deepest interior dip found by the λ scan; `≤ 1e-9` means unimodal.
    pub max_valley_depth: T,
    pub unimodal: bool,
    /// Gain of the golden-section refinement over the best scan point.
    pub refinement_delta: T,
    /// The maximum came out negative from round-off and was clamped to 0.
    pub clamped: bool,
}

/// `max_{λ∈[0,1]} λ [I_{1/(1+λ)}(P_X, W) − R]` for one input distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct AchievabilityResult<T> {
    pub rate: T,
    pub value: T,
    pub optimizer_alpha: T,
    pub optimizer_lambda: T,
    pub optimizer_px: Pmf<T>,
    pub diagnostics: AchievabilityDiagnostics<T>,
}

fn lambda_objective<T: Real>(profile: &RenyiProfile<T>, lambda: T, rate: T) -> T {
    profile.scaled_renyi(lambda) - lambda * rate
}

/// Dual form of `E_a` at a fixed input distribution `p`.
pub fn ea_renyi<T: Real>(p: &Pmf<T>, w: &Channel<T>, rate: T) -> Result<AchievabilityResult<T>> {
    ea_renyi_tol(p, w, rate, T::lit(LAMBDA_TOL))
}

/// [`ea_renyi`] with an explicit golden-section tolerance in `λ`.
pub fn ea_renyi_tol<T: Real>(
    p: &Pmf<T>,
    w: &Channel<T>,
    rate: T,
    lambda_tol: T,
) -> Result<AchievabilityResult<T>> {
    if !(rate >= T::zero()) {
        return Err(Error::InvalidArgument(format!("rate must be >= 0, got {rate}")));
    }
    if !(lambda_tol > T::zero()) {
        return Err(Error::InvalidArgument("lambda tolerance must be positive".into()));
    }
    let profile = RenyiProfile::new(p, w)?;
    Ok(ea_renyi_with(&profile, p, rate, lambda_tol))
}

pub(crate) fn ea_renyi_with<T: Real>(
    profile: &RenyiProfile<T>,
    p: &Pmf<T>,
    rate: T,
    lambda_tol: T,
) -> AchievabilityResult<T> {
    let n = LAMBDA_SCAN_INTERVALS;
    let grid: Vec<T> = (0..=n)
        .map(|k| T::from_usize_lossy(k) / T::from_usize_lossy(n))
        .collect();
    let scan: Vec<T> = grid
        .iter()
        .map(|&l| lambda_objective(profile, l, rate))
        .collect();
    let mut evaluations = scan.len();

    // Interior dip: a point lying below some value on each side of it.
    let mut prefix = vec![T::neg_infinity(); n + 1];
    let mut suffix = vec![T::neg_infinity(); n + 1];
    for k in 1..=n {
        prefix[k] = prefix[k - 1].max(scan[k - 1]);
    }
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1].max(scan[k + 1]);
    }
    let max_valley_depth = (1..n)
        .map(|k| prefix[k].min(suffix[k]) - scan[k])
        .fold(T::zero(), T::max);
    let unimodal = max_valley_depth <= T::tol(VALLEY_TOL);

    // First (smallest-λ) scan maximum.
    let mut best_k = 0;
    for k in 1..=n {
        if scan[k] > scan[best_k] {
            best_k = k;
        }
    }
    let scan_best = scan[best_k];
    let lo = grid[best_k.saturating_sub(1)];
    let hi = grid[(best_k + 1).min(n)];
    let refined = golden_section_max(
        |l| lambda_objective(profile, l, rate),
        lo,
        hi,
        T::tol(lambda_tol.to_f64_lossy()),
    );
    evaluations += refined.evaluations;

    let (mut lambda, mut value) = (grid[best_k], scan_best);
    if refined.value > scan_best {
        lambda = refined.arg;
        value = refined.value;
    }
    let refinement_delta = value - scan_best;

    let mut clamped = false;
    if value <= T::zero() {
        if value < T::zero() {
            log::debug!("dual E_a maximum {value} clamped to 0");
            clamped = true;
        }
        value = T::zero();
        lambda = T::zero();
    }

    AchievabilityResult {
        rate,
        value,
        optimizer_alpha: T::one() / (T::one() + lambda),
        optimizer_lambda: lambda,
        optimizer_px: p.clone(),
        diagnostics: AchievabilityDiagnostics {
            evaluations,
            max_valley_depth,
            unimodal,
            refinement_delta,
            clamped,
        },
    }
}

/// Largest joint alphabet the primal oracle accepts.
pub const PRIMAL_ORACLE_MAX_CELLS: usize = 9;
/// Minimum number of lattice points in the primal oracle's coarse scan.
pub const PRIMAL_LATTICE_POINTS: usize = 100_000;

struct PrimalProblem<T> {
    nx: usize,
    ny: usize,
    pxy: Vec<T>,
    px: Vec<T>,
    rate: T,
}

impl<T: Real> PrimalProblem<T> {
    /// `D(Q‖P_XY) + |D(Q‖P_X Q_Y) − R|^+`, with the hinge replaced by a
    /// softplus of temperature `tau` when given.
    fn objective(&self, q: &[T], tau: Option<T>) -> T {
        let mut qy = vec![T::zero(); self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                qy[y] = qy[y] + q[x * self.ny + y];
            }
        }
        let mut d_joint = T::zero();
        let mut d_prod = T::zero();
        for x in 0..self.nx {
            for y in 0..self.ny {
                let v = q[x * self.ny + y];
                if v <= T::zero() {
                    continue;
                }
                let p = self.pxy[x * self.ny + y];
                if p <= T::zero() || self.px[x] <= T::zero() {
                    return T::infinity();
                }
                d_joint = d_joint + v * (v / p).log2();
                d_prod = d_prod + v * (v / (self.px[x] * qy[y])).log2();
            }
        }
        let excess = d_prod - self.rate;
        let hinge = match tau {
            None => excess.max(T::zero()),
            Some(t) => {
                let z = excess / t;
                if z > T::zero() {
                    excess + t * (T::one() + (-z).exp2()).log2()
                } else {
                    t * (T::one() + z.exp2()).log2()
                }
            }
        };
        d_joint + hinge
    }

    /// Pairwise mass-transfer descent with step halving; an accepted move is
    /// extended by doubling along the same pair.
    fn descend(&self, q: &mut [T], tau: Option<T>, start_step: T) -> T {
        const MAX_PASSES_PER_STEP: usize = 64;
        let k = q.len();
        let mut cur = self.objective(q, tau);
        let mut step = start_step;
        let floor = T::tol(1e-12);
        let mut passes = 0;
        while step > floor {
            let mut improved = false;
            for i in 0..k {
                for j in 0..k {
                    if i == j || q[i] <= T::zero() {
                        continue;
                    }
                    let mut delta = step.min(q[i]);
                    loop {
                        q[i] = q[i] - delta;
                        q[j] = q[j] + delta;
                        let v = self.objective(q, tau);
                        if v < cur {
                            cur = v;
                            improved = true;
                            delta = (delta * T::lit(2.0)).min(q[i]);
                            if delta <= T::zero() {
                                break;
                            }
                        } else {
                            q[i] = q[i] + delta;
                            q[j] = q[j] - delta;
                            break;
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
        cur
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn for_each_composition(total: usize, parts: usize, mut f: impl FnMut(&[usize])) {
    fn rec(left: usize, idx: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if idx + 1 == cur.len() {
            cur[idx] = left;
            f(cur);
            return;
        }
        for c in 0..=left {
            cur[idx] = c;
            rec(left - c, idx + 1, cur, f);
        }
    }
    let mut cur = vec![0; parts];
    rec(total, 0, &mut cur, &mut f);
}

/// Direct minimization of `D(Q_XY‖P_XY) + |D(Q_XY‖P_X Q_Y) − R|^+` over the
/// joint simplex: a Dirichlet-lattice scan of at least
/// [`PRIMAL_LATTICE_POINTS`] points, then pairwise coordinate descent from the
/// best lattice points with a softplus continuation of the hinge.
pub fn ea_primal_oracle<T: Real>(p: &Pmf<T>, w: &Channel<T>, rate: T) -> Result<T> {
    let cells = w.in_size() * w.out_size();
    if cells > PRIMAL_ORACLE_MAX_CELLS {
        return Err(Error::OracleTooLarge {
            cells,
            limit: PRIMAL_ORACLE_MAX_CELLS,
        });
    }
    let joint = joint_of(p, w)?;
    let problem = PrimalProblem {
        nx: w.in_size(),
        ny: w.out_size(),
        pxy: joint.table().to_vec(),
        px: p.probs().to_vec(),
        rate,
    };

    let mut n = 1;
    while binomial(n + cells - 1, cells - 1) < PRIMAL_LATTICE_POINTS as f64 {
        n += 1;
    }
    let inv_n = T::one() / T::from_usize_lossy(n);
    let mut lattice: Vec<(T, Vec<T>)> = Vec::new();
    let keep = 4;
    for_each_composition(n, cells, |c| {
        let q: Vec<T> = c.iter().map(|&v| T::from_usize_lossy(v) * inv_n).collect();
        let v = problem.objective(&q, None);
        if lattice.len() < keep || v < lattice[keep - 1].0 {
            let pos = lattice.partition_point(|(u, _)| *u <= v);
            lattice.insert(pos, (v, q));
            lattice.truncate(keep);
        }
    });

    let mut best = lattice
        .first()
        .map(|(v, _)| *v)
        .unwrap_or(T::infinity())
        .min(problem.objective(joint.table(), None));
    let mut starts: Vec<Vec<T>> = lattice.into_iter().map(|(_, q)| q).collect();
    starts.push(joint.table().to_vec());
    for mut q in starts {
        for tau in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6] {
            problem.descend(&mut q, Some(T::tol(tau)), inv_n);
        }
        let v = problem.descend(&mut q, None, T::tol(1e-6));
        best = best.min(v);
    }
    Ok(best.max(T::zero()))
}

/// Closed form `min_{Q_Y} D(Q_Y‖P_Y) + E_{Q_Y}[f] = −log2 E_{P_Y}[2^{−f}]`.
pub fn gibbs_min<T: Real>(f: &[T], py: &Pmf<T>) -> Result<T> {
    if f.len() != py.alphabet_size() {
        return Err(Error::DimensionMismatch {
            expected: py.alphabet_size(),
            found: f.len(),
        });
    }
    Ok(-log2_sum_exp2(
        py.support().map(|y| py.get(y).log2() - f[y]),
    ))
}

/// Closed form of `min_{V̄} D(V̄‖W̄|Q_Y) + λ E_{Q_XY}[ι]`:
/// `−E_{Q_Y}[log2 E_{W̄}[2^{−λι} | Y]]`.
pub fn tilted_inner_min<T: Real>(
    lambda: T,
    qy: &Pmf<T>,
    backward: &BackwardChannel<T>,
    iota: &InfoDensity<T>,
) -> Result<T> {
    if qy.alphabet_size() != backward.out_size() || iota.ny() != backward.out_size() {
        return Err(Error::DimensionMismatch {
            expected: backward.out_size(),
            found: qy.alphabet_size(),
        });
    }
    let mut acc = T::zero();
    for y in qy.support() {
        let row = backward.row(y).ok_or_else(|| {
            Error::InvalidArgument(format!("Q_Y charges output {y} outside the support of P_Y"))
        })?;
        let inner = log2_sum_exp2(row.iter().enumerate().filter(|(_, b)| **b > T::zero()).map(
            |(x, &b)| {
                let i = iota.get(x, y).unwrap_or(T::zero());
                b.log2() - lambda * i
            },
        ));
        acc = acc - qy.get(y) * inner;
    }
    Ok(acc)
}

/// `E_a(R)` over a rate grid: for each rate, minimizes the dual value over
/// the feasible inputs.
pub fn ea_curve<T: Real>(
    w: &Channel<T>,
    py: &Pmf<T>,
    rates: &[T],
    resolution: usize,
) -> Result<ExponentCurve<T>> {
    let polytope = FeasiblePolytope::build(w, py)?;
    ea_curve_on(&polytope, rates, resolution, T::lit(LAMBDA_TOL))
}

pub fn ea_curve_on<T: Real>(
    polytope: &FeasiblePolytope<T>,
    rates: &[T],
    resolution: usize,
    lambda_tol: T,
) -> Result<ExponentCurve<T>> {
    let w = polytope.channel();
    let points = rates
        .par_iter()
        .map(|&rate| {
            if !(rate >= T::zero()) {
                return Err(Error::InvalidArgument(format!("rate must be >= 0, got {rate}")));
            }
            let m = polytope.minimize_over(
                |p| {
                    ea_renyi_tol(p, w, rate, lambda_tol)
                        .map(|r| r.value)
                        .unwrap_or(T::infinity())
                },
                resolution,
            )?;
            let r = ea_renyi_tol(&m.point, w, rate, lambda_tol)?;
            Ok(CurvePoint {
                rate,
                value: r.value,
                alpha_star: Some(r.optimizer_alpha),
                s_star: None,
                optimizer: m.point,
                evaluations: m.evaluations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExponentCurve { points })
}

/// `min_{P_X∈S} I(P_X; W)`: the rate above which both bounds vanish.
pub fn min_information_over<T: Real>(
    polytope: &FeasiblePolytope<T>,
    resolution: usize,
) -> Result<(Pmf<T>, T)> {
    let w = polytope.channel();
    let m = polytope.minimize_over(
        |p| crate::prob::mutual_information(p, w).unwrap_or(T::infinity()),
        resolution,
    )?;
    Ok((m.point, m.value))
}
