//! Finite-alphabet distributions and the information measures built on them.
//!
//! All quantities are in bits. The conventions `0 log 0 = 0` and
//! `0 log (0/0) = 0` hold everywhere; a divergence whose first argument charges
//! a symbol outside the support of the second is `+inf` rather than an error.

use crate::error::{Error, Result};
use crate::scalar::{log2_sum_exp2, xlog2x, Real};

/// Probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf<T> {
    probs: Vec<T>,
}

fn check_probability_vector<T: Real>(probs: &[T], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what}: empty alphabet")));
    }
    let mut sum = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < T::zero() {
            return Err(Error::InvalidDistribution(format!(
                "{what}: entry {i} is {p}"
            )));
        }
        sum = sum + p;
    }
    if (sum - T::one()).abs() > T::tol(1e-12) {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entries sum to {sum}"
        )));
    }
    Ok(())
}

impl<T: Real> Pmf<T> {
    /// Validates non-negativity and unit mass (absolute tolerance `1e-12`).
    pub fn new(probs: Vec<T>) -> Result<Self> {
        check_probability_vector(&probs, "pmf")?;
        Ok(Self { probs })
    }

    /// Scales non-negative weights to unit mass.
    pub fn normalized(weights: Vec<T>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn from_f64(probs: &[f64]) -> Result<Self> {
        Self::new(probs.iter().map(|&p| T::lit(p)).collect())
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0, "alphabet must be non-empty");
        let p = T::one() / T::from_usize_lossy(size);
        Self {
            probs: vec![p; size],
        }
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        assert!(at < size, "symbol outside alphabet");
        let mut probs = vec![T::zero(); size];
        probs[at] = T::one();
        Self { probs }
    }

    /// Clamps round-off negatives and renormalizes. For internal use on
    /// vectors that are distributions up to floating-point noise.
    pub(crate) fn from_noisy(mut probs: Vec<T>) -> Self {
        for p in probs.iter_mut() {
            if *p < T::zero() {
                *p = T::zero();
            }
        }
        let total: T = probs.iter().copied().sum();
        for p in probs.iter_mut() {
            *p = *p / total;
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, i: usize) -> T {
        self.probs[i]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > T::zero())
            .map(|(i, _)| i)
    }
}

/// Row-stochastic conditional distribution `V(y|x)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T> {
    in_size: usize,
    out_size: usize,
    data: Vec<T>,
}

impl<T: Real> Channel<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let in_size = rows.len();
        if in_size == 0 {
            return Err(Error::InvalidDistribution("channel has no rows".into()));
        }
        let out_size = rows[0].len();
        let mut data = Vec::with_capacity(in_size * out_size);
        for (x, row) in rows.into_iter().enumerate() {
            if row.len() != out_size {
                return Err(Error::DimensionMismatch {
                    expected: out_size,
                    found: row.len(),
                });
            }
            check_probability_vector(&row, &format!("channel row {x}"))?;
            data.extend(row);
        }
        Ok(Self {
            in_size,
            out_size,
            data,
        })
    }

    pub fn from_f64(rows: &[&[f64]]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| r.iter().map(|&v| T::lit(v)).collect())
                .collect(),
        )
    }

    pub(crate) fn from_flat_unchecked(in_size: usize, out_size: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), in_size * out_size);
        Self {
            in_size,
            out_size,
            data,
        }
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: T) -> Result<Self> {
        Self::new(vec![vec![T::one() - p, p], vec![p, T::one() - p]])
    }

    pub fn identity(size: usize) -> Self {
        let mut data = vec![T::zero(); size * size];
        for i in 0..size {
            data[i * size + i] = T::one();
        }
        Self::from_flat_unchecked(size, size, data)
    }

    /// Channel whose every row equals `row`.
    pub fn constant(in_size: usize, row: &Pmf<T>) -> Self {
        let mut data = Vec::with_capacity(in_size * row.alphabet_size());
        for _ in 0..in_size {
            data.extend_from_slice(row.probs());
        }
        Self::from_flat_unchecked(in_size, row.alphabet_size(), data)
    }

    pub fn in_size(&self) -> usize {
        self.in_size
    }

    pub fn out_size(&self) -> usize {
        self.out_size
    }

    pub fn row(&self, x: usize) -> &[T] {
        &self.data[x * self.out_size..(x + 1) * self.out_size]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks(self.out_size)
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[x * self.out_size + y]
    }

    pub fn as_flat(&self) -> &[T] {
        &self.data
    }

    /// Tilted channel `V_t(y|x) ∝ W(y|x)^t` for `t ∈ [0, 1]`; `t = 0` is the
    /// uniform distribution on each row's support.
    pub fn tilted(&self, t: T) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.rows() {
            let logs: Vec<T> = row
                .iter()
                .map(|&w| {
                    if w > T::zero() {
                        t * w.log2()
                    } else {
                        T::neg_infinity()
                    }
                })
                .collect();
            let norm = log2_sum_exp2(logs.iter().copied());
            data.extend(logs.iter().map(|&l| {
                if l == T::neg_infinity() {
                    T::zero()
                } else {
                    (l - norm).exp2()
                }
            }));
        }
        Self::from_flat_unchecked(self.in_size, self.out_size, data)
    }
}

/// Joint distribution over `X × Y`, stored row-major by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf<T> {
    nx: usize,
    ny: usize,
    table: Vec<T>,
}

impl<T: Real> JointPmf<T> {
    pub fn new(nx: usize, ny: usize, table: Vec<T>) -> Result<Self> {
        if table.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                found: table.len(),
            });
        }
        check_probability_vector(&table, "joint pmf")?;
        Ok(Self { nx, ny, table })
    }

    /// Product joint `p ⊗ r`.
    pub fn product(p: &Pmf<T>, r: &Pmf<T>) -> Self {
        let mut table = Vec::with_capacity(p.alphabet_size() * r.alphabet_size());
        for &a in p.probs() {
            for &b in r.probs() {
                table.push(a * b);
            }
        }
        Self {
            nx: p.alphabet_size(),
            ny: r.alphabet_size(),
            table,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.table[x * self.ny + y]
    }

    pub fn table(&self) -> &[T] {
        &self.table
    }

    pub fn marginal_x(&self) -> Pmf<T> {
        Pmf::from_noisy(
            self.table
                .chunks(self.ny)
                .map(|row| row.iter().copied().sum())
                .collect(),
        )
    }

    pub fn marginal_y(&self) -> Pmf<T> {
        let mut m = vec![T::zero(); self.ny];
        for row in self.table.chunks(self.ny) {
            for (acc, &v) in m.iter_mut().zip(row) {
                *acc = *acc + v;
            }
        }
        Pmf::from_noisy(m)
    }

    /// Forward channel `Q(y|x)`; rows with zero x-mass are set to uniform.
    pub fn forward_channel(&self) -> Channel<T> {
        let mut data = Vec::with_capacity(self.table.len());
        for row in self.table.chunks(self.ny) {
            let total: T = row.iter().copied().sum();
            if total > T::zero() {
                data.extend(row.iter().map(|&v| v / total));
            } else {
                data.extend(std::iter::repeat(T::one() / T::from_usize_lossy(self.ny)).take(self.ny));
            }
        }
        Channel::from_flat_unchecked(self.nx, self.ny, data)
    }

    pub fn as_pmf(&self) -> Pmf<T> {
        Pmf {
            probs: self.table.clone(),
        }
    }
}

/// Backward channel `W̄(x|y) = J(x,y) / J_Y(y)` together with the y-marginal.
/// Rows for outputs of zero probability are absent.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardChannel<T> {
    marginal_y: Pmf<T>,
    nx: usize,
    rows: Vec<Option<Vec<T>>>,
}

impl<T: Real> BackwardChannel<T> {
    pub fn marginal_y(&self) -> &Pmf<T> {
        &self.marginal_y
    }

    pub fn in_size(&self) -> usize {
        self.nx
    }

    pub fn out_size(&self) -> usize {
        self.rows.len()
    }

    /// `W̄(·|y)`, or `None` when `J_Y(y) = 0`.
    pub fn row(&self, y: usize) -> Option<&[T]> {
        self.rows[y].as_deref()
    }

    /// Reassembles `J(x,y) = J_Y(y) W̄(x|y)`.
    pub fn joint(&self) -> JointPmf<T> {
        let ny = self.rows.len();
        let mut table = vec![T::zero(); self.nx * ny];
        for (y, row) in self.rows.iter().enumerate() {
            if let Some(row) = row {
                for (x, &v) in row.iter().enumerate() {
                    table[x * ny + y] = self.marginal_y.get(y) * v;
                }
            }
        }
        JointPmf {
            nx: self.nx,
            ny,
            table,
        }
    }
}

/// Information density `ι(x,y) = log2 J(x,y) / (J_X(x) J_Y(y))`; `None` off the
/// support of `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoDensity<T> {
    nx: usize,
    ny: usize,
    values: Vec<Option<T>>,
}

impl<T: Real> InfoDensity<T> {
    pub fn get(&self, x: usize, y: usize) -> Option<T> {
        self.values[x * self.ny + y]
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Table with an explicit value on every cell; intended for tests and
    /// synthetic instances.
    pub fn from_table(nx: usize, ny: usize, values: Vec<Option<T>>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                found: values.len(),
            });
        }
        Ok(Self { nx, ny, values })
    }
}

fn ensure_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn entropy_slice<T: Real>(p: &[T]) -> T {
    -p.iter().map(|&v| xlog2x(v)).sum::<T>()
}

pub(crate) fn kl_slice<T: Real>(p: &[T], q: &[T]) -> T {
    let mut acc = T::zero();
    for (&a, &b) in p.iter().zip(q) {
        if a > T::zero() {
            if b <= T::zero() {
                return T::infinity();
            }
            acc = acc + a * (a / b).log2();
        }
    }
    // Round-off can push tiny divergences below zero.
    acc.max(T::zero())
}

/// Shannon entropy in bits.
pub fn entropy<T: Real>(p: &Pmf<T>) -> T {
    entropy_slice(p.probs())
}

/// `H(V|q) = Σ_x q(x) H(V(·|x))`.
pub fn cond_entropy<T: Real>(v: &Channel<T>, q: &Pmf<T>) -> Result<T> {
    ensure_len(v.in_size(), q.alphabet_size())?;
    Ok(cond_entropy_unchecked(v, q.probs()))
}

pub(crate) fn cond_entropy_unchecked<T: Real>(v: &Channel<T>, q: &[T]) -> T {
    q.iter()
        .zip(v.rows())
        .filter(|(w, _)| **w > T::zero())
        .map(|(&w, row)| w * entropy_slice(row))
        .sum()
}

/// Relative entropy `D(p‖q)` in bits; `+inf` when `supp p ⊄ supp q`.
pub fn kl<T: Real>(p: &Pmf<T>, q: &Pmf<T>) -> Result<T> {
    ensure_len(p.alphabet_size(), q.alphabet_size())?;
    Ok(kl_slice(p.probs(), q.probs()))
}

/// Conditional divergence `D(V‖W|q) = Σ_x q(x) D(V(·|x)‖W(·|x))`.
pub fn cond_kl<T: Real>(v: &Channel<T>, w: &Channel<T>, q: &Pmf<T>) -> Result<T> {
    ensure_len(v.in_size(), q.alphabet_size())?;
    ensure_len(w.in_size(), q.alphabet_size())?;
    ensure_len(v.out_size(), w.out_size())?;
    Ok(cond_kl_unchecked(v, w, q.probs()))
}

pub(crate) fn cond_kl_unchecked<T: Real>(v: &Channel<T>, w: &Channel<T>, q: &[T]) -> T {
    let mut acc = T::zero();
    for (x, &qx) in q.iter().enumerate() {
        if qx > T::zero() {
            acc = acc + qx * kl_slice(v.row(x), w.row(x));
        }
    }
    acc
}

/// Output distribution `(qV)(y) = Σ_x q(x) V(y|x)`.
pub fn push_forward<T: Real>(q: &Pmf<T>, v: &Channel<T>) -> Result<Pmf<T>> {
    ensure_len(v.in_size(), q.alphabet_size())?;
    Ok(Pmf::from_noisy(push_forward_unchecked(q.probs(), v)))
}

pub(crate) fn push_forward_unchecked<T: Real>(q: &[T], v: &Channel<T>) -> Vec<T> {
    let mut out = vec![T::zero(); v.out_size()];
    for (&qx, row) in q.iter().zip(v.rows()) {
        if qx > T::zero() {
            for (o, &r) in out.iter_mut().zip(row) {
                *o = *o + qx * r;
            }
        }
    }
    out
}

/// Joint table `J(x,y) = q(x) V(y|x)`.
pub fn joint_of<T: Real>(q: &Pmf<T>, v: &Channel<T>) -> Result<JointPmf<T>> {
    ensure_len(v.in_size(), q.alphabet_size())?;
    let mut table = Vec::with_capacity(v.in_size() * v.out_size());
    for (&qx, row) in q.probs().iter().zip(v.rows()) {
        table.extend(row.iter().map(|&r| qx * r));
    }
    Ok(JointPmf {
        nx: v.in_size(),
        ny: v.out_size(),
        table,
    })
}

/// Splits a joint into its y-marginal and the backward channel `W̄(x|y)`.
pub fn backward_of<T: Real>(j: &JointPmf<T>) -> BackwardChannel<T> {
    let marginal_y = j.marginal_y();
    let rows = (0..j.ny())
        .map(|y| {
            let col: Vec<T> = (0..j.nx()).map(|x| j.get(x, y)).collect();
            let total: T = col.iter().copied().sum();
            if total > T::zero() {
                Some(col.into_iter().map(|v| v / total).collect())
            } else {
                None
            }
        })
        .collect();
    BackwardChannel {
        marginal_y,
        nx: j.nx(),
        rows,
    }
}

pub fn info_density<T: Real>(j: &JointPmf<T>) -> InfoDensity<T> {
    let px = j.marginal_x();
    let py = j.marginal_y();
    let mut values = Vec::with_capacity(j.table().len());
    for x in 0..j.nx() {
        for y in 0..j.ny() {
            let v = j.get(x, y);
            values.push(if v > T::zero() {
                Some((v / (px.get(x) * py.get(y))).log2())
            } else {
                None
            });
        }
    }
    InfoDensity {
        nx: j.nx(),
        ny: j.ny(),
        values,
    }
}

/// Shannon mutual information `I(p; W)`.
pub fn mutual_information<T: Real>(p: &Pmf<T>, w: &Channel<T>) -> Result<T> {
    ensure_len(w.in_size(), p.alphabet_size())?;
    Ok(mutual_information_unchecked(p.probs(), w))
}

pub(crate) fn mutual_information_unchecked<T: Real>(p: &[T], w: &Channel<T>) -> T {
    let out = push_forward_unchecked(p, w);
    let mut acc = T::zero();
    for (&px, row) in p.iter().zip(w.rows()) {
        if px <= T::zero() {
            continue;
        }
        for (&wy, &py) in row.iter().zip(&out) {
            if wy > T::zero() {
                acc = acc + px * wy * (wy / py).log2();
            }
        }
    }
    acc.max(T::zero())
}

/// Precomputed backward channel and information density of `(p, W)` for
/// repeated Rényi evaluations.
#[derive(Debug, Clone)]
pub struct RenyiProfile<T> {
    /// `log2 P_Y(y)` for outputs with positive mass.
    log_py: Vec<(usize, T)>,
    /// Per output: `(log2 W̄(x|y), ι(x,y))` over the support of the joint.
    cells: Vec<Vec<(T, T)>>,
    mutual_information: T,
}

impl<T: Real> RenyiProfile<T> {
    pub fn new(p: &Pmf<T>, w: &Channel<T>) -> Result<Self> {
        let joint = joint_of(p, w)?;
        let backward = backward_of(&joint);
        let iota = info_density(&joint);
        let py = backward.marginal_y();
        let mut log_py = Vec::new();
        let mut cells = Vec::new();
        for y in 0..joint.ny() {
            let Some(row) = backward.row(y) else { continue };
            log_py.push((y, py.get(y).log2()));
            cells.push(
                row.iter()
                    .enumerate()
                    .filter_map(|(x, &b)| iota.get(x, y).map(|i| (b.log2(), i)))
                    .collect(),
            );
        }
        Ok(Self {
            log_py,
            cells,
            mutual_information: mutual_information_unchecked(p.probs(), w),
        })
    }

    pub fn mutual_information(&self) -> T {
        self.mutual_information
    }

    /// `log2 E_{P_Y}[ E_{W̄}[2^{(α−1)ι} | Y]^{1/α} ]`, accumulated in the log domain.
    pub fn log_moment(&self, alpha: T) -> T {
        let terms = self.log_py.iter().zip(&self.cells).map(|(&(_, lpy), row)| {
            let inner = log2_sum_exp2(row.iter().map(|&(lb, i)| lb + (alpha - T::one()) * i));
            lpy + inner / alpha
        });
        log2_sum_exp2(terms)
    }

    /// `I_α(p, W)`; `α = 1` is Shannon mutual information.
    pub fn renyi(&self, alpha: T) -> Result<T> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::InvalidOrder(alpha.to_f64_lossy()));
        }
        if alpha == T::one() {
            return Ok(self.mutual_information);
        }
        Ok(alpha / (alpha - T::one()) * self.log_moment(alpha))
    }

    /// `λ · I_{1/(1+λ)}(p, W)` evaluated without the `α/(α−1)` singularity at
    /// `λ = 0`.
    pub fn scaled_renyi(&self, lambda: T) -> T {
        if lambda == T::zero() {
            return T::zero();
        }
        -self.log_moment(T::one() / (T::one() + lambda))
    }
}

/// α-Rényi mutual information `I_α(p, W)` in bits via the backward-channel
/// form. `α = 1` dispatches to `I(p; W)`.
pub fn renyi_mi<T: Real>(alpha: T, p: &Pmf<T>, w: &Channel<T>) -> Result<T> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::InvalidOrder(alpha.to_f64_lossy()));
    }
    RenyiProfile::new(p, w)?.renyi(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmf(v: &[f64]) -> Pmf<f64> {
        Pmf::from_f64(v).unwrap()
    }

    fn bsc(p: f64) -> Channel<f64> {
        Channel::bsc(p).unwrap()
    }

    #[test]
    fn rejects_invalid_pmfs() {
        assert!(Pmf::<f64>::from_f64(&[0.5, 0.6]).is_err());
        assert!(Pmf::<f64>::from_f64(&[-0.1, 1.1]).is_err());
        assert!(Pmf::<f64>::from_f64(&[]).is_err());
        assert!(Channel::<f64>::from_f64(&[&[0.5, 0.5], &[0.2]]).is_err());
        assert!(JointPmf::<f64>::new(2, 2, vec![0.25; 3]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&pmf(&[0.5, 0.5])), 1.0);
        assert_eq!(entropy(&pmf(&[1.0, 0.0])), 0.0);
        // mpmath, 30 digits: 0.99926121402278417...
        assert!((entropy(&pmf(&[0.484, 0.516])) - 0.999_267).abs() < 1e-5);
        assert!((entropy(&pmf(&[0.484, 0.516])) - 0.999_261_214_022_784).abs() < 1e-12);
    }

    #[test]
    fn cond_entropy_examples() {
        let q = pmf(&[0.48, 0.52]);
        assert_eq!(cond_entropy(&Channel::identity(2), &q).unwrap(), 0.0);
        assert!((cond_entropy(&bsc(0.1), &q).unwrap() - 0.468_996).abs() < 1e-5);
        let flat = Channel::constant(2, &pmf(&[0.5, 0.5]));
        assert!((cond_entropy(&flat, &pmf(&[0.3, 0.7])).unwrap() - 1.0).abs() < 1e-15);
        assert!(cond_entropy(&bsc(0.1), &pmf(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn kl_examples() {
        let p = pmf(&[0.3, 0.7]);
        assert_eq!(kl(&p, &p).unwrap(), 0.0);
        assert_eq!(kl(&pmf(&[1.0, 0.0]), &pmf(&[0.5, 0.5])).unwrap(), 1.0);
        assert!((kl(&pmf(&[0.5, 0.5]), &pmf(&[0.1, 0.9])).unwrap() - 0.736_966).abs() < 1e-5);
        assert_eq!(
            kl(&pmf(&[0.5, 0.5]), &pmf(&[1.0, 0.0])).unwrap(),
            f64::INFINITY
        );
        assert_eq!(kl(&pmf(&[1.0, 0.0]), &pmf(&[1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn cond_kl_examples() {
        let q = pmf(&[0.48, 0.52]);
        assert_eq!(cond_kl(&bsc(0.1), &bsc(0.1), &q).unwrap(), 0.0);
        let v = bsc(0.5);
        let w = bsc(0.1);
        assert!((cond_kl(&v, &w, &q).unwrap() - 0.736_966).abs() < 1e-5);
        let v = Channel::from_f64(&[&[0.3, 0.7], &[0.0, 1.0]]).unwrap();
        let single = cond_kl(&v, &w, &pmf(&[1.0, 0.0])).unwrap();
        assert_eq!(single, kl(&pmf(&[0.3, 0.7]), &pmf(&[0.9, 0.1])).unwrap());
    }

    #[test]
    fn push_forward_examples() {
        let out = push_forward(&pmf(&[0.48, 0.52]), &bsc(0.1)).unwrap();
        assert!((out.get(0) - 0.484).abs() < 1e-15);
        assert!((out.get(1) - 0.516).abs() < 1e-15);
        let q = pmf(&[0.2, 0.8]);
        assert_eq!(push_forward(&q, &Channel::identity(2)).unwrap(), q);
        let r = pmf(&[0.1, 0.6, 0.3]);
        let out = push_forward(&q, &Channel::constant(2, &r)).unwrap();
        for (a, b) in out.probs().iter().zip(r.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_channel_examples() {
        let j = joint_of(&pmf(&[0.5, 0.5]), &Channel::identity(2)).unwrap();
        let b = backward_of(&j);
        assert_eq!(b.marginal_y().probs(), &[0.5, 0.5]);
        assert_eq!(b.row(0).unwrap(), &[1.0, 0.0]);
        assert_eq!(b.row(1).unwrap(), &[0.0, 1.0]);

        let j = joint_of(&pmf(&[0.48, 0.52]), &bsc(0.1)).unwrap();
        let b = backward_of(&j);
        assert!((b.marginal_y().get(0) - 0.484).abs() < 1e-15);
        assert!((b.row(0).unwrap()[0] - 0.432 / 0.484).abs() < 1e-15);

        let p = pmf(&[0.2, 0.3, 0.5]);
        let b = backward_of(&JointPmf::product(&p, &pmf(&[0.6, 0.4])));
        for y in 0..2 {
            for (a, e) in b.row(y).unwrap().iter().zip(p.probs()) {
                assert!((a - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn backward_rows_absent_off_support() {
        let v = Channel::from_f64(&[&[1.0, 0.0], &[1.0, 0.0]]).unwrap();
        let b = backward_of(&joint_of(&pmf(&[0.4, 0.6]), &v).unwrap());
        assert!(b.row(1).is_none());
        assert!(b.row(0).is_some());
    }

    #[test]
    fn info_density_examples() {
        let iota = info_density(&JointPmf::product(&pmf(&[0.3, 0.7]), &pmf(&[0.5, 0.5])));
        for x in 0..2 {
            for y in 0..2 {
                assert!(iota.get(x, y).unwrap().abs() < 1e-15);
            }
        }
        let iota = info_density(&joint_of(&pmf(&[0.5, 0.5]), &Channel::identity(2)).unwrap());
        assert_eq!(iota.get(0, 0), Some(1.0));
        assert_eq!(iota.get(0, 1), None);

        let iota = info_density(&joint_of(&pmf(&[0.48, 0.52]), &bsc(0.1)).unwrap());
        // log2(0.432 / (0.48 * 0.484)), mpmath: 0.894917953942442...
        assert!((iota.get(0, 0).unwrap() - 0.894_917_953_942_442).abs() < 1e-12);
    }

    #[test]
    fn renyi_examples() {
        let flat = Channel::constant(2, &pmf(&[0.3, 0.7]));
        let id = Channel::identity(2);
        let u = pmf(&[0.5, 0.5]);
        for &a in &[0.3, 0.5, 0.9, 1.0, 1.5, 4.0] {
            assert!(renyi_mi(a, &pmf(&[0.2, 0.8]), &flat).unwrap().abs() < 1e-12);
            assert!((renyi_mi(a, &u, &id).unwrap() - 1.0).abs() < 1e-12);
        }
        let i = renyi_mi(1.0, &pmf(&[0.48, 0.52]), &bsc(0.1)).unwrap();
        assert!((i - 0.530_271).abs() < 1e-4);
        // mpmath: H(0.484) - h(0.1) = 0.530265620433502...
        assert!((i - 0.530_265_620_433_503).abs() < 1e-12);
        let near = renyi_mi(1.0 - 1e-6, &pmf(&[0.48, 0.52]), &bsc(0.1)).unwrap();
        assert!((near - i).abs() < 1e-5);
    }

    #[test]
    fn renyi_rejects_nonpositive_order() {
        let u = pmf(&[0.5, 0.5]);
        assert!(matches!(
            renyi_mi(0.0, &u, &bsc(0.1)),
            Err(Error::InvalidOrder(_))
        ));
        assert!(renyi_mi(-1.0, &u, &bsc(0.1)).is_err());
    }

    #[test]
    fn tilted_endpoints() {
        let w: Channel<f64> = Channel::from_f64(&[&[0.7, 0.3, 0.0], &[0.2, 0.2, 0.6]]).unwrap();
        assert!(w
            .tilted(1.0)
            .as_flat()
            .iter()
            .zip(w.as_flat())
            .all(|(a, b)| (a - b).abs() < 1e-15));
        let u = w.tilted(0.0);
        assert_eq!(u.row(0), &[0.5, 0.5, 0.0]);
        assert!((u.row(1)[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn works_in_single_precision() {
        let p = Pmf::<f32>::from_f64(&[0.48, 0.52]).unwrap();
        let w = Channel::<f32>::bsc(0.1).unwrap();
        let i = mutual_information(&p, &w).unwrap();
        assert!((i - 0.530_265_6).abs() < 1e-5);
        let half = renyi_mi(0.5f32, &p, &w).unwrap();
        assert!(half < i);
    }
}
