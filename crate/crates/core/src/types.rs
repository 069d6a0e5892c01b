//! Exact n-type machinery and the finite-blocklength exponent forms.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prob::{entropy_slice, kl_slice, Channel, Pmf};
use crate::scalar::Real;

/// Largest number of objects any enumeration here will produce.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Empirical counts of a length-`n` sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TypeHistogram {
    counts: Vec<usize>,
    n: usize,
}

impl TypeHistogram {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        let n: usize = counts.iter().sum();
        if n == 0 || counts.is_empty() {
            return Err(Error::InvalidArgument("type needs n >= 1".into()));
        }
        Ok(Self { counts, n })
    }

    pub fn of_sequence(seq: &[usize], k: usize) -> Result<Self> {
        let mut counts = vec![0; k];
        for &s in seq {
            if s >= k {
                return Err(Error::InvalidArgument(format!("symbol {s} outside alphabet {k}")));
            }
            counts[s] += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn to_pmf<T: Real>(&self) -> Pmf<T> {
        let n = T::from_usize_lossy(self.n);
        Pmf::from_noisy(
            self.counts
                .iter()
                .map(|&c| T::from_usize_lossy(c) / n)
                .collect(),
        )
    }
}

/// Joint counts over `X × Y` whose row sums are the base type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConditionalTypeTable {
    counts: Vec<usize>,
    nx: usize,
    ny: usize,
    base: TypeHistogram,
}

impl ConditionalTypeTable {
    pub fn new(nx: usize, ny: usize, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                found: counts.len(),
            });
        }
        let base = TypeHistogram::new(
            (0..nx)
                .map(|x| counts[x * ny..(x + 1) * ny].iter().sum())
                .collect(),
        )?;
        Ok(Self { counts, nx, ny, base })
    }

    pub fn of_sequences(xs: &[usize], ys: &[usize], nx: usize, ny: usize) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                found: ys.len(),
            });
        }
        let mut counts = vec![0; nx * ny];
        for (&x, &y) in xs.iter().zip(ys) {
            if x >= nx || y >= ny {
                return Err(Error::InvalidArgument("symbol outside alphabet".into()));
            }
            counts[x * ny + y] += 1;
        }
        Self::new(nx, ny, counts)
    }

    pub fn base(&self) -> &TypeHistogram {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.base.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn get(&self, x: usize, y: usize) -> usize {
        self.counts[x * self.ny + y]
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn output_counts(&self) -> Vec<usize> {
        (0..self.ny)
            .map(|y| (0..self.nx).map(|x| self.get(x, y)).sum())
            .collect()
    }

    fn joint<T: Real>(&self) -> Vec<T> {
        let n = T::from_usize_lossy(self.n());
        self.counts
            .iter()
            .map(|&c| T::from_usize_lossy(c) / n)
            .collect()
    }
}

fn composition_count(n: usize, k: usize) -> f64 {
    (0..k - 1).fold(1.0, |acc, i| acc * (n + k - 1 - i) as f64 / (i + 1) as f64)
}

fn check_budget(what: &'static str, needed: f64) -> Result<()> {
    if needed > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            what,
            needed,
            cap: ENUMERATION_BUDGET,
        });
    }
    Ok(())
}

/// Lexicographic iterator over compositions of `n` into `k` parts.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<usize>>,
}

impl Compositions {
    fn new(n: usize, k: usize) -> Self {
        let mut first = vec![0; k];
        first[k - 1] = n;
        Self {
            current: Some(first),
        }
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.current.take()?;
        let k = cur.len();
        let mut next = cur.clone();
        if k >= 2 {
            if next[k - 1] > 0 {
                next[k - 2] += 1;
                next[k - 1] -= 1;
                self.current = Some(next);
            } else if let Some(j) = (0..k - 1).rev().find(|&j| next[j] > 0) {
                if j > 0 {
                    let v = next[j];
                    next[j] = 0;
                    next[j - 1] += 1;
                    next[k - 1] = v - 1;
                    self.current = Some(next);
                }
            }
        }
        Some(cur)
    }
}

/// All `n`-types on an alphabet of size `k`, in lexicographic order.
pub fn enumerate_types(n: usize, k: usize) -> Result<impl Iterator<Item = TypeHistogram>> {
    if n == 0 || k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and k >= 2, got n={n}, k={k}"
        )));
    }
    check_budget("n-types", composition_count(n, k))?;
    Ok(Compositions::new(n, k).map(move |counts| TypeHistogram { counts, n }))
}

pub fn type_count(n: usize, k: usize) -> f64 {
    composition_count(n, k)
}

fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * BigUint::from(i))
}

/// `n! / Π counts!`.
pub fn type_class_size(t: &TypeHistogram) -> BigUint {
    multinomial(t.n, &t.counts)
}

fn multinomial(n: usize, parts: &[usize]) -> BigUint {
    let den = parts
        .iter()
        .fold(BigUint::one(), |acc, &c| acc * factorial(c));
    factorial(n) / den
}

pub fn log2_big(b: &BigUint) -> f64 {
    let bits = b.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits < 1000 {
        return b.to_f64().expect("fits in f64").log2();
    }
    let shift = bits - 64;
    (b >> shift).to_f64().expect("64 bits").log2() + shift as f64
}

pub fn log2_type_class_size(t: &TypeHistogram) -> f64 {
    log2_big(&type_class_size(t))
}

/// Sandwich bounds on `log2|T_Q|`:`n H(Q) − k log2(n+1) ≤ log2|T_Q| ≤ n H(Q)`.
pub fn type_class_bounds<T: Real>(t: &TypeHistogram) -> (T, T) {
    let nh = T::from_usize_lossy(t.n) * entropy_slice(t.to_pmf::<T>().probs());
    let slack = T::from_usize_lossy(t.alphabet_size()) * T::from_usize_lossy(t.n + 1).log2();
    (nh - slack, nh)
}

/// `min_{Q_XY ∈ P_n(XY)} D(Q_XY‖P_XY) + |D(Q_XY‖P_X Q_Y) − R|^+`.
pub fn ea_finite<T: Real>(n: usize, p: &Pmf<T>, w: &Channel<T>, rate: T) -> Result<T> {
    if p.alphabet_size() != w.in_size() {
        return Err(Error::DimensionMismatch {
            expected: w.in_size(),
            found: p.alphabet_size(),
        });
    }
    let (nx, ny) = (w.in_size(), w.out_size());
    let pxy: Vec<T> = (0..nx)
        .flat_map(|x| (0..ny).map(move |y| (x, y)))
        .map(|(x, y)| p.get(x) * w.get(x, y))
        .collect();
    let types = enumerate_types(n, nx * ny)?;
    let nt = T::from_usize_lossy(n);
    let objective = |counts: Vec<usize>| -> T {
        let q: Vec<T> = counts.iter().map(|&c| T::from_usize_lossy(c) / nt).collect();
        let d_joint = kl_slice(&q, &pxy);
        if !d_joint.is_finite() {
            return T::infinity();
        }
        let qy: Vec<T> = (0..ny)
            .map(|y| (0..nx).map(|x| q[x * ny + y]).sum())
            .collect();
        let prod: Vec<T> = (0..nx)
            .flat_map(|x| qy.iter().map(move |&b| p.get(x) * b))
            .collect();
        d_joint + (kl_slice(&q, &prod) - rate).max(T::zero())
    };
    let values: Vec<T> = types
        .map(|t| t.counts)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(objective)
        .collect();
    Ok(values.into_iter().fold(T::infinity(), T::min))
}

#[derive(Debug, Clone, Copy)]
struct TypeCell<T> {
    entropy: T,
    f: T,
    g: T,
}

/// Discrete `max_cap min{f_n(cap), g_n(cap)}` for one input type, where
/// `f_n` minimizes over conditional types with `H ≤ cap` and `g_n` over those
/// with `H > cap`, and `cap` ranges over `[H(W|Q_X), ∞)`.
fn balance_finite<T: Real>(mut cells: Vec<TypeCell<T>>, base: T) -> T {
    cells.sort_by(|a, b| a.entropy.partial_cmp(&b.entropy).unwrap());
    let tie = T::tol(1e-12);
    // Group entropies that differ only by round-off.
    let mut groups: Vec<(T, T, T)> = Vec::new();
    for c in &cells {
        match groups.last_mut() {
            Some((h, f, g)) if c.entropy - *h <= tie => {
                *f = f.min(c.f);
                *g = g.min(c.g);
            }
            _ => groups.push((c.entropy, c.f, c.g)),
        }
    }
    let m = groups.len();
    let mut prefix_f = vec![T::infinity(); m + 1];
    for i in 0..m {
        prefix_f[i + 1] = prefix_f[i].min(groups[i].1);
    }
    let mut suffix_g = vec![T::infinity(); m + 1];
    for i in (0..m).rev() {
        suffix_g[i] = suffix_g[i + 1].min(groups[i].2);
    }
    // cap = base, then every group entropy at or above base.
    let idx_at = |cap: T| groups.partition_point(|g| g.0 <= cap + tie);
    let mut best = {
        let k = idx_at(base);
        prefix_f[k].min(suffix_g[k])
    };
    for (i, g) in groups.iter().enumerate() {
        if g.0 + tie >= base {
            best = best.max(prefix_f[i + 1].min(suffix_g[i + 1]));
        }
    }
    best
}

/// Finite-`n` converse form: outer minimum over input `n`-types of the
/// discrete balance over conditional `n`-types.
pub fn ec_finite<T: Real>(n: usize, w: &Channel<T>, py: &Pmf<T>, rate: T) -> Result<T> {
    if py.alphabet_size() != w.out_size() {
        return Err(Error::DimensionMismatch {
            expected: w.out_size(),
            found: py.alphabet_size(),
        });
    }
    let (nx, ny) = (w.in_size(), w.out_size());
    let input_types: Vec<TypeHistogram> = enumerate_types(n, nx)?.collect();
    let total: f64 = input_types
        .iter()
        .map(|t| t.counts.iter().map(|&c| composition_count(c, ny)).product::<f64>())
        .sum();
    check_budget("conditional n-types", total)?;
    let nt = T::from_usize_lossy(n);

    let per_type = |qt: &TypeHistogram| -> T {
        let q: Vec<T> = qt.counts.iter().map(|&c| T::from_usize_lossy(c) / nt).collect();
        let base: T = (0..nx)
            .filter(|&x| qt.counts[x] > 0)
            .map(|x| q[x] * entropy_slice(w.row(x)))
            .sum();
        let rows: Vec<Vec<Vec<T>>> = (0..nx)
            .map(|x| {
                let c = qt.counts[x];
                if c == 0 {
                    return vec![w.row(x).to_vec()];
                }
                let ct = T::from_usize_lossy(c);
                Compositions::new(c, ny)
                    .map(|r| r.iter().map(|&v| T::from_usize_lossy(v) / ct).collect())
                    .collect()
            })
            .collect();
        let mut cells = Vec::new();
        let mut idx = vec![0usize; nx];
        loop {
            let mut h = T::zero();
            let mut g = T::zero();
            let mut qy = vec![T::zero(); ny];
            for x in 0..nx {
                if qt.counts[x] == 0 {
                    continue;
                }
                let row = &rows[x][idx[x]];
                h = h + q[x] * entropy_slice(row);
                g = g + q[x] * kl_slice(row, w.row(x));
                for y in 0..ny {
                    qy[y] = qy[y] + q[x] * row[y];
                }
            }
            let info = (entropy_slice(&qy) - h).max(T::zero());
            let f = kl_slice(&qy, py.probs()) + (info - rate).max(T::zero());
            cells.push(TypeCell { entropy: h, f, g });

            let mut x = 0;
            loop {
                if x == nx {
                    return balance_finite(cells, base);
                }
                idx[x] += 1;
                if idx[x] < rows[x].len() {
                    break;
                }
                idx[x] = 0;
                x += 1;
            }
        }
    };
    let values: Vec<T> = input_types.par_iter().map(per_type).collect();
    Ok(values.into_iter().fold(T::infinity(), T::min))
}

/// `W^n(y^n|x^n)` for a pair in a joint type class, and the probability
/// `P_X^n(X^n ∈ T_V̄(y^n))` that an i.i.d. input lands in the matching
/// backward conditional class.
#[derive(Debug, Clone, PartialEq)]
pub struct CodewordWeights {
    pub log2_w: f64,
    pub w: f64,
    /// `|T_V̄(y^n)| = Π_y (nQ_Y(y))! / Π_{x,y} (nQ_XY(x,y))!`.
    pub backward_class_size: BigUint,
    pub log2_p: f64,
    pub p: f64,
    /// `−|X||Y| log2(n+1) − n D(Q_XY‖P_X Q_Y)`.
    pub log2_p_lower_bound: f64,
    pub bound_ok: bool,
}

pub fn codeword_weights<T: Real>(
    table: &ConditionalTypeTable,
    w: &Channel<T>,
    px: &Pmf<T>,
) -> Result<CodewordWeights> {
    let (nx, ny) = (table.nx, table.ny);
    if w.in_size() != nx || w.out_size() != ny || px.alphabet_size() != nx {
        return Err(Error::DimensionMismatch {
            expected: nx * ny,
            found: w.in_size() * w.out_size(),
        });
    }
    let n = table.n();
    let mut log2_w = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            let c = table.get(x, y);
            if c > 0 {
                log2_w += c as f64 * w.get(x, y).to_f64_lossy().log2();
            }
        }
    }
    let out = table.output_counts();
    let num = out.iter().fold(BigUint::one(), |acc, &c| acc * factorial(c));
    let den = table
        .counts
        .iter()
        .fold(BigUint::one(), |acc, &c| acc * factorial(c));
    let size = num / den;
    let mut log2_p = log2_big(&size);
    for x in 0..nx {
        let c = table.base.counts[x];
        if c > 0 {
            log2_p += c as f64 * px.get(x).to_f64_lossy().log2();
        }
    }
    let q = table.joint::<f64>();
    let nf = n as f64;
    let qy: Vec<f64> = out.iter().map(|&c| c as f64 / nf).collect();
    let prod: Vec<f64> = (0..nx)
        .flat_map(|x| qy.iter().map(move |&b| px.get(x).to_f64_lossy() * b))
        .collect();
    let log2_p_lower_bound =
        -((nx * ny) as f64) * (nf + 1.0).log2() - nf * kl_slice(&q, &prod);
    Ok(CodewordWeights {
        log2_w,
        w: log2_w.exp2(),
        backward_class_size: size,
        log2_p,
        p: log2_p.exp2(),
        log2_p_lower_bound,
        bound_ok: log2_p >= log2_p_lower_bound - 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::achievability::ea_renyi;

    fn counts(n: usize, k: usize) -> Vec<Vec<usize>> {
        enumerate_types(n, k).unwrap().map(|t| t.counts).collect()
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(counts(2, 2), vec![vec![0, 2], vec![1, 1], vec![2, 0]]);
        assert_eq!(counts(4, 2).len(), 5);
        assert_eq!(counts(6, 3).len(), 28);
        let all = counts(5, 4);
        assert_eq!(all.len(), 56);
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 56);
        assert!(all.iter().all(|c| c.iter().sum::<usize>() == 5));
    }

    #[test]
    fn enumeration_guards() {
        assert!(enumerate_types(0, 2).is_err());
        assert!(enumerate_types(3, 1).is_err());
        assert!(matches!(
            enumerate_types(1000, 6),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn class_sizes() {
        let t = TypeHistogram::new(vec![4, 0]).unwrap();
        assert_eq!(type_class_size(&t), BigUint::one());
        let t = TypeHistogram::new(vec![1, 1]).unwrap();
        assert_eq!(type_class_size(&t), BigUint::from(2u32));
        let t = TypeHistogram::new(vec![3, 3]).unwrap();
        assert_eq!(type_class_size(&t), BigUint::from(20u32));
        let l = log2_type_class_size(&t);
        assert!((l - 20f64.log2()).abs() < 1e-12);
        let (lo, hi) = type_class_bounds::<f64>(&t);
        assert!(lo <= l && l <= hi);
        assert!((lo - (6.0 - 2.0 * 7f64.log2())).abs() < 1e-12);
    }

    #[test]
    fn big_class_log_is_finite() {
        let t = TypeHistogram::new(vec![300, 300, 400]).unwrap();
        let l = log2_type_class_size(&t);
        let (lo, hi) = type_class_bounds::<f64>(&t);
        assert!(l.is_finite() && lo <= l && l <= hi);
    }

    #[test]
    fn ea_finite_zero_when_joint_is_a_type() {
        let p = Pmf::from_f64(&[0.5, 0.5]).unwrap();
        let w: Channel<f64> = Channel::from_f64(&[&[0.75, 0.25], &[0.25, 0.75]]).unwrap();
        // P_XY = [3/8, 1/8, 1/8, 3/8] is an 8-type.
        assert!(ea_finite(8, &p, &w, 1.0).unwrap() < 1e-15);
    }

    #[test]
    fn ea_finite_dominates_asymptotic_value() {
        let p = Pmf::from_f64(&[0.48, 0.52]).unwrap();
        let w = Channel::bsc(0.1).unwrap();
        let ea = ea_renyi(&p, &w, 0.25).unwrap().value;
        let e10 = ea_finite(10, &p, &w, 0.25).unwrap();
        let e20 = ea_finite(20, &p, &w, 0.25).unwrap();
        let e40 = ea_finite(40, &p, &w, 0.25).unwrap();
        assert!(e10 >= ea - 1e-9 && e20 >= ea - 1e-9 && e40 >= ea - 1e-9);
        assert!(e40 - ea <= e20 - ea);
        assert!(e20 <= e10);
    }

    #[test]
    fn ec_finite_single_letter_matches_hand_value() {
        // n = 1: every conditional type is deterministic, so no channel lies
        // outside the set and the value is min_y D(δ_y‖P_Y) = −log2 max P_Y.
        let w = Channel::bsc(0.1).unwrap();
        let py = Pmf::from_f64(&[0.484, 0.516]).unwrap();
        let v = ec_finite(1, &w, &py, 0.25).unwrap();
        assert!((v - (-(0.516f64).log2())).abs() < 1e-12);
    }

    #[test]
    fn ec_finite_zero_at_high_rate() {
        let w: Channel<f64> = Channel::from_f64(&[&[0.75, 0.25], &[0.25, 0.75]]).unwrap();
        let py = Pmf::from_f64(&[0.5, 0.5]).unwrap();
        // Q_X = [1/2, 1/2] and V = W are 8-types reaching P_Y.
        assert!(ec_finite(8, &w, &py, 1.0).unwrap() < 1e-12);
    }

    #[test]
    fn weights_match_direct_product() {
        let w: Channel<f64> = Channel::from_f64(&[&[0.7, 0.3], &[0.2, 0.8]]).unwrap();
        let px = Pmf::from_f64(&[0.4, 0.6]).unwrap();
        let xs = [0, 1, 1, 0, 1];
        let ys = [0, 1, 0, 0, 1];
        let table = ConditionalTypeTable::of_sequences(&xs, &ys, 2, 2).unwrap();
        let cw = codeword_weights(&table, &w, &px).unwrap();
        let direct: f64 = xs.iter().zip(&ys).map(|(&x, &y)| w.get(x, y)).product();
        assert!((cw.w - direct).abs() < 1e-15);
        assert!(cw.bound_ok);
    }

    #[test]
    fn deterministic_channel_weight_is_one() {
        let w: Channel<f64> = Channel::identity(2);
        let px = Pmf::from_f64(&[0.5, 0.5]).unwrap();
        let table = ConditionalTypeTable::new(2, 2, vec![2, 0, 0, 3]).unwrap();
        assert_eq!(codeword_weights(&table, &w, &px).unwrap().w, 1.0);
        let bad = ConditionalTypeTable::new(2, 2, vec![1, 1, 0, 3]).unwrap();
        assert_eq!(codeword_weights(&bad, &w, &px).unwrap().w, 0.0);
    }

    #[test]
    fn backward_probability_matches_exhaustive_sum() {
        let w: Channel<f64> = Channel::from_f64(&[&[0.7, 0.3], &[0.2, 0.8]]).unwrap();
        let px = Pmf::from_f64(&[0.35, 0.65]).unwrap();
        let ys = [0, 1, 1, 0];
        let mut by_table: std::collections::HashMap<Vec<usize>, f64> = Default::default();
        for code in 0..16usize {
            let xs: Vec<usize> = (0..4).map(|i| (code >> i) & 1).collect();
            let prob: f64 = xs.iter().map(|&x| px.get(x)).product();
            let t = ConditionalTypeTable::of_sequences(&xs, &ys, 2, 2).unwrap();
            *by_table.entry(t.counts().to_vec()).or_default() += prob;
        }
        for (cells, brute) in by_table {
            let t = ConditionalTypeTable::new(2, 2, cells).unwrap();
            let cw = codeword_weights(&t, &w, &px).unwrap();
            assert!((cw.p - brute).abs() < 1e-14, "{:?}", t.counts());
            assert!(cw.bound_ok);
        }
    }
}
