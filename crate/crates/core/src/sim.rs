//! Exact total variation of code-induced output distributions, random code
//! sampling, and the binomial mean-deviation bound.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prob::{Channel, Pmf};
use crate::scalar::Real;
use crate::types::TypeHistogram;

/// Largest output space `|Y|^n` enumerated exactly.
pub const OUTPUT_SPACE_BUDGET: f64 = (1u64 << 22) as f64;

/// Tolerance of [`binomial_bound_check`].
pub const BINOMIAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Code {
    codewords: Vec<Vec<usize>>,
    n: usize,
    input_size: usize,
}

impl Code {
    pub fn new(codewords: Vec<Vec<usize>>, input_size: usize) -> Result<Self> {
        let n = codewords.first().map(Vec::len).unwrap_or(0);
        if codewords.is_empty() || n == 0 {
            return Err(Error::InvalidArgument("code needs M >= 1 and n >= 1".into()));
        }
        for c in &codewords {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.len(),
                });
            }
            if let Some(&s) = c.iter().find(|&&s| s >= input_size) {
                return Err(Error::InvalidArgument(format!(
                    "symbol {s} outside input alphabet {input_size}"
                )));
            }
        }
        Ok(Self {
            codewords,
            n,
            input_size,
        })
    }

    pub fn codewords(&self) -> &[Vec<usize>] {
        &self.codewords
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.codewords.len()
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }
}

/// Exact comparison of `P̃_{Y^n|C}` with `P_Y^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvMeasurement<T> {
    /// `½ Σ |P̃ − P^n|`, clamped to `[0, 1]`.
    pub tv: T,
    /// `Σ min(P̃, P^n)`; equals `1 − tv` up to round-off but keeps full
    /// relative precision when `tv` is close to 1.
    pub overlap: T,
}

pub fn output_space_size(ny: usize, n: usize) -> f64 {
    (ny as f64).powi(n as i32)
}

/// Exhaustive `tv` and overlap over all `y^n`.
pub fn induced_output_measurement<T: Real>(
    code: &Code,
    w: &Channel<T>,
    py: &Pmf<T>,
) -> Result<TvMeasurement<T>> {
    if w.in_size() != code.input_size || w.out_size() != py.alphabet_size() {
        return Err(Error::DimensionMismatch {
            expected: w.out_size(),
            found: py.alphabet_size(),
        });
    }
    let ny = w.out_size();
    let n = code.n;
    let states = output_space_size(ny, n);
    if states > OUTPUT_SPACE_BUDGET {
        return Err(Error::BudgetExceeded {
            what: "output sequences (reduce n)",
            needed: states,
            cap: OUTPUT_SPACE_BUDGET,
        });
    }
    let m = code.size();
    let log_w: Vec<T> = w.as_flat().iter().map(|v| v.log2()).collect();
    let log_py: Vec<T> = py.probs().iter().map(|v| v.log2()).collect();
    let log_m = T::from_usize_lossy(m).log2();

    // Split on a prefix so chunks can run in parallel; partial sums are
    // combined in prefix order so the result does not depend on scheduling.
    let mut depth = 0;
    while depth < n && output_space_size(ny, depth) < 256.0 {
        depth += 1;
    }
    let prefixes = ny.pow(depth as u32);

    let chunk = |prefix: usize| -> (T, T) {
        let mut ys = vec![0usize; n];
        let mut p = prefix;
        for d in (0..depth).rev() {
            ys[d] = p % ny;
            p /= ny;
        }
        // levels[d * m + i]: log2 W^d(y^d | x^d(i)); target[d]: log2 P_Y^d(y^d).
        let mut levels = vec![T::zero(); (n + 1) * m];
        let mut target = vec![T::zero(); n + 1];
        let extend = |d: usize, y: usize, levels: &mut [T], target: &mut [T]| {
            for (i, cw) in code.codewords.iter().enumerate() {
                levels[(d + 1) * m + i] = levels[d * m + i] + log_w[cw[d] * ny + y];
            }
            target[d + 1] = target[d] + log_py[y];
        };
        for d in 0..depth {
            extend(d, ys[d], &mut levels, &mut target);
        }
        let (mut diff, mut overlap) = (T::zero(), T::zero());
        let mut leaf = |levels: &[T], target: &[T]| {
            let row = &levels[n * m..(n + 1) * m];
            let top = row.iter().copied().fold(T::neg_infinity(), T::max);
            let induced = if top == T::neg_infinity() {
                T::neg_infinity()
            } else {
                let s: T = row.iter().map(|&l| (l - top).exp2()).sum();
                top + s.log2() - log_m
            };
            let (a, b) = (induced.exp2(), target[n].exp2());
            if induced != target[n] {
                diff = diff + (a - b).abs();
            }
            overlap = overlap + a.min(b);
        };
        if depth == n {
            leaf(&levels, &target);
            return (diff, overlap);
        }
        // Odometer over positions depth..n.
        let mut d = depth;
        loop {
            if d == n {
                leaf(&levels, &target);
                loop {
                    d -= 1;
                    if d < depth {
                        return (diff, overlap);
                    }
                    ys[d] += 1;
                    if ys[d] < ny {
                        break;
                    }
                    ys[d] = 0;
                }
            }
            extend(d, ys[d], &mut levels, &mut target);
            d += 1;
        }
    };
    let parts: Vec<(T, T)> = (0..prefixes).into_par_iter().map(chunk).collect();
    let (diff, overlap) = parts
        .into_iter()
        .fold((T::zero(), T::zero()), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let half = T::lit(0.5);
    Ok(TvMeasurement {
        tv: (diff * half).max(T::zero()).min(T::one()),
        overlap: overlap.max(T::zero()).min(T::one()),
    })
}

/// `½ Σ_{y^n} |P̃_{Y^n|C}(y^n) − P_Y^n(y^n)|`, enumerated exactly.
pub fn induced_output_tv<T: Real>(code: &Code, w: &Channel<T>, py: &Pmf<T>) -> Result<T> {
    Ok(induced_output_measurement(code, w, py)?.tv)
}

/// Where codewords come from.
#[derive(Debug, Clone)]
pub enum CodeSource<'a, T> {
    /// Every symbol i.i.d. from the distribution.
    Iid(&'a Pmf<T>),
    /// Every codeword uniform over the type class.
    TypeClass(&'a TypeHistogram),
}

pub fn trial_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_code<T: Real>(source: CodeSource<'_, T>, n: usize, m: usize, seed: u64) -> Result<Code> {
    sample_code_with(source, n, m, &mut trial_rng(seed, 0))
}

pub fn sample_code_with<T: Real>(
    source: CodeSource<'_, T>,
    n: usize,
    m: usize,
    rng: &mut ChaCha20Rng,
) -> Result<Code> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("need M >= 1 and n >= 1".into()));
    }
    match source {
        CodeSource::Iid(p) => {
            let weights: Vec<f64> = p.probs().iter().map(|v| v.to_f64_lossy()).collect();
            let dist = WeightedIndex::new(&weights)
                .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
            let words = (0..m)
                .map(|_| (0..n).map(|_| dist.sample(rng)).collect())
                .collect();
            Code::new(words, p.alphabet_size())
        }
        CodeSource::TypeClass(t) => {
            if t.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: t.n(),
                });
            }
            let base: Vec<usize> = t
                .counts()
                .iter()
                .enumerate()
                .flat_map(|(x, &c)| std::iter::repeat(x).take(c))
                .collect();
            let words = (0..m)
                .map(|_| {
                    let mut w = base.clone();
                    w.shuffle(rng);
                    w
                })
                .collect();
            Code::new(words, t.alphabet_size())
        }
    }
}

/// `−(1/n) log2(overlap)`, the exponent with the polynomial prefactor dropped.
pub fn exponent_estimate<T: Real>(overlap: T, n: usize) -> T {
    -overlap.log2() / T::from_usize_lossy(n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeOutcome<T> {
    pub trial: u64,
    pub tv: T,
    pub overlap: T,
    pub exponent_estimate: T,
}

/// Random-code measurements at one blocklength.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport<T> {
    pub n: usize,
    pub m: usize,
    pub rate: T,
    /// Mean total variation over trials.
    pub tv: T,
    /// Mean of `1 − tv` over trials.
    pub mean_overlap: T,
    /// `−(1/n) log2(1 − tv)` of the trial means.
    pub exponent_estimate: T,
    pub seed: u64,
    pub trials: usize,
    pub per_code: Vec<CodeOutcome<T>>,
}

pub fn codebook_size(n: usize, rate: f64) -> usize {
    ((n as f64 * rate).exp2().round() as usize).max(1)
}

/// For each `n`, samples `trials` i.i.d. codes of size `round(2^{nR})` and
/// measures each exactly. Trial `t` draws from ChaCha20 stream `t` of `seed`.
pub fn empirical_exponent<T: Real>(
    w: &Channel<T>,
    py: &Pmf<T>,
    p: &Pmf<T>,
    rate: T,
    n_list: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<SimReport<T>>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    for &n in n_list {
        let states = output_space_size(w.out_size(), n);
        if states > OUTPUT_SPACE_BUDGET {
            return Err(Error::BudgetExceeded {
                what: "output sequences (reduce n)",
                needed: states,
                cap: OUTPUT_SPACE_BUDGET,
            });
        }
    }
    n_list
        .iter()
        .map(|&n| {
            let m = codebook_size(n, rate.to_f64_lossy());
            let per_code = (0..trials as u64)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(seed, trial);
                    let code = sample_code_with(CodeSource::Iid(p), n, m, &mut rng)?;
                    let meas = induced_output_measurement(&code, w, py)?;
                    Ok(CodeOutcome {
                        trial,
                        tv: meas.tv,
                        overlap: meas.overlap,
                        exponent_estimate: exponent_estimate(meas.overlap, n),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let count = T::from_usize_lossy(trials);
            let tv = per_code.iter().map(|c| c.tv).sum::<T>() / count;
            let mean_overlap = per_code.iter().map(|c| c.overlap).sum::<T>() / count;
            Ok(SimReport {
                n,
                m,
                rate,
                tv,
                mean_overlap,
                exponent_estimate: exponent_estimate(mean_overlap, n),
                seed,
                trials,
                per_code,
            })
        })
        .collect()
}

/// `((|X|+1)|Y| log2(n+1) + 2) / n`: polynomial prefactor of the converse
/// bound, in exponent units.
pub fn converse_slack<T: Real>(nx: usize, ny: usize, n: usize) -> T {
    let nt = T::from_usize_lossy(n);
    (T::from_usize_lossy((nx + 1) * ny) * (nt + T::one()).log2() + T::lit(2.0)) / nt
}

/// `½ (n+1)^{−(|X|+1)|Y|} 2^{−n E_a(R,n)}`: floor on the random-code mean of
/// `1 − tv`.
pub fn random_code_floor<T: Real>(nx: usize, ny: usize, n: usize, ea_n: T) -> T {
    let nt = T::from_usize_lossy(n);
    let exponent = -T::from_usize_lossy((nx + 1) * ny) * (nt + T::one()).log2() - nt * ea_n;
    T::lit(0.5) * exponent.exp2()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialCheck<T> {
    /// `½ E|K/M − p|` for `K ~ Binomial(M, p)`.
    pub lhs: T,
    /// `p − ½ p min{Mp, 1}`.
    pub rhs: T,
    pub ok: bool,
}

pub fn binomial_bound_check<T: Real>(m: usize, p: T) -> Result<BinomialCheck<T>> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need M >= 2, got {m}")));
    }
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::InvalidArgument(format!("p must lie in [0,1], got {p}")));
    }
    let mt = T::from_usize_lossy(m);
    let rhs = p - T::lit(0.5) * p * (mt * p).min(T::one());
    let lhs = if p == T::zero() || p == T::one() {
        T::zero()
    } else {
        let (lp, lq) = (p.ln(), (T::one() - p).ln());
        let mut log_binom = T::zero();
        let mut total = T::zero();
        for k in 0..=m {
            if k > 0 {
                log_binom = log_binom + T::from_usize_lossy(m - k + 1).ln()
                    - T::from_usize_lossy(k).ln();
            }
            let kt = T::from_usize_lossy(k);
            let pmf = (log_binom + kt * lp + (mt - kt) * lq).exp();
            total = total + pmf * (kt / mt - p).abs();
        }
        T::lit(0.5) * total
    };
    Ok(BinomialCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + T::lit(BINOMIAL_TOL),
    })
}
