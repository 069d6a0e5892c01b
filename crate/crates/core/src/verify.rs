//! Self-checks comparing the production routines against the oracles on
//! seeded random instances. Each suite reports pass/fail counts.

use num_bigint::BigUint;
use num_traits::{Pow, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::achievability::{ea_primal_oracle, ea_renyi, gibbs_min, tilted_inner_min};
use crate::converse::{balance_s, inner_min_out, trace_violation, ENVELOPE_SLACK};
use crate::error::{Error, Result};
use crate::oracles;
use crate::prob::{
    backward_of, cond_entropy, info_density, joint_of, kl, kl_slice, mutual_information,
    push_forward, Channel, JointPmf, Pmf,
};
use crate::sim::binomial_bound_check;
use crate::types::{
    codeword_weights, enumerate_types, log2_type_class_size, type_class_bounds,
    type_class_size, ConditionalTypeTable,
};

pub const SUITES: &[&str] = &[
    "binomial",
    "chain_rule",
    "gibbs",
    "tilted_backward",
    "dual_primal",
    "tilted_family",
    "types",
];

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    /// Largest error seen against the suite's tolerance.
    pub worst: f64,
    pub tolerance: f64,
    /// First few failure descriptions.
    pub failures: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            tolerance,
            ..Default::default()
        }
    }

    fn record(&mut self, error: f64, what: impl FnOnce() -> String) {
        self.check(error <= self.tolerance, error, what);
    }

    fn check(&mut self, ok: bool, error: f64, what: impl FnOnce() -> String) {
        if error.is_finite() || error.is_nan() {
            self.worst = self.worst.max(error);
        } else {
            self.worst = f64::INFINITY;
        }
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.failures.len() < 8 {
                self.failures.push(what());
            }
        }
    }

    fn merge(&mut self, other: SuiteReport) {
        self.passed += other.passed;
        self.failed += other.failed;
        self.worst = self.worst.max(other.worst);
        for f in other.failures {
            if self.failures.len() < 8 {
                self.failures.push(f);
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

pub fn run_suite(name: &str) -> Result<SuiteReport> {
    match name {
        "binomial" => Ok(binomial()),
        "chain_rule" => chain_rule(),
        "gibbs" => gibbs(),
        "tilted_backward" => tilted_backward(),
        "dual_primal" => dual_primal(),
        "tilted_family" => tilted_family(),
        "types" => types(),
        other => Err(Error::InvalidArgument(format!(
            "unknown suite '{other}' (expected one of {})",
            SUITES.join(", ")
        ))),
    }
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn pmf(v: Vec<f64>) -> Result<Pmf<f64>> {
    Pmf::normalized(v)
}

fn channel(rows: Vec<Vec<f64>>) -> Result<Channel<f64>> {
    Channel::new(rows)
}

/// Binomial mean deviation against its bound for `M ∈ 2..=200`,
/// `p ∈ {0.001 k}`.
pub fn binomial() -> SuiteReport {
    let parts: Vec<SuiteReport> = (2..=200usize)
        .into_par_iter()
        .map(|m| {
            let mut r = SuiteReport::new("binomial", 0.0);
            for k in 1..=999 {
                let p = 0.001 * k as f64;
                let c = binomial_bound_check(m, p).expect("valid arguments");
                r.check(c.ok, (c.lhs - c.rhs).max(0.0), || {
                    format!("M={m} p={p}: lhs {} > rhs {}", c.lhs, c.rhs)
                });
            }
            r
        })
        .collect();
    let mut report = SuiteReport::new("binomial", 0.0);
    parts.into_iter().for_each(|p| report.merge(p));
    report
}

/// Chain rules through the backward channel on 100 random joints.
pub fn chain_rule() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("chain_rule", 1e-10);
    let mut r = rng(2);
    for trial in 0..100 {
        let nx = r.gen_range(2..=3);
        let ny = r.gen_range(2..=3);
        let q = JointPmf::new(nx, ny, oracles::random_pmf(&mut r, nx * ny, 0.02))?;
        let p = JointPmf::new(nx, ny, oracles::random_pmf(&mut r, nx * ny, 0.02))?;
        let vq = backward_of(&q);
        let wp = backward_of(&p);
        let qy = q.marginal_y();
        let px = p.marginal_x();
        let cond: f64 = (0..ny)
            .map(|y| {
                qy.get(y) * kl_slice(vq.row(y).expect("full support"), wp.row(y).expect("full support"))
            })
            .sum();
        let d_joint = kl(&q.as_pmf(), &p.as_pmf())?;
        let lhs1 = cond + kl(&qy, &p.marginal_y())?;
        report.record((d_joint - lhs1).abs(), || {
            format!("trial {trial}: D(Q‖P) = {d_joint} vs {lhs1}")
        });
        let iota = info_density(&p);
        let mean_iota: f64 = (0..nx)
            .flat_map(|x| (0..ny).map(move |y| (x, y)))
            .map(|(x, y)| q.get(x, y) * iota.get(x, y).expect("full support"))
            .sum();
        let d_prod = kl(&q.as_pmf(), &JointPmf::product(&px, &qy).as_pmf())?;
        let lhs2 = cond + mean_iota;
        report.record((d_prod - lhs2).abs(), || {
            format!("trial {trial}: D(Q‖P_X Q_Y) = {d_prod} vs {lhs2}")
        });
    }
    Ok(report)
}

/// Gibbs closed form against a simplex grid on 100 instances, and the
/// one-sided inequality on 1000 random distributions.
pub fn gibbs() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("gibbs", 1e-3);
    let mut r = rng(3);
    for trial in 0..100 {
        let k = r.gen_range(2..=3);
        let py_raw = oracles::random_pmf(&mut r, k, 0.05);
        let f: Vec<f64> = (0..k).map(|_| r.gen_range(-2.0..2.0)).collect();
        let py = pmf(py_raw.clone())?;
        let closed = gibbs_min(&f, &py)?;
        let grid = oracles::gibbs_grid(&f, &py_raw);
        report.record((closed - grid).abs(), || {
            format!("trial {trial}: closed {closed} vs grid {grid}")
        });
        for _ in 0..10 {
            let q = oracles::random_pmf(&mut r, k, 0.0);
            let upper = oracles::kl(&q, &py_raw) + q.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
            report.check(closed <= upper + 1e-12, (closed - upper).max(0.0), || {
                format!("trial {trial}: closed {closed} above {upper}")
            });
        }
    }
    Ok(report)
}

/// Tilted backward-channel closed form against per-output simplex grids.
pub fn tilted_backward() -> Result<SuiteReport> {
    let mut r = rng(4);
    let instances: Vec<_> = (0..100)
        .map(|_| {
            let nx = r.gen_range(2..=3);
            let ny = r.gen_range(2..=3);
            let p = oracles::random_pmf(&mut r, nx, 0.05);
            let w = oracles::random_channel(&mut r, nx, ny, 0.05);
            let qy = oracles::random_pmf(&mut r, ny, 0.0);
            let lambda = r.gen_range(-1.0..2.0);
            (p, w, qy, lambda)
        })
        .collect();
    let parts: Vec<Result<SuiteReport>> = instances
        .into_par_iter()
        .enumerate()
        .map(|(trial, (p, w, qy, lambda))| {
            let mut report = SuiteReport::new("tilted_backward", 1e-3);
            let joint = joint_of(&pmf(p)?, &channel(w)?)?;
            let back = backward_of(&joint);
            let iota = info_density(&joint);
            let (nx, ny) = (joint.nx(), joint.ny());
            let closed = tilted_inner_min(lambda, &pmf(qy.clone())?, &back, &iota)?;
            let back_rows: Vec<Vec<f64>> =
                (0..ny).map(|y| back.row(y).expect("full support").to_vec()).collect();
            let iota_rows: Vec<Vec<f64>> = (0..ny)
                .map(|y| (0..nx).map(|x| iota.get(x, y).expect("full support")).collect())
                .collect();
            let grid = oracles::tilted_grid(lambda, &qy, &back_rows, &iota_rows);
            report.record((closed - grid).abs(), || {
                format!("trial {trial}: closed {closed} vs grid {grid} (λ={lambda})")
            });
            Ok(report)
        })
        .collect();
    let mut report = SuiteReport::new("tilted_backward", 1e-3);
    for p in parts {
        report.merge(p?);
    }
    Ok(report)
}

/// Rényi dual against the primal joint minimization on 20 random
/// full-support channels and 10 rates each.
pub fn dual_primal() -> Result<SuiteReport> {
    let mut r = rng(5);
    let instances: Vec<_> = (0..20)
        .map(|i| {
            let k = 2 + i % 2;
            let w = oracles::random_channel(&mut r, k, k, 0.05);
            let p = oracles::random_pmf(&mut r, k, 0.05);
            (w, p)
        })
        .collect();
    let cases: Vec<(usize, usize)> = (0..20).flat_map(|c| (0..10).map(move |k| (c, k))).collect();
    let parts: Vec<Result<SuiteReport>> = cases
        .into_par_iter()
        .map(|(c, k)| {
            let mut report = SuiteReport::new("dual_primal", 5e-3);
            let (w, p) = &instances[c];
            let w = channel(w.clone())?;
            let p = pmf(p.clone())?;
            let rate = 0.1 * k as f64 * mutual_information(&p, &w)?;
            let dual = ea_renyi(&p, &w, rate)?.value;
            let primal = ea_primal_oracle(&p, &w, rate)?;
            report.record((dual - primal).abs(), || {
                format!("channel {c}, R={rate:.4}: dual {dual} vs primal {primal}")
            });
            Ok(report)
        })
        .collect();
    let mut report = SuiteReport::new("dual_primal", 5e-3);
    for p in parts {
        report.merge(p?);
    }
    Ok(report)
}

/// Tilted-family solution against a 400 × 400 grid on 20 random binary
/// channels, and monotone envelopes along every balancing trace.
pub fn tilted_family() -> Result<SuiteReport> {
    let mut r = rng(6);
    let instances: Vec<_> = (0..20)
        .map(|_| {
            let w = oracles::random_channel(&mut r, 2, 2, 0.02);
            let q = oracles::random_pmf(&mut r, 2, 0.1);
            let u: f64 = r.gen_range(0.0..0.9);
            let rate_frac: f64 = r.gen_range(0.0..1.0);
            (w, q, u, rate_frac)
        })
        .collect();
    let parts: Vec<Result<SuiteReport>> = instances
        .into_par_iter()
        .enumerate()
        .map(|(trial, (w_rows, q_raw, u, rate_frac))| {
            let mut report = SuiteReport::new("tilted_family", 1e-3);
            let w = channel(w_rows.clone())?;
            let q = pmf(q_raw.clone())?;
            let s = u * (1.0 - cond_entropy(&w, &q)?);
            let sol = inner_min_out(&q, &w, s)?;
            let grid = oracles::inner_out_grid(
                [q_raw[0], q_raw[1]],
                [[w_rows[0][0], w_rows[0][1]], [w_rows[1][0], w_rows[1][1]]],
                s,
                400,
            );
            report.record((sol.value - grid).abs(), || {
                format!("trial {trial}: tilted {} vs grid {grid} (s={s})", sol.value)
            });

            let py = push_forward(&q, &w)?;
            let rate = rate_frac * mutual_information(&q, &w)?;
            match balance_s(&q, &w, &py, rate, 1e-6) {
                Ok(b) => {
                    let v = trace_violation(&b.trace, false);
                    report.check(v <= ENVELOPE_SLACK, v, || {
                        format!("trial {trial}: envelope violation {v}")
                    });
                }
                Err(e) => report.check(false, f64::INFINITY, || format!("trial {trial}: {e}")),
            }
            Ok(report)
        })
        .collect();
    let mut report = SuiteReport::new("tilted_family", 1e-3);
    for p in parts {
        report.merge(p?);
    }
    Ok(report)
}

/// Type-class sandwich bounds, exact multinomial partitions, and the
/// backward-class probability bound.
pub fn types() -> Result<SuiteReport> {
    let mut report = SuiteReport::new("types", 1e-9);
    for k in [2usize, 3] {
        for n in 1..=20 {
            for t in enumerate_types(n, k)? {
                let l = log2_type_class_size(&t);
                let (lo, hi) = type_class_bounds::<f64>(&t);
                let err = (lo - l).max(l - hi).max(0.0);
                report.record(err, || format!("type {:?}: log2|T| = {l} outside [{lo}, {hi}]", t.counts()));
            }
        }
    }
    // Σ_Q |T_Q| Π a_x^{n Q(x)} = (Σ a)^n, exactly.
    for weights in [vec![1u32, 2], vec![1, 2, 3], vec![5, 1, 1]] {
        let d: u32 = weights.iter().sum();
        for n in 1..=20usize {
            let mut total = BigUint::zero();
            for t in enumerate_types(n, weights.len())? {
                let mut term = type_class_size(&t);
                for (&a, &c) in weights.iter().zip(t.counts()) {
                    term *= Pow::pow(BigUint::from(a), c);
                }
                total += term;
            }
            let ok = total == Pow::pow(BigUint::from(d), n);
            report.check(ok, if ok { 0.0 } else { 1.0 }, || {
                format!("partition failed for weights {weights:?}, n={n}")
            });
        }
    }
    // Backward-class probabilities over a fixed output type sum to one and
    // respect their lower bound.
    let mut r = rng(7);
    let w = channel(oracles::random_channel(&mut r, 2, 2, 0.05))?;
    let px = pmf(oracles::random_pmf(&mut r, 2, 0.05))?;
    let n = 6;
    for n0 in 0..=n {
        let n1 = n - n0;
        let mut sum = 0.0;
        for a in 0..=n0 {
            for b in 0..=n1 {
                let table = ConditionalTypeTable::new(2, 2, vec![a, b, n0 - a, n1 - b])?;
                let cw = codeword_weights(&table, &w, &px)?;
                report.check(cw.bound_ok, 0.0, || {
                    format!("table {:?}: log2 p {} below {}", table.counts(), cw.log2_p, cw.log2_p_lower_bound)
                });
                sum += cw.p;
            }
        }
        report.record((sum - 1.0).abs(), || format!("output type ({n0},{n1}): Σ p = {sum}"));
    }
    Ok(report)
}
