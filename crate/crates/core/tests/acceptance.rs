//! Acceptance criteria. Each prints one PASS/FAIL line; the test fails on
//! any outcome other than the recorded one.

use std::time::Instant;

use softcover::achievability::ea_curve;
use softcover::converse::{self, ConverseInstance, ENVELOPE_SLACK};
use softcover::curve::rate_grid;
use softcover::sim::{
    binomial_bound_check, converse_slack, empirical_exponent, random_code_floor,
};
use softcover::types::ea_finite;
use softcover::verify::run_suite;
use softcover::*;

/// Criteria that fail with correct numerics; the analysis lives in the
/// project's decision log. At R = 0.50 on the BSC instance both exponents
/// are below 1e-3 (E_a ≈ 7.46e-4, E_c ≈ 6.48e-4).
const KNOWN_UNATTAINABLE: &[&str] = &["curve-positive-below-0.50"];

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn report(outcomes: &mut Vec<Outcome>, id: &'static str, pass: bool, detail: String) {
    println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
    outcomes.push(Outcome { id, pass, detail });
}

fn bsc_instance() -> (Channel64, Pmf64, Pmf64) {
    (
        Channel::bsc(0.1).unwrap(),
        Pmf::from_f64(&[0.48, 0.52]).unwrap(),
        Pmf::from_f64(&[0.484, 0.516]).unwrap(),
    )
}

fn suite(outcomes: &mut Vec<Outcome>, id: &'static str, name: &str) {
    let t = Instant::now();
    let r = run_suite(name).unwrap();
    report(
        outcomes,
        id,
        r.ok(),
        format!(
            "{} passed, {} failed, worst error {:.3e} (tol {:e}), {:.1?} {:?}",
            r.passed,
            r.failed,
            r.worst,
            r.tolerance,
            t.elapsed(),
            r.failures
        ),
    );
}

fn curve_criteria(outcomes: &mut Vec<Outcome>) {
    let (w, _, py) = bsc_instance();
    let rates = rate_grid(0.0, 0.6, 0.025);
    let t = Instant::now();
    let ea = ea_curve(&w, &py, &rates, 64).unwrap();
    let inst = ConverseInstance::new(w.clone(), py.clone(), 0.0).unwrap();
    let ec = converse::ec_curve(&inst, &rates).unwrap();
    let elapsed = t.elapsed();
    for (a, c) in ea.points.iter().zip(&ec.points) {
        println!(
            "      R={:.3}  E_c={:.6e}  E_a={:.6e}  s*={:.5}  alpha*={:.5}",
            a.rate,
            c.value,
            a.value,
            c.s_star.unwrap(),
            a.alpha_star.unwrap()
        );
    }

    let worst = ea
        .points
        .iter()
        .zip(&ec.points)
        .map(|(a, c)| c.value - a.value)
        .fold(f64::NEG_INFINITY, f64::max);
    report(
        outcomes,
        "curve-sandwich",
        worst <= 1e-6,
        format!("max(E_c − E_a) = {worst:.3e} over {} rates ({elapsed:.1?})", rates.len()),
    );

    let (inc_a, inc_c) = (ea.max_increase(), ec.max_increase());
    report(
        outcomes,
        "curve-monotone",
        inc_a <= 1e-6 && inc_c <= 1e-6,
        format!("largest increase E_a {inc_a:.3e}, E_c {inc_c:.3e}"),
    );

    let high: Vec<(f64, f64, f64)> = ea
        .points
        .iter()
        .zip(&ec.points)
        .filter(|(a, _)| a.rate >= 0.55 - 1e-9)
        .map(|(a, c)| (a.rate, a.value, c.value))
        .collect();
    let high_ok = high.iter().all(|&(_, a, c)| a <= 1e-3 && c <= 1e-3);
    report(
        outcomes,
        "curve-vanishes-from-0.55",
        high_ok,
        format!("(R, E_a, E_c) = {high:?}"),
    );

    let low_bad: Vec<(f64, f64, f64)> = ea
        .points
        .iter()
        .zip(&ec.points)
        .filter(|(a, _)| a.rate <= 0.50 + 1e-9)
        .filter(|(a, c)| a.value < 1e-3 || c.value < 1e-3)
        .map(|(a, c)| (a.rate, a.value, c.value))
        .collect();
    report(
        outcomes,
        "curve-positive-below-0.50",
        low_bad.is_empty(),
        format!("rates with an exponent under 1e-3: {low_bad:?}"),
    );
}

fn trace_criterion(outcomes: &mut Vec<Outcome>) {
    let (w, p, py) = bsc_instance();
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    let mut count = 0;
    for rate in rate_grid(0.0, 0.6, 0.025) {
        for q in [p.clone(), Pmf::from_f64(&[0.3, 0.7]).unwrap(), Pmf::uniform(2)] {
            match converse::balance_s(&q, &w, &py, rate, 1e-6) {
                Ok(b) => {
                    worst = worst.max(converse::trace_violation(&b.trace, false));
                    count += 1;
                }
                Err(e) => errors.push(format!("R={rate}: {e}")),
            }
        }
    }
    report(
        outcomes,
        "balance-trace-envelopes",
        errors.is_empty() && worst <= ENVELOPE_SLACK,
        format!("{count} traces, worst envelope violation {worst:.3e}, errors {errors:?}"),
    );
}

fn binomial_hand_value(outcomes: &mut Vec<Outcome>) {
    let c = binomial_bound_check(2, 0.5f64).unwrap();
    report(
        outcomes,
        "binomial-hand-value",
        (c.lhs - 0.125).abs() < 1e-15 && (c.rhs - 0.25).abs() < 1e-15 && c.ok,
        format!("M=2, p=0.5: lhs {} rhs {}", c.lhs, c.rhs),
    );
}

fn simulation_criteria(outcomes: &mut Vec<Outcome>) {
    let (w, p, py) = bsc_instance();
    let rate = 0.25;
    let seed = 20_240_601u64;
    let t = Instant::now();
    let inst = ConverseInstance::new(w.clone(), py.clone(), rate).unwrap();
    let (ec, _) = converse::ec_value(&inst).unwrap();
    let reports = empirical_exponent(&w, &py, &p, rate, &[8, 12, 16], 50, seed).unwrap();
    let (nx, ny) = (2, 2);

    let mut ceiling_ok = true;
    let mut floor_ok = true;
    let mut mean_ok = true;
    let mut lines = Vec::new();
    let mut means = Vec::new();
    for r in &reports {
        let slack: f64 = converse_slack(nx, ny, r.n);
        let top = r
            .per_code
            .iter()
            .map(|c| c.exponent_estimate)
            .fold(f64::NEG_INFINITY, f64::max);
        let bottom = r
            .per_code
            .iter()
            .map(|c| c.exponent_estimate)
            .fold(f64::INFINITY, f64::min);
        ceiling_ok &= top <= ec.value + slack;
        floor_ok &= bottom >= ec.value - slack;
        let ea_n = ea_finite(r.n, &p, &w, rate).unwrap();
        let floor = random_code_floor(nx, ny, r.n, ea_n);
        mean_ok &= r.mean_overlap >= floor;
        means.push(r.mean_overlap);
        lines.push(format!(
            "n={} M={} estimates [{bottom:.4}, {top:.4}] slack {slack:.4} mean(1−tv) {:.4e} floor {floor:.3e} E_a(R,n) {ea_n:.4}",
            r.n, r.m, r.mean_overlap
        ));
    }
    let elapsed = t.elapsed();
    for l in &lines {
        println!("      {l}");
    }
    report(
        outcomes,
        "sim-converse-ceiling",
        ceiling_ok,
        format!(
            "every estimate ≤ E_c(0.25) + slack with E_c = {:.6}; seed {seed}, 50 codes per n ({elapsed:.1?})",
            ec.value
        ),
    );
    report(
        outcomes,
        "sim-converse-floor",
        floor_ok,
        "every estimate ≥ E_c(0.25) − slack (bound direction implied by the converse)".to_string(),
    );
    report(
        outcomes,
        "sim-random-code-floor",
        mean_ok,
        "mean(1 − tv) above ½(n+1)^-6 2^(−n E_a(R,n)) for n = 8, 12, 16".to_string(),
    );
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    println!("      mean(1 − tv) by n: {means:?} (decreasing: {decreasing})");
}

fn finite_n_criterion(outcomes: &mut Vec<Outcome>) {
    let (w, p, _) = bsc_instance();
    let ea = achievability::ea_renyi(&p, &w, 0.25).unwrap().value;
    let ns = [10usize, 20, 40];
    let vals: Vec<f64> = ns.iter().map(|&n| ea_finite(n, &p, &w, 0.25).unwrap()).collect();
    let gaps: Vec<f64> = vals.iter().map(|v| v - ea).collect();
    let shapes: Vec<f64> = ns.iter().map(|&n| ((n + 1) as f64).log2() / n as f64).collect();
    let c = gaps.iter().zip(&shapes).map(|(g, s)| g * s).sum::<f64>()
        / shapes.iter().map(|s| s * s).sum::<f64>();
    let nonincreasing = vals.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let above = gaps.iter().all(|&g| g >= -1e-9);
    report(
        outcomes,
        "finite-n-convergence",
        nonincreasing && above && c.is_finite(),
        format!(
            "E_a = {ea:.6}, E_a(R,n) for n = 10, 20, 40: {vals:.6?}; fitted c = {c:.4} in gap ≈ c log2(n+1)/n"
        ),
    );
}

#[test]
fn acceptance_criteria() {
    let mut outcomes = Vec::new();
    curve_criteria(&mut outcomes);
    suite(&mut outcomes, "dual-primal-agreement", "dual_primal");
    suite(&mut outcomes, "binomial-exhaustive", "binomial");
    binomial_hand_value(&mut outcomes);
    suite(&mut outcomes, "gibbs-grid", "gibbs");
    suite(&mut outcomes, "tilted-backward-grid", "tilted_backward");
    suite(&mut outcomes, "chain-rule-identities", "chain_rule");
    suite(&mut outcomes, "tilted-family-grid", "tilted_family");
    trace_criterion(&mut outcomes);
    simulation_criteria(&mut outcomes);
    finite_n_criterion(&mut outcomes);

    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!(
        "{} of {} criteria passed; failing: {failed:?}",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    let unexpected: Vec<&Outcome> = outcomes
        .iter()
        .filter(|o| o.pass == KNOWN_UNATTAINABLE.contains(&o.id))
        .collect();
    for o in &unexpected {
        println!("UNEXPECTED {}: {}", o.id, o.detail);
    }
    assert!(unexpected.is_empty(), "criteria deviated from the recorded outcome");
}
