use std::path::Path;

use softcover::achievability::ea_curve_on;
use softcover::converse::{ec_curve, ConverseInstance};
use softcover::curve::rate_grid;
use softcover::feasible::FeasiblePolytope;
use softcover::sim::{converse_slack, empirical_exponent};
use softcover::verify::{run_suite, SUITES};
use softcover::{renyi_mi, ExponentCurve64};

use crate::config::{Experiment, ExperimentConfig, RateGrid, Resolutions, SimSettings, Tolerances};
use crate::error::CliError;
use crate::output::{csv_bytes, digest, line_chart, num, opt, write_atomic, Series};

pub const CURVE_HEADER: [&str; 7] = ["rate", "e_c", "e_a", "alpha_star", "s_star", "qx_star", "px_star"];

pub const SIM_HEADER: [&str; 17] = [
    "rate",
    "e_c",
    "e_a",
    "alpha_star",
    "s_star",
    "n",
    "codebook_size",
    "trials",
    "seed",
    "mean_tv",
    "mean_overlap",
    "exponent_estimate",
    "min_code_estimate",
    "max_code_estimate",
    "converse_slack",
    "below_ceiling",
    "above_floor",
];

/// Tolerance on `e_c ≤ e_a` and on increases along the rate grid.
pub const CURVE_SLACK: f64 = 1e-6;

pub struct Curves {
    pub ea: ExponentCurve64,
    pub ec: ExponentCurve64,
}

pub fn compute_curves(exp: &Experiment) -> Result<Curves, CliError> {
    let res = exp.config.resolutions;
    let tol = exp.config.tolerances;
    let polytope = FeasiblePolytope::build(&exp.channel, &exp.target)?;
    let ea = ea_curve_on(&polytope, &exp.rates, res.polytope, tol.lambda_tol)?;
    let inst = ConverseInstance::new(exp.channel.clone(), exp.target.clone(), 0.0)?
        .with_resolutions(res.qx, res.v)?
        .with_s_tolerance(tol.s_tol)?;
    let ec = ec_curve(&inst, &exp.rates)?;
    Ok(Curves { ea, ec })
}

/// Row-wise sandwich and monotonicity of both columns.
pub fn curve_violations(c: &Curves) -> Vec<String> {
    let mut out = Vec::new();
    for (a, e) in c.ea.points.iter().zip(&c.ec.points) {
        if e.value > a.value + CURVE_SLACK {
            out.push(format!("rate {}: e_c {} exceeds e_a {}", a.rate, e.value, a.value));
        }
    }
    for (name, curve) in [("e_a", &c.ea), ("e_c", &c.ec)] {
        for w in curve.points.windows(2) {
            if w[1].value > w[0].value + CURVE_SLACK {
                out.push(format!(
                    "{name} increases from {} at rate {} to {} at rate {}",
                    w[0].value, w[0].rate, w[1].value, w[1].rate
                ));
            }
        }
    }
    out
}

fn curve_rows(c: &Curves) -> Vec<Vec<String>> {
    c.ea.points
        .iter()
        .zip(&c.ec.points)
        .map(|(a, e)| {
            vec![
                num(a.rate),
                num(e.value),
                num(a.value),
                opt(a.alpha_star),
                opt(e.s_star),
                digest(e.optimizer.probs()),
                digest(a.optimizer.probs()),
            ]
        })
        .collect()
}

fn check(violations: Vec<String>) -> Result<(), CliError> {
    if violations.is_empty() {
        return Ok(());
    }
    for v in &violations {
        eprintln!("violation: {v}");
    }
    Err(CliError::Invariant(format!("{} curve check(s) failed", violations.len())))
}

/// The CSV is written even when a check fails, so the offending rows can be inspected.
pub fn exponents(config: &Path, out: &Path) -> Result<(), CliError> {
    let exp = ExperimentConfig::load(config)?.validate()?;
    let curves = compute_curves(&exp)?;
    write_atomic(out, &csv_bytes(&CURVE_HEADER, &curve_rows(&curves))?)?;
    println!("wrote {} rates to {}", exp.rates.len(), out.display());
    check(curve_violations(&curves))
}

pub fn simulate(config: &Path, out: &Path) -> Result<(), CliError> {
    let exp = ExperimentConfig::load(config)?.validate()?;
    let sim = &exp.config.sim;
    if !sim.enabled {
        println!("simulation disabled in config (sim.enabled = false); nothing to do");
        return Ok(());
    }
    let curves = compute_curves(&exp)?;
    let (nx, ny) = (exp.channel.in_size(), exp.channel.out_size());
    let mut rows = Vec::new();
    for (a, e) in curves.ea.points.iter().zip(&curves.ec.points) {
        // Codewords come from the configured input, else from the E_a optimizer.
        let source = exp.input.clone().unwrap_or_else(|| a.optimizer.clone());
        let reports = empirical_exponent(
            &exp.channel,
            &exp.target,
            &source,
            a.rate,
            &sim.n_list,
            sim.trials,
            exp.config.seed,
        )?;
        for r in reports {
            let slack: f64 = converse_slack(nx, ny, r.n);
            let est = r.per_code.iter().map(|c| c.exponent_estimate);
            let lo = est.clone().fold(f64::INFINITY, f64::min);
            let hi = est.fold(f64::NEG_INFINITY, f64::max);
            rows.push(vec![
                num(a.rate),
                num(e.value),
                num(a.value),
                opt(a.alpha_star),
                opt(e.s_star),
                r.n.to_string(),
                r.m.to_string(),
                r.trials.to_string(),
                r.seed.to_string(),
                num(r.tv),
                num(r.mean_overlap),
                num(r.exponent_estimate),
                num(lo),
                num(hi),
                num(slack),
                (hi <= e.value + slack).to_string(),
                (lo >= e.value - slack).to_string(),
            ]);
        }
    }
    write_atomic(out, &csv_bytes(&SIM_HEADER, &rows)?)?;
    println!("wrote {} rows to {}", rows.len(), out.display());
    check(curve_violations(&curves))
}

pub fn verify(suite: Option<&str>) -> Result<(), CliError> {
    let names: Vec<&str> = match suite {
        Some(s) if SUITES.contains(&s) => vec![s],
        Some(s) => {
            return Err(CliError::Config(format!(
                "unknown suite '{s}' (expected one of {})",
                SUITES.join(", ")
            )))
        }
        None => SUITES.to_vec(),
    };
    let mut failed_suites = 0;
    for name in names {
        let r = run_suite(name)?;
        println!(
            "{} {name}: {} passed, {} failed, worst error {:.3e} (tolerance {:e})",
            if r.ok() { "PASS" } else { "FAIL" },
            r.passed,
            r.failed,
            r.worst,
            r.tolerance
        );
        for f in &r.failures {
            println!("    {f}");
        }
        if !r.ok() {
            failed_suites += 1;
        }
    }
    if failed_suites > 0 {
        return Err(CliError::Invariant(format!("{failed_suites} suite(s) failed")));
    }
    Ok(())
}

pub fn parse_alphas(arg: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: &str| CliError::Config(format!("--alphas '{arg}': {m}"));
    let parts: Vec<&str> = arg.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected start:stop:step"));
    }
    let mut v = [0.0f64; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.trim().parse().map_err(|_| bad(&format!("'{p}' is not a number")))?;
    }
    let [start, stop, step] = v;
    if !(start > 0.0) || !stop.is_finite() {
        return Err(bad("orders must be positive and finite"));
    }
    if !(step > 0.0) || stop < start {
        return Err(bad("need step > 0 and stop >= start"));
    }
    Ok(rate_grid(start, stop, step))
}

pub fn renyi(config: &Path, alphas: &str, out: &Path) -> Result<(), CliError> {
    let exp = ExperimentConfig::load(config)?.validate()?;
    let grid = parse_alphas(alphas)?;
    let p = exp.input.as_ref().ok_or_else(|| {
        CliError::Config("field `input_dist`: the renyi command needs an input distribution".into())
    })?;
    let mut rows = Vec::with_capacity(grid.len());
    for alpha in grid {
        rows.push(vec![num(alpha), num(renyi_mi(alpha, p, &exp.channel)?)]);
    }
    write_atomic(out, &csv_bytes(&["alpha", "renyi_mi"], &rows)?)?;
    println!("wrote {} orders to {}", rows.len(), out.display());
    Ok(())
}

pub fn figure1_experiment() -> Experiment {
    ExperimentConfig {
        channel: vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        input_dist: Some(vec![0.48, 0.52]),
        target_output: None,
        rate_grid: RateGrid { start: 0.0, stop: 0.6, step: 0.025 },
        resolutions: Resolutions::default(),
        tolerances: Tolerances::default(),
        seed: 0,
        sim: SimSettings::default(),
    }
    .validate()
    .expect("built-in configuration is valid")
}

pub fn figure1(out_dir: &Path) -> Result<(), CliError> {
    let exp = figure1_experiment();
    let curves = compute_curves(&exp)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let csv_path = out_dir.join("figure1.csv");
    let svg_path = out_dir.join("figure1.svg");
    write_atomic(&csv_path, &csv_bytes(&CURVE_HEADER, &curve_rows(&curves))?)?;
    let pts = |c: &ExponentCurve64| c.points.iter().map(|p| (p.rate, p.value)).collect();
    let svg = line_chart(
        &[
            Series { label: "E_a(R)", colour: "#d62728", points: pts(&curves.ea) },
            Series { label: "E_c(R)", colour: "#1f77b4", points: pts(&curves.ec) },
        ],
        "R (bits)",
        "exponent (bits)",
    );
    write_atomic(&svg_path, svg.as_bytes())?;
    println!("wrote {} and {}", csv_path.display(), svg_path.display());
    check(curve_violations(&curves))
}
