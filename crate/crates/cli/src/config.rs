//! Experiment configuration (JSON).

use std::path::Path;

use serde::Deserialize;
use softcover::converse::{
    DEFAULT_QX_RESOLUTION, DEFAULT_S_TOLERANCE, DEFAULT_V_RESOLUTION, MIN_RESOLUTION,
};
use softcover::curve::rate_grid;
use softcover::{Channel64, Pmf64};

use crate::error::CliError;

pub const ROW_SUM_TOL: f64 = 1e-9;
pub const DEFAULT_POLYTOPE_RESOLUTION: usize = 64;
pub const DEFAULT_LAMBDA_TOL: f64 = softcover::achievability::LAMBDA_TOL;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Row-major `W(y|x)`, one row per input symbol.
    pub channel: Vec<Vec<f64>>,
    #[serde(default)]
    pub input_dist: Option<Vec<f64>>,
    #[serde(default)]
    pub target_output: Option<Vec<f64>>,
    pub rate_grid: RateGrid,
    #[serde(default)]
    pub resolutions: Resolutions,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sim: SimSettings,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Resolutions {
    pub qx: usize,
    pub v: usize,
    pub polytope: usize,
}

impl Default for Resolutions {
    fn default() -> Self {
        Resolutions {
            qx: DEFAULT_QX_RESOLUTION,
            v: DEFAULT_V_RESOLUTION,
            polytope: DEFAULT_POLYTOPE_RESOLUTION,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub s_tol: f64,
    pub lambda_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            s_tol: DEFAULT_S_TOLERANCE,
            lambda_tol: DEFAULT_LAMBDA_TOL,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub enabled: bool,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            n_list: Vec::new(),
            trials: 0,
            enabled: false,
        }
    }
}

/// A validated config with the distributions built.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub channel: Channel64,
    pub input: Option<Pmf64>,
    pub target: Pmf64,
    pub rates: Vec<f64>,
}

fn field(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{path}`: {msg}"))
}

fn check_pmf(path: &str, v: &[f64], len: usize) -> Result<Pmf64, CliError> {
    if v.len() != len {
        return Err(field(path, format!("expected {len} entries, found {}", v.len())));
    }
    if let Some(i) = v.iter().position(|p| !p.is_finite() || *p < 0.0) {
        return Err(field(&format!("{path}[{i}]"), "must be a finite non-negative number"));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > ROW_SUM_TOL {
        return Err(field(path, format!("sums to {total}, not 1 (tolerance {ROW_SUM_TOL:e})")));
    }
    Pmf64::from_f64(v).map_err(|e| field(path, e))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            CliError::Config(format!(
                "line {} column {}, field `{}`: {inner}",
                inner.line(),
                inner.column(),
                e.path()
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(self) -> Result<Experiment, CliError> {
        let nx = self.channel.len();
        if nx == 0 {
            return Err(field("channel", "needs at least one row"));
        }
        let ny = self.channel[0].len();
        if ny == 0 {
            return Err(field("channel[0]", "needs at least one column"));
        }
        for (x, row) in self.channel.iter().enumerate() {
            check_pmf(&format!("channel[{x}]"), row, ny)?;
        }
        let rows: Vec<&[f64]> = self.channel.iter().map(|r| r.as_slice()).collect();
        let channel = Channel64::from_f64(&rows).map_err(|e| field("channel", e))?;

        let (input, target) = match (&self.input_dist, &self.target_output) {
            (Some(_), Some(_)) => {
                return Err(field("input_dist", "give exactly one of input_dist and target_output"))
            }
            (None, None) => {
                return Err(field("input_dist", "one of input_dist or target_output is required"))
            }
            (Some(p), None) => {
                let p = check_pmf("input_dist", p, nx)?;
                let py = softcover::push_forward(&p, &channel).map_err(|e| field("input_dist", e))?;
                (Some(p), py)
            }
            (None, Some(t)) => (None, check_pmf("target_output", t, ny)?),
        };

        let g = self.rate_grid;
        if !(g.step > 0.0) || !g.step.is_finite() {
            return Err(field("rate_grid.step", "must be positive"));
        }
        if !(g.start >= 0.0) || !g.start.is_finite() {
            return Err(field("rate_grid.start", "must be a non-negative number"));
        }
        if !(g.stop >= g.start) || !g.stop.is_finite() {
            return Err(field("rate_grid.stop", "must be at least rate_grid.start"));
        }
        let rates = rate_grid(g.start, g.stop, g.step);
        if rates.is_empty() {
            return Err(field("rate_grid", "grid is empty"));
        }

        let r = self.resolutions;
        for (name, v, min) in [
            ("qx", r.qx, MIN_RESOLUTION),
            ("v", r.v, MIN_RESOLUTION),
            ("polytope", r.polytope, 2),
        ] {
            if v < min {
                return Err(field(&format!("resolutions.{name}"), format!("must be at least {min}")));
            }
        }
        let t = self.tolerances;
        if !(t.s_tol > 0.0) {
            return Err(field("tolerances.s_tol", "must be positive"));
        }
        if !(t.lambda_tol > 0.0) {
            return Err(field("tolerances.lambda_tol", "must be positive"));
        }
        if self.sim.enabled {
            if self.sim.n_list.is_empty() || self.sim.n_list.contains(&0) {
                return Err(field("sim.n_list", "needs one or more positive blocklengths"));
            }
            if self.sim.trials == 0 {
                return Err(field("sim.trials", "must be positive"));
            }
        }

        Ok(Experiment {
            config: self,
            channel,
            input,
            target,
            rates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG: &str = r#"{
        "channel": [[0.9, 0.1], [0.1, 0.9]],
        "input_dist": [0.48, 0.52],
        "rate_grid": {"start": 0.0, "stop": 0.6, "step": 0.025}
    }"#;

    fn err(text: &str) -> String {
        match ExperimentConfig::parse(text).and_then(|c| c.validate()) {
            Err(CliError::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let e = ExperimentConfig::parse(FIG).unwrap().validate().unwrap();
        assert_eq!(e.rates.len(), 25);
        assert!((e.target.get(0) - 0.484).abs() < 1e-15);
        assert_eq!(e.config.resolutions.qx, DEFAULT_QX_RESOLUTION);
        assert!(!e.config.sim.enabled);
    }

    #[test]
    fn diagnostics_name_the_field() {
        let m = err(&FIG.replace("0.9, 0.1]", "0.9, 0.2]"));
        assert!(m.contains("channel[0]"), "{m}");
        let m = err(&FIG.replace("\"step\": 0.025", "\"step\": 0"));
        assert!(m.contains("rate_grid.step"), "{m}");
        let m = err(&FIG.replace("\"start\": 0.0", "\"start\": \"zero\""));
        assert!(m.contains("rate_grid.start") && m.contains("line 4"), "{m}");
        let m = err(&FIG.replace("\"input_dist\"", "\"input_dst\""));
        assert!(m.contains("input_dst"), "{m}");
    }

    #[test]
    fn exactly_one_distribution() {
        let both = FIG.replace(
            "\"rate_grid\"",
            "\"target_output\": [0.484, 0.516], \"rate_grid\"",
        );
        assert!(err(&both).contains("exactly one"));
        let neither = FIG.replace("\"input_dist\": [0.48, 0.52],", "");
        assert!(err(&neither).contains("required"));
    }
}
