//! Experiment configuration read from a TOML file with the sections
//! `[problem]`, `[solver]`, `[sweep]` and `[output]`.

use std::fmt;
use std::num::NonZeroUsize;
use std::path::PathBuf;

use rqlab::sweep::linspace;
use rqlab::{validate, Domain, Execution, ExponentTriple, SolveOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ConfigError {
    /// Malformed text, unknown key or wrong value type.
    Parse { line: Option<usize>, message: String },
    /// Well-formed but rejected by the core library.
    Validation(rqlab::Error),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line: Some(l), message } => write!(f, "parse error at line {l}: {message}"),
            ConfigError::Parse { line: None, message } => write!(f, "parse error: {message}"),
            ConfigError::Validation(e) => write!(f, "validation error: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    #[serde(rename = "N")]
    pub n: usize,
    /// `[a, b]` for an interval, `[ax, bx, ay, by]` for a rectangle.
    pub domain: Vec<f64>,
    #[serde(default = "default_cells")]
    pub cells: NonZeroUsize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Solver {
    pub max_iter: Option<NonZeroUsize>,
    pub tol: Option<f64>,
    pub step0: Option<f64>,
    pub armijo_c: Option<f64>,
    pub eps_reg: Option<f64>,
    pub seed: Option<u64>,
    pub multistart: Option<NonZeroUsize>,
    pub positivity: Option<bool>,
    pub parallel: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct Sweep {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub steps: NonZeroUsize,
    pub warm_start: bool,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep { alpha_min: 0.0, alpha_max: 1.0, steps: NonZeroUsize::new(20).unwrap(), warm_start: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_format")]
    pub format: Format,
    pub path: Option<PathBuf>,
}

impl Default for Output {
    fn default() -> Self {
        Output { format: Format::Csv, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub problem: Problem,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub output: Output,
}

fn default_cells() -> NonZeroUsize {
    NonZeroUsize::new(200).unwrap()
}

fn default_alpha() -> f64 {
    0.5
}

fn default_format() -> Format {
    Format::Csv
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a configuration, filling every optional key with its
/// default so the echoed configuration is the effective one.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().trim_end().to_string(),
    })?;
    cfg.fill_defaults();
    cfg.check()?;
    Ok(cfg)
}

impl Config {
    fn fill_defaults(&mut self) {
        let d = SolveOptions::for_p(self.problem.p);
        let s = &mut self.solver;
        s.max_iter.get_or_insert(NonZeroUsize::new(d.max_iter).unwrap());
        s.tol.get_or_insert(d.tol_residual);
        s.step0.get_or_insert(d.step0);
        s.armijo_c.get_or_insert(d.armijo_c);
        s.eps_reg.get_or_insert(d.eps_reg);
        s.seed.get_or_insert(d.seed);
        s.multistart.get_or_insert(NonZeroUsize::new(d.multistart).unwrap());
        s.positivity.get_or_insert(d.positivity);
        s.parallel.get_or_insert(true);
    }

    fn check(&self) -> Result<(), ConfigError> {
        let v = ConfigError::Validation;
        self.triple().map_err(v)?;
        let d = self.domain().map_err(v)?;
        if d.dim() != self.problem.n {
            return Err(v(rqlab::Error::Domain(format!(
                "domain has dimension {} but N = {}",
                d.dim(),
                self.problem.n
            ))));
        }
        self.solve_options().validate().map_err(v)?;
        if !(self.sweep.alpha_max >= self.sweep.alpha_min) {
            return Err(v(rqlab::Error::Domain("sweep requires alphaMax >= alphaMin".into())));
        }
        Ok(())
    }

    pub fn triple(&self) -> rqlab::Result<ExponentTriple> {
        validate(self.problem.p, self.problem.q, self.problem.r, self.problem.n)
    }

    pub fn domain(&self) -> rqlab::Result<Domain> {
        let c = self.problem.cells.get();
        match self.problem.domain[..] {
            [a, b] => Domain::interval(a, b, c),
            [ax, bx, ay, by] => Domain::rectangle(ax, bx, ay, by, c),
            _ => Err(rqlab::Error::Domain(format!(
                "domain needs 2 (interval) or 4 (rectangle) bounds, got {}",
                self.problem.domain.len()
            ))),
        }
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.solver;
        let d = SolveOptions::for_p(self.problem.p);
        SolveOptions {
            max_iter: s.max_iter.map_or(d.max_iter, NonZeroUsize::get),
            tol_residual: s.tol.unwrap_or(d.tol_residual),
            step0: s.step0.unwrap_or(d.step0),
            armijo_c: s.armijo_c.unwrap_or(d.armijo_c),
            eps_reg: s.eps_reg.unwrap_or(d.eps_reg),
            seed: s.seed.unwrap_or(d.seed),
            multistart: s.multistart.map_or(d.multistart, NonZeroUsize::get),
            positivity: s.positivity.unwrap_or(d.positivity),
            execution: if s.parallel.unwrap_or(true) { Execution::Parallel } else { Execution::Sequential },
            ..d
        }
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        linspace(self.sweep.alpha_min, self.sweep.alpha_max, self.sweep.steps.get())
    }

    /// The effective configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[problem]\np = 2\nq = 1\nr = 3\nN = 1\ndomain = [0, 1]\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.problem.cells.get(), 200);
        assert_eq!(cfg.problem.alpha, 0.5);
        assert_eq!(cfg.sweep, Sweep::default());
        assert_eq!(cfg.output.format, Format::Csv);
        assert_eq!(cfg.solve_options(), SolveOptions::for_p(2.0));
        assert_eq!(cfg.solver.tol, Some(1e-8));
        assert_eq!(cfg.domain().unwrap(), Domain::interval(0.0, 1.0, 200).unwrap());
    }

    #[test]
    fn effective_config_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn q_not_below_r_is_a_validation_error() {
        let text = MINIMAL.replace("q = 1", "q = 3");
        match parse_config(&text) {
            Err(e @ ConfigError::Validation(_)) => assert!(e.to_string().contains("q < r"), "{e}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_steps_is_a_parse_error_with_line() {
        let text = format!("{MINIMAL}\n[sweep]\nalphaMin = 0\nalphaMax = 1\nsteps = 0\nwarmStart = true\n");
        match parse_config(&text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, Some(11)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}[solver]\ntolerance = 1e-6\n");
        match parse_config(&text) {
            Err(ConfigError::Parse { line, message }) => {
                assert_eq!(line, Some(8));
                assert!(message.contains("tolerance"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config(&format!("{MINIMAL}[extra]\n")), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn missing_required_key() {
        let text = MINIMAL.replace("N = 1\n", "");
        assert!(matches!(parse_config(&text), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn rectangle_and_dimension_mismatch() {
        let text = MINIMAL.replace("N = 1", "N = 2").replace("[0, 1]", "[0, 1, 0, 1]").replace("r = 3", "r = 2.5");
        assert_eq!(parse_config(&text).unwrap().domain().unwrap().dim(), 2);
        let bad = MINIMAL.replace("[0, 1]", "[0, 1, 0, 1]");
        assert!(matches!(parse_config(&bad), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn sequential_flag() {
        let cfg = parse_config(&format!("{MINIMAL}[solver]\nparallel = false\nseed = 9\n")).unwrap();
        let o = cfg.solve_options();
        assert_eq!(o.execution, Execution::Sequential);
        assert_eq!(o.seed, 9);
    }
}
