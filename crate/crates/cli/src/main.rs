//! `rqlab`: run ground-state solves, alpha sweeps and property checks from a
//! configuration file and write CSV or JSON for external plotting.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use config::{parse_config, Config, ConfigError, Format};
use rqlab::functionals::AlphaParams;
use rqlab::grid::fmt17;
use rqlab::properties::{gradient_fd_check, run_identity_suite};
use rqlab::solver::{find_degenerate, genus_upper_bound, minimize_ground_state, multistart_spectrum};
use rqlab::sweep::{domain_monotonicity_check, scaling_check, sweep_points, write_csv, CSV_HEADER};
use rqlab::transforms::TranslationRecord;
use rqlab::{Domain, DomainKind, SolveResult, SweepConfig, SweepRecord};

/// Environment variable naming the default output directory.
const OUTPUT_DIR_VAR: &str = "RQLAB_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "rqlab", version, about = "Generalized Rayleigh quotient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    config: PathBuf,
    /// Overrides `[solver] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `[output] path`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overrides `[output] format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Overrides `[problem] alpha`.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Ground state at one alpha (all distinct critical points when multistart > 1).
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the iteration history of the first point as CSV.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Write the nodal values of the first point as CSV.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Ground states over the `[sweep]` alpha grid.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Solver-free identity checks and the gradient check.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
    /// Upper bounds on the genus levels for k = 1..=max-k.
    Genus {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        max_k: usize,
    },
    /// The degenerate ground state at the inflection value of alpha.
    Degenerate {
        #[command(flatten)]
        common: Common,
    },
    /// Scaling law of the ground state level under dilations.
    ScaleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 2.0, 3.0])]
        t: Vec<f64>,
    },
    /// Ground state level on the domain against a concentric enlargement.
    DomainCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2.0)]
        outer_scale: f64,
    },
}

enum Failure {
    Io(String),
    Validation(String),
    NotConverged(String),
    Property(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Validation(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Property(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Validation(m) | Failure::NotConverged(m) | Failure::Property(m) => m,
        }
    }
}

impl From<rqlab::Error> for Failure {
    fn from(e: rqlab::Error) -> Self {
        match e {
            rqlab::Error::NotConverged { .. } => Failure::NotConverged(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Run {
    name: &'static str,
    cfg: Config,
}

impl Run {
    fn load(name: &'static str, c: &Common) -> Result<Run, Failure> {
        let text = fs::read_to_string(&c.config)
            .map_err(|e| Failure::Io(format!("cannot read {}: {e}", c.config.display())))?;
        let mut cfg = parse_config(&text)?;
        if let Some(seed) = c.seed {
            cfg.solver.seed = Some(seed);
        }
        if let Some(f) = c.format {
            cfg.output.format = f;
        }
        if let Some(a) = c.alpha {
            cfg.problem.alpha = a;
        }
        if c.output.is_some() {
            cfg.output.path = c.output.clone();
        }
        Ok(Run { name, cfg })
    }

    fn params(&self) -> Result<AlphaParams, Failure> {
        Ok(AlphaParams::new(self.cfg.triple()?, self.cfg.problem.alpha))
    }

    fn domain(&self) -> Result<Domain, Failure> {
        Ok(self.cfg.domain()?)
    }

    /// Effective configuration as `#` comment lines. The output section is
    /// left out so the bytes do not depend on where they are written.
    fn echo(&self) -> String {
        let toml = self.cfg.to_toml();
        let shown = toml.find("[output]").map_or(&toml[..], |i| &toml[..i]);
        let mut s = format!("# rqlab {} {}\n", self.name, env!("CARGO_PKG_VERSION"));
        for line in shown.lines().filter(|l| !l.is_empty()) {
            s.push_str("# ");
            s.push_str(line);
            s.push('\n');
        }
        s
    }

    fn destination(&self, ext: &str) -> Option<PathBuf> {
        if let Some(p) = &self.cfg.output.path {
            return Some(p.clone());
        }
        std::env::var_os(OUTPUT_DIR_VAR).map(|dir| Path::new(&dir).join(format!("{}.{ext}", self.name)))
    }

    fn write(&self, body: &str, ext: &str) -> Outcome {
        match self.destination(ext) {
            Some(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)?;
                }
                fs::write(&path, body).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
                info!("wrote {}", path.display());
            }
            None => std::io::stdout().lock().write_all(body.as_bytes())?,
        }
        Ok(())
    }

    fn write_json<T: Serialize>(&self, value: &T) -> Outcome {
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
        body.push('\n');
        self.write(&body, "json")
    }

    /// CSV with the configuration echo, or a JSON array of the same rows.
    fn write_table<T: Serialize>(&self, header: &str, rows: &[String], items: &[T]) -> Outcome {
        match self.cfg.output.format {
            Format::Json => self.write_json(&items),
            Format::Csv => {
                let mut body = self.echo();
                body.push_str(header);
                body.push('\n');
                for r in rows {
                    body.push_str(r);
                    body.push('\n');
                }
                self.write(&body, "csv")
            }
        }
    }

    fn write_records(&self, records: &[SweepRecord]) -> Outcome {
        match self.cfg.output.format {
            Format::Json => self.write_json(&records),
            Format::Csv => {
                let mut body = self.echo().into_bytes();
                write_csv(records, &mut body)?;
                self.write(&String::from_utf8(body).expect("CSV is UTF-8"), "csv")
            }
        }
    }
}

fn unconverged(results: &[SolveResult]) -> Outcome {
    match results.iter().find(|r| !r.converged) {
        Some(r) => Err(Failure::NotConverged(format!(
            "alpha = {}: not converged after {} iterations (residual {:e})",
            r.point.ap.alpha, r.iterations, r.point.residual
        ))),
        None => Ok(()),
    }
}

fn solve(run: &Run, history: Option<&Path>, profile: Option<&Path>) -> Outcome {
    let ap = run.params()?;
    let domain = run.domain()?;
    let opts = run.cfg.solve_options();
    let results = if opts.multistart > 1 {
        multistart_spectrum(&ap, &domain, &opts)?
    } else {
        vec![minimize_ground_state(&ap, &domain, &opts, None)?]
    };
    info!("{} critical point(s), lowest level {}", results.len(), results[0].point.lambda);
    let records: Vec<SweepRecord> = results.iter().map(SweepRecord::from_result).collect();
    run.write_records(&records)?;
    if let Some(path) = history {
        fs::write(path, results[0].history_csv())?;
    }
    if let Some(path) = profile {
        fs::write(path, results[0].point.u.to_csv())?;
    }
    unconverged(&results)
}

fn sweep(run: &Run) -> Outcome {
    let cfg = SweepConfig {
        triple: run.cfg.triple()?,
        alpha_grid: run.cfg.alpha_grid(),
        warm_start: run.cfg.sweep.warm_start,
        domain: run.domain()?,
        opts: run.cfg.solve_options(),
    };
    let results = sweep_points(&cfg)?;
    let records: Vec<SweepRecord> = results.iter().map(SweepRecord::from_result).collect();
    run.write_records(&records)?;
    unconverged(&results)
}

fn property_outcome(failed: Vec<String>) -> Outcome {
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Property(format!("failed checks: {}", failed.join(", "))))
    }
}

fn verify(run: &Run, samples: usize) -> Outcome {
    let ap = run.params()?;
    let domain = run.domain()?;
    let opts = run.cfg.solve_options();
    let mut reports = run_identity_suite(&ap.triple, &domain, opts.seed, samples);
    reports.push(gradient_fd_check(&ap, &domain, opts.seed, samples, opts.eps_reg));
    for r in &reports {
        info!("{}: passed = {}, worst error {:e}", r.name, r.passed, r.worst_error);
    }
    run.write_json(&reports)?;
    property_outcome(reports.iter().filter(|r| !r.passed).map(|r| r.name.clone()).collect())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GenusRow {
    k: usize,
    bound: f64,
    lambda1: f64,
}

fn genus(run: &Run, max_k: usize) -> Outcome {
    if max_k == 0 {
        return Err(Failure::Validation("max-k must be at least 1".into()));
    }
    let ap = run.params()?;
    let domain = run.domain()?;
    let opts = run.cfg.solve_options();
    let ground = minimize_ground_state(&ap, &domain, &opts, None)?;
    let (ax, bx, _, _) = domain.bounds();
    let rows = (1..=max_k)
        .map(|k| {
            let bound = genus_upper_bound(k, &ap, &domain, (bx - ax) / k as f64, &opts)?;
            Ok(GenusRow { k, bound, lambda1: ground.point.lambda })
        })
        .collect::<rqlab::Result<Vec<_>>>()?;
    let lines: Vec<String> =
        rows.iter().map(|g| format!("{},{},{}", g.k, fmt17(g.bound), fmt17(g.lambda1))).collect();
    run.write_table("k,bound,lambda1", &lines, &rows)?;
    unconverged(std::slice::from_ref(&ground))
}

fn degenerate(run: &Run) -> Outcome {
    let triple = run.cfg.triple()?;
    let rec: TranslationRecord = find_degenerate(&triple, &run.domain()?, &run.cfg.solve_options())?;
    let header: String = CSV_HEADER.split(',').take(9).collect::<Vec<_>>().join(",");
    let row = format!(
        "{},{},{},{},{},{},{},{},{}",
        fmt17(rec.alpha),
        fmt17(rec.lambda),
        fmt17(rec.value),
        rec.kind.as_str(),
        fmt17(rec.norm_q),
        fmt17(rec.norm_r),
        fmt17(rec.grad_p),
        fmt17(rec.energy),
        fmt17(rec.fiber2)
    );
    run.write_table(&header, &[row], &[rec])
}

fn report_outcome(run: &Run, report: rqlab::Report) -> Outcome {
    run.write_json(&[&report])?;
    property_outcome(if report.passed { Vec::new() } else { vec![report.check] })
}

fn scale_check(run: &Run, t: &[f64]) -> Outcome {
    let report = scaling_check(&run.params()?, &run.domain()?, t, &run.cfg.solve_options())?;
    report_outcome(run, report)
}

/// Concentric enlargement by `s` with the same mesh size.
fn enlarged(d: &Domain, s: f64) -> Result<Domain, Failure> {
    if !(s >= 1.0 && s.is_finite()) {
        return Err(Failure::Validation(format!("outer-scale must be >= 1, got {s}")));
    }
    let cells = (d.cells as f64 * s).round() as usize;
    let grow = |a: f64, b: f64| {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a) * cells as f64 / d.cells as f64);
        (m - h, m + h)
    };
    let out = match d.kind {
        DomainKind::Interval { a, b } => {
            let (a, b) = grow(a, b);
            Domain::interval(a, b, cells)
        }
        DomainKind::Rectangle { ax, bx, ay, by } => {
            let ((ax, bx), (ay, by)) = (grow(ax, bx), grow(ay, by));
            Domain::rectangle(ax, bx, ay, by, cells)
        }
    };
    Ok(out?)
}

fn domain_check(run: &Run, outer_scale: f64) -> Outcome {
    let inner = run.domain()?;
    let outer = enlarged(&inner, outer_scale)?;
    let report = domain_monotonicity_check(&run.params()?, &inner, &outer, &run.cfg.solve_options())?;
    report_outcome(run, report)
}

fn dispatch(command: &Command) -> Outcome {
    match command {
        Command::Solve { common, history, profile } => {
            solve(&Run::load("solve", common)?, history.as_deref(), profile.as_deref())
        }
        Command::Sweep { common } => sweep(&Run::load("sweep", common)?),
        Command::Verify { common, samples } => verify(&Run::load("verify", common)?, *samples),
        Command::Genus { common, max_k } => genus(&Run::load("genus", common)?, *max_k),
        Command::Degenerate { common } => degenerate(&Run::load("degenerate", common)?),
        Command::ScaleCheck { common, t } => scale_check(&Run::load("scale-check", common)?, t),
        Command::DomainCheck { common, outer_scale } => domain_check(&Run::load("domain-check", common)?, *outer_scale),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rqlab: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
