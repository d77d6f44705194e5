//! Branches `alpha -> (lambda_1(alpha), mu_alpha or nu_alpha, norms, energy)`
//! and the comparative checks run on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{r_alpha, AlphaParams};
use crate::grid::{fmt17, transplant, Domain, GridFunction};
use crate::par;
use crate::params::{scaling_exponent, ExponentTriple, Regime};
use crate::solver::{minimize_ground_state, SolveOptions, SolveResult};
use crate::transforms::{translation_record, TranslationKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub triple: ExponentTriple,
    pub alpha_grid: Vec<f64>,
    pub warm_start: bool,
    pub domain: Domain,
    pub opts: SolveOptions,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() {
            return Err(Error::Domain("alpha grid is empty".into()));
        }
        if self.alpha_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("alpha grid must be strictly increasing".into()));
        }
        let a0 = self.triple.alpha0();
        if let Some(bad) = self.alpha_grid.iter().find(|&&a| !(a > a0)) {
            return Err(Error::InvalidAlpha(format!(
                "alpha = {bad} <= alpha0 = {a0}: the ground state level is zero and not attained there"
            )));
        }
        self.opts.validate()
    }
}

/// `n` equally spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub lambda1: f64,
    pub value: f64,
    pub kind: TranslationKind,
    pub norm_q: f64,
    pub norm_r: f64,
    pub grad_p: f64,
    pub energy: f64,
    pub fiber2: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub const CSV_HEADER: &str =
    "alpha,lambda1,value,kind,norm_q,norm_r,grad_p,energy,fiber2,iterations,residual,converged";

impl SweepRecord {
    pub fn from_result(res: &SolveResult) -> SweepRecord {
        let ap = &res.point.ap;
        let kind = if ap.triple.r != ap.triple.p { TranslationKind::Mu } else { TranslationKind::Nu };
        let base = SweepRecord {
            alpha: ap.alpha,
            lambda1: res.point.lambda,
            value: f64::NAN,
            kind,
            norm_q: f64::NAN,
            norm_r: f64::NAN,
            grad_p: f64::NAN,
            energy: f64::NAN,
            fiber2: f64::NAN,
            iterations: res.iterations,
            residual: res.point.residual,
            converged: res.converged,
        };
        match translation_record(&res.point) {
            Ok(t) => SweepRecord {
                value: t.value,
                kind: t.kind,
                norm_q: t.norm_q,
                norm_r: t.norm_r,
                grad_p: t.grad_p,
                energy: t.energy,
                fiber2: t.fiber2,
                ..base
            },
            Err(e) => {
                log::warn!("alpha = {}: no translated representation ({e})", ap.alpha);
                base
            }
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt17(self.alpha),
            fmt17(self.lambda1),
            fmt17(self.value),
            self.kind.as_str(),
            fmt17(self.norm_q),
            fmt17(self.norm_r),
            fmt17(self.grad_p),
            fmt17(self.energy),
            fmt17(self.fiber2),
            self.iterations,
            fmt17(self.residual),
            self.converged
        )
    }
}

/// Ground states along the grid. Warm-started sweeps run in order and seed
/// each solve with the previous converged point; cold sweeps solve every row
/// independently and may run them concurrently.
pub fn sweep_points(cfg: &SweepConfig) -> Result<Vec<SolveResult>> {
    cfg.validate()?;
    let solve = |alpha: f64, warm: Option<&GridFunction>| {
        minimize_ground_state(&AlphaParams::new(cfg.triple, alpha), &cfg.domain, &cfg.opts, warm)
    };
    if cfg.warm_start {
        let mut out: Vec<SolveResult> = Vec::with_capacity(cfg.alpha_grid.len());
        let mut warm: Option<GridFunction> = None;
        for &alpha in &cfg.alpha_grid {
            let res = solve(alpha, warm.as_ref())?;
            if res.converged {
                warm = Some(res.point.u.clone());
            } else {
                log::warn!("alpha = {alpha}: not converged (residual {:e})", res.point.residual);
            }
            out.push(res);
        }
        Ok(out)
    } else {
        par::map(cfg.opts.execution, cfg.alpha_grid.clone(), |a| solve(a, None)).into_iter().collect()
    }
}

pub fn sweep_alpha(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    Ok(sweep_points(cfg)?.iter().map(SweepRecord::from_result).collect())
}

pub fn write_csv<W: std::io::Write>(records: &[SweepRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub check: String,
    pub passed: bool,
    pub details: Vec<String>,
    pub worst_violation: f64,
}

impl Report {
    fn new(check: &str) -> Report {
        Report { check: check.to_string(), passed: true, details: Vec::new(), worst_violation: 0.0 }
    }

    fn fail(&mut self, violation: f64, detail: String) {
        self.passed = false;
        self.worst_violation = self.worst_violation.max(violation);
        self.details.push(detail);
    }

    fn note(&mut self, detail: String) {
        self.details.push(detail);
    }
}

fn converged(records: &[SweepRecord], report: &mut Report) -> Vec<SweepRecord> {
    let (ok, skipped): (Vec<_>, Vec<_>) = records.iter().copied().partition(|r| r.converged);
    for r in skipped {
        report.note(format!("alpha = {}: not converged, skipped", r.alpha));
    }
    ok
}

/// `|Omega|^{alpha p/q + (1 - alpha) p/r} lambda_1(alpha)` strictly increasing.
pub fn check_monotonicity(records: &[SweepRecord], triple: &ExponentTriple, measure: f64) -> Report {
    let mut rep = Report::new("monotonicity");
    let rows = converged(records, &mut rep);
    let weighted: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.alpha, measure.powf(triple.measure_exponent(r.alpha)) * r.lambda1)).collect();
    for w in weighted.windows(2) {
        let ((a0, v0), (a1, v1)) = (w[0], w[1]);
        if !(v1 > v0) {
            rep.fail((v0 - v1) / v0.abs(), format!("weighted level drops from {v0} at alpha = {a0} to {v1} at alpha = {a1}"));
        }
    }
    rep.note(format!("{} rows compared", weighted.len()));
    rep
}

/// Upper bounds through the levels at `alpha = 1` and `alpha = 0`, with 1% slack.
pub fn check_bounds(
    records: &[SweepRecord],
    triple: &ExponentTriple,
    lambda_at_1: f64,
    lambda_at_0: f64,
    measure: f64,
) -> Report {
    const SLACK: f64 = 0.01;
    let mut rep = Report::new("bounds");
    let a0 = triple.alpha0();
    for r in converged(records, &mut rep) {
        let a = r.alpha;
        let mut bounds = Vec::new();
        if a > a0 && a <= 1.0 {
            let e = (1.0 / triple.q - 1.0 / triple.r) * (1.0 - a) * triple.p;
            bounds.push(("Holder", lambda_at_1 * measure.powf(e)));
        }
        if a >= 1.0 {
            bounds.push(("geometric mean", lambda_at_1.powf(a) * lambda_at_0.powf(1.0 - a)));
        }
        for (name, b) in bounds {
            if r.lambda1 > b * (1.0 + SLACK) {
                rep.fail(r.lambda1 / b - 1.0, format!("alpha = {a}: {name} bound {b} < lambda1 {}", r.lambda1));
            }
        }
    }
    rep.note(format!("slack {SLACK}"));
    rep
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InsufficientRange(what.to_string()))
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut k = 0;
    for i in 1..v.len() {
        if v[i] > v[k] {
            k = i;
        }
    }
    k
}

fn argmin(v: &[f64]) -> usize {
    let mut k = 0;
    for i in 1..v.len() {
        if v[i] < v[k] {
            k = i;
        }
    }
    k
}

/// Factor by which the extreme grid value must exceed the interior reference
/// for a divergence trend.
pub const TREND_FACTOR: f64 = 10.0;

/// Checks the branch shape expected in each regime on a finite grid.
///
/// `lambda_at_0` is only used for `r = p`; when absent it is read from a
/// record at `alpha = 0`.
pub fn classify_asymptotics(records: &[SweepRecord], regime: Regime, lambda_at_0: Option<f64>) -> Result<Report> {
    let mut rep = Report::new("asymptotics");
    let rows = converged(records, &mut rep);
    match regime {
        Regime::ConvexConcave => {
            let unit: Vec<&SweepRecord> = rows.iter().filter(|r| (0.0..=1.0).contains(&r.alpha)).collect();
            require(unit.len() >= 3, "need at least three alphas in [0, 1]")?;
            require(unit[0].alpha <= 0.05, "grid must start at alpha <= 0.05")?;
            require(unit[unit.len() - 1].alpha >= 0.95, "grid must reach alpha >= 0.95")?;
            let vals: Vec<f64> = unit.iter().map(|r| r.value).collect();
            let k = argmax(&vals);
            let max = vals[k];
            rep.note(format!("interior maximum {max} at alpha = {}", unit[k].alpha));
            if k == 0 || k == vals.len() - 1 {
                rep.fail(1.0, "maximum sits at an endpoint".into());
            }
            for (i, r) in [(0, unit[0]), (vals.len() - 1, unit[vals.len() - 1])] {
                let ratio = vals[i] / max;
                rep.note(format!("alpha = {}: value/max = {ratio}", r.alpha));
                if !(ratio < 0.1) {
                    rep.fail(ratio - 0.1, format!("endpoint alpha = {} not below 10% of the maximum", r.alpha));
                }
            }
        }
        Regime::Superhomogeneous => {
            let above: Vec<&SweepRecord> = rows.iter().filter(|r| r.alpha > 1.0).collect();
            require(above.len() >= 3, "need at least three alphas above 1")?;
            let vals: Vec<f64> = above.iter().map(|r| r.value).collect();
            let k = argmin(&vals);
            let min = vals[k];
            rep.note(format!("interior minimum {min} at alpha = {}", above[k].alpha));
            if k == 0 || k == vals.len() - 1 {
                rep.fail(1.0, "minimum sits at an endpoint".into());
            }
            let last = vals[vals.len() - 1];
            let ratio = last / min;
            rep.note(format!("value at alpha = {} is {ratio} x the minimum", above[vals.len() - 1].alpha));
            if !(ratio > TREND_FACTOR) {
                rep.fail(TREND_FACTOR - ratio, format!("largest-alpha value not above {TREND_FACTOR} x the minimum"));
            }
        }
        Regime::Subhomogeneous => {
            let below: Vec<&SweepRecord> = rows.iter().filter(|r| r.alpha >= 0.0 && r.alpha < 1.0).collect();
            require(below.len() >= 2, "need at least two alphas in [0, 1)")?;
            require(below[0].alpha <= 0.05, "grid must start at alpha <= 0.05")?;
            for w in below.windows(2) {
                if !(w[1].value > w[0].value) {
                    let v = (w[0].value - w[1].value) / w[0].value.abs().max(f64::MIN_POSITIVE);
                    rep.fail(v, format!("value not increasing between alpha = {} and {}", w[0].alpha, w[1].alpha));
                }
            }
            let above: Vec<&SweepRecord> = rows.iter().filter(|r| r.alpha > 1.0).collect();
            if above.len() >= 2 {
                let (first, last) = (above[0], above[above.len() - 1]);
                rep.note(format!("alpha > 1: value {} at {} and {} at {}", first.value, first.alpha, last.value, last.alpha));
                if !(last.value < first.value) {
                    rep.fail(last.value / first.value - 1.0, "no decay toward 0 for large alpha".into());
                }
            }
        }
        Regime::BorderlineRP => {
            let unit: Vec<&SweepRecord> = rows.iter().filter(|r| r.alpha > 0.0 && r.alpha <= 1.0).collect();
            require(unit.len() >= 2, "need at least two alphas in (0, 1]")?;
            require(unit[0].alpha <= 0.1, "grid must start at alpha <= 0.1")?;
            require(unit[unit.len() - 1].alpha == 1.0, "grid must end at alpha = 1")?;
            let l0 = lambda_at_0
                .or_else(|| rows.iter().find(|r| r.alpha == 0.0).map(|r| r.lambda1))
                .ok_or_else(|| Error::InsufficientRange("lambda1(0) is needed as reference".into()))?;
            let first = unit[0].value;
            let rel = (first - l0).abs() / l0;
            rep.note(format!("nu({}) = {first}, lambda1(0) = {l0}", unit[0].alpha));
            if !(rel <= 0.1) {
                rep.fail(rel - 0.1, "first value not within 10% of lambda1(0)".into());
            }
            for w in unit.windows(2) {
                if !(w[1].value < w[0].value) {
                    rep.fail(
                        (w[1].value - w[0].value) / l0,
                        format!("value not decreasing between alpha = {} and {}", w[0].alpha, w[1].alpha),
                    );
                }
            }
            let end = unit[unit.len() - 1].value;
            if end.abs() > 1e-12 * l0 {
                rep.fail(end.abs() / l0, format!("value at alpha = 1 is {end}, not 0"));
            }
        }
        Regime::BorderlineQP => {
            rep.note("no asymptotic shape is prescribed for q = p < r".into());
        }
    }
    Ok(rep)
}

/// Warm versus cold levels; a disagreement above 1% flags a possible branch
/// switch or a non-simple level.
pub fn compare_branches(warm: &[SweepRecord], cold: &[SweepRecord]) -> Report {
    let mut rep = Report::new("branch-consistency");
    for (w, c) in warm.iter().zip(cold) {
        if w.alpha != c.alpha || !(w.converged && c.converged) {
            continue;
        }
        let rel = (w.lambda1 - c.lambda1).abs() / w.lambda1.abs().min(c.lambda1.abs());
        if rel > 0.01 {
            rep.fail(rel, format!("alpha = {}: warm {} vs cold {}", w.alpha, w.lambda1, c.lambda1));
        }
    }
    rep
}

/// Scaling law `lambda_1(alpha; t Omega) = t^e lambda_1(alpha; Omega)`, checked
/// exactly through transplanted functions and approximately by re-solving.
pub fn scaling_check(ap: &AlphaParams, domain: &Domain, t_factors: &[f64], opts: &SolveOptions) -> Result<Report> {
    const EXACT: f64 = 1e-10;
    const RESOLVE: f64 = 5e-3;
    let mut rep = Report::new("scaling");
    if let Some(t) = t_factors.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Domain(format!("scale factors must be positive, got {t}")));
    }
    let e = scaling_exponent(&ap.triple, ap.alpha);
    let base = minimize_ground_state(ap, domain, opts, None)?;
    if !base.converged {
        rep.note("reference solve did not converge".into());
    }
    let lam = base.point.lambda;
    let mut transplant_ratio = Vec::new();
    for &t in t_factors {
        let v = transplant(&base.point.u, t)?;
        let rt = r_alpha(&v, ap)?;
        let ratio = rt / lam;
        let expect = t.powf(e);
        let err = (ratio / expect - 1.0).abs();
        transplant_ratio.push((t, ratio));
        rep.note(format!("t = {t}: transplant ratio {ratio}, expected {expect}"));
        if err > EXACT {
            rep.fail(err, format!("t = {t}: transplant ratio off by {err:e}"));
        }
        let scaled = domain.scaled(t);
        let res = minimize_ground_state(ap, &scaled, opts, None)?;
        let err = (res.point.lambda / (expect * lam) - 1.0).abs();
        rep.note(format!("t = {t}: re-solved level {} (relative error {err:e})", res.point.lambda));
        if err > RESOLVE || !res.converged {
            rep.fail(err, format!("t = {t}: re-solved level off by {err:e}"));
        }
    }
    for &(t, r) in &transplant_ratio {
        if let Some(&(_, r_inv)) = transplant_ratio.iter().find(|(s, _)| (s * t - 1.0).abs() < 1e-15) {
            let err = (r * r_inv - 1.0).abs();
            if err > EXACT {
                rep.fail(err, format!("t = {t} and 1/t ratios do not compose to 1 ({err:e})"));
            }
        }
    }
    Ok(rep)
}

/// `lambda_1(alpha; inner) >= lambda_1(alpha; outer) (1 - 1e-3)` for nested domains.
pub fn domain_monotonicity_check(ap: &AlphaParams, inner: &Domain, outer: &Domain, opts: &SolveOptions) -> Result<Report> {
    if !outer.contains(inner) {
        return Err(Error::Domain(format!("{:?} is not contained in {:?}", inner.kind, outer.kind)));
    }
    let mut rep = Report::new("domain-monotonicity");
    let li = minimize_ground_state(ap, inner, opts, None)?;
    let lo = minimize_ground_state(ap, outer, opts, None)?;
    let (a, b) = (li.point.lambda, lo.point.lambda);
    rep.note(format!("inner {a}, outer {b}"));
    if !(li.converged && lo.converged) {
        rep.fail(f64::INFINITY, "a solve did not converge".into());
    }
    if a < b * (1.0 - 1e-3) {
        rep.fail(1.0 - a / b, format!("inner level {a} below outer level {b}"));
    }
    Ok(rep)
}
