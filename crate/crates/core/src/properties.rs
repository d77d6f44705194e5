//! Pass/fail checks of identities and inequalities. The identity suite works
//! on arbitrary grid functions; the remaining checks take solver output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{evaluate, r_alpha, AlphaParams, Moments};
use crate::grid::{dirichlet_energy, lp_norm, random_function, Domain, GridFunction};
use crate::par;
use crate::params::{ExponentTriple, Regime};
use crate::solver::{descend, Restriction, SolveOptions};
use crate::transforms::{mu_translation, project_m, ray_distance, t_alpha_scale, CriticalPoint, MuForm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PropertyReport {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub worst_error: f64,
    pub context: String,
}

impl PropertyReport {
    fn from_errors(name: &str, errors: &[f64], threshold: f64, context: String) -> PropertyReport {
        let worst = errors.iter().cloned().fold(0.0, f64::max);
        let finite = errors.iter().all(|e| e.is_finite());
        PropertyReport {
            name: name.to_string(),
            passed: finite && worst <= threshold,
            samples: errors.len(),
            worst_error: if finite { worst } else { f64::INFINITY },
            context: format!("threshold {threshold:e}; {context}"),
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Random samples mixing rough nodal noise with smooth modulated profiles.
fn samples(domain: &Domain, seed: u64, n: usize) -> Vec<GridFunction> {
    let (ax, bx, ay, by) = domain.bounds();
    (0..n as u64)
        .map(|i| {
            let noise = random_function(domain, seed.wrapping_add(i));
            if i % 2 == 0 {
                noise
            } else {
                let k = 1.0 + (i % 5) as f64;
                let smooth = GridFunction::from_fn(*domain, |x, y| {
                    let sx = (std::f64::consts::PI * (x - ax) / (bx - ax)).sin();
                    let sy = if domain.dim() == 2 { (std::f64::consts::PI * (y - ay) / (by - ay)).sin() } else { 1.0 };
                    sx * sy * (1.0 + 0.5 * (k * x).cos())
                });
                smooth.axpy(0.05, &noise)
            }
        })
        .filter(|u| !u.is_zero())
        .collect()
}

const IDENTITY_TOL: f64 = 1e-9;

/// Solver-free checks on random functions: Holder, homogeneity, equivalent
/// translation-level forms, the interpolation identity for `R_alpha`, and
/// the empirical Gagliardo-Nirenberg constant.
pub fn run_identity_suite(triple: &ExponentTriple, domain: &Domain, seed: u64, n: usize) -> Vec<PropertyReport> {
    let us = samples(domain, seed, n.max(1));
    let t = *triple;
    let measure = domain.measure();

    // Holder: ||u||_q <= |Omega|^{1/q - 1/r} ||u||_r
    let c = measure.powf(1.0 / t.q - 1.0 / t.r);
    let mut sharpest: f64 = 0.0;
    let holder: Vec<f64> = us
        .iter()
        .map(|u| {
            let ratio = lp_norm(u, t.q) / (c * lp_norm(u, t.r));
            sharpest = sharpest.max(ratio);
            (ratio - 1.0).max(0.0)
        })
        .collect();
    let plateau = GridFunction::from_fn(*domain, |_, _| 1.0);
    let plateau_ratio = lp_norm(&plateau, t.q) / (c * lp_norm(&plateau, t.r));
    let mut reports = vec![PropertyReport::from_errors(
        "holder",
        &holder,
        1e-12,
        format!("largest sample ratio {sharpest}; interior plateau ratio {plateau_ratio}"),
    )];

    // homogeneity
    let ap = AlphaParams::new(t, t.alpha_star() + 0.3);
    let mut hom = Vec::new();
    for u in &us {
        let base = Moments::of(u, &t);
        for s in [-3.0, 0.5, 7.0] {
            let v = u.scaled(s);
            hom.push(rel(r_alpha(&v, &ap).unwrap_or(f64::NAN), base.r_alpha(&ap)));
            hom.push(rel(dirichlet_energy(&v, t.p), f64::abs(s).powf(t.p) * base.energy));
        }
    }
    reports.push(PropertyReport::from_errors("homogeneity", &hom, IDENTITY_TOL, format!("alpha = {}", ap.alpha)));

    // translation-level forms
    if t.r != t.p {
        let alphas = [0.0, 0.3, 0.7, t.alpha_star(), 1.6, 3.0];
        let mut forms = Vec::new();
        for u in &us {
            for &a in &alphas {
                if a == 1.0 {
                    continue;
                }
                let ap = AlphaParams::new(t, a);
                let hom = mu_translation(u, &ap, MuForm::Homogeneous);
                let on_c = t_alpha_scale(u, &ap).and_then(|(_, v)| mu_translation(&v, &ap, MuForm::OnC));
                let on_m = project_m(u, &ap).and_then(|w| mu_translation(&w, &ap, MuForm::OnM));
                match (hom, on_c, on_m) {
                    (Ok(h), Ok(c), Ok(m)) => {
                        forms.push(rel(h, c));
                        forms.push(rel(h, m));
                    }
                    _ => forms.push(f64::INFINITY),
                }
            }
        }
        reports.push(PropertyReport::from_errors(
            "mu-forms",
            &forms,
            IDENTITY_TOL,
            format!("alphas {alphas:?}"),
        ));
    } else {
        reports.push(PropertyReport {
            name: "mu-forms".into(),
            passed: true,
            samples: 0,
            worst_error: 0.0,
            context: "not applicable when r = p".into(),
        });
    }

    // R_alpha = R_1^alpha R_0^{1 - alpha}
    let mut interp = Vec::new();
    for u in &us {
        let m = Moments::of(u, &t);
        let r1 = m.r_alpha(&AlphaParams::new(t, 1.0));
        let r0 = m.r_alpha(&AlphaParams::new(t, 0.0));
        for a in [-0.5, 0.25, 0.5, 2.0, 4.0] {
            let lhs = m.r_alpha(&AlphaParams::new(t, a));
            let rhs = (a * r1.ln() + (1.0 - a) * r0.ln()).exp();
            interp.push(rel(lhs, rhs));
        }
    }
    reports.push(PropertyReport::from_errors("interpolation", &interp, IDENTITY_TOL, String::new()));

    // empirical Gagliardo-Nirenberg constant: smallest R_{alpha0} over samples
    let a0 = AlphaParams::new(t, t.alpha0());
    let theta = t.theta();
    let proxy = us.iter().map(|u| Moments::of(u, &t).r_alpha(&a0)).fold(f64::INFINITY, f64::min);
    let constant = proxy.powf(1.0 / ((t.alpha0() - 1.0) * t.p));
    let gn: Vec<f64> = us
        .iter()
        .map(|u| {
            let lhs = lp_norm(u, t.r);
            let rhs = constant * dirichlet_energy(u, t.p).powf(theta / t.p) * lp_norm(u, t.q).powf(1.0 - theta);
            (lhs / rhs - 1.0).max(0.0)
        })
        .collect();
    reports.push(PropertyReport::from_errors(
        "gagliardo-nirenberg",
        &gn,
        1e-12,
        format!("empirical constant {constant} (theta = {theta}, level proxy {proxy}); reported, not compared to the sharp constant"),
    ));
    reports
}

/// Central differences of `R_alpha` against the analytic gradient. The
/// error is normalized by `||grad|| ||v||`.
pub fn gradient_fd_check(ap: &AlphaParams, domain: &Domain, seed: u64, directions: usize, eps_reg: f64) -> PropertyReport {
    let u = samples(domain, seed, 2).pop().expect("two samples requested");
    let errors: Vec<f64> = match evaluate(&u, ap, eps_reg) {
        Ok(ev) => {
            let g = ev.gradient(ap.triple.p);
            (0..directions as u64)
                .map(|i| {
                    let v = if i == 0 { u.clone() } else { random_function(domain, seed.wrapping_add(1000 + i)) };
                    let h = 1e-6 * u.norm() / v.norm();
                    let plus = r_alpha(&u.axpy(h, &v), ap);
                    let minus = r_alpha(&u.axpy(-h, &v), ap);
                    match (plus, minus) {
                        (Ok(a), Ok(b)) => ((a - b) / (2.0 * h) - g.dot(&v)).abs() / (g.norm() * v.norm()),
                        _ => f64::INFINITY,
                    }
                })
                .collect()
        }
        Err(_) => vec![f64::INFINITY],
    };
    PropertyReport::from_errors(
        "gradient-fd",
        &errors,
        1e-5,
        format!("p = {}, alpha = {}, epsReg = {eps_reg:e}; first direction is u itself", ap.triple.p, ap.alpha),
    )
}

/// Minimum ratio of residual to tolerance for a point to count as
/// non-critical at another `alpha`.
pub const INDEPENDENCE_RATIO: f64 = 100.0;

/// Residual of the nonlocal equation at `alpha` for the `M_alpha`
/// representative of `u`.
pub fn residual_at(u: &GridFunction, ap: &AlphaParams, eps_reg: f64) -> Result<f64> {
    Ok(evaluate(&project_m(u, ap)?, ap, eps_reg)?.residual())
}

/// A critical point at one `alpha` is not critical at another.
pub fn linear_independence_check(point: &CriticalPoint, alpha2: f64, tol_residual: f64, eps_reg: f64) -> PropertyReport {
    let ap2 = point.ap.with_alpha(alpha2);
    let res = residual_at(&point.u, &ap2, eps_reg).unwrap_or(f64::NAN);
    let ratio = res / tol_residual;
    PropertyReport {
        name: "linear-independence".into(),
        passed: ratio > INDEPENDENCE_RATIO,
        samples: 1,
        worst_error: res,
        context: format!(
            "alpha1 = {}, alpha2 = {alpha2}, residual/tolerance = {ratio:e} (threshold {INDEPENDENCE_RATIO})",
            point.ap.alpha
        ),
    }
}

/// `(alpha, residual)` over a list of parameters.
pub fn residual_scan(u: &GridFunction, template: &AlphaParams, alphas: &[f64], eps_reg: f64) -> Result<Vec<(f64, f64)>> {
    alphas.iter().map(|&a| Ok((a, residual_at(u, &template.with_alpha(a), eps_reg)?))).collect()
}

pub const SIMPLICITY_TOL: f64 = 1e-4;

/// Signed random starts, unrestricted descent; all converged end points
/// must lie on one ray.
pub fn simplicity_check(
    triple: &ExponentTriple,
    alpha: f64,
    domain: &Domain,
    starts: usize,
    opts: &SolveOptions,
) -> Result<PropertyReport> {
    if !triple.regime().is_subhomogeneous_family() {
        return Err(Error::InvalidExponents(format!("simplicity needs q < r <= p, got {:?}", triple.regime())));
    }
    let ap = AlphaParams::new(*triple, alpha);
    let seeds: Vec<u64> = (0..starts.max(1) as u64).map(|i| opts.seed.wrapping_add(i)).collect();
    let runs = par::map(opts.execution, seeds, |s| descend(&ap, &random_function(domain, s), opts, Restriction::None));
    let runs: Vec<_> = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let done: Vec<_> = runs.iter().filter(|r| r.converged).collect();
    let mut worst: f64 = 0.0;
    for (i, a) in done.iter().enumerate() {
        for b in &done[i + 1..] {
            worst = worst.max(ray_distance(&a.point.u, &b.point.u, &ap)?);
        }
    }
    let lams: Vec<f64> = done.iter().map(|r| r.point.lambda).collect();
    let lo = lams.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lams.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = if done.is_empty() { f64::NAN } else { (hi - lo) / lo };
    Ok(PropertyReport {
        name: "simplicity".into(),
        passed: !done.is_empty() && worst < SIMPLICITY_TOL,
        samples: done.len(),
        worst_error: worst,
        context: format!(
            "{} of {} starts converged; distance threshold {SIMPLICITY_TOL:e}; relative level spread {spread:e}",
            done.len(),
            runs.len()
        ),
    })
}

/// Default width of the window above `lambda_1` in which critical points of
/// superhomogeneous problems must be sign-constant.
pub const SIGN_WINDOW: f64 = 0.02;

pub fn changes_sign(u: &GridFunction) -> bool {
    let delta = 1e-8 * u.max_abs();
    u.min() < -delta && u.max() > delta
}

/// Sign structure predicted by the level of a critical point.
pub fn sign_structure_check(
    point: &CriticalPoint,
    regime: Regime,
    lambda1: Option<f64>,
    window: f64,
) -> Result<PropertyReport> {
    let l1 = lambda1.ok_or_else(|| Error::MissingReference("lambda_1 for the same alpha and grid".into()))?;
    let lam = point.lambda;
    let changes = changes_sign(&point.u);
    let (expect, why): (Option<bool>, &str) = if lam <= l1 * (1.0 + 1e-3) {
        (Some(false), "ground-state level: sign-constant")
    } else if regime.is_subhomogeneous_family() {
        (Some(true), "above the ground-state level with q < r <= p: sign-changing")
    } else if regime.is_superhomogeneous_family() && lam < l1 * (1.0 + window) {
        (Some(false), "inside the window above the ground-state level with p <= q < r: sign-constant")
    } else {
        (None, "no sign prediction at this level")
    };
    let passed = expect.is_none_or(|e| e == changes);
    Ok(PropertyReport {
        name: "sign-structure".into(),
        passed,
        samples: 1,
        worst_error: if passed { 0.0 } else { 1.0 },
        context: format!(
            "{why}; level {lam} vs lambda1 {l1} (ratio {}), window {window}, sign-changing = {changes}",
            lam / l1
        ),
    })
}
