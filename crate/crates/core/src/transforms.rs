//! Normalizations of critical points and the maps between critical points of
//! `R_alpha` and solutions of the translated equations.
//!
//! * `M_alpha`: `I_alpha(u) = 1`.
//! * `C_alpha`: `|1 - alpha| J(u) / ||u||_r^r = 1` (needs `alpha != 1`, `r != p`).
//! * `C'_alpha`: `|alpha| J(u) / ||u||_q^q = 1` (needs `alpha != 0`, `q != p`).
//!
//! On `C_alpha` a critical point solves `-Delta_p u = mu |u|^{q-2} u +
//! sgn(1 - alpha) |u|^{r-2} u` with `mu = alpha J / ||u||_q^q`; on `C'_alpha`
//! with `r = p` it solves `-Delta_p u = nu |u|^{p-2} u + sgn(alpha) |u|^{q-2} u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{
    el_residual_translated, energy_translated, fiber_derivatives, sgn, translated_scale, AlphaParams, Moments,
    TranslatedProblem,
};
use crate::grid::{lp_norm, GridFunction};
use crate::params::ExponentTriple;

/// Tolerance for checking that a function lies on a normalization manifold.
pub const NORMALIZATION_TOL: f64 = 1e-10;
/// Distance below which two normalized critical points are the same.
pub const DISTINCT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    OnM,
    OnC,
    OnCPrime,
    Unnormalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub u: GridFunction,
    pub ap: AlphaParams,
    pub lambda: f64,
    pub residual: f64,
    pub normalization: Normalization,
}

impl CriticalPoint {
    /// The same ray re-normalized onto `M_alpha`.
    pub fn on_m(&self) -> Result<CriticalPoint> {
        let u = project_m(&self.u, &self.ap)?;
        let ratio = Moments::of(&self.u, &self.ap.triple).i_alpha(&self.ap) / Moments::of(&u, &self.ap.triple).i_alpha(&self.ap);
        // the nonlocal residual is (p-1)-homogeneous
        let scale = ratio.powf(-(self.ap.triple.p - 1.0) / self.ap.triple.p);
        Ok(CriticalPoint { u, normalization: Normalization::OnM, residual: self.residual * scale, ..self.clone() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslationKind {
    Mu,
    Nu,
}

impl TranslationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TranslationKind::Mu => "mu",
            TranslationKind::Nu => "nu",
        }
    }
}

/// A critical point expressed through its translated equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub alpha: f64,
    pub lambda: f64,
    pub value: f64,
    pub kind: TranslationKind,
    /// Sign of the second nonlinear term (`sgn(1 - alpha)` or `sgn(alpha)`).
    pub sign: f64,
    pub norm_q: f64,
    pub norm_r: f64,
    pub grad_p: f64,
    pub energy: f64,
    pub fiber2: f64,
}

pub fn project_m(u: &GridFunction, ap: &AlphaParams) -> Result<GridFunction> {
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let i = Moments::of(u, &ap.triple).i_alpha(ap);
    Ok(u.scaled(i.powf(-1.0 / ap.triple.p)))
}

fn c_scale(m: &Moments, ap: &AlphaParams) -> f64 {
    let t = &ap.triple;
    ((1.0 - ap.alpha).abs() * m.energy / m.lr).powf(1.0 / (t.r - t.p))
}

/// `t_alpha(u) > 0` with `t_alpha(u) u` on `C_alpha`.
pub fn t_alpha_scale(u: &GridFunction, ap: &AlphaParams) -> Result<(f64, GridFunction)> {
    let t = &ap.triple;
    if ap.alpha == 1.0 {
        return Err(Error::InvalidAlpha("C_alpha is undefined at alpha = 1".into()));
    }
    if t.r == t.p {
        return Err(Error::InvalidExponents("C_alpha is undefined when r = p".into()));
    }
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let s = c_scale(&Moments::of(u, t), ap);
    Ok((s, u.scaled(s)))
}

/// `s_alpha(u) > 0` with `s_alpha(u) u` on `C'_alpha`.
pub fn s_alpha_scale(u: &GridFunction, ap: &AlphaParams) -> Result<(f64, GridFunction)> {
    let t = &ap.triple;
    if ap.alpha == 0.0 {
        return Err(Error::InvalidAlpha("C'_alpha is undefined at alpha = 0".into()));
    }
    if t.q == t.p {
        return Err(Error::InvalidExponents("C'_alpha is undefined when q = p".into()));
    }
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let m = Moments::of(u, t);
    let s = (ap.alpha.abs() * m.energy / m.lq).powf(-1.0 / (t.p - t.q));
    Ok((s, u.scaled(s)))
}

/// Deviation from the `C_alpha` constraint, `| |1-alpha| J/||u||_r^r - 1 |`.
pub fn c_defect(u: &GridFunction, ap: &AlphaParams) -> f64 {
    let m = Moments::of(u, &ap.triple);
    ((1.0 - ap.alpha).abs() * m.energy / m.lr - 1.0).abs()
}

/// Deviation from the `C'_alpha` constraint.
pub fn c_prime_defect(u: &GridFunction, ap: &AlphaParams) -> f64 {
    let m = Moments::of(u, &ap.triple);
    (ap.alpha.abs() * m.energy / m.lq - 1.0).abs()
}

pub fn m_defect(u: &GridFunction, ap: &AlphaParams) -> f64 {
    (Moments::of(u, &ap.triple).i_alpha(ap) - 1.0).abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MuForm {
    /// 0-homogeneous form through `R_{alpha*}`; valid for any normalization
    /// and at `alpha = 1`.
    Homogeneous,
    /// `alpha J / ||u||_q^q` for `u` on `C_alpha`.
    OnC,
    /// Form in terms of `lambda = J(u)` and `||u||_q` for `u` on `M_alpha`.
    OnM,
}

const FORM_TOL: f64 = 1e-8;

/// Translation level `mu_alpha(u)`.
pub fn mu_translation(u: &GridFunction, ap: &AlphaParams, form: MuForm) -> Result<f64> {
    let t = &ap.triple;
    if t.r == t.p {
        return Err(Error::InvalidExponents("mu is undefined when r = p; use nu".into()));
    }
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let a = ap.alpha;
    let (p, q, r) = (t.p, t.q, t.r);
    let m = Moments::of(u, t);
    match form {
        MuForm::Homogeneous => {
            if a == 0.0 {
                return Ok(0.0);
            }
            if a == 1.0 {
                // |1 - alpha|^{(p-q)/(r-p)} at alpha = 1
                if q < p {
                    return Ok(0.0);
                }
                if q > p {
                    return Err(Error::InvalidAlpha("mu diverges at alpha = 1 when q > p".into()));
                }
            }
            let star = AlphaParams::new(*t, t.alpha_star());
            let rs = m.r_alpha(&star);
            let weight = if q == p { 0.0 } else { ((p - q) / (r - p)) * (1.0 - a).abs().ln() };
            let log = weight + ((r - q) / (r - p)) * rs.ln();
            Ok(a * log.exp())
        }
        MuForm::OnC => {
            if a == 1.0 {
                return Err(Error::InvalidAlpha("C_alpha is undefined at alpha = 1".into()));
            }
            let defect = ((1.0 - a).abs() * m.energy / m.lr - 1.0).abs();
            if defect > FORM_TOL {
                return Err(Error::ConstraintViolated(format!("C_alpha defect {defect:e}")));
            }
            Ok(a * m.energy / m.lq)
        }
        MuForm::OnM => {
            if a == 1.0 {
                return Err(Error::InvalidAlpha("the M_alpha form is undefined at alpha = 1".into()));
            }
            let defect = (m.i_alpha(ap) - 1.0).abs();
            if defect > FORM_TOL {
                return Err(Error::ConstraintViolated(format!("M_alpha defect {defect:e}")));
            }
            if a == 0.0 {
                return Ok(0.0);
            }
            let lambda = m.energy;
            let norm_q = m.lq.powf(1.0 / q);
            let expo = -q - a * r * (p - q) / ((a - 1.0) * (r - p));
            let log = ((p - q) / (r - p)) * (1.0 - a).abs().ln()
                + ((r - q) / (r - p)) * lambda.ln()
                + expo * norm_q.ln();
            Ok(a * log.exp())
        }
    }
}

/// `nu_alpha(u) = (1 - alpha) R_0(u)` for `r = p`.
pub fn nu_translation(u: &GridFunction, ap: &AlphaParams) -> Result<f64> {
    let t = &ap.triple;
    if t.r != t.p {
        return Err(Error::InvalidExponents("nu is defined only when r = p".into()));
    }
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let m = Moments::of(u, t);
    Ok((1.0 - ap.alpha) * m.energy / m.lr)
}

/// Recovers `alpha = mu1 ||u||_q^q / J(u)` from a solution of the translated
/// equation with `e1 = q`, `e2 = r`, `mu2 = +-1`.
///
/// `tolerance` bounds the translated residual relative to `max(1, ||-Delta_p u||)`.
pub fn alpha_from_solution(u: &GridFunction, tp: &TranslatedProblem, tolerance: f64, eps_reg: f64) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    if tp.mu2.abs() != 1.0 && tp.mu2 != 0.0 {
        return Err(Error::ContractViolated(format!("second coefficient must be +-1, got {}", tp.mu2)));
    }
    let residual = el_residual_translated(u, tp, eps_reg)?;
    let scale = translated_scale(u, tp.p, eps_reg).max(1.0);
    if residual > tolerance * scale {
        return Err(Error::ResidualTooLarge { residual, tolerance: tolerance * scale });
    }
    let j = crate::grid::dirichlet_energy(u, tp.p);
    let lq = crate::grid::lp_integral(u, tp.e1);
    let alpha = tp.mu1 * lq / j;
    const SLACK: f64 = 1e-6;
    if tp.mu2 > 0.0 && alpha >= 1.0 + SLACK {
        return Err(Error::ContractViolated(format!("mu2 = +1 requires alpha < 1, got {alpha}")));
    }
    if tp.mu2 < 0.0 && alpha <= 1.0 - SLACK {
        return Err(Error::ContractViolated(format!("mu2 = -1 requires alpha > 1, got {alpha}")));
    }
    Ok(alpha)
}

/// Two-solution threshold for the convex-concave equation, from the ground
/// state level at `alpha*`.
pub fn lambda_star(triple: &ExponentTriple, lambda1_at_alpha_star: f64) -> Result<f64> {
    let ExponentTriple { p, q, r, .. } = *triple;
    if !(q < p && p < r) {
        return Err(Error::InvalidExponents("requires q < p < r".into()));
    }
    if !(lambda1_at_alpha_star > 0.0) {
        return Err(Error::Domain("ground state level must be positive".into()));
    }
    let e = (r - q) / (r - p);
    Ok((r - p) / (p - q) * ((p - q) / (r - q)).powf(e) * lambda1_at_alpha_star.powf(e))
}

/// Multiplier relating `Lambda*` to the zero-energy translation level.
pub fn zero_energy_mu(triple: &ExponentTriple, lambda_star_value: f64) -> f64 {
    let ExponentTriple { p, q, r, .. } = *triple;
    q / r * (r / p).powf((r - q) / (r - p)) * lambda_star_value
}

/// Mass-weighted L2 distance between the `M_alpha` representatives of two
/// rays after sign alignment.
pub fn ray_distance(a: &GridFunction, b: &GridFunction, ap: &AlphaParams) -> Result<f64> {
    let ua = project_m(a, ap)?;
    let ub = project_m(b, ap)?;
    let plus = ua.axpy(-1.0, &ub).norm();
    let minus = ua.axpy(1.0, &ub).norm();
    Ok(plus.min(minus))
}

pub fn are_distinct(a: &GridFunction, b: &GridFunction, ap: &AlphaParams) -> Result<bool> {
    Ok(ray_distance(a, b, ap)? > DISTINCT_TOL)
}

/// Builds the translated-equation record for a critical point. The `mu`
/// family is used when `r != p`, the `nu` family otherwise. Energy and fiber
/// data are `NaN` when the normalization is undefined (`alpha = 1` for `mu`,
/// `alpha = 0` for `nu`); norms are then those of the `M_alpha` representative.
pub fn translation_record(point: &CriticalPoint) -> Result<TranslationRecord> {
    let ap = &point.ap;
    let t = &ap.triple;
    let a = ap.alpha;
    let (kind, value, sign, normalized, tp) = if t.r != t.p {
        let value = mu_translation(&point.u, ap, MuForm::Homogeneous)?;
        if a != 1.0 {
            let (_, v) = t_alpha_scale(&point.u, ap)?;
            let tp = TranslatedProblem::with_mu(t, value, a)?;
            (TranslationKind::Mu, value, sgn(1.0 - a), v, Some(tp))
        } else {
            (TranslationKind::Mu, value, 0.0, project_m(&point.u, ap)?, None)
        }
    } else {
        let value = nu_translation(&point.u, ap)?;
        if a != 0.0 {
            let (_, v) = s_alpha_scale(&point.u, ap)?;
            let tp = TranslatedProblem::with_nu(t, value, a)?;
            (TranslationKind::Nu, value, sgn(a), v, Some(tp))
        } else {
            (TranslationKind::Nu, value, 0.0, project_m(&point.u, ap)?, None)
        }
    };
    let (energy, fiber2) = match tp {
        Some(tp) => (energy_translated(&normalized, &tp), fiber_derivatives(&normalized, &tp)?.1),
        None => (f64::NAN, f64::NAN),
    };
    Ok(TranslationRecord {
        alpha: a,
        lambda: point.lambda,
        value,
        kind,
        sign,
        norm_q: lp_norm(&normalized, t.q),
        norm_r: lp_norm(&normalized, t.r),
        grad_p: crate::grid::dirichlet_energy(&normalized, t.p).powf(1.0 / t.p),
        energy,
        fiber2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::i_alpha;
    use crate::grid::{random_function, Domain};
    use crate::params::validate;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn sine(cells: usize) -> GridFunction {
        GridFunction::from_fn(Domain::interval(0.0, 1.0, cells).unwrap(), |x, _| (PI * x).sin())
    }

    fn ap(p: f64, q: f64, r: f64, alpha: f64) -> AlphaParams {
        AlphaParams::new(validate(p, q, r, 1).unwrap(), alpha)
    }

    #[test]
    fn project_m_examples() {
        let a = ap(2.0, 1.0, 3.0, 0.5);
        let u = sine(800);
        let pm = project_m(&u, &a).unwrap();
        assert!((i_alpha(&pm, &a).unwrap() - 1.0).abs() < 1e-12);
        let again = project_m(&pm, &a).unwrap();
        for (x, y) in pm.values().iter().zip(again.values()) {
            assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0));
        }
        let neg = project_m(&u.scaled(-3.0), &a).unwrap();
        for (x, y) in pm.values().iter().zip(neg.values()) {
            assert!((x + y).abs() <= 1e-13);
        }
        let divisor = i_alpha(&u, &a).unwrap().sqrt();
        assert!((divisor - 0.6915).abs() < 1e-3, "{divisor}");
        assert_eq!(project_m(&GridFunction::zeros(*u.domain()), &a), Err(Error::ZeroFunction));
    }

    #[test]
    fn t_scale_examples() {
        let a = ap(2.0, 1.0, 3.0, 0.0);
        let (t, v) = t_alpha_scale(&sine(800), &a).unwrap();
        assert!((t - 3.0 * PI.powi(3) / 8.0).abs() < 1e-3 * t, "{t}");
        assert!(c_defect(&v, &a) < 1e-10);
        let (t1, _) = t_alpha_scale(&v, &a).unwrap();
        assert_relative_eq!(t1, 1.0, max_relative = 1e-12);
        let (_, w) = t_alpha_scale(&sine(800).scaled(7.0), &a).unwrap();
        for (x, y) in v.values().iter().zip(w.values()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        assert!(matches!(t_alpha_scale(&v, &ap(2.0, 1.0, 3.0, 1.0)), Err(Error::InvalidAlpha(_))));
        assert!(matches!(t_alpha_scale(&v, &ap(2.0, 1.0, 2.0, 0.5)), Err(Error::InvalidExponents(_))));
    }

    #[test]
    fn s_scale_examples() {
        let a = ap(2.0, 1.0, 2.0, 1.0);
        let (s, v) = s_alpha_scale(&sine(800), &a).unwrap();
        assert!((s - 4.0 / PI.powi(3)).abs() < 1e-3 * s, "{s}");
        assert!(c_prime_defect(&v, &a) < 1e-10);
        let (s1, _) = s_alpha_scale(&v, &a).unwrap();
        assert_relative_eq!(s1, 1.0, max_relative = 1e-12);
        assert!(matches!(s_alpha_scale(&v, &ap(2.0, 1.0, 2.0, 0.0)), Err(Error::InvalidAlpha(_))));
        assert!(matches!(s_alpha_scale(&v, &ap(2.0, 2.0, 3.0, 0.5)), Err(Error::InvalidExponents(_))));
    }

    #[test]
    fn mu_examples() {
        let u = sine(800);
        for form in [MuForm::Homogeneous, MuForm::OnC, MuForm::OnM] {
            let a = ap(2.0, 1.0, 3.0, 0.0);
            let w = match form {
                MuForm::OnC => t_alpha_scale(&u, &a).unwrap().1,
                MuForm::OnM => project_m(&u, &a).unwrap(),
                MuForm::Homogeneous => u.clone(),
            };
            assert_eq!(mu_translation(&w, &a, form).unwrap(), 0.0);
        }
        let a = ap(2.0, 1.0, 3.0, 0.5);
        let (_, v) = t_alpha_scale(&u, &a).unwrap();
        let mu = mu_translation(&v, &a, MuForm::OnC).unwrap();
        let expect = 3.0 * PI.powi(6) / 128.0;
        assert!((mu - expect).abs() < 1e-3 * expect, "{mu} vs {expect}");
        let hom = mu_translation(&v, &a, MuForm::Homogeneous).unwrap();
        assert_relative_eq!(hom, mu, max_relative = 1e-10);
        assert!(matches!(mu_translation(&u.scaled(5.0), &a, MuForm::OnC), Err(Error::ConstraintViolated(_))));
        assert!(matches!(mu_translation(&u, &ap(2.0, 1.0, 2.0, 0.5), MuForm::Homogeneous), Err(Error::InvalidExponents(_))));
        // alpha = 1 only through the homogeneous form
        let one = ap(2.0, 1.0, 3.0, 1.0);
        assert_eq!(mu_translation(&u, &one, MuForm::Homogeneous).unwrap(), 0.0);
        let lam = mu_translation(&u, &ap(2.0, 2.0, 3.0, 1.0), MuForm::Homogeneous).unwrap();
        assert_relative_eq!(lam, crate::functionals::r_alpha(&u, &ap(2.0, 2.0, 3.0, 1.0)).unwrap(), max_relative = 1e-12);
        assert!(mu_translation(&u, &ap(2.0, 2.5, 3.0, 1.0), MuForm::Homogeneous).is_err());
        assert!(mu_translation(&u, &one, MuForm::OnM).is_err());
    }

    #[test]
    fn mu_forms_agree_on_random_functions() {
        let d = Domain::interval(0.0, 1.0, 40).unwrap();
        for (i, alpha) in [-0.8, 0.3, 0.7, 1.6, 3.0].into_iter().enumerate() {
            let a = ap(2.0, 1.0, 3.0, alpha);
            for s in 0..10u64 {
                let u = random_function(&d, 1000 + s + 100 * i as u64);
                let (_, c) = t_alpha_scale(&u, &a).unwrap();
                let m = project_m(&u, &a).unwrap();
                let on_c = mu_translation(&c, &a, MuForm::OnC).unwrap();
                let on_m = mu_translation(&m, &a, MuForm::OnM).unwrap();
                let hom = mu_translation(&u, &a, MuForm::Homogeneous).unwrap();
                assert!((hom - on_c).abs() <= 1e-9 * on_c.abs().max(1.0));
                assert!((hom - on_m).abs() <= 1e-9 * on_m.abs().max(1.0));
            }
        }
    }

    #[test]
    fn nu_examples() {
        let u = sine(800);
        assert_eq!(nu_translation(&u, &ap(2.0, 1.0, 2.0, 1.0)).unwrap(), 0.0);
        let a = ap(2.0, 1.0, 2.0, 0.0);
        let nu = nu_translation(&u, &a).unwrap();
        assert!((nu - PI * PI).abs() < 1e-4 * nu);
        assert_relative_eq!(nu_translation(&u.scaled(-4.0), &a).unwrap(), nu, max_relative = 1e-12);
        assert!(nu_translation(&u, &ap(2.0, 1.0, 3.0, 0.0)).is_err());
    }

    #[test]
    fn lambda_star_coefficient() {
        let t = validate(2.0, 1.0, 3.0, 1).unwrap();
        assert_relative_eq!(lambda_star(&t, 10.0).unwrap(), 25.0, max_relative = 1e-14);
        assert!(lambda_star(&t, 11.0).unwrap() > lambda_star(&t, 10.0).unwrap());
        assert!(lambda_star(&validate(3.0, 1.0, 2.0, 1).unwrap(), 1.0).is_err());
    }

    #[test]
    fn alpha_from_solution_guards() {
        let u = sine(100);
        let tp = TranslatedProblem::new(3.0, 1.0, 1.0, 3.0, 2.0).unwrap();
        assert!(matches!(alpha_from_solution(&u, &tp, 1e-8, 0.0), Err(Error::ResidualTooLarge { .. })));
    }

    #[test]
    fn distinctness_is_ray_based() {
        let a = ap(2.0, 1.0, 3.0, 0.5);
        let u = sine(50);
        assert!(!are_distinct(&u, &u.scaled(-2.5), &a).unwrap());
        let v = random_function(u.domain(), 3);
        assert!(are_distinct(&u, &v, &a).unwrap());
    }
}
