//! The normalization functional `I_alpha`, the quotient `R_alpha`, its
//! gradient, Euler-Lagrange residuals, and energies of the translated
//! equations `-Delta_p u = mu1 |u|^{e1-2} u + mu2 |u|^{e2-2} u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dirichlet_energy, lp_integral, p_laplacian_apply, signed_power, GridFunction};
use crate::params::ExponentTriple;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    pub triple: ExponentTriple,
    pub alpha: f64,
}

impl AlphaParams {
    pub fn new(triple: ExponentTriple, alpha: f64) -> AlphaParams {
        AlphaParams { triple, alpha }
    }

    pub fn with_alpha(&self, alpha: f64) -> AlphaParams {
        AlphaParams { triple: self.triple, alpha }
    }
}

/// Coefficients and exponents of a translated equation. The same type covers
/// the `mu` family (`e1 = q`, `e2 = r`, `mu2 = sgn(1 - alpha)`) and the
/// `r = p` family (`e1 = p`, `mu1 = nu`, `e2 = q`, `mu2 = sgn(alpha)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslatedProblem {
    pub mu1: f64,
    pub e1: f64,
    pub mu2: f64,
    pub e2: f64,
    pub p: f64,
}

impl TranslatedProblem {
    pub fn new(mu1: f64, e1: f64, mu2: f64, e2: f64, p: f64) -> Result<TranslatedProblem> {
        if e1 == e2 || e1 < 1.0 || e2 < 1.0 || p <= 1.0 {
            return Err(Error::InvalidExponents(format!(
                "translated problem needs distinct exponents >= 1 and p > 1 (e1 = {e1}, e2 = {e2}, p = {p})"
            )));
        }
        Ok(TranslatedProblem { mu1, e1, mu2, e2, p })
    }

    /// `-Delta_p u = mu |u|^{q-2} u + sgn(1 - alpha) |u|^{r-2} u`.
    pub fn with_mu(triple: &ExponentTriple, mu: f64, alpha: f64) -> Result<TranslatedProblem> {
        TranslatedProblem::new(mu, triple.q, sgn(1.0 - alpha), triple.r, triple.p)
    }

    /// `-Delta_p u = nu |u|^{p-2} u + sgn(alpha) |u|^{q-2} u` (the `r = p` case).
    pub fn with_nu(triple: &ExponentTriple, nu: f64, alpha: f64) -> Result<TranslatedProblem> {
        TranslatedProblem::new(nu, triple.p, sgn(alpha), triple.q, triple.p)
    }
}

/// Sign with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `J = ||grad u||_p^p`, `lq = ||u||_q^q`, `lr = ||u||_r^r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub energy: f64,
    pub lq: f64,
    pub lr: f64,
}

impl Moments {
    pub fn of(u: &GridFunction, t: &ExponentTriple) -> Moments {
        Moments {
            energy: dirichlet_energy(u, t.p),
            lq: lp_integral(u, t.q),
            lr: lp_integral(u, t.r),
        }
    }

    /// `I_alpha`, evaluated in log space so that large `|alpha|` stays finite.
    pub fn i_alpha(&self, ap: &AlphaParams) -> f64 {
        let t = &ap.triple;
        let a = ap.alpha;
        (a * t.p / t.q * self.lq.ln() + (1.0 - a) * t.p / t.r * self.lr.ln()).exp()
    }

    pub fn r_alpha(&self, ap: &AlphaParams) -> f64 {
        self.energy / self.i_alpha(ap)
    }
}

fn nonzero(u: &GridFunction) -> Result<()> {
    if u.is_zero() {
        Err(Error::ZeroFunction)
    } else {
        Ok(())
    }
}

pub fn i_alpha(u: &GridFunction, ap: &AlphaParams) -> Result<f64> {
    nonzero(u)?;
    Ok(Moments::of(u, &ap.triple).i_alpha(ap))
}

pub fn r_alpha(u: &GridFunction, ap: &AlphaParams) -> Result<f64> {
    nonzero(u)?;
    Ok(Moments::of(u, &ap.triple).r_alpha(ap))
}

/// `lhs - mu1 |u|^{e1-2} u - mu2 |u|^{e2-2} u`, pointwise.
fn subtract_powers(lhs: GridFunction, u: &GridFunction, c1: f64, e1: f64, c2: f64, e2: f64) -> GridFunction {
    let values = lhs
        .values()
        .iter()
        .zip(u.values())
        .map(|(&l, &v)| l - c1 * signed_power(v, e1) - c2 * signed_power(v, e2))
        .collect();
    GridFunction::from_vec_unchecked(*u.domain(), values)
}

/// Everything the descent loop needs from one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub moments: Moments,
    pub value: f64,
    pub i_alpha: f64,
    /// Strong-form residual of the nonlocal Euler-Lagrange equation.
    pub residual_field: GridFunction,
}

impl Evaluation {
    /// Mass-weighted gradient `(p / I_alpha) * residual_field`.
    pub fn gradient(&self, p: f64) -> GridFunction {
        self.residual_field.scaled(p / self.i_alpha)
    }

    pub fn residual(&self) -> f64 {
        self.residual_field.norm()
    }
}

pub fn evaluate(u: &GridFunction, ap: &AlphaParams, eps_reg: f64) -> Result<Evaluation> {
    nonzero(u)?;
    let t = &ap.triple;
    let m = Moments::of(u, t);
    let lap = p_laplacian_apply(u, t.p, eps_reg);
    let c_q = ap.alpha * m.energy / m.lq;
    let c_r = (1.0 - ap.alpha) * m.energy / m.lr;
    let field = subtract_powers(lap, u, c_q, t.q, c_r, t.r);
    let i = m.i_alpha(ap);
    Ok(Evaluation { moments: m, value: m.energy / i, i_alpha: i, residual_field: field })
}

/// Mass-weighted Frechet gradient of `R_alpha`.
pub fn r_alpha_gradient(u: &GridFunction, ap: &AlphaParams, eps_reg: f64) -> Result<GridFunction> {
    Ok(evaluate(u, ap, eps_reg)?.gradient(ap.triple.p))
}

/// Mass-weighted L2 norm of the nonlocal equation's residual.
pub fn el_residual_nonlocal(u: &GridFunction, ap: &AlphaParams, eps_reg: f64) -> Result<f64> {
    Ok(evaluate(u, ap, eps_reg)?.residual())
}

pub fn el_residual_translated(u: &GridFunction, tp: &TranslatedProblem, eps_reg: f64) -> Result<f64> {
    nonzero(u)?;
    let lap = p_laplacian_apply(u, tp.p, eps_reg);
    Ok(subtract_powers(lap, u, tp.mu1, tp.e1, tp.mu2, tp.e2).norm())
}

/// Norm of the translated equation's left side `-Delta_p u`, the natural
/// scale for its residual.
pub fn translated_scale(u: &GridFunction, p: f64, eps_reg: f64) -> f64 {
    p_laplacian_apply(u, p, eps_reg).norm()
}

pub fn energy_translated(u: &GridFunction, tp: &TranslatedProblem) -> f64 {
    let j = dirichlet_energy(u, tp.p);
    j / tp.p - tp.mu1 / tp.e1 * lp_integral(u, tp.e1) - tp.mu2 / tp.e2 * lp_integral(u, tp.e2)
}

/// First and second derivatives at `t = 1` of the fiber map `t -> E(t u)`.
pub fn fiber_derivatives(u: &GridFunction, tp: &TranslatedProblem) -> Result<(f64, f64)> {
    nonzero(u)?;
    let j = dirichlet_energy(u, tp.p);
    let a = lp_integral(u, tp.e1);
    let b = lp_integral(u, tp.e2);
    let d1 = j - tp.mu1 * a - tp.mu2 * b;
    let d2 = (tp.p - 1.0) * j - tp.mu1 * (tp.e1 - 1.0) * a - tp.mu2 * (tp.e2 - 1.0) * b;
    Ok((d1, d2))
}

#[cfg(test)]
mod tests {
    use super::*;
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
    fn i_alpha_collapses() {
        let u = sine(100);
        let a = ap(2.0, 1.0, 3.0, 0.0);
        assert_relative_eq!(i_alpha(&u, &a).unwrap(), crate::grid::lp_norm(&u, 3.0).powi(2), max_relative = 1e-13);
        let a = ap(2.0, 1.0, 3.0, 1.0);
        assert_relative_eq!(i_alpha(&u, &a).unwrap(), crate::grid::lp_norm(&u, 1.0).powi(2), max_relative = 1e-13);
    }

    #[test]
    fn i_alpha_sine_closed_form() {
        let u = sine(800);
        let got = i_alpha(&u, &ap(2.0, 1.0, 3.0, 0.5)).unwrap();
        let expect = (2.0 / PI) * (4.0 / (3.0 * PI)).powf(1.0 / 3.0);
        assert!((got - expect).abs() < 1e-5, "{got} vs {expect}");
    }

    #[test]
    fn zero_function_rejected() {
        let z = GridFunction::zeros(Domain::interval(0.0, 1.0, 10).unwrap());
        let a = ap(2.0, 1.0, 3.0, 0.5);
        assert_eq!(i_alpha(&z, &a), Err(Error::ZeroFunction));
        assert_eq!(r_alpha(&z, &a), Err(Error::ZeroFunction));
        assert!(r_alpha_gradient(&z, &a, 0.0).is_err());
        assert_eq!(energy_translated(&z, &TranslatedProblem::with_mu(&a.triple, 1.0, 0.5).unwrap()), 0.0);
    }

    #[test]
    fn rayleigh_quotient_examples() {
        let u = sine(800);
        let r = r_alpha(&u, &ap(2.0, 2.0, 3.0, 1.0)).unwrap();
        assert!((r - PI * PI).abs() < 1e-4 * PI * PI);
        let r = r_alpha(&u, &ap(2.0, 1.0, 2.0, 1.0)).unwrap();
        assert!((r - PI.powi(4) / 8.0).abs() < 1e-4 * r);
        let a = ap(2.0, 1.0, 3.0, 0.3);
        let base = r_alpha(&u, &a).unwrap();
        for c in [2.0, -3.0, 0.5] {
            assert_relative_eq!(r_alpha(&u.scaled(c), &a).unwrap(), base, max_relative = 1e-12);
        }
    }

    #[test]
    fn sine_is_critical_for_linear_eigenproblem() {
        let a = ap(2.0, 2.0, 3.0, 1.0);
        let coarse = el_residual_nonlocal(&sine(50), &a, 0.0).unwrap();
        let fine = el_residual_nonlocal(&sine(400), &a, 0.0).unwrap();
        // sampled sine is an exact eigenvector of the 3-point stencil
        assert!(coarse < 1e-9 && fine < 1e-8, "{coarse} {fine}");
    }

    #[test]
    fn euler_identity_and_fd() {
        let d = Domain::interval(0.0, 1.0, 60).unwrap();
        for (i, p) in [1.5, 2.0, 3.0].into_iter().enumerate() {
            let a = ap(p, 1.2, 2.5, 0.4);
            for s in 0..10u64 {
                let u = random_function(&d, 100 + s + 20 * i as u64);
                let v = random_function(&d, 500 + s);
                let g = r_alpha_gradient(&u, &a, 1e-8).unwrap();
                assert!(g.dot(&u).abs() <= 1e-10 * g.norm() * u.norm());
                let h = 1e-6;
                let fd = (r_alpha(&u.axpy(h, &v), &a).unwrap() - r_alpha(&u.axpy(-h, &v), &a).unwrap()) / (2.0 * h);
                let an = g.dot(&v);
                assert!((fd - an).abs() <= 1e-5 * g.norm() * v.norm(), "p={p}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn translated_residual_of_sine() {
        let u = sine(800);
        let tp = TranslatedProblem::new(0.0, 1.0, 0.0, 3.0, 2.0).unwrap();
        let res = el_residual_translated(&u, &tp, 0.0).unwrap();
        assert!((res - PI * PI / 2f64.sqrt()).abs() < 1e-3, "{res}");
        let plateau = GridFunction::from_fn(*u.domain(), |_, _| 0.1);
        let tp = TranslatedProblem::new(1.0, 1.0, 1.0, 3.0, 2.0).unwrap();
        assert!(el_residual_translated(&plateau, &tp, 0.0).unwrap() > 0.0);
    }

    #[test]
    fn energy_term_collapse() {
        let u = sine(100);
        let tp = TranslatedProblem::new(0.0, 1.0, 0.0, 3.0, 2.0).unwrap();
        assert_relative_eq!(energy_translated(&u, &tp), dirichlet_energy(&u, 2.0) / 2.0, max_relative = 1e-14);
    }

    #[test]
    fn translated_problem_guards() {
        assert!(TranslatedProblem::new(1.0, 2.0, 1.0, 2.0, 2.0).is_err());
        assert!(TranslatedProblem::new(1.0, 0.5, 1.0, 2.0, 2.0).is_err());
        let t = validate(2.0, 1.0, 3.0, 1).unwrap();
        assert_eq!(TranslatedProblem::with_mu(&t, 1.0, 1.5).unwrap().mu2, -1.0);
        assert_eq!(TranslatedProblem::with_nu(&validate(2.0, 1.0, 2.0, 1).unwrap(), 1.0, -0.5).unwrap().mu2, -1.0);
    }
}
