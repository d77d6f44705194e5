//! Exponent configurations `(p, q, r, N)` and the constants derived from them.
//!
//! Every other module takes an [`ExponentTriple`] that has already passed
//! [`validate`], so the standing assumptions `p > 1`, `1 <= q < r < p*`,
//! `N >= 1` can be relied on downstream.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validated problem exponents. Construct with [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentTriple {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub dim: usize,
}

/// Relation between `p`, `q` and `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `q < r < p`
    Subhomogeneous,
    /// `q < r = p`
    BorderlineRP,
    /// `q < p < r`
    ConvexConcave,
    /// `q = p < r`
    BorderlineQP,
    /// `p < q < r`
    Superhomogeneous,
}

impl Regime {
    /// `q < r <= p`: the regimes where the ground state level is simple.
    pub fn is_subhomogeneous_family(self) -> bool {
        matches!(self, Regime::Subhomogeneous | Regime::BorderlineRP)
    }

    /// `p <= q < r`
    pub fn is_superhomogeneous_family(self) -> bool {
        matches!(self, Regime::Superhomogeneous | Regime::BorderlineQP)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeInfo {
    /// Threshold below which the ground state level collapses to zero.
    pub alpha0: f64,
    /// Gagliardo-Nirenberg interpolation parameter in `(0, 1)`.
    pub theta: f64,
    /// Solves `alpha p/q + (1 - alpha) p/r = 1`.
    pub alpha_star: f64,
    /// `(r - p)/(r - q)`; `None` when `r = p`.
    pub alpha_inflect: Option<f64>,
    /// Critical Sobolev exponent, `+inf` when `p >= N`.
    pub p_star: f64,
    pub regime: Regime,
}

/// Critical Sobolev exponent `Np/(N - p)`, or `+inf` when `p >= N`.
pub fn sobolev_exponent(p: f64, dim: usize) -> f64 {
    let n = dim as f64;
    if p < n {
        n * p / (n - p)
    } else {
        f64::INFINITY
    }
}

/// Checks the standing assumptions on the exponents.
pub fn validate(p: f64, q: f64, r: f64, dim: usize) -> Result<ExponentTriple> {
    if !(p.is_finite() && q.is_finite() && r.is_finite()) {
        return Err(Error::Domain("exponents must be finite".into()));
    }
    if p <= 1.0 {
        return Err(Error::Domain(format!("p > 1 required (p = {p})")));
    }
    if q < 1.0 {
        return Err(Error::Domain(format!("q >= 1 required (q = {q})")));
    }
    if q >= r {
        return Err(Error::Domain(format!("q < r required (q = {q}, r = {r})")));
    }
    if dim < 1 {
        return Err(Error::Domain("N >= 1 required".into()));
    }
    let p_star = sobolev_exponent(p, dim);
    if r >= p_star {
        return Err(Error::Domain(format!(
            "r < p* required (r = {r}, p* = {p_star})"
        )));
    }
    Ok(ExponentTriple { p, q, r, dim })
}

impl ExponentTriple {
    pub fn regime(&self) -> Regime {
        let ExponentTriple { p, q, r, .. } = *self;
        if r < p {
            Regime::Subhomogeneous
        } else if r == p {
            Regime::BorderlineRP
        } else if q < p {
            Regime::ConvexConcave
        } else if q == p {
            Regime::BorderlineQP
        } else {
            Regime::Superhomogeneous
        }
    }

    pub fn theta(&self) -> f64 {
        let ExponentTriple { p, q, r, dim } = *self;
        let n = dim as f64;
        (r - q) / (q * r * (1.0 / q + 1.0 / n - 1.0 / p))
    }

    pub fn alpha0(&self) -> f64 {
        let ExponentTriple { p, q, r, dim } = *self;
        let n = dim as f64;
        (q * r * (n - p) - n * q * p) / (n * p * (r - q))
    }

    pub fn alpha_star(&self) -> f64 {
        let ExponentTriple { p, q, r, .. } = *self;
        q * (r - p) / (p * (r - q))
    }

    pub fn alpha_inflect(&self) -> Option<f64> {
        let ExponentTriple { p, q, r, .. } = *self;
        (r != p).then(|| (r - p) / (r - q))
    }

    /// Exponent `alpha p/q + (1 - alpha) p/r` of `|Omega|` in the weighted
    /// monotone quantity.
    pub fn measure_exponent(&self, alpha: f64) -> f64 {
        alpha * self.p / self.q + (1.0 - alpha) * self.p / self.r
    }
}

pub fn derived_constants(t: &ExponentTriple) -> RegimeInfo {
    RegimeInfo {
        alpha0: t.alpha0(),
        theta: t.theta(),
        alpha_star: t.alpha_star(),
        alpha_inflect: t.alpha_inflect(),
        p_star: sobolev_exponent(t.p, t.dim),
        regime: t.regime(),
    }
}

/// Power of `t` by which `R_alpha` scales under `u -> u(./t)` on `t Omega`.
pub fn scaling_exponent(t: &ExponentTriple, alpha: f64) -> f64 {
    let n = t.dim as f64;
    n * t.p * (t.r - t.q) / (t.q * t.r) * (t.alpha0() - alpha)
}
