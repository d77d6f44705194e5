//! Uniform grids on intervals and rectangles with zero Dirichlet trace.
//!
//! Only interior nodal values are stored. Boundary nodes are implicitly zero,
//! so the lumped (trapezoid) mass weight is the same at every stored node and
//! equals the cell measure `h` (1D) or `hx * hy` (2D).
//!
//! The discrete p-Dirichlet energy uses one gradient sample per cell. In 1D
//! that is the forward difference. In 2D the squared gradient magnitude of a
//! cell is the average of the squared differences along its two x-edges plus
//! the average along its two y-edges, which reproduces the 5-point stencil at
//! `p = 2` and has no checkerboard null modes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    Interval { a: f64, b: f64 },
    Rectangle { ax: f64, bx: f64, ay: f64, by: f64 },
}

/// A domain together with the number of cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    pub cells: usize,
}

/// Validated constructor.
pub fn make_domain(kind: DomainKind, cells: usize) -> Result<Domain> {
    if cells < 2 {
        return Err(Error::Domain(format!("at least 2 cells per axis required, got {cells}")));
    }
    let ok = match kind {
        DomainKind::Interval { a, b } => a.is_finite() && b.is_finite() && b > a,
        DomainKind::Rectangle { ax, bx, ay, by } => {
            [ax, bx, ay, by].iter().all(|v| v.is_finite()) && bx > ax && by > ay
        }
    };
    if !ok {
        return Err(Error::Domain(format!("degenerate side in {kind:?}")));
    }
    Ok(Domain { kind, cells })
}

impl Domain {
    pub fn interval(a: f64, b: f64, cells: usize) -> Result<Domain> {
        make_domain(DomainKind::Interval { a, b }, cells)
    }

    pub fn rectangle(ax: f64, bx: f64, ay: f64, by: f64, cells: usize) -> Result<Domain> {
        make_domain(DomainKind::Rectangle { ax, bx, ay, by }, cells)
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval { .. } => 1,
            DomainKind::Rectangle { .. } => 2,
        }
    }

    /// `(x_min, x_max, y_min, y_max)`; the y-range is `(0, 0)` in 1D.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        match self.kind {
            DomainKind::Interval { a, b } => (a, b, 0.0, 0.0),
            DomainKind::Rectangle { ax, bx, ay, by } => (ax, bx, ay, by),
        }
    }

    /// Grid spacing per axis; `hy = 1` in 1D so products stay meaningful.
    pub fn spacing(&self) -> (f64, f64) {
        let (ax, bx, ay, by) = self.bounds();
        let n = self.cells as f64;
        match self.kind {
            DomainKind::Interval { .. } => ((bx - ax) / n, 1.0),
            DomainKind::Rectangle { .. } => ((bx - ax) / n, (by - ay) / n),
        }
    }

    /// Interior node counts `(nx, ny)`, with `ny = 1` in 1D.
    pub fn interior_shape(&self) -> (usize, usize) {
        match self.kind {
            DomainKind::Interval { .. } => (self.cells - 1, 1),
            DomainKind::Rectangle { .. } => (self.cells - 1, self.cells - 1),
        }
    }

    pub fn len(&self) -> usize {
        let (nx, ny) = self.interior_shape();
        nx * ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn measure(&self) -> f64 {
        let (ax, bx, ay, by) = self.bounds();
        match self.kind {
            DomainKind::Interval { .. } => bx - ax,
            DomainKind::Rectangle { .. } => (bx - ax) * (by - ay),
        }
    }

    /// Lumped mass weight of every interior node.
    pub fn weight(&self) -> f64 {
        let (hx, hy) = self.spacing();
        hx * hy
    }

    /// Coordinates of interior node `idx` (row-major, x fastest).
    pub fn node(&self, idx: usize) -> (f64, f64) {
        let (nx, _) = self.interior_shape();
        let (ax, _, ay, _) = self.bounds();
        let (hx, hy) = self.spacing();
        let (i, j) = (idx % nx, idx / nx);
        match self.kind {
            DomainKind::Interval { .. } => (ax + (i + 1) as f64 * hx, 0.0),
            DomainKind::Rectangle { .. } => (ax + (i + 1) as f64 * hx, ay + (j + 1) as f64 * hy),
        }
    }

    /// Congruent copy under `x -> t x`.
    pub fn scaled(&self, t: f64) -> Domain {
        let kind = match self.kind {
            DomainKind::Interval { a, b } => DomainKind::Interval { a: t * a, b: t * b },
            DomainKind::Rectangle { ax, bx, ay, by } => DomainKind::Rectangle {
                ax: t * ax,
                bx: t * bx,
                ay: t * ay,
                by: t * by,
            },
        };
        Domain { kind, cells: self.cells }
    }

    /// Set containment of the closures (same dimension only).
    pub fn contains(&self, inner: &Domain) -> bool {
        let (ax, bx, ay, by) = self.bounds();
        let (cx, dx, cy, dy) = inner.bounds();
        self.dim() == inner.dim() && ax <= cx && dx <= bx && ay <= cy && dy <= by
    }

    /// Index of the node mirrored across the vertical midline.
    pub fn reflect_x(&self, idx: usize) -> usize {
        let (nx, _) = self.interior_shape();
        let (i, j) = (idx % nx, idx / nx);
        j * nx + (nx - 1 - i)
    }
}

/// Nodal values on the interior of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    domain: Domain,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(domain: Domain, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != domain.len() {
            return Err(Error::Domain(format!(
                "expected {} interior values, got {}",
                domain.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite nodal value".into()));
        }
        Ok(GridFunction { domain, values })
    }

    pub fn zeros(domain: Domain) -> GridFunction {
        GridFunction { domain, values: vec![0.0; domain.len()] }
    }

    pub fn from_fn(domain: Domain, f: impl Fn(f64, f64) -> f64) -> GridFunction {
        let values = (0..domain.len())
            .map(|i| {
                let (x, y) = domain.node(i);
                f(x, y)
            })
            .collect();
        GridFunction { domain, values }
    }

    pub(crate) fn from_vec_unchecked(domain: Domain, values: Vec<f64>) -> GridFunction {
        debug_assert_eq!(values.len(), domain.len());
        GridFunction { domain, values }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            domain: self.domain,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn abs(&self) -> GridFunction {
        self.map(f64::abs)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &GridFunction) -> GridFunction {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + c * b)
            .collect();
        GridFunction { domain: self.domain, values }
    }

    /// Mass-weighted inner product.
    pub fn dot(&self, other: &GridFunction) -> f64 {
        self.domain.weight() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Mass-weighted L2 norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise product.
    pub fn product(&self, other: &GridFunction) -> GridFunction {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        GridFunction { domain: self.domain, values }
    }

    /// `u(x) -> -u(reflected x)` across the vertical midline.
    pub fn odd_reflection(&self) -> GridFunction {
        let values = (0..self.values.len())
            .map(|i| -self.values[self.domain.reflect_x(i)])
            .collect();
        GridFunction { domain: self.domain, values }
    }

    /// Projection onto functions odd under [`Self::odd_reflection`].
    pub fn odd_part(&self) -> GridFunction {
        self.axpy(1.0, &self.odd_reflection()).scaled(0.5)
    }

    /// CSV with a one-line header describing the grid, then `x,value` (1D) or
    /// `x,y,value` (2D) rows at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.domain.kind {
            DomainKind::Interval { a, b } => {
                out.push_str(&format!("interval,{},{},{}\n", fmt17(a), fmt17(b), self.domain.cells));
            }
            DomainKind::Rectangle { ax, bx, ay, by } => {
                out.push_str(&format!(
                    "rectangle,{},{},{},{},{}\n",
                    fmt17(ax),
                    fmt17(bx),
                    fmt17(ay),
                    fmt17(by),
                    self.domain.cells
                ));
            }
        }
        for (i, v) in self.values.iter().enumerate() {
            let (x, y) = self.domain.node(i);
            match self.domain.kind {
                DomainKind::Interval { .. } => out.push_str(&format!("{},{}\n", fmt17(x), fmt17(*v))),
                DomainKind::Rectangle { .. } => {
                    out.push_str(&format!("{},{},{}\n", fmt17(x), fmt17(y), fmt17(*v)))
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<GridFunction> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Domain("empty grid CSV".into()))?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Domain(format!("bad number {s:?} in grid header")))
        };
        let cells = |s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::Domain(format!("bad cell count {s:?}")))
        };
        let domain = match fields.as_slice() {
            ["interval", a, b, n] => Domain::interval(num(a)?, num(b)?, cells(n)?)?,
            ["rectangle", ax, bx, ay, by, n] => {
                Domain::rectangle(num(ax)?, num(bx)?, num(ay)?, num(by)?, cells(n)?)?
            }
            _ => return Err(Error::Domain(format!("unrecognized grid header {header:?}"))),
        };
        let values = lines
            .map(|l| {
                let last = l.rsplit(',').next().unwrap_or("").trim();
                last.parse::<f64>()
                    .map_err(|_| Error::Domain(format!("bad value row {l:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        GridFunction::new(domain, values)
    }
}

/// Formats with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// `sum_i w |u_i|^sigma`, i.e. `||u||_sigma^sigma`.
pub fn lp_integral(u: &GridFunction, sigma: f64) -> f64 {
    let w = u.domain.weight();
    let s: f64 = if sigma == 1.0 {
        u.values.iter().map(|v| v.abs()).sum()
    } else if sigma == 2.0 {
        u.values.iter().map(|v| v * v).sum()
    } else {
        u.values.iter().map(|v| v.abs().powf(sigma)).sum()
    };
    w * s
}

pub fn lp_norm(u: &GridFunction, sigma: f64) -> f64 {
    lp_integral(u, sigma).powf(1.0 / sigma)
}

/// `|v|^{sigma - 2} v`, with `sign(v)` (and `sign(0) = 0`) when `sigma = 1`.
#[inline]
pub fn signed_power(v: f64, sigma: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else if sigma == 2.0 {
        v
    } else {
        v.signum() * v.abs().powf(sigma - 1.0)
    }
}

/// Value of node `(i, j)` in full-grid indexing (boundary included).
#[inline]
fn full_value(values: &[f64], nx: usize, ny: usize, i: usize, j: usize) -> f64 {
    if i == 0 || j == 0 || i > nx || j > ny {
        0.0
    } else {
        values[(j - 1) * nx + (i - 1)]
    }
}

/// Squared gradient magnitude per cell (row-major over cells).
pub fn cell_gradient_sq(u: &GridFunction) -> Vec<f64> {
    let d = &u.domain;
    let (hx, hy) = d.spacing();
    let n = d.cells;
    let v = &u.values;
    match d.kind {
        DomainKind::Interval { .. } => {
            let nx = n - 1;
            (0..n)
                .map(|c| {
                    let g = (full_value(v, nx, 1, c + 1, 1) - full_value(v, nx, 1, c, 1)) / hx;
                    g * g
                })
                .collect()
        }
        DomainKind::Rectangle { .. } => {
            let (nx, ny) = (n - 1, n - 1);
            let mut out = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    let v00 = full_value(v, nx, ny, i, j);
                    let v10 = full_value(v, nx, ny, i + 1, j);
                    let v01 = full_value(v, nx, ny, i, j + 1);
                    let v11 = full_value(v, nx, ny, i + 1, j + 1);
                    let dxb = (v10 - v00) / hx;
                    let dxt = (v11 - v01) / hx;
                    let dyl = (v01 - v00) / hy;
                    let dyr = (v11 - v10) / hy;
                    out.push(0.5 * (dxb * dxb + dxt * dxt + dyl * dyl + dyr * dyr));
                }
            }
            out
        }
    }
}

/// `J(u) = ||grad u||_p^p` with one gradient sample per cell.
pub fn dirichlet_energy(u: &GridFunction, p: f64) -> f64 {
    let area = u.domain.weight();
    let half_p = 0.5 * p;
    let s: f64 = if p == 2.0 {
        cell_gradient_sq(u).iter().sum()
    } else {
        cell_gradient_sq(u).iter().map(|g2| g2.powf(half_p)).sum()
    };
    area * s
}

/// Applies `-div(c grad v)` for per-cell coefficients `c`, divided by the
/// lumped mass. With `c = |grad u|^{p-2}` this is the discrete `-Delta_p u`.
pub fn weighted_laplacian_apply(v: &GridFunction, cell_coeff: &[f64]) -> GridFunction {
    let d = &v.domain;
    let (hx, hy) = d.spacing();
    let n = d.cells;
    let vals = &v.values;
    let mut out = vec![0.0; vals.len()];
    match d.kind {
        DomainKind::Interval { .. } => {
            let nx = n - 1;
            // flux_c = c_c * (v_{c+1} - v_c) / h; (-div)_k = (flux_{k-1} - flux_k) / h
            let mut prev = 0.0;
            for c in 0..n {
                let g = (full_value(vals, nx, 1, c + 1, 1) - full_value(vals, nx, 1, c, 1)) / hx;
                let flux = cell_coeff[c] * g;
                if c >= 1 {
                    out[c - 1] = (prev - flux) / hx;
                }
                prev = flux;
            }
        }
        DomainKind::Rectangle { .. } => {
            let (nx, ny) = (n - 1, n - 1);
            let mut add = |i: usize, j: usize, val: f64| {
                if i >= 1 && j >= 1 && i <= nx && j <= ny {
                    out[(j - 1) * nx + (i - 1)] += val;
                }
            };
            for j in 0..n {
                for i in 0..n {
                    // each edge is shared by two cells
                    let k = 0.5 * cell_coeff[j * n + i];
                    if k == 0.0 {
                        continue;
                    }
                    let v00 = full_value(vals, nx, ny, i, j);
                    let v10 = full_value(vals, nx, ny, i + 1, j);
                    let v01 = full_value(vals, nx, ny, i, j + 1);
                    let v11 = full_value(vals, nx, ny, i + 1, j + 1);
                    let dxb = (v10 - v00) / hx;
                    let dxt = (v11 - v01) / hx;
                    let dyl = (v01 - v00) / hy;
                    let dyr = (v11 - v10) / hy;
                    add(i, j, k * (-dxb / hx - dyl / hy));
                    add(i + 1, j, k * (dxb / hx - dyr / hy));
                    add(i, j + 1, k * (-dxt / hx + dyl / hy));
                    add(i + 1, j + 1, k * (dxt / hx + dyr / hy));
                }
            }
        }
    }
    GridFunction { domain: v.domain, values: out }
}

/// Discrete weak `-Delta_p u`: the gradient of the energy divided by `p` and
/// by the lumped mass, with `|g|^{p-2}` regularized as `(|g|^2 + eps^2)^{(p-2)/2}`.
pub fn p_laplacian_apply(u: &GridFunction, p: f64, eps_reg: f64) -> GridFunction {
    let coeff: Vec<f64> = if p == 2.0 {
        vec![1.0; cell_count(&u.domain)]
    } else {
        let e2 = eps_reg * eps_reg;
        let expo = 0.5 * (p - 2.0);
        cell_gradient_sq(u)
            .into_iter()
            .map(|g2| {
                let s = g2 + e2;
                if s == 0.0 {
                    0.0
                } else {
                    s.powf(expo)
                }
            })
            .collect()
    };
    weighted_laplacian_apply(u, &coeff)
}

pub fn cell_count(d: &Domain) -> usize {
    match d.kind {
        DomainKind::Interval { .. } => d.cells,
        DomainKind::Rectangle { .. } => d.cells * d.cells,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BumpProfile {
    /// `(1 - s^2)^2`, C^1 at the edge of the support.
    #[default]
    Quartic,
    /// `1 - s^2`, Lipschitz.
    Parabolic,
    /// `cos(pi s / 2)`
    Cosine,
}

impl BumpProfile {
    #[inline]
    fn eval(self, s: f64) -> f64 {
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let b = 1.0 - s * s;
        match self {
            BumpProfile::Quartic => b * b,
            BumpProfile::Parabolic => b,
            BumpProfile::Cosine => (std::f64::consts::FRAC_PI_2 * s).cos(),
        }
    }
}

/// Quartic bump supported on `center +- width/2` (a square in 2D).
pub fn bump(domain: &Domain, center: &[f64], width: f64) -> Result<GridFunction> {
    bump_with_profile(domain, center, width, BumpProfile::Quartic)
}

pub fn bump_with_profile(
    domain: &Domain,
    center: &[f64],
    width: f64,
    profile: BumpProfile,
) -> Result<GridFunction> {
    if center.len() != domain.dim() {
        return Err(Error::Domain(format!(
            "center has {} coordinates, domain is {}D",
            center.len(),
            domain.dim()
        )));
    }
    if !(width > 0.0) {
        return Err(Error::Domain(format!("bump width must be positive, got {width}")));
    }
    let half = 0.5 * width;
    let (ax, bx, ay, by) = domain.bounds();
    // the profile vanishes on the edge of its support, which may lie on the boundary
    let slack = 1e-12 * (bx - ax).max(by - ay);
    let inside_x = center[0] - half >= ax - slack && center[0] + half <= bx + slack;
    let inside_y = domain.dim() == 1 || (center[1] - half >= ay - slack && center[1] + half <= by + slack);
    if !(inside_x && inside_y) {
        return Err(Error::Domain(format!(
            "bump support around {center:?} with width {width} leaves the domain"
        )));
    }
    let cx = center[0];
    let cy = if domain.dim() == 2 { center[1] } else { 0.0 };
    let dim = domain.dim();
    Ok(GridFunction::from_fn(*domain, |x, y| {
        let fx = profile.eval((x - cx) / half);
        if dim == 1 {
            fx
        } else {
            fx * profile.eval((y - cy) / half)
        }
    }))
}

/// Deterministic uniform values in `[-1, 1]` at interior nodes.
pub fn random_function(domain: &Domain, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..domain.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    GridFunction { domain: *domain, values }
}

/// Same nodal values on the grid of `t Omega`, i.e. `v = u(./t)`.
pub fn transplant(u: &GridFunction, t: f64) -> Result<GridFunction> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("transplant factor must be positive, got {t}")));
    }
    Ok(GridFunction { domain: u.domain.scaled(t), values: u.values.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit(cells: usize) -> Domain {
        Domain::interval(0.0, 1.0, cells).unwrap()
    }

    fn sine(d: Domain) -> GridFunction {
        GridFunction::from_fn(d, |x, _| (PI * x).sin())
    }

    #[test]
    fn domain_counting() {
        let d = unit(100);
        assert_eq!(d.len(), 99);
        assert_relative_eq!(d.spacing().0, 0.01, max_relative = 1e-14);
        let d = Domain::interval(0.0, 2.0, 100).unwrap();
        assert_relative_eq!(d.spacing().0, 0.02, max_relative = 1e-14);
        assert_eq!(d.measure(), 2.0);
        let d = Domain::rectangle(0.0, 1.0, 0.0, 1.0, 50).unwrap();
        assert_eq!(d.interior_shape(), (49, 49));
        assert!(Domain::interval(0.0, 1.0, 1).is_err());
        assert!(Domain::interval(1.0, 1.0, 10).is_err());
        assert!(Domain::rectangle(0.0, 1.0, 2.0, 1.0, 10).is_err());
    }

    #[test]
    fn norms_of_sine() {
        let u = sine(unit(400));
        assert_eq!(lp_norm(&GridFunction::zeros(unit(10)), 2.0), 0.0);
        assert!((lp_norm(&u, 2.0) - 0.5f64.sqrt()).abs() < 1e-4);
        assert!((lp_norm(&u, 1.0) - 2.0 / PI).abs() < 1e-4);
    }

    #[test]
    fn energy_examples() {
        let d = unit(400);
        assert_eq!(dirichlet_energy(&GridFunction::zeros(d), 2.0), 0.0);
        let e = dirichlet_energy(&sine(d), 2.0);
        assert!((e - PI * PI / 2.0).abs() < 1e-3, "{e}");
        let hat = GridFunction::from_fn(unit(2), |x, _| 1.0 - (2.0 * x - 1.0).abs());
        assert_relative_eq!(dirichlet_energy(&hat, 2.0), 4.0, max_relative = 1e-14);
    }

    #[test]
    fn laplacian_hat_and_zero() {
        let hat = GridFunction::new(unit(2), vec![1.0]).unwrap();
        let lap = p_laplacian_apply(&hat, 2.0, 0.0);
        assert_relative_eq!(lap.values()[0], 8.0, max_relative = 1e-14);
        let z = p_laplacian_apply(&GridFunction::zeros(unit(10)), 3.0, 1e-10);
        assert!(z.is_zero());
    }

    #[test]
    fn laplacian_linear_at_p2() {
        let u = random_function(&unit(50), 3);
        let a = p_laplacian_apply(&u.scaled(2.0), 2.0, 0.0);
        let b = p_laplacian_apply(&u, 2.0, 0.0).scaled(2.0);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn stencils_at_p2() {
        let d = unit(20);
        let h = d.spacing().0;
        let u = random_function(&d, 1);
        let lap = p_laplacian_apply(&u, 2.0, 0.0);
        let v = u.values();
        for k in 0..v.len() {
            let l = if k > 0 { v[k - 1] } else { 0.0 };
            let r = if k + 1 < v.len() { v[k + 1] } else { 0.0 };
            let s = (2.0 * v[k] - l - r) / (h * h);
            assert!((lap.values()[k] - s).abs() <= 1e-12 * s.abs().max(1.0));
        }
        let d = Domain::rectangle(0.0, 1.0, 0.0, 2.0, 8).unwrap();
        let (hx, hy) = d.spacing();
        let u = random_function(&d, 2);
        let lap = p_laplacian_apply(&u, 2.0, 0.0);
        let (nx, ny) = d.interior_shape();
        let at = |i: isize, j: isize| -> f64 {
            if i < 0 || j < 0 || i >= nx as isize || j >= ny as isize {
                0.0
            } else {
                u.values()[j as usize * nx + i as usize]
            }
        };
        for j in 0..ny as isize {
            for i in 0..nx as isize {
                let s = (2.0 * at(i, j) - at(i - 1, j) - at(i + 1, j)) / (hx * hx)
                    + (2.0 * at(i, j) - at(i, j - 1) - at(i, j + 1)) / (hy * hy);
                let got = lap.values()[j as usize * nx + i as usize];
                assert!((got - s).abs() <= 1e-12 * s.abs().max(1.0), "{got} vs {s}");
            }
        }
    }

    #[test]
    fn laplacian_symmetric_at_p2() {
        for d in [unit(30), Domain::rectangle(0.0, 1.0, 0.0, 1.0, 9).unwrap()] {
            let u = random_function(&d, 5);
            let v = random_function(&d, 6);
            let a = p_laplacian_apply(&u, 2.0, 0.0).dot(&v);
            let b = p_laplacian_apply(&v, 2.0, 0.0).dot(&u);
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn laplacian_is_energy_gradient() {
        // <-Delta_p u, v>_mass = (1/p) dJ(u)[v]
        for d in [unit(40), Domain::rectangle(0.0, 1.0, 0.0, 1.0, 7).unwrap()] {
            for p in [1.5, 2.0, 3.0] {
                let u = random_function(&d, 11);
                let v = random_function(&d, 12);
                let lap = p_laplacian_apply(&u, p, 0.0);
                let h = 1e-6;
                let fd = (dirichlet_energy(&u.axpy(h, &v), p) - dirichlet_energy(&u.axpy(-h, &v), p))
                    / (2.0 * h);
                let an = p * lap.dot(&v);
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "p={p}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn bump_construction() {
        let d = unit(100);
        let b = bump(&d, &[0.5], 0.5).unwrap();
        assert_relative_eq!(b.max(), 1.0, max_relative = 1e-14);
        for (i, v) in b.values().iter().enumerate() {
            let x = d.node(i).0;
            if x <= 0.25 || x >= 0.75 {
                assert_eq!(*v, 0.0);
            } else {
                assert!(*v > 0.0);
            }
        }
        let b1 = bump(&d, &[0.25], 0.4).unwrap();
        let b2 = bump(&d, &[0.75], 0.4).unwrap();
        assert!(b1.product(&b2).is_zero());
        for s in [1.0, 1.5, 3.0] {
            assert_relative_eq!(lp_norm(&b1, s), lp_norm(&b2, s), max_relative = 1e-12);
        }
        assert!(bump(&d, &[0.2], 0.4).is_ok());
        assert!(bump(&d, &[0.1], 0.4).is_err());
        assert!(bump(&d, &[0.5, 0.5], 0.4).is_err());
    }

    #[test]
    fn random_is_deterministic() {
        let d = unit(50);
        assert_eq!(random_function(&d, 7), random_function(&d, 7));
        assert_ne!(random_function(&d, 7), random_function(&d, 8));
        assert!(random_function(&d, 7).values().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn transplant_scaling() {
        let u = sine(unit(64));
        assert_eq!(transplant(&u, 1.0).unwrap(), u);
        let v = transplant(&u, 2.0).unwrap();
        let expect = GridFunction::from_fn(*v.domain(), |x, _| (PI * x / 2.0).sin());
        for (a, b) in v.values().iter().zip(expect.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        for p in [1.5, 2.0, 3.0] {
            let ratio = dirichlet_energy(&v, p) / dirichlet_energy(&u, p);
            assert_relative_eq!(ratio, 2f64.powf(1.0 - p), max_relative = 1e-12);
        }
        assert!(transplant(&u, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        for d in [unit(9), Domain::rectangle(0.0, 1.0, -1.0, 1.0, 4).unwrap()] {
            let u = random_function(&d, 4);
            let back = GridFunction::from_csv(&u.to_csv()).unwrap();
            assert_eq!(back, u);
        }
        assert!(GridFunction::from_csv("triangle,0,1\n").is_err());
    }

    #[test]
    fn odd_part_is_odd() {
        let u = random_function(&Domain::rectangle(0.0, 1.0, 0.0, 1.0, 6).unwrap(), 1);
        let o = u.odd_part();
        assert_eq!(o.odd_reflection(), o);
    }
}
