//! Ground states of `R_alpha` by projected descent on `M_alpha`, multistart
//! collection of critical points, disjoint-bump upper bounds for the
//! minimax levels, and degenerate solutions at the inflection value.
//!
//! Each iteration takes a preconditioned gradient step, backtracks with an
//! Armijo test on `R_alpha`, and re-projects onto `M_alpha`. The
//! preconditioner is the weighted stiffness matrix `p (p-1) K_c` with cell
//! weights `c = (|grad u|^2 + delta^2)^{(p-2)/2}`; at `p = 2` a unit step is
//! one step of inverse iteration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{evaluate, AlphaParams, Evaluation};
use crate::grid::{
    bump_with_profile, cell_count, cell_gradient_sq, fmt17, random_function, weighted_laplacian_apply, BumpProfile,
    Domain, DomainKind, GridFunction,
};
use crate::par::{self, Execution};
use crate::params::ExponentTriple;
use crate::transforms::{
    project_m, ray_distance, translation_record, CriticalPoint, Normalization, TranslationRecord, DISTINCT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub tol_residual: f64,
    pub step0: f64,
    pub armijo_c: f64,
    pub armijo_shrink: f64,
    pub eps_reg: f64,
    pub seed: u64,
    pub multistart: usize,
    /// Keep iterates nonnegative by taking `|u|` after every step.
    pub positivity: bool,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 2000,
            tol_residual: 1e-8,
            step0: 1.0,
            armijo_c: 1e-4,
            armijo_shrink: 0.5,
            eps_reg: 1e-10,
            seed: 0,
            multistart: 1,
            positivity: true,
            execution: Execution::default(),
        }
    }
}

impl SolveOptions {
    /// Defaults with the residual tolerance chosen for `p`: `1e-8` at
    /// `p = 2`, `1e-6` otherwise.
    pub fn for_p(p: f64) -> SolveOptions {
        SolveOptions { tol_residual: if p == 2.0 { 1e-8 } else { 1e-6 }, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(m.to_string()));
        if self.max_iter < 1 {
            return bad("maxIter >= 1 required");
        }
        if !(self.tol_residual > 0.0) {
            return bad("tolResidual > 0 required");
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return bad("step0 > 0 required");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijoC in (0, 1) required");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijoShrink in (0, 1) required");
        }
        if !(self.eps_reg >= 0.0 && self.eps_reg.is_finite()) {
            return bad("epsReg >= 0 required");
        }
        if self.multistart < 1 {
            return bad("multistart >= 1 required");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub value: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Final iterate, normalized onto `M_alpha`.
    pub point: CriticalPoint,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<HistoryEntry>,
    /// Set when `alpha <= alpha0`, where the infimum is zero and not attained.
    pub below_alpha0: bool,
}

impl SolveResult {
    pub fn write_history_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,value,residual")?;
        for h in &self.history {
            writeln!(w, "{},{},{}", h.iter, fmt17(h.value), fmt17(h.residual))?;
        }
        Ok(())
    }

    pub fn history_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_history_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Restriction applied to every trial point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Restriction {
    None,
    /// `u -> |u|`
    Positive,
    /// `u -> (u - u o reflection)/2`, odd about the vertical midline.
    Odd,
}

impl Restriction {
    fn apply(self, u: GridFunction) -> GridFunction {
        match self {
            Restriction::None => u,
            Restriction::Positive => u.abs(),
            Restriction::Odd => u.odd_part(),
        }
    }
}

// ---------------------------------------------------------------------------
// preconditioner

fn preconditioner_weights(u: &GridFunction, p: f64) -> Vec<f64> {
    if p == 2.0 {
        return vec![1.0; cell_count(u.domain())];
    }
    let g2 = cell_gradient_sq(u);
    let gmax2 = g2.iter().cloned().fold(0.0, f64::max);
    let delta2 = (1e-6 * gmax2).max(1e-300);
    let expo = 0.5 * (p - 2.0);
    g2.into_iter().map(|s| (p - 1.0) * (s + delta2).powf(expo)).collect()
}

/// Solves `(K_c + D) d = b` where `K_c v = weighted_laplacian_apply(v, c)`
/// and `D` is diagonal.
fn stiffness_solve(b: &GridFunction, c: &[f64], diag_extra: &[f64]) -> GridFunction {
    let d = *b.domain();
    match d.kind {
        DomainKind::Interval { .. } => {
            let h = d.spacing().0;
            let n = d.len();
            let inv = 1.0 / (h * h);
            // node k (interior) sits between cells k and k+1
            let diag: Vec<f64> = (0..n).map(|k| (c[k] + c[k + 1]) * inv + diag_extra[k]).collect();
            let off: Vec<f64> = (0..n.saturating_sub(1)).map(|k| -c[k + 1] * inv).collect();
            GridFunction::from_vec_unchecked(d, thomas(&diag, &off, b.values()))
        }
        DomainKind::Rectangle { .. } => conjugate_gradient(b, c, diag_extra),
    }
}

/// Symmetric tridiagonal solve.
fn thomas(diag: &[f64], off: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = diag[0];
    cp[0] = if n > 1 { off[0] / denom } else { 0.0 };
    dp[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - off[i - 1] * cp[i - 1];
        if i + 1 < n {
            cp[i] = off[i] / denom;
        }
        dp[i] = (rhs[i] - off[i - 1] * dp[i - 1]) / denom;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

fn conjugate_gradient(b: &GridFunction, c: &[f64], diag_extra: &[f64]) -> GridFunction {
    let d = *b.domain();
    let (hx, hy) = d.spacing();
    let (nx, ny) = d.interior_shape();
    let cells = d.cells;
    let scale = 0.5 * (1.0 / (hx * hx) + 1.0 / (hy * hy));
    let mut jacobi = vec![0.0; d.len()];
    for j in 0..ny {
        for i in 0..nx {
            // interior node (i+1, j+1) touches cells (i..=i+1, j..=j+1)
            let s = c[j * cells + i] + c[j * cells + i + 1] + c[(j + 1) * cells + i] + c[(j + 1) * cells + i + 1];
            jacobi[j * nx + i] = 1.0 / (scale * s + diag_extra[j * nx + i]);
        }
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bv = b.values();
    let bnorm = dot(bv, bv).sqrt();
    let mut x = vec![0.0; bv.len()];
    if bnorm == 0.0 {
        return GridFunction::from_vec_unchecked(d, x);
    }
    let mut r = bv.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&jacobi).map(|(a, m)| a * m).collect();
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..10 * bv.len().max(50) {
        let mut ad = weighted_laplacian_apply(&GridFunction::from_vec_unchecked(d, dir.clone()), c).into_values();
        for k in 0..ad.len() {
            ad[k] += diag_extra[k] * dir[k];
        }
        let ad = &ad[..];
        let a = rz / dot(&dir, ad);
        for k in 0..x.len() {
            x[k] += a * dir[k];
            r[k] -= a * ad[k];
        }
        if dot(&r, &r).sqrt() <= 1e-12 * bnorm {
            break;
        }
        for k in 0..z.len() {
            z[k] = r[k] * jacobi[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..dir.len() {
            dir[k] = z[k] + beta * dir[k];
        }
    }
    GridFunction::from_vec_unchecked(d, x)
}

/// Positive part of the pointwise second derivative of the lower-order terms
/// `-alpha J/lq |u|^q / q - (1 - alpha) J/lr |u|^r / r`.
fn potential_diagonal(u: &GridFunction, ev: &Evaluation, ap: &AlphaParams) -> Vec<f64> {
    let t = &ap.triple;
    let m = &ev.moments;
    let cq = -ap.alpha * (t.q - 1.0) * m.energy / m.lq;
    let cr = -(1.0 - ap.alpha) * (t.r - 1.0) * m.energy / m.lr;
    let floor = 1e-8 * u.max_abs();
    u.values()
        .iter()
        .map(|&v| {
            let a = v.abs().max(floor);
            let mut s = 0.0;
            if t.q > 1.0 {
                s += cq * a.powf(t.q - 2.0);
            }
            s += cr * a.powf(t.r - 2.0);
            s.max(0.0)
        })
        .collect()
}

/// Preconditioned descent direction for the mass gradient `g` at `u`.
fn direction(u: &GridFunction, ev: &Evaluation, g: &GridFunction, ap: &AlphaParams) -> GridFunction {
    let p = ap.triple.p;
    let c = preconditioner_weights(u, p);
    let diag = potential_diagonal(u, ev, ap);
    stiffness_solve(&g.scaled(1.0 / p), &c, &diag)
}

// ---------------------------------------------------------------------------
// descent

fn check_domain(u: &GridFunction, domain: &Domain) -> Result<()> {
    if u.domain() != domain {
        return Err(Error::Domain("start function lives on a different grid".into()));
    }
    Ok(())
}

/// Projected preconditioned descent from `u0` under a restriction.
pub fn descend(ap: &AlphaParams, u0: &GridFunction, opts: &SolveOptions, restriction: Restriction) -> Result<SolveResult> {
    opts.validate()?;
    let p = ap.triple.p;
    let below_alpha0 = ap.alpha <= ap.triple.alpha0();
    if below_alpha0 {
        log::warn!(
            "alpha = {} <= alpha0 = {}: the ground state level is 0 and not attained",
            ap.alpha,
            ap.triple.alpha0()
        );
    }
    let mut u = project_m(&restriction.apply(u0.clone()), ap)?;
    let mut ev = evaluate(&u, ap, opts.eps_reg)?;
    let mut history = vec![HistoryEntry { iter: 0, value: ev.value, residual: ev.residual() }];
    let mut converged = ev.residual() <= opts.tol_residual;
    let mut iterations = 0;
    let mut step_start = opts.step0;
    while !converged && iterations < opts.max_iter {
        let g = ev.gradient(p);
        let mut d = direction(&u, &ev, &g, ap);
        let mut slope = g.dot(&d);
        if !(slope > 0.0 && slope.is_finite()) {
            d = g.clone();
            slope = g.dot(&g);
        }
        match line_search(ap, &u, &ev, &d, slope, step_start, opts, restriction) {
            Some((step, next, next_ev)) => {
                u = next;
                ev = next_ev;
                iterations += 1;
                step_start = (2.0 * step).min(opts.step0);
                history.push(HistoryEntry { iter: iterations, value: ev.value, residual: ev.residual() });
                converged = ev.residual() <= opts.tol_residual;
            }
            None => {
                log::debug!("line search failed at iteration {iterations}, residual {:e}", ev.residual());
                break;
            }
        }
    }
    if !converged {
        log::info!("descent stopped after {iterations} iterations with residual {:e}", ev.residual());
    }
    let point = CriticalPoint {
        lambda: ev.value,
        residual: ev.residual(),
        u,
        ap: *ap,
        normalization: Normalization::OnM,
    };
    Ok(SolveResult { point, iterations, converged: converged && !below_alpha0, history, below_alpha0 })
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    ap: &AlphaParams,
    u: &GridFunction,
    ev: &Evaluation,
    d: &GridFunction,
    slope: f64,
    step_start: f64,
    opts: &SolveOptions,
    restriction: Restriction,
) -> Option<(f64, GridFunction, Evaluation)> {
    // rounding level of R computed through logarithms of J, lq and lr
    let t = &ap.triple;
    let m = &ev.moments;
    let amplification = 1.0
        + m.energy.ln().abs()
        + (ap.alpha * t.p / t.q * m.lq.ln()).abs()
        + ((1.0 - ap.alpha) * t.p / t.r * m.lr.ln()).abs();
    let noise = 32.0 * f64::EPSILON * amplification * ev.value.abs();
    let residual = ev.residual();
    let mut step = step_start;
    for _ in 0..80 {
        let trial = restriction.apply(u.axpy(-step, d));
        if !trial.is_zero() && trial.values().iter().all(|v| v.is_finite()) {
            if let Ok(trial) = project_m(&trial, ap) {
                if let Ok(tev) = evaluate(&trial, ap, opts.eps_reg) {
                    let target = ev.value - opts.armijo_c * step * slope;
                    // inside the rounding band, progress is judged by the residual
                    let accept = tev.value <= target || (tev.value <= target + noise && tev.residual() < residual);
                    if accept && tev.value.is_finite() {
                        return Some((step, trial, tev));
                    }
                }
            }
        }
        step *= opts.armijo_shrink;
    }
    None
}

/// Minimizes `R_alpha` starting from `warm_start` or from `|random|`.
pub fn minimize_ground_state(
    ap: &AlphaParams,
    domain: &Domain,
    opts: &SolveOptions,
    warm_start: Option<&GridFunction>,
) -> Result<SolveResult> {
    let u0 = match warm_start {
        Some(w) => {
            check_domain(w, domain)?;
            w.clone()
        }
        None => random_function(domain, opts.seed).abs(),
    };
    let restriction = if opts.positivity { Restriction::Positive } else { Restriction::None };
    descend(ap, &u0, opts, restriction)
}

// ---------------------------------------------------------------------------
// multistart

fn canonical_hash(u: &GridFunction) -> u64 {
    // FNV-1a over the sign-aligned nodal bits
    let flip = u.values().iter().find(|v| v.abs() > 0.0).is_some_and(|v| *v < 0.0);
    let mut h: u64 = 0xcbf29ce484222325;
    for &v in u.values() {
        let v = if flip { -v } else { v };
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Odd two-bump profile: positive bump on the left half, negative on the right.
fn antisymmetric_start(domain: &Domain, seed: u64) -> GridFunction {
    let (ax, bx, ay, by) = domain.bounds();
    let lx = bx - ax;
    let base = GridFunction::from_fn(*domain, |x, y| {
        let s = (x - ax) / lx;
        let fy = if domain.dim() == 2 { (std::f64::consts::PI * (y - ay) / (by - ay)).sin() } else { 1.0 };
        (2.0 * std::f64::consts::PI * s).sin() * fy
    });
    base.axpy(0.1, &random_function(domain, seed)).odd_part()
}

/// Runs `opts.multistart` independent descents and returns the distinct
/// end points sorted by level.
///
/// With `positivity` every start is `|random|`. Otherwise start 0 is the
/// ground-state start, odd starts are antisymmetric two-bump profiles
/// (descended within odd functions) and the rest are signed random.
pub fn multistart_spectrum(ap: &AlphaParams, domain: &Domain, opts: &SolveOptions) -> Result<Vec<SolveResult>> {
    opts.validate()?;
    let starts: Vec<usize> = (0..opts.multistart).collect();
    let runs = par::map(opts.execution, starts, |i| {
        let seed = opts.seed.wrapping_add(i as u64);
        let o = SolveOptions { seed, ..*opts };
        if opts.positivity {
            minimize_ground_state(ap, domain, &o, None)
        } else if i == 0 {
            descend(ap, &random_function(domain, seed).abs(), &o, Restriction::None)
        } else if i % 2 == 1 {
            descend(ap, &antisymmetric_start(domain, seed), &o, Restriction::Odd)
        } else {
            descend(ap, &random_function(domain, seed), &o, Restriction::None)
        }
    });
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    runs.sort_by(|a, b| {
        a.point
            .lambda
            .total_cmp(&b.point.lambda)
            .then_with(|| canonical_hash(&a.point.u).cmp(&canonical_hash(&b.point.u)))
    });
    let mut kept: Vec<SolveResult> = Vec::new();
    for run in runs {
        let mut duplicate = None;
        for (j, k) in kept.iter().enumerate() {
            if ray_distance(&run.point.u, &k.point.u, ap)? <= DISTINCT_TOL {
                duplicate = Some(j);
                break;
            }
        }
        match duplicate {
            Some(j) => {
                let better = (run.converged && !kept[j].converged)
                    || (run.converged == kept[j].converged && run.point.residual < kept[j].point.residual);
                if better {
                    kept[j] = run;
                }
            }
            None => kept.push(run),
        }
    }
    if !kept.iter().any(|r| r.converged) {
        log::warn!("multistart: none of {} starts converged", opts.multistart);
    }
    Ok(kept)
}

// ---------------------------------------------------------------------------
// disjoint bumps

/// `k` translates of one bump with pairwise disjoint supports.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpFamily {
    pub k: usize,
    pub bumps: Vec<GridFunction>,
}

impl BumpFamily {
    /// Checks disjointness and equality of the `q`- and `r`-norms.
    pub fn new(bumps: Vec<GridFunction>, triple: &ExponentTriple) -> Result<BumpFamily> {
        if bumps.is_empty() {
            return Err(Error::Domain("a bump family needs at least one bump".into()));
        }
        for (i, a) in bumps.iter().enumerate() {
            if a.is_zero() {
                return Err(Error::ZeroFunction);
            }
            for b in &bumps[i + 1..] {
                if a.domain() != b.domain() {
                    return Err(Error::Domain("bumps live on different grids".into()));
                }
                if !a.product(b).is_zero() {
                    return Err(Error::ConstraintViolated("bump supports overlap".into()));
                }
            }
        }
        for s in [triple.q, triple.r] {
            let n0 = crate::grid::lp_norm(&bumps[0], s);
            for b in &bumps[1..] {
                let n = crate::grid::lp_norm(b, s);
                if (n - n0).abs() > 1e-10 * n0.max(1.0) {
                    return Err(Error::ConstraintViolated(format!("unequal {s}-norms: {n0} vs {n}")));
                }
            }
        }
        Ok(BumpFamily { k: bumps.len(), bumps })
    }

    /// Node-aligned translates along `x`. `half_nodes` is the half-width in
    /// grid steps and `offset` the node index where the first support starts.
    pub fn translates(
        domain: &Domain,
        triple: &ExponentTriple,
        k: usize,
        half_nodes: usize,
        offset: usize,
        profile: BumpProfile,
    ) -> Result<BumpFamily> {
        let (ax, _, ay, by) = domain.bounds();
        let (hx, _) = domain.spacing();
        if k == 0 || half_nodes == 0 || offset + 2 * half_nodes * k > domain.cells {
            return Err(Error::Domain(format!(
                "{k} bumps of half-width {half_nodes} steps at offset {offset} do not fit in {} cells",
                domain.cells
            )));
        }
        let width = 2.0 * half_nodes as f64 * hx;
        let bumps = (0..k)
            .map(|i| {
                let cx = ax + (offset + half_nodes * (2 * i + 1)) as f64 * hx;
                let center: Vec<f64> = if domain.dim() == 1 { vec![cx] } else { vec![cx, 0.5 * (ay + by)] };
                bump_with_profile(domain, &center, width, profile)
            })
            .collect::<Result<Vec<_>>>()?;
        BumpFamily::new(bumps, triple)
    }
}

/// `sum |eta|^p / ((sum |eta|^q)^{alpha p/q} (sum |eta|^r)^{(1-alpha) p/r})`
/// in log form.
fn log_sphere_factor(eta: &[f64], ap: &AlphaParams) -> f64 {
    let t = &ap.triple;
    let sum = |s: f64| eta.iter().map(|e| e.abs().powf(s)).sum::<f64>().ln();
    sum(t.p) - ap.alpha * t.p / t.q * sum(t.q) - (1.0 - ap.alpha) * t.p / t.r * sum(t.r)
}

fn sphere_point(angles: &[f64]) -> Vec<f64> {
    let mut eta = Vec::with_capacity(angles.len() + 1);
    let mut s = 1.0;
    for &a in angles {
        eta.push(s * a.cos());
        s *= a.sin();
    }
    eta.push(s);
    eta
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Maximizes `f` on `[a, b]` by a uniform scan followed by golden sections
/// around the best sample.
pub fn maximize_scalar(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, scan: usize) -> (f64, f64) {
    let n = scan.max(2);
    let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let (mut best_i, mut best) = (0, f(xs[0]));
    for (i, &x) in xs.iter().enumerate().skip(1) {
        let v = f(x);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = xs[best_i.saturating_sub(1)];
    let mut hi = xs[(best_i + 1).min(n)];
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        }
    }
    let (x, v) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if v > best {
        (x, v)
    } else {
        (xs[best_i], best)
    }
}

/// Supremum over the unit sphere of `R_alpha(sum eta_i g_i) / R_alpha(g)` for
/// `k` equal disjoint bumps. By symmetry only the positive orthant is searched.
pub fn sphere_sup_factor(k: usize, ap: &AlphaParams) -> f64 {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let f = |angles: &[f64]| log_sphere_factor(&sphere_point(angles), ap);
    match k {
        0 | 1 => 1.0,
        2 => maximize_scalar(|th| f(&[th]), 0.0, half_pi, 64).1.exp(),
        _ => {
            let m = k - 1;
            let mut best_angles = vec![0.0; m];
            let mut best = f(&best_angles);
            if k == 3 {
                let n = 32;
                for i in 0..=n {
                    for j in 0..=n {
                        let a = [half_pi * i as f64 / n as f64, half_pi * j as f64 / n as f64];
                        let v = f(&a);
                        if v > best {
                            best = v;
                            best_angles = a.to_vec();
                        }
                    }
                }
            } else {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(k as u64);
                for _ in 0..4096 {
                    let a: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..=half_pi)).collect();
                    let v = f(&a);
                    if v > best {
                        best = v;
                        best_angles = a;
                    }
                }
                // the equal-weight point
                let mut eq = Vec::with_capacity(m);
                for i in 0..m {
                    eq.push((1.0 / ((k - i) as f64).sqrt()).acos());
                }
                let v = f(&eq);
                if v > best {
                    best = v;
                    best_angles = eq;
                }
            }
            // coordinate ascent
            let mut width = half_pi / 8.0;
            for _ in 0..40 {
                for c in 0..m {
                    let lo = (best_angles[c] - width).max(0.0);
                    let hi = (best_angles[c] + width).min(half_pi);
                    let mut trial = best_angles.clone();
                    let (x, v) = maximize_scalar(
                        |a| {
                            trial[c] = a;
                            f(&trial)
                        },
                        lo,
                        hi,
                        8,
                    );
                    if v > best {
                        best = v;
                        best_angles[c] = x;
                    }
                }
                width *= 0.7;
            }
            best.exp()
        }
    }
}

/// Upper bound for the `k`-th minimax level from `k` disjoint translated
/// bumps, minimized over widths up to `bump_width`, placements and profiles.
pub fn genus_upper_bound(k: usize, ap: &AlphaParams, domain: &Domain, bump_width: f64, opts: &SolveOptions) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("k >= 1 required".into()));
    }
    let (ax, bx, ay, by) = domain.bounds();
    let fits_x = k as f64 * bump_width <= bx - ax;
    let fits_y = domain.dim() == 1 || bump_width <= by - ay;
    if !(bump_width > 0.0 && fits_x && fits_y) {
        return Err(Error::Domain(format!("{k} bumps of width {bump_width} do not fit in {:?}", domain.kind)));
    }
    let (hx, _) = domain.spacing();
    let mut max_half = (0.5 * bump_width / hx).floor() as usize;
    max_half = max_half.min(domain.cells / (2 * k));
    if domain.dim() == 2 {
        // the square support must also fit in y
        let y_half = (0.5 * (by - ay) / hx + 1e-9).floor() as usize;
        max_half = max_half.min(y_half);
    }
    if max_half == 0 {
        return Err(Error::Domain(format!("bump width {bump_width} is below two grid steps")));
    }
    let single = |half: usize, offset: usize, profile: BumpProfile| -> Option<f64> {
        let fam = BumpFamily::translates(domain, &ap.triple, k, half, offset, profile).ok()?;
        crate::functionals::r_alpha(&fam.bumps[0], ap).ok()
    };
    let placements = |half: usize| -> Vec<usize> {
        let slack = domain.cells - 2 * half * k;
        let mut v: Vec<usize> = (0..8).map(|i| slack * i / 7).collect();
        v.dedup();
        v
    };
    let evaluate_width = |half: usize| -> Vec<(f64, usize)> {
        let mut jobs = Vec::new();
        for profile in [BumpProfile::Quartic, BumpProfile::Parabolic, BumpProfile::Cosine] {
            for off in placements(half) {
                jobs.push((half, off, profile));
            }
        }
        par::map(opts.execution, jobs, |(h, o, pr)| (single(h, o, pr).unwrap_or(f64::INFINITY), h))
    };
    let widths: Vec<usize> = {
        let mut w: Vec<usize> = (0..4).map(|i| (max_half * (4 - i) / 4).max(1)).collect();
        w.dedup();
        w
    };
    let mut best = (f64::INFINITY, max_half);
    for &h in &widths {
        for cand in evaluate_width(h) {
            if cand.0 < best.0 {
                best = cand;
            }
        }
    }
    // one refinement pass around the best width
    let step = (max_half / 8).max(1);
    let lo = best.1.saturating_sub(step).max(1);
    let hi = (best.1 + step).min(max_half);
    for h in lo..=hi {
        if widths.contains(&h) {
            continue;
        }
        for cand in evaluate_width(h) {
            if cand.0 < best.0 {
                best = cand;
            }
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Domain("no admissible bump placement".into()));
    }
    Ok(best.0 * sphere_sup_factor(k, ap))
}

/// Ground state at `alpha = (r - p)/(r - q)` and its translated record.
pub fn find_degenerate(triple: &ExponentTriple, domain: &Domain, opts: &SolveOptions) -> Result<TranslationRecord> {
    let alpha = triple
        .alpha_inflect()
        .ok_or_else(|| Error::InvalidExponents("no inflection value when r = p".into()))?;
    let ap = AlphaParams::new(*triple, alpha);
    let res = minimize_ground_state(&ap, domain, opts, None)?;
    if !res.converged {
        return Err(Error::NotConverged { iterations: res.iterations, residual: res.point.residual });
    }
    let rec = translation_record(&res.point)?;
    let j = rec.grad_p.powf(triple.p);
    if rec.fiber2.abs() > 1e-5 * j.max(1.0) {
        return Err(Error::ContractViolated(format!(
            "second fiber derivative {:e} is not ~0 at the inflection value (J = {j:e})",
            rec.fiber2
        )));
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate;
    use std::f64::consts::PI;

    fn ap(p: f64, q: f64, r: f64, alpha: f64) -> AlphaParams {
        AlphaParams::new(validate(p, q, r, 1).unwrap(), alpha)
    }

    fn unit(cells: usize) -> Domain {
        Domain::interval(0.0, 1.0, cells).unwrap()
    }

    #[test]
    fn thomas_matches_operator() {
        let d = unit(30);
        let c: Vec<f64> = (0..30).map(|i| 1.0 + 0.1 * i as f64).collect();
        let b = random_function(&d, 3);
        let x = stiffness_solve(&b, &c, &vec![0.5; b.values().len()]);
        let back = weighted_laplacian_apply(&x, &c).axpy(0.5, &x);
        for (u, v) in back.values().iter().zip(b.values()) {
            assert!((u - v).abs() < 1e-10, "{u} {v}");
        }
    }

    #[test]
    fn cg_matches_operator() {
        let d = Domain::rectangle(0.0, 1.0, 0.0, 2.0, 12).unwrap();
        let c: Vec<f64> = (0..144).map(|i| 1.0 + 0.01 * i as f64).collect();
        let b = random_function(&d, 5);
        let x = stiffness_solve(&b, &c, &vec![0.5; b.values().len()]);
        let back = weighted_laplacian_apply(&x, &c).axpy(0.5, &x);
        for (u, v) in back.values().iter().zip(b.values()) {
            assert!((u - v).abs() < 1e-8, "{u} {v}");
        }
    }

    #[test]
    fn laplace_eigenvalue() {
        let a = ap(2.0, 2.0, 3.0, 1.0);
        let d = unit(200);
        let res = minimize_ground_state(&a, &d, &SolveOptions::for_p(2.0), None).unwrap();
        assert!(res.converged);
        let h = 1.0 / 200.0;
        let exact = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        assert!((res.point.lambda - exact).abs() < 1e-9 * exact, "{} {exact}", res.point.lambda);
        assert!(res.point.u.min() > 0.0);
    }

    #[test]
    fn history_is_monotone_and_warm_start_is_fixed() {
        let a = ap(2.0, 1.0, 3.0, 0.5);
        let d = unit(100);
        let opts = SolveOptions::for_p(2.0);
        let res = minimize_ground_state(&a, &d, &opts, None).unwrap();
        assert!(res.converged);
        for w in res.history.windows(2) {
            assert!(w[1].value <= w[0].value * (1.0 + 1e-14));
        }
        let again = minimize_ground_state(&a, &d, &opts, Some(&res.point.u)).unwrap();
        assert!(again.iterations <= 2);
        let csv = res.history_csv();
        assert!(csv.starts_with("iter,value,residual\n"));
        assert_eq!(csv.lines().count(), res.history.len() + 1);
    }

    #[test]
    fn options_are_validated() {
        let bad = SolveOptions { armijo_c: 1.5, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SolveOptions { max_iter: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let a = ap(2.0, 1.0, 3.0, 0.5);
        let other = random_function(&unit(20), 1);
        assert!(minimize_ground_state(&a, &unit(10), &SolveOptions::default(), Some(&other)).is_err());
    }

    #[test]
    fn sphere_factor_k1_and_symmetric_cases() {
        let a = ap(2.0, 1.0, 3.0, 0.5);
        assert_eq!(sphere_sup_factor(1, &a), 1.0);
        // alpha = 1, q = p: the factor is identically 1
        let b = ap(2.0, 2.0, 3.0, 1.0);
        assert!((sphere_sup_factor(2, &b) - 1.0).abs() < 1e-12);
        assert!((sphere_sup_factor(3, &b) - 1.0).abs() < 1e-12);
        let s2 = sphere_sup_factor(2, &a);
        let s3 = sphere_sup_factor(3, &a);
        assert!(s2 >= 1.0 && s3 >= s2 * (1.0 - 1e-12));
    }

    #[test]
    fn bump_family_rejects_overlap_and_misfit() {
        let t = validate(2.0, 1.0, 3.0, 1).unwrap();
        let d = unit(40);
        let fam = BumpFamily::translates(&d, &t, 3, 6, 1, BumpProfile::Quartic).unwrap();
        assert_eq!(fam.k, 3);
        assert!(BumpFamily::translates(&d, &t, 4, 5, 1, BumpProfile::Quartic).is_err());
        assert!(BumpFamily::translates(&d, &t, 4, 5, 0, BumpProfile::Cosine).is_ok());
        let g = fam.bumps[0].clone();
        assert!(BumpFamily::new(vec![g.clone(), g], &t).is_err());
        let a = AlphaParams::new(t, 0.5);
        assert!(genus_upper_bound(2, &a, &d, 0.6, &SolveOptions::default()).is_err());
    }

    #[test]
    fn degenerate_requires_r_ne_p() {
        let t = validate(2.0, 1.0, 2.0, 1).unwrap();
        assert!(matches!(
            find_degenerate(&t, &unit(20), &SolveOptions::default()),
            Err(Error::InvalidExponents(_))
        ));
    }
}
