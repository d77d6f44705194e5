//! Generalized Rayleigh quotients
//! `R_alpha(u) = ||grad u||_p^p / (||u||_q^{alpha p} ||u||_r^{(1-alpha) p})`
//! for the Dirichlet p-Laplacian, discretized on uniform grids.
//!
//! The crate computes ground states and further critical points of
//! `R_alpha`, maps them to solutions of the translated equations
//! `-Delta_p u = mu |u|^{q-2} u +- |u|^{r-2} u`, traces branches in `alpha`,
//! and checks the structural identities and inequalities these objects obey.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod functionals;
pub mod grid;
pub mod par;
pub mod params;
pub mod properties;
pub mod solver;
pub mod sweep;
pub mod transforms;

pub use error::{Error, Result};
pub use functionals::AlphaParams;
pub use grid::{Domain, DomainKind, GridFunction};
pub use par::Execution;
pub use params::{derived_constants, validate, ExponentTriple, Regime, RegimeInfo};
pub use properties::PropertyReport;
pub use solver::{SolveOptions, SolveResult};
pub use sweep::{Report, SweepConfig, SweepRecord};
