//! Point-transformation differential invariants of second-order ODEs
//! `y'' = a3(x,y) y'^3 + a2(x,y) y'^2 + a1(x,y) y' + a0(x,y)`.
//!
//! The crate computes the relative invariants `L1, L2, L3, Psi1, Psi2`, the
//! invariant frame and Liouville density, the scalar invariants `I1, I2`,
//! classifies jets into general-position and degenerate orbits, samples the
//! canonical form of an equation in the chart `(I1, I2)`, and decides whether
//! two equations are related by a point transformation.
//!
//! Every jet quantity is pulled back to the equation's section, so jet
//! coordinates become partial derivatives of the coefficient expressions.

pub mod canonical;
pub mod error;
pub mod expr;
pub mod invariants;
pub mod ode;
pub mod report;
pub mod suite;

pub use error::{Error, Result};
pub use expr::{Expr, Point2, Var};
