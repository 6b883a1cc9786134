//! Analysis and reconstruction of time-like surfaces in Minkowski 3-space
//! that are parametrized along their (real) asymptotic lines.
//!
//! The ambient space is ℝ³ with the scalar product
//! `⟨x,y⟩ = x₁y₁ + x₂y₂ − x₃y₃` (third coordinate time-like). For a time-like
//! surface of positive Gauss curvature with `K − H² > 0` the asymptotic lines
//! are real and can be used as parameter lines; the geometry of the surface is
//! then captured by four scalar functions of the parameters:
//!
//! * `a`  — the scalar product of the unit tangents along the two families,
//! * `α`  — the normalized second-form coefficient `M/(√E·√−G)`,
//! * `γ₁`, `γ₂` — the tangential rotation rates of the frame along each family.
//!
//! The crate provides, per module:
//!
//! * [`expr`] — an expression parser and second-order forward-mode jets, so
//!   surfaces given by coordinate formulas are differentiated exactly.
//! * [`minkowski`] — the scalar product, causal classification, Lorentzian
//!   cross product, and rigid motions (Lorentz transformation + translation).
//! * [`grid`] — uniform rectangular grids with second-order finite-difference
//!   calculus, quadrature, and cubic resampling.
//! * [`surface`] — fundamental forms, curvatures, and a patch classifier that
//!   decides whether the asymptotic-line machinery applies.
//! * [`invariants`] — the invariants `a, α, f, γ₁, γ₂` of a parametrized
//!   surface, compatibility residuals (Gauss, Codazzi, and the first-order
//!   system for `√E, √−G`), and the inversion back to `√E, √−G`.
//! * [`canonical`] — gauge functions `φ(u), ψ(v)`, the canonicity test, and
//!   reparametrization to canonical asymptotic parameters.
//! * [`reconstruct`] — the Bonnet-type engine: solve the `Φ/Ψ` Cauchy
//!   problem, assemble the frame connection, integrate frames and positions,
//!   and compare patches up to a Lorentz motion.
//! * [`pde`] — a Goursat marching solver for the cosh-Gordon equation
//!   (constant `K = 1`) plus residual checkers for the constant-curvature and
//!   minimal-case forms of the Gauss equation.
//! * [`cli`] — the command-line front end with the `.surf`/CSV/OBJ/JSON
//!   formats used by the `asymsurf` binary.
//!
//! Everything is plain `f64` numerics; all operations are deterministic and
//! re-entrant (no global state), so identical inputs produce byte-identical
//! artifacts.

// Negated comparisons are NaN traps: `!(x > 0.0)` rejects NaN where
// `x <= 0.0` would accept it. Indexed loops walk several grids in lockstep.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod canonical;
pub mod cli;
pub mod expr;
pub mod grid;
pub mod invariants;
pub mod minkowski;
pub mod pde;
pub mod reconstruct;
pub mod surface;

#[cfg(test)]
pub(crate) mod testutil;
