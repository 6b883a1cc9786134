//! Special cases of the compatibility equations as scalar PDE tooling.
//!
//! On a patch in canonical asymptotic parameters two special geometries
//! reduce the Gauss equation to a single scalar PDE:
//!
//! * **Constant curvature `K = 1`.** Substituting `a = sinh ω` turns the
//!   equation `a_uv/(1+a²) − a·a_u·a_v/(1+a²)² + 1 = 0` into the
//!   cosh-Gordon equation `ω_uv + cosh ω = 0`. [`solve_cosh_gordon`]
//!   integrates it as a Goursat (characteristic initial value) problem and
//!   [`constant_k_residual`] checks a candidate `a` grid against the
//!   original form.
//! * **Minimal (`H = 0`) with `K > 0`.** The curvature alone must satisfy
//!   `(log √K)_uu − (log √K)_vv − 2√K = 0`, checked by
//!   [`minimal_k_residual`]. The equation is used as a characterization
//!   only, so no solver is provided for it.
//!
//! ## Marching scheme
//!
//! The Goursat solver fills the grid cell by cell with the midpoint
//! characteristic rectangle rule
//!
//! ```text
//! ω(u+h, v+k) = ω(u+h, v) + ω(u, v+k) − ω(u, v) − h·k·cosh(ω̄)
//! ```
//!
//! where `ω̄` is the average of the four cell corners. The unknown corner
//! enters `ω̄`, so each cell runs one fixed-point correction: a predictor
//! with the linearly extrapolated corner, then one corrected step — two
//! `cosh` evaluations per cell, second-order accurate. All field
//! derivatives in the residual checkers use central differences; boundary
//! nodes carry `NaN`.

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::grid::{GridError, GridSpec, ScalarField};

/// Corner agreement required between the two boundary data sets.
pub const CORNER_TOL: f64 = 1e-12;

/// Magnitude bound beyond which the marching is declared divergent
/// (`cosh` of anything larger overflows any useful residual scale).
pub const DIVERGENCE_BOUND: f64 = 50.0;

/// A characteristic initial value problem on `[u_min,u_max]×[v_min,v_max]`:
/// the solution is prescribed on the two axes `v = v_min` and `u = u_min`.
#[derive(Clone, Debug)]
pub struct GoursatProblem {
    /// Grid the solution is marched on.
    pub spec: GridSpec,
    /// `ω(uᵢ, v_min)` for every `u`-node.
    pub bottom: Vec<f64>,
    /// `ω(u_min, vⱼ)` for every `v`-node.
    pub left: Vec<f64>,
}

/// Result of a Goursat march.
#[derive(Clone, Debug)]
pub struct GoursatSolution {
    /// The solution samples.
    pub omega: ScalarField,
    /// Largest defect of the discrete cell relation after the corrector —
    /// the fixed-point residual of the scheme, not the PDE error.
    pub scheme_residual: f64,
}

/// Errors from Goursat problems and residual checkers.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum PdeError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("boundary expression failed to evaluate: {0}")]
    Eval(#[from] EvalError),
    #[error(
        "boundary data disagree at the corner: bottom gives {bottom:.17e}, \
         left gives {left:.17e} (tolerance {tol:.1e})"
    )]
    CornerMismatch { bottom: f64, left: f64, tol: f64 },
    #[error("{axis} boundary has {got} samples but the grid needs {expected}")]
    BoundaryLength {
        axis: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("marching diverged at (u, v) = ({u}, {v}): |ω| = {value:.3e} exceeds {bound}")]
    Divergence {
        u: f64,
        v: f64,
        value: f64,
        bound: f64,
    },
    #[error("curvature grid is not positive at (u, v) = ({u}, {v}): K = {k:.6e}")]
    NonPositiveK { u: f64, v: f64, k: f64 },
}

impl GoursatProblem {
    /// Build a problem from sampled boundary data.
    pub fn from_samples(
        spec: GridSpec,
        bottom: Vec<f64>,
        left: Vec<f64>,
    ) -> Result<GoursatProblem, PdeError> {
        spec.validate()?;
        if bottom.len() != spec.nu {
            return Err(PdeError::BoundaryLength {
                axis: "bottom",
                expected: spec.nu,
                got: bottom.len(),
            });
        }
        if left.len() != spec.nv {
            return Err(PdeError::BoundaryLength {
                axis: "left",
                expected: spec.nv,
                got: left.len(),
            });
        }
        if (bottom[0] - left[0]).abs() > CORNER_TOL {
            return Err(PdeError::CornerMismatch {
                bottom: bottom[0],
                left: left[0],
                tol: CORNER_TOL,
            });
        }
        Ok(GoursatProblem { spec, bottom, left })
    }

    /// Build a problem by sampling boundary expressions `ω(u, v_min) = bu(u)`
    /// and `ω(u_min, v) = bv(v)`. Each expression sees the moving coordinate
    /// in its own variable and the fixed axis value in the other.
    pub fn from_exprs(spec: GridSpec, bu: &Expr, bv: &Expr) -> Result<GoursatProblem, PdeError> {
        spec.validate()?;
        let bottom = (0..spec.nu)
            .map(|i| bu.eval(spec.u_at(i), spec.v_min))
            .collect::<Result<Vec<f64>, _>>()?;
        let left = (0..spec.nv)
            .map(|j| bv.eval(spec.u_min, spec.v_at(j)))
            .collect::<Result<Vec<f64>, _>>()?;
        GoursatProblem::from_samples(spec, bottom, left)
    }
}

/// Solve `ω_uv + cosh ω = 0` with the given characteristic data.
pub fn solve_cosh_gordon(p: &GoursatProblem) -> Result<GoursatSolution, PdeError> {
    march(p, |_, _| 0.0)
}

/// Solve the forced equation `ω_uv + cosh ω = g(u, v)` — the manufactured
/// variant used to verify the marching order of accuracy against a known
/// solution.
pub fn solve_cosh_gordon_with_source(
    p: &GoursatProblem,
    g: impl Fn(f64, f64) -> f64,
) -> Result<GoursatSolution, PdeError> {
    march(p, g)
}

fn march(p: &GoursatProblem, g: impl Fn(f64, f64) -> f64) -> Result<GoursatSolution, PdeError> {
    let spec = p.spec;
    let (h, k) = (spec.du(), spec.dv());
    let mut omega = ScalarField::constant(spec, 0.0);
    for (i, &b) in p.bottom.iter().enumerate() {
        omega.set(i, 0, b);
    }
    for (j, &l) in p.left.iter().enumerate() {
        omega.set(0, j, l);
    }

    let mut scheme_residual: f64 = 0.0;
    for j in 1..spec.nv {
        for i in 1..spec.nu {
            let w = omega.at(i - 1, j);
            let s = omega.at(i, j - 1);
            let sw = omega.at(i - 1, j - 1);
            let gc = g(spec.u_at(i) - 0.5 * h, spec.v_at(j) - 0.5 * k);
            let linear = w + s - sw;
            // Predictor with the extrapolated corner, then one correction.
            let mut new = linear + h * k * (gc - (0.25 * (w + s + sw + linear)).cosh());
            new = linear + h * k * (gc - (0.25 * (w + s + sw + new)).cosh());
            if !new.is_finite() || new.abs() > DIVERGENCE_BOUND {
                return Err(PdeError::Divergence {
                    u: spec.u_at(i),
                    v: spec.v_at(j),
                    value: new,
                    bound: DIVERGENCE_BOUND,
                });
            }
            omega.set(i, j, new);
            let defect = new - linear - h * k * (gc - (0.25 * (w + s + sw + new)).cosh());
            scheme_residual = scheme_residual.max(defect.abs());
        }
    }
    Ok(GoursatSolution {
        omega,
        scheme_residual,
    })
}

/// Residual of the constant-curvature (`K = 1`) form of the Gauss equation,
///
/// ```text
/// a_uv/(1+a²) − a·a_u·a_v/(1+a²)² + 1
/// ```
///
/// on interior nodes (`NaN` elsewhere), with all derivatives of the sampled
/// grid taken by central differences.
pub fn constant_k_residual(a: &ScalarField) -> ScalarField {
    let spec = a.spec;
    let (du, dv) = (spec.du(), spec.dv());
    let mut out = ScalarField::constant(spec, f64::NAN);
    for j in 1..spec.nv - 1 {
        for i in 1..spec.nu - 1 {
            let a0 = a.at(i, j);
            let a_u = (a.at(i + 1, j) - a.at(i - 1, j)) / (2.0 * du);
            let a_v = (a.at(i, j + 1) - a.at(i, j - 1)) / (2.0 * dv);
            let a_uv = (a.at(i + 1, j + 1) - a.at(i - 1, j + 1) - a.at(i + 1, j - 1)
                + a.at(i - 1, j - 1))
                / (4.0 * du * dv);
            let den = 1.0 + a0 * a0;
            out.set(i, j, a_uv / den - a0 * a_u * a_v / (den * den) + 1.0);
        }
    }
    out
}

/// Residual of the minimal-case (`H = 0`, `K > 0`) form of the Gauss
/// equation,
///
/// ```text
/// (log √K)_uu − (log √K)_vv − 2√K
/// ```
///
/// on interior nodes (`NaN` elsewhere). Fails with
/// [`PdeError::NonPositiveK`] if the curvature grid is not strictly
/// positive everywhere.
pub fn minimal_k_residual(k: &ScalarField) -> Result<ScalarField, PdeError> {
    let spec = k.spec;
    for j in 0..spec.nv {
        for i in 0..spec.nu {
            if !(k.at(i, j) > 0.0) {
                return Err(PdeError::NonPositiveK {
                    u: spec.u_at(i),
                    v: spec.v_at(j),
                    k: k.at(i, j),
                });
            }
        }
    }
    let (du, dv) = (spec.du(), spec.dv());
    let w = |i: usize, j: usize| 0.5 * k.at(i, j).ln();
    let mut out = ScalarField::constant(spec, f64::NAN);
    for j in 1..spec.nv - 1 {
        for i in 1..spec.nu - 1 {
            let w_uu = (w(i - 1, j) - 2.0 * w(i, j) + w(i + 1, j)) / (du * du);
            let w_vv = (w(i, j - 1) - 2.0 * w(i, j) + w(i, j + 1)) / (dv * dv);
            out.set(i, j, w_uu - w_vv - 2.0 * k.at(i, j).sqrt());
        }
    }
    Ok(out)
}
