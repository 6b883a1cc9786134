//! Closed-form surfaces shared by the unit tests.
//!
//! Four families cover the interesting cases:
//!
//! * [`enneper_pos`] — a cubic ("Enneper-type") surface with `K = 16/Q⁴ > 0`,
//!   `H = 0`, asymptotic parameter lines, `E = −G = Q²/4` where
//!   `Q = 1 − u² + v²`. Already canonically parametrized; the main
//!   round-trip fixture.
//! * [`enneper_neg`] — its negative-curvature sibling, `K = −16/Q⁴ < 0`,
//!   carrying principal parameters (`F = M = 0`); exercises rejection paths.
//! * [`rotational`] — a rotational time-like surface with `K > 0` but
//!   `K − H² < 0` (no real asymptotic directions).
//! * [`lorentz_sphere`] — the unit pseudo-sphere `⟨z, z⟩ = 1`, totally
//!   umbilic with `K = 1`, `|H| = 1`, `K − H² = 0`; the rotated variant has
//!   isotropic (null) parameter lines.

use crate::expr::Expr;
use crate::grid::GridSpec;
use crate::surface::SurfaceDef;

/// 41×41 grid on `[−0.3, 0.3]²`, base at the origin.
pub fn default_grid() -> GridSpec {
    GridSpec {
        u_min: -0.3,
        u_max: 0.3,
        v_min: -0.3,
        v_max: 0.3,
        nu: 41,
        nv: 41,
    }
}

/// Grid for the rotational fixture: `u ∈ [0.1, 0.7]` keeps `cos u > 0`.
pub fn rotational_grid() -> GridSpec {
    GridSpec {
        u_min: 0.1,
        u_max: 0.7,
        v_min: -0.5,
        v_max: 0.5,
        nu: 41,
        nv: 41,
    }
}

fn surf(x: &str, y: &str, z: &str, grid: GridSpec, base: (f64, f64)) -> SurfaceDef {
    SurfaceDef::from_strs(x, y, z, grid, base).expect("fixture expressions parse")
}

/// Positive-curvature cubic surface, canonically parametrized.
pub fn enneper_pos(grid: GridSpec) -> SurfaceDef {
    surf(
        "u^3/6 + u*v^2/2 - u/2",
        "u*v",
        "u^2*v/2 + v^3/6 + v/2",
        grid,
        (0.0, 0.0),
    )
}

/// Negative-curvature cubic surface (`K = −16/(1 − u² + v²)⁴`), principal
/// parameters.
pub fn enneper_neg(grid: GridSpec) -> SurfaceDef {
    surf(
        "v^3/6 + u^2*v/2 - v/2",
        "u^2/2 + v^2/2",
        "u^3/6 + u*v^2/2 + v^3/6 + u/2",
        grid,
        (0.0, 0.0),
    )
}

/// Rotational time-like surface with `K − H² < 0`.
pub fn rotational(grid: GridSpec) -> SurfaceDef {
    let base = (0.5 * (grid.u_min + grid.u_max), 0.5 * (grid.v_min + grid.v_max));
    surf("u", "cos(u)*cosh(v)", "cos(u)*sinh(v)", grid, base)
}

/// Unit Lorentz sphere (pseudo-sphere of space-like radius 1).
pub fn lorentz_sphere(grid: GridSpec) -> SurfaceDef {
    surf(
        "cosh(v)/cosh(u)",
        "tanh(u)",
        "sinh(v)/cosh(u)",
        grid,
        (0.0, 0.0),
    )
}

/// Lorentz sphere after the 45° parameter rotation `u ← u − v`, `v ← u + v`,
/// which makes the parameter lines isotropic (`E = G = 0`).
pub fn lorentz_sphere_rotated(grid: GridSpec) -> SurfaceDef {
    let s = lorentz_sphere(grid);
    s.reparametrized(
        &Expr::parse("u - v").unwrap(),
        &Expr::parse("u + v").unwrap(),
        grid,
        (0.0, 0.0),
    )
}

/// The positive cubic surface with parameters stretched by `u ← 2u` — same
/// geometric surface, no longer canonically parametrized.
pub fn enneper_pos_scaled() -> SurfaceDef {
    let inner = default_grid();
    let grid = GridSpec {
        u_min: 0.5 * inner.u_min,
        u_max: 0.5 * inner.u_max,
        ..inner
    };
    enneper_pos(inner).reparametrized(
        &Expr::parse("2*u").unwrap(),
        &Expr::parse("v").unwrap(),
        grid,
        (0.0, 0.0),
    )
}
