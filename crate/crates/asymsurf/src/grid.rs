//! Uniform rectangular grids over a `(u, v)` parameter rectangle.
//!
//! All field data in this crate (invariants, residuals, frames, positions)
//! lives on uniform tensor grids. Storage is row-major with `v` as the outer
//! (slow) index and `u` as the inner (fast) index — the same order as every
//! CSV artifact — so `data[j*nu + i]` is the node `(uᵢ, vⱼ)`.
//!
//! Numerical conventions, shared by all consumers:
//!
//! * **Derivatives** are second-order central differences in the interior and
//!   second-order one-sided stencils on the boundary. Residual checkers that
//!   advertise clean `O(h²)` convergence instead *mask* boundary nodes (the
//!   value is `NaN` and counted) rather than using one-sided stencils.
//! * **Quadrature** along grid lines is composite Simpson; a prefix ending on
//!   an odd node falls back to a trapezoid on its last cell.
//! * **Resampling** is tensor-product cubic interpolation on the 4-point
//!   stencil around the target (shifted near edges).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Geometry of a uniform grid: the parameter rectangle and node counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Number of nodes along `u` (≥ 2).
    pub nu: usize,
    /// Number of nodes along `v` (≥ 2).
    pub nv: usize,
}

/// Error constructing or validating a grid.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum GridError {
    #[error("degenerate domain: [{u_min}, {u_max}] × [{v_min}, {v_max}]")]
    DegenerateDomain {
        u_min: f64,
        u_max: f64,
        v_min: f64,
        v_max: f64,
    },
    #[error("grid must have at least 2 nodes per axis, got {nu}×{nv}")]
    TooFewNodes { nu: usize, nv: usize },
    #[error("base point ({u0}, {v0}) lies outside the domain")]
    BaseOutsideDomain { u0: f64, v0: f64 },
}

impl GridSpec {
    /// Validate the domain and node counts.
    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.u_min < self.u_max) || !(self.v_min < self.v_max) {
            return Err(GridError::DegenerateDomain {
                u_min: self.u_min,
                u_max: self.u_max,
                v_min: self.v_min,
                v_max: self.v_max,
            });
        }
        if self.nu < 2 || self.nv < 2 {
            return Err(GridError::TooFewNodes {
                nu: self.nu,
                nv: self.nv,
            });
        }
        Ok(())
    }

    /// Grid spacing along `u`.
    #[inline]
    pub fn du(&self) -> f64 {
        (self.u_max - self.u_min) / (self.nu - 1) as f64
    }

    /// Grid spacing along `v`.
    #[inline]
    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / (self.nv - 1) as f64
    }

    /// `u` coordinate of column `i`.
    #[inline]
    pub fn u_at(&self, i: usize) -> f64 {
        self.u_min + self.du() * i as f64
    }

    /// `v` coordinate of row `j`.
    #[inline]
    pub fn v_at(&self, j: usize) -> f64 {
        self.v_min + self.dv() * j as f64
    }

    /// Total node count.
    #[inline]
    pub fn len(&self) -> usize {
        self.nu * self.nv
    }

    /// Whether the grid is empty (never true for a validated spec).
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of node `(i, j)`.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nu && j < self.nv);
        j * self.nu + i
    }

    /// Nearest grid node to the point `(u0, v0)`.
    ///
    /// Base points are snapped to the grid so that initial rows/columns of
    /// the various marching schemes coincide with grid lines; callers report
    /// the snapped coordinates.
    pub fn nearest_node(&self, u0: f64, v0: f64) -> Result<(usize, usize), GridError> {
        let tol_u = 1e-9 * (self.u_max - self.u_min).abs();
        let tol_v = 1e-9 * (self.v_max - self.v_min).abs();
        if u0 < self.u_min - tol_u
            || u0 > self.u_max + tol_u
            || v0 < self.v_min - tol_v
            || v0 > self.v_max + tol_v
        {
            return Err(GridError::BaseOutsideDomain { u0, v0 });
        }
        let i = ((u0 - self.u_min) / self.du()).round().clamp(0.0, (self.nu - 1) as f64);
        let j = ((v0 - self.v_min) / self.dv()).round().clamp(0.0, (self.nv - 1) as f64);
        Ok((i as usize, j as usize))
    }
}

/// A scalar field sampled on a [`GridSpec`].
///
/// `NaN` entries mark masked nodes (e.g. boundary nodes of residual fields);
/// the aggregation helpers skip them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub data: Vec<f64>,
}

impl ScalarField {
    /// Field filled with a constant.
    pub fn constant(spec: GridSpec, value: f64) -> ScalarField {
        ScalarField {
            spec,
            data: vec![value; spec.len()],
        }
    }

    /// Sample a function at every node.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> ScalarField {
        let mut data = Vec::with_capacity(spec.len());
        for j in 0..spec.nv {
            for i in 0..spec.nu {
                data.push(f(spec.u_at(i), spec.v_at(j)));
            }
        }
        ScalarField { spec, data }
    }

    /// Sample a fallible function at every node, reporting the first failure
    /// with its grid coordinates.
    pub fn try_from_fn<E>(
        spec: GridSpec,
        mut f: impl FnMut(f64, f64) -> Result<f64, E>,
    ) -> Result<ScalarField, (E, f64, f64)> {
        let mut data = Vec::with_capacity(spec.len());
        for j in 0..spec.nv {
            for i in 0..spec.nu {
                let (u, v) = (spec.u_at(i), spec.v_at(j));
                data.push(f(u, v).map_err(|e| (e, u, v))?);
            }
        }
        Ok(ScalarField { spec, data })
    }

    /// Value at node `(i, j)`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.spec.idx(i, j)]
    }

    /// Set the value at node `(i, j)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.spec.idx(i, j);
        self.data[k] = value;
    }

    /// Apply a function to every node value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            spec: self.spec,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Combine two fields node-wise.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.spec, other.spec, "field shapes must match");
        ScalarField {
            spec: self.spec,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// ∂/∂u by second-order differences (central interior, one-sided edges).
    pub fn d_du(&self) -> ScalarField {
        let s = self.spec;
        let h = s.du();
        let mut out = ScalarField::constant(s, 0.0);
        for j in 0..s.nv {
            for i in 0..s.nu {
                out.set(i, j, stencil_d1(|k| self.at(k, j), i, s.nu, h));
            }
        }
        out
    }

    /// ∂/∂v by second-order differences (central interior, one-sided edges).
    pub fn d_dv(&self) -> ScalarField {
        let s = self.spec;
        let h = s.dv();
        let mut out = ScalarField::constant(s, 0.0);
        for j in 0..s.nv {
            for i in 0..s.nu {
                out.set(i, j, stencil_d1(|k| self.at(i, k), j, s.nv, h));
            }
        }
        out
    }

    /// Largest finite absolute value (skips `NaN`-masked nodes).
    pub fn max_abs_finite(&self) -> f64 {
        self.data
            .iter()
            .filter(|x| x.is_finite())
            .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
    }

    /// Number of `NaN`-masked nodes.
    pub fn masked_count(&self) -> usize {
        self.data.iter().filter(|x| x.is_nan()).count()
    }

    /// Minimum and maximum over finite values; `None` if all nodes are masked.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let mut it = self.data.iter().copied().filter(|x| x.is_finite());
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), x| (lo.min(x), hi.max(x))))
    }

    /// Cubic tensor-product interpolation at an arbitrary in-domain point.
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        let s = self.spec;
        let x = (u - s.u_min) / s.du();
        let y = (v - s.v_min) / s.dv();
        // Interpolate along u within the 4 rows around y, then across them.
        let j0 = stencil_start(y, s.nv);
        let mut col = [0.0; 4];
        for (t, cell) in col.iter_mut().enumerate() {
            let j = j0 + t;
            let i0 = stencil_start(x, s.nu);
            let row = [
                self.at(i0, j),
                self.at((i0 + 1).min(s.nu - 1), j),
                self.at((i0 + 2).min(s.nu - 1), j),
                self.at((i0 + 3).min(s.nu - 1), j),
            ];
            *cell = lagrange4(&row, x - i0 as f64, s.nu);
        }
        lagrange4(&col, y - j0 as f64, s.nv)
    }
}

/// Second-order first-derivative stencil along one axis: central in the
/// interior, one-sided (3-point) at the two ends; falls back to the plain
/// difference when the axis has only 2 nodes.
#[inline]
fn stencil_d1(f: impl Fn(usize) -> f64, k: usize, n: usize, h: f64) -> f64 {
    if n == 2 {
        return (f(1) - f(0)) / h;
    }
    if k == 0 {
        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h)
    } else if k == n - 1 {
        (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h)
    } else {
        (f(k + 1) - f(k - 1)) / (2.0 * h)
    }
}

/// First index of the 4-point interpolation stencil around coordinate `x`
/// (in index space), clamped into the grid.
#[inline]
fn stencil_start(x: f64, n: usize) -> usize {
    if n < 4 {
        return 0;
    }
    let cell = x.floor() as isize;
    (cell - 1).clamp(0, n as isize - 4) as usize
}

/// Cubic Lagrange interpolation on up to 4 equispaced samples; `t` is the
/// offset (in cells) from the first sample. Degrades gracefully on short
/// axes (linear for 2 nodes, quadratic for 3).
#[inline]
fn lagrange4(p: &[f64; 4], t: f64, n: usize) -> f64 {
    match n {
        0 | 1 => p[0],
        2 => p[0] + (p[1] - p[0]) * t,
        3 => {
            let l0 = (t - 1.0) * (t - 2.0) / 2.0;
            let l1 = -t * (t - 2.0);
            let l2 = t * (t - 1.0) / 2.0;
            p[0] * l0 + p[1] * l1 + p[2] * l2
        }
        _ => {
            let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
            let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
            let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
            let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
            p[0] * l0 + p[1] * l1 + p[2] * l2 + p[3] * l3
        }
    }
}

/// Cubic interpolation of a uniformly spaced 1-D sample array: `vals[k]` is
/// the value at `x0 + k·h`; evaluates at `x` with the same stencil and
/// short-axis degradation rules as [`ScalarField::sample`].
pub fn sample_uniform_cubic(vals: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = vals.len();
    if n == 0 {
        return f64::NAN;
    }
    let t = (x - x0) / h;
    let k0 = stencil_start(t, n);
    let p = [
        vals[k0],
        vals[(k0 + 1).min(n - 1)],
        vals[(k0 + 2).min(n - 1)],
        vals[(k0 + 3).min(n - 1)],
    ];
    lagrange4(&p, t - k0 as f64, n)
}

/// Cumulative integral of equally spaced samples starting at index 0:
/// composite Simpson for prefixes ending on an even node; a prefix ending on
/// an odd node takes the preceding even prefix plus a quadratic (three-point)
/// rule on the last cell, so every prefix is exact on quadratics and carries
/// an `O(h⁴)` local error.
pub fn cumulative_simpson(vals: &[f64], h: f64) -> Vec<f64> {
    let n = vals.len();
    let mut out = vec![0.0; n];
    for k in (2..n).step_by(2) {
        out[k] = out[k - 2] + h / 3.0 * (vals[k - 2] + 4.0 * vals[k - 1] + vals[k]);
    }
    for k in (1..n).step_by(2) {
        out[k] = if k >= 3 || k + 1 < n {
            // ∫ over the prefix's last cell from the parabola through the
            // three nearest nodes (centered for k ≥ 3, right-shifted at k=1).
            if k == 1 {
                h / 12.0 * (5.0 * vals[0] + 8.0 * vals[1] - vals[2])
            } else {
                out[k - 1] + h / 12.0 * (-vals[k - 2] + 8.0 * vals[k - 1] + 5.0 * vals[k])
            }
        } else {
            // Two samples in total: trapezoid is all we have.
            out[k - 1] + h / 2.0 * (vals[k - 1] + vals[k])
        };
    }
    out
}

/// Cumulative integral with the zero anchored at interior index `k0`:
/// entry `k` is `∫` from node `k0` to node `k` (negative of the reverse
/// integral for `k < k0`). Uses [`cumulative_simpson`] on each side.
pub fn cumulative_from(vals: &[f64], h: f64, k0: usize) -> Vec<f64> {
    let n = vals.len();
    assert!(k0 < n);
    let mut out = vec![0.0; n];
    // Right side: ordinary cumulative integral on vals[k0..].
    let right = cumulative_simpson(&vals[k0..], h);
    for (t, val) in right.iter().enumerate() {
        out[k0 + t] = *val;
    }
    // Left side: integrate the reversed prefix and negate.
    let mut rev: Vec<f64> = vals[..=k0].to_vec();
    rev.reverse();
    let left = cumulative_simpson(&rev, h);
    for (t, val) in left.iter().enumerate() {
        out[k0 - t] = -*val;
    }
    out
}
