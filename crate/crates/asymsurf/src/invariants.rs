//! Asymptotic invariants and their compatibility residuals.
//!
//! On a time-like surface whose parameter lines are real asymptotic lines
//! (`L = N = 0`) with `E > 0`, `G < 0`, the geometry is captured by four
//! scalar functions of the unit tangents `x = z_u/√E`, `y = z_v/√−G`:
//!
//! ```text
//! a  = ⟨x, y⟩ = F/(√E √−G)          α = M/(√E √−G)
//! γ₁ = −a_u/((1+a²)√E) + f_v/√−G    γ₂ = a_v/((1+a²)√−G) + f_u/√E
//! ```
//!
//! where `f = ½(log √(1+a²) − log |α|) = −log K^{1/4}`. The curvatures are
//! recovered from the invariants alone: `K = α²/(1+a²)`, `H = aα/(1+a²)`.
//!
//! ## Exact derivatives from 2-jets
//!
//! `a_u, a_v` follow from the jet of the parametrization by the quotient
//! rule. `f_u, f_v` would need third derivatives of `z` via `K`; instead
//! they come from the metric system (a Codazzi consequence)
//!
//! ```text
//! (√E)_v = f_v √E + a f_u √−G        (√−G)_u = −a f_v √E + f_u √−G
//! ```
//!
//! solved for `(f_u, f_v)` — exact whenever the surface genuinely has
//! asymptotic parameter lines, which is a precondition here anyway.
//!
//! ## Residuals
//!
//! [`gauss_residual`], [`codazzi_residual`] and [`system_residual`] measure
//! how well a field of invariants satisfies the structure equations. All
//! derivatives of *field* quantities use second-order central differences;
//! boundary nodes carry `NaN` rather than one-sided values so the advertised
//! `O(h²)` convergence is uniform over reported nodes.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{GridSpec, ScalarField};
use crate::minkowski::mdot;
use crate::surface::{FormDegeneracy, SurfaceDef, SurfaceError};

/// Relative tolerance for `|L|, |N|` against the second-form scale when
/// deciding whether parameters are asymptotic at a point.
pub const EPS_ASYMPTOTIC: f64 = 1e-9;

/// All invariant data at one parameter point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct InvariantPoint {
    /// `a = ⟨x, y⟩ = F/(√E √−G)`.
    pub a: f64,
    /// `α = M/(√E √−G)`; its sign follows the orientation of the normal.
    pub alpha: f64,
    /// `f = ½(log √(1+a²) − log |α|)`.
    pub f: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub sqrt_e: f64,
    pub sqrt_minus_g: f64,
    /// Exact partials of `a`, from jets of the parametrization.
    pub a_u: f64,
    pub a_v: f64,
    /// Exact partials of `f`, from the metric system.
    pub f_u: f64,
    pub f_v: f64,
    /// Geodesic curvature of the `u`-asymptotic line: `γ̄₁ = γ₁ √(1+a²)`.
    pub gamma1_bar: f64,
    /// Geodesic curvature of the `v`-asymptotic line: `γ̄₂ = γ₂ √(1+a²)`.
    pub gamma2_bar: f64,
    /// Normal-curvature datum `ᾱ = α/√(1+a²)`.
    pub alpha_bar: f64,
}

impl InvariantPoint {
    /// Curvatures reconstructed from the invariants: `(K, H)`.
    #[inline]
    pub fn curvatures(&self) -> (f64, f64) {
        kh_from_a_alpha(self.a, self.alpha)
    }
}

/// `K = α²/(1+a²)`, `H = aα/(1+a²)`.
#[inline]
pub fn kh_from_a_alpha(a: f64, alpha: f64) -> (f64, f64) {
    let den = 1.0 + a * a;
    (alpha * alpha / den, a * alpha / den)
}

/// Invariants sampled over a full grid.
#[derive(Clone, Debug)]
pub struct InvariantField {
    pub spec: GridSpec,
    /// Row-major (`v` outer, `u` inner), `spec.len()` entries.
    pub pts: Vec<InvariantPoint>,
}

/// Errors while computing or inverting invariants.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum InvariantError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(
        "parameters are not asymptotic at (u, v) = ({u}, {v}): |L| = {l:.3e}, |N| = {n:.3e} \
         exceed {tol:.3e}"
    )]
    NotAsymptotic { u: f64, v: f64, l: f64, n: f64, tol: f64 },
    #[error("wrong first-form signature at (u, v) = ({u}, {v}): E = {e:.6e}, G = {g:.6e} (need E > 0 > G)")]
    WrongSignature { u: f64, v: f64, e: f64, g: f64 },
    #[error("the two γ formulations disagree at (u, v) = ({u}, {v}) by {delta:.3e}")]
    InconsistentGammas { u: f64, v: f64, delta: f64 },
    #[error("invariant-inversion denominator vanishes (|num| = {num:.3e}, |den| = {den:.3e})")]
    DegenerateDenominator { num: f64, den: f64 },
    #[error("construction requires K > 0 and K - H^2 > 0; got K = {k:.6e}, K - H^2 = {k_minus_h2:.6e}")]
    MethodNotApplicable { k: f64, k_minus_h2: f64 },
    #[error("inverted metric coefficient is not positive: sqrtE = {sqrt_e:.6e}, sqrt(-G) = {sqrt_minus_g:.6e}")]
    NonPositiveResult { sqrt_e: f64, sqrt_minus_g: f64 },
}

/// Compute the invariants of `s` at `(u, v)`.
///
/// `a`, `α` and their first derivatives come from exact jets; `f_u, f_v`
/// from the metric system. Two independent formulations of `γ₁, γ₂` are
/// evaluated and compared as an internal consistency check.
pub fn invariants_at(s: &SurfaceDef, u: f64, v: f64) -> Result<InvariantPoint, InvariantError> {
    let jet = s.jet_at(u, v)?;
    let fc = crate::surface::forms_from_derivatives(jet.z_u, jet.z_v, jet.z_uu, jet.z_uv, jet.z_vv)
        .map_err(|d| match d {
            FormDegeneracy::DependentTangents => SurfaceError::DegeneratePoint { u, v },
            FormDegeneracy::LightLikeNormal => SurfaceError::LightLikeNormal { u, v },
        })?;

    let second_scale = fc.l.abs().max(fc.m.abs()).max(fc.n.abs());
    let tol = EPS_ASYMPTOTIC * second_scale;
    if fc.l.abs() > tol || fc.n.abs() > tol {
        return Err(InvariantError::NotAsymptotic {
            u,
            v,
            l: fc.l.abs(),
            n: fc.n.abs(),
            tol,
        });
    }
    if fc.e <= 0.0 || fc.g >= 0.0 {
        return Err(InvariantError::WrongSignature {
            u,
            v,
            e: fc.e,
            g: fc.g,
        });
    }

    let p = fc.e.sqrt(); // √E
    let q = (-fc.g).sqrt(); // √−G
    let a = fc.f / (p * q);
    let alpha = fc.m / (p * q);
    let one = 1.0 + a * a;
    if alpha.abs() <= f64::EPSILON * second_scale / (p * q) {
        let (k, h) = kh_from_a_alpha(a, alpha);
        return Err(InvariantError::MethodNotApplicable {
            k,
            k_minus_h2: k - h * h,
        });
    }

    // First derivatives of E, F, G from the 2-jet.
    let e_u = 2.0 * mdot(jet.z_uu, jet.z_u);
    let e_v = 2.0 * mdot(jet.z_uv, jet.z_u);
    let g_u = 2.0 * mdot(jet.z_uv, jet.z_v);
    let g_v = 2.0 * mdot(jet.z_vv, jet.z_v);
    let f_der_u = mdot(jet.z_uu, jet.z_v) + mdot(jet.z_u, jet.z_uv);
    let f_der_v = mdot(jet.z_uv, jet.z_v) + mdot(jet.z_u, jet.z_vv);
    let p_u = e_u / (2.0 * p);
    let p_v = e_v / (2.0 * p);
    let q_u = -g_u / (2.0 * q);
    let q_v = -g_v / (2.0 * q);

    let a_u = f_der_u / (p * q) - a * (p_u / p + q_u / q);
    let a_v = f_der_v / (p * q) - a * (p_v / p + q_v / q);

    let f_val = 0.5 * (one.sqrt().ln() - alpha.abs().ln());
    // Solve the metric system for (f_u, f_v).
    let f_v_val = (p_v - a * q_u) / (p * one);
    let f_u_val = (q_u + a * p_v) / (q * one);

    let gamma1 = -a_u / (one * p) + f_v_val / q;
    let gamma2 = a_v / (one * q) + f_u_val / p;

    // Independent formulation in terms of the raw metric derivatives. With
    // f_u, f_v taken from the metric system the two agree identically, so
    // this guards implementation slips rather than input data.
    let gamma1_alt = -(a_u / p + a * q_u / (p * q) - p_v / (p * q)) / one;
    let gamma2_alt = (a_v / q + a * p_v / (p * q) + q_u / (p * q)) / one;
    let delta = (gamma1 - gamma1_alt)
        .abs()
        .max((gamma2 - gamma2_alt).abs());
    if !(delta <= 1e-6 * (1.0 + gamma1.abs() + gamma2.abs())) {
        return Err(InvariantError::InconsistentGammas { u, v, delta });
    }

    let root = one.sqrt();
    Ok(InvariantPoint {
        a,
        alpha,
        f: f_val,
        gamma1,
        gamma2,
        sqrt_e: p,
        sqrt_minus_g: q,
        a_u,
        a_v,
        f_u: f_u_val,
        f_v: f_v_val,
        gamma1_bar: gamma1 * root,
        gamma2_bar: gamma2 * root,
        alpha_bar: alpha / root,
    })
}

/// Evaluate [`invariants_at`] at every grid node of `s`.
pub fn invariant_field(s: &SurfaceDef) -> Result<InvariantField, InvariantError> {
    let spec = s.grid;
    spec.validate().map_err(SurfaceError::from)?;
    let mut pts = Vec::with_capacity(spec.len());
    for j in 0..spec.nv {
        for i in 0..spec.nu {
            pts.push(invariants_at(s, spec.u_at(i), spec.v_at(j))?);
        }
    }
    Ok(InvariantField { spec, pts })
}

impl InvariantField {
    /// The point at node `(i, j)`.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &InvariantPoint {
        &self.pts[self.spec.idx(i, j)]
    }

    /// Extract one component as a scalar field.
    pub fn component(&self, get: impl Fn(&InvariantPoint) -> f64) -> ScalarField {
        ScalarField {
            spec: self.spec,
            data: self.pts.iter().map(get).collect(),
        }
    }
}

/// Central difference in `u` of a component grid at an interior node.
#[inline]
fn cd_u(fld: &InvariantField, get: &impl Fn(&InvariantPoint) -> f64, i: usize, j: usize) -> f64 {
    (get(fld.at(i + 1, j)) - get(fld.at(i - 1, j))) / (2.0 * fld.spec.du())
}

/// Central difference in `v` of a component grid at an interior node.
#[inline]
fn cd_v(fld: &InvariantField, get: &impl Fn(&InvariantPoint) -> f64, i: usize, j: usize) -> f64 {
    (get(fld.at(i, j + 1)) - get(fld.at(i, j - 1))) / (2.0 * fld.spec.dv())
}

/// Mixed central difference at an interior node.
#[inline]
fn cd_uv(fld: &InvariantField, get: &impl Fn(&InvariantPoint) -> f64, i: usize, j: usize) -> f64 {
    (get(fld.at(i + 1, j + 1)) - get(fld.at(i + 1, j - 1)) - get(fld.at(i - 1, j + 1))
        + get(fld.at(i - 1, j - 1)))
        / (4.0 * fld.spec.du() * fld.spec.dv())
}

fn interior_map(
    fld: &InvariantField,
    mut body: impl FnMut(usize, usize) -> f64,
) -> ScalarField {
    let spec = fld.spec;
    let mut out = ScalarField::constant(spec, f64::NAN);
    for j in 1..spec.nv - 1 {
        for i in 1..spec.nu - 1 {
            let r = body(i, j);
            out.set(i, j, r);
        }
    }
    out
}

/// Residual of the Gauss equation in invariant form,
///
/// ```text
/// x(γ₂) − y(γ₁) − 2aγ₁γ₂ − γ₁² + γ₂² − γ₁ x(a)/(1+a²) − γ₂ y(a)/(1+a²)
///   − a_uv/((1+a²)√E√−G) + a·x(a)y(a)/(1+a²)² + α²/(1+a²)
/// ```
///
/// with `x(·) = ∂_u/√E`, `y(·) = ∂_v/√−G` by central differences. Boundary
/// nodes are `NaN`.
pub fn gauss_residual(fld: &InvariantField) -> ScalarField {
    let ga = |p: &InvariantPoint| p.a;
    let g1 = |p: &InvariantPoint| p.gamma1;
    let g2 = |p: &InvariantPoint| p.gamma2;
    interior_map(fld, |i, j| {
        let pt = fld.at(i, j);
        let (p, q) = (pt.sqrt_e, pt.sqrt_minus_g);
        let one = 1.0 + pt.a * pt.a;
        let xa = cd_u(fld, &ga, i, j) / p;
        let ya = cd_v(fld, &ga, i, j) / q;
        let a_uv = cd_uv(fld, &ga, i, j);
        cd_u(fld, &g2, i, j) / p - cd_v(fld, &g1, i, j) / q
            - 2.0 * pt.a * pt.gamma1 * pt.gamma2
            - pt.gamma1 * pt.gamma1
            + pt.gamma2 * pt.gamma2
            - pt.gamma1 * xa / one
            - pt.gamma2 * ya / one
            - a_uv / (one * p * q)
            + pt.a * xa * ya / (one * one)
            + pt.alpha * pt.alpha / one
    })
}

/// Residuals of the two Codazzi equations,
///
/// ```text
/// x(α) = aα·x(a)/(1+a²) + 2α(y(a)/(1+a²) − γ₂)
/// y(α) = aα·y(a)/(1+a²) − 2α(x(a)/(1+a²) + γ₁)
/// ```
///
/// returned as `(first, second)` with `NaN` boundaries.
pub fn codazzi_residual(fld: &InvariantField) -> (ScalarField, ScalarField) {
    let ga = |p: &InvariantPoint| p.a;
    let gal = |p: &InvariantPoint| p.alpha;
    let first = interior_map(fld, |i, j| {
        let pt = fld.at(i, j);
        let (p, q) = (pt.sqrt_e, pt.sqrt_minus_g);
        let one = 1.0 + pt.a * pt.a;
        let xa = cd_u(fld, &ga, i, j) / p;
        let ya = cd_v(fld, &ga, i, j) / q;
        cd_u(fld, &gal, i, j) / p
            - pt.a * pt.alpha * xa / one
            - 2.0 * pt.alpha * (ya / one - pt.gamma2)
    });
    let second = interior_map(fld, |i, j| {
        let pt = fld.at(i, j);
        let (p, q) = (pt.sqrt_e, pt.sqrt_minus_g);
        let one = 1.0 + pt.a * pt.a;
        let xa = cd_u(fld, &ga, i, j) / p;
        let ya = cd_v(fld, &ga, i, j) / q;
        cd_v(fld, &gal, i, j) / q
            - pt.a * pt.alpha * ya / one
            + 2.0 * pt.alpha * (xa / one + pt.gamma1)
    });
    (first, second)
}

/// Residuals of the metric system,
///
/// ```text
/// (√E)_v = f_v √E + a f_u √−G        (√−G)_u = −a f_v √E + f_u √−G
/// ```
///
/// with all derivatives (including `f_u, f_v`) by central differences of the
/// stored grids. Returned as `(first, second)` with `NaN` boundaries.
pub fn system_residual(fld: &InvariantField) -> (ScalarField, ScalarField) {
    let gp = |p: &InvariantPoint| p.sqrt_e;
    let gq = |p: &InvariantPoint| p.sqrt_minus_g;
    let gf = |p: &InvariantPoint| p.f;
    let first = interior_map(fld, |i, j| {
        let pt = fld.at(i, j);
        let f_u = cd_u(fld, &gf, i, j);
        let f_v = cd_v(fld, &gf, i, j);
        cd_v(fld, &gp, i, j) - (f_v * pt.sqrt_e + pt.a * f_u * pt.sqrt_minus_g)
    });
    let second = interior_map(fld, |i, j| {
        let pt = fld.at(i, j);
        let f_u = cd_u(fld, &gf, i, j);
        let f_v = cd_v(fld, &gf, i, j);
        cd_u(fld, &gq, i, j) - (-pt.a * f_v * pt.sqrt_e + f_u * pt.sqrt_minus_g)
    });
    (first, second)
}

/// The invariant data needed to invert for the metric coefficients.
#[derive(Clone, Copy, Debug)]
pub struct InvariantJet {
    pub a: f64,
    pub a_u: f64,
    pub a_v: f64,
    pub f_u: f64,
    pub f_v: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Recover `(√E, √−G)` from invariants and their first derivatives:
///
/// ```text
/// √E  = (a_u a_v + (1+a²)² f_u f_v) / ((1+a²)(−a_v γ₁ + (1+a²) f_v γ₂))
/// √−G = (a_u a_v + (1+a²)² f_u f_v) / ((1+a²)( a_u γ₂ + (1+a²) f_u γ₁))
/// ```
///
/// The formula blows up where numerator and denominator vanish together
/// (e.g. critical points of `f` when `a ≡ 0`); that is reported as
/// [`InvariantError::DegenerateDenominator`], not patched over.
pub fn eg_from_invariants(j: &InvariantJet) -> Result<(f64, f64), InvariantError> {
    let one = 1.0 + j.a * j.a;
    let num = j.a_u * j.a_v + one * one * j.f_u * j.f_v;
    let den_e = one * (-j.a_v * j.gamma1 + one * j.f_v * j.gamma2);
    let den_g = one * (j.a_u * j.gamma2 + one * j.f_u * j.gamma1);
    // Scale built from the numerator's individual terms so cancellation
    // cannot hide a genuine degeneracy.
    let scale = j.a_u.abs() * j.a_v.abs() + one * one * j.f_u.abs() * j.f_v.abs();
    for den in [den_e, den_g] {
        if den.abs() <= 1e-10 * (scale + num.abs()) {
            return Err(InvariantError::DegenerateDenominator {
                num,
                den: den.abs(),
            });
        }
    }
    let sqrt_e = num / den_e;
    let sqrt_minus_g = num / den_g;
    if sqrt_e <= 0.0 || sqrt_minus_g <= 0.0 {
        return Err(InvariantError::NonPositiveResult {
            sqrt_e,
            sqrt_minus_g,
        });
    }
    Ok((sqrt_e, sqrt_minus_g))
}

/// Sign branch for [`ah_from_kh`]: the inversion carries a coupled `±` on
/// both `a` and `α`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Branch {
    #[default]
    Plus,
    Minus,
}

/// Invert `K = α²/(1+a²)`, `H = aα/(1+a²)` to
/// `a = ±H/√(K−H²)`, `α = ±K/√(K−H²)`.
///
/// Requires `K > 0` and `K − H² > 0`.
pub fn ah_from_kh(k: f64, h: f64, branch: Branch) -> Result<(f64, f64), InvariantError> {
    let k_minus_h2 = k - h * h;
    if !(k > 0.0) || !(k_minus_h2 > 0.0) {
        return Err(InvariantError::MethodNotApplicable { k, k_minus_h2 });
    }
    let root = k_minus_h2.sqrt();
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    Ok((sign * h / root, sign * k / root))
}
