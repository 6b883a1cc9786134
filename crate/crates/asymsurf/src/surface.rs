//! Parametrized surfaces: fundamental forms, curvatures, classification.
//!
//! A surface arrives as three coordinate expressions `z(u,v) = (z¹, z², z³)`
//! over a rectangular parameter domain. Jets differentiate the parametrization
//! exactly, so the first and second fundamental forms
//!
//! ```text
//! E = ⟨z_u, z_u⟩   F = ⟨z_u, z_v⟩   G = ⟨z_v, z_v⟩
//! L = ⟨n, z_uu⟩    M = ⟨n, z_uv⟩    N = ⟨n, z_vv⟩
//! ```
//!
//! and the curvatures `K = (LN − M²)/(EG − F²)`,
//! `H = (EN − 2FM + GL)/(2(EG − F²))` carry no truncation error.
//!
//! ## Normal convention
//!
//! The unit normal is `n = w/‖w‖` with `w = z_u ⊠ z_v`, with the sign fixed
//! so that `det[z_u, z_v, n] > 0` (positively oriented triple). For a
//! time-like surface (`EG − F² < 0`) the raw `w` already satisfies this; for
//! a space-like surface the sign flips. The sign of `M` — and hence of the
//! invariant `α` downstream — follows deterministically from this choice.
//!
//! ## Classification
//!
//! [`classify_patch`] evaluates the forms over the whole grid and reports
//! which structural conditions hold: time-likeness, `K > 0`, `K − H² > 0`,
//! asymptotic parameter lines (`L = N = 0`), principal lines (`F = M = 0`),
//! isotropic parameters (`E = G = 0`), and the sign conditions `E > 0`,
//! `G < 0`. "Vanishes on the patch" always means `max |·| < 10⁻⁹ · scale`
//! where the scale is the largest coefficient of the same form, so the
//! thresholds are insensitive to global scaling of the surface.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr, Jet2, ParseError};
use crate::grid::{GridError, GridSpec, ScalarField};
use crate::minkowski::{det_columns, mcross, mdot, CausalType, LorentzMotion, MVec3};

/// Relative threshold below which a form coefficient counts as vanishing on
/// a patch.
pub const EPS_VANISH: f64 = 1e-9;

/// A surface given by coordinate expressions plus its parameter rectangle,
/// grid resolution, and base point.
#[derive(Clone, Debug)]
pub struct SurfaceDef {
    /// Coordinate functions `(z¹, z², z³)`; the third is the time-like one.
    pub coords: [Expr; 3],
    /// Parameter rectangle and grid resolution.
    pub grid: GridSpec,
    /// Base point `(u₀, v₀)`, inside the domain.
    pub base: (f64, f64),
}

/// First and second fundamental form coefficients at a point, together with
/// the oriented unit normal.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FormCoefficients {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub l: f64,
    pub m: f64,
    pub n: f64,
    /// Oriented unit normal (`det[z_u, z_v, normal] > 0`).
    pub normal: MVec3,
}

/// Gauss and mean curvature at a point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvaturePair {
    pub k: f64,
    pub h: f64,
    /// `K − H²`; its sign decides whether the asymptotic-line machinery
    /// applies (it must be positive).
    pub k_minus_h2: f64,
}

/// Position and derivative vectors of the parametrization at one point.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceJet {
    pub z: MVec3,
    pub z_u: MVec3,
    pub z_v: MVec3,
    pub z_uu: MVec3,
    pub z_uv: MVec3,
    pub z_vv: MVec3,
}

/// Errors from surface evaluation and classification.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum SurfaceError {
    #[error("expression error at (u, v) = ({u}, {v}): {source}")]
    Eval {
        u: f64,
        v: f64,
        #[source]
        source: EvalError,
    },
    #[error("degenerate point at (u, v) = ({u}, {v}): z_u, z_v are linearly dependent")]
    DegeneratePoint { u: f64, v: f64 },
    #[error("light-like normal direction at (u, v) = ({u}, {v}): cannot normalize")]
    LightLikeNormal { u: f64, v: f64 },
    #[error("singular first form: |EG - F^2| = {den:.3e} below threshold")]
    SingularMetric { den: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("surface definition error: {0}")]
    Definition(String),
    #[error("no grid node could be evaluated; first failure: {first}")]
    AllNodesFailed { first: String },
}

impl SurfaceDef {
    /// Build a surface from already-parsed coordinate expressions.
    pub fn new(coords: [Expr; 3], grid: GridSpec, base: (f64, f64)) -> Result<SurfaceDef, SurfaceError> {
        grid.validate()?;
        let (u0, v0) = base;
        if u0 < grid.u_min || u0 > grid.u_max || v0 < grid.v_min || v0 > grid.v_max {
            return Err(SurfaceError::Grid(GridError::BaseOutsideDomain { u0, v0 }));
        }
        Ok(SurfaceDef { coords, grid, base })
    }

    /// Parse the three coordinate expressions from strings.
    pub fn from_strs(
        x: &str,
        y: &str,
        z: &str,
        grid: GridSpec,
        base: (f64, f64),
    ) -> Result<SurfaceDef, ParseError> {
        Ok(SurfaceDef {
            coords: [Expr::parse(x)?, Expr::parse(y)?, Expr::parse(z)?],
            grid,
            base,
        })
    }

    /// Evaluate the parametrization with exact derivatives at `(u, v)`.
    pub fn jet_at(&self, u: f64, v: f64) -> Result<SurfaceJet, SurfaceError> {
        let mut jets = [Jet2::default(); 3];
        for (slot, e) in jets.iter_mut().zip(&self.coords) {
            *slot = e
                .eval_jet2(u, v)
                .map_err(|source| SurfaceError::Eval { u, v, source })?;
        }
        let pick = |f: fn(&Jet2) -> f64| MVec3::new(f(&jets[0]), f(&jets[1]), f(&jets[2]));
        Ok(SurfaceJet {
            z: pick(|j| j.val),
            z_u: pick(|j| j.d_u),
            z_v: pick(|j| j.d_v),
            z_uu: pick(|j| j.d_uu),
            z_uv: pick(|j| j.d_uv),
            z_vv: pick(|j| j.d_vv),
        })
    }

    /// Positions at all grid nodes, row-major (`v` outer, `u` inner).
    pub fn sample_positions(&self) -> Result<Vec<MVec3>, SurfaceError> {
        let s = self.grid;
        let mut out = Vec::with_capacity(s.len());
        for j in 0..s.nv {
            for i in 0..s.nu {
                let (u, v) = (s.u_at(i), s.v_at(j));
                out.push(self.jet_at(u, v)?.z);
            }
        }
        Ok(out)
    }

    /// The image surface under a rigid motion: coordinate expressions are
    /// recombined linearly with the motion's matrix entries as literals.
    pub fn transformed(&self, m: &LorentzMotion) -> SurfaceDef {
        let lin = |row: [f64; 3], t: f64| -> Expr {
            let term = |c: f64, e: &Expr| {
                Expr::Bin(
                    crate::expr::BinOp::Mul,
                    Box::new(Expr::Num(c)),
                    Box::new(e.clone()),
                )
            };
            let mut acc = term(row[0], &self.coords[0]);
            for k in 1..3 {
                acc = Expr::Bin(
                    crate::expr::BinOp::Add,
                    Box::new(acc),
                    Box::new(term(row[k], &self.coords[k])),
                );
            }
            Expr::Bin(
                crate::expr::BinOp::Add,
                Box::new(acc),
                Box::new(Expr::Num(t)),
            )
        };
        SurfaceDef {
            coords: [
                lin(m.a.0[0], m.b.x1),
                lin(m.a.0[1], m.b.x2),
                lin(m.a.0[2], m.b.x3),
            ],
            grid: self.grid,
            base: self.base,
        }
    }

    /// Substitute new parameter expressions `u ← pu(u,v)`, `v ← pv(u,v)` into
    /// all three coordinates and install a new grid/base.
    pub fn reparametrized(
        &self,
        pu: &Expr,
        pv: &Expr,
        grid: GridSpec,
        base: (f64, f64),
    ) -> SurfaceDef {
        SurfaceDef {
            coords: [
                self.coords[0].substitute(pu, pv),
                self.coords[1].substitute(pu, pv),
                self.coords[2].substitute(pu, pv),
            ],
            grid,
            base,
        }
    }
}

/// Forms from raw derivative vectors. Shared by the exact (jet) path and the
/// finite-difference path for reconstructed position grids.
pub fn forms_from_derivatives(
    z_u: MVec3,
    z_v: MVec3,
    z_uu: MVec3,
    z_uv: MVec3,
    z_vv: MVec3,
) -> Result<FormCoefficients, FormDegeneracy> {
    let w = mcross(z_u, z_v);
    let wsq = mdot(w, w);
    let scale = z_u.max_abs().max(z_v.max_abs());
    if w.max_abs() <= 1e-14 * scale * scale {
        return Err(FormDegeneracy::DependentTangents);
    }
    if wsq.abs() <= 1e-14 * (scale * scale) * (scale * scale) {
        return Err(FormDegeneracy::LightLikeNormal);
    }
    // Orient so that det[z_u, z_v, n] = ⟨w, n⟩ > 0: divide by the *signed*
    // square root of ⟨w, w⟩.
    let normal = w * (wsq.signum() / wsq.abs().sqrt());
    Ok(FormCoefficients {
        e: mdot(z_u, z_u),
        f: mdot(z_u, z_v),
        g: mdot(z_v, z_v),
        l: mdot(normal, z_uu),
        m: mdot(normal, z_uv),
        n: mdot(normal, z_vv),
        normal,
    })
}

/// Degeneracies detectable from the derivative vectors alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormDegeneracy {
    /// `z_u`, `z_v` linearly dependent (rank < 2).
    DependentTangents,
    /// `z_u ⊠ z_v` is light-like; no unit normal exists.
    LightLikeNormal,
}

/// Fundamental forms of `s` at `(u, v)`, differentiated exactly.
pub fn forms_at(s: &SurfaceDef, u: f64, v: f64) -> Result<FormCoefficients, SurfaceError> {
    let jet = s.jet_at(u, v)?;
    forms_from_derivatives(jet.z_u, jet.z_v, jet.z_uu, jet.z_uv, jet.z_vv).map_err(|d| match d {
        FormDegeneracy::DependentTangents => SurfaceError::DegeneratePoint { u, v },
        FormDegeneracy::LightLikeNormal => SurfaceError::LightLikeNormal { u, v },
    })
}

/// Gauss and mean curvature from form coefficients.
pub fn curvatures(f: &FormCoefficients) -> Result<CurvaturePair, SurfaceError> {
    let den = f.e * f.g - f.f * f.f;
    let scale = (f.e * f.e).max(f.f * f.f).max(f.g * f.g);
    if den.abs() < 1e-14 * scale {
        return Err(SurfaceError::SingularMetric { den });
    }
    let k = (f.l * f.n - f.m * f.m) / den;
    let h = (f.e * f.n - 2.0 * f.f * f.m + f.g * f.l) / (2.0 * den);
    Ok(CurvaturePair {
        k,
        h,
        k_minus_h2: k - h * h,
    })
}

/// Causal character of the tangent plane over a patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PatchCausalType {
    /// `EG − F² < 0` everywhere.
    TimeLike,
    /// `EG − F² > 0` everywhere.
    SpaceLike,
    /// The sign of `EG − F²` changes (or vanishes) on the patch.
    Mixed,
}

/// Extremum pair of a quantity over the evaluated grid nodes.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    fn collect(values: impl Iterator<Item = f64>) -> MinMax {
        let mut mm = MinMax {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        for x in values {
            mm.min = mm.min.min(x);
            mm.max = mm.max.max(x);
        }
        mm
    }

    fn max_abs(&self) -> f64 {
        self.min.abs().max(self.max.abs())
    }
}

/// A node where evaluation failed, with the reason.
#[derive(Clone, Debug, Serialize)]
pub struct PointFailure {
    pub u: f64,
    pub v: f64,
    pub message: String,
}

/// Patch-level classification: extrema of every form coefficient and
/// curvature, structural flags, and the method-applicability verdict.
#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub causal: PatchCausalType,
    pub e: MinMax,
    pub f: MinMax,
    pub g: MinMax,
    pub l: MinMax,
    pub m: MinMax,
    pub n: MinMax,
    pub k: MinMax,
    pub h: MinMax,
    pub k_minus_h2: MinMax,
    /// `L = N = 0`: the parameter lines are asymptotic.
    pub asymptotic: bool,
    /// `F = M = 0`: the parameter lines are principal.
    pub principal: bool,
    /// `E = G = 0`: the parameter lines are isotropic (null).
    pub isotropic: bool,
    /// `K > 0` at every node.
    pub k_positive: bool,
    /// `K − H² > 0` at every node.
    pub k_minus_h2_positive: bool,
    /// `E > 0` and `G < 0` at every node.
    pub signature_ok: bool,
    /// All conditions for the asymptotic-invariant machinery hold.
    pub method_applicable: bool,
    /// First failed condition, when not applicable.
    pub reason: Option<String>,
    /// Nodes that could not be evaluated.
    pub failures: Vec<PointFailure>,
}

/// Evaluate forms and curvatures over the whole grid and classify the patch.
///
/// Per-node evaluation failures are reported in the result (with their grid
/// coordinates) rather than aborting; only a patch with no evaluable node at
/// all is an error.
pub fn classify_patch(s: &SurfaceDef) -> Result<ClassReport, SurfaceError> {
    s.grid.validate()?;
    let spec = s.grid;
    let mut rows: Vec<(FormCoefficients, CurvaturePair)> = Vec::with_capacity(spec.len());
    let mut failures = Vec::new();
    for j in 0..spec.nv {
        for i in 0..spec.nu {
            let (u, v) = (spec.u_at(i), spec.v_at(j));
            match forms_at(s, u, v).and_then(|fc| curvatures(&fc).map(|c| (fc, c))) {
                Ok(pair) => rows.push(pair),
                Err(err) => failures.push(PointFailure {
                    u,
                    v,
                    message: err.to_string(),
                }),
            }
        }
    }
    if rows.is_empty() {
        return Err(SurfaceError::AllNodesFailed {
            first: failures
                .first()
                .map(|f| f.message.clone())
                .unwrap_or_else(|| "empty grid".into()),
        });
    }

    let e = MinMax::collect(rows.iter().map(|(fc, _)| fc.e));
    let f = MinMax::collect(rows.iter().map(|(fc, _)| fc.f));
    let g = MinMax::collect(rows.iter().map(|(fc, _)| fc.g));
    let l = MinMax::collect(rows.iter().map(|(fc, _)| fc.l));
    let m = MinMax::collect(rows.iter().map(|(fc, _)| fc.m));
    let n = MinMax::collect(rows.iter().map(|(fc, _)| fc.n));
    let k = MinMax::collect(rows.iter().map(|(_, c)| c.k));
    let h = MinMax::collect(rows.iter().map(|(_, c)| c.h));
    let kmh2 = MinMax::collect(rows.iter().map(|(_, c)| c.k_minus_h2));
    let det = MinMax::collect(rows.iter().map(|(fc, _)| fc.e * fc.g - fc.f * fc.f));

    let causal = if det.max < 0.0 {
        PatchCausalType::TimeLike
    } else if det.min > 0.0 {
        PatchCausalType::SpaceLike
    } else {
        PatchCausalType::Mixed
    };

    let first_scale = e.max_abs().max(f.max_abs()).max(g.max_abs());
    let second_scale = l.max_abs().max(m.max_abs()).max(n.max_abs());
    let vanishes = |mm: &MinMax, scale: f64| mm.max_abs() < EPS_VANISH * scale;

    let asymptotic = vanishes(&l, second_scale) && vanishes(&n, second_scale);
    let principal = vanishes(&f, first_scale) && vanishes(&m, second_scale);
    let isotropic = vanishes(&e, first_scale) && vanishes(&g, first_scale);
    let k_positive = k.min > 0.0;
    let k_minus_h2_positive = kmh2.min > 0.0;
    let signature_ok = e.min > 0.0 && g.max < 0.0;

    // The first failed condition becomes the human-readable reason. Isotropy
    // is tested early: when E = G = 0 the remaining sign conditions fail for
    // the trivial reason that the parameters are null, which would bury the
    // actual obstruction.
    let mut reason = None;
    if causal != PatchCausalType::TimeLike {
        reason = Some("surface is not time-like on the patch (EG - F^2 >= 0 somewhere)".into());
    } else if isotropic {
        reason = Some("parameters are isotropic (E = G = 0 on the patch)".into());
    } else if !k_positive {
        reason = Some("K <= 0 somewhere on the patch".into());
    } else if !k_minus_h2_positive {
        reason = Some("K - H^2 <= 0 on the patch".into());
    } else if !asymptotic {
        reason = Some("parameters are not asymptotic (L or N does not vanish)".into());
    } else if !signature_ok {
        reason = Some("first-form signature is not E > 0, G < 0".into());
    }
    let method_applicable = reason.is_none();

    Ok(ClassReport {
        causal,
        e,
        f,
        g,
        l,
        m,
        n,
        k,
        h,
        k_minus_h2: kmh2,
        asymptotic,
        principal,
        isotropic,
        k_positive,
        k_minus_h2_positive,
        signature_ok,
        method_applicable,
        reason,
        failures,
    })
}

/// Form and curvature fields of a *numeric* position grid, by second-order
/// central differences. Boundary nodes are masked (`NaN`): one-sided second
/// derivatives would pollute the advertised `O(h²)` accuracy.
///
/// This is the independent check applied to reconstructed patches: their
/// curvatures are recomputed here and compared against the inputs.
#[derive(Clone, Debug)]
pub struct GridForms {
    pub e: ScalarField,
    pub f: ScalarField,
    pub g: ScalarField,
    pub l: ScalarField,
    pub m: ScalarField,
    pub n: ScalarField,
    pub k: ScalarField,
    pub h: ScalarField,
}

/// Compute [`GridForms`] from positions sampled on `spec` (row-major).
pub fn forms_from_positions(spec: GridSpec, z: &[MVec3]) -> GridForms {
    assert_eq!(z.len(), spec.len(), "position count must match the grid");
    let nan = f64::NAN;
    let mut out = GridForms {
        e: ScalarField::constant(spec, nan),
        f: ScalarField::constant(spec, nan),
        g: ScalarField::constant(spec, nan),
        l: ScalarField::constant(spec, nan),
        m: ScalarField::constant(spec, nan),
        n: ScalarField::constant(spec, nan),
        k: ScalarField::constant(spec, nan),
        h: ScalarField::constant(spec, nan),
    };
    let (du, dv) = (spec.du(), spec.dv());
    let at = |i: usize, j: usize| z[spec.idx(i, j)];
    for j in 1..spec.nv - 1 {
        for i in 1..spec.nu - 1 {
            let z_u = (at(i + 1, j) - at(i - 1, j)) * (0.5 / du);
            let z_v = (at(i, j + 1) - at(i, j - 1)) * (0.5 / dv);
            let z_uu = (at(i + 1, j) - at(i, j) * 2.0 + at(i - 1, j)) * (1.0 / (du * du));
            let z_vv = (at(i, j + 1) - at(i, j) * 2.0 + at(i, j - 1)) * (1.0 / (dv * dv));
            let z_uv = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1)
                + at(i - 1, j - 1))
                * (0.25 / (du * dv));
            if let Ok(fc) = forms_from_derivatives(z_u, z_v, z_uu, z_uv, z_vv) {
                out.e.set(i, j, fc.e);
                out.f.set(i, j, fc.f);
                out.g.set(i, j, fc.g);
                out.l.set(i, j, fc.l);
                out.m.set(i, j, fc.m);
                out.n.set(i, j, fc.n);
                if let Ok(c) = curvatures(&fc) {
                    out.k.set(i, j, c.k);
                    out.h.set(i, j, c.h);
                }
            }
        }
    }
    out
}

/// Causal type of a single tangent plane from its first-form determinant.
pub fn tangent_causal_type(fc: &FormCoefficients) -> CausalType {
    let det = fc.e * fc.g - fc.f * fc.f;
    if det < 0.0 {
        CausalType::TimeLike
    } else if det > 0.0 {
        CausalType::SpaceLike
    } else {
        CausalType::LightLike
    }
}

/// Orientation determinant of the tangent frame and normal at a point —
/// exposed for tests of the normal convention.
pub fn orientation_det(jet: &SurfaceJet, fc: &FormCoefficients) -> f64 {
    det_columns(jet.z_u, jet.z_v, fc.normal)
}
