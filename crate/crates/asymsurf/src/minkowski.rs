//! Linear algebra of Minkowski 3-space.
//!
//! The ambient space is ℝ³ equipped with the indefinite scalar product
//!
//! ```text
//! ⟨x, y⟩ = x₁y₁ + x₂y₂ − x₃y₃
//! ```
//!
//! (third coordinate time-like, signature `(+, +, −)`). This module supplies
//! the vector type [`MVec3`] with that product, causal classification, the
//! Lorentzian cross product, small dense 3×3 matrices, and rigid motions
//! (Lorentz transformation plus translation) including their recovery from a
//! pair of adapted frames.
//!
//! ## Orientation and cross-product convention
//!
//! The Lorentzian cross product `x ⊠ y` is defined by the determinant
//! identity `⟨x ⊠ y, z⟩ = det[x, y, z]` (columns `x, y, z`) for all `z`.
//! Concretely `x ⊠ y = η·(x ×ₑ y)` where `×ₑ` is the Euclidean cross product
//! and `η = diag(1, 1, −1)`. With this convention a triple `{z_u, z_v, n}`
//! with `n ∝ z_u ⊠ z_v` automatically satisfies `det[z_u, z_v, n] > 0`, which
//! is the orientation convention used throughout the crate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance band around 0 for classifying computed vectors as light-like.
pub const EPS_CAUSAL: f64 = 1e-12;

/// Componentwise tolerance for the defining relation `AᵀηA = η` of a Lorentz
/// transformation.
pub const EPS_LORENTZ: f64 = 1e-10;

/// Componentwise tolerance for Gram-matrix agreement between two frames that
/// are to be matched by a motion.
pub const EPS_FRAME_GRAM: f64 = 1e-8;

/// A vector in Minkowski 3-space; the third coordinate is the time-like one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MVec3 {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

/// Causal character of a vector under the sign of `⟨x, x⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CausalType {
    /// `⟨x, x⟩ > 0`
    SpaceLike,
    /// `⟨x, x⟩ < 0`
    TimeLike,
    /// `⟨x, x⟩ = 0` within [`EPS_CAUSAL`]
    LightLike,
}

impl MVec3 {
    /// Construct from components.
    #[inline]
    pub const fn new(x1: f64, x2: f64, x3: f64) -> MVec3 {
        MVec3 { x1, x2, x3 }
    }

    /// The zero vector.
    #[inline]
    pub const fn zero() -> MVec3 {
        MVec3::new(0.0, 0.0, 0.0)
    }

    /// Scalar square `⟨x, x⟩` (may be negative).
    #[inline]
    pub fn msq(self) -> f64 {
        mdot(self, self)
    }

    /// Euclidean norm, used only as a numerical size measure (RMS distances,
    /// drift diagnostics) — it is not a Lorentz invariant.
    #[inline]
    pub fn euclid_norm(self) -> f64 {
        (self.x1 * self.x1 + self.x2 * self.x2 + self.x3 * self.x3).sqrt()
    }

    /// Componentwise maximum absolute value.
    #[inline]
    pub fn max_abs(self) -> f64 {
        self.x1.abs().max(self.x2.abs()).max(self.x3.abs())
    }
}

impl std::ops::Add for MVec3 {
    type Output = MVec3;
    #[inline]
    fn add(self, o: MVec3) -> MVec3 {
        MVec3::new(self.x1 + o.x1, self.x2 + o.x2, self.x3 + o.x3)
    }
}

impl std::ops::Sub for MVec3 {
    type Output = MVec3;
    #[inline]
    fn sub(self, o: MVec3) -> MVec3 {
        MVec3::new(self.x1 - o.x1, self.x2 - o.x2, self.x3 - o.x3)
    }
}

impl std::ops::Neg for MVec3 {
    type Output = MVec3;
    #[inline]
    fn neg(self) -> MVec3 {
        MVec3::new(-self.x1, -self.x2, -self.x3)
    }
}

impl std::ops::Mul<f64> for MVec3 {
    type Output = MVec3;
    #[inline]
    fn mul(self, c: f64) -> MVec3 {
        MVec3::new(self.x1 * c, self.x2 * c, self.x3 * c)
    }
}

/// The Minkowski scalar product `x₁y₁ + x₂y₂ − x₃y₃`.
#[inline]
pub fn mdot(x: MVec3, y: MVec3) -> f64 {
    x.x1 * y.x1 + x.x2 * y.x2 - x.x3 * y.x3
}

/// Causal classification of `x` by the sign of `⟨x, x⟩`, with the default
/// light-like band [`EPS_CAUSAL`].
#[inline]
pub fn causal_type(x: MVec3) -> CausalType {
    causal_type_with_eps(x, EPS_CAUSAL)
}

/// Causal classification with an explicit light-like tolerance band.
#[inline]
pub fn causal_type_with_eps(x: MVec3, eps: f64) -> CausalType {
    let s = x.msq();
    if s.abs() <= eps {
        CausalType::LightLike
    } else if s > 0.0 {
        CausalType::SpaceLike
    } else {
        CausalType::TimeLike
    }
}

/// The Lorentzian cross product: the unique `w` with `⟨w, z⟩ = det[x, y, z]`
/// (columns) for all `z`. Bilinear, antisymmetric, and Minkowski-orthogonal
/// to both arguments.
#[inline]
pub fn mcross(x: MVec3, y: MVec3) -> MVec3 {
    // η · (x ×ₑ y): Euclidean cross product with the time component negated.
    MVec3::new(
        x.x2 * y.x3 - x.x3 * y.x2,
        x.x3 * y.x1 - x.x1 * y.x3,
        -(x.x1 * y.x2 - x.x2 * y.x1),
    )
}

/// Determinant of the matrix with columns `x, y, z`.
#[inline]
pub fn det_columns(x: MVec3, y: MVec3, z: MVec3) -> f64 {
    x.x1 * (y.x2 * z.x3 - y.x3 * z.x2) - y.x1 * (x.x2 * z.x3 - x.x3 * z.x2)
        + z.x1 * (x.x2 * y.x3 - x.x3 * y.x2)
}

/// A dense 3×3 matrix in row-major layout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    /// The identity matrix.
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// The metric matrix `η = diag(1, 1, −1)`.
    pub const ETA: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]);

    /// Matrix with the given columns.
    pub fn from_columns(c1: MVec3, c2: MVec3, c3: MVec3) -> Mat3 {
        Mat3([
            [c1.x1, c2.x1, c3.x1],
            [c1.x2, c2.x2, c3.x2],
            [c1.x3, c2.x3, c3.x3],
        ])
    }

    /// The `i`-th column as a vector.
    pub fn column(&self, i: usize) -> MVec3 {
        MVec3::new(self.0[0][i], self.0[1][i], self.0[2][i])
    }

    /// Transpose.
    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    /// Determinant.
    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by the adjugate formula; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Mat3> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let inv = |r1: usize, c1: usize, r2: usize, c2: usize| {
            m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
        };
        let adj = Mat3([
            [inv(1, 1, 2, 2), inv(0, 2, 2, 1), inv(0, 1, 1, 2)],
            [inv(1, 2, 2, 0), inv(0, 0, 2, 2), inv(0, 2, 1, 0)],
            [inv(1, 0, 2, 1), inv(0, 1, 2, 0), inv(0, 0, 1, 1)],
        ]);
        Some(adj * (1.0 / d))
    }

    /// Matrix–vector product.
    pub fn mul_vec(&self, x: MVec3) -> MVec3 {
        let m = &self.0;
        MVec3::new(
            m[0][0] * x.x1 + m[0][1] * x.x2 + m[0][2] * x.x3,
            m[1][0] * x.x1 + m[1][1] * x.x2 + m[1][2] * x.x3,
            m[2][0] * x.x1 + m[2][1] * x.x2 + m[2][2] * x.x3,
        )
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }
}

impl std::ops::Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        Mat3(r)
    }
}

impl std::ops::Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, c: f64) -> Mat3 {
        let mut r = self.0;
        for row in &mut r {
            for cell in row {
                *cell *= c;
            }
        }
        Mat3(r)
    }
}

impl std::ops::Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut r = self.0;
        for (row, orow) in r.iter_mut().zip(o.0.iter()) {
            for (cell, oc) in row.iter_mut().zip(orow.iter()) {
                *cell += oc;
            }
        }
        Mat3(r)
    }
}

impl std::ops::Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut r = self.0;
        for (row, orow) in r.iter_mut().zip(o.0.iter()) {
            for (cell, oc) in row.iter_mut().zip(orow.iter()) {
                *cell -= oc;
            }
        }
        Mat3(r)
    }
}

/// An adapted frame `(x, y, n)` at a surface point: `x, n` unit space-like,
/// `y` unit time-like, `⟨x, y⟩ = a`, `n` orthogonal to both.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub x: MVec3,
    pub y: MVec3,
    pub n: MVec3,
}

impl Frame {
    /// Gram matrix of the frame with respect to the Minkowski product.
    pub fn gram(&self) -> Mat3 {
        let f = [self.x, self.y, self.n];
        let mut g = [[0.0; 3]; 3];
        for (i, fi) in f.iter().enumerate() {
            for (j, fj) in f.iter().enumerate() {
                g[i][j] = mdot(*fi, *fj);
            }
        }
        Mat3(g)
    }

    /// Matrix with the frame vectors as columns.
    pub fn as_columns(&self) -> Mat3 {
        Mat3::from_columns(self.x, self.y, self.n)
    }

    /// Orientation determinant `det[x, y, n]`.
    pub fn det(&self) -> f64 {
        det_columns(self.x, self.y, self.n)
    }
}

/// A rigid motion of Minkowski 3-space: `p ↦ A·p + b` with `A` a Lorentz
/// transformation (`AᵀηA = η`) and `b` a translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzMotion {
    /// Linear part; preserves the scalar product of difference vectors.
    pub a: Mat3,
    /// Translation part.
    pub b: MVec3,
}

/// Error from [`motion_from_frames`] when the two frames cannot be related
/// by a Lorentz transformation.
#[derive(Clone, Debug, Error, PartialEq)]
#[error("frames are not Lorentz-congruent: max Gram mismatch {max_gram_mismatch:.3e} exceeds {tolerance:.1e}")]
pub struct FrameIncompatible {
    /// Largest componentwise difference of the two Gram matrices.
    pub max_gram_mismatch: f64,
    /// The tolerance that was applied.
    pub tolerance: f64,
}

impl LorentzMotion {
    /// The identity motion.
    pub fn identity() -> LorentzMotion {
        LorentzMotion {
            a: Mat3::IDENTITY,
            b: MVec3::zero(),
        }
    }

    /// Pure translation.
    pub fn translation(b: MVec3) -> LorentzMotion {
        LorentzMotion {
            a: Mat3::IDENTITY,
            b,
        }
    }

    /// Boost of rapidity `phi` in the `(x₂, x₃)` plane.
    pub fn boost_23(phi: f64) -> LorentzMotion {
        let (c, s) = (phi.cosh(), phi.sinh());
        LorentzMotion {
            a: Mat3([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, s, c]]),
            b: MVec3::zero(),
        }
    }

    /// Boost of rapidity `phi` in the `(x₁, x₃)` plane.
    pub fn boost_13(phi: f64) -> LorentzMotion {
        let (c, s) = (phi.cosh(), phi.sinh());
        LorentzMotion {
            a: Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [s, 0.0, c]]),
            b: MVec3::zero(),
        }
    }

    /// Euclidean rotation by `theta` in the space-like `(x₁, x₂)` plane.
    pub fn rotation_12(theta: f64) -> LorentzMotion {
        let (c, s) = (theta.cos(), theta.sin());
        LorentzMotion {
            a: Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]),
            b: MVec3::zero(),
        }
    }

    /// Apply to a point (`A·p + b`).
    #[inline]
    pub fn apply(&self, p: MVec3) -> MVec3 {
        self.a.mul_vec(p) + self.b
    }

    /// Apply the linear part only (for tangent vectors).
    #[inline]
    pub fn apply_vec(&self, x: MVec3) -> MVec3 {
        self.a.mul_vec(x)
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &LorentzMotion) -> LorentzMotion {
        LorentzMotion {
            a: self.a * other.a,
            b: self.a.mul_vec(other.b) + self.b,
        }
    }

    /// Inverse motion; uses the Lorentz identity `A⁻¹ = η·Aᵀ·η`.
    pub fn inverse(&self) -> LorentzMotion {
        let a_inv = Mat3::ETA * self.a.transpose() * Mat3::ETA;
        LorentzMotion {
            a: a_inv,
            b: -a_inv.mul_vec(self.b),
        }
    }

    /// Largest componentwise violation of `AᵀηA = η`.
    pub fn lorentz_defect(&self) -> f64 {
        (self.a.transpose() * Mat3::ETA * self.a - Mat3::ETA).max_abs()
    }

    /// Whether the linear part satisfies `AᵀηA = η` within [`EPS_LORENTZ`].
    pub fn is_lorentz(&self) -> bool {
        self.lorentz_defect() <= EPS_LORENTZ
    }
}

/// Recover the rigid motion mapping the source frame at `zs` onto the target
/// frame at `zt`: `A = Ft·Fs⁻¹` with `Fs⁻¹ = Gram⁻¹·Fsᵀ·η`, and
/// `b = zt − A·zs`.
///
/// The two frames must have matching Gram matrices (same `⟨x,y⟩ = a`, unit
/// lengths, orthogonality pattern) within [`EPS_FRAME_GRAM`]; otherwise no
/// Lorentz transformation can map one to the other and
/// [`FrameIncompatible`] is returned.
pub fn motion_from_frames(
    fs: &Frame,
    zs: MVec3,
    ft: &Frame,
    zt: MVec3,
) -> Result<LorentzMotion, FrameIncompatible> {
    let gs = fs.gram();
    let gt = ft.gram();
    let mismatch = (gs - gt).max_abs();
    if mismatch > EPS_FRAME_GRAM {
        return Err(FrameIncompatible {
            max_gram_mismatch: mismatch,
            tolerance: EPS_FRAME_GRAM,
        });
    }
    let ms = fs.as_columns();
    let mt = ft.as_columns();
    // Fsᵀ·η·Fs = Gram  ⟹  Fs⁻¹ = Gram⁻¹·Fsᵀ·η; the Gram matrix of an adapted
    // frame is invertible (det = −(1+a²) ≠ 0).
    let gram_inv = gs.inverse().ok_or(FrameIncompatible {
        max_gram_mismatch: f64::INFINITY,
        tolerance: EPS_FRAME_GRAM,
    })?;
    let fs_inv = gram_inv * ms.transpose() * Mat3::ETA;
    let a = mt * fs_inv;
    LorentzMotion {
        a,
        b: zt - a.mul_vec(zs),
    }
    .into_checked()
}

impl LorentzMotion {
    fn into_checked(self) -> Result<LorentzMotion, FrameIncompatible> {
        if self.is_lorentz() {
            Ok(self)
        } else {
            Err(FrameIncompatible {
                max_gram_mismatch: self.lorentz_defect(),
                tolerance: EPS_LORENTZ,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const E1: MVec3 = MVec3::new(1.0, 0.0, 0.0);
    const E2: MVec3 = MVec3::new(0.0, 1.0, 0.0);
    const E3: MVec3 = MVec3::new(0.0, 0.0, 1.0);

    #[test]
    fn scalar_product_signature() {
        assert_eq!(mdot(E1, E1), 1.0);
        assert_eq!(mdot(E3, E3), -1.0);
        assert_eq!(mdot(MVec3::new(1.0, 0.0, 1.0), MVec3::new(1.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn causal_classification() {
        assert_eq!(causal_type(E1), CausalType::SpaceLike);
        assert_eq!(causal_type(E3), CausalType::TimeLike);
        assert_eq!(causal_type(MVec3::new(3.0, 4.0, 5.0)), CausalType::LightLike);
    }

    #[test]
    fn cross_product_basis_cases() {
        assert_eq!(mcross(E1, E2), MVec3::new(0.0, 0.0, -1.0));
        assert_eq!(mcross(E2, E3), MVec3::new(1.0, 0.0, 0.0));
        let x = MVec3::new(0.3, -1.2, 0.7);
        assert_eq!(mcross(x, x), MVec3::zero());
    }

    #[test]
    fn cross_product_satisfies_determinant_identity() {
        // ⟨x ⊠ y, z⟩ = det[x, y, z] on a batch of deterministic triples.
        let pts = [
            MVec3::new(0.3, -0.7, 1.1),
            MVec3::new(-1.4, 0.2, 0.5),
            MVec3::new(0.9, 1.3, -0.6),
            MVec3::new(2.0, -0.1, 0.4),
            MVec3::new(-0.8, 0.6, 1.9),
        ];
        for &x in &pts {
            for &y in &pts {
                for &z in &pts {
                    let lhs = mdot(mcross(x, y), z);
                    let rhs = det_columns(x, y, z);
                    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn cross_product_is_orthogonal_to_arguments() {
        let x = MVec3::new(0.4, -1.1, 0.9);
        let y = MVec3::new(1.3, 0.2, -0.5);
        let w = mcross(x, y);
        assert_abs_diff_eq!(mdot(w, x), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mdot(w, y), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn boosts_and_rotations_preserve_the_product() {
        let motions = [
            LorentzMotion::boost_23(0.3),
            LorentzMotion::boost_13(-0.9),
            LorentzMotion::rotation_12(1.1),
            LorentzMotion::boost_23(0.5)
                .compose(&LorentzMotion::rotation_12(-0.4))
                .compose(&LorentzMotion::boost_13(0.2)),
        ];
        let x = MVec3::new(0.7, -0.2, 1.4);
        let y = MVec3::new(-1.0, 0.8, 0.3);
        for m in &motions {
            assert!(m.is_lorentz(), "defect {}", m.lorentz_defect());
            assert_abs_diff_eq!(
                mdot(m.apply_vec(x), m.apply_vec(y)),
                mdot(x, y),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn motion_inverse_composes_to_identity() {
        let m = LorentzMotion {
            a: LorentzMotion::boost_23(0.7)
                .compose(&LorentzMotion::rotation_12(0.9))
                .a,
            b: MVec3::new(1.0, 2.0, 3.0),
        };
        let id = m.compose(&m.inverse());
        assert!((id.a - Mat3::IDENTITY).max_abs() < 1e-12);
        assert!(id.b.max_abs() < 1e-12);
    }

    #[test]
    fn motion_from_identical_frames_is_identity() {
        let f = Frame { x: E1, y: E3, n: -E2 };
        let m = motion_from_frames(&f, MVec3::zero(), &f, MVec3::zero()).unwrap();
        assert!((m.a - Mat3::IDENTITY).max_abs() < 1e-12);
        assert!(m.b.max_abs() < 1e-12);
    }

    #[test]
    fn motion_from_frames_recovers_known_motion() {
        let motion = LorentzMotion::boost_23(0.3).compose(&LorentzMotion::translation(
            MVec3::new(0.4, -1.0, 2.0),
        ));
        // Build a non-orthonormal but adapted source frame (a = 0.75).
        let a0: f64 = 0.75;
        let fs = Frame {
            x: E1,
            y: MVec3::new(a0, 0.0, (1.0 + a0 * a0).sqrt()),
            n: MVec3::new(0.0, -1.0, 0.0),
        };
        let zs = MVec3::new(0.3, 0.1, -0.2);
        let ft = Frame {
            x: motion.apply_vec(fs.x),
            y: motion.apply_vec(fs.y),
            n: motion.apply_vec(fs.n),
        };
        let zt = motion.apply(zs);
        let m = motion_from_frames(&fs, zs, &ft, zt).unwrap();
        assert!((m.a - motion.a).max_abs() < 1e-10);
        assert!((m.b - motion.b).max_abs() < 1e-10);
    }

    #[test]
    fn incompatible_frames_are_rejected() {
        let fs = Frame { x: E1, y: E3, n: -E2 };
        // Different ⟨x, y⟩: cannot be Lorentz-congruent to fs.
        let ft = Frame {
            x: E1,
            y: MVec3::new(0.5, 0.0, (1.25_f64).sqrt()),
            n: -E2,
        };
        let err = motion_from_frames(&fs, MVec3::zero(), &ft, MVec3::zero()).unwrap_err();
        assert!(err.max_gram_mismatch > 0.4);
    }
}
