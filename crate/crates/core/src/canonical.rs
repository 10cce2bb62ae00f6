//! Duality between `eps2 > 1` superquadrics and their `2 - eps2` twins, and
//! the warp that folds every fitted record back into `eps2 <= 1`.
//!
//! A cross-section with `eps2 > 1` (diamond-like) is close to a cross-section
//! with `2 - eps2` (square-like) turned by a quarter of a right angle and
//! shrunk by
//!
//! ```text
//! s(eps2) = (sqrt(2)/2 - 1) * eps2 + 2 - sqrt(2)/2
//! ```
//!
//! The warp applies the turn to the template instead of the pose, which keeps
//! unequal `ax` and `ay` as a symmetric shear term rather than averaging them.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::affine::AffinePose;
use crate::error::{Error, Result};
use crate::superquadric::{Superquadric, EPS_MIN};

/// Relative `|ax - ay|` above which the duality is flagged as approximate.
pub const ANISOTROPY_TOL: f64 = 1e-3;

/// Radial shrink factor between a cross-section and its dual.
pub fn duality_scale(eps2: f64) -> f64 {
    (FRAC_1_SQRT_2 - 1.0) * eps2 + 2.0 - FRAC_1_SQRT_2
}

/// The eighth-turn about `z` relating a shape to its dual.
///
/// Taken as a change of frame: the active matrix is `Rz(-pi/4)`, so that
/// `R_d^-1 * diag(a, b, c) * R_d` has `(a - b) / 2` in its xy entries. Both
/// turn directions describe the same surface because the dual template is
/// invariant under quarter turns about `z`.
pub fn duality_rotation() -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -FRAC_PI_4)
}

/// The dual parameter record `{e1, 2 - e2, s*abar, s*abar, az, R*R_d, t}`
/// with `abar = (ax + ay) / 2`. The new `eps2` is floored at [`EPS_MIN`].
pub fn dual(sq: &Superquadric) -> Superquadric {
    let s = duality_scale(sq.eps2());
    let a = sq.scale();
    let radial = s * 0.5 * (a.x + a.y);
    Superquadric::from_parts_unchecked(
        sq.eps1(),
        (2.0 - sq.eps2()).max(EPS_MIN),
        Vector3::new(radial, radial, a.z),
        sq.rotation() * duality_rotation(),
        sq.translation(),
    )
}

/// Relative mismatch `|ax - ay| / max(ax, ay)`.
pub fn anisotropy(sq: &Superquadric) -> f64 {
    let a = sq.scale();
    (a.x - a.y).abs() / a.x.max(a.y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalizationResult {
    /// Record with `eps2 <= 1`. When warped, its scales are the diagonal of
    /// `scale_matrix` and its rotation is `rotation`.
    pub canonical: Superquadric,
    pub warped: bool,
    /// Symmetric scale/shear factor `S_warp`.
    pub scale_matrix: Matrix3<f64>,
    /// `R_new`.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// `|ax - ay| / max(ax, ay)` of the input.
    pub anisotropy: f64,
    /// False when the warp was applied with `anisotropy` above the caller's
    /// tolerance, i.e. the dual only approximates the input.
    pub exact_duality: bool,
}

impl CanonicalizationResult {
    /// Combined `R_new * S_warp` with the translation.
    pub fn matrix(&self) -> Matrix3<f64> {
        self.rotation * self.scale_matrix
    }

    pub fn shear(&self) -> Vector3<f64> {
        let s = &self.scale_matrix;
        Vector3::new(s[(0, 1)], s[(0, 2)], s[(1, 2)])
    }

    pub fn affine(&self) -> AffinePose {
        AffinePose {
            rotation: self.rotation,
            scale: self.scale_matrix.diagonal(),
            shear: self.shear(),
            translation: self.translation,
        }
    }
}

/// Maps `sq` to its representative with `eps2 <= 1`.
///
/// Records already in range come back untouched. Otherwise
/// `S = diag(ax*s, ay*s, az)`, `S_warp = R_d^-1 * S * R_d` and
/// `R_new = R * R_d`. `rel_tol` is the `ax ~ ay` tolerance used for the
/// `exact_duality` diagnostic.
pub fn canonicalize(sq: &Superquadric, rel_tol: f64) -> Result<CanonicalizationResult> {
    let eps2 = sq.eps2();
    if !(eps2 > 0.0 && eps2 <= 2.0) {
        return Err(Error::invalid(format!("eps2 = {eps2} outside (0, 2]")));
    }
    let anisotropy = anisotropy(sq);
    if eps2 <= 1.0 {
        return Ok(CanonicalizationResult {
            canonical: *sq,
            warped: false,
            scale_matrix: Matrix3::from_diagonal(&sq.scale()),
            rotation: sq.rotation_matrix(),
            translation: sq.translation(),
            anisotropy,
            exact_duality: true,
        });
    }

    let s = duality_scale(eps2);
    let a = sq.scale();
    let scale = Matrix3::from_diagonal(&Vector3::new(a.x * s, a.y * s, a.z));
    let rd = duality_rotation();
    let rd_m = rd.to_rotation_matrix().into_inner();
    let warp = rd_m.transpose() * scale * rd_m;
    let warp = (warp + warp.transpose()) * 0.5;
    let rotation = sq.rotation() * rd;

    let canonical = Superquadric::from_parts_unchecked(
        sq.eps1(),
        (2.0 - eps2).clamp(EPS_MIN, 1.0),
        warp.diagonal(),
        rotation,
        sq.translation(),
    );
    Ok(CanonicalizationResult {
        canonical,
        warped: true,
        scale_matrix: warp,
        rotation: rotation.to_rotation_matrix().into_inner(),
        translation: sq.translation(),
        anisotropy,
        exact_duality: anisotropy <= rel_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sq(eps2: f64, ax: f64, ay: f64, az: f64) -> Superquadric {
        Superquadric::new(
            0.6,
            eps2,
            Vector3::new(ax, ay, az),
            UnitQuaternion::from_euler_angles(0.2, 0.4, -0.9),
            Vector3::new(0.1, 0.2, 0.3),
        )
        .unwrap()
    }

    #[test]
    fn shrink_factor_endpoints() {
        assert!((duality_scale(1.0) - 1.0).abs() <= 1e-12);
        assert!((duality_scale(2.0) - FRAC_1_SQRT_2).abs() <= 1e-12);
    }

    #[test]
    fn dual_of_one_and_a_half() {
        let d = dual(&sq(1.5, 0.04, 0.04, 0.1));
        assert_relative_eq!(d.eps2(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(duality_scale(1.5), 0.853_553_4, epsilon = 1e-7);
        assert_relative_eq!(d.scale().x, 0.034_142, epsilon = 1e-6);
        assert_relative_eq!(d.scale().y, 0.034_142, epsilon = 1e-6);
        assert_eq!(d.scale().z, 0.1);
    }

    #[test]
    fn dual_at_circle_only_turns() {
        let input = sq(1.0, 0.04, 0.04, 0.1);
        let d = dual(&input);
        assert_eq!(d.eps2(), 1.0);
        assert_relative_eq!(d.scale(), input.scale(), epsilon = 1e-15);
        assert_relative_eq!(d.rotation().angle_to(&input.rotation()), FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn dual_of_diamond_is_turned_square() {
        // vertex of the diamond |x|+|y|=1 at (1,0) maps onto a corner of the
        // square with half-extent sqrt(2)/2 turned by pi/4
        let d = dual(&Superquadric::centered(1.0, 2.0, Vector3::repeat(1.0)).unwrap());
        assert_eq!(d.eps2(), EPS_MIN);
        assert_relative_eq!(d.scale().x, FRAC_1_SQRT_2, epsilon = 1e-12);
        let corner = d.to_local(&Vector3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(corner.x.abs(), FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(corner.y.abs(), FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn dual_twice_restores_eps2() {
        for &e in &[0.05, 0.3, 1.0, 1.37, 1.9] {
            let input = sq(e, 0.05, 0.05, 0.1);
            let back = dual(&dual(&input));
            assert!((back.eps2() - e).abs() <= 1e-12);
        }
    }

    #[test]
    fn canonical_input_passes_through() {
        let input = sq(0.7, 0.05, 0.03, 0.1);
        let out = canonicalize(&input, ANISOTROPY_TOL).unwrap();
        assert!(!out.warped);
        assert_eq!(out.canonical, input);
        assert_eq!(out.scale_matrix, Matrix3::from_diagonal(&input.scale()));
        assert_eq!(out.rotation, input.rotation_matrix());
    }

    #[test]
    fn warp_with_equal_axes_has_no_shear() {
        let out = canonicalize(&sq(1.5, 0.04, 0.04, 0.1), ANISOTROPY_TOL).unwrap();
        assert!(out.warped && out.exact_duality);
        assert_relative_eq!(
            out.scale_matrix,
            Matrix3::from_diagonal(&Vector3::new(0.034_142_1, 0.034_142_1, 0.1)),
            epsilon = 1e-7
        );
        assert_relative_eq!(out.canonical.eps2(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn warp_with_unequal_axes_has_shear() {
        let out = canonicalize(&sq(1.5, 0.05, 0.03, 0.1), ANISOTROPY_TOL).unwrap();
        assert!(out.warped && !out.exact_duality);
        let m = out.scale_matrix;
        assert_relative_eq!(m[(0, 0)], 0.034_142, epsilon = 1e-6);
        assert_relative_eq!(m[(1, 1)], 0.034_142, epsilon = 1e-6);
        assert_relative_eq!(m[(0, 1)], 0.008_535_5, epsilon = 1e-7);
        assert_relative_eq!(m[(1, 0)], 0.008_535_5, epsilon = 1e-7);
        assert_eq!(m[(2, 2)], 0.1);
        assert_eq!(m.transpose(), m);
        assert!(m.symmetric_eigenvalues().iter().all(|&l| l > 0.0));
        // R_new * S_warp == R * S * R_d
        let s = duality_scale(1.5);
        let expected = sq(1.5, 0.05, 0.03, 0.1).rotation_matrix()
            * Matrix3::from_diagonal(&Vector3::new(0.05 * s, 0.03 * s, 0.1))
            * duality_rotation().to_rotation_matrix().into_inner();
        assert_relative_eq!(out.matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn canonical_range_is_enforced() {
        for &e in &[1.0001, 1.3, 1.99, 2.0] {
            let out = canonicalize(&sq(e, 0.05, 0.05, 0.1), ANISOTROPY_TOL).unwrap();
            assert!(out.canonical.eps2() >= EPS_MIN && out.canonical.eps2() <= 1.0);
        }
    }
}
