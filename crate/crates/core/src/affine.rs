//! Rotation / scale / shear factorization of 3x3 transforms.
//!
//! Transforms are written `M = R * P` with `R` a proper rotation and `P` a
//! symmetric positive-definite matrix. The diagonal of `P` is the scale and its
//! off-diagonal entries `(p_xy, p_xz, p_yz)` are the shear.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-9;

/// Rotation, symmetric scale/shear factor and translation of a primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePose {
    pub rotation: Matrix3<f64>,
    pub scale: Vector3<f64>,
    pub shear: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl AffinePose {
    pub fn new(
        rotation: Matrix3<f64>,
        scale: Vector3<f64>,
        shear: Vector3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        check_rotation(&rotation)?;
        check_scale(&scale)?;
        if !shear.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("shear and translation must be finite"));
        }
        Ok(Self {
            rotation,
            scale,
            shear,
            translation,
        })
    }

    /// Factorizes `m` (with `det(m) > 0`) and attaches `t`.
    pub fn from_matrix(m: &Matrix3<f64>, t: &Vector3<f64>) -> Result<Self> {
        let parts = decompose_scale_shear(m)?;
        Ok(Self {
            rotation: parts.rotation,
            scale: parts.scale,
            shear: parts.shear,
            translation: *t,
        })
    }

    pub fn symmetric_part(&self) -> Matrix3<f64> {
        symmetric_from(&self.scale, &self.shear)
    }

    /// The single combined matrix `R * P`.
    pub fn matrix(&self) -> Matrix3<f64> {
        self.rotation * self.symmetric_part()
    }
}

/// Output of [`decompose_scale_shear`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleShear {
    pub rotation: Matrix3<f64>,
    pub scale: Vector3<f64>,
    pub shear: Vector3<f64>,
}

/// Symmetric matrix with `scale` on the diagonal and `shear = (xy, xz, yz)`
/// off the diagonal.
pub fn symmetric_from(scale: &Vector3<f64>, shear: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        scale.x, shear.x, shear.y, //
        shear.x, scale.y, shear.z, //
        shear.y, shear.z, scale.z,
    )
}

/// Polar decomposition `m = R * P`, reported as rotation, diagonal of `P` and
/// off-diagonal of `P`.
pub fn decompose_scale_shear(m: &Matrix3<f64>) -> Result<ScaleShear> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let det = m.determinant();
    let magnitude = m.amax();
    if det <= 0.0 || magnitude == 0.0 || det <= 1e-14 * magnitude.powi(3) {
        return Err(Error::invalid(format!("matrix must have positive determinant, got {det}")));
    }
    let svd = m.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("SVD did not converge".into())),
    };
    let rotation = u * v_t;
    let p = v_t.transpose() * Matrix3::from_diagonal(&svd.singular_values) * v_t;
    let p = (p + p.transpose()) * 0.5;
    Ok(ScaleShear {
        rotation,
        scale: p.diagonal(),
        shear: Vector3::new(p[(0, 1)], p[(0, 2)], p[(1, 2)]),
    })
}

/// Combines a rotation, scale and shear into `M = R * P`, passing `t` through.
pub fn compose_affine(
    rotation: &Matrix3<f64>,
    scale: &Vector3<f64>,
    shear: &Vector3<f64>,
    t: &Vector3<f64>,
) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    check_rotation(rotation)?;
    check_scale(scale)?;
    if !shear.iter().chain(t.iter()).all(|v| v.is_finite()) {
        return Err(Error::invalid("shear and translation must be finite"));
    }
    Ok((rotation * symmetric_from(scale, shear), *t))
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    let err = (r.transpose() * r - Matrix3::identity()).amax();
    if !(err <= ORTHONORMAL_TOL) || r.determinant() <= 0.0 {
        return Err(Error::invalid("rotation must be a proper orthonormal matrix"));
    }
    Ok(())
}

fn check_scale(scale: &Vector3<f64>) -> Result<()> {
    if !scale.iter().all(|a| a.is_finite() && *a > 0.0) {
        return Err(Error::invalid(format!("scales must be positive, got {scale:?}")));
    }
    Ok(())
}
