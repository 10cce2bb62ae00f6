//! Superquadric primitives: parameter record, inside-outside function and
//! parametric surface sampling.
//!
//! A superquadric in its local frame is the unit level set of
//!
//! ```text
//! F(x, y, z) = ((|x|/ax)^(2/e2) + (|y|/ay)^(2/e2))^(e2/e1) + (|z|/az)^(2/e1)
//! ```
//!
//! and is placed in the world by a rotation followed by a translation.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Smallest admissible shape exponent. `F` is undefined at zero, so boxes and
/// other sharp-edged shapes are evaluated at this floor.
pub const EPS_MIN: f64 = 0.01;
/// Largest admissible shape exponent.
pub const EPS_MAX: f64 = 2.0;

/// Full superquadric parameter record: shape exponents, half-axis scales,
/// orientation and position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Superquadric {
    eps1: f64,
    eps2: f64,
    scale: Vector3<f64>,
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Superquadric {
    pub fn new(
        eps1: f64,
        eps2: f64,
        scale: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        for (name, e) in [("eps1", eps1), ("eps2", eps2)] {
            if !(EPS_MIN..=EPS_MAX).contains(&e) {
                return Err(Error::invalid(format!(
                    "{name} = {e} outside [{EPS_MIN}, {EPS_MAX}]"
                )));
            }
        }
        if !scale.iter().all(|a| a.is_finite() && *a > 0.0) {
            return Err(Error::invalid(format!("scales must be positive and finite, got {scale:?}")));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        let q = rotation.quaternion();
        if !q.coords.iter().all(|v| v.is_finite()) || (q.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("rotation is not a unit quaternion"));
        }
        Ok(Self::from_parts_unchecked(eps1, eps2, scale, rotation, translation))
    }

    /// Superquadric at the origin with identity orientation.
    pub fn centered(eps1: f64, eps2: f64, scale: Vector3<f64>) -> Result<Self> {
        Self::new(eps1, eps2, scale, UnitQuaternion::identity(), Vector3::zeros())
    }

    pub fn sphere(radius: f64) -> Result<Self> {
        Self::centered(1.0, 1.0, Vector3::repeat(radius))
    }

    pub(crate) fn from_parts_unchecked(
        eps1: f64,
        eps2: f64,
        scale: Vector3<f64>,
        rotation: UnitQuaternion<f64>,
        translation: Vector3<f64>,
    ) -> Self {
        Self {
            eps1,
            eps2,
            scale,
            rotation,
            translation,
        }
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn scale(&self) -> Vector3<f64> {
        self.scale
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Same shape and size, posed differently.
    pub fn with_pose(&self, rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Result<Self> {
        Self::new(self.eps1, self.eps2, self.scale, rotation, translation)
    }

    /// `R * diag(scale)`: maps the unit-scale shape onto this instance
    /// (before translation).
    pub fn affine_matrix(&self) -> Matrix3<f64> {
        self.rotation_matrix() * Matrix3::from_diagonal(&self.scale)
    }

    pub fn to_local(&self, p_world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.inverse_transform_vector(&(p_world - self.translation))
    }

    pub fn to_world(&self, p_local: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transform_vector(p_local) + self.translation
    }

    /// Inside-outside function at a point in the local frame: 1 on the
    /// surface, below 1 inside, above 1 outside.
    pub fn inside_outside(&self, p_local: &Vector3<f64>) -> Result<f64> {
        if !p_local.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("point must be finite"));
        }
        let u = p_local.component_div(&self.scale);
        Ok(unit_inside_outside(self.eps1, self.eps2, &u))
    }

    /// `n` surface points in the world frame; see [`sample_unit_surface`].
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<PointCloud> {
        let unit = sample_unit_surface(self.eps1, self.eps2, n, seed)?;
        let m = self.affine_matrix();
        let points = unit.iter().map(|u| m * u + self.translation).collect();
        PointCloud::new(points)
    }
}

/// Inside-outside function of the unit-scale shape; `u` is already divided by
/// the scales.
pub fn unit_inside_outside(eps1: f64, eps2: f64, u: &Vector3<f64>) -> f64 {
    let xy = u.x.abs().powf(2.0 / eps2) + u.y.abs().powf(2.0 / eps2);
    xy.powf(eps2 / eps1) + u.z.abs().powf(2.0 / eps1)
}

fn signed_pow(base: f64, exponent: f64) -> f64 {
    base.abs().powf(exponent).copysign(base)
}

/// Point on the unit-scale surface at latitude `eta` and longitude `omega`.
pub fn unit_surface_point(eps1: f64, eps2: f64, eta: f64, omega: f64) -> Vector3<f64> {
    let ce = signed_pow(eta.cos(), eps1);
    Vector3::new(
        ce * signed_pow(omega.cos(), eps2),
        ce * signed_pow(omega.sin(), eps2),
        signed_pow(eta.sin(), eps1),
    )
}

/// Samples `n` points of the unit-scale superquadric in its local frame.
///
/// Latitudes are split into bands, each band gets a share of the points
/// proportional to its circumference on the sphere, and every point is jittered
/// inside its `(eta, omega)` cell. The continuous jitter keeps samples off the
/// exact poles, so no two cells collapse onto the same pole point.
pub fn sample_unit_surface(eps1: f64, eps2: f64, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    for e in [eps1, eps2] {
        if !(EPS_MIN..=EPS_MAX).contains(&e) {
            return Err(Error::invalid(format!("exponent {e} outside [{EPS_MIN}, {EPS_MAX}]")));
        }
    }

    let bands = ((n as f64 / 2.0).sqrt().round() as usize).clamp(1, n);
    let band_height = PI / bands as f64;
    let counts = allocate(n, bands, |i| (-FRAC_PI_2 + (i as f64 + 0.5) * band_height).cos());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for (band, &count) in counts.iter().enumerate() {
        let cell_width = 2.0 * PI / count.max(1) as f64;
        for col in 0..count {
            let eta = -FRAC_PI_2 + (band as f64 + rng.random::<f64>()) * band_height;
            let omega = -PI + (col as f64 + rng.random::<f64>()) * cell_width;
            points.push(unit_surface_point(eps1, eps2, eta, omega));
        }
    }
    Ok(PointCloud::from_vec_unchecked(points))
}

/// Splits `total` into `parts` integer shares proportional to `weight`
/// (largest remainder, ties to the lower index).
fn allocate(total: usize, parts: usize, weight: impl Fn(usize) -> f64) -> Vec<usize> {
    let weights: Vec<f64> = (0..parts).map(&weight).collect();
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();

    let mut order: Vec<usize> = (0..parts).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}
