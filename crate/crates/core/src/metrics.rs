//! Symmetry-aware pose errors over combined rotation/scale/shear transforms.
//!
//! A hypothesis maps unit-template points `x` to `M * x + t`. MSSD is
//! `min_S max_x |est(x) - gt(S * x)|` over the ground truth's symmetry
//! rotations; MSPD is the same with both sides projected to pixels.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::affine::AffinePose;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::shape_space::SymmetryGroup;
use crate::superquadric::Superquadric;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseHypothesis {
    m: Matrix3<f64>,
    t: Vector3<f64>,
}

impl PoseHypothesis {
    pub fn new(m: Matrix3<f64>, t: Vector3<f64>) -> Result<Self> {
        if !m.iter().chain(t.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("pose has non-finite entries"));
        }
        if m.determinant() <= 0.0 {
            return Err(Error::invalid("pose matrix must have positive determinant"));
        }
        Ok(Self { m, t })
    }

    pub fn from_superquadric(sq: &Superquadric) -> Self {
        Self {
            m: sq.affine_matrix(),
            t: sq.translation(),
        }
    }

    pub fn from_affine(pose: &AffinePose) -> Result<Self> {
        Self::new(pose.matrix(), pose.translation)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.t
    }

    pub fn apply(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.m * x + self.t
    }

    /// `x -> self(rotation * x)`.
    pub fn compose_template_rotation(&self, rotation: &Matrix3<f64>) -> Self {
        Self {
            m: self.m * rotation,
            t: self.t,
        }
    }
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics")]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = Error;

    fn try_from(raw: RawIntrinsics) -> Result<Self> {
        CameraIntrinsics::new(raw.fx, raw.fy, raw.cx, raw.cy)
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(Error::invalid("focal lengths must be positive and all intrinsics finite"));
        }
        Ok(Self { fx, fy, cx, cy })
    }

    pub fn project(&self, p: &Vector3<f64>) -> Result<Vector2<f64>> {
        project(self, p)
    }
}

pub fn project(k: &CameraIntrinsics, p: &Vector3<f64>) -> Result<Vector2<f64>> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera { z: p.z });
    }
    Ok(Vector2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

/// Maximum symmetry-aware surface distance, in the template's length unit.
pub fn mssd(est: &PoseHypothesis, gt: &PoseHypothesis, template: &PointCloud, sym: &SymmetryGroup) -> Result<f64> {
    if template.is_empty() {
        return Err(Error::invalid("template is empty"));
    }
    let est_points: Vec<Vector3<f64>> = template.iter().map(|x| est.apply(x)).collect();
    let mut best = f64::INFINITY;
    for s in sym.rotations() {
        let mut worst = 0.0f64;
        for (x, e) in template.iter().zip(&est_points) {
            worst = worst.max((e - gt.apply(&(s * x))).norm());
            if worst >= best {
                break;
            }
        }
        best = best.min(worst);
    }
    Ok(best)
}

/// Maximum symmetry-aware projection distance, in pixels.
pub fn mspd(
    est: &PoseHypothesis,
    gt: &PoseHypothesis,
    template: &PointCloud,
    sym: &SymmetryGroup,
    k: &CameraIntrinsics,
) -> Result<f64> {
    if template.is_empty() {
        return Err(Error::invalid("template is empty"));
    }
    let est_px = template
        .iter()
        .map(|x| project(k, &est.apply(x)))
        .collect::<Result<Vec<_>>>()?;
    let rotations = sym.rotations();
    let gt_px = rotations
        .iter()
        .map(|s| template.iter().map(|x| project(k, &gt.apply(&(s * x)))).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;

    let mut best = f64::INFINITY;
    for px in &gt_px {
        let mut worst = 0.0f64;
        for (e, g) in est_px.iter().zip(px) {
            worst = worst.max((e - g).norm());
            if worst >= best {
                break;
            }
        }
        best = best.min(worst);
    }
    Ok(best)
}

/// Fraction of `errors` at or below each threshold.
pub fn accuracy_curve(errors: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::invalid("no errors to score"));
    }
    if errors.iter().chain(thresholds).any(|v| v.is_nan()) {
        return Err(Error::invalid("errors and thresholds must not be NaN"));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("thresholds must be ascending"));
    }
    let n = errors.len() as f64;
    Ok(thresholds
        .iter()
        .map(|th| errors.iter().filter(|e| **e <= *th).count() as f64 / n)
        .collect())
}

/// Re-expresses `est` through the template's own symmetries so that it lies
/// as close as possible (Frobenius norm) to `reference`.
///
/// `M * Q` traces the same surface as `M` whenever `Q` maps the unit-scale
/// template onto itself, so this only removes labeling freedom (swapped
/// in-plane axes, cycled axes when `eps1 == eps2`, free spin when the
/// cross-section is round, any rotation for a sphere). `tol` decides when the
/// exponents count as equal.
pub fn align_gauge(est: &PoseHypothesis, reference: &PoseHypothesis, eps1: f64, eps2: f64, tol: f64) -> PoseHypothesis {
    let me = est.m;
    let mr = reference.m;
    let round = (eps2 - 1.0).abs() <= tol;

    if round && (eps1 - 1.0).abs() <= tol {
        return est.compose_template_rotation(&best_rotation(&(mr.transpose() * me)));
    }

    let quarter = nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
    let half_x = nalgebra::UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI);
    let dihedral: Vec<Matrix3<f64>> = SymmetryGroup::generated_by(&[quarter, half_x])
        .discrete()
        .iter()
        .map(|q| q.to_rotation_matrix().into_inner())
        .collect();
    let cycle = Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let relabels: Vec<Matrix3<f64>> = if (eps1 - eps2).abs() <= tol {
        vec![Matrix3::identity(), cycle, cycle * cycle]
    } else {
        vec![Matrix3::identity()]
    };

    let mut best = (Matrix3::identity(), f64::INFINITY);
    for c in &relabels {
        for d in &dihedral {
            let mut q = c * d;
            if round {
                let b = mr.transpose() * me * q;
                let phi = (b[(0, 1)] - b[(1, 0)]).atan2(b[(0, 0)] + b[(1, 1)]);
                q *= nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), phi).into_inner();
            }
            let gap = (me * q - mr).norm();
            if gap < best.1 {
                best = (q, gap);
            }
        }
    }
    est.compose_template_rotation(&best.0)
}

/// Rotation `Q` maximizing `trace(b * Q)`.
fn best_rotation(b: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = b.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, (v * u.transpose()).determinant().signum()));
    v * d * u.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape_space::symmetry_group;
    use approx::assert_relative_eq;
    use nalgebra::UnitQuaternion;

    fn planar_template() -> PointCloud {
        PointCloud::new(vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(0.05, 0.0, 0.0),
            Vector3::new(0.0, 0.05, 0.0),
            Vector3::new(-0.03, 0.02, 0.0),
        ])
        .unwrap()
    }

    #[test]
    fn projection_examples() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        assert_eq!(project(&k, &Vector3::new(0.0, 0.0, 1.0)).unwrap(), Vector2::new(320.0, 240.0));
        assert_eq!(project(&k, &Vector3::new(0.01, 0.0, 1.0)).unwrap(), Vector2::new(325.0, 240.0));
        assert!(matches!(project(&k, &Vector3::new(0.0, 0.0, -1.0)), Err(Error::BehindCamera { .. })));
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn identical_poses_score_zero() {
        let gt = PoseHypothesis::new(Matrix3::from_diagonal(&Vector3::new(0.02, 0.03, 0.04)), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let sym = SymmetryGroup::trivial();
        assert_eq!(mssd(&gt, &gt, &planar_template(), &sym).unwrap(), 0.0);
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        assert_eq!(mspd(&gt, &gt, &planar_template(), &sym, &k).unwrap(), 0.0);
    }

    #[test]
    fn translation_offset() {
        let gt = PoseHypothesis::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let est = PoseHypothesis::new(Matrix3::identity(), Vector3::new(0.01, 0.0, 1.0)).unwrap();
        let sym = SymmetryGroup::trivial();
        assert_relative_eq!(mssd(&est, &gt, &planar_template(), &sym).unwrap(), 0.01, epsilon = 1e-15);
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        assert_relative_eq!(mspd(&est, &gt, &planar_template(), &sym, &k).unwrap(), 5.0, epsilon = 1e-9);
    }

    #[test]
    fn symmetric_estimates_score_zero() {
        let sq = Superquadric::centered(0.4, 0.3, Vector3::new(0.05, 0.05, 0.1)).unwrap();
        let sym = symmetry_group(&sq, 1e-3).unwrap();
        assert_eq!(sym.order(), 8);
        let gt = PoseHypothesis::new(
            UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3).to_rotation_matrix().into_inner()
                * Matrix3::from_diagonal(&sq.scale()),
            Vector3::new(0.0, 0.0, 0.8),
        )
        .unwrap();
        let template = crate::superquadric::sample_unit_surface(0.4, 0.3, 64, 2).unwrap();
        let k = CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0).unwrap();
        for s in sym.rotations() {
            let est = gt.compose_template_rotation(&s);
            assert!(mssd(&est, &gt, &template, &sym).unwrap() <= 1e-9);
            assert!(mspd(&est, &gt, &template, &sym, &k).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn behind_camera_is_reported() {
        let gt = PoseHypothesis::new(Matrix3::identity(), Vector3::new(0.0, 0.0, 0.01)).unwrap();
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let template = PointCloud::new(vec![Vector3::new(0.0, 0.0, -1.0)]).unwrap();
        assert!(matches!(
            mspd(&gt, &gt, &template, &SymmetryGroup::trivial(), &k),
            Err(Error::BehindCamera { .. })
        ));
        assert!(mssd(&gt, &gt, &PointCloud::default(), &SymmetryGroup::trivial()).is_err());
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy_curve(&[0.0, 0.0], &[0.0, 1.0, 2.0]).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(accuracy_curve(&[1.0, 3.0], &[2.0]).unwrap(), vec![0.5]);
        assert_eq!(accuracy_curve(&[5.0], &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        assert!(accuracy_curve(&[], &[1.0]).is_err());
        assert!(accuracy_curve(&[1.0], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn gauge_alignment_undoes_axis_swap() {
        // (ax, ay) swapped with a quarter turn is the same surface
        let r = UnitQuaternion::from_euler_angles(0.7, -0.2, 1.4);
        let truth = Superquadric::new(0.4, 0.6, Vector3::new(0.03, 0.08, 0.05), r, Vector3::zeros()).unwrap();
        let quarter = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2);
        let swapped = Superquadric::new(0.4, 0.6, Vector3::new(0.08, 0.03, 0.05), r * quarter, Vector3::zeros()).unwrap();
        let gt = PoseHypothesis::from_superquadric(&truth);
        let est = PoseHypothesis::from_superquadric(&swapped);
        let aligned = align_gauge(&est, &gt, 0.4, 0.6, 1e-3);
        assert_relative_eq!(aligned.matrix(), gt.matrix(), epsilon = 1e-12);
    }

    #[test]
    fn gauge_alignment_for_spheres_and_cylinders() {
        let gt = PoseHypothesis::new(Matrix3::from_diagonal_element(0.5), Vector3::zeros()).unwrap();
        let spin = UnitQuaternion::from_euler_angles(0.4, 1.0, -2.0).to_rotation_matrix().into_inner();
        let est = PoseHypothesis::new(spin * Matrix3::from_diagonal_element(0.5), Vector3::zeros()).unwrap();
        let aligned = align_gauge(&est, &gt, 1.0, 1.0, 1e-3);
        assert_relative_eq!(aligned.matrix(), gt.matrix(), epsilon = 1e-12);

        let scale = Matrix3::from_diagonal(&Vector3::new(0.05, 0.05, 0.2));
        let tilt = UnitQuaternion::from_euler_angles(0.3, 0.2, 0.0).to_rotation_matrix().into_inner();
        let about_z = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), 0.77).into_inner();
        let gt = PoseHypothesis::new(tilt * scale, Vector3::zeros()).unwrap();
        let est = PoseHypothesis::new(tilt * about_z * scale, Vector3::zeros()).unwrap();
        let aligned = align_gauge(&est, &gt, 0.5, 1.0, 1e-3);
        assert_relative_eq!(aligned.matrix(), gt.matrix(), epsilon = 1e-12);
    }
}
