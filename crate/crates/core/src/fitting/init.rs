use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use super::residual::PARAMS;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::superquadric::Superquadric;

const SHAPE_VARIANTS: [(f64, f64); 3] = [(1.0, 1.0), (0.1, 0.1), (1.9, 1.9)];

/// Guesses produced before the list starts repeating.
pub(crate) const DISTINCT_GUESSES: usize = 3 * SHAPE_VARIANTS.len();

/// Starting points for the fitter, derived from the cloud's second moments.
///
/// The first guess is an ellipsoid (`eps = (1, 1)`) at the centroid, aligned
/// with the principal axes (largest spread on `z`) and sized by the half
/// extents along them. It is followed by the other two cyclic relabelings of
/// the axes, then box-like `(0.1, 0.1)` and pinched `(1.9, 1.9)` variants.
/// The list is truncated or repeated to length `k`.
pub fn initial_guesses(cloud: &PointCloud, k: usize) -> Result<Vec<Superquadric>> {
    if cloud.len() < PARAMS {
        return Err(Error::UnderDetermined {
            points: cloud.len(),
            params: PARAMS,
        });
    }
    if k == 0 {
        return Err(Error::invalid("at least one initial guess is required"));
    }
    let centroid = cloud.centroid().unwrap();
    let moments = cloud
        .iter()
        .map(|p| {
            let d = p - centroid;
            d * d.transpose()
        })
        .sum::<Matrix3<f64>>()
        / cloud.len() as f64;

    let eigen = moments.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let (smallest, largest) = (eigen.eigenvalues[order[0]], eigen.eigenvalues[order[2]]);
    if !(smallest >= 1e-12 * largest) || largest <= 0.0 {
        return Err(Error::Degenerate(format!(
            "cloud does not span three dimensions (moment eigenvalues {smallest:e} .. {largest:e})"
        )));
    }
    let e0: Vector3<f64> = eigen.eigenvectors.column(order[0]).into();
    let e1: Vector3<f64> = eigen.eigenvectors.column(order[1]).into();
    let axes = [e0, e1, e0.cross(&e1)];

    let half_extent = |axis: &Vector3<f64>| {
        let (lo, hi) = cloud.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let s = axis.dot(&(p - centroid));
            (lo.min(s), hi.max(s))
        });
        (0.5 * (hi - lo)).max(1e-4)
    };
    let extents = axes.map(|a| half_extent(&a));

    let frames: Vec<(UnitQuaternion<f64>, Vector3<f64>)> = (0..3)
        .map(|shift| {
            let idx = [shift % 3, (shift + 1) % 3, (shift + 2) % 3];
            let m = Matrix3::from_columns(&[axes[idx[0]], axes[idx[1]], axes[idx[2]]]);
            let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
            (rotation, Vector3::new(extents[idx[0]], extents[idx[1]], extents[idx[2]]))
        })
        .collect();

    let base: Vec<Superquadric> = SHAPE_VARIANTS
        .iter()
        .flat_map(|&(e1, e2)| {
            frames
                .iter()
                .map(move |(rotation, scale)| Superquadric::from_parts_unchecked(e1, e2, *scale, *rotation, centroid))
        })
        .collect();
    Ok(base.iter().cycle().take(k).copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn box_extents() {
        let sq = Superquadric::centered(0.1, 0.1, Vector3::new(0.01, 0.02, 0.03)).unwrap();
        let cloud = sq.sample_surface(2000, 0).unwrap();
        let first = initial_guesses(&cloud, 6).unwrap()[0];
        let expected = Vector3::new(0.01, 0.02, 0.03);
        for i in 0..3 {
            assert!((first.scale()[i] - expected[i]).abs() <= 0.2 * expected[i]);
        }
        assert_eq!((first.eps1(), first.eps2()), (1.0, 1.0));
    }

    #[test]
    fn principal_axes_follow_rotation() {
        let r = UnitQuaternion::from_euler_angles(0.5, -0.7, 1.9);
        let sq = Superquadric::new(0.6, 0.6, Vector3::new(0.02, 0.05, 0.1), r, Vector3::new(0.1, 0.2, 0.3)).unwrap();
        let cloud = sq.sample_surface(2000, 1).unwrap();
        let first = initial_guesses(&cloud, 1).unwrap()[0];
        let got = first.rotation_matrix();
        let want = r.to_rotation_matrix().into_inner();
        for i in 0..3 {
            assert_relative_eq!(got.column(i).dot(&want.column(i)).abs(), 1.0, epsilon = 1e-3);
        }
        assert_relative_eq!(got.determinant(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(first.translation(), sq.translation(), epsilon = 2e-3);
    }

    #[test]
    fn guess_list_shape() {
        let sq = Superquadric::centered(0.5, 0.5, Vector3::new(0.03, 0.05, 0.08)).unwrap();
        let cloud = sq.sample_surface(500, 2).unwrap();
        let guesses = initial_guesses(&cloud, 12).unwrap();
        assert_eq!(guesses.len(), 12);
        assert_eq!(guesses[9], guesses[0]);
        assert_eq!((guesses[3].eps1(), guesses[6].eps1()), (0.1, 1.9));
        // relabelings move the largest extent off the z axis
        assert!(guesses[0].scale().z > guesses[0].scale().x);
        assert_relative_eq!(guesses[1].scale().y, guesses[0].scale().z);
    }

    #[test]
    fn too_few_points() {
        let cloud = PointCloud::new((0..5).map(|i| Vector3::new(i as f64, (i * i) as f64, 1.0)).collect()).unwrap();
        assert!(matches!(initial_guesses(&cloud, 6), Err(Error::UnderDetermined { points: 5, .. })));
    }

    #[test]
    fn planar_cloud_is_degenerate() {
        let cloud = PointCloud::new((0..50).map(|i| Vector3::new((i % 7) as f64, (i / 7) as f64, 0.0)).collect()).unwrap();
        assert!(matches!(initial_guesses(&cloud, 6), Err(Error::Degenerate(_))));
    }
}
