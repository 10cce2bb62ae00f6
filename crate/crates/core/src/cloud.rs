use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// An ordered set of 3D points, in meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
}

impl PointCloud {
    /// Wraps `points`, rejecting any non-finite coordinate.
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub(crate) fn from_vec_unchecked(points: Vec<Vector3<f64>>) -> Self {
        debug_assert!(points.iter().all(|p| p.iter().all(|c| c.is_finite())));
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Vector3<f64>> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<Vector3<f64>> {
        self.points
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }

    /// The sub-cloud at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<PointCloud> {
        let points = indices
            .iter()
            .map(|&i| {
                self.points
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { points })
    }
}

impl<'a> IntoIterator for &'a PointCloud {
    type Item = &'a Vector3<f64>;
    type IntoIter = std::slice::Iter<'a, Vector3<f64>>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// Maps every point `p` to `m * p + t`, preserving order.
pub fn transform_points(m: &Matrix3<f64>, t: &Vector3<f64>, cloud: &PointCloud) -> Result<PointCloud> {
    if !m.iter().chain(t.iter()).all(|v| v.is_finite()) {
        return Err(Error::invalid("transform has non-finite entries"));
    }
    let magnitude = m.amax();
    if magnitude == 0.0 || m.determinant().abs() <= 1e-12 * magnitude.powi(3) {
        return Err(Error::invalid("transform matrix is singular"));
    }
    let points = cloud.iter().map(|p| m * p + t).collect();
    PointCloud::new(points)
}
