//! Discretized superquadric shape space: exponent grid, per-category FPS
//! templates and per-instance symmetry groups.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::canonical::anisotropy;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::fps::farthest_point_sample;
use crate::superquadric::{sample_unit_surface, Superquadric, EPS_MIN};

/// Rotations used to stand in for one continuous symmetry axis.
pub const CONTINUOUS_STEPS: usize = 36;
pub const DEFAULT_TEMPLATE_POINTS: usize = 512;
pub const DEFAULT_DENSE_POINTS: usize = 8192;

/// Cross product of `eps1` and `eps2` values; category ids are row-major with
/// `eps1` as the major axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct ShapeGrid {
    eps1_values: Vec<f64>,
    eps2_values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    eps1_values: Vec<f64>,
    eps2_values: Vec<f64>,
}

impl TryFrom<RawGrid> for ShapeGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        ShapeGrid::new(raw.eps1_values, raw.eps2_values)
    }
}

impl From<ShapeGrid> for RawGrid {
    fn from(grid: ShapeGrid) -> Self {
        RawGrid {
            eps1_values: grid.eps1_values,
            eps2_values: grid.eps2_values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeCategory {
    pub id: usize,
    pub eps1: f64,
    pub eps2: f64,
}

impl ShapeGrid {
    pub fn new(eps1_values: Vec<f64>, eps2_values: Vec<f64>) -> Result<Self> {
        for (name, values) in [("eps1", &eps1_values), ("eps2", &eps2_values)] {
            if values.len() < 2 {
                return Err(Error::invalid(format!("{name} axis needs at least 2 values")));
            }
            if !values.iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(Error::invalid(format!("{name} values must lie in [0, 1]")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("{name} values must be strictly ascending")));
            }
        }
        Ok(Self {
            eps1_values,
            eps2_values,
        })
    }

    pub fn eps1_values(&self) -> &[f64] {
        &self.eps1_values
    }

    pub fn eps2_values(&self) -> &[f64] {
        &self.eps2_values
    }

    pub fn len(&self) -> usize {
        self.eps1_values.len() * self.eps2_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn category(&self, id: usize) -> Option<ShapeCategory> {
        let n2 = self.eps2_values.len();
        (id < self.len()).then(|| ShapeCategory {
            id,
            eps1: self.eps1_values[id / n2],
            eps2: self.eps2_values[id % n2],
        })
    }

    pub fn categories(&self) -> impl Iterator<Item = ShapeCategory> + '_ {
        (0..self.len()).filter_map(|id| self.category(id))
    }

    /// Nearest grid node in `(eps1, eps2)`, ties to the lower id.
    pub fn categorize(&self, eps1: f64, eps2: f64) -> Result<usize> {
        if !(0.0..=2.0).contains(&eps1) || !(0.0..=2.0).contains(&eps2) {
            return Err(Error::invalid(format!("exponents ({eps1}, {eps2}) outside [0, 2]")));
        }
        if eps2 > 1.0 {
            return Err(Error::NotCanonical { eps2 });
        }
        let mut best = (0, f64::INFINITY);
        for c in self.categories() {
            let d = (c.eps1 - eps1).powi(2) + (c.eps2 - eps2).powi(2);
            if d < best.1 {
                best = (c.id, d);
            }
        }
        Ok(best.0)
    }
}

impl Default for ShapeGrid {
    /// `{0, 0.25, 0.5, 0.75, 1}` on both axes: 25 categories.
    fn default() -> Self {
        let values = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        Self {
            eps1_values: values.clone(),
            eps2_values: values,
        }
    }
}

pub fn categorize(eps1: f64, eps2: f64, grid: &ShapeGrid) -> Result<usize> {
    grid.categorize(eps1, eps2)
}

/// Unit-scale template of `category`: `dense_n` surface samples reduced to `n`
/// by farthest point sampling from index 0. Exponents are floored at
/// [`EPS_MIN`].
pub fn template_points(category: &ShapeCategory, n: usize, dense_n: usize, seed: u64) -> Result<PointCloud> {
    if n > dense_n {
        return Err(Error::invalid(format!("template size {n} exceeds dense sample size {dense_n}")));
    }
    let dense = sample_unit_surface(category.eps1.max(EPS_MIN), category.eps2.max(EPS_MIN), dense_n, seed)?;
    let picked = farthest_point_sample(&dense, n, 0)?;
    dense.select(&picked)
}

/// Continuous rotational symmetry about `axis`, evaluated at `steps` evenly
/// spaced angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousAxis {
    pub axis: Unit<Vector3<f64>>,
    pub steps: usize,
}

/// Rotations (in the primitive's local frame) that map a shape onto itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGroup {
    discrete: Vec<UnitQuaternion<f64>>,
    continuous_axes: Vec<ContinuousAxis>,
}

/// Angular tolerance for treating two rotations as the same element.
const SAME_ROTATION_TOL: f64 = 1e-9;

/// Approximate rotation angle between `a` and `b`, robust near zero.
fn rotation_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let (qa, qb) = (a.quaternion().coords, b.quaternion().coords);
    2.0 * (qa - qb).norm().min((qa + qb).norm())
}

fn with_positive_scalar(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let c = q.quaternion().coords;
    let first = [c.w, c.x, c.y, c.z].into_iter().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
    if first < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

impl SymmetryGroup {
    pub fn trivial() -> Self {
        Self {
            discrete: vec![UnitQuaternion::identity()],
            continuous_axes: Vec::new(),
        }
    }

    /// Smallest set containing the identity and `generators` that is closed
    /// under composition.
    pub fn generated_by(generators: &[UnitQuaternion<f64>]) -> Self {
        let mut elements = vec![UnitQuaternion::identity()];
        let push = |elements: &mut Vec<UnitQuaternion<f64>>, q: UnitQuaternion<f64>| {
            if elements.iter().all(|e| rotation_distance(e, &q) > SAME_ROTATION_TOL) {
                elements.push(with_positive_scalar(q));
                true
            } else {
                false
            }
        };
        for g in generators {
            push(&mut elements, *g);
        }
        loop {
            let mut grew = false;
            let snapshot = elements.clone();
            for a in &snapshot {
                for b in &snapshot {
                    grew |= push(&mut elements, a * b);
                }
            }
            if !grew {
                break;
            }
        }
        Self {
            discrete: elements,
            continuous_axes: Vec::new(),
        }
    }

    pub fn with_continuous_axis(mut self, axis: Unit<Vector3<f64>>, steps: usize) -> Self {
        self.continuous_axes.push(ContinuousAxis { axis, steps: steps.max(1) });
        self
    }

    /// Replaces the discretization count of every continuous axis.
    pub fn with_continuous_steps(mut self, steps: usize) -> Self {
        for axis in &mut self.continuous_axes {
            axis.steps = steps.max(1);
        }
        self
    }

    pub fn discrete(&self) -> &[UnitQuaternion<f64>] {
        &self.discrete
    }

    pub fn continuous_axes(&self) -> &[ContinuousAxis] {
        &self.continuous_axes
    }

    /// Number of discrete elements.
    pub fn order(&self) -> usize {
        self.discrete.len()
    }

    pub fn contains(&self, q: &UnitQuaternion<f64>, tol: f64) -> bool {
        self.discrete.iter().any(|e| rotation_distance(e, q) <= tol)
    }

    /// The finite rotation set used for metric evaluation: every discrete
    /// element, composed with each sampled angle of each continuous axis.
    /// Identity comes first, duplicates are dropped.
    pub fn rotations(&self) -> Vec<Matrix3<f64>> {
        let mut set: Vec<UnitQuaternion<f64>> = self.discrete.clone();
        for axis in &self.continuous_axes {
            let base = set.clone();
            for k in 1..axis.steps {
                let turn = UnitQuaternion::from_axis_angle(&axis.axis, 2.0 * PI * k as f64 / axis.steps as f64);
                for d in &base {
                    let q = turn * d;
                    if set.iter().all(|e| rotation_distance(e, &q) > SAME_ROTATION_TOL) {
                        set.push(q);
                    }
                }
            }
        }
        set.iter().map(|q| q.to_rotation_matrix().into_inner()).collect()
    }
}

/// Symmetries of a canonical instance (`eps2 <= 1`).
///
/// The half turns about each local axis always preserve the surface. A quarter
/// turn about `z` is added when `ax` and `ay` agree within `rel_tol`, and a
/// continuous `z` axis when, in addition, `eps2` is within `rel_tol` of 1.
pub fn symmetry_group(sq: &Superquadric, rel_tol: f64) -> Result<SymmetryGroup> {
    if sq.eps2() > 1.0 {
        return Err(Error::NotCanonical { eps2: sq.eps2() });
    }
    let half = |axis| UnitQuaternion::from_axis_angle(&axis, PI);
    let mut generators = vec![half(Vector3::x_axis()), half(Vector3::y_axis()), half(Vector3::z_axis())];
    let round_section = anisotropy(sq) <= rel_tol;
    if round_section {
        generators.push(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2));
    }
    let group = SymmetryGroup::generated_by(&generators);
    if round_section && (sq.eps2() - 1.0).abs() <= rel_tol {
        Ok(group.with_continuous_axis(Vector3::z_axis(), CONTINUOUS_STEPS))
    } else {
        Ok(group)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superquadric::unit_inside_outside;

    fn instance(eps1: f64, eps2: f64, scale: [f64; 3]) -> Superquadric {
        Superquadric::centered(eps1, eps2, Vector3::from(scale)).unwrap()
    }

    fn assert_closed(group: &SymmetryGroup) {
        for a in group.discrete() {
            for b in group.discrete() {
                assert!(group.contains(&(a * b), 1e-9));
            }
        }
    }

    #[test]
    fn default_grid_categories() {
        let grid = ShapeGrid::default();
        assert_eq!(grid.len(), 25);
        assert_eq!(grid.categorize(0.0, 0.0).unwrap(), 0);
        assert_eq!(grid.categorize(1.0, 1.0).unwrap(), 24);
        assert_eq!(grid.categorize(0.6, 0.4).unwrap(), 12);
        let c = grid.category(7).unwrap();
        assert_eq!((c.eps1, c.eps2), (0.25, 0.5));
        assert!(grid.category(25).is_none());
    }

    #[test]
    fn categorize_ties_and_errors() {
        let grid = ShapeGrid::default();
        // halfway between node 0 (0, 0) and node 1 (0, 0.25)
        assert_eq!(grid.categorize(0.0, 0.125).unwrap(), 0);
        assert!(matches!(grid.categorize(0.5, 1.2), Err(Error::NotCanonical { .. })));
        assert!(grid.categorize(-0.1, 0.5).is_err());
        for c in grid.categories() {
            assert_eq!(grid.categorize(c.eps1, c.eps2).unwrap(), c.id);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(ShapeGrid::new(vec![0.0], vec![0.0, 1.0]).is_err());
        assert!(ShapeGrid::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        assert!(ShapeGrid::new(vec![0.0, 1.5], vec![0.0, 1.0]).is_err());
        let json = r#"{"eps1_values":[0.0,0.5,1.0],"eps2_values":[0.0,1.0]}"#;
        let grid: ShapeGrid = serde_json::from_str(json).unwrap();
        assert_eq!(grid.len(), 6);
        assert!(serde_json::from_str::<ShapeGrid>(r#"{"eps1_values":[1.0,0.0],"eps2_values":[0.0,1.0]}"#).is_err());
    }

    #[test]
    fn sphere_template_is_on_unit_sphere() {
        let sphere = ShapeGrid::default().category(24).unwrap();
        let t = template_points(&sphere, 128, 1024, 0).unwrap();
        assert_eq!(t.len(), 128);
        for p in &t {
            assert!((p.norm() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn template_is_subset_of_dense_sample() {
        let cat = ShapeGrid::default().category(6).unwrap();
        let dense = sample_unit_surface(cat.eps1, cat.eps2, 300, 4).unwrap();
        let t = template_points(&cat, 40, 300, 4).unwrap();
        for p in &t {
            assert!(dense.points().contains(p));
        }
        assert_eq!(template_points(&cat, 300, 300, 4).unwrap().len(), 300);
        assert!(template_points(&cat, 301, 300, 4).is_err());
    }

    #[test]
    fn generic_instance_has_klein_group() {
        let g = symmetry_group(&instance(0.3, 0.7, [1.0, 2.0, 3.0]), 1e-3).unwrap();
        assert_eq!(g.order(), 4);
        assert!(g.continuous_axes().is_empty());
        assert_closed(&g);
    }

    #[test]
    fn square_section_has_order_eight() {
        let g = symmetry_group(&instance(0.5, 0.2, [1.0, 1.0, 3.0]), 1e-3).unwrap();
        assert_eq!(g.order(), 8);
        assert!(g.contains(&UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2), 1e-9));
        assert!(g.continuous_axes().is_empty());
        assert_closed(&g);
    }

    #[test]
    fn round_section_has_continuous_axis() {
        let g = symmetry_group(&instance(0.5, 1.0, [1.0, 1.0, 3.0]), 1e-3).unwrap();
        assert_eq!(g.continuous_axes().len(), 1);
        assert_eq!(g.continuous_axes()[0].steps, CONTINUOUS_STEPS);
        assert!(g.contains(&UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI), 1e-9));
        // 8 discrete elements spread over 36 turns: 4 turns coincide with the
        // quarter turns, leaving 36 * 2 distinct rotations
        assert_eq!(g.rotations().len(), 72);
    }

    #[test]
    fn non_canonical_is_rejected() {
        assert!(symmetry_group(&instance(0.5, 1.5, [1.0, 1.0, 3.0]), 1e-3).is_err());
    }

    #[test]
    fn symmetries_preserve_the_surface() {
        for (eps, scale) in [((0.3, 0.7), [1.0, 2.0, 3.0]), ((0.2, 0.2), [1.5, 1.5, 0.5]), ((0.8, 1.0), [2.0, 2.0, 1.0])] {
            let sq = instance(eps.0, eps.1, scale);
            let group = symmetry_group(&sq, 1e-3).unwrap();
            let template = sample_unit_surface(eps.0, eps.1, 256, 1).unwrap();
            for s in group.rotations() {
                for p in &template {
                    let q = s * p.component_mul(&sq.scale());
                    let f = unit_inside_outside(eps.0, eps.1, &q.component_div(&sq.scale()));
                    assert!((f - 1.0).abs() <= 1e-6, "F = {f}");
                }
            }
        }
    }
}
