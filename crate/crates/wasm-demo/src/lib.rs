//! Browser bindings for the sqkit demo page in `www/`.
//!
//! Points cross the boundary as flat `[x0, y0, z0, x1, ...]` arrays.

use nalgebra::{UnitQuaternion, Vector3};
use wasm_bindgen::prelude::*;

use sqkit::canonical::{canonicalize, ANISOTROPY_TOL};
use sqkit::cloud::PointCloud;
use sqkit::fitting::{fit, FitConfig};
use sqkit::io::synth::{gen_synthetic, GenConfig};
use sqkit::superquadric::{sample_unit_surface, Superquadric};

fn flatten<'a>(points: impl IntoIterator<Item = &'a Vector3<f64>>) -> Vec<f64> {
    points.into_iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn shape(eps1: f64, eps2: f64, ax: f64, ay: f64, az: f64) -> sqkit::error::Result<Superquadric> {
    Superquadric::centered(eps1, eps2, Vector3::new(ax, ay, az))
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Surface points of a centered, axis-aligned superquadric, optionally
/// degraded with Gaussian noise and a half-space cut.
pub fn sample_points(
    eps1: f64,
    eps2: f64,
    scale: [f64; 3],
    n: usize,
    noise: f64,
    visible: f64,
    seed: u64,
) -> sqkit::error::Result<Vec<f64>> {
    let sq = shape(eps1, eps2, scale[0], scale[1], scale[2])?;
    let config = GenConfig {
        noise_sigma: noise,
        visible_fraction: visible,
        n_points: n,
        seed,
    };
    Ok(flatten(&gen_synthetic(&sq, &config)?))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn sample(
    eps1: f64,
    eps2: f64,
    ax: f64,
    ay: f64,
    az: f64,
    n: usize,
    noise: f64,
    visible: f64,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    sample_points(eps1, eps2, [ax, ay, az], n, noise, visible, seed.into()).map_err(js_err)
}

/// Folded representative of a shape. Its surface points are the unit
/// template pushed through `x -> M x`.
#[wasm_bindgen]
pub struct Canonical {
    eps1: f64,
    eps2: f64,
    warped: bool,
    matrix: Vec<f64>,
    points: Vec<f64>,
}

#[wasm_bindgen]
impl Canonical {
    #[wasm_bindgen(getter)]
    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    #[wasm_bindgen(getter)]
    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    #[wasm_bindgen(getter)]
    pub fn warped(&self) -> bool {
        self.warped
    }

    /// Row-major 3x3 matrix `M`.
    #[wasm_bindgen(getter)]
    pub fn matrix(&self) -> Vec<f64> {
        self.matrix.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
}

pub fn canonical_view(eps1: f64, eps2: f64, scale: [f64; 3], n: usize, seed: u64) -> sqkit::error::Result<Canonical> {
    let sq = shape(eps1, eps2, scale[0], scale[1], scale[2])?;
    let canon = canonicalize(&sq, ANISOTROPY_TOL)?;
    let c = canon.canonical;
    let m = canon.matrix();
    let unit = sample_unit_surface(c.eps1(), c.eps2(), n, seed)?;
    Ok(Canonical {
        eps1: c.eps1(),
        eps2: c.eps2(),
        warped: canon.warped,
        matrix: (0..9).map(|i| m[(i / 3, i % 3)]).collect(),
        points: flatten(&unit.iter().map(|u| m * u).collect::<Vec<_>>()),
    })
}

#[wasm_bindgen]
pub fn canonical(eps1: f64, eps2: f64, ax: f64, ay: f64, az: f64, n: usize) -> Result<Canonical, JsError> {
    canonical_view(eps1, eps2, [ax, ay, az], n, 0).map_err(js_err)
}

/// `[eps1, eps2, ax, ay, az, qw, qx, qy, qz, tx, ty, tz, rms]` of the best fit.
pub fn fit_flat(points: &[f64]) -> sqkit::error::Result<Vec<f64>> {
    if points.len() % 3 != 0 {
        return Err(sqkit::error::Error::InvalidArgument(format!(
            "{} coordinates is not a whole number of points",
            points.len()
        )));
    }
    let cloud = PointCloud::new(points.chunks(3).map(|c| Vector3::new(c[0], c[1], c[2])).collect())?;
    let result = fit(&cloud, &FitConfig::default())?;
    let p = result.params;
    let q: UnitQuaternion<f64> = p.rotation();
    let (a, t) = (p.scale(), p.translation());
    Ok(vec![
        p.eps1(),
        p.eps2(),
        a.x,
        a.y,
        a.z,
        q.w,
        q.i,
        q.j,
        q.k,
        t.x,
        t.y,
        t.z,
        result.rms_residual,
    ])
}

#[wasm_bindgen]
pub fn fit_points(points: &[f64]) -> Result<Vec<f64>, JsError> {
    fit_flat(points).map_err(js_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_is_flat_and_on_surface() {
        let flat = sample_points(0.5, 0.8, [0.1, 0.2, 0.3], 100, 0.0, 1.0, 1).unwrap();
        assert_eq!(flat.len(), 300);
        let sq = shape(0.5, 0.8, 0.1, 0.2, 0.3).unwrap();
        for c in flat.chunks(3) {
            let f = sq.inside_outside(&Vector3::new(c[0], c[1], c[2])).unwrap();
            assert!((f - 1.0).abs() < 1e-6, "{f}");
        }
    }

    #[test]
    fn canonical_folds_dual_range() {
        let view = canonical_view(0.6, 1.5, [0.1, 0.1, 0.2], 50, 0).unwrap();
        assert!(view.warped);
        assert!(view.eps2 <= 1.0);
        assert_eq!(view.points.len(), 150);
        let kept = canonical_view(0.6, 0.5, [0.1, 0.15, 0.2], 10, 0).unwrap();
        assert!(!kept.warped);
        assert_eq!(kept.matrix, vec![0.1, 0.0, 0.0, 0.0, 0.15, 0.0, 0.0, 0.0, 0.2]);
    }

    #[test]
    fn fit_recovers_sampled_shape() {
        let flat = sample_points(0.4, 0.7, [0.05, 0.08, 0.12], 800, 0.0, 1.0, 2).unwrap();
        let params = fit_flat(&flat).unwrap();
        assert_eq!(params.len(), 13);
        assert!(params[12] < 1e-6, "rms {}", params[12]);
        assert!(fit_flat(&flat[..7]).is_err());
    }
}
