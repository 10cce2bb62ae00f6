//! Synthetic partial-view clouds for testing the fitter.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::superquadric::Superquadric;
use crate::io::params::ParamsFile;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    /// Standard deviation of the added isotropic noise, meters.
    pub noise_sigma: f64,
    /// Fraction of points kept after half-space culling, in `(0, 1]`.
    pub visible_fraction: f64,
    pub n_points: usize,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            visible_fraction: 1.0,
            n_points: 2000,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::invalid("noise sigma must be finite and non-negative"));
        }
        if !(self.visible_fraction > 0.0 && self.visible_fraction <= 1.0) {
            return Err(Error::invalid("visible fraction must lie in (0, 1]"));
        }
        if self.n_points == 0 {
            return Err(Error::invalid("at least one point is required"));
        }
        if self.kept() == 0 {
            return Err(Error::invalid(format!(
                "visible fraction {} of {} points keeps nothing",
                self.visible_fraction, self.n_points
            )));
        }
        Ok(())
    }

    fn kept(&self) -> usize {
        (self.visible_fraction * self.n_points as f64).round() as usize
    }
}

/// Surface samples of `sq` with noise and an optional one-sided cut.
///
/// The surface is sampled with `cfg.seed`, noise and the cutting plane use
/// independent streams derived from it. The cut passes through a random
/// sample with a random normal; the `round(visible_fraction * n_points)`
/// points with the smallest signed distance to it are kept in their original
/// order.
pub fn gen_synthetic(sq: &Superquadric, cfg: &GenConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let surface = sq.sample_surface(cfg.n_points, cfg.seed)?;
    Ok(degrade(surface.into_points(), cfg))
}

/// [`gen_synthetic`] for a parameter record that may carry shear.
pub fn gen_synthetic_record(record: &ParamsFile, cfg: &GenConfig) -> Result<PointCloud> {
    cfg.validate()?;
    let surface = record.sample_surface(cfg.n_points, cfg.seed)?;
    Ok(degrade(surface.into_points(), cfg))
}

fn degrade(mut points: Vec<Vector3<f64>>, cfg: &GenConfig) -> PointCloud {
    if cfg.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let normal = Normal::new(0.0, cfg.noise_sigma).expect("sigma validated");
        for p in &mut points {
            *p += Vector3::from_fn(|_, _| normal.sample(&mut rng));
        }
    }

    let keep = cfg.kept();
    if keep < points.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(2);
        let anchor = points[rng.random_range(0..points.len())];
        let normal = loop {
            let v = Vector3::<f64>::from_fn(|_, _| StandardNormal.sample(&mut rng));
            if v.norm() > 1e-6 {
                break v.normalize();
            }
        };
        let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (normal.dot(&(p - anchor)), i)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut kept: Vec<usize> = order[..keep].iter().map(|&(_, i)| i).collect();
        kept.sort_unstable();
        points = kept.into_iter().map(|i| points[i]).collect();
    }
    PointCloud::from_vec_unchecked(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;

    fn shape() -> Superquadric {
        Superquadric::new(
            0.4,
            0.7,
            Vector3::new(0.04, 0.06, 0.1),
            UnitQuaternion::from_euler_angles(0.2, 0.5, -0.3),
            Vector3::new(0.0, 0.05, 0.7),
        )
        .unwrap()
    }

    #[test]
    fn clean_samples_lie_on_surface() {
        let sq = shape();
        let cloud = gen_synthetic(&sq, &GenConfig::default()).unwrap();
        assert_eq!(cloud.len(), 2000);
        for p in &cloud {
            assert!((sq.inside_outside(&sq.to_local(p)).unwrap() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn half_visible_count() {
        let cfg = GenConfig {
            visible_fraction: 0.5,
            n_points: 1000,
            noise_sigma: 0.002,
            seed: 4,
        };
        let cloud = gen_synthetic(&shape(), &cfg).unwrap();
        assert_eq!(cloud.len(), 500);
        assert_eq!(cloud, gen_synthetic(&shape(), &cfg).unwrap());
    }

    #[test]
    fn cut_is_a_half_space() {
        let cfg = GenConfig {
            visible_fraction: 0.3,
            n_points: 400,
            ..GenConfig::default()
        };
        let full = gen_synthetic(&shape(), &GenConfig { n_points: 400, ..GenConfig::default() }).unwrap();
        let part = gen_synthetic(&shape(), &cfg).unwrap();
        assert_eq!(part.len(), 120);
        // every kept point comes from the full sample, in order
        let mut cursor = full.iter();
        for p in &part {
            assert!(cursor.any(|q| q == p));
        }
    }

    #[test]
    fn noise_changes_points_deterministically() {
        let cfg = GenConfig {
            noise_sigma: 0.001,
            ..GenConfig::default()
        };
        let a = gen_synthetic(&shape(), &cfg).unwrap();
        let clean = gen_synthetic(&shape(), &GenConfig::default()).unwrap();
        assert_ne!(a, clean);
        let rms = (a.iter().zip(&clean).map(|(p, q)| (p - q).norm_squared()).sum::<f64>() / (3.0 * a.len() as f64)).sqrt();
        assert!((rms - 0.001).abs() < 1e-4, "{rms}");
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            GenConfig { noise_sigma: -1.0, ..GenConfig::default() },
            GenConfig { visible_fraction: 0.0, ..GenConfig::default() },
            GenConfig { visible_fraction: 1.5, ..GenConfig::default() },
            GenConfig { n_points: 0, ..GenConfig::default() },
            GenConfig { n_points: 3, visible_fraction: 0.1, ..GenConfig::default() },
        ] {
            assert!(matches!(gen_synthetic(&shape(), &cfg), Err(Error::InvalidArgument(_))));
        }
    }
}
