//! Superquadric recovery from a pre-segmented point cloud.
//!
//! Every initial guess is refined by bounded Levenberg-Marquardt on the radial
//! residual; the lowest RMS among converged starts wins, ties to the earliest
//! start. Fitted `eps2 > 1` is legal output and is resolved afterwards by
//! [`crate::canonical::canonicalize`].

mod init;
mod lm;
mod residual;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use init::initial_guesses;
pub use residual::{residual, PARAMS};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::superquadric::{Superquadric, EPS_MAX, EPS_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JacobianMode {
    #[default]
    Analytic,
    CentralDifference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub multistart: usize,
    /// Relative objective decrease below which a start counts as converged.
    pub convergence_tol: f64,
    /// Huber threshold in meters; 0 means plain least squares.
    pub noise_scale: f64,
    /// Seeds the perturbation of repeated starts when `multistart` exceeds
    /// the distinct guesses.
    pub seed: u64,
    pub eps_bounds: (f64, f64),
    pub scale_bounds: (f64, f64),
    pub jacobian: JacobianMode,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            multistart: 6,
            convergence_tol: 1e-8,
            noise_scale: 0.0,
            seed: 0,
            eps_bounds: (EPS_MIN, EPS_MAX),
            scale_bounds: (1e-4, 10.0),
            jacobian: JacobianMode::Analytic,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.multistart == 0 {
            return Err(Error::invalid("iteration and start counts must be at least 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::invalid("convergence tolerance must be positive"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid("noise scale must be finite and non-negative"));
        }
        let (elo, ehi) = self.eps_bounds;
        if !(EPS_MIN <= elo && elo < ehi && ehi <= EPS_MAX) {
            return Err(Error::invalid(format!("eps bounds must be ordered within [{EPS_MIN}, {EPS_MAX}]")));
        }
        let (slo, shi) = self.scale_bounds;
        if !(0.0 < slo && slo < shi && shi.is_finite()) {
            return Err(Error::invalid("scale bounds must be positive and ordered"));
        }
        Ok(())
    }
}

/// Per-start record kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StartDiagnostic {
    pub initial: Superquadric,
    pub final_params: Superquadric,
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at the start and after each accepted step.
    pub accepted_costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Superquadric,
    /// RMS radial residual in meters.
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start_diagnostics: Vec<StartDiagnostic>,
}

/// Fits one superquadric to `cloud`.
///
/// If no start converges the best one is still returned, with
/// `converged = false`.
pub fn fit(cloud: &PointCloud, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let guesses = initial_guesses(cloud, config.multistart)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let problem = lm::Problem {
        points: cloud.points(),
        config,
    };
    let mut diagnostics = Vec::with_capacity(guesses.len());
    for (i, guess) in guesses.into_iter().enumerate() {
        let start = if i >= init::DISTINCT_GUESSES { jitter(&guess, &mut rng) } else { guess };
        let out = problem.solve(start);
        diagnostics.push(StartDiagnostic {
            initial: start,
            final_params: out.params,
            rms_residual: out.rms,
            iterations: out.iterations,
            converged: out.converged,
            accepted_costs: out.accepted_costs,
        });
    }

    let pick = |require_converged: bool| {
        diagnostics
            .iter()
            .enumerate()
            .filter(|(_, d)| d.rms_residual.is_finite() && (d.converged || !require_converged))
            .min_by(|(ia, a), (ib, b)| a.rms_residual.total_cmp(&b.rms_residual).then(ia.cmp(ib)))
            .map(|(i, _)| i)
    };
    let (best, converged) = match pick(true) {
        Some(i) => (i, true),
        None => (
            pick(false).ok_or_else(|| Error::Degenerate("every start produced a non-finite residual".into()))?,
            false,
        ),
    };
    let winner = &diagnostics[best];
    Ok(FitResult {
        params: winner.final_params,
        rms_residual: winner.rms_residual,
        iterations: winner.iterations,
        converged,
        start_diagnostics: diagnostics,
    })
}

/// Random turn of up to about 0.5 rad applied to a repeated guess.
fn jitter(guess: &Superquadric, rng: &mut ChaCha8Rng) -> Superquadric {
    let axis = Vector3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let turn = UnitQuaternion::from_scaled_axis(axis);
    Superquadric::from_parts_unchecked(
        guess.eps1(),
        guess.eps2(),
        guess.scale(),
        guess.rotation() * turn,
        guess.translation(),
    )
}
