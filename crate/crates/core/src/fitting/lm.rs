//! Bounded Levenberg-Marquardt over the 11 superquadric parameters.
//!
//! Steps solve `(H + lambda * diag(H)) delta = -g` on the (optionally Huber
//! reweighted) normal equations. A step is accepted only if it lowers the
//! objective; the damping follows Nielsen's gain-ratio rule.

use nalgebra::{SMatrix, UnitQuaternion, Vector3};

use super::residual::{
    difference_steps, perturbed, residual_and_gradient, signed_residual, Gradient, EPS1, EPS2, PARAMS, ROTATION,
    SCALE, TRANSLATION,
};
use super::{FitConfig, JacobianMode};
use crate::superquadric::Superquadric;

type Normal = SMatrix<f64, PARAMS, PARAMS>;

const LAMBDA_MAX: f64 = 1e16;

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub params: Superquadric,
    pub rms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after the start and after every accepted step.
    pub accepted_costs: Vec<f64>,
}

pub(crate) struct Problem<'a> {
    pub points: &'a [Vector3<f64>],
    pub config: &'a FitConfig,
}

impl Problem<'_> {
    fn loss(&self, r: f64) -> f64 {
        let k = self.config.noise_scale;
        if k > 0.0 && r.abs() > k {
            k * r.abs() - 0.5 * k * k
        } else {
            0.5 * r * r
        }
    }

    fn weight(&self, r: f64) -> f64 {
        let k = self.config.noise_scale;
        if k > 0.0 && r.abs() > k {
            k / r.abs()
        } else {
            1.0
        }
    }

    fn cost(&self, sq: &Superquadric) -> f64 {
        self.points.iter().map(|p| self.loss(signed_residual(sq, p))).sum()
    }

    fn rms(&self, sq: &Superquadric) -> f64 {
        let sum: f64 = self.points.iter().map(|p| signed_residual(sq, p).powi(2)).sum();
        (sum / self.points.len() as f64).sqrt()
    }

    /// Reweighted `J^T J` and `J^T r`.
    fn normal_equations(&self, sq: &Superquadric) -> (Normal, Gradient) {
        let mut h = Normal::zeros();
        let mut b = Gradient::zeros();
        match self.config.jacobian {
            JacobianMode::Analytic => {
                for p in self.points {
                    let (r, g) = residual_and_gradient(sq, p);
                    accumulate(&mut h, &mut b, &g, r, self.weight(r));
                }
            }
            JacobianMode::CentralDifference => {
                let steps = difference_steps(sq);
                let shifted: Vec<(Superquadric, Superquadric)> = (0..PARAMS)
                    .map(|j| {
                        let mut delta = Gradient::zeros();
                        delta[j] = steps[j];
                        (perturbed(sq, &delta), perturbed(sq, &(-delta)))
                    })
                    .collect();
                for p in self.points {
                    let r = signed_residual(sq, p);
                    let mut g = Gradient::zeros();
                    for (j, (plus, minus)) in shifted.iter().enumerate() {
                        g[j] = (signed_residual(plus, p) - signed_residual(minus, p)) / (2.0 * steps[j]);
                    }
                    accumulate(&mut h, &mut b, &g, r, self.weight(r));
                }
            }
        }
        (h, b)
    }

    fn retract(&self, sq: &Superquadric, delta: &Gradient) -> Superquadric {
        let (elo, ehi) = self.config.eps_bounds;
        let (slo, shi) = self.config.scale_bounds;
        let scale = sq.scale() + Vector3::new(delta[SCALE], delta[SCALE + 1], delta[SCALE + 2]);
        let turn = UnitQuaternion::from_scaled_axis(Vector3::new(delta[ROTATION], delta[ROTATION + 1], delta[ROTATION + 2]));
        Superquadric::from_parts_unchecked(
            (sq.eps1() + delta[EPS1]).clamp(elo, ehi),
            (sq.eps2() + delta[EPS2]).clamp(elo, ehi),
            scale.map(|a| a.clamp(slo, shi)),
            UnitQuaternion::new_normalize((sq.rotation() * turn).into_inner()),
            sq.translation() + Vector3::new(delta[TRANSLATION], delta[TRANSLATION + 1], delta[TRANSLATION + 2]),
        )
    }

    pub fn solve(&self, start: Superquadric) -> Outcome {
        let cfg = self.config;
        let mut current = self.retract(&start, &Gradient::zeros());
        let mut cost = self.cost(&current);
        let mut accepted_costs = vec![cost];
        let mut converged = false;
        let mut iterations = 0;

        let (mut h, mut b) = self.normal_equations(&current);
        let mut lambda = 1e-3;
        let mut nu = 2.0;

        // below this the fit is exact to rounding
        let floor = 1e-28 * current.scale().max().powi(2) * self.points.len() as f64;

        while iterations < cfg.max_iterations {
            iterations += 1;
            if cost <= floor || !cost.is_finite() {
                converged = cost.is_finite();
                break;
            }
            let mut damped = h;
            for i in 0..PARAMS {
                damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
            }
            let step = damped.cholesky().map(|c| c.solve(&(-b)));
            let Some(delta) = step.filter(|d| d.iter().all(|v| v.is_finite())) else {
                lambda *= nu;
                nu *= 2.0;
                if lambda > LAMBDA_MAX {
                    converged = true;
                    break;
                }
                continue;
            };

            let candidate = self.retract(&current, &delta);
            let new_cost = self.cost(&candidate);
            let predicted = -(delta.dot(&b) + 0.5 * (delta.transpose() * h * delta)[(0, 0)]);
            if new_cost < cost {
                let rho = if predicted > 0.0 { (cost - new_cost) / predicted } else { 1.0 };
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                let relative = (cost - new_cost) / cost;
                current = candidate;
                cost = new_cost;
                accepted_costs.push(cost);
                if relative < cfg.convergence_tol {
                    converged = true;
                    break;
                }
                (h, b) = self.normal_equations(&current);
            } else {
                lambda *= nu;
                nu *= 2.0;
                if lambda > LAMBDA_MAX {
                    // no descent direction left at working precision
                    converged = true;
                    break;
                }
            }
        }

        Outcome {
            rms: self.rms(&current),
            params: current,
            iterations,
            converged,
            accepted_costs,
        }
    }
}

fn accumulate(h: &mut Normal, b: &mut Gradient, g: &Gradient, r: f64, w: f64) {
    h.ger(w, g, g, 1.0);
    b.axpy(w * r, g, 1.0);
}
