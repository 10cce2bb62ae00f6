//! Radial distance residual and its derivatives.
//!
//! For a point `q` in the local frame the surface point on the ray from the
//! center through `q` is `q * F(q)^(-e1/2)`, so the radial distance is
//! `|q| * |1 - F(q)^(-e1/2)|`. It is exact for spheres and a close
//! approximation of the Euclidean distance elsewhere.
//!
//! `F` is evaluated in the log domain so that very small exponents do not
//! overflow.

use nalgebra::{SVector, UnitQuaternion, Vector3};

use crate::superquadric::Superquadric;

/// Number of fitted parameters: two exponents, three scales, a rotation
/// increment and a translation.
pub const PARAMS: usize = 11;

pub(crate) type Gradient = SVector<f64, PARAMS>;

pub(crate) const EPS1: usize = 0;
pub(crate) const EPS2: usize = 1;
pub(crate) const SCALE: usize = 2;
pub(crate) const ROTATION: usize = 5;
pub(crate) const TRANSLATION: usize = 8;

/// Radial distance from `p_world` to the surface of `sq`, in meters.
///
/// The center itself has no ray; it is assigned the smallest scale as its
/// distance.
pub fn residual(sq: &Superquadric, p_world: &Vector3<f64>) -> f64 {
    signed_residual(sq, p_world).abs()
}

/// `|q| * (1 - F^(-e1/2))`: positive outside, negative inside.
pub(crate) fn signed_residual(sq: &Superquadric, p_world: &Vector3<f64>) -> f64 {
    let q = sq.to_local(p_world);
    let nq = q.norm();
    if nq == 0.0 {
        return -sq.scale().min();
    }
    let terms = LogTerms::new(sq.eps1(), sq.eps2(), &sq.scale(), &q);
    nq * (1.0 - (-0.5 * sq.eps1() * terms.ln_f).exp())
}

/// Signed residual together with its gradient with respect to
/// `[e1, e2, ax, ay, az, rotation increment (3), translation (3)]`. The
/// rotation increment is applied on the right: `R <- R * exp(delta)`.
pub(crate) fn residual_and_gradient(sq: &Superquadric, p_world: &Vector3<f64>) -> (f64, Gradient) {
    let mut grad = Gradient::zeros();
    let q = sq.to_local(p_world);
    let nq = q.norm();
    if nq == 0.0 {
        return (-sq.scale().min(), grad);
    }
    let (e1, e2) = (sq.eps1(), sq.eps2());
    let a = sq.scale();
    let t = LogTerms::new(e1, e2, &a, &q);
    let g = (-0.5 * e1 * t.ln_f).exp();
    let r = nq * (1.0 - g);

    // d(ln F) with respect to each quantity
    let k = 2.0 / e1;
    let div = |w: f64, v: f64| if w == 0.0 { 0.0 } else { w / v };
    let mul = |w: f64, l: f64| if w == 0.0 { 0.0 } else { w * l };
    let dl_dq = Vector3::new(k * div(t.wx, q.x), k * div(t.wy, q.y), k * div(t.wc, q.z));
    let dl_da = Vector3::new(-k * t.wx / a.x, -k * t.wy / a.y, -k * t.wc / a.z);
    let dl_de2 = (mul(t.wa, t.ln_a) - mul(t.wx, t.ln_x) - mul(t.wy, t.ln_y)) / e1;
    let dl_de1 = -(mul(t.wa, t.ln_a1) + mul(t.wc, t.ln_c)) / e1;

    // r = |q| (1 - G), G = exp(-(e1/2) ln F)
    let c = nq * g * 0.5 * e1;
    grad[EPS1] = nq * g * 0.5 * t.ln_f + c * dl_de1;
    grad[EPS2] = c * dl_de2;
    for i in 0..3 {
        grad[SCALE + i] = c * dl_da[i];
    }
    let dr_dq = q * ((1.0 - g) / nq) + dl_dq * c;
    let dr_dt = -sq.rotation().transform_vector(&dr_dq);
    let dr_drot = dr_dq.cross(&q);
    for i in 0..3 {
        grad[ROTATION + i] = dr_drot[i];
        grad[TRANSLATION + i] = dr_dt[i];
    }
    (r, grad)
}

/// Applies a parameter increment without any bound handling.
pub(crate) fn perturbed(sq: &Superquadric, delta: &Gradient) -> Superquadric {
    let rot = UnitQuaternion::from_scaled_axis(Vector3::new(delta[ROTATION], delta[ROTATION + 1], delta[ROTATION + 2]));
    Superquadric::from_parts_unchecked(
        sq.eps1() + delta[EPS1],
        sq.eps2() + delta[EPS2],
        sq.scale() + Vector3::new(delta[SCALE], delta[SCALE + 1], delta[SCALE + 2]),
        sq.rotation() * rot,
        sq.translation() + Vector3::new(delta[TRANSLATION], delta[TRANSLATION + 1], delta[TRANSLATION + 2]),
    )
}

/// Central-difference gradient of the signed residual, step `1e-6` times a
/// per-parameter scale.
#[cfg(test)]
pub(crate) fn numeric_gradient(sq: &Superquadric, p_world: &Vector3<f64>) -> Gradient {
    let steps = difference_steps(sq);
    let mut grad = Gradient::zeros();
    for j in 0..PARAMS {
        let mut delta = Gradient::zeros();
        delta[j] = steps[j];
        let plus = signed_residual(&perturbed(sq, &delta), p_world);
        let minus = signed_residual(&perturbed(sq, &(-delta)), p_world);
        grad[j] = (plus - minus) / (2.0 * steps[j]);
    }
    grad
}

pub(crate) fn difference_steps(sq: &Superquadric) -> Gradient {
    let size = sq.scale().max();
    let mut steps = Gradient::zeros();
    steps[EPS1] = 1e-6 * sq.eps1();
    steps[EPS2] = 1e-6 * sq.eps2();
    for i in 0..3 {
        steps[SCALE + i] = 1e-6 * sq.scale()[i];
        steps[ROTATION + i] = 1e-6;
        steps[TRANSLATION + i] = 1e-6 * size;
    }
    steps
}

struct LogTerms {
    ln_x: f64,
    ln_y: f64,
    ln_c: f64,
    ln_a: f64,
    ln_a1: f64,
    ln_f: f64,
    /// Shares of `F`: `wa = A^(e2/e1) / F`, `wc = C / F`, `wx + wy = wa`.
    wa: f64,
    wc: f64,
    wx: f64,
    wy: f64,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

impl LogTerms {
    fn new(e1: f64, e2: f64, a: &Vector3<f64>, q: &Vector3<f64>) -> Self {
        let ln_x = 2.0 / e2 * (q.x.abs().ln() - a.x.ln());
        let ln_y = 2.0 / e2 * (q.y.abs().ln() - a.y.ln());
        let ln_c = 2.0 / e1 * (q.z.abs().ln() - a.z.ln());
        let ln_a = log_add_exp(ln_x, ln_y);
        let ln_a1 = e2 / e1 * ln_a;
        let ln_f = log_add_exp(ln_a1, ln_c);
        let wa = (ln_a1 - ln_f).exp();
        let wc = (ln_c - ln_f).exp();
        let (wx, wy) = if ln_a == f64::NEG_INFINITY {
            (0.0, 0.0)
        } else {
            (wa * (ln_x - ln_a).exp(), wa * (ln_y - ln_a).exp())
        };
        Self {
            ln_x,
            ln_y,
            ln_c,
            ln_a,
            ln_a1,
            ln_f,
            wa,
            wc,
            wx,
            wy,
        }
    }
}
