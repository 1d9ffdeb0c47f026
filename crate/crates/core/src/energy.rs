//! Annealed short-range repulsion with border softening.
//!
//! ```text
//! V = Σ_{i<j} (λ / r_ij²)^s · [(cos²t_i + ε)(cos²t_j + ε)]^α
//! ```
//!
//! with `λ` the smallest squared pair distance. `λ` is held fixed while the
//! gradient is taken, so the gradient is the exact derivative of the energy at
//! frozen `λ`.

use crate::error::{Error, Result};
use crate::geometry::{gamma, gamma_du, ParamPoint};

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyState {
    pub value: f64,
    /// Interleaved `[∂V/∂t_0, ∂V/∂u_0, ∂V/∂t_1, …]`.
    pub gradient: Vec<f64>,
    /// Squared minimal pair distance used for this evaluation.
    pub lambda: f64,
}

/// Energy at the current minimal squared distance.
pub fn energy(points: &[ParamPoint], sigma: u32, s: f64, alpha: f64, eps: f64) -> Result<EnergyState> {
    let lambda = min_sq_distance(points, sigma);
    if !(lambda > 0.0) {
        return Err(Error::Degenerate("coincident points in energy evaluation".into()));
    }
    energy_with_lambda(points, sigma, s, alpha, eps, lambda)
}

pub fn energy_with_lambda(
    points: &[ParamPoint],
    sigma: u32,
    s: f64,
    alpha: f64,
    eps: f64,
    lambda: f64,
) -> Result<EnergyState> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("energy needs at least two points".into()));
    }
    let mut x: Vec<f64> = Vec::with_capacity(points.len() * 2);
    for p in points {
        x.push(p.t);
        x.push(p.u);
    }
    let mut ws = Workspace::new(points.len());
    let mut gradient = vec![0.0; x.len()];
    let value = ws.evaluate(&x, sigma, s, alpha, eps, lambda, &mut gradient);
    if value.is_nan() {
        return Err(Error::Degenerate("coincident points in energy evaluation".into()));
    }
    Ok(EnergyState {
        value,
        gradient,
        lambda,
    })
}

pub(crate) fn min_sq_distance(points: &[ParamPoint], sigma: u32) -> f64 {
    let pos: Vec<_> = points.iter().map(|p| p.to_point(sigma)).collect();
    let mut best = f64::INFINITY;
    for i in 0..pos.len() {
        for j in (i + 1)..pos.len() {
            best = best.min(pos[i].dist_sq(pos[j]));
        }
    }
    best
}

/// Per-point scratch reused across evaluations.
pub(crate) struct Workspace {
    px: Vec<f64>,
    py: Vec<f64>,
    log_a: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
    gt_border: Vec<f64>,
}

impl Workspace {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            px: vec![0.0; n],
            py: vec![0.0; n],
            log_a: vec![0.0; n],
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            gt_border: vec![0.0; n],
        }
    }

    /// Evaluates V at the flat coordinates `x` and writes ∂V/∂x into `grad`.
    /// Returns `+inf` when a term overflows and NaN for coincident points.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn evaluate(
        &mut self,
        x: &[f64],
        sigma: u32,
        s: f64,
        alpha: f64,
        eps: f64,
        lambda: f64,
        grad: &mut [f64],
    ) -> f64 {
        let n = x.len() / 2;
        let log_lambda = lambda.ln();
        for i in 0..n {
            let (t, u) = (x[2 * i], x[2 * i + 1]);
            let sin_t = t.sin();
            let radial = sin_t * sin_t * gamma(u, 0.0, sigma);
            self.px[i] = radial * u.cos();
            self.py[i] = radial * u.sin();
            let cos_t = t.cos();
            self.log_a[i] = (cos_t * cos_t + eps).ln();
            self.gx[i] = 0.0;
            self.gy[i] = 0.0;
            self.gt_border[i] = 0.0;
        }

        let mut value = 0.0;
        for i in 1..n {
            let (xi, yi, lai) = (self.px[i], self.py[i], self.log_a[i]);
            let mut gxi = 0.0;
            let mut gyi = 0.0;
            let mut fi = 0.0;
            for j in 0..i {
                let dx = xi - self.px[j];
                let dy = yi - self.py[j];
                let r2 = dx * dx + dy * dy;
                if r2 == 0.0 {
                    return f64::NAN;
                }
                let expo = s * (log_lambda - r2.ln()) + alpha * (lai + self.log_a[j]);
                if expo < -745.0 {
                    continue;
                }
                let term = expo.exp();
                if !term.is_finite() {
                    return f64::INFINITY;
                }
                value += term;
                // ∂term/∂P_i = −2s·term/r² · (P_i − P_j)
                let c = -2.0 * s * term / r2;
                gxi += c * dx;
                gyi += c * dy;
                self.gx[j] -= c * dx;
                self.gy[j] -= c * dy;
                fi += term;
                self.gt_border[j] += term;
            }
            self.gx[i] += gxi;
            self.gy[i] += gyi;
            self.gt_border[i] += fi;
        }

        for i in 0..n {
            let (t, u) = (x[2 * i], x[2 * i + 1]);
            let (sin_t, cos_t) = t.sin_cos();
            let (sin_u, cos_u) = u.sin_cos();
            let g = gamma(u, 0.0, sigma);
            let gp = gamma_du(u, 0.0, sigma);
            let sin_2t = 2.0 * sin_t * cos_t;
            let sin2 = sin_t * sin_t;
            let dx_dt = sin_2t * g * cos_u;
            let dy_dt = sin_2t * g * sin_u;
            let dx_du = sin2 * (gp * cos_u - g * sin_u);
            let dy_du = sin2 * (gp * sin_u + g * cos_u);
            // ∂ ln F/∂t_i = α · (−sin 2t_i) / (cos²t_i + ε)
            let dlogf_dt = alpha * (-sin_2t) / self.log_a[i].exp();
            grad[2 * i] = self.gx[i] * dx_dt + self.gy[i] * dy_dt + self.gt_border[i] * dlogf_dt;
            grad[2 * i + 1] = self.gx[i] * dx_du + self.gy[i] * dy_du;
        }
        // huge but finite terms can still overflow the chain rule
        if grad.iter().any(|g| !g.is_finite()) {
            return f64::INFINITY;
        }
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<ParamPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| ParamPoint::new(rng.gen_range(0.2..1.4), rng.gen_range(0.05..6.2)))
            .collect()
    }

    #[test]
    fn alpha_zero_drops_border_factor() {
        let pts = random_points(6, 1);
        let e = energy(&pts, 5, 3.0, 0.0, 0.05).unwrap();
        let pos: Vec<_> = pts.iter().map(|p| p.to_point(5)).collect();
        let mut expected = 0.0;
        for i in 0..pos.len() {
            for j in 0..i {
                expected += (e.lambda / pos[i].dist_sq(pos[j])).powf(3.0);
            }
        }
        assert!((e.value - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn two_points_have_unit_energy() {
        let pts = random_points(2, 9);
        let e = energy(&pts, 7, 1234.0, 0.0, 0.05).unwrap();
        assert!((e.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_frozen_lambda_finite_differences() {
        let pts = random_points(5, 3);
        let (s, alpha, eps) = (6.0, -0.4, 0.05);
        let e = energy(&pts, 5, s, alpha, eps).unwrap();
        let h = 1e-6;
        for k in 0..pts.len() * 2 {
            let mut plus = pts.clone();
            let mut minus = pts.clone();
            if k % 2 == 0 {
                plus[k / 2].t += h;
                minus[k / 2].t -= h;
            } else {
                plus[k / 2].u += h;
                minus[k / 2].u -= h;
            }
            let fp = energy_with_lambda(&plus, 5, s, alpha, eps, e.lambda).unwrap().value;
            let fm = energy_with_lambda(&minus, 5, s, alpha, eps, e.lambda).unwrap().value;
            let fd = (fp - fm) / (2.0 * h);
            let scale = e.gradient[k].abs().max(1e-3);
            assert!((fd - e.gradient[k]).abs() / scale < 1e-6, "k={k} fd={fd} an={}", e.gradient[k]);
        }
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let p = ParamPoint::new(0.7, 1.0);
        assert!(matches!(energy(&[p, p], 4, 10.0, 0.0, 0.05), Err(Error::Degenerate(_))));
    }
}
