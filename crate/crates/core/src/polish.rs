//! Contact polish by sequential linear programming.
//!
//! The annealed energy only approaches a local maximum of the minimal
//! distance as `s → ∞`, and its parametrization has kinks along the vertex
//! rays. This pass works directly on Cartesian centers: each step maximizes
//! the linearized minimal distance inside a box trust region, subject to the
//! (exactly linear) containment constraints. The linearization
//! `|c + Δ| ≥ ê·(c + Δ)` is a lower bound, so every accepted step is a
//! genuine improvement.

use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Once;

use minilp::{ComparisonOp, OptimizationDirection, Problem, Solution};

use crate::configuration::{closest_pair, Configuration};
use crate::error::Result;
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolishOptions {
    pub max_iter: usize,
    /// Initial trust radius relative to the minimal distance.
    pub initial_radius: f64,
    /// Stop once the trust radius falls below this, relative to the minimal distance.
    pub min_radius: f64,
}

impl Default for PolishOptions {
    fn default() -> Self {
        Self {
            max_iter: 400,
            initial_radius: 1e-2,
            min_radius: 1e-15,
        }
    }
}

/// Solves `lp`, treating a panic inside minilp (it unwraps singular bases
/// internally) as a failed solve.
pub(crate) fn solve_lp(lp: &Problem) -> Option<Solution> {
    static QUIET: Once = Once::new();
    QUIET.call_once(|| {
        let previous = panic::take_hook();
        panic::set_hook(Box::new(move |info| {
            if !info.location().is_some_and(|l| l.file().contains("minilp")) {
                previous(info);
            }
        }));
    });
    panic::catch_unwind(AssertUnwindSafe(|| lp.solve()))
        .ok()?
        .ok()
}

pub(crate) fn min_distance(centers: &[Point2]) -> f64 {
    if centers.len() < 2 {
        return f64::INFINITY;
    }
    closest_pair(centers).2
}

/// Pushes `p` back inside the unit inner polygon when roundoff left it outside.
pub(crate) fn clamp_inside(p: Point2, normals: &[Point2], apothem: f64) -> Point2 {
    let mut q = p;
    for n in normals {
        let excess = q.dot(*n) - apothem;
        if excess > 0.0 {
            q = q - *n * excess;
        }
    }
    q
}

/// One LP step with box trust radius `tau`. Returns the proposed centers and
/// the predicted gain of the minimal distance.
fn lp_step(centers: &[Point2], d: f64, tau: f64, normals: &[Point2], apothem: f64) -> Option<(Vec<Point2>, f64)> {
    let n = centers.len();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n)
        .map(|_| (lp.add_var(0.0, (-tau, tau)), lp.add_var(0.0, (-tau, tau))))
        .collect();
    // gain of the minimal distance over d
    let gain = lp.add_var(1.0, (-4.0 * tau, f64::INFINITY));

    let reach = d + 4.0 * std::f64::consts::SQRT_2 * tau * 1.01;
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = centers[i] - centers[j];
            let dist = diff.norm();
            if dist > reach {
                continue;
            }
            let e = diff * (1.0 / dist);
            let (xi, yi) = vars[i];
            let (xj, yj) = vars[j];
            lp.add_constraint(
                &[(xi, e.x), (yi, e.y), (xj, -e.x), (yj, -e.y), (gain, -1.0)],
                ComparisonOp::Ge,
                d - dist,
            );
        }
    }
    let edge_reach = std::f64::consts::SQRT_2 * tau * 1.01;
    for (i, c) in centers.iter().enumerate() {
        for nk in normals {
            let slack = apothem - c.dot(*nk);
            if slack <= edge_reach {
                let (x, y) = vars[i];
                lp.add_constraint(&[(x, nk.x), (y, nk.y)], ComparisonOp::Le, slack.max(0.0));
            }
        }
    }
    let sol = solve_lp(&lp)?;
    let next = centers
        .iter()
        .zip(&vars)
        .map(|(c, (x, y))| clamp_inside(*c + Point2::new(sol[*x], sol[*y]), normals, apothem))
        .collect();
    Some((next, sol[gain]))
}

/// Outward unit normals of the inner polygon edges; edge `k` spans the vertices
/// at angles `2πk/σ` and `2π(k+1)/σ`.
pub(crate) fn edge_normals(sigma: u32) -> Vec<Point2> {
    let s = sigma as f64;
    (0..sigma)
        .map(|k| {
            let a = (2 * k + 1) as f64 * PI / s;
            Point2::new(a.cos(), a.sin())
        })
        .collect()
}

/// Raises the minimal distance of `cfg` to a nearby local maximum.
pub fn polish(cfg: &Configuration, opts: &PolishOptions) -> Result<Configuration> {
    let apothem = (PI / cfg.sigma as f64).cos();
    let normals = edge_normals(cfg.sigma);
    let mut centers: Vec<Point2> = cfg
        .unit_centers()
        .into_iter()
        .map(|c| clamp_inside(c, &normals, apothem))
        .collect();
    if centers.len() < 2 {
        return Ok(cfg.clone());
    }
    let mut d = min_distance(&centers);
    let mut tau = opts.initial_radius * d;
    for _ in 0..opts.max_iter {
        if tau < opts.min_radius * d {
            break;
        }
        match lp_step(&centers, d, tau, &normals, apothem) {
            Some((next, predicted)) => {
                let d_next = min_distance(&next);
                if d_next > d * (1.0 + 4.0 * f64::EPSILON) {
                    let actual = d_next - d;
                    centers = next;
                    d = d_next;
                    if actual >= 0.9 * predicted {
                        tau = (2.0 * tau).min(0.1 * d);
                    } else if actual < 0.25 * predicted {
                        tau *= 0.5;
                    }
                } else {
                    tau *= 0.25;
                }
            }
            None => tau *= 0.25,
        }
    }
    let out = Configuration::from_unit_centers(cfg.spec(), &centers)?;
    if out.rho() >= cfg.rho() {
        let mut out = out;
        out.convention = cfg.convention;
        out.provenance = cfg.provenance.clone();
        Ok(out.tag("polish"))
    } else {
        Ok(cfg.clone())
    }
}
