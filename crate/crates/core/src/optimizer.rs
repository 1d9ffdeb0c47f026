//! Annealed repulsion with border repulsion and a multi-restart driver.
//!
//! One run starts from uniformly sampled centers and minimizes the energy at
//! a geometric sequence of exponents `s_in, κ·s_in, …, s_fin`, each stage
//! seeded with the previous minimizer. As `s` grows the repulsion becomes a
//! contact interaction and the minimal distance approaches a local maximum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::energy::{min_sq_distance, Workspace};
use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_with, ParamPoint, PolygonSpec};
use crate::lbfgs::{self, LbfgsOptions};
use crate::metrics::packing_fraction;
use crate::polish::{polish, PolishOptions};

/// How the border-repulsion exponent α follows the annealing exponent s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSchedule {
    /// `α(s) = α₀ · s_in / s`
    Decay { alpha0: f64 },
    Constant { alpha: f64 },
}

impl AlphaSchedule {
    pub fn alpha(&self, s: f64, s_in: f64) -> f64 {
        match *self {
            AlphaSchedule::Decay { alpha0 } => alpha0 * s_in / s,
            AlphaSchedule::Constant { alpha } => alpha,
        }
    }

    fn max_alpha(&self) -> f64 {
        match *self {
            AlphaSchedule::Decay { alpha0 } => alpha0,
            AlphaSchedule::Constant { alpha } => alpha,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub s_in: f64,
    pub s_fin: f64,
    pub kappa: f64,
    pub alpha_schedule: AlphaSchedule,
    pub eps_border: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Stop a stage once `max |∂(V/s)|` falls below this.
    pub grad_tol: f64,
    pub max_iter_per_s: usize,
    /// Finish each run with the contact polish of [`crate::polish`].
    #[serde(default = "default_true")]
    pub polish: bool,
}

fn default_true() -> bool {
    true
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            s_in: 10.0,
            s_fin: 1e6,
            kappa: 1.8,
            alpha_schedule: AlphaSchedule::Decay { alpha0: -0.5 },
            eps_border: 0.05,
            restarts: 1,
            seed: 0,
            grad_tol: 1e-12,
            max_iter_per_s: 400,
            polish: true,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if !(self.kappa > 1.0) {
            return bad("kappa must exceed 1");
        }
        if !(self.s_in >= 1.0) || !(self.s_fin >= self.s_in) {
            return bad("need 1 <= s_in <= s_fin");
        }
        if !(self.eps_border > 0.0) {
            return bad("eps_border must be positive");
        }
        if self.alpha_schedule.max_alpha() > 0.0 {
            return bad("alpha must be non-positive");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        Ok(())
    }

    /// The exponent ladder `s_in, κ s_in, …` capped by and ending at `s_fin`.
    pub fn exponents(&self) -> Vec<f64> {
        let mut out = vec![self.s_in];
        let mut s = self.s_in;
        while s < self.s_fin {
            s = (s * self.kappa).min(self.s_fin);
            out.push(s);
        }
        out
    }
}

/// One line of the optional run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub run_index: usize,
    pub s: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub d_min: f64,
    pub rho: f64,
}

#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub points: Vec<ParamPoint>,
    pub lambda: f64,
    /// Energy (at the frozen λ) after each accepted step.
    pub trace: Vec<f64>,
}

fn flatten(points: &[ParamPoint]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.t, p.u]).collect()
}

fn unflatten(x: &[f64]) -> Vec<ParamPoint> {
    x.chunks_exact(2).map(|c| ParamPoint::new(c[0], c[1])).collect()
}

/// Minimizes the energy at fixed `(s, α, ε)` with λ frozen at the minimal
/// squared distance of the starting points.
#[allow(clippy::too_many_arguments)]
pub fn local_minimize_traced(
    points: &[ParamPoint],
    sigma: u32,
    s: f64,
    alpha: f64,
    eps: f64,
    grad_tol: f64,
    max_iter: usize,
) -> Result<LocalOutcome> {
    if points.len() < 2 {
        return Err(Error::InvalidInput("need at least two points".into()));
    }
    let lambda = min_sq_distance(points, sigma);
    if !(lambda > 0.0) {
        return Err(Error::Degenerate("coincident points".into()));
    }
    let mut ws = Workspace::new(points.len());
    let inv_s = 1.0 / s;
    let objective = |x: &[f64], g: &mut [f64]| {
        let v = ws.evaluate(x, sigma, s, alpha, eps, lambda, g);
        g.iter_mut().for_each(|gi| *gi *= inv_s);
        v * inv_s
    };
    let opts = LbfgsOptions {
        memory: 8,
        max_iter,
        grad_tol,
        max_step: (2.0 / s.sqrt()).min(0.3),
        rel_tol: 1e-15,
        stall_iters: 4,
    };
    let out = lbfgs::minimize(objective, flatten(points), &opts).map_err(|e| Error::NonFiniteEnergy {
        last: unflatten(&e.last),
    })?;
    Ok(LocalOutcome {
        points: unflatten(&out.x),
        lambda,
        trace: out.trace.iter().map(|v| v * s).collect(),
    })
}

pub fn local_minimize(
    points: &[ParamPoint],
    sigma: u32,
    s: f64,
    alpha: f64,
    eps: f64,
    grad_tol: f64,
    max_iter: usize,
) -> Result<Vec<ParamPoint>> {
    local_minimize_traced(points, sigma, s, alpha, eps, grad_tol, max_iter).map(|o| o.points)
}

/// Runs the annealing ladder starting from `start`.
pub fn anneal_from(
    spec: PolygonSpec,
    start: Vec<ParamPoint>,
    params: &SolverParams,
    run_index: usize,
    log: &mut dyn FnMut(StageRecord),
) -> Result<Configuration> {
    params.validate()?;
    let sigma = spec.sigma();
    let n = start.len();
    let mut points = start;
    for s in params.exponents() {
        let alpha = params.alpha_schedule.alpha(s, params.s_in);
        let out = local_minimize_traced(
            &points,
            sigma,
            s,
            alpha,
            params.eps_border,
            params.grad_tol,
            params.max_iter_per_s,
        )?;
        points = out.points;
        let lambda = min_sq_distance(&points, sigma);
        let d_min = lambda.sqrt();
        log(StageRecord {
            run_index,
            s,
            v: out.trace.last().copied().unwrap_or(f64::NAN),
            d_min,
            rho: packing_fraction(n, 0.5 * d_min, sigma),
        });
    }
    Configuration::from_params(spec, points)
}

/// Deterministic per-run seed from the master seed and the run index.
pub fn run_seed(seed: u64, run_index: usize) -> u64 {
    // splitmix64 finalizer over the combined input
    let mut z = seed ^ (run_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn random_start(spec: PolygonSpec, n: usize, seed: u64) -> Vec<ParamPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_uniform_with(&mut rng, n, spec.sigma())
        .into_iter()
        .map(|p| ParamPoint::from_point(p, spec.sigma()))
        .collect()
}

/// One full annealing run from a uniformly sampled start.
pub fn anneal_run(spec: PolygonSpec, n: usize, params: &SolverParams, run_seed: u64) -> Result<Configuration> {
    anneal_run_logged(spec, n, params, run_seed, 0, &mut |_| {})
}

pub fn anneal_run_logged(
    spec: PolygonSpec,
    n: usize,
    params: &SolverParams,
    run_seed: u64,
    run_index: usize,
    log: &mut dyn FnMut(StageRecord),
) -> Result<Configuration> {
    if n < 2 {
        return Err(Error::InvalidInput("anneal_run needs n >= 2".into()));
    }
    let start = random_start(spec, n, run_seed);
    let mut cfg = anneal_from(spec, start, params, run_index, log)?.tag(format!("anneal:seed={run_seed}"));
    if params.polish {
        cfg = polish(&cfg, &PolishOptions::default())?;
    }
    Ok(cfg)
}

/// Best of `params.restarts` independent runs, compared by ρ with ties going
/// to the lower run index. Runs that fail on degenerate input are skipped.
pub fn multi_restart(spec: PolygonSpec, n: usize, params: &SolverParams) -> Result<Configuration> {
    multi_restart_logged(spec, n, params, &|_| {})
}

pub fn multi_restart_logged(
    spec: PolygonSpec,
    n: usize,
    params: &SolverParams,
    log: &(dyn Fn(StageRecord) + Sync),
) -> Result<Configuration> {
    params.validate()?;
    let best = (0..params.restarts)
        .into_par_iter()
        .filter_map(|k| {
            let mut sink = |rec: StageRecord| log(rec);
            anneal_run_logged(spec, n, params, run_seed(params.seed, k), k, &mut sink)
                .ok()
                .map(|cfg| (k, cfg))
        })
        .reduce_with(better_of);
    match best {
        Some((k, cfg)) => Ok(cfg.tag(format!("multi_restart:best_run={k}"))),
        None => Err(Error::Degenerate("every restart failed".into())),
    }
}

/// Associative reduction: higher ρ wins, equal ρ goes to the lower index.
pub(crate) fn better_of(a: (usize, Configuration), b: (usize, Configuration)) -> (usize, Configuration) {
    let (ra, rb) = (a.1.rho(), b.1.rho());
    if rb > ra || (rb == ra && b.0 < a.0) {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{interior_point, Convention};

    #[test]
    fn exponent_ladder_ends_at_s_fin() {
        let p = SolverParams::default();
        let ladder = p.exponents();
        assert_eq!(ladder[0], 10.0);
        assert_eq!(*ladder.last().unwrap(), 1e6);
        assert!(ladder.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = SolverParams::default();
        p.kappa = 1.0;
        assert!(p.validate().is_err());
        let mut p = SolverParams::default();
        p.alpha_schedule = AlphaSchedule::Constant { alpha: 0.1 };
        assert!(p.validate().is_err());
    }

    #[test]
    fn local_minimum_is_a_fixed_point() {
        // two points at opposite corners of the square cannot separate further
        let pts = vec![
            ParamPoint::new(std::f64::consts::FRAC_PI_2, 0.0),
            ParamPoint::new(std::f64::consts::FRAC_PI_2, std::f64::consts::PI),
        ];
        let out = local_minimize(&pts, 4, 100.0, 0.0, 0.05, 1e-10, 50).unwrap();
        for (a, b) in out.iter().zip(&pts) {
            assert!(interior_point(*a, 4).dist(interior_point(*b, 4)) < 1e-14, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn local_minimize_does_not_increase_energy() {
        let spec = PolygonSpec::new(5, Convention::I).unwrap();
        let start = random_start(spec, 9, 4);
        let out = local_minimize_traced(&start, 5, 30.0, -0.2, 0.05, 1e-12, 200).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.trace.last().unwrap() <= &out.trace[0]);
    }

    #[test]
    fn seeds_are_distinct_per_run() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|k| run_seed(7, k)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
