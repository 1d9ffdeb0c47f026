//! Limited-memory BFGS with a backtracking Armijo line search.
//!
//! Trial points with `+inf` objective are treated as overshoots and the step
//! is shortened; a NaN objective aborts with the last finite iterate.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once `max |g_i| <= grad_tol`.
    pub grad_tol: f64,
    /// Largest allowed change of any coordinate in a single step.
    pub max_step: f64,
    /// Stop when the relative decrease of f stays below this for `stall_iters` iterations.
    pub rel_tol: f64,
    pub stall_iters: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 8,
            max_iter: 1000,
            grad_tol: 1e-10,
            max_step: 0.2,
            rel_tol: 1e-14,
            stall_iters: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    MaxIter,
    Stalled,
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_inf: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective value after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NanObjective {
    pub last: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`, which writes the gradient into its second argument and returns the value.
pub fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &LbfgsOptions) -> Result<LbfgsOutcome, NanObjective>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    if fx.is_nan() || g.iter().any(|v| v.is_nan()) {
        return Err(NanObjective { last: x });
    }
    let mut trace = vec![fx];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut stall = 0;
    let mut fresh_restart = false;
    let mut iterations = 0;
    let termination;

    loop {
        let gnorm = inf_norm(&g);
        if gnorm <= opts.grad_tol {
            termination = Termination::Gradient;
            break;
        }
        if iterations >= opts.max_iter {
            termination = Termination::MaxIter;
            break;
        }
        iterations += 1;

        // two-loop recursion
        dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &dir);
            dir.iter_mut().zip(y).for_each(|(d, yi)| *d -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            dir.iter_mut().zip(s).for_each(|(d, si)| *d += (a - b) * si);
        }
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir.iter_mut().zip(&g).for_each(|(d, gi)| *d = -gi);
            slope = dot(&g, &dir);
        }

        let dnorm = inf_norm(&dir);
        let mut step = if history.is_empty() {
            (opts.max_step / dnorm).min(1.0 / gnorm.max(1.0))
        } else {
            1.0
        };
        if step * dnorm > opts.max_step {
            step = opts.max_step / dnorm;
        }

        let mut accepted = false;
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f(&x_new, &mut g_new);
            // the gradient is only meaningful at finite trial values
            if f_new.is_nan() || (f_new.is_finite() && g_new.iter().any(|v| v.is_nan())) {
                return Err(NanObjective { last: x });
            }
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= if f_new.is_finite() { 0.5 } else { 0.1 };
        }
        if !accepted {
            // a stale curvature model can point nowhere useful near kinks
            if !history.is_empty() {
                history.clear();
                continue;
            }
            termination = Termination::LineSearch;
            break;
        }

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy.is_finite() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let decrease = fx - f_new;
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        fx = f_new;
        trace.push(fx);

        if decrease <= opts.rel_tol * fx.abs().max(f64::MIN_POSITIVE) {
            stall += 1;
            if stall >= opts.stall_iters {
                if !fresh_restart {
                    history.clear();
                    stall = 0;
                    fresh_restart = true;
                    continue;
                }
                termination = Termination::Stalled;
                break;
            }
        } else {
            stall = 0;
            fresh_restart = false;
        }
    }

    Ok(LbfgsOutcome {
        grad_inf: inf_norm(&g),
        x,
        f: fx,
        iterations,
        termination,
        trace,
    })
}
