//! Post-processing of solver output: random shaking, contact-variance
//! minimization and hole filling.
//!
//! All lengths are handled in the unit-circumradius inner polygon (convention
//! I); the relative parameters below are fractions of the current minimal
//! center distance.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::configuration::{Configuration, AUDIT_CONTAINMENT_TOL, AUDIT_OVERLAP_TOL};
use crate::error::{Error, Result};
use crate::geometry::{border_clearance, ParamPoint, Point2};
use crate::optimizer::{anneal_from, SolverParams};
use crate::polish::{clamp_inside, edge_normals, min_distance, polish, PolishOptions};
use crate::topology::{clip, contact_census, EdgeLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineParams {
    /// Contact threshold relative to the minimal distance.
    pub eta: f64,
    /// Largest move of a variance step relative to the minimal distance.
    pub step_scale: f64,
    pub runs_per_cycle: usize,
    pub shrink_factor: f64,
    /// Radius of the random shake displacement relative to the minimal distance.
    pub shake_amplitude: f64,
    /// Shaking stops once the amplitude drops below this.
    pub min_shake_amplitude: f64,
    pub max_cycles: usize,
    pub shake_schedule: SolverParams,
    /// Relative clearance tolerance for hole detection.
    pub hole_tol: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            step_scale: 1e-4,
            runs_per_cycle: 50,
            shrink_factor: 10.0,
            shake_amplitude: 0.1,
            min_shake_amplitude: 1e-4,
            max_cycles: 12,
            shake_schedule: SolverParams {
                s_in: 100.0,
                ..SolverParams::default()
            },
            hole_tol: 1e-3,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if !(self.eta > 0.0) || !(self.step_scale > 0.0) {
            return bad("eta and step_scale must be positive");
        }
        if !(self.shrink_factor > 1.0) {
            return bad("shrink_factor must exceed 1");
        }
        if !(self.shake_amplitude >= 0.0) || self.runs_per_cycle == 0 {
            return bad("need shake_amplitude >= 0 and runs_per_cycle >= 1");
        }
        if !(self.hole_tol >= 0.0 && self.hole_tol < 1.0) {
            return bad("hole_tol must lie in [0, 1)");
        }
        self.shake_schedule.validate()
    }
}

/// Near-contacts of a configuration. Distances are in unit inner circumradius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub pairs: Vec<(usize, usize, f64)>,
    pub border_indices: BTreeSet<usize>,
    pub free_indices: BTreeSet<usize>,
    pub threshold: f64,
}

/// Pairs with `0 ≤ d − d_min < eta` (the closest pair included), disks within
/// `eta` of the border, and disks without any pair contact.
pub fn contact_set(cfg: &Configuration, eta: f64) -> ContactSet {
    let centers = cfg.unit_centers();
    let d_min = min_distance(&centers);
    let mut pairs = Vec::new();
    let mut touched = vec![false; centers.len()];
    for i in 0..centers.len() {
        for j in (i + 1)..centers.len() {
            let d = centers[i].dist(centers[j]);
            if d - d_min < eta {
                pairs.push((i, j, d));
                touched[i] = true;
                touched[j] = true;
            }
        }
    }
    let border_indices = centers
        .iter()
        .enumerate()
        .filter(|(_, c)| border_clearance(**c, cfg.sigma, 1.0) < eta)
        .map(|(i, _)| i)
        .collect();
    let free_indices = (0..centers.len()).filter(|&i| !touched[i]).collect();
    ContactSet {
        pairs,
        border_indices,
        free_indices,
        threshold: eta,
    }
}

/// Σ = ⟨q²⟩ − ⟨q⟩² over the squared pair distances `q = (d/unit)²`.
pub fn contact_variance(centers: &[Point2], pairs: &[(usize, usize, f64)], unit: f64) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let q: Vec<f64> = pairs
        .iter()
        .map(|&(i, j, _)| centers[i].dist_sq(centers[j]) / (unit * unit))
        .collect();
    let mean = q.iter().sum::<f64>() / q.len() as f64;
    q.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / q.len() as f64
}

fn inner_apothem(sigma: u32) -> f64 {
    (PI / sigma as f64).cos()
}

fn perturbed(centers: &[Point2], amplitude: f64, sigma: u32, rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let normals = edge_normals(sigma);
    let apothem = inner_apothem(sigma);
    centers
        .iter()
        .map(|c| {
            let radius = amplitude * rng.gen::<f64>().sqrt();
            let angle = rng.gen::<f64>() * 2.0 * PI;
            let moved = *c + Point2::new(angle.cos(), angle.sin()) * radius;
            clamp_inside(moved, &normals, apothem)
        })
        .collect()
}

fn rebuild(cfg: &Configuration, centers: &[Point2], tag: &str) -> Result<Configuration> {
    let mut out = Configuration::from_unit_centers(cfg.spec(), centers)?;
    out.provenance = cfg.provenance.clone();
    Ok(out.tag(tag))
}

fn reanneal(cfg: &Configuration, centers: &[Point2], schedule: &SolverParams) -> Result<Configuration> {
    let start: Vec<ParamPoint> = centers.iter().map(|c| ParamPoint::from_point(*c, cfg.sigma)).collect();
    let mut out = anneal_from(cfg.spec(), start, schedule, 0, &mut |_| {})?;
    if schedule.polish {
        out = polish(&out, &PolishOptions::default())?;
    }
    out.audit(AUDIT_OVERLAP_TOL, AUDIT_CONTAINMENT_TOL)?;
    Ok(out)
}

/// Random shaking: perturb all centers, re-anneal, keep only density gains and
/// shrink the amplitude after a full cycle without one.
pub fn shake(cfg: &Configuration, params: &RefineParams, seed: u64) -> Result<Configuration> {
    params.validate()?;
    if cfg.n < 2 {
        return Ok(cfg.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = cfg.clone();
    let mut amplitude = params.shake_amplitude;
    let mut accepted = 0usize;
    for _ in 0..params.max_cycles {
        let d = best.min_distance();
        let mut improved = false;
        for _ in 0..params.runs_per_cycle {
            let start = perturbed(&best.unit_centers(), amplitude * d, cfg.sigma, &mut rng);
            let Ok(candidate) = reanneal(&best, &start, &params.shake_schedule) else {
                continue;
            };
            if candidate.rho() > best.rho() {
                let mut next = candidate;
                next.convention = cfg.convention;
                next.provenance = best.provenance.clone();
                best = next;
                improved = true;
                accepted += 1;
            }
        }
        if !improved {
            amplitude /= params.shrink_factor;
            if amplitude < params.min_shake_amplitude {
                break;
            }
        }
    }
    if accepted == 0 {
        return Ok(cfg.clone());
    }
    Ok(best.tag(format!("shake:seed={seed}")))
}

/// Result of [`variance_refine`].
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceOutcome {
    pub config: Configuration,
    pub variance_before: f64,
    pub variance: f64,
    pub rho_before: f64,
    pub rho: f64,
    pub accepted: usize,
    /// (ρ, Σ) after every accepted step.
    pub trace: Vec<(f64, f64)>,
}

/// How one disk may move during a variance step.
#[derive(Debug, Clone, Copy)]
enum Freedom {
    Fixed,
    /// Slides along the unit tangent of a border edge.
    Slide(Point2),
    Free,
}

struct Layout {
    /// Column of each disk's first coordinate.
    column: Vec<Option<usize>>,
    freedom: Vec<Freedom>,
    columns: usize,
}

fn layout(centers: &[Point2], set: &ContactSet, sigma: u32) -> (Layout, Vec<Point2>) {
    let normals = edge_normals(sigma);
    let apothem = inner_apothem(sigma);
    let mut snapped = centers.to_vec();
    let mut freedom = vec![Freedom::Fixed; centers.len()];
    for (i, c) in centers.iter().enumerate() {
        if set.free_indices.contains(&i) {
            continue;
        }
        if !set.border_indices.contains(&i) {
            freedom[i] = Freedom::Free;
            continue;
        }
        let near: Vec<Point2> = normals
            .iter()
            .copied()
            .filter(|n| apothem - c.dot(*n) < set.threshold)
            .collect();
        // put the disk exactly on its edge(s)
        let mut p = *c;
        for n in &near {
            p = p + *n * (apothem - p.dot(*n));
        }
        if near.len() == 2 {
            // corner: intersection of both edge lines
            let (a, b) = (near[0], near[1]);
            let det = a.cross(b);
            p = Point2::new(apothem * (b.y - a.y) / det, apothem * (a.x - b.x) / det);
        } else if near.len() == 1 {
            freedom[i] = Freedom::Slide(Point2::new(-near[0].y, near[0].x));
        }
        snapped[i] = p;
    }
    let mut column = vec![None; centers.len()];
    let mut columns = 0;
    for (i, f) in freedom.iter().enumerate() {
        match f {
            Freedom::Fixed => {}
            Freedom::Slide(_) => {
                column[i] = Some(columns);
                columns += 1;
            }
            Freedom::Free => {
                column[i] = Some(columns);
                columns += 2;
            }
        }
    }
    (
        Layout {
            column,
            freedom,
            columns,
        },
        snapped,
    )
}

fn displace(centers: &[Point2], lay: &Layout, step: &DVector<f64>) -> Vec<Point2> {
    centers
        .iter()
        .enumerate()
        .map(|(i, c)| match (lay.freedom[i], lay.column[i]) {
            (Freedom::Slide(t), Some(k)) => *c + t * step[k],
            (Freedom::Free, Some(k)) => *c + Point2::new(step[k], step[k + 1]),
            _ => *c,
        })
        .collect()
}

/// Gauss–Newton step for the residuals `(q_k − ⟨q⟩)/√p`, capped in max norm.
fn gauss_newton_step(
    centers: &[Point2],
    pairs: &[(usize, usize, f64)],
    lay: &Layout,
    unit: f64,
) -> Option<DVector<f64>> {
    let p = pairs.len();
    if lay.columns == 0 {
        return None;
    }
    let scale = 1.0 / (unit * unit * (p as f64).sqrt());
    let q: Vec<f64> = pairs
        .iter()
        .map(|&(i, j, _)| centers[i].dist_sq(centers[j]))
        .collect();
    let mean = q.iter().sum::<f64>() / p as f64;
    let residual = DVector::from_iterator(p, q.iter().map(|v| (v - mean) * scale));
    let mut jac = DMatrix::<f64>::zeros(p, lay.columns);
    for (row, &(i, j, _)) in pairs.iter().enumerate() {
        let g = (centers[i] - centers[j]) * (2.0 * scale);
        for (k, sign) in [(i, 1.0), (j, -1.0)] {
            let g = g * sign;
            match (lay.freedom[k], lay.column[k]) {
                (Freedom::Slide(t), Some(c)) => jac[(row, c)] += g.dot(t),
                (Freedom::Free, Some(c)) => {
                    jac[(row, c)] += g.x;
                    jac[(row, c + 1)] += g.y;
                }
                _ => {}
            }
        }
    }
    // subtract the derivative of the mean
    for c in 0..lay.columns {
        let m = jac.column(c).sum() / p as f64;
        for row in 0..p {
            jac[(row, c)] -= m;
        }
    }
    let svd = jac.svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12;
    let step = svd.solve(&(-residual), cutoff).ok()?;
    step.iter().all(|v| v.is_finite()).then_some(step)
}

fn inside(centers: &[Point2], sigma: u32) -> bool {
    centers
        .iter()
        .all(|c| border_clearance(*c, sigma, 1.0) >= -AUDIT_CONTAINMENT_TOL)
}

/// Minimizes the spread Σ of squared near-contact distances. Pair disks move
/// freely, border disks slide along their edge, corner disks and disks without
/// contacts stay put. Only steps that raise ρ without raising Σ are kept.
pub fn variance_refine(cfg: &Configuration, params: &RefineParams) -> Result<VarianceOutcome> {
    params.validate()?;
    if cfg.n < 2 {
        return Err(Error::InvalidInput("variance refinement needs n >= 2".into()));
    }
    let sigma = cfg.sigma;
    let mut centers = cfg.unit_centers();
    let mut d = min_distance(&centers);
    let first = contact_set(cfg, params.eta * d);
    if first.pairs.is_empty() {
        return Err(Error::NoContacts(first.threshold));
    }
    let variance_before = contact_variance(&centers, &first.pairs, d);
    let rho_before = cfg.rho();
    let mut eta = params.eta;
    let mut step_scale = params.step_scale;
    let mut accepted = 0;
    let mut trace = Vec::new();
    let mut current = cfg.clone();
    let mut variance = variance_before;

    for _ in 0..params.max_cycles {
        let set = contact_set(&current, eta * d);
        let unit = d;
        let (lay, snapped) = layout(&centers, &set, sigma);
        let mut sigma_cur = contact_variance(&centers, &set.pairs, unit);
        variance = sigma_cur;
        if sigma_cur < 1e-30 {
            break;
        }
        let mut cap = step_scale * d;
        let mut base = snapped;
        let mut improved = false;
        for _ in 0..params.runs_per_cycle {
            let Some(mut step) = gauss_newton_step(&base, &set.pairs, &lay, unit) else {
                break;
            };
            let largest = step.amax();
            if largest > cap {
                step *= cap / largest;
            }
            let proposal = displace(&base, &lay, &step);
            let d_next = min_distance(&proposal);
            let s_next = contact_variance(&proposal, &set.pairs, unit);
            let candidate = if d_next > d && s_next <= sigma_cur && inside(&proposal, sigma) {
                rebuild(cfg, &proposal, "variance").ok().filter(|c| c.rho() > current.rho())
            } else {
                None
            };
            if let Some(candidate) = candidate {
                base = proposal;
                centers = candidate.unit_centers();
                d = candidate.min_distance();
                sigma_cur = s_next;
                current = candidate;
                accepted += 1;
                improved = true;
                variance = s_next;
                trace.push((current.rho(), s_next));
            } else {
                cap *= 0.5;
                if cap < 1e-18 * d {
                    break;
                }
            }
        }
        if !improved {
            eta /= params.shrink_factor;
            step_scale /= params.shrink_factor;
        }
    }
    if accepted == 0 {
        return Ok(VarianceOutcome {
            config: cfg.clone(),
            variance_before,
            variance: variance_before,
            rho_before,
            rho: rho_before,
            accepted,
            trace,
        });
    }
    let mut config = current;
    config.convention = cfg.convention;
    config.audit(AUDIT_OVERLAP_TOL, AUDIT_CONTAINMENT_TOL)?;
    let rho = config.rho();
    Ok(VarianceOutcome {
        config,
        variance_before,
        variance,
        rho_before,
        rho,
        accepted,
        trace,
    })
}

/// Distance from `q` to the nearest center.
fn clearance(q: Point2, centers: &[Point2]) -> f64 {
    centers.iter().map(|c| q.dist(*c)).fold(f64::INFINITY, f64::min)
}

/// Moves `q` uphill on the nearest-center distance by trust-region LP steps.
fn climb(mut q: Point2, centers: &[Point2], normals: &[Point2], apothem: f64, scale: f64) -> Point2 {
    let mut f = clearance(q, centers);
    let mut tau = 0.05 * scale;
    for _ in 0..100 {
        if tau < 1e-14 * scale {
            break;
        }
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let dx = lp.add_var(0.0, (-tau, tau));
        let dy = lp.add_var(0.0, (-tau, tau));
        let gain = lp.add_var(1.0, (-2.0 * tau, f64::INFINITY));
        for c in centers {
            let diff = q - *c;
            let dist = diff.norm();
            if dist > f + 3.0 * tau || dist == 0.0 {
                continue;
            }
            let e = diff * (1.0 / dist);
            lp.add_constraint(&[(dx, e.x), (dy, e.y), (gain, -1.0)], ComparisonOp::Ge, f - dist);
        }
        for n in normals {
            let slack = apothem - q.dot(*n);
            if slack <= 2.0 * tau {
                lp.add_constraint(&[(dx, n.x), (dy, n.y)], ComparisonOp::Le, slack.max(0.0));
            }
        }
        let Some(sol) = crate::polish::solve_lp(&lp) else {
            tau *= 0.25;
            continue;
        };
        let next = clamp_inside(q + Point2::new(sol[dx], sol[dy]), normals, apothem);
        let f_next = clearance(next, centers);
        if f_next > f {
            q = next;
            f = f_next;
            tau = (2.0 * tau).min(0.5 * scale);
        } else {
            tau *= 0.25;
        }
    }
    q
}

/// Sites inside the inner polygon where one more disk of radius `r` fits up to
/// the relative tolerance `tol_hole`, sorted by decreasing clearance and
/// pairwise at least `2r(1 − tol_hole)` apart.
pub fn find_holes(cfg: &Configuration, tol_hole: f64) -> Vec<Point2> {
    let centers = cfg.unit_centers();
    let sigma = cfg.sigma;
    let normals = edge_normals(sigma);
    let apothem = inner_apothem(sigma);
    let need = 2.0 * cfg.r * (1.0 - tol_hole);
    let inner: Vec<(Point2, EdgeLabel)> = crate::geometry::polygon_vertices(sigma, 1.0)
        .into_iter()
        .enumerate()
        .map(|(k, p)| (p, EdgeLabel::Boundary(k as u32)))
        .collect();
    if centers.is_empty() {
        return Vec::new();
    }

    // corners of the Voronoi cells clipped to the inner polygon
    let mut candidates = Vec::new();
    for (i, pi) in centers.iter().enumerate() {
        let mut others: Vec<usize> = (0..centers.len()).filter(|&j| j != i).collect();
        others.sort_by(|&a, &b| pi.dist_sq(centers[a]).total_cmp(&pi.dist_sq(centers[b])));
        let mut poly = inner.clone();
        for j in others {
            let reach = poly.iter().map(|(p, _)| p.dist_sq(*pi)).fold(0.0, f64::max);
            if 0.25 * pi.dist_sq(centers[j]) > reach {
                break;
            }
            let a = centers[j] - *pi;
            let b = a.dot((*pi + centers[j]) * 0.5);
            poly = clip(&poly, a, b, EdgeLabel::Site(j));
            if poly.is_empty() {
                break;
            }
        }
        candidates.extend(poly.into_iter().map(|(p, _)| p));
    }

    let mut sites: Vec<(Point2, f64)> = candidates
        .into_iter()
        .filter(|p| clearance(*p, &centers) >= 0.5 * need)
        .map(|p| {
            let q = climb(clamp_inside(p, &normals, apothem), &centers, &normals, apothem, cfg.r);
            (q, clearance(q, &centers))
        })
        .filter(|(_, f)| *f >= need)
        .collect();
    sites.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut holes: Vec<Point2> = Vec::new();
    for (q, _) in sites {
        if holes.iter().all(|h| h.dist(q) >= need) {
            holes.push(q);
        }
    }
    holes
}

/// Adds `k` disks at the best holes of `cfg`.
pub fn insert_into_holes(cfg: &Configuration, k: usize, tol_hole: f64) -> Result<Configuration> {
    let holes = find_holes(cfg, tol_hole);
    if holes.len() < k {
        return Err(Error::InvalidInput(format!(
            "asked for {k} insertions but only {} holes exist",
            holes.len()
        )));
    }
    let mut centers = cfg.unit_centers();
    centers.extend(holes.into_iter().take(k));
    rebuild(cfg, &centers, &format!("insert:{k}"))
}

/// Border disks to relocate: fewest contacts first, preferring ones touching
/// an already chosen disk, seeded random tie-breaks.
fn pick_border_disks(cfg: &Configuration, count: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let census = contact_census(cfg, 1e-6);
    let centers = cfg.unit_centers();
    let mut pool: Vec<(usize, usize, u64)> = census
        .iter()
        .enumerate()
        .filter(|(_, c)| c.border > 0)
        .map(|(i, c)| (c.total(), i, rng.gen()))
        .collect();
    pool.sort_by_key(|&(total, _, tie)| (total, tie));
    let touching = |a: usize, b: usize| centers[a].dist(centers[b]) <= 2.0 * cfg.r * (1.0 + 1e-6);
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < count && !pool.is_empty() {
        let lowest = pool[0].0;
        let adjacent = pool
            .iter()
            .position(|&(total, i, _)| total <= lowest + 1 && chosen.iter().any(|&c| touching(c, i)));
        let at = adjacent.unwrap_or(0);
        chosen.push(pool.remove(at).1);
    }
    chosen
}

/// Moves border disks into the holes of `cfg`, shakes the result and returns
/// the denser of input and output.
pub fn fill_holes(cfg: &Configuration, params: &RefineParams, seed: u64) -> Result<Configuration> {
    params.validate()?;
    let holes = find_holes(cfg, params.hole_tol);
    if holes.is_empty() {
        return Ok(cfg.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let movers = pick_border_disks(cfg, holes.len(), &mut rng);
    let mut centers = cfg.unit_centers();
    for (&i, h) in movers.iter().zip(&holes) {
        centers[i] = *h;
    }
    let moved = rebuild(cfg, &centers, &format!("holes:{}", movers.len()))?;
    let shaken = shake(&moved, params, rng.gen())?;
    if shaken.rho() > cfg.rho() {
        let mut out = shaken;
        out.convention = cfg.convention;
        Ok(out)
    } else {
        Ok(cfg.clone())
    }
}
