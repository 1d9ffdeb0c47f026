//! Scale-invariant packing metrics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::configuration::Configuration;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::tour::{hamiltonian_cycle, held_karp, local_search_tour, tour_length, EXACT_TOUR_LIMIT};

/// Density of the hexagonal packing of the plane, π/√12.
pub const RHO_PLANE: f64 = 0.906_899_682_117_108_9;
/// A configuration is a necklace when its excess tour length δ is at most this.
pub const NECKLACE_TOL: f64 = 1e-10;
/// Default border/disk contact tolerance, relative to r.
pub const DEFAULT_CONTACT_TOL: f64 = 1e-9;
/// Node budget of the contact-graph cycle search.
const CYCLE_SEARCH_BUDGET: usize = 2_000_000;

/// Packing fraction of `n` disks of convention-I radius `r` in the σ-gon.
pub fn packing_fraction(n: usize, r: f64, sigma: u32) -> f64 {
    let a = PI / sigma as f64;
    let denom = r + a.cos();
    n as f64 * PI * r * r / (a.tan() * sigma as f64 * denom * denom)
}

/// Radius at which `n` disks would reach the plane density π/√12.
/// Infinite when the denominator is not positive (only for n = 1).
pub fn varsigma(n: usize, sigma: u32) -> f64 {
    let s = sigma as f64;
    let a = PI / s;
    let denom = (2.0 * 3f64.sqrt() * n as f64 * s / a.tan()).sqrt() - s;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    s * a.cos() / denom
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingMetrics {
    pub rho: f64,
    pub varsigma: f64,
    pub efficiency: f64,
    pub border_fraction: f64,
    pub border_count: usize,
    pub vertex_occupancy: f64,
    pub vertex_count: usize,
    pub necklace_excess: f64,
    pub tour_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecklaceReport {
    pub tour_length: f64,
    pub necklace_excess: f64,
    pub is_necklace: bool,
    /// Visiting order of the reported tour.
    pub order: Vec<usize>,
    /// Whether `tour_length` is the exact minimum (false for local-search upper bounds).
    pub exact: bool,
}

/// Indices of disks whose centers lie within `tol·r` of the inner polygon border.
pub fn border_disks(cfg: &Configuration, tol: f64) -> Vec<usize> {
    let limit = tol * cfg.r;
    cfg.unit_centers()
        .iter()
        .enumerate()
        .filter(|(_, c)| crate::geometry::border_clearance(**c, cfg.sigma, 1.0) <= limit)
        .map(|(i, _)| i)
        .collect()
}

/// Clearance of `p` from edge `k` of the unit inner polygon (edge k joins vertices k and k+1).
pub(crate) fn edge_clearance(p: Point2, sigma: u32, k: u32) -> f64 {
    let n = sigma as f64;
    let a = (2 * k + 1) as f64 * PI / n;
    (PI / n).cos() - (p.x * a.cos() + p.y * a.sin())
}

/// Polygon vertices nested by a disk touching both adjacent edges within `tol·r`.
pub fn occupied_vertices(cfg: &Configuration, tol: f64) -> Vec<u32> {
    let limit = tol * cfg.r;
    let centers = cfg.unit_centers();
    let sigma = cfg.sigma;
    (0..sigma)
        .filter(|&k| {
            let prev = (k + sigma - 1) % sigma;
            centers
                .iter()
                .any(|c| edge_clearance(*c, sigma, prev) <= limit && edge_clearance(*c, sigma, k) <= limit)
        })
        .collect()
}

/// Minimal closed tour through the centers and its excess over `2N·r`.
///
/// Exact for N ≤ 16. Above that the necklace question is settled by searching
/// a Hamiltonian cycle among pairs within `tol·2r` of contact; without such a
/// cycle the length is a local-search upper bound.
pub fn necklace_tour(cfg: &Configuration, tol: f64) -> Result<NecklaceReport> {
    if cfg.n < 2 {
        return Err(Error::InvalidInput("necklace_tour needs at least two disks".into()));
    }
    let centers = cfg.unit_centers();
    let diameter = 2.0 * cfg.r;
    let excess = |len: f64| len / (cfg.n as f64 * diameter) - 1.0;

    if cfg.n <= EXACT_TOUR_LIMIT {
        let (len, order) = held_karp(&centers);
        let d = excess(len);
        return Ok(NecklaceReport {
            tour_length: len,
            necklace_excess: d,
            is_necklace: d <= NECKLACE_TOL,
            order,
            exact: true,
        });
    }

    let adj = contact_graph(&centers, diameter, tol);
    if let Some(order) = hamiltonian_cycle(&adj, CYCLE_SEARCH_BUDGET) {
        let len = tour_length(&centers, &order);
        let d = excess(len);
        if d <= NECKLACE_TOL {
            return Ok(NecklaceReport {
                tour_length: len,
                necklace_excess: d,
                is_necklace: true,
                order,
                exact: true,
            });
        }
    }
    let (len, order) = local_search_tour(&centers);
    let d = excess(len);
    Ok(NecklaceReport {
        tour_length: len,
        necklace_excess: d,
        is_necklace: d <= NECKLACE_TOL,
        order,
        exact: false,
    })
}

/// Pairs whose distance is within `tol·diameter` of `diameter`.
pub fn contact_graph(centers: &[Point2], diameter: f64, tol: f64) -> Vec<Vec<usize>> {
    let limit = diameter * (1.0 + tol);
    let n = centers.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if centers[i].dist(centers[j]) <= limit {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

pub fn compute_metrics(cfg: &Configuration, contact_tol: f64) -> Result<PackingMetrics> {
    cfg.audit(contact_tol, contact_tol * cfg.r.max(f64::MIN_POSITIVE))?;
    let sigma = cfg.sigma;
    let s = sigma as f64;
    let perimeter_inner = 2.0 * s * (PI / s).sin();
    let border_count = border_disks(cfg, contact_tol).len();
    let vertex_count = occupied_vertices(cfg, contact_tol).len();
    let (tour_length, necklace_excess) = if cfg.n >= 2 {
        let rep = necklace_tour(cfg, contact_tol.max(NECKLACE_TOL * cfg.n as f64))?;
        (rep.tour_length, rep.necklace_excess)
    } else {
        (0.0, 0.0)
    };
    let vs = varsigma(cfg.n, sigma);
    Ok(PackingMetrics {
        rho: cfg.rho(),
        varsigma: vs,
        efficiency: cfg.r / vs,
        border_fraction: border_count as f64 * cfg.r / perimeter_inner,
        border_count,
        vertex_occupancy: vertex_count as f64 / s,
        vertex_count,
        necklace_excess,
        tour_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Convention, ParamPoint, PolygonSpec};

    fn hexagon_seven() -> Configuration {
        let spec = PolygonSpec::new(6, Convention::I).unwrap();
        let mut centers = vec![Point2::ORIGIN];
        centers.extend(spec.vertices(1.0));
        Configuration::from_unit_centers(spec, &centers).unwrap()
    }

    #[test]
    fn plane_density_constant() {
        assert!((RHO_PLANE - PI / 12f64.sqrt()).abs() < 1e-16);
    }

    #[test]
    fn large_radius_limits() {
        let r = 1e9;
        assert!((packing_fraction(1, r, 6) - RHO_PLANE).abs() < 1e-8);
        assert!((packing_fraction(1, r, 4) - PI / 4.0).abs() < 1e-8);
    }

    #[test]
    fn varsigma_reaches_plane_density() {
        let r = varsigma(17, 7);
        assert!((packing_fraction(17, r, 7) - RHO_PLANE).abs() < 1e-12);
    }

    #[test]
    fn varsigma_matches_bisection() {
        let (n, sigma) = (50, 3);
        let (mut lo, mut hi) = (1e-6, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if packing_fraction(n, mid, sigma) < RHO_PLANE {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((varsigma(n, sigma) - 0.5 * (lo + hi)).abs() < 1e-13);
    }

    #[test]
    fn varsigma_large_n_asymptote() {
        let sigma = 6;
        let s = sigma as f64;
        let lead = (s * (2.0 * PI / s).sin() / (4.0 * 3f64.sqrt())).sqrt();
        let n = 100_000_000usize;
        let scaled = varsigma(n, sigma) * (n as f64).sqrt();
        assert!((scaled - lead).abs() < 1e-3);
    }

    #[test]
    fn centered_single_disk() {
        let spec = PolygonSpec::new(8, Convention::I).unwrap();
        let cfg = Configuration::with_radius(spec, vec![ParamPoint::new(0.0, 0.0)], 0.4);
        let m = compute_metrics(&cfg, DEFAULT_CONTACT_TOL).unwrap();
        assert_eq!(m.border_count, 0);
        assert_eq!(m.border_fraction, 0.0);
        assert_eq!(m.vertex_occupancy, 0.0);
    }

    #[test]
    fn hexagonal_seven() {
        let m = compute_metrics(&hexagon_seven(), DEFAULT_CONTACT_TOL).unwrap();
        // the six ring disks sit exactly at the inner vertices
        assert_eq!(m.border_count, 6);
        assert_eq!(m.vertex_count, 6);
        assert!((m.vertex_occupancy - 1.0).abs() < 1e-15);
        assert!(m.necklace_excess.abs() < 1e-12);
        let rep = necklace_tour(&hexagon_seven(), 1e-9).unwrap();
        assert!(rep.is_necklace);
    }

    #[test]
    fn two_disks_always_necklace() {
        let spec = PolygonSpec::new(5, Convention::I).unwrap();
        let cfg = Configuration::from_params(
            spec,
            vec![ParamPoint::new(0.3, 0.2), ParamPoint::new(1.1, 2.9)],
        )
        .unwrap();
        let rep = necklace_tour(&cfg, 1e-9).unwrap();
        assert!(rep.necklace_excess.abs() < 1e-15);
        assert!(rep.is_necklace);
    }

    #[test]
    fn overlapping_configuration_is_rejected() {
        let mut cfg = hexagon_seven();
        cfg.r *= 1.001;
        assert!(compute_metrics(&cfg, DEFAULT_CONTACT_TOL).is_err());
    }

    #[test]
    fn large_ring_classified_by_cycle_search() {
        // 24 points on a circle: consecutive chords are the minimal distance
        let spec = PolygonSpec::new(12, Convention::I).unwrap();
        let n = 24;
        let centers: Vec<Point2> = (0..n)
            .map(|k| {
                let a = std::f64::consts::TAU * k as f64 / n as f64 + 0.01;
                Point2::new(0.8 * a.cos(), 0.8 * a.sin())
            })
            .collect();
        let cfg = Configuration::from_unit_centers(spec, &centers).unwrap();
        let rep = necklace_tour(&cfg, 1e-9).unwrap();
        assert!(rep.is_necklace && rep.exact);
        assert!(rep.necklace_excess.abs() < 1e-10);
    }
}
