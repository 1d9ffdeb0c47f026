#![allow(dead_code)]

use polypack::geometry::polygon_vertices;
use polypack::{Configuration, Convention, Point2, PolygonSpec};

pub fn spec(sigma: u32) -> PolygonSpec {
    PolygonSpec::new(sigma, Convention::I).unwrap()
}

pub fn from_centers(sigma: u32, centers: &[Point2]) -> Configuration {
    Configuration::from_unit_centers(spec(sigma), centers).unwrap()
}

/// Center disk plus a ring on the vertices of the unit hexagon.
pub fn hexagon_seven() -> Configuration {
    let mut centers = vec![Point2::ORIGIN];
    centers.extend(polygon_vertices(6, 1.0));
    from_centers(6, &centers)
}

/// Triangular lattice filling the unit hexagon with `k + 1` disks per edge.
pub fn hexagon_lattice(k: usize) -> Configuration {
    let h = 1.0 / k as f64;
    let a = Point2::new(h, 0.0);
    let b = Point2::new(0.5 * h, 0.5 * 3f64.sqrt() * h);
    let k = k as i64;
    let mut centers = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            if (i + j).abs() <= k {
                centers.push(a * i as f64 + b * j as f64);
            }
        }
    }
    from_centers(6, &centers)
}

pub fn rho_of_radius(n: usize, r: f64, sigma: u32) -> f64 {
    polypack::metrics::packing_fraction(n, r, sigma)
}
