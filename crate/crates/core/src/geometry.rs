//! Regular-polygon domain model.
//!
//! Disk centers live in the *inner* polygon, a regular σ-gon of unit
//! circumradius with a vertex on the positive x axis. A point is described by
//! two unconstrained angles `(t, u)`:
//!
//! ```text
//! x = sin²t · Γ(u, 0, σ) · cos u
//! y = sin²t · Γ(u, 0, σ) · sin u
//! ```
//!
//! where `Γ(u, 0, σ)` is the distance from the centroid to the border along
//! direction `u`. Every real pair `(t, u)` maps into the polygon, which turns the
//! constrained packing problem into an unconstrained one.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The three equivalent scalings of the container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Convention {
    /// Inner polygon (centers) has unit circumradius.
    I,
    /// Outer polygon (container) has unit circumradius.
    II,
    /// Disks have unit diameter.
    III,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Convention::I => "I",
            Convention::II => "II",
            Convention::III => "III",
        };
        f.write_str(s)
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" | "1" => Ok(Convention::I),
            "II" | "ii" | "2" => Ok(Convention::II),
            "III" | "iii" | "3" => Ok(Convention::III),
            other => Err(Error::Parse(format!("unknown convention {other:?}"))),
        }
    }
}

/// Immutable description of the container.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolygonSpec {
    sigma: u32,
    convention: Convention,
}

impl PolygonSpec {
    pub fn new(sigma: u32, convention: Convention) -> Result<Self> {
        if sigma < 3 {
            return Err(Error::InvalidSigma(sigma));
        }
        Ok(Self { sigma, convention })
    }

    pub fn sigma(&self) -> u32 {
        self.sigma
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn with_convention(self, convention: Convention) -> Self {
        Self { convention, ..self }
    }

    /// π/σ
    pub fn half_angle(&self) -> f64 {
        PI / self.sigma as f64
    }

    /// Vertices of the regular polygon with the given circumradius, counter-clockwise,
    /// starting on the positive x axis.
    pub fn vertices(&self, circumradius: f64) -> Vec<Point2> {
        polygon_vertices(self.sigma, circumradius)
    }
}

/// Unconstrained angular coordinates of a point in the inner polygon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub t: f64,
    pub u: f64,
}

impl ParamPoint {
    pub fn new(t: f64, u: f64) -> Self {
        Self { t, u }
    }

    /// Maps onto `t ∈ [0, π/2]`, `u ∈ [0, 2π)` without moving the Cartesian point.
    pub fn canonical(self) -> Self {
        let mut t = self.t.rem_euclid(PI);
        if t > FRAC_PI_2 {
            t = PI - t;
        }
        let mut u = self.u.rem_euclid(TAU);
        if u >= TAU {
            u = 0.0;
        }
        Self { t, u }
    }

    pub fn to_point(self, sigma: u32) -> Point2 {
        interior_point(self, sigma)
    }

    /// Inverse of [`interior_point`] for points inside the unit polygon. Points
    /// outside are pulled radially onto the border.
    pub fn from_point(p: Point2, sigma: u32) -> Self {
        let radius = p.norm();
        if radius == 0.0 {
            return Self { t: 0.0, u: 0.0 };
        }
        let u = p.y.atan2(p.x).rem_euclid(TAU);
        let ratio = (radius / d_max(u, sigma)).clamp(0.0, 1.0);
        Self {
            t: ratio.sqrt().asin(),
            u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        (self - other).norm_sq()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Apothems, circumradii and perimeters of the container for one convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainMeasures {
    /// Apothem of the outer polygon (R−).
    pub apothem_outer: f64,
    /// Circumradius of the outer polygon (R+).
    pub circumradius_outer: f64,
    pub area: f64,
    pub perimeter: f64,
    /// Perimeter of the inner polygon, the locus of admissible centers.
    pub perimeter_inner: f64,
    /// Disk radius in this convention.
    pub disk_radius: f64,
}

/// Angular position within the current sector, measured from the sector's
/// bisector: `π/σ − (u mod 2π/σ)`.
fn sector_offset(u: f64, sigma: u32) -> f64 {
    let n = sigma as f64;
    PI / n - u.rem_euclid(TAU / n)
}

/// Distance from the centroid to the border of the polygon with apothem
/// `offset + cos(π/σ)` along direction `u`.
pub fn gamma(u: f64, offset: f64, sigma: u32) -> f64 {
    debug_assert!(sigma >= 3);
    let n = sigma as f64;
    (offset + (PI / n).cos()) / sector_offset(u, sigma).cos()
}

/// `dΓ/du`; one-sided (from above) at polygon vertices.
pub fn gamma_du(u: f64, offset: f64, sigma: u32) -> f64 {
    let n = sigma as f64;
    let phi = sector_offset(u, sigma);
    let sec = 1.0 / phi.cos();
    -(offset + (PI / n).cos()) * sec * phi.tan()
}

/// Largest admissible distance from the centroid at angle `u` in the
/// unit-circumradius polygon.
pub fn d_max(u: f64, sigma: u32) -> f64 {
    gamma(u, 0.0, sigma)
}

pub fn interior_point(p: ParamPoint, sigma: u32) -> Point2 {
    let s = p.t.sin();
    let radial = s * s * gamma(p.u, 0.0, sigma);
    Point2::new(radial * p.u.cos(), radial * p.u.sin())
}

pub fn contains(pt: Point2, sigma: u32, circumradius: f64, tol: f64) -> bool {
    let u = pt.angle();
    pt.norm() <= d_max(u, sigma) * circumradius + tol
}

/// Signed distance from the border of the polygon with the given circumradius:
/// positive inside, negative outside.
pub fn border_clearance(pt: Point2, sigma: u32, circumradius: f64) -> f64 {
    let n = sigma as f64;
    let apothem = circumradius * (PI / n).cos();
    (0..sigma)
        .map(|k| {
            let a = (2 * k + 1) as f64 * PI / n;
            apothem - (pt.x * a.cos() + pt.y * a.sin())
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn polygon_vertices(sigma: u32, circumradius: f64) -> Vec<Point2> {
    let n = sigma as f64;
    (0..sigma)
        .map(|k| {
            let a = TAU * k as f64 / n;
            Point2::new(circumradius * a.cos(), circumradius * a.sin())
        })
        .collect()
}

pub fn shoelace_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    let twice: f64 = (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum();
    0.5 * twice.abs()
}

/// Container measures for `spec`. `r` is the disk radius in convention I or II
/// for those conventions; for convention III it is the convention-II radius,
/// which fixes the container size once the disk diameter is normalized to one.
pub fn measures(spec: PolygonSpec, r: f64) -> Result<DomainMeasures> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!("disk radius must be positive, got {r}")));
    }
    let n = spec.sigma() as f64;
    let c = spec.half_angle().cos();
    let sin = spec.half_angle().sin();
    let sec = 1.0 / c;
    let area_unit = 0.5 * n * (2.0 * spec.half_angle()).sin();
    let perimeter_unit = 2.0 * n * sin;
    let physical = |r: f64| {
        if r >= c {
            Err(Error::NonphysicalRadius {
                r,
                sigma: spec.sigma(),
            })
        } else {
            Ok(())
        }
    };

    let m = match spec.convention() {
        Convention::I => {
            let outer = 1.0 + r * sec;
            DomainMeasures {
                apothem_outer: r + c,
                circumradius_outer: outer,
                area: area_unit * outer * outer,
                perimeter: perimeter_unit * outer,
                perimeter_inner: perimeter_unit,
                disk_radius: r,
            }
        }
        Convention::II => {
            physical(r)?;
            DomainMeasures {
                apothem_outer: c,
                circumradius_outer: 1.0,
                area: area_unit,
                perimeter: perimeter_unit,
                perimeter_inner: perimeter_unit * (1.0 - r * sec),
                disk_radius: r,
            }
        }
        Convention::III => {
            physical(r)?;
            let k = 1.0 / (2.0 * r);
            DomainMeasures {
                apothem_outer: c * k,
                circumradius_outer: k,
                area: area_unit * k * k,
                perimeter: perimeter_unit * k,
                perimeter_inner: perimeter_unit * (1.0 - r * sec) * k,
                disk_radius: 0.5,
            }
        }
    };
    Ok(m)
}

/// Length scale that maps convention-I lengths into `target`, given the
/// convention-I disk radius.
pub fn scale_from_unit_inner(sigma: u32, r_inner: f64, target: Convention) -> f64 {
    let sec = 1.0 / (PI / sigma as f64).cos();
    match target {
        Convention::I => 1.0,
        Convention::II => 1.0 / (1.0 + r_inner * sec),
        Convention::III => 1.0 / (2.0 * r_inner),
    }
}

/// Convention-I radius from a radius expressed in `from`.
pub fn radius_to_unit_inner(sigma: u32, r: f64, from: Convention) -> Result<f64> {
    let c = (PI / sigma as f64).cos();
    match from {
        Convention::I => Ok(r),
        Convention::II => {
            if r >= c {
                Err(Error::NonphysicalRadius { r, sigma })
            } else {
                Ok(r / (1.0 - r / c))
            }
        }
        Convention::III => Err(Error::InvalidInput(
            "convention III fixes r = 1/2; the container size is needed to recover the radius".into(),
        )),
    }
}

/// `count` points i.i.d. uniform over the unit-circumradius polygon.
///
/// The radius is drawn as `√q` so that it is distributed linearly, the angle
/// uniformly on `[0, 2π)`, and the whole draw is rejected when the radius
/// exceeds `d_max(u)`.
pub fn sample_uniform(count: usize, sigma: u32, rng_seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    sample_uniform_with(&mut rng, count, sigma)
}

pub fn sample_uniform_with<R: Rng + ?Sized>(rng: &mut R, count: usize, sigma: u32) -> Vec<Point2> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.gen::<f64>() * TAU;
        let radius = rng.gen::<f64>().sqrt();
        if radius <= d_max(u, sigma) {
            out.push(Point2::new(radius * u.cos(), radius * u.sin()));
        }
    }
    out
}
