use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    border_clearance, interior_point, scale_from_unit_inner, Convention, ParamPoint, Point2,
    PolygonSpec,
};
use crate::metrics::packing_fraction;

/// Relative overlap tolerance used by the configuration audit.
pub const AUDIT_OVERLAP_TOL: f64 = 1e-9;
/// Absolute containment tolerance (unit inner circumradius) used by the audit.
pub const AUDIT_CONTAINMENT_TOL: f64 = 1e-12;

/// N disk centers in the unit-circumradius inner polygon plus the common radius.
///
/// `params` and `r` are always expressed in convention I; `convention` only
/// selects the frame used by [`Configuration::centers`] and
/// [`Configuration::radius`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub sigma: u32,
    pub n: usize,
    pub params: Vec<ParamPoint>,
    pub r: f64,
    pub convention: Convention,
    #[serde(default)]
    pub provenance: Vec<String>,
}

impl Configuration {
    /// Builds a configuration whose radius is half the minimal center distance.
    pub fn from_params(spec: PolygonSpec, params: Vec<ParamPoint>) -> Result<Self> {
        if params.len() < 2 {
            return Err(Error::InvalidInput(
                "the radius of a single disk is not fixed by its center; use with_radius".into(),
            ));
        }
        let params: Vec<ParamPoint> = params.into_iter().map(ParamPoint::canonical).collect();
        let centers: Vec<Point2> = params.iter().map(|p| interior_point(*p, spec.sigma())).collect();
        let (_, _, d) = closest_pair(&centers);
        if !(d > 0.0) {
            return Err(Error::Degenerate("coincident disk centers".into()));
        }
        Ok(Self {
            sigma: spec.sigma(),
            n: params.len(),
            params,
            r: 0.5 * d,
            convention: spec.convention(),
            provenance: Vec::new(),
        })
    }

    pub fn with_radius(spec: PolygonSpec, params: Vec<ParamPoint>, r: f64) -> Self {
        let params: Vec<ParamPoint> = params.into_iter().map(ParamPoint::canonical).collect();
        Self {
            sigma: spec.sigma(),
            n: params.len(),
            params,
            r,
            convention: spec.convention(),
            provenance: Vec::new(),
        }
    }

    /// Builds from Cartesian centers in the unit-circumradius inner polygon.
    pub fn from_unit_centers(spec: PolygonSpec, centers: &[Point2]) -> Result<Self> {
        let params = centers
            .iter()
            .map(|c| ParamPoint::from_point(*c, spec.sigma()))
            .collect();
        Self::from_params(spec, params)
    }

    pub fn spec(&self) -> PolygonSpec {
        PolygonSpec::new(self.sigma, self.convention).expect("configuration holds a valid sigma")
    }

    /// Centers in the unit-circumradius inner polygon (convention I).
    pub fn unit_centers(&self) -> Vec<Point2> {
        self.params
            .iter()
            .map(|p| interior_point(*p, self.sigma))
            .collect()
    }

    /// Centers expressed in the configuration's own convention.
    pub fn centers(&self) -> Vec<Point2> {
        let k = self.scale();
        self.unit_centers().into_iter().map(|p| p * k).collect()
    }

    /// Disk radius in the configuration's own convention.
    pub fn radius(&self) -> f64 {
        self.r * self.scale()
    }

    fn scale(&self) -> f64 {
        scale_from_unit_inner(self.sigma, self.r, self.convention)
    }

    pub fn min_distance(&self) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        closest_pair(&self.unit_centers()).2
    }

    /// Resets `r` to half the minimal center distance.
    pub fn refresh_radius(&mut self) {
        if self.n >= 2 {
            self.r = 0.5 * self.min_distance();
        }
    }

    pub fn rho(&self) -> f64 {
        packing_fraction(self.n, self.r, self.sigma)
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.provenance.push(tag.into());
        self
    }

    /// Overlap and containment audit: pairwise distance ≥ 2r(1 − `overlap_tol`)
    /// and every center inside the inner polygon within `containment_tol`.
    pub fn audit(&self, overlap_tol: f64, containment_tol: f64) -> Result<()> {
        let centers = self.unit_centers();
        for (index, c) in centers.iter().enumerate() {
            if !c.is_finite() || border_clearance(*c, self.sigma, 1.0) < -containment_tol {
                return Err(Error::OutsideContainer { index });
            }
        }
        let diameter = 2.0 * self.r;
        let limit = diameter * (1.0 - overlap_tol);
        for i in 0..centers.len() {
            for j in (i + 1)..centers.len() {
                let distance = centers[i].dist(centers[j]);
                if distance < limit {
                    return Err(Error::Overlap {
                        i,
                        j,
                        distance,
                        diameter,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Same configuration reported in another convention. The similarity only
/// rescales lengths, so ρ and ξ are untouched.
pub fn convert_convention(cfg: &Configuration, target: Convention) -> Configuration {
    let mut out = cfg.clone();
    out.convention = target;
    out
}

/// Indices and distance of the closest pair (brute force).
pub fn closest_pair(points: &[Point2]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i].dist_sq(points[j]);
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1, best.2.sqrt())
}
