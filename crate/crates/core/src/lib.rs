//! Dense packings of congruent disks inside regular polygons.

pub mod bounds;
pub mod configuration;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod io;
pub mod lbfgs;
pub mod metrics;
pub mod optimizer;
pub mod polish;
pub mod refinement;
pub mod topology;
pub mod tour;

pub use configuration::{convert_convention, Configuration};
pub use error::{Error, Result};
pub use geometry::{Convention, ParamPoint, Point2, PolygonSpec};
