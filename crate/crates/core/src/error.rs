use thiserror::Error;

use crate::geometry::ParamPoint;
use crate::topology::ChargeLedger;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a regular polygon needs at least 3 sides, got {0}")]
    InvalidSigma(u32),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("nonphysical disk radius {r} for sigma={sigma}: must stay below cos(pi/sigma)")]
    NonphysicalRadius { r: f64, sigma: u32 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The line search produced a NaN energy; `last` holds the last iterate with a finite energy.
    #[error("non-finite energy during minimization")]
    NonFiniteEnergy { last: Vec<ParamPoint> },

    #[error("disks {i} and {j} overlap: distance {distance} < 2r = {diameter}")]
    Overlap {
        i: usize,
        j: usize,
        distance: f64,
        diameter: f64,
    },

    #[error("disk {index} lies outside the container")]
    OutsideContainer { index: usize },

    #[error("no contacts at threshold {0}")]
    NoContacts(f64),

    #[error("rank-deficient least-squares design: {distinct} distinct N for {coefficients} coefficients")]
    RankDeficient { distinct: usize, coefficients: usize },

    #[error("Euler ledger violation: interior+border+vertex charge = {}, expected 6", .0.charge_sum())]
    LedgerViolation(Box<ChargeLedger>),

    #[error("audit failure: {0}")]
    Audit(String),

    #[error("record store conflict: {0}")]
    StoreConflict(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
