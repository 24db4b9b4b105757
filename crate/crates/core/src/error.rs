use thiserror::Error;

use crate::lattice::SiteState;

/// Errors raised by the simulator and its analysis tools.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("site index {index} out of range for lattice with {sites} sites")]
    InvalidSite { index: usize, sites: usize },

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("transition {from:?} -> {to:?} is not part of the model")]
    ImpossibleTransition { from: SiteState, to: SiteState },

    #[error("engine invariant violated: {0}")]
    EngineInvariant(String),

    #[error("dominance violated at {count} (site, time) points; first at site {site}, t = {time}")]
    DominanceViolation { count: usize, site: usize, time: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("integration left the simplex at t = {time} (u1 = {u1}, u2 = {u2}); reduce dt")]
    StepSize { time: f64, u1: f64, u2: f64 },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
