//! Exact simulation and analysis of the three-state spatial rumor process.
//!
//! Each site of a box in `Z^d` holds an Ignorant (0), a Spreader (1) or a
//! Stifler (2). With `n1` the number of Spreader neighbors of a site,
//!
//! | move | rate |
//! |------|------|
//! | 0 → 1 | `λ · n1` |
//! | 1 → 0 | `1` |
//! | 1 → 2 | `α · n1` |
//! | 2 → 0 | `1` |
//!
//! The crate provides two independent exact engines ([`gillespie`] and
//! [`harris`]), the coupling with the contact process ([`harris`]), the
//! mean-field system ([`meanfield`]), an exact transient-law oracle for tiny
//! boxes ([`oracle`]) and Monte Carlo drivers ([`experiments`]).
//!
//! ```
//! use spatial_rumor::{Configuration, EventEngine, Lattice, Params, RunOptions};
//!
//! let lattice = Lattice::ring(5)?;
//! let eta0 = Configuration::with_spreaders(lattice, &[0])?;
//! let mut engine = EventEngine::new(eta0, Params::new(2.0, 3.0)?, 7);
//! // two infection channels at rate λ, one forgetting channel at rate 1
//! assert_eq!(engine.total_rate(), 5.0);
//! let traj = engine.run_until(10.0, RunOptions::default())?;
//! assert!(traj.points.iter().all(|p| p.counts.total() == 5));
//! # Ok::<(), spatial_rumor::Error>(())
//! ```

pub mod error;
pub mod experiments;
pub mod fenwick;
pub mod gillespie;
pub mod harris;
pub mod lattice;
pub mod meanfield;
pub mod oracle;
pub mod rng;
pub mod trajectory;

pub use error::{Error, Result};
pub use gillespie::{EventEngine, RunOptions, StepOutcome};
pub use harris::{run_coupled, run_harris, ArrivalStream, CoupledState, DominanceReport, Mark};
pub use lattice::{Boundary, Configuration, Counts, Lattice, Params, SiteRates, SiteState};
pub use oracle::GeneratorMatrix;
pub use trajectory::{EventRecord, Sampling, Trajectory};

// Compiles the guide's code listings as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/gillespie.md")]
    mod gillespie {}
    #[doc = include_str!("../../../book/src/harris.md")]
    mod harris {}
    #[doc = include_str!("../../../book/src/meanfield.md")]
    mod meanfield {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
