//! Monte Carlo drivers: survival, extinction times, phase diagrams and
//! block-event frequencies.

pub mod blocks;
pub mod exactness;
pub mod stats;
pub mod survival;

pub use blocks::{
    estimate_open_probability_a, estimate_open_probability_b, estimate_open_probability_b_worst_case,
    BlockEstimate, BlockSpecA, BlockSpecB, BoundaryPolicy, Placement,
};
pub use exactness::{compare_with_oracle, final_configuration_codes, EngineComparison};
pub use stats::{wilson_interval, TimeSummary, Z95};
pub use survival::{
    estimate_extinction_time, estimate_survival, survival_outcomes, sweep_phase_diagram, EngineKind,
    InitialCondition, PhaseDiagram, ProcessMode, SurvivalCriterion, SurvivalEstimate, SurvivalOptions,
};
