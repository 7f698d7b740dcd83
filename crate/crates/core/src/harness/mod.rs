//! Plant simulation, Monte-Carlo containment campaigns and the closed-form
//! error oracle.

mod campaign;
pub mod fixtures;
mod oracle;
mod scenario;
mod simulate;

pub use campaign::{
    containment_campaign, trial_seed, CampaignConfig, CampaignReport, RatioSummary, ViolationRecord,
};
pub use oracle::{oracle_errors, OracleIntermediates, OracleResult};
pub use scenario::{
    sample_ball, sample_simplex, sample_sphere, NoiseMode, Scenario, Segment, Signal, WeightMode,
};
pub use simulate::{
    run_observer, simulate_plant, PlantTrace, SimulationTrace, TraceRow, Violation, ViolationKind,
    CONTAINMENT_ABS_TOL,
};
