//! Equilibrium analysis of a two-player game on a multimodal urban network:
//! a profit-maximizing autonomous ride-hail platform against a
//! ridership-maximizing transit agency.
//!
//! The platform chooses a base fare, per-mile distance rates by origin zone,
//! and an idle-fleet allocation; the agency chooses a per-mile transit fare
//! and line frequencies subject to a budget floor. Travelers split across six
//! modes (direct ride-hail, transit, three first/last-mile bundles, and an
//! outside option) by multinomial logit over generalized costs. The crate
//! computes best responses for both players, iterates them to a candidate
//! equilibrium, certifies an ε-Nash bound for the platform via a
//! partition-relaxation upper bound, certifies global optimality of the
//! transit response via a concavity test, decomposes accessibility inequality
//! (Theil index) across zones and income classes, and sweeps policy levers
//! (fleet cost, minimum-service caps, first/last-mile subsidies).

pub mod choice;
pub mod equilibrium;
pub mod equity;
mod evals;
pub mod network;
pub mod optim;
pub mod scenario;
pub mod sweep;
pub mod tnc;
pub mod transit;

#[cfg(test)]
pub(crate) mod testutil;

pub use equilibrium::{
    best_response_iterate, default_initial_strategies, expost_evaluate, tnc_distance,
    transit_distance, CandidateEquilibrium, EpsilonReport, EquilibriumError, IterationRecord,
    SolverOptions,
};
pub use equity::{
    accessibility, accessibility_field, aggregate_accessibility, evaluate_equity,
    recommended_shift, theil_decompose, AccessibilityTensor, EquityError, TheilReport,
};
pub use network::{
    build_network, enumerate_transit_routes, partition_zones, MultimodalNetwork, NetworkError,
    Partition, PartitionStrategy, TransitLine, Zone,
};
pub use scenario::{
    load_scenario, save_scenario, synthesize_sf_scenario, PolicyConfig, Scenario, ScenarioError,
    SfConfig,
};
pub use sweep::{
    export_results, run_sweep, ExportFormat, SweepAxis, SweepError, SweepOutcome, SweepPoint,
    SweepResults, CSV_COLUMNS, RESULTS_SCHEMA_VERSION,
};
pub use tnc::{
    solve_tnc_best_response, tnc_profit, tnc_profit_bounds, tnc_profit_margins, DestinationStrategy,
    ProfitBounds, TncError, TncSolveConfig, TncStrategy,
};
pub use transit::{
    certify_concavity, concavity_rhs, fare_grid, solve_nhat, solve_transit_best_response,
    transit_profit, transit_ridership, ConcavityCertificate, TransitError, TransitSolveConfig,
    TransitStrategy,
};
