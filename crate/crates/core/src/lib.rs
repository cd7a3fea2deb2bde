//! Grid-scarcity simulation with demand flexibility.
//!
//! An hourly DC optimal power flow decides whether a snapshot is servable;
//! interruptible load, residential rationing and incentive-based demand
//! response reduce load before forced shedding is applied in fixed steps.
//! Portfolio tools sweep mechanism scales and search for the smallest
//! interruptible scale that removes all forced shedding.

pub mod config;
mod csvio;
pub mod dcopf;
pub mod engine;
pub mod error;
pub mod fixture;
pub mod flex;
pub mod grid;
pub mod metrics;
pub mod nnls;
pub mod portfolio;
pub mod sector;
pub mod timeline;
pub mod tolerance;

pub use config::ScenarioConfig;
pub use dcopf::{solve_dcopf, total_reserve, DcNetwork, DispatchResult, SnapshotInput};
pub use engine::{run_hour, run_simulation, Engine, EngineConfig, HourResult, SimulationState};
pub use error::{Error, Result};
pub use flex::{default_resource, ActivationState, FlexResource, IncentiveModel, MechanismKind};
pub use grid::{load_grid_case, validate_case, GridCase, Violation};
pub use metrics::{ens, pearson, shed_density, SimulationReport};
pub use nnls::nnls;
pub use portfolio::{evaluate_portfolio, frontier_search, marginal_curve, PortfolioPoint, PortfolioSettings};
pub use sector::{estimate_sector_capacities, hourly_sector_mw, SectorCapacities, SectorProfileMatrix};
pub use timeline::{HourInput, ScenarioTimeline};
