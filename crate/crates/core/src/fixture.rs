//! The bundled nine-bus, three-generator, 72-hour scarcity scenario.
//!
//! The CSV files are embedded so the fixture is usable without a filesystem.

use std::path::PathBuf;

use crate::config::{resources_for, ScenarioConfig};
use crate::error::Result;
use crate::grid::{GridCase, GridSources};
use crate::portfolio::{PortfolioBase, PortfolioSettings};
use crate::timeline::{ScenarioTimeline, TimelineSources};

pub const BUSES: &str = include_str!("../fixtures/nine_bus/buses.csv");
pub const BRANCHES: &str = include_str!("../fixtures/nine_bus/branches.csv");
pub const GENERATORS: &str = include_str!("../fixtures/nine_bus/generators.csv");
pub const LOADS: &str = include_str!("../fixtures/nine_bus/loads.csv");
pub const TIMELINE: &str = include_str!("../fixtures/nine_bus/timeline.csv");
pub const CAPACITY: &str = include_str!("../fixtures/nine_bus/capacity.csv");
pub const COMMITMENT: &str = include_str!("../fixtures/nine_bus/interruptible_commitment.csv");
pub const SCENARIO: &str = include_str!("../fixtures/nine_bus/scenario.conf");

/// Directory holding the fixture files in the source tree.
pub fn dir() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/nine_bus"))
}

pub fn case() -> Result<GridCase> {
    GridCase::from_readers(GridSources {
        buses: ("buses.csv", BUSES.as_bytes()),
        branches: ("branches.csv", BRANCHES.as_bytes()),
        generators: ("generators.csv", GENERATORS.as_bytes()),
        loads: ("loads.csv", LOADS.as_bytes()),
    })
}

pub fn timeline(case: &GridCase) -> Result<ScenarioTimeline> {
    ScenarioTimeline::from_readers(
        case,
        TimelineSources {
            timeline: ("timeline.csv", TIMELINE.as_bytes()),
            capacity: ("capacity.csv", CAPACITY.as_bytes()),
            commitment: Some(("interruptible_commitment.csv", COMMITMENT.as_bytes())),
            reference: None,
        },
    )
}

/// The baseline scenario config, with paths resolved against [`dir`].
pub fn config() -> Result<ScenarioConfig> {
    ScenarioConfig::parse(SCENARIO, &dir())
}

/// Portfolio base built from the embedded files and the baseline config.
pub fn portfolio_base() -> Result<(PortfolioBase, PortfolioSettings)> {
    let cfg = config()?;
    let case = case()?;
    let timeline = timeline(&case)?;
    Ok((
        PortfolioBase {
            case,
            timeline,
            engine: cfg.engine.clone(),
            templates: cfg.resources,
            scenario_index: 0,
        },
        cfg.portfolio,
    ))
}

/// Resources of the baseline config at `point`.
pub fn resources(point: &PortfolioSettings) -> Result<Vec<crate::flex::FlexResource>> {
    Ok(resources_for(&config()?.resources, point))
}
