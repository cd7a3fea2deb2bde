//! Browser bindings over the bundled nine-bus scenario.
//!
//! Each exported function returns a JSON string. The `*_json` variants are
//! plain Rust and carry the logic; the `#[wasm_bindgen]` wrappers only map
//! errors to JavaScript exceptions.

use gridflex::flex::MechanismKind;
use gridflex::portfolio::{FrontierOptions, PortfolioBase};
use gridflex::{fixture, frontier_search, marginal_curve, Engine, PortfolioSettings};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct HourRow {
    hour: i64,
    forced_shed_mw: f64,
    interruptible_mw: f64,
    rationing_mw: f64,
    incentive_mw: f64,
    reserve_mw: f64,
}

#[derive(Serialize)]
struct SimulationOut {
    ens_mwh: f64,
    interruptible_mwh: f64,
    rationing_mwh: f64,
    incentive_mwh: f64,
    hours: Vec<HourRow>,
    density: Vec<(f64, f64)>,
}

#[derive(Serialize)]
struct CurvePoint {
    scale: f64,
    ens_mwh: f64,
    ens_lo: Option<f64>,
    ens_hi: Option<f64>,
}

#[derive(Serialize)]
struct FrontierRow {
    rationing_max: f64,
    min_interruptible_scale: Option<f64>,
}

fn base(seed: u64) -> Result<PortfolioBase, String> {
    let (mut base, _) = fixture::portfolio_base().map_err(|e| e.to_string())?;
    base.engine.seed = seed;
    Ok(base)
}

fn settings(interruptible_scale: f64, rationing_max: f64, incentive_coverage: f64) -> PortfolioSettings {
    PortfolioSettings {
        interruptible_scale,
        rationing_max,
        incentive_coverage,
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Hourly trajectory, ENS and shed density for one portfolio.
pub fn simulate_json(
    interruptible_scale: f64,
    rationing_max: f64,
    incentive_coverage: f64,
    seed: u64,
) -> Result<String, String> {
    let base = base(seed)?;
    let point = settings(interruptible_scale, rationing_max, incentive_coverage);
    let engine = Engine::new(&base.case, base.resources(&point), base.engine.clone()).map_err(|e| e.to_string())?;
    let report = engine.run(&base.timeline).map_err(|e| e.to_string())?;
    let [il, lr, inc] = report.mechanism_energy_mwh();
    to_json(&SimulationOut {
        ens_mwh: report.ens_mwh,
        interruptible_mwh: il,
        rationing_mwh: lr,
        incentive_mwh: inc,
        hours: report
            .hours
            .iter()
            .map(|h| HourRow {
                hour: h.hour_index,
                forced_shed_mw: h.forced_shed_mw(),
                interruptible_mw: h.interruptible_mw(),
                rationing_mw: h.rationing_mw(),
                incentive_mw: h.incentive_mw(),
                reserve_mw: h.reserve_mw,
            })
            .collect(),
        density: report.density.unwrap_or_default(),
    })
}

/// ENS along a comma-separated scale grid for one mechanism.
pub fn marginal_curve_json(
    mechanism: &str,
    scales: &str,
    interruptible_scale: f64,
    rationing_max: f64,
    incentive_coverage: f64,
    replications: usize,
    seed: u64,
) -> Result<String, String> {
    let kind: MechanismKind = mechanism.parse().map_err(|e: gridflex::Error| e.to_string())?;
    let grid = parse_list(scales)?;
    let base = base(seed)?;
    let baseline = settings(interruptible_scale, rationing_max, incentive_coverage);
    let points = marginal_curve(&base, kind, &grid, baseline, replications).map_err(|e| e.to_string())?;
    let rows: Vec<CurvePoint> = points
        .iter()
        .zip(&grid)
        .map(|(p, &scale)| CurvePoint {
            scale,
            ens_mwh: p.ens,
            ens_lo: p.ens_ci.map(|c| c.0),
            ens_hi: p.ens_ci.map(|c| c.1),
        })
        .collect();
    to_json(&rows)
}

/// Minimal interruptible scale per rationing level; `null` where the
/// search bracket is exhausted.
pub fn frontier_json(rationing: &str, incentive_coverage: f64, upper: f64, seed: u64) -> Result<String, String> {
    let base = base(seed)?;
    let opts = FrontierOptions {
        upper,
        ..FrontierOptions::default()
    };
    let mut rows = Vec::new();
    for level in parse_list(rationing)? {
        let scale = match frontier_search(&base, incentive_coverage, &[level], opts) {
            Ok(p) => Some(p[0].min_interruptible_scale),
            Err(gridflex::Error::NoFeasibleScale { .. }) => None,
            Err(e) => return Err(e.to_string()),
        };
        rows.push(FrontierRow {
            rationing_max: level,
            min_interruptible_scale: scale,
        });
    }
    to_json(&rows)
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect()
}

#[wasm_bindgen]
pub fn simulate(
    interruptible_scale: f64,
    rationing_max: f64,
    incentive_coverage: f64,
    seed: u64,
) -> Result<String, JsError> {
    simulate_json(interruptible_scale, rationing_max, incentive_coverage, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = marginalCurve)]
pub fn marginal_curve_js(
    mechanism: &str,
    scales: &str,
    interruptible_scale: f64,
    rationing_max: f64,
    incentive_coverage: f64,
    replications: usize,
    seed: u64,
) -> Result<String, JsError> {
    marginal_curve_json(
        mechanism,
        scales,
        interruptible_scale,
        rationing_max,
        incentive_coverage,
        replications,
        seed,
    )
    .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn frontier(rationing: &str, incentive_coverage: f64, upper: f64, seed: u64) -> Result<String, JsError> {
    frontier_json(rationing, incentive_coverage, upper, seed).map_err(|e| JsError::new(&e))
}
