//! Portfolio evaluation: replicated runs, marginal curves over one
//! mechanism's scale, and the minimal interruptible scale that removes all
//! forced shedding.

use std::fmt::Write as _;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::resources_for;
use crate::engine::{Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::flex::{FlexResource, MechanismKind};
use crate::grid::GridCase;
use crate::metrics::quantile_sorted;
use crate::timeline::ScenarioTimeline;

/// Fewest replications accepted for a stochastic portfolio.
pub const MIN_STOCHASTIC_REPLICATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PortfolioSettings {
    /// Multiplier on committed interruptible MW.
    pub interruptible_scale: f64,
    /// Maximum rationed fraction of residential load.
    pub rationing_max: f64,
    /// Enrolled fraction of residential customers.
    pub incentive_coverage: f64,
}

impl PortfolioSettings {
    pub const NONE: PortfolioSettings = PortfolioSettings {
        interruptible_scale: 0.0,
        rationing_max: 0.0,
        incentive_coverage: 0.0,
    };

    pub fn is_stochastic(&self) -> bool {
        self.incentive_coverage > 0.0
    }

    pub fn with(mut self, kind: MechanismKind, value: f64) -> Self {
        match kind {
            MechanismKind::InterruptibleLoad => self.interruptible_scale = value,
            MechanismKind::LoadRationing => self.rationing_max = value,
            MechanismKind::IncentiveDR => self.incentive_coverage = value,
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioPoint {
    pub settings: PortfolioSettings,
    /// Mean ENS over replications, MWh.
    pub ens: f64,
    /// 2.5 and 97.5 percentiles; stochastic portfolios only.
    pub ens_ci: Option<(f64, f64)>,
    /// ENS of each replication, in replication order.
    pub ens_runs: Vec<f64>,
}

impl PortfolioPoint {
    /// Zero ENS in every replication.
    pub fn avoids_outage(&self) -> bool {
        self.ens_runs.iter().all(|&e| e == 0.0)
    }
}

/// Everything a portfolio evaluation varies around.
#[derive(Debug, Clone)]
pub struct PortfolioBase {
    pub case: GridCase,
    pub timeline: ScenarioTimeline,
    pub engine: EngineConfig,
    /// Interruptible, rationing and incentive envelopes.
    pub templates: [FlexResource; 3],
    /// Distinguishes independent scenarios sharing one master seed.
    pub scenario_index: u64,
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `replication` of scenario `scenario`:
/// `mix(mix(mix(master) ^ scenario) ^ replication)`.
pub fn derive_seed(master: u64, scenario: u64, replication: u64) -> u64 {
    mix64(mix64(mix64(master) ^ scenario) ^ replication)
}

impl PortfolioBase {
    pub fn resources(&self, point: &PortfolioSettings) -> Vec<FlexResource> {
        resources_for(&self.templates, point)
    }

    fn run_once(&self, point: &PortfolioSettings, seed: u64) -> Result<f64> {
        let cfg = EngineConfig { seed, ..self.engine.clone() };
        let engine = Engine::new(&self.case, self.resources(point), cfg)?;
        Ok(engine.run(&self.timeline)?.ens_mwh)
    }
}

/// Runs `replications` simulations of one portfolio with derived seeds.
pub fn evaluate_portfolio(base: &PortfolioBase, point: PortfolioSettings, replications: usize) -> Result<PortfolioPoint> {
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be >= 1".into()));
    }
    let stochastic = point.is_stochastic();
    if stochastic && replications < MIN_STOCHASTIC_REPLICATIONS {
        return Err(Error::InvalidArgument(format!(
            "stochastic portfolios need at least {MIN_STOCHASTIC_REPLICATIONS} replications, got {replications}"
        )));
    }
    let seed = |r: usize| derive_seed(base.engine.seed, base.scenario_index, r as u64);
    #[cfg(feature = "parallel")]
    let runs: Result<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| base.run_once(&point, seed(r)))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let runs: Result<Vec<f64>> = (0..replications).map(|r| base.run_once(&point, seed(r))).collect();
    let runs = runs?;
    let ens = runs.iter().sum::<f64>() / runs.len() as f64;
    let ens_ci = stochastic.then(|| {
        let mut sorted = runs.clone();
        sorted.sort_by(f64::total_cmp);
        (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975))
    });
    Ok(PortfolioPoint {
        settings: point,
        ens,
        ens_ci,
        ens_runs: runs,
    })
}

/// ENS along `scale_grid` for one mechanism, others held at `baseline`.
pub fn marginal_curve(
    base: &PortfolioBase,
    mechanism: MechanismKind,
    scale_grid: &[f64],
    baseline: PortfolioSettings,
    replications: usize,
) -> Result<Vec<PortfolioPoint>> {
    if scale_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("scale grid must be strictly increasing".into()));
    }
    let eval = |&s: &f64| {
        let point = baseline.with(mechanism, s);
        let reps = if point.is_stochastic() { replications } else { 1 };
        evaluate_portfolio(base, point, reps)
    };
    #[cfg(feature = "parallel")]
    return scale_grid.par_iter().map(eval).collect();
    #[cfg(not(feature = "parallel"))]
    scale_grid.iter().map(eval).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierPoint {
    pub incentive_coverage: f64,
    pub rationing_max: f64,
    pub min_interruptible_scale: f64,
}

/// Bracket and tolerance for [`frontier_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierOptions {
    pub tolerance: f64,
    pub lower: f64,
    pub upper: f64,
    pub replications: usize,
}

impl Default for FrontierOptions {
    fn default() -> Self {
        Self {
            tolerance: 0.01,
            lower: 1.0,
            upper: 50.0,
            replications: MIN_STOCHASTIC_REPLICATIONS,
        }
    }
}

/// For each rationing level, the smallest interruptible scale in
/// `[lower, upper]` (to within `tolerance`) whose ENS is zero in every
/// replication.
pub fn frontier_search(
    base: &PortfolioBase,
    incentive_coverage: f64,
    rationing_grid: &[f64],
    opts: FrontierOptions,
) -> Result<Vec<FrontierPoint>> {
    if !(opts.tolerance > 0.0 && opts.lower <= opts.upper) {
        return Err(Error::InvalidArgument("need tolerance > 0 and lower <= upper".into()));
    }
    let search = |&rationing: &f64| -> Result<FrontierPoint> {
        let point = |scale| PortfolioSettings {
            interruptible_scale: scale,
            rationing_max: rationing,
            incentive_coverage,
        };
        let reps = if incentive_coverage > 0.0 { opts.replications } else { 1 };
        let clear = |scale: f64| -> Result<bool> { Ok(evaluate_portfolio(base, point(scale), reps)?.avoids_outage()) };
        let found = |scale| FrontierPoint {
            incentive_coverage,
            rationing_max: rationing,
            min_interruptible_scale: scale,
        };
        if clear(opts.lower)? {
            return Ok(found(opts.lower));
        }
        if !clear(opts.upper)? {
            return Err(Error::NoFeasibleScale { rationing, upper: opts.upper });
        }
        let (mut lo, mut hi) = (opts.lower, opts.upper);
        while hi - lo > opts.tolerance {
            let mid = 0.5 * (lo + hi);
            if clear(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(found(hi))
    };
    #[cfg(feature = "parallel")]
    return rationing_grid.par_iter().map(search).collect();
    #[cfg(not(feature = "parallel"))]
    rationing_grid.iter().map(search).collect()
}

/// `mechanism,scale,ens_mean,ens_lo,ens_hi`; interval columns are empty for
/// deterministic points.
pub fn sweep_csv(mechanism: MechanismKind, points: &[PortfolioPoint]) -> String {
    let mut out = String::from("mechanism,scale,ens_mean,ens_lo,ens_hi\n");
    for p in points {
        let scale = match mechanism {
            MechanismKind::InterruptibleLoad => p.settings.interruptible_scale,
            MechanismKind::LoadRationing => p.settings.rationing_max,
            MechanismKind::IncentiveDR => p.settings.incentive_coverage,
        };
        let (lo, hi) = p
            .ens_ci
            .map(|(l, h)| (l.to_string(), h.to_string()))
            .unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{}", mechanism.name(), scale, p.ens, lo, hi);
    }
    out
}

/// `incentive_coverage,rationing_max,min_interruptible_scale`
pub fn frontier_csv(points: &[FrontierPoint]) -> String {
    let mut out = String::from("incentive_coverage,rationing_max,min_interruptible_scale\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{}",
            p.incentive_coverage, p.rationing_max, p.min_interruptible_scale
        );
    }
    out
}
