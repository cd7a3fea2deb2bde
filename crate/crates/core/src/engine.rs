//! Hour-by-hour scarcity simulation.
//!
//! Each hour starts from the counterfactual load minus whatever reduction is
//! carried over from the previous hour. Demand-response mechanisms are
//! engaged in priority order within their ramp and capacity envelopes; any
//! remaining shortfall of feasibility or reserve is closed by forced shedding
//! in fixed increments. When the system has slack, carried forced shedding is
//! restored in the same increments as long as the snapshot stays feasible
//! and above the reserve floor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dcopf::{DcNetwork, DispatchResult};
use crate::error::{Error, Result};
use crate::flex::{
    allocate_reduction, allocate_weighted, hour_bounds, interruptible_trigger,
    sample_incentive_capacity, step_activation, ActivationState, AllocTarget, CapacityModel,
    FlexResource, MechanismKind,
};
use crate::grid::GridCase;
use crate::metrics::SimulationReport;
use crate::timeline::{HourInput, ScenarioTimeline};
use crate::tolerance::FEAS_MW;

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    /// Minimum system reserve, MW.
    pub p_r_min: f64,
    /// Forced-shedding increment, MW.
    pub shed_step: f64,
    /// Reserve level below which interruptible load engages, MW.
    pub interrupt_threshold: f64,
    pub mechanism_order: Vec<MechanismKind>,
    /// `None` means `ceil(total load / shed_step) + 16` for each hour.
    pub max_iterations_per_hour: Option<usize>,
    pub seed: u64,
    /// KDE bandwidth for the report; `None` selects Silverman's rule.
    pub kde_bandwidth: Option<f64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            p_r_min: 2300.0,
            shed_step: 25.0,
            interrupt_threshold: 3000.0,
            mechanism_order: MechanismKind::ALL.to_vec(),
            max_iterations_per_hour: None,
            seed: 0,
            kde_bandwidth: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_r_min.is_finite() && self.p_r_min >= 0.0) {
            return Err(Error::config("p_r_min_mw", format!("must be >= 0, got {}", self.p_r_min)));
        }
        if !(self.shed_step.is_finite() && self.shed_step > 0.0) {
            return Err(Error::config("shed_step_mw", format!("must be > 0, got {}", self.shed_step)));
        }
        if !(self.interrupt_threshold.is_finite() && self.interrupt_threshold > 0.0) {
            return Err(Error::config(
                "interrupt_threshold_mw",
                format!("must be > 0, got {}", self.interrupt_threshold),
            ));
        }
        let mut sorted = self.mechanism_order.clone();
        sorted.sort();
        if sorted != MechanismKind::ALL.to_vec() {
            return Err(Error::config(
                "mechanism_order",
                "must list interruptible, rationing and incentive exactly once each",
            ));
        }
        if self.max_iterations_per_hour == Some(0) {
            return Err(Error::config("max_iterations_per_hour", "must be >= 1"));
        }
        if let Some(h) = self.kde_bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::config("kde_bandwidth_mw", format!("must be > 0, got {h}")));
            }
        }
        Ok(())
    }
}

/// State carried from one hour to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    /// Next hour position in the timeline.
    pub hour: usize,
    /// Forced shed per load bus at the end of the previous hour, MW.
    pub shed: Vec<f64>,
    /// One entry per resource, same order as the resource list.
    pub resources: Vec<ActivationState>,
    /// Capacity each resource was last realized at.
    pub last_cap: Vec<f64>,
    pub rng: ChaCha8Rng,
}

impl SimulationState {
    pub fn new(case: &GridCase, resources: &[FlexResource], seed: u64) -> Self {
        Self {
            hour: 0,
            shed: vec![0.0; case.load_buses.len()],
            resources: vec![ActivationState::idle(); resources.len()],
            last_cap: vec![0.0; resources.len()],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn total_shed(&self) -> f64 {
        self.shed.iter().sum()
    }
}

/// Outcome of one simulated hour. Per-bus vectors follow `case.load_buses`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourResult {
    pub hour_index: i64,
    /// DC OPF convergence of the final snapshot.
    pub feasible: bool,
    pub dispatch: DispatchResult,
    pub counterfactual: Vec<f64>,
    pub served: Vec<f64>,
    pub forced_shed: Vec<f64>,
    pub interruptible: Vec<f64>,
    pub rationing: Vec<f64>,
    pub incentive: Vec<f64>,
    /// Σ available capacity − Σ served load, MW.
    pub reserve_mw: f64,
    /// Shedding or restoration increments taken this hour.
    pub iterations: usize,
    /// Whether an incentive signal was sent.
    pub incentive_signaled: bool,
}

impl HourResult {
    pub fn forced_shed_mw(&self) -> f64 {
        self.forced_shed.iter().sum()
    }
    pub fn served_mw(&self) -> f64 {
        self.served.iter().sum()
    }
    pub fn interruptible_mw(&self) -> f64 {
        self.interruptible.iter().sum()
    }
    pub fn rationing_mw(&self) -> f64 {
        self.rationing.iter().sum()
    }
    pub fn incentive_mw(&self) -> f64 {
        self.incentive.iter().sum()
    }
    pub fn mechanism_mw(&self, kind: MechanismKind) -> f64 {
        match kind {
            MechanismKind::InterruptibleLoad => self.interruptible_mw(),
            MechanismKind::LoadRationing => self.rationing_mw(),
            MechanismKind::IncentiveDR => self.incentive_mw(),
        }
    }
    /// Interruptible plus forced shedding: what an operator reports as shed load.
    pub fn total_shedding(&self) -> f64 {
        self.interruptible_mw() + self.forced_shed_mw()
    }
}

/// A case, its resources and the engine settings, ready to step through hours.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    case: &'a GridCase,
    network: DcNetwork,
    resources: Vec<FlexResource>,
    cfg: EngineConfig,
}

/// Per-bus quantities fixed for the duration of one hour.
struct HourContext<'h> {
    input: &'h HourInput,
    residential: Vec<f64>,
    business: Vec<f64>,
    w_res: Vec<f64>,
    base_reserve: f64,
}

/// Mechanism levels under consideration, MW.
#[derive(Clone)]
struct Levels {
    mw: [f64; 3],
    /// Per-bus incentive caps when a signal was sent.
    incentive_caps: Vec<f64>,
}

struct Snapshot {
    interruptible: Vec<f64>,
    rationing: Vec<f64>,
    incentive: Vec<f64>,
    forced: Vec<f64>,
    served: Vec<f64>,
    reserve: f64,
    /// `None` when the reserve test already failed and no OPF was run.
    dispatch: Option<DispatchResult>,
}

impl Snapshot {
    fn feasible(&self) -> bool {
        self.dispatch.as_ref().is_some_and(|d| d.feasible)
    }
}

fn slot(kind: MechanismKind) -> usize {
    match kind {
        MechanismKind::InterruptibleLoad => 0,
        MechanismKind::LoadRationing => 1,
        MechanismKind::IncentiveDR => 2,
    }
}

impl<'a> Engine<'a> {
    pub fn new(case: &'a GridCase, resources: Vec<FlexResource>, cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        for (i, r) in resources.iter().enumerate() {
            r.validate()?;
            if resources[..i].iter().any(|o| o.kind == r.kind) {
                return Err(Error::InvalidArgument(format!("resource {} listed twice", r.kind)));
            }
        }
        Ok(Self {
            case,
            network: DcNetwork::new(case)?,
            resources,
            cfg,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn initial_state(&self) -> SimulationState {
        SimulationState::new(self.case, &self.resources, self.cfg.seed)
    }

    fn resource_index(&self, kind: MechanismKind) -> Option<usize> {
        self.resources.iter().position(|r| r.kind == kind)
    }

    fn realized_cap(&self, res: &FlexResource, ctx: &HourContext<'_>) -> f64 {
        match res.capacity {
            CapacityModel::Committed { scale } => {
                (scale * ctx.input.committed_mw).min(ctx.business.iter().sum())
            }
            CapacityModel::ResidentialShare { max_frac } => max_frac * ctx.residential.iter().sum::<f64>(),
            CapacityModel::Sampled(_) => 0.0,
        }
    }

    /// Per-bus DR reductions and the load left after them.
    fn split(&self, ctx: &HourContext<'_>, lv: &Levels) -> [Vec<f64>; 4] {
        let load = &ctx.input.load;
        let interruptible = allocate_reduction(lv.mw[0], &ctx.business);
        let rationing = allocate_reduction(lv.mw[1], &ctx.residential);
        let incentive = if lv.incentive_caps.is_empty() {
            vec![0.0; load.len()]
        } else {
            let t: Vec<AllocTarget> = lv
                .incentive_caps
                .iter()
                .map(|&c| AllocTarget { weight: c, cap: c })
                .collect();
            allocate_weighted(lv.mw[2], &t)
        };
        let remaining = (0..load.len())
            .map(|b| (load[b] - interruptible[b] - rationing[b] - incentive[b]).max(0.0))
            .collect();
        [interruptible, rationing, incentive, remaining]
    }

    fn remaining_mw(&self, ctx: &HourContext<'_>, lv: &Levels) -> f64 {
        let [.., remaining] = self.split(ctx, lv);
        remaining.iter().sum()
    }

    fn evaluate(&self, ctx: &HourContext<'_>, lv: &Levels, shed: f64, target: f64) -> Result<Snapshot> {
        let [interruptible, rationing, incentive, remaining] = self.split(ctx, lv);
        let forced = allocate_reduction(shed, &remaining);
        let served: Vec<f64> = remaining.iter().zip(&forced).map(|(r, s)| (r - s).max(0.0)).collect();
        let reduction = lv.mw.iter().sum::<f64>() + shed;
        let reserve = ctx.base_reserve + reduction;
        let dispatch = if reserve >= target - FEAS_MW {
            Some(self.network.solve(&ctx.input.gen_cap, &served)?)
        } else {
            None
        };
        Ok(Snapshot {
            interruptible,
            rationing,
            incentive,
            forced,
            served,
            reserve,
            dispatch,
        })
    }

    fn ok(&self, ctx: &HourContext<'_>, lv: &Levels, shed: f64, target: f64) -> Result<bool> {
        let s = self.evaluate(ctx, lv, shed, target)?;
        Ok(s.feasible() && s.reserve >= target - FEAS_MW)
    }

    /// Raises mechanism `k` from its current level toward `hi` until the
    /// snapshot is feasible with reserve at least `target`.
    fn raise(&self, ctx: &HourContext<'_>, lv: &mut Levels, k: usize, hi: f64, shed: f64, target: f64) -> Result<()> {
        if self.ok(ctx, lv, shed, target)? {
            return Ok(());
        }
        let current = lv.mw[k];
        let reserve = ctx.base_reserve + lv.mw.iter().sum::<f64>() + shed;
        let mut candidate = (current + (target - reserve).max(0.0)).clamp(current, hi.max(current));
        loop {
            lv.mw[k] = candidate;
            if candidate >= hi || self.ok(ctx, lv, shed, target)? {
                return Ok(());
            }
            candidate = (candidate + self.cfg.shed_step).min(hi);
        }
    }

    /// Runs one hour and returns its result together with the carried state.
    pub fn run_hour(&self, input: &HourInput, state: &SimulationState) -> Result<(HourResult, SimulationState)> {
        let case = self.case;
        let n = case.load_buses.len();
        if input.load.len() != n || input.gen_cap.len() != case.generators.len() || state.shed.len() != n {
            return Err(Error::Dimension("hour input does not match the case".into()));
        }
        let mut next = state.clone();
        let w_res: Vec<f64> = case.load_buses.iter().map(|l| l.weights.residential).collect();
        let ctx = HourContext {
            input,
            residential: input.load.iter().zip(&w_res).map(|(l, w)| l * w).collect(),
            business: input
                .load
                .iter()
                .zip(&case.load_buses)
                .map(|(l, lb)| l * lb.weights.business)
                .collect(),
            w_res,
            base_reserve: input.gen_cap.iter().sum::<f64>() - input.load.iter().sum::<f64>(),
        };
        let p_min = self.cfg.p_r_min;
        let il_target = self.cfg.interrupt_threshold.max(p_min);

        // Reachable range and starting level of each deterministic mechanism.
        let mut caps = [0.0; 3];
        let mut bounds = [(0.0, 0.0); 3];
        let mut lv = Levels { mw: [0.0; 3], incentive_caps: Vec::new() };
        for (i, res) in self.resources.iter().enumerate() {
            if !res.kind.is_deterministic() {
                continue;
            }
            let k = slot(res.kind);
            caps[k] = self.realized_cap(res, &ctx);
            bounds[k] = hour_bounds(res, &state.resources[i], 1.0, caps[k]);
            lv.mw[k] = state.resources[i].active_mw.min(caps[k]).clamp(bounds[k].0, bounds[k].1);
        }
        let carried = state.total_shed();
        let rationing_active = lv.mw[1] > 0.0;
        let inherited = self.evaluate(&ctx, &lv, 0.0, f64::NEG_INFINITY)?;
        let il_engaged = !inherited.feasible()
            || interruptible_trigger(inherited.reserve, carried > 0.0 || rationing_active, self.cfg.interrupt_threshold);
        // Ramp-down is allowed only for mechanisms that are free to release.
        if !il_engaged {
            lv.mw[0] = bounds[0].0;
        }
        lv.mw[1] = bounds[1].0;

        let mut signaled = false;
        for &kind in &self.cfg.mechanism_order {
            let Some(ri) = self.resource_index(kind) else { continue };
            match kind {
                MechanismKind::InterruptibleLoad => self.raise(&ctx, &mut lv, 0, bounds[0].1, 0.0, il_target)?,
                MechanismKind::LoadRationing => self.raise(&ctx, &mut lv, 1, bounds[1].1, 0.0, p_min)?,
                MechanismKind::IncentiveDR => {
                    let carried_now = carried.min(self.remaining_mw(&ctx, &lv));
                    if self.ok(&ctx, &lv, carried_now, p_min)? {
                        continue;
                    }
                    let CapacityModel::Sampled(model) = self.resources[ri].capacity else {
                        return Err(Error::InvalidArgument("incentive resource needs a sampling model".into()));
                    };
                    let rationed = allocate_reduction(lv.mw[1], &ctx.residential);
                    let mut caps_b = Vec::with_capacity(n);
                    for b in 0..n {
                        let res_mw = ctx.residential[b];
                        let lost = if res_mw > 0.0 {
                            ((rationed[b] + ctx.w_res[b] * state.shed[b]) / res_mw).clamp(0.0, 1.0)
                        } else {
                            0.0
                        };
                        caps_b.push(sample_incentive_capacity(&model, res_mw, lost, &mut next.rng)?);
                    }
                    caps[2] = caps_b.iter().sum();
                    lv.incentive_caps = caps_b;
                    signaled = true;
                    let mut fresh = ActivationState::idle();
                    fresh.resignal();
                    bounds[2] = hour_bounds(&self.resources[ri], &fresh, 1.0, caps[2]);
                    self.raise(&ctx, &mut lv, 2, bounds[2].1, carried_now, p_min)?;
                }
            }
        }

        // Forced shedding / restoration in fixed increments.
        let step = self.cfg.shed_step;
        let available = self.remaining_mw(&ctx, &lv);
        let max_iter = self
            .cfg
            .max_iterations_per_hour
            .unwrap_or_else(|| (input.load.iter().sum::<f64>() / step).ceil() as usize + 16);
        let mut shed = carried.min(available);
        let mut iterations = 0usize;
        let mut snap = self.evaluate(&ctx, &lv, shed, p_min)?;
        let is_ok = |s: &Snapshot| s.feasible() && s.reserve >= p_min - FEAS_MW;

        if !is_ok(&snap) {
            let deficit = p_min - FEAS_MW - snap.reserve;
            let jump = if deficit > 0.0 { (deficit / step).ceil() as usize } else { 0 };
            if jump > 0 {
                iterations += jump;
                shed = (shed + jump as f64 * step).min(available);
                snap = self.evaluate(&ctx, &lv, shed, p_min)?;
            }
            while !is_ok(&snap) {
                if iterations >= max_iter || shed >= available {
                    return Err(Error::NonConvergence { hour: state.hour, iterations });
                }
                iterations += 1;
                shed = (shed + step).min(available);
                snap = self.evaluate(&ctx, &lv, shed, p_min)?;
            }
            if iterations > max_iter {
                return Err(Error::NonConvergence { hour: state.hour, iterations });
            }
        } else if snap.reserve > p_min + FEAS_MW && shed > 0.0 {
            // Lowest rung of the ladder shed - j*step that keeps the reserve floor.
            let slack = snap.reserve - p_min + FEAS_MW;
            let rungs = (slack / step).floor() as usize;
            let target = snap_zero(shed - rungs as f64 * step);
            if target < shed {
                let cand = self.evaluate(&ctx, &lv, target, p_min)?;
                if is_ok(&cand) {
                    iterations += ((shed - target) / step).ceil() as usize;
                    snap = cand;
                } else {
                    loop {
                        let c = snap_zero(shed - step);
                        if c >= shed {
                            break;
                        }
                        let cand = self.evaluate(&ctx, &lv, c, p_min)?;
                        if !is_ok(&cand) {
                            break;
                        }
                        iterations += 1;
                        shed = c;
                        snap = cand;
                    }
                }
            }
        }

        // Commit mechanism trajectories through the resource envelopes.
        for (i, res) in self.resources.iter().enumerate() {
            let k = slot(res.kind);
            let mut st = state.resources[i];
            let cap = if res.kind == MechanismKind::IncentiveDR {
                if signaled {
                    st.resignal();
                    caps[2]
                } else {
                    state.last_cap[i]
                }
            } else {
                caps[k]
            };
            let start = st.active_mw.min(cap);
            let want = if res.kind == MechanismKind::IncentiveDR && !signaled { 0.0 } else { lv.mw[k] };
            let new_state = step_activation(res, &st, want - start, 1.0, cap)?;
            next.resources[i] = new_state;
            next.last_cap[i] = cap;
        }

        let dispatch = snap
            .dispatch
            .clone()
            .ok_or_else(|| Error::Numerical("final snapshot was not solved".into()))?;
        next.shed = snap.forced.clone();
        next.hour = state.hour + 1;
        Ok((
            HourResult {
                hour_index: input.hour_index,
                feasible: dispatch.feasible,
                dispatch,
                counterfactual: input.load.clone(),
                served: snap.served,
                forced_shed: snap.forced,
                interruptible: snap.interruptible,
                rationing: snap.rationing,
                incentive: snap.incentive,
                reserve_mw: snap.reserve,
                iterations,
                incentive_signaled: signaled,
            },
            next,
        ))
    }

    /// Folds `run_hour` over the whole timeline.
    pub fn run(&self, timeline: &ScenarioTimeline) -> Result<SimulationReport> {
        timeline.validate(self.case)?;
        let mut state = self.initial_state();
        let mut hours = Vec::with_capacity(timeline.len());
        for input in &timeline.hours {
            let (result, next) = self.run_hour(input, &state)?;
            hours.push(result);
            state = next;
        }
        Ok(SimulationReport::from_hours(
            hours,
            timeline.reference_shed.as_deref(),
            self.cfg.kde_bandwidth,
        ))
    }
}

/// Clamps ladder rungs at zero, absorbing summation residue.
fn snap_zero(mw: f64) -> f64 {
    if mw < FEAS_MW { 0.0 } else { mw }
}

/// Runs one hour against a fresh engine.
pub fn run_hour(
    case: &GridCase,
    input: &HourInput,
    state: &SimulationState,
    resources: &[FlexResource],
    cfg: &EngineConfig,
) -> Result<(HourResult, SimulationState)> {
    Engine::new(case, resources.to_vec(), cfg.clone())?.run_hour(input, state)
}

/// Simulates every hour of `timeline` in order.
pub fn run_simulation(
    case: &GridCase,
    timeline: &ScenarioTimeline,
    resources: &[FlexResource],
    cfg: &EngineConfig,
) -> Result<SimulationReport> {
    Engine::new(case, resources.to_vec(), cfg.clone())?.run(timeline)
}
