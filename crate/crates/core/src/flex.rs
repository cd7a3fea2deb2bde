//! Demand-flexibility resources.
//!
//! Every mechanism is described by the same envelope: a ramp-rate band
//! `[r_min, r_max]` (fractions of realized capacity per hour), a capacity bound
//! `0 ≤ P ≤ P_max` and an activation-duration band `[t_min, t_max]`. The three
//! mechanisms differ only in parameters and in how `P_max` is realized each hour.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MechanismKind {
    InterruptibleLoad,
    LoadRationing,
    IncentiveDR,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 3] = [
        MechanismKind::InterruptibleLoad,
        MechanismKind::LoadRationing,
        MechanismKind::IncentiveDR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::InterruptibleLoad => "interruptible",
            MechanismKind::LoadRationing => "rationing",
            MechanismKind::IncentiveDR => "incentive",
        }
    }

    pub fn is_deterministic(self) -> bool {
        !matches!(self, MechanismKind::IncentiveDR)
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "interruptible" | "interruptible_load" => Ok(MechanismKind::InterruptibleLoad),
            "rationing" | "load_rationing" => Ok(MechanismKind::LoadRationing),
            "incentive" | "incentive_dr" => Ok(MechanismKind::IncentiveDR),
            other => Err(Error::InvalidArgument(format!("unknown mechanism `{other}`"))),
        }
    }
}

/// How the incentive reduction is scaled down when a customer has already
/// lost part of their load to rationing or forced shedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiscountRule {
    /// Multiply by `1 − existing_reduction_frac`.
    #[default]
    Linear,
    None,
}

impl FromStr for DiscountRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(DiscountRule::Linear),
            "none" => Ok(DiscountRule::None),
            other => Err(Error::InvalidArgument(format!("unknown discount rule `{other}`"))),
        }
    }
}

/// Two-group participant model for voluntary incentive response.
///
/// The default numbers are placeholders, not measured values; override them
/// per scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncentiveModel {
    /// Fraction of residential customers enrolled.
    pub coverage: f64,
    /// Fraction of enrolled customers in the active group.
    pub active_share: f64,
    pub active_mean: f64,
    pub active_sd: f64,
    pub inactive_mean: f64,
    pub inactive_sd: f64,
    pub discount: DiscountRule,
}

impl Default for IncentiveModel {
    fn default() -> Self {
        Self {
            coverage: 0.0,
            active_share: 0.3,
            active_mean: 0.2,
            active_sd: 0.05,
            inactive_mean: 0.02,
            inactive_sd: 0.01,
            discount: DiscountRule::Linear,
        }
    }
}

impl IncentiveModel {
    pub fn validate(&self) -> Result<()> {
        let fracs = [
            ("coverage", self.coverage),
            ("active_share", self.active_share),
            ("active_mean", self.active_mean),
            ("inactive_mean", self.inactive_mean),
        ];
        for (name, v) in fracs {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Model(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        for (name, v) in [("active_sd", self.active_sd), ("inactive_sd", self.inactive_sd)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Model(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Where a resource's hourly `P_max` comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapacityModel {
    /// `scale × committed MW` of the hour.
    Committed { scale: f64 },
    /// `max_frac × residential MW` of the hour.
    ResidentialShare { max_frac: f64 },
    /// Drawn from the incentive model whenever a signal is sent.
    Sampled(IncentiveModel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlexResource {
    pub kind: MechanismKind,
    /// Maximal restoration rate, ≤ 0, fraction of realized capacity per hour.
    pub r_min: f64,
    /// Maximal response rate, ≥ 0, fraction of realized capacity per hour.
    pub r_max: f64,
    pub capacity: CapacityModel,
    /// Hours.
    pub t_min: f64,
    /// Hours; `f64::INFINITY` for no limit.
    pub t_max: f64,
}

/// Default envelope for each mechanism.
pub fn default_resource(kind: MechanismKind) -> FlexResource {
    match kind {
        MechanismKind::InterruptibleLoad => FlexResource {
            kind,
            r_min: -1.0,
            r_max: 0.5,
            capacity: CapacityModel::Committed { scale: 1.0 },
            t_min: 0.0,
            t_max: f64::INFINITY,
        },
        MechanismKind::LoadRationing => FlexResource {
            kind,
            r_min: -0.1,
            r_max: 0.1,
            capacity: CapacityModel::ResidentialShare { max_frac: 0.5 },
            t_min: 0.0,
            t_max: f64::INFINITY,
        },
        MechanismKind::IncentiveDR => FlexResource {
            kind,
            r_min: -1.0,
            r_max: 1.0,
            capacity: CapacityModel::Sampled(IncentiveModel::default()),
            t_min: 0.0,
            t_max: 1.0,
        },
    }
}

impl FlexResource {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min <= 0.0 && self.r_max >= 0.0 && self.r_min.is_finite() && self.r_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{}: need r_min <= 0 <= r_max, got [{}, {}]",
                self.kind, self.r_min, self.r_max
            )));
        }
        if !(self.t_min >= 0.0 && self.t_min <= self.t_max) {
            return Err(Error::InvalidArgument(format!(
                "{}: need 0 <= t_min <= t_max, got [{}, {}]",
                self.kind, self.t_min, self.t_max
            )));
        }
        match self.capacity {
            CapacityModel::Committed { scale } if !(scale.is_finite() && scale >= 0.0) => Err(
                Error::InvalidArgument(format!("{}: scale must be >= 0, got {scale}", self.kind)),
            ),
            CapacityModel::ResidentialShare { max_frac } if !(0.0..=1.0).contains(&max_frac) => {
                Err(Error::InvalidArgument(format!(
                    "{}: max fraction must be in [0, 1], got {max_frac}",
                    self.kind
                )))
            }
            CapacityModel::Sampled(m) => m.validate(),
            _ => Ok(()),
        }
    }
}

/// Activation state carried between steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActivationState {
    /// Reduced load, MW.
    pub active_mw: f64,
    /// Length of the current activation in hours; zero when idle.
    pub active_hours: f64,
    /// Last applied ramp, MW/h.
    pub last_rate: f64,
}

impl ActivationState {
    pub fn idle() -> Self {
        Self::default()
    }

    /// Starts a fresh activation window (a new signal) without changing the level.
    pub fn resignal(&mut self) {
        self.active_hours = 0.0;
    }

    fn duration_exceeded(&self, res: &FlexResource, dt: f64) -> bool {
        self.active_mw > 0.0 && self.active_hours + dt > res.t_max + EPS
    }

    fn release_locked(&self, res: &FlexResource) -> bool {
        self.active_mw > 0.0 && self.active_hours + EPS < res.t_min
    }
}

/// Range of levels reachable in one step of `dt` hours.
pub fn hour_bounds(res: &FlexResource, state: &ActivationState, dt: f64, realized_cap: f64) -> (f64, f64) {
    let cap = realized_cap.max(0.0);
    let start = state.active_mw.min(cap);
    let down = (start + res.r_min * cap * dt).max(0.0);
    let up = (start + res.r_max * cap * dt).min(cap);
    if state.duration_exceeded(res, dt) {
        (down, down)
    } else if state.release_locked(res) {
        (start, up)
    } else {
        (down, up)
    }
}

/// Advances one step, granting as much of `requested_delta` as the envelope allows.
///
/// If the realized capacity has dropped below the current level, the level is
/// first cut to the new capacity; ramp limits apply from there.
pub fn step_activation(
    res: &FlexResource,
    state: &ActivationState,
    requested_delta: f64,
    dt: f64,
    realized_cap: f64,
) -> Result<ActivationState> {
    if !(state.active_mw >= 0.0) {
        return Err(Error::InvalidState(format!("negative active level {}", state.active_mw)));
    }
    if !(dt > 0.0) || !(realized_cap >= 0.0) || !requested_delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and realized_cap >= 0, got dt={dt}, cap={realized_cap}"
        )));
    }
    let start = state.active_mw.min(realized_cap);
    let (lo, hi) = hour_bounds(res, state, dt, realized_cap);
    let target = (start + requested_delta).clamp(lo, hi);
    let active_mw = if target <= EPS * realized_cap.max(1.0) { 0.0 } else { target };
    let active_hours = if active_mw > 0.0 {
        if state.active_mw > 0.0 {
            state.active_hours + dt
        } else {
            dt
        }
    } else {
        0.0
    };
    Ok(ActivationState {
        active_mw,
        active_hours,
        last_rate: (active_mw - start) / dt,
    })
}

/// Whether interruptible load should be (or stay) engaged.
pub fn interruptible_trigger(reserve: f64, shedding_or_rationing_active: bool, threshold: f64) -> bool {
    reserve < threshold || shedding_or_rationing_active
}

/// Draws the aggregate incentive reduction available from `residential_mw`.
pub fn sample_incentive_capacity<R: Rng + ?Sized>(
    model: &IncentiveModel,
    residential_mw: f64,
    existing_reduction_frac: f64,
    rng: &mut R,
) -> Result<f64> {
    model.validate()?;
    if !(residential_mw >= 0.0 && residential_mw.is_finite()) {
        return Err(Error::Model(format!("residential load must be >= 0, got {residential_mw}")));
    }
    if !(0.0..=1.0).contains(&existing_reduction_frac) {
        return Err(Error::Model(format!(
            "existing reduction fraction must be in [0, 1], got {existing_reduction_frac}"
        )));
    }
    let active = truncated_unit_normal(model.active_mean, model.active_sd, rng);
    let inactive = truncated_unit_normal(model.inactive_mean, model.inactive_sd, rng);
    let mix = model.active_share * active + (1.0 - model.active_share) * inactive;
    let discount = match model.discount {
        DiscountRule::Linear => 1.0 - existing_reduction_frac,
        DiscountRule::None => 1.0,
    };
    let covered = model.coverage * residential_mw;
    Ok((covered * mix * discount).clamp(0.0, covered))
}

/// Normal draw conditioned on `[0, 1]` by rejection; falls back to clamping
/// when the window carries almost no mass.
fn truncated_unit_normal<R: Rng + ?Sized>(mean: f64, sd: f64, rng: &mut R) -> f64 {
    if sd == 0.0 {
        return mean.clamp(0.0, 1.0);
    }
    let normal = Normal::new(mean, sd).expect("sd validated");
    for _ in 0..1000 {
        let v = normal.sample(rng);
        if (0.0..=1.0).contains(&v) {
            return v;
        }
    }
    mean.clamp(0.0, 1.0)
}

/// One recipient of a proportional allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocTarget {
    pub weight: f64,
    pub cap: f64,
}

/// Splits `total_mw` proportionally to weights, capping each recipient and
/// redistributing overflow among the rest. The sum equals
/// `min(total_mw, Σ cap)`.
pub fn allocate_weighted(total_mw: f64, targets: &[AllocTarget]) -> Vec<f64> {
    let mut alloc = vec![0.0; targets.len()];
    let cap_sum: f64 = targets.iter().map(|t| t.cap.max(0.0)).sum();
    let mut remaining = total_mw.max(0.0).min(cap_sum);
    if remaining <= 0.0 {
        return alloc;
    }
    if remaining >= cap_sum {
        for (a, t) in alloc.iter_mut().zip(targets) {
            *a = t.cap.max(0.0);
        }
        return alloc;
    }
    let mut free: Vec<usize> = (0..targets.len()).filter(|&i| targets[i].cap > 0.0).collect();
    let mut use_cap_weights = false;
    while remaining > 0.0 && !free.is_empty() {
        let weight = |i: usize| {
            if use_cap_weights {
                targets[i].cap
            } else {
                targets[i].weight.max(0.0)
            }
        };
        let wsum: f64 = free.iter().map(|&i| weight(i)).sum();
        if wsum <= 0.0 {
            use_cap_weights = true;
            continue;
        }
        let share = remaining / wsum;
        let (capped, open): (Vec<usize>, Vec<usize>) = free
            .iter()
            .partition(|&&i| alloc[i] + weight(i) * share >= targets[i].cap);
        if capped.is_empty() {
            for &i in &open {
                alloc[i] += weight(i) * share;
            }
            break;
        }
        for &i in &capped {
            remaining -= targets[i].cap - alloc[i];
            alloc[i] = targets[i].cap;
        }
        free = open;
    }
    alloc
}

/// Proportional allocation by the recipients' target-sector MW, which are
/// also the caps.
pub fn allocate_reduction(total_mw: f64, sector_mw: &[f64]) -> Vec<f64> {
    let targets: Vec<AllocTarget> = sector_mw
        .iter()
        .map(|&m| AllocTarget { weight: m, cap: m })
        .collect();
    allocate_weighted(total_mw, &targets)
}
