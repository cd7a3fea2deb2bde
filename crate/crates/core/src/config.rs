//! Scenario configuration: a flat `key = value` text file.
//!
//! Blank lines and everything after `#` are ignored. Relative paths are
//! resolved against the directory containing the config file. Unknown and
//! repeated keys are errors.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::csvio;
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::flex::{default_resource, CapacityModel, DiscountRule, FlexResource, IncentiveModel, MechanismKind};
use crate::grid::{load_grid_case, GridCase};
use crate::portfolio::{PortfolioBase, PortfolioSettings};
use crate::timeline::{ScenarioTimeline, TimelineSources};

/// Every recognized key.
pub const KEYS: &[&str] = &[
    "buses",
    "branches",
    "generators",
    "loads",
    "timeline",
    "capacity",
    "interruptible_commitment",
    "reference_shed",
    "profiles",
    "out_dir",
    "p_r_min_mw",
    "shed_step_mw",
    "interrupt_threshold_mw",
    "mechanism_order",
    "max_iterations_per_hour",
    "seed",
    "kde_bandwidth_mw",
    "interruptible_scale",
    "interruptible_r_min",
    "interruptible_r_max",
    "interruptible_t_min",
    "interruptible_t_max",
    "rationing_max_frac",
    "rationing_r_min",
    "rationing_r_max",
    "rationing_t_min",
    "rationing_t_max",
    "incentive_coverage",
    "incentive_r_min",
    "incentive_r_max",
    "incentive_t_min",
    "incentive_t_max",
    "incentive_active_share",
    "incentive_active_mean",
    "incentive_active_sd",
    "incentive_inactive_mean",
    "incentive_inactive_sd",
    "incentive_discount",
    "replications",
    "capacity_scale",
    "branch_limit_scale",
    "sweep_mechanism",
    "sweep_scales",
    "frontier_rationing",
    "frontier_incentive_coverage",
    "frontier_tolerance",
    "frontier_upper",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPaths {
    pub buses: PathBuf,
    pub branches: PathBuf,
    pub generators: PathBuf,
    pub loads: PathBuf,
    pub timeline: PathBuf,
    pub capacity: PathBuf,
    pub interruptible_commitment: Option<PathBuf>,
    pub reference_shed: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
}

impl ScenarioPaths {
    pub fn all(&self) -> Vec<&Path> {
        let mut v: Vec<&Path> = vec![
            &self.buses,
            &self.branches,
            &self.generators,
            &self.loads,
            &self.timeline,
            &self.capacity,
        ];
        v.extend(
            [&self.interruptible_commitment, &self.reference_shed, &self.profiles]
                .into_iter()
                .flatten()
                .map(PathBuf::as_path),
        );
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub paths: ScenarioPaths,
    pub out_dir: PathBuf,
    pub engine: EngineConfig,
    /// Mechanism templates; scale and coverage are applied per portfolio point.
    pub resources: [FlexResource; 3],
    pub portfolio: PortfolioSettings,
    pub replications: usize,
    pub capacity_scale: f64,
    pub branch_limit_scale: f64,
    pub sweep_mechanism: MechanismKind,
    pub sweep_scales: Vec<f64>,
    pub frontier_rationing: Vec<f64>,
    pub frontier_incentive_coverage: f64,
    pub frontier_tolerance: f64,
    pub frontier_upper: f64,
}

struct Entries {
    map: BTreeMap<String, String>,
    base: PathBuf,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn path(&mut self, key: &str) -> Result<Option<PathBuf>> {
        match self.take(key) {
            Some(v) if v.is_empty() => Err(Error::config(key, "empty path")),
            Some(v) => Ok(Some(csvio::resolve(&self.base, &v))),
            None => Ok(None),
        }
    }

    fn required_path(&mut self, key: &str) -> Result<PathBuf> {
        self.path(key)?.ok_or_else(|| Error::config(key, "required"))
    }

    fn parse<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            Some(v) => v
                .parse()
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
            None => Ok(default),
        }
    }

    fn number(&mut self, key: &str, default: f64, valid: impl Fn(f64) -> bool, range: &str) -> Result<f64> {
        let v: f64 = self.parse(key, default)?;
        if valid(v) {
            Ok(v)
        } else {
            Err(Error::config(key, format!("{v} is out of range, expected {range}")))
        }
    }

    fn list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.take(key) {
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::config(key, format!("cannot parse `{}`: {e}", s.trim())))
                })
                .collect(),
            None => Ok(default.to_vec()),
        }
    }

    fn envelope(&mut self, prefix: &str, res: &mut FlexResource) -> Result<()> {
        res.r_min = self.number(&format!("{prefix}_r_min"), res.r_min, |v| v <= 0.0 && v.is_finite(), "<= 0")?;
        res.r_max = self.number(&format!("{prefix}_r_max"), res.r_max, |v| v >= 0.0 && v.is_finite(), ">= 0")?;
        res.t_min = self.number(&format!("{prefix}_t_min"), res.t_min, |v| v >= 0.0 && v.is_finite(), ">= 0")?;
        let t_max_key = format!("{prefix}_t_max");
        res.t_max = match self.take(&t_max_key) {
            Some(v) if v == "inf" || v == "infinity" => f64::INFINITY,
            Some(v) => v
                .parse()
                .map_err(|e| Error::config(&t_max_key, format!("cannot parse `{v}`: {e}")))?,
            None => res.t_max,
        };
        if !(res.t_max >= res.t_min) {
            return Err(Error::config(&t_max_key, format!("must be >= {prefix}_t_min")));
        }
        Ok(())
    }
}

fn is_frac(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

impl ScenarioConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(line, format!("line {}: expected `key = value`", i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::config(k, format!("line {}: unknown key", i + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::config(k, format!("line {}: repeated key", i + 1)));
            }
        }
        let mut e = Entries { map, base: base_dir.to_path_buf() };

        let paths = ScenarioPaths {
            buses: e.required_path("buses")?,
            branches: e.required_path("branches")?,
            generators: e.required_path("generators")?,
            loads: e.required_path("loads")?,
            timeline: e.required_path("timeline")?,
            capacity: e.required_path("capacity")?,
            interruptible_commitment: e.path("interruptible_commitment")?,
            reference_shed: e.path("reference_shed")?,
            profiles: e.path("profiles")?,
        };
        let out_dir = e.path("out_dir")?.unwrap_or_else(|| base_dir.join("out"));

        let defaults = EngineConfig::default();
        let mechanism_order = match e.take("mechanism_order") {
            Some(v) => v
                .split(',')
                .map(|s| s.parse::<MechanismKind>().map_err(|err| Error::config("mechanism_order", err.to_string())))
                .collect::<Result<Vec<_>>>()?,
            None => defaults.mechanism_order.clone(),
        };
        let max_iterations_per_hour = match e.take("max_iterations_per_hour") {
            Some(v) => Some(v.parse::<usize>().map_err(|err| {
                Error::config("max_iterations_per_hour", format!("cannot parse `{v}`: {err}"))
            })?),
            None => None,
        };
        let kde_bandwidth = match e.take("kde_bandwidth_mw") {
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|err| Error::config("kde_bandwidth_mw", format!("cannot parse `{v}`: {err}")))?,
            ),
            None => None,
        };
        let engine = EngineConfig {
            p_r_min: e.number("p_r_min_mw", defaults.p_r_min, non_negative, ">= 0")?,
            shed_step: e.number("shed_step_mw", defaults.shed_step, positive, "> 0")?,
            interrupt_threshold: e.number("interrupt_threshold_mw", defaults.interrupt_threshold, positive, "> 0")?,
            mechanism_order,
            max_iterations_per_hour,
            seed: e.parse("seed", defaults.seed)?,
            kde_bandwidth,
        };
        engine.validate()?;

        let mut il = default_resource(MechanismKind::InterruptibleLoad);
        let mut lr = default_resource(MechanismKind::LoadRationing);
        let mut inc = default_resource(MechanismKind::IncentiveDR);
        e.envelope("interruptible", &mut il)?;
        e.envelope("rationing", &mut lr)?;
        e.envelope("incentive", &mut inc)?;
        let base_model = IncentiveModel::default();
        let model = IncentiveModel {
            coverage: 0.0,
            active_share: e.number("incentive_active_share", base_model.active_share, is_frac, "[0, 1]")?,
            active_mean: e.number("incentive_active_mean", base_model.active_mean, is_frac, "[0, 1]")?,
            active_sd: e.number("incentive_active_sd", base_model.active_sd, non_negative, ">= 0")?,
            inactive_mean: e.number("incentive_inactive_mean", base_model.inactive_mean, is_frac, "[0, 1]")?,
            inactive_sd: e.number("incentive_inactive_sd", base_model.inactive_sd, non_negative, ">= 0")?,
            discount: match e.take("incentive_discount") {
                Some(v) => v
                    .parse::<DiscountRule>()
                    .map_err(|err| Error::config("incentive_discount", err.to_string()))?,
                None => base_model.discount,
            },
        };
        inc.capacity = CapacityModel::Sampled(model);

        let portfolio = PortfolioSettings {
            interruptible_scale: e.number("interruptible_scale", 1.0, non_negative, ">= 0")?,
            rationing_max: e.number("rationing_max_frac", 0.0, is_frac, "[0, 1]")?,
            incentive_coverage: e.number("incentive_coverage", 0.0, is_frac, "[0, 1]")?,
        };

        let replications: usize = e.parse("replications", 30)?;
        if replications == 0 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        let sweep_mechanism = match e.take("sweep_mechanism") {
            Some(v) => v
                .parse::<MechanismKind>()
                .map_err(|err| Error::config("sweep_mechanism", err.to_string()))?,
            None => MechanismKind::InterruptibleLoad,
        };
        let sweep_scales = e.list("sweep_scales", &[1.0, 2.0, 4.0, 8.0])?;
        if sweep_scales.is_empty() || sweep_scales.iter().any(|v| !non_negative(*v)) {
            return Err(Error::config("sweep_scales", "values must be finite and >= 0"));
        }
        if sweep_scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("sweep_scales", "must be strictly increasing"));
        }
        let frontier_rationing = e.list("frontier_rationing", &[0.0, 0.25, 0.5])?;
        if frontier_rationing.iter().any(|v| !is_frac(*v)) {
            return Err(Error::config("frontier_rationing", "values must be in [0, 1]"));
        }

        let cfg = ScenarioConfig {
            paths,
            out_dir,
            engine,
            resources: [il, lr, inc],
            portfolio,
            replications,
            capacity_scale: e.number("capacity_scale", 1.0, positive, "> 0")?,
            branch_limit_scale: e.number("branch_limit_scale", 1.0, positive, "> 0")?,
            sweep_mechanism,
            sweep_scales,
            frontier_rationing,
            frontier_incentive_coverage: e.number("frontier_incentive_coverage", 0.0, is_frac, "[0, 1]")?,
            frontier_tolerance: e.number("frontier_tolerance", 0.01, positive, "> 0")?,
            frontier_upper: e.number("frontier_upper", 50.0, |v| v.is_finite() && v >= 1.0, ">= 1")?,
        };
        debug_assert!(e.map.is_empty(), "unhandled keys: {:?}", e.map.keys());
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Referenced input files that do not exist.
    pub fn missing_files(&self) -> Vec<PathBuf> {
        self.paths
            .all()
            .into_iter()
            .filter(|p| !p.is_file())
            .map(Path::to_path_buf)
            .collect()
    }

    /// Loads the case and applies `capacity_scale` and `branch_limit_scale`.
    pub fn load_case(&self) -> Result<GridCase> {
        let p = &self.paths;
        let mut case = load_grid_case(&p.buses, &p.branches, &p.generators, &p.loads)?;
        self.apply_case_scales(&mut case);
        Ok(case)
    }

    pub fn apply_case_scales(&self, case: &mut GridCase) {
        for g in &mut case.generators {
            g.p_max_installed *= self.capacity_scale;
        }
        for b in &mut case.branches {
            b.limit *= self.branch_limit_scale;
        }
    }

    pub fn load_timeline(&self, case: &GridCase) -> Result<ScenarioTimeline> {
        let p = &self.paths;
        let label = |q: &Path| q.display().to_string();
        let (tl, cap) = (label(&p.timeline), label(&p.capacity));
        let com = p.interruptible_commitment.as_deref().map(label);
        let rf = p.reference_shed.as_deref().map(label);
        let open_opt = |q: &Option<PathBuf>| -> Result<Option<File>> {
            q.as_deref().map(csvio::open).transpose()
        };
        let commitment = open_opt(&p.interruptible_commitment)?;
        let reference = open_opt(&p.reference_shed)?;
        let mut timeline = ScenarioTimeline::from_readers(
            &unscaled(case, self.capacity_scale),
            TimelineSources {
                timeline: (&tl, csvio::open(&p.timeline)?),
                capacity: (&cap, csvio::open(&p.capacity)?),
                commitment: com.as_deref().zip(commitment),
                reference: rf.as_deref().zip(reference),
            },
        )?;
        timeline.scale_capacity(self.capacity_scale);
        Ok(timeline)
    }

    /// Resources realized for one portfolio point.
    pub fn resources_for(&self, point: &PortfolioSettings) -> Vec<FlexResource> {
        resources_for(&self.resources, point)
    }

    /// Loads everything needed by the portfolio commands.
    pub fn portfolio_base(&self) -> Result<PortfolioBase> {
        let case = self.load_case()?;
        let timeline = self.load_timeline(&case)?;
        Ok(PortfolioBase {
            case,
            timeline,
            engine: self.engine.clone(),
            templates: self.resources,
            scenario_index: 0,
        })
    }
}

/// Applies scale, rationing fraction and coverage to the three templates.
pub fn resources_for(templates: &[FlexResource; 3], point: &PortfolioSettings) -> Vec<FlexResource> {
    let [mut il, mut lr, mut inc] = *templates;
    il.capacity = CapacityModel::Committed { scale: point.interruptible_scale };
    lr.capacity = CapacityModel::ResidentialShare { max_frac: point.rationing_max };
    if let CapacityModel::Sampled(mut m) = inc.capacity {
        m.coverage = point.incentive_coverage;
        inc.capacity = CapacityModel::Sampled(m);
    }
    vec![il, lr, inc]
}

/// Timeline capacities are checked against installed capacity before scaling.
fn unscaled(case: &GridCase, factor: f64) -> GridCase {
    let mut c = case.clone();
    for g in &mut c.generators {
        g.p_max_installed /= factor;
    }
    c
}
