//! Static network description: buses, branches, generators and the sector
//! composition of every load bus.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::csvio::{self, parse_error, read_rows};
use crate::error::{Error, Result};
use crate::tolerance::WEIGHT_SUM;

pub const DEFAULT_BASE_MVA: f64 = 100.0;

pub type BusId = u32;
pub type GenId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: BusId,
    pub zone: String,
    pub is_slack: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Series reactance in per unit on the case base.
    pub reactance: f64,
    /// Thermal limit in MW, applied symmetrically.
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub id: GenId,
    pub bus: BusId,
    pub p_max_installed: f64,
    /// Marginal cost in $/MWh.
    pub cost: f64,
}

/// Load composition by sector. Fractions sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorWeights {
    pub residential: f64,
    pub business: f64,
    pub other: f64,
}

impl SectorWeights {
    pub fn new(residential: f64, business: f64, other: f64) -> Self {
        Self {
            residential,
            business,
            other,
        }
    }

    pub fn sum(&self) -> f64 {
        self.residential + self.business + self.other
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.residential, self.business, self.other]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadBus {
    pub bus: BusId,
    pub weights: SectorWeights,
}

/// A validated network. Immutable once built; share it by reference.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCase {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub load_buses: Vec<LoadBus>,
    pub base_mva: f64,
}

/// A single broken invariant. `code()` is stable and machine readable.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateBusId(BusId),
    MultipleSlack,
    NoSlack,
    DuplicateGeneratorId(GenId),
    DuplicateLoadBus(BusId),
    UnknownBus { referenced_by: String, bus: BusId },
    SelfLoop { bus: BusId },
    NonPositiveReactance { from: BusId, to: BusId },
    NonPositiveLimit { from: BusId, to: BusId },
    NegativeCapacity(GenId),
    NegativeCost(GenId),
    WeightOutOfRange { bus: BusId },
    WeightSum { bus: BusId, sum: f64 },
    Disconnected { unreachable: Vec<BusId> },
    NonPositiveBaseMva,
    NonFinite { what: String },
}

impl Violation {
    pub fn code(&self) -> &'static str {
        match self {
            Violation::DuplicateBusId(_) => "duplicate_bus_id",
            Violation::MultipleSlack => "multiple_slack",
            Violation::NoSlack => "no_slack",
            Violation::DuplicateGeneratorId(_) => "duplicate_generator_id",
            Violation::DuplicateLoadBus(_) => "duplicate_load_bus",
            Violation::UnknownBus { .. } => "unknown_bus",
            Violation::SelfLoop { .. } => "self_loop",
            Violation::NonPositiveReactance { .. } => "non_positive_reactance",
            Violation::NonPositiveLimit { .. } => "non_positive_limit",
            Violation::NegativeCapacity(_) => "negative_capacity",
            Violation::NegativeCost(_) => "negative_cost",
            Violation::WeightOutOfRange { .. } => "weight_out_of_range",
            Violation::WeightSum { .. } => "weight_sum",
            Violation::Disconnected { .. } => "disconnected",
            Violation::NonPositiveBaseMva => "non_positive_base_mva",
            Violation::NonFinite { .. } => "non_finite",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] ", self.code())?;
        match self {
            Violation::DuplicateBusId(id) => write!(f, "bus id {id} appears more than once"),
            Violation::MultipleSlack => write!(f, "more than one slack bus"),
            Violation::NoSlack => write!(f, "no slack bus"),
            Violation::DuplicateGeneratorId(id) => write!(f, "generator id {id} appears more than once"),
            Violation::DuplicateLoadBus(id) => write!(f, "load bus {id} listed more than once"),
            Violation::UnknownBus { referenced_by, bus } => {
                write!(f, "{referenced_by} references missing bus {bus}")
            }
            Violation::SelfLoop { bus } => write!(f, "branch connects bus {bus} to itself"),
            Violation::NonPositiveReactance { from, to } => {
                write!(f, "branch {from}-{to} has reactance <= 0")
            }
            Violation::NonPositiveLimit { from, to } => write!(f, "branch {from}-{to} has limit <= 0"),
            Violation::NegativeCapacity(id) => write!(f, "generator {id} has negative capacity"),
            Violation::NegativeCost(id) => write!(f, "generator {id} has negative cost"),
            Violation::WeightOutOfRange { bus } => {
                write!(f, "load bus {bus} has a sector weight outside [0, 1]")
            }
            Violation::WeightSum { bus, sum } => {
                write!(f, "load bus {bus} sector weights sum to {sum}, expected 1")
            }
            Violation::Disconnected { unreachable } => {
                write!(f, "network is disconnected; unreachable buses {unreachable:?}")
            }
            Violation::NonPositiveBaseMva => write!(f, "base_mva must be > 0"),
            Violation::NonFinite { what } => write!(f, "{what} is not finite"),
        }
    }
}

/// Checks every structural invariant. An empty list means the case is valid.
pub fn validate_case(case: &GridCase) -> Vec<Violation> {
    let mut out = Vec::new();

    if !(case.base_mva.is_finite() && case.base_mva > 0.0) {
        out.push(Violation::NonPositiveBaseMva);
    }

    let mut ids = HashSet::new();
    let mut reported = HashSet::new();
    for b in &case.buses {
        if !ids.insert(b.id) && reported.insert(b.id) {
            out.push(Violation::DuplicateBusId(b.id));
        }
    }
    match case.buses.iter().filter(|b| b.is_slack).count() {
        0 if !case.buses.is_empty() => out.push(Violation::NoSlack),
        0 | 1 => {}
        _ => out.push(Violation::MultipleSlack),
    }

    for br in &case.branches {
        for end in [br.from_bus, br.to_bus] {
            if !ids.contains(&end) {
                out.push(Violation::UnknownBus {
                    referenced_by: format!("branch {}-{}", br.from_bus, br.to_bus),
                    bus: end,
                });
            }
        }
        if br.from_bus == br.to_bus {
            out.push(Violation::SelfLoop { bus: br.from_bus });
        }
        if !br.reactance.is_finite() || !br.limit.is_finite() {
            out.push(Violation::NonFinite {
                what: format!("branch {}-{} parameter", br.from_bus, br.to_bus),
            });
        }
        if br.reactance <= 0.0 {
            out.push(Violation::NonPositiveReactance {
                from: br.from_bus,
                to: br.to_bus,
            });
        }
        if br.limit <= 0.0 {
            out.push(Violation::NonPositiveLimit {
                from: br.from_bus,
                to: br.to_bus,
            });
        }
    }

    let mut gen_ids = HashSet::new();
    for g in &case.generators {
        if !gen_ids.insert(g.id) {
            out.push(Violation::DuplicateGeneratorId(g.id));
        }
        if !ids.contains(&g.bus) {
            out.push(Violation::UnknownBus {
                referenced_by: format!("generator {}", g.id),
                bus: g.bus,
            });
        }
        if !g.p_max_installed.is_finite() || !g.cost.is_finite() {
            out.push(Violation::NonFinite {
                what: format!("generator {} parameter", g.id),
            });
        }
        if g.p_max_installed < 0.0 {
            out.push(Violation::NegativeCapacity(g.id));
        }
        if g.cost < 0.0 {
            out.push(Violation::NegativeCost(g.id));
        }
    }

    let mut load_ids = HashSet::new();
    for l in &case.load_buses {
        if !load_ids.insert(l.bus) {
            out.push(Violation::DuplicateLoadBus(l.bus));
        }
        if !ids.contains(&l.bus) {
            out.push(Violation::UnknownBus {
                referenced_by: format!("load {}", l.bus),
                bus: l.bus,
            });
        }
        let w = l.weights.as_array();
        if w.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFinite {
                what: format!("load bus {} sector weight", l.bus),
            });
            continue;
        }
        if w.iter().any(|x| !(0.0..=1.0).contains(x)) {
            out.push(Violation::WeightOutOfRange { bus: l.bus });
        }
        let sum = l.weights.sum();
        if (sum - 1.0).abs() > WEIGHT_SUM {
            out.push(Violation::WeightSum { bus: l.bus, sum });
        }
    }

    if let Some(v) = connectivity(case) {
        out.push(v);
    }
    out
}

fn connectivity(case: &GridCase) -> Option<Violation> {
    let first = case.buses.first()?;
    let mut adj: HashMap<BusId, Vec<BusId>> = HashMap::new();
    for br in &case.branches {
        adj.entry(br.from_bus).or_default().push(br.to_bus);
        adj.entry(br.to_bus).or_default().push(br.from_bus);
    }
    let mut seen = HashSet::from([first.id]);
    let mut queue = VecDeque::from([first.id]);
    while let Some(b) = queue.pop_front() {
        for &n in adj.get(&b).map(Vec::as_slice).unwrap_or(&[]) {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    let mut unreachable: Vec<BusId> = case
        .buses
        .iter()
        .map(|b| b.id)
        .filter(|id| !seen.contains(id))
        .collect();
    if unreachable.is_empty() {
        None
    } else {
        unreachable.sort_unstable();
        unreachable.dedup();
        Some(Violation::Disconnected { unreachable })
    }
}

impl GridCase {
    pub fn bus_position(&self, id: BusId) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn load_position(&self, bus: BusId) -> Option<usize> {
        self.load_buses.iter().position(|l| l.bus == bus)
    }

    pub fn generator_position(&self, id: GenId) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn slack_bus(&self) -> Option<&Bus> {
        self.buses.iter().find(|b| b.is_slack)
    }

    pub fn installed_capacity(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max_installed).sum()
    }

    /// Returns `self` if valid, otherwise every violation.
    pub fn validated(self) -> Result<Self> {
        let v = validate_case(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Reads the four grid CSVs from any readers. `labels` are used in errors.
    pub fn from_readers<R: Read>(sources: GridSources<R>) -> Result<Self> {
        let GridSources {
            buses,
            branches,
            generators,
            loads,
        } = sources;

        let bus_rows = read_rows::<BusRow, _>(buses.1, Path::new(buses.0), &["id", "zone", "is_slack"])?;
        let mut base_mva: Option<f64> = None;
        let mut bus_list = Vec::with_capacity(bus_rows.len());
        for row in bus_rows {
            let is_slack = match row.value.is_slack {
                0 => false,
                1 => true,
                other => {
                    return Err(parse_error(
                        Path::new(buses.0),
                        row.line,
                        format!("is_slack must be 0 or 1, got {other}"),
                    ))
                }
            };
            if let Some(mva) = row.value.base_mva {
                match base_mva {
                    Some(prev) if prev != mva => {
                        return Err(parse_error(
                            Path::new(buses.0),
                            row.line,
                            format!("base_mva {mva} conflicts with earlier value {prev}"),
                        ))
                    }
                    _ => base_mva = Some(mva),
                }
            }
            bus_list.push(Bus {
                id: row.value.id,
                zone: row.value.zone,
                is_slack,
            });
        }

        let branch_list = read_rows::<BranchRow, _>(
            branches.1,
            Path::new(branches.0),
            &["from_bus", "to_bus", "reactance_pu", "limit_mw"],
        )?
        .into_iter()
        .map(|r| Branch {
            from_bus: r.value.from_bus,
            to_bus: r.value.to_bus,
            reactance: r.value.reactance_pu,
            limit: r.value.limit_mw,
        })
        .collect();

        let gen_list = read_rows::<GenRow, _>(
            generators.1,
            Path::new(generators.0),
            &["id", "bus", "p_max_mw", "cost_per_mwh"],
        )?
        .into_iter()
        .map(|r| Generator {
            id: r.value.id,
            bus: r.value.bus,
            p_max_installed: r.value.p_max_mw,
            cost: r.value.cost_per_mwh,
        })
        .collect();

        let load_list = read_rows::<LoadRow, _>(
            loads.1,
            Path::new(loads.0),
            &["bus", "w_residential", "w_business", "w_other"],
        )?
        .into_iter()
        .map(|r| LoadBus {
            bus: r.value.bus,
            weights: SectorWeights::new(r.value.w_residential, r.value.w_business, r.value.w_other),
        })
        .collect();

        GridCase {
            buses: bus_list,
            branches: branch_list,
            generators: gen_list,
            load_buses: load_list,
            base_mva: base_mva.unwrap_or(DEFAULT_BASE_MVA),
        }
        .validated()
    }

    /// Writes the case as the four CSV files into `dir`.
    pub fn write_csv_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let [b, br, g, l] = self.to_csv_strings();
        for (name, body) in [
            ("buses.csv", b),
            ("branches.csv", br),
            ("generators.csv", g),
            ("loads.csv", l),
        ] {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }

    /// Serializes to (buses, branches, generators, loads) CSV text. The
    /// `base_mva` column is emitted only when it differs from the default.
    pub fn to_csv_strings(&self) -> [String; 4] {
        let with_base = self.base_mva != DEFAULT_BASE_MVA;
        let mut buses = String::from(if with_base {
            "id,zone,is_slack,base_mva\n"
        } else {
            "id,zone,is_slack\n"
        });
        for b in &self.buses {
            buses.push_str(&format!("{},{},{}", b.id, b.zone, u8::from(b.is_slack)));
            if with_base {
                buses.push_str(&format!(",{}", self.base_mva));
            }
            buses.push('\n');
        }
        let mut branches = String::from("from_bus,to_bus,reactance_pu,limit_mw\n");
        for br in &self.branches {
            branches.push_str(&format!(
                "{},{},{},{}\n",
                br.from_bus, br.to_bus, br.reactance, br.limit
            ));
        }
        let mut gens = String::from("id,bus,p_max_mw,cost_per_mwh\n");
        for g in &self.generators {
            gens.push_str(&format!("{},{},{},{}\n", g.id, g.bus, g.p_max_installed, g.cost));
        }
        let mut loads = String::from("bus,w_residential,w_business,w_other\n");
        for l in &self.load_buses {
            loads.push_str(&format!(
                "{},{},{},{}\n",
                l.bus, l.weights.residential, l.weights.business, l.weights.other
            ));
        }
        [buses, branches, gens, loads]
    }
}

/// Labelled readers for the four grid files.
pub struct GridSources<'a, R> {
    pub buses: (&'a str, R),
    pub branches: (&'a str, R),
    pub generators: (&'a str, R),
    pub loads: (&'a str, R),
}

/// Loads and validates a case from the four CSV files.
pub fn load_grid_case(bus_path: &Path, branch_path: &Path, gen_path: &Path, load_path: &Path) -> Result<GridCase> {
    let labels: Vec<String> = [bus_path, branch_path, gen_path, load_path]
        .iter()
        .map(|p| p.display().to_string())
        .collect();
    GridCase::from_readers(GridSources {
        buses: (&labels[0], csvio::open(bus_path)?),
        branches: (&labels[1], csvio::open(branch_path)?),
        generators: (&labels[2], csvio::open(gen_path)?),
        loads: (&labels[3], csvio::open(load_path)?),
    })
}

#[derive(Deserialize)]
struct BusRow {
    id: BusId,
    zone: String,
    is_slack: u8,
    #[serde(default)]
    base_mva: Option<f64>,
}

#[derive(Deserialize)]
struct BranchRow {
    from_bus: BusId,
    to_bus: BusId,
    reactance_pu: f64,
    limit_mw: f64,
}

#[derive(Deserialize)]
struct GenRow {
    id: GenId,
    bus: BusId,
    p_max_mw: f64,
    cost_per_mwh: f64,
}

#[derive(Deserialize)]
struct LoadRow {
    bus: BusId,
    w_residential: f64,
    w_business: f64,
    w_other: f64,
}
