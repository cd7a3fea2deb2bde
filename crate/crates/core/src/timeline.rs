//! Hourly scenario inputs: counterfactual load per load bus, available
//! capacity per generator, interruptible commitment, optional reference
//! shedding.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::csvio::{parse_error, read_rows};
use crate::error::{Error, Result};
use crate::grid::{BusId, GenId, GridCase};
use crate::tolerance::FEAS_MW;

#[derive(Debug, Clone, PartialEq)]
pub struct HourInput {
    pub hour_index: i64,
    /// Counterfactual MW per load bus, in `case.load_buses` order.
    pub load: Vec<f64>,
    /// Available MW per generator, in `case.generators` order.
    pub gen_cap: Vec<f64>,
    /// Committed interruptible load, MW.
    pub committed_mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTimeline {
    pub hours: Vec<HourInput>,
    /// Observed total shedding per hour, MW.
    pub reference_shed: Option<Vec<f64>>,
}

/// Labelled readers for the timeline files.
pub struct TimelineSources<'a, R> {
    pub timeline: (&'a str, R),
    pub capacity: (&'a str, R),
    pub commitment: Option<(&'a str, R)>,
    pub reference: Option<(&'a str, R)>,
}

impl ScenarioTimeline {
    pub fn len(&self) -> usize {
        self.hours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hours.is_empty()
    }

    /// Checks lengths and bounds against `case`.
    pub fn validate(&self, case: &GridCase) -> Result<()> {
        if self.hours.is_empty() {
            return Err(Error::InvalidArgument("timeline has no hours".into()));
        }
        for h in &self.hours {
            if h.load.len() != case.load_buses.len() || h.gen_cap.len() != case.generators.len() {
                return Err(Error::Dimension(format!("hour {}: vector lengths do not match the case", h.hour_index)));
            }
            if h.load.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument(format!("hour {}: load must be finite and >= 0", h.hour_index)));
            }
            for (cap, g) in h.gen_cap.iter().zip(&case.generators) {
                if !(cap.is_finite() && *cap >= 0.0 && *cap <= g.p_max_installed + FEAS_MW) {
                    return Err(Error::InvalidArgument(format!(
                        "hour {}: generator {} available {cap} outside [0, {}]",
                        h.hour_index, g.id, g.p_max_installed
                    )));
                }
            }
            if !(h.committed_mw.is_finite() && h.committed_mw >= 0.0) {
                return Err(Error::InvalidArgument(format!("hour {}: committed MW must be >= 0", h.hour_index)));
            }
        }
        if let Some(r) = &self.reference_shed {
            if r.len() != self.hours.len() {
                return Err(Error::Dimension(format!(
                    "reference series has {} hours, timeline has {}",
                    r.len(),
                    self.hours.len()
                )));
            }
        }
        Ok(())
    }

    /// Multiplies every available capacity by `factor`.
    pub fn scale_capacity(&mut self, factor: f64) {
        for h in &mut self.hours {
            h.gen_cap.iter_mut().for_each(|c| *c *= factor);
        }
    }

    pub fn from_readers<R: Read>(case: &GridCase, src: TimelineSources<'_, R>) -> Result<Self> {
        let tl_label = Path::new(src.timeline.0);
        let rows = read_rows::<TimelineRow, _>(
            src.timeline.1,
            tl_label,
            &["hour_index", "bus", "counterfactual_load_mw"],
        )?;
        let mut loads: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
        for r in rows {
            let pos = case.load_position(r.value.bus).ok_or_else(|| {
                parse_error(tl_label, r.line, format!("bus {} is not a load bus", r.value.bus))
            })?;
            let slot = &mut loads
                .entry(r.value.hour_index)
                .or_insert_with(|| vec![None; case.load_buses.len()])[pos];
            if slot.is_some() {
                return Err(parse_error(
                    tl_label,
                    r.line,
                    format!("duplicate entry for hour {} bus {}", r.value.hour_index, r.value.bus),
                ));
            }
            *slot = Some(r.value.counterfactual_load_mw);
        }
        let hour_indices: Vec<i64> = loads.keys().copied().collect();
        check_contiguous(&hour_indices, tl_label)?;

        let cap_label = Path::new(src.capacity.0);
        let rows = read_rows::<CapacityRow, _>(
            src.capacity.1,
            cap_label,
            &["hour_index", "generator_id", "available_mw"],
        )?;
        let mut caps: BTreeMap<i64, Vec<Option<f64>>> = BTreeMap::new();
        for r in rows {
            let pos = case.generator_position(r.value.generator_id).ok_or_else(|| {
                parse_error(cap_label, r.line, format!("unknown generator {}", r.value.generator_id))
            })?;
            if !loads.contains_key(&r.value.hour_index) {
                return Err(parse_error(
                    cap_label,
                    r.line,
                    format!("hour {} not present in the load timeline", r.value.hour_index),
                ));
            }
            let slot = &mut caps
                .entry(r.value.hour_index)
                .or_insert_with(|| vec![None; case.generators.len()])[pos];
            if slot.is_some() {
                return Err(parse_error(
                    cap_label,
                    r.line,
                    format!("duplicate entry for hour {} generator {}", r.value.hour_index, r.value.generator_id),
                ));
            }
            *slot = Some(r.value.available_mw);
        }

        let committed = match src.commitment {
            Some((label, rdr)) => Some(read_hourly(rdr, Path::new(label), "committed_mw", &hour_indices)?),
            None => None,
        };
        let reference_shed = match src.reference {
            Some((label, rdr)) => Some(read_hourly(rdr, Path::new(label), "total_shed_mw", &hour_indices)?),
            None => None,
        };

        let mut hours = Vec::with_capacity(hour_indices.len());
        for (i, &h) in hour_indices.iter().enumerate() {
            let load = complete(&loads[&h], tl_label, h, "load bus", |p| case.load_buses[p].bus)?;
            let gen_cap = match caps.get(&h) {
                Some(v) => complete(v, cap_label, h, "generator", |p| case.generators[p].id)?,
                None => return Err(parse_error(cap_label, 0, format!("hour {h} has no capacity rows"))),
            };
            hours.push(HourInput {
                hour_index: h,
                load,
                gen_cap,
                committed_mw: committed.as_ref().map(|c| c[i]).unwrap_or(0.0),
            });
        }
        let tl = ScenarioTimeline { hours, reference_shed };
        tl.validate(case)?;
        Ok(tl)
    }
}

fn complete(
    slots: &[Option<f64>],
    label: &Path,
    hour: i64,
    what: &str,
    id_of: impl Fn(usize) -> BusId,
) -> Result<Vec<f64>> {
    slots
        .iter()
        .enumerate()
        .map(|(p, v)| v.ok_or_else(|| parse_error(label, 0, format!("hour {hour}: missing {what} {}", id_of(p)))))
        .collect()
}

fn check_contiguous(hours: &[i64], label: &Path) -> Result<()> {
    if hours.is_empty() {
        return Err(parse_error(label, 0, "no rows"));
    }
    for w in hours.windows(2) {
        if w[1] != w[0] + 1 {
            return Err(parse_error(label, 0, format!("hours jump from {} to {}", w[0], w[1])));
        }
    }
    Ok(())
}

fn read_hourly<R: Read>(rdr: R, label: &Path, column: &str, hours: &[i64]) -> Result<Vec<f64>> {
    #[derive(Deserialize)]
    struct Row {
        hour_index: i64,
        #[serde(alias = "committed_mw", alias = "total_shed_mw")]
        value: f64,
    }
    let rows = read_rows::<Row, _>(rdr, label, &["hour_index", column])?;
    let first = hours[0];
    let mut out = vec![None; hours.len()];
    for r in rows {
        let idx = r.value.hour_index - first;
        if idx < 0 || idx as usize >= hours.len() {
            return Err(parse_error(label, r.line, format!("hour {} outside the timeline", r.value.hour_index)));
        }
        if out[idx as usize].replace(r.value.value).is_some() {
            return Err(parse_error(label, r.line, format!("duplicate hour {}", r.value.hour_index)));
        }
    }
    out.iter()
        .zip(hours)
        .map(|(v, h)| v.ok_or_else(|| parse_error(label, 0, format!("missing hour {h}"))))
        .collect()
}

#[derive(Deserialize)]
struct TimelineRow {
    hour_index: i64,
    bus: BusId,
    counterfactual_load_mw: f64,
}

#[derive(Deserialize)]
struct CapacityRow {
    hour_index: i64,
    generator_id: GenId,
    available_mw: f64,
}
