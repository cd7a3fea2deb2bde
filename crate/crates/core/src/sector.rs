//! Sector decomposition of zonal load.
//!
//! Normalized hourly profiles (residential, business, other) are fractions of
//! an unknown per-sector maximum. The maxima are recovered by NNLS against the
//! observed hourly totals and then used to split each hour into sector MW.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use crate::csvio::{self, parse_error, read_rows};
use crate::error::{Error, Result};
use crate::nnls::nnls;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileRow {
    pub hour_index: i64,
    pub r_frac: f64,
    pub b_frac: f64,
    pub o_frac: f64,
    pub total_mw: f64,
}

/// Hourly sector fractions with observed totals for one zone.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorProfileMatrix {
    rows: Vec<ProfileRow>,
}

impl SectorProfileMatrix {
    pub fn new(rows: Vec<ProfileRow>) -> Result<Self> {
        if rows.len() < 3 {
            return Err(Error::Dimension(format!("need at least 3 hours, got {}", rows.len())));
        }
        for r in &rows {
            let vals = [r.r_frac, r.b_frac, r.o_frac, r.total_mw];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!("hour {}: non-finite entry", r.hour_index)));
            }
            if vals[..3].iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!(
                    "hour {}: fractions must lie in [0, 1]",
                    r.hour_index
                )));
            }
            if r.total_mw < 0.0 {
                return Err(Error::InvalidArgument(format!("hour {}: negative total", r.hour_index)));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[ProfileRow] {
        &self.rows
    }

    pub fn from_reader<R: Read>(reader: R, label: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            hour_index: i64,
            r_frac: f64,
            b_frac: f64,
            o_frac: f64,
            total_mw: f64,
        }
        let raw = read_rows::<Raw, _>(
            reader,
            label,
            &["hour_index", "r_frac", "b_frac", "o_frac", "total_mw"],
        )?;
        let rows: Vec<ProfileRow> = raw
            .into_iter()
            .map(|r| ProfileRow {
                hour_index: r.value.hour_index,
                r_frac: r.value.r_frac,
                b_frac: r.value.b_frac,
                o_frac: r.value.o_frac,
                total_mw: r.value.total_mw,
            })
            .collect();
        Self::new(rows).map_err(|e| parse_error(label, 0, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_reader(csvio::open(path)?, path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorCapacities {
    pub r_max: f64,
    pub b_max: f64,
    pub o_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityEstimate {
    pub capacities: SectorCapacities,
    /// Norm of the fit residual in MW.
    pub residual: f64,
}

/// Fits `R_i r_max + B_i b_max + O_i o_max ≈ P_i` with non-negative maxima.
pub fn estimate_sector_capacities(profiles: &SectorProfileMatrix) -> Result<CapacityEstimate> {
    let design: Vec<Vec<f64>> = profiles
        .rows
        .iter()
        .map(|r| vec![r.r_frac, r.b_frac, r.o_frac])
        .collect();
    let target: Vec<f64> = profiles.rows.iter().map(|r| r.total_mw).collect();
    let sol = nnls(&design, &target)?;
    Ok(CapacityEstimate {
        capacities: SectorCapacities {
            r_max: sol.x[0],
            b_max: sol.x[1],
            o_max: sol.x[2],
        },
        residual: sol.residual,
    })
}

/// Sector MW for one hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorHour {
    pub hour_index: i64,
    /// `fraction × sector maximum`, before matching the observed total.
    pub raw: [f64; 3],
    /// Raw values normalized to sum to one; zeros when the hour total is zero.
    pub shares: [f64; 3],
    /// `shares × total`, which partitions the observed total exactly.
    pub mw: [f64; 3],
}

pub fn hourly_sector_mw(profiles: &SectorProfileMatrix, caps: &SectorCapacities) -> Vec<SectorHour> {
    profiles
        .rows
        .iter()
        .map(|r| {
            let raw = [r.r_frac * caps.r_max, r.b_frac * caps.b_max, r.o_frac * caps.o_max];
            let raw_sum: f64 = raw.iter().sum();
            let shares = if r.total_mw > 0.0 && raw_sum > 0.0 {
                raw.map(|v| v / raw_sum)
            } else {
                [0.0; 3]
            };
            SectorHour {
                hour_index: r.hour_index,
                raw,
                shares,
                mw: shares.map(|s| s * r.total_mw),
            }
        })
        .collect()
}

/// `hour_index,res_mw,bus_mw,oth_mw`
pub fn sectors_csv(hours: &[SectorHour]) -> String {
    let mut out = String::from("hour_index,res_mw,bus_mw,oth_mw\n");
    for h in hours {
        let _ = writeln!(out, "{},{},{},{}", h.hour_index, h.mw[0], h.mw[1], h.mw[2]);
    }
    out
}
