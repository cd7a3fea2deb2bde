//! Reliability metrics: energy not served, agreement with a reference
//! series, and kernel density of hourly forced shedding.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::engine::HourResult;
use crate::error::{Error, Result};

/// Number of evaluation points of a density curve.
pub const DENSITY_POINTS: usize = 512;

/// Half-width of the density grid beyond the sample range, in bandwidths.
pub const DENSITY_PAD_BANDWIDTHS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub hours: Vec<HourResult>,
    /// MWh of forced shedding; excludes demand-response reductions.
    pub ens_mwh: f64,
    pub correlation_vs_reference: Option<f64>,
    /// `(x_mw, density)` pairs.
    pub density: Option<Vec<(f64, f64)>>,
}

impl SimulationReport {
    pub fn from_hours(hours: Vec<HourResult>, reference: Option<&[f64]>, bandwidth: Option<f64>) -> Self {
        let ens_mwh = ens(&hours);
        let shed = forced_shed_series(&hours);
        let correlation_vs_reference = reference.and_then(|r| {
            let total: Vec<f64> = hours.iter().map(HourResult::total_shedding).collect();
            pearson(&total, r).ok()
        });
        let density = bandwidth
            .or_else(|| Some(silverman_bandwidth(&shed)))
            .and_then(|h| shed_density(&shed, h).ok());
        Self {
            hours,
            ens_mwh,
            correlation_vs_reference,
            density,
        }
    }

    pub fn mechanism_energy_mwh(&self) -> [f64; 3] {
        self.hours.iter().fold([0.0; 3], |mut acc, h| {
            acc[0] += h.interruptible_mw();
            acc[1] += h.rationing_mw();
            acc[2] += h.incentive_mw();
            acc
        })
    }

    /// `hour_index,served_mw,forced_shed_mw,interruptible_mw,rationing_mw,incentive_mw,reserve_mw`
    pub fn report_csv(&self) -> String {
        let mut out = String::from(
            "hour_index,served_mw,forced_shed_mw,interruptible_mw,rationing_mw,incentive_mw,reserve_mw\n",
        );
        for h in &self.hours {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                h.hour_index,
                h.served_mw(),
                h.forced_shed_mw(),
                h.interruptible_mw(),
                h.rationing_mw(),
                h.incentive_mw(),
                h.reserve_mw
            );
        }
        out
    }

    /// `x_mw,density`; header only when no density was computed.
    pub fn density_csv(&self) -> String {
        let mut out = String::from("x_mw,density\n");
        for (x, d) in self.density.iter().flatten() {
            let _ = writeln!(out, "{x},{d}");
        }
        out
    }
}

pub fn forced_shed_series(hours: &[HourResult]) -> Vec<f64> {
    hours.iter().map(HourResult::forced_shed_mw).collect()
}

/// Σ hourly forced shed × 1 h.
pub fn ens(hours: &[HourResult]) -> f64 {
    ens_from_series(&forced_shed_series(hours))
}

pub fn ens_from_series(hourly_forced_shed_mw: &[f64]) -> f64 {
    hourly_forced_shed_mw.iter().sum()
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Dimension(format!(
            "pearson needs two equal series of length >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Silverman's rule of thumb, `0.9 · min(σ, IQR/1.34) · n^(-1/5)`. Falls back
/// to σ, then to 1 MW, when the sample is too concentrated.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return 1.0;
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let sd = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h > 0.0 && h.is_finite() {
        h
    } else {
        1.0
    }
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Gaussian KDE on a uniform grid spanning the sample range padded by
/// [`DENSITY_PAD_BANDWIDTHS`] bandwidths on each side.
pub fn shed_density(samples: &[f64], bandwidth: f64) -> Result<Vec<(f64, f64)>> {
    if !(bandwidth.is_finite() && bandwidth > 0.0) {
        return Err(Error::InvalidBandwidth(bandwidth));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("density needs at least one sample".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite density sample".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - DENSITY_PAD_BANDWIDTHS * bandwidth;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + DENSITY_PAD_BANDWIDTHS * bandwidth;
    let step = (hi - lo) / (DENSITY_POINTS - 1) as f64;
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * PI).sqrt());
    Ok((0..DENSITY_POINTS)
        .map(|i| {
            let x = lo + step * i as f64;
            let d = samples
                .iter()
                .map(|s| {
                    let u = (x - s) / bandwidth;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
                * norm;
            (x, d)
        })
        .collect())
}
