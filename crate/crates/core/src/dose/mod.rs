//! Dose maps: convolution of exposure grids with PSF kernels, trace
//! extraction, and bridge-region metrics.

mod convolve;

pub use convolve::{convolve_direct, convolve_fast, ConvolutionPlan};

use crate::error::{EblError, Result};
use crate::layout::{Point, ProbeLines};
use ndarray::Array2;

/// Deposited dose with separate channels, uC/cm^2-equivalent.
#[derive(Debug, Clone, PartialEq)]
pub struct DoseGrid {
    pub pitch_nm: f64,
    pub total: Array2<f64>,
    pub incident: Array2<f64>,
    pub backscattered: Array2<f64>,
}

impl DoseGrid {
    pub fn from_channels(
        pitch_nm: f64,
        incident: Array2<f64>,
        backscattered: Array2<f64>,
    ) -> DoseGrid {
        let total = &incident + &backscattered;
        DoseGrid {
            pitch_nm,
            total,
            incident,
            backscattered,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.total.dim()
    }

    /// Bilinear interpolation of one channel at a point (nm). Grid values
    /// sit at cell centers; the outer half-cell ring clamps.
    pub fn sample(&self, channel: &Array2<f64>, p: Point) -> Result<f64> {
        let (h, w) = channel.dim();
        let max_x = w as f64 * self.pitch_nm;
        let max_y = h as f64 * self.pitch_nm;
        if !(p.x >= 0.0 && p.x <= max_x && p.y >= 0.0 && p.y <= max_y) {
            return Err(EblError::validation(
                "sample",
                format!("point ({}, {}) outside grid [0,{max_x}]x[0,{max_y}]", p.x, p.y),
            ));
        }
        let fx = (p.x / self.pitch_nm - 0.5).clamp(0.0, (w - 1) as f64);
        let fy = (p.y / self.pitch_nm - 0.5).clamp(0.0, (h - 1) as f64);
        let j0 = fx.floor() as usize;
        let i0 = fy.floor() as usize;
        let j1 = (j0 + 1).min(w - 1);
        let i1 = (i0 + 1).min(h - 1);
        let tx = fx - j0 as f64;
        let ty = fy - i0 as f64;
        Ok(channel[(i0, j0)] * (1.0 - tx) * (1.0 - ty)
            + channel[(i0, j1)] * tx * (1.0 - ty)
            + channel[(i1, j0)] * (1.0 - tx) * ty
            + channel[(i1, j1)] * tx * ty)
    }
}

/// Dose sampled along a segment at uniform arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceProfile {
    /// Arc-length positions from the segment start, nm.
    pub positions_nm: Vec<f64>,
    pub total: Vec<f64>,
    pub incident: Vec<f64>,
    pub backscattered: Vec<f64>,
}

impl TraceProfile {
    pub fn len(&self) -> usize {
        self.positions_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions_nm.is_empty()
    }
}

/// Sample all channels along `segment` with `samples` points.
pub fn extract_trace(
    dose: &DoseGrid,
    segment: (Point, Point),
    samples: usize,
) -> Result<TraceProfile> {
    if samples < 2 {
        return Err(EblError::validation("samples", "must be >= 2"));
    }
    let (a, b) = segment;
    let length = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
    let mut profile = TraceProfile {
        positions_nm: Vec::with_capacity(samples),
        total: Vec::with_capacity(samples),
        incident: Vec::with_capacity(samples),
        backscattered: Vec::with_capacity(samples),
    };
    for k in 0..samples {
        let t = k as f64 / (samples - 1) as f64;
        let p = Point::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        profile.positions_nm.push(t * length);
        profile.total.push(dose.sample(&dose.total, p)?);
        profile.incident.push(dose.sample(&dose.incident, p)?);
        profile
            .backscattered
            .push(dose.sample(&dose.backscattered, p)?);
    }
    Ok(profile)
}

/// Bridge-region metrics extracted from a dose map. The bridge section is
/// the central 300 nm of the vertical probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryMetrics {
    /// max/min total dose over the bridge section.
    pub falloff_ratio: f64,
    /// Mean total dose over exposed plateau points (>= 100 nm inside the
    /// exposed region on each side of the gap).
    pub plateau_dose: f64,
    /// Minimum total dose inside the gap.
    pub gap_min_dose: f64,
    /// plateau / gap minimum.
    pub edge_drop_ratio: f64,
    /// Backscattered / incident dose at the bridge centroid; +inf with
    /// `eb_ei_degenerate` set when the incident dose is zero there.
    pub eb_ei_center: f64,
    pub eb_ei_degenerate: bool,
    /// Relative standard deviation of total dose over the bridge section.
    pub saddle_variance: f64,
}

/// Metrics span of the bridge section, nm.
pub const BRIDGE_SECTION_NM: f64 = 300.0;
/// Plateau points sit at least this far inside the exposed region.
pub const PLATEAU_INSET_NM: f64 = 100.0;

/// Compute the bridge-region metrics along the vertical probe.
pub fn compute_metrics(dose: &DoseGrid, probes: &ProbeLines) -> Result<GeometryMetrics> {
    let center = probes.center();
    let (a, b) = probes.vertical;
    let length = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
    // Sample at half-pitch resolution along the probe.
    let samples = ((length / (dose.pitch_nm / 2.0)).ceil() as usize + 1).max(2);
    let trace = extract_trace(dose, (a, b), samples)?;

    // Distance of each trace point from the bridge center along the probe.
    let center_t = ((center.x - a.x).powi(2) + (center.y - a.y).powi(2)).sqrt();
    let half_section = BRIDGE_SECTION_NM / 2.0;
    let half_gap = probes.bridge_extent_nm / 2.0;

    let mut section_max = f64::NEG_INFINITY;
    let mut section_min = f64::INFINITY;
    let mut section_sum = 0.0;
    let mut section_sq = 0.0;
    let mut section_n = 0usize;
    let mut gap_min = f64::INFINITY;
    let mut plateau_sum = 0.0;
    let mut plateau_n = 0usize;

    for (k, &pos) in trace.positions_nm.iter().enumerate() {
        let d = pos - center_t;
        let v = trace.total[k];
        if d.abs() <= half_section {
            section_max = section_max.max(v);
            section_min = section_min.min(v);
            section_sum += v;
            section_sq += v * v;
            section_n += 1;
        }
        if d.abs() < half_gap {
            gap_min = gap_min.min(v);
        }
        if d.abs() >= half_gap + PLATEAU_INSET_NM {
            plateau_sum += v;
            plateau_n += 1;
        }
    }
    if section_n == 0 || plateau_n == 0 {
        return Err(EblError::numeric(
            "probe segment too short for the bridge section and plateau windows",
        ));
    }

    let plateau = plateau_sum / plateau_n as f64;
    let mean = section_sum / section_n as f64;
    let var = (section_sq / section_n as f64 - mean * mean).max(0.0);

    let incident_center = dose.sample(&dose.incident, center)?;
    let backscattered_center = dose.sample(&dose.backscattered, center)?;
    let (eb_ei, degenerate) = if incident_center > 0.0 {
        (backscattered_center / incident_center, false)
    } else {
        (f64::INFINITY, true)
    };

    Ok(GeometryMetrics {
        falloff_ratio: if section_min > 0.0 {
            section_max / section_min
        } else {
            f64::INFINITY
        },
        plateau_dose: plateau,
        gap_min_dose: gap_min,
        edge_drop_ratio: if gap_min > 0.0 {
            plateau / gap_min
        } else {
            f64::INFINITY
        },
        eb_ei_center: eb_ei,
        eb_ei_degenerate: degenerate,
        saddle_variance: if mean > 0.0 { var.sqrt() / mean } else { 0.0 },
    })
}

#[cfg(test)]
mod tests;
