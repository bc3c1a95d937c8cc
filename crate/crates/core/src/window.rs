//! Dose-window analysis: sweep the base dose, classify bridge formation per
//! geometry from per-layer dose maps, and report the supported dose window.
//!
//! The upper window edge models top-layer collapse only; gradual gap
//! widening before failure is not separated out.

use crate::dose::{convolve_fast, DoseGrid, BRIDGE_SECTION_NM};
use crate::error::{EblError, Result};
use crate::layout::{rasterize, PatternLayout, Point, ProbeLines};
use crate::psf::KernelSet;
use serde::{Deserialize, Serialize};

/// The MMA undercut must extend this far past each end of the bridge
/// section for the gap to open beneath an intact bridge.
pub const UNDERCUT_MARGIN_NM: f64 = 100.0;

/// Resist solubility/failure thresholds in deposited-dose units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistThresholds {
    /// Bottom-layer solubility switch.
    pub mma_clearing: f64,
    /// Top-layer solubility switch.
    pub pmma_clearing: f64,
    /// Top-layer structural failure over the bridge.
    pub pmma_collapse: f64,
}

impl ResistThresholds {
    pub fn sensitivity_ratio(&self) -> f64 {
        self.pmma_clearing / self.mma_clearing
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mma_clearing > 0.0) {
            return Err(EblError::validation("thresholds.mma_clearing", "must be > 0"));
        }
        if !(self.pmma_clearing > self.mma_clearing) {
            return Err(EblError::validation(
                "thresholds.pmma_clearing",
                "must exceed mma_clearing",
            ));
        }
        if !(self.pmma_collapse > self.pmma_clearing) {
            return Err(EblError::validation(
                "thresholds.pmma_collapse",
                "must exceed pmma_clearing",
            ));
        }
        let ratio = self.sensitivity_ratio();
        if !(3.0..=4.0).contains(&ratio) {
            return Err(EblError::validation(
                "thresholds.sensitivity_ratio",
                format!("pmma_clearing/mma_clearing must be in [3, 4], got {ratio}"),
            ));
        }
        Ok(())
    }
}

/// Bridge state at one base dose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BridgeState {
    NoBridge,
    Formed,
    Collapsed,
}

impl BridgeState {
    pub fn name(&self) -> &'static str {
        match self {
            BridgeState::NoBridge => "no-bridge",
            BridgeState::Formed => "formed",
            BridgeState::Collapsed => "collapsed",
        }
    }
}

/// Bridge-region response of one geometry at unit base dose: the extrema
/// that decide formation and collapse, scaled linearly by the base dose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeResponse {
    /// Minimum MMA-layer dose along the undercut span, per unit base dose.
    pub mma_min_per_unit: f64,
    /// Maximum PMMA-layer dose over the bridge section, per unit base dose.
    pub pmma_max_per_unit: f64,
}

impl BridgeResponse {
    /// Lowest base dose at which the undercut clears under the whole span.
    pub fn formation_dose(&self, thresholds: &ResistThresholds) -> f64 {
        thresholds.mma_clearing / self.mma_min_per_unit
    }

    /// Lowest base dose at which the bridge collapses.
    pub fn collapse_dose(&self, thresholds: &ResistThresholds) -> f64 {
        thresholds.pmma_collapse / self.pmma_max_per_unit
    }

    pub fn classify(&self, base_dose: f64, thresholds: &ResistThresholds) -> BridgeState {
        classify_extrema(
            base_dose * self.mma_min_per_unit,
            base_dose * self.pmma_max_per_unit,
            thresholds,
        )
    }
}

/// State from the two decision extrema (already scaled to a base dose).
pub fn classify_extrema(
    mma_min: f64,
    pmma_max: f64,
    thresholds: &ResistThresholds,
) -> BridgeState {
    if mma_min < thresholds.mma_clearing {
        BridgeState::NoBridge
    } else if pmma_max >= thresholds.pmma_collapse {
        BridgeState::Collapsed
    } else {
        BridgeState::Formed
    }
}

/// Classify one dose point from per-layer dose maps.
pub fn classify(
    mma_dose: &DoseGrid,
    pmma_dose: &DoseGrid,
    probes: &ProbeLines,
    thresholds: &ResistThresholds,
) -> Result<BridgeState> {
    thresholds.validate()?;
    let extrema = bridge_extrema(mma_dose, pmma_dose, probes)?;
    Ok(classify_extrema(extrema.0, extrema.1, thresholds))
}

/// (min MMA dose along the undercut span, max PMMA dose over the bridge
/// section), both from the vertical probe.
fn bridge_extrema(
    mma_dose: &DoseGrid,
    pmma_dose: &DoseGrid,
    probes: &ProbeLines,
) -> Result<(f64, f64)> {
    let center = probes.center();
    let half_section = BRIDGE_SECTION_NM / 2.0;
    let undercut_half = half_section + UNDERCUT_MARGIN_NM;
    let samples = ((2.0 * undercut_half / (mma_dose.pitch_nm / 2.0)).ceil() as usize).max(16);

    let mut mma_min = f64::INFINITY;
    let mut pmma_max = f64::NEG_INFINITY;
    for k in 0..=samples {
        let off = -undercut_half + 2.0 * undercut_half * k as f64 / samples as f64;
        let p = Point::new(center.x, center.y + off);
        let mma = mma_dose.sample(&mma_dose.total, p)?;
        mma_min = mma_min.min(mma);
        if off.abs() <= half_section {
            let pmma = pmma_dose.sample(&pmma_dose.total, p)?;
            pmma_max = pmma_max.max(pmma);
        }
    }
    Ok((mma_min, pmma_max))
}

/// Compute a geometry's unit-dose bridge response by rasterizing at unit
/// base dose and convolving with the per-layer kernels.
pub fn bridge_response(
    layout: &PatternLayout,
    probes: &ProbeLines,
    kernels: &KernelSet,
) -> Result<BridgeResponse> {
    let pmma_kernel = kernels
        .layer_by_name("pmma")
        .ok_or_else(|| EblError::validation("kernels", "missing pmma layer kernel"))?;
    let mma_kernel = kernels
        .layer_by_name("mma")
        .ok_or_else(|| EblError::validation("kernels", "missing mma layer kernel"))?;
    let mut unit = layout.clone();
    unit.base_dose = 1.0;
    let exposure = rasterize(&unit, pmma_kernel.pitch_nm)?;
    let pmma = convolve_fast(&exposure, pmma_kernel)?;
    let mma = convolve_fast(&exposure, mma_kernel)?;
    let (mma_min, pmma_max) = bridge_extrema(&mma, &pmma, probes)?;
    Ok(BridgeResponse {
        mma_min_per_unit: mma_min,
        pmma_max_per_unit: pmma_max,
    })
}

/// Supported dose window: the contiguous run of formed states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseWindow {
    pub first_formed: f64,
    pub last_formed: f64,
}

impl DoseWindow {
    pub fn width(&self) -> f64 {
        self.last_formed - self.first_formed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dose: f64,
    pub state: BridgeState,
    pub mma_min: f64,
    pub pmma_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub window: Option<DoseWindow>,
    pub response: BridgeResponse,
}

impl SweepResult {
    pub fn states(&self) -> Vec<BridgeState> {
        self.rows.iter().map(|r| r.state).collect()
    }

    /// Window width, 0 when no dose formed a bridge.
    pub fn window_width(&self) -> f64 {
        self.window.map(|w| w.width()).unwrap_or(0.0)
    }

    pub fn csv(&self, header_meta: &str) -> String {
        let mut out = String::from(header_meta);
        out.push_str("dose,state,min_mma_bridge_dose,max_pmma_bridge_dose\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.dose,
                r.state.name(),
                r.mma_min,
                r.pmma_max
            ));
        }
        out
    }
}

/// Sweep the base dose over `[start, end]` in `step` increments. One
/// convolution per layer kernel; every dose point reuses the unit response
/// by linearity.
pub fn sweep(
    layout: &PatternLayout,
    probes: &ProbeLines,
    kernels: &KernelSet,
    thresholds: &ResistThresholds,
    dose_range: (f64, f64),
    step: f64,
) -> Result<SweepResult> {
    thresholds.validate()?;
    if !(step > 0.0) {
        return Err(EblError::validation("step", "must be > 0"));
    }
    if !(dose_range.0 > 0.0 && dose_range.1 >= dose_range.0) {
        return Err(EblError::validation(
            "dose_range",
            "must be ascending and positive",
        ));
    }
    let response = bridge_response(layout, probes, kernels)?;
    let mut rows = Vec::new();
    let mut dose = dose_range.0;
    while dose <= dose_range.1 + 1e-9 {
        rows.push(SweepRow {
            dose,
            state: response.classify(dose, thresholds),
            mma_min: dose * response.mma_min_per_unit,
            pmma_max: dose * response.pmma_max_per_unit,
        });
        dose += step;
    }
    let formed: Vec<f64> = rows
        .iter()
        .filter(|r| r.state == BridgeState::Formed)
        .map(|r| r.dose)
        .collect();
    let window = if formed.is_empty() {
        None
    } else {
        Some(DoseWindow {
            first_formed: formed[0],
            last_formed: *formed.last().unwrap(),
        })
    };
    Ok(SweepResult {
        rows,
        window,
        response,
    })
}

/// Calibrate thresholds so the reference geometry (normally the horseshoe)
/// forms at `form_dose` and holds a window of `window_width`, with the
/// PMMA/MMA sensitivity ratio fixed.
pub fn calibrate_thresholds(
    reference: &BridgeResponse,
    form_dose: f64,
    window_width: f64,
    sensitivity_ratio: f64,
) -> Result<ResistThresholds> {
    if !(form_dose > 0.0 && window_width > 0.0) {
        return Err(EblError::validation(
            "calibration",
            "form dose and window width must be > 0",
        ));
    }
    let thresholds = ResistThresholds {
        mma_clearing: form_dose * reference.mma_min_per_unit,
        pmma_clearing: sensitivity_ratio * form_dose * reference.mma_min_per_unit,
        pmma_collapse: (form_dose + window_width) * reference.pmma_max_per_unit,
    };
    thresholds.validate()?;
    Ok(thresholds)
}

/// Default calibration anchors: the reference geometry forms at 430 and
/// keeps its bridge until 690, placing the window inside the swept
/// 350-870 range.
pub const CALIBRATION_FORM_DOSE: f64 = 430.0;
pub const CALIBRATION_WINDOW_WIDTH: f64 = 260.0;
pub const CALIBRATION_SENSITIVITY_RATIO: f64 = 3.5;
