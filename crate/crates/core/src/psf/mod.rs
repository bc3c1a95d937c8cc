//! Radial/angular aggregation of transport output, model fits, and
//! convolution kernels.

mod csv;
mod fit;
mod kernel;

pub use csv::{psf_from_csv, psf_to_csv, read_psf_csv, write_psf_csv};
pub use fit::{fit_angular, fit_power_law, AngularFit, PowerLawFit};
pub use kernel::{build_kernel, build_kernel_set, build_kernel_with_norm, KernelSet, PsfKernel};

/// Default fit window for the physical backscatter power law, nm. Spans the
/// halo's functional range out to the 2 um scale of the far tail.
pub const DEFAULT_FIT_RANGE_NM: (f64, f64) = (60.0, 2000.0);

use crate::error::{EblError, Result};
use crate::transport::{Channel, DepositionRecord, LayerStack};

/// Default log-spaced binning: first edge 1 nm, last edge 50 um.
pub const DEFAULT_BINS: usize = 128;
pub const FIRST_EDGE_NM: f64 = 1.0;
pub const LAST_EDGE_NM: f64 = 50_000.0;

/// Radial energy-density table with separate incident and backscattered
/// channels. Densities are eV/nm^2 per incident electron; radii measured
/// from the beam axis. Events below the first edge or beyond the last fold
/// into the end bins so channel integrals are exactly conserved.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialPsf {
    /// Bin edges in nm, strictly increasing; len = bins + 1.
    pub bin_edges: Vec<f64>,
    /// Densities per bin, eV/nm^2 per trajectory.
    pub incident: Vec<f64>,
    pub backscattered: Vec<f64>,
    /// Per-trajectory deposited energy per channel within the z-window, eV.
    pub incident_total_ev: f64,
    pub backscattered_total_ev: f64,
    pub trajectory_count: u64,
    /// Depth window (z_min, z_max) in nm the table aggregates over.
    pub z_window_nm: (f64, f64),
    /// Provenance: stack and beam descriptions.
    pub source: (String, String),
}

impl RadialPsf {
    pub fn bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    /// Geometric bin centers.
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|w| (w[0] * w[1]).sqrt())
            .collect()
    }

    pub fn annulus_area_nm2(&self, bin: usize) -> f64 {
        let lo = self.bin_edges[bin];
        let hi = self.bin_edges[bin + 1];
        std::f64::consts::PI * (hi * hi - lo * lo)
    }

    pub fn density(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Incident => &self.incident,
            Channel::Backscattered => &self.backscattered,
        }
    }

    /// Integral of one channel's density over area, eV per trajectory.
    pub fn channel_integral_ev(&self, channel: Channel) -> f64 {
        self.density(channel)
            .iter()
            .enumerate()
            .map(|(i, d)| d * self.annulus_area_nm2(i))
            .sum()
    }

    pub fn channel_total_ev(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Incident => self.incident_total_ev,
            Channel::Backscattered => self.backscattered_total_ev,
        }
    }

    /// Both channels' per-trajectory deposited energy, eV.
    pub fn total_ev(&self) -> f64 {
        self.incident_total_ev + self.backscattered_total_ev
    }

    /// Fitted or tabulated density decay between two radii for one channel:
    /// 1 - d(r1)/d(r0), from the tabulated densities.
    pub fn tabulated_decay(&self, channel: Channel, r0: f64, r1: f64) -> Result<f64> {
        let d0 = self.density_at(channel, r0)?;
        let d1 = self.density_at(channel, r1)?;
        if d0 <= 0.0 {
            return Err(EblError::numeric(format!(
                "density at r = {r0} nm is not positive"
            )));
        }
        Ok(1.0 - d1 / d0)
    }

    /// Density at a radius by table lookup (piecewise constant).
    pub fn density_at(&self, channel: Channel, r_nm: f64) -> Result<f64> {
        if r_nm < 0.0 {
            return Err(EblError::validation("radius", "must be >= 0"));
        }
        let d = self.density(channel);
        Ok(d[self.bin_index(r_nm)])
    }

    fn bin_index(&self, r_nm: f64) -> usize {
        let edges = &self.bin_edges;
        if r_nm < edges[0] {
            return 0;
        }
        match edges.binary_search_by(|e| e.partial_cmp(&r_nm).unwrap()) {
            Ok(i) => i.min(self.bins() - 1),
            Err(i) => (i - 1).min(self.bins() - 1),
        }
    }
}

/// Log-spaced edges from `FIRST_EDGE_NM` to `LAST_EDGE_NM`.
pub fn log_edges(bins: usize) -> Vec<f64> {
    let lo = FIRST_EDGE_NM.ln();
    let hi = LAST_EDGE_NM.ln();
    (0..=bins)
        .map(|i| (lo + (hi - lo) * i as f64 / bins as f64).exp())
        .collect()
}

/// Build the radial PSF from every recorded event.
pub fn build_radial_psf(record: &DepositionRecord, bins: usize) -> Result<RadialPsf> {
    build_radial_psf_windowed(record, bins, 0.0, f64::INFINITY)
}

/// Build the radial PSF from events within a depth window `[z_min, z_max)`.
/// Used for the per-layer (PMMA-only / MMA-only) tables.
pub fn build_radial_psf_windowed(
    record: &DepositionRecord,
    bins: usize,
    z_min_nm: f64,
    z_max_nm: f64,
) -> Result<RadialPsf> {
    if record.events.is_empty() {
        return Err(EblError::numeric(
            "cannot build a radial PSF from an empty deposition record",
        ));
    }
    if bins < 8 {
        return Err(EblError::validation("bins", "must be >= 8"));
    }
    let edges = log_edges(bins);
    let n = record.summary.trajectory_count.max(1) as f64;
    let mut incident_energy = vec![0.0f64; bins];
    let mut backscattered_energy = vec![0.0f64; bins];
    let mut incident_total = 0.0;
    let mut backscattered_total = 0.0;

    let log_lo = edges[0].ln();
    let log_step = (edges[bins].ln() - log_lo) / bins as f64;
    for ev in record.events.iter() {
        let z = ev.z_nm as f64;
        if z < z_min_nm || z >= z_max_nm {
            continue;
        }
        let r = ((ev.x_nm as f64).powi(2) + (ev.y_nm as f64).powi(2)).sqrt();
        let bin = if r < edges[0] {
            0
        } else {
            (((r.ln() - log_lo) / log_step) as usize).min(bins - 1)
        };
        let e = ev.energy_ev as f64;
        match ev.channel {
            Channel::Incident => {
                incident_energy[bin] += e;
                incident_total += e;
            }
            Channel::Backscattered => {
                backscattered_energy[bin] += e;
                backscattered_total += e;
            }
        }
    }

    let mut psf = RadialPsf {
        bin_edges: edges,
        incident: vec![0.0; bins],
        backscattered: vec![0.0; bins],
        incident_total_ev: incident_total / n,
        backscattered_total_ev: backscattered_total / n,
        trajectory_count: record.summary.trajectory_count,
        z_window_nm: (z_min_nm, z_max_nm),
        source: (String::new(), String::new()),
    };
    for i in 0..bins {
        let area = psf.annulus_area_nm2(i);
        psf.incident[i] = incident_energy[i] / (area * n);
        psf.backscattered[i] = backscattered_energy[i] / (area * n);
    }
    Ok(psf)
}

/// Per-layer radial PSFs for a resist stack: the full-resist window plus one
/// table per layer, all normalized per trajectory.
pub fn layer_psfs(
    record: &DepositionRecord,
    stack: &LayerStack,
    bins: usize,
) -> Result<Vec<RadialPsf>> {
    let mut out = Vec::with_capacity(stack.layers.len() + 1);
    out.push(build_radial_psf_windowed(
        record,
        bins,
        0.0,
        stack.total_thickness_nm(),
    )?);
    for i in 0..stack.layers.len() {
        let (lo, hi) = stack.layer_span_nm(i).unwrap();
        out.push(build_radial_psf_windowed(record, bins, lo, hi)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
