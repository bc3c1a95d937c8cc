//! Convolution kernels sampled from radial PSF tables or analytic models.

use super::{fit::PowerLawFit, RadialPsf};
use crate::error::{EblError, Result};
use crate::transport::{Channel, DepositionRecord, LayerStack};
use ndarray::Array2;

/// Where a kernel's samples came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelProvenance {
    Table,
    Analytic,
}

/// A square convolution kernel over cells of size `pitch`; samples are the
/// dimensionless dose fraction deposited per cell per unit applied exposure
/// dose, so convolving an exposure grid yields a dose map in the same units
/// as the exposure. Incident and backscattered channels are kept separate.
#[derive(Debug, Clone, PartialEq)]
pub struct PsfKernel {
    pub pitch_nm: f64,
    pub half_width_nm: f64,
    pub incident: Array2<f64>,
    pub backscattered: Array2<f64>,
    pub provenance: KernelProvenance,
    /// Fraction of the table's energy beyond the half-width, not represented
    /// in the samples (reported, never silently renormalized).
    pub discarded_tail_fraction: f64,
    /// Reference energy (eV per trajectory) that maps density to dose
    /// fraction; layer kernels share the full-resist value.
    pub norm_energy_ev: f64,
}

impl PsfKernel {
    /// Kernel side length in cells (odd).
    pub fn size(&self) -> usize {
        self.incident.nrows()
    }

    pub fn channel(&self, channel: Channel) -> &Array2<f64> {
        match channel {
            Channel::Incident => &self.incident,
            Channel::Backscattered => &self.backscattered,
        }
    }

    /// Sum of both channels, a fresh array.
    pub fn total(&self) -> Array2<f64> {
        &self.incident + &self.backscattered
    }

    /// Integral (sum) of one channel's dose fraction.
    pub fn channel_integral(&self, channel: Channel) -> f64 {
        self.channel(channel).sum()
    }

    /// Dump both channels in the shared binary grid format:
    /// `<prefix>_incident.grid` and `<prefix>_backscattered.grid`.
    pub fn write_grid_files(&self, dir: &std::path::Path, prefix: &str) -> Result<()> {
        crate::io::write_grid(
            &dir.join(format!("{prefix}_incident.grid")),
            self.pitch_nm,
            &self.incident,
        )?;
        crate::io::write_grid(
            &dir.join(format!("{prefix}_backscattered.grid")),
            self.pitch_nm,
            &self.backscattered,
        )
    }

    /// Single-cell identity kernel: all exposure lands in place.
    pub fn delta(pitch_nm: f64) -> PsfKernel {
        PsfKernel {
            pitch_nm,
            half_width_nm: pitch_nm,
            incident: Array2::from_elem((1, 1), 1.0),
            backscattered: Array2::zeros((1, 1)),
            provenance: KernelProvenance::Analytic,
            discarded_tail_fraction: 0.0,
            norm_energy_ev: 1.0,
        }
    }

    /// Analytic kernel for synthetic tests: a Gaussian incident channel of
    /// width `forward_sigma_nm` and a power-law backscattered channel taken
    /// from `power_law` (its exponent sets the shape; amplitudes are set so
    /// the untruncated channel integrals equal `1 - backscatter_fraction`
    /// and `backscatter_fraction`).
    pub fn analytic(
        power_law: &PowerLawFit,
        forward_sigma_nm: f64,
        backscatter_fraction: f64,
        pitch_nm: f64,
        half_width_nm: f64,
    ) -> Result<PsfKernel> {
        validate_kernel_geometry(pitch_nm, half_width_nm, pitch_nm)?;
        if !(0.0..=1.0).contains(&backscatter_fraction) {
            return Err(EblError::validation(
                "backscatter_fraction",
                "must be in [0, 1]",
            ));
        }
        if !(forward_sigma_nm > 0.0) {
            return Err(EblError::validation("forward_sigma_nm", "must be > 0"));
        }
        let b = power_law.b;
        if b >= 2.0 {
            return Err(EblError::validation(
                "power_law.b",
                "analytic kernel requires b < 2 for an integrable profile",
            ));
        }
        // Full extent matches the table convention (50 um).
        let r_full = super::LAST_EDGE_NM;
        // integral of r^-b over a disc of radius R: 2 pi R^(2-b) / (2-b).
        let back_norm = 2.0 * std::f64::consts::PI * r_full.powf(2.0 - b) / (2.0 - b);
        let back_amp = backscatter_fraction / back_norm;
        let fwd_amp =
            (1.0 - backscatter_fraction) / (2.0 * std::f64::consts::PI * forward_sigma_nm.powi(2));

        let incident_profile =
            |r: f64| fwd_amp * (-r * r / (2.0 * forward_sigma_nm * forward_sigma_nm)).exp();
        let backscattered_profile = |r: f64| {
            if r == 0.0 {
                0.0
            } else {
                back_amp * r.powf(-b)
            }
        };
        let (incident, _) = sample_radial(&incident_profile, pitch_nm, half_width_nm);
        let (backscattered, _) = sample_radial(&backscattered_profile, pitch_nm, half_width_nm);
        // Tail beyond the half-width, analytically.
        let back_inside = 2.0 * std::f64::consts::PI * back_amp * half_width_nm.powf(2.0 - b)
            / (2.0 - b);
        let discarded = backscatter_fraction - back_inside;
        Ok(PsfKernel {
            pitch_nm,
            half_width_nm,
            incident: incident.mapv(|v| v * pitch_nm * pitch_nm),
            backscattered: backscattered.mapv(|v| v * pitch_nm * pitch_nm),
            provenance: KernelProvenance::Analytic,
            discarded_tail_fraction: discarded.max(0.0),
            norm_energy_ev: 1.0,
        })
    }
}

fn validate_kernel_geometry(pitch_nm: f64, half_width_nm: f64, min_half_width: f64) -> Result<()> {
    if !(pitch_nm > 0.0) {
        return Err(EblError::validation("pitch_nm", "must be > 0"));
    }
    if half_width_nm < min_half_width {
        return Err(EblError::validation(
            "half_width_nm",
            format!("must be >= {min_half_width} nm"),
        ));
    }
    Ok(())
}

/// Build a kernel from a radial table, normalizing by the table's own total
/// deposited energy so both channels together integrate to (nearly) one.
pub fn build_kernel(psf: &RadialPsf, pitch_nm: f64, half_width_nm: f64) -> Result<PsfKernel> {
    build_kernel_with_norm(psf, pitch_nm, half_width_nm, psf.total_ev())
}

/// Build a kernel from a radial table with an explicit normalization energy.
/// Layer kernels pass the full-resist total so per-layer dose fractions stay
/// on a common scale.
pub fn build_kernel_with_norm(
    psf: &RadialPsf,
    pitch_nm: f64,
    half_width_nm: f64,
    norm_energy_ev: f64,
) -> Result<PsfKernel> {
    validate_kernel_geometry(pitch_nm, half_width_nm, psf.bin_edges[1])?;
    if !(norm_energy_ev > 0.0) {
        return Err(EblError::validation("norm_energy_ev", "must be > 0"));
    }
    let scale = pitch_nm * pitch_nm / norm_energy_ev;
    let incident_profile = |r: f64| psf.incident[psf.bin_index(r)];
    let backscattered_profile = |r: f64| psf.backscattered[psf.bin_index(r)];
    let (incident, _) = sample_radial(&incident_profile, pitch_nm, half_width_nm);
    let (backscattered, _) = sample_radial(&backscattered_profile, pitch_nm, half_width_nm);

    // Discarded tail: table energy beyond the half-width radius.
    let mut outside = 0.0;
    for i in 0..psf.bins() {
        let lo = psf.bin_edges[i];
        let hi = psf.bin_edges[i + 1];
        let d = psf.incident[i] + psf.backscattered[i];
        if hi <= half_width_nm {
            continue;
        }
        let r0 = lo.max(half_width_nm);
        let area = std::f64::consts::PI * (hi * hi - r0 * r0);
        outside += d * area;
    }
    Ok(PsfKernel {
        pitch_nm,
        half_width_nm,
        incident: incident.mapv(|v| v * scale),
        backscattered: backscattered.mapv(|v| v * scale),
        provenance: KernelProvenance::Table,
        discarded_tail_fraction: outside / psf.total_ev(),
        norm_energy_ev,
    })
}

/// Sample a radial density profile onto a centered odd-sized grid. Each cell
/// holds the mean density over the cell, estimated by midpoint supersampling
/// that adapts to the distance from the origin; values are exactly symmetric
/// under reflection of either axis because only one quadrant is computed.
fn sample_radial<F: Fn(f64) -> f64>(
    profile: &F,
    pitch_nm: f64,
    half_width_nm: f64,
) -> (Array2<f64>, usize) {
    let half_cells = (half_width_nm / pitch_nm).floor() as usize;
    let size = 2 * half_cells + 1;
    let mut grid = Array2::zeros((size, size));
    let max_r = half_width_nm;
    for qi in 0..=half_cells {
        for qj in 0..=half_cells {
            let cx = qj as f64 * pitch_nm;
            let cy = qi as f64 * pitch_nm;
            let center_r = (cx * cx + cy * cy).sqrt();
            if center_r > max_r {
                continue;
            }
            let min_corner_r = ((cx - pitch_nm / 2.0).max(0.0).powi(2)
                + (cy - pitch_nm / 2.0).max(0.0).powi(2))
            .sqrt();
            let k = supersampling_factor(min_corner_r, pitch_nm);
            let mut sum = 0.0;
            let sub = pitch_nm / k as f64;
            for a in 0..k {
                for b in 0..k {
                    let x = cx - pitch_nm / 2.0 + (a as f64 + 0.5) * sub;
                    let y = cy - pitch_nm / 2.0 + (b as f64 + 0.5) * sub;
                    sum += profile((x * x + y * y).sqrt());
                }
            }
            let value = sum / (k * k) as f64;
            let (i0, j0) = (half_cells + qi, half_cells + qj);
            let (i1, j1) = (half_cells - qi, half_cells - qj);
            grid[(i0, j0)] = value;
            grid[(i0, j1)] = value;
            grid[(i1, j0)] = value;
            grid[(i1, j1)] = value;
        }
    }
    (grid, size)
}

/// Supersampling resolution by proximity to the origin, where log-spaced
/// table bins are much narrower than a cell.
fn supersampling_factor(min_corner_r: f64, pitch_nm: f64) -> usize {
    if min_corner_r < 3.0 * pitch_nm {
        64
    } else if min_corner_r < 10.0 * pitch_nm {
        16
    } else if min_corner_r < 50.0 * pitch_nm {
        4
    } else {
        2
    }
}

/// Kernels for the full resist and each layer, sharing one normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub full: PsfKernel,
    /// One kernel per stack layer, top first.
    pub layers: Vec<PsfKernel>,
    pub layer_names: Vec<String>,
}

impl KernelSet {
    pub fn layer_by_name(&self, name: &str) -> Option<&PsfKernel> {
        self.layer_names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.layers[i])
    }
}

/// Build the full-resist kernel plus per-layer kernels from one record.
pub fn build_kernel_set(
    record: &DepositionRecord,
    stack: &LayerStack,
    bins: usize,
    pitch_nm: f64,
    half_width_nm: f64,
) -> Result<KernelSet> {
    let psfs = super::layer_psfs(record, stack, bins)?;
    let norm = psfs[0].total_ev();
    let full = build_kernel_with_norm(&psfs[0], pitch_nm, half_width_nm, norm)?;
    let mut layers = Vec::new();
    for psf in &psfs[1..] {
        layers.push(build_kernel_with_norm(psf, pitch_nm, half_width_nm, norm)?);
    }
    Ok(KernelSet {
        full,
        layers,
        layer_names: stack.layers.iter().map(|(m, _)| m.name.clone()).collect(),
    })
}
