//! Kernel and layout resolution shared by the dosemap/pec/sweep commands.

use super::{KernelArgs, LayoutArgs};
use crate::error::{EblError, Result};
use crate::layout::{
    build_geometry, parse_layout_file, GeometryKind, GeometryParams, PatternLayout, Point,
    ProbeLines,
};
use crate::psf::{
    build_kernel_with_norm, read_psf_csv, KernelSet, PowerLawFit, PsfKernel, RadialPsf,
};

/// Kernels resolved from a PSF directory or the analytic model. The layer
/// list is empty for analytic kernels.
pub(crate) struct ResolvedKernels {
    pub full: PsfKernel,
    pub set: Option<KernelSet>,
    /// Hashable description of the source for metadata headers.
    pub describe: String,
}

pub(crate) fn resolve_kernels(args: &KernelArgs) -> Result<ResolvedKernels> {
    match (&args.psf, args.analytic_b) {
        (Some(dir), None) => {
            let full_path = dir.join("psf_full.csv");
            let full_table = read_psf_csv(&full_path)?;
            let norm = full_table.total_ev();
            let full = build_kernel_with_norm(&full_table, args.pitch, args.half_width, norm)?;
            // Optional per-layer tables: psf_layer_<name>.csv.
            let mut layers = Vec::new();
            let mut layer_names = Vec::new();
            let entries = std::fs::read_dir(dir).map_err(|e| EblError::io(dir, e))?;
            let mut layer_files: Vec<(String, std::path::PathBuf)> = entries
                .filter_map(|e| e.ok())
                .filter_map(|e| {
                    let name = e.file_name().to_string_lossy().into_owned();
                    name.strip_prefix("psf_layer_")
                        .and_then(|s| s.strip_suffix(".csv"))
                        .map(|layer| (layer.to_string(), e.path()))
                })
                .collect();
            layer_files.sort();
            for (name, path) in layer_files {
                let table: RadialPsf = read_psf_csv(&path)?;
                layers.push(build_kernel_with_norm(
                    &table,
                    args.pitch,
                    args.half_width,
                    norm,
                )?);
                layer_names.push(name);
            }
            let set = if layers.is_empty() {
                None
            } else {
                Some(KernelSet {
                    full: full.clone(),
                    layers,
                    layer_names,
                })
            };
            Ok(ResolvedKernels {
                full,
                set,
                describe: format!(
                    "psf-dir={} pitch={} half-width={}",
                    dir.display(),
                    args.pitch,
                    args.half_width
                ),
            })
        }
        (None, Some(b)) => {
            let law = PowerLawFit {
                a: 1.0,
                b,
                fit_range_nm: crate::psf::DEFAULT_FIT_RANGE_NM,
                r_squared: 1.0,
                stderr_ln_a: 0.0,
                stderr_b: 0.0,
            };
            let full = PsfKernel::analytic(
                &law,
                args.analytic_sigma,
                args.analytic_backscatter_fraction,
                args.pitch,
                args.half_width,
            )?;
            Ok(ResolvedKernels {
                full,
                set: None,
                describe: format!(
                    "analytic b={} sigma={} fraction={} pitch={} half-width={}",
                    b,
                    args.analytic_sigma,
                    args.analytic_backscatter_fraction,
                    args.pitch,
                    args.half_width
                ),
            })
        }
        (Some(_), Some(_)) => Err(EblError::validation(
            "kernel",
            "choose either --psf or --analytic-b, not both",
        )),
        (None, None) => Err(EblError::validation(
            "kernel",
            "a kernel source is required: --psf DIR or --analytic-b B",
        )),
    }
}

/// Layout + probes from a file or a built-in geometry.
pub(crate) fn resolve_layout(args: &LayoutArgs) -> Result<(PatternLayout, ProbeLines, String)> {
    match (&args.layout, &args.geometry) {
        (Some(path), None) => {
            let mut layout = parse_layout_file(path)?;
            if let Some(d) = args.base_dose {
                layout.base_dose = d;
                layout.validate()?;
            }
            // File layouts carry no probe metadata: probe the field center
            // with the default bridge extent.
            let (w, h) = layout.bounds;
            let center = Point::new(w / 2.0, h / 2.0);
            let extent = args.bridge_gap.unwrap_or(300.0);
            let margin = 200.0;
            let probes = ProbeLines {
                vertical: (
                    Point::new(center.x, center.y - extent / 2.0 - margin),
                    Point::new(center.x, center.y + extent / 2.0 + margin),
                ),
                horizontal: (
                    Point::new(center.x - extent / 2.0 - margin, center.y),
                    Point::new(center.x + extent / 2.0 + margin, center.y),
                ),
                bridge_extent_nm: extent,
            };
            Ok((layout, probes, format!("layout={}", path.display())))
        }
        (None, Some(name)) => {
            let kind = GeometryKind::parse(name)?;
            let mut params = GeometryParams::default();
            if let Some(gap) = args.bridge_gap {
                params.bridge_gap_nm = gap;
            }
            if let Some(f) = args.booster_factor {
                params.booster_dose_factor = f;
            }
            if let Some(d) = args.base_dose {
                params.base_dose = d;
            }
            let (layout, probes) = build_geometry(kind, &params)?;
            Ok((
                layout,
                probes,
                format!(
                    "geometry={} gap={} base-dose={}",
                    kind.name(),
                    params.bridge_gap_nm,
                    params.base_dose
                ),
            ))
        }
        (Some(_), Some(_)) => Err(EblError::validation(
            "layout",
            "choose either --layout or --geometry, not both",
        )),
        (None, None) => Err(EblError::validation(
            "layout",
            "a layout source is required: --layout FILE or --geometry KIND",
        )),
    }
}
