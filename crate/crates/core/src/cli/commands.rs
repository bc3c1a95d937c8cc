//! Implementations of the individual subcommands.

use super::kernels::{resolve_kernels, resolve_layout};
use super::{DosemapArgs, GeometryArgs, OutputDir, PecArgs, PsfArgs, SimulateArgs, SweepArgs};
use crate::config::RunConfig;
use crate::dose::{compute_metrics, convolve_direct, convolve_fast, extract_trace, TraceProfile};
use crate::error::{EblError, Result};
use crate::io;
use crate::layout::{build_geometry, write_layout_file, GeometryKind, GeometryParams};
use crate::psf::{fit_angular, fit_power_law, layer_psfs, write_psf_csv};
use crate::transport::{simulate_with_options, Channel, DepositionRecord, RunSummary};
use crate::window::{
    calibrate_thresholds, sweep as window_sweep, BridgeResponse, ResistThresholds,
    CALIBRATION_FORM_DOSE, CALIBRATION_SENSITIVITY_RATIO, CALIBRATION_WINDOW_WIDTH,
};
use std::path::Path;

fn config_hash_of_file(path: &Path, extra: &str) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| EblError::io(path, e))?;
    let mut all = bytes;
    all.extend_from_slice(extra.as_bytes());
    Ok(io::short_hash(&all))
}

pub(crate) fn simulate(args: &SimulateArgs, json: bool) -> Result<()> {
    let mut config = RunConfig::from_path(&args.config)?;
    if let Some(n) = args.trajectories {
        config.beam.trajectories = n;
    }
    if let Some(s) = args.seed {
        config.beam.seed = s;
    }
    let (stack, beam, options) = config.build()?;
    let hash = config_hash_of_file(
        &args.config,
        &format!("trajectories={:?} seed={:?}", args.trajectories, args.seed),
    )?;

    let record = simulate_with_options(&stack, &beam, options)?;

    let mut out = OutputDir::create(&args.out)?;
    io::write_event_dump(&out.path("events.bin"), &record.events)?;
    io::write_exits_csv(
        &out.path("exits.csv"),
        &record.backscattered_exits,
        &hash,
        beam.rng_seed,
    )?;
    io::write_summary_text(&out.path("summary.txt"), &record.summary, &hash, beam.rng_seed)?;
    // Sidecar metadata so downstream commands know the run scale.
    let meta = format!(
        "{}trajectories: {}\nstack: {}\nbeam: {}\n",
        io::metadata_header(&hash, beam.rng_seed),
        beam.trajectory_count,
        stack.describe(),
        beam.describe(),
    );
    let meta_path = out.path("events.meta");
    std::fs::write(&meta_path, meta).map_err(|e| EblError::io(&meta_path, e))?;
    out.commit();

    print_summary(&record.summary, json);
    Ok(())
}

fn print_summary(summary: &RunSummary, json: bool) {
    if json {
        println!(
            "{}",
            serde_json::json!({
                "trajectories": summary.trajectory_count,
                "deposited_ev": summary.deposited_ev,
                "exited_ev": summary.exited_ev,
                "residual_ev": summary.residual_ev,
                "backscatter_yield": summary.backscatter_yield,
                "exit_count": summary.exit_count,
            })
        );
    } else {
        println!(
            "simulated {} trajectories: backscatter yield {:.4}, deposited {:.4e} eV",
            summary.trajectory_count, summary.backscatter_yield, summary.deposited_ev
        );
    }
}

pub(crate) fn psf(args: &PsfArgs, json: bool) -> Result<()> {
    let config = RunConfig::from_path(&args.config)?;
    let (stack, beam, _) = config.build()?;
    let events = io::read_event_dump(&args.events.join("events.bin"))?;
    if events.is_empty() {
        return Err(EblError::numeric("event dump holds no events"));
    }
    let exits = io::read_exits_csv(&args.events.join("exits.csv"))?;
    let hash = config_hash_of_file(&args.config, &format!("bins={}", args.bins))?;

    let record = DepositionRecord {
        events,
        backscattered_exits: exits,
        summary: RunSummary {
            trajectory_count: beam.trajectory_count,
            beam_energy_ev: beam.energy_ev(),
            ..Default::default()
        },
    };

    let mut tables = layer_psfs(&record, &stack, args.bins)?;
    for table in tables.iter_mut() {
        table.source = (stack.describe(), beam.describe());
    }

    let mut out = OutputDir::create(&args.out)?;
    let meta = io::metadata_header(&hash, beam.rng_seed);
    write_psf_csv(&out.path("psf_full.csv"), &tables[0], &meta)?;
    for (i, (mat, _)) in stack.layers.iter().enumerate() {
        write_psf_csv(
            &out.path(&format!("psf_layer_{}.csv", mat.name)),
            &tables[i + 1],
            &meta,
        )?;
    }

    let power = fit_power_law(
        &tables[0],
        Channel::Backscattered,
        args.fit_min,
        args.fit_max,
    )?;
    let angular = fit_angular(&record, args.angular_bins)?;

    let mut report = meta.clone();
    report.push_str(&format!(
        "power-law fit over [{}, {}] nm (backscattered channel):\n  a = {:e} (ln-a stderr {:.3})\n  b = {:.4} +- {:.4}\n  r2 = {:.4}\n  decay 60->360 nm = {:.4}\n",
        args.fit_min,
        args.fit_max,
        power.a,
        power.stderr_ln_a,
        power.b,
        power.stderr_b,
        power.r_squared,
        power.decay_between(60.0, 360.0),
    ));
    report.push_str(&format!(
        "angular fit (energy-weighted exit angles):\n  mu = {:.3} +- {:.3} deg\n  sigma = {:.3} +- {:.3} deg\n",
        angular.mu_deg, angular.stderr_mu, angular.sigma_deg, angular.stderr_sigma,
    ));
    let report_path = out.path("fits.txt");
    std::fs::write(&report_path, &report).map_err(|e| EblError::io(&report_path, e))?;
    out.commit();

    if json {
        println!(
            "{}",
            serde_json::json!({
                "a": power.a,
                "b": power.b,
                "stderr_b": power.stderr_b,
                "r_squared": power.r_squared,
                "decay_60_360": power.decay_between(60.0, 360.0),
                "mu_deg": angular.mu_deg,
                "sigma_deg": angular.sigma_deg,
                "stderr_mu": angular.stderr_mu,
                "stderr_sigma": angular.stderr_sigma,
            })
        );
    } else {
        print!("{report}");
    }
    Ok(())
}

fn trace_csv(trace: &TraceProfile, meta: &str) -> String {
    let mut out = String::from(meta);
    out.push_str("position_nm,total,incident,backscattered\n");
    for i in 0..trace.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            trace.positions_nm[i], trace.total[i], trace.incident[i], trace.backscattered[i]
        ));
    }
    out
}

pub(crate) fn dosemap(args: &DosemapArgs, json: bool) -> Result<()> {
    let (layout, probes, layout_desc) = resolve_layout(&args.layout)?;
    let kernels = resolve_kernels(&args.kernel)?;
    let hash = io::short_hash(format!("{layout_desc} {}", kernels.describe).as_bytes());

    let exposure = crate::layout::rasterize(&layout, args.kernel.pitch)?;
    let dose = if args.oracle {
        convolve_direct(&exposure, &kernels.full)?
    } else {
        convolve_fast(&exposure, &kernels.full)?
    };

    let samples = ((probes.bridge_extent_nm + 400.0) / (args.kernel.pitch / 2.0)) as usize + 1;
    let vertical = extract_trace(&dose, probes.vertical, samples)?;
    let horizontal = extract_trace(&dose, probes.horizontal, samples)?;
    let metrics = compute_metrics(&dose, &probes)?;

    let mut out = OutputDir::create(&args.out)?;
    io::write_grid(&out.path("dose_total.grid"), dose.pitch_nm, &dose.total)?;
    io::write_grid(&out.path("dose_incident.grid"), dose.pitch_nm, &dose.incident)?;
    io::write_grid(
        &out.path("dose_backscattered.grid"),
        dose.pitch_nm,
        &dose.backscattered,
    )?;
    io::write_pgm_heatmap(&out.path("dose_total.pgm"), &dose.total)?;
    let meta = io::metadata_header(&hash, 0);
    let vertical_path = out.path("trace_vertical.csv");
    std::fs::write(&vertical_path, trace_csv(&vertical, &meta))
        .map_err(|e| EblError::io(&vertical_path, e))?;
    let horizontal_path = out.path("trace_horizontal.csv");
    std::fs::write(&horizontal_path, trace_csv(&horizontal, &meta))
        .map_err(|e| EblError::io(&horizontal_path, e))?;

    let metrics_text = format!(
        "{meta}falloff-ratio: {}\nplateau-dose: {}\ngap-min-dose: {}\nedge-drop-ratio: {}\neb-ei-center: {}\neb-ei-degenerate: {}\nsaddle-variance: {}\n",
        metrics.falloff_ratio,
        metrics.plateau_dose,
        metrics.gap_min_dose,
        metrics.edge_drop_ratio,
        metrics.eb_ei_center,
        metrics.eb_ei_degenerate,
        metrics.saddle_variance,
    );
    let metrics_path = out.path("metrics.txt");
    std::fs::write(&metrics_path, &metrics_text).map_err(|e| EblError::io(&metrics_path, e))?;
    let metrics_csv = format!(
        "{meta}falloff_ratio,plateau_dose,gap_min_dose,edge_drop_ratio,eb_ei_center,saddle_variance\n{},{},{},{},{},{}\n",
        metrics.falloff_ratio,
        metrics.plateau_dose,
        metrics.gap_min_dose,
        metrics.edge_drop_ratio,
        metrics.eb_ei_center,
        metrics.saddle_variance,
    );
    let metrics_csv_path = out.path("metrics.csv");
    std::fs::write(&metrics_csv_path, metrics_csv).map_err(|e| EblError::io(&metrics_csv_path, e))?;
    out.commit();

    if json {
        println!(
            "{}",
            serde_json::json!({
                "falloff_ratio": metrics.falloff_ratio,
                "plateau_dose": metrics.plateau_dose,
                "gap_min_dose": metrics.gap_min_dose,
                "edge_drop_ratio": metrics.edge_drop_ratio,
                "eb_ei_center": metrics.eb_ei_center,
                "saddle_variance": metrics.saddle_variance,
            })
        );
    } else {
        print!("{metrics_text}");
    }
    Ok(())
}

pub(crate) fn pec(args: &PecArgs, json: bool) -> Result<()> {
    let (layout, _, layout_desc) = resolve_layout(&args.layout)?;
    let kernels = resolve_kernels(&args.kernel)?;
    let hash = io::short_hash(
        format!(
            "{layout_desc} {} target={} tol={}",
            kernels.describe, args.target, args.tol
        )
        .as_bytes(),
    );
    let config = crate::pec::PecConfig {
        tolerance: args.tol,
        max_iterations: args.max_iter,
        pitch_nm: args.kernel.pitch,
        ..Default::default()
    };
    let result = crate::pec::correct(&layout, &kernels.full, args.target, &config)?;

    let mut out = OutputDir::create(&args.out)?;
    write_layout_file(&out.path("corrected.layout"), &result.corrected)?;
    let meta = io::metadata_header(&hash, 0);
    let log_path = out.path("pec_log.csv");
    std::fs::write(&log_path, crate::pec::history_csv(&result, &meta))
        .map_err(|e| EblError::io(&log_path, e))?;
    out.commit();

    if json {
        println!(
            "{}",
            serde_json::json!({
                "converged": result.converged,
                "iterations": result.iterations,
                "residual": result.residual,
                "clamped_shapes": result.clamped_shapes,
                "factors": result.corrected.shapes.iter().map(|s| s.dose_factor).collect::<Vec<_>>(),
            })
        );
    } else {
        println!(
            "correction {} after {} iterations, residual {:.3e}{}",
            if result.converged {
                "converged"
            } else {
                "stopped"
            },
            result.iterations,
            result.residual,
            if result.clamped_shapes.is_empty() {
                String::new()
            } else {
                format!(" (clamped: {})", result.clamped_shapes.join(", "))
            }
        );
    }
    Ok(())
}

pub(crate) fn sweep(args: &SweepArgs, json: bool) -> Result<()> {
    let (layout, probes, layout_desc) = resolve_layout(&args.layout)?;
    let kernels = resolve_kernels(&args.kernel)?;
    let set = kernels.set.as_ref().ok_or_else(|| {
        EblError::validation(
            "kernel",
            "sweep needs per-layer PSF tables; pass --psf DIR produced by `eblsim psf`",
        )
    })?;
    let (start, end, step) = super::parse_triple(&args.range, "range")?;

    let thresholds = match &args.thresholds {
        Some(spec) => {
            let (mma, pmma, collapse) = super::parse_triple(spec, "thresholds")?;
            let t = ResistThresholds {
                mma_clearing: mma,
                pmma_clearing: pmma,
                pmma_collapse: collapse,
            };
            t.validate()?;
            t
        }
        None => {
            // Calibrate on the horseshoe reference geometry.
            let (reference, ref_probes) =
                build_geometry(GeometryKind::Horseshoe, &GeometryParams::default())?;
            let response: BridgeResponse =
                crate::window::bridge_response(&reference, &ref_probes, set)?;
            calibrate_thresholds(
                &response,
                CALIBRATION_FORM_DOSE,
                CALIBRATION_WINDOW_WIDTH,
                CALIBRATION_SENSITIVITY_RATIO,
            )?
        }
    };

    let result = window_sweep(&layout, &probes, set, &thresholds, (start, end), step)?;
    let hash = io::short_hash(
        format!(
            "{layout_desc} {} range={} thresholds={:?}",
            kernels.describe, args.range, args.thresholds
        )
        .as_bytes(),
    );

    let mut out = OutputDir::create(&args.out)?;
    let meta = io::metadata_header(&hash, 0);
    let sweep_path = out.path("sweep.csv");
    std::fs::write(&sweep_path, result.csv(&meta)).map_err(|e| EblError::io(&sweep_path, e))?;
    let window_text = match result.window {
        Some(w) => format!(
            "{meta}first-formed: {}\nlast-formed: {}\nwindow-width: {}\nthresholds: mma={} pmma={} collapse={}\n",
            w.first_formed,
            w.last_formed,
            w.width(),
            thresholds.mma_clearing,
            thresholds.pmma_clearing,
            thresholds.pmma_collapse,
        ),
        None => format!(
            "{meta}window: none (no dose in range formed a bridge)\nthresholds: mma={} pmma={} collapse={}\n",
            thresholds.mma_clearing, thresholds.pmma_clearing, thresholds.pmma_collapse,
        ),
    };
    let window_path = out.path("window.txt");
    std::fs::write(&window_path, &window_text).map_err(|e| EblError::io(&window_path, e))?;
    out.commit();

    if json {
        println!(
            "{}",
            serde_json::json!({
                "window_width": result.window_width(),
                "first_formed": result.window.map(|w| w.first_formed),
                "last_formed": result.window.map(|w| w.last_formed),
                "mma_min_per_unit": result.response.mma_min_per_unit,
                "pmma_max_per_unit": result.response.pmma_max_per_unit,
            })
        );
    } else {
        print!("{window_text}");
    }
    Ok(())
}

pub(crate) fn geometry(args: &GeometryArgs, json: bool) -> Result<()> {
    let kind = GeometryKind::parse(&args.kind)?;
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
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| EblError::io(parent, e))?;
        }
    }
    write_layout_file(&args.out, &layout)?;
    if json {
        println!(
            "{}",
            serde_json::json!({
                "kind": kind.name(),
                "shapes": layout.shapes.len(),
                "bridge_extent_nm": probes.bridge_extent_nm,
                "out": args.out.display().to_string(),
            })
        );
    } else {
        println!(
            "wrote {} ({} shapes, {} nm bridge gap)",
            args.out.display(),
            layout.shapes.len(),
            probes.bridge_extent_nm
        );
    }
    Ok(())
}
