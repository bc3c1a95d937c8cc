//! The `reproduce-paper` meta-command: one seeded transport run feeding the
//! PSF fits, the four geometry dose maps, and the three dose-window sweeps,
//! then a report comparing each figure against its reference band.

use super::{OutputDir, ReproduceArgs};
use crate::config::stock_config_toml;
use crate::dose::{compute_metrics, convolve_fast, GeometryMetrics};
use crate::error::{EblError, Result};
use crate::io;
use crate::layout::{build_geometry, rasterize, GeometryKind, GeometryParams};
use crate::psf::{
    build_kernel_set, fit_angular, fit_power_law, layer_psfs, write_psf_csv, KernelSet,
    DEFAULT_BINS, DEFAULT_FIT_RANGE_NM,
};
use crate::transport::{simulate_with_options, Channel};
use crate::window::{
    calibrate_thresholds, sweep, BridgeResponse, SweepResult, CALIBRATION_FORM_DOSE,
    CALIBRATION_SENSITIVITY_RATIO, CALIBRATION_WINDOW_WIDTH,
};

struct Check {
    name: &'static str,
    value: f64,
    band: (f64, f64),
    reference: &'static str,
}

impl Check {
    fn pass(&self) -> bool {
        self.value >= self.band.0 && self.value <= self.band.1
    }

    fn line(&self) -> String {
        format!(
            "{:<34} {:>10.4}  band [{}, {}]  ref {}  {}",
            self.name,
            self.value,
            self.band.0,
            self.band.1,
            self.reference,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

pub(crate) fn run(args: &ReproduceArgs, json: bool) -> Result<()> {
    let mut out = OutputDir::create(&args.out)?;
    let config_text = stock_config_toml(args.trajectories, args.seed);
    let config = crate::config::RunConfig::from_str_checked(&config_text)?;
    let (stack, beam, options) = config.build()?;
    let hash = io::short_hash(config_text.as_bytes());
    let meta = io::metadata_header(&hash, args.seed);

    eprintln!(
        "transport: {} trajectories at 30 keV over {}",
        args.trajectories,
        stack.describe()
    );
    let record = simulate_with_options(&stack, &beam, options)?;
    io::write_summary_text(&out.path("summary.txt"), &record.summary, &hash, args.seed)?;

    let mut tables = layer_psfs(&record, &stack, DEFAULT_BINS)?;
    for t in tables.iter_mut() {
        t.source = (stack.describe(), beam.describe());
    }
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
        DEFAULT_FIT_RANGE_NM.0,
        DEFAULT_FIT_RANGE_NM.1,
    )?;
    let angular = fit_angular(&record, 90)?;

    eprintln!("kernels: pitch {} nm, half-width 4000 nm", args.pitch);
    let kernels = build_kernel_set(&record, &stack, DEFAULT_BINS, args.pitch, 4000.0)?;

    let params = GeometryParams::default();
    let mut metrics: Vec<(GeometryKind, GeometryMetrics)> = Vec::new();
    let mut responses: Vec<(GeometryKind, BridgeResponse)> = Vec::new();
    for kind in [
        GeometryKind::ThinDolan,
        GeometryKind::LShape,
        GeometryKind::Horseshoe,
        GeometryKind::XJunction,
    ] {
        eprintln!("dose map: {}", kind.name());
        let (layout, probes) = build_geometry(kind, &params)?;
        let exposure = rasterize(&layout, args.pitch)?;
        let dose = convolve_fast(&exposure, &kernels.full)?;
        io::write_pgm_heatmap(
            &out.path(&format!("dose_{}.pgm", kind.name())),
            &dose.total,
        )?;
        metrics.push((kind, compute_metrics(&dose, &probes)?));
        responses.push((
            kind,
            crate::window::bridge_response(&layout, &probes, &kernels)?,
        ));
    }

    let horseshoe_response = responses
        .iter()
        .find(|(k, _)| *k == GeometryKind::Horseshoe)
        .unwrap()
        .1;
    let thresholds = calibrate_thresholds(
        &horseshoe_response,
        CALIBRATION_FORM_DOSE,
        CALIBRATION_WINDOW_WIDTH,
        CALIBRATION_SENSITIVITY_RATIO,
    )?;
    let mut windows: Vec<(GeometryKind, SweepResult)> = Vec::new();
    for kind in [
        GeometryKind::ThinDolan,
        GeometryKind::LShape,
        GeometryKind::Horseshoe,
    ] {
        eprintln!("dose sweep: {}", kind.name());
        let (layout, probes) = build_geometry(kind, &params)?;
        let result = sweep(&layout, &probes, &kernels, &thresholds, (350.0, 870.0), 20.0)?;
        let csv_path = out.path(&format!("sweep_{}.csv", kind.name()));
        std::fs::write(&csv_path, result.csv(&meta)).map_err(|e| EblError::io(&csv_path, e))?;
        windows.push((kind, result));
    }

    let get_metric = |kind: GeometryKind| metrics.iter().find(|(k, _)| *k == kind).unwrap().1;
    let get_window = |kind: GeometryKind| {
        windows
            .iter()
            .find(|(k, _)| *k == kind)
            .unwrap()
            .1
            .window_width()
    };
    let thin = get_metric(GeometryKind::ThinDolan);
    let lshape = get_metric(GeometryKind::LShape);
    let horseshoe = get_metric(GeometryKind::Horseshoe);
    let xjunction = get_metric(GeometryKind::XJunction);

    let checks = vec![
        Check {
            name: "backscatter exponent b",
            value: power.b,
            band: (0.55, 0.95),
            reference: "0.77",
        },
        Check {
            name: "fitted decay 60->360 nm",
            value: power.decay_between(60.0, 360.0),
            band: (0.65, 0.85),
            reference: "0.75",
        },
        Check {
            name: "angular mu (deg)",
            value: angular.mu_deg,
            band: (38.0, 48.0),
            reference: "43",
        },
        Check {
            name: "angular sigma (deg)",
            value: angular.sigma_deg,
            band: (12.0, 22.0),
            reference: "17",
        },
        Check {
            name: "falloff thin dolan",
            value: thin.falloff_ratio,
            band: (12.0, 28.0),
            reference: "20",
        },
        Check {
            name: "falloff l-shape",
            value: lshape.falloff_ratio,
            band: (7.2, 16.8),
            reference: "12",
        },
        Check {
            name: "falloff horseshoe",
            value: horseshoe.falloff_ratio,
            band: (7.2, 16.8),
            reference: "12",
        },
        Check {
            name: "falloff ratio thin/horseshoe",
            value: thin.falloff_ratio / horseshoe.falloff_ratio,
            band: (1.4, 2.2),
            reference: "20/12",
        },
        Check {
            name: "eb/ei horseshoe",
            value: horseshoe.eb_ei_center,
            band: (2.0, f64::INFINITY),
            reference: ">= 2",
        },
        Check {
            name: "eb/ei l-shape",
            value: lshape.eb_ei_center,
            band: (2.0, f64::INFINITY),
            reference: ">= 2",
        },
        Check {
            name: "eb/ei x-junction margin",
            value: xjunction.eb_ei_center
                - horseshoe
                    .eb_ei_center
                    .max(lshape.eb_ei_center)
                    .max(thin.eb_ei_center),
            band: (0.0, f64::INFINITY),
            reference: "> all",
        },
        Check {
            name: "thin dolan edge drop",
            value: thin.edge_drop_ratio,
            band: (10.0, f64::INFINITY),
            reference: "> 10x",
        },
        Check {
            name: "window horseshoe (uC/cm2)",
            value: get_window(GeometryKind::Horseshoe),
            band: (200.0, 320.0),
            reference: "260",
        },
        Check {
            name: "window l-shape (uC/cm2)",
            value: get_window(GeometryKind::LShape),
            band: (get_window(GeometryKind::ThinDolan), get_window(GeometryKind::Horseshoe)),
            reference: "160",
        },
        Check {
            name: "window thin dolan (uC/cm2)",
            value: get_window(GeometryKind::ThinDolan),
            band: (0.0, 40.0),
            reference: "20",
        },
    ];

    let mut report = meta;
    report.push_str(&format!(
        "trajectories: {}\nbackscatter yield: {:.4}\n\n",
        args.trajectories, record.summary.backscatter_yield
    ));
    for c in &checks {
        report.push_str(&c.line());
        report.push('\n');
    }
    let passed = checks.iter().filter(|c| c.pass()).count();
    report.push_str(&format!("\n{passed}/{} checks in band\n", checks.len()));
    let report_path = out.path("report.txt");
    std::fs::write(&report_path, &report).map_err(|e| EblError::io(&report_path, e))?;
    out.commit();

    if json {
        let entries: Vec<serde_json::Value> = checks
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "value": c.value,
                    "band": [c.band.0, c.band.1],
                    "pass": c.pass(),
                })
            })
            .collect();
        println!("{}", serde_json::json!({ "checks": entries }));
    } else {
        print!("{report}");
    }
    let _ = kernels_size_hint(&kernels);
    Ok(())
}

fn kernels_size_hint(kernels: &KernelSet) -> usize {
    kernels.full.size()
}
