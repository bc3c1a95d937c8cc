//! CSV serialization of radial PSF tables: bin center, incident density,
//! backscattered density, preceded by a `#` metadata block carrying the
//! normalization, trajectory count, z-window, bin edges, and provenance.

use super::RadialPsf;
use crate::error::{EblError, Result};
use std::path::Path;

pub fn psf_to_csv(psf: &RadialPsf, header_meta: &str) -> String {
    let mut out = String::from(header_meta);
    out.push_str(&format!("# trajectories: {}\n", psf.trajectory_count));
    out.push_str(&format!(
        "# z-window-nm: {} {}\n",
        psf.z_window_nm.0, psf.z_window_nm.1
    ));
    out.push_str(&format!(
        "# channel-total-ev: incident={} backscattered={}\n",
        psf.incident_total_ev, psf.backscattered_total_ev
    ));
    out.push_str(&format!("# stack: {}\n", psf.source.0));
    out.push_str(&format!("# beam: {}\n", psf.source.1));
    out.push_str("# first-edge-nm: ");
    out.push_str(&format!("{}\n", psf.bin_edges[0]));
    out.push_str("# last-edge-nm: ");
    out.push_str(&format!("{}\n", psf.bin_edges[psf.bins()]));
    out.push_str("bin_center_nm,incident_density,backscattered_density\n");
    for (i, c) in psf.bin_centers().iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", c, psf.incident[i], psf.backscattered[i]));
    }
    out
}

pub fn write_psf_csv(path: &Path, psf: &RadialPsf, header_meta: &str) -> Result<()> {
    std::fs::write(path, psf_to_csv(psf, header_meta)).map_err(|e| EblError::io(path, e))
}

pub fn read_psf_csv(path: &Path) -> Result<RadialPsf> {
    let text = std::fs::read_to_string(path).map_err(|e| EblError::io(path, e))?;
    psf_from_csv(&text)
}

pub fn psf_from_csv(text: &str) -> Result<RadialPsf> {
    let mut trajectories: u64 = 0;
    let mut z_window = (0.0, f64::INFINITY);
    let mut incident_total = 0.0;
    let mut backscattered_total = 0.0;
    let mut stack = String::new();
    let mut beam = String::new();
    let mut first_edge = super::FIRST_EDGE_NM;
    let mut last_edge = super::LAST_EDGE_NM;
    let mut incident = Vec::new();
    let mut backscattered = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("trajectories:") {
                trajectories = v.trim().parse().map_err(|_| {
                    EblError::parse(lineno + 1, 1, "bad trajectories value")
                })?;
            } else if let Some(v) = rest.strip_prefix("z-window-nm:") {
                let mut it = v.split_whitespace();
                let lo = it.next().and_then(|s| s.parse().ok());
                let hi = it.next().and_then(|s| s.parse().ok());
                if let (Some(lo), Some(hi)) = (lo, hi) {
                    z_window = (lo, hi);
                }
            } else if let Some(v) = rest.strip_prefix("channel-total-ev:") {
                for tok in v.split_whitespace() {
                    if let Some(x) = tok.strip_prefix("incident=") {
                        incident_total = x.parse().map_err(|_| {
                            EblError::parse(lineno + 1, 1, "bad incident total")
                        })?;
                    } else if let Some(x) = tok.strip_prefix("backscattered=") {
                        backscattered_total = x.parse().map_err(|_| {
                            EblError::parse(lineno + 1, 1, "bad backscattered total")
                        })?;
                    }
                }
            } else if let Some(v) = rest.strip_prefix("stack:") {
                stack = v.trim().to_string();
            } else if let Some(v) = rest.strip_prefix("beam:") {
                beam = v.trim().to_string();
            } else if let Some(v) = rest.strip_prefix("first-edge-nm:") {
                first_edge = v
                    .trim()
                    .parse()
                    .map_err(|_| EblError::parse(lineno + 1, 1, "bad first edge"))?;
            } else if let Some(v) = rest.strip_prefix("last-edge-nm:") {
                last_edge = v
                    .trim()
                    .parse()
                    .map_err(|_| EblError::parse(lineno + 1, 1, "bad last edge"))?;
            }
            continue;
        }
        if line.starts_with("bin_center_nm") {
            continue;
        }
        let mut parts = line.split(',');
        let _center: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| EblError::parse(lineno + 1, 1, "bad bin center"))?;
        let inc: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| EblError::parse(lineno + 1, 1, "bad incident density"))?;
        let back: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| EblError::parse(lineno + 1, 1, "bad backscattered density"))?;
        incident.push(inc);
        backscattered.push(back);
    }

    let bins = incident.len();
    if bins < 8 {
        return Err(EblError::format(format!(
            "PSF table needs >= 8 bins, found {bins}"
        )));
    }
    // Reconstruct the log-spaced edges from the recorded endpoints.
    let lo = first_edge.ln();
    let hi = last_edge.ln();
    let bin_edges: Vec<f64> = (0..=bins)
        .map(|i| (lo + (hi - lo) * i as f64 / bins as f64).exp())
        .collect();
    Ok(RadialPsf {
        bin_edges,
        incident,
        backscattered,
        incident_total_ev: incident_total,
        backscattered_total_ev: backscattered_total,
        trajectory_count: trajectories,
        z_window_nm: z_window,
        source: (stack, beam),
    })
}
