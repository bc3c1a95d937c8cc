//! File formats: binary event dumps, the shared binary grid format, PGM
//! heatmaps, and metadata headers for text outputs.
//!
//! Event dump (little-endian): 16-byte header = magic `EBEV` (4) + version
//! u32 (4) + record count u64 (8), then per event f32 x, y, z nm, f32
//! energy eV, u8 channel.
//!
//! Grid file (little-endian): header = magic `EBGR` (4) + version u32 (4) +
//! pitch f64 nm (8) + width u32 (4) + height u32 (4), then row-major f32
//! values.

use crate::error::{EblError, Result};
use crate::transport::{Channel, DepositionRecord, EventList, RunSummary};
use ndarray::Array2;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const EVENT_MAGIC: &[u8; 4] = b"EBEV";
pub const GRID_MAGIC: &[u8; 4] = b"EBGR";
pub const FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EblError + '_ {
    move |e| EblError::io(path, e)
}

/// Write the deposition events as a binary dump.
pub fn write_event_dump(path: &Path, events: &EventList) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut header = [0u8; 16];
    header[0..4].copy_from_slice(EVENT_MAGIC);
    header[4..8].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    header[8..16].copy_from_slice(&(events.len() as u64).to_le_bytes());
    w.write_all(&header).map_err(io_err(path))?;
    let mut buf = Vec::with_capacity(17 * 4096);
    for i in 0..events.len() {
        buf.extend_from_slice(&events.x_nm[i].to_le_bytes());
        buf.extend_from_slice(&events.y_nm[i].to_le_bytes());
        buf.extend_from_slice(&events.z_nm[i].to_le_bytes());
        buf.extend_from_slice(&events.energy_ev[i].to_le_bytes());
        buf.push(events.channel[i]);
        if buf.len() >= 17 * 4096 {
            w.write_all(&buf).map_err(io_err(path))?;
            buf.clear();
        }
    }
    w.write_all(&buf).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Read a binary event dump back into an event list.
pub fn read_event_dump(path: &Path) -> Result<EventList> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| EblError::format("event dump shorter than its 16-byte header"))?;
    if &header[0..4] != EVENT_MAGIC {
        return Err(EblError::format("bad magic: not an event dump"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(EblError::format(format!(
            "unsupported event dump version {version}"
        )));
    }
    let count = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let mut events = EventList::default();
    let mut rec = [0u8; 17];
    for i in 0..count {
        r.read_exact(&mut rec).map_err(|_| {
            EblError::format(format!("event dump truncated at record {i} of {count}"))
        })?;
        let x = f32::from_le_bytes(rec[0..4].try_into().unwrap());
        let y = f32::from_le_bytes(rec[4..8].try_into().unwrap());
        let z = f32::from_le_bytes(rec[8..12].try_into().unwrap());
        let e = f32::from_le_bytes(rec[12..16].try_into().unwrap());
        let channel = Channel::from_u8(rec[16])?;
        events.push(x, y, z, e, channel);
    }
    Ok(events)
}

/// Write one 2D grid in the shared binary grid format.
pub fn write_grid(path: &Path, pitch_nm: f64, values: &Array2<f64>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let (height, width) = values.dim();
    let mut header = Vec::with_capacity(24);
    header.extend_from_slice(GRID_MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&pitch_nm.to_le_bytes());
    header.extend_from_slice(&(width as u32).to_le_bytes());
    header.extend_from_slice(&(height as u32).to_le_bytes());
    w.write_all(&header).map_err(io_err(path))?;
    let mut buf = Vec::with_capacity(4 * width);
    for row in values.rows() {
        buf.clear();
        for &v in row {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        w.write_all(&buf).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Read a grid file; returns (pitch_nm, values).
pub fn read_grid(path: &Path) -> Result<(f64, Array2<f64>)> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 24];
    r.read_exact(&mut header)
        .map_err(|_| EblError::format("grid file shorter than its 24-byte header"))?;
    if &header[0..4] != GRID_MAGIC {
        return Err(EblError::format("bad magic: not a grid file"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(EblError::format(format!(
            "unsupported grid version {version}"
        )));
    }
    let pitch = f64::from_le_bytes(header[8..16].try_into().unwrap());
    let width = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[20..24].try_into().unwrap()) as usize;
    let mut data = vec![0u8; 4 * width * height];
    r.read_exact(&mut data)
        .map_err(|_| EblError::format("grid file truncated"))?;
    let mut values = Array2::zeros((height, width));
    for i in 0..height {
        for j in 0..width {
            let off = 4 * (i * width + j);
            values[(i, j)] =
                f32::from_le_bytes(data[off..off + 4].try_into().unwrap()) as f64;
        }
    }
    Ok((pitch, values))
}

/// 8-bit binary PGM heatmap, normalized to the grid maximum.
pub fn write_pgm_heatmap(path: &Path, values: &Array2<f64>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let (height, width) = values.dim();
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    write!(w, "P5\n{width} {height}\n255\n").map_err(io_err(path))?;
    let mut buf = Vec::with_capacity(width);
    // Row 0 of the grid is y = 0; PGM rows go top-down, so flip.
    for i in (0..height).rev() {
        buf.clear();
        for j in 0..width {
            let v = if max > 0.0 { values[(i, j)] / max } else { 0.0 };
            buf.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
        w.write_all(&buf).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Metadata header lines for text outputs: tool version, config hash, seed.
/// No timestamps, so reruns are bit-identical.
pub fn metadata_header(config_hash: &str, seed: u64) -> String {
    format!(
        "# tool: eblsim v{}\n# config: {}\n# seed: {}\n",
        env!("CARGO_PKG_VERSION"),
        config_hash,
        seed
    )
}

/// Hex SHA-256 of arbitrary bytes, truncated to 16 chars for headers.
pub fn short_hash(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(16);
    for b in &digest[..8] {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Write a run summary as human-readable text with a metadata header.
pub fn write_summary_text(
    path: &Path,
    summary: &RunSummary,
    config_hash: &str,
    seed: u64,
) -> Result<()> {
    let mut text = metadata_header(config_hash, seed);
    text.push_str(&format!(
        "trajectories: {}\nbeam-energy-ev: {}\ndeposited-ev: {}\ndeposited-incident-ev: {}\ndeposited-backscattered-ev: {}\nexited-ev: {}\nresidual-ev: {}\nbackscatter-yield: {}\nexit-count: {}\n",
        summary.trajectory_count,
        summary.beam_energy_ev,
        summary.deposited_ev,
        summary.deposited_incident_ev,
        summary.deposited_backscattered_ev,
        summary.exited_ev,
        summary.residual_ev,
        summary.backscatter_yield,
        summary.exit_count,
    ));
    std::fs::write(path, text).map_err(io_err(path))
}

/// Write backscattered exits as CSV (used by the angular fit downstream).
pub fn write_exits_csv(
    path: &Path,
    exits: &[crate::transport::BackscatterExit],
    config_hash: &str,
    seed: u64,
) -> Result<()> {
    let mut text = metadata_header(config_hash, seed);
    text.push_str("theta_deg,energy_ev,radius_nm\n");
    for e in exits {
        text.push_str(&format!("{},{},{}\n", e.theta_deg, e.energy_ev, e.radius_nm));
    }
    std::fs::write(path, text).map_err(io_err(path))
}

/// Read exits back from CSV.
pub fn read_exits_csv(path: &Path) -> Result<Vec<crate::transport::BackscatterExit>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut exits = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("theta_deg") {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>, field: &str| -> Result<f64> {
            s.and_then(|v| v.trim().parse::<f64>().ok()).ok_or_else(|| {
                EblError::parse(lineno + 1, 1, format!("bad {field} in exits CSV"))
            })
        };
        exits.push(crate::transport::BackscatterExit {
            theta_deg: parse(parts.next(), "theta_deg")?,
            energy_ev: parse(parts.next(), "energy_ev")?,
            radius_nm: parse(parts.next(), "radius_nm")?,
        });
    }
    Ok(exits)
}

/// Serialize a full deposition record to a directory: events.bin, exits.csv,
/// summary.txt.
pub fn write_record(
    dir: &Path,
    record: &DepositionRecord,
    config_hash: &str,
    seed: u64,
) -> Result<()> {
    write_event_dump(&dir.join("events.bin"), &record.events)?;
    write_exits_csv(&dir.join("exits.csv"), &record.backscattered_exits, config_hash, seed)?;
    write_summary_text(&dir.join("summary.txt"), &record.summary, config_hash, seed)?;
    Ok(())
}
