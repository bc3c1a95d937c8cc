//! Monte Carlo electron transport through a layered resist stack.
//!
//! Electrons start at the vacuum surface (z = 0, z positive into the
//! sample), scatter elastically off screened nuclei, and lose energy
//! continuously between events. Each deposition event carries a channel
//! flag: events become `Backscattered` from the first step on which the
//! electron travels back toward the surface (direction z-component < 0),
//! and stay so for the rest of the trajectory. Electrons leaving through
//! z = 0 with energy above the tracking cutoff are recorded as
//! backscattered exits.

pub mod physics;
mod tracker;

pub use physics::ElasticModel;

use crate::error::{EblError, Result};
use crate::material::Material;
use physics::ScatterModel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default tracking cutoff in eV.
pub const DEFAULT_CUTOFF_EV: f64 = 50.0;
/// Electrons deeper than this are considered absorbed (nm).
pub const MAX_TRACKING_DEPTH_NM: f64 = 50_000.0;
/// Trajectories per parallel work unit. Results are reduced in chunk order,
/// so the value changes performance only, never output.
const CHUNK_SIZE: u64 = 2048;

/// Ordered resist layers over a semi-infinite substrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    /// Top first; thickness in nm.
    pub layers: Vec<(Material, f64)>,
    pub substrate: Material,
}

impl LayerStack {
    pub fn new(layers: Vec<(Material, f64)>, substrate: Material) -> Result<Self> {
        let stack = LayerStack { layers, substrate };
        stack.validate()?;
        Ok(stack)
    }

    /// The reference bilayer: 230 nm PMMA over 500 nm MMA on silicon.
    pub fn pmma_mma_si() -> LayerStack {
        LayerStack {
            layers: vec![(Material::pmma(), 230.0), (Material::mma(), 500.0)],
            substrate: Material::silicon(),
        }
    }

    /// Bare substrate with no resist.
    pub fn bare(substrate: Material) -> LayerStack {
        LayerStack {
            layers: Vec::new(),
            substrate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, (mat, t)) in self.layers.iter().enumerate() {
            mat.validate()?;
            if !(*t > 0.0) {
                return Err(EblError::validation(
                    format!("stack.layers[{i}].thickness"),
                    format!("must be > 0, got {t}"),
                ));
            }
        }
        self.substrate.validate()
    }

    /// Total finite (resist) thickness in nm.
    pub fn total_thickness_nm(&self) -> f64 {
        self.layers.iter().map(|(_, t)| t).sum()
    }

    /// z of each layer interface, starting at 0 and ending at the substrate
    /// top.
    pub fn boundaries_nm(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.layers.len() + 1);
        b.push(0.0);
        let mut z = 0.0;
        for (_, t) in &self.layers {
            z += t;
            b.push(z);
        }
        b
    }

    /// Depth span (z_min, z_max) of one layer, by index from the top.
    pub fn layer_span_nm(&self, index: usize) -> Option<(f64, f64)> {
        let b = self.boundaries_nm();
        if index + 1 < b.len() {
            Some((b[index], b[index + 1]))
        } else {
            None
        }
    }

    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = self
            .layers
            .iter()
            .map(|(m, t)| format!("{}:{}nm", m.name, t))
            .collect();
        parts.push(format!("{}:substrate", self.substrate.name));
        parts.join("/")
    }
}

/// Incident beam settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    /// Landing energy in keV.
    pub energy_kev: f64,
    /// Gaussian standard deviation of the incident spot, nm.
    pub beam_radius_nm: f64,
    pub trajectory_count: u64,
    /// Tracking stops below this energy (eV).
    pub cutoff_ev: f64,
    pub rng_seed: u64,
}

impl BeamConfig {
    pub fn new(energy_kev: f64, beam_radius_nm: f64, trajectory_count: u64, rng_seed: u64) -> Self {
        BeamConfig {
            energy_kev,
            beam_radius_nm,
            trajectory_count,
            cutoff_ev: DEFAULT_CUTOFF_EV,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy_kev > 0.0) {
            return Err(EblError::validation(
                "beam.energy_kev",
                format!("must be > 0, got {}", self.energy_kev),
            ));
        }
        if !(self.beam_radius_nm >= 0.0) {
            return Err(EblError::validation(
                "beam.beam_radius_nm",
                format!("must be >= 0, got {}", self.beam_radius_nm),
            ));
        }
        if self.trajectory_count < 1 {
            return Err(EblError::validation(
                "beam.trajectory_count",
                "must be >= 1",
            ));
        }
        if !(self.cutoff_ev > 0.0) {
            return Err(EblError::validation(
                "beam.cutoff_ev",
                format!("must be > 0, got {}", self.cutoff_ev),
            ));
        }
        Ok(())
    }

    pub fn energy_ev(&self) -> f64 {
        self.energy_kev * 1000.0
    }

    pub fn describe(&self) -> String {
        format!(
            "{}keV/r{}nm/n{}/cut{}eV/seed{}",
            self.energy_kev, self.beam_radius_nm, self.trajectory_count, self.cutoff_ev, self.rng_seed
        )
    }
}

/// Deposition channel of an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    Incident = 0,
    Backscattered = 1,
}

impl Channel {
    pub fn from_u8(v: u8) -> Result<Channel> {
        match v {
            0 => Ok(Channel::Incident),
            1 => Ok(Channel::Backscattered),
            _ => Err(EblError::format(format!("invalid channel byte {v}"))),
        }
    }
}

/// Energy-deposition events in struct-of-arrays form. Positions and energies
/// are stored in f32 to keep large runs memory-bound-friendly; bookkeeping
/// totals are accumulated in f64 in [`RunSummary`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventList {
    pub x_nm: Vec<f32>,
    pub y_nm: Vec<f32>,
    pub z_nm: Vec<f32>,
    pub energy_ev: Vec<f32>,
    pub channel: Vec<u8>,
}

impl EventList {
    pub fn len(&self) -> usize {
        self.energy_ev.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy_ev.is_empty()
    }

    pub fn push(&mut self, x: f32, y: f32, z: f32, energy: f32, channel: Channel) {
        self.x_nm.push(x);
        self.y_nm.push(y);
        self.z_nm.push(z);
        self.energy_ev.push(energy);
        self.channel.push(channel as u8);
    }

    pub fn append(&mut self, other: &mut EventList) {
        self.x_nm.append(&mut other.x_nm);
        self.y_nm.append(&mut other.y_nm);
        self.z_nm.append(&mut other.z_nm);
        self.energy_ev.append(&mut other.energy_ev);
        self.channel.append(&mut other.channel);
    }

    pub fn iter(&self) -> impl Iterator<Item = Event> + '_ {
        (0..self.len()).map(move |i| Event {
            x_nm: self.x_nm[i],
            y_nm: self.y_nm[i],
            z_nm: self.z_nm[i],
            energy_ev: self.energy_ev[i],
            channel: if self.channel[i] == 0 {
                Channel::Incident
            } else {
                Channel::Backscattered
            },
        })
    }
}

/// One deposition event (accessor view over [`EventList`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub x_nm: f32,
    pub y_nm: f32,
    pub z_nm: f32,
    pub energy_ev: f32,
    pub channel: Channel,
}

/// An electron that left through the top surface with energy above cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackscatterExit {
    /// Exit angle from the surface normal, degrees.
    pub theta_deg: f64,
    pub energy_ev: f64,
    /// Distance from the beam axis at the exit point, nm.
    pub radius_nm: f64,
}

/// Energy bookkeeping for a run; all sums in f64 eV.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trajectory_count: u64,
    pub beam_energy_ev: f64,
    /// Total deposited anywhere (both channels, recorded or not).
    pub deposited_ev: f64,
    pub deposited_incident_ev: f64,
    pub deposited_backscattered_ev: f64,
    /// Energy carried out through the top surface.
    pub exited_ev: f64,
    /// Energy left in electrons when tracking stopped (cutoff or depth cap).
    pub residual_ev: f64,
    /// Backscattered exits (energy above cutoff) / trajectory count.
    pub backscatter_yield: f64,
    pub exit_count: u64,
}

impl RunSummary {
    /// deposited + exited + residual; equals N * E0 up to float rounding.
    pub fn accounted_ev(&self) -> f64 {
        self.deposited_ev + self.exited_ev + self.residual_ev
    }
}

/// Full output of a transport run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DepositionRecord {
    pub events: EventList,
    pub backscattered_exits: Vec<BackscatterExit>,
    pub summary: RunSummary,
}

/// Per-run options: event storage, channel classification, and the elastic
/// cross-section model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulateOptions {
    /// Store individual events only for depths z <= this value (nm); deeper
    /// depositions still count toward the summary totals. `None` stores
    /// everything. Large runs over a full substrate produce hundreds of
    /// events per trajectory, so bounding the stored depth to the resist
    /// keeps memory flat without touching the transport itself.
    pub record_depth_nm: Option<f64>,
    /// How deposition events are split between the incident and
    /// backscattered channels.
    pub classification: ClassificationRule,
    /// Elastic cross-section model used by the transport.
    pub elastic_model: ElasticModel,
}

/// Channel classification rule for deposition events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassificationRule {
    /// Events switch to backscattered from the first step on which the
    /// direction's z-component turns negative, and stay so.
    FirstReversal,
    /// Every event of an electron that eventually exits through the top
    /// surface is backscattered; absorbed electrons deposit incident only.
    ExitFate,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions {
            record_depth_nm: None,
            classification: ClassificationRule::FirstReversal,
            elastic_model: ElasticModel::default(),
        }
    }
}

/// Run the Monte Carlo transport, storing every deposition event.
pub fn simulate(stack: &LayerStack, beam: &BeamConfig) -> Result<DepositionRecord> {
    simulate_with_options(stack, beam, SimulateOptions::default())
}

/// Run the Monte Carlo transport with storage options.
///
/// Deterministic for a fixed `rng_seed` at any thread count: every
/// trajectory derives its own RNG stream from (seed, index), and partial
/// results are merged in index order.
pub fn simulate_with_options(
    stack: &LayerStack,
    beam: &BeamConfig,
    options: SimulateOptions,
) -> Result<DepositionRecord> {
    stack.validate()?;
    beam.validate()?;

    let geometry = tracker::StackGeometry::new(stack, options.elastic_model);
    let n = beam.trajectory_count;
    let chunk_count = n.div_ceil(CHUNK_SIZE);

    let mut partials: Vec<tracker::ChunkOutput> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK_SIZE;
            let hi = ((chunk + 1) * CHUNK_SIZE).min(n);
            tracker::run_chunk(&geometry, beam, options, lo, hi)
        })
        .collect();

    let mut record = DepositionRecord::default();
    for p in partials.iter_mut() {
        record.events.append(&mut p.events);
        record.backscattered_exits.append(&mut p.exits);
        record.summary.deposited_ev += p.deposited_ev;
        record.summary.deposited_incident_ev += p.deposited_incident_ev;
        record.summary.deposited_backscattered_ev += p.deposited_backscattered_ev;
        record.summary.exited_ev += p.exited_ev;
        record.summary.residual_ev += p.residual_ev;
        record.summary.exit_count += p.exit_count;
    }
    record.summary.trajectory_count = n;
    record.summary.beam_energy_ev = beam.energy_ev();
    record.summary.backscatter_yield = record.summary.exit_count as f64 / n as f64;
    Ok(record)
}

/// Classify the deposition events of a single trajectory from its per-step
/// direction z-components: every event from the first step with a negative
/// z-direction onward is backscattered.
pub fn classify_backscatter(step_dir_z: &[f64]) -> Vec<Channel> {
    let mut reversed = false;
    step_dir_z
        .iter()
        .map(|&dz| {
            if dz < 0.0 {
                reversed = true;
            }
            if reversed {
                Channel::Backscattered
            } else {
                Channel::Incident
            }
        })
        .collect()
}

/// Scattering models for each region of a stack, substrate last.
pub(crate) fn region_models(stack: &LayerStack, elastic: ElasticModel) -> Vec<ScatterModel> {
    let mut models: Vec<ScatterModel> = stack
        .layers
        .iter()
        .map(|(m, _)| ScatterModel::new(m, elastic))
        .collect();
    models.push(ScatterModel::new(&stack.substrate, elastic));
    models
}
