//! Trajectory stepping through the layer geometry.

use super::physics::{continuous_energy_loss, ElasticModel, ScatterModel};
use super::{
    BackscatterExit, BeamConfig, Channel, ClassificationRule, EventList, LayerStack,
    SimulateOptions, MAX_TRACKING_DEPTH_NM,
};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// Region-indexed view of a stack: regions 0..n-1 are resist layers,
/// region n is the substrate.
pub(crate) struct StackGeometry {
    /// Interface depths, starting at 0; len = layer count + 1.
    boundaries: Vec<f64>,
    models: Vec<ScatterModel>,
}

impl StackGeometry {
    pub(crate) fn new(stack: &LayerStack, elastic: ElasticModel) -> StackGeometry {
        StackGeometry {
            boundaries: stack.boundaries_nm(),
            models: super::region_models(stack, elastic),
        }
    }

    fn substrate_region(&self) -> usize {
        self.models.len() - 1
    }

    /// Upper and lower z of a region; the substrate is unbounded below.
    fn region_span(&self, region: usize) -> (f64, f64) {
        if region == self.substrate_region() {
            (*self.boundaries.last().unwrap(), f64::INFINITY)
        } else {
            (self.boundaries[region], self.boundaries[region + 1])
        }
    }
}

pub(crate) struct ChunkOutput {
    pub events: EventList,
    pub exits: Vec<BackscatterExit>,
    pub deposited_ev: f64,
    pub deposited_incident_ev: f64,
    pub deposited_backscattered_ev: f64,
    pub exited_ev: f64,
    pub residual_ev: f64,
    pub exit_count: u64,
}

/// SplitMix64 finalizer; decorrelates per-trajectory streams derived from
/// (seed, index).
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut x = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn run_chunk(
    geometry: &StackGeometry,
    beam: &BeamConfig,
    options: SimulateOptions,
    lo: u64,
    hi: u64,
) -> ChunkOutput {
    let mut out = ChunkOutput {
        events: EventList::default(),
        exits: Vec::new(),
        deposited_ev: 0.0,
        deposited_incident_ev: 0.0,
        deposited_backscattered_ev: 0.0,
        exited_ev: 0.0,
        residual_ev: 0.0,
        exit_count: 0,
    };
    let mut scratch = Vec::with_capacity(1024);
    for index in lo..hi {
        let mut rng = SmallRng::seed_from_u64(mix_seed(beam.rng_seed, index));
        run_trajectory(geometry, beam, options, &mut rng, &mut scratch, &mut out);
    }
    out
}

/// One buffered deposition awaiting channel assignment.
struct PendingEvent {
    x: f64,
    y: f64,
    z: f64,
    energy: f64,
    post_reversal: bool,
}

fn run_trajectory(
    geometry: &StackGeometry,
    beam: &BeamConfig,
    options: SimulateOptions,
    rng: &mut SmallRng,
    scratch: &mut Vec<PendingEvent>,
    out: &mut ChunkOutput,
) {
    let gx: f64 = rng.sample(StandardNormal);
    let gy: f64 = rng.sample(StandardNormal);
    let mut x = beam.beam_radius_nm * gx;
    let mut y = beam.beam_radius_nm * gy;
    let mut z = 0.0_f64;
    let (mut ux, mut uy, mut uz) = (0.0_f64, 0.0_f64, 1.0_f64);
    let mut energy = beam.energy_ev();
    // Region 0 is the top layer, or the substrate itself for a bare stack.
    let mut region = 0usize;
    let mut backscattered = false;
    let mut exited = false;
    scratch.clear();

    // Below cutoff at birth: no events, trivially terminated.
    if energy <= beam.cutoff_ev {
        out.residual_ev += energy;
        return;
    }

    loop {
        if uz < 0.0 {
            backscattered = true;
        }
        let model = &geometry.models[region];
        let energy_kev = energy * 1e-3;
        let mfp = model.elastic_mfp_nm(energy_kev);
        let u: f64 = rng.random();
        let free_path = -mfp * (1.0 - u).ln();

        // Distance along the direction to the nearest region interface.
        let (z_top, z_bottom) = geometry.region_span(region);
        let boundary_dist = if uz > 0.0 {
            (z_bottom - z) / uz
        } else if uz < 0.0 {
            (z_top - z) / uz // uz < 0 and z_top <= z, so positive
        } else {
            f64::INFINITY
        };
        let crosses = free_path >= boundary_dist && boundary_dist.is_finite();
        let step = if crosses { boundary_dist } else { free_path };

        let loss = continuous_energy_loss(model, energy, step).min(energy);
        if loss > 0.0 {
            let half = 0.5 * step;
            scratch.push(PendingEvent {
                x: x + ux * half,
                y: y + uy * half,
                z: z + uz * half,
                energy: loss,
                post_reversal: backscattered,
            });
        }
        energy -= loss;
        x += ux * step;
        y += uy * step;
        z += uz * step;

        // Stopping-model floor: below ~20 eV the clamped Bethe term can go
        // to zero. Absorb the electron locally instead of stepping forever.
        if loss <= 0.0 && !crosses && free_path > 0.0 {
            out.residual_ev += energy;
            break;
        }

        if crosses {
            if region == 0 && uz < 0.0 {
                // Through the top surface into vacuum.
                out.exited_ev += energy;
                exited = true;
                if energy > beam.cutoff_ev {
                    let theta = (-uz).clamp(-1.0, 1.0).acos().to_degrees();
                    out.exits.push(BackscatterExit {
                        theta_deg: theta,
                        energy_ev: energy,
                        radius_nm: (x * x + y * y).sqrt(),
                    });
                    out.exit_count += 1;
                }
                break;
            }
            region = if uz > 0.0 { region + 1 } else { region - 1 };
            // Free path is memoryless: resample in the new material without
            // scattering at the interface.
            if energy <= beam.cutoff_ev {
                out.residual_ev += energy;
                break;
            }
            continue;
        }

        if energy <= beam.cutoff_ev {
            out.residual_ev += energy;
            break;
        }
        if z > MAX_TRACKING_DEPTH_NM {
            out.residual_ev += energy;
            break;
        }

        // Elastic scattering: pick element, deflect.
        let zel = model.sample_element(energy_kev, rng);
        let theta = model.sample_deflection(zel, energy_kev, rng);
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        let (nx, ny, nz) = rotate_direction(ux, uy, uz, theta, phi);
        ux = nx;
        uy = ny;
        uz = nz;
    }

    // Commit buffered depositions under the configured channel rule.
    let record_depth = options.record_depth_nm.unwrap_or(f64::INFINITY);
    for ev in scratch.iter() {
        let is_backscattered = match options.classification {
            ClassificationRule::FirstReversal => ev.post_reversal,
            ClassificationRule::ExitFate => exited,
        };
        let channel = if is_backscattered {
            Channel::Backscattered
        } else {
            Channel::Incident
        };
        out.deposited_ev += ev.energy;
        match channel {
            Channel::Incident => out.deposited_incident_ev += ev.energy,
            Channel::Backscattered => out.deposited_backscattered_ev += ev.energy,
        }
        if ev.z <= record_depth {
            out.events.push(
                ev.x as f32,
                ev.y as f32,
                ev.z as f32,
                ev.energy as f32,
                channel,
            );
        }
    }
}

/// Rotate unit vector `u` by polar angle `theta` (about an axis normal to u)
/// and azimuth `phi` around u.
fn rotate_direction(ux: f64, uy: f64, uz: f64, theta: f64, phi: f64) -> (f64, f64, f64) {
    let (sin_t, cos_t) = theta.sin_cos();
    let (sin_p, cos_p) = phi.sin_cos();
    if uz.abs() > 0.999_999 {
        let sign = uz.signum();
        (sin_t * cos_p, sin_t * sin_p, cos_t * sign)
    } else {
        let denom = (1.0 - uz * uz).sqrt();
        let nx = ux * cos_t + sin_t * (ux * uz * cos_p - uy * sin_p) / denom;
        let ny = uy * cos_t + sin_t * (uy * uz * cos_p + ux * sin_p) / denom;
        let nz = uz * cos_t - denom * sin_t * cos_p;
        // Renormalize to suppress drift over long trajectories.
        let norm = (nx * nx + ny * ny + nz * nz).sqrt();
        (nx / norm, ny / norm, nz / norm)
    }
}
