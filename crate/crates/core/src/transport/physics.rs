//! Single-scattering transport physics: screened-Rutherford elastic
//! cross-sections and Joy-Luo (Bethe) continuous slowing down.
//!
//! Conventions: lengths in nm, energies in eV at the interfaces; formulas
//! evaluate in keV/cm internally where the standard forms are written that
//! way.

use crate::material::{ionization_potential_ev, joy_luo_k, Material};
use rand::Rng;

pub const AVOGADRO: f64 = 6.02214076e23;
const CM_TO_NM: f64 = 1.0e7;

/// Elastic cross-section model.
///
/// Screened Rutherford is the classic analytic choice but under-samples
/// large-angle events for light elements at keV energies; the Browning
/// empirical form reproduces tabulated Mott cross-sections over 0.1-30 keV
/// and is the default for the dose pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ElasticModel {
    ScreenedRutherford,
    #[default]
    BrowningMott,
}

/// Screening parameter of the screened-Rutherford cross-section.
pub fn screening_parameter(z: u32, energy_kev: f64) -> f64 {
    3.4e-3 * (z as f64).powf(0.67) / energy_kev
}

/// Total elastic cross-section per atom in cm^2 (relativistically corrected
/// screened Rutherford).
pub fn elastic_cross_section_cm2(z: u32, energy_kev: f64) -> f64 {
    let zf = z as f64;
    let alpha = screening_parameter(z, energy_kev);
    let rel = (energy_kev + 511.0) / (energy_kev + 1024.0);
    5.21e-21 * zf * zf / (energy_kev * energy_kev)
        * (4.0 * std::f64::consts::PI / (alpha * (1.0 + alpha)))
        * rel
        * rel
}

/// Browning's empirical total elastic cross-section per atom in cm^2
/// (fit to Mott tabulations, 0.1-30 keV).
pub fn browning_cross_section_cm2(z: u32, energy_kev: f64) -> f64 {
    let zf = z as f64;
    let z17 = zf.powf(1.7);
    let se = energy_kev.sqrt();
    3.0e-18 * z17 / (energy_kev + 0.005 * z17 * se + 0.0007 * zf * zf / se)
}

/// Total elastic cross-section per atom under the chosen model, cm^2.
pub fn total_cross_section_cm2(model: ElasticModel, z: u32, energy_kev: f64) -> f64 {
    match model {
        ElasticModel::ScreenedRutherford => elastic_cross_section_cm2(z, energy_kev),
        ElasticModel::BrowningMott => browning_cross_section_cm2(z, energy_kev),
    }
}

/// Elastic mean free path in nm for a single element of the given density.
pub fn elastic_mfp_single_nm(z: u32, a: f64, density: f64, energy_kev: f64) -> f64 {
    let n = AVOGADRO * density / a; // atoms / cm^3
    1.0 / (n * elastic_cross_section_cm2(z, energy_kev)) * CM_TO_NM
}

/// Per-material scattering tables: one entry per element.
#[derive(Debug, Clone)]
pub struct ScatterModel {
    /// Number density of each element in atoms/cm^3.
    number_density: Vec<f64>,
    z: Vec<u32>,
    /// Mean ionization potential per element in keV.
    j_kev: Vec<f64>,
    k: Vec<f64>,
    /// c_i Z_i / A_i stopping weights per element.
    stop_weight: Vec<f64>,
    density: f64,
    elastic: ElasticModel,
}

impl ScatterModel {
    pub fn new(material: &Material, elastic: ElasticModel) -> Self {
        let mut number_density = Vec::new();
        let mut z = Vec::new();
        let mut j_kev = Vec::new();
        let mut k = Vec::new();
        let mut stop_weight = Vec::new();
        for el in &material.composition {
            number_density.push(AVOGADRO * material.density * el.mass_fraction / el.a);
            z.push(el.z);
            j_kev.push(ionization_potential_ev(el.z) * 1e-3);
            k.push(joy_luo_k(el.z));
            stop_weight.push(el.mass_fraction * el.z as f64 / el.a);
        }
        ScatterModel {
            number_density,
            z,
            j_kev,
            k,
            stop_weight,
            density: material.density,
            elastic,
        }
    }

    /// Total elastic mean free path in nm at the given energy.
    pub fn elastic_mfp_nm(&self, energy_kev: f64) -> f64 {
        let mut inv = 0.0;
        for (i, &n) in self.number_density.iter().enumerate() {
            inv += n * total_cross_section_cm2(self.elastic, self.z[i], energy_kev);
        }
        1.0 / inv * CM_TO_NM
    }

    /// Pick the scattering element with probability proportional to its
    /// macroscopic cross-section, returning its atomic number.
    pub fn sample_element<R: Rng>(&self, energy_kev: f64, rng: &mut R) -> u32 {
        if self.z.len() == 1 {
            return self.z[0];
        }
        let sigmas: Vec<f64> = self
            .number_density
            .iter()
            .zip(&self.z)
            .map(|(&n, &z)| n * total_cross_section_cm2(self.elastic, z, energy_kev))
            .collect();
        let total: f64 = sigmas.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (i, &s) in sigmas.iter().enumerate() {
            if u < s {
                return self.z[i];
            }
            u -= s;
        }
        *self.z.last().unwrap()
    }

    /// Sample a polar deflection off element `z` under the chosen model.
    pub fn sample_deflection<R: Rng>(&self, z: u32, energy_kev: f64, rng: &mut R) -> f64 {
        match self.elastic {
            ElasticModel::ScreenedRutherford => {
                sample_polar_deflection(screening_parameter(z, energy_kev), rng)
            }
            ElasticModel::BrowningMott => sample_browning_deflection(z, energy_kev, rng),
        }
    }

    /// Joy-Luo stopping power in eV/nm at the given energy.
    ///
    /// Bragg additivity over elements; the logarithm is clamped at zero so
    /// the loss rate never turns negative near the tracking cutoff.
    pub fn stopping_power_ev_per_nm(&self, energy_kev: f64) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.stop_weight.len() {
            let arg = 1.166 * (energy_kev + self.k[i] * self.j_kev[i]) / self.j_kev[i];
            sum += self.stop_weight[i] * arg.ln().max(0.0);
        }
        7.85 * self.density / energy_kev * sum
    }
}

/// Sample the polar deflection of a screened-Rutherford elastic event.
pub fn sample_polar_deflection<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let cos_theta = 1.0 - 2.0 * alpha * u / (1.0 + alpha - u);
    cos_theta.clamp(-1.0, 1.0).acos()
}

/// Sample a polar deflection from the Browning empirical angular
/// distribution: mostly a sharply forward screened-Rutherford branch, with
/// an isotropic large-angle branch whose weight grows toward low energy and
/// high Z.
pub fn sample_browning_deflection<R: Rng>(z: u32, energy_kev: f64, rng: &mut R) -> f64 {
    let ratio = 300.0 * energy_kev.powf(0.7) / z as f64;
    let split: f64 = rng.random();
    if split < ratio / (1.0 + ratio) {
        sample_polar_deflection(7.0e-3 / energy_kev, rng)
    } else {
        let u: f64 = rng.random();
        (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos()
    }
}

/// One sampled elastic event for a single-element target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticEvent {
    pub free_path_nm: f64,
    pub polar_rad: f64,
    pub azimuth_rad: f64,
}

/// Sample a free path, polar deflection, and azimuth for a single element.
pub fn sample_elastic_event<R: Rng>(
    z: u32,
    a: f64,
    density: f64,
    energy_kev: f64,
    rng: &mut R,
) -> ElasticEvent {
    let mfp = elastic_mfp_single_nm(z, a, density, energy_kev);
    let u: f64 = rng.random();
    // 1 - u is in (0, 1]; the logarithm stays finite.
    let free_path_nm = -mfp * (1.0 - u).ln();
    let alpha = screening_parameter(z, energy_kev);
    let polar_rad = sample_polar_deflection(alpha, rng);
    let azimuth_rad = rng.random::<f64>() * std::f64::consts::TAU;
    ElasticEvent {
        free_path_nm,
        polar_rad,
        azimuth_rad,
    }
}

/// Energy in eV deposited along `path_nm` of continuous slowing down,
/// starting from `energy_ev`. Never exceeds the starting energy; monotone in
/// path length.
pub fn continuous_energy_loss(model: &ScatterModel, energy_ev: f64, path_nm: f64) -> f64 {
    debug_assert!(path_nm >= 0.0);
    let mut e = energy_ev;
    let mut remaining = path_nm;
    let mut lost = 0.0;
    while remaining > 0.0 && e > 0.0 {
        let s = model.stopping_power_ev_per_nm(e * 1e-3);
        if s <= 0.0 {
            break;
        }
        // Substep so each piece costs at most 2% of the current energy.
        let max_step = 0.02 * e / s;
        let step = remaining.min(max_step);
        let de = s * step;
        if de >= e {
            lost += e;
            break;
        }
        lost += de;
        e -= de;
        remaining -= step;
    }
    lost.min(energy_ev)
}
