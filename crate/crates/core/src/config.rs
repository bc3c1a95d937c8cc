//! TOML run configuration: material blocks, layer list, beam block, and
//! command options.

use crate::error::{EblError, Result};
use crate::material::{ElementFraction, Material};
use crate::transport::{
    BeamConfig, ClassificationRule, ElasticModel, LayerStack, SimulateOptions, DEFAULT_CUTOFF_EV,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Extra/overriding material definitions; built-ins `pmma`, `mma`, `si`
    /// are always available.
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialSpec>,
    pub stack: StackSpec,
    pub beam: BeamSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaterialSpec {
    pub density: f64,
    /// List of { z, a, fraction } element entries.
    pub composition: Vec<ElementSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElementSpec {
    pub z: u32,
    pub a: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StackSpec {
    #[serde(default)]
    pub layers: Vec<LayerSpec>,
    pub substrate: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerSpec {
    pub material: String,
    pub thickness_nm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamSpec {
    pub energy_kev: f64,
    pub beam_radius_nm: f64,
    pub trajectories: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff_ev: f64,
    pub seed: u64,
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF_EV
}

/// Simulation options block. `record_depth` is "all", "stack", or a depth in
/// nm; the default keeps stored events inside the resist.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSpec {
    #[serde(default = "default_record_depth")]
    pub record_depth: RecordDepth,
    #[serde(default = "default_elastic")]
    pub elastic_model: String,
    #[serde(default = "default_classification")]
    pub classification: String,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec {
            record_depth: default_record_depth(),
            elastic_model: default_elastic(),
            classification: default_classification(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RecordDepth {
    Named(String),
    Depth(f64),
}

fn default_record_depth() -> RecordDepth {
    RecordDepth::Named("stack".into())
}

fn default_elastic() -> String {
    "browning-mott".into()
}

fn default_classification() -> String {
    "first-reversal".into()
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| EblError::io(path, e))?;
        RunConfig::from_str_checked(&text)
    }

    pub fn from_str_checked(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| EblError::validation("config", e.to_string()))?;
        // Fail early on anything the typed builders would reject.
        config.build()?;
        Ok(config)
    }

    /// Resolve into validated domain objects.
    pub fn build(&self) -> Result<(LayerStack, BeamConfig, SimulateOptions)> {
        let stack = self.build_stack()?;
        let beam = self.build_beam()?;
        let options = self.build_options(&stack)?;
        Ok((stack, beam, options))
    }

    fn material(&self, name: &str) -> Result<Material> {
        if let Some(spec) = self.materials.get(name) {
            let composition = spec
                .composition
                .iter()
                .map(|e| ElementFraction {
                    z: e.z,
                    a: e.a,
                    mass_fraction: e.fraction,
                })
                .collect();
            return Material::new(name, spec.density, composition);
        }
        Material::builtin(name).ok_or_else(|| {
            EblError::validation(
                format!("materials.{name}"),
                "unknown material: not built-in and not defined in [materials]",
            )
        })
    }

    pub fn build_stack(&self) -> Result<LayerStack> {
        let mut layers = Vec::new();
        for layer in &self.stack.layers {
            layers.push((self.material(&layer.material)?, layer.thickness_nm));
        }
        let substrate = self.material(&self.stack.substrate)?;
        LayerStack::new(layers, substrate)
    }

    pub fn build_beam(&self) -> Result<BeamConfig> {
        let beam = BeamConfig {
            energy_kev: self.beam.energy_kev,
            beam_radius_nm: self.beam.beam_radius_nm,
            trajectory_count: self.beam.trajectories,
            cutoff_ev: self.beam.cutoff_ev,
            rng_seed: self.beam.seed,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn build_options(&self, stack: &LayerStack) -> Result<SimulateOptions> {
        let record_depth_nm = match &self.simulate.record_depth {
            RecordDepth::Named(name) => match name.as_str() {
                "all" => None,
                "stack" => Some(stack.total_thickness_nm()),
                other => {
                    return Err(EblError::validation(
                        "simulate.record_depth",
                        format!("expected \"all\", \"stack\", or a depth in nm, got \"{other}\""),
                    ))
                }
            },
            RecordDepth::Depth(d) => {
                if *d < 0.0 {
                    return Err(EblError::validation(
                        "simulate.record_depth",
                        "depth must be >= 0",
                    ));
                }
                Some(*d)
            }
        };
        let elastic_model = match self.simulate.elastic_model.as_str() {
            "browning-mott" => ElasticModel::BrowningMott,
            "screened-rutherford" => ElasticModel::ScreenedRutherford,
            other => {
                return Err(EblError::validation(
                    "simulate.elastic_model",
                    format!(
                        "expected \"browning-mott\" or \"screened-rutherford\", got \"{other}\""
                    ),
                ))
            }
        };
        let classification = match self.simulate.classification.as_str() {
            "first-reversal" => ClassificationRule::FirstReversal,
            "exit-fate" => ClassificationRule::ExitFate,
            other => {
                return Err(EblError::validation(
                    "simulate.classification",
                    format!("expected \"first-reversal\" or \"exit-fate\", got \"{other}\""),
                ))
            }
        };
        Ok(SimulateOptions {
            record_depth_nm,
            classification,
            elastic_model,
        })
    }
}

/// The stock 30 kV PMMA/MMA/Si configuration as TOML text.
pub fn stock_config_toml(trajectories: u64, seed: u64) -> String {
    format!(
        "[stack]\nsubstrate = \"si\"\n\n[[stack.layers]]\nmaterial = \"pmma\"\nthickness_nm = 230.0\n\n[[stack.layers]]\nmaterial = \"mma\"\nthickness_nm = 500.0\n\n[beam]\nenergy_kev = 30.0\nbeam_radius_nm = 10.0\ntrajectories = {trajectories}\ncutoff_ev = 50.0\nseed = {seed}\n"
    )
}
