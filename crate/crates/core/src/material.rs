//! Target materials: composition, density, and ionization data used by the
//! scattering and stopping-power models.

use crate::error::{EblError, Result};
use serde::{Deserialize, Serialize};

/// One element of a compound, weighted by mass fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementFraction {
    /// Atomic number.
    pub z: u32,
    /// Atomic weight in g/mol.
    pub a: f64,
    /// Mass fraction (all fractions of a material sum to 1).
    pub mass_fraction: f64,
}

/// Mean ionization potential J(Z) in eV (Berger-Seltzer form, as used by the
/// Joy-Luo stopping power).
pub fn ionization_potential_ev(z: u32) -> f64 {
    let zf = z as f64;
    if z < 13 {
        11.5 * zf
    } else {
        9.76 * zf + 58.5 * zf.powf(-0.19)
    }
}

/// Joy-Luo low-energy coefficient k(Z).
pub fn joy_luo_k(z: u32) -> f64 {
    0.731 + 0.0688 * (z as f64).log10()
}

/// A homogeneous material in the layer stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub name: String,
    /// Bulk density in g/cm^3.
    pub density: f64,
    pub composition: Vec<ElementFraction>,
}

impl Material {
    pub fn new(
        name: impl Into<String>,
        density: f64,
        composition: Vec<ElementFraction>,
    ) -> Result<Self> {
        let name = name.into();
        let mat = Material {
            name,
            density,
            composition,
        };
        mat.validate()?;
        Ok(mat)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.density > 0.0) {
            return Err(EblError::validation(
                format!("material.{}.density", self.name),
                format!("must be > 0, got {}", self.density),
            ));
        }
        if self.composition.is_empty() {
            return Err(EblError::validation(
                format!("material.{}.composition", self.name),
                "must contain at least one element",
            ));
        }
        let mut sum = 0.0;
        for (i, el) in self.composition.iter().enumerate() {
            if el.z < 1 {
                return Err(EblError::validation(
                    format!("material.{}.composition[{i}].z", self.name),
                    "atomic number must be >= 1",
                ));
            }
            if !(el.a > 0.0) {
                return Err(EblError::validation(
                    format!("material.{}.composition[{i}].a", self.name),
                    "atomic weight must be > 0",
                ));
            }
            if !(el.mass_fraction > 0.0) {
                return Err(EblError::validation(
                    format!("material.{}.composition[{i}].mass_fraction", self.name),
                    "mass fraction must be > 0",
                ));
            }
            sum += el.mass_fraction;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EblError::validation(
                format!("material.{}.composition", self.name),
                format!("mass fractions must sum to 1 (got {sum})"),
            ));
        }
        Ok(())
    }

    /// Combined mean ionization potential in eV, from the per-element J(Z)
    /// values by Bragg (log-weighted) additivity.
    pub fn mean_ionization_potential_ev(&self) -> f64 {
        let mut weight = 0.0;
        let mut log_sum = 0.0;
        for el in &self.composition {
            let w = el.mass_fraction * el.z as f64 / el.a;
            weight += w;
            log_sum += w * ionization_potential_ev(el.z).ln();
        }
        (log_sum / weight).exp()
    }

    /// PMMA resist, C5H8O2 stoichiometry at 1.14 g/cm^3.
    pub fn pmma() -> Material {
        Material {
            name: "pmma".into(),
            density: 1.14,
            composition: c5h8o2(),
        }
    }

    /// MMA copolymer resist, C5H8O2 stoichiometry at 0.80 g/cm^3.
    pub fn mma() -> Material {
        Material {
            name: "mma".into(),
            density: 0.80,
            composition: c5h8o2(),
        }
    }

    /// Crystalline silicon substrate.
    pub fn silicon() -> Material {
        Material {
            name: "si".into(),
            density: 2.33,
            composition: vec![ElementFraction {
                z: 14,
                a: 28.085,
                mass_fraction: 1.0,
            }],
        }
    }

    /// Look up one of the built-in materials by name.
    pub fn builtin(name: &str) -> Option<Material> {
        match name {
            "pmma" => Some(Material::pmma()),
            "mma" => Some(Material::mma()),
            "si" | "silicon" => Some(Material::silicon()),
            _ => None,
        }
    }
}

/// C5H8O2 mass fractions (methyl methacrylate monomer unit).
fn c5h8o2() -> Vec<ElementFraction> {
    let m_c = 5.0 * 12.011;
    let m_h = 8.0 * 1.008;
    let m_o = 2.0 * 15.999;
    let total = m_c + m_h + m_o;
    vec![
        ElementFraction {
            z: 6,
            a: 12.011,
            mass_fraction: m_c / total,
        },
        ElementFraction {
            z: 1,
            a: 1.008,
            mass_fraction: m_h / total,
        },
        ElementFraction {
            z: 8,
            a: 15.999,
            mass_fraction: m_o / total,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_materials_validate() {
        for m in [Material::pmma(), Material::mma(), Material::silicon()] {
            m.validate().unwrap();
        }
    }

    #[test]
    fn ionization_potential_matches_reference_form() {
        // Z=14: 9.76*14 + 58.5*14^-0.19
        let j = ionization_potential_ev(14);
        let expect = 9.76 * 14.0 + 58.5 * (14.0f64).powf(-0.19);
        assert!((j - expect).abs() < 1e-12);
        // Below Z=13 the linear branch applies.
        assert_eq!(ionization_potential_ev(6), 69.0);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let bad = Material::new(
            "bad",
            1.0,
            vec![ElementFraction {
                z: 6,
                a: 12.011,
                mass_fraction: 0.5,
            }],
        );
        match bad {
            Err(EblError::Validation { field, .. }) => {
                assert!(field.contains("composition"), "field was {field}")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn combined_ionization_potential_between_elements() {
        let j = Material::pmma().mean_ionization_potential_ev();
        // Between J(H)=11.5 and J(O)=92.
        assert!(j > 11.5 && j < 92.0, "J = {j}");
    }
}
