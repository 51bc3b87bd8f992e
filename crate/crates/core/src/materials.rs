//! Material property database.
//!
//! Built-in entries carry the five solids used by the cell (substrate,
//! two candidate membranes, pillar oxide and electrode metal). A JSON file
//! can add or replace entries by name.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CmutError, Result};
use crate::num::Scalar;

const GPA: f64 = 1e9;

/// Isotropic linear-elastic solid. All fields SI.
#[derive(Debug, Clone, PartialEq)]
pub struct Material<T> {
    pub name: String,
    /// kg/m³
    pub density: T,
    /// `None` for conductors.
    pub relative_permittivity: Option<T>,
    /// Pa
    pub youngs_modulus: T,
    pub poissons_ratio: T,
}

impl<T: Scalar> Material<T> {
    pub fn new(
        name: impl Into<String>,
        density: T,
        relative_permittivity: Option<T>,
        youngs_modulus: T,
        poissons_ratio: T,
    ) -> Result<Self> {
        let m = Self {
            name: name.into(),
            density,
            relative_permittivity,
            youngs_modulus,
            poissons_ratio,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: String| CmutError::InvalidMaterial {
            material: self.name.clone(),
            field,
            reason,
        };
        if !(self.density > T::zero()) || !self.density.is_finite() {
            return Err(bad("density", format!("must be > 0, got {}", self.density)));
        }
        if !(self.youngs_modulus > T::zero()) || !self.youngs_modulus.is_finite() {
            return Err(bad(
                "youngs_modulus",
                format!("must be > 0, got {}", self.youngs_modulus),
            ));
        }
        if !(self.poissons_ratio >= T::zero() && self.poissons_ratio < T::lit(0.5)) {
            return Err(bad(
                "poissons_ratio",
                format!("must be in [0, 0.5), got {}", self.poissons_ratio),
            ));
        }
        if let Some(er) = self.relative_permittivity {
            if !(er >= T::one()) || !er.is_finite() {
                return Err(bad("relative_permittivity", format!("must be >= 1, got {er}")));
            }
        }
        Ok(())
    }

    /// Relative permittivity, or an error for conductors.
    pub fn permittivity(&self) -> Result<T> {
        self.relative_permittivity
            .ok_or_else(|| CmutError::Conductor(self.name.clone()))
    }

    pub fn cast<U: Scalar>(&self) -> Material<U> {
        Material {
            name: self.name.clone(),
            density: U::lit(self.density.as_f64()),
            relative_permittivity: self.relative_permittivity.map(|e| U::lit(e.as_f64())),
            youngs_modulus: U::lit(self.youngs_modulus.as_f64()),
            poissons_ratio: U::lit(self.poissons_ratio.as_f64()),
        }
    }
}

/// On-disk record. Young's modulus in GPa, everything else SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRecord {
    pub name: String,
    pub density_kg_m3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_permittivity: Option<f64>,
    pub youngs_modulus_gpa: f64,
    pub poissons_ratio: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialFile {
    pub materials: Vec<MaterialRecord>,
}

impl From<&Material<f64>> for MaterialRecord {
    fn from(m: &Material<f64>) -> Self {
        Self {
            name: m.name.clone(),
            density_kg_m3: m.density,
            relative_permittivity: m.relative_permittivity,
            youngs_modulus_gpa: m.youngs_modulus / GPA,
            poissons_ratio: m.poissons_ratio,
        }
    }
}

impl TryFrom<&MaterialRecord> for Material<f64> {
    type Error = CmutError;

    fn try_from(r: &MaterialRecord) -> Result<Self> {
        Material::new(
            canonical_name(&r.name),
            r.density_kg_m3,
            r.relative_permittivity,
            r.youngs_modulus_gpa * GPA,
            r.poissons_ratio,
        )
    }
}

/// Maps Unicode subscript digits to ASCII so `Si₃N₄` and `Si3N4` name the
/// same entry.
pub fn canonical_name(name: &str) -> String {
    name.trim()
        .chars()
        .map(|c| match c {
            '₀'..='₉' => char::from(b'0' + (c as u32 - '₀' as u32) as u8),
            _ => c,
        })
        .collect()
}

/// Name-keyed material table. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialDb {
    entries: BTreeMap<String, Material<f64>>,
}

impl MaterialDb {
    pub fn get(&self, name: &str) -> Result<&Material<f64>> {
        self.entries
            .get(&canonical_name(name))
            .ok_or_else(|| CmutError::UnknownMaterial(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Material<f64>> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts or replaces entries by name.
    pub fn overlay(mut self, materials: impl IntoIterator<Item = Material<f64>>) -> Self {
        for m in materials {
            self.entries.insert(m.name.clone(), m);
        }
        self
    }

    pub fn to_file(&self) -> MaterialFile {
        MaterialFile {
            materials: self.entries.values().map(MaterialRecord::from).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("material file serializes")
    }

    /// Parses a material file and overlays it on the built-in table.
    /// Blank input yields the built-in table unchanged.
    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        if text.trim().is_empty() {
            return Ok(builtin_db());
        }
        let file: MaterialFile = serde_json::from_str(text).map_err(|e| CmutError::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let mut parsed = Vec::with_capacity(file.materials.len());
        for rec in &file.materials {
            parsed.push(Material::try_from(rec)?);
        }
        Ok(builtin_db().overlay(parsed))
    }
}

/// The five built-in materials, GPa converted to Pa.
pub fn builtin_db() -> MaterialDb {
    let rows: [(&str, f64, Option<f64>, f64, f64); 5] = [
        ("Si", 2329.0, Some(11.7), 170.0, 0.28),
        ("Si3N4", 3100.0, Some(7.5), 250.0, 0.23),
        ("SiC", 3216.0, Some(9.7), 748.0, 0.45),
        ("SiO2", 2200.0, Some(3.9), 70.0, 0.17),
        ("Al", 2700.0, None, 70.0, 0.33),
    ];
    let entries = rows
        .into_iter()
        .map(|(name, rho, er, e_gpa, nu)| {
            let m = Material::new(name, rho, er, e_gpa * GPA, nu).expect("built-in material is valid");
            (name.to_string(), m)
        })
        .collect();
    MaterialDb { entries }
}

/// Reads a material JSON file and overlays it on [`builtin_db`].
pub fn load_db(path: impl AsRef<Path>) -> Result<MaterialDb> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CmutError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    MaterialDb::from_json_str(&text, path)
}
