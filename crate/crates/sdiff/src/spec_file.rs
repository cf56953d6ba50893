//! JSON description of a diffusion model.
//!
//! Accepted shapes:
//!
//! ```json
//! "restoring"
//! {"preset": "unit"}
//! {"id": "bump", "sigma": {"cosine": [1.0, 0.2]}, "b": {"polynomial": [1, -2]},
//!  "class": {"s": 2, "C": 10, "c": 0.5}}
//! ```
//!
//! A coefficient is a number (constant), `{"polynomial": [a0, a1, ...]}`,
//! `{"cosine": [a0, a1, ...]}` for `Σ a_k cos(kπx)`, or `{"grid": [...]}`
//! for values on a uniform grid of `[0, 1]`.

use std::path::Path;

use sdiff_core::{Coefficient, DiffusionSpec, Preset, SmoothnessClass};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecFile {
    Preset(String),
    Named { preset: String },
    Custom(CustomSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomSpec {
    pub id: String,
    pub sigma: CoefficientDef,
    pub b: CoefficientDef,
    #[serde(default)]
    pub class: ClassDef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientDef {
    Constant(f64),
    Form(CoefficientForm),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientForm {
    Polynomial(Vec<f64>),
    Cosine(Vec<f64>),
    Grid(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDef {
    pub s: f64,
    #[serde(rename = "C")]
    pub norm_bound: f64,
    #[serde(rename = "c")]
    pub ellipticity: f64,
}

impl Default for ClassDef {
    fn default() -> Self {
        let d = SmoothnessClass::default();
        Self { s: d.s, norm_bound: d.norm_bound, ellipticity: d.ellipticity }
    }
}

impl From<&CoefficientDef> for Coefficient {
    fn from(def: &CoefficientDef) -> Self {
        match def {
            CoefficientDef::Constant(c) => Coefficient::Constant(*c),
            CoefficientDef::Form(CoefficientForm::Polynomial(a)) => Coefficient::Polynomial(a.clone()),
            CoefficientDef::Form(CoefficientForm::Cosine(a)) => Coefficient::CosineSeries(a.clone()),
            CoefficientDef::Form(CoefficientForm::Grid(v)) => Coefficient::Tabulated(v.clone()),
        }
    }
}

fn preset(name: &str) -> Result<DiffusionSpec> {
    Preset::from_name(name).map(Preset::spec).ok_or_else(|| {
        let known: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        Error::Config(format!("unknown preset '{name}' (known: {})", known.join(", ")))
    })
}

impl SpecFile {
    pub fn to_spec(&self) -> Result<DiffusionSpec> {
        match self {
            SpecFile::Preset(name) => resolve_spec(name),
            SpecFile::Named { preset: name } => preset(name),
            SpecFile::Custom(c) => Ok(DiffusionSpec::new(
                &c.id,
                (&c.sigma).into(),
                (&c.b).into(),
                SmoothnessClass {
                    s: c.class.s,
                    norm_bound: c.class.norm_bound,
                    ellipticity: c.class.ellipticity,
                },
            )?),
        }
    }
}

/// A preset name or the path of a JSON spec file.
pub fn resolve_spec(arg: &str) -> Result<DiffusionSpec> {
    if let Some(p) = Preset::from_name(arg) {
        return Ok(p.spec());
    }
    let path = Path::new(arg);
    if !path.exists() {
        return preset(arg);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SpecFile = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    match file {
        // a bare string inside a file is a preset name, never another path
        SpecFile::Preset(name) => preset(&name),
        other => other.to_spec(),
    }
}
