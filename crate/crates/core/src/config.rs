//! JSON run documents with `levels`, `cavity` and `run` sections.
//!
//! A document may name a `base_preset`; its sections are then merged key by key
//! into the preset, so `{"base_preset": "fig2d-iii", "run": {"gamma": 0.0005}}`
//! is a complete config. A `manifest` object, as written next to every result,
//! is accepted and ignored so manifests replay as configs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::discretize::FrequencyMapping;
use crate::error::{Error, Result, Violation};
use crate::model::{validate_inputs, CavityModel, ElectronicLevels, PrefactorMode, Vec3};
use crate::observables::DEFAULT_POINTS;
use crate::presets;

pub const DEFAULT_TIME_POINTS: usize = 801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    #[default]
    Spectrum,
    Weights,
    Dynamics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    #[default]
    Structured,
    Dense,
    Resolvent,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structured" => Ok(SolverKind::Structured),
            "dense" => Ok(SolverKind::Dense),
            "resolvent" => Ok(SolverKind::Resolvent),
            other => Err(Error::InvalidArgument(format!("unknown solver '{other}'"))),
        }
    }
}

/// Re-sampling of the uniform grid before the solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTransform {
    pub mapping: FrequencyMapping,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub kind: RunKind,
    /// Spectral broadening ħΓ (eV).
    pub gamma: f64,
    pub polarization: Vec3,
    pub solver: SolverKind,
    /// Number of probe frequencies.
    pub points: usize,
    /// Probe window; the photon window when absent.
    pub omega_range: Option<[f64; 2]>,
    pub prefactor: PrefactorMode,
    /// Starting level for dynamics.
    pub initial_state: Option<String>,
    /// Propagation time (fs); a default derived from the decay estimate when absent.
    pub duration_fs: Option<f64>,
    pub time_points: usize,
    pub grid_transform: Option<GridTransform>,
    /// Frequency (eV) at which sweeps report the dip depth.
    pub dip_at: Option<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            kind: RunKind::Spectrum,
            gamma: presets::GAMMA,
            polarization: Vec3::x(1.0),
            solver: SolverKind::Structured,
            points: DEFAULT_POINTS,
            omega_range: None,
            prefactor: PrefactorMode::Normalized,
            initial_state: None,
            duration_fs: None,
            time_points: DEFAULT_TIME_POINTS,
            grid_transform: None,
            dip_at: None,
        }
    }
}

impl RunSettings {
    fn violations(&self, levels: &ElectronicLevels) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |p: &str, m: &str| out.push(Violation::new(format!("run.{p}"), m));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            bad("gamma", "broadening must be positive");
        }
        if self.polarization.unit().is_none() || !self.polarization.is_finite() {
            bad("polarization", "must be a finite nonzero vector");
        }
        if self.points < 2 {
            bad("points", "need at least two probe frequencies");
        }
        if let Some([lo, hi]) = self.omega_range {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                bad("omega_range", "must be an increasing pair of finite values");
            }
        }
        if self.time_points < 2 {
            bad("time_points", "need at least two time points");
        }
        if let Some(d) = self.duration_fs {
            if !(d > 0.0 && d.is_finite()) {
                bad("duration_fs", "duration must be positive");
            }
        }
        if let Some(label) = &self.initial_state {
            if levels.index_of(label).is_none() {
                bad("initial_state", &format!("no level labelled '{label}'"));
            }
        } else if self.kind == RunKind::Dynamics {
            bad("initial_state", "dynamics needs a starting level");
        }
        if self.solver == SolverKind::Resolvent && self.kind != RunKind::Spectrum {
            bad("solver", "the resolvent solver only produces spectra");
        }
        if let Some(g) = &self.grid_transform {
            if g.modes < 2 {
                bad("grid_transform.modes", "need at least two modes");
            }
            if g.mapping.validate().is_err() {
                bad("grid_transform.mapping", "mapping is not strictly increasing");
            }
        }
        if let Some(w) = self.dip_at {
            if !w.is_finite() {
                bad("dip_at", "must be finite");
            }
        }
        out
    }
}

/// A validated run: the molecule, the cavity and what to compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub levels: ElectronicLevels,
    pub cavity: CavityModel,
    #[serde(default)]
    pub run: RunSettings,
}

impl RunConfig {
    /// Checks model and run invariants together, reporting every violation.
    pub fn validate(self) -> Result<Self> {
        let run_v = self.run.violations(&self.levels);
        let run = self.run;
        match validate_inputs(self.levels, self.cavity) {
            Ok((levels, cavity)) if run_v.is_empty() => Ok(Self { levels, cavity, run }),
            Ok(_) => Err(Error::Validation(run_v)),
            Err(Error::Validation(mut v)) => {
                v.extend(run_v);
                Err(Error::Validation(v))
            }
            Err(e) => Err(e),
        }
    }

    pub fn from_json_str(text: &str, source: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config {
            path: source.to_string(),
            message: e.to_string(),
        })?;
        Self::from_value(value, source)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn from_value(value: Value, source: &str) -> Result<Self> {
        let Value::Object(mut doc) = value else {
            return Err(Error::Config {
                path: source.to_string(),
                message: "top level must be an object".into(),
            });
        };
        doc.remove("manifest");
        let merged = match doc.remove("base_preset") {
            None => Value::Object(doc),
            Some(Value::String(id)) => {
                let mut base = serde_json::to_value(presets::get(&id)?.config)
                    .expect("preset configs serialize");
                merge(&mut base, Value::Object(doc));
                base
            }
            Some(_) => {
                return Err(Error::Config {
                    path: "base_preset".into(),
                    message: "must be a preset id string".into(),
                })
            }
        };
        let config: RunConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
            Error::Config {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            }
        })?;
        config.validate()
    }

    pub fn to_json_value(&self) -> Value {
        serde_json::to_value(self).expect("configs serialize")
    }
}

/// Recursive object merge; non-object values in `patch` replace those in `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
