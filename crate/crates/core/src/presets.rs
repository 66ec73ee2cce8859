//! Built-in parameter sets for the benzene and toluene cavity runs.

use crate::config::{RunConfig, RunKind, RunSettings};
use crate::error::{Error, Result};
use crate::model::{CavityModel, ElectronicLevel, ElectronicLevels, Vec3};

#[derive(Debug, Clone)]
pub struct Preset {
    pub id: &'static str,
    pub description: String,
    pub config: RunConfig,
}

pub const BENZENE_ENERGY: f64 = 6.93;
pub const BENZENE_DIPOLE: f64 = 0.96;
pub const BENZENE_MODES: usize = 5000;
pub const BENZENE_SPACING: f64 = 1e-4;

pub const TOLUENE_CENTER: f64 = 6.64;
pub const TOLUENE_WINDOW: [f64; 2] = [4.85, 8.45];
pub const TOLUENE_SPACING: f64 = 1e-4;
pub const TOLUENE_TRUNCATED_WINDOW: [f64; 2] = [6.35, 6.95];
pub const TOLUENE_TRUNCATED_SPACING: f64 = 1e-3;
/// Probe window for the full toluene grid, wide enough for every polariton branch.
pub const TOLUENE_PROBE: [f64; 2] = [6.4, 6.9];

pub const GAMMA: f64 = 1e-3;

const ROMAN: [&str; 5] = ["i", "ii", "iii", "iv", "v"];
const BENZENE_SERIES: [(f64, f64); 5] = [
    (0.001, 0.001),
    (0.002, 0.001),
    (0.008, 0.001),
    (0.008, 0.004),
    (0.008, 0.008),
];
const TOLUENE_SERIES: [(f64, f64); 5] = [
    (0.01, 0.01),
    (0.10, 0.01),
    (0.43, 0.01),
    (0.43, 0.08),
    (0.43, 0.32),
];
const TOLUENE_ALT_KAPPA: f64 = 0.10;

pub fn benzene_levels() -> ElectronicLevels {
    ElectronicLevels::new(vec![ElectronicLevel::new(
        "e1",
        BENZENE_ENERGY,
        Vec3::x(BENZENE_DIPOLE),
    )])
}

/// Three bright x-polarized states plus the weak 6.58 eV state.
pub fn toluene_levels() -> ElectronicLevels {
    ElectronicLevels::new(vec![
        ElectronicLevel::new("e0", 6.58, Vec3::x(0.01)),
        ElectronicLevel::new("e1", 6.64, Vec3::x(0.76)),
        ElectronicLevel::new("e2", 6.71, Vec3::x(0.11)),
        ElectronicLevel::new("e3", 6.78, Vec3::x(0.08)),
    ])
}

pub fn benzene_cavity(lambda: f64, kappa: f64) -> CavityModel {
    CavityModel::centered_with_modes(
        BENZENE_ENERGY,
        Vec3::x(lambda),
        kappa,
        BENZENE_MODES,
        BENZENE_SPACING,
    )
}

pub fn toluene_cavity(lambda: f64, kappa: f64) -> CavityModel {
    CavityModel {
        omega_c: TOLUENE_CENTER,
        lambda_c: Vec3::x(lambda),
        kappa,
        window: TOLUENE_WINDOW,
        spacing: TOLUENE_SPACING,
    }
}

pub fn toluene_truncated_cavity(lambda: f64, kappa: f64) -> CavityModel {
    CavityModel {
        window: TOLUENE_TRUNCATED_WINDOW,
        spacing: TOLUENE_TRUNCATED_SPACING,
        ..toluene_cavity(lambda, kappa)
    }
}

fn settings(kind: RunKind, omega_range: Option<[f64; 2]>) -> RunSettings {
    RunSettings {
        kind,
        gamma: GAMMA,
        omega_range,
        initial_state: Some("e1".into()),
        ..RunSettings::default()
    }
}

fn preset(id: &'static str, description: String, levels: ElectronicLevels, cavity: CavityModel, run: RunSettings) -> Preset {
    Preset {
        id,
        description,
        config: RunConfig { levels, cavity, run },
    }
}

pub fn all() -> Vec<Preset> {
    const FIG1: [&str; 5] = ["fig1d-i", "fig1d-ii", "fig1d-iii", "fig1d-iv", "fig1d-v"];
    const FIG2: [&str; 5] = ["fig2d-i", "fig2d-ii", "fig2d-iii", "fig2d-iv", "fig2d-v"];
    const FIG3: [&str; 5] = ["fig3-i", "fig3-ii", "fig3-iii", "fig3-iv", "fig3-v"];
    let mut out = Vec::new();
    for (k, &(l, kappa)) in BENZENE_SERIES.iter().enumerate() {
        out.push(preset(
            FIG1[k],
            format!("benzene ({}): lambda_c = {l} eV^1/2/nm, kappa = {kappa} eV, N = 5000", ROMAN[k]),
            benzene_levels(),
            benzene_cavity(l, kappa),
            settings(RunKind::Spectrum, None),
        ));
    }
    for (k, &(l, kappa)) in TOLUENE_SERIES.iter().enumerate() {
        out.push(preset(
            FIG2[k],
            format!("toluene ({}): lambda_c = {l} eV^1/2/nm, kappa = {kappa} eV, 4.85-8.45 eV grid", ROMAN[k]),
            toluene_levels(),
            toluene_cavity(l, kappa),
            settings(RunKind::Spectrum, Some(TOLUENE_PROBE)),
        ));
    }
    out.push(preset(
        "fig2d-iv-alt",
        format!("toluene (iv) with kappa = {TOLUENE_ALT_KAPPA} eV"),
        toluene_levels(),
        toluene_cavity(0.43, TOLUENE_ALT_KAPPA),
        settings(RunKind::Spectrum, Some(TOLUENE_PROBE)),
    ));
    for (k, &(l, kappa)) in TOLUENE_SERIES.iter().enumerate() {
        out.push(preset(
            FIG3[k],
            format!("toluene ({}) on the 6.35-6.95 eV grid, start in e1", ROMAN[k]),
            toluene_levels(),
            toluene_truncated_cavity(l, kappa),
            settings(RunKind::Dynamics, None),
        ));
    }
    out.push(preset(
        "benzene-free",
        "benzene without cavity coupling".into(),
        benzene_levels(),
        benzene_cavity(0.0, 0.001),
        settings(RunKind::Spectrum, None),
    ));
    out.push(preset(
        "toluene-free",
        "toluene without cavity coupling".into(),
        toluene_levels(),
        toluene_cavity(0.0, 0.01),
        settings(RunKind::Spectrum, Some(TOLUENE_PROBE)),
    ));
    out
}

pub fn ids() -> Vec<&'static str> {
    all().iter().map(|p| p.id).collect()
}

pub fn get(id: &str) -> Result<Preset> {
    all()
        .into_iter()
        .find(|p| p.id == id)
        .ok_or_else(|| Error::UnknownPreset(id.to_string()))
}
