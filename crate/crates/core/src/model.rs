//! Domain types shared by every stage of a run.
//!
//! Units are fixed across the crate: energies and ħ-scaled rates in eV, time
//! in fs, transition dipoles in e·Å and cavity strengths in eV^½/nm.

use std::collections::HashSet;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Reduced Planck constant in eV·fs.
pub const HBAR_EV_FS: f64 = 0.658_211_956_9;

/// Conversion from e·Å to e·nm.
pub const ANGSTROM_TO_NM: f64 = 0.1;

/// How absorption intensities are reported. The absolute prefactor 2mₑ/(3ħ²)
/// is never evaluated; spectra are either normalized to a unit maximum or left
/// in arbitrary units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PrefactorMode {
    #[default]
    Normalized,
    ArbitraryUnits,
}

/// Cartesian 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub const fn x(v: f64) -> Self {
        Vec3([v, 0.0, 0.0])
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Unit vector along `self`, or `None` for the zero vector.
    pub fn unit(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

/// A single electronic excitation |g⟩ → |eᵢ⟩.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectronicLevel {
    pub label: String,
    /// Excitation energy ħωᵢ in eV.
    pub energy: f64,
    /// Transition dipole dᵢ in e·Å.
    pub dipole: Vec3,
}

impl ElectronicLevel {
    pub fn new(label: impl Into<String>, energy: f64, dipole: Vec3) -> Self {
        Self {
            label: label.into(),
            energy,
            dipole,
        }
    }
}

/// Excited electronic states, sorted by energy with unique labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElectronicLevels {
    levels: Vec<ElectronicLevel>,
}

impl ElectronicLevels {
    pub fn new(levels: Vec<ElectronicLevel>) -> Self {
        Self { levels }
    }

    pub fn as_slice(&self) -> &[ElectronicLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ElectronicLevel> {
        self.levels.iter()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|l| l.label == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.levels.iter().map(|l| l.label.clone()).collect()
    }

    /// Dipoles projected onto a polarization direction, in e·Å.
    pub fn projected_dipoles(&self, polarization: Vec3) -> Vec<f64> {
        self.levels
            .iter()
            .map(|l| l.dipole.dot(polarization))
            .collect()
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for (i, l) in self.levels.iter().enumerate() {
            let p = format!("levels[{i}]");
            if !l.energy.is_finite() {
                out.push(Violation::new(format!("{p}.energy"), "must be finite"));
            } else if l.energy <= 0.0 {
                out.push(Violation::new(
                    format!("{p}.energy"),
                    "energy must be positive",
                ));
            }
            if !l.dipole.is_finite() {
                out.push(Violation::new(format!("{p}.dipole"), "must be finite"));
            }
            if l.label.is_empty() {
                out.push(Violation::new(format!("{p}.label"), "label must not be empty"));
            } else if !seen.insert(l.label.as_str()) {
                out.push(Violation::new(
                    format!("{p}.label"),
                    format!("duplicate label '{}'", l.label),
                ));
            }
            if i > 0 && self.levels[i - 1].energy > l.energy {
                out.push(Violation::new(
                    format!("{p}.energy"),
                    "levels must be sorted by ascending energy",
                ));
            }
        }
        out
    }
}

impl FromIterator<ElectronicLevel> for ElectronicLevels {
    fn from_iter<T: IntoIterator<Item = ElectronicLevel>>(iter: T) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// A lossy single cavity mode represented by a Lorentzian-weighted continuum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityModel {
    /// Central mode energy ħω_c (eV).
    pub omega_c: f64,
    /// Total cavity strength λ_c (eV^½/nm).
    pub lambda_c: Vec3,
    /// Loss ħκ, the Lorentzian FWHM (eV).
    pub kappa: f64,
    /// Photon grid window [ω_min, ω_max] (eV).
    pub window: [f64; 2],
    /// Uniform mode spacing Δω (eV).
    pub spacing: f64,
}

impl CavityModel {
    /// Minimum number of grid points per loss linewidth.
    pub const POINTS_PER_LINEWIDTH: f64 = 10.0;

    /// Window of half-width `half_width` centred on `omega_c`.
    pub fn centered(
        omega_c: f64,
        lambda_c: Vec3,
        kappa: f64,
        half_width: f64,
        spacing: f64,
    ) -> Self {
        Self {
            omega_c,
            lambda_c,
            kappa,
            window: [omega_c - half_width, omega_c + half_width],
            spacing,
        }
    }

    /// Centred window holding exactly `modes` grid points.
    pub fn centered_with_modes(
        omega_c: f64,
        lambda_c: Vec3,
        kappa: f64,
        modes: usize,
        spacing: f64,
    ) -> Self {
        let half = 0.5 * (modes.saturating_sub(1)) as f64 * spacing;
        Self::centered(omega_c, lambda_c, kappa, half, spacing)
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let finite = [
            ("cavity.omega_c", self.omega_c),
            ("cavity.kappa", self.kappa),
            ("cavity.window[0]", self.window[0]),
            ("cavity.window[1]", self.window[1]),
            ("cavity.spacing", self.spacing),
        ];
        let mut all_finite = true;
        for (p, v) in finite {
            if !v.is_finite() {
                out.push(Violation::new(p, "must be finite"));
                all_finite = false;
            }
        }
        if !self.lambda_c.is_finite() {
            out.push(Violation::new("cavity.lambda_c", "must be finite"));
        }
        if !all_finite {
            return out;
        }
        if self.kappa <= 0.0 {
            out.push(Violation::new("cavity.kappa", "loss must be positive"));
        }
        if self.spacing <= 0.0 {
            out.push(Violation::new("cavity.spacing", "spacing must be positive"));
        }
        let [lo, hi] = self.window;
        if lo <= 0.0 {
            out.push(Violation::new(
                "cavity.window[0]",
                "window frequencies must be positive",
            ));
        }
        if !(lo < self.omega_c && self.omega_c < hi) {
            out.push(Violation::new(
                "cavity.omega_c",
                "window must contain the cavity frequency",
            ));
        }
        if self.kappa > 0.0
            && self.spacing > 0.0
            && self.spacing > self.kappa / Self::POINTS_PER_LINEWIDTH * (1.0 + 1e-9)
        {
            out.push(Violation::new(
                "cavity.spacing",
                "grid too coarse for loss width (need spacing <= kappa/10)",
            ));
        }
        out
    }
}

/// Checks every invariant of the pair and returns it unchanged, or all
/// violations found.
pub fn validate_inputs(
    levels: ElectronicLevels,
    cavity: CavityModel,
) -> Result<(ElectronicLevels, CavityModel)> {
    let mut v = levels.violations();
    v.extend(cavity.violations());
    if v.is_empty() {
        Ok((levels, cavity))
    } else {
        Err(Error::Validation(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benzene() -> ElectronicLevels {
        ElectronicLevels::new(vec![ElectronicLevel::new("e1", 6.93, Vec3::x(0.96))])
    }

    fn cavity() -> CavityModel {
        CavityModel::centered_with_modes(6.93, Vec3::x(0.008), 0.001, 5000, 1e-4)
    }

    fn messages(e: Error) -> Vec<String> {
        match e {
            Error::Validation(v) => v.into_iter().map(|x| x.to_string()).collect(),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn benzene_preset_is_accepted() {
        let (l, c) = validate_inputs(benzene(), cavity()).unwrap();
        assert_eq!(l, benzene());
        assert_eq!(c, cavity());
    }

    #[test]
    fn zero_energy_rejected() {
        let levels = ElectronicLevels::new(vec![ElectronicLevel::new("e1", 0.0, Vec3::x(1.0))]);
        let m = messages(validate_inputs(levels, cavity()).unwrap_err());
        assert!(m.iter().any(|s| s.contains("levels[0].energy")
            && s.contains("energy must be positive")));
    }

    #[test]
    fn coarse_grid_rejected() {
        let mut c = cavity();
        c.spacing = c.kappa;
        let m = messages(validate_inputs(benzene(), c).unwrap_err());
        assert!(m.iter().any(|s| s.contains("grid too coarse for loss width")));
    }

    #[test]
    fn spacing_at_guard_boundary_accepted() {
        let c = CavityModel {
            omega_c: 6.64,
            lambda_c: Vec3::x(0.43),
            kappa: 0.01,
            window: [6.35, 6.95],
            spacing: 1e-3,
        };
        assert!(validate_inputs(benzene(), c).is_ok());
    }

    #[test]
    fn non_finite_and_ordering_reported_together() {
        let levels = ElectronicLevels::new(vec![
            ElectronicLevel::new("a", 7.0, Vec3::x(1.0)),
            ElectronicLevel::new("a", 6.0, Vec3::new(f64::NAN, 0.0, 0.0)),
        ]);
        let mut c = cavity();
        c.kappa = f64::INFINITY;
        let m = messages(validate_inputs(levels, c).unwrap_err());
        assert!(m.iter().any(|s| s.contains("sorted")));
        assert!(m.iter().any(|s| s.contains("duplicate")));
        assert!(m.iter().any(|s| s.contains("levels[1].dipole")));
        assert!(m.iter().any(|s| s.contains("cavity.kappa")));
    }

    #[test]
    fn window_must_contain_center() {
        let mut c = cavity();
        c.window = [7.0, 7.5];
        let m = messages(validate_inputs(benzene(), c).unwrap_err());
        assert!(m.iter().any(|s| s.contains("contain the cavity frequency")));
    }

    #[test]
    fn validation_is_idempotent() {
        let once = validate_inputs(benzene(), cavity()).unwrap();
        let twice = validate_inputs(once.0.clone(), once.1.clone()).unwrap();
        assert_eq!(once, twice);
    }
}
