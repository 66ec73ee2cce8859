//! Absorption and weight-resolved spectra, plus the peak analysis used by sweeps.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::eigensolve::PolaritonModes;
use crate::error::{Error, Result};
use crate::hamiltonian::{Complex64, CoupledSystem};
use crate::model::{ElectronicLevels, Vec3};
use crate::output;

pub const DEFAULT_POINTS: usize = 3000;

#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    TotalAbsorption,
    Weight { state: usize },
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub intensity: Vec<f64>,
    /// Multiplying `intensity` by this restores raw values.
    pub scale_factor: f64,
    pub normalized: bool,
    pub channel: Channel,
    pub gamma: f64,
}

impl Spectrum {
    fn raw(omega: Vec<f64>, intensity: Vec<f64>, channel: Channel, gamma: f64) -> Self {
        Self {
            omega,
            intensity,
            scale_factor: 1.0,
            normalized: false,
            channel,
            gamma,
        }
    }

    pub fn raw_values(&self) -> Vec<f64> {
        self.intensity.iter().map(|v| v * self.scale_factor).collect()
    }

    pub fn max_index(&self) -> usize {
        argmax(&self.intensity, 0..self.intensity.len())
    }

    /// Rows `omega_eV,intensity_norm,scale_factor`, preceded by `#` metadata lines.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(String, String)]) -> Result<()> {
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "omega_eV,intensity_norm,scale_factor")?;
        let sf = output::fmt(self.scale_factor);
        for (o, i) in self.omega.iter().zip(&self.intensity) {
            writeln!(w, "{},{},{}", output::fmt(*o), output::fmt(*i), sf)?;
        }
        Ok(())
    }
}

/// Unit-area Lorentzian of full width Γ.
pub fn lorentzian(x: f64, gamma: f64) -> f64 {
    gamma / (2.0 * std::f64::consts::PI * (x * x + 0.25 * gamma * gamma))
}

pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points).map(|j| lo + step * j as f64).collect()
        }
    }
}

fn check_probe(gamma: f64, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty frequency grid".into()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "broadening must be positive, got {gamma}"
        )));
    }
    if grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidArgument("non-finite frequency in grid".into()));
    }
    Ok(())
}

/// Lorentzian-broadened stick spectrum Σ_l L_Γ(ω − ω_l)·h_l.
fn broadened(centers: &[f64], heights: &[f64], gamma: f64, grid: &[f64]) -> Vec<f64> {
    let sticks: Vec<(f64, f64)> = centers
        .iter()
        .zip(heights)
        .filter(|(_, &h)| h != 0.0)
        .map(|(&c, &h)| (c, h))
        .collect();
    grid.par_iter()
        .map(|&w| sticks.iter().map(|&(c, h)| h * lorentzian(w - c, gamma)).sum())
        .collect()
}

/// A(ω) = Σ_l L_Γ(ω − ω_l)·ω_l·|Σ_i C_il (d_i·ê)|², normalized to unit peak.
pub fn absorption_spectrum(
    modes: &PolaritonModes,
    levels: &ElectronicLevels,
    gamma: f64,
    grid: &[f64],
    polarization: Vec3,
) -> Result<Spectrum> {
    check_probe(gamma, grid)?;
    let proj = projected(levels, polarization)?;
    let amps = modes.bright_amplitudes(&proj);
    let heights: Vec<f64> = amps
        .iter()
        .zip(modes.eigenvalues())
        .map(|(a, w)| w * a * a)
        .collect();
    let values = broadened(modes.eigenvalues(), &heights, gamma, grid);
    normalize(Spectrum::raw(grid.to_vec(), values, Channel::TotalAbsorption, gamma))
}

/// curve_i(ω) = Σ_l L_Γ(ω − ω_l)·W_il, normalized to unit peak.
pub fn weight_spectrum(
    modes: &PolaritonModes,
    state: usize,
    gamma: f64,
    grid: &[f64],
) -> Result<Spectrum> {
    check_probe(gamma, grid)?;
    if state >= modes.n_levels() {
        return Err(Error::UnknownState(format!("index {state}")));
    }
    let heights: Vec<f64> = modes
        .el_components()
        .column(state)
        .iter()
        .map(|c| c * c)
        .collect();
    let values = broadened(modes.eigenvalues(), &heights, gamma, grid);
    normalize(Spectrum::raw(grid.to_vec(), values, Channel::Weight { state }, gamma))
}

/// −(ω/π)·Im[pᵀ (ω + iΓ/2 − E − Σ(ω + iΓ/2))⁻¹ p] without diagonalizing.
pub fn resolvent_spectrum(
    system: &CoupledSystem,
    levels: &ElectronicLevels,
    gamma: f64,
    grid: &[f64],
    polarization: Vec3,
) -> Result<Spectrum> {
    check_probe(gamma, grid)?;
    let proj = projected(levels, polarization)?;
    if proj.len() != system.n_levels() {
        return Err(Error::InvalidArgument(format!(
            "{} levels supplied for a system with {}",
            proj.len(),
            system.n_levels()
        )));
    }
    let d = DVector::from_iterator(proj.len(), proj.iter().map(|&x| Complex64::new(x, 0.0)));
    let values = grid
        .par_iter()
        .map(|&w| {
            let z = Complex64::new(w, 0.5 * gamma);
            let mut a = system.self_energy(z)?.map(|s| -s);
            for (i, &e) in system.el_energies().iter().enumerate() {
                a[(i, i)] += z - e;
            }
            let x = a.lu().solve(&d).ok_or(Error::SingularResolvent { omega: w })?;
            let g = d.dot(&x);
            Ok((-w / std::f64::consts::PI * g.im).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    normalize(Spectrum::raw(grid.to_vec(), values, Channel::TotalAbsorption, gamma))
}

fn projected(levels: &ElectronicLevels, polarization: Vec3) -> Result<Vec<f64>> {
    let pol = polarization
        .unit()
        .ok_or_else(|| Error::InvalidArgument("polarization must be a nonzero vector".into()))?;
    Ok(levels.projected_dipoles(pol))
}

/// Rescales to unit maximum; the stored scale factor accumulates.
pub fn normalize(spectrum: Spectrum) -> Result<Spectrum> {
    let peak = spectrum.intensity.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::InvalidArgument(
            "cannot normalize an all-zero spectrum".into(),
        ));
    }
    Ok(Spectrum {
        intensity: spectrum.intensity.iter().map(|v| v / peak).collect(),
        scale_factor: spectrum.scale_factor * peak,
        normalized: true,
        ..spectrum
    })
}

/// Largest absolute difference between two spectra on the same grid, relative to the
/// larger of the two peaks (raw values).
pub fn linf_relative(a: &Spectrum, b: &Spectrum) -> f64 {
    let (ra, rb) = (a.raw_values(), b.raw_values());
    let peak = ra.iter().chain(&rb).copied().fold(0.0, f64::max);
    ra.iter()
        .zip(&rb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / peak
}

/// ∫ A(ω)/ω dω by the trapezoid rule over raw intensities.
pub fn oscillator_strength(spectrum: &Spectrum) -> f64 {
    let raw = spectrum.raw_values();
    spectrum
        .omega
        .windows(2)
        .zip(raw.windows(2))
        .map(|(w, a)| 0.5 * (w[1] - w[0]) * (a[0] / w[0] + a[1] / w[1]))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub omega: f64,
    pub height: f64,
    pub prominence: f64,
}

fn argmax(v: &[f64], range: std::ops::Range<usize>) -> usize {
    range
        .clone()
        .fold(range.start, |best, j| if v[j] > v[best] { j } else { best })
}

fn argmin(v: &[f64], range: std::ops::Range<usize>) -> usize {
    range
        .clone()
        .fold(range.start, |best, j| if v[j] < v[best] { j } else { best })
}

/// Local maxima with topographic prominence at least `min_prominence` times the
/// spectrum maximum, in ascending frequency.
pub fn find_peaks(spectrum: &Spectrum, min_prominence: f64) -> Vec<Peak> {
    let y = &spectrum.intensity;
    let n = y.len();
    let top = y.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for j in 0..n {
        let left_ok = j == 0 || y[j] > y[j - 1];
        let right_ok = j + 1 == n || y[j] >= y[j + 1];
        if !(left_ok && right_ok) || (j == 0 && n > 1 && y[1] >= y[0]) {
            continue;
        }
        // walk outward until a higher point; the base is the higher of the two minima
        let mut lmin = y[j];
        let mut k = j;
        while k > 0 && y[k - 1] <= y[j] {
            k -= 1;
            lmin = lmin.min(y[k]);
        }
        if k == 0 && j != 0 {
            lmin = lmin.min(y[0]);
        }
        let mut rmin = y[j];
        let mut k = j;
        while k + 1 < n && y[k + 1] <= y[j] {
            k += 1;
            rmin = rmin.min(y[k]);
        }
        let prominence = y[j] - lmin.max(rmin);
        if prominence >= min_prominence * top {
            out.push(Peak {
                index: j,
                omega: spectrum.omega[j],
                height: y[j],
                prominence,
            });
        }
    }
    out
}

/// Full width at half maximum of the peak at `index`, interpolating linearly.
pub fn fwhm(spectrum: &Spectrum, index: usize) -> Option<f64> {
    let (x, y) = (&spectrum.omega, &spectrum.intensity);
    let half = 0.5 * y[index];
    let left = (1..=index).rev().find(|&j| y[j - 1] < half).map(|j| {
        let t = (half - y[j - 1]) / (y[j] - y[j - 1]);
        x[j - 1] + t * (x[j] - x[j - 1])
    })?;
    let right = (index..y.len() - 1).find(|&j| y[j + 1] < half).map(|j| {
        let t = (y[j] - half) / (y[j] - y[j + 1]);
        x[j] + t * (x[j + 1] - x[j])
    })?;
    Some(right - left)
}

/// Relative depth of a valley near `at`: the largest 1 − A(ω)/B(ω) for ω within
/// `half_width`, where B is the straight line between the highest points of A on
/// [ω − h, ω] and [ω, ω + h]. Zero when there is no valley.
pub fn dip_depth(spectrum: &Spectrum, at: f64, half_width: f64) -> f64 {
    let (x, y) = (&spectrum.omega, &spectrum.intensity);
    let idx = |w: f64| x.partition_point(|&v| v < w);
    let (lo, hi) = (idx(at - half_width), idx(at + half_width).min(x.len()));
    (lo..hi)
        .filter_map(|j| {
            let l = argmax(y, idx(x[j] - half_width)..j + 1);
            let r = argmax(y, j..idx(x[j] + half_width).min(x.len()).max(j + 1));
            if l == j || r == j {
                return None;
            }
            let t = (x[j] - x[l]) / (x[r] - x[l]);
            let base = y[l] + t * (y[r] - y[l]);
            (base > 0.0).then(|| 1.0 - y[j] / base)
        })
        .fold(0.0, f64::max)
}

/// Σ w_l^el over eigenstates inside each peak's basin; basins split at the lowest
/// point between neighbouring peaks.
pub fn peak_el_weights(spectrum: &Spectrum, peaks: &[Peak], modes: &PolaritonModes) -> Vec<f64> {
    let x = &spectrum.omega;
    let mut edges = vec![f64::NEG_INFINITY];
    for w in peaks.windows(2) {
        let j = argmin(&spectrum.intensity, w[0].index..w[1].index + 1);
        edges.push(x[j]);
    }
    edges.push(f64::INFINITY);
    let (lo, hi) = (x[0], x[x.len() - 1]);
    edges
        .windows(2)
        .map(|e| {
            modes
                .eigenvalues()
                .iter()
                .zip(modes.el_weight())
                .filter(|(&v, _)| v >= e[0].max(lo) && v < e[1].min(hi))
                .map(|(_, w)| w)
                .sum()
        })
        .collect()
}
