//! Time evolution in the single-excitation subspace by spectral decomposition,
//! c(t) = V·exp(−iΛt/ħ)·Vᵀ·c(0), with no time stepping.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::eigensolve::{eigensolve_structured, PolaritonModes};
use crate::error::{Error, Result};
use crate::hamiltonian::{coupling_rate, Complex64, CoupledSystem};
use crate::model::{CavityModel, ElectronicLevel, HBAR_EV_FS};
use crate::output;

/// Eigenstates per block when rebuilding photon amplitudes.
const CHUNK: usize = 256;
/// Upper bound on photon-amplitude entries held at once (modes × times).
const BLOCK_ENTRIES: usize = 4_000_000;
const MIN_FFT_LEN: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Pure electronic basis state selected by label.
    Level(String),
    /// Full (M+N) amplitude vector, electrons first.
    Amplitudes(Vec<Complex64>),
}

#[derive(Debug, Clone)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    /// `el_amplitudes[i][t]`, with the global phase of the mean energy removed.
    pub el_amplitudes: Vec<Vec<Complex64>>,
    pub el_populations: Vec<Vec<f64>>,
    pub ph_population_total: Vec<f64>,
    pub norm: Vec<f64>,
}

impl AmplitudeTrajectory {
    pub fn population(&self, state: usize) -> Result<&[f64]> {
        self.el_populations
            .get(state)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownState(format!("index {state}")))
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownState(label.to_string()))
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Rows `t_fs,pop_<label>...,pop_photon_total,norm` after `#` metadata lines.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(String, String)]) -> Result<()> {
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        write!(w, "t_fs")?;
        for l in &self.labels {
            write!(w, ",pop_{l}")?;
        }
        writeln!(w, ",pop_photon_total,norm")?;
        for t in 0..self.times.len() {
            write!(w, "{}", output::fmt(self.times[t]))?;
            for p in &self.el_populations {
                write!(w, ",{}", output::fmt(p[t]))?;
            }
            writeln!(
                w,
                ",{},{}",
                output::fmt(self.ph_population_total[t]),
                output::fmt(self.norm[t])
            )?;
        }
        Ok(())
    }
}

fn initial_vector(system: &CoupledSystem, initial: &InitialState) -> Result<Vec<Complex64>> {
    let dim = system.dim();
    match initial {
        InitialState::Level(label) => {
            let i = system
                .level_index(label)
                .ok_or_else(|| Error::UnknownState(label.clone()))?;
            let mut c = vec![Complex64::new(0.0, 0.0); dim];
            c[i] = Complex64::new(1.0, 0.0);
            Ok(c)
        }
        InitialState::Amplitudes(c) => {
            if c.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "initial amplitudes have length {}, system dimension is {dim}",
                    c.len()
                )));
            }
            let norm: f64 = c.iter().map(|a| a.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "initial state must be normalized (|c|^2 = {norm})"
                )));
            }
            Ok(c.clone())
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(
            "time grid must be finite and strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Evolution operator built from one eigendecomposition.
pub struct Propagator<'a> {
    system: &'a CoupledSystem,
    modes: &'a PolaritonModes,
    reference: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(system: &'a CoupledSystem, modes: &'a PolaritonModes) -> Self {
        let ev = modes.eigenvalues();
        let reference = ev.iter().sum::<f64>() / ev.len() as f64;
        Self {
            system,
            modes,
            reference,
        }
    }

    /// Eigenbasis coefficients a = Vᵀ·c.
    fn project(&self, c: &[Complex64]) -> Vec<Complex64> {
        let m = self.system.n_levels();
        let el = self.modes.el_components();
        let mut a: Vec<Complex64> = (0..self.modes.len())
            .map(|l| (0..m).map(|i| c[i] * el[(l, i)]).sum())
            .collect();
        let ph = &c[m..];
        if ph.iter().any(|z| z.norm_sqr() != 0.0) {
            for start in (0..a.len()).step_by(CHUNK) {
                let end = (start + CHUNK).min(a.len());
                let block = self.modes.photon_block(self.system, start..end);
                for (col, l) in (start..end).enumerate() {
                    a[l] += block
                        .column(col)
                        .iter()
                        .zip(ph)
                        .map(|(v, z)| z * *v)
                        .sum::<Complex64>();
                }
            }
        }
        a
    }

    fn phase(&self, l: usize, t: f64) -> Complex64 {
        let arg = -(self.modes.eigenvalues()[l] - self.reference) * t / HBAR_EV_FS;
        Complex64::from_polar(1.0, arg)
    }

    /// Full state vector at time t (negative t runs backwards).
    pub fn state_at(&self, c0: &[Complex64], t: f64) -> Vec<Complex64> {
        let a: Vec<Complex64> = self
            .project(c0)
            .iter()
            .enumerate()
            .map(|(l, &x)| x * self.phase(l, t))
            .collect();
        let m = self.system.n_levels();
        let el = self.modes.el_components();
        let mut out: Vec<Complex64> = (0..m)
            .map(|i| (0..a.len()).map(|l| a[l] * el[(l, i)]).sum())
            .collect();
        out.resize(self.system.dim(), Complex64::new(0.0, 0.0));
        for start in (0..a.len()).step_by(CHUNK) {
            let end = (start + CHUNK).min(a.len());
            let block = self.modes.photon_block(self.system, start..end);
            for (col, l) in (start..end).enumerate() {
                for (k, v) in block.column(col).iter().enumerate() {
                    out[m + k] += a[l] * *v;
                }
            }
        }
        out
    }

    pub fn trajectory(&self, initial: &InitialState, times: &[f64]) -> Result<AmplitudeTrajectory> {
        check_times(times)?;
        let c0 = initial_vector(self.system, initial)?;
        let a = self.project(&c0);
        let (m, n, nl, nt) = (
            self.system.n_levels(),
            self.system.n_modes(),
            self.modes.len(),
            times.len(),
        );
        let el = self.modes.el_components();

        let mut el_amp = vec![vec![Complex64::new(0.0, 0.0); nt]; m];
        for (ti, &t) in times.iter().enumerate() {
            for l in 0..nl {
                if a[l].norm_sqr() == 0.0 {
                    continue;
                }
                let x = a[l] * self.phase(l, t);
                for (i, amp) in el_amp.iter_mut().enumerate() {
                    amp[ti] += x * el[(l, i)];
                }
            }
        }

        // photon amplitudes, block by block in time: C_ph = P·(a ∘ phases)
        let active: Vec<usize> = (0..nl).filter(|&l| a[l].norm_sqr() != 0.0).collect();
        let workers = rayon::current_num_threads().max(1);
        let tb = (BLOCK_ENTRIES / (n.max(1) * workers))
            .max(1)
            .min(nt.div_ceil(workers).max(1));
        let ph_total: Vec<f64> = times
            .par_chunks(tb)
            .flat_map_iter(|ts| self.photon_totals(&a, &active, ts))
            .collect();

        let el_populations: Vec<Vec<f64>> = el_amp
            .iter()
            .map(|v| v.iter().map(|z| z.norm_sqr()).collect())
            .collect();
        let norm = (0..nt)
            .map(|t| el_populations.iter().map(|p| p[t]).sum::<f64>() + ph_total[t])
            .collect();
        Ok(AmplitudeTrajectory {
            times: times.to_vec(),
            labels: self.system.el_labels().to_vec(),
            el_amplitudes: el_amp,
            el_populations,
            ph_population_total: ph_total,
            norm,
        })
    }

    /// Σ_k |c_k(t)|² for each t in `ts`.
    fn photon_totals(&self, a: &[Complex64], active: &[usize], ts: &[f64]) -> Vec<f64> {
        let n = self.system.n_modes();
        let mut re = DMatrix::<f64>::zeros(n, ts.len());
        let mut im = DMatrix::<f64>::zeros(n, ts.len());
        for chunk in active.chunks(CHUNK) {
            let block = self.photon_columns(chunk);
            let mut pr = DMatrix::<f64>::zeros(chunk.len(), ts.len());
            let mut pi = DMatrix::<f64>::zeros(chunk.len(), ts.len());
            for (r, &l) in chunk.iter().enumerate() {
                for (c, &t) in ts.iter().enumerate() {
                    let x = a[l] * self.phase(l, t);
                    pr[(r, c)] = x.re;
                    pi[(r, c)] = x.im;
                }
            }
            re.gemm(1.0, &block, &pr, 1.0);
            im.gemm(1.0, &block, &pi, 1.0);
        }
        (0..ts.len())
            .map(|c| re.column(c).norm_squared() + im.column(c).norm_squared())
            .collect()
    }

    fn photon_columns(&self, ls: &[usize]) -> DMatrix<f64> {
        let (lo, hi) = (ls[0], ls[ls.len() - 1] + 1);
        let block = self.modes.photon_block(self.system, lo..hi);
        if hi - lo == ls.len() {
            return block;
        }
        DMatrix::from_fn(block.nrows(), ls.len(), |k, c| block[(k, ls[c] - lo)])
    }
}

/// Diagonalizes with the structured solver, then propagates.
pub fn propagate(
    system: &CoupledSystem,
    initial: &InitialState,
    times: &[f64],
) -> Result<AmplitudeTrajectory> {
    let modes = eigensolve_structured(system)?;
    propagate_with_modes(system, &modes, initial, times)
}

pub fn propagate_with_modes(
    system: &CoupledSystem,
    modes: &PolaritonModes,
    initial: &InitialState,
    times: &[f64],
) -> Result<AmplitudeTrajectory> {
    Propagator::new(system, modes).trajectory(initial, times)
}

pub fn time_grid(duration: f64, points: usize) -> Vec<f64> {
    let step = duration / (points.max(2) - 1) as f64;
    (0..points.max(2)).map(|j| j as f64 * step).collect()
}

/// Artificial revival time 2πħ/Δω of a uniform mode grid, in fs.
pub fn recurrence_time(spacing: f64) -> f64 {
    2.0 * PI * HBAR_EV_FS / spacing
}

/// Population decay rate (eV) of a level resonantly coupled to a Lorentzian mode,
/// 2·(κ/4 − Re√(κ²/16 − g²)), using the coupling at the cavity centre.
pub fn estimated_decay_rate(level: &ElectronicLevel, cavity: &CavityModel) -> f64 {
    let g = coupling_rate(cavity.omega_c, cavity.lambda_c, level.dipole).abs();
    let k4 = 0.25 * cavity.kappa;
    let disc = k4 * k4 - g * g;
    2.0 * (k4 - disc.max(0.0).sqrt())
}

/// min(5 decay times, 0.4·T_rec) in fs.
pub fn default_duration(level: &ElectronicLevel, cavity: &CavityModel) -> f64 {
    let cap = 0.4 * recurrence_time(cavity.spacing);
    let rate = estimated_decay_rate(level, cavity);
    if rate > 0.0 {
        (5.0 * HBAR_EV_FS / rate).min(cap)
    } else {
        cap
    }
}

/// ħΓ (eV) from a least-squares fit of ln P over times inside `window` (fs).
pub fn fit_decay_rate(
    traj: &AmplitudeTrajectory,
    state: usize,
    window: (f64, f64),
) -> Result<f64> {
    let pop = traj.population(state)?;
    let pts: Vec<(f64, f64)> = traj
        .times
        .iter()
        .zip(pop)
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(&t, &p)| (t, p))
        .collect();
    let not_exp = |reason: String| Error::NotExponential { state, reason };
    if pts.len() < 3 {
        return Err(not_exp(format!("only {} samples in window", pts.len())));
    }
    let (first, last) = (pts[0].1, pts[pts.len() - 1].1);
    let spread = pts.iter().map(|p| (p.1 - first).abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * first.max(f64::MIN_POSITIVE) {
        return Ok(0.0);
    }
    if let Some(w) = pts.windows(2).find(|w| w[1].1 > w[0].1 * (1.0 + 1e-4)) {
        return Err(not_exp(format!("population rises at t = {:.3} fs", w[1].0)));
    }
    if last > first / std::f64::consts::E {
        return Err(not_exp(format!(
            "population falls only from {first:.4} to {last:.4}"
        )));
    }
    if pts.iter().any(|p| p.1 <= 0.0) {
        return Err(not_exp("population reaches zero".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx * HBAR_EV_FS)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RabiEstimate {
    /// Population oscillation frequency ħω_R in eV.
    Oscillating { hbar_omega: f64 },
    Overdamped,
}

impl RabiEstimate {
    pub fn value(self) -> Option<f64> {
        match self {
            RabiEstimate::Oscillating { hbar_omega } => Some(hbar_omega),
            RabiEstimate::Overdamped => None,
        }
    }
}

/// Dominant nonzero frequency of P_i(t) from a tapered, zero-padded FFT.
pub fn extract_rabi_frequency(traj: &AmplitudeTrajectory, state: usize) -> Result<RabiEstimate> {
    let pop = traj.population(state)?;
    let t = &traj.times;
    if t.len() < 4 {
        return Err(Error::InvalidArgument("trajectory too short for a spectrum".into()));
    }
    let dt = t[1] - t[0];
    if t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt) {
        return Err(Error::InvalidArgument("Rabi analysis needs a uniform time grid".into()));
    }
    let span = t[t.len() - 1];
    let len = (8 * pop.len()).next_power_of_two().max(MIN_FFT_LEN);
    let taper: Vec<f64> = t.iter().map(|&tt| (PI * tt / span).sin().powi(2)).collect();
    let mean = pop.iter().zip(&taper).map(|(p, w)| p * w).sum::<f64>() / taper.iter().sum::<f64>();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(len);
    let spectrum = |offset: f64| {
        let mut buf: Vec<Complex<f64>> = pop
            .iter()
            .zip(&taper)
            .map(|(&p, &w)| Complex::new((p - offset) * w, 0.0))
            .collect();
        buf.resize(len, Complex::new(0.0, 0.0));
        fft.process(&mut buf);
        buf[..len / 2].iter().map(|z| z.norm()).collect::<Vec<f64>>()
    };
    // DC magnitude of the raw signal sets the noise floor; peaks come from the
    // mean-free signal so the zero-frequency lobe does not pull them
    let raw = spectrum(0.0);
    let floor = 0.05 * raw[0];
    // the decay envelope adds a zero-frequency lobe; oscillations lie past its first minimum
    let Some(edge) = (1..raw.len() - 1).find(|&j| raw[j] <= raw[j - 1] && raw[j] < raw[j + 1]) else {
        return Ok(RabiEstimate::Overdamped);
    };
    let mag = spectrum(mean);

    let best = (edge.max(1)..mag.len() - 1)
        .filter(|&j| mag[j] > mag[j - 1] && mag[j] >= mag[j + 1])
        .max_by(|&a, &b| mag[a].total_cmp(&mag[b]));
    let Some(j) = best else {
        return Ok(RabiEstimate::Overdamped);
    };
    let left_min = mag[..=j].iter().copied().fold(f64::INFINITY, f64::min);
    let right_min = mag[j..].iter().copied().fold(f64::INFINITY, f64::min);
    if mag[j] - left_min.max(right_min) < floor {
        return Ok(RabiEstimate::Overdamped);
    }
    let (y0, y1, y2) = (mag[j - 1], mag[j], mag[j + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom != 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
    let freq = (j as f64 + shift) / (len as f64 * dt);
    Ok(RabiEstimate::Oscillating {
        hbar_omega: 2.0 * PI * freq * HBAR_EV_FS,
    })
}
