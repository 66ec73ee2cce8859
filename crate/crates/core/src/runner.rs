//! End-to-end runs: build the system, solve, write CSV results and a manifest.
//!
//! Every run directory holds `manifest.json`, a complete config (with the
//! resolved probe window and duration filled in) that reproduces the run
//! byte for byte when fed back as `--config`.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use crate::config::{RunConfig, RunKind, SolverKind};
use crate::discretize::{build_photon_grid, transform_grid, GridProvenance, PhotonGrid};
use crate::dynamics::{
    default_duration, extract_rabi_frequency, fit_decay_rate, recurrence_time, time_grid,
    InitialState, Propagator,
};
use crate::eigensolve::{eigensolve_dense, eigensolve_structured, PolaritonModes};
use crate::error::{Error, Result};
use crate::hamiltonian::{assemble, CoupledSystem};
use crate::model::{PrefactorMode, Vec3};
use crate::observables::{
    absorption_spectrum, dip_depth, find_peaks, resolvent_spectrum, uniform_grid,
    weight_spectrum, Spectrum,
};
use crate::output::{self, fmt, fmt_opt, Meta};

/// Half-width of the window searched for a dip around `dip_at` (eV).
pub const DIP_HALF_WIDTH: f64 = 0.005;
/// Peaks below this fraction of the maximum prominence are ignored in summaries.
pub const PEAK_PROMINENCE: f64 = 0.01;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const EIGENSTATES_FILE: &str = "eigenstates.csv";
pub const WEIGHT_SPECTRA_FILE: &str = "weight_spectra.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Scalar results of one run, as reported in sweep summaries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub photon_modes: usize,
    /// Peak frequencies of the absorption spectrum, ascending (eV).
    pub peaks: Vec<f64>,
    /// Distance between the two highest peaks (eV).
    pub splitting: Option<f64>,
    pub dip_depth: Option<f64>,
    /// Fitted population decay ħΓ of the initial state (eV).
    pub decay_rate: Option<f64>,
    pub rabi: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: RunSummary,
    /// The config as written to the manifest.
    pub resolved: RunConfig,
}

/// Photon grid of the config, re-sampled when a grid transform is set.
pub fn photon_grid(config: &RunConfig) -> Result<PhotonGrid> {
    let grid = build_photon_grid(&config.cavity)?;
    match &config.run.grid_transform {
        None => Ok(grid),
        Some(t) => {
            let spacing = t.mapping.spacing_for_modes(&grid, t.modes)?;
            transform_grid(&grid, &t.mapping, spacing)
        }
    }
}

pub fn build_system(config: &RunConfig) -> Result<CoupledSystem> {
    assemble(&config.levels, &photon_grid(config)?)
}

/// Diagonalizes with the configured solver; the resolvent path has no eigenstates.
pub fn solve(config: &RunConfig, system: &CoupledSystem) -> Result<PolaritonModes> {
    match config.run.solver {
        SolverKind::Structured => eigensolve_structured(system),
        SolverKind::Dense => eigensolve_dense(system),
        SolverKind::Resolvent => Err(Error::InvalidArgument(
            "the resolvent solver does not produce eigenstates".into(),
        )),
    }
}

/// Fills in the probe window and, for dynamics, the propagation time.
pub fn resolve(config: &RunConfig) -> Result<RunConfig> {
    let mut c = config.clone();
    c.run.omega_range.get_or_insert(c.cavity.window);
    if c.run.kind == RunKind::Dynamics {
        let level = start_level(&c)?;
        let d = *c
            .run
            .duration_fs
            .get_or_insert_with(|| default_duration(&c.levels.as_slice()[level], &c.cavity));
        let t_rec = recurrence_time(c.cavity.spacing);
        if c.run.grid_transform.is_none() && d >= 0.5 * t_rec {
            return Err(Error::InvalidArgument(format!(
                "duration {d} fs reaches half the recurrence time {t_rec:.1} fs of the uniform grid"
            )));
        }
    }
    Ok(c)
}

fn start_level(c: &RunConfig) -> Result<usize> {
    let label = c
        .run
        .initial_state
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("dynamics needs an initial state".into()))?;
    c.levels
        .index_of(label)
        .ok_or_else(|| Error::UnknownState(label.to_string()))
}

fn probe_grid(c: &RunConfig) -> Vec<f64> {
    let [lo, hi] = c.run.omega_range.unwrap_or(c.cavity.window);
    uniform_grid(lo, hi, c.run.points)
}

fn polarization(c: &RunConfig) -> Vec3 {
    c.run.polarization
}

/// Absorption spectrum of a config with its configured solver.
pub fn spectrum(config: &RunConfig, system: &CoupledSystem, modes: Option<&PolaritonModes>) -> Result<Spectrum> {
    let grid = probe_grid(config);
    let s = match (config.run.solver, modes) {
        (SolverKind::Resolvent, _) => {
            resolvent_spectrum(system, &config.levels, config.run.gamma, &grid, polarization(config))?
        }
        (_, Some(m)) => absorption_spectrum(m, &config.levels, config.run.gamma, &grid, polarization(config))?,
        (_, None) => {
            let m = solve(config, system)?;
            absorption_spectrum(&m, &config.levels, config.run.gamma, &grid, polarization(config))?
        }
    };
    Ok(apply_prefactor(s, config.run.prefactor))
}

fn apply_prefactor(s: Spectrum, mode: PrefactorMode) -> Spectrum {
    match mode {
        PrefactorMode::Normalized => s,
        PrefactorMode::ArbitraryUnits => Spectrum {
            intensity: s.raw_values(),
            scale_factor: 1.0,
            normalized: false,
            ..s
        },
    }
}

fn spectrum_summary(s: &Spectrum, dip_at: Option<f64>) -> RunSummary {
    let peaks = find_peaks(s, PEAK_PROMINENCE);
    let mut by_height = peaks.clone();
    by_height.sort_by(|a, b| b.height.total_cmp(&a.height));
    RunSummary {
        peaks: peaks.iter().map(|p| p.omega).collect(),
        splitting: (by_height.len() >= 2).then(|| (by_height[0].omega - by_height[1].omega).abs()),
        dip_depth: dip_at.map(|w| dip_depth(s, w, DIP_HALF_WIDTH)),
        ..RunSummary::default()
    }
}

fn meta(c: &RunConfig, modes: usize) -> Meta {
    let kind = serde_json::to_value(c.run.kind).expect("kind serializes");
    let solver = serde_json::to_value(c.run.solver).expect("solver serializes");
    let mut m = vec![
        ("generator".to_string(), format!("polariton {}", env!("CARGO_PKG_VERSION"))),
        ("kind".into(), kind.as_str().unwrap_or_default().to_string()),
        ("solver".into(), solver.as_str().unwrap_or_default().to_string()),
        ("levels".into(), c.levels.labels().join(";")),
        ("omega_c_eV".into(), fmt(c.cavity.omega_c)),
        ("lambda_c".into(), vec3(c.cavity.lambda_c)),
        ("kappa_eV".into(), fmt(c.cavity.kappa)),
        ("spacing_eV".into(), fmt(c.cavity.spacing)),
        ("photon_modes".into(), modes.to_string()),
        ("gamma_eV".into(), fmt(c.run.gamma)),
    ];
    if let Some(d) = c.run.duration_fs {
        m.push(("duration_fs".into(), fmt(d)));
    }
    m
}

fn vec3(v: Vec3) -> String {
    v.0.iter().map(|x| fmt(*x)).collect::<Vec<_>>().join(";")
}

fn write_weight_spectra(path: &Path, curves: &[Spectrum], labels: &[String], meta: &Meta) -> Result<()> {
    output::write_file(path, |w| {
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        for (l, s) in labels.iter().zip(curves) {
            writeln!(w, "# scale_{l}={}", fmt(s.scale_factor))?;
        }
        write!(w, "omega_eV")?;
        for l in labels {
            write!(w, ",W_{l}")?;
        }
        writeln!(w)?;
        for j in 0..curves.first().map_or(0, |s| s.omega.len()) {
            write!(w, "{}", fmt(curves[0].omega[j]))?;
            for s in curves {
                write!(w, ",{}", fmt(s.intensity[j]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

fn write_manifest(path: &Path, c: &RunConfig, grid: &GridProvenance, modes: usize, files: &[PathBuf]) -> Result<()> {
    let mut doc = c.to_json_value();
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    doc["manifest"] = json!({
        "generator": "polariton",
        "version": env!("CARGO_PKG_VERSION"),
        "photon_modes": modes,
        "photon_grid": grid.tag(),
        "hbar_eV_fs": crate::model::HBAR_EV_FS,
        "files": names,
    });
    output::write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, &doc).map_err(std::io::Error::from)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Runs `config` and writes its results into `out`, creating the directory.
pub fn execute(config: &RunConfig, out: &Path) -> Result<RunOutcome> {
    let c = resolve(config)?;
    std::fs::create_dir_all(out)?;
    let grid = photon_grid(&c)?;
    let system = assemble(&c.levels, &grid)?;
    let meta = meta(&c, grid.len());
    let labels = c.levels.labels();
    let mut files = Vec::new();
    let modes = match c.run.solver {
        SolverKind::Resolvent => None,
        _ => Some(solve(&c, &system)?),
    };

    let mut summary = RunSummary::default();
    if c.run.kind != RunKind::Dynamics {
        let s = spectrum(&c, &system, modes.as_ref())?;
        let spectrum_path = out.join(SPECTRUM_FILE);
        output::write_file(&spectrum_path, |w| s.write_csv(w, &meta))?;
        files.push(spectrum_path);
        summary = spectrum_summary(&s, c.run.dip_at);
    }
    summary.photon_modes = grid.len();

    match (c.run.kind, &modes) {
        (RunKind::Spectrum, _) => {}
        (RunKind::Weights, Some(m)) => {
            let table_path = out.join(EIGENSTATES_FILE);
            output::write_file(&table_path, |w| m.weights().write_csv(w, &labels))?;
            files.push(table_path);
            let grid = probe_grid(&c);
            let curves = (0..labels.len())
                .map(|i| weight_spectrum(m, i, c.run.gamma, &grid))
                .collect::<Result<Vec<_>>>()?;
            let path = out.join(WEIGHT_SPECTRA_FILE);
            write_weight_spectra(&path, &curves, &labels, &meta)?;
            files.push(path);
        }
        (RunKind::Dynamics, Some(m)) => {
            let level = start_level(&c)?;
            let duration = c.run.duration_fs.expect("resolved");
            let times = time_grid(duration, c.run.time_points);
            let traj = Propagator::new(&system, m)
                .trajectory(&InitialState::Level(labels[level].clone()), &times)?;
            let path = out.join(TRAJECTORY_FILE);
            output::write_file(&path, |w| traj.write_csv(w, &meta))?;
            files.push(path);
            summary.decay_rate = fit_decay_rate(&traj, level, (0.0, duration)).ok();
            summary.rabi = extract_rabi_frequency(&traj, level).ok().and_then(|r| r.value());
        }
        (_, None) => unreachable!("validation keeps the resolvent solver to spectra"),
    }

    let manifest_path = out.join(MANIFEST_FILE);
    files.push(manifest_path.clone());
    write_manifest(&manifest_path, &c, grid.provenance(), grid.len(), &files)?;
    Ok(RunOutcome {
        dir: out.to_path_buf(),
        files,
        summary,
        resolved: c,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// Magnitude of λ_c, keeping its direction.
    LambdaC,
    Kappa,
    Gamma,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::LambdaC => "lambda_c",
            SweepParameter::Kappa => "kappa",
            SweepParameter::Gamma => "gamma",
        }
    }

    /// Copy of `config` with this parameter set to `value`, revalidated.
    pub fn apply(self, config: &RunConfig, value: f64) -> Result<RunConfig> {
        let mut c = config.clone();
        match self {
            SweepParameter::LambdaC => {
                let dir = c.cavity.lambda_c.unit().unwrap_or(Vec3::x(1.0));
                c.cavity.lambda_c = dir * value;
            }
            SweepParameter::Kappa => c.cavity.kappa = value,
            SweepParameter::Gamma => c.run.gamma = value,
        }
        c.validate()
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda_c" => Ok(SweepParameter::LambdaC),
            "kappa" => Ok(SweepParameter::Kappa),
            "gamma" => Ok(SweepParameter::Gamma),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep parameter '{other}' (expected lambda_c, kappa or gamma)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub members: Vec<RunOutcome>,
    pub summary_path: PathBuf,
}

pub fn member_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("member_{index:03}"))
}

/// One run per value in `member_NNN/` directories, executed in parallel, then
/// `summary.csv` in `out`.
pub fn sweep(base: &RunConfig, parameter: SweepParameter, values: &[f64], out: &Path) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "sweep values must be finite and positive, got {v}"
        )));
    }
    let configs = values
        .iter()
        .map(|&v| parameter.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out)?;
    let members = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| execute(c, &member_dir(out, i)))
        .collect::<Result<Vec<_>>>()?;
    let summary_path = out.join(SUMMARY_FILE);
    write_summary(&summary_path, parameter, values, &members)?;
    Ok(SweepOutcome {
        members,
        summary_path,
    })
}

fn write_summary(path: &Path, parameter: SweepParameter, values: &[f64], members: &[RunOutcome]) -> Result<()> {
    output::write_file(path, |w| {
        writeln!(w, "# parameter={}", parameter.name())?;
        writeln!(
            w,
            "index,{},photon_modes,peak_positions_eV,splitting_eV,dip_depth,decay_rate_eV,rabi_eV",
            parameter.name()
        )?;
        for (i, (v, m)) in values.iter().zip(members).enumerate() {
            let s = &m.summary;
            let peaks = s.peaks.iter().map(|p| fmt(*p)).collect::<Vec<_>>().join(";");
            writeln!(
                w,
                "{i},{},{},{peaks},{},{},{},{}",
                fmt(*v),
                s.photon_modes,
                fmt_opt(s.splitting),
                fmt_opt(s.dip_depth),
                fmt_opt(s.decay_rate),
                fmt_opt(s.rabi)
            )?;
        }
        Ok(())
    })
}
