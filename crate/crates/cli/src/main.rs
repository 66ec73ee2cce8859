//! `polariton`: spectra, weights, dynamics and parameter sweeps from presets or JSON configs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polariton::config::{RunConfig, RunKind, SolverKind};
use polariton::runner::{self, RunOutcome, SweepParameter};
use polariton::{presets, Error, Result};

const OUT_ENV: &str = "POLARITON_OUT_DIR";
const DEFAULT_OUT: &str = "polariton-out";

#[derive(Parser)]
#[command(name = "polariton", version, about = "Molecular polaritons in a lossy cavity", long_about = None)]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Absorption spectrum
    Spectrum(RunArgs),
    /// Eigenstate weights and per-state weight spectra
    Weights(RunArgs),
    /// Population dynamics from a single electronic level
    Dynamics(DynamicsArgs),
    /// One run per parameter value plus a summary table
    Sweep(SweepArgs),
    /// Built-in parameter sets
    #[command(subcommand)]
    Preset(PresetCommand),
}

#[derive(Subcommand)]
enum PresetCommand {
    /// List preset ids
    List,
    /// Print a preset as a JSON config
    Show { id: String },
    /// Run a preset with its own run kind
    Run {
        id: String,
        #[arg(long, env = OUT_ENV)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Source {
    /// JSON config with levels, cavity and run sections
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset id
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    /// Output directory
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_solver)]
    solver: Option<SolverKind>,
    /// Spectral broadening ħΓ in eV
    #[arg(long)]
    gamma: Option<f64>,
    /// Report the dip depth near this frequency (eV)
    #[arg(long)]
    dip_at: Option<f64>,
}

#[derive(Args)]
struct DynamicsArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Starting electronic level label
    #[arg(long)]
    initial_state: Option<String>,
    /// Propagation time in fs
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// lambda_c, kappa or gamma
    #[arg(long, value_parser = parse_parameter)]
    parameter: SweepParameter,
    /// Comma-separated values
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

fn parse_solver(s: &str) -> std::result::Result<SolverKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_parameter(s: &str) -> std::result::Result<SweepParameter, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(source: &Source) -> Result<RunConfig> {
    match (&source.config, &source.preset) {
        (Some(path), _) => RunConfig::from_path(path),
        (None, Some(id)) => Ok(presets::get(id)?.config),
        (None, None) => Err(Error::InvalidArgument("either --config or --preset is required".into())),
    }
}

fn configure(args: &RunArgs, kind: Option<RunKind>) -> Result<RunConfig> {
    let mut c = load(&args.source)?;
    if let Some(k) = kind {
        c.run.kind = k;
    }
    if let Some(s) = args.solver {
        c.run.solver = s;
    }
    if let Some(g) = args.gamma {
        c.run.gamma = g;
    }
    if args.dip_at.is_some() {
        c.run.dip_at = args.dip_at;
    }
    Ok(c)
}

fn out_dir(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn report(o: &RunOutcome) -> Result<()> {
    let mut w = std::io::stdout().lock();
    for f in &o.files {
        writeln!(w, "wrote {}", f.display())?;
    }
    let s = &o.summary;
    let peaks: Vec<String> = s.peaks.iter().map(|p| format!("{p:.5}")).collect();
    writeln!(w, "photon modes: {}", s.photon_modes)?;
    if !peaks.is_empty() {
        writeln!(w, "peaks (eV): {}", peaks.join(" "))?;
    }
    if let Some(v) = s.splitting {
        writeln!(w, "splitting (eV): {v:.6}")?;
    }
    if let Some(v) = s.dip_depth {
        writeln!(w, "dip depth: {v:.4}")?;
    }
    if let Some(v) = s.decay_rate {
        writeln!(w, "decay rate (eV): {v:.6e}")?;
    }
    if let Some(v) = s.rabi {
        writeln!(w, "Rabi frequency (eV): {v:.6}")?;
    }
    Ok(())
}

fn run_one(c: RunConfig, out: &Path) -> Result<()> {
    let o = runner::execute(&c.validate()?, out)?;
    report(&o)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Spectrum(a) => run_one(configure(&a, Some(RunKind::Spectrum))?, &out_dir(&a.out)),
        Command::Weights(a) => run_one(configure(&a, Some(RunKind::Weights))?, &out_dir(&a.out)),
        Command::Dynamics(a) => {
            let mut c = configure(&a.run, Some(RunKind::Dynamics))?;
            if let Some(s) = a.initial_state {
                c.run.initial_state = Some(s);
            }
            if a.duration.is_some() {
                c.run.duration_fs = a.duration;
            }
            run_one(c, &out_dir(&a.run.out))
        }
        Command::Sweep(a) => {
            let c = configure(&a.run, None)?.validate()?;
            let out = out_dir(&a.run.out);
            let s = runner::sweep(&c, a.parameter, &a.values, &out)?;
            let mut w = std::io::stdout().lock();
            for m in &s.members {
                writeln!(w, "member {}: {} files", m.dir.display(), m.files.len())?;
            }
            writeln!(w, "wrote {}", s.summary_path.display())?;
            Ok(())
        }
        Command::Preset(PresetCommand::List) => {
            let mut w = std::io::stdout().lock();
            for p in presets::all() {
                writeln!(w, "{:<14} {}", p.id, p.description)?;
            }
            Ok(())
        }
        Command::Preset(PresetCommand::Show { id }) => {
            let p = presets::get(&id)?;
            let mut w = std::io::stdout().lock();
            let text = serde_json::to_string_pretty(&p.config.to_json_value())
                .map_err(std::io::Error::from)?;
            writeln!(w, "{text}")?;
            Ok(())
        }
        Command::Preset(PresetCommand::Run { id, out }) => {
            run_one(presets::get(&id)?.config, &out_dir(&out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe (e.g. `| head`) is not a failure
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
