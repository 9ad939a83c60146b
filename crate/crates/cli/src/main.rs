use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vprep_cli::spec::{paper_defaults, validate_spec, Experiment, ExperimentSpec};
use vprep_cli::{run_experiments, InvalidSpec};

/// Bound-state to resonance velocity preparation.
#[derive(Parser)]
#[command(name = "vprep", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment spec (TOML); the bundled paper defaults when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Override a spec entry, e.g. `--set numerics.dx=0.04`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides the spec's `output`).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment listed in a spec.
    Run {
        spec: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a spec without running it.
    Validate {
        spec: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// S-matrix poles of both configurations.
    Poles(Common),
    /// Ground state of the initial configuration.
    Groundstate(Common),
    /// Iso-resonance curves.
    Isocurve(Common),
    /// Delay-time spectrum and its Lorentzian fit.
    Delay(Common),
    /// Well-probability decay curves.
    Propagate(Common),
    /// Energy distributions after the switch.
    Spectrum(Common),
    /// Optimal switching time.
    ScanT(Common),
    /// Print the bundled paper-defaults spec.
    Defaults,
}

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_SPEC: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(spec: Option<&Path>, overrides: &[String]) -> anyhow::Result<ExperimentSpec> {
    match spec {
        Some(p) => ExperimentSpec::load(p, overrides),
        None if overrides.is_empty() => Ok(paper_defaults()),
        None => ExperimentSpec::parse_with_overrides(vprep_cli::spec::PAPER_DEFAULTS, overrides),
    }
}

fn execute(spec: Option<&Path>, overrides: &[String], output: Option<&Path>, only: Option<Experiment>) -> ExitCode {
    let spec = match load(spec, overrides) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_SPEC);
        }
    };
    let only = only.map(|e| vec![e]);
    match run_experiments(&spec, only.as_deref(), output) {
        Ok(report) => {
            print!("{}", report.summary.render());
            println!("output: {}", report.output.display());
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Err(e) if e.is::<InvalidSpec>() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SPEC)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let single = |c: &Common, e| execute(c.spec.as_deref(), &c.overrides, c.output.as_deref(), Some(e));
    match &cli.command {
        Command::Run { spec, overrides, output } => execute(Some(spec), overrides, output.as_deref(), None),
        Command::Validate { spec, overrides } => match validate_spec(spec, overrides) {
            Ok(d) if d.is_empty() => {
                println!("{}: ok", spec.display());
                ExitCode::SUCCESS
            }
            Ok(d) => {
                for x in d {
                    println!("{x}");
                }
                ExitCode::from(EXIT_SPEC)
            }
            Err(e) => {
                eprintln!("error: reading {}: {e}", spec.display());
                ExitCode::from(EXIT_SPEC)
            }
        },
        Command::Poles(c) => single(c, Experiment::Poles),
        Command::Groundstate(c) => single(c, Experiment::GroundState),
        Command::Isocurve(c) => single(c, Experiment::IsoCurves),
        Command::Delay(c) => single(c, Experiment::DelaySpectrum),
        Command::Propagate(c) => single(c, Experiment::DecayCurves),
        Command::Spectrum(c) => single(c, Experiment::SpectrumVsT),
        Command::ScanT(c) => single(c, Experiment::TScan),
        Command::Defaults => {
            print!("{}", vprep_cli::spec::PAPER_DEFAULTS);
            ExitCode::SUCCESS
        }
    }
}
