//! `fourport`: runs the entanglement sweeps and the generic channel driver.

mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fourport::entanglement::Measure;
use fourport::experiments::{
    self, AmplifierParams, BellDecayParams, ChannelApplyParams, Experiment, Grid, StateKind, SweepConfig, TmsvParams,
};
use fourport::fourport::DeviceSpecJson;
use fourport::Error;

use crate::output::Format;

#[derive(Parser, Debug)]
#[command(name = "fourport", version, about = "Entanglement sweeps through absorbing and amplifying four-port devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Log verbosity (-v info, -vv debug); RUST_LOG takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Entanglement of the four Bell states after equal lossy fibers, vs l/L.
    BellDecay(Options),
    /// PPT margin of a two-mode squeezed vacuum after thermal fibers, vs l/L.
    TmsvSeparability(Options),
    /// PPT margin of a two-mode squeezed vacuum after amplifiers, vs |T|².
    AmplifierGain(Options),
    /// Sends one state through one device and writes the output state.
    ChannelApply(Options),
}

impl Command {
    fn parts(&self) -> (Experiment, &Options) {
        match self {
            Command::BellDecay(o) => (Experiment::BellDecay, o),
            Command::TmsvSeparability(o) => (Experiment::TmsvSeparability, o),
            Command::AmplifierGain(o) => (Experiment::AmplifierGain, o),
            Command::ChannelApply(o) => (Experiment::ChannelApply, o),
        }
    }
}

/// Every config key is also a flag; flags override the config file.
#[derive(Args, Debug, Default)]
struct Options {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Re-check every 20th row against independent oracles.
    #[arg(long)]
    verify: bool,
    /// Evaluate rows one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,

    #[arg(long)]
    grid_start: Option<f64>,
    #[arg(long)]
    grid_stop: Option<f64>,
    #[arg(long)]
    grid_steps: Option<usize>,

    /// Squeezing parameter of the two-mode squeezed vacuum.
    #[arg(long)]
    zeta: Option<f64>,
    /// TMSV amplitude ratio tanh(zeta), an alternative to --zeta.
    #[arg(long)]
    q: Option<f64>,
    /// Mean thermal photon number of the device.
    #[arg(long)]
    n_th: Option<f64>,
    /// Reflection coefficient R as RE,IM.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    reflection: Option<[f64; 2]>,
    /// Fiber phase accumulated per absorption length.
    #[arg(long, allow_hyphen_values = true)]
    phase_per_length: Option<f64>,
    /// +1 absorbing, -1 amplifying.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<i64>,
    #[arg(long)]
    field_cutoff: Option<usize>,
    #[arg(long)]
    device_cutoff: Option<usize>,
    #[arg(long, value_enum)]
    measure: Option<MeasureArg>,
    /// Device spec JSON file ({"sigma", "n_th", "T", "A"}).
    #[arg(long)]
    device: Option<PathBuf>,
    /// Transmission of mode 1 as RE,IM (diagonal or port device).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    t1: Option<[f64; 2]>,
    /// Transmission of mode 2 as RE,IM (defaults to t1).
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    t2: Option<[f64; 2]>,
    /// Named input state for channel-apply.
    #[arg(long, value_enum)]
    state: Option<StateArg>,
    /// Input state JSON file for channel-apply.
    #[arg(long)]
    input: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeasureArg {
    ReducedEntropy,
    Negativity,
    LogNegativity,
    RelativeEntropy,
    LsEntanglement,
    UpperBound,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::ReducedEntropy => Measure::ReducedEntropy,
            MeasureArg::Negativity => Measure::Negativity,
            MeasureArg::LogNegativity => Measure::LogNegativity,
            MeasureArg::RelativeEntropy => Measure::RelativeEntropy,
            MeasureArg::LsEntanglement => Measure::LsEntanglement,
            MeasureArg::UpperBound => Measure::UpperBound,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StateArg {
    PsiPlus,
    PsiMinus,
    PhiPlus,
    PhiMinus,
    Tmsv,
    TmsvFock,
}

impl From<StateArg> for StateKind {
    fn from(s: StateArg) -> Self {
        match s {
            StateArg::PsiPlus => StateKind::PsiPlus,
            StateArg::PsiMinus => StateKind::PsiMinus,
            StateArg::PhiPlus => StateKind::PhiPlus,
            StateArg::PhiMinus => StateKind::PhiMinus,
            StateArg::Tmsv => StateKind::Tmsv,
            StateArg::TmsvFock => StateKind::TmsvFock,
        }
    }
}

fn parse_complex(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok([num(re)?, 0.0]),
        [re, im] => Ok([num(re)?, num(im)?]),
        _ => Err(format!("expected RE or RE,IM, got {s:?}")),
    }
}

/// A failure together with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::Truncation { .. } | Error::UnsupportedDimension(_) | Error::Convergence(_) => 3,
            Error::Invariant(_) | Error::MonotonicityViolation { .. } => 4,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn config_error(message: String) -> Failure {
    Failure { code: 2, message }
}

fn read_file(path: &Path, what: &str) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {what} {}: {e}", path.display())))
}

/// Config file overlaid with the command-line flags.
fn resolve_config(experiment: Experiment, o: &Options) -> Result<SweepConfig, Failure> {
    let file = match &o.config {
        Some(path) => SweepConfig::from_json_str(&read_file(path, "config")?)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?,
        None => SweepConfig::default(),
    };
    if let Some(other) = file.experiment.filter(|&e| e != experiment) {
        return Err(config_error(format!(
            "config is for experiment {:?} but {:?} was requested",
            other.name(),
            experiment.name()
        )));
    }

    let grid = match (o.grid_start, o.grid_stop, o.grid_steps, file.grid) {
        (None, None, None, _) => None,
        (start, stop, steps, Some(g)) => Some(Grid {
            start: start.unwrap_or(g.start),
            stop: stop.unwrap_or(g.stop),
            steps: steps.unwrap_or(g.steps),
        }),
        (Some(start), Some(stop), Some(steps), None) => Some(Grid { start, stop, steps }),
        _ => {
            return Err(config_error(
                "--grid-start, --grid-stop and --grid-steps must be given together unless the config has a grid".into(),
            ))
        }
    };
    let device = match &o.device {
        Some(path) => {
            let text = read_file(path, "device file")?;
            let json: DeviceSpecJson = serde_json::from_str(&text).map_err(|e| {
                config_error(format!("{} line {} column {}: {e}", path.display(), e.line(), e.column()))
            })?;
            Some(json)
        }
        None => None,
    };
    let flags = SweepConfig {
        experiment: Some(experiment),
        grid,
        zeta: o.zeta,
        n_th: o.n_th,
        reflection: o.reflection,
        phase_per_length: o.phase_per_length,
        sigma: o.sigma,
        field_cutoff: o.field_cutoff,
        device_cutoff: o.device_cutoff,
        measure: o.measure.map(Into::into),
        device,
        t1: o.t1,
        t2: o.t2,
        state: o.state.map(Into::into),
        q: o.q,
        input: o.input.clone(),
        out: o.out.clone(),
        format: o.format.map(|f| f.name().to_string()),
        verify: o.verify.then_some(true),
        sequential: o.sequential.then_some(true),
    };
    Ok(file.overlay(&flags))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let (experiment, options) = cli.command.parts();
    let cfg = resolve_config(experiment, options)?;
    let format = match cfg.format.as_deref() {
        None => None,
        Some(name) => Some(
            Format::from_name(name).ok_or_else(|| config_error(format!("unknown format {name:?}; use csv or json")))?,
        ),
    };
    log::info!("running {} ({:?})", experiment.name(), cfg.execution());
    let rendered = match experiment {
        Experiment::ChannelApply => {
            if format == Some(Format::Csv) {
                return Err(config_error("channel-apply writes a JSON state; --format csv is not available".into()));
            }
            let params = ChannelApplyParams::from_config(&cfg)?;
            let input = experiments::load_state_input(&cfg)?;
            let out = experiments::run_channel_apply(&input, &params)?;
            output::json(&out)
        }
        _ => {
            let table = match experiment {
                Experiment::BellDecay => experiments::run_bell_decay(&BellDecayParams::from_config(&cfg)?)?,
                Experiment::TmsvSeparability => experiments::run_tmsv_separability(&TmsvParams::from_config(&cfg)?)?,
                _ => experiments::run_amplifier_gain(&AmplifierParams::from_config(&cfg)?)?,
            };
            match format.unwrap_or(Format::Csv) {
                Format::Csv => output::csv(&table),
                Format::Json => output::json(&table),
            }
        }
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, rendered).map_err(|e| config_error(format!("cannot write {path}: {e}"))),
        None => match std::io::stdout().lock().write_all(rendered.as_bytes()) {
            // a closed pipe (`| head`) is the reader's choice, not a failure
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(config_error(format!("cannot write to stdout: {e}")))
            }
            _ => Ok(()),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
