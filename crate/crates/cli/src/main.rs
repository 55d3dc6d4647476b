//! `volstudy` command-line interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use volstudy::market_data::write_bars;
use volstudy::pipeline::{run_pipeline, ConfigFile, ErrorKind, PipelineError, Plan, RunConfig, SchemeSpec};
use volstudy::synthetic::generate_synthetic;

#[derive(Parser)]
#[command(name = "volstudy", version, about = "Intraday volatility event study on one-minute OHLC bars")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build day grids and the daily price series.
    Ingest(Common),
    /// Daily realized and Garman-Klass volatility with period averages.
    Rv(Common),
    /// Daily amplitude spectra and per-period change ratios.
    Spectrum(Common),
    /// Frequency-band tests of the change ratios.
    Bands(Common),
    /// Difference-in-differences regression of log volatility.
    Did(Common),
    /// Two-regime Markov-switching GJR-GARCH on daily returns.
    Msgarch(Common),
    /// Write synthetic treatment/control minute bars and a matching config.
    Simulate(SimulateArgs),
    /// Run every stage.
    Report(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input bars as LABEL=PATH, or PATH to label by file stem. Repeatable; replaces the config's inputs.
    #[arg(long)]
    input: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Analysis timezone: IANA name, UTC or a fixed offset like +09:00.
    #[arg(long)]
    tz: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Largest fraction of forward-filled minutes a day may have.
    #[arg(long)]
    max_missing: Option<f64>,
    /// Treatment dataset label for the difference-in-differences stage.
    #[arg(long)]
    treatment: Option<String>,
    /// Control dataset label for the difference-in-differences stage.
    #[arg(long)]
    control: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// Treatment volatility multipliers, one per period.
    #[arg(long, value_delimiter = ',')]
    multipliers: Option<Vec<f64>>,
    /// Control volatility multipliers, one per period (default all 1).
    #[arg(long, value_delimiter = ',')]
    control_multipliers: Option<Vec<f64>>,
    /// Correlation of treatment and control minute shocks.
    #[arg(long)]
    correlation: Option<f64>,
    /// Typical daily return standard deviation.
    #[arg(long)]
    daily_vol: Option<f64>,
}

fn input_entry(spec: &str) -> Result<(String, PathBuf), PipelineError> {
    if let Some((label, path)) = spec.split_once('=') {
        return Ok((label.to_string(), PathBuf::from(path)));
    }
    let path = PathBuf::from(spec);
    let label = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| config_error(format!("cannot derive a label from `{spec}`; use LABEL=PATH")))?
        .to_string();
    Ok((label, path))
}

fn config_error(message: String) -> PipelineError {
    PipelineError {
        stage: "config".into(),
        kind: ErrorKind::Config,
        message,
    }
}

/// Config file (if any) with the command-line flags applied on top.
fn load_file(common: &Common) -> Result<ConfigFile, PipelineError> {
    let mut file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if !common.input.is_empty() {
        file.input_paths.clear();
        for spec in &common.input {
            let (label, path) = input_entry(spec)?;
            if file.input_paths.insert(label.clone(), path).is_some() {
                return Err(config_error(format!("input label `{label}` given twice")));
            }
        }
    }
    if let Some(out) = &common.out {
        file.output_dir = Some(out.clone());
    }
    if let Some(tz) = &common.tz {
        file.scheme.get_or_insert_with(SchemeSpec::default).timezone = Some(tz.clone());
    }
    if let Some(seed) = common.seed {
        file.seed = Some(seed);
    }
    if let Some(m) = common.max_missing {
        file.max_missing_fraction = Some(m);
    }
    if let Some(t) = &common.treatment {
        file.treatment_label = Some(t.clone());
    }
    if let Some(c) = &common.control {
        file.control_label = Some(c.clone());
    }
    Ok(file)
}

fn run_stages(common: &Common, plan: impl FnOnce(&RunConfig) -> Plan) -> Result<i32, PipelineError> {
    let config = RunConfig::from_file(load_file(common)?)?;
    let summary = run_pipeline(&config, plan(&config))?;
    let m = &summary.manifest;
    for s in &m.stages {
        match &s.message {
            Some(msg) => eprintln!("{:<24} {:?}: {msg}", s.stage, s.status),
            None => eprintln!("{:<24} {:?}", s.stage, s.status),
        }
    }
    for f in &m.flags {
        eprintln!("flag: {f}");
    }
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("{} outputs; manifest at {}", m.outputs.len(), summary.manifest_path.display());
    Ok(summary.exit_code())
}

fn simulate(args: &SimulateArgs) -> Result<i32, PipelineError> {
    let mut file = load_file(&args.common)?;
    let out = file
        .output_dir
        .take()
        .ok_or_else(|| config_error("simulate needs --out or outputDir".into()))?;
    let mut synth = file.synthetic.take().unwrap_or_default();
    if let Some(m) = &args.multipliers {
        synth.treatment_multipliers = m.clone();
    }
    if let Some(m) = &args.control_multipliers {
        synth.control_multipliers = m.clone();
    }
    if let Some(c) = args.correlation {
        synth.correlation = c;
    }
    if let Some(v) = args.daily_vol {
        synth.daily_vol = v;
    }
    let mut config = RunConfig::from_file(file)?;
    synth.seed = config.seed;
    let data = generate_synthetic(&config.scheme, &synth).map_err(|e| config_error(e.to_string()))?;

    fs::create_dir_all(&out).map_err(|e| config_error(format!("cannot create {}: {e}", out.display())))?;
    let write = |name: &str, bars| -> Result<(), PipelineError> {
        let mut buf = Vec::new();
        write_bars(bars, &mut buf).map_err(|e| config_error(e.to_string()))?;
        fs::write(out.join(name), buf).map_err(|e| config_error(format!("writing {name}: {e}")))
    };
    write("treatment.csv", &data.treatment)?;
    write("control.csv", &data.control)?;

    config.input_paths = [
        ("treatment".to_string(), PathBuf::from("treatment.csv")),
        ("control".to_string(), PathBuf::from("control.csv")),
    ]
    .into();
    config.treatment_label = Some("treatment".into());
    config.control_label = Some("control".into());
    config.output_dir = PathBuf::from("report");
    config.synthetic = synth;
    let run_toml = out.join("run.toml");
    fs::write(&run_toml, config.to_file().to_toml()).map_err(|e| config_error(e.to_string()))?;
    eprintln!(
        "wrote {} bars per stream to {}; run `volstudy report --config {}`",
        data.treatment.len(),
        Path::new(&out).display(),
        run_toml.display()
    );
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ErrorKind::Config.exit_code() } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match &cli.command {
        Command::Ingest(c) => run_stages(c, |_| Plan::ingest()),
        Command::Rv(c) => run_stages(c, |_| Plan {
            rv: true,
            ..Plan::default()
        }),
        Command::Spectrum(c) => run_stages(c, |_| Plan {
            spectrum: true,
            ..Plan::default()
        }),
        Command::Bands(c) => run_stages(c, |_| Plan {
            bands: true,
            ..Plan::default()
        }),
        Command::Did(c) => run_stages(c, |_| Plan {
            did: true,
            ..Plan::default()
        }),
        Command::Msgarch(c) => run_stages(c, |_| Plan {
            msgarch: true,
            ..Plan::default()
        }),
        Command::Simulate(args) => simulate(args),
        Command::Report(c) => run_stages(c, Plan::report),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
