use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use driftlab::experiment::{run_experiment, write_csv, ExperimentConfig, Sidecar, Subcommand};
use driftlab::Error;

#[derive(Parser)]
#[command(name = "driftlab", version, about = "Random walks in dynamic random environments")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Cmd,
    /// JSON experiment config (a previous run's sidecar works too).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to DRIFTLAB_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Output file. CSV output also writes `<out>.json` next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Speed,
    Theta,
    Backtrack,
    Vl,
    RhoC,
    CouplingTest,
    EnvCheck,
    Scan,
}

impl From<Cmd> for Subcommand {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Speed => Subcommand::Speed,
            Cmd::Theta => Subcommand::Theta,
            Cmd::Backtrack => Subcommand::Backtrack,
            Cmd::Vl => Subcommand::Vl,
            Cmd::RhoC => Subcommand::RhoC,
            Cmd::CouplingTest => Subcommand::CouplingTest,
            Cmd::EnvCheck => Subcommand::EnvCheck,
            Cmd::Scan => Subcommand::Scan,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(&cli.config)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    let sub = Subcommand::from(cli.subcommand);
    match cfg.subcommand {
        Some(s) if s != sub => {
            return Err(Error::Config { line: 0, message: format!("config is for `{}`, not `{}`", s.name(), sub.name()) })
        }
        _ => cfg.subcommand = Some(sub),
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn threads(cli: &Cli) -> Result<Option<usize>, Error> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var("DRIFTLAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config { line: 0, message: format!("DRIFTLAB_THREADS={v:?} is not a thread count") }),
        Err(_) => Ok(None),
    }
}

fn emit(cli: &Cli, cfg: &ExperimentConfig, side: &Sidecar) -> Result<(), Error> {
    let out = cli.out.clone().or_else(|| cfg.output.clone());
    let json = serde_json::to_string_pretty(side).expect("sidecar serializes") + "\n";
    match (cli.format, out) {
        (Format::Csv, Some(path)) => {
            write_csv(&side.records, fs::File::create(&path)?)?;
            let mut p = path.into_os_string();
            p.push(".json");
            fs::write(p, json)?;
        }
        (Format::Csv, None) => write_csv(&side.records, io::stdout().lock())?,
        (Format::Json, Some(path)) => fs::write(path, json)?,
        (Format::Json, None) => io::stdout().lock().write_all(json.as_bytes())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("driftlab: {e}");
            return ExitCode::from(2);
        }
    };
    match threads(&cli) {
        Ok(Some(n)) => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("driftlab: {e}");
                return ExitCode::from(3);
            }
        }
        Ok(None) => {}
        Err(e) => {
            eprintln!("driftlab: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = run_experiment(&cfg);
    if let Some(e) = &outcome.error {
        eprintln!("driftlab: {e} ({} records kept, marked partial)", outcome.records.len());
    }
    if let Err(e) = emit(&cli, &cfg, &Sidecar::new(&cfg, &outcome)) {
        eprintln!("driftlab: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(outcome.exit_code() as u8)
}
