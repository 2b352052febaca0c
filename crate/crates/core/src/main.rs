use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onebit_mimo::harness::experiment::OracleSpec;
use onebit_mimo::harness::{emit_csv, run_experiment, ExperimentKind, ExperimentSpec};
use onebit_mimo::scenario::ScenarioConfig;
use onebit_mimo::solvers::SolverKind;
use onebit_mimo::{Error, Result};

#[derive(Parser)]
#[command(
    name = "onebit-sim",
    version,
    about = "1-bit ADC distributed MIMO sweeps and power control"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SINDR versus UE transmit power.
    SweepPower(RunArgs),
    /// SINDR versus UE distance from the reference BS.
    SweepDistance(RunArgs),
    /// Min-power versus target or distance.
    MinPower(RunArgs),
    /// Max-min SINDR versus distance.
    MaxMin(RunArgs),
    /// Monte-Carlo check of the closed-form statistics.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct OracleArgs {
    /// Experiment spec (JSON); the default suite is used without it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Monte-Carlo draws per instance.
    #[arg(long)]
    draws: Option<u64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path; stdout when absent and the spec names none.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["gradient", "fixed-point", "bcd"])]
    solver: Option<String>,
    #[arg(long, value_parser = ["off", "search"])]
    dither: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
}

impl CommonArgs {
    fn apply(&self, spec: &mut ExperimentSpec) -> Result<()> {
        if let Some(seed) = self.seed {
            spec.scenario.seed = seed;
        }
        if let Some(out) = &self.out {
            spec.output = Some(out.clone());
        }
        if let Some(solver) = &self.solver {
            spec.solvers = vec![solver.parse::<SolverKind>()?];
        }
        if let Some(dither) = &self.dither {
            spec.dithering = dither == "search";
        }
        if let Some(n) = self.realizations {
            spec.scenario.num_channel_realizations = n;
        }
        spec.validate()
    }
}

fn default_oracle_spec() -> ExperimentSpec {
    let json = serde_json::json!({
        "kind": "oracle_suite",
        "scenario": ScenarioConfig::new(vec![[0.0, 0.0]], 1, vec![[1.0, 0.0]]),
        "oracle": OracleSpec {
            sizes: vec![(1, 1, 0), (1, 2, 1), (2, 3, 2), (2, 4, 4)],
            draws: 1_000_000,
            gain_scale: 1.0,
        },
    });
    ExperimentSpec::from_json(&json.to_string()).expect("default oracle spec is valid")
}

fn load(path: &Path, allowed: &[ExperimentKind], command: &str) -> Result<ExperimentSpec> {
    let spec = ExperimentSpec::load(path)?;
    if !allowed.contains(&spec.kind) {
        return Err(Error::Config(format!(
            "'{command}' cannot run a '{}' experiment",
            spec.kind.name()
        )));
    }
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    let (mut spec, common) = match &cli.command {
        Command::SweepPower(a) => (
            load(&a.config, &[ExperimentKind::SweepPower], "sweep-power")?,
            &a.common,
        ),
        Command::SweepDistance(a) => (
            load(&a.config, &[ExperimentKind::SweepDistance], "sweep-distance")?,
            &a.common,
        ),
        Command::MinPower(a) => (
            load(
                &a.config,
                &[ExperimentKind::MinPowerVsTarget, ExperimentKind::MinPowerVsDistance],
                "min-power",
            )?,
            &a.common,
        ),
        Command::MaxMin(a) => (
            load(&a.config, &[ExperimentKind::MaxminVsDistance], "max-min")?,
            &a.common,
        ),
        Command::Oracle(a) => {
            let mut spec = match &a.config {
                Some(path) => load(path, &[ExperimentKind::OracleSuite], "oracle")?,
                None => default_oracle_spec(),
            };
            if let (Some(draws), Some(o)) = (a.draws, spec.oracle.as_mut()) {
                o.draws = draws;
            }
            (spec, &a.common)
        }
    };
    common.apply(&mut spec)?;
    let table = run_experiment(&spec)?;
    match &spec.output {
        Some(path) => emit_csv(&table, path)?,
        None => print!("{}", table.to_csv_string()?),
    }
    if table.meta("all_passed") == Some("false") {
        return Err(Error::Consistency("oracle suite reported failing checks".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
