//! Command-line front end: `heatmap`, `train`, `eval` and `compare`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::agent::QTable;
use crate::episode::{evaluate, train_env, Environment, EpisodeError, EpisodeResult, TrainingLog};
use crate::export::{self, ExportError, Manifest, RunArtifacts};
use crate::geometry::Position;
use crate::metrics::{
    episodes_to_first_rescue, median_final_steps, ComparisonReport, ComparisonRow, MetricsError,
    TrajectoryStats, FINAL_WINDOW,
};
use crate::scenario::{
    parse_scenario, AntennaConfig, AntennaKindConfig, Boresight, BoresightKeyword, ConfigError,
    ScenarioConfig, StartConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "uavsar",
    version,
    about = "Q-learning UAV search over simulated indoor RSS maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Override the scenario's master seed.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Override the scenario's number of training episodes.
    #[arg(long, value_name = "N")]
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Antenna,
    Frequency,
    Iterations,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the RSS map and write it as CSV and PGM.
    Heatmap(CommonArgs),
    /// Train, evaluate greedily from the start cell, and write every artefact.
    Train(CommonArgs),
    /// Roll out the greedy policy of an exported Q-table.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        /// Q-table CSV written by `train`.
        #[arg(long, value_name = "PATH")]
        qtable: PathBuf,
        /// Start cell; defaults to the scenario's start.
        #[arg(long, value_name = "X,Y", value_parser = parse_cell)]
        start: Option<Position>,
    },
    /// Train every combination of the chosen axes and seeds.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Axes to vary.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "antenna")]
        axes: Vec<Axis>,
        /// Seeds to run per configuration; defaults to the scenario's seed.
        #[arg(long, value_delimiter = ',', value_name = "N,...")]
        seeds: Vec<u64>,
        /// Episode counts for the `iterations` axis.
        #[arg(long, value_delimiter = ',', value_name = "N,...")]
        iteration_counts: Vec<usize>,
        /// Switch the transmitter pattern along with the UAV's.
        #[arg(long)]
        both_ends: bool,
    },
}

fn parse_cell(s: &str) -> Result<Position, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected X,Y, got `{s}`"))?;
    let x = x.trim().parse().map_err(|e| format!("x: {e}"))?;
    let y = y.trim().parse().map_err(|e| format!("y: {e}"))?;
    Ok(Position::new(x, y))
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(ConfigError::Io { .. } | ConfigError::Parse { .. }) => 1,
            CliError::Config(ConfigError::Validation { .. }) => 2,
            _ => 3,
        }
    }
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Heatmap(c) => cmd_heatmap(&load(c)?, &c.out),
        Command::Train(c) => cmd_train(&load(c)?, &c.out).map(|_| ()),
        Command::Eval {
            common,
            qtable,
            start,
        } => cmd_eval(&load(common)?, qtable, *start, &common.out).map(|_| ()),
        Command::Compare {
            common,
            axes,
            seeds,
            iteration_counts,
            both_ends,
        } => {
            let plan = ComparePlan {
                axes: axes.clone(),
                seeds: seeds.clone(),
                iteration_counts: iteration_counts.clone(),
                both_ends: *both_ends,
            };
            cmd_compare(&load(common)?, &plan, &common.out).map(|_| ())
        }
    }
}

/// Parses the scenario and applies command-line overrides.
pub fn load(args: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let mut config = parse_scenario(&args.config)?;
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(n) = args.iterations {
        config.iterations = n;
    }
    Ok(config)
}

pub fn cmd_heatmap(config: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    let env = config.environment()?;
    export::write_heatmap(out, env.map())?;
    write_config_echo(config, out)?;
    Ok(())
}

/// Everything produced by one training run.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub env: Environment,
    pub qtable: QTable,
    pub log: TrainingLog,
    pub evaluation: Option<EpisodeResult>,
}

/// Cell greedy evaluation starts from: the fixed start, or for random starts
/// the non-terminal cell with the weakest signal (first in row-major order).
pub fn eval_start(config: &ScenarioConfig, env: &Environment) -> Option<Position> {
    match config.start {
        StartConfig::Cell(p) => Some(p),
        StartConfig::Keyword(_) => {
            let rss = |p: Position| env.map().rss(p).expect("start cells are free");
            env.start_cells()
                .iter()
                .copied()
                .reduce(|best, p| if rss(p) < rss(best) { p } else { best })
        }
    }
}

pub fn train_scenario(config: &ScenarioConfig) -> Result<TrainedRun, CliError> {
    let env = config.environment()?;
    let (qtable, log) = train_env(&env, &config.training_settings(), &config.name)?;
    let evaluation = match eval_start(config, &env) {
        Some(start) => Some(evaluate(&env, &qtable, start, config.limits())?),
        None => None,
    };
    Ok(TrainedRun {
        env,
        qtable,
        log,
        evaluation,
    })
}

pub fn cmd_train(config: &ScenarioConfig, out: &Path) -> Result<TrainedRun, CliError> {
    let run = train_scenario(config)?;
    export::write_outputs(
        out,
        &RunArtifacts {
            config,
            map: run.env.map(),
            log: &run.log,
            qtable: &run.qtable,
            trajectory: run.evaluation.as_ref(),
        },
    )?;
    if let Some(ev) = &run.evaluation {
        let stats = TrajectoryStats::from_result(ev, config.speed_v)?;
        let mut stdout = std::io::stdout().lock();
        let _ = writeln!(
            stdout,
            "{}: {} after {} steps, {:.2} m, flight {:.2} s, sensing {:.0} s",
            config.name,
            ev.outcome,
            stats.steps,
            stats.length_m,
            stats.flight_time_s,
            stats.sensing_time_s
        );
    }
    Ok(run)
}

pub fn cmd_eval(
    config: &ScenarioConfig,
    qtable_path: &Path,
    start: Option<Position>,
    out: &Path,
) -> Result<EpisodeResult, CliError> {
    let env = config.environment()?;
    let q = export::read_qtable(
        qtable_path,
        env.states().len(),
        config.hyperparams,
        config.master_seed,
    )?;
    let start = start
        .or_else(|| eval_start(config, &env))
        .ok_or(EpisodeError::NoStartCell)?;
    let result = evaluate(&env, &q, start, config.limits())?;
    export::write_file(out, export::TRAJECTORY_CSV, |w| {
        export::write_trajectory_csv(w, Some(&result))
    })?;
    let stats = TrajectoryStats::from_result(&result, config.speed_v)?;
    println!(
        "{} from {}: {} steps, {:.2} m, flight {:.2} s",
        result.outcome, start, stats.steps, stats.length_m, stats.flight_time_s
    );
    Ok(result)
}

fn write_config_echo(config: &ScenarioConfig, out: &Path) -> Result<(), CliError> {
    export::write_file(out, export::SCENARIO_JSON, |w| {
        w.write_all(config.to_canonical_json().as_bytes())
    })?;
    let manifest = Manifest::for_config(config);
    export::write_file(out, export::MANIFEST_JSON, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        w.write_all(b"\n")
    })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparePlan {
    pub axes: Vec<Axis>,
    pub seeds: Vec<u64>,
    pub iteration_counts: Vec<usize>,
    pub both_ends: bool,
}

pub const COMPARE_FREQUENCIES: [f64; 2] = [2.4e9, 5e9];

fn antenna_label(config: &ScenarioConfig) -> &'static str {
    match config.propagation.rx_antenna.kind {
        AntennaKindConfig::Directional => "directional",
        AntennaKindConfig::Omnidirectional => "omnidirectional",
    }
}

/// Applies an antenna choice to the UAV (and optionally the transmitter).
pub fn with_antenna(
    config: &ScenarioConfig,
    kind: AntennaKindConfig,
    both_ends: bool,
) -> ScenarioConfig {
    let mut c = config.clone();
    let switch = |current: AntennaConfig, boresight| match kind {
        AntennaKindConfig::Omnidirectional => AntennaConfig { kind, ..current },
        AntennaKindConfig::Directional if current.kind == AntennaKindConfig::Directional => current,
        AntennaKindConfig::Directional => AntennaConfig {
            kind,
            boresight,
            ..current
        },
    };
    c.propagation.rx_antenna = switch(
        c.propagation.rx_antenna,
        Boresight::Keyword(BoresightKeyword::Heading),
    );
    if both_ends {
        c.propagation.tx_antenna = switch(
            c.propagation.tx_antenna,
            Boresight::Keyword(BoresightKeyword::FreeSpaceCenter),
        );
    }
    c
}

/// Every configuration of the battery, in report order.
pub fn compare_configs(
    base: &ScenarioConfig,
    plan: &ComparePlan,
) -> Result<Vec<ScenarioConfig>, CliError> {
    let has = |a| plan.axes.contains(&a);
    let antennas: Vec<Option<AntennaKindConfig>> = if has(Axis::Antenna) {
        vec![
            Some(AntennaKindConfig::Directional),
            Some(AntennaKindConfig::Omnidirectional),
        ]
    } else {
        vec![None]
    };
    let freqs: Vec<f64> = if has(Axis::Frequency) {
        COMPARE_FREQUENCIES.to_vec()
    } else {
        vec![base.propagation.frequency_hz]
    };
    let iterations: Vec<usize> = if has(Axis::Iterations) {
        if plan.iteration_counts.is_empty() {
            return Err(CliError::Usage(
                "--axes iterations needs --iteration-counts".into(),
            ));
        }
        plan.iteration_counts.clone()
    } else {
        vec![base.iterations]
    };
    let seeds = if plan.seeds.is_empty() {
        vec![base.master_seed]
    } else {
        plan.seeds.clone()
    };
    let mut out = Vec::new();
    for &antenna in &antennas {
        for &f in &freqs {
            for &n in &iterations {
                for &seed in &seeds {
                    let mut c = match antenna {
                        Some(kind) => with_antenna(base, kind, plan.both_ends),
                        None => base.clone(),
                    };
                    c.propagation.frequency_hz = f;
                    c.iterations = n;
                    c.master_seed = seed;
                    c.validate()?;
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}

fn compare_row(config: &ScenarioConfig) -> Result<(ComparisonRow, TrainedRun), CliError> {
    let run = train_scenario(config)?;
    let eval = match &run.evaluation {
        Some(ev) => TrajectoryStats::from_result(ev, config.speed_v)?,
        None => TrajectoryStats {
            length_m: 0.0,
            steps: 0,
            flight_time_s: 0.0,
            sensing_time_s: 0.0,
            rescued: false,
        },
    };
    let row = ComparisonRow {
        antenna: antenna_label(config).into(),
        frequency_hz: config.propagation.frequency_hz,
        iterations: config.iterations,
        seed: config.master_seed,
        scenario_hash: config.hash(),
        episodes_to_first_rescue: episodes_to_first_rescue(&run.log),
        median_final_steps: median_final_steps(&run.log, FINAL_WINDOW),
        eval,
    };
    Ok((row, run))
}

/// Runs the battery in parallel. Each run's config, log and RSS map go to
/// `out/runs/<row>/`; the summary goes to `out/comparison.csv`.
pub fn cmd_compare(
    base: &ScenarioConfig,
    plan: &ComparePlan,
    out: &Path,
) -> Result<ComparisonReport, CliError> {
    let configs = compare_configs(base, plan)?;
    let results: Vec<Result<(ComparisonRow, TrainedRun), CliError>> =
        configs.par_iter().map(compare_row).collect();
    let mut report = ComparisonReport::default();
    for (i, (config, result)) in configs.iter().zip(results).enumerate() {
        let (row, run) = result?;
        let dir = out.join("runs").join(format!(
            "{i:03}_{}_{}_{}_{}",
            row.antenna, row.frequency_hz, row.iterations, row.seed
        ));
        write_config_echo(config, &dir)?;
        export::write_file(&dir, export::RSS_CSV, |w| {
            export::write_rss_csv(w, run.env.map())
        })?;
        export::write_file(&dir, export::TRAINING_LOG_CSV, |w| {
            export::write_training_log_csv(w, &run.log)
        })?;
        report.rows.push(row);
    }
    export::write_file(out, export::COMPARISON_CSV, |w| {
        export::write_comparison_csv(w, &report)
    })?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn cell_argument() {
        assert_eq!(parse_cell("3,4"), Ok(Position::new(3, 4)));
        assert_eq!(parse_cell(" 3, 4"), Ok(Position::new(3, 4)));
        assert!(parse_cell("3").is_err());
        assert!(parse_cell("a,4").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_from(["uavsar"]), 1);
        assert_eq!(run_from(["uavsar", "train"]), 1);
        assert_eq!(
            run_from(["uavsar", "fly", "--config", "x", "--out", "y"]),
            1
        );
        assert_eq!(run_from(["uavsar", "--help"]), 0);
    }

    #[test]
    fn battery_size_is_the_cross_product() {
        let base = ScenarioConfig::from_json_str(
            r#"{ "floor_plan": { "width": 5, "height": 5 }, "victim": { "x": 4.5, "y": 4.5 } }"#,
        )
        .unwrap();
        let plan = ComparePlan {
            axes: vec![Axis::Antenna, Axis::Frequency, Axis::Iterations],
            seeds: vec![1, 2, 3],
            iteration_counts: vec![10, 20],
            both_ends: false,
        };
        let configs = compare_configs(&base, &plan).unwrap();
        assert_eq!(configs.len(), 2 * 2 * 2 * 3);
        assert_eq!(antenna_label(&configs[0]), "directional");
        assert_eq!(
            configs[0].propagation.tx_antenna.kind,
            AntennaKindConfig::Omnidirectional
        );
        let both = compare_configs(
            &base,
            &ComparePlan {
                both_ends: true,
                ..plan.clone()
            },
        )
        .unwrap();
        assert_eq!(
            both[0].propagation.tx_antenna.kind,
            AntennaKindConfig::Directional
        );
        let no_counts = ComparePlan {
            iteration_counts: vec![],
            ..plan
        };
        assert!(matches!(
            compare_configs(&base, &no_counts),
            Err(CliError::Usage(_))
        ));
    }
}
