use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use beamsim_core::channel::{ChannelFamily, GainTables};
use beamsim_core::engine::{run, Association, RunConfig, Scheduler, Strategy};
use beamsim_core::geometry::ElementType;
use beamsim_core::link::CqiTable;
use beamsim_core::report::{run_matrix, write_matrix_outputs, write_run_outputs, ExperimentMatrix, ScenarioSource};
use beamsim_core::scenario::{CorridorParams, IntersectionParams};
use beamsim_core::Error;
use clap::{Parser, ValueEnum};
use serde::Deserialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUN: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Synthetic {
    Intersection,
    Corridor,
}

/// Simulate beam management strategies for mmwave vehicular downlinks.
///
/// Settings come from `--config` (JSON) and are overridden by flags.
#[derive(Debug, Parser)]
#[command(name = "beamsim", version)]
struct Cli {
    /// JSON file with any of the settings below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario descriptor (JSON).
    #[arg(long, conflicts_with = "synthesize")]
    scenario: Option<PathBuf>,
    /// Generate a synthetic scenario instead of loading one.
    #[arg(long, value_enum)]
    synthesize: Option<Synthetic>,
    /// Experiment matrix file; runs every cell instead of a single simulation.
    #[arg(long, conflicts_with_all = ["scenario", "synthesize"])]
    matrix: Option<PathBuf>,
    /// STATIC, DYNAMIC, TL or OPTIMUM.
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Maximum number of beams per gNB.
    #[arg(long)]
    beams: Option<usize>,
    /// Maximum beam half-power width in degrees.
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Channel family: 3gpp or nyu.
    #[arg(long)]
    channel: Option<ChannelFamily>,
    /// gNB array element: iso or 3gpp.
    #[arg(long)]
    element: Option<ElementType>,
    /// EQUAL_SHARE or MAX_RATE.
    #[arg(long)]
    scheduler: Option<Scheduler>,
    /// STRONGEST, NEAREST or PER_BEAM.
    #[arg(long)]
    association: Option<Association>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Points per CDF table.
    #[arg(long)]
    cdf_points: Option<usize>,
    /// Gain table file replacing the built-in fits.
    #[arg(long)]
    gain_tables: Option<PathBuf>,
    /// CQI table file replacing the built-in one.
    #[arg(long)]
    cqi_table: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    scenario: Option<PathBuf>,
    synthesize: Option<Synthetic>,
    intersection: Option<IntersectionParams>,
    corridor: Option<CorridorParams>,
    matrix: Option<PathBuf>,
    strategy: Option<Strategy>,
    beams: Option<usize>,
    width: Option<f64>,
    seed: Option<u64>,
    channel: Option<ChannelFamily>,
    element: Option<ElementType>,
    scheduler: Option<Scheduler>,
    association: Option<Association>,
    out: Option<PathBuf>,
    cdf_points: Option<usize>,
    gain_tables: Option<PathBuf>,
    cqi_table: Option<PathBuf>,
    run: Option<RunConfig>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg: FileConfig = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.scenario,
            &mut cfg.matrix,
            &mut cfg.out,
            &mut cfg.gain_tables,
            &mut cfg.cqi_table,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Everything resolved from the file and the flags.
struct Settings {
    source: Option<ScenarioSource>,
    matrix: Option<PathBuf>,
    run: RunConfig,
    beams: Option<usize>,
    width: Option<f64>,
    channel: Option<ChannelFamily>,
    element: Option<ElementType>,
    out: PathBuf,
    cdf_points: usize,
    tables: Arc<GainTables>,
    cqi: Arc<CqiTable>,
}

fn resolve(cli: Cli) -> Result<Settings, Error> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut run = file.run.unwrap_or_default();
    if let Some(s) = cli.strategy.or(file.strategy) {
        run.strategy = s;
    }
    if let Some(s) = cli.seed.or(file.seed) {
        run.seed = s;
    }
    if let Some(s) = cli.scheduler.or(file.scheduler) {
        run.scheduler = s;
    }
    if let Some(a) = cli.association.or(file.association) {
        run.association = a;
    }

    let matrix = cli.matrix.or(file.matrix);
    let source = if cli.scenario.is_some() || cli.synthesize.is_some() {
        // Flags override the file as a whole.
        match (cli.scenario, cli.synthesize) {
            (Some(p), _) => Some(ScenarioSource::File(p)),
            (None, Some(kind)) => Some(synthetic(kind, &file.intersection, &file.corridor)),
            (None, None) => unreachable!(),
        }
    } else if let Some(p) = file.scenario {
        Some(ScenarioSource::File(p))
    } else {
        file.synthesize
            .map(|kind| synthetic(kind, &file.intersection, &file.corridor))
    };
    if source.is_none() && matrix.is_none() {
        return Err(Error::Config(
            "nothing to do: give --scenario, --synthesize or --matrix".into(),
        ));
    }
    let tables = match cli.gain_tables.or(file.gain_tables) {
        Some(p) => GainTables::load(&p)?,
        None => GainTables::builtin(),
    };
    let cqi = match cli.cqi_table.or(file.cqi_table) {
        Some(p) => CqiTable::load(&p)?,
        None => CqiTable::builtin(),
    };
    Ok(Settings {
        source,
        matrix,
        run,
        beams: cli.beams.or(file.beams),
        width: cli.width.or(file.width),
        channel: cli.channel.or(file.channel),
        element: cli.element.or(file.element),
        out: cli
            .out
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("beamsim-out")),
        cdf_points: cli.cdf_points.or(file.cdf_points).unwrap_or(100),
        tables: Arc::new(tables),
        cqi: Arc::new(cqi),
    })
}

fn synthetic(
    kind: Synthetic,
    intersection: &Option<IntersectionParams>,
    corridor: &Option<CorridorParams>,
) -> ScenarioSource {
    match kind {
        Synthetic::Intersection => {
            ScenarioSource::Intersection(intersection.clone().unwrap_or_default())
        }
        Synthetic::Corridor => ScenarioSource::Corridor(corridor.clone().unwrap_or_default()),
    }
}

enum Failure {
    Config(Error),
    Run(String),
}

fn single(s: &Settings, source: &ScenarioSource) -> Result<(), Failure> {
    let mut scenario = source.load().map_err(Failure::Config)?;
    if s.beams.is_some() || s.width.is_some() {
        let g = &scenario.gnbs()[..];
        let n = s.beams.or(g.first().map(|g| g.n_beams_max)).unwrap_or(2);
        let a = s.width.or(g.first().map(|g| g.max_width)).unwrap_or(5.0);
        scenario = scenario.with_beam_budget(n, a).map_err(Failure::Config)?;
    }
    if let Some(f) = s.channel {
        scenario = scenario.with_family(f);
    }
    if let Some(e) = s.element {
        scenario = scenario.with_element(e).map_err(Failure::Config)?;
    }
    log::info!(
        "{} steps, {} gNBs, strategy {}",
        scenario.steps().len(),
        scenario.gnbs().len(),
        s.run.strategy
    );
    let ledger = run(&scenario, &s.run, s.tables.clone(), s.cqi.clone())
        .map_err(|e| Failure::Run(e.to_string()))?;
    let summary = write_run_outputs(&s.out, &ledger, &s.run, s.cdf_points)
        .map_err(|e| Failure::Run(e.to_string()))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    );
    Ok(())
}

fn matrix(s: &Settings, path: &Path) -> Result<(), Failure> {
    let mut m = ExperimentMatrix::load(path).map_err(Failure::Config)?;
    m.base.scheduler = s.run.scheduler;
    m.base.association = s.run.association;
    let report = run_matrix(&m, s.tables.clone(), s.cqi.clone());
    write_matrix_outputs(&s.out, &m, &report, s.cdf_points).map_err(|e| Failure::Run(e.to_string()))?;
    for r in &report.rows {
        match (&r.error, r.total_bits) {
            (Some(e), _) => println!("{:<40} FAILED {e}", r.id),
            (None, Some(b)) => println!("{:<40} {b} bits", r.id),
            _ => {}
        }
    }
    for c in &report.comparison {
        println!(
            "{} N={} A={} seed={}: TL/OPTIMUM = {:.4}",
            c.scenario, c.n_beams, c.width, c.seed, c.ratio
        );
    }
    match report.failures() {
        0 => Ok(()),
        n => Err(Failure::Run(format!("{n} cell(s) failed"))),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let settings = match resolve(cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let result = match (&settings.matrix, &settings.source) {
        (Some(m), _) => matrix(&settings, m),
        (None, Some(src)) => single(&settings, src),
        (None, None) => unreachable!("resolve rejects this"),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUN)
        }
    }
}
