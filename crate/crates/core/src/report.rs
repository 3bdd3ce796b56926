//! Plot-ready tables, run summaries and experiment matrices.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::GainTables;
use crate::engine::{run, MetricsLedger, RunConfig, Strategy};
use crate::error::{Error, Result};
use crate::link::CqiTable;
use crate::scenario::{
    load_scenario, synthesize_corridor, synthesize_intersection, CorridorParams, IntersectionParams,
    Scenario,
};
use crate::strategies::write_beam_configs;

pub const CDF_HEADER: &str = "# beamsim-cdf/1";
pub const MATRIX_FORMAT: &str = "beamsim-matrix/1";

/// Bits per terabyte.
const TBYTE_BITS: f64 = 8e12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cdf {
    /// `(value, cumulative fraction)`, both non-decreasing, last fraction 1.
    pub points: Vec<(f64, f64)>,
    pub mean: f64,
    pub count: usize,
}

/// Empirical CDF at `n_points` evenly spaced fractions `i / n_points`, each
/// paired with the smallest sample whose rank reaches it.
pub fn emit_cdf(samples: &[f64], n_points: usize) -> Result<Cdf> {
    if samples.is_empty() {
        return Err(Error::Config("CDF of an empty sample set".into()));
    }
    if n_points == 0 {
        return Err(Error::Config("CDF needs at least one point".into()));
    }
    if let Some(x) = samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::Config(format!("non-finite sample {x} in CDF input")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let points = (1..=n_points)
        .map(|i| {
            let frac = i as f64 / n_points as f64;
            let rank = (i * n).div_ceil(n_points).max(1);
            (sorted[rank - 1], frac)
        })
        .collect();
    Ok(Cdf {
        points,
        mean: sorted.iter().sum::<f64>() / n as f64,
        count: n,
    })
}

pub fn write_cdf<W: Write>(cdf: &Cdf, mut w: W) -> Result<()> {
    let io = |e| Error::io("<cdf output>", e);
    writeln!(w, "{CDF_HEADER} mean={} count={}", cdf.mean, cdf.count).map_err(io)?;
    writeln!(w, "value,fraction").map_err(io)?;
    for (v, f) in &cdf.points {
        writeln!(w, "{v},{f}").map_err(io)?;
    }
    Ok(())
}

/// Aggregate figures of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub strategy: Strategy,
    pub seed: u64,
    pub steps: usize,
    pub vehicles_seen: usize,
    pub vehicles_served: usize,
    pub total_bits: u64,
    pub total_tbyte: f64,
    /// Mean over served vehicles, seconds.
    pub mean_served_time: f64,
    /// Mean over served vehicles, bits.
    pub mean_vehicle_bits: f64,
    /// Mean over served transmissions; absent when there were none.
    pub mean_sinr_db: Option<f64>,
    pub mean_rate: Option<f64>,
}

impl RunSummary {
    pub fn new(ledger: &MetricsLedger, config: &RunConfig) -> Self {
        let served: Vec<_> = ledger.served().collect();
        let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
        let total = ledger.total_bits();
        RunSummary {
            strategy: config.strategy,
            seed: config.seed,
            steps: ledger.steps.len(),
            vehicles_seen: ledger.vehicles.len(),
            vehicles_served: served.len(),
            total_bits: total,
            total_tbyte: total as f64 / TBYTE_BITS,
            mean_served_time: ledger.mean_served_time(),
            mean_vehicle_bits: mean(served.iter().map(|v| v.delivered_bits as f64).collect())
                .unwrap_or(0.0),
            mean_sinr_db: mean(ledger.sinr_db_samples()),
            mean_rate: mean(ledger.rate_samples()),
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Write every output of a run into `dir`:
/// `summary.json`, `vehicles.csv`, `samples.csv`, `steps.csv`,
/// `beams.jsonl` and the four `cdf_*.csv` tables.
pub fn write_run_outputs(
    dir: &Path,
    ledger: &MetricsLedger,
    config: &RunConfig,
    cdf_points: usize,
) -> Result<RunSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let summary = RunSummary::new(ledger, config);
    let mut f = create(&dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    writeln!(f).map_err(|e| Error::io(dir.join("summary.json"), e))?;

    write_rows(&dir.join("vehicles.csv"), ledger.vehicles.values())?;
    write_rows(&dir.join("samples.csv"), &ledger.samples)?;
    #[derive(Serialize)]
    struct StepRow {
        step: u32,
        vehicles: usize,
        delivered_bits: u64,
    }
    write_rows(
        &dir.join("steps.csv"),
        ledger.steps.iter().map(|s| StepRow {
            step: s.step,
            vehicles: s.vehicles,
            delivered_bits: s.delivered_bits,
        }),
    )?;
    let configs: Vec<_> = ledger.steps.iter().flat_map(|s| s.configs.iter().cloned()).collect();
    write_beam_configs(&configs, create(&dir.join("beams.jsonl"))?)?;

    let served: Vec<_> = ledger.served().collect();
    let tables = [
        ("cdf_sinr_db.csv", ledger.sinr_db_samples()),
        ("cdf_rate.csv", ledger.rate_samples()),
        ("cdf_served_time.csv", served.iter().map(|v| v.served_time).collect()),
        (
            "cdf_vehicle_bits.csv",
            served.iter().map(|v| v.delivered_bits as f64).collect(),
        ),
    ];
    for (name, samples) in tables {
        let path = dir.join(name);
        if samples.is_empty() {
            log::warn!("no samples for {}, table left empty", path.display());
            let mut f = create(&path)?;
            writeln!(f, "{CDF_HEADER} mean= count=0\nvalue,fraction").map_err(|e| Error::io(&path, e))?;
            continue;
        }
        write_cdf(&emit_cdf(&samples, cdf_points)?, create(&path)?)?;
    }
    Ok(summary)
}

/// Where a matrix cell gets its scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    /// Scenario descriptor file.
    File(PathBuf),
    Intersection(IntersectionParams),
    Corridor(CorridorParams),
}

impl ScenarioSource {
    pub fn load(&self) -> Result<Scenario> {
        match self {
            ScenarioSource::File(p) => load_scenario(p),
            ScenarioSource::Intersection(p) => synthesize_intersection(p),
            ScenarioSource::Corridor(c) => synthesize_corridor(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    pub id: String,
    pub scenario: String,
    pub strategy: Strategy,
    pub n_beams: usize,
    pub width: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentMatrix {
    pub scenarios: BTreeMap<String, ScenarioSource>,
    pub cells: Vec<MatrixCell>,
    /// Settings shared by every cell; strategy and seed are overridden.
    pub base: RunConfig,
}

/// On-disk form: every combination of the listed values becomes a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub format: String,
    pub scenarios: BTreeMap<String, ScenarioSource>,
    pub strategies: Vec<Strategy>,
    pub beams: Vec<usize>,
    pub widths: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub run: RunConfig,
}

impl ExperimentMatrix {
    pub fn new(
        scenarios: BTreeMap<String, ScenarioSource>,
        cells: Vec<MatrixCell>,
        base: RunConfig,
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Config("experiment matrix has no cells".into()));
        }
        let mut ids = BTreeSet::new();
        for c in &cells {
            if !ids.insert(c.id.as_str()) {
                return Err(Error::Config(format!("duplicate cell id `{}`", c.id)));
            }
            if !scenarios.contains_key(&c.scenario) {
                return Err(Error::Config(format!(
                    "cell `{}` names unknown scenario `{}`",
                    c.id, c.scenario
                )));
            }
        }
        Ok(ExperimentMatrix {
            scenarios,
            cells,
            base,
        })
    }

    /// Cartesian product, ordered by scenario, beams, width, seed, strategy.
    pub fn grid(
        scenarios: BTreeMap<String, ScenarioSource>,
        strategies: &[Strategy],
        beams: &[usize],
        widths: &[f64],
        seeds: &[u64],
        base: RunConfig,
    ) -> Result<Self> {
        let mut cells = Vec::new();
        for name in scenarios.keys() {
            for &n in beams {
                for &a in widths {
                    for &seed in seeds {
                        for &strategy in strategies {
                            cells.push(MatrixCell {
                                id: format!("{name}-{strategy}-n{n}-a{a}-s{seed}"),
                                scenario: name.clone(),
                                strategy,
                                n_beams: n,
                                width: a,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        Self::new(scenarios, cells, base)
    }

    pub fn from_file(file: MatrixFile) -> Result<Self> {
        if file.format != MATRIX_FORMAT {
            return Err(Error::Config(format!(
                "unsupported matrix format `{}`, expected `{MATRIX_FORMAT}`",
                file.format
            )));
        }
        Self::grid(
            file.scenarios,
            &file.strategies,
            &file.beams,
            &file.widths,
            &file.seeds,
            file.run,
        )
    }

    /// Load a matrix file; relative scenario paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file: MatrixFile = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for src in file.scenarios.values_mut() {
            if let ScenarioSource::File(p) = src {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Self::from_file(file)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub id: String,
    pub scenario: String,
    pub strategy: Strategy,
    pub n_beams: usize,
    pub width: f64,
    pub seed: u64,
    pub ok: bool,
    pub error: Option<String>,
    pub total_bits: Option<u64>,
    pub total_tbyte: Option<f64>,
    pub vehicles_served: Option<usize>,
    pub mean_served_time: Option<f64>,
    pub mean_sinr_db: Option<f64>,
    /// TL total over OPTIMUM total for the same scenario, N, A and seed.
    pub tl_over_optimum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub n_beams: usize,
    pub width: f64,
    pub seed: u64,
    pub tl_bits: u64,
    pub optimum_bits: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixReport {
    pub rows: Vec<CellSummary>,
    pub comparison: Vec<ComparisonRow>,
    /// Ledgers of the cells that succeeded, by cell id.
    pub ledgers: BTreeMap<String, MetricsLedger>,
}

impl MatrixReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok).count()
    }
}

/// Run every cell. A failing cell (bad scenario, oversized optimum
/// instance, ...) gets an error row and the others still run.
pub fn run_matrix(
    matrix: &ExperimentMatrix,
    tables: Arc<GainTables>,
    cqi: Arc<CqiTable>,
) -> MatrixReport {
    let loaded: BTreeMap<&str, std::result::Result<Scenario, String>> = matrix
        .scenarios
        .iter()
        .map(|(name, src)| (name.as_str(), src.load().map_err(|e| e.to_string())))
        .collect();
    let results: Vec<(MatrixCell, std::result::Result<MetricsLedger, String>)> = matrix
        .cells
        .par_iter()
        .map(|cell| {
            let result = loaded[cell.scenario.as_str()].clone().and_then(|s| {
                let s = s
                    .with_beam_budget(cell.n_beams, cell.width)
                    .map_err(|e| e.to_string())?;
                let cfg = RunConfig {
                    strategy: cell.strategy,
                    seed: cell.seed,
                    ..matrix.base.clone()
                };
                run(&s, &cfg, tables.clone(), cqi.clone()).map_err(|e| e.to_string())
            });
            if let Err(e) = &result {
                log::error!("cell `{}` failed: {e}", cell.id);
            }
            (cell.clone(), result)
        })
        .collect();

    type Group = (String, usize, u64, u64);
    let key = |c: &MatrixCell| -> Group { (c.scenario.clone(), c.n_beams, c.width.to_bits(), c.seed) };
    let mut totals: BTreeMap<Group, (Option<u64>, Option<u64>)> = BTreeMap::new();
    for (cell, r) in &results {
        if let Ok(l) = r {
            let e = totals.entry(key(cell)).or_default();
            match cell.strategy {
                Strategy::Tl => e.0 = Some(l.total_bits()),
                Strategy::Optimum => e.1 = Some(l.total_bits()),
                _ => {}
            }
        }
    }
    let ratio = |tl: u64, opt: u64| if opt == 0 { f64::NAN } else { tl as f64 / opt as f64 };
    let mut comparison = Vec::new();
    for (cell, _) in &results {
        if cell.strategy != Strategy::Tl {
            continue;
        }
        if let Some((Some(tl), Some(opt))) = totals.get(&key(cell)) {
            comparison.push(ComparisonRow {
                scenario: cell.scenario.clone(),
                n_beams: cell.n_beams,
                width: cell.width,
                seed: cell.seed,
                tl_bits: *tl,
                optimum_bits: *opt,
                ratio: ratio(*tl, *opt),
            });
        }
    }

    let mut rows = Vec::with_capacity(results.len());
    let mut ledgers = BTreeMap::new();
    for (cell, r) in results {
        let cfg = RunConfig {
            strategy: cell.strategy,
            seed: cell.seed,
            ..matrix.base.clone()
        };
        let tl_over_optimum = match (cell.strategy, totals.get(&key(&cell))) {
            (Strategy::Tl | Strategy::Optimum, Some((Some(tl), Some(opt)))) => Some(ratio(*tl, *opt)),
            _ => None,
        };
        let mut row = CellSummary {
            id: cell.id.clone(),
            scenario: cell.scenario.clone(),
            strategy: cell.strategy,
            n_beams: cell.n_beams,
            width: cell.width,
            seed: cell.seed,
            ok: r.is_ok(),
            error: None,
            total_bits: None,
            total_tbyte: None,
            vehicles_served: None,
            mean_served_time: None,
            mean_sinr_db: None,
            tl_over_optimum,
        };
        match r {
            Ok(ledger) => {
                let s = RunSummary::new(&ledger, &cfg);
                row.total_bits = Some(s.total_bits);
                row.total_tbyte = Some(s.total_tbyte);
                row.vehicles_served = Some(s.vehicles_served);
                row.mean_served_time = Some(s.mean_served_time);
                row.mean_sinr_db = s.mean_sinr_db;
                ledgers.insert(cell.id, ledger);
            }
            Err(e) => row.error = Some(e),
        }
        rows.push(row);
    }
    MatrixReport {
        rows,
        comparison,
        ledgers,
    }
}

/// Write `matrix_summary.csv`, `matrix_comparison.csv` and one output
/// directory per successful cell under `dir`.
pub fn write_matrix_outputs(
    dir: &Path,
    matrix: &ExperimentMatrix,
    report: &MatrixReport,
    cdf_points: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_rows(&dir.join("matrix_summary.csv"), &report.rows)?;
    write_rows(&dir.join("matrix_comparison.csv"), &report.comparison)?;
    for cell in &matrix.cells {
        if let Some(ledger) = report.ledgers.get(&cell.id) {
            let cfg = RunConfig {
                strategy: cell.strategy,
                seed: cell.seed,
                ..matrix.base.clone()
            };
            write_run_outputs(&dir.join(&cell.id), ledger, &cfg, cdf_points)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_examples() {
        let c = emit_cdf(&[4.0, 2.0, 1.0, 3.0], 4).unwrap();
        assert_eq!(c.points, [(1.0, 0.25), (2.0, 0.5), (3.0, 0.75), (4.0, 1.0)]);
        assert_eq!(c.mean, 2.5);
        let c = emit_cdf(&[7.0; 5], 3).unwrap();
        assert!(c.points.iter().all(|p| p.0 == 7.0));
        assert_eq!(c.points.last().unwrap().1, 1.0);
        assert!(emit_cdf(&[], 4).is_err());
    }

    #[test]
    fn more_points_than_samples() {
        let c = emit_cdf(&[1.0, 2.0], 4).unwrap();
        assert_eq!(c.points, [(1.0, 0.25), (1.0, 0.5), (2.0, 0.75), (2.0, 1.0)]);
    }
}
