//! Time-stepped simulation: beam design, association, scheduling and metric
//! accumulation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::GainTables;
use crate::error::{Error, Result};
use crate::link::{to_db, CqiTable};
use crate::optimum::{brute_force_optimum, delivered_bits, OptimumConfig};
use crate::radio::{PlacedConfig, RadioConfig, ScenarioRadio, StepRadio};
use crate::scenario::Scenario;
use crate::strategies::{dynamic_design, queue_statistics, static_design, tl_design, BeamConfig, DesignConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Strategy {
    Static,
    Dynamic,
    Tl,
    Optimum,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheduler {
    #[default]
    EqualShare,
    MaxRate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Association {
    /// Covering beam with the highest expected received power.
    #[default]
    Strongest,
    /// Closest gNB that has a covering beam, then its strongest covering beam.
    Nearest,
    /// Every beam serves the covered vehicle with the highest rate; a
    /// vehicle may be served by several beams. This is the optimizer's rule.
    PerBeam,
}

macro_rules! keyword_enum {
    ($t:ty, $what:literal, $($name:literal => $v:expr),+ $(,)?) => {
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_uppercase().replace('-', "_").as_str() {
                    $($name => Ok($v),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", $what, " `{}`"), s))),
                }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let name = match self {
                    $(x if *x == $v => $name,)+
                    _ => unreachable!(),
                };
                f.write_str(name)
            }
        }
    };
}

keyword_enum!(Strategy, "strategy",
    "STATIC" => Strategy::Static,
    "DYNAMIC" => Strategy::Dynamic,
    "TL" => Strategy::Tl,
    "OPTIMUM" => Strategy::Optimum,
);
keyword_enum!(Scheduler, "scheduler",
    "EQUAL_SHARE" => Scheduler::EqualShare,
    "MAX_RATE" => Scheduler::MaxRate,
);
keyword_enum!(Association, "association",
    "STRONGEST" => Association::Strongest,
    "NEAREST" => Association::Nearest,
    "PER_BEAM" => Association::PerBeam,
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub scheduler: Scheduler,
    pub association: Association,
    pub radio: RadioConfig,
    pub design: DesignConfig,
    pub optimum: OptimumConfig,
    /// Let TL break ties between same-colour approaches by their queue
    /// lengths pooled over the whole trace.
    pub tl_queue_stats: bool,
    /// Keep per-sample rows (SINR and rate of every transmission).
    pub keep_samples: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: Strategy::Tl,
            seed: 1,
            scheduler: Scheduler::default(),
            association: Association::default(),
            radio: RadioConfig::default(),
            design: DesignConfig::default(),
            optimum: OptimumConfig::default(),
            tl_queue_stats: true,
            keep_samples: true,
        }
    }
}

impl RunConfig {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        RunConfig {
            strategy,
            seed,
            ..RunConfig::default()
        }
    }

    /// The optimizer's rules on the link side: per-beam association and
    /// all time to the best vehicle.
    pub fn optimizer_rules(mut self) -> Self {
        self.association = Association::PerBeam;
        self.scheduler = Scheduler::MaxRate;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleMetrics {
    pub vehicle_id: String,
    pub present_steps: u32,
    pub served_steps: u32,
    /// Seconds.
    pub served_time: f64,
    pub delivered_bits: u64,
}

/// One transmission: a beam sending to a vehicle during a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub step: u32,
    pub vehicle_id: String,
    pub gnb: u32,
    pub beam: usize,
    pub sinr_db: f64,
    /// Effective rate in bit/s.
    pub rate: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub vehicles: usize,
    pub delivered_bits: u64,
    pub configs: Vec<BeamConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsLedger {
    pub vehicles: BTreeMap<String, VehicleMetrics>,
    pub samples: Vec<SampleRow>,
    pub steps: Vec<StepRecord>,
}

impl MetricsLedger {
    pub fn total_bits(&self) -> u64 {
        self.vehicles.values().map(|v| v.delivered_bits).sum()
    }

    /// Vehicles served at least once.
    pub fn served(&self) -> impl Iterator<Item = &VehicleMetrics> {
        self.vehicles.values().filter(|v| v.served_steps > 0)
    }

    /// Mean served time over vehicles served at least once; 0 if none was.
    pub fn mean_served_time(&self) -> f64 {
        let (n, sum) = self
            .served()
            .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v.served_time));
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Transmissions that carried data (`sigma > 0` and rate > 0).
    pub fn served_samples(&self) -> impl Iterator<Item = &SampleRow> {
        self.samples.iter().filter(|s| s.sigma > 0.0 && s.rate > 0.0)
    }

    /// SINR of served transmissions, in dB.
    pub fn sinr_db_samples(&self) -> Vec<f64> {
        self.served_samples().map(|s| s.sinr_db).collect()
    }

    /// Effective rate of served transmissions.
    pub fn rate_samples(&self) -> Vec<f64> {
        self.served_samples().map(|s| s.rate).collect()
    }

    fn absorb(&mut self, out: StepOutcome, dt: f64) {
        let mut step_bits = 0u64;
        for id in out.present {
            let m = self.vehicles.entry(id.clone()).or_insert_with(|| VehicleMetrics {
                vehicle_id: id,
                ..VehicleMetrics::default()
            });
            m.present_steps += 1;
        }
        for (id, bits, served) in out.per_vehicle {
            let m = self.vehicles.get_mut(&id).expect("served vehicles are present");
            m.delivered_bits += bits;
            step_bits += bits;
            if served {
                m.served_steps += 1;
                m.served_time = m.served_steps as f64 * dt;
            }
        }
        self.samples.extend(out.samples);
        self.steps.push(StepRecord {
            step: out.step,
            vehicles: out.n_vehicles,
            delivered_bits: step_bits,
            configs: out.configs,
        });
    }
}

/// Result of one step, merged into the ledger in step order.
struct StepOutcome {
    step: u32,
    n_vehicles: usize,
    present: Vec<String>,
    /// `(vehicle, bits, served)` for vehicles that got any airtime.
    per_vehicle: Vec<(String, u64, bool)>,
    samples: Vec<SampleRow>,
    configs: Vec<BeamConfig>,
}

/// Serving `(config index, canonical beam index)` for vehicle `v`, or none
/// if no beam covers it.
pub fn associate(
    step: &StepRadio,
    placed: &[PlacedConfig],
    v: usize,
    rule: Association,
) -> Result<Option<(usize, usize)>> {
    let strongest = |only: Option<usize>| -> Result<Option<(usize, usize)>> {
        let mut best: Option<(f64, usize, usize)> = None;
        for (ci, pc) in placed.iter().enumerate() {
            if only.is_some_and(|o| o != ci) {
                continue;
            }
            for (i, b) in pc.beams.iter().enumerate() {
                if !b.covers(v) {
                    continue;
                }
                let p = step.expected_power(pc, i, v)?;
                if best.is_none_or(|(bp, _, _)| p > bp) {
                    best = Some((p, ci, i));
                }
            }
        }
        Ok(best.map(|(_, ci, i)| (ci, i)))
    };
    match rule {
        Association::Strongest => strongest(None),
        Association::Nearest => {
            let mut nearest: Option<(f64, usize)> = None;
            for (ci, pc) in placed.iter().enumerate() {
                if !pc.beams.iter().any(|b| b.covers(v)) {
                    continue;
                }
                let d = step.link(pc.gnb, v).map_or(f64::INFINITY, |l| l.distance);
                if nearest.is_none_or(|(bd, _)| d < bd) {
                    nearest = Some((d, ci));
                }
            }
            match nearest {
                Some((_, ci)) => strongest(Some(ci)),
                None => Ok(None),
            }
        }
        Association::PerBeam => Err(Error::Config(
            "per-beam association is decided per beam, not per vehicle".into(),
        )),
    }
}

/// Time fractions for the vehicles a beam serves, given their rates.
pub fn schedule(rates: &[f64], rule: Scheduler) -> Vec<f64> {
    if rates.is_empty() {
        return Vec::new();
    }
    match rule {
        Scheduler::EqualShare => vec![1.0 / rates.len() as f64; rates.len()],
        Scheduler::MaxRate => {
            let mut best = 0;
            for (i, &r) in rates.iter().enumerate() {
                if r > rates[best] {
                    best = i;
                }
            }
            let mut out = vec![0.0; rates.len()];
            out[best] = 1.0;
            out
        }
    }
}

/// Everything fixed for a whole run.
struct Plan<'a> {
    radio: ScenarioRadio<'a>,
    config: &'a RunConfig,
    static_configs: Vec<BeamConfig>,
    queues: Vec<BTreeMap<u16, f64>>,
}

impl Plan<'_> {
    fn design(&self, step: &StepRadio) -> Result<Vec<BeamConfig>> {
        let scenario = self.radio.scenario;
        let k = step.step;
        let cfg = &self.config.design;
        match self.config.strategy {
            Strategy::Static => Ok(self.static_configs.iter().map(|c| c.at_step(k)).collect()),
            Strategy::Dynamic => Ok(scenario
                .gnbs()
                .iter()
                .map(|g| dynamic_design(scenario, g, k, cfg))
                .collect()),
            Strategy::Tl => scenario
                .gnbs()
                .iter()
                .enumerate()
                .map(|(gi, g)| {
                    let q = self.config.tl_queue_stats.then(|| &self.queues[gi]);
                    tl_design(scenario, g, k, cfg, q)
                })
                .collect(),
            Strategy::Optimum => {
                let r = brute_force_optimum(step, &self.config.optimum)?;
                Ok(r.assignment.configs)
            }
        }
    }

    fn step(&self, k: u32) -> Result<StepOutcome> {
        let step = self.radio.step(k, self.config.seed)?;
        let configs = self.design(&step)?;
        let placed: Vec<PlacedConfig> = configs
            .iter()
            .map(|c| {
                let g = step.gnb_index(c.gnb_id).expect("designs come from scenario gNBs");
                step.place(g, &c.beams)
            })
            .collect();
        let dt = self.radio.scenario.step_duration();
        let vehicles = step.vehicles();

        // (config, beam) -> served vehicles with their SINR.
        let mut served: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        let with_context = |e: Error, ci: usize, v: usize| Error::Step {
            step: k,
            gnb: configs[ci].gnb_id,
            message: format!("vehicle `{}`: {e}", vehicles[v].vehicle_id),
        };
        match self.config.association {
            Association::PerBeam => {
                for (ci, pc) in placed.iter().enumerate() {
                    for (i, b) in pc.beams.iter().enumerate() {
                        let mut best: Option<(f64, usize, f64)> = None;
                        for &v in &b.coverage {
                            let s = step.sinr(&placed, ci, i, v).map_err(|e| with_context(e, ci, v))?;
                            let r = step.rate(s);
                            if best.is_none_or(|(br, _, _)| r > br) {
                                best = Some((r, v, s));
                            }
                        }
                        if let Some((_, v, s)) = best {
                            served.insert((ci, i), vec![(v, s)]);
                        }
                    }
                }
            }
            rule => {
                for v in 0..vehicles.len() {
                    if let Some((ci, i)) = associate(&step, &placed, v, rule)? {
                        let s = step.sinr(&placed, ci, i, v).map_err(|e| with_context(e, ci, v))?;
                        served.entry((ci, i)).or_default().push((v, s));
                    }
                }
            }
        }

        let mut bits: BTreeMap<usize, (u64, bool)> = BTreeMap::new();
        let mut samples = Vec::new();
        for ((ci, i), list) in &served {
            let rates: Vec<f64> = list.iter().map(|&(_, s)| step.rate(s)).collect();
            let sigmas = schedule(&rates, self.config.scheduler);
            for ((&(v, s), &rate), &sigma) in list.iter().zip(&rates).zip(&sigmas) {
                if sigma <= 0.0 {
                    continue;
                }
                let e = bits.entry(v).or_insert((0, false));
                e.0 += delivered_bits(sigma, rate, dt);
                e.1 |= rate > 0.0;
                if self.config.keep_samples {
                    samples.push(SampleRow {
                        step: k,
                        vehicle_id: vehicles[v].vehicle_id.clone(),
                        gnb: configs[*ci].gnb_id,
                        beam: placed[*ci].beams[*i].source,
                        sinr_db: to_db(s),
                        rate,
                        sigma,
                    });
                }
            }
        }
        Ok(StepOutcome {
            step: k,
            n_vehicles: vehicles.len(),
            present: vehicles.iter().map(|v| v.vehicle_id.clone()).collect(),
            per_vehicle: bits
                .into_iter()
                .map(|(v, (b, s))| (vehicles[v].vehicle_id.clone(), b, s))
                .collect(),
            samples,
            configs,
        })
    }
}

/// Simulate every step of the scenario.
///
/// Steps are processed in parallel and merged in step order; the ledger
/// only depends on the scenario and the config.
pub fn run(
    scenario: &Scenario,
    config: &RunConfig,
    tables: Arc<GainTables>,
    cqi: Arc<CqiTable>,
) -> Result<MetricsLedger> {
    let radio = ScenarioRadio::new(scenario, config.radio, tables, cqi)?;
    let static_configs = if config.strategy == Strategy::Static {
        scenario
            .gnbs()
            .iter()
            .map(|g| static_design(scenario, g, &config.design))
            .collect()
    } else {
        Vec::new()
    };
    let queues = if config.strategy == Strategy::Tl && config.tl_queue_stats {
        scenario
            .gnbs()
            .iter()
            .map(|g| queue_statistics(scenario, g, &config.design))
            .collect()
    } else {
        Vec::new()
    };
    let plan = Plan {
        radio,
        config,
        static_configs,
        queues,
    };
    let outcomes: Vec<StepOutcome> = scenario
        .steps()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|k| plan.step(k))
        .collect::<Result<_>>()?;
    let mut ledger = MetricsLedger::default();
    for o in outcomes {
        ledger.absorb(o, scenario.step_duration());
    }
    Ok(ledger)
}

/// `run` with the built-in gain and CQI tables.
pub fn run_default(scenario: &Scenario, config: &RunConfig) -> Result<MetricsLedger> {
    run(
        scenario,
        config,
        Arc::new(GainTables::builtin()),
        Arc::new(CqiTable::builtin()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedulers() {
        assert_eq!(schedule(&[7.0], Scheduler::EqualShare), [1.0]);
        assert_eq!(schedule(&[7.0], Scheduler::MaxRate), [1.0]);
        assert_eq!(schedule(&[1.0; 4], Scheduler::EqualShare), [0.25; 4]);
        assert_eq!(schedule(&[5.0, 3.0], Scheduler::MaxRate), [1.0, 0.0]);
        assert_eq!(schedule(&[3.0, 5.0, 5.0], Scheduler::MaxRate), [0.0, 1.0, 0.0]);
        assert!(schedule(&[], Scheduler::MaxRate).is_empty());
    }

    #[test]
    fn keywords_round_trip() {
        for s in [Strategy::Static, Strategy::Dynamic, Strategy::Tl, Strategy::Optimum] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("max-rate".parse::<Scheduler>().unwrap(), Scheduler::MaxRate);
        assert_eq!("per_beam".parse::<Association>().unwrap(), Association::PerBeam);
        assert!("fastest".parse::<Strategy>().is_err());
    }
}
