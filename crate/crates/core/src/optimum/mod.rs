//! Beam-design feasibility, the data objective, and an exhaustive optimum for
//! small instances.

mod brute;
mod constraints;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use brute::{brute_force_optimum, OptimumConfig, OptimumResult};
pub use constraints::{check_feasible, Verdict, Violation, FEASIBILITY_TOLERANCE};

use crate::error::{Error, Result};
use crate::radio::{PlacedConfig, StepRadio};
use crate::strategies::BeamConfig;

/// A beam identified by its gNB and its position in that gNB's config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeamRef {
    pub gnb: u32,
    pub beam: usize,
}

/// `helper` supports `target`: coherently (CoMP-like) or by staying silent
/// (ABS-like).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pairing {
    pub helper: BeamRef,
    pub target: BeamRef,
}

/// Fraction of a step a beam spends on a vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub beam: BeamRef,
    pub vehicle: String,
    pub sigma: f64,
}

/// All design and scheduling decisions for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalAssignment {
    pub step: u32,
    pub configs: Vec<BeamConfig>,
    pub schedule: Vec<ScheduleEntry>,
    #[serde(default)]
    pub comp: Vec<Pairing>,
    #[serde(default)]
    pub abs: Vec<Pairing>,
}

impl GlobalAssignment {
    pub fn new(step: u32, configs: Vec<BeamConfig>) -> Self {
        GlobalAssignment {
            step,
            configs,
            schedule: Vec::new(),
            comp: Vec::new(),
            abs: Vec::new(),
        }
    }
}

/// Write records as JSON lines.
pub fn write_json_lines<T: Serialize, W: Write>(items: &[T], mut w: W) -> Result<()> {
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n").map_err(|e| Error::io("<json lines output>", e))?;
    }
    Ok(())
}

/// Data sent in one transmission, in whole bits.
pub fn delivered_bits(sigma: f64, rate: f64, step_duration: f64) -> u64 {
    (sigma * rate * step_duration).floor() as u64
}

/// Assignment put on air: placed configs plus lookups from beam references
/// to canonical positions.
pub(crate) struct OnAir {
    pub placed: Vec<PlacedConfig>,
    /// `(config index, canonical index)` for each `BeamRef`.
    pub index: BTreeMap<BeamRef, (usize, usize)>,
}

impl OnAir {
    pub fn new(step: &StepRadio, configs: &[BeamConfig]) -> Result<Self> {
        let mut placed = Vec::with_capacity(configs.len());
        let mut index = BTreeMap::new();
        for (ci, c) in configs.iter().enumerate() {
            let g = step.gnb_index(c.gnb_id).ok_or_else(|| {
                Error::Infeasible(format!("config for unknown gNB {}", c.gnb_id))
            })?;
            let pc = step.place(g, &c.beams);
            for (pos, b) in pc.beams.iter().enumerate() {
                index.insert(
                    BeamRef {
                        gnb: c.gnb_id,
                        beam: b.source,
                    },
                    (ci, pos),
                );
            }
            placed.push(pc);
        }
        Ok(OnAir { placed, index })
    }

    /// SINR of `v` served by `(ci, i)`, with optional coherent helpers and
    /// silenced beams. Helpers of the served beam do not interfere with it.
    pub fn sinr(
        &self,
        step: &StepRadio,
        ci: usize,
        i: usize,
        v: usize,
        helpers: &[(usize, usize)],
        silent: &[(usize, usize)],
    ) -> Result<f64> {
        if helpers.is_empty() && silent.is_empty() {
            return step.sinr(&self.placed, ci, i, v);
        }
        let pc = &self.placed[ci];
        let serving_gnb = pc.gnb;
        let mut signal = step.contribution(pc, i, v, true)?;
        if !helpers.is_empty() {
            let mut amp = signal.sqrt();
            for &(hc, hi) in helpers {
                let hpc = &self.placed[hc];
                let aligned = step.rx_aligned(v, serving_gnb, hpc.gnb);
                amp += step.contribution(hpc, hi, v, aligned)?.sqrt();
            }
            signal = amp * amp;
        }
        let skip = |c: usize, j: usize| {
            (c == ci && j == i) || helpers.contains(&(c, j)) || silent.contains(&(c, j))
        };
        let mut den = step.radio.noise();
        den += step.interference(pc, v, serving_gnb, |j| skip(ci, j))?;
        for (oc, other) in self.placed.iter().enumerate() {
            if oc != ci {
                den += step.interference(other, v, serving_gnb, |j| skip(oc, j))?;
            }
        }
        Ok(signal / den)
    }
}

/// Total data, in bits, that the assignment delivers during its step:
/// `sum sigma * R * dt` with `R` the exclusive per-beam effective rate.
pub fn objective_value(assignment: &GlobalAssignment, step: &StepRadio) -> Result<u64> {
    let verdict = check_feasible(assignment, step.radio.scenario);
    if !verdict.feasible {
        return Err(Error::Infeasible(format!(
            "{} violated constraint(s), first: {:?}",
            verdict.violations.len(),
            verdict.violations[0]
        )));
    }
    if assignment.step != step.step {
        return Err(Error::Infeasible(format!(
            "assignment for step {} evaluated at step {}",
            assignment.step, step.step
        )));
    }
    let air = OnAir::new(step, &assignment.configs)?;
    let resolve = |r: &BeamRef| -> Result<(usize, usize)> {
        air.index
            .get(r)
            .copied()
            .ok_or_else(|| Error::Infeasible(format!("unknown beam {r:?}")))
    };
    let silent: Vec<(usize, usize)> = assignment
        .abs
        .iter()
        .map(|p| resolve(&p.helper))
        .collect::<Result<_>>()?;
    let dt = step.radio.scenario.step_duration();
    let mut total = 0u64;
    for e in &assignment.schedule {
        if e.sigma <= 0.0 {
            continue;
        }
        let (ci, i) = resolve(&e.beam)?;
        let v = step.vehicle_index(&e.vehicle).ok_or_else(|| {
            Error::Infeasible(format!("vehicle `{}` absent at step {}", e.vehicle, step.step))
        })?;
        let helpers: Vec<(usize, usize)> = assignment
            .comp
            .iter()
            .filter(|p| p.target == e.beam)
            .map(|p| resolve(&p.helper))
            .collect::<Result<_>>()?;
        let sinr = air.sinr(step, ci, i, v, &helpers, &silent)?;
        total += delivered_bits(e.sigma, step.rate(sinr), dt);
    }
    Ok(total)
}
