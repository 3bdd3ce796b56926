//! Traffic-light phases: `t,light_id,approach_azimuth,state`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mobility::check_version;
use crate::error::{Error, Result};

pub const LIGHTS_HEADER: &str = "# beamsim-lights/1";
const COLUMNS: [&str; 4] = ["t", "light_id", "approach_azimuth", "state"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LightState {
    Red,
    Yellow,
    Green,
}

impl LightState {
    pub fn as_str(&self) -> &'static str {
        match self {
            LightState::Red => "RED",
            LightState::Yellow => "YELLOW",
            LightState::Green => "GREEN",
        }
    }

    /// Full names in any case, or SUMO signal letters (`r`, `y`, `g`, `G`).
    pub fn parse(token: &str) -> Option<LightState> {
        match token {
            "r" => return Some(LightState::Red),
            "y" => return Some(LightState::Yellow),
            "g" | "G" => return Some(LightState::Green),
            _ => {}
        }
        match token.to_ascii_uppercase().as_str() {
            "RED" => Some(LightState::Red),
            "YELLOW" => Some(LightState::Yellow),
            "GREEN" => Some(LightState::Green),
            _ => None,
        }
    }
}

/// Approach azimuth rounded to the nearest whole degree in `0..360`.
pub fn quantize_azimuth(az: f64) -> u16 {
    (az.round().rem_euclid(360.0)) as u16 % 360
}

/// One light: its approaches and their state at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Light {
    approaches: Vec<u16>,
    /// `states[step_index * approaches.len() + approach_index]`.
    states: Vec<LightState>,
}

impl Light {
    pub fn approaches(&self) -> &[u16] {
        &self.approaches
    }
}

/// Phase map for all lights over a contiguous step range.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LightPhases {
    first_step: u32,
    n_steps: u32,
    lights: BTreeMap<String, Light>,
}

impl LightPhases {
    /// Empty map covering `steps`; add lights with [`LightPhases::insert`].
    pub fn new(steps: Range<u32>) -> Self {
        LightPhases {
            first_step: steps.start,
            n_steps: steps.end.saturating_sub(steps.start),
            lights: BTreeMap::new(),
        }
    }

    /// Add a light. `schedule[i][a]` is the state of approach `a` at step
    /// `first_step + i`.
    pub fn insert(
        &mut self,
        id: &str,
        approaches: &[f64],
        schedule: &[Vec<LightState>],
    ) -> Result<()> {
        if self.lights.contains_key(id) {
            return Err(Error::Scenario(format!("duplicate light `{id}`")));
        }
        let quantized: Vec<u16> = approaches.iter().map(|&a| quantize_azimuth(a)).collect();
        let mut order: Vec<usize> = (0..quantized.len()).collect();
        order.sort_by_key(|&i| quantized[i]);
        let sorted: Vec<u16> = order.iter().map(|&i| quantized[i]).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Scenario(format!("light `{id}` has duplicate approaches")));
        }
        if schedule.len() != self.n_steps as usize {
            return Err(Error::Scenario(format!(
                "light `{id}` schedule has {} steps, expected {}",
                schedule.len(),
                self.n_steps
            )));
        }
        let mut states = Vec::with_capacity(schedule.len() * sorted.len());
        for row in schedule {
            if row.len() != sorted.len() {
                return Err(Error::Scenario(format!(
                    "light `{id}` schedule row has {} states for {} approaches",
                    row.len(),
                    sorted.len()
                )));
            }
            states.extend(order.iter().map(|&i| row[i]));
        }
        self.lights.insert(
            id.to_string(),
            Light {
                approaches: sorted,
                states,
            },
        );
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.lights.is_empty()
    }

    pub fn step_range(&self) -> Option<Range<u32>> {
        (self.n_steps > 0 && !self.lights.is_empty())
            .then(|| self.first_step..self.first_step + self.n_steps)
    }

    pub fn light_ids(&self) -> impl Iterator<Item = &str> {
        self.lights.keys().map(String::as_str)
    }

    pub fn light(&self, id: &str) -> Option<&Light> {
        self.lights.get(id)
    }

    /// State of one approach (azimuth in degrees, quantized) at `step`.
    pub fn state(&self, light: &str, step: u32, approach: f64) -> Result<LightState> {
        let q = quantize_azimuth(approach);
        let missing = || Error::MissingPhase {
            step,
            light: light.to_string(),
            approach: q.to_string(),
        };
        let l = self.lights.get(light).ok_or_else(missing)?;
        let a = l.approaches.binary_search(&q).map_err(|_| missing())?;
        let i = self.step_index(step).ok_or_else(missing)?;
        Ok(l.states[i * l.approaches.len() + a])
    }

    /// `(approach azimuth, state)` for every approach of `light` at `step`,
    /// in increasing azimuth order.
    pub fn states_at(&self, light: &str, step: u32) -> Result<Vec<(u16, LightState)>> {
        let l = self.lights.get(light).ok_or_else(|| Error::MissingPhase {
            step,
            light: light.to_string(),
            approach: "*".into(),
        })?;
        let i = self.step_index(step).ok_or_else(|| Error::MissingPhase {
            step,
            light: light.to_string(),
            approach: "*".into(),
        })?;
        let n = l.approaches.len();
        Ok(l.approaches
            .iter()
            .copied()
            .zip(l.states[i * n..(i + 1) * n].iter().copied())
            .collect())
    }

    fn step_index(&self, step: u32) -> Option<usize> {
        let i = step.checked_sub(self.first_step)?;
        (i < self.n_steps).then_some(i as usize)
    }
}

pub fn load_lights(path: &Path) -> Result<LightPhases> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_lights(f, &path.display().to_string())
}

/// Parse a lights file. Every light must report every one of its approaches
/// at every step between the first and last step in the file.
pub fn parse_lights<R: Read>(mut reader: R, file: &str) -> Result<LightPhases> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io(file, e))?;
    check_version(&text, file, LIGHTS_HEADER)?;
    if text.lines().all(|l| l.trim().is_empty() || l.starts_with('#')) {
        return Ok(LightPhases::default());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let header_line = rdr.position().line().saturating_sub(1).max(1) as usize;
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::parse(file, header_line, format!("missing column `{name}`"))
        })?;
    }

    let mut records: BTreeMap<(String, u16, u32), LightState> = BTreeMap::new();
    let mut approaches: BTreeMap<String, BTreeSet<u16>> = BTreeMap::new();
    let (mut t_min, mut t_max) = (u32::MAX, 0u32);
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            rec.get(idx[i])
                .ok_or_else(|| Error::parse(file, line, format!("missing field `{}`", COLUMNS[i])))
        };
        let t_raw = field(0)?;
        let t: u32 = t_raw
            .parse()
            .map_err(|_| Error::parse(file, line, format!("bad time step `{t_raw}`")))?;
        let light = field(1)?.to_string();
        if light.is_empty() {
            return Err(Error::parse(file, line, "empty light id"));
        }
        let az_raw = field(2)?;
        let az: f64 = az_raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::parse(file, line, format!("bad approach azimuth `{az_raw}`")))?;
        let state_raw = field(3)?;
        let state = LightState::parse(state_raw)
            .ok_or_else(|| Error::parse(file, line, format!("unknown state `{state_raw}`")))?;
        let q = quantize_azimuth(az);
        if records.insert((light.clone(), q, t), state).is_some() {
            return Err(Error::parse(
                file,
                line,
                format!("duplicate state for light `{light}`, approach {q}, t={t}"),
            ));
        }
        approaches.entry(light).or_default().insert(q);
        t_min = t_min.min(t);
        t_max = t_max.max(t);
    }

    let mut phases = LightPhases::new(t_min..t_max + 1);
    for (light, set) in &approaches {
        let azs: Vec<u16> = set.iter().copied().collect();
        let mut schedule = Vec::with_capacity(phases.n_steps as usize);
        for t in t_min..=t_max {
            let mut row = Vec::with_capacity(azs.len());
            for &a in &azs {
                let s = records
                    .get(&(light.clone(), a, t))
                    .ok_or_else(|| Error::MissingPhase {
                        step: t,
                        light: light.clone(),
                        approach: a.to_string(),
                    })?;
                row.push(*s);
            }
            schedule.push(row);
        }
        let az_f: Vec<f64> = azs.iter().map(|&a| a as f64).collect();
        phases.insert(light, &az_f, &schedule)?;
    }
    Ok(phases)
}

/// Write phases in normalized form, sorted by `(t, light_id, approach)`.
pub fn write_lights<W: Write>(phases: &LightPhases, writer: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    let io = |e| Error::io("<lights output>", e);
    writeln!(w, "{LIGHTS_HEADER}").map_err(io)?;
    writeln!(w, "{}", COLUMNS.join(",")).map_err(io)?;
    if let Some(range) = phases.step_range() {
        for t in range {
            for (id, light) in &phases.lights {
                let i = (t - phases.first_step) as usize;
                let n = light.approaches.len();
                for (a, s) in light.approaches.iter().zip(&light.states[i * n..(i + 1) * n]) {
                    writeln!(w, "{t},{id},{a},{}", s.as_str()).map_err(io)?;
                }
            }
        }
    }
    w.flush().map_err(io)
}
