//! Per-step radio state shared by the engine and the optimizer: link
//! geometry, LoS draws, beam coverage and keyed gain realizations.
//!
//! A gain sample is identified by `(seed, step, gNB, vehicle, regime,
//! ordinal)`, where the ordinal counts the gNB's earlier beams (in canonical
//! order) that fall in the same regime toward the vehicle. Two evaluations of
//! the same configuration therefore see the same numbers, whichever code path
//! or thread computes them.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    Alignment, ChannelModel, GainTables, LinkRegime, MisalignmentAngles,
};
use crate::error::{Error, Result};
use crate::geometry::{circular_distance, relative_bearing, wrap_degrees};
use crate::link::{effective_rate, CqiTable, LinkBudgetConfig};
use crate::rng::{name_hash, Purpose, StreamKey};
use crate::scenario::{GnbSite, Scenario, VehicleSample};
use crate::strategies::Beam;

/// How beam elevation is chosen when a configuration is put on air.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ElevationPolicy {
    /// Aim at `near + fraction * (far - near)` over the ground distances of
    /// the vehicles the beam covers, or at `fallback_m` when it covers none.
    FarHalfCovered { fraction: f64, fallback_m: f64 },
    /// Keep the elevation stored in the beam.
    Fixed,
}

impl Default for ElevationPolicy {
    fn default() -> Self {
        ElevationPolicy::FarHalfCovered {
            fraction: 0.75,
            fallback_m: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioConfig {
    pub link: LinkBudgetConfig,
    /// LoS probability decay distance in metres.
    pub los_decay_m: f64,
    /// Vehicle receive beam half-power width in degrees.
    pub vehicle_beamwidth: f64,
    /// gNB-vehicle pairs farther apart than this neither serve nor interfere.
    pub link_radius_m: f64,
    pub elevation: ElevationPolicy,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            link: LinkBudgetConfig::default(),
            los_decay_m: 50.0,
            vehicle_beamwidth: 13.0,
            link_radius_m: 500.0,
            elevation: ElevationPolicy::default(),
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        if !(self.los_decay_m > 0.0) {
            return Err(Error::Config("LoS decay distance must be positive".into()));
        }
        if !(self.vehicle_beamwidth > 0.0 && self.vehicle_beamwidth <= 360.0) {
            return Err(Error::Config("vehicle beamwidth outside (0, 360]".into()));
        }
        if !(self.link_radius_m > 0.0) {
            return Err(Error::Config("link radius must be positive".into()));
        }
        if let ElevationPolicy::FarHalfCovered {
            fraction,
            fallback_m,
        } = self.elevation
        {
            if !(0.0..=1.0).contains(&fraction) || !(fallback_m > 0.0) {
                return Err(Error::Config("invalid elevation policy".into()));
            }
        }
        Ok(())
    }
}

/// Radio configuration bound to one scenario: per-gNB channel models plus
/// the tables.
#[derive(Debug, Clone)]
pub struct ScenarioRadio<'a> {
    pub scenario: &'a Scenario,
    pub config: RadioConfig,
    pub cqi: Arc<CqiTable>,
    models: Vec<ChannelModel>,
    n0: f64,
}

impl<'a> ScenarioRadio<'a> {
    pub fn new(
        scenario: &'a Scenario,
        config: RadioConfig,
        tables: Arc<GainTables>,
        cqi: Arc<CqiTable>,
    ) -> Result<Self> {
        config.validate()?;
        let nr = scenario.vehicle_upa().elements();
        let models = scenario
            .gnbs()
            .iter()
            .map(|g| {
                ChannelModel::new(
                    tables.clone(),
                    scenario.family(),
                    scenario.element(),
                    g.upa.elements(),
                    nr,
                    config.link.carrier_ghz,
                    config.los_decay_m,
                )
            })
            .collect();
        Ok(ScenarioRadio {
            scenario,
            config,
            cqi,
            models,
            n0: config.link.noise_watts(),
        })
    }

    pub fn with_defaults(scenario: &'a Scenario) -> Result<Self> {
        Self::new(
            scenario,
            RadioConfig::default(),
            Arc::new(GainTables::builtin()),
            Arc::new(CqiTable::builtin()),
        )
    }

    pub fn noise(&self) -> f64 {
        self.n0
    }

    /// Radio state at step `k` for run seed `seed`.
    pub fn step(&self, k: u32, seed: u64) -> Result<StepRadio<'_>> {
        StepRadio::new(self, k, seed)
    }
}

/// Geometry and propagation state of one gNB-vehicle pair at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkInfo {
    pub distance: f64,
    pub ground_distance: f64,
    /// Bearing of the vehicle from the gNB.
    pub azimuth: f64,
    pub elevation: f64,
    /// Bearing of the gNB from the vehicle.
    pub azimuth_from_vehicle: f64,
    pub los: bool,
    pub attenuation: f64,
}

/// A beam put on air: elevation resolved, coverage computed.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedBeam {
    pub beam: Beam,
    /// Position of the beam in the configuration it came from.
    pub source: usize,
    /// Indices of covered vehicles, increasing.
    pub coverage: Vec<usize>,
    /// Offset from the nearest sector centre (0 for isotropic elements).
    pub delta1: f64,
}

impl PlacedBeam {
    pub fn covers(&self, v: usize) -> bool {
        self.coverage.binary_search(&v).is_ok()
    }
}

/// One gNB's beams in canonical order: by coverage, sector offset, azimuth,
/// width.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedConfig {
    pub gnb: usize,
    pub beams: Vec<PlacedBeam>,
}

#[derive(Debug)]
pub struct StepRadio<'a> {
    pub radio: &'a ScenarioRadio<'a>,
    pub step: u32,
    pub seed: u64,
    vehicles: &'a [VehicleSample],
    vehicle_keys: Vec<u64>,
    /// `links[g * n_vehicles + v]`.
    links: Vec<Option<LinkInfo>>,
}

impl<'a> StepRadio<'a> {
    fn new(radio: &'a ScenarioRadio<'a>, k: u32, seed: u64) -> Result<Self> {
        let scenario = radio.scenario;
        let vehicles = scenario.vehicles_at(k);
        let vehicle_keys: Vec<u64> = vehicles.iter().map(|v| name_hash(&v.vehicle_id)).collect();
        let mut links = Vec::with_capacity(scenario.gnbs().len() * vehicles.len());
        for (gi, g) in scenario.gnbs().iter().enumerate() {
            for (vi, v) in vehicles.iter().enumerate() {
                let p = scenario.vehicle_position(v);
                let distance = g.position.distance(&p);
                if distance > radio.config.link_radius_m {
                    links.push(None);
                    continue;
                }
                let bearing = relative_bearing(&g.position, &p).map_err(|e| Error::Step {
                    step: k,
                    gnb: g.id,
                    message: format!("vehicle `{}`: {e}", v.vehicle_id),
                })?;
                let p_los = radio.models[gi].los_probability(distance)?;
                let mut rng = StreamKey::new(seed, Purpose::LineOfSight)
                    .step(k as u64)
                    .gnb(g.id as u64)
                    .vehicle(vehicle_keys[vi])
                    .rng();
                let los = rng.random::<f64>() < p_los;
                links.push(Some(LinkInfo {
                    distance,
                    ground_distance: g.position.horizontal_distance(&p),
                    azimuth: bearing.azimuth(),
                    elevation: bearing.elevation(),
                    azimuth_from_vehicle: wrap_degrees(bearing.azimuth() + 180.0),
                    los,
                    attenuation: radio.models[gi].attenuation(distance, los),
                }));
            }
        }
        Ok(StepRadio {
            radio,
            step: k,
            seed,
            vehicles,
            vehicle_keys,
            links,
        })
    }

    pub fn vehicles(&self) -> &[VehicleSample] {
        self.vehicles
    }

    pub fn n_vehicles(&self) -> usize {
        self.vehicles.len()
    }

    pub fn gnbs(&self) -> &[GnbSite] {
        self.radio.scenario.gnbs()
    }

    pub fn gnb_index(&self, id: u32) -> Option<usize> {
        self.gnbs().iter().position(|g| g.id == id)
    }

    pub fn vehicle_index(&self, id: &str) -> Option<usize> {
        self.vehicles
            .binary_search_by(|v| v.vehicle_id.as_str().cmp(id))
            .ok()
    }

    pub fn link(&self, g: usize, v: usize) -> Option<&LinkInfo> {
        self.links[g * self.vehicles.len() + v].as_ref()
    }

    /// Whether a beam of gNB `g` with this direction and width covers `v`.
    pub fn beam_covers(&self, g: usize, azimuth: f64, width: f64, v: usize) -> bool {
        self.link(g, v)
            .is_some_and(|l| circular_distance(azimuth, l.azimuth) <= width / 2.0)
    }

    pub fn coverage(&self, g: usize, azimuth: f64, width: f64) -> Vec<usize> {
        (0..self.vehicles.len())
            .filter(|&v| self.beam_covers(g, azimuth, width, v))
            .collect()
    }

    /// Elevation the policy assigns to a beam with this coverage.
    pub fn resolve_elevation(&self, g: usize, beam: &Beam, coverage: &[usize]) -> f64 {
        match self.radio.config.elevation {
            ElevationPolicy::Fixed => beam.elevation,
            ElevationPolicy::FarHalfCovered {
                fraction,
                fallback_m,
            } => {
                let mut near = f64::INFINITY;
                let mut far = f64::NEG_INFINITY;
                for &v in coverage {
                    if let Some(l) = self.link(g, v) {
                        near = near.min(l.ground_distance);
                        far = far.max(l.ground_distance);
                    }
                }
                let target = if near.is_finite() {
                    near + fraction * (far - near)
                } else {
                    fallback_m
                };
                let site = &self.gnbs()[g];
                let dz = self.radio.scenario.vehicle_height() - site.position.z;
                dz.atan2(target.max(1e-9)).to_degrees()
            }
        }
    }

    fn delta1(&self, g: usize, azimuth: f64) -> f64 {
        let centres = &self.gnbs()[g].sector_centers;
        if self.radio.scenario.element().sector_width().is_none() || centres.is_empty() {
            return 0.0;
        }
        centres
            .iter()
            .map(|&c| circular_distance(azimuth, c))
            .fold(f64::INFINITY, f64::min)
            .min(60.0)
    }

    pub fn place_beam(&self, g: usize, beam: &Beam, source: usize) -> PlacedBeam {
        let coverage = self.coverage(g, beam.azimuth, beam.width);
        let elevation = self.resolve_elevation(g, beam, &coverage);
        PlacedBeam {
            beam: Beam {
                elevation,
                ..*beam
            },
            source,
            delta1: self.delta1(g, beam.azimuth),
            coverage,
        }
    }

    pub fn place(&self, g: usize, beams: &[Beam]) -> PlacedConfig {
        let mut placed: Vec<PlacedBeam> = beams
            .iter()
            .enumerate()
            .map(|(i, b)| self.place_beam(g, b, i))
            .collect();
        sort_canonical(&mut placed);
        PlacedConfig { gnb: g, beams: placed }
    }

    /// Whether `v`'s receive beam, pointed at gNB `rx_gnb`, also takes in gNB `g`.
    pub fn rx_aligned(&self, v: usize, rx_gnb: usize, g: usize) -> bool {
        if g == rx_gnb {
            return true;
        }
        match (self.link(rx_gnb, v), self.link(g, v)) {
            (Some(a), Some(b)) => {
                circular_distance(a.azimuth_from_vehicle, b.azimuth_from_vehicle)
                    <= self.radio.config.vehicle_beamwidth / 2.0
            }
            _ => false,
        }
    }

    /// Received power `P * a * G` at `v` from beam `i` of `pc`, given whether
    /// the vehicle's receive beam takes in that gNB.
    pub fn contribution(&self, pc: &PlacedConfig, i: usize, v: usize, rx_aligned: bool) -> Result<f64> {
        let Some(link) = self.link(pc.gnb, v) else {
            return Ok(0.0);
        };
        let b = &pc.beams[i];
        let covers = b.covers(v);
        let ordinal = pc.beams[..i].iter().filter(|o| o.covers(v) == covers).count();
        let regime = LinkRegime::new(link.los, Alignment::from_ends(covers, rx_aligned));
        let mis = MisalignmentAngles::new(b.delta1, (b.beam.elevation - link.elevation).abs())?;
        let g = self.gain(pc.gnb, v, regime, ordinal, mis)?;
        Ok(b.beam.power * link.attenuation * g)
    }

    /// Keyed gain sample.
    pub fn gain(
        &self,
        g: usize,
        v: usize,
        regime: LinkRegime,
        ordinal: usize,
        mis: MisalignmentAngles,
    ) -> Result<f64> {
        let dist = self.radio.models[g].distribution(regime, mis)?;
        let mut rng = StreamKey::new(self.seed, Purpose::Gain(regime.code()))
            .step(self.step as u64)
            .gnb(self.gnbs()[g].id as u64)
            .vehicle(self.vehicle_keys[v])
            .slot(ordinal as u64)
            .rng();
        Ok(dist.sample(&mut rng))
    }

    /// Typical received power from beam `i` at `v` with both ends aligned,
    /// used for association.
    pub fn expected_power(&self, pc: &PlacedConfig, i: usize, v: usize) -> Result<f64> {
        let Some(link) = self.link(pc.gnb, v) else {
            return Ok(0.0);
        };
        let b = &pc.beams[i];
        let regime = LinkRegime::new(link.los, Alignment::FullyAligned);
        let mis = MisalignmentAngles::new(b.delta1, (b.beam.elevation - link.elevation).abs())?;
        let dist = self.radio.models[pc.gnb].distribution(regime, mis)?;
        Ok(b.beam.power * link.attenuation * dist.typical())
    }

    /// Sum of received power at `v` from the beams of `pc` for which `skip`
    /// is false, in canonical order; `rx_gnb` is where `v` points its
    /// receive beam.
    pub fn interference(
        &self,
        pc: &PlacedConfig,
        v: usize,
        rx_gnb: usize,
        skip: impl Fn(usize) -> bool,
    ) -> Result<f64> {
        if self.link(pc.gnb, v).is_none() {
            return Ok(0.0);
        }
        let aligned = self.rx_aligned(v, rx_gnb, pc.gnb);
        let mut sum = 0.0;
        for i in 0..pc.beams.len() {
            if !skip(i) {
                sum += self.contribution(pc, i, v, aligned)?;
            }
        }
        Ok(sum)
    }

    /// SINR of `v` served by beam `i` of `configs[serving]`, with every other
    /// beam on air interfering. Interference is accumulated as noise, then
    /// the serving gNB's other beams, then the other gNBs in order.
    pub fn sinr(&self, configs: &[PlacedConfig], serving: usize, i: usize, v: usize) -> Result<f64> {
        let pc = &configs[serving];
        let signal = self.contribution(pc, i, v, true)?;
        let mut den = self.radio.noise();
        den += self.interference(pc, v, pc.gnb, |j| j == i)?;
        for (ci, other) in configs.iter().enumerate() {
            if ci != serving {
                den += self.interference(other, v, pc.gnb, |_| false)?;
            }
        }
        Ok(signal / den)
    }

    pub fn rate(&self, sinr: f64) -> f64 {
        effective_rate(sinr, self.radio.config.link.bandwidth, &self.radio.cqi)
    }
}

pub fn sort_canonical(beams: &mut [PlacedBeam]) {
    beams.sort_by(|a, b| {
        a.coverage
            .cmp(&b.coverage)
            .then(a.delta1.total_cmp(&b.delta1))
            .then(a.beam.azimuth.total_cmp(&b.beam.azimuth))
            .then(a.beam.width.total_cmp(&b.beam.width))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ElementType;
    use crate::scenario::{GnbSite, LightPhases, ScenarioParts};

    fn scenario() -> Scenario {
        let samples = vec![
            VehicleSample {
                step: 0,
                vehicle_id: "a".into(),
                x: 40.0,
                y: 0.0,
                speed: 0.0,
                heading: 180.0,
            },
            VehicleSample {
                step: 0,
                vehicle_id: "b".into(),
                x: 0.0,
                y: 30.0,
                speed: 0.0,
                heading: 270.0,
            },
            VehicleSample {
                step: 0,
                vehicle_id: "far".into(),
                x: 900.0,
                y: 0.0,
                speed: 0.0,
                heading: 0.0,
            },
        ];
        Scenario::new(ScenarioParts::new(
            vec![GnbSite::new(0, 0.0, 0.0, ElementType::Iso)],
            samples,
            LightPhases::default(),
        ))
        .unwrap()
    }

    fn beam(az: f64) -> Beam {
        Beam {
            azimuth: az,
            elevation: 0.0,
            width: 5.0,
            power: 0.5,
        }
    }

    #[test]
    fn coverage_and_link_radius() {
        let s = scenario();
        let r = ScenarioRadio::with_defaults(&s).unwrap();
        let st = r.step(0, 1).unwrap();
        assert!(st.link(0, 2).is_none());
        assert_eq!(st.coverage(0, 0.0, 5.0), [0]);
        assert_eq!(st.coverage(0, 92.0, 5.0), [1]);
        assert!(st.coverage(0, 93.0, 5.0).is_empty());
    }

    #[test]
    fn elevation_aims_at_covered_vehicle() {
        let s = scenario();
        let r = ScenarioRadio::with_defaults(&s).unwrap();
        let st = r.step(0, 1).unwrap();
        let pc = st.place(0, &[beam(0.0)]);
        let expect = (-8.5f64).atan2(40.0).to_degrees();
        assert!((pc.beams[0].beam.elevation - expect).abs() < 1e-12);
        let empty = st.place(0, &[beam(200.0)]);
        let fallback = (-8.5f64).atan2(50.0).to_degrees();
        assert!((empty.beams[0].beam.elevation - fallback).abs() < 1e-12);
    }

    #[test]
    fn evaluation_is_reproducible() {
        let s = scenario();
        let r = ScenarioRadio::with_defaults(&s).unwrap();
        let a = r.step(0, 5).unwrap();
        let b = r.step(0, 5).unwrap();
        let pa = vec![a.place(0, &[beam(0.0), beam(90.0)])];
        let pb = vec![b.place(0, &[beam(90.0), beam(0.0)])];
        let sa = a.sinr(&pa, 0, 0, 0).unwrap();
        let sb = b.sinr(&pb, 0, 0, 0).unwrap();
        assert_eq!(sa.to_bits(), sb.to_bits());
        assert!(sa > 0.0);
    }

    #[test]
    fn removing_a_beam_never_lowers_sinr() {
        let s = scenario();
        let r = ScenarioRadio::with_defaults(&s).unwrap();
        let st = r.step(0, 9).unwrap();
        let both = vec![st.place(0, &[beam(0.0), beam(90.0)])];
        let alone = vec![st.place(0, &[beam(0.0)])];
        let with_interferer = st.sinr(&both, 0, 0, 0).unwrap();
        let without = st.sinr(&alone, 0, 0, 0).unwrap();
        assert!(without >= with_interferer);
    }
}
