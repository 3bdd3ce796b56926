//! Beam-design heuristics: Static and Dynamic clustering of observed vehicle
//! bearings, and the traffic-light (TL) design that points beams at
//! approaches with a red light.

mod cluster;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use cluster::{
    circular_diameter, cluster_direction, complete_linkage_cluster, AngularObservation, Cluster,
};

use crate::error::{Error, Result};
use crate::geometry::{circular_distance, relative_bearing, wrap_degrees, Point3};
use crate::scenario::{GnbSite, LightState, Scenario};

/// One beam of a gNB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beam {
    /// Degrees, counterclockwise from east.
    pub azimuth: f64,
    /// Degrees above the horizontal.
    pub elevation: f64,
    /// Half-power width in degrees.
    pub width: f64,
    /// Watts.
    pub power: f64,
}

/// A gNB's beams at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub gnb_id: u32,
    pub step: u32,
    pub beams: Vec<Beam>,
}

impl BeamConfig {
    pub fn empty(gnb_id: u32, step: u32) -> Self {
        BeamConfig {
            gnb_id,
            step,
            beams: Vec::new(),
        }
    }

    /// Same beams at another step.
    pub fn at_step(&self, step: u32) -> Self {
        BeamConfig {
            step,
            ..self.clone()
        }
    }
}

/// Write configs as JSON lines.
pub fn write_beam_configs<W: Write>(configs: &[BeamConfig], mut w: W) -> Result<()> {
    for c in configs {
        serde_json::to_writer(&mut w, c)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io("<beam config output>", e))?;
    }
    Ok(())
}

/// Knobs shared by the designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    /// Vehicles farther than this (horizontal metres) are not observed.
    pub observation_radius_m: f64,
    /// Ground distance the nominal beam elevation aims at.
    pub nominal_target_m: f64,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            observation_radius_m: 200.0,
            nominal_target_m: 50.0,
        }
    }
}

fn nominal_elevation(gnb: &GnbSite, scenario: &Scenario, cfg: &DesignConfig) -> f64 {
    (scenario.vehicle_height() - gnb.position.z)
        .atan2(cfg.nominal_target_m)
        .to_degrees()
}

/// Bearings (azimuths) of the vehicles a gNB observes at `step`.
pub fn observations_at(
    scenario: &Scenario,
    gnb: &GnbSite,
    step: u32,
    cfg: &DesignConfig,
) -> Vec<AngularObservation> {
    scenario
        .vehicles_at(step)
        .iter()
        .filter_map(|v| {
            let p = scenario.vehicle_position(v);
            if gnb.position.horizontal_distance(&p) > cfg.observation_radius_m {
                return None;
            }
            relative_bearing(&gnb.position, &p)
                .ok()
                .map(|b| AngularObservation::new(b.azimuth()))
        })
        .collect()
}

/// Cluster observations with diameter `A`, rank clusters by weight (ties to
/// the lower direction) and keep up to `N` of them, skipping any whose beam
/// would overlap one already kept.
pub fn design_from_observations(
    gnb: &GnbSite,
    step: u32,
    obs: &[AngularObservation],
    elevation: f64,
) -> BeamConfig {
    if obs.is_empty() {
        log::debug!("gNB {} step {step}: no observations, no beams", gnb.id);
        return BeamConfig::empty(gnb.id, step);
    }
    let width = gnb.max_width;
    let clusters = complete_linkage_cluster(obs, width);
    let mut ranked: Vec<(u64, f64)> = clusters
        .iter()
        .map(|c| {
            let az: Vec<f64> = c.members.iter().map(|&i| obs[i].azimuth).collect();
            (c.weight, cluster_direction(&az))
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.total_cmp(&b.1)));
    let directions = pick_non_overlapping(ranked.into_iter().map(|(_, d)| d), width, gnb.n_beams_max);
    equal_power_config(gnb, step, directions, width, elevation)
}

fn pick_non_overlapping(candidates: impl Iterator<Item = f64>, width: f64, n: usize) -> Vec<f64> {
    let mut chosen: Vec<f64> = Vec::new();
    for d in candidates {
        if chosen.len() == n {
            break;
        }
        if chosen.iter().all(|&c| circular_distance(c, d) >= width) {
            chosen.push(d);
        }
    }
    chosen
}

fn equal_power_config(
    gnb: &GnbSite,
    step: u32,
    mut directions: Vec<f64>,
    width: f64,
    elevation: f64,
) -> BeamConfig {
    directions.sort_by(f64::total_cmp);
    let power = if directions.is_empty() {
        0.0
    } else {
        gnb.p_tot / directions.len() as f64
    };
    BeamConfig {
        gnb_id: gnb.id,
        step,
        beams: directions
            .into_iter()
            .map(|azimuth| Beam {
                azimuth: wrap_degrees(azimuth),
                elevation,
                width,
                power,
            })
            .collect(),
    }
}

/// Time-invariant design from observations pooled over every step. The
/// returned config carries the scenario's first step.
pub fn static_design(scenario: &Scenario, gnb: &GnbSite, cfg: &DesignConfig) -> BeamConfig {
    let obs: Vec<AngularObservation> = scenario
        .steps()
        .flat_map(|k| observations_at(scenario, gnb, k, cfg))
        .collect();
    design_from_observations(
        gnb,
        scenario.steps().start,
        &obs,
        nominal_elevation(gnb, scenario, cfg),
    )
}

/// Design from the observations of step `k` only.
pub fn dynamic_design(scenario: &Scenario, gnb: &GnbSite, k: u32, cfg: &DesignConfig) -> BeamConfig {
    let obs = observations_at(scenario, gnb, k, cfg);
    design_from_observations(gnb, k, &obs, nominal_elevation(gnb, scenario, cfg))
}

fn state_rank(s: LightState) -> u8 {
    match s {
        LightState::Red => 0,
        LightState::Yellow => 1,
        LightState::Green => 2,
    }
}

/// Point beams at the approaches of the colocated light, red first, then
/// yellow, then green. Within a colour, approaches with a longer queue in
/// `queue_stats` (keyed by approach azimuth) go first, then lower azimuths.
/// Uses only light phases and approach geometry.
pub fn tl_design(
    scenario: &Scenario,
    gnb: &GnbSite,
    k: u32,
    cfg: &DesignConfig,
    queue_stats: Option<&BTreeMap<u16, f64>>,
) -> Result<BeamConfig> {
    let light = gnb.light.as_deref().ok_or_else(|| Error::Step {
        step: k,
        gnb: gnb.id,
        message: "TL design needs a colocated traffic light".into(),
    })?;
    let mut approaches = scenario.lights().states_at(light, k)?;
    let queue = |a: u16| queue_stats.and_then(|q| q.get(&a)).copied().unwrap_or(0.0);
    approaches.sort_by(|x, y| {
        state_rank(x.1)
            .cmp(&state_rank(y.1))
            .then(queue(y.0).total_cmp(&queue(x.0)))
            .then(x.0.cmp(&y.0))
    });
    let width = gnb.max_width;
    let directions = pick_non_overlapping(
        approaches.iter().map(|(a, _)| *a as f64),
        width,
        gnb.n_beams_max,
    );
    Ok(equal_power_config(
        gnb,
        k,
        directions,
        width,
        nominal_elevation(gnb, scenario, cfg),
    ))
}

/// Approach queue lengths (stopped vehicles per approach azimuth) pooled over
/// the whole scenario, for use as TL's aggregate statistics.
pub fn queue_statistics(scenario: &Scenario, gnb: &GnbSite, cfg: &DesignConfig) -> BTreeMap<u16, f64> {
    let mut out = BTreeMap::new();
    let Some(light) = gnb.light.as_deref() else {
        return out;
    };
    let Some(l) = scenario.lights().light(light) else {
        return out;
    };
    for &a in l.approaches() {
        out.insert(a, 0.0);
    }
    for k in scenario.steps() {
        for v in scenario.vehicles_at(k) {
            if v.speed > 0.5 {
                continue;
            }
            let p: Point3 = scenario.vehicle_position(v);
            if gnb.position.horizontal_distance(&p) > cfg.observation_radius_m {
                continue;
            }
            let Ok(b) = relative_bearing(&gnb.position, &p) else {
                continue;
            };
            let nearest = l
                .approaches()
                .iter()
                .min_by(|x, y| {
                    circular_distance(**x as f64, b.azimuth())
                        .total_cmp(&circular_distance(**y as f64, b.azimuth()))
                })
                .copied();
            if let Some(a) = nearest {
                *out.entry(a).or_insert(0.0) += 1.0;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ElementType;
    use crate::scenario::{LightPhases, ScenarioParts, VehicleSample};

    fn site(n: usize, width: f64) -> GnbSite {
        let mut g = GnbSite::new(0, 0.0, 0.0, ElementType::Iso);
        g.n_beams_max = n;
        g.max_width = width;
        g.light = Some("L".into());
        g
    }

    fn at(step: u32, id: &str, az_deg: f64, r: f64) -> VehicleSample {
        let a = az_deg.to_radians();
        VehicleSample {
            step,
            vehicle_id: id.into(),
            x: r * a.cos(),
            y: r * a.sin(),
            speed: 0.0,
            heading: 0.0,
        }
    }

    fn lights(states: &[(f64, LightState)], steps: u32) -> LightPhases {
        let mut p = LightPhases::new(0..steps);
        let az: Vec<f64> = states.iter().map(|s| s.0).collect();
        let row: Vec<LightState> = states.iter().map(|s| s.1).collect();
        p.insert("L", &az, &vec![row; steps as usize]).unwrap();
        p
    }

    fn scenario(mut g: GnbSite, samples: Vec<VehicleSample>, l: LightPhases) -> Scenario {
        if l.is_empty() {
            g.light = None;
        }
        Scenario::new(ScenarioParts::new(vec![g], samples, l)).unwrap()
    }

    #[test]
    fn static_picks_dominant_road() {
        let g = site(2, 5.0);
        let mut samples = Vec::new();
        for k in 0..3 {
            samples.push(at(k, &format!("e{k}"), 0.0, 40.0));
            samples.push(at(k, &format!("w{k}"), 180.0, 40.0));
        }
        samples.push(at(0, "n", 90.0, 40.0));
        let s = scenario(g.clone(), samples, LightPhases::default());
        let c = static_design(&s, &g, &DesignConfig::default());
        let az: Vec<f64> = c.beams.iter().map(|b| b.azimuth.round()).collect();
        assert_eq!(az, [0.0, 180.0]);
        assert!(c.beams.iter().all(|b| b.power == 0.5 && b.width == 5.0));
    }

    #[test]
    fn fewer_clusters_than_beams() {
        let g = site(4, 5.0);
        let s = scenario(g.clone(), vec![at(0, "a", 37.0, 30.0)], LightPhases::default());
        let c = dynamic_design(&s, &g, 0, &DesignConfig::default());
        assert_eq!(c.beams.len(), 1);
        assert!((c.beams[0].azimuth - 37.0).abs() < 1e-9);
        assert_eq!(c.beams[0].power, 1.0);
    }

    #[test]
    fn equal_weights_prefer_lower_azimuth() {
        let g = site(1, 5.0);
        let s = scenario(
            g.clone(),
            vec![at(0, "a", 200.0, 30.0), at(0, "b", 100.0, 30.0)],
            LightPhases::default(),
        );
        let c = dynamic_design(&s, &g, 0, &DesignConfig::default());
        assert!((c.beams[0].azimuth - 100.0).abs() < 1e-9);
    }

    #[test]
    fn no_vehicles_no_beams() {
        let g = site(2, 5.0);
        let s = scenario(g.clone(), vec![], LightPhases::default());
        assert!(static_design(&s, &g, &DesignConfig::default()).beams.is_empty());
    }

    #[test]
    fn far_vehicles_are_not_observed() {
        let g = site(2, 5.0);
        let s = scenario(g.clone(), vec![at(0, "a", 10.0, 500.0)], LightPhases::default());
        assert!(dynamic_design(&s, &g, 0, &DesignConfig::default()).beams.is_empty());
    }

    #[test]
    fn tl_points_at_red() {
        use LightState::*;
        let g = site(2, 5.0);
        let l = lights(&[(0.0, Green), (90.0, Red), (180.0, Green), (270.0, Red)], 1);
        let s = scenario(g.clone(), vec![], l);
        let c = tl_design(&s, &g, 0, &DesignConfig::default(), None).unwrap();
        let az: Vec<f64> = c.beams.iter().map(|b| b.azimuth).collect();
        assert_eq!(az, [90.0, 270.0]);
    }

    #[test]
    fn tl_all_green_lowest_first() {
        use LightState::*;
        let g = site(2, 5.0);
        let l = lights(&[(0.0, Green), (90.0, Green), (180.0, Green), (270.0, Green)], 1);
        let s = scenario(g.clone(), vec![], l);
        let c = tl_design(&s, &g, 0, &DesignConfig::default(), None).unwrap();
        let az: Vec<f64> = c.beams.iter().map(|b| b.azimuth).collect();
        assert_eq!(az, [0.0, 90.0]);
    }

    #[test]
    fn tl_fills_remaining_beams() {
        use LightState::*;
        let g = site(4, 5.0);
        let l = lights(&[(0.0, Green), (90.0, Red), (180.0, Yellow), (270.0, Red)], 1);
        let s = scenario(g.clone(), vec![], l);
        let c = tl_design(&s, &g, 0, &DesignConfig::default(), None).unwrap();
        assert_eq!(c.beams.len(), 4);
        assert!(c.beams.iter().all(|b| b.power == 0.25));
        let g2 = site(3, 5.0);
        let c = tl_design(&s, &g2, 0, &DesignConfig::default(), None).unwrap();
        let az: Vec<f64> = c.beams.iter().map(|b| b.azimuth).collect();
        assert_eq!(az, [90.0, 180.0, 270.0]);
    }

    #[test]
    fn tl_queue_stats_break_red_ties() {
        use LightState::*;
        let g = site(1, 5.0);
        let l = lights(&[(90.0, Red), (270.0, Red)], 1);
        let s = scenario(g.clone(), vec![], l);
        let q: BTreeMap<u16, f64> = [(90, 1.0), (270, 5.0)].into_iter().collect();
        let c = tl_design(&s, &g, 0, &DesignConfig::default(), Some(&q)).unwrap();
        assert_eq!(c.beams[0].azimuth, 270.0);
    }

    #[test]
    fn tl_without_light_fails() {
        let mut g = site(1, 5.0);
        g.light = None;
        let s = scenario(g.clone(), vec![], LightPhases::default());
        assert!(tl_design(&s, &g, 0, &DesignConfig::default(), None).is_err());
    }
}
