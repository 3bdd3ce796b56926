#![allow(dead_code)]

use beamsim_core::scenario::{
    synthesize_corridor, CorridorParams, GnbSite, LightPhases, Scenario, ScenarioParts,
    VehicleSample,
};
use beamsim_core::geometry::ElementType;

/// Two-intersection corridor at rush-hour density.
pub fn busy_corridor(n_beams: usize, width: f64, seed: u64) -> Scenario {
    let mut c = CorridorParams::default();
    c.intersection.n_steps = 120;
    c.intersection.warmup_steps = 60;
    c.intersection.arrival_rate = 0.5;
    c.intersection.seed = seed;
    c.intersection.n_beams = n_beams;
    c.intersection.max_width = width;
    synthesize_corridor(&c).expect("valid corridor")
}

pub fn vehicle(step: u32, id: &str, x: f64, y: f64) -> VehicleSample {
    VehicleSample {
        step,
        vehicle_id: id.into(),
        x,
        y,
        speed: 0.0,
        heading: 0.0,
    }
}

/// Vehicle at `range` metres and `bearing` degrees from `(x0, y0)`.
pub fn vehicle_at(step: u32, id: &str, x0: f64, y0: f64, bearing: f64, range: f64) -> VehicleSample {
    let b = bearing.to_radians();
    vehicle(step, id, x0 + range * b.cos(), y0 + range * b.sin())
}

pub fn site(id: u32, x: f64, y: f64, n_beams: usize, width: f64) -> GnbSite {
    let mut g = GnbSite::new(id, x, y, ElementType::Iso);
    g.n_beams_max = n_beams;
    g.max_width = width;
    g
}

pub fn scenario(gnbs: Vec<GnbSite>, samples: Vec<VehicleSample>) -> Scenario {
    Scenario::new(ScenarioParts::new(gnbs, samples, LightPhases::default())).expect("valid scenario")
}
