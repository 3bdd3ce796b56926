//! Synthetic signalized intersections.
//!
//! Each arm is a straight road on the axis from the intersection centre at a
//! fixed azimuth. Vehicles arrive at the far end of an arm, follow the vehicle
//! ahead at a minimum gap, stop at the stop line unless the light for their
//! approach is green, cross the centre and leave on a randomly chosen exit
//! arm.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GnbSite, LightPhases, LightState, Scenario, ScenarioParts, VehicleSample};
use crate::channel::ChannelFamily;
use crate::error::{Error, Result};
use crate::geometry::{ElementType, UpaConfig};
use crate::rng::{Purpose, StreamKey};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntersectionParams {
    /// 3 or 4.
    pub arms: usize,
    /// Metres.
    pub arm_length: f64,
    /// Vehicles per second per arm.
    pub arrival_rate: f64,
    /// Full signal cycle, in steps.
    pub light_period: u32,
    pub n_steps: u32,
    /// Steps simulated before recording starts, so the trace opens with
    /// traffic already on the arms.
    pub warmup_steps: u32,
    pub seed: u64,
    /// Arms whose light stays red for the whole run.
    pub always_red: Vec<usize>,
    pub step_duration: f64,
    /// m/s.
    pub free_speed: f64,
    /// Minimum front-to-front spacing in metres.
    pub min_gap: f64,
    /// Distance of the stop line from the centre in metres.
    pub stop_line: f64,
    pub family: ChannelFamily,
    pub element: ElementType,
    pub n_beams: usize,
    pub max_width: f64,
}

impl Default for IntersectionParams {
    fn default() -> Self {
        IntersectionParams {
            arms: 4,
            arm_length: 100.0,
            arrival_rate: 0.1,
            light_period: 30,
            n_steps: 120,
            warmup_steps: 0,
            seed: 1,
            always_red: Vec::new(),
            step_duration: 1.0,
            free_speed: 10.0,
            min_gap: 7.5,
            stop_line: 5.0,
            family: ChannelFamily::Model3gpp,
            element: ElementType::Iso,
            n_beams: 2,
            max_width: 5.0,
        }
    }
}

impl IntersectionParams {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.arms == 3 || self.arms == 4) {
            return bad(format!("intersection needs 3 or 4 arms, got {}", self.arms));
        }
        if !(self.arrival_rate >= 0.0) || !self.arrival_rate.is_finite() {
            return bad(format!("arrival rate must be >= 0, got {}", self.arrival_rate));
        }
        if !(self.arm_length > self.stop_line + self.min_gap) {
            return bad(format!("arm length {} too short", self.arm_length));
        }
        if self.light_period < 2 * self.groups() as u32 {
            return bad(format!("light period {} too short", self.light_period));
        }
        if !(self.step_duration > 0.0 && self.free_speed > 0.0 && self.min_gap > 0.0) {
            return bad("step duration, speed and gap must be positive".into());
        }
        if let Some(a) = self.always_red.iter().find(|&&a| a >= self.arms) {
            return bad(format!("always-red arm {a} does not exist"));
        }
        Ok(())
    }

    fn groups(&self) -> usize {
        if self.arms == 4 {
            2
        } else {
            3
        }
    }

    /// Arm azimuths in degrees: 0/90/180/270 or 0/120/240.
    pub fn arm_azimuths(&self) -> Vec<f64> {
        (0..self.arms)
            .map(|i| (i * 360 / self.arms) as f64)
            .collect()
    }

    /// Fixed-time signal plan. Opposite arms of a 4-way intersection share a
    /// phase; 3-way arms each get their own. A fifth of every green phase is
    /// yellow.
    fn state(&self, arm: usize, step: u32, offset: u32) -> LightState {
        if self.always_red.contains(&arm) {
            return LightState::Red;
        }
        let groups = self.groups() as u32;
        let period = self.light_period;
        let pos = (step + offset) % period;
        let start = |g: u32| g * period / groups;
        let active = (0..groups).rev().find(|&g| pos >= start(g)).unwrap_or(0);
        if arm as u32 % groups != active {
            return LightState::Red;
        }
        let len = start(active + 1) - start(active);
        let yellow = (len / 5).max(1);
        if pos - start(active) < len - yellow {
            LightState::Green
        } else {
            LightState::Yellow
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorridorParams {
    /// Intersection template; both intersections share it.
    pub intersection: IntersectionParams,
    /// Centre-to-centre distance in metres.
    pub spacing: f64,
    /// Always-red arms of the second intersection.
    pub always_red_second: Vec<usize>,
}

impl Default for CorridorParams {
    fn default() -> Self {
        CorridorParams {
            intersection: IntersectionParams {
                arm_length: 60.0,
                ..IntersectionParams::default()
            },
            spacing: 150.0,
            always_red_second: Vec::new(),
        }
    }
}

/// One intersection with a gNB (id 0) at its centre, colocated with light `L0`.
pub fn synthesize_intersection(p: &IntersectionParams) -> Result<Scenario> {
    p.validate()?;
    let mut lights = LightPhases::new(0..p.n_steps);
    let (samples, schedule) = simulate(p, (0.0, 0.0), "", 0, 0);
    lights.insert("L0", &p.arm_azimuths(), &schedule)?;
    let mut gnb = GnbSite::new(0, 0.0, 0.0, p.element);
    gnb.n_beams_max = p.n_beams;
    gnb.max_width = p.max_width;
    gnb.light = Some("L0".into());
    build(p, vec![gnb], samples, lights)
}

/// Two intersections `spacing` metres apart on the x axis, gNBs 0 and 1,
/// lights `L0` and `L1`, the second signal plan shifted by half a cycle.
pub fn synthesize_corridor(c: &CorridorParams) -> Result<Scenario> {
    let p = &c.intersection;
    p.validate()?;
    let second = IntersectionParams {
        always_red: c.always_red_second.clone(),
        ..p.clone()
    };
    second.validate()?;
    if !(c.spacing > 2.0 * p.arm_length) {
        return Err(Error::Config(format!(
            "spacing {} must exceed twice the arm length",
            c.spacing
        )));
    }
    let mut lights = LightPhases::new(0..p.n_steps);
    let (mut samples, s0) = simulate(p, (0.0, 0.0), "a.", 0, 0);
    let (more, s1) = simulate(&second, (c.spacing, 0.0), "b.", p.light_period / 2, 1);
    samples.extend(more);
    lights.insert("L0", &p.arm_azimuths(), &s0)?;
    lights.insert("L1", &second.arm_azimuths(), &s1)?;
    let mut gnbs = Vec::new();
    for (id, x) in [(0u32, 0.0), (1, c.spacing)] {
        let mut g = GnbSite::new(id, x, 0.0, p.element);
        g.n_beams_max = p.n_beams;
        g.max_width = p.max_width;
        g.light = Some(format!("L{id}"));
        gnbs.push(g);
    }
    build(p, gnbs, samples, lights)
}

fn build(
    p: &IntersectionParams,
    gnbs: Vec<GnbSite>,
    samples: Vec<VehicleSample>,
    lights: LightPhases,
) -> Result<Scenario> {
    let mut parts = ScenarioParts::new(gnbs, samples, lights);
    parts.step_duration = p.step_duration;
    parts.family = p.family;
    parts.element = p.element;
    parts.vehicle_upa = UpaConfig::new(8, 8, p.element)?;
    Scenario::new(parts)
}

#[derive(Debug, Clone)]
struct Car {
    id: String,
    arm: usize,
    exit: usize,
    inbound: bool,
    /// Distance from the centre along the current arm.
    r: f64,
    speed: f64,
}

fn unit(az_deg: f64) -> (f64, f64) {
    match az_deg as i64 {
        0 => (1.0, 0.0),
        90 => (0.0, 1.0),
        180 => (-1.0, 0.0),
        270 => (0.0, -1.0),
        _ => {
            let a = az_deg.to_radians();
            (a.cos(), a.sin())
        }
    }
}

fn simulate(
    p: &IntersectionParams,
    centre: (f64, f64),
    prefix: &str,
    offset: u32,
    salt: u64,
) -> (Vec<VehicleSample>, Vec<Vec<LightState>>) {
    let azimuths = p.arm_azimuths();
    let dt = p.step_duration;
    let step_len = p.free_speed * dt;
    let p_arrival = (p.arrival_rate * dt).min(1.0);
    let mut cars: Vec<Car> = Vec::new();
    let mut serial = 0u64;
    let mut samples = Vec::new();
    let mut schedule = Vec::with_capacity(p.n_steps as usize);

    for k in 0..p.warmup_steps + p.n_steps {
        let states: Vec<LightState> = (0..p.arms).map(|a| p.state(a, k, offset)).collect();

        for car in cars.iter_mut().filter(|c| !c.inbound) {
            car.r += step_len;
            car.speed = p.free_speed;
        }
        cars.retain(|c| c.inbound || c.r <= p.arm_length);

        for arm in 0..p.arms {
            let mut queue: Vec<usize> = (0..cars.len())
                .filter(|&i| cars[i].inbound && cars[i].arm == arm)
                .collect();
            queue.sort_by(|&a, &b| cars[a].r.total_cmp(&cars[b].r));
            let mut leader: Option<f64> = None;
            for i in queue {
                let car = &mut cars[i];
                let mut target = car.r - step_len;
                if states[arm] != LightState::Green && car.r >= p.stop_line {
                    target = target.max(p.stop_line);
                }
                if let Some(l) = leader {
                    target = target.max(l + p.min_gap);
                }
                target = target.min(car.r);
                car.speed = (car.r - target) / dt;
                car.r = target;
                leader = Some(target);
                if car.r < 0.0 {
                    car.inbound = false;
                    car.arm = car.exit;
                    car.r = -car.r;
                }
            }
        }

        for arm in 0..p.arms {
            let mut rng = StreamKey::new(p.seed, Purpose::Arrival)
                .step(k as u64)
                .slot(arm as u64)
                .gnb(salt)
                .rng();
            if !(rng.random::<f64>() < p_arrival) {
                continue;
            }
            let room = cars
                .iter()
                .filter(|c| c.inbound && c.arm == arm)
                .all(|c| c.r <= p.arm_length - p.min_gap);
            if !room {
                continue;
            }
            let mut route = StreamKey::new(p.seed, Purpose::Route)
                .vehicle(serial)
                .gnb(salt)
                .rng();
            let exit = (arm + 1 + route.random_range(0..p.arms - 1)) % p.arms;
            cars.push(Car {
                id: format!("{prefix}veh{serial:05}"),
                arm,
                exit,
                inbound: true,
                r: p.arm_length,
                speed: p.free_speed,
            });
            serial += 1;
        }

        let Some(recorded) = k.checked_sub(p.warmup_steps) else {
            continue;
        };
        for car in &cars {
            let (ux, uy) = unit(azimuths[car.arm]);
            let heading = if car.inbound {
                (azimuths[car.arm] + 180.0) % 360.0
            } else {
                azimuths[car.arm]
            };
            samples.push(VehicleSample {
                step: recorded,
                vehicle_id: car.id.clone(),
                x: centre.0 + car.r * ux,
                y: centre.1 + car.r * uy,
                speed: car.speed,
                heading,
            });
        }
        schedule.push(states);
    }
    (samples, schedule)
}
