//! World description: gNB sites, vehicle trajectories and traffic-light
//! phases, indexed by discrete time step.

mod descriptor;
mod lights;
mod mobility;
mod placement;
mod synth;

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use descriptor::{load_scenario, GnbDescriptor, ScenarioDescriptor, SCENARIO_FORMAT};
pub use lights::{
    load_lights, parse_lights, quantize_azimuth, write_lights, Light, LightPhases, LightState,
    LIGHTS_HEADER,
};
pub use mobility::{load_mobility, parse_mobility, write_mobility, MOBILITY_HEADER};
pub use placement::rank_lights_by_density;
pub use synth::{synthesize_corridor, synthesize_intersection, CorridorParams, IntersectionParams};

use crate::channel::ChannelFamily;
use crate::error::{Error, Result};
use crate::geometry::{wrap_degrees, ElementType, Point3, UpaConfig};

/// One vehicle position report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSample {
    pub step: u32,
    pub vehicle_id: String,
    pub x: f64,
    pub y: f64,
    /// m/s.
    pub speed: f64,
    /// Degrees, counterclockwise from east.
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    /// Smallest box holding every sample and gNB, or `None` if there are none.
    pub fn enclosing<'a>(
        samples: impl IntoIterator<Item = &'a VehicleSample>,
        gnbs: &[GnbSite],
    ) -> Option<Self> {
        let points = samples
            .into_iter()
            .map(|s| (s.x, s.y))
            .chain(gnbs.iter().map(|g| (g.position.x, g.position.y)));
        let mut bbox: Option<BoundingBox> = None;
        for (x, y) in points {
            let b = bbox.get_or_insert(BoundingBox {
                min_x: x,
                min_y: y,
                max_x: x,
                max_y: y,
            });
            b.min_x = b.min_x.min(x);
            b.min_y = b.min_y.min(y);
            b.max_x = b.max_x.max(x);
            b.max_y = b.max_y.max(y);
        }
        bbox
    }
}

/// A gNB and its beam budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbSite {
    pub id: u32,
    pub position: Point3,
    /// Maximum number of simultaneous beams.
    pub n_beams_max: usize,
    /// Total transmit power in watts.
    pub p_tot: f64,
    /// Maximum half-power beam width in degrees.
    pub max_width: f64,
    pub upa: UpaConfig,
    /// Sector centre azimuths for sectored elements.
    #[serde(default)]
    pub sector_centers: Vec<f64>,
    /// Traffic light the gNB is colocated with.
    #[serde(default)]
    pub light: Option<String>,
}

impl GnbSite {
    /// Site with the default radio parameters: 16x16 array, 1 W, 10 m mast.
    pub fn new(id: u32, x: f64, y: f64, element: ElementType) -> Self {
        GnbSite {
            id,
            position: Point3::new(x, y, 10.0),
            n_beams_max: 2,
            p_tot: 1.0,
            max_width: 5.0,
            upa: UpaConfig::new(16, 16, element).expect("16x16 is a valid array"),
            sector_centers: default_sector_centers(element),
            light: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.upa.validate()?;
        if self.n_beams_max == 0 {
            return Err(Error::Scenario(format!("gNB {}: needs at least one beam", self.id)));
        }
        if !(self.max_width > 0.0 && self.max_width <= 360.0) {
            return Err(Error::Scenario(format!(
                "gNB {}: maximum beam width {} outside (0, 360]",
                self.id, self.max_width
            )));
        }
        if !(self.p_tot > 0.0) || !self.p_tot.is_finite() {
            return Err(Error::Scenario(format!(
                "gNB {}: power budget must be positive",
                self.id
            )));
        }
        if self.upa.element == ElementType::Sector3gpp {
            let c = &self.sector_centers;
            let spaced = c.len() == 3
                && (0..3).all(|i| {
                    let d = wrap_degrees(c[(i + 1) % 3] - c[i]);
                    (d - 120.0).abs() < 1e-9
                });
            if !spaced {
                return Err(Error::Scenario(format!(
                    "gNB {}: sectored elements need 3 sector centres 120 degrees apart",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

pub fn default_sector_centers(element: ElementType) -> Vec<f64> {
    match element {
        ElementType::Iso => Vec::new(),
        ElementType::Sector3gpp => vec![0.0, 120.0, 240.0],
    }
}

/// Everything needed to build a [`Scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioParts {
    pub gnbs: Vec<GnbSite>,
    pub samples: Vec<VehicleSample>,
    pub lights: LightPhases,
    pub step_duration: f64,
    pub family: ChannelFamily,
    pub element: ElementType,
    pub vehicle_upa: UpaConfig,
    pub vehicle_height: f64,
    /// Computed from the data when absent.
    pub bbox: Option<BoundingBox>,
}

impl ScenarioParts {
    pub fn new(gnbs: Vec<GnbSite>, samples: Vec<VehicleSample>, lights: LightPhases) -> Self {
        let element = gnbs.first().map(|g| g.upa.element).unwrap_or(ElementType::Iso);
        ScenarioParts {
            gnbs,
            samples,
            lights,
            step_duration: 1.0,
            family: ChannelFamily::Model3gpp,
            element,
            vehicle_upa: UpaConfig::new(8, 8, element).expect("8x8 is a valid array"),
            vehicle_height: 1.5,
            bbox: None,
        }
    }
}

/// Immutable world description.
#[derive(Debug, Clone)]
pub struct Scenario {
    gnbs: Vec<GnbSite>,
    first_step: u32,
    frames: Vec<Vec<VehicleSample>>,
    lights: LightPhases,
    step_duration: f64,
    family: ChannelFamily,
    element: ElementType,
    vehicle_upa: UpaConfig,
    vehicle_height: f64,
    bbox: BoundingBox,
}

impl Scenario {
    pub fn new(parts: ScenarioParts) -> Result<Self> {
        let ScenarioParts {
            mut gnbs,
            mut samples,
            lights,
            step_duration,
            family,
            element,
            vehicle_upa,
            vehicle_height,
            bbox,
        } = parts;

        if !(step_duration > 0.0) || !step_duration.is_finite() {
            return Err(Error::Scenario(format!(
                "step duration must be positive, got {step_duration}"
            )));
        }
        vehicle_upa.validate()?;
        let mut ids = BTreeSet::new();
        for g in &gnbs {
            g.validate()?;
            if !ids.insert(g.id) {
                return Err(Error::Scenario(format!("duplicate gNB id {}", g.id)));
            }
            if g.upa.element != element {
                return Err(Error::Scenario(format!(
                    "gNB {} uses a different element type than the scenario",
                    g.id
                )));
            }
            if let Some(light) = &g.light {
                if lights.light(light).is_none() {
                    return Err(Error::Scenario(format!(
                        "gNB {} references unknown light `{light}`",
                        g.id
                    )));
                }
            }
        }
        gnbs.sort_by_key(|g| g.id);

        samples.sort_by(|a, b| a.step.cmp(&b.step).then_with(|| a.vehicle_id.cmp(&b.vehicle_id)));
        for w in samples.windows(2) {
            if w[0].step == w[1].step && w[0].vehicle_id == w[1].vehicle_id {
                return Err(Error::Scenario(format!(
                    "duplicate sample for vehicle `{}` at step {}",
                    w[0].vehicle_id, w[0].step
                )));
            }
        }
        for s in &samples {
            if !(s.x.is_finite() && s.y.is_finite()) || !(s.speed >= 0.0) {
                return Err(Error::Scenario(format!(
                    "invalid sample for vehicle `{}` at step {}",
                    s.vehicle_id, s.step
                )));
            }
        }

        let bbox = match bbox {
            Some(b) => b,
            None => BoundingBox::enclosing(&samples, &gnbs).unwrap_or(BoundingBox {
                min_x: 0.0,
                min_y: 0.0,
                max_x: 0.0,
                max_y: 0.0,
            }),
        };
        if let Some(s) = samples.iter().find(|s| !bbox.contains(s.x, s.y)) {
            return Err(Error::Scenario(format!(
                "vehicle `{}` at step {} lies outside the bounding box",
                s.vehicle_id, s.step
            )));
        }

        let mob_range = match (samples.first(), samples.last()) {
            (Some(a), Some(b)) => Some(a.step..b.step + 1),
            _ => None,
        };
        let light_range = lights.step_range();
        let range = match (mob_range, light_range) {
            (Some(a), Some(b)) => a.start.min(b.start)..a.end.max(b.end),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => 0..0,
        };
        let mut frames = vec![Vec::new(); (range.end - range.start) as usize];
        for s in samples {
            let i = (s.step - range.start) as usize;
            frames[i].push(s);
        }

        Ok(Scenario {
            gnbs,
            first_step: range.start,
            frames,
            lights,
            step_duration,
            family,
            element,
            vehicle_upa,
            vehicle_height,
            bbox,
        })
    }

    pub fn gnbs(&self) -> &[GnbSite] {
        &self.gnbs
    }

    pub fn gnb(&self, id: u32) -> Option<&GnbSite> {
        self.gnbs.iter().find(|g| g.id == id)
    }

    /// Contiguous range of step indices covered by the scenario.
    pub fn steps(&self) -> Range<u32> {
        self.first_step..self.first_step + self.frames.len() as u32
    }

    /// Vehicle samples at `step`, sorted by vehicle id.
    pub fn vehicles_at(&self, step: u32) -> &[VehicleSample] {
        step.checked_sub(self.first_step)
            .and_then(|i| self.frames.get(i as usize))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn samples(&self) -> impl Iterator<Item = &VehicleSample> {
        self.frames.iter().flatten()
    }

    /// Antenna position of a vehicle sample.
    pub fn vehicle_position(&self, s: &VehicleSample) -> Point3 {
        Point3::new(s.x, s.y, self.vehicle_height)
    }

    pub fn lights(&self) -> &LightPhases {
        &self.lights
    }

    pub fn step_duration(&self) -> f64 {
        self.step_duration
    }

    pub fn family(&self) -> ChannelFamily {
        self.family
    }

    pub fn element(&self) -> ElementType {
        self.element
    }

    pub fn vehicle_upa(&self) -> &UpaConfig {
        &self.vehicle_upa
    }

    pub fn vehicle_height(&self) -> f64 {
        self.vehicle_height
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// Copy of the scenario with a different channel family.
    pub fn with_family(&self, family: ChannelFamily) -> Scenario {
        Scenario {
            family,
            ..self.clone()
        }
    }

    /// Copy with a different antenna element on every array. Sector centres
    /// are reset to the element's defaults.
    pub fn with_element(&self, element: ElementType) -> Result<Scenario> {
        let mut s = self.clone();
        s.element = element;
        s.vehicle_upa.element = element;
        for g in &mut s.gnbs {
            g.upa.element = element;
            g.sector_centers = default_sector_centers(element);
            g.validate()?;
        }
        Ok(s)
    }

    /// Copy with every gNB's beam budget replaced.
    pub fn with_beam_budget(&self, n_beams_max: usize, max_width: f64) -> Result<Scenario> {
        let mut s = self.clone();
        for g in &mut s.gnbs {
            g.n_beams_max = n_beams_max;
            g.max_width = max_width;
            g.validate()?;
        }
        Ok(s)
    }

    /// Copy with a different step duration.
    pub fn with_step_duration(&self, step_duration: f64) -> Result<Scenario> {
        if !(step_duration > 0.0) || !step_duration.is_finite() {
            return Err(Error::Scenario(format!(
                "step duration must be positive, got {step_duration}"
            )));
        }
        Ok(Scenario {
            step_duration,
            ..self.clone()
        })
    }

    /// Copy with a subset of gNBs.
    pub fn with_gnbs(&self, keep: &[u32]) -> Scenario {
        let mut s = self.clone();
        s.gnbs.retain(|g| keep.contains(&g.id));
        s
    }

    /// Copy with all vehicles removed, keeping steps, gNBs and lights.
    pub fn without_vehicles(&self) -> Scenario {
        let mut s = self.clone();
        for f in &mut s.frames {
            f.clear();
        }
        s
    }

    /// Copy restricted to the given step range.
    pub fn slice_steps(&self, range: Range<u32>) -> Scenario {
        let mut s = self.clone();
        let lo = range.start.max(self.first_step);
        let hi = range.end.min(self.steps().end).max(lo);
        s.frames = (lo..hi).map(|k| self.vehicles_at(k).to_vec()).collect();
        s.first_step = lo;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(step: u32, id: &str, x: f64) -> VehicleSample {
        VehicleSample {
            step,
            vehicle_id: id.into(),
            x,
            y: 0.0,
            speed: 1.0,
            heading: 0.0,
        }
    }

    #[test]
    fn frames_are_contiguous_and_sorted() {
        let samples = vec![sample(5, "b", 1.0), sample(3, "a", 2.0), sample(5, "a", 3.0)];
        let s = Scenario::new(ScenarioParts::new(
            vec![GnbSite::new(0, 0.0, 0.0, ElementType::Iso)],
            samples,
            LightPhases::default(),
        ))
        .unwrap();
        assert_eq!(s.steps(), 3..6);
        assert!(s.vehicles_at(4).is_empty());
        let ids: Vec<_> = s.vehicles_at(5).iter().map(|v| v.vehicle_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(s.vehicles_at(100).is_empty());
    }

    #[test]
    fn rejects_bad_references() {
        let mut g = GnbSite::new(0, 0.0, 0.0, ElementType::Iso);
        g.light = Some("L9".into());
        let r = Scenario::new(ScenarioParts::new(vec![g], vec![], LightPhases::default()));
        assert!(r.is_err());

        let g = GnbSite::new(0, 0.0, 0.0, ElementType::Iso);
        let r = Scenario::new(ScenarioParts::new(
            vec![g.clone(), g],
            vec![],
            LightPhases::default(),
        ));
        assert!(r.is_err());
    }

    #[test]
    fn samples_outside_bbox_are_rejected() {
        let mut parts = ScenarioParts::new(
            vec![GnbSite::new(0, 0.0, 0.0, ElementType::Iso)],
            vec![sample(0, "a", 50.0)],
            LightPhases::default(),
        );
        parts.bbox = Some(BoundingBox {
            min_x: -10.0,
            min_y: -10.0,
            max_x: 10.0,
            max_y: 10.0,
        });
        assert!(Scenario::new(parts).is_err());
    }

    #[test]
    fn sectored_sites_need_three_centres() {
        let mut g = GnbSite::new(0, 0.0, 0.0, ElementType::Sector3gpp);
        assert!(g.validate().is_ok());
        g.sector_centers = vec![0.0, 90.0, 240.0];
        assert!(g.validate().is_err());
    }
}
