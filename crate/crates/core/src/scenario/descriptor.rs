//! JSON scenario descriptor tying trace files, gNB sites and model choices
//! together.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    default_sector_centers, load_lights, load_mobility, rank_lights_by_density, BoundingBox,
    GnbSite, LightPhases, Scenario, ScenarioParts,
};
use crate::channel::ChannelFamily;
use crate::error::{Error, Result};
use crate::geometry::{ElementType, Point3, UpaConfig};

pub const SCENARIO_FORMAT: &str = "beamsim-scenario/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GnbDescriptor {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    #[serde(default = "default_gnb_height")]
    pub height: f64,
    #[serde(default = "default_beams")]
    pub n_beams: usize,
    #[serde(default = "default_power")]
    pub p_tot: f64,
    #[serde(default = "default_width")]
    pub max_width: f64,
    #[serde(default = "default_gnb_array")]
    pub array: [usize; 2],
    #[serde(default)]
    pub sector_centers: Option<Vec<f64>>,
    #[serde(default)]
    pub light: Option<String>,
}

/// Place gNBs at the densest lights instead of listing them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoPlacement {
    pub count: usize,
    pub radius_m: f64,
    pub light_positions: BTreeMap<String, [f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDescriptor {
    pub format: String,
    #[serde(default = "default_step")]
    pub step_duration: f64,
    #[serde(default = "default_channel")]
    pub channel: ChannelFamily,
    #[serde(default = "default_element")]
    pub element: ElementType,
    #[serde(default = "default_vehicle_height")]
    pub vehicle_height: f64,
    #[serde(default = "default_vehicle_array")]
    pub vehicle_array: [usize; 2],
    /// Path relative to the descriptor.
    pub mobility: String,
    #[serde(default)]
    pub lights: Option<String>,
    #[serde(default)]
    pub bbox: Option<BoundingBox>,
    #[serde(default)]
    pub gnbs: Vec<GnbDescriptor>,
    #[serde(default)]
    pub auto_gnbs: Option<AutoPlacement>,
}

fn default_step() -> f64 {
    1.0
}
fn default_channel() -> ChannelFamily {
    ChannelFamily::Model3gpp
}
fn default_element() -> ElementType {
    ElementType::Iso
}
fn default_vehicle_height() -> f64 {
    1.5
}
fn default_vehicle_array() -> [usize; 2] {
    [8, 8]
}
fn default_gnb_height() -> f64 {
    10.0
}
fn default_beams() -> usize {
    2
}
fn default_power() -> f64 {
    1.0
}
fn default_width() -> f64 {
    5.0
}
fn default_gnb_array() -> [usize; 2] {
    [16, 16]
}

impl GnbDescriptor {
    fn site(&self, element: ElementType) -> Result<GnbSite> {
        Ok(GnbSite {
            id: self.id,
            position: Point3::new(self.x, self.y, self.height),
            n_beams_max: self.n_beams,
            p_tot: self.p_tot,
            max_width: self.max_width,
            upa: UpaConfig::new(self.array[0], self.array[1], element)?,
            sector_centers: self
                .sector_centers
                .clone()
                .unwrap_or_else(|| default_sector_centers(element)),
            light: self.light.clone(),
        })
    }
}

impl ScenarioDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        let d: ScenarioDescriptor = serde_json::from_str(text)?;
        if d.format != SCENARIO_FORMAT {
            return Err(Error::Config(format!(
                "unsupported scenario format `{}`, expected `{SCENARIO_FORMAT}`",
                d.format
            )));
        }
        Ok(d)
    }

    /// Build the scenario, resolving trace paths against `base_dir`.
    pub fn build(&self, base_dir: &Path) -> Result<Scenario> {
        let samples = load_mobility(&base_dir.join(&self.mobility))?;
        let lights = match &self.lights {
            Some(p) => load_lights(&base_dir.join(p))?,
            None => LightPhases::default(),
        };
        let mut gnbs = self
            .gnbs
            .iter()
            .map(|g| g.site(self.element))
            .collect::<Result<Vec<_>>>()?;
        if let Some(auto) = &self.auto_gnbs {
            let positions: BTreeMap<String, (f64, f64)> = auto
                .light_positions
                .iter()
                .map(|(k, v)| (k.clone(), (v[0], v[1])))
                .collect();
            let chosen = rank_lights_by_density(&positions, &samples, auto.radius_m, auto.count);
            let next_id = gnbs.iter().map(|g| g.id + 1).max().unwrap_or(0);
            for (i, light) in chosen.into_iter().enumerate() {
                let (x, y) = positions[&light];
                let mut site = GnbSite::new(next_id + i as u32, x, y, self.element);
                site.light = Some(light);
                gnbs.push(site);
            }
        }
        let element = self.element;
        let parts = ScenarioParts {
            gnbs,
            samples,
            lights,
            step_duration: self.step_duration,
            family: self.channel,
            element,
            vehicle_upa: UpaConfig::new(self.vehicle_array[0], self.vehicle_array[1], element)?,
            vehicle_height: self.vehicle_height,
            bbox: self.bbox,
        };
        Scenario::new(parts)
    }
}

/// Load a scenario descriptor and the trace files it references.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let d = ScenarioDescriptor::from_json(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    d.build(base)
}
