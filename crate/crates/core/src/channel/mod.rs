//! Statistical channel-gain model.
//!
//! A link's power gain is `|h|^2 = a(d) * G`: a distance-dependent
//! attenuation times a random gain `G` that lumps small-scale fading and
//! beamforming gain. `G` is drawn from a fitted distribution chosen by the
//! link's alignment regime, LoS state, channel family and antenna element.

mod distribution;
mod tables;

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use distribution::GainDistribution;
pub use tables::{
    AntennaColumn, GainTables, LogLogisticCase, PowerLaw, PowerLawParam, GAIN_TABLES_HEADER,
};

use crate::error::{Error, Result};
use crate::geometry::{circular_distance, ElementType};

/// Which published channel model the fitted tables come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelFamily {
    #[serde(rename = "3gpp")]
    Model3gpp,
    #[serde(rename = "nyu")]
    ModelNyu,
}

impl std::str::FromStr for ChannelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "3gpp" => Ok(ChannelFamily::Model3gpp),
            "nyu" => Ok(ChannelFamily::ModelNyu),
            other => Err(Error::Config(format!("unknown channel family `{other}`"))),
        }
    }
}

/// Azimuth alignment of the two ends of a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Alignment {
    FullyAligned,
    /// Only the transmitter (gNB) beam points at the receiver.
    PartialTx,
    /// Only the receiver (vehicle) beam points at the transmitter.
    PartialRx,
    Misaligned,
}

impl Alignment {
    pub fn from_ends(tx_aligned: bool, rx_aligned: bool) -> Self {
        match (tx_aligned, rx_aligned) {
            (true, true) => Alignment::FullyAligned,
            (true, false) => Alignment::PartialTx,
            (false, true) => Alignment::PartialRx,
            (false, false) => Alignment::Misaligned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct LinkRegime {
    pub los: bool,
    pub alignment: Alignment,
}

impl LinkRegime {
    pub fn new(los: bool, alignment: Alignment) -> Self {
        LinkRegime { los, alignment }
    }

    /// Compact code in `0..8`, used as part of random-stream identities.
    pub fn code(&self) -> u8 {
        (self.los as u8) << 2 | self.alignment as u8
    }
}

/// Angular misalignment feeding the fully-aligned LoS fits, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MisalignmentAngles {
    /// Beam offset from its sector centre (sectored elements only).
    pub delta1: f64,
    /// Elevation misalignment.
    pub delta2: f64,
}

impl MisalignmentAngles {
    pub fn new(delta1: f64, delta2: f64) -> Result<Self> {
        if !(0.0..=60.0).contains(&delta1) {
            return Err(Error::InvalidAngle(format!(
                "sector offset {delta1} outside [0, 60]"
            )));
        }
        if !(delta2 >= 0.0) {
            return Err(Error::InvalidAngle(format!(
                "elevation misalignment {delta2} must be >= 0"
            )));
        }
        Ok(MisalignmentAngles { delta1, delta2 })
    }
}

/// Classify a link from both ends' beam directions and half-power widths.
///
/// An end is aligned when the other end lies within half its beamwidth.
pub fn classify_alignment(
    beam_dir: f64,
    beam_width: f64,
    veh_bearing_from_gnb: f64,
    veh_beam_dir: f64,
    veh_beam_width: f64,
    gnb_bearing_from_veh: f64,
) -> Alignment {
    let tx = circular_distance(beam_dir, veh_bearing_from_gnb) <= beam_width / 2.0;
    let rx = circular_distance(veh_beam_dir, gnb_bearing_from_veh) <= veh_beam_width / 2.0;
    Alignment::from_ends(tx, rx)
}

/// LoS probability `exp(-d / decay)`.
pub fn los_probability(distance: f64, decay_m: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok((-distance / decay_m).exp())
}

/// Path loss in dB: `32.4 + k*log10(d) + 20*log10(fc)` with `k = 20` in LoS
/// and `k = 30` in NLoS. Distances below 1 m are clamped to 1 m.
pub fn path_loss_db(distance: f64, los: bool, carrier_ghz: f64) -> f64 {
    let d = if distance < 1.0 {
        log::warn!("path loss distance {distance} m clamped to 1 m");
        1.0
    } else {
        distance
    };
    let slope = if los { 20.0 } else { 30.0 };
    32.4 + slope * d.log10() + 20.0 * carrier_ghz.log10()
}

/// Linear attenuation `a = 10^(-PL/10)`.
pub fn path_loss(distance: f64, los: bool, carrier_ghz: f64) -> f64 {
    10f64.powf(-path_loss_db(distance, los, carrier_ghz) / 10.0)
}

/// Sector-offset attenuation of the 3GPP element, `10^(-1.2 (d1/65)^2)`.
pub fn sector_factor(element: ElementType, delta1: f64) -> f64 {
    match element.element_hpbw() {
        Some(hpbw) => 10f64.powf(-1.2 * (delta1 / hpbw).powi(2)),
        None => 1.0,
    }
}

/// Select the fitted distribution for a link.
///
/// `(nt, nr)` pairs that are not tabulated use the nearest column by antenna
/// product and log a warning.
pub fn gain_distribution(
    tables: &GainTables,
    family: ChannelFamily,
    element: ElementType,
    regime: LinkRegime,
    nt: usize,
    nr: usize,
    mis: MisalignmentAngles,
) -> Result<GainDistribution> {
    let (column, exact) = tables.resolve_column(nt, nr);
    if !exact {
        log::warn!(
            "no fitted column for Nt={nt}, Nr={nr}; using Nt={}, Nr={}",
            column.nt,
            column.nr
        );
    }
    distribution_for_column(tables, family, element, regime, nt, nr, column, mis)
}

#[allow(clippy::too_many_arguments)]
fn distribution_for_column(
    tables: &GainTables,
    family: ChannelFamily,
    element: ElementType,
    regime: LinkRegime,
    nt: usize,
    nr: usize,
    column: AntennaColumn,
    mis: MisalignmentAngles,
) -> Result<GainDistribution> {
    let missing = || Error::InvalidDistribution(format!("no fit for {family:?}/{element:?}"));
    let law = |p: PowerLawParam| tables.power_law(family, element, p).ok_or_else(missing);
    let product = (nt * nr) as f64;
    let log_logistic = |case: LogLogisticCase| -> Result<GainDistribution> {
        let (m, s) = tables
            .log_logistic(family, element, case, column)
            .ok_or_else(missing)?;
        GainDistribution::log_logistic(m, s)
    };
    let decay = |gamma: f64| (-(mis.delta2 / gamma).powi(2)).exp();

    match (regime.alignment, regime.los, family) {
        (Alignment::FullyAligned, true, ChannelFamily::Model3gpp) => {
            let mu0 = law(PowerLawParam::Mu0)?.eval(product);
            let sigma0 = law(PowerLawParam::Sigma0)?.eval(product);
            let gamma_mu = law(PowerLawParam::GammaMu)?.eval(product);
            let gamma_sigma = law(PowerLawParam::GammaSigma)?.eval(product);
            let mu = mu0 * decay(gamma_mu) * sector_factor(element, mis.delta1);
            let sigma = (sigma0 * decay(gamma_sigma)).max(f64::MIN_POSITIVE);
            GainDistribution::gaussian(mu, sigma)
        }
        (Alignment::FullyAligned, true, ChannelFamily::ModelNyu) => {
            let alpha0 = law(PowerLawParam::Alpha0)?.eval(product);
            let gamma = law(PowerLawParam::GammaAlpha)?.eval(product);
            let alpha = alpha0 * decay(gamma) * sector_factor(element, mis.delta1);
            GainDistribution::exponential(alpha.max(f64::MIN_POSITIVE))
        }
        (Alignment::FullyAligned, false, _) => log_logistic(LogLogisticCase::NlosAligned),
        (Alignment::Misaligned, _, _) => log_logistic(LogLogisticCase::Misaligned),
        (Alignment::PartialTx, _, _) => log_logistic(LogLogisticCase::PartialTx),
        (Alignment::PartialRx, _, _) => log_logistic(LogLogisticCase::PartialRx),
    }
}

/// Draw a gain from `dist`.
pub fn sample_gain<R: Rng + ?Sized>(dist: &GainDistribution, rng: &mut R) -> f64 {
    dist.sample(rng)
}

/// Geometry of one link as the gain model sees it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkGeometry {
    /// 3D distance in metres.
    pub distance_m: f64,
    pub regime: LinkRegime,
    pub mis: MisalignmentAngles,
}

/// Gain model bound to one scenario's channel family, element type and array
/// sizes.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    tables: Arc<GainTables>,
    pub family: ChannelFamily,
    pub element: ElementType,
    pub nt: usize,
    pub nr: usize,
    column: AntennaColumn,
    pub carrier_ghz: f64,
    pub los_decay_m: f64,
}

impl ChannelModel {
    pub fn new(
        tables: Arc<GainTables>,
        family: ChannelFamily,
        element: ElementType,
        nt: usize,
        nr: usize,
        carrier_ghz: f64,
        los_decay_m: f64,
    ) -> Self {
        let (column, exact) = tables.resolve_column(nt, nr);
        if !exact {
            log::warn!(
                "no fitted column for Nt={nt}, Nr={nr}; using Nt={}, Nr={}",
                column.nt,
                column.nr
            );
        }
        ChannelModel {
            tables,
            family,
            element,
            nt,
            nr,
            column,
            carrier_ghz,
            los_decay_m,
        }
    }

    pub fn tables(&self) -> &GainTables {
        &self.tables
    }

    pub fn distribution(
        &self,
        regime: LinkRegime,
        mis: MisalignmentAngles,
    ) -> Result<GainDistribution> {
        distribution_for_column(
            &self.tables,
            self.family,
            self.element,
            regime,
            self.nt,
            self.nr,
            self.column,
            mis,
        )
    }

    pub fn los_probability(&self, distance: f64) -> Result<f64> {
        los_probability(distance, self.los_decay_m)
    }

    pub fn attenuation(&self, distance: f64, los: bool) -> f64 {
        path_loss(distance, los, self.carrier_ghz)
    }

    /// `|h|^2 = a(d) * G` for one link.
    pub fn link_gain<R: Rng + ?Sized>(&self, link: &LinkGeometry, rng: &mut R) -> Result<f64> {
        let dist = self.distribution(link.regime, link.mis)?;
        Ok(self.attenuation(link.distance_m, link.regime.los) * dist.sample(rng))
    }
}
