//! Angular geometry and uniform planar array (UPA) responses.
//!
//! Angles are in degrees throughout the public API. Azimuth is measured
//! counterclockwise from east (+x) in the horizontal plane, elevation upward
//! from the horizontal. Array vectors use the flat index `n = n1 * N2 + n2`
//! with `n1 in 0..N1` (rows) and `n2 in 0..N2` (columns); serialized vectors
//! follow the same order.

use std::f64::consts::PI;
use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wrap an azimuth into `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    // rem_euclid can return 360.0 for tiny negative inputs.
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Shortest angular distance between two azimuths, in `[0, 180]`.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    // |a - b| keeps the result exactly symmetric in its arguments.
    let d = (a - b).abs() % 360.0;
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// An azimuth/elevation direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnglePair {
    azimuth: f64,
    elevation: f64,
}

impl AnglePair {
    /// Azimuth is reduced modulo 360; elevation outside `[-90, 90]` is rejected.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::InvalidAngle(format!(
                "non-finite angle ({azimuth}, {elevation})"
            )));
        }
        if !(-90.0..=90.0).contains(&elevation) {
            return Err(Error::InvalidAngle(format!(
                "elevation {elevation} outside [-90, 90]"
            )));
        }
        Ok(AnglePair {
            azimuth: wrap_degrees(azimuth),
            elevation,
        })
    }

    pub fn zero() -> Self {
        AnglePair {
            azimuth: 0.0,
            elevation: 0.0,
        }
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    /// Direction relative to an antenna orientation (`self - orientation`).
    pub fn relative_to(&self, orientation: &AnglePair) -> Result<AnglePair> {
        AnglePair::new(
            self.azimuth - orientation.azimuth,
            self.elevation - orientation.elevation,
        )
    }
}

/// Radiation pattern of a single array element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementType {
    /// Isotropic element.
    #[serde(rename = "iso")]
    Iso,
    /// 3GPP sectored element (three 120-degree sectors, 65-degree element HPBW).
    #[serde(rename = "3gpp")]
    Sector3gpp,
}

impl ElementType {
    /// Width of one sector in degrees, when the element is sectored.
    pub fn sector_width(&self) -> Option<f64> {
        match self {
            ElementType::Iso => None,
            ElementType::Sector3gpp => Some(120.0),
        }
    }

    /// Half-power beamwidth of a single element, when defined.
    pub fn element_hpbw(&self) -> Option<f64> {
        match self {
            ElementType::Iso => None,
            ElementType::Sector3gpp => Some(65.0),
        }
    }
}

impl std::str::FromStr for ElementType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iso" => Ok(ElementType::Iso),
            "3gpp" | "sector" | "sector_3gpp" => Ok(ElementType::Sector3gpp),
            other => Err(Error::Config(format!("unknown element type `{other}`"))),
        }
    }
}

/// A uniform planar array of `n1 x n2` elements spaced by half a wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaConfig {
    pub n1: usize,
    pub n2: usize,
    pub element: ElementType,
    #[serde(default = "AnglePair::zero")]
    pub orientation: AnglePair,
}

impl UpaConfig {
    pub fn new(n1: usize, n2: usize, element: ElementType) -> Result<Self> {
        let upa = UpaConfig {
            n1,
            n2,
            element,
            orientation: AnglePair::zero(),
        };
        upa.validate()?;
        Ok(upa)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::InvalidAntenna(format!(
                "element counts must be >= 1, got {}x{}",
                self.n1, self.n2
            )));
        }
        Ok(())
    }

    /// Total element count `N = n1 * n2`.
    pub fn elements(&self) -> usize {
        self.n1 * self.n2
    }

    fn phase_profile(&self, dir: &AnglePair) -> impl Iterator<Item = Complex64> + '_ {
        let az = dir.azimuth().to_radians();
        let el = dir.elevation().to_radians();
        let u = el.cos() * az.sin();
        let v = el.sin();
        (0..self.n1).flat_map(move |i| {
            (0..self.n2).map(move |j| {
                let phase = PI * (i as f64 * u + j as f64 * v);
                Complex64::from_polar(1.0, phase)
            })
        })
    }
}

/// A complex array vector indexed by the flat element index.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        ComplexVector(entries)
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian inner product `self^H other`.
    pub fn inner(&self, other: &ComplexVector) -> Result<Complex64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn scaled(&self, s: f64) -> ComplexVector {
        ComplexVector(self.0.iter().map(|c| c * s).collect())
    }
}

impl Deref for ComplexVector {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

/// Unit-norm transmit beamforming vector steered toward `phi` (relative to the
/// array orientation).
pub fn steering_vector(upa: &UpaConfig, phi: &AnglePair) -> ComplexVector {
    let scale = 1.0 / (upa.elements() as f64).sqrt();
    ComplexVector(upa.phase_profile(phi).map(|c| c * scale).collect())
}

/// Array response toward `theta`: unit-modulus entries, squared norm `N`.
pub fn array_response(upa: &UpaConfig, theta: &AnglePair) -> ComplexVector {
    ComplexVector(upa.phase_profile(theta).collect())
}

/// Analog receive weights of a single-RF-chain array steered toward `phi`.
///
/// Pointing the receiver back at the transmitter is the caller's job
/// (azimuth `d1 + 180`, mirrored elevation).
pub fn receive_weights(upa: &UpaConfig, phi: &AnglePair) -> ComplexVector {
    array_response(upa, phi)
}

/// Effective scalar channel `w^H H v` for a single-path channel
/// `H = h * a_rx(theta_rx) a_tx(theta_tx)^H`, evaluated by forming `H`
/// explicitly. Intended for validating beamforming gains, not for production
/// gain generation.
pub fn effective_channel_oracle(
    h_path: Complex64,
    tx: &UpaConfig,
    rx: &UpaConfig,
    theta_tx: &AnglePair,
    theta_rx: &AnglePair,
    v: &ComplexVector,
    w: &ComplexVector,
) -> Result<Complex64> {
    let nt = tx.elements();
    let nr = rx.elements();
    if v.len() != nt {
        return Err(Error::DimensionMismatch {
            expected: nt,
            got: v.len(),
        });
    }
    if w.len() != nr {
        return Err(Error::DimensionMismatch {
            expected: nr,
            got: w.len(),
        });
    }
    let a_tx = array_response(tx, theta_tx);
    let a_rx = array_response(rx, theta_rx);

    // y = H v, row by row.
    let mut acc = Complex64::new(0.0, 0.0);
    for (r, a_r) in a_rx.iter().enumerate() {
        let row: Complex64 = a_tx
            .iter()
            .zip(v.iter())
            .map(|(a_t, v_t)| h_path * a_r * a_t.conj() * v_t)
            .sum();
        acc += w[r].conj() * row;
    }
    Ok(acc)
}

/// A point in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn horizontal_distance(&self, other: &Point3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Direction of `to` as seen from `from`.
pub fn relative_bearing(from: &Point3, to: &Point3) -> Result<AnglePair> {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dz = to.z - from.z;
    if dx == 0.0 && dy == 0.0 && dz == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    let azimuth = dy.atan2(dx).to_degrees();
    let elevation = dz.atan2(dx.hypot(dy)).to_degrees();
    AnglePair::new(azimuth, elevation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn upa(n1: usize, n2: usize) -> UpaConfig {
        UpaConfig::new(n1, n2, ElementType::Iso).unwrap()
    }

    #[test]
    fn angle_pair_wraps_azimuth_and_rejects_elevation() {
        let a = AnglePair::new(-30.0, 10.0).unwrap();
        assert_eq!(a.azimuth(), 330.0);
        assert_eq!(AnglePair::new(720.0, 0.0).unwrap().azimuth(), 0.0);
        assert!(AnglePair::new(0.0, 91.0).is_err());
        assert!(AnglePair::new(0.0, -90.5).is_err());
        assert!(AnglePair::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn zero_sized_array_is_rejected() {
        assert!(UpaConfig::new(0, 4, ElementType::Iso).is_err());
    }

    #[test]
    fn single_element_steering_is_one() {
        let v = steering_vector(&upa(1, 1), &AnglePair::new(123.0, 45.0).unwrap());
        assert_eq!(v.len(), 1);
        assert!(close(v[0].re, 1.0, 1e-15) && close(v[0].im, 0.0, 1e-15));
    }

    #[test]
    fn zero_angle_steering_is_uniform() {
        let v = steering_vector(&upa(4, 4), &AnglePair::zero());
        for c in v.iter() {
            assert!(close(c.re, 0.25, 1e-15) && close(c.im, 0.0, 1e-15));
        }
    }

    #[test]
    fn flat_index_convention() {
        let a = upa(3, 5);
        let dir = AnglePair::new(20.0, 10.0).unwrap();
        let v = array_response(&a, &dir);
        let (u, w) = (
            10f64.to_radians().cos() * 20f64.to_radians().sin(),
            10f64.to_radians().sin(),
        );
        for i in 0..3 {
            for j in 0..5 {
                let expect = Complex64::from_polar(1.0, PI * (i as f64 * u + j as f64 * w));
                let got = v[i * 5 + j];
                assert!((got - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn array_response_at_boresight_is_all_ones() {
        let a = array_response(&upa(8, 8), &AnglePair::zero());
        assert!(a.iter().all(|c| (c - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn receive_weights_match_scaled_steering() {
        let a = upa(8, 8);
        let dir = AnglePair::new(77.0, -12.0).unwrap();
        let w = receive_weights(&a, &dir);
        let v = steering_vector(&a, &dir).scaled(8.0);
        for (x, y) in w.iter().zip(v.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn bearing_examples() {
        let g = Point3::new(0.0, 0.0, 10.0);
        let b = relative_bearing(&g, &Point3::new(100.0, 0.0, 1.5)).unwrap();
        assert!(close(b.azimuth(), 0.0, 1e-12));
        assert!(close(b.elevation(), (-8.5f64).atan2(100.0).to_degrees(), 1e-12));
        assert!(close(b.elevation(), -4.858, 1e-3));

        let n = relative_bearing(&Point3::new(0.0, 0.0, 1.5), &Point3::new(0.0, 50.0, 1.5)).unwrap();
        assert!(close(n.azimuth(), 90.0, 1e-12) && close(n.elevation(), 0.0, 1e-12));

        assert!(matches!(
            relative_bearing(&g, &g),
            Err(Error::CoincidentPositions)
        ));
    }

    #[test]
    fn circular_distance_examples() {
        assert_eq!(circular_distance(359.0, 1.0), 2.0);
        assert_eq!(circular_distance(10.0, 190.0), 180.0);
        assert_eq!(circular_distance(-10.0, 10.0), 20.0);
    }

    #[test]
    fn effective_channel_dimension_mismatch() {
        let (t, r) = (upa(2, 2), upa(2, 1));
        let v = steering_vector(&t, &AnglePair::zero());
        let err = effective_channel_oracle(
            Complex64::new(1.0, 0.0),
            &t,
            &r,
            &AnglePair::zero(),
            &AnglePair::zero(),
            &v,
            &v,
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }
}
