use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Distribution of the linear channel gain `G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GainDistribution {
    /// Normal(mu, sigma) truncated to `G >= 0` by rejection.
    Gaussian { mu: f64, sigma: f64 },
    /// Exponential with mean `alpha`.
    Exponential { alpha: f64 },
    /// `ln G` is logistic with location `m` and scale `s`.
    LogLogistic { m: f64, s: f64 },
}

impl GainDistribution {
    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "gaussian needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        Ok(GainDistribution::Gaussian { mu, sigma })
    }

    pub fn exponential(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "exponential needs alpha > 0, got {alpha}"
            )));
        }
        Ok(GainDistribution::Exponential { alpha })
    }

    pub fn log_logistic(m: f64, s: f64) -> Result<Self> {
        if !m.is_finite() || !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "log-logistic needs finite m and s > 0, got ({m}, {s})"
            )));
        }
        Ok(GainDistribution::LogLogistic { m, s })
    }

    /// Draw one gain value, always `>= 0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            GainDistribution::Gaussian { mu, sigma } => {
                if mu < -8.0 * sigma {
                    // Essentially no mass above zero; rejection would not terminate in practice.
                    return 0.0;
                }
                let normal = Normal::new(mu, sigma).expect("validated parameters");
                loop {
                    let x = normal.sample(rng);
                    if x >= 0.0 {
                        return x;
                    }
                }
            }
            GainDistribution::Exponential { alpha } => {
                // Inverse CDF on (0, 1].
                let u: f64 = 1.0 - rng.random::<f64>();
                -alpha * u.ln()
            }
            GainDistribution::LogLogistic { m, s } => {
                let u = open_unit(rng);
                (m + s * (u / (1.0 - u)).ln()).exp()
            }
        }
    }

    /// Mean of the distribution as sampled (the Gaussian mean accounts for
    /// truncation). `None` when the mean diverges (log-logistic with `s >= 1`).
    pub fn mean(&self) -> Option<f64> {
        match *self {
            GainDistribution::Gaussian { mu, sigma } => Some(truncated_normal_mean(mu, sigma)),
            GainDistribution::Exponential { alpha } => Some(alpha),
            GainDistribution::LogLogistic { m, s } => {
                if s < 1.0 {
                    let b = std::f64::consts::PI * s;
                    Some(m.exp() * b / b.sin())
                } else {
                    None
                }
            }
        }
    }

    pub fn median(&self) -> f64 {
        match *self {
            GainDistribution::Gaussian { mu, sigma } => {
                // Median of the zero-truncated normal.
                let p0 = normal_cdf(-mu / sigma);
                mu + sigma * normal_quantile(p0 + 0.5 * (1.0 - p0))
            }
            GainDistribution::Exponential { alpha } => alpha * std::f64::consts::LN_2,
            GainDistribution::LogLogistic { m, .. } => m.exp(),
        }
    }

    /// Representative gain used for association decisions: the mean where it
    /// is finite for every table entry (Gaussian, exponential) and the median
    /// for log-logistic fits.
    pub fn typical(&self) -> f64 {
        match self {
            GainDistribution::LogLogistic { .. } => self.median(),
            _ => self.mean().unwrap_or_else(|| self.median()),
        }
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn truncated_normal_mean(mu: f64, sigma: f64) -> f64 {
    let a = -mu / sigma;
    let tail = 1.0 - normal_cdf(a);
    if tail <= 0.0 {
        return 0.0;
    }
    mu + sigma * normal_pdf(a) / tail
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF via the complementary error function.
pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

// Numerical Recipes erfc, fractional error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Standard normal quantile by bisection on [`normal_cdf`].
fn normal_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
