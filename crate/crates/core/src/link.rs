//! SINR, Shannon rate and CQI-based effective rate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CQI_TABLE_HEADER: &str = "# beamsim-cqi/1";
const BUILTIN_CQI: &str = include_str!("../data/cqi_table.txt");

/// Radio parameters shared by every link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkBudgetConfig {
    /// Hz.
    pub bandwidth: f64,
    /// GHz.
    pub carrier_ghz: f64,
    /// dB.
    pub noise_figure_db: f64,
    /// dBm/Hz.
    pub thermal_density_dbm_hz: f64,
}

impl Default for LinkBudgetConfig {
    fn default() -> Self {
        LinkBudgetConfig {
            bandwidth: 400e6,
            carrier_ghz: 76.0,
            noise_figure_db: 7.0,
            thermal_density_dbm_hz: -174.0,
        }
    }
}

impl LinkBudgetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::Config(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_ghz
            )));
        }
        Ok(())
    }

    /// Noise power in dBm.
    pub fn noise_dbm(&self) -> f64 {
        self.thermal_density_dbm_hz + 10.0 * self.bandwidth.log10() + self.noise_figure_db
    }

    /// Noise power in watts.
    pub fn noise_watts(&self) -> f64 {
        10f64.powf((self.noise_dbm() - 30.0) / 10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CqiRow {
    pub index: u8,
    /// bit/s/Hz.
    pub efficiency: f64,
    pub min_sinr_db: f64,
    min_sinr: f64,
}

impl CqiRow {
    /// Threshold in linear scale.
    pub fn min_sinr(&self) -> f64 {
        self.min_sinr
    }
}

/// 16-row CQI table. Row 0 is the out-of-range entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CqiTable {
    rows: Vec<CqiRow>,
}

impl CqiTable {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CQI, "<builtin cqi table>").expect("builtin CQI table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == CQI_TABLE_HEADER => {}
            _ => {
                return Err(Error::parse(
                    file,
                    1,
                    format!("expected header `{CQI_TABLE_HEADER}`"),
                ))
            }
        }
        let mut rows = Vec::with_capacity(16);
        for (i, raw) in lines {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::parse(file, lineno, "expected index,efficiency,min_sinr_db"));
            }
            let index: u8 = fields[0]
                .parse()
                .map_err(|_| Error::parse(file, lineno, format!("bad index `{}`", fields[0])))?;
            let efficiency: f64 = fields[1].parse().map_err(|_| {
                Error::parse(file, lineno, format!("bad efficiency `{}`", fields[1]))
            })?;
            let min_sinr_db: f64 = fields[2].parse().map_err(|_| {
                Error::parse(file, lineno, format!("bad threshold `{}`", fields[2]))
            })?;
            rows.push(CqiRow {
                index,
                efficiency,
                min_sinr_db,
                min_sinr: 10f64.powf(min_sinr_db / 10.0),
            });
        }
        let table = CqiTable { rows };
        table.validate().map_err(|e| Error::parse(file, 0, e.to_string()))?;
        Ok(table)
    }

    /// Check the table shape: 16 rows indexed 0..16, row 0 with efficiency 0,
    /// efficiencies and thresholds strictly increasing.
    pub fn validate(&self) -> Result<()> {
        if self.rows.len() != 16 {
            return Err(Error::Config(format!(
                "CQI table needs 16 rows, found {}",
                self.rows.len()
            )));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.index as usize != i {
                return Err(Error::Config(format!("CQI row {i} has index {}", row.index)));
            }
        }
        if self.rows[0].efficiency != 0.0 {
            return Err(Error::Config("CQI row 0 must have efficiency 0".into()));
        }
        for w in self.rows.windows(2) {
            if !(w[1].efficiency > w[0].efficiency) {
                return Err(Error::Config(format!(
                    "CQI efficiency not increasing at index {}",
                    w[1].index
                )));
            }
            if !(w[1].min_sinr_db > w[0].min_sinr_db) {
                return Err(Error::Config(format!(
                    "CQI threshold not increasing at index {}",
                    w[1].index
                )));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> &[CqiRow] {
        &self.rows
    }

    /// Highest row whose threshold is at or below `sinr` (linear).
    pub fn select(&self, sinr: f64) -> &CqiRow {
        let n = self.rows.partition_point(|r| r.min_sinr <= sinr);
        &self.rows[n.saturating_sub(1)]
    }

    pub fn max_efficiency(&self) -> f64 {
        self.rows[self.rows.len() - 1].efficiency
    }
}

/// `P*g / (N0 + sum P_i*g_i)`.
pub fn sinr(serving_power: f64, serving_gain: f64, interferers: &[(f64, f64)], n0: f64) -> f64 {
    let interference: f64 = interferers.iter().map(|(p, g)| p * g).sum();
    serving_power * serving_gain / (n0 + interference)
}

/// `bw * log2(1 + sinr)` in bit/s.
pub fn shannon_rate(sinr: f64, bw: f64) -> f64 {
    bw * sinr.ln_1p() / std::f64::consts::LN_2
}

/// Rate of the CQI row selected for `sinr`, in bit/s.
pub fn effective_rate(sinr: f64, bw: f64, table: &CqiTable) -> f64 {
    bw * table.select(sinr).efficiency
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_power_default() {
        let cfg = LinkBudgetConfig::default();
        // -174 + 86.02 + 7
        assert!((cfg.noise_dbm() - (-80.9794)).abs() < 1e-3);
        assert!((cfg.noise_watts() - 10f64.powf(-11.09794)).abs() < 1e-15);
    }

    #[test]
    fn sinr_examples() {
        assert_eq!(sinr(2.0, 0.5, &[], 1.0), 1.0);
        let s = sinr(1.0, 3.0, &[(1.0, 3.0)], 1.0);
        assert!((s - 0.75).abs() < 1e-15);
        let s = sinr(2.0, 10.0, &[(1.0, 1.0), (0.5, 4.0), (0.25, 8.0)], 0.5);
        assert!((s - 20.0 / 5.5).abs() < 1e-12);
    }

    #[test]
    fn shannon_examples() {
        assert_eq!(shannon_rate(0.0, 400e6), 0.0);
        assert!((shannon_rate(1.0, 400e6) - 4.0e8).abs() < 1e-3);
        assert!((shannon_rate(3.0, 1.0) - 2.0 * shannon_rate(1.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn cqi_selection() {
        let t = CqiTable::builtin();
        assert_eq!(effective_rate(0.01, 400e6, &t), 0.0);
        assert!((effective_rate(1e12, 400e6, &t) - 400e6 * 5.5547).abs() < 1e-3);
        for row in &t.rows()[1..] {
            assert_eq!(t.select(row.min_sinr()).index, row.index);
            let below = row.min_sinr() * (1.0 - 1e-12);
            assert_eq!(t.select(below).index, row.index - 1);
        }
    }

    #[test]
    fn cqi_parse_errors_carry_line_numbers() {
        let bad = "# beamsim-cqi/1\n0,0,-inf\n1,abc,3\n";
        match CqiTable::parse(bad, "x.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(CqiTable::parse("0,0,-inf\n", "x").is_err());
    }

    #[test]
    fn cqi_rejects_non_monotone() {
        let mut text = String::from("# beamsim-cqi/1\n0,0,-inf\n");
        for i in 1..16 {
            let eff = if i == 7 { 0.1 } else { i as f64 * 0.3 };
            text.push_str(&format!("{i},{eff},{}\n", i as f64));
        }
        assert!(CqiTable::parse(&text, "x").is_err());
    }
}
