//! Fitted-parameter tables for the gain distributions.
//!
//! The tables ship as a plain-text file (`data/gain_tables.txt`) so every value
//! can be audited without reading code. See that file for the row schema.

use std::collections::BTreeMap;
use std::path::Path;

use crate::channel::ChannelFamily;
use crate::error::{Error, Result};
use crate::geometry::ElementType;

pub const GAIN_TABLES_HEADER: &str = "# beamsim-gain-tables/1";

const DEFAULT_TABLES: &str = include_str!("../../data/gain_tables.txt");

/// `coef * (Nt*Nr)^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coef: f64,
    pub exponent: f64,
}

impl PowerLaw {
    pub fn eval(&self, product: f64) -> f64 {
        self.coef * product.powf(self.exponent)
    }
}

/// Parameters that follow a power law in the antenna product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PowerLawParam {
    Mu0,
    Sigma0,
    GammaMu,
    GammaSigma,
    Alpha0,
    GammaAlpha,
}

impl PowerLawParam {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "mu0" => PowerLawParam::Mu0,
            "sigma0" => PowerLawParam::Sigma0,
            "gamma_mu" => PowerLawParam::GammaMu,
            "gamma_sigma" => PowerLawParam::GammaSigma,
            "alpha0" => PowerLawParam::Alpha0,
            "gamma_alpha" => PowerLawParam::GammaAlpha,
            _ => return None,
        })
    }
}

/// Which log-logistic fit a row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LogLogisticCase {
    /// Fully aligned link without line of sight.
    NlosAligned,
    Misaligned,
    PartialTx,
    PartialRx,
}

impl LogLogisticCase {
    const ALL: [LogLogisticCase; 4] = [
        LogLogisticCase::NlosAligned,
        LogLogisticCase::Misaligned,
        LogLogisticCase::PartialTx,
        LogLogisticCase::PartialRx,
    ];

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "nlos_aligned" => LogLogisticCase::NlosAligned,
            "misaligned" => LogLogisticCase::Misaligned,
            "partial_tx" => LogLogisticCase::PartialTx,
            "partial_rx" => LogLogisticCase::PartialRx,
            _ => return None,
        })
    }
}

/// An `(Nt, Nr)` pair for which log-logistic fits are tabulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AntennaColumn {
    pub nt: usize,
    pub nr: usize,
}

impl AntennaColumn {
    pub fn product(&self) -> usize {
        self.nt * self.nr
    }
}

type Group = (ChannelFamily, ElementType);

fn group_key(g: Group) -> (u8, u8) {
    (g.0 as u8, g.1 as u8)
}

/// All fitted parameters, indexed for lookup.
#[derive(Debug, Clone)]
pub struct GainTables {
    power_laws: BTreeMap<((u8, u8), PowerLawParam), PowerLaw>,
    log_logistic: BTreeMap<((u8, u8), LogLogisticCase, AntennaColumn), (f64, f64)>,
    columns: Vec<AntennaColumn>,
}

fn parse_family(s: &str) -> Option<ChannelFamily> {
    match s {
        "3gpp" => Some(ChannelFamily::Model3gpp),
        "nyu" => Some(ChannelFamily::ModelNyu),
        _ => None,
    }
}

fn parse_element(s: &str) -> Option<ElementType> {
    match s {
        "iso" => Some(ElementType::Iso),
        "3gpp" => Some(ElementType::Sector3gpp),
        _ => None,
    }
}

impl GainTables {
    /// The tables compiled into the crate.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TABLES, "gain_tables.txt").expect("builtin gain tables are valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, first)) if first.trim() == GAIN_TABLES_HEADER => {}
            _ => {
                return Err(Error::parse(
                    file,
                    1,
                    format!("expected header `{GAIN_TABLES_HEADER}`"),
                ))
            }
        }

        let mut power_laws = BTreeMap::new();
        let mut log_logistic = BTreeMap::new();
        let mut columns: Vec<AntennaColumn> = Vec::new();

        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::parse(file, line_no, msg.to_string());
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(file, line_no, format!("bad number `{s}`")))
            };
            let int = |s: &str| -> Result<usize> {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(file, line_no, format!("bad count `{s}`")))
            };
            match fields.first().copied() {
                Some("powerlaw") => {
                    if fields.len() != 6 {
                        return Err(bad("powerlaw rows have 6 fields"));
                    }
                    let family = parse_family(fields[1]).ok_or_else(|| bad("unknown family"))?;
                    let element =
                        parse_element(fields[2]).ok_or_else(|| bad("unknown element"))?;
                    let param =
                        PowerLawParam::parse(fields[3]).ok_or_else(|| bad("unknown parameter"))?;
                    let law = PowerLaw {
                        coef: num(fields[4])?,
                        exponent: num(fields[5])?,
                    };
                    if power_laws
                        .insert((group_key((family, element)), param), law)
                        .is_some()
                    {
                        return Err(bad("duplicate powerlaw row"));
                    }
                }
                Some("loglogistic") => {
                    if fields.len() != 8 {
                        return Err(bad("loglogistic rows have 8 fields"));
                    }
                    let family = parse_family(fields[1]).ok_or_else(|| bad("unknown family"))?;
                    let element =
                        parse_element(fields[2]).ok_or_else(|| bad("unknown element"))?;
                    let case =
                        LogLogisticCase::parse(fields[3]).ok_or_else(|| bad("unknown case"))?;
                    let column = AntennaColumn {
                        nt: int(fields[4])?,
                        nr: int(fields[5])?,
                    };
                    let (m, s) = (num(fields[6])?, num(fields[7])?);
                    if !(s > 0.0) || !m.is_finite() {
                        return Err(bad("log-logistic scale must be positive"));
                    }
                    if !columns.contains(&column) {
                        columns.push(column);
                    }
                    if log_logistic
                        .insert((group_key((family, element)), case, column), (m, s))
                        .is_some()
                    {
                        return Err(bad("duplicate loglogistic row"));
                    }
                }
                _ => return Err(bad("unknown row kind")),
            }
        }

        let tables = GainTables {
            power_laws,
            log_logistic,
            columns,
        };
        tables.check_complete(file)?;
        Ok(tables)
    }

    fn check_complete(&self, file: &str) -> Result<()> {
        let incomplete = |msg: String| Error::parse(file, 0, msg);
        if self.columns.is_empty() {
            return Err(incomplete("no log-logistic columns".into()));
        }
        for family in [ChannelFamily::Model3gpp, ChannelFamily::ModelNyu] {
            let params: &[PowerLawParam] = match family {
                ChannelFamily::Model3gpp => &[
                    PowerLawParam::Mu0,
                    PowerLawParam::Sigma0,
                    PowerLawParam::GammaMu,
                    PowerLawParam::GammaSigma,
                ],
                ChannelFamily::ModelNyu => &[PowerLawParam::Alpha0, PowerLawParam::GammaAlpha],
            };
            for element in [ElementType::Iso, ElementType::Sector3gpp] {
                let g = group_key((family, element));
                for p in params {
                    if !self.power_laws.contains_key(&(g, *p)) {
                        return Err(incomplete(format!(
                            "missing powerlaw {p:?} for {family:?}/{element:?}"
                        )));
                    }
                }
                for case in LogLogisticCase::ALL {
                    for col in &self.columns {
                        if !self.log_logistic.contains_key(&(g, case, *col)) {
                            return Err(incomplete(format!(
                                "missing loglogistic {case:?} {}x{} for {family:?}/{element:?}",
                                col.nt, col.nr
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn power_law(
        &self,
        family: ChannelFamily,
        element: ElementType,
        param: PowerLawParam,
    ) -> Option<PowerLaw> {
        self.power_laws
            .get(&(group_key((family, element)), param))
            .copied()
    }

    pub fn log_logistic(
        &self,
        family: ChannelFamily,
        element: ElementType,
        case: LogLogisticCase,
        column: AntennaColumn,
    ) -> Option<(f64, f64)> {
        self.log_logistic
            .get(&(group_key((family, element)), case, column))
            .copied()
    }

    /// Tabulated antenna columns, in file order.
    pub fn columns(&self) -> &[AntennaColumn] {
        &self.columns
    }

    /// Column for `(nt, nr)`: the exact match if tabulated, otherwise the
    /// column whose `Nt*Nr` is nearest on a log scale (first in file order on
    /// ties). The flag is `true` for an exact match.
    pub fn resolve_column(&self, nt: usize, nr: usize) -> (AntennaColumn, bool) {
        let wanted = AntennaColumn { nt, nr };
        if self.columns.contains(&wanted) {
            return (wanted, true);
        }
        let target = ((nt * nr).max(1) as f64).ln();
        let mut best = self.columns[0];
        let mut best_d = f64::INFINITY;
        for col in &self.columns {
            let d = ((col.product() as f64).ln() - target).abs();
            if d < best_d {
                best = *col;
                best_d = d;
            }
        }
        (best, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_tables_parse() {
        let t = GainTables::builtin();
        assert_eq!(
            t.columns(),
            &[
                AntennaColumn { nt: 256, nr: 64 },
                AntennaColumn { nt: 64, nr: 64 },
                AntennaColumn { nt: 64, nr: 16 }
            ]
        );
        let mu0 = t
            .power_law(ChannelFamily::Model3gpp, ElementType::Iso, PowerLawParam::Mu0)
            .unwrap();
        assert_eq!((mu0.coef, mu0.exponent), (0.537, 0.998));
        let ll = t
            .log_logistic(
                ChannelFamily::ModelNyu,
                ElementType::Sector3gpp,
                LogLogisticCase::NlosAligned,
                AntennaColumn { nt: 64, nr: 64 },
            )
            .unwrap();
        assert_eq!(ll, (-3.68, 2.72));
    }

    #[test]
    fn header_is_required() {
        let err = GainTables::parse("powerlaw 3gpp iso mu0 1 1\n", "x").unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn incomplete_tables_are_rejected() {
        let text = format!("{GAIN_TABLES_HEADER}\nloglogistic 3gpp iso misaligned 4 4 0 1\n");
        assert!(GainTables::parse(&text, "x").is_err());
    }

    #[test]
    fn bad_row_reports_line_number() {
        let text = format!("{GAIN_TABLES_HEADER}\n# c\npowerlaw 3gpp iso mu0 abc 1\n");
        let err = GainTables::parse(&text, "t.txt").unwrap_err();
        assert!(err.to_string().starts_with("t.txt: line 3"), "{err}");
    }

    #[test]
    fn nearest_column_by_product() {
        let t = GainTables::builtin();
        assert_eq!(t.resolve_column(256, 64), (AntennaColumn { nt: 256, nr: 64 }, true));
        assert_eq!(t.resolve_column(200, 64).0, AntennaColumn { nt: 256, nr: 64 });
        assert_eq!(t.resolve_column(16, 64), (AntennaColumn { nt: 64, nr: 16 }, false));
        assert_eq!(t.resolve_column(1024, 64).0, AntennaColumn { nt: 256, nr: 64 });
        assert_eq!(t.resolve_column(1, 1).0, AntennaColumn { nt: 64, nr: 16 });
    }
}
