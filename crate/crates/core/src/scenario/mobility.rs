//! Mobility trace CSV: `t,veh_id,x,y,speed,heading`.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::VehicleSample;
use crate::error::{Error, Result};

pub const MOBILITY_HEADER: &str = "# beamsim-mobility/1";
const COLUMNS: [&str; 6] = ["t", "veh_id", "x", "y", "speed", "heading"];

pub fn load_mobility(path: &Path) -> Result<Vec<VehicleSample>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_mobility(f, &path.display().to_string())
}

/// Parse a mobility trace. Rows must be grouped by non-decreasing `t`; the
/// result is sorted by `(t, veh_id)`.
pub fn parse_mobility<R: Read>(mut reader: R, file: &str) -> Result<Vec<VehicleSample>> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io(file, e))?;
    check_version(&text, file, MOBILITY_HEADER)?;
    if text.lines().all(|l| l.trim().is_empty() || l.starts_with('#')) {
        return Ok(Vec::new());
    }

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let header_line = rdr.position().line().saturating_sub(1).max(1) as usize;
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::parse(file, header_line, format!("missing column `{name}`"))
        })?;
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut current: Option<u32> = None;
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            rec.get(idx[i])
                .ok_or_else(|| Error::parse(file, line, format!("missing field `{}`", COLUMNS[i])))
        };
        let num = |i: usize| -> Result<f64> {
            let raw = field(i)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(file, line, format!("bad {} `{raw}`", COLUMNS[i])))
        };
        let t = parse_step(field(0)?).ok_or_else(|| {
            Error::parse(file, line, format!("bad time step `{}`", rec.get(idx[0]).unwrap_or("")))
        })?;
        let vehicle_id = field(1)?.to_string();
        if vehicle_id.is_empty() {
            return Err(Error::parse(file, line, "empty vehicle id"));
        }
        let sample = VehicleSample {
            step: t,
            vehicle_id,
            x: num(2)?,
            y: num(3)?,
            speed: num(4)?,
            heading: num(5)?,
        };
        if sample.speed < 0.0 {
            return Err(Error::parse(file, line, "negative speed"));
        }
        match current {
            Some(c) if t < c => {
                return Err(Error::parse(
                    file,
                    line,
                    format!("time step {t} after step {c} (time must not decrease)"),
                ))
            }
            Some(c) if t == c => {}
            _ => {
                current = Some(t);
                seen.clear();
            }
        }
        if !seen.insert(sample.vehicle_id.clone()) {
            return Err(Error::parse(
                file,
                line,
                format!("duplicate sample for vehicle `{}` at t={t}", sample.vehicle_id),
            ));
        }
        out.push(sample);
    }
    out.sort_by(|a, b| a.step.cmp(&b.step).then_with(|| a.vehicle_id.cmp(&b.vehicle_id)));
    Ok(out)
}

/// Write samples in normalized form: version line, header, rows sorted by
/// `(t, veh_id)`.
pub fn write_mobility<W: Write>(samples: &[VehicleSample], writer: W) -> Result<()> {
    let mut sorted: Vec<&VehicleSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.step.cmp(&b.step).then_with(|| a.vehicle_id.cmp(&b.vehicle_id)));
    let mut w = std::io::BufWriter::new(writer);
    let io = |e| Error::io("<mobility output>", e);
    writeln!(w, "{MOBILITY_HEADER}").map_err(io)?;
    writeln!(w, "{}", COLUMNS.join(",")).map_err(io)?;
    for s in sorted {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.step, s.vehicle_id, s.x, s.y, s.speed, s.heading
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Accepts integral step numbers, also written as `12.0` or `12.00`.
fn parse_step(raw: &str) -> Option<u32> {
    if let Ok(v) = raw.parse::<u32>() {
        return Some(v);
    }
    let v: f64 = raw.parse().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64).then_some(v as u32)
}

pub(super) fn check_version(text: &str, file: &str, expected: &str) -> Result<()> {
    let prefix = expected.rsplit_once('/').map(|(p, _)| p).unwrap_or(expected);
    if let Some(first) = text.lines().next() {
        let first = first.trim();
        if first.starts_with(prefix) && first != expected {
            return Err(Error::parse(
                file,
                1,
                format!("unsupported format `{first}`, expected `{expected}`"),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input() {
        assert!(parse_mobility("".as_bytes(), "m").unwrap().is_empty());
        assert!(parse_mobility("t,veh_id,x,y,speed,heading\n".as_bytes(), "m")
            .unwrap()
            .is_empty());
    }

    #[test]
    fn two_vehicles_three_steps() {
        let mut text = String::from("t,veh_id,x,y,speed,heading,lane\n");
        for t in 0..3 {
            text.push_str(&format!("{t},b,{t},0,1,0,l1\n{t},a,0,{t},1,90,l2\n"));
        }
        let s = parse_mobility(text.as_bytes(), "m").unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0].vehicle_id, "a");
        assert_eq!(s[1].vehicle_id, "b");
        assert_eq!(s[5].step, 2);
    }

    #[test]
    fn duplicate_rejected_with_line() {
        let text = "# beamsim-mobility/1\nt,veh_id,x,y,speed,heading\n0,a,0,0,0,0\n0,a,1,0,0,0\n";
        match parse_mobility(text.as_bytes(), "m.csv") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn time_must_not_decrease() {
        let text = "t,veh_id,x,y,speed,heading\n1,a,0,0,0,0\n0,b,0,0,0,0\n";
        match parse_mobility(text.as_bytes(), "m.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        let text = "t,veh_id,x,y,speed,heading\n0,a,zz,0,0,0\n";
        match parse_mobility(text.as_bytes(), "m.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = "t,veh_id,x,y,speed\n0,a,0,0,0\n";
        assert!(parse_mobility(text.as_bytes(), "m.csv").is_err());
        let text = "# beamsim-mobility/2\nt,veh_id,x,y,speed,heading\n";
        assert!(parse_mobility(text.as_bytes(), "m.csv").is_err());
        let text = "t,veh_id,x,y,speed,heading\n0.5,a,0,0,0,0\n";
        assert!(parse_mobility(text.as_bytes(), "m.csv").is_err());
    }

    #[test]
    fn float_steps_accepted() {
        let text = "t,veh_id,x,y,speed,heading\n3.00,a,0,0,0,0\n";
        assert_eq!(parse_mobility(text.as_bytes(), "m").unwrap()[0].step, 3);
    }
}
