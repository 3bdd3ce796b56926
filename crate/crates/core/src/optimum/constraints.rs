use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{BeamRef, GlobalAssignment};
use crate::geometry::{circular_distance, relative_bearing};
use crate::scenario::Scenario;

/// Absolute slack allowed on every inequality (degrees, watts relative to
/// the budget, schedule fractions).
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// One violated constraint. `slack` is how far the inequality is missed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "constraint", rename_all = "snake_case")]
pub enum Violation {
    /// A config names an unknown gNB, a gNB has two configs, or a config is
    /// for another step.
    BeamOwnership { gnb: u32, reason: String },
    BeamCount { gnb: u32, count: usize, max: usize },
    Width { beam: BeamRef, width: f64, max: f64, slack: f64 },
    Overlap { a: BeamRef, b: BeamRef, separation: f64, required: f64, slack: f64 },
    PowerBudget { gnb: u32, total: f64, budget: f64, slack: f64 },
    /// Negative or non-finite power, or time scheduled on a beam with no power.
    UnusedPower { beam: BeamRef, power: f64 },
    /// A beam appears in more than one CoMP/ABS pairing, is paired with
    /// itself, or a pairing names a beam that does not exist.
    Pairing { beam: BeamRef, count: usize },
    /// A CoMP helper or silenced beam is scheduled to serve its own vehicles.
    HelperScheduled { beam: BeamRef, vehicle: String },
    ScheduleSum { beam: BeamRef, total: f64, slack: f64 },
    /// A fraction outside `[0, 1]`, or a schedule entry for an unknown beam.
    Fraction { beam: BeamRef, vehicle: String, sigma: f64 },
    /// Time scheduled for a vehicle outside the beam or absent at this step.
    Coverage { beam: BeamRef, vehicle: String, sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub step: u32,
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// Check every design and scheduling constraint and report all violations.
pub fn check_feasible(a: &GlobalAssignment, scenario: &Scenario) -> Verdict {
    let tol = FEASIBILITY_TOLERANCE;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    let mut beams: BTreeMap<BeamRef, (f64, f64, f64, u32)> = BTreeMap::new();

    for c in &a.configs {
        let Some(g) = scenario.gnb(c.gnb_id) else {
            out.push(Violation::BeamOwnership {
                gnb: c.gnb_id,
                reason: "unknown gNB".into(),
            });
            continue;
        };
        if !seen.insert(c.gnb_id) {
            out.push(Violation::BeamOwnership {
                gnb: c.gnb_id,
                reason: "gNB has more than one config".into(),
            });
            continue;
        }
        if c.step != a.step {
            out.push(Violation::BeamOwnership {
                gnb: c.gnb_id,
                reason: format!("config for step {} in assignment for step {}", c.step, a.step),
            });
        }
        if c.beams.len() > g.n_beams_max {
            out.push(Violation::BeamCount {
                gnb: g.id,
                count: c.beams.len(),
                max: g.n_beams_max,
            });
        }
        for (i, b) in c.beams.iter().enumerate() {
            let r = BeamRef { gnb: g.id, beam: i };
            if !(b.width > 0.0) || !(b.width <= g.max_width + tol) {
                out.push(Violation::Width {
                    beam: r,
                    width: b.width,
                    max: g.max_width,
                    slack: b.width - g.max_width,
                });
            }
            if !(b.power >= 0.0) || !b.power.is_finite() {
                out.push(Violation::UnusedPower {
                    beam: r,
                    power: b.power,
                });
            }
            beams.insert(r, (b.azimuth, b.width, b.power, g.id));
        }
        for i in 0..c.beams.len() {
            for j in i + 1..c.beams.len() {
                let (bi, bj) = (&c.beams[i], &c.beams[j]);
                let separation = circular_distance(bi.azimuth, bj.azimuth);
                let required = (bi.width + bj.width) / 2.0;
                if !(separation >= required - tol) {
                    out.push(Violation::Overlap {
                        a: BeamRef { gnb: g.id, beam: i },
                        b: BeamRef { gnb: g.id, beam: j },
                        separation,
                        required,
                        slack: required - separation,
                    });
                }
            }
        }
        let total: f64 = c.beams.iter().map(|b| b.power).sum();
        if !(total <= g.p_tot * (1.0 + tol)) {
            out.push(Violation::PowerBudget {
                gnb: g.id,
                total,
                budget: g.p_tot,
                slack: total - g.p_tot,
            });
        }
    }

    let mut pair_count: BTreeMap<BeamRef, usize> = BTreeMap::new();
    for p in a.comp.iter().chain(&a.abs) {
        for r in [p.helper, p.target] {
            *pair_count.entry(r).or_insert(0) += 1;
        }
        if p.helper == p.target {
            *pair_count.entry(p.helper).or_insert(0) += 1;
        }
    }
    for (r, count) in &pair_count {
        if *count > 1 || !beams.contains_key(r) {
            out.push(Violation::Pairing {
                beam: *r,
                count: *count,
            });
        }
    }
    let helpers: BTreeSet<BeamRef> = a.comp.iter().chain(&a.abs).map(|p| p.helper).collect();

    let vehicles = scenario.vehicles_at(a.step);
    let mut sums: BTreeMap<BeamRef, f64> = BTreeMap::new();
    for e in &a.schedule {
        let Some(&(azimuth, width, power, gnb_id)) = beams.get(&e.beam) else {
            out.push(Violation::Fraction {
                beam: e.beam,
                vehicle: e.vehicle.clone(),
                sigma: e.sigma,
            });
            continue;
        };
        if !(0.0..=1.0).contains(&e.sigma) {
            out.push(Violation::Fraction {
                beam: e.beam,
                vehicle: e.vehicle.clone(),
                sigma: e.sigma,
            });
            continue;
        }
        *sums.entry(e.beam).or_insert(0.0) += e.sigma;
        if e.sigma <= 0.0 {
            continue;
        }
        if helpers.contains(&e.beam) {
            out.push(Violation::HelperScheduled {
                beam: e.beam,
                vehicle: e.vehicle.clone(),
            });
        }
        if power <= 0.0 {
            out.push(Violation::UnusedPower {
                beam: e.beam,
                power,
            });
        }
        let gnb = scenario.gnb(gnb_id).expect("checked above");
        let covered = vehicles
            .binary_search_by(|v| v.vehicle_id.as_str().cmp(&e.vehicle))
            .ok()
            .and_then(|i| relative_bearing(&gnb.position, &scenario.vehicle_position(&vehicles[i])).ok())
            .is_some_and(|b| circular_distance(azimuth, b.azimuth()) <= width / 2.0);
        if !covered {
            out.push(Violation::Coverage {
                beam: e.beam,
                vehicle: e.vehicle.clone(),
                sigma: e.sigma,
            });
        }
    }
    for (r, total) in sums {
        if !(total <= 1.0 + tol) {
            out.push(Violation::ScheduleSum {
                beam: r,
                total,
                slack: total - 1.0,
            });
        }
    }

    Verdict {
        step: a.step,
        feasible: out.is_empty(),
        violations: out,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Pairing, ScheduleEntry};
    use super::*;
    use crate::geometry::ElementType;
    use crate::scenario::{GnbSite, LightPhases, ScenarioParts, VehicleSample};
    use crate::strategies::{Beam, BeamConfig};

    fn scenario() -> Scenario {
        let v = VehicleSample {
            step: 0,
            vehicle_id: "v".into(),
            x: 50.0,
            y: 0.0,
            speed: 0.0,
            heading: 0.0,
        };
        let mut g = GnbSite::new(0, 0.0, 0.0, ElementType::Iso);
        g.n_beams_max = 4;
        Scenario::new(ScenarioParts::new(vec![g], vec![v], LightPhases::default())).unwrap()
    }

    fn beam(az: f64, width: f64, power: f64) -> Beam {
        Beam {
            azimuth: az,
            elevation: 0.0,
            width,
            power,
        }
    }

    fn assignment(beams: Vec<Beam>) -> GlobalAssignment {
        GlobalAssignment::new(
            0,
            vec![BeamConfig {
                gnb_id: 0,
                step: 0,
                beams,
            }],
        )
    }

    #[test]
    fn overlap_reports_slack() {
        let a = assignment(vec![beam(10.0, 5.0, 0.5), beam(13.0, 5.0, 0.5)]);
        let v = check_feasible(&a, &scenario());
        assert!(!v.feasible);
        match &v.violations[0] {
            Violation::Overlap { slack, .. } => assert!((slack - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn power_budget() {
        let a = assignment(vec![beam(0.0, 5.0, 0.6), beam(90.0, 5.0, 0.6)]);
        let v = check_feasible(&a, &scenario());
        assert!(matches!(v.violations[..], [Violation::PowerBudget { .. }]));
    }

    #[test]
    fn uncovered_vehicle_scheduled() {
        let mut a = assignment(vec![beam(90.0, 5.0, 1.0)]);
        a.schedule.push(ScheduleEntry {
            beam: BeamRef { gnb: 0, beam: 0 },
            vehicle: "v".into(),
            sigma: 0.5,
        });
        let v = check_feasible(&a, &scenario());
        assert!(matches!(v.violations[..], [Violation::Coverage { .. }]));

        let mut a = assignment(vec![beam(0.0, 5.0, 1.0)]);
        a.schedule.push(ScheduleEntry {
            beam: BeamRef { gnb: 0, beam: 0 },
            vehicle: "v".into(),
            sigma: 1.0,
        });
        assert!(check_feasible(&a, &scenario()).feasible);
    }

    #[test]
    fn schedule_sum_and_fraction() {
        let mut a = assignment(vec![beam(0.0, 5.0, 1.0)]);
        for s in [0.7, 0.6] {
            a.schedule.push(ScheduleEntry {
                beam: BeamRef { gnb: 0, beam: 0 },
                vehicle: "v".into(),
                sigma: s,
            });
        }
        let v = check_feasible(&a, &scenario());
        assert!(matches!(v.violations[..], [Violation::ScheduleSum { .. }]));
        let mut a = assignment(vec![beam(0.0, 5.0, 1.0)]);
        a.schedule.push(ScheduleEntry {
            beam: BeamRef { gnb: 0, beam: 0 },
            vehicle: "v".into(),
            sigma: 1.5,
        });
        assert!(!check_feasible(&a, &scenario()).feasible);
    }

    #[test]
    fn width_and_count() {
        let a = assignment(vec![beam(0.0, 6.0, 0.2)]);
        assert!(matches!(
            check_feasible(&a, &scenario()).violations[..],
            [Violation::Width { .. }]
        ));
        let a = assignment((0..5).map(|i| beam(i as f64 * 60.0, 5.0, 0.2)).collect());
        assert!(matches!(
            check_feasible(&a, &scenario()).violations[..],
            [Violation::BeamCount { .. }]
        ));
    }

    #[test]
    fn pairings_are_exclusive() {
        let mut a = assignment(vec![
            beam(0.0, 5.0, 0.3),
            beam(90.0, 5.0, 0.3),
            beam(180.0, 5.0, 0.3),
        ]);
        let r = |i| BeamRef { gnb: 0, beam: i };
        a.comp.push(Pairing {
            helper: r(1),
            target: r(0),
        });
        assert!(check_feasible(&a, &scenario()).feasible);
        a.abs.push(Pairing {
            helper: r(1),
            target: r(2),
        });
        let v = check_feasible(&a, &scenario());
        assert!(matches!(v.violations[..], [Violation::Pairing { .. }]));
    }
}
