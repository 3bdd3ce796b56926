//! Exhaustive beam design for desk-scale instances.
//!
//! Candidate beams of a gNB sit on a direction grid (plus the approach
//! azimuths of its traffic light) with one of the allowed widths, and must
//! cover at least one vehicle. A gNB configuration is a set of pairwise
//! non-overlapping candidates plus some number of beams that cover nobody.
//! How a configuration performs only depends on its signature (coverage,
//! sector offset and elevation of each covering beam, and the count of empty
//! beams), so configurations with equal signatures are evaluated once, using
//! the first one enumerated.
//!
//! Two-gNB searches go through branch and bound: the value of a gNB's beams
//! with the other gNB silent bounds their value under any other
//! configuration, because extra interference never raises a rate.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{delivered_bits, BeamRef, GlobalAssignment, OnAir, Pairing, ScheduleEntry};
use crate::error::{Error, Result};
use crate::geometry::circular_distance;
use crate::radio::{PlacedBeam, PlacedConfig, StepRadio};
use crate::strategies::{Beam, BeamConfig};

pub const MAX_GNBS: usize = 2;
pub const MAX_BEAMS: usize = 4;
/// Total beam budget above which CoMP/ABS pairings are not enumerated.
pub const MAX_PAIRING_BEAMS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimumConfig {
    /// Direction grid step in degrees.
    pub grid_step: f64,
    /// Allowed widths; empty means each gNB's maximum width only.
    pub width_choices: Vec<f64>,
    pub enable_comp_abs: bool,
    /// Also try the approach azimuths of each gNB's traffic light.
    pub light_directions: bool,
    /// Ground distance aimed at when the elevation policy keeps stored
    /// elevations.
    pub nominal_target_m: f64,
}

impl Default for OptimumConfig {
    fn default() -> Self {
        OptimumConfig {
            grid_step: 5.0,
            width_choices: Vec::new(),
            enable_comp_abs: false,
            light_directions: true,
            nominal_target_m: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumResult {
    pub assignment: GlobalAssignment,
    /// Delivered bits of `assignment`.
    pub objective: u64,
    /// Distinct configurations per gNB after signature deduplication.
    pub configs_per_gnb: Vec<usize>,
    /// Configuration pairs (or singles) fully evaluated.
    pub evaluated: u64,
}

/// Signature of a configuration: covering beams as (coverage id, sector
/// offset bits, elevation bits), sorted, and the empty-beam count.
type Signature = (Vec<(u32, u64, u64)>, usize);

struct GnbSearch {
    g: usize,
    configs: Vec<Vec<Beam>>,
}

/// A configuration put on air with everything the pair search needs.
struct Evaluated {
    placed: PlacedConfig,
    /// Per beam: `(vehicle, signal, noise plus own-gNB interference)`.
    serve: Vec<Vec<(usize, f64, f64)>>,
    /// Value with the other gNB silent.
    bound: u64,
    /// Interference this configuration puts on vehicles served by the other
    /// gNB, indexed by vehicle.
    cross: Vec<f64>,
}

fn validate(step: &StepRadio, cfg: &OptimumConfig) -> Result<()> {
    let gnbs = step.gnbs();
    if gnbs.len() > MAX_GNBS {
        return Err(Error::InstanceTooLarge(format!(
            "{} gNBs, brute force handles at most {MAX_GNBS}",
            gnbs.len()
        )));
    }
    if let Some(g) = gnbs.iter().find(|g| g.n_beams_max > MAX_BEAMS) {
        return Err(Error::InstanceTooLarge(format!(
            "gNB {} allows {} beams, brute force handles at most {MAX_BEAMS}",
            g.id, g.n_beams_max
        )));
    }
    if cfg.enable_comp_abs {
        let total: usize = gnbs.iter().map(|g| g.n_beams_max).sum();
        if total > MAX_PAIRING_BEAMS {
            return Err(Error::InstanceTooLarge(format!(
                "CoMP/ABS enumeration needs at most {MAX_PAIRING_BEAMS} beams in total, got {total}"
            )));
        }
    }
    if !(cfg.grid_step > 0.0 && cfg.grid_step <= 360.0) {
        return Err(Error::Config("direction grid step must be in (0, 360]".into()));
    }
    if !(cfg.nominal_target_m > 0.0) {
        return Err(Error::Config("nominal target distance must be positive".into()));
    }
    for g in gnbs {
        for &w in &cfg.width_choices {
            if !(w > 0.0 && w <= g.max_width) {
                return Err(Error::Config(format!(
                    "width choice {w} outside (0, {}] of gNB {}",
                    g.max_width, g.id
                )));
            }
        }
    }
    Ok(())
}

fn directions(step: &StepRadio, g: usize, cfg: &OptimumConfig) -> Vec<f64> {
    let n = (360.0 / cfg.grid_step).ceil() as usize;
    let mut out: Vec<f64> = (0..n)
        .map(|i| i as f64 * cfg.grid_step)
        .filter(|&d| d < 360.0)
        .collect();
    if cfg.light_directions {
        let scenario = step.radio.scenario;
        if let Some(l) = step.gnbs()[g].light.as_deref().and_then(|id| scenario.lights().light(id)) {
            out.extend(l.approaches().iter().map(|&a| a as f64));
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn overlaps(a: &Beam, b: &Beam) -> bool {
    circular_distance(a.azimuth, b.azimuth) < (a.width + b.width) / 2.0
}

/// Enumerate configurations of gNB `g`, one per signature, in enumeration
/// order: candidate subsets in lexicographic order of candidate indices,
/// each followed by its empty-beam variants.
fn enumerate(step: &StepRadio, g: usize, cfg: &OptimumConfig) -> GnbSearch {
    let site = &step.gnbs()[g];
    let widths: Vec<f64> = if cfg.width_choices.is_empty() {
        vec![site.max_width]
    } else {
        let mut w = cfg.width_choices.clone();
        w.sort_by(f64::total_cmp);
        w.dedup();
        w
    };
    let elevation = (step.radio.scenario.vehicle_height() - site.position.z)
        .atan2(cfg.nominal_target_m)
        .to_degrees();
    let dirs = directions(step, g, cfg);
    let mut candidates: Vec<PlacedBeam> = Vec::new();
    let mut spare: Vec<Beam> = Vec::new();
    for &d in &dirs {
        for (wi, &w) in widths.iter().enumerate() {
            let beam = Beam {
                azimuth: d,
                elevation,
                width: w,
                power: 0.0,
            };
            let placed = step.place_beam(g, &beam, 0);
            if !placed.coverage.is_empty() {
                candidates.push(placed);
            } else if wi == 0 {
                spare.push(beam);
            }
        }
    }

    let mut coverage_ids: HashMap<Vec<usize>, u32> = HashMap::new();
    let cov: Vec<u32> = candidates
        .iter()
        .map(|c| {
            let next = coverage_ids.len() as u32;
            *coverage_ids.entry(c.coverage.clone()).or_insert(next)
        })
        .collect();

    let n_max = site.n_beams_max;
    let mut seen: HashSet<Signature> = HashSet::new();
    let mut configs = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();

    fn visit(
        start: usize,
        chosen: &mut Vec<usize>,
        ctx: &mut dyn FnMut(&[usize]),
        candidates: &[PlacedBeam],
        n_max: usize,
    ) {
        ctx(chosen);
        if chosen.len() == n_max {
            return;
        }
        for c in start..candidates.len() {
            if chosen
                .iter()
                .any(|&o| overlaps(&candidates[o].beam, &candidates[c].beam))
            {
                continue;
            }
            chosen.push(c);
            visit(c + 1, chosen, ctx, candidates, n_max);
            chosen.pop();
        }
    }

    let mut emit = |set: &[usize]| {
        let mut key: Vec<(u32, u64, u64)> = set
            .iter()
            .map(|&c| {
                let b = &candidates[c];
                (cov[c], b.delta1.to_bits(), b.beam.elevation.to_bits())
            })
            .collect();
        key.sort_unstable();
        let mut empties: Vec<Beam> = Vec::new();
        for e in 0..=n_max - set.len() {
            if e > 0 {
                let Some(b) = spare.iter().find(|s| {
                    set.iter().all(|&c| !overlaps(&candidates[c].beam, s))
                        && empties.iter().all(|o| !overlaps(o, s))
                }) else {
                    break;
                };
                empties.push(*b);
            }
            let n = set.len() + e;
            if !seen.insert((key.clone(), e)) {
                continue;
            }
            let power = if n == 0 { 0.0 } else { site.p_tot / n as f64 };
            let beams = set
                .iter()
                .map(|&c| candidates[c].beam)
                .chain(empties.iter().copied())
                .map(|b| Beam { power, ..b })
                .collect();
            configs.push(beams);
        }
    };
    visit(0, &mut chosen, &mut emit, &candidates, n_max);
    GnbSearch { g, configs }
}

fn evaluate(
    step: &StepRadio,
    search: &GnbSearch,
    other: Option<usize>,
    servable_by_other: &[bool],
) -> Result<Vec<Evaluated>> {
    let g = search.g;
    let n0 = step.radio.noise();
    let dt = step.radio.scenario.step_duration();
    search
        .configs
        .par_iter()
        .map(|beams| {
            let placed = step.place(g, beams);
            let mut serve = Vec::with_capacity(placed.beams.len());
            let mut bound = 0u64;
            for (i, b) in placed.beams.iter().enumerate() {
                let mut row = Vec::with_capacity(b.coverage.len());
                let mut best = 0u64;
                for &v in &b.coverage {
                    let s = step.contribution(&placed, i, v, true)?;
                    let mut d = n0;
                    d += step.interference(&placed, v, g, |j| j == i)?;
                    best = best.max(delivered_bits(1.0, step.rate(s / d), dt));
                    row.push((v, s, d));
                }
                bound += best;
                serve.push(row);
            }
            let mut cross = vec![0.0; servable_by_other.len()];
            if let Some(h) = other {
                for (v, x) in cross.iter_mut().enumerate() {
                    if servable_by_other[v] {
                        *x = step.interference(&placed, v, h, |_| false)?;
                    }
                }
            }
            Ok(Evaluated {
                placed,
                serve,
                bound,
                cross,
            })
        })
        .collect()
}

fn value_against(e: &Evaluated, cross: &[f64], step: &StepRadio, dt: f64) -> u64 {
    e.serve
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(v, s, d)| delivered_bits(1.0, step.rate(s / (d + cross[v])), dt))
                .max()
                .unwrap_or(0)
        })
        .sum()
}

fn to_config(step: &StepRadio, pc: &PlacedConfig) -> BeamConfig {
    BeamConfig {
        gnb_id: step.gnbs()[pc.gnb].id,
        step: step.step,
        beams: pc.beams.iter().map(|b| b.beam).collect(),
    }
}

/// Greedy schedule (each serving beam gives all its time to its best
/// vehicle) and its value under the given pairings.
fn schedule(
    step: &StepRadio,
    configs: &[BeamConfig],
    comp: &[Pairing],
    abs: &[Pairing],
) -> Result<(u64, Vec<ScheduleEntry>)> {
    let air = OnAir::new(step, configs)?;
    let pos = |r: &BeamRef| air.index[r];
    let silent: Vec<(usize, usize)> = abs.iter().map(|p| pos(&p.helper)).collect();
    let dt = step.radio.scenario.step_duration();
    let mut total = 0u64;
    let mut out = Vec::new();
    for (ci, pc) in air.placed.iter().enumerate() {
        for (i, b) in pc.beams.iter().enumerate() {
            let r = BeamRef {
                gnb: configs[ci].gnb_id,
                beam: b.source,
            };
            if comp.iter().chain(abs).any(|p| p.helper == r) {
                continue;
            }
            let helpers: Vec<(usize, usize)> = comp
                .iter()
                .filter(|p| p.target == r)
                .map(|p| pos(&p.helper))
                .collect();
            let mut best: Option<(f64, usize)> = None;
            for &v in &b.coverage {
                let rate = step.rate(air.sinr(step, ci, i, v, &helpers, &silent)?);
                if rate > 0.0 && best.is_none_or(|(r0, _)| rate > r0) {
                    best = Some((rate, v));
                }
            }
            if let Some((rate, v)) = best {
                total += delivered_bits(1.0, rate, dt);
                out.push(ScheduleEntry {
                    beam: r,
                    vehicle: step.vehicles()[v].vehicle_id.clone(),
                    sigma: 1.0,
                });
            }
        }
    }
    Ok((total, out))
}

/// All sets of disjoint pairings over `beams`, each as CoMP or ABS, in a
/// fixed order starting with no pairing at all.
fn pairings(beams: &[BeamRef]) -> Vec<(Vec<Pairing>, Vec<Pairing>)> {
    fn go(
        rest: &[BeamRef],
        comp: &mut Vec<Pairing>,
        abs: &mut Vec<Pairing>,
        out: &mut Vec<(Vec<Pairing>, Vec<Pairing>)>,
    ) {
        let Some((&first, tail)) = rest.split_first() else {
            out.push((comp.clone(), abs.clone()));
            return;
        };
        go(tail, comp, abs, out);
        for (j, &partner) in tail.iter().enumerate() {
            let mut remaining: Vec<BeamRef> = tail.to_vec();
            remaining.remove(j);
            for (helper, target) in [(first, partner), (partner, first)] {
                let p = Pairing { helper, target };
                comp.push(p);
                go(&remaining, comp, abs, out);
                comp.pop();
                abs.push(p);
                go(&remaining, comp, abs, out);
                abs.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(beams, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// Best global assignment at one step, by exhaustive search.
///
/// Ties go to the configuration (then pairing set) enumerated first.
pub fn brute_force_optimum(step: &StepRadio, cfg: &OptimumConfig) -> Result<OptimumResult> {
    validate(step, cfg)?;
    let n_gnb = step.gnbs().len();
    let searches: Vec<GnbSearch> = (0..n_gnb).map(|g| enumerate(step, g, cfg)).collect();
    let configs_per_gnb: Vec<usize> = searches.iter().map(|s| s.configs.len()).collect();
    log::debug!(
        "step {}: {:?} distinct configurations per gNB",
        step.step,
        configs_per_gnb
    );
    let nv = step.n_vehicles();
    let servable: Vec<Vec<bool>> = searches
        .iter()
        .map(|s| {
            let mut mask = vec![false; nv];
            for c in &s.configs {
                for b in c {
                    for v in step.coverage(s.g, b.azimuth, b.width) {
                        mask[v] = true;
                    }
                }
            }
            mask
        })
        .collect();
    let evaluated: Vec<Vec<Evaluated>> = searches
        .iter()
        .enumerate()
        .map(|(g, s)| {
            let other = (n_gnb == 2).then_some(1 - g);
            let mask = other.map_or_else(|| vec![false; nv], |h| servable[h].clone());
            evaluate(step, s, other, &mask)
        })
        .collect::<Result<_>>()?;

    if cfg.enable_comp_abs {
        return comp_abs_search(step, &evaluated, configs_per_gnb);
    }

    let dt = step.radio.scenario.step_duration();
    let (value, picks, count) = match n_gnb {
        0 => (0, Vec::new(), 0),
        1 => {
            let e = &evaluated[0];
            let mut best = 0;
            for (i, c) in e.iter().enumerate() {
                if c.bound > e[best].bound {
                    best = i;
                }
            }
            (e[best].bound, vec![best], e.len() as u64)
        }
        _ => {
            let (e1, e2) = (&evaluated[0], &evaluated[1]);
            let by_bound = |e: &[Evaluated]| {
                let mut o: Vec<usize> = (0..e.len()).collect();
                o.sort_by(|&a, &b| e[b].bound.cmp(&e[a].bound).then(a.cmp(&b)));
                o
            };
            let (o1, o2) = (by_bound(e1), by_bound(e2));
            let top2 = e2[o2[0]].bound;
            let best = AtomicU64::new(0);
            let count = AtomicU64::new(0);
            let found = o1
                .par_iter()
                .filter_map(|&a| {
                    let c1 = &e1[a];
                    if c1.bound + top2 < best.load(Ordering::Relaxed) {
                        return None;
                    }
                    let mut local: Option<(u64, usize)> = None;
                    for &b in &o2 {
                        let c2 = &e2[b];
                        if c1.bound + c2.bound < best.load(Ordering::Relaxed) {
                            break;
                        }
                        count.fetch_add(1, Ordering::Relaxed);
                        let v = value_against(c1, &c2.cross, step, dt)
                            + value_against(c2, &c1.cross, step, dt);
                        if local.is_none_or(|(lv, lb)| v > lv || (v == lv && b < lb)) {
                            local = Some((v, b));
                        }
                        best.fetch_max(v, Ordering::Relaxed);
                    }
                    local.map(|(v, b)| (v, a, b))
                })
                .collect::<Vec<_>>();
            let (v, a, b) = found
                .into_iter()
                .min_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))))
                .expect("the best pair is never pruned");
            (v, vec![a, b], count.into_inner())
        }
    };

    let configs: Vec<BeamConfig> = picks
        .iter()
        .enumerate()
        .map(|(g, &i)| to_config(step, &evaluated[g][i].placed))
        .collect();
    let (objective, sched) = schedule(step, &configs, &[], &[])?;
    debug_assert_eq!(objective, value);
    let mut assignment = GlobalAssignment::new(step.step, configs);
    assignment.schedule = sched;
    Ok(OptimumResult {
        assignment,
        objective,
        configs_per_gnb,
        evaluated: count,
    })
}

fn comp_abs_search(
    step: &StepRadio,
    evaluated: &[Vec<Evaluated>],
    configs_per_gnb: Vec<usize>,
) -> Result<OptimumResult> {
    let combos: Vec<Vec<usize>> = match evaluated.len() {
        0 => vec![Vec::new()],
        1 => (0..evaluated[0].len()).map(|a| vec![a]).collect(),
        _ => (0..evaluated[0].len())
            .flat_map(|a| (0..evaluated[1].len()).map(move |b| vec![a, b]))
            .collect(),
    };
    let count = AtomicU64::new(0);
    let scored = combos
        .par_iter()
        .enumerate()
        .map(|(ci, picks)| -> Result<_> {
            let configs: Vec<BeamConfig> = picks
                .iter()
                .enumerate()
                .map(|(g, &i)| to_config(step, &evaluated[g][i].placed))
                .collect();
            let refs: Vec<BeamRef> = configs
                .iter()
                .flat_map(|c| (0..c.beams.len()).map(move |beam| BeamRef { gnb: c.gnb_id, beam }))
                .collect();
            let mut best: Option<(u64, usize, GlobalAssignment)> = None;
            for (pi, (comp, abs)) in pairings(&refs).into_iter().enumerate() {
                count.fetch_add(1, Ordering::Relaxed);
                let (v, sched) = schedule(step, &configs, &comp, &abs)?;
                if best.as_ref().is_none_or(|(bv, _, _)| v > *bv) {
                    let mut a = GlobalAssignment::new(step.step, configs.clone());
                    a.schedule = sched;
                    a.comp = comp;
                    a.abs = abs;
                    best = Some((v, pi, a));
                }
            }
            let (v, pi, a) = best.expect("the empty pairing set is always enumerated");
            Ok((v, ci, pi, a))
        })
        .collect::<Result<Vec<_>>>()?;
    let (objective, _, _, assignment) = scored
        .into_iter()
        .min_by(|x, y| y.0.cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))))
        .expect("at least one combination");
    Ok(OptimumResult {
        assignment,
        objective,
        configs_per_gnb,
        evaluated: count.into_inner(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_sets() {
        let r = |beam| BeamRef { gnb: 0, beam };
        assert_eq!(pairings(&[]).len(), 1);
        assert_eq!(pairings(&[r(0)]).len(), 1);
        // none, or one pair in 2 directions x 2 kinds
        assert_eq!(pairings(&[r(0), r(1)]).len(), 5);
        // none, 3 single pairs x 4, no room for two pairs
        assert_eq!(pairings(&[r(0), r(1), r(2)]).len(), 13);
        // none, 6 x 4 single pairs, 3 perfect matchings x 16
        assert_eq!(pairings(&[r(0), r(1), r(2), r(3)]).len(), 73);
    }
}
