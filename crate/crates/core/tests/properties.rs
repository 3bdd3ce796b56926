mod common;

use beamsim_core::channel::{
    classify_alignment, gain_distribution, Alignment, ChannelFamily, GainDistribution, GainTables,
    LinkRegime, MisalignmentAngles,
};
use beamsim_core::engine::{run_default, RunConfig, Strategy};
use beamsim_core::geometry::{
    array_response, circular_distance, steering_vector, AnglePair, ElementType, UpaConfig,
};
use beamsim_core::link::{effective_rate, shannon_rate, sinr, CqiTable};
use beamsim_core::optimum::{
    brute_force_optimum, check_feasible, objective_value, BeamRef, GlobalAssignment,
    OptimumConfig, ScheduleEntry,
};
use beamsim_core::radio::{ScenarioRadio, StepRadio};
use beamsim_core::report::RunSummary;
use beamsim_core::scenario::{
    parse_lights, parse_mobility, synthesize_corridor, synthesize_intersection, write_lights,
    write_mobility, CorridorParams, IntersectionParams, Scenario, ScenarioParts, VehicleSample,
};
use beamsim_core::strategies::{
    circular_diameter, complete_linkage_cluster, dynamic_design, static_design, tl_design,
    AngularObservation, Beam, BeamConfig, DesignConfig,
};
use proptest::prelude::*;

fn corridor(seed: u64, arrival: f64, n: usize, a: f64, steps: u32) -> Scenario {
    let mut c = CorridorParams::default();
    c.intersection.seed = seed;
    c.intersection.arrival_rate = arrival;
    c.intersection.n_beams = n;
    c.intersection.max_width = a;
    c.intersection.n_steps = steps;
    c.intersection.warmup_steps = 40;
    synthesize_corridor(&c).unwrap()
}

/// All time of each beam on its best covered vehicle with a positive rate.
fn best_schedule(step: &StepRadio, configs: Vec<BeamConfig>) -> GlobalAssignment {
    let mut a = GlobalAssignment::new(step.step, configs);
    let placed: Vec<_> = a
        .configs
        .iter()
        .map(|c| step.place(step.gnb_index(c.gnb_id).unwrap(), &c.beams))
        .collect();
    // Schedule entries refer to placed (canonical) positions.
    for (c, pc) in a.configs.iter_mut().zip(&placed) {
        c.beams = pc.beams.iter().map(|b| b.beam).collect();
    }
    for (ci, pc) in placed.iter().enumerate() {
        for (i, b) in pc.beams.iter().enumerate() {
            let mut best: Option<(f64, usize)> = None;
            for &v in &b.coverage {
                let r = step.rate(step.sinr(&placed, ci, i, v).unwrap());
                if r > 0.0 && best.is_none_or(|(br, _)| r > br) {
                    best = Some((r, v));
                }
            }
            if let Some((_, v)) = best {
                a.schedule.push(ScheduleEntry {
                    beam: BeamRef {
                        gnb: a.configs[ci].gnb_id,
                        beam: i,
                    },
                    vehicle: step.vehicles()[v].vehicle_id.clone(),
                    sigma: 1.0,
                });
            }
        }
    }
    a
}

fn snapped(configs: &[BeamConfig], grid: f64) -> Vec<BeamConfig> {
    configs
        .iter()
        .map(|c| BeamConfig {
            beams: c
                .beams
                .iter()
                .map(|b| Beam {
                    azimuth: ((b.azimuth / grid).round() * grid).rem_euclid(360.0),
                    ..*b
                })
                .collect(),
            ..c.clone()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn steering_is_unit_norm(n1 in 1usize..=32, n2 in 1usize..=32, az in -180.0..180.0f64, el in -90.0..=90.0f64) {
        let upa = UpaConfig::new(n1, n2, ElementType::Iso).unwrap();
        let phi = AnglePair::new(az, el).unwrap();
        let v = steering_vector(&upa, &phi);
        prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        let ip = array_response(&upa, &phi).inner(&v).unwrap();
        prop_assert!((ip.norm() - (upa.elements() as f64).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn circular_distance_is_symmetric(a in -1000.0..1000.0f64, b in -1000.0..1000.0f64) {
        let d = circular_distance(a, b);
        prop_assert_eq!(d, circular_distance(b, a));
        prop_assert!((0.0..=180.0).contains(&d));
    }

    #[test]
    fn aligned_parameters_fall_with_elevation_error(
        lo in 0.0..20.0f64,
        step in 0.01..20.0f64,
        nyu in any::<bool>(),
        sector in any::<bool>(),
    ) {
        let tables = GainTables::builtin();
        let family = if nyu { ChannelFamily::ModelNyu } else { ChannelFamily::Model3gpp };
        let element = if sector { ElementType::Sector3gpp } else { ElementType::Iso };
        let regime = LinkRegime::new(true, Alignment::FullyAligned);
        let at = |d2: f64| {
            gain_distribution(&tables, family, element, regime, 256, 64, MisalignmentAngles::new(0.0, d2).unwrap()).unwrap()
        };
        match (at(lo), at(lo + step)) {
            (GainDistribution::Gaussian { mu: m0, sigma: s0 }, GainDistribution::Gaussian { mu: m1, sigma: s1 }) => {
                prop_assert!(m1 < m0 || m1 == f64::MIN_POSITIVE);
                prop_assert!(s1 < s0 || s1 == f64::MIN_POSITIVE);
            }
            (GainDistribution::Exponential { alpha: a0 }, GainDistribution::Exponential { alpha: a1 }) => {
                prop_assert!(a1 < a0 || a1 == f64::MIN_POSITIVE);
            }
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn alignment_ignores_full_turns(
        b in 0.0..360.0f64, w in 1.0..30.0f64, vb in 0.0..360.0f64,
        r in 0.0..360.0f64, rw in 1.0..30.0f64, gb in 0.0..360.0f64,
        turns in proptest::collection::vec(-3i32..=3, 4),
    ) {
        let base = classify_alignment(b, w, vb, r, rw, gb);
        let t = |x: f64, k: i32| x + 360.0 * k as f64;
        let moved = classify_alignment(t(b, turns[0]), w, t(vb, turns[1]), t(r, turns[2]), rw, t(gb, turns[3]));
        prop_assert_eq!(base, moved);
    }

    #[test]
    fn rates_are_ordered_and_monotone(a in -30.0..50.0f64, b in -30.0..50.0f64) {
        let t = CqiTable::builtin();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (lo, hi) = (10f64.powf(lo / 10.0), 10f64.powf(hi / 10.0));
        prop_assert!(effective_rate(lo, 400e6, &t) <= shannon_rate(lo, 400e6));
        prop_assert!(effective_rate(lo, 400e6, &t) <= effective_rate(hi, 400e6, &t));
        prop_assert!(shannon_rate(lo, 400e6) <= shannon_rate(hi, 400e6));
    }

    #[test]
    fn sinr_is_scale_invariant(
        p in 1e-3..10.0f64, g in 1e-9..1.0f64, n0 in 1e-12..1e-6f64, c in 1e-3..1e3f64,
        interferers in proptest::collection::vec((1e-3..10.0f64, 1e-12..1e-3f64), 0..5),
    ) {
        let base = sinr(p, g, &interferers, n0);
        let scaled: Vec<(f64, f64)> = interferers.iter().map(|&(pi, gi)| (pi * c, gi)).collect();
        let s = sinr(p * c, g, &scaled, n0 * c);
        prop_assert!(((s - base) / base).abs() < 1e-12);
    }

    #[test]
    fn mobility_round_trips(rows in proptest::collection::vec(
        (0u32..20, 0usize..6, -500.0..500.0f64, -500.0..500.0f64, 0.0..30.0f64, 0.0..360.0f64), 0..40)
    ) {
        let mut samples: Vec<VehicleSample> = Vec::new();
        for (step, id, x, y, speed, heading) in rows {
            let vehicle_id = format!("veh{id}");
            if samples.iter().any(|s| s.step == step && s.vehicle_id == vehicle_id) {
                continue;
            }
            samples.push(VehicleSample { step, vehicle_id, x, y, speed, heading });
        }
        let mut text = Vec::new();
        write_mobility(&samples, &mut text).unwrap();
        let parsed = parse_mobility(&text[..], "mem").unwrap();
        let mut again = Vec::new();
        write_mobility(&parsed, &mut again).unwrap();
        prop_assert_eq!(&text, &again);
        samples.sort_by(|a, b| a.step.cmp(&b.step).then_with(|| a.vehicle_id.cmp(&b.vehicle_id)));
        prop_assert_eq!(parsed, samples);
    }

    #[test]
    fn cluster_diameters_respect_width(
        az in proptest::collection::vec(0.0..360.0f64, 1..12),
        a in 1.0..40.0f64,
    ) {
        let obs: Vec<AngularObservation> = az.iter().map(|&x| AngularObservation::new(x)).collect();
        let clusters = complete_linkage_cluster(&obs, a);
        let mut seen = vec![false; az.len()];
        for c in &clusters {
            let members: Vec<f64> = c.members.iter().map(|&i| az[i]).collect();
            prop_assert!(circular_diameter(&members) <= a + 1e-9);
            for &i in &c.members {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthesized_traffic_stays_on_the_arms(
        seed in 0u64..1000, arrival in 0.0..0.8f64, arms in 3usize..=4, steps in 10u32..60,
    ) {
        let p = IntersectionParams {
            seed,
            arrival_rate: arrival,
            arms,
            n_steps: steps,
            warmup_steps: 20,
            ..IntersectionParams::default()
        };
        let s = synthesize_intersection(&p).unwrap();
        prop_assert_eq!(s.steps(), 0..steps);
        for v in s.samples() {
            prop_assert!(v.x.hypot(v.y) <= p.arm_length + 1e-9);
            prop_assert!(v.speed >= 0.0);
        }
        let mut text = Vec::new();
        write_lights(s.lights(), &mut text).unwrap();
        prop_assert_eq!(&parse_lights(&text[..], "mem").unwrap(), s.lights());
    }

    #[test]
    fn static_design_ignores_sample_order(seed in 0u64..1000, n in 1usize..=4, a in 3.0..20.0f64) {
        let s = corridor(seed, 0.3, n, a, 20);
        let mut reversed: Vec<VehicleSample> = s.samples().cloned().collect();
        reversed.reverse();
        let shuffled = Scenario::new(ScenarioParts::new(s.gnbs().to_vec(), reversed, s.lights().clone())).unwrap();
        let cfg = DesignConfig::default();
        for g in s.gnbs() {
            prop_assert_eq!(static_design(&s, g, &cfg), static_design(&shuffled, g, &cfg));
        }
    }

    #[test]
    fn tl_ignores_vehicle_positions(seed in 0u64..1000, n in 1usize..=4, k in 0u32..20) {
        let s = corridor(seed, 0.4, n, 10.0, 20);
        let empty = s.without_vehicles();
        let cfg = DesignConfig::default();
        for g in s.gnbs() {
            prop_assert_eq!(
                tl_design(&s, g, k, &cfg, None).unwrap(),
                tl_design(&empty, g, k, &cfg, None).unwrap()
            );
        }
    }

    #[test]
    fn every_strategy_config_is_feasible(seed in 0u64..1000, n in 1usize..=4, a in 2.0..30.0f64) {
        let s = corridor(seed, 0.4, n, a, 10);
        let cfg = DesignConfig::default();
        for k in s.steps() {
            let mut designs = vec![
                s.gnbs().iter().map(|g| static_design(&s, g, &cfg).at_step(k)).collect::<Vec<_>>(),
                s.gnbs().iter().map(|g| dynamic_design(&s, g, k, &cfg)).collect(),
                s.gnbs().iter().map(|g| tl_design(&s, g, k, &cfg, None).unwrap()).collect(),
            ];
            if n <= 2 {
                let radio = ScenarioRadio::with_defaults(&s).unwrap();
                let step = radio.step(k, seed).unwrap();
                designs.push(brute_force_optimum(&step, &OptimumConfig::default()).unwrap().assignment.configs);
            }
            for configs in designs {
                let v = check_feasible(&GlobalAssignment::new(k, configs), &s);
                prop_assert!(v.feasible, "{:?}", v.violations);
            }
        }
    }

    #[test]
    fn silencing_an_interferer_never_hurts(seed in 0u64..1000, k in 0u32..8, pick in 0usize..8) {
        let s = corridor(seed, 0.5, 3, 10.0, 8);
        let radio = ScenarioRadio::with_defaults(&s).unwrap();
        let step = radio.step(k, seed).unwrap();
        let cfg = DesignConfig::default();
        let configs: Vec<BeamConfig> = s.gnbs().iter().map(|g| dynamic_design(&s, g, k, &cfg)).collect();
        let a = best_schedule(&step, configs);
        let before = objective_value(&a, &step).unwrap();

        // Zero the power of one beam nobody is scheduled on.
        let idle: Vec<(usize, usize)> = a
            .configs
            .iter()
            .enumerate()
            .flat_map(|(ci, c)| (0..c.beams.len()).map(move |i| (ci, i)))
            .filter(|&(ci, i)| {
                !a.schedule.iter().any(|e| e.beam == BeamRef { gnb: a.configs[ci].gnb_id, beam: i })
            })
            .collect();
        let scheduled: Vec<BeamRef> = a.schedule.iter().map(|e| e.beam).collect();
        let targets: Vec<(usize, usize)> = if idle.is_empty() {
            // Fall back to silencing a scheduled beam and dropping its entry.
            scheduled.iter().map(|r| (a.configs.iter().position(|c| c.gnb_id == r.gnb).unwrap(), r.beam)).collect()
        } else {
            idle
        };
        prop_assume!(!targets.is_empty());
        let (ci, i) = targets[pick % targets.len()];
        let mut quiet = a.clone();
        quiet.configs[ci].beams[i].power = 0.0;
        let r = BeamRef { gnb: quiet.configs[ci].gnb_id, beam: i };
        let dropped: u64 = {
            let mut only = a.clone();
            only.schedule.retain(|e| e.beam == r);
            objective_value(&only, &step).unwrap()
        };
        quiet.schedule.retain(|e| e.beam != r);
        let after = objective_value(&quiet, &step).unwrap();
        prop_assert!(after + dropped >= before, "{} + {} < {}", after, dropped, before);
    }

    #[test]
    fn optimum_beats_heuristics_per_step(seed in 0u64..1000, n in 1usize..=2, a in prop::sample::select(vec![5.0, 10.0, 15.0])) {
        let s = corridor(seed, 0.5, n, a, 6);
        let radio = ScenarioRadio::with_defaults(&s).unwrap();
        let cfg = DesignConfig::default();
        let opt_cfg = OptimumConfig::default();
        for k in s.steps() {
            let step = radio.step(k, seed).unwrap();
            let opt = brute_force_optimum(&step, &opt_cfg).unwrap().objective;
            let tl: Vec<BeamConfig> = s.gnbs().iter().map(|g| tl_design(&s, g, k, &cfg, None).unwrap()).collect();
            let tl_value = objective_value(&best_schedule(&step, tl), &step).unwrap();
            prop_assert!(opt >= tl_value, "step {}: {} < TL {}", k, opt, tl_value);
            for configs in [
                s.gnbs().iter().map(|g| static_design(&s, g, &cfg).at_step(k)).collect::<Vec<_>>(),
                s.gnbs().iter().map(|g| dynamic_design(&s, g, k, &cfg)).collect(),
            ] {
                let value = objective_value(&best_schedule(&step, configs.clone()), &step).unwrap();
                // Heuristic directions are off-grid; allow the loss of moving
                // them to the nearest grid direction.
                let grid = snapped(&configs, opt_cfg.grid_step);
                let slack = if check_feasible(&GlobalAssignment::new(k, grid.clone()), &s).feasible {
                    let on_grid = objective_value(&best_schedule(&step, grid), &step).unwrap();
                    prop_assert!(opt >= on_grid, "step {}: {} < on-grid {}", k, opt, on_grid);
                    value.saturating_sub(on_grid)
                } else {
                    value
                };
                prop_assert!(opt + slack >= value);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn ledgers_conserve_data(
        seed in 0u64..1000,
        strategy in prop::sample::select(vec![Strategy::Static, Strategy::Dynamic, Strategy::Tl, Strategy::Optimum]),
        optimizer_rules in any::<bool>(),
        n in 1usize..=3,
    ) {
        let s = corridor(seed, 0.4, n, 10.0, 12);
        let mut cfg = RunConfig::new(strategy, seed);
        if optimizer_rules {
            cfg = cfg.optimizer_rules();
        }
        let ledger = run_default(&s, &cfg).unwrap();
        let total = ledger.total_bits();
        prop_assert_eq!(total, ledger.steps.iter().map(|r| r.delivered_bits).sum::<u64>());
        prop_assert_eq!(RunSummary::new(&ledger, &cfg).total_bits, total);
        let dt = s.step_duration();
        for v in ledger.vehicles.values() {
            prop_assert!(v.served_steps <= v.present_steps);
            prop_assert!(v.served_time <= v.present_steps as f64 * dt + 1e-9);
        }
        let mut share: std::collections::BTreeMap<(u32, u32, usize), f64> = Default::default();
        for r in &ledger.samples {
            *share.entry((r.step, r.gnb, r.beam)).or_default() += r.sigma;
        }
        prop_assert!(share.values().all(|&t| t <= 1.0 + 1e-12));
        for r in &ledger.steps {
            let v = check_feasible(&GlobalAssignment::new(r.step, r.configs.clone()), &s);
            prop_assert!(v.feasible, "{:?}", v.violations);
        }
    }

    #[test]
    fn optimum_run_beats_tl_run(seed in 0u64..1000, n in 1usize..=2, a in prop::sample::select(vec![5.0, 15.0])) {
        let s = corridor(seed, 0.5, n, a, 10);
        let total = |st| run_default(&s, &RunConfig::new(st, seed).optimizer_rules()).unwrap().total_bits();
        prop_assert!(total(Strategy::Optimum) >= total(Strategy::Tl));
    }
}
