use std::collections::BTreeMap;

use super::VehicleSample;

/// The `count` lights with the most vehicle samples within `radius` metres,
/// densest first. Ties go to the smaller light id.
pub fn rank_lights_by_density<'a>(
    light_positions: &BTreeMap<String, (f64, f64)>,
    samples: impl IntoIterator<Item = &'a VehicleSample>,
    radius: f64,
    count: usize,
) -> Vec<String> {
    let mut density: BTreeMap<&str, u64> =
        light_positions.keys().map(|k| (k.as_str(), 0)).collect();
    let r2 = radius * radius;
    for s in samples {
        for (id, &(x, y)) in light_positions {
            let (dx, dy) = (s.x - x, s.y - y);
            if dx * dx + dy * dy <= r2 {
                *density.get_mut(id.as_str()).expect("key present") += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, u64)> = density.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(count)
        .map(|(id, _)| id.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densest_first_with_id_tiebreak() {
        let lights: BTreeMap<String, (f64, f64)> = [
            ("A".to_string(), (0.0, 0.0)),
            ("B".to_string(), (1000.0, 0.0)),
            ("C".to_string(), (2000.0, 0.0)),
        ]
        .into_iter()
        .collect();
        let mk = |x: f64| VehicleSample {
            step: 0,
            vehicle_id: "v".into(),
            x,
            y: 0.0,
            speed: 0.0,
            heading: 0.0,
        };
        let samples = [mk(1990.0), mk(2010.0), mk(5.0), mk(1001.0)];
        let r = rank_lights_by_density(&lights, &samples, 50.0, 2);
        assert_eq!(r, ["C", "A"]);
    }
}
