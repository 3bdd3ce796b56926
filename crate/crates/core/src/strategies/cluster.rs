//! Complete-linkage agglomerative clustering of azimuths on the circle.

use std::collections::HashMap;

use serde::Serialize;

use crate::geometry::{circular_distance, wrap_degrees};

/// A vehicle bearing seen from a gNB, possibly standing for several
/// identical observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AngularObservation {
    pub azimuth: f64,
    pub weight: u64,
}

impl AngularObservation {
    pub fn new(azimuth: f64) -> Self {
        AngularObservation {
            azimuth,
            weight: 1,
        }
    }
}

/// A cluster as indices into the input observations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Cluster {
    /// Increasing input indices.
    pub members: Vec<usize>,
    /// Total observation weight.
    pub weight: u64,
}

/// Agglomerative complete-linkage clustering over circular distances.
///
/// At each step the two clusters whose farthest members are closest are
/// merged; ties go to the pair with the lexicographically smallest
/// `(first member, first member)` indices. Merging stops once the smallest
/// merge would give a diameter above `max_diameter`. Clusters are returned
/// ordered by their first member.
///
/// Identical azimuths are merged up front, which does not change the result.
/// Row nearest neighbours are cached and only refreshed for rows whose cached
/// neighbour took part in the last merge, since complete-linkage distances
/// never decrease.
pub fn complete_linkage_cluster(obs: &[AngularObservation], max_diameter: f64) -> Vec<Cluster> {
    // Distinct azimuths, in order of first occurrence.
    let mut slot_of: HashMap<u64, usize> = HashMap::new();
    let mut azimuths: Vec<f64> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut weights: Vec<u64> = Vec::new();
    for (i, o) in obs.iter().enumerate() {
        let az = wrap_degrees(o.azimuth);
        let key = (az + 0.0).to_bits();
        let slot = *slot_of.entry(key).or_insert_with(|| {
            azimuths.push(az);
            members.push(Vec::new());
            weights.push(0);
            azimuths.len() - 1
        });
        members[slot].push(i);
        weights[slot] += o.weight;
    }

    let m = azimuths.len();
    let mut dist = vec![0.0f64; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let d = circular_distance(azimuths[i], azimuths[j]);
            dist[i * m + j] = d;
            dist[j * m + i] = d;
        }
    }
    let mut active = vec![true; m];
    // Nearest active neighbour with a larger index, smallest index on ties.
    let nearest = |i: usize, active: &[bool], dist: &[f64]| -> Option<usize> {
        let mut best: Option<usize> = None;
        for j in i + 1..m {
            if active[j] && best.is_none_or(|b| dist[i * m + j] < dist[i * m + b]) {
                best = Some(j);
            }
        }
        best
    };
    let mut nn: Vec<Option<usize>> = (0..m).map(|i| nearest(i, &active, &dist)).collect();

    loop {
        let mut pick: Option<(usize, usize)> = None;
        for i in 0..m {
            if !active[i] {
                continue;
            }
            if let Some(j) = nn[i] {
                let better = match pick {
                    None => true,
                    Some((pi, pj)) => dist[i * m + j] < dist[pi * m + pj],
                };
                if better {
                    pick = Some((i, j));
                }
            }
        }
        let Some((a, b)) = pick else { break };
        if dist[a * m + b] > max_diameter {
            break;
        }
        for k in 0..m {
            if active[k] && k != a && k != b {
                let d = dist[a * m + k].max(dist[b * m + k]);
                dist[a * m + k] = d;
                dist[k * m + a] = d;
            }
        }
        active[b] = false;
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        weights[a] += weights[b];
        for i in 0..m {
            if active[i] && (i == a || nn[i] == Some(a) || nn[i] == Some(b)) {
                nn[i] = nearest(i, &active, &dist);
            }
        }
    }

    (0..m)
        .filter(|&i| active[i])
        .map(|i| {
            let mut mem = members[i].clone();
            mem.sort_unstable();
            Cluster {
                members: mem,
                weight: weights[i],
            }
        })
        .collect()
}

/// Midpoint between the extreme azimuths of a cluster, taken on the arc that
/// contains all of them (the complement of the largest empty gap).
pub fn cluster_direction(azimuths: &[f64]) -> f64 {
    assert!(!azimuths.is_empty(), "cluster_direction needs a nonempty cluster");
    let mut a: Vec<f64> = azimuths.iter().map(|&x| wrap_degrees(x)).collect();
    a.sort_by(f64::total_cmp);
    let n = a.len();
    let mut start = 0;
    let mut widest = -1.0;
    for i in 0..n {
        let next = if i + 1 < n { a[i + 1] } else { a[0] + 360.0 };
        let gap = next - a[i];
        if gap > widest {
            widest = gap;
            start = (i + 1) % n;
        }
    }
    let lo = a[start];
    let hi = if start == 0 { a[n - 1] } else { a[start - 1] + 360.0 };
    wrap_degrees((lo + hi) / 2.0)
}

/// Circular diameter of a set of azimuths.
pub fn circular_diameter(azimuths: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, &a) in azimuths.iter().enumerate() {
        for &b in &azimuths[i + 1..] {
            d = d.max(circular_distance(a, b));
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(a: &[f64]) -> Vec<AngularObservation> {
        a.iter().map(|&x| AngularObservation::new(x)).collect()
    }

    #[test]
    fn examples() {
        let c = complete_linkage_cluster(&obs(&[10.0, 12.0, 14.0]), 5.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, [0, 1, 2]);
        assert_eq!(complete_linkage_cluster(&obs(&[0.0, 90.0]), 5.0).len(), 2);
        let c = complete_linkage_cluster(&obs(&[359.0, 1.0]), 5.0);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].weight, 2);
    }

    #[test]
    fn chain_is_cut_by_diameter() {
        // Single linkage would chain all four; complete linkage cannot.
        let c = complete_linkage_cluster(&obs(&[0.0, 3.0, 6.0, 9.0]), 5.0);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].members, [0, 1]);
        assert_eq!(c[1].members, [2, 3]);
    }

    #[test]
    fn duplicates_collapse() {
        let c = complete_linkage_cluster(&obs(&[30.0, 200.0, 30.0, 390.0]), 1.0);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].members, [0, 2, 3]);
        assert_eq!(c[0].weight, 3);
    }

    #[test]
    fn directions() {
        assert_eq!(cluster_direction(&[10.0, 12.0, 14.0]), 12.0);
        assert_eq!(cluster_direction(&[42.0]), 42.0);
        assert_eq!(cluster_direction(&[359.0, 1.0]), 0.0);
        assert_eq!(cluster_direction(&[1.0, 359.0, 358.0]), 359.5);
    }
}
