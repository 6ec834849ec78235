//! Deterministic geographic clustering of peers by recursive median cut.
//!
//! No RNG and no iteration-order dependence: the same peer set always yields
//! the same groups, which is what lets every member of a leaf compute the
//! same partition independently.

use crate::ids::PeerName;
use crate::{GeoPoint, TreeError};

/// One clustered group of peers, kept sorted by peer name.
pub type Group = Vec<(PeerName, GeoPoint)>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    Lat,
    Lon,
}

fn coord_on(axis: Axis, p: &GeoPoint) -> f64 {
    match axis {
        Axis::Lat => p.lat(),
        Axis::Lon => p.lon(),
    }
}

fn spread(group: &Group, axis: Axis) -> f64 {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (_, p) in group {
        let v = coord_on(axis, p);
        min = min.min(v);
        max = max.max(v);
    }
    if group.is_empty() {
        0.0
    } else {
        max - min
    }
}

/// Splits `group` along `axis` at the weighted median. Points exactly on the
/// median value go to the lower group; point order ties break by peer name.
/// Returns `None` when the group has zero spread on that axis.
fn median_split(group: &Group, axis: Axis) -> Option<(Group, Group, f64)> {
    let mut sorted = group.clone();
    sorted.sort_by(|(na, pa), (nb, pb)| {
        coord_on(axis, pa)
            .partial_cmp(&coord_on(axis, pb))
            .unwrap()
            .then(na.cmp(nb))
    });
    let n = sorted.len();
    let max_val = coord_on(axis, &sorted[n - 1].1);
    let mut m = coord_on(axis, &sorted[(n - 1) / 2].1);
    if m == max_val {
        // Everything at or above the median sits on the maximum; cut below
        // it so the upper side stays nonempty.
        m = sorted
            .iter()
            .map(|(_, p)| coord_on(axis, p))
            .filter(|v| *v < max_val)
            .fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return None; // zero spread on this axis
        }
    }
    let mut lower = Group::new();
    let mut upper = Group::new();
    for (name, p) in group {
        if coord_on(axis, p) <= m {
            lower.push((*name, *p));
        } else {
            upper.push((*name, *p));
        }
    }
    debug_assert!(!lower.is_empty() && !upper.is_empty());
    Some((lower, upper, m))
}

/// Clusters `points` into up to `k` groups by recursive median cut: the
/// group with the largest coordinate spread splits along its wider axis
/// (ties toward latitude) at the weighted median. Groups come back in
/// creation order — the lower half keeps the split group's slot, the upper
/// half is appended — each sorted by peer name.
///
/// With every coordinate identical no cut exists and the call fails with
/// [`TreeError::DegenerateCluster`]. If degeneracy strikes after some cuts
/// succeeded, the groups formed so far (at least two) are returned.
pub fn cluster_peers(points: &[(PeerName, GeoPoint)], k: usize) -> Result<Vec<Group>, TreeError> {
    if k < 2 {
        return Err(TreeError::InvalidClusterCount(k));
    }
    if points.is_empty() {
        return Err(TreeError::DegenerateCluster);
    }
    let mut groups: Vec<Group> = vec![points.to_vec()];
    while groups.len() < k {
        // Widest group first; ties keep the earliest-created group.
        let mut best: Option<(usize, Axis, f64)> = None;
        for (i, g) in groups.iter().enumerate() {
            let lat = spread(g, Axis::Lat);
            let lon = spread(g, Axis::Lon);
            let (axis, s) = if lat >= lon {
                (Axis::Lat, lat)
            } else {
                (Axis::Lon, lon)
            };
            if s > 0.0 && best.map_or(true, |(_, _, bs)| s > bs) {
                best = Some((i, axis, s));
            }
        }
        let Some((idx, axis, _)) = best else {
            break; // every group degenerate
        };
        let (lower, upper, _) = match median_split(&groups[idx], axis) {
            Some(cut) => cut,
            None => break,
        };
        groups[idx] = lower;
        groups.push(upper);
    }
    if groups.len() < 2 {
        return Err(TreeError::DegenerateCluster);
    }
    for g in &mut groups {
        g.sort_by_key(|(name, _)| *name);
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    fn named(points: &[(u32, f64, f64)]) -> Vec<(PeerName, GeoPoint)> {
        points
            .iter()
            .map(|(n, lat, lon)| (PeerName(*n), pt(*lat, *lon)))
            .collect()
    }

    /// Exhaustive 2-means over every 2-coloring: the oracle for small inputs.
    fn best_two_means(points: &[(PeerName, GeoPoint)]) -> (Vec<PeerName>, Vec<PeerName>) {
        let n = points.len();
        assert!(n <= 20);
        let cost = |members: &[usize]| -> f64 {
            if members.is_empty() {
                return f64::INFINITY;
            }
            let cx = members.iter().map(|&i| points[i].1.lat()).sum::<f64>() / members.len() as f64;
            let cy = members.iter().map(|&i| points[i].1.lon()).sum::<f64>() / members.len() as f64;
            members
                .iter()
                .map(|&i| {
                    (points[i].1.lat() - cx).powi(2) + (points[i].1.lon() - cy).powi(2)
                })
                .sum()
        };
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1..(1u32 << n) - 1 {
            let a: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let b: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
            let c = cost(&a) + cost(&b);
            if c < best.0 {
                best = (c, mask);
            }
        }
        let mut ga: Vec<PeerName> = (0..n)
            .filter(|i| best.1 & (1 << i) != 0)
            .map(|i| points[i].0)
            .collect();
        let mut gb: Vec<PeerName> = (0..n)
            .filter(|i| best.1 & (1 << i) == 0)
            .map(|i| points[i].0)
            .collect();
        ga.sort();
        gb.sort();
        (ga, gb)
    }

    #[test]
    fn recovers_two_point_clouds() {
        // Two clouds around (10,10) and (40,40); the median cut must recover
        // them exactly, matching exhaustive 2-means.
        let pts = named(&[
            (0, 10.0, 10.0),
            (1, 10.5, 9.5),
            (2, 9.5, 10.2),
            (3, 10.2, 10.8),
            (4, 40.0, 40.0),
            (5, 40.6, 39.7),
            (6, 39.4, 40.3),
            (7, 40.1, 40.9),
        ]);
        let groups = cluster_peers(&pts, 2).unwrap();
        assert_eq!(groups.len(), 2);
        let got_a: Vec<PeerName> = groups[0].iter().map(|(n, _)| *n).collect();
        let got_b: Vec<PeerName> = groups[1].iter().map(|(n, _)| *n).collect();
        let (want_a, want_b) = best_two_means(&pts);
        assert!(
            (got_a == want_a && got_b == want_b) || (got_a == want_b && got_b == want_a),
            "median cut {got_a:?}/{got_b:?} differs from 2-means {want_a:?}/{want_b:?}"
        );
    }

    #[test]
    fn two_points_forced_split_lower_first() {
        let pts = named(&[(7, 30.0, 5.0), (3, 10.0, 5.0)]);
        let groups = cluster_peers(&pts, 2).unwrap();
        assert_eq!(groups.len(), 2);
        // Group 1 holds the lower-coordinate point.
        assert_eq!(groups[0], vec![(PeerName(3), pt(10.0, 5.0))]);
        assert_eq!(groups[1], vec![(PeerName(7), pt(30.0, 5.0))]);
    }

    #[test]
    fn identical_coordinates_are_degenerate() {
        let pts = named(&[(0, 5.0, 5.0), (1, 5.0, 5.0), (2, 5.0, 5.0)]);
        assert_eq!(cluster_peers(&pts, 2), Err(TreeError::DegenerateCluster));
        assert_eq!(cluster_peers(&[], 2), Err(TreeError::DegenerateCluster));
        assert!(matches!(
            cluster_peers(&named(&[(0, 1.0, 1.0), (1, 2.0, 2.0)]), 1),
            Err(TreeError::InvalidClusterCount(1))
        ));
    }

    #[test]
    fn points_on_median_go_lower() {
        let pts = named(&[(0, 0.0, 0.0), (1, 5.0, 0.0), (2, 5.0, 0.0), (3, 9.0, 0.0)]);
        let groups = cluster_peers(&pts, 2).unwrap();
        let lower: Vec<u32> = groups[0].iter().map(|(n, _)| n.0).collect();
        assert_eq!(lower, vec![0, 1, 2]);
    }

    #[test]
    fn axis_tie_breaks_toward_latitude() {
        // Equal spreads on both axes; the cut must be on latitude.
        let pts = named(&[(0, 0.0, 0.0), (1, 10.0, 10.0)]);
        let groups = cluster_peers(&pts, 2).unwrap();
        assert_eq!(groups[0][0].0, PeerName(0));
        // Three collinear-in-lat points with identical lon: still splits.
        let pts = named(&[(0, 0.0, 3.0), (1, 4.0, 3.0), (2, 8.0, 3.0)]);
        let groups = cluster_peers(&pts, 2).unwrap();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn partial_degeneracy_returns_fewer_groups() {
        // Two stacks of identical points: k=3 can only produce 2 groups.
        let pts = named(&[(0, 0.0, 0.0), (1, 0.0, 0.0), (2, 9.0, 9.0), (3, 9.0, 9.0)]);
        let groups = cluster_peers(&pts, 3).unwrap();
        assert_eq!(groups.len(), 2);
    }

    #[test]
    fn deterministic_regardless_of_input_order() {
        let mut pts = named(&[
            (0, 10.0, 10.0),
            (1, 11.0, 9.0),
            (2, 40.0, 40.0),
            (3, 41.0, 41.0),
            (4, 10.5, 10.5),
        ]);
        let a = cluster_peers(&pts, 2).unwrap();
        pts.reverse();
        let b = cluster_peers(&pts, 2).unwrap();
        assert_eq!(a, b);
    }
}
