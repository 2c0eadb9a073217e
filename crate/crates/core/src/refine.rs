//! Eliminating badly-cut `(x, F0(x))` pairs.
//!
//! Each level is processed on its own: a point whose pair with its facility
//! is cut at a level at or above the pair's threshold is moved into the
//! cluster holding the facility. Levels stay partitions, but a refined
//! cluster need not be the union of its children any more, so only the
//! per-level membership maps are stored.

use std::fmt::Write as _;

use crate::geometry::{DistanceOracle, FacilityMap};
use crate::hierarchy::{ClusterId, CutParams, HierarchicalDecomposition};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Move {
    pub level: usize,
    pub point: usize,
    pub from: ClusterId,
    pub to: ClusterId,
}

/// Same cluster ids as the base hierarchy, with refined memberships.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedDecomposition {
    membership: Vec<Vec<ClusterId>>,
    moves: Vec<Move>,
}

pub fn eliminate_badly_cut(
    oracle: &impl DistanceOracle,
    h: &HierarchicalDecomposition,
    f0: &FacilityMap,
    params: CutParams,
) -> RefinedDecomposition {
    let n = h.num_points();
    let mut membership = h.membership().to_vec();
    let mut moves = Vec::new();
    for (level, row) in membership.iter_mut().enumerate() {
        for (x, slot) in row.iter_mut().enumerate().take(n) {
            let anchor = f0.of(x);
            let from = h.cluster_of(level, x);
            let to = h.cluster_of(level, anchor);
            if from != to
                && level as f64 >= params.threshold(oracle.distance(x, anchor), h.gamma())
            {
                *slot = to;
                moves.push(Move {
                    level,
                    point: x,
                    from,
                    to,
                });
            }
        }
    }
    RefinedDecomposition { membership, moves }
}

impl RefinedDecomposition {
    /// The identity refinement (no moves).
    pub fn unchanged(h: &HierarchicalDecomposition) -> Self {
        Self {
            membership: h.membership().to_vec(),
            moves: Vec::new(),
        }
    }

    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn num_levels(&self) -> usize {
        self.membership.len()
    }

    pub fn cluster_of(&self, level: usize, x: usize) -> ClusterId {
        self.membership[level][x]
    }

    pub fn membership(&self) -> &[Vec<ClusterId>] {
        &self.membership
    }

    /// Members of `cluster` (a level-`level` cluster id), ascending.
    pub fn members(&self, level: usize, cluster: ClusterId) -> Vec<usize> {
        (0..self.membership[level].len())
            .filter(|&x| self.membership[level][x] == cluster)
            .collect()
    }

    /// Members of every cluster at `level`, indexed by position in
    /// `h.level(level)`.
    pub fn level_members(&self, h: &HierarchicalDecomposition, level: usize) -> Vec<Vec<usize>> {
        let ids = h.level(level);
        let mut out = vec![Vec::new(); ids.len()];
        for (x, &c) in self.membership[level].iter().enumerate() {
            let pos = ids.binary_search(&c).expect("cluster belongs to its level");
            out[pos].push(x);
        }
        out
    }

    /// Move log as CSV with header `level,point_id,from_cluster,to_cluster`.
    pub fn moves_csv(&self) -> String {
        let mut out = String::from("level,point_id,from_cluster,to_cluster\n");
        for m in &self.moves {
            let _ = writeln!(out, "{},{},{},{}", m.level, m.point, m.from, m.to);
        }
        out
    }

    /// Move point `x` at `level` to `to`; for negative controls only.
    pub fn teleported(&self, level: usize, x: usize, to: ClusterId) -> Self {
        let mut t = self.clone();
        t.membership[level][x] = to;
        t
    }
}

/// A refined member farther than `eps^2 * 2^i * gamma` from its base cluster.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyViolation {
    pub level: usize,
    pub cluster: ClusterId,
    pub point: usize,
    pub distance: f64,
    pub bound: f64,
}

/// Check that every refined cluster lies within `eps^2 * 2^i * gamma` of its
/// base cluster.
pub fn consistency_check(
    oracle: &impl DistanceOracle,
    h: &HierarchicalDecomposition,
    t: &RefinedDecomposition,
    eps: f64,
) -> Vec<ConsistencyViolation> {
    let mut out = Vec::new();
    for level in 0..t.num_levels() {
        let bound = eps * eps * h.rang(level);
        for x in 0..h.num_points() {
            let cluster = t.cluster_of(level, x);
            if h.cluster_of(level, x) == cluster {
                continue;
            }
            let distance = h
                .cluster(cluster)
                .members
                .iter()
                .map(|&m| oracle.distance(x, m))
                .fold(f64::INFINITY, f64::min);
            if distance > bound {
                out.push(ConsistencyViolation {
                    level,
                    cluster,
                    point: x,
                    distance,
                    bound,
                });
            }
        }
    }
    out
}

/// Pairs `(x, F0(x))` still split at a level at or above their threshold, as
/// `(level, x)`. Empty for any output of [`eliminate_badly_cut`].
pub fn remaining_bad_anchor_cuts(
    oracle: &impl DistanceOracle,
    h: &HierarchicalDecomposition,
    t: &RefinedDecomposition,
    f0: &FacilityMap,
    params: CutParams,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for x in 0..h.num_points() {
        let anchor = f0.of(x);
        let threshold = params.threshold(oracle.distance(x, anchor), h.gamma());
        for level in 0..t.num_levels() {
            if level as f64 >= threshold && t.cluster_of(level, x) != t.cluster_of(level, anchor) {
                out.push((level, x));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointSet;
    use crate::hierarchy::build_hierarchy;

    #[test]
    fn self_anchored_points_never_move() {
        let x = PointSet::from_line(&[0.0, 1.0, 3.0, 7.0, 15.0]);
        let params = CutParams::new(0.5, 1.0).unwrap();
        for seed in 0..10 {
            let h = build_hierarchy(&x, seed).unwrap();
            let t = eliminate_badly_cut(&x, &h, &FacilityMap::identity(5), params);
            assert!(t.moves().is_empty());
            assert_eq!(t, RefinedDecomposition::unchanged(&h));
            assert!(consistency_check(&x, &h, &t, 0.5).is_empty());
        }
    }

    #[test]
    fn traced_three_point_move() {
        // Points 0, 1, 4 on a line: gamma = 1, top = 2, levels 0..=3.
        // F0 sends 1 to 0. With eps = 0.9 and ddim = 0.5 the threshold of
        // (1, 0) is log2(0.5 / 0.81) < 0, so every level where 0 and 1 are
        // split produces a move, and level 0 always splits them.
        let x = PointSet::from_line(&[0.0, 1.0, 4.0]);
        let params = CutParams::new(0.9, 0.5).unwrap();
        let f0 = FacilityMap(vec![0, 0, 2]);
        for seed in 0..20 {
            let h = build_hierarchy(&x, seed).unwrap();
            let t = eliminate_badly_cut(&x, &h, &f0, params);
            let expected: Vec<usize> = (0..=h.root_level())
                .filter(|&i| h.is_cut(1, 0, i).unwrap())
                .collect();
            assert!(expected.contains(&0));
            let got: Vec<usize> = t.moves().iter().map(|m| m.level).collect();
            assert_eq!(got, expected);
            assert!(t.moves().iter().all(|m| m.point == 1 && m.to == h.cluster_of(m.level, 0)));
            for i in 0..=h.root_level() {
                assert_eq!(t.cluster_of(i, 1), t.cluster_of(i, 0));
            }
            assert!(remaining_bad_anchor_cuts(&x, &h, &t, &f0, params).is_empty());
        }
    }

    #[test]
    fn move_below_threshold_is_skipped() {
        // Same instance, small eps: threshold of (1, 0) is log2(0.5/0.01) > 5,
        // above the root level, so nothing moves.
        let x = PointSet::from_line(&[0.0, 1.0, 4.0]);
        let params = CutParams::new(0.1, 0.5).unwrap();
        let f0 = FacilityMap(vec![0, 0, 2]);
        let h = build_hierarchy(&x, 1).unwrap();
        assert!(eliminate_badly_cut(&x, &h, &f0, params).moves().is_empty());
    }

    #[test]
    fn teleport_is_reported() {
        let xs: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let x = PointSet::from_line(&xs);
        let h = build_hierarchy(&x, 5).unwrap();
        let t = RefinedDecomposition::unchanged(&h);
        let level = 1;
        let far = h.cluster_of(level, 7);
        let bad = t.teleported(level, 0, far);
        assert!(!consistency_check(&x, &h, &bad, 0.3).is_empty());
    }

    #[test]
    fn csv_has_header() {
        let x = PointSet::from_line(&[0.0, 1.0, 4.0]);
        let h = build_hierarchy(&x, 3).unwrap();
        let t = eliminate_badly_cut(&x, &h, &FacilityMap(vec![0, 0, 2]), CutParams::new(0.9, 0.5).unwrap());
        let csv = t.moves_csv();
        assert!(csv.starts_with("level,point_id,from_cluster,to_cluster\n"));
        assert_eq!(csv.lines().count(), 1 + t.moves().len());
    }
}
