//! Randomized hierarchical decomposition of a doubling metric.
//!
//! Levels run from `0` (singletons) to `top + 1` (the whole set), where
//! `top = ceil(log2(aspect ratio))`. Level `i` clusters are carved out of
//! their parents by balls of radius `r_i = rho * 2^(i-1) * gamma` around the
//! points of a nested net `N_i`, visiting net points in the order of a random
//! permutation `mu`; a point joins the first ball that contains it.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{greedy_net, metric_stats, DistanceOracle, FacilityMap, MetricStats};
use crate::rng::rng_from_seed;

pub type ClusterId = usize;

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub id: ClusterId,
    pub level: usize,
    /// Net point whose ball formed the cluster.
    pub center: usize,
    pub parent: Option<ClusterId>,
    pub children: Vec<ClusterId>,
    /// Member ids in ascending order.
    pub members: Vec<usize>,
}

/// Accuracy and dimension parameters of the badly-cut predicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutParams {
    pub eps: f64,
    pub ddim: f64,
}

impl CutParams {
    pub fn new(eps: f64, ddim: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid(format!("eps must lie in (0,1), got {eps}")));
        }
        if !(ddim > 0.0) {
            return Err(invalid(format!("ddim must be positive, got {ddim}")));
        }
        Ok(Self { eps, ddim })
    }

    /// The real-valued level `log2(ddim * d / (eps^2 * gamma))` at and above
    /// which a cut of a pair at distance `d` is bad. `-inf` for `d = 0`.
    pub fn threshold(&self, d: f64, gamma: f64) -> f64 {
        (self.ddim * d / (self.eps * self.eps * gamma)).log2()
    }
}

/// The nets `X = N_0 ⊇ N_1 ⊇ ... ⊇ N_top`, `N_i` a `2^(i-3) gamma`-net of
/// `N_(i-1)`. They do not depend on the random choices, so Monte-Carlo runs
/// can share one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct NestedNets {
    pub stats: MetricStats,
    pub nets: Vec<Vec<usize>>,
}

impl NestedNets {
    pub fn build(oracle: &impl DistanceOracle) -> Result<Self> {
        let stats = metric_stats(oracle)?;
        let mut nets = vec![(0..oracle.len()).collect::<Vec<_>>()];
        for i in 1..=stats.top_level {
            let radius = 2f64.powi(i as i32 - 3) * stats.gamma;
            let next = greedy_net(oracle, &nets[i - 1], radius)?.members;
            nets.push(next);
        }
        Ok(Self { stats, nets })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchicalDecomposition {
    clusters: Vec<Cluster>,
    levels: Vec<Vec<ClusterId>>,
    membership: Vec<Vec<ClusterId>>,
    rho: f64,
    rank: Vec<usize>,
    nets: NestedNets,
}

/// Build a decomposition; `rho` and `mu` are drawn from `seed`.
pub fn build_hierarchy(
    oracle: &impl DistanceOracle,
    seed: u64,
) -> Result<HierarchicalDecomposition> {
    let nets = NestedNets::build(oracle)?;
    decompose(oracle, &nets, seed)
}

/// Build a decomposition over precomputed nets.
pub fn decompose(
    oracle: &impl DistanceOracle,
    nets: &NestedNets,
    seed: u64,
) -> Result<HierarchicalDecomposition> {
    let n = oracle.len();
    if nets.nets.first().map(Vec::len) != Some(n) {
        return Err(invalid("nets were built for a different point set"));
    }
    let mut rng = rng_from_seed(seed);
    let rho = loop {
        let r: f64 = rng.random_range(0.5..1.0);
        if r > 0.5 {
            break r;
        }
    };
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut rank = vec![0; n];
    for (k, &x) in perm.iter().enumerate() {
        rank[x] = k;
    }
    Ok(carve(oracle, nets.clone(), rho, rank))
}

fn carve(
    oracle: &impl DistanceOracle,
    nets: NestedNets,
    rho: f64,
    rank: Vec<usize>,
) -> HierarchicalDecomposition {
    let n = oracle.len();
    let top = nets.stats.top_level;
    let gamma = nets.stats.gamma;
    let root_center = *nets.nets[top].iter().min_by_key(|&&y| rank[y]).unwrap();

    let mut clusters = vec![Cluster {
        id: 0,
        level: top + 1,
        center: root_center,
        parent: None,
        children: Vec::new(),
        members: (0..n).collect(),
    }];
    let mut levels = vec![Vec::new(); top + 2];
    levels[top + 1] = vec![0];
    let mut membership = vec![Vec::new(); top + 2];
    membership[top + 1] = vec![0; n];

    for i in (0..=top).rev() {
        let radius = rho * 2f64.powi(i as i32 - 1) * gamma;
        let mut order = nets.nets[i].clone();
        order.sort_unstable_by_key(|&y| rank[y]);
        // Each point joins the lowest-mu net ball containing it, inside its parent.
        let keys: Vec<(ClusterId, usize)> = (0..n)
            .map(|x| {
                let y = order
                    .iter()
                    .copied()
                    .find(|&y| oracle.distance(x, y) <= radius)
                    .unwrap_or_else(|| nearest_in(oracle, x, &order));
                (membership[i + 1][x], y)
            })
            .collect();
        let mut distinct: Vec<(ClusterId, usize)> = keys.clone();
        distinct.sort_unstable_by_key(|&(p, y)| (p, rank[y]));
        distinct.dedup();
        let first_id = clusters.len();
        for (k, &(parent, center)) in distinct.iter().enumerate() {
            let id = first_id + k;
            clusters.push(Cluster {
                id,
                level: i,
                center,
                parent: Some(parent),
                children: Vec::new(),
                members: Vec::new(),
            });
            clusters[parent].children.push(id);
            levels[i].push(id);
        }
        let mut row = vec![0; n];
        for (x, key) in keys.iter().enumerate() {
            let k = distinct
                .binary_search_by_key(&(key.0, rank[key.1]), |&(p, y)| (p, rank[y]))
                .expect("key present");
            let id = first_id + k;
            clusters[id].members.push(x);
            row[x] = id;
        }
        membership[i] = row;
    }

    HierarchicalDecomposition {
        clusters,
        levels,
        membership,
        rho,
        rank,
        nets,
    }
}

// Only reached if rounding leaves a point just outside every ball.
fn nearest_in(oracle: &impl DistanceOracle, x: usize, order: &[usize]) -> usize {
    *order
        .iter()
        .min_by(|&&a, &&b| oracle.distance(x, a).total_cmp(&oracle.distance(x, b)))
        .unwrap()
}

impl HierarchicalDecomposition {
    /// `top = ceil(log2 aspect)`; the root sits at level `top + 1`.
    pub fn top_level(&self) -> usize {
        self.nets.stats.top_level
    }

    pub fn root_level(&self) -> usize {
        self.top_level() + 1
    }

    pub fn num_points(&self) -> usize {
        self.rank.len()
    }

    pub fn stats(&self) -> &MetricStats {
        &self.nets.stats
    }

    pub fn gamma(&self) -> f64 {
        self.nets.stats.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `mu(x)`: the position of `x` in the random permutation.
    pub fn mu(&self, x: usize) -> usize {
        self.rank[x]
    }

    pub fn nets(&self) -> &[Vec<usize>] {
        &self.nets.nets
    }

    pub fn root(&self) -> ClusterId {
        0
    }

    /// Ball radius `rho * 2^(i-1) * gamma` used at level `i`.
    pub fn radius(&self, level: usize) -> f64 {
        self.rho * 2f64.powi(level as i32 - 1) * self.gamma()
    }

    /// Diameter budget `2^i * gamma` of a level-`i` cluster.
    pub fn rang(&self, level: usize) -> f64 {
        2f64.powi(level as i32) * self.gamma()
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, id: ClusterId) -> &Cluster {
        &self.clusters[id]
    }

    /// Cluster ids at `level`, ascending.
    pub fn level(&self, level: usize) -> &[ClusterId] {
        &self.levels[level]
    }

    /// Point-to-cluster map at every level.
    pub fn membership(&self) -> &[Vec<ClusterId>] {
        &self.membership
    }

    pub fn cluster_of(&self, level: usize, x: usize) -> ClusterId {
        self.membership[level][x]
    }

    /// `true` iff `anc` is a strict ancestor of `desc`.
    pub fn is_ancestor(&self, anc: ClusterId, desc: ClusterId) -> bool {
        let mut cur = self.clusters[desc].parent;
        while let Some(c) = cur {
            if c == anc {
                return true;
            }
            cur = self.clusters[c].parent;
        }
        false
    }

    /// `x` and `y` lie in different clusters of level `level`.
    pub fn is_cut(&self, x: usize, y: usize, level: usize) -> Result<bool> {
        if level > self.root_level() {
            return Err(Error::InvalidLevel {
                level,
                top: self.root_level(),
            });
        }
        Ok(self.membership[level][x] != self.membership[level][y])
    }

    /// Cut at some level `i >= log2(ddim * dist / (eps^2 gamma))`. A point is
    /// never badly cut from itself.
    pub fn is_badly_cut(
        &self,
        oracle: &impl DistanceOracle,
        x: usize,
        y: usize,
        params: CutParams,
    ) -> bool {
        if x == y {
            return false;
        }
        let threshold = params.threshold(oracle.distance(x, y), self.gamma());
        (0..=self.root_level())
            .any(|i| i as f64 >= threshold && self.membership[i][x] != self.membership[i][y])
    }

    /// None of `(x, y)`, `(x, F0(x))`, `(y, F0(y))` is badly cut.
    pub fn is_good_pair(
        &self,
        oracle: &impl DistanceOracle,
        f0: &FacilityMap,
        x: usize,
        y: usize,
        params: CutParams,
    ) -> bool {
        !self.is_badly_cut(oracle, x, y, params)
            && !self.is_badly_cut(oracle, x, f0.of(x), params)
            && !self.is_badly_cut(oracle, y, f0.of(y), params)
    }

    /// One line per cluster: `level id parent center size: members...`, the
    /// root's parent written as `-1`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for level in (0..=self.root_level()).rev() {
            for &id in &self.levels[level] {
                let c = &self.clusters[id];
                let parent = c.parent.map_or("-1".to_string(), |p| p.to_string());
                let _ = write!(
                    out,
                    "{} {} {} {} {}:",
                    level,
                    id,
                    parent,
                    c.center,
                    c.members.len()
                );
                for m in &c.members {
                    let _ = write!(out, " {m}");
                }
                out.push('\n');
            }
        }
        out
    }

    /// Move `x` to cluster `to` at `level` without touching anything else.
    /// Breaks the invariants on purpose; used by negative controls.
    pub fn corrupted(&self, level: usize, x: usize, to: ClusterId) -> Self {
        let mut h = self.clone();
        let from = h.membership[level][x];
        h.membership[level][x] = to;
        h.clusters[from].members.retain(|&m| m != x);
        let members = &mut h.clusters[to].members;
        members.push(x);
        members.sort_unstable();
        h
    }
}

/// Structural problems found by [`check_structure`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StructureReport {
    /// `(level, point)` where the level-`i` cluster is not inside the
    /// parent of the level-`(i-1)` cluster, i.e. cuts are not monotone.
    pub nesting: Vec<(usize, usize)>,
    /// Levels that are not an exact partition of the ids.
    pub partition: Vec<usize>,
    /// Clusters whose diameter exceeds `2^i gamma`.
    pub diameter: Vec<ClusterId>,
    /// Levels whose net is not a `2^(i-3) gamma`-net of the previous one.
    pub nets: Vec<usize>,
}

impl StructureReport {
    pub fn is_clean(&self) -> bool {
        self.nesting.is_empty()
            && self.partition.is_empty()
            && self.diameter.is_empty()
            && self.nets.is_empty()
    }
}

/// Exhaustively check partition, nesting, diameter and net invariants.
pub fn check_structure(
    h: &HierarchicalDecomposition,
    oracle: &impl DistanceOracle,
) -> StructureReport {
    let n = h.num_points();
    let mut report = StructureReport::default();
    for level in 0..=h.root_level() {
        let mut seen = vec![0u32; n];
        for &id in h.level(level) {
            let c = h.cluster(id);
            for &m in &c.members {
                seen[m] += 1;
                if h.cluster_of(level, m) != id {
                    seen[m] += 1;
                }
            }
            let diam = c
                .members
                .iter()
                .flat_map(|&a| c.members.iter().map(move |&b| (a, b)))
                .map(|(a, b)| oracle.distance(a, b))
                .fold(0.0, f64::max);
            if diam > h.rang(level) * (1.0 + 1e-12) {
                report.diameter.push(id);
            }
        }
        if seen.iter().any(|&s| s != 1) {
            report.partition.push(level);
        }
        if level > 0 {
            for x in 0..n {
                let child = h.cluster_of(level - 1, x);
                if h.cluster(child).parent != Some(h.cluster_of(level, x)) {
                    report.nesting.push((level, x));
                }
            }
        }
    }
    for i in 1..h.nets().len() {
        let net = crate::geometry::Net {
            radius: 2f64.powi(i as i32 - 3) * h.gamma(),
            members: h.nets()[i].clone(),
            covered: h.nets()[i - 1].clone(),
        };
        let nested = net.members.iter().all(|m| net.covered.contains(m));
        if !(nested && net.is_packing(oracle) && net.is_covering(oracle)) {
            report.nets.push(i);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointSet;
    use proptest::prelude::*;

    #[test]
    fn two_points() {
        let x = PointSet::from_line(&[0.0, 1.0]);
        for seed in 0..20 {
            let h = build_hierarchy(&x, seed).unwrap();
            assert_eq!(h.top_level(), 0);
            assert_eq!(h.level(1).len(), 1);
            assert_eq!(h.level(0).len(), 2);
            assert!(h.is_cut(0, 1, 0).unwrap());
            assert!(!h.is_cut(0, 1, 1).unwrap());
            assert!(h.rho() > 0.5 && h.rho() < 1.0);
        }
    }

    #[test]
    fn invalid_level_is_rejected() {
        let x = PointSet::from_line(&[0.0, 1.0, 3.0]);
        let h = build_hierarchy(&x, 1).unwrap();
        assert!(h.is_cut(0, 1, h.root_level() + 1).is_err());
    }

    #[test]
    fn self_pairs_never_cut() {
        let x = PointSet::from_line(&[0.0, 1.0, 3.0, 7.0, 8.0]);
        let h = build_hierarchy(&x, 3).unwrap();
        let p = CutParams::new(0.3, 1.0).unwrap();
        for i in 0..=h.root_level() {
            assert!(!h.is_cut(2, 2, i).unwrap());
        }
        assert!(!h.is_badly_cut(&x, 2, 2, p));
    }

    #[test]
    fn close_pair_with_high_threshold_is_not_badly_cut() {
        // threshold log2(ddim * d / (eps^2 gamma)) is far above the root.
        let x = PointSet::from_line(&[0.0, 1.0, 2.0, 1000.0]);
        let p = CutParams::new(0.01, 8.0).unwrap();
        for seed in 0..10 {
            let h = build_hierarchy(&x, seed).unwrap();
            assert!(p.threshold(1000.0, 1.0) > h.root_level() as f64);
            assert!(!h.is_badly_cut(&x, 2, 3, p));
        }
    }

    #[test]
    fn good_pair_degenerate_and_conjunction() {
        let x = PointSet::from_line(&[0.0, 1.0, 2.5, 6.0, 6.5]);
        let p = CutParams::new(0.5, 1.0).unwrap();
        let h = build_hierarchy(&x, 4).unwrap();
        let f0 = FacilityMap::identity(5);
        assert!(h.is_good_pair(&x, &f0, 1, 1, p));
        // x = 0 anchored at 4: the pair (0, 4) is cut at level 0, whose
        // threshold is below 0 when eps is large enough.
        let f0 = FacilityMap(vec![4, 1, 2, 3, 4]);
        let p = CutParams::new(0.99, 0.01).unwrap();
        assert!(h.is_badly_cut(&x, 0, 4, p));
        assert!(!h.is_good_pair(&x, &f0, 0, 1, p));
    }

    #[test]
    fn dump_lists_every_cluster() {
        let x = PointSet::from_line(&[0.0, 1.0, 4.0]);
        let h = build_hierarchy(&x, 9).unwrap();
        let dump = h.dump();
        assert_eq!(dump.lines().count(), h.clusters().len());
        assert!(dump.lines().next().unwrap().starts_with(&format!(
            "{} 0 -1 ",
            h.root_level()
        )));
    }

    #[test]
    fn corruption_is_detected() {
        let x = PointSet::from_line(&[0.0, 1.0, 2.0, 10.0, 11.0, 30.0]);
        let h = build_hierarchy(&x, 2).unwrap();
        assert!(check_structure(&h, &x).is_clean());
        let level = 1;
        let from = h.cluster_of(level, 0);
        let to = *h.level(level).iter().find(|&&c| c != from).unwrap();
        let bad = h.corrupted(level, 0, to);
        assert!(!check_structure(&bad, &x).nesting.is_empty());
    }

    fn arb_points() -> impl Strategy<Value = PointSet> {
        prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2), 2..40).prop_filter_map(
            "distinct points",
            |rows| {
                let p = PointSet::from_rows(&rows).ok()?;
                metric_stats(&p).ok()?;
                Some(p)
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn structure_holds(points in arb_points(), seed in any::<u64>()) {
            let h = build_hierarchy(&points, seed).unwrap();
            prop_assert!(check_structure(&h, &points).is_clean());
            prop_assert_eq!(h.level(h.root_level()).len(), 1);
            for &c in h.level(0) {
                prop_assert_eq!(h.cluster(c).members.len(), 1);
            }
            for level in 0..=h.root_level() {
                let total: usize = h.level(level).iter().map(|&c| h.cluster(c).members.len()).sum();
                prop_assert_eq!(total, points.len());
            }
        }

        #[test]
        fn cuts_are_monotone(points in arb_points(), seed in any::<u64>()) {
            let h = build_hierarchy(&points, seed).unwrap();
            let n = points.len();
            for x in 0..n {
                for y in 0..n {
                    for i in 1..=h.root_level() {
                        if h.is_cut(x, y, i).unwrap() {
                            prop_assert!(h.is_cut(x, y, i - 1).unwrap());
                        }
                    }
                }
            }
        }

        #[test]
        fn deterministic(points in arb_points(), seed in any::<u64>()) {
            let a = build_hierarchy(&points, seed).unwrap();
            let b = build_hierarchy(&points, seed).unwrap();
            prop_assert_eq!(a.dump(), b.dump());
            prop_assert_eq!(a, b);
        }
    }
}
