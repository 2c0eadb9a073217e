//! Bottom-up partition of a refined decomposition into parts of bounded
//! local UFL value, and checks of its structural properties.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::geometry::{DistanceOracle, FacilityMap};
use crate::hierarchy::{ClusterId, CutParams, HierarchicalDecomposition};
use crate::refine::RefinedDecomposition;

#[derive(Clone, Debug, PartialEq)]
pub struct Part {
    /// Member ids, ascending.
    pub members: Vec<usize>,
    /// Cluster the part was cut from; the root for the last part.
    pub provenance: ClusterId,
    pub level: usize,
    /// `2^level * gamma`.
    pub rang: f64,
    /// Cost of the approximate solution on `members`.
    pub approx_value: f64,
    pub is_last: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowValuePartition {
    pub parts: Vec<Part>,
    /// `holes[c]`: indices of the parts that are holes of part `c`.
    pub holes: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionConfig {
    /// Approximation factor of the value tester.
    pub alpha: f64,
    pub kappa: f64,
    /// Merge the last two parts into one.
    pub merge_last_two: bool,
}

impl PartitionConfig {
    pub fn new(alpha: f64, kappa: f64) -> Result<Self> {
        if !(alpha >= 1.0) {
            return Err(invalid(format!("alpha must be at least 1, got {alpha}")));
        }
        if !(kappa >= 1.0) {
            return Err(invalid(format!("kappa must be at least 1, got {kappa}")));
        }
        Ok(Self {
            alpha,
            kappa,
            merge_last_two: false,
        })
    }

    /// A part is emitted once its approximate value reaches this.
    pub fn threshold(&self) -> f64 {
        self.alpha * self.kappa
    }
}

/// Bottom-up partition.
///
/// Repeatedly takes the lowest level `0..=top` and, within it, the lowest
/// cluster id whose surviving members have `approx(members) >= alpha *
/// kappa`, emits those members as a part and deletes them everywhere. When
/// no cluster qualifies the survivors form the last part, attributed to the
/// root. `approx` returns the cost of an approximate UFL solution on the
/// given ids.
pub fn bottom_up_partition(
    h: &HierarchicalDecomposition,
    t: &RefinedDecomposition,
    cfg: PartitionConfig,
    mut approx: impl FnMut(&[usize]) -> Result<f64>,
) -> Result<LowValuePartition> {
    let n = h.num_points();
    let mut alive = vec![true; n];
    let mut remaining = n;
    let levels: Vec<Vec<Vec<usize>>> = (0..=h.top_level()).map(|i| t.level_members(h, i)).collect();
    // Deletions only shrink a cluster, so (cluster, survivor count) identifies
    // the surviving set.
    let mut cache: HashMap<(ClusterId, usize), f64> = HashMap::new();
    let mut parts = Vec::new();

    'scan: while remaining > 0 {
        for (level, clusters) in levels.iter().enumerate() {
            for (pos, members) in clusters.iter().enumerate() {
                let live: Vec<usize> = members.iter().copied().filter(|&x| alive[x]).collect();
                if live.is_empty() {
                    continue;
                }
                let id = h.level(level)[pos];
                let value = match cache.get(&(id, live.len())) {
                    Some(&v) => v,
                    None => {
                        let v = approx(&live)?;
                        cache.insert((id, live.len()), v);
                        v
                    }
                };
                if value >= cfg.threshold() {
                    for &x in &live {
                        alive[x] = false;
                    }
                    remaining -= live.len();
                    parts.push(Part {
                        members: live,
                        provenance: id,
                        level,
                        rang: h.rang(level),
                        approx_value: value,
                        is_last: false,
                    });
                    continue 'scan;
                }
            }
        }
        let rest: Vec<usize> = (0..n).filter(|&x| alive[x]).collect();
        let value = approx(&rest)?;
        parts.push(Part {
            members: rest,
            provenance: h.root(),
            level: h.root_level(),
            rang: h.rang(h.root_level()),
            approx_value: value,
            is_last: true,
        });
        break;
    }

    if cfg.merge_last_two && parts.len() >= 2 {
        let last = parts.pop().unwrap();
        let prev = parts.pop().unwrap();
        let mut members = [prev.members, last.members].concat();
        members.sort_unstable();
        let value = approx(&members)?;
        parts.push(Part {
            members,
            approx_value: value,
            ..last
        });
    }

    let holes = compute_holes(h, &parts);
    Ok(LowValuePartition { parts, holes })
}

/// Part `b` is a hole of part `a` when `a`'s provenance is the lowest-level
/// strict ancestor of `b`'s provenance among all parts.
pub fn compute_holes(h: &HierarchicalDecomposition, parts: &[Part]) -> Vec<Vec<usize>> {
    let mut by_cluster: HashMap<ClusterId, usize> = HashMap::new();
    for (k, p) in parts.iter().enumerate() {
        by_cluster.insert(p.provenance, k);
    }
    let mut holes = vec![Vec::new(); parts.len()];
    for (k, p) in parts.iter().enumerate() {
        let mut cur = h.cluster(p.provenance).parent;
        while let Some(c) = cur {
            if let Some(&owner) = by_cluster.get(&c) {
                holes[owner].push(k);
                break;
            }
            cur = h.cluster(c).parent;
        }
    }
    holes
}

impl LowValuePartition {
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Part index of every point.
    pub fn part_of(&self, n: usize) -> Vec<usize> {
        let mut out = vec![usize::MAX; n];
        for (k, p) in self.parts.iter().enumerate() {
            for &x in &p.members {
                out[x] = k;
            }
        }
        out
    }

    /// CSV with header `part_index,point_id,provenance_cluster,level,is_last`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("part_index,point_id,provenance_cluster,level,is_last\n");
        for (k, p) in self.parts.iter().enumerate() {
            for &x in &p.members {
                let _ = writeln!(out, "{},{},{},{},{}", k, x, p.provenance, p.level, p.is_last);
            }
        }
        out
    }
}

/// Violations of the invariants that hold by construction.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InvariantReport {
    /// Ids missing from every part or present in more than one.
    pub coverage: Vec<usize>,
    /// Non-last parts whose value is below `alpha * kappa`.
    pub low_value: Vec<usize>,
    /// Parts listed as a hole of more than one part.
    pub shared_holes: Vec<usize>,
    pub total_holes: usize,
}

impl InvariantReport {
    pub fn is_clean(&self, parts: usize) -> bool {
        self.coverage.is_empty()
            && self.low_value.is_empty()
            && self.shared_holes.is_empty()
            && self.total_holes <= parts
    }
}

pub fn check_invariants(lambda: &LowValuePartition, n: usize, cfg: PartitionConfig) -> InvariantReport {
    let mut count = vec![0usize; n];
    for p in &lambda.parts {
        for &x in &p.members {
            if x < n {
                count[x] += 1;
            }
        }
    }
    let mut owners = vec![0usize; lambda.parts.len()];
    for hs in &lambda.holes {
        for &k in hs {
            owners[k] += 1;
        }
    }
    InvariantReport {
        coverage: (0..n).filter(|&x| count[x] != 1).collect(),
        low_value: lambda
            .parts
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_last && p.approx_value < cfg.threshold())
            .map(|(k, _)| k)
            .collect(),
        shared_holes: (0..owners.len()).filter(|&k| owners[k] > 1).collect(),
        total_holes: lambda.holes.iter().map(Vec::len).sum(),
    }
}

/// Outcome of the value-bound check for one part.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValueCheck {
    Within { value: f64 },
    BelowKappa { value: f64 },
    AboveTau { value: f64 },
    /// The oracle declined the part (too large).
    Unchecked,
}

/// Check `kappa <= value(C) <= tau` for every part using `oracle`; the lower
/// bound is skipped for the last part.
pub fn local_value_bounds_check(
    lambda: &LowValuePartition,
    kappa: f64,
    tau: f64,
    mut oracle: impl FnMut(&[usize]) -> Option<f64>,
) -> Vec<ValueCheck> {
    lambda
        .parts
        .iter()
        .map(|p| match oracle(&p.members) {
            None => ValueCheck::Unchecked,
            Some(value) if value > tau * (1.0 + 1e-9) => ValueCheck::AboveTau { value },
            Some(value) if !p.is_last && value < kappa * (1.0 - 1e-9) => {
                ValueCheck::BelowKappa { value }
            }
            Some(value) => ValueCheck::Within { value },
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeparationViolation {
    pub x: usize,
    pub y: usize,
    pub distance: f64,
    pub bound: f64,
}

/// A part member farther than `eps^2 * rang` from its provenance cluster.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartConsistencyViolation {
    pub part: usize,
    pub point: usize,
    pub distance: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PropertiesReport {
    /// Good cross-part pairs examined.
    pub pairs_checked: usize,
    /// Sampled pairs skipped as not good or inside one part.
    pub pairs_skipped: usize,
    pub separation: Vec<SeparationViolation>,
    pub consistency: Vec<PartConsistencyViolation>,
}

impl PropertiesReport {
    pub fn is_clean(&self) -> bool {
        self.separation.is_empty() && self.consistency.is_empty()
    }
}

/// Check the separation property on the sampled `pairs` that are good and
/// lie in different parts, and consistency of every part.
///
/// Separation: if the provenance clusters of the two parts are unrelated,
/// `dist >= eps^2 / ddim * max rang`; if one descends from the other, some
/// hole of the ancestor part must satisfy `dist >= eps^2 / ddim * rang`.
pub fn partition_properties_check(
    oracle: &impl DistanceOracle,
    h: &HierarchicalDecomposition,
    lambda: &LowValuePartition,
    f0: &FacilityMap,
    params: CutParams,
    pairs: &[(usize, usize)],
) -> PropertiesReport {
    let part_of = lambda.part_of(h.num_points());
    let scale = params.eps * params.eps / params.ddim;
    let mut report = PropertiesReport::default();
    let rang_of = |k: usize| h.rang(h.cluster(lambda.parts[k].provenance).level);

    for &(x, y) in pairs {
        let (a, b) = (part_of[x], part_of[y]);
        if a == b || !h.is_good_pair(oracle, f0, x, y, params) {
            report.pairs_skipped += 1;
            continue;
        }
        report.pairs_checked += 1;
        let d = oracle.distance(x, y);
        let (pa, pb) = (lambda.parts[a].provenance, lambda.parts[b].provenance);
        let upper = if h.is_ancestor(pa, pb) {
            Some(a)
        } else if h.is_ancestor(pb, pa) {
            Some(b)
        } else {
            None
        };
        let bound = match upper {
            None => scale * rang_of(a).max(rang_of(b)),
            Some(owner) => lambda.holes[owner]
                .iter()
                .map(|&k| scale * rang_of(k))
                .fold(f64::INFINITY, f64::min),
        };
        if d < bound * (1.0 - 1e-9) {
            report.separation.push(SeparationViolation {
                x,
                y,
                distance: d,
                bound,
            });
        }
    }

    for (k, p) in lambda.parts.iter().enumerate() {
        let base = &h.cluster(p.provenance).members;
        let bound = params.eps * params.eps * rang_of(k);
        for &x in &p.members {
            if base.binary_search(&x).is_ok() {
                continue;
            }
            let distance = base
                .iter()
                .map(|&m| oracle.distance(x, m))
                .fold(f64::INFINITY, f64::min);
            if distance > bound * (1.0 + 1e-9) {
                report.consistency.push(PartConsistencyViolation {
                    part: k,
                    point: x,
                    distance,
                    bound,
                });
            }
        }
    }
    report
}

/// `(|parts|, sum of approximate values)`.
pub fn partition_size_stat(lambda: &LowValuePartition) -> (usize, f64) {
    (
        lambda.parts.len(),
        lambda.parts.iter().map(|p| p.approx_value).sum(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointSet;
    use crate::hierarchy::build_hierarchy;
    use crate::solvers::approx_ufl_ids;

    fn run(x: &PointSet, seed: u64, kappa: f64) -> (HierarchicalDecomposition, LowValuePartition) {
        let h = build_hierarchy(x, seed).unwrap();
        let t = RefinedDecomposition::unchanged(&h);
        let cfg = PartitionConfig::new(6.0, kappa).unwrap();
        let lambda =
            bottom_up_partition(&h, &t, cfg, |ids| Ok(approx_ufl_ids(x, ids)?.total)).unwrap();
        (h, lambda)
    }

    #[test]
    fn huge_kappa_gives_one_part() {
        let x = PointSet::from_line(&[0.0, 1.0, 3.0, 8.0]);
        let (h, lambda) = run(&x, 1, 1e6);
        assert_eq!(lambda.len(), 1);
        assert!(lambda.parts[0].is_last);
        assert_eq!(lambda.parts[0].provenance, h.root());
        assert_eq!(lambda.parts[0].members, vec![0, 1, 2, 3]);
        assert!(lambda.holes[0].is_empty());
    }

    #[test]
    fn two_far_blobs() {
        // Each blob alone has value above alpha * kappa = 12.
        let xs: Vec<f64> = (0..20)
            .map(|i| if i < 10 { 2.0 * i as f64 } else { 1e6 + 2.0 * i as f64 })
            .collect();
        let x = PointSet::from_line(&xs);
        assert!(approx_ufl_ids(&x, &(0..10).collect::<Vec<_>>()).unwrap().total >= 12.0);
        let cfg = PartitionConfig::new(6.0, 2.0).unwrap();
        for seed in 0..5 {
            let (_, lambda) = run(&x, seed, 2.0);
            assert!(lambda.len() >= 2, "seed {seed}");
            for p in lambda.parts.iter().filter(|p| !p.is_last) {
                let side = p.members[0] < 10;
                assert!(p.members.iter().all(|&m| (m < 10) == side));
            }
            assert!(check_invariants(&lambda, 20, cfg).is_clean(lambda.len()));
        }
    }

    #[test]
    fn singletons_never_qualify() {
        let x = PointSet::from_line(&[0.0, 100.0, 200.0]);
        let (_, lambda) = run(&x, 0, 2.0);
        assert!(lambda.parts.iter().all(|p| p.level > 0));
    }

    #[test]
    fn low_value_part_is_flagged() {
        let x = PointSet::from_line(&[0.0, 1.0, 3.0, 8.0]);
        let (_, mut lambda) = run(&x, 1, 1e6);
        lambda.parts[0].is_last = false;
        let checks = local_value_bounds_check(&lambda, 10.0, 1e9, |_| Some(5.0));
        assert_eq!(checks, vec![ValueCheck::BelowKappa { value: 5.0 }]);
        let cfg = PartitionConfig::new(6.0, 10.0).unwrap();
        assert!(!check_invariants(&lambda, 4, cfg).low_value.is_empty());
    }

    #[test]
    fn last_part_skips_lower_bound() {
        let x = PointSet::from_line(&[0.0, 1.0]);
        let (_, lambda) = run(&x, 1, 1e6);
        let checks = local_value_bounds_check(&lambda, 10.0, 100.0, |_| Some(2.0));
        assert_eq!(checks, vec![ValueCheck::Within { value: 2.0 }]);
        let checks = local_value_bounds_check(&lambda, 10.0, 100.0, |_| None);
        assert_eq!(checks, vec![ValueCheck::Unchecked]);
    }

    #[test]
    fn csv_rows() {
        let x = PointSet::from_line(&[0.0, 1.0]);
        let (_, lambda) = run(&x, 1, 1e6);
        assert_eq!(
            lambda.to_csv(),
            "part_index,point_id,provenance_cluster,level,is_last\n0,0,0,1,true\n0,1,0,1,true\n"
        );
    }

    #[test]
    fn merge_flag_joins_last_two() {
        let xs: Vec<f64> = (0..30).map(|i| (i / 10) as f64 * 1e6 + (i % 10) as f64 * 2.0).collect();
        let x = PointSet::from_line(&xs);
        let h = build_hierarchy(&x, 3).unwrap();
        let t = RefinedDecomposition::unchanged(&h);
        let mut cfg = PartitionConfig::new(6.0, 2.0).unwrap();
        let f = |ids: &[usize]| Ok(approx_ufl_ids(&x, ids)?.total);
        let plain = bottom_up_partition(&h, &t, cfg, f).unwrap();
        cfg.merge_last_two = true;
        let merged = bottom_up_partition(&h, &t, cfg, f).unwrap();
        assert!(plain.len() >= 2);
        assert_eq!(merged.len() + 1, plain.len());
        assert!(merged.parts.last().unwrap().is_last);
    }
}
