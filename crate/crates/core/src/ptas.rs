//! The approximation scheme: partition, project, solve each part in the
//! projected space, recenter in the original space. Also the variant for
//! general doubling metrics with candidate facility sets.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    euclid, metric_stats, neighborhood, ufl_cost, ufl_cost_discrete, DiscreteSolution,
    DistanceOracle, PointSet, UflSolution,
};
use crate::hierarchy::{build_hierarchy, ClusterId, CutParams, HierarchicalDecomposition};
use crate::partition::{bottom_up_partition, LowValuePartition, Part, PartitionConfig};
use crate::projection::{sample_map, target_dim};
use crate::refine::eliminate_badly_cut;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::solvers::{
    approx_ufl_ids, discrete_kmedian_sweep_ufl, kmedian_sweep_ufl, weiszfeld_1median, SolverConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PtasConfig {
    pub eps: f64,
    pub ddim: f64,
    /// Exponent constant of `kappa`.
    pub c1: f64,
    /// Leading constant of `kappa`.
    pub c2: f64,
    /// Constant of the target dimension.
    pub c3: f64,
    /// Constant of the `k` range and of the expansion test.
    pub c4: f64,
    /// Upper clamp on `kappa`.
    pub kappa_cap: f64,
    pub seed: u64,
    pub merge_last_two: bool,
    pub solver: SolverConfig,
}

impl Default for PtasConfig {
    fn default() -> Self {
        Self {
            eps: 0.2,
            ddim: 2.0,
            c1: 1.0,
            c2: 1.0,
            c3: 2.0,
            c4: 4.0,
            kappa_cap: 32.0,
            seed: 0,
            merge_last_two: false,
            solver: SolverConfig::default(),
        }
    }
}

impl PtasConfig {
    pub fn new(eps: f64, ddim: f64, seed: u64) -> Result<Self> {
        let cfg = Self {
            eps,
            ddim,
            seed,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        CutParams::new(self.eps, self.ddim)?;
        for (name, v) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3), ("c4", self.c4)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.kappa_cap >= 1.0) {
            return Err(invalid("kappa_cap must be at least 1"));
        }
        self.solver.validate()
    }

    /// `c2 * (ddim / eps)^(c1 * ddim)`, clamped to `[1, kappa_cap]`.
    pub fn kappa(&self) -> f64 {
        let raw = self.c2 * (self.ddim / self.eps).powf(self.c1 * self.ddim);
        raw.min(self.kappa_cap).max(1.0)
    }

    /// `2^(10 ddim) * alpha * kappa`.
    pub fn tau(&self) -> f64 {
        2f64.powf(10.0 * self.ddim) * self.solver.alpha * self.kappa()
    }

    pub fn target_dim(&self) -> Result<usize> {
        target_dim(self.eps, self.tau(), self.c3)
    }

    pub fn cut_params(&self) -> CutParams {
        CutParams {
            eps: self.eps,
            ddim: self.ddim,
        }
    }

    pub fn partition_config(&self) -> PartitionConfig {
        PartitionConfig {
            alpha: self.solver.alpha,
            kappa: self.kappa(),
            merge_last_two: self.merge_last_two,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adopted {
    Median,
    Fallback,
}

/// What happened to one part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartTrace {
    pub part: usize,
    pub level: usize,
    /// No facility pair of the approximate solution contracts too much.
    #[serde(rename = "event_G")]
    pub event_g: Option<bool>,
    /// The best `k + v` stays within `c4 * tau`.
    #[serde(rename = "event_H")]
    pub event_h: Option<bool>,
    pub k_star: Option<usize>,
    pub v: Option<f64>,
    pub adopted: Adopted,
    /// Cost of the approximate solution on the part.
    #[serde(skip)]
    pub approx_cost: f64,
    /// Openings plus connection cost of the part's adopted clusters around
    /// their final centers.
    #[serde(skip)]
    pub final_cost: f64,
}

/// One JSON object per line.
pub fn trace_jsonl(trace: &[PartTrace]) -> String {
    trace
        .iter()
        .map(|t| serde_json::to_string(t).expect("trace serializes") + "\n")
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PtasRun {
    pub solution: UflSolution,
    pub trace: Vec<PartTrace>,
    /// `None` for a single point.
    pub partition: Option<LowValuePartition>,
    pub target_dim: usize,
}

/// Shared first stage: hierarchy, initial solution, refinement, partition.
pub(crate) fn build_partition(
    oracle: &impl DistanceOracle,
    cfg: &PtasConfig,
) -> Result<(HierarchicalDecomposition, LowValuePartition)> {
    let all: Vec<usize> = (0..oracle.len()).collect();
    let h = build_hierarchy(oracle, derive_seed(cfg.seed, stream::HIERARCHY, 0))?;
    let f0 = approx_ufl_ids(oracle, &all)?.facility_map();
    let t = eliminate_badly_cut(oracle, &h, &f0, cfg.cut_params());
    let lambda = bottom_up_partition(&h, &t, cfg.partition_config(), |ids| {
        Ok(approx_ufl_ids(oracle, ids)?.total)
    })?;
    Ok((h, lambda))
}

fn single_point_part() -> LowValuePartition {
    LowValuePartition {
        parts: vec![Part {
            members: vec![0],
            provenance: 0,
            level: 0,
            rang: 0.0,
            approx_value: 1.0,
            is_last: true,
        }],
        holes: vec![Vec::new()],
    }
}

/// Approximation scheme for UFL on a Euclidean point set.
pub fn ptas_euclidean(points: &PointSet, cfg: &PtasConfig) -> Result<PtasRun> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    let (lambda, partition) = if points.len() == 1 {
        (single_point_part(), None)
    } else {
        let (_, lambda) = build_partition(points, cfg)?;
        (lambda.clone(), Some(lambda))
    };
    let m = cfg.target_dim()?;
    let map = sample_map(points.dim(), m, derive_seed(cfg.seed, stream::PROJECTION, 0))?;
    let projected = map.apply(points)?;
    let tau = cfg.tau();
    let kcap = (cfg.c4 * tau).floor().max(1.0);

    let mut facilities = Vec::new();
    let mut trace = Vec::new();
    for (index, part) in lambda.parts.iter().enumerate() {
        let members = &part.members;
        // Parts are never empty by construction.
        if members.is_empty() {
            continue;
        }
        let approx = approx_ufl_ids(points, members)?;
        let event_g = approx.facilities.iter().enumerate().all(|(i, &f)| {
            approx.facilities[i + 1..].iter().all(|&g| {
                euclid(points.point(f), points.point(g))
                    <= (1.0 + cfg.eps) * euclid(projected.point(f), projected.point(g))
            })
        });
        let mut record = PartTrace {
            part: index,
            level: part.level,
            event_g: Some(event_g),
            event_h: None,
            k_star: None,
            v: None,
            adopted: Adopted::Fallback,
            approx_cost: approx.total,
            final_cost: 0.0,
        };
        let mut clusters = approx.clusters();
        if event_g {
            let kmax = members.len().min(kcap as usize);
            let rows = projected.rows(members);
            let sweep = kmedian_sweep_ufl(&rows, kmax, &cfg.solver)?;
            let (k_star, best) = sweep
                .iter()
                .enumerate()
                .map(|(j, r)| (j + 1, r))
                .min_by(|a, b| (a.0 as f64 + a.1.value).total_cmp(&(b.0 as f64 + b.1.value)))
                .expect("sweep is non-empty");
            let event_h = k_star as f64 + best.value <= cfg.c4 * tau;
            record.event_h = Some(event_h);
            record.k_star = Some(k_star);
            record.v = Some(best.value);
            if event_h {
                record.adopted = Adopted::Median;
                clusters = best
                    .clusters
                    .iter()
                    .map(|c| c.iter().map(|&j| members[j]).collect())
                    .collect();
            }
        }
        for cluster in clusters.iter().filter(|c| !c.is_empty()) {
            let rows = points.rows(cluster);
            let median = weiszfeld_1median(&rows, &cfg.solver)?;
            record.final_cost += 1.0 + median.cost;
            facilities.push(median.center);
        }
        trace.push(record);
    }
    let solution = ufl_cost(points, &facilities)?;
    Ok(PtasRun {
        solution,
        trace,
        partition,
        target_dim: m,
    })
}

/// Arithmetic checks on a finished run: the total never exceeds the sum of
/// the per-part costs of the adopted clusters, and a part that fell back
/// never costs more than its approximate solution.
pub fn fallback_safety_violations(run: &PtasRun) -> Vec<String> {
    let mut out = Vec::new();
    let sum: f64 = run.trace.iter().map(|t| t.final_cost).sum();
    if run.solution.total > sum * (1.0 + 1e-9) {
        out.push(format!(
            "total {} exceeds per-part sum {}",
            run.solution.total, sum
        ));
    }
    for t in &run.trace {
        if t.adopted == Adopted::Fallback && t.final_cost > t.approx_cost * (1.0 + 1e-9) {
            out.push(format!(
                "part {} fell back at cost {} above approximate cost {}",
                t.part, t.final_cost, t.approx_cost
            ));
        }
    }
    out
}

/// Number of random triples examined by [`check_metric`] on large inputs.
const METRIC_SAMPLES: usize = 20_000;

/// Spot-check the metric axioms: exhaustively up to 40 points, otherwise on
/// random triples drawn from `seed`.
pub fn check_metric(oracle: &impl DistanceOracle, seed: u64) -> Result<()> {
    use rand::Rng;
    let n = oracle.len();
    let check = |a: usize, b: usize, c: usize| -> Result<()> {
        let ab = oracle.distance(a, b);
        let ba = oracle.distance(b, a);
        let tol = 1e-9 * ab.abs().max(1.0);
        if !(ab >= 0.0) || !ab.is_finite() {
            return Err(Error::MetricViolation(format!("d({a},{b}) = {ab}")));
        }
        if (ab - ba).abs() > tol {
            return Err(Error::MetricViolation(format!("d({a},{b}) != d({b},{a})")));
        }
        if oracle.distance(a, a) != 0.0 {
            return Err(Error::MetricViolation(format!("d({a},{a}) != 0")));
        }
        let via = oracle.distance(a, c) + oracle.distance(c, b);
        if ab > via + 1e-9 * via.max(1.0) {
            return Err(Error::MetricViolation(format!(
                "triangle inequality fails for ({a},{b}) via {c}"
            )));
        }
        Ok(())
    };
    if n <= 40 {
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    check(a, b, c)?;
                }
            }
        }
    } else {
        let mut rng = rng_from_seed(derive_seed(seed, stream::METRIC_CHECK, 0));
        for _ in 0..METRIC_SAMPLES {
            check(
                rng.random_range(0..n),
                rng.random_range(0..n),
                rng.random_range(0..n),
            )?;
        }
    }
    Ok(())
}

/// Candidate facilities `B(C, (100 / eps) * rang(C))` of cluster `c`.
pub fn candidate_set(
    oracle: &impl DistanceOracle,
    h: &HierarchicalDecomposition,
    c: ClusterId,
    eps: f64,
) -> Vec<usize> {
    let cluster = h.cluster(c);
    if c == h.root() {
        return (0..oracle.len()).collect();
    }
    neighborhood(oracle, &cluster.members, 100.0 / eps * h.rang(cluster.level))
}

/// `(part, child)` pairs where the candidate set of a child of the part's
/// provenance cluster is not contained in the provenance's candidate set.
pub fn subadditivity_violations(
    oracle: &impl DistanceOracle,
    h: &HierarchicalDecomposition,
    lambda: &LowValuePartition,
    eps: f64,
) -> Vec<(usize, ClusterId)> {
    let mut out = Vec::new();
    for (k, part) in lambda.parts.iter().enumerate() {
        let parent = candidate_set(oracle, h, part.provenance, eps);
        for &child in &h.cluster(part.provenance).children {
            let sub = candidate_set(oracle, h, child, eps);
            if sub.iter().any(|x| parent.binary_search(x).is_err()) {
                out.push((k, child));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePtasRun {
    pub solution: DiscreteSolution,
    pub trace: Vec<PartTrace>,
    pub partition: Option<LowValuePartition>,
    pub hierarchy: Option<HierarchicalDecomposition>,
}

/// Approximation scheme for UFL on a doubling metric given by distance
/// queries; facilities are ids of the metric.
pub fn ptas_discrete(oracle: &impl DistanceOracle, cfg: &PtasConfig) -> Result<DiscretePtasRun> {
    cfg.validate()?;
    let n = oracle.len();
    if n == 0 {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    check_metric(oracle, cfg.seed)?;
    let (lambda, partition, hierarchy) = if n == 1 {
        (single_point_part(), None, None)
    } else {
        metric_stats(oracle)?;
        let (h, lambda) = build_partition(oracle, cfg)?;
        (lambda.clone(), Some(lambda), Some(h))
    };
    let tau = cfg.tau();
    let all: Vec<usize> = (0..n).collect();

    let mut facilities = Vec::new();
    let mut trace = Vec::new();
    for (index, part) in lambda.parts.iter().enumerate() {
        if part.members.is_empty() {
            continue;
        }
        let candidates = match &hierarchy {
            Some(h) => candidate_set(oracle, h, part.provenance, cfg.eps),
            None => all.clone(),
        };
        let kmax = (tau.floor().max(1.0) as usize)
            .min(part.members.len())
            .min(candidates.len());
        let sweep = discrete_kmedian_sweep_ufl(oracle, &part.members, &candidates, kmax, &cfg.solver)?;
        let (k_star, best) = sweep
            .iter()
            .enumerate()
            .map(|(j, r)| (j + 1, r))
            .min_by(|a, b| (a.0 as f64 + a.1.value).total_cmp(&(b.0 as f64 + b.1.value)))
            .expect("sweep is non-empty");
        let approx = approx_ufl_ids(oracle, &part.members)?;
        trace.push(PartTrace {
            part: index,
            level: part.level,
            event_g: None,
            event_h: None,
            k_star: Some(k_star),
            v: Some(best.value),
            adopted: Adopted::Median,
            approx_cost: approx.total,
            final_cost: best.facilities.len() as f64 + best.value,
        });
        facilities.extend(best.facilities.iter().copied());
    }
    facilities.sort_unstable();
    facilities.dedup();
    let solution = ufl_cost_discrete(oracle, &all, &facilities)?;
    Ok(DiscretePtasRun {
        solution,
        trace,
        partition,
        hierarchy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DistanceMatrix;
    use crate::solvers::{approx_ufl, brute_force_ufl_continuous};

    #[test]
    fn derived_parameters() {
        let cfg = PtasConfig::new(0.5, 1.0, 0).unwrap();
        assert_eq!(cfg.kappa(), 2.0);
        assert_eq!(cfg.tau(), 1024.0 * 6.0 * 2.0);
        let capped = PtasConfig::new(0.1, 3.0, 0).unwrap();
        assert_eq!(capped.kappa(), 32.0);
        assert!(PtasConfig::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn single_point() {
        let x = PointSet::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let run = ptas_euclidean(&x, &PtasConfig::default()).unwrap();
        assert_eq!(run.solution.total, 1.0);
        let d = ptas_discrete(&x, &PtasConfig::default()).unwrap();
        assert_eq!(d.solution.total, 1.0);
    }

    #[test]
    fn tight_cluster_is_one_part() {
        let rows: Vec<[f64; 2]> = (0..10)
            .map(|i| [0.001 * (i % 4) as f64, 0.0025 * (i / 4) as f64])
            .collect();
        let x = PointSet::from_rows(&rows).unwrap();
        let cfg = PtasConfig {
            kappa_cap: 32.0,
            ..PtasConfig::default()
        };
        let run = ptas_euclidean(&x, &cfg).unwrap();
        assert_eq!(run.partition.as_ref().unwrap().len(), 1);
        let oracle = brute_force_ufl_continuous(&x, &cfg.solver).unwrap();
        let approx = approx_ufl(&x).unwrap().total;
        assert!(run.solution.total <= approx * (1.0 + 1e-9));
        assert!(run.solution.total <= 6.0 * oracle);
        assert!(run.solution.is_consistent(&x));
        assert!(fallback_safety_violations(&run).is_empty());
    }

    #[test]
    fn trace_format() {
        let t = PartTrace {
            part: 0,
            level: 3,
            event_g: Some(false),
            event_h: None,
            k_star: None,
            v: None,
            adopted: Adopted::Fallback,
            approx_cost: 1.0,
            final_cost: 1.0,
        };
        assert_eq!(
            trace_jsonl(&[t]),
            "{\"part\":0,\"level\":3,\"event_G\":false,\"event_H\":null,\"k_star\":null,\"v\":null,\"adopted\":\"fallback\"}\n"
        );
    }

    #[test]
    fn metric_violation_detected() {
        let bad = DistanceMatrix::new(3, vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0]).unwrap();
        assert!(matches!(check_metric(&bad, 0), Err(Error::MetricViolation(_))));
        assert!(ptas_discrete(&bad, &PtasConfig::default()).is_err());
    }

    #[test]
    fn candidate_set_matches_scan() {
        let xs: Vec<f64> = (0..40).map(|i| (i as f64).powf(1.7)).collect();
        let x = PointSet::from_line(&xs);
        let h = build_hierarchy(&x, 9).unwrap();
        let eps = 0.9;
        for c in h.clusters() {
            let got = candidate_set(&x, &h, c.id, eps);
            if c.id == h.root() {
                assert_eq!(got.len(), 40);
                continue;
            }
            let r = 100.0 / eps * h.rang(c.level);
            let want: Vec<usize> = (0..40)
                .filter(|&y| c.members.iter().any(|&m| (xs[y] - xs[m]).abs() <= r))
                .collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn discrete_costs_at_least_continuous() {
        let x = PointSet::from_rows(&[[0.0, 0.0], [0.4, 0.1], [3.0, 0.0], [3.2, 0.5], [7.0, 7.0]])
            .unwrap();
        let cfg = PtasConfig::default();
        let d = ptas_discrete(&x, &cfg).unwrap();
        let oracle = brute_force_ufl_continuous(&x, &cfg.solver).unwrap();
        assert!(d.solution.total >= oracle * (1.0 - 1e-9));
    }

    #[test]
    fn deterministic() {
        let x = PointSet::from_rows(&[[0.0, 0.0], [0.4, 0.1], [3.0, 0.0], [3.2, 0.5], [7.0, 7.0]])
            .unwrap();
        let cfg = PtasConfig::new(0.3, 1.5, 42).unwrap();
        let a = ptas_euclidean(&x, &cfg).unwrap();
        let b = ptas_euclidean(&x, &cfg).unwrap();
        assert_eq!(a, b);
    }
}
