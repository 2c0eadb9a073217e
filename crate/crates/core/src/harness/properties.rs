//! Monte-Carlo and exhaustive property checks, reported as measured value
//! against bound.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{DistanceMatrix, DistanceOracle, FacilityMap, PointSet};
use crate::hierarchy::{build_hierarchy, check_structure, decompose, HierarchicalDecomposition, NestedNets};
use crate::partition::{
    bottom_up_partition, check_invariants, local_value_bounds_check, partition_properties_check,
    ValueCheck,
};
use crate::projection::sample_map;
use crate::ptas::{build_partition, PtasConfig};
use crate::refine::{consistency_check, eliminate_badly_cut, remaining_bad_anchor_cuts};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::solvers::{approx_ufl_ids, brute_force_ufl_continuous, optimal_ufl_clustering};

use super::datasets::generate_dataset;
use super::experiments::ExperimentSpec;

/// Constant of the badly-cut bound `K * eps^2`.
pub const BADLY_CUT_K: f64 = 64.0;
/// Constant of the good-pair bound `1 - K * eps^2`.
pub const GOOD_PAIR_K: f64 = 192.0;
/// Slack on the random-map tail bounds.
pub const TAIL_SLACK: f64 = 4.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    /// Decompositions per Monte-Carlo estimate on a fixed instance.
    pub mc_seeds: usize,
    /// Decompositions for the cutting-probability check.
    pub cut_seeds: usize,
    /// Maps per tail estimate.
    pub tail_seeds: usize,
    /// Partitions averaged in the size check.
    pub size_seeds: usize,
    /// Pairs sampled per instance when not all pairs are checked.
    pub pair_samples: usize,
    /// Maps per point of the contraction trend.
    pub contraction_maps: usize,
    /// Negative control: break nesting in the first hierarchy.
    pub corrupt_hierarchy: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            mc_seeds: 1000,
            cut_seeds: 2000,
            tail_seeds: 10_000,
            size_seeds: 200,
            pair_samples: 400,
            contraction_maps: 200,
            corrupt_hierarchy: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub detail: String,
}

impl PropertyResult {
    fn at_most(name: &str, measured: f64, bound: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            measured,
            bound,
            pass: measured <= bound,
            detail,
        }
    }

    fn at_least(name: &str, measured: f64, bound: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            measured,
            bound,
            pass: measured >= bound,
            detail,
        }
    }

    fn count(name: &str, violations: usize, detail: String) -> Self {
        Self::at_most(name, violations as f64, 0.0, detail)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub instances: usize,
    pub seed: u64,
    pub eps: f64,
    pub ddim: f64,
    pub properties: Vec<PropertyResult>,
    pub all_pass: bool,
}

impl PropertyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

/// All pairs `x < y` if there are at most `count`, otherwise `count` random
/// distinct-point pairs.
pub fn sample_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    if n < 2 {
        return Vec::new();
    }
    if n * (n - 1) / 2 <= count {
        return (0..n)
            .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
            .collect();
    }
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let x = rng.random_range(0..n);
            let y = (x + rng.random_range(1..n)) % n;
            (x.min(y), x.max(y))
        })
        .collect()
}

/// Move one point so that level `L` no longer nests in level `L + 1`.
pub fn break_nesting(h: &HierarchicalDecomposition) -> Option<HierarchicalDecomposition> {
    let n = h.num_points();
    for level in 0..h.root_level() {
        for x in 0..n {
            for y in 0..n {
                if h.cluster_of(level + 1, y) != h.cluster_of(level + 1, x) {
                    return Some(h.corrupted(level, x, h.cluster_of(level, y)));
                }
            }
        }
    }
    None
}

/// The line `0, 1, ..., 99` followed by `2^7, ..., 2^15`.
pub fn line_instance() -> PointSet {
    let xs: Vec<f64> = (0..100)
        .map(f64::from)
        .chain((7..=15).map(|k| f64::from(1u32 << k)))
        .collect();
    PointSet::from_line(&xs)
}

/// Pairs of [`line_instance`] used by the cutting-probability check.
pub const LINE_PAIRS: [(usize, usize); 4] = [(0, 1), (10, 12), (20, 28), (0, 50)];

/// Largest ratio of empirical cut rate to `64 * ddim * D / (2^i gamma)` over
/// the line pairs and the levels where that bound is at most `1/2`.
pub fn cut_probability_ratio(seeds: usize, root: u64, ddim: f64) -> Result<(f64, String)> {
    let x = line_instance();
    let dm = DistanceMatrix::from_oracle(&x);
    let nets = NestedNets::build(&dm)?;
    let levels = nets.stats.top_level + 2;
    let mut cuts = vec![vec![0usize; levels]; LINE_PAIRS.len()];
    for s in 0..seeds {
        let h = decompose(&dm, &nets, derive_seed(root, stream::HIERARCHY, s as u64))?;
        for (p, &(a, b)) in LINE_PAIRS.iter().enumerate() {
            for (i, c) in cuts[p].iter_mut().enumerate() {
                if h.cluster_of(i, a) != h.cluster_of(i, b) {
                    *c += 1;
                }
            }
        }
    }
    let gamma = nets.stats.gamma;
    let mut worst = (0.0, String::new());
    for (p, &(a, b)) in LINE_PAIRS.iter().enumerate() {
        let d = dm.distance(a, b);
        for (i, &c) in cuts[p].iter().enumerate() {
            let bound = 64.0 * ddim * d / (2f64.powi(i as i32) * gamma);
            if bound > 0.5 {
                continue;
            }
            let rate = c as f64 / seeds as f64;
            let ratio = rate / bound;
            if ratio > worst.0 || worst.1.is_empty() {
                worst = (ratio, format!("pair ({a},{b}) level {i}: rate {rate} bound {bound}"));
            }
        }
    }
    Ok(worst)
}

/// Per pair, the fraction of decompositions that cut it badly and the
/// fraction in which it is good.
pub fn cut_rates(
    oracle: &impl DistanceOracle,
    f0: &FacilityMap,
    pairs: &[(usize, usize)],
    cfg: &PtasConfig,
    seeds: usize,
    root: u64,
) -> Result<Vec<(f64, f64)>> {
    let nets = NestedNets::build(oracle)?;
    let params = cfg.cut_params();
    let mut counts = vec![(0usize, 0usize); pairs.len()];
    for s in 0..seeds {
        let h = decompose(oracle, &nets, derive_seed(root, stream::HIERARCHY, s as u64))?;
        for (c, &(x, y)) in counts.iter_mut().zip(pairs) {
            if h.is_badly_cut(oracle, x, y, params) {
                c.0 += 1;
            }
            if h.is_good_pair(oracle, f0, x, y, params) {
                c.1 += 1;
            }
        }
    }
    Ok(counts
        .into_iter()
        .map(|(bad, good)| (bad as f64 / seeds as f64, good as f64 / seeds as f64))
        .collect())
}

/// Empirical `Pr[| |pi(x)| - 1 | > t]` for a unit `x`.
pub fn expansion_rate(t: f64, m: usize, seeds: usize, root: u64) -> Result<f64> {
    let mut hits = 0usize;
    for s in 0..seeds {
        let map = sample_map(1, m, derive_seed(root, stream::PROJECTION, s as u64))?;
        let norm = map.map_point(&[1.0])?.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > t {
            hits += 1;
        }
    }
    Ok(hits as f64 / seeds as f64)
}

/// Empirical `Pr[|pi(x)| <= 1/t]` for a unit `x`.
pub fn contraction_rate(t: f64, m: usize, seeds: usize, root: u64) -> Result<f64> {
    let mut hits = 0usize;
    for s in 0..seeds {
        let map = sample_map(1, m, derive_seed(root, stream::PROJECTION, s as u64))?;
        let norm = map.map_point(&[1.0])?.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1.0 / t {
            hits += 1;
        }
    }
    Ok(hits as f64 / seeds as f64)
}

/// Mean number of parts over `seeds` partitions of `points`.
pub fn mean_partition_size(points: &PointSet, cfg: &PtasConfig, seeds: usize) -> Result<f64> {
    let mut total = 0usize;
    for s in 0..seeds {
        let run_cfg = PtasConfig {
            seed: derive_seed(cfg.seed, stream::SAMPLING, s as u64),
            ..cfg.clone()
        };
        total += build_partition(points, &run_cfg)?.1.len();
    }
    Ok(total as f64 / seeds as f64)
}

#[derive(Default)]
struct InstanceTally {
    nesting: usize,
    structure: usize,
    consistency: usize,
    anchor_cuts: usize,
    invariants: usize,
    separation: usize,
    pairs_checked: usize,
    part_consistency: usize,
    value_bounds: usize,
    values_checked: usize,
}

fn check_instance(
    points: &PointSet,
    spec: &ExperimentSpec,
    trial: usize,
    corrupt: bool,
    pair_samples: usize,
    tally: &mut InstanceTally,
) -> Result<()> {
    let cfg = &spec.ptas;
    let dm = DistanceMatrix::from_oracle(points);
    let mut h = build_hierarchy(&dm, derive_seed(spec.seed, stream::HIERARCHY, trial as u64))?;
    if corrupt {
        if let Some(broken) = break_nesting(&h) {
            h = broken;
        }
    }
    let report = check_structure(&h, &dm);
    tally.nesting += report.nesting.len();
    tally.structure += report.partition.len() + report.diameter.len() + report.nets.len();

    let all: Vec<usize> = (0..dm.len()).collect();
    let f0 = approx_ufl_ids(&dm, &all)?.facility_map();
    let params = cfg.cut_params();
    let t = eliminate_badly_cut(&dm, &h, &f0, params);
    tally.consistency += consistency_check(&dm, &h, &t, cfg.eps).len();
    tally.anchor_cuts += remaining_bad_anchor_cuts(&dm, &h, &t, &f0, params).len();

    let pcfg = cfg.partition_config();
    let lambda = bottom_up_partition(&h, &t, pcfg, |ids| Ok(approx_ufl_ids(&dm, ids)?.total))?;
    let inv = check_invariants(&lambda, dm.len(), pcfg);
    tally.invariants += inv.coverage.len()
        + inv.low_value.len()
        + inv.shared_holes.len()
        + usize::from(inv.total_holes > lambda.len());

    let pairs = sample_pairs(
        dm.len(),
        pair_samples,
        derive_seed(spec.seed, stream::SAMPLING, trial as u64),
    );
    let props = partition_properties_check(&dm, &h, &lambda, &f0, params, &pairs);
    tally.separation += props.separation.len();
    tally.part_consistency += props.consistency.len();
    tally.pairs_checked += props.pairs_checked;

    let checks = local_value_bounds_check(&lambda, pcfg.kappa, cfg.tau(), |ids| {
        if ids.len() > cfg.solver.enum_threshold {
            return None;
        }
        optimal_ufl_clustering(&points.subset(ids), &cfg.solver)
            .ok()
            .map(|(v, _)| v)
    });
    for c in checks {
        match c {
            ValueCheck::Within { .. } => tally.values_checked += 1,
            ValueCheck::BelowKappa { .. } | ValueCheck::AboveTau { .. } => {
                tally.values_checked += 1;
                tally.value_bounds += 1;
            }
            ValueCheck::Unchecked => {}
        }
    }
    Ok(())
}

/// Run every property check. Instances come from `spec.dataset` with
/// per-trial seeds; Monte-Carlo estimates use the first instance.
pub fn run_property_suite(spec: &ExperimentSpec, opts: &SuiteOptions) -> Result<PropertyReport> {
    spec.validate()?;
    let cfg = &spec.ptas;
    let eps = cfg.eps;
    let mut props = Vec::new();

    let mut tally = InstanceTally::default();
    let instances: Vec<PointSet> = (0..spec.trials)
        .map(|t| {
            let mut ds = spec.dataset.clone();
            ds.seed = derive_seed(spec.seed, stream::DATASET, t as u64);
            Ok(generate_dataset(&ds)?.points)
        })
        .collect::<Result<_>>()?;
    for (t, x) in instances.iter().enumerate() {
        let corrupt = opts.corrupt_hierarchy && t == 0;
        check_instance(x, spec, t, corrupt, opts.pair_samples, &mut tally)?;
    }
    let n = spec.trials;
    props.push(PropertyResult::count(
        "cut_monotonicity",
        tally.nesting,
        format!("(level, point) nesting failures over {n} hierarchies"),
    ));
    props.push(PropertyResult::count(
        "hierarchy_structure",
        tally.structure,
        "partition, diameter and net failures".into(),
    ));
    props.push(PropertyResult::count(
        "refined_consistency",
        tally.consistency,
        "refined members farther than eps^2 2^i gamma from their base cluster".into(),
    ));
    props.push(PropertyResult::count(
        "anchor_cuts_removed",
        tally.anchor_cuts,
        "(x, F0(x)) pairs still badly cut after refinement".into(),
    ));
    props.push(PropertyResult::count(
        "partition_invariants",
        tally.invariants,
        "coverage, low-value, shared-hole and hole-count failures".into(),
    ));
    props.push(PropertyResult::count(
        "partition_separation",
        tally.separation,
        format!("{} good cross-part pairs checked", tally.pairs_checked),
    ));
    props.push(PropertyResult::count(
        "partition_consistency",
        tally.part_consistency,
        "part members farther than eps^2 rang from their provenance".into(),
    ));
    props.push(PropertyResult::count(
        "local_value_bounds",
        tally.value_bounds,
        format!("{} parts checked by the exact oracle", tally.values_checked),
    ));

    let (ratio, where_) = cut_probability_ratio(opts.cut_seeds, spec.seed, 1.0)?;
    props.push(PropertyResult::at_most(
        "cut_probability",
        ratio,
        1.0,
        format!("worst rate/bound over {} seeds, ddim 1: {where_}", opts.cut_seeds),
    ));

    let first = &instances[0];
    let dm = DistanceMatrix::from_oracle(first);
    let all: Vec<usize> = (0..dm.len()).collect();
    let f0 = approx_ufl_ids(&dm, &all)?.facility_map();
    let pairs = sample_pairs(dm.len(), opts.pair_samples, derive_seed(spec.seed, stream::SAMPLING, 0));
    let rates = cut_rates(&dm, &f0, &pairs, cfg, opts.mc_seeds, spec.seed)?;
    let worst_bad = rates.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_good = rates.iter().map(|r| r.1).fold(1.0, f64::min);
    props.push(PropertyResult::at_most(
        "badly_cut_rate",
        worst_bad,
        BADLY_CUT_K * eps * eps,
        format!(
            "max over {} pairs, {} seeds, K = {BADLY_CUT_K}",
            pairs.len(),
            opts.mc_seeds
        ),
    ));
    props.push(PropertyResult::at_least(
        "good_pair_rate",
        worst_good,
        1.0 - GOOD_PAIR_K * eps * eps,
        format!("min over {} pairs, K = {GOOD_PAIR_K}", pairs.len()),
    ));

    for (t, m) in [(0.3, 64), (0.5, 32)] {
        let rate = expansion_rate(t, m, opts.tail_seeds, spec.seed)?;
        props.push(PropertyResult::at_most(
            &format!("expansion_tail_t{t}_m{m}"),
            rate,
            TAIL_SLACK * (-t * t * m as f64 / 8.0).exp(),
            format!("{} maps, slack {TAIL_SLACK}", opts.tail_seeds),
        ));
    }
    let (t, m) = (6.0, 8);
    let rate = contraction_rate(t, m, opts.tail_seeds, spec.seed)?;
    props.push(PropertyResult::at_most(
        &format!("contraction_tail_t{t}_m{m}"),
        rate,
        TAIL_SLACK * (3.0f64 / t).powi(m as i32),
        format!("{} maps, slack {TAIL_SLACK}", opts.tail_seeds),
    ));

    if first.len() <= cfg.solver.enum_threshold {
        props.push(projection_upper_bound(&instances, spec)?);
        props.push(contraction_trend(first, spec, opts.contraction_maps)?);
    }

    let approx = approx_ufl_ids(&dm, &all)?.total;
    let size_cfg = PtasConfig {
        seed: spec.seed,
        ..cfg.clone()
    };
    let mean = mean_partition_size(first, &size_cfg, opts.size_seeds)?;
    props.push(PropertyResult::at_most(
        "partition_size",
        mean,
        8.0 * approx / cfg.kappa(),
        format!("mean parts over {} seeds; bound 8 approx / kappa", opts.size_seeds),
    ));

    let all_pass = props.iter().all(|p| p.pass);
    Ok(PropertyReport {
        instances: spec.trials,
        seed: spec.seed,
        eps,
        ddim: cfg.ddim,
        properties: props,
        all_pass,
    })
}

/// `Pr[opt(pi(X)) >= 1.5 opt(X)]` at `t = 1/2`, `m = 32`, one map per
/// instance.
fn projection_upper_bound(instances: &[PointSet], spec: &ExperimentSpec) -> Result<PropertyResult> {
    let (t, m) = (0.5, 32usize);
    let mut hits = 0usize;
    for (k, x) in instances.iter().enumerate() {
        let map = sample_map(x.dim(), m, derive_seed(spec.seed, stream::PROJECTION, k as u64))?;
        let opt = brute_force_ufl_continuous(x, &spec.ptas.solver)?;
        let projected = brute_force_ufl_continuous(&map.apply(x)?, &spec.ptas.solver)?;
        if projected >= 1.5 * opt {
            hits += 1;
        }
    }
    let trials = instances.len() as f64;
    let tm = t * t * m as f64;
    let bound = (TAIL_SLACK * 4.0 / tm * (-tm / 8.0).exp()).max(3.0 / trials);
    Ok(PropertyResult::at_most(
        "projection_upper_bound",
        hits as f64 / trials,
        bound,
        format!("t {t}, m {m}, {} instances", instances.len()),
    ))
}

/// `Pr[opt(pi(C)) <= opt(C) / (1 + eps)]` for `m` in 8, 32, 128 on one
/// instance; each step may rise by at most two standard errors.
fn contraction_trend(x: &PointSet, spec: &ExperimentSpec, maps: usize) -> Result<PropertyResult> {
    let opt = brute_force_ufl_continuous(x, &spec.ptas.solver)?;
    let mut rates = Vec::new();
    for m in [8usize, 32, 128] {
        let mut hits = 0usize;
        for s in 0..maps {
            let seed = derive_seed(spec.seed, stream::PROJECTION, (m * maps + s) as u64);
            let map = sample_map(x.dim(), m, seed)?;
            let v = brute_force_ufl_continuous(&map.apply(x)?, &spec.ptas.solver)?;
            if v <= opt / (1.0 + spec.ptas.eps) {
                hits += 1;
            }
        }
        rates.push(hits as f64 / maps as f64);
    }
    let rise = rates
        .windows(2)
        .map(|w| {
            let se = (w[0] * (1.0 - w[0]) / maps as f64).sqrt();
            w[1] - w[0] - 2.0 * se - 1.0 / maps as f64
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(PropertyResult::at_most(
        "contraction_trend",
        rise,
        0.0,
        format!("rates at m = 8, 32, 128: {rates:?}"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::datasets::DatasetSpec;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            dataset: DatasetSpec {
                n: 10,
                d: 8,
                ..DatasetSpec::default()
            },
            trials: 3,
            ..ExperimentSpec::default()
        }
    }

    fn small_opts() -> SuiteOptions {
        SuiteOptions {
            mc_seeds: 50,
            cut_seeds: 50,
            tail_seeds: 500,
            size_seeds: 5,
            pair_samples: 50,
            contraction_maps: 10,
            corrupt_hierarchy: false,
        }
    }

    #[test]
    fn suite_passes_on_small_config() {
        let report = run_property_suite(&small_spec(), &small_opts()).unwrap();
        for p in &report.properties {
            assert!(p.pass, "{p:?}");
        }
        assert!(report.all_pass);
        let bad = report.get("badly_cut_rate").unwrap();
        assert_eq!(bad.bound, 64.0 * 0.2 * 0.2);
    }

    #[test]
    fn corrupted_hierarchy_fails_monotonicity() {
        let opts = SuiteOptions {
            corrupt_hierarchy: true,
            ..small_opts()
        };
        let report = run_property_suite(&small_spec(), &opts).unwrap();
        assert!(!report.get("cut_monotonicity").unwrap().pass);
        assert!(!report.all_pass);
    }

    #[test]
    fn all_pairs_when_few() {
        assert_eq!(sample_pairs(4, 10, 0).len(), 6);
        let sampled = sample_pairs(100, 10, 0);
        assert_eq!(sampled.len(), 10);
        assert!(sampled.iter().all(|&(x, y)| x < y && y < 100));
    }

    #[test]
    fn line_instance_shape() {
        let x = line_instance();
        assert_eq!(x.len(), 109);
        assert_eq!(x.point(108), &[32768.0]);
    }
}
