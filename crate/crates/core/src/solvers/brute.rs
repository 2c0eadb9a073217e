//! Exhaustive UFL oracles for small instances.

use crate::error::{Error, Result};
use crate::geometry::{DistanceOracle, PointSet};

use super::kmedian::{for_each_block, subset_median_costs};
use super::median::affine_coordinates;
use super::SolverConfig;

/// Largest instance accepted by [`brute_force_ufl_discrete`].
pub const DISCRETE_ORACLE_LIMIT: usize = 15;

/// Optimal UFL value with facilities anywhere in space, together with an
/// optimal clustering (index lists).
///
/// Computed as the cheapest set partition, each block costing one opening
/// plus its Weiszfeld 1-median cost, which equals
/// `min_k (k + med_k(points))` up to the Weiszfeld tolerance.
pub fn optimal_ufl_clustering(
    points: &PointSet,
    cfg: &SolverConfig,
) -> Result<(f64, Vec<Vec<usize>>)> {
    let n = points.len();
    if n == 0 {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    if n > cfg.enum_threshold {
        return Err(Error::OracleScaleExceeded {
            size: n,
            limit: cfg.enum_threshold,
        });
    }
    let rows: Vec<&[f64]> = points.iter().collect();
    let (coords, _, _) = affine_coordinates(&rows);
    let single = subset_median_costs(&coords, cfg)?;
    let full = (1usize << n) - 1;
    let mut best = vec![f64::INFINITY; full + 1];
    let mut pick = vec![0usize; full + 1];
    best[0] = 0.0;
    for mask in 1..=full {
        for_each_block(mask, |sub| {
            let v = 1.0 + single[sub] + best[mask ^ sub];
            if v < best[mask] {
                best[mask] = v;
                pick[mask] = sub;
            }
        });
    }
    let mut clusters = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let sub = pick[mask];
        clusters.push((0..n).filter(|i| sub >> i & 1 == 1).collect());
        mask ^= sub;
    }
    Ok((best[full], clusters))
}

/// Optimal UFL value with facilities anywhere in space.
pub fn brute_force_ufl_continuous(points: &PointSet, cfg: &SolverConfig) -> Result<f64> {
    optimal_ufl_clustering(points, cfg).map(|(v, _)| v)
}

/// Optimal UFL value and facility ids when facilities must be input points.
pub fn optimal_discrete_facilities(oracle: &impl DistanceOracle) -> Result<(f64, Vec<usize>)> {
    let n = oracle.len();
    if n == 0 {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    if n > DISCRETE_ORACLE_LIMIT {
        return Err(Error::OracleScaleExceeded {
            size: n,
            limit: DISCRETE_ORACLE_LIMIT,
        });
    }
    let full = (1usize << n) - 1;
    // nearest[mask * n + i]: distance from i to the closest facility in mask
    let mut nearest = vec![f64::INFINITY; (full + 1) * n];
    let mut best = (f64::INFINITY, 0usize);
    for mask in 1..=full {
        let high = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
        let rest = mask ^ (1 << high);
        let mut conn = 0.0;
        for i in 0..n {
            let v = nearest[rest * n + i].min(oracle.distance(i, high));
            nearest[mask * n + i] = v;
            conn += v;
        }
        let total = mask.count_ones() as f64 + conn;
        if total < best.0 {
            best = (total, mask);
        }
    }
    let facilities = (0..n).filter(|i| best.1 >> i & 1 == 1).collect();
    Ok((best.0, facilities))
}

/// Optimal UFL value when facilities must be input points.
pub fn brute_force_ufl_discrete(oracle: &impl DistanceOracle) -> Result<f64> {
    optimal_discrete_facilities(oracle).map(|(v, _)| v)
}
