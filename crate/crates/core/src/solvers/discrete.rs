//! k-median with facilities restricted to a candidate set of metric ids.

use crate::error::{invalid, Error, Result};
use crate::geometry::DistanceOracle;

use super::brute::DISCRETE_ORACLE_LIMIT;
use super::SolverConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteKMedian {
    /// Facility ids, ascending; at most `k` of them.
    pub facilities: Vec<usize>,
    /// Connection cost of the clients.
    pub value: f64,
    /// `true` when every candidate subset was enumerated.
    pub certified: bool,
}

/// Connection cost of each client to each candidate, client-major.
struct CostTable {
    rows: usize,
    cols: usize,
    d: Vec<f64>,
}

impl CostTable {
    fn get(&self, client: usize, cand: usize) -> f64 {
        self.d[client * self.cols + cand]
    }

    fn value(&self, open: &[usize]) -> f64 {
        (0..self.rows)
            .map(|c| open.iter().map(|&f| self.get(c, f)).fold(f64::INFINITY, f64::min))
            .sum()
    }
}

fn enumerate(table: &CostTable, kmax: usize) -> Vec<(f64, usize)> {
    let m = table.cols;
    let full = (1usize << m) - 1;
    let mut best = vec![(f64::INFINITY, 0usize); kmax];
    let mut nearest = vec![f64::INFINITY; (full + 1) * table.rows];
    for mask in 1..=full {
        let size = mask.count_ones() as usize;
        let high = usize::BITS as usize - 1 - mask.leading_zeros() as usize;
        let rest = mask ^ (1 << high);
        let mut v = 0.0;
        for c in 0..table.rows {
            let d = nearest[rest * table.rows + c].min(table.get(c, high));
            nearest[mask * table.rows + c] = d;
            v += d;
        }
        if size <= kmax && v < best[size - 1].0 {
            best[size - 1] = (v, mask);
        }
    }
    // at most k facilities
    for k in 1..kmax {
        if best[k - 1].0 <= best[k].0 {
            best[k] = best[k - 1];
        }
    }
    best
}

impl CostTable {
    /// Add the candidate that lowers the cost most.
    fn grow(&self, open: &mut Vec<usize>) {
        let near: Vec<f64> = (0..self.rows)
            .map(|c| open.iter().map(|&f| self.get(c, f)).fold(f64::INFINITY, f64::min))
            .collect();
        let pick = (0..self.cols)
            .filter(|f| !open.contains(f))
            .map(|f| {
                let v: f64 = (0..self.rows).map(|c| near[c].min(self.get(c, f))).sum();
                (v, f)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, f)| f);
        open.extend(pick);
    }

    /// First-improvement single swaps.
    fn improve(&self, open: &mut [usize], max_swaps: usize) {
        let mut current = self.value(open);
        for _ in 0..max_swaps {
            let mut improved = false;
            'search: for pos in 0..open.len() {
                for cand in 0..self.cols {
                    if open.contains(&cand) {
                        continue;
                    }
                    let old = open[pos];
                    open[pos] = cand;
                    let v = self.value(open);
                    if v < current * (1.0 - 1e-12) {
                        current = v;
                        improved = true;
                        break 'search;
                    }
                    open[pos] = old;
                }
            }
            if !improved {
                break;
            }
        }
    }
}

fn sweep(
    oracle: &impl DistanceOracle,
    clients: &[usize],
    candidates: &[usize],
    kmax: usize,
    cfg: &SolverConfig,
    prune: bool,
) -> Result<Vec<DiscreteKMedian>> {
    if clients.is_empty() || candidates.is_empty() {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    if kmax == 0 || kmax > candidates.len() {
        return Err(invalid(format!(
            "k must lie in 1..={}, got {kmax}",
            candidates.len()
        )));
    }
    let table = CostTable {
        rows: clients.len(),
        cols: candidates.len(),
        d: clients
            .iter()
            .flat_map(|&c| candidates.iter().map(move |&f| oracle.distance(c, f)))
            .collect(),
    };
    let to_ids = |cols: &[usize]| {
        let mut ids: Vec<usize> = cols.iter().map(|&j| candidates[j]).collect();
        ids.sort_unstable();
        ids
    };
    if candidates.len() <= DISCRETE_ORACLE_LIMIT {
        return Ok(enumerate(&table, kmax)
            .into_iter()
            .map(|(value, mask)| {
                let cols: Vec<usize> = (0..table.cols).filter(|j| mask >> j & 1 == 1).collect();
                DiscreteKMedian {
                    facilities: to_ids(&cols),
                    value,
                    certified: true,
                }
            })
            .collect());
    }
    let mut open = Vec::new();
    let mut out = Vec::new();
    let mut best = f64::INFINITY;
    for k in 1..=kmax {
        table.grow(&mut open);
        table.improve(&mut open, cfg.local_search_swaps);
        let value = table.value(&open);
        out.push(DiscreteKMedian {
            facilities: to_ids(&open),
            value,
            certified: false,
        });
        best = best.min(k as f64 + value);
        if prune && (k + 1) as f64 >= best {
            break;
        }
    }
    Ok(out)
}

/// Best k-median solutions serving `clients` from facilities in
/// `candidates`, for every `k` in `1..=kmax`; entry `k - 1` holds `k`.
///
/// Up to 15 candidates every subset is enumerated, otherwise greedy seeding
/// plus single-swap local search is used, warm-started from `k - 1`.
pub fn discrete_kmedian_sweep(
    oracle: &impl DistanceOracle,
    clients: &[usize],
    candidates: &[usize],
    kmax: usize,
    cfg: &SolverConfig,
) -> Result<Vec<DiscreteKMedian>> {
    sweep(oracle, clients, candidates, kmax, cfg, false)
}

/// Like [`discrete_kmedian_sweep`], but may stop once `k` alone reaches the
/// best `k + value` seen.
pub fn discrete_kmedian_sweep_ufl(
    oracle: &impl DistanceOracle,
    clients: &[usize],
    candidates: &[usize],
    kmax: usize,
    cfg: &SolverConfig,
) -> Result<Vec<DiscreteKMedian>> {
    sweep(oracle, clients, candidates, kmax, cfg, true)
}
