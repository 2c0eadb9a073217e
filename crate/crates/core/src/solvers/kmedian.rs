//! Euclidean k-median: exact partition enumeration for small inputs, local
//! search over data-point centers otherwise.

use crate::error::{invalid, Error, Result};
use crate::geometry::euclid;

use super::median::{affine_coordinates, from_affine, weiszfeld_1median};
use super::SolverConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct KMedianResult {
    /// Indices into the input slice, one list per center.
    pub clusters: Vec<Vec<usize>>,
    pub centers: Vec<Vec<f64>>,
    /// Connection cost `sum_x dist(x, nearest center)`.
    pub value: f64,
    /// `true` for the exact enumeration path.
    pub certified: bool,
}

/// 1-median cost of every subset of `rows`, indexed by bitmask.
pub(crate) fn subset_median_costs(rows: &[Vec<f64>], cfg: &SolverConfig) -> Result<Vec<f64>> {
    let n = rows.len();
    let mut costs = vec![0.0; 1 << n];
    let mut members: Vec<&[f64]> = Vec::with_capacity(n);
    for (mask, cost) in costs.iter_mut().enumerate().skip(1) {
        members.clear();
        members.extend((0..n).filter(|i| mask >> i & 1 == 1).map(|i| rows[i].as_slice()));
        *cost = match members.len() {
            1 => 0.0,
            2 => euclid(members[0], members[1]),
            _ => weiszfeld_1median(&members, cfg)?.cost,
        };
    }
    Ok(costs)
}

/// Calls `f(sub)` for every submask of `mask` containing its lowest bit.
#[inline]
pub(crate) fn for_each_block(mask: usize, mut f: impl FnMut(usize)) {
    let low = mask & mask.wrapping_neg();
    let rest = mask ^ low;
    let mut s = rest;
    loop {
        f(s | low);
        if s == 0 {
            break;
        }
        s = (s - 1) & rest;
    }
}

fn masks_to_clusters(blocks: &[usize]) -> Vec<Vec<usize>> {
    blocks
        .iter()
        .map(|&b| (0..usize::BITS as usize).filter(|i| b >> i & 1 == 1).collect())
        .collect()
}

fn check_input<P: AsRef<[f64]>>(points: &[P], k: usize) -> Result<()> {
    if points.is_empty() {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    if k == 0 || k > points.len() {
        return Err(invalid(format!(
            "k must lie in 1..={}, got {k}",
            points.len()
        )));
    }
    let dim = points[0].as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.as_ref().len(),
        });
    }
    Ok(())
}

/// Exact k-median values for every `k <= kmax` by dynamic programming over
/// set partitions. `best[k][mask]` is the cheapest split of `mask` into at
/// most `k` clusters.
fn exact_sweep<P: AsRef<[f64]>>(
    points: &[P],
    kmax: usize,
    cfg: &SolverConfig,
) -> Result<Vec<KMedianResult>> {
    let n = points.len();
    let (rows, origin, basis) = affine_coordinates(points);
    let single = subset_median_costs(&rows, cfg)?;
    let full = (1usize << n) - 1;
    let mut best = vec![single.clone()];
    let mut choice: Vec<Vec<usize>> = vec![(0..=full).collect()];
    for k in 2..=kmax {
        let prev = &best[k - 2];
        let mut cur = prev.clone();
        let mut pick: Vec<usize> = (0..=full).collect();
        for mask in 1..=full {
            for_each_block(mask, |sub| {
                if sub != mask {
                    let v = single[sub] + prev[mask ^ sub];
                    if v < cur[mask] {
                        cur[mask] = v;
                        pick[mask] = sub;
                    }
                }
            });
        }
        best.push(cur);
        choice.push(pick);
    }

    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let mut blocks = Vec::new();
        let mut mask = full;
        let mut level = k;
        while mask != 0 {
            // Walk down while the smaller budget is just as good.
            while level > 1 && best[level - 2][mask] <= best[level - 1][mask] {
                level -= 1;
            }
            let sub = choice[level - 1][mask];
            blocks.push(sub);
            mask ^= sub;
            level = level.saturating_sub(1).max(1);
        }
        let clusters = masks_to_clusters(&blocks);
        let centers = clusters
            .iter()
            .map(|c| {
                let sub: Vec<&[f64]> = c.iter().map(|&i| rows[i].as_slice()).collect();
                weiszfeld_1median(&sub, cfg).map(|m| from_affine(&m.center, &origin, &basis))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(KMedianResult {
            clusters,
            centers,
            value: best[k - 1][full],
            certified: true,
        });
    }
    Ok(out)
}

fn assign(points: &[Vec<f64>], centers: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let labels = points
        .iter()
        .map(|p| {
            let (j, d) = crate::geometry::nearest(p, centers);
            total += d;
            j
        })
        .collect();
    (labels, total)
}

/// Single-swap local search over data-point centers, with each point's
/// nearest and second-nearest open center cached.
struct SwapSearch {
    n: usize,
    dm: Vec<f64>,
}

impl SwapSearch {
    fn new(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut dm = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = euclid(&rows[i], &rows[j]);
                dm[i * n + j] = d;
                dm[j * n + i] = d;
            }
        }
        Self { n, dm }
    }

    fn d(&self, i: usize, j: usize) -> f64 {
        self.dm[i * self.n + j]
    }

    /// Per point: (position of nearest center, its distance, second distance).
    fn closest(&self, centers: &[usize]) -> Vec<(usize, f64, f64)> {
        (0..self.n)
            .map(|i| {
                let mut best = (0, f64::INFINITY, f64::INFINITY);
                for (pos, &c) in centers.iter().enumerate() {
                    let d = self.d(i, c);
                    if d < best.1 {
                        best = (pos, d, best.1);
                    } else if d < best.2 {
                        best.2 = d;
                    }
                }
                best
            })
            .collect()
    }

    /// Add the center that lowers the cost most.
    fn grow(&self, centers: &mut Vec<usize>) {
        let near: Vec<f64> = if centers.is_empty() {
            vec![f64::INFINITY; self.n]
        } else {
            self.closest(centers).iter().map(|c| c.1).collect()
        };
        let pick = (0..self.n)
            .filter(|c| !centers.contains(c))
            .map(|c| {
                let v: f64 = (0..self.n).map(|i| near[i].min(self.d(i, c))).sum();
                (v, c)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, c)| c);
        centers.extend(pick);
    }

    fn improve(&self, centers: &mut [usize], max_swaps: usize) {
        let mut cache = self.closest(centers);
        let mut current: f64 = cache.iter().map(|c| c.1).sum();
        for _ in 0..max_swaps {
            let mut found = None;
            'search: for pos in 0..centers.len() {
                for cand in 0..self.n {
                    if centers.contains(&cand) {
                        continue;
                    }
                    let v: f64 = cache
                        .iter()
                        .enumerate()
                        .map(|(i, &(p, d1, d2))| {
                            let keep = if p == pos { d2 } else { d1 };
                            keep.min(self.d(i, cand))
                        })
                        .sum();
                    if v < current * (1.0 - 1e-12) {
                        found = Some((pos, cand, v));
                        break 'search;
                    }
                }
            }
            let Some((pos, cand, v)) = found else { break };
            centers[pos] = cand;
            current = v;
            cache = self.closest(centers);
        }
    }
}

/// Move each center to the Weiszfeld median of its cluster and reassign,
/// while that lowers the cost.
fn recenter(rows: &[Vec<f64>], seeds: &[usize], cfg: &SolverConfig) -> Result<KMedianResult> {
    let n = rows.len();
    let mut centers: Vec<Vec<f64>> = seeds.iter().map(|&c| rows[c].clone()).collect();
    let (mut labels, mut value) = assign(rows, &centers);
    for _ in 0..20 {
        let mut next = centers.clone();
        for (j, center) in next.iter_mut().enumerate() {
            let members: Vec<&[f64]> = (0..n)
                .filter(|&i| labels[i] == j)
                .map(|i| rows[i].as_slice())
                .collect();
            if !members.is_empty() {
                *center = weiszfeld_1median(&members, cfg)?.center;
            }
        }
        let (l, v) = assign(rows, &next);
        if v < value * (1.0 - 1e-12) {
            centers = next;
            labels = l;
            value = v;
        } else {
            break;
        }
    }
    let mut clusters = vec![Vec::new(); centers.len()];
    for (i, &l) in labels.iter().enumerate() {
        clusters[l].push(i);
    }
    let keep: Vec<usize> = (0..centers.len()).filter(|&j| !clusters[j].is_empty()).collect();
    Ok(KMedianResult {
        clusters: keep.iter().map(|&j| clusters[j].clone()).collect(),
        centers: keep.iter().map(|&j| centers[j].clone()).collect(),
        value,
        certified: false,
    })
}

/// Local-search solutions for `k = 1, 2, ...`, each warm-started from the
/// previous centers plus one greedy addition. Stops after `kmax`, or once
/// `stop` returns `true` for the latest result.
fn local_search_path<P: AsRef<[f64]>>(
    points: &[P],
    kmax: usize,
    cfg: &SolverConfig,
    mut stop: impl FnMut(usize, &KMedianResult) -> bool,
) -> Result<Vec<KMedianResult>> {
    let rows: Vec<Vec<f64>> = points.iter().map(|p| p.as_ref().to_vec()).collect();
    let search = SwapSearch::new(&rows);
    let mut centers = Vec::new();
    let mut out = Vec::new();
    for k in 1..=kmax {
        search.grow(&mut centers);
        search.improve(&mut centers, cfg.local_search_swaps);
        let r = recenter(&rows, &centers, cfg)?;
        let done = stop(k, &r);
        out.push(r);
        if done {
            break;
        }
    }
    Ok(out)
}

/// k-median of `points` with centers anywhere in space.
///
/// Inputs of at most `cfg.enum_threshold` points are solved exactly over
/// all partitions into at most `k` clusters (each priced by Weiszfeld), so
/// the result is a `(1 + eps_w)` approximation with `eps_w` set by the
/// Weiszfeld tolerance. Larger inputs use local search and come back with
/// `certified == false`. `eps` is the accuracy the caller asks for and must
/// lie in `(0, 1)`.
pub fn kmedian<P: AsRef<[f64]>>(
    points: &[P],
    k: usize,
    eps: f64,
    cfg: &SolverConfig,
) -> Result<KMedianResult> {
    check_input(points, k)?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0,1), got {eps}")));
    }
    let mut all = kmedian_sweep(points, k, cfg)?;
    Ok(all.pop().unwrap())
}

/// [`kmedian`] for every `k` in `1..=kmax`; entry `k - 1` holds `k`.
pub fn kmedian_sweep<P: AsRef<[f64]>>(
    points: &[P],
    kmax: usize,
    cfg: &SolverConfig,
) -> Result<Vec<KMedianResult>> {
    check_input(points, kmax)?;
    if points.len() <= cfg.enum_threshold {
        exact_sweep(points, kmax, cfg)
    } else {
        local_search_path(points, kmax, cfg, |_, _| false)
    }
}

/// Like [`kmedian_sweep`], but meant for minimizing `k + value`: the sweep
/// may stop as soon as `k` alone reaches the best `k + value` seen, since no
/// larger `k` can do better.
pub fn kmedian_sweep_ufl<P: AsRef<[f64]>>(
    points: &[P],
    kmax: usize,
    cfg: &SolverConfig,
) -> Result<Vec<KMedianResult>> {
    check_input(points, kmax)?;
    if points.len() <= cfg.enum_threshold {
        return exact_sweep(points, kmax, cfg);
    }
    let mut best = f64::INFINITY;
    local_search_path(points, kmax, cfg, |k, r| {
        best = best.min(k as f64 + r.value);
        (k + 1) as f64 >= best
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rows(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..4.0)).collect())
            .collect()
    }

    #[test]
    fn k_equals_n_is_free() {
        let rows = random_rows(6, 2, 1);
        let r = kmedian(&rows, 6, 0.1, &SolverConfig::default()).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert_eq!(r.clusters.len(), 6);
    }

    #[test]
    fn k_one_is_the_one_median() {
        let cfg = SolverConfig::default();
        let rows = random_rows(7, 3, 2);
        let r = kmedian(&rows, 1, 0.1, &cfg).unwrap();
        let m = weiszfeld_1median(&rows, &cfg).unwrap();
        assert!((r.value - m.cost).abs() <= 1e-8 * m.cost);
        assert_eq!(r.clusters, vec![(0..7).collect::<Vec<_>>()]);
    }

    #[test]
    fn k_out_of_range() {
        let rows = random_rows(3, 2, 3);
        let cfg = SolverConfig::default();
        assert!(kmedian(&rows, 4, 0.1, &cfg).is_err());
        assert!(kmedian(&rows, 0, 0.1, &cfg).is_err());
    }

    #[test]
    fn enumeration_beats_local_search() {
        let exact = SolverConfig::default();
        let heuristic = SolverConfig {
            enum_threshold: 0,
            ..SolverConfig::default()
        };
        for seed in 0..10 {
            let rows = random_rows(8, 2, 100 + seed);
            let a = kmedian(&rows, 2, 0.1, &exact).unwrap();
            let b = kmedian(&rows, 2, 0.1, &heuristic).unwrap();
            assert!(a.certified && !b.certified);
            assert!(a.value >= 0.0 && b.value >= 0.0);
            assert!(a.value <= b.value * (1.0 + 1e-9), "{} > {}", a.value, b.value);
        }
    }

    #[test]
    fn sweep_is_monotone_and_consistent() {
        let cfg = SolverConfig::default();
        let rows = random_rows(9, 2, 7);
        let sweep = kmedian_sweep(&rows, 9, &cfg).unwrap();
        for w in sweep.windows(2) {
            assert!(w[1].value <= w[0].value);
        }
        for (k, r) in sweep.iter().enumerate() {
            assert!(r.clusters.len() <= k + 1);
            let mut all: Vec<usize> = r.clusters.concat();
            all.sort_unstable();
            assert_eq!(all, (0..9).collect::<Vec<_>>());
            let recomputed: f64 = r
                .clusters
                .iter()
                .zip(&r.centers)
                .map(|(c, f)| c.iter().map(|&i| euclid(&rows[i], f)).sum::<f64>())
                .sum();
            assert!((recomputed - r.value).abs() <= 1e-7 * (1.0 + r.value));
        }
    }
}
