//! Mettu-Plaxton constant-factor UFL with facilities drawn from the input.
//!
//! Every point `i` gets the radius `r_i` solving
//! `sum_j max(0, r_i - d(i, j)) = 1`. Points are scanned by increasing
//! radius and `i` opens unless an open facility lies within `2 r_i`. This is
//! a 3-approximation against the best solution with facilities in the
//! input, hence a 6-approximation when facilities may lie anywhere.

use crate::error::{Error, Result};
use crate::geometry::{ufl_cost_discrete, DiscreteSolution, DistanceOracle, PointSet, UflSolution};

/// Value tester backed by [`approx_ufl_ids`].
pub struct MettuPlaxton<'a, M: DistanceOracle> {
    pub oracle: &'a M,
}

impl<M: DistanceOracle> MettuPlaxton<'_, M> {
    pub fn solve(&self, ids: &[usize]) -> Result<DiscreteSolution> {
        approx_ufl_ids(self.oracle, ids)
    }
}

fn mp_radius(sorted: &[f64]) -> f64 {
    // sorted[0] = 0 is the point itself.
    let mut prefix = 0.0;
    for (k, &d) in sorted.iter().enumerate() {
        prefix += d;
        let r = (1.0 + prefix) / (k + 1) as f64;
        match sorted.get(k + 1) {
            Some(&next) if r > next => continue,
            _ => return r,
        }
    }
    unreachable!("sorted is non-empty")
}

/// Constant-factor UFL on the points `ids` of `oracle`; facilities are ids.
pub fn approx_ufl_ids(oracle: &impl DistanceOracle, ids: &[usize]) -> Result<DiscreteSolution> {
    if ids.is_empty() {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    let mut radii: Vec<(f64, usize)> = ids
        .iter()
        .map(|&i| {
            let mut ds: Vec<f64> = ids.iter().map(|&j| oracle.distance(i, j)).collect();
            ds.sort_unstable_by(f64::total_cmp);
            (mp_radius(&ds), i)
        })
        .collect();
    radii.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut open: Vec<usize> = Vec::new();
    for &(r, i) in &radii {
        if open.iter().all(|&f| oracle.distance(i, f) > 2.0 * r) {
            open.push(i);
        }
    }
    open.sort_unstable();
    ufl_cost_discrete(oracle, ids, &open)
}

/// Constant-factor UFL on a whole point set. Facilities are input points.
pub fn approx_ufl(points: &PointSet) -> Result<UflSolution> {
    let ids: Vec<usize> = (0..points.len()).collect();
    approx_ufl_ids(points, &ids)?.to_ufl_solution(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point() {
        let s = approx_ufl(&PointSet::from_line(&[3.0])).unwrap();
        assert_eq!(s.facilities, vec![vec![3.0]]);
        assert_eq!(s.total, 1.0);
    }

    #[test]
    fn far_pair_opens_both() {
        let s = approx_ufl(&PointSet::from_line(&[0.0, 1e6])).unwrap();
        assert_eq!(s.facilities.len(), 2);
        assert_eq!(s.total, 2.0);
    }

    #[test]
    fn tight_cluster_opens_one() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 0.001).collect();
        let s = approx_ufl(&PointSet::from_line(&xs)).unwrap();
        assert_eq!(s.facilities.len(), 1);
    }

    #[test]
    fn radius_solves_equation() {
        let ds = [0.0, 0.2, 0.5, 3.0];
        let r = mp_radius(&ds);
        let lhs: f64 = ds.iter().map(|d| (r - d).max(0.0)).sum();
        assert!((lhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_subset_of_input() {
        let x = PointSet::from_rows(&[[0.0, 0.0], [0.3, 0.1], [2.0, 2.0], [2.1, 1.9], [5.0, 0.0]])
            .unwrap();
        let a = approx_ufl_ids(&x, &[0, 1, 2, 3, 4]).unwrap();
        let b = approx_ufl_ids(&x, &[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(a, b);
        assert!(a.facilities.iter().all(|f| *f < 5));
    }
}
