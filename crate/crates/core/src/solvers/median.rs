//! Weiszfeld iteration for the geometric 1-median.

use crate::error::{Error, Result};
use crate::geometry::euclid;

use super::SolverConfig;

/// Points closer than this to the iterate are treated as coinciding with it.
const COINCIDE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct MedianResult {
    pub center: Vec<f64>,
    /// `sum_x dist(x, center)`.
    pub cost: f64,
    pub iterations: usize,
    /// `false` when `weiszfeld_max_iter` was hit before the tolerance.
    pub converged: bool,
    /// Objective after the start and after every iteration.
    pub trace: Vec<f64>,
}

fn objective<P: AsRef<[f64]>>(points: &[P], y: &[f64]) -> f64 {
    points.iter().map(|p| euclid(p.as_ref(), y)).sum()
}

/// Sum of unit vectors from `y` towards the points not coinciding with it,
/// and the number of points that do coincide.
fn residual<P: AsRef<[f64]>>(points: &[P], y: &[f64]) -> (Vec<f64>, usize) {
    let mut r = vec![0.0; y.len()];
    let mut coincide = 0;
    for p in points {
        let p = p.as_ref();
        let d = euclid(p, y);
        if d <= COINCIDE {
            coincide += 1;
            continue;
        }
        for (ri, (pi, yi)) in r.iter_mut().zip(p.iter().zip(y)) {
            *ri += (pi - yi) / d;
        }
    }
    (r, coincide)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Geometric median by Weiszfeld's iteration started at the centroid.
///
/// When the iterate lands on data points (multiplicity `w`), the step follows
/// Vardi and Zhang: stop if the residual `R` of the other points has
/// `|R| <= w`, otherwise step along `R`. On exit the nearest data point is
/// tested with the same optimality condition and taken if it is optimal.
pub fn weiszfeld_1median<P: AsRef<[f64]>>(points: &[P], cfg: &SolverConfig) -> Result<MedianResult> {
    let first = points
        .first()
        .ok_or(Error::TooFewPoints { need: 1, got: 0 })?
        .as_ref();
    let dim = first.len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.as_ref().len(),
        });
    }
    let n = points.len() as f64;
    let mut y = vec![0.0; dim];
    for p in points {
        for (yi, pi) in y.iter_mut().zip(p.as_ref()) {
            *yi += pi / n;
        }
    }
    let mut cost = objective(points, &y);
    let mut trace = vec![cost];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.weiszfeld_max_iter {
        iterations += 1;
        let mut num = vec![0.0; dim];
        let mut den = 0.0;
        let mut coincide = 0usize;
        for p in points {
            let p = p.as_ref();
            let d = euclid(p, &y);
            if d <= COINCIDE {
                coincide += 1;
                continue;
            }
            for (ni, pi) in num.iter_mut().zip(p) {
                *ni += pi / d;
            }
            den += 1.0 / d;
        }
        if den == 0.0 {
            // every point coincides with y
            converged = true;
            break;
        }
        let t: Vec<f64> = num.iter().map(|v| v / den).collect();
        let next = if coincide == 0 {
            t
        } else {
            let (r, _) = residual(points, &y);
            let rn = norm(&r);
            let w = coincide as f64;
            if rn <= w {
                converged = true;
                break;
            }
            let lambda = (w / rn).min(1.0);
            t.iter()
                .zip(&y)
                .map(|(ti, yi)| (1.0 - lambda) * ti + lambda * yi)
                .collect()
        };
        let next_cost = objective(points, &next);
        if next_cost > cost {
            converged = true;
            break;
        }
        let improvement = cost - next_cost;
        y = next;
        cost = next_cost;
        trace.push(cost);
        if improvement <= cfg.weiszfeld_tol * cost.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    // Snap to the nearest data point if it satisfies the optimality test.
    let nearest = points
        .iter()
        .map(|p| p.as_ref())
        .min_by(|a, b| euclid(a, &y).total_cmp(&euclid(b, &y)))
        .unwrap();
    let (r, w) = residual(points, nearest);
    if norm(&r) <= w as f64 {
        let c = objective(points, nearest);
        if c <= cost {
            y = nearest.to_vec();
            cost = c;
            if trace.last() != Some(&c) {
                trace.push(c);
            }
        }
    }

    Ok(MedianResult {
        center: y,
        cost,
        iterations,
        converged,
        trace,
    })
}

/// Coordinates of the points in an orthonormal basis of their affine hull.
///
/// Pairwise distances are preserved, and the geometric median of any subset
/// lies in the hull, so medians can be computed in at most `n - 1`
/// dimensions. Also returns the origin and basis for mapping back.
pub fn affine_coordinates<P: AsRef<[f64]>>(points: &[P]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    let Some(first) = points.first() else {
        return (Vec::new(), Vec::new(), Vec::new());
    };
    let origin = first.as_ref().to_vec();
    let scale = points
        .iter()
        .map(|p| euclid(p.as_ref(), &origin))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in points.iter().skip(1) {
        let mut v: Vec<f64> = p.as_ref().iter().zip(&origin).map(|(a, b)| a - b).collect();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= dot * bi;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-12 * scale {
            basis.push(v.into_iter().map(|x| x / nv).collect());
        }
    }
    let coords = points
        .iter()
        .map(|p| {
            let diff: Vec<f64> = p.as_ref().iter().zip(&origin).map(|(a, b)| a - b).collect();
            basis
                .iter()
                .map(|b| b.iter().zip(&diff).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect();
    (coords, origin, basis)
}

/// Map hull coordinates back to the ambient space.
pub(crate) fn from_affine(c: &[f64], origin: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut out = origin.to_vec();
    for (ci, b) in c.iter().zip(basis) {
        for (o, bi) in out.iter_mut().zip(b) {
            *o += ci * bi;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn single_point() {
        let r = weiszfeld_1median(&[vec![1.0, -2.0]], &cfg()).unwrap();
        assert_eq!(r.center, vec![1.0, -2.0]);
        assert_eq!(r.cost, 0.0);
    }

    #[test]
    fn square_corners() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let r = weiszfeld_1median(&pts, &cfg()).unwrap();
        assert!((r.center[0] - 0.5).abs() < 1e-9 && (r.center[1] - 0.5).abs() < 1e-9);
        assert!((r.cost - 2.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn collinear_odd_median() {
        let pts = [[0.0], [1.0], [5.0]];
        let r = weiszfeld_1median(&pts, &cfg()).unwrap();
        assert!((r.center[0] - 1.0).abs() < 1e-9, "{:?}", r.center);
        assert!((r.cost - 5.0).abs() < 1e-9);
    }

    #[test]
    fn dominant_point_is_optimal() {
        // Three copies at the origin outweigh two unit pulls.
        let pts = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let r = weiszfeld_1median(&pts, &cfg()).unwrap();
        assert!(r.center.iter().all(|c| c.abs() < 1e-9));
        assert!((r.cost - 2.0).abs() < 1e-9);
    }

    #[test]
    fn empty_and_mismatch() {
        let empty: [Vec<f64>; 0] = [];
        assert!(weiszfeld_1median(&empty, &cfg()).is_err());
        assert!(weiszfeld_1median(&[vec![0.0], vec![0.0, 1.0]], &cfg()).is_err());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let c = SolverConfig {
            weiszfeld_max_iter: 1,
            weiszfeld_tol: 1e-300,
            ..cfg()
        };
        let pts = [[0.0, 0.0], [3.0, 0.1], [0.5, 2.0], [4.0, 4.0]];
        let r = weiszfeld_1median(&pts, &c).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(!r.converged);
    }

    proptest! {
        #[test]
        fn objective_never_increases(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..12)) {
            let r = weiszfeld_1median(&rows, &cfg()).unwrap();
            for w in r.trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
            }
        }

        #[test]
        fn hull_coordinates_preserve_distances(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 6), 1..10)) {
            let (coords, origin, basis) = affine_coordinates(&rows);
            prop_assert!(basis.len() < rows.len().max(1));
            for i in 0..rows.len() {
                for j in 0..rows.len() {
                    let a = euclid(&rows[i], &rows[j]);
                    let b = euclid(&coords[i], &coords[j]);
                    prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
                }
                let back = from_affine(&coords[i], &origin, &basis);
                prop_assert!(euclid(&back, &rows[i]) <= 1e-9);
            }
        }
    }
}
