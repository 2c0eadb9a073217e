//! Gaussian random linear maps `x -> G x / sqrt(m)`.
//!
//! The matrix entries are drawn from `ChaCha20Rng::seed_from_u64(seed)`
//! through the ziggurat standard-normal sampler of `rand_distr`, row by row.
//! The seed therefore fully determines the map, which is why the serialized
//! form stores only `(m, d, seed)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::geometry::PointSet;
use crate::rng::rng_from_seed;

pub const MAP_MAGIC: &[u8; 4] = b"RLMG";

#[derive(Clone, Debug, PartialEq)]
pub struct RandomLinearMap {
    m: usize,
    d: usize,
    seed: u64,
    /// Row-major `m x d` Gaussian matrix, not yet scaled.
    gaussian: Vec<f64>,
}

/// Sample a random linear map from `R^d` to `R^m`.
pub fn sample_map(d: usize, m: usize, seed: u64) -> Result<RandomLinearMap> {
    if d == 0 || m == 0 {
        return Err(invalid("map dimensions must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let gaussian = (0..m * d).map(|_| rng.sample(StandardNormal)).collect();
    Ok(RandomLinearMap { m, d, seed, gaussian })
}

impl RandomLinearMap {
    pub fn target_dim(&self) -> usize {
        self.m
    }

    pub fn source_dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Entry `(row, col)` of the unscaled Gaussian matrix.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.gaussian[row * self.d + col]
    }

    /// Image of a single vector.
    pub fn map_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        let scale = 1.0 / (self.m as f64).sqrt();
        Ok(self
            .gaussian
            .chunks_exact(self.d)
            .map(|row| scale * row.iter().zip(x).map(|(g, v)| g * v).sum::<f64>())
            .collect())
    }

    /// Image of every point; ids are preserved.
    pub fn apply(&self, points: &PointSet) -> Result<PointSet> {
        if points.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: points.dim(),
            });
        }
        let mut coords = Vec::with_capacity(points.len() * self.m);
        for p in points.iter() {
            coords.extend(self.map_point(p)?);
        }
        PointSet::new(self.m, coords)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20);
        out.extend_from_slice(MAP_MAGIC);
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        out.extend_from_slice(&(self.d as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out
    }

    /// Rebuild a map from its serialized header; the matrix is regenerated.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != 20 || &bytes[..4] != MAP_MAGIC {
            return Err(Error::Parse("not an RLMG map record".into()));
        }
        let m = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        sample_map(d, m, seed)
    }
}

/// Convenience wrapper for [`RandomLinearMap::apply`].
pub fn apply(map: &RandomLinearMap, points: &PointSet) -> Result<PointSet> {
    map.apply(points)
}

/// Relative slack under which a value just above an integer is treated as
/// that integer before taking the ceiling.
const CEIL_SNAP: f64 = 1e-6;

/// `ceil(x)`, ignoring excess below `CEIL_SNAP` relative.
pub(crate) fn snapped_ceil(x: f64) -> f64 {
    let f = x.floor();
    if x - f <= CEIL_SNAP * x.abs().max(1.0) {
        f
    } else {
        f + 1.0
    }
}

/// Target dimension `ceil(c3 * eps^-2 * (log2 tau + log2(1/eps)))`, at least 1.
pub fn target_dim(eps: f64, tau: f64, c3: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(tau >= 2.0) {
        return Err(invalid(format!("tau must be at least 2, got {tau}")));
    }
    if !(c3 > 0.0) {
        return Err(invalid("c3 must be positive"));
    }
    let m = c3 / (eps * eps) * (tau.log2() + (1.0 / eps).log2());
    Ok(snapped_ceil(m).max(1.0) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deterministic_in_seed() {
        assert_eq!(sample_map(3, 2, 7).unwrap(), sample_map(3, 2, 7).unwrap());
        assert_ne!(sample_map(3, 2, 7).unwrap(), sample_map(3, 2, 8).unwrap());
    }

    #[test]
    fn scalar_map() {
        let map = sample_map(1, 1, 11).unwrap();
        let g = map.entry(0, 0);
        assert_eq!(map.map_point(&[2.5]).unwrap(), vec![2.5 * g]);
    }

    #[test]
    fn rejects_zero_dimensions_and_mismatch() {
        assert!(sample_map(0, 2, 1).is_err());
        assert!(sample_map(2, 0, 1).is_err());
        let map = sample_map(3, 2, 1).unwrap();
        assert!(map.apply(&PointSet::from_line(&[1.0])).is_err());
    }

    #[test]
    fn zero_maps_to_zero() {
        let map = sample_map(4, 3, 5).unwrap();
        assert_eq!(map.map_point(&[0.0; 4]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn target_dim_examples() {
        assert_eq!(target_dim(0.5, 16.0, 1.0).unwrap(), 20);
        assert_eq!(target_dim(1.0 - 1e-9, 2.0, 1.0).unwrap(), 1);
        assert_eq!(target_dim(0.25, 256.0, 2.0).unwrap(), 320);
        assert!(target_dim(0.0, 16.0, 1.0).is_err());
        assert!(target_dim(1.0, 16.0, 1.0).is_err());
        assert!(target_dim(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn serialization_regenerates_matrix() {
        let map = sample_map(5, 3, 99).unwrap();
        let bytes = map.to_bytes();
        assert_eq!(&bytes[..4], b"RLMG");
        assert_eq!(RandomLinearMap::from_bytes(&bytes).unwrap(), map);
        assert!(RandomLinearMap::from_bytes(&bytes[..19]).is_err());
    }

    #[test]
    fn squared_norm_is_one_in_expectation() {
        let trials = 10_000;
        let mean = (0..trials)
            .map(|s| {
                let y = sample_map(4, 8, s).unwrap().map_point(&[1.0, 0.0, 0.0, 0.0]).unwrap();
                y.iter().map(|v| v * v).sum::<f64>()
            })
            .sum::<f64>()
            / trials as f64;
        assert!((mean - 1.0).abs() <= 0.05, "mean {mean}");
    }

    #[test]
    fn expansion_tail_at_half() {
        // Pr[| |pi x| - 1 | > 0.5] <= 4 exp(-t^2 m / 8) with m = 64.
        let trials = 2000;
        let bad = (0..trials)
            .filter(|&s| {
                let y = sample_map(2, 64, s).unwrap().map_point(&[0.6, 0.8]).unwrap();
                let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                !(0.5..=1.5).contains(&n)
            })
            .count();
        let bound = 4.0 * (-0.25f64 * 64.0 / 8.0).exp();
        assert!((bad as f64 / trials as f64) <= bound);
    }

    proptest! {
        #[test]
        fn map_is_linear(
            seed in 0u64..1000,
            x in prop::collection::vec(-10.0f64..10.0, 5),
            y in prop::collection::vec(-10.0f64..10.0, 5),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let map = sample_map(5, 4, seed).unwrap();
            let combo: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let lhs = map.map_point(&combo).unwrap();
            let px = map.map_point(&x).unwrap();
            let py = map.map_point(&y).unwrap();
            for i in 0..4 {
                let rhs = a * px[i] + b * py[i];
                let scale = (a * px[i]).abs() + (b * py[i]).abs() + 1.0;
                prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * scale * 10.0);
            }
        }
    }
}
