//! Synthetic doubling point sets: low-dimensional data isometrically embedded
//! in a high-dimensional space.

use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{euclid, PointSet};
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Uniform in a cube of side `scale`.
    Subspace,
    /// Gaussian blobs with well-separated centers.
    Clusters,
    /// A square lattice of side `scale`.
    Grid,
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subspace" => Ok(Self::Subspace),
            "clusters" => Ok(Self::Clusters),
            "grid" => Ok(Self::Grid),
            other => Err(invalid(format!("unknown dataset kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    /// Ambient dimension.
    pub d: usize,
    pub intrinsic_dim: usize,
    /// Side length of the latent cube.
    pub scale: f64,
    /// Number of blobs for [`DatasetKind::Clusters`].
    pub blobs: usize,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Subspace,
            n: 12,
            d: 64,
            intrinsic_dim: 2,
            scale: 4.0,
            blobs: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: PointSet,
    /// Coordinates before the embedding.
    pub latent: PointSet,
}

/// `k` orthonormal vectors in `R^d` from Gram-Schmidt on Gaussian vectors.
fn random_frame(d: usize, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(k);
    while frame.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &frame {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= dot * bi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            frame.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    frame
}

fn lattice(n: usize, k: usize, scale: f64) -> Vec<Vec<f64>> {
    let side = (1..).find(|s: &usize| s.pow(k as u32) >= n).unwrap();
    let step = if side > 1 { scale / (side - 1) as f64 } else { 0.0 };
    (0..n)
        .map(|mut idx| {
            let mut p = vec![0.0; k];
            for c in p.iter_mut().rev() {
                *c = (idx % side) as f64 * step;
                idx /= side;
            }
            p
        })
        .collect()
}

/// Rejection-sample `n` latent points at least `min_gap` apart.
fn sample_distinct(
    n: usize,
    min_gap: f64,
    rng: &mut ChaCha20Rng,
    mut draw: impl FnMut(&mut ChaCha20Rng) -> Vec<f64>,
) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 1000 * n + 1000 {
            return Err(invalid("could not draw distinct points"));
        }
        let p = draw(rng);
        if out.iter().all(|q| euclid(&p, q) >= min_gap) {
            out.push(p);
        }
    }
    Ok(out)
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let DatasetSpec {
        kind,
        n,
        d,
        intrinsic_dim: k,
        scale,
        blobs,
        seed,
    } = *spec;
    if n == 0 || d == 0 || k == 0 {
        return Err(invalid("n, d and intrinsic_dim must be positive"));
    }
    if k > d {
        return Err(invalid(format!("intrinsic_dim {k} exceeds d {d}")));
    }
    if !(scale > 0.0) {
        return Err(invalid("scale must be positive"));
    }
    let mut rng = rng_from_seed(seed);
    let gap = 1e-9 * scale;
    let latent = match kind {
        DatasetKind::Grid => lattice(n, k, scale),
        DatasetKind::Subspace => sample_distinct(n, gap, &mut rng, |r| {
            (0..k).map(|_| r.random_range(0.0..scale)).collect()
        })?,
        DatasetKind::Clusters => {
            if blobs == 0 {
                return Err(invalid("blobs must be positive"));
            }
            let spread = 4.0 * scale * blobs as f64;
            let centers = sample_distinct(blobs, scale, &mut rng, |r| {
                (0..k).map(|_| r.random_range(0.0..spread)).collect()
            })?;
            let sigma = 0.05 * scale;
            let mut next = 0usize;
            sample_distinct(n, gap, &mut rng, |r| {
                let c = &centers[next % blobs];
                next += 1;
                c.iter()
                    .map(|&ci| ci + sigma * r.sample::<f64, _>(StandardNormal))
                    .collect()
            })?
        }
    };
    let frame = random_frame(d, k, &mut rng);
    let embedded: Vec<Vec<f64>> = latent
        .iter()
        .map(|p| {
            let mut x = vec![0.0; d];
            for (pi, b) in p.iter().zip(&frame) {
                for (xi, bi) in x.iter_mut().zip(b) {
                    *xi += pi * bi;
                }
            }
            x
        })
        .collect();
    Ok(Dataset {
        points: PointSet::from_rows(&embedded)?,
        latent: PointSet::from_rows(&latent)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::estimate_ddim;

    #[test]
    fn deterministic() {
        let spec = DatasetSpec::default();
        assert_eq!(generate_dataset(&spec).unwrap(), generate_dataset(&spec).unwrap());
    }

    #[test]
    fn grid_is_exact_before_embedding() {
        let spec = DatasetSpec {
            kind: DatasetKind::Grid,
            n: 16,
            scale: 3.0,
            ..DatasetSpec::default()
        };
        let data = generate_dataset(&spec).unwrap();
        for i in 0..16 {
            assert_eq!(data.latent.point(i), &[(i / 4) as f64, (i % 4) as f64]);
        }
    }

    #[test]
    fn embedding_is_isometric() {
        for kind in [DatasetKind::Subspace, DatasetKind::Clusters, DatasetKind::Grid] {
            let spec = DatasetSpec {
                kind,
                n: 30,
                ..DatasetSpec::default()
            };
            let data = generate_dataset(&spec).unwrap();
            for i in 0..30 {
                for j in 0..30 {
                    let a = euclid(data.points.point(i), data.points.point(j));
                    let b = euclid(data.latent.point(i), data.latent.point(j));
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn subspace_doubling_estimate() {
        let spec = DatasetSpec {
            n: 200,
            seed: 5,
            ..DatasetSpec::default()
        };
        let data = generate_dataset(&spec).unwrap();
        let est = estimate_ddim(&data.points, 8).unwrap();
        assert!((1.0..=4.0).contains(&est), "{est}");
    }

    #[test]
    fn bad_parameters() {
        let spec = DatasetSpec {
            intrinsic_dim: 80,
            ..DatasetSpec::default()
        };
        assert!(generate_dataset(&spec).is_err());
        assert!("blob".parse::<DatasetKind>().is_err());
    }
}
