//! Seeded experiments comparing projected and original optima, and the
//! approximation schemes against exact oracles.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ptas::{ptas_discrete, ptas_euclidean, PtasConfig};
use crate::rng::{derive_seed, stream};
use crate::solvers::{brute_force_ufl_continuous, brute_force_ufl_discrete};

use super::datasets::{generate_dataset, DatasetSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    /// Template; its seed is replaced per trial.
    pub dataset: DatasetSpec,
    pub trials: usize,
    /// Root seed of every random choice in the experiment.
    pub seed: u64,
    /// Allowed failure fraction.
    pub delta: f64,
    pub ptas: PtasConfig,
    /// Overrides the target dimension of the projection.
    pub target_dim: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            trials: 50,
            seed: 0,
            delta: 0.1,
            ptas: PtasConfig::default(),
            target_dim: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(invalid("delta must lie in [0,1)"));
        }
        self.ptas.validate()
    }

    fn dataset_for(&self, trial: usize) -> DatasetSpec {
        DatasetSpec {
            seed: derive_seed(self.seed, stream::DATASET, trial as u64),
            ..self.dataset.clone()
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimredRow {
    pub trial: usize,
    pub dataset_seed: u64,
    pub map_seed: u64,
    pub m: usize,
    pub opt: f64,
    pub opt_projected: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DimredReport {
    pub rows: Vec<DimredRow>,
    pub eps: f64,
    pub delta: f64,
}

impl DimredReport {
    /// `[1 - 2 eps, 1 + 2 eps]`.
    pub fn band(&self) -> (f64, f64) {
        (1.0 - 2.0 * self.eps, 1.0 + 2.0 * self.eps)
    }

    pub fn inside_fraction(&self) -> f64 {
        let (lo, hi) = self.band();
        let inside = self.rows.iter().filter(|r| r.ratio >= lo && r.ratio <= hi).count();
        inside as f64 / self.rows.len() as f64
    }

    pub fn median_ratio(&self) -> f64 {
        median(&self.rows.iter().map(|r| r.ratio).collect::<Vec<_>>())
    }

    pub fn passed(&self) -> bool {
        self.inside_fraction() >= 1.0 - self.delta
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,dataset_seed,map_seed,m,opt,opt_projected,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.trial, r.dataset_seed, r.map_seed, r.m, r.opt, r.opt_projected, r.ratio
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let (lo, hi) = self.band();
        format!(
            "trials,lo,hi,inside_fraction,median_ratio,passed\n{},{},{},{},{},{}\n",
            self.rows.len(),
            lo,
            hi,
            self.inside_fraction(),
            self.median_ratio(),
            self.passed()
        )
    }
}

/// Per trial: a fresh dataset and a fresh map; the ratio of the exact
/// optimum after projection to the exact optimum before.
pub fn run_dimred_experiment(spec: &ExperimentSpec) -> Result<DimredReport> {
    spec.validate()?;
    let m = match spec.target_dim {
        Some(m) => m,
        None => spec.ptas.target_dim()?,
    };
    let rows = (0..spec.trials)
        .map(|trial| {
            let ds = spec.dataset_for(trial);
            let data = generate_dataset(&ds)?;
            let map_seed = derive_seed(spec.seed, stream::PROJECTION, trial as u64);
            let map = crate::projection::sample_map(data.points.dim(), m, map_seed)?;
            let projected = map.apply(&data.points)?;
            let opt = brute_force_ufl_continuous(&data.points, &spec.ptas.solver)?;
            let opt_projected = brute_force_ufl_continuous(&projected, &spec.ptas.solver)?;
            Ok(DimredRow {
                trial,
                dataset_seed: ds.seed,
                map_seed,
                m,
                opt,
                opt_projected,
                ratio: opt_projected / opt,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DimredReport {
        rows,
        eps: spec.ptas.eps,
        delta: spec.delta,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PtasRow {
    pub trial: usize,
    pub dataset_seed: u64,
    pub ptas_seed: u64,
    pub n: usize,
    pub oracle: f64,
    pub ptas: f64,
    pub ratio: f64,
    pub discrete_oracle: f64,
    pub discrete_ptas: f64,
    pub discrete_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PtasReport {
    pub rows: Vec<PtasRow>,
    pub delta: f64,
}

/// Ratio treated as a success in the quality experiment.
pub const PTAS_RATIO_TARGET: f64 = 1.5;

impl PtasReport {
    pub fn within_fraction(&self) -> f64 {
        let ok = self.rows.iter().filter(|r| r.ratio <= PTAS_RATIO_TARGET).count();
        ok as f64 / self.rows.len() as f64
    }

    pub fn discrete_within_fraction(&self) -> f64 {
        let ok = self
            .rows
            .iter()
            .filter(|r| r.discrete_ratio <= PTAS_RATIO_TARGET)
            .count();
        ok as f64 / self.rows.len() as f64
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.within_fraction() >= 1.0 - self.delta
            && self.discrete_within_fraction() >= 1.0 - self.delta
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "trial,dataset_seed,ptas_seed,n,oracle,ptas,ratio,discrete_oracle,discrete_ptas,discrete_ratio\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.trial,
                r.dataset_seed,
                r.ptas_seed,
                r.n,
                r.oracle,
                r.ptas,
                r.ratio,
                r.discrete_oracle,
                r.discrete_ptas,
                r.discrete_ratio
            );
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        format!(
            "trials,within_fraction,discrete_within_fraction,max_ratio,passed\n{},{},{},{},{}\n",
            self.rows.len(),
            self.within_fraction(),
            self.discrete_within_fraction(),
            self.max_ratio(),
            self.passed()
        )
    }
}

/// Per trial: both approximation schemes against their exact oracles.
pub fn run_ptas_experiment(spec: &ExperimentSpec) -> Result<PtasReport> {
    spec.validate()?;
    let rows = (0..spec.trials)
        .map(|trial| {
            let ds = spec.dataset_for(trial);
            let data = generate_dataset(&ds)?;
            let x = &data.points;
            let cfg = PtasConfig {
                seed: derive_seed(spec.seed, stream::SAMPLING, trial as u64),
                ..spec.ptas.clone()
            };
            let oracle = brute_force_ufl_continuous(x, &cfg.solver)?;
            let ptas = ptas_euclidean(x, &cfg)?.solution.total;
            let discrete_oracle = brute_force_ufl_discrete(x)?;
            let discrete_ptas = ptas_discrete(x, &cfg)?.solution.total;
            Ok(PtasRow {
                trial,
                dataset_seed: ds.seed,
                ptas_seed: cfg.seed,
                n: x.len(),
                oracle,
                ptas,
                ratio: ptas / oracle,
                discrete_oracle,
                discrete_ptas,
                discrete_ratio: discrete_ptas / discrete_oracle,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PtasReport {
        rows,
        delta: spec.delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_ratio_is_one() {
        let spec = ExperimentSpec {
            dataset: DatasetSpec {
                n: 1,
                ..DatasetSpec::default()
            },
            trials: 3,
            ..ExperimentSpec::default()
        };
        let report = run_dimred_experiment(&spec).unwrap();
        assert!(report.rows.iter().all(|r| r.ratio == 1.0));
        assert!(report.passed());
    }

    #[test]
    fn csv_is_reproducible() {
        let spec = ExperimentSpec {
            dataset: DatasetSpec {
                n: 6,
                ..DatasetSpec::default()
            },
            trials: 2,
            target_dim: Some(16),
            ..ExperimentSpec::default()
        };
        let a = run_dimred_experiment(&spec).unwrap();
        let b = run_dimred_experiment(&spec).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_csv().lines().count(), 3);
        assert!(a.summary_csv().starts_with("trials,lo,hi"));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn zero_trials_rejected() {
        let spec = ExperimentSpec {
            trials: 0,
            ..ExperimentSpec::default()
        };
        assert!(run_ptas_experiment(&spec).is_err());
    }
}
