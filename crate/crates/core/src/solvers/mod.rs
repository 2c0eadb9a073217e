//! UFL, k-median and 1-median subroutines, plus brute-force oracles.

mod approx;
mod brute;
mod discrete;
mod kmedian;
mod median;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub use approx::{approx_ufl, approx_ufl_ids, MettuPlaxton};
pub use brute::{
    brute_force_ufl_continuous, brute_force_ufl_discrete, optimal_discrete_facilities,
    optimal_ufl_clustering, DISCRETE_ORACLE_LIMIT,
};
pub use discrete::{discrete_kmedian_sweep, discrete_kmedian_sweep_ufl, DiscreteKMedian};
pub use kmedian::{kmedian, kmedian_sweep, kmedian_sweep_ufl, KMedianResult};
pub use median::{affine_coordinates, weiszfeld_1median, MedianResult};

/// Largest input accepted by the exact partition enumeration.
pub const MAX_ENUM_THRESHOLD: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Certified approximation factor of [`approx_ufl`] against the optimum
    /// with facilities anywhere in space.
    pub alpha: f64,
    /// Stop Weiszfeld once the relative objective improvement drops below this.
    pub weiszfeld_tol: f64,
    pub weiszfeld_max_iter: usize,
    /// Inputs up to this size are solved by exact partition enumeration.
    pub enum_threshold: usize,
    /// Maximum number of improving swaps in k-median local search.
    pub local_search_swaps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 6.0,
            weiszfeld_tol: 1e-10,
            weiszfeld_max_iter: 10_000,
            enum_threshold: 12,
            local_search_swaps: 200,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 1.0) {
            return Err(invalid("alpha must be at least 1"));
        }
        if !(self.weiszfeld_tol > 0.0) || self.weiszfeld_max_iter == 0 {
            return Err(invalid("Weiszfeld tolerances must be positive"));
        }
        if self.enum_threshold > MAX_ENUM_THRESHOLD {
            return Err(invalid(format!(
                "enum_threshold must be at most {MAX_ENUM_THRESHOLD}"
            )));
        }
        Ok(())
    }
}
