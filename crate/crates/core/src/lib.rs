//! Uniform facility location on doubling subsets of Euclidean space.
//!
//! The crate bundles the pieces needed to reduce the dimension of a UFL
//! instance and to solve it approximately through a randomized metric
//! decomposition:
//!
//! - [`geometry`]: point sets, distance oracles, the UFL objective and nets.
//! - [`projection`]: Gaussian random linear maps and the target dimension.
//! - [`hierarchy`]: the randomized hierarchical decomposition and the
//!   cut / badly-cut / good-pair predicates.
//! - [`refine`]: moving points so that no pair `(x, F0(x))` is badly cut.
//! - [`partition`]: the bottom-up low-value partition and its verifiers.
//! - [`solvers`]: constant-factor UFL, Weiszfeld 1-median, k-median and
//!   brute-force oracles.
//! - [`ptas`]: the Euclidean pipeline and its discrete-metric variant.
//! - [`harness`]: dataset generators, experiments and the property suite.
//!
//! The opening cost of every facility is fixed to 1; instances with a
//! different uniform opening cost should be rescaled by its inverse.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod hierarchy;
pub mod io;
pub mod partition;
pub mod projection;
pub mod ptas;
pub mod refine;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use geometry::{dist, DistanceMatrix, DistanceOracle, PointSet, UflSolution};
