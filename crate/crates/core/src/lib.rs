//! Clustered cell-free network decomposition.
//!
//! A wireless network of `K` single-antenna user equipments (UEs) and `L`
//! single-antenna base stations (BSs) is modeled as a weighted bipartite
//! graph. The crate partitions that graph into disjoint joint-processing
//! subnetworks that maximize the uplink sum ergodic capacity while no
//! subnetwork holds more than `k_max` UEs.
//!
//! - [`netmodel`]: layouts, path gains, bipartite graph and Laplacian.
//! - [`capacity`]: Monte-Carlo, diagonal-approximation and Jensen-bound
//!   capacities, plus the cut objectives.
//! - [`partition`]: decompositions, decision matrices, constraint checks.
//! - [`solver_bnb`]: exact branch-and-bound over the Laplacian quadratic
//!   program, for both the full problem and the two-way bisection step.
//! - [`solver_bisect`]: hierarchical bisection (BC²F-Net).
//! - [`baselines`]: brute-force oracle and two-stage K-means baselines.
//! - [`experiment`]: configuration, sweeps, CSV output.

#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod capacity;
pub mod error;
pub mod experiment;
pub mod netmodel;
pub mod partition;
pub mod rng;
pub mod solver_bisect;
pub mod solver_bnb;

pub use error::{Error, Result};
pub use netmodel::{BipartiteGraph, ChannelModel, NetworkLayout, PathGainMatrix};
pub use partition::{optimal_m, DecisionMatrix, Decomposition, Violation};
pub use solver_bnb::{SolveReport, SolveStatus, SolverConfig};
