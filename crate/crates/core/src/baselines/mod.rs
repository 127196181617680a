//! Reference methods: the exhaustive oracle and two K-means baselines.

mod enumerate;
mod kmeans;

pub use enumerate::{
    brute_force, enumeration_size, for_each_rgs, restricted_growth_strings, stirling2, BruteForce, EnumerationBudget,
    Objective,
};
pub use kmeans::{kmeans, kmeans_bs_centric, kmeans_ue_centric};
