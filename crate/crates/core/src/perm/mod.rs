//! Data-driven selection of permutation sets: collect frames on which the
//! default factor graph fails, record which other permutations recover them,
//! and pick the subset with the smallest joint failure.

mod dataset;
mod ga;
mod matrix;

pub use dataset::{collect_failures, FailureDataset, FailureFrame, PoolConfig};
pub use ga::{genetic_select, random_subsets, GaParams, Selection};
pub use matrix::{evaluate_pool, pool_fingerprint, ConvergenceMatrix};

use crate::bp::FactorGraphPermutation;
use crate::error::{Error, Result};
use crate::list::PermSet;

/// The default stage order rotated left by `0..list_size`.
pub fn cyclic_shift_set(default: &FactorGraphPermutation, list_size: usize) -> Result<PermSet> {
    if list_size == 0 || list_size > default.stages() {
        return Err(Error::Config(format!(
            "{list_size} cyclic shifts requested for {} stages",
            default.stages()
        )));
    }
    PermSet::new((0..list_size).map(|j| default.rotate_left(j)).collect())
}

/// Permutation set for rows of a pool.
pub fn rows_to_set(pool: &[FactorGraphPermutation], rows: &[usize]) -> Result<PermSet> {
    PermSet::new(rows.iter().map(|&r| pool[r].clone()).collect())
}
