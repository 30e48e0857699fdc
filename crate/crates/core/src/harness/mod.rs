//! Seeded Monte-Carlo experiment harness: drives the decoding schemes over
//! randomly generated channels and messages, measures conditional success
//! proportions and wall-clock cost, and serializes the results.
//!
//! Reproducibility contract: a given [`ExperimentConfig`] (including its
//! `master_seed`) always produces the same report up to timing fields and
//! the timestamp, regardless of worker count. Channel matrices, messages,
//! noise and every decoder draw from disjoint substreams, so adding or
//! removing a scheme never perturbs another scheme's inputs.

mod config;
mod report;
mod run;

pub use config::{BruteForceMode, Exp5Block, ExperimentConfig, SizeFormula, DEFAULT_SEED};
pub use report::{CellResult, ExperimentReport, Provenance};
pub use run::{
    default_exp5_block, load_or_build_list, neighbor_cache_file_name, run_experiment1,
    run_experiment2, run_experiment3, run_experiment4, run_experiment5, run_observation2,
    HarnessError,
};
