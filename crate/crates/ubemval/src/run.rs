//! Parallel evaluation of an experiment plan.

use rayon::prelude::*;
use ubemval_core::harness::{CellOutput, ExperimentResult, Plan};

/// Evaluates every cell on `jobs` worker threads (0 = one per core). The
/// result does not depend on `jobs`.
pub fn run_plan(plan: &Plan, jobs: usize) -> Result<ExperimentResult, rayon::ThreadPoolBuildError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let outputs: Vec<CellOutput> = pool.install(|| plan.cells.par_iter().map(|&c| plan.run_cell(c)).collect());
    Ok(plan.assemble(outputs))
}
