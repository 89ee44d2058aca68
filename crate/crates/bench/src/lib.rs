//! Fixed inputs shared by the benchmarks.

use fwbb::generate::generate_instance;
use fwbb::model::{FixedSubproblem, MeanRiskInstance, RiskWeighting, SimplexProblem};
use nalgebra::DVector;

pub const SEED: u64 = 20_240_601;

/// Deterministic vector with entries spread over roughly [-1, 2].
pub fn projection_input(dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| 0.5 + 1.5 * ((i as f64) * 1.618_034).sin())
}

pub fn instance(n: usize, integer_fraction: f64, budget_multiplier: f64) -> MeanRiskInstance {
    generate_instance(n, integer_fraction, budget_multiplier, SEED).expect("valid generator arguments")
}

/// Root relaxation of a generated continuous instance.
pub fn root_relaxation(n: usize, h: RiskWeighting) -> SimplexProblem {
    let inst = instance(n, 0.0, 1.0);
    SimplexProblem::from_subproblem(&FixedSubproblem::root(&inst), h).expect("nonempty root")
}
