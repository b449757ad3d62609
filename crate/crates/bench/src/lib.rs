//! Shared inputs for the benchmarks.

use spfa::simgen::{build_model_error_population, draw_sample, rng_from_seed};
use spfa::{ModelError, Population, PopulationSpec, SymMatrix};

/// Population of the sample study with `q` factors and five indicators each.
pub fn population(q: usize, model_error: ModelError) -> Population {
    build_model_error_population(&PopulationSpec::new(q, 5 * q, 0.45, 0.75).with_model_error(model_error, 11))
        .expect("feasible benchmark population")
}

pub fn sample_matrix(q: usize, n: usize) -> (Population, SymMatrix) {
    let pop = population(q, ModelError::Moderate);
    let s = draw_sample(&pop, n, &mut rng_from_seed(3)).expect("sample");
    (pop, s)
}
