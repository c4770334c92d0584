//! Shared fixtures for the solver benchmarks.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hjb_core::problem::benchmarks;
use hjb_core::{ManufacturedProblem, SimplicialMesh};

/// The 2D manufactured benchmark at a given resolution.
pub fn problem_2d(controls_per_dim: usize) -> ManufacturedProblem {
    benchmarks::manufactured_2d(&[controls_per_dim, controls_per_dim]).unwrap()
}

pub fn mesh_2d(problem: &ManufacturedProblem, cells: usize) -> Arc<SimplicialMesh> {
    Arc::new(
        SimplicialMesh::uniform(problem.problem().domain().clone(), &[cells, cells])
            .unwrap(),
    )
}

/// Deterministic batch of points inside the benchmark square.
pub fn random_points(count: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)])
        .collect()
}
