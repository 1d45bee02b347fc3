//! Seeded fixtures for the acceptance gate in `tests/acceptance.rs`.

use nalgebra::DMatrix;
use qddc::consistency::{build_polytope, DataSample, Dataset};
use qddc::lp::Polytope;
use qddc::LinearSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..=scale))
}

pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearSystem {
    let a = random_matrix(rng, n, n, 1.2);
    let b = random_matrix(rng, n, m, 1.0);
    LinearSystem::new(a, b).expect("square A and matching B")
}

/// The single point `(A, B)`, pinned by exact transitions from unit states
/// and unit inputs.
pub fn singleton_polytope(sys: &LinearSystem) -> Polytope {
    let (n, m) = (sys.n(), sys.m());
    let samples = (0..n + m)
        .map(|j| {
            let mut x = vec![0.0; n];
            let mut u = vec![0.0; m];
            let col: Vec<f64> = if j < n {
                x[j] = 1.0;
                sys.a().column(j).iter().copied().collect()
            } else {
                u[j - n] = 1.0;
                sys.b().column(j - n).iter().copied().collect()
            };
            DataSample {
                x,
                u,
                p: col.clone(),
                q: col,
            }
        })
        .collect();
    build_polytope(&Dataset::new(samples, 0.0).expect("finite samples")).expect("nonempty dataset")
}
