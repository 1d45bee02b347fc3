#![allow(dead_code)]

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
    LinearSystem::new(a, b).unwrap()
}

/// Exact transitions from unit states and unit inputs; the polytope is the
/// single point `(A, B)`.
pub fn singleton_dataset(sys: &LinearSystem) -> Dataset {
    let (n, m) = (sys.n(), sys.m());
    let mut samples = Vec::new();
    for j in 0..n + m {
        let mut x = vec![0.0; n];
        let mut u = vec![0.0; m];
        if j < n {
            x[j] = 1.0;
        } else {
            u[j - n] = 1.0;
        }
        let col: Vec<f64> = if j < n {
            sys.a().column(j).iter().copied().collect()
        } else {
            sys.b().column(j - n).iter().copied().collect()
        };
        samples.push(DataSample {
            x,
            u,
            p: col.clone(),
            q: col,
        });
    }
    Dataset::new(samples, 0.0).unwrap()
}

pub fn singleton_polytope(sys: &LinearSystem) -> Polytope {
    build_polytope(&singleton_dataset(sys)).unwrap()
}

/// Exact transitions blurred into intervals of half-width `radius`.
pub fn blurred_dataset(sys: &LinearSystem, rng: &mut ChaCha8Rng, t: usize, radius: f64) -> Dataset {
    let (n, m) = (sys.n(), sys.m());
    let samples = (0..t)
        .map(|_| {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..=2.0)).collect();
            let u: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..=2.0)).collect();
            let next = sys.a() * nalgebra::DVector::from_column_slice(&x)
                + sys.b() * nalgebra::DVector::from_column_slice(&u);
            let shift: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
            DataSample {
                p: next.iter().zip(&shift).map(|(v, s)| v + s - radius).collect(),
                q: next.iter().zip(&shift).map(|(v, s)| v + s + radius).collect(),
                x,
                u,
            }
        })
        .collect();
    Dataset::new(samples, 0.0).unwrap()
}
