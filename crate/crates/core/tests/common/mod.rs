#![allow(dead_code)]

use expen::prelude::*;
use expen::problems::gaussian;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stiefel(n: usize, p: usize, seed: u64) -> DenseMatrix {
    random_stiefel(RandomSpec::new(n, p, seed).unwrap()).unwrap()
}

pub fn normal(n: usize, p: usize, seed: u64) -> DenseMatrix {
    gaussian(&mut ChaCha8Rng::seed_from_u64(seed), n, p)
}

/// Stiefel point plus a Gaussian perturbation of Frobenius size about `radius`.
pub fn perturbed(n: usize, p: usize, seed: u64, radius: f64) -> DenseMatrix {
    let e = normal(n, p, seed ^ 0x5555);
    stiefel(n, p, seed) + e.clone() * (radius / e.norm())
}

pub fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-10.0..10.0f64, rows * cols)
        .prop_map(move |v| DenseMatrix::from_column_slice(rows, cols, &v))
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
