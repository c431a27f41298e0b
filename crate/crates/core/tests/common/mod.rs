//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod chem;
pub mod nn;
pub mod pipeline;
pub mod props;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use pwrules::matrix::Matrix;

pub fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect(),
    )
    .unwrap()
}

/// |a - b| relative to the larger magnitude, never dividing by less than `floor`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
