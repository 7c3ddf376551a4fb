//! Seeded random sources shared by the generators and random initialization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// The generator used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

/// Column-major fill, so a matrix and the concatenation of its columns see the
/// same stream.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = normal(rng);
        }
    }
    m
}

/// Bernoulli(theta) mask times a standard normal. Both draws are always taken
/// so the stream position does not depend on the mask.
pub fn bernoulli_gaussian<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let keep = rng.random::<f64>() < theta;
    let value = normal(rng);
    if keep {
        value
    } else {
        0.0
    }
}

pub fn bernoulli_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    theta: f64,
    rng: &mut R,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = bernoulli_gaussian(theta, rng);
        }
    }
    m
}
