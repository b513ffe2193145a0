//! Shared fixtures for the benchmarks.

use ndarray::Array2;
use pusmi_core::data::{sample_gaussian_pu, ClassPrior, GaussianMixtureSpec, PuDataset};
use pusmi_core::{select_centers, GaussianBasis};

/// PU sample from the two-dimensional toy mixture.
pub fn toy_pu(n_p: usize, n_u: usize, seed: u64) -> PuDataset {
    let spec = GaussianMixtureSpec::toy(ClassPrior::new(0.5).unwrap());
    sample_gaussian_pu(&spec, n_p, n_u, seed).unwrap()
}

pub fn toy_basis(data: &PuDataset, b: usize) -> GaussianBasis {
    let centers = select_centers(data.unlabeled(), b, 0).unwrap();
    GaussianBasis::new(centers, 1.0).unwrap()
}

/// Deterministic dense batch, values in [-1, 1].
pub fn batch(rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| ((i * 7 + j * 13) as f64).sin())
}
