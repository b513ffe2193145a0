//! Dense symmetric solves for the small ridge systems.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
}

impl Cholesky {
    /// Factorizes `a`; `None` if a non-positive pivot shows up.
    pub fn new(a: &Array2<f64>) -> Option<Self> {
        let n = a.nrows();
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut diag = a[[j, j]];
            for k in 0..j {
                diag -= l[[j, k]] * l[[j, k]];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[[j, j]] = ljj;
            for i in (j + 1)..n {
                let mut s = a[[i, j]];
                for k in 0..j {
                    s -= l[[i, k]] * l[[j, k]];
                }
                l[[i, j]] = s / ljj;
            }
        }
        Some(Cholesky { lower: l })
    }

    pub fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
        let l = &self.lower;
        let n = l.nrows();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[[i, k]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[[k, i]] * y[k];
            }
            y[i] = s / l[[i, i]];
        }
        y
    }
}

/// Factorizes `gram + lambda I`. If that fails, retries once with an extra
/// diagonal jitter of `1e-12 * trace(gram) / b`.
pub fn factor_ridge(gram: &Array2<f64>, lambda: f64) -> Result<Cholesky> {
    let b = gram.nrows();
    let mut a = gram.clone();
    for i in 0..b {
        a[[i, i]] += lambda;
    }
    if let Some(c) = Cholesky::new(&a) {
        return Ok(c);
    }
    let jitter = 1e-12 * gram.diag().sum() / b as f64;
    for i in 0..b {
        a[[i, i]] += jitter;
    }
    Cholesky::new(&a).ok_or_else(|| {
        Error::IllConditioned(format!(
            "ridge system not positive definite at lambda={lambda} even with jitter {jitter:e}; \
             try lambda > 0"
        ))
    })
}

/// Relative residual `|A x - b| / max(|b|, tiny)` for `A = gram + lambda I`.
pub fn ridge_residual(gram: &Array2<f64>, lambda: f64, x: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let r = gram.dot(x) + lambda * x - b;
    let bn = b.dot(b).sqrt().max(f64::MIN_POSITIVE);
    r.dot(&r).sqrt() / bn
}
