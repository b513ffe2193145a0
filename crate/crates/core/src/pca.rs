//! Principal component analysis by power iteration with deflation.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};

const MAX_ITERATIONS: usize = 10_000;
const CONVERGENCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// `k x d`, orthonormal rows ordered by decreasing variance.
    pub components: Array2<f64>,
    /// Variance along each component.
    pub variances: Array1<f64>,
    pub mean: Array1<f64>,
    /// Centred points projected on the components, `n x k`.
    pub projected: Array2<f64>,
}

impl PcaProjection {
    pub fn transform(&self, points: &Array2<f64>) -> Result<Array2<f64>> {
        if points.ncols() != self.mean.len() {
            return Err(crate::error::shape(
                "dimension differs from the fitted data",
            ));
        }
        Ok((points - &self.mean).dot(&self.components.t()))
    }
}

fn orthogonalize(v: &mut Array1<f64>, basis: &[Array1<f64>]) {
    // Twice, for numerical orthogonality.
    for _ in 0..2 {
        for b in basis {
            let c = v.dot(b);
            v.scaled_add(-c, b);
        }
    }
}

fn start_vector(dim: usize, found: &[Array1<f64>]) -> Array1<f64> {
    let mut candidates = vec![Array1::from_shape_fn(dim, |j| 1.0 + 0.1 * j as f64)];
    candidates.extend((0..dim).map(|j| {
        let mut e = Array1::zeros(dim);
        e[j] = 1.0;
        e
    }));
    candidates
        .into_iter()
        .map(|mut v| {
            orthogonalize(&mut v, found);
            v
        })
        .max_by(|a, b| a.dot(a).total_cmp(&b.dot(b)))
        .map(|v| {
            let n = v.dot(&v).sqrt();
            v / n
        })
        .unwrap()
}

/// Top `k` principal directions of `points`. The largest-magnitude entry of
/// each component is made positive.
pub fn pca_project(points: &Array2<f64>, k: usize) -> Result<PcaProjection> {
    let (n, d) = points.dim();
    if n < 2 {
        return Err(precondition("PCA needs at least two points"));
    }
    if k == 0 || k > d {
        return Err(precondition(format!(
            "cannot extract {k} components from {d} dimensions"
        )));
    }
    let mean = points.mean_axis(Axis(0)).unwrap();
    let centred = points - &mean;
    let cov = centred.t().dot(&centred) / (n as f64 - 1.0);
    let trace = cov.diag().sum();
    if !(trace > 0.0) {
        return Err(Error::Degenerate("data has zero variance".into()));
    }

    let mut found: Vec<Array1<f64>> = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    for _ in 0..k {
        let mut v = start_vector(d, &found);
        for _ in 0..MAX_ITERATIONS {
            let mut u = cov.dot(&v);
            orthogonalize(&mut u, &found);
            let norm = u.dot(&u).sqrt();
            if norm <= 1e-14 * trace {
                // The remaining variance is zero; any orthonormal direction will do.
                break;
            }
            u /= norm;
            let delta = (&u - &v).mapv(f64::abs).sum();
            v = u;
            if delta < CONVERGENCE {
                break;
            }
        }
        let pivot = v
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap();
        if pivot < 0.0 {
            v.mapv_inplace(|x| -x);
        }
        variances.push(v.dot(&cov.dot(&v)));
        found.push(v);
    }

    let mut components = Array2::zeros((k, d));
    for (mut row, v) in components.rows_mut().into_iter().zip(&found) {
        row.assign(v);
    }
    let projected = centred.dot(&components.t());
    Ok(PcaProjection {
        components,
        variances: Array1::from(variances),
        mean,
        projected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::DMatrix;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn correlated(n: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::from_seed(seed);
        let mix = array![
            [2.0, 0.3, 0.0, 0.1],
            [0.0, 1.0, 0.5, 0.0],
            [0.4, 0.0, 0.6, 0.2],
            [0.0, 0.0, 0.0, 0.2]
        ];
        let z = Array2::from_shape_simple_fn((n, 4), || StandardNormal.sample(&mut r));
        z.dot(&mix) + array![1.0, -2.0, 0.0, 3.0]
    }

    #[test]
    fn matches_symmetric_eigendecomposition() {
        let x = correlated(300, 1);
        let p = pca_project(&x, 4).unwrap();
        let c = &x - &x.mean_axis(Axis(0)).unwrap();
        let cov = c.t().dot(&c) / 299.0;
        let eig = DMatrix::from_fn(4, 4, |i, j| cov[[i, j]]).symmetric_eigen();
        let mut order: Vec<usize> = (0..4).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for (i, &j) in order.iter().enumerate() {
            assert!(
                (p.variances[i] - eig.eigenvalues[j]).abs() < 1e-9 * eig.eigenvalues[j].max(1.0)
            );
            let cos: f64 = (0..4)
                .map(|t| p.components[[i, t]] * eig.eigenvectors[(t, j)])
                .sum();
            assert!(
                (cos.abs() - 1.0).abs() < 1e-8,
                "component {i}: |cos| = {}",
                cos.abs()
            );
        }
    }

    #[test]
    fn components_orthonormal_and_projection_consistent() {
        let x = correlated(200, 2);
        let p = pca_project(&x, 3).unwrap();
        let gram = p.components.dot(&p.components.t());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
        assert!(
            (&p.transform(&x).unwrap() - &p.projected)
                .mapv(f64::abs)
                .sum()
                < 1e-9
        );
        assert!(p.variances.windows(2).into_iter().all(|w| w[0] >= w[1]));
    }

    #[test]
    fn deterministic_sign() {
        let x = correlated(100, 3);
        let neg = x.mapv(|v| -v);
        let a = pca_project(&x, 2).unwrap();
        let b = pca_project(&neg, 2).unwrap();
        assert!((&a.components - &b.components).mapv(f64::abs).sum() < 1e-8);
    }

    #[test]
    fn zero_variance_rejected() {
        let x = Array2::from_elem((5, 3), 2.0);
        assert!(matches!(pca_project(&x, 1), Err(Error::Degenerate(_))));
        assert!(pca_project(&correlated(10, 0), 5).is_err());
    }

    #[test]
    fn rank_deficient_data_still_orthonormal() {
        let x = array![[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [3.0, 3.0, 0.0]];
        let p = pca_project(&x, 3).unwrap();
        let gram = p.components.dot(&p.components.t());
        assert!((&gram - &Array2::<f64>::eye(3)).mapv(f64::abs).sum() < 1e-10);
        assert!(p.variances[1].abs() < 1e-12);
    }
}
