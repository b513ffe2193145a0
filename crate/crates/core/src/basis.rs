//! Gaussian basis functions centred on unlabeled samples.

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, shape, Error, Result};
use crate::rng;

/// Default cap on the number of centres.
pub const DEFAULT_B_MAX: usize = 200;

/// Rows used by [`median_bandwidth`] at most.
pub const MEDIAN_SUBSAMPLE: usize = 500;

/// `phi_l(x) = exp(-|x - c_l|^2 / (2 sigma^2))` for each centre `c_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBasis {
    centers: Array2<f64>,
    sigma: f64,
}

impl GaussianBasis {
    pub fn new(centers: Array2<f64>, sigma: f64) -> Result<Self> {
        if centers.nrows() == 0 {
            return Err(precondition("basis needs at least one centre"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(precondition(format!(
                "bandwidth must be positive, got {sigma}"
            )));
        }
        Ok(GaussianBasis { centers, sigma })
    }

    pub fn centers(&self) -> &Array2<f64> {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Number of basis functions `b`.
    pub fn size(&self) -> usize {
        self.centers.nrows()
    }

    pub fn dim(&self) -> usize {
        self.centers.ncols()
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        GaussianBasis::new(self.centers.clone(), sigma)
    }

    /// Design matrix: entry `(k, l)` is `phi_l(points[k])`.
    pub fn eval(&self, points: &Array2<f64>) -> Result<Array2<f64>> {
        if points.ncols() != self.dim() {
            return Err(shape(format!(
                "points have {} features, basis centres have {}",
                points.ncols(),
                self.dim()
            )));
        }
        let scale = -1.0 / (2.0 * self.sigma * self.sigma);
        let mut out = Array2::zeros((points.nrows(), self.size()));
        for (x, mut row) in points.rows().into_iter().zip(out.rows_mut()) {
            for (c, o) in self.centers.rows().into_iter().zip(row.iter_mut()) {
                *o = (scale * sq_dist(x, c)).exp();
            }
        }
        Ok(out)
    }
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `min(b_max, nU)` rows of `unlabeled`, sampled uniformly without
/// replacement.
pub fn select_centers(unlabeled: &Array2<f64>, b_max: usize, seed: u64) -> Result<Array2<f64>> {
    if b_max == 0 {
        return Err(precondition("b_max must be at least 1"));
    }
    let n = unlabeled.nrows();
    if n == 0 {
        return Err(precondition("cannot select centres from an empty sample"));
    }
    let b = b_max.min(n);
    let mut rng = rng::from_seed(seed);
    let picked = index::sample(&mut rng, n, b).into_vec();
    Ok(unlabeled.select(Axis(0), &picked))
}

/// Median heuristic: median of the non-zero pairwise Euclidean distances over
/// at most [`MEDIAN_SUBSAMPLE`] rows. Coincident pairs are skipped, so
/// duplicating every row leaves the result unchanged.
pub fn median_bandwidth(unlabeled: &Array2<f64>, seed: u64) -> Result<f64> {
    let n = unlabeled.nrows();
    if n < 2 {
        return Err(precondition("median heuristic needs at least two rows"));
    }
    let sample = if n > MEDIAN_SUBSAMPLE {
        let mut rng = rng::from_seed(seed);
        let picked = index::sample(&mut rng, n, MEDIAN_SUBSAMPLE).into_vec();
        unlabeled.select(Axis(0), &picked)
    } else {
        unlabeled.clone()
    };
    let rows: Vec<_> = sample.rows().into_iter().collect();
    let mut dists = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let d = sq_dist(rows[i], rows[j]).sqrt();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return Err(Error::Degenerate("all sampled rows coincide".into()));
    }
    Ok(median(&mut dists))
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}
