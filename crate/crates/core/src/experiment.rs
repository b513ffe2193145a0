//! Squared-error sweeps of the PU estimate against a reference SMI value.

use ndarray::Axis;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_pu, sample_gaussian_pu, ClassPrior, GaussianMixtureSpec, LabeledDataset};
use crate::error::{precondition, Result};
use crate::pnsmi::{estimate_smi_pn, true_smi_quadrature};
use crate::pusmi::{estimate_smi, EstimatorConfig};
use crate::rng::{self, derive_seed};

/// Which sample size the grid varies; the other one is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Positive {
        n_u: usize,
    },
    Unlabeled {
        n_p: usize,
    },
    /// Both sizes scale together: `n_p = n`, `n_u = ratio * n`.
    Joint {
        unlabeled_per_positive: usize,
    },
}

impl SweepAxis {
    pub fn sizes(self, n: usize) -> (usize, usize) {
        match self {
            SweepAxis::Positive { n_u } => (n, n_u),
            SweepAxis::Unlabeled { n_p } => (n_p, n),
            SweepAxis::Joint {
                unlabeled_per_positive,
            } => (n, n * unlabeled_per_positive),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub n: usize,
    pub n_p: usize,
    pub n_u: usize,
    pub trials: usize,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub truth: f64,
}

fn summarize(n: usize, (n_p, n_u): (usize, usize), errors: &[f64], truth: f64) -> MseRow {
    let k = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / k;
    let var = if errors.len() > 1 {
        errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    MseRow {
        n,
        n_p,
        n_u,
        trials: errors.len(),
        mse_mean: mean,
        mse_stderr: (var / k).sqrt(),
        truth,
    }
}

fn check_sweep(grid: &[usize], trials: usize) -> Result<Vec<usize>> {
    if grid.is_empty() || trials == 0 {
        return Err(precondition(
            "sweep needs a non-empty grid and at least one trial",
        ));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(sorted)
}

/// Squared error of the PU estimate on generated data against the exact SMI
/// of `spec`. Rows are sorted by `n`.
pub fn mse_sweep_gaussian(
    spec: &GaussianMixtureSpec,
    axis: SweepAxis,
    grid: &[usize],
    trials: usize,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<Vec<MseRow>> {
    let grid = check_sweep(grid, trials)?;
    let truth = true_smi_quadrature(spec)?;
    grid.iter()
        .map(|&n| {
            let sizes = axis.sizes(n);
            let errors: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let trial = derive_seed(derive_seed(seed, n as u64), t as u64);
                    let data = sample_gaussian_pu(spec, sizes.0, sizes.1, derive_seed(trial, 0))?;
                    let cfg = config.clone().with_seed(derive_seed(trial, 1));
                    let (est, _, _) = estimate_smi(&data, spec.theta_p, &cfg)?;
                    Ok((est.value - truth).powi(2))
                })
                .collect::<Result<_>>()?;
            Ok(summarize(n, sizes, &errors, truth))
        })
        .collect()
}

/// Squared error on PU subsamples of a labeled corpus. The corpus is split in
/// half: the supervised estimate on one half is the reference value, PU data
/// are drawn from the other half.
pub fn mse_sweep_labeled(
    corpus: &LabeledDataset,
    prior: ClassPrior,
    axis: SweepAxis,
    grid: &[usize],
    trials: usize,
    config: &EstimatorConfig,
    seed: u64,
) -> Result<Vec<MseRow>> {
    let grid = check_sweep(grid, trials)?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng::substream(seed, 0));
    let (held, pool) = order.split_at(corpus.len() / 2);
    let subset = |idx: &[usize]| {
        LabeledDataset::new(
            corpus.features().select(Axis(0), idx),
            idx.iter().map(|&i| corpus.labels()[i]).collect(),
        )
    };
    let (held, pool) = (subset(held)?, subset(pool)?);
    let truth = estimate_smi_pn(&held, &config.clone().with_seed(derive_seed(seed, 1)))?.0;
    grid.iter()
        .map(|&n| {
            let sizes = axis.sizes(n);
            let errors: Vec<f64> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let trial = derive_seed(derive_seed(seed, 2 + n as u64), t as u64);
                    let data = make_pu(&pool, sizes.0, sizes.1, prior, derive_seed(trial, 0))?;
                    let cfg = config.clone().with_seed(derive_seed(trial, 1));
                    let (est, _, _) = estimate_smi(&data, prior, &cfg)?;
                    Ok((est.value - truth).powi(2))
                })
                .collect::<Result<_>>()?;
            Ok(summarize(n, sizes, &errors, truth))
        })
        .collect()
}

/// Least-squares slope of `ln mse_mean` against `ln n`.
pub fn loglog_slope(rows: &[MseRow]) -> Result<f64> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.mse_mean > 0.0)) {
        return Err(precondition(
            "slope needs two or more rows with positive error",
        ));
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).ln(), r.mse_mean.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

pub fn write_mse_csv<W: std::io::Write>(rows: &[MseRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
