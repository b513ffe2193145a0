//! Permutation independence test between features and labels from PU data.
//!
//! Under independence the positives and the unlabeled rows share one
//! distribution, so the default null draws `n_p` rows of the pooled sample as
//! positives and treats the rest as unlabeled. The alternative null keeps the
//! unlabeled set whole and labels its rows positive with probability equal to
//! the class prior; its pseudo-positives overlap the unlabeled set, which
//! narrows the null distribution and makes that variant anti-conservative.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{select_centers, GaussianBasis};
use crate::data::{sample_gaussian_pu, ClassPrior, GaussianMixtureSpec, PuDataset};
use crate::error::{precondition, Error, Result};
use crate::pusmi::{
    cross_validate, estimate_smi, solve_ridge, EstimatorConfig, FrozenSystem, SmiEstimate,
};
use crate::rng::{self, derive_seed};

pub const MIN_PERMUTATIONS: usize = 19;
pub const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullScheme {
    /// Relabel the pooled sample, keeping `n_p` positives.
    #[default]
    PooledPermutation,
    /// Bernoulli(prior) labels on the unlabeled rows only.
    RandomLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PuitConfig {
    pub b_count: usize,
    pub estimator: EstimatorConfig,
    /// Re-run cross-validation in every round instead of reusing the
    /// bandwidth, regularization and centres of the observed fit.
    pub recv_per_round: bool,
    pub scheme: NullScheme,
}

impl Default for PuitConfig {
    fn default() -> Self {
        PuitConfig {
            b_count: 1000,
            estimator: EstimatorConfig::default(),
            recv_per_round: false,
            scheme: NullScheme::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermTestResult {
    pub observed: f64,
    pub permuted: Vec<f64>,
    pub p_value: f64,
    pub b_count: usize,
    pub prior_used: ClassPrior,
}

/// Add-one permutation p-value.
pub fn p_value(observed: f64, permuted: &[f64]) -> f64 {
    let exceed = permuted.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (permuted.len() + 1) as f64
}

/// `n_p` distinct indices out of `0..n`, in increasing order.
fn pooled_positives(n: usize, n_p: usize, stream: &mut rng::Rng) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(stream, n, n_p).into_vec();
    picked.sort_unstable();
    picked
}

/// Random labels with at least one positive; indices of the positives.
fn pseudo_positives(n_u: usize, prior: ClassPrior, stream: &mut rng::Rng) -> Result<Vec<usize>> {
    for _ in 0..=MAX_REDRAWS {
        let picked: Vec<usize> = (0..n_u)
            .filter(|_| stream.random_bool(prior.theta_p()))
            .collect();
        if !picked.is_empty() {
            return Ok(picked);
        }
    }
    Err(Error::Degenerate(format!(
        "random labels produced no positives in {} draws",
        MAX_REDRAWS + 1
    )))
}

pub fn permutation_test(
    data: &PuDataset,
    prior: ClassPrior,
    config: &PuitConfig,
    seed: u64,
) -> Result<PermTestResult> {
    if config.b_count < MIN_PERMUTATIONS {
        return Err(precondition(format!(
            "at least {MIN_PERMUTATIONS} permutations are needed, got {}",
            config.b_count
        )));
    }
    let estimator = config.estimator.clone().with_seed(derive_seed(seed, 0));
    let label_seed = derive_seed(seed, 1);

    let rounds = (0..config.b_count).into_par_iter();
    let (observed, permuted): (f64, Vec<f64>) = match (config.scheme, config.recv_per_round) {
        (NullScheme::PooledPermutation, true) => {
            let observed = estimate_smi(data, prior, &estimator)?.0.value;
            let pooled = concatenate![Axis(0), *data.positives(), *data.unlabeled()];
            let permuted = rounds
                .map(|round| {
                    let mut stream = rng::substream(label_seed, round as u64);
                    let picked = pooled_positives(pooled.nrows(), data.n_p(), &mut stream);
                    let pseudo = split_pooled(&pooled, &picked)?;
                    let cfg = estimator
                        .clone()
                        .with_seed(derive_seed(seed, 2 + round as u64));
                    Ok(estimate_smi(&pseudo, prior, &cfg)?.0.value)
                })
                .collect::<Result<_>>()?;
            (observed, permuted)
        }
        (NullScheme::PooledPermutation, false) => {
            // Hyperparameters and centres depend on the pooled sample only, so
            // the statistic is a fixed function of the labelling.
            let pooled = concatenate![Axis(0), *data.positives(), *data.unlabeled()];
            let mut stream = rng::substream(derive_seed(seed, 2), 0);
            let tuning = split_pooled(
                &pooled,
                &pooled_positives(pooled.nrows(), data.n_p(), &mut stream),
            )?;
            let sigmas = estimator.resolve_sigmas(&pooled)?;
            let tuned = cross_validate(
                &tuning,
                &sigmas,
                &estimator.lambda_grid,
                estimator.folds,
                estimator.b_max,
                derive_seed(seed, 3),
            )?;
            let centers = select_centers(&pooled, estimator.b_max, derive_seed(seed, 4))?;
            let phi = GaussianBasis::new(centers, tuned.chosen_sigma)?.eval(&pooled)?;
            let gram = phi.t().dot(&phi);
            let (n_p, n_u) = (data.n_p() as f64, data.n_u() as f64);
            let statistic = |picked: &[usize]| -> Result<f64> {
                let phi_p = phi.select(Axis(0), picked);
                let h_p = phi_p.sum_axis(Axis(0)) / n_p;
                let h_u = (&gram - &phi_p.t().dot(&phi_p)) / n_u;
                let beta = solve_ridge(&h_u, &h_p, tuned.chosen_lambda)?;
                let j = 0.5 * beta.dot(&h_u.dot(&beta)) - beta.dot(&h_p);
                Ok(SmiEstimate::from_objective(j, prior).value)
            };
            let actual: Vec<usize> = (0..data.n_p()).collect();
            let permuted = rounds
                .map(|round| {
                    let mut stream = rng::substream(label_seed, round as u64);
                    statistic(&pooled_positives(pooled.nrows(), data.n_p(), &mut stream))
                })
                .collect::<Result<_>>()?;
            (statistic(&actual)?, permuted)
        }
        (NullScheme::RandomLabels, true) => {
            let observed = estimate_smi(data, prior, &estimator)?.0.value;
            let permuted = rounds
                .map(|round| {
                    let mut stream = rng::substream(label_seed, round as u64);
                    let picked = pseudo_positives(data.n_u(), prior, &mut stream)?;
                    let pseudo = PuDataset::new(
                        data.unlabeled().select(Axis(0), &picked),
                        data.unlabeled().clone(),
                    )?;
                    let cfg = estimator
                        .clone()
                        .with_seed(derive_seed(seed, 2 + round as u64));
                    Ok(estimate_smi(&pseudo, prior, &cfg)?.0.value)
                })
                .collect::<Result<_>>()?;
            (observed, permuted)
        }
        (NullScheme::RandomLabels, false) => {
            let (observed, model, report) = estimate_smi(data, prior, &estimator)?;
            let basis: &GaussianBasis = model.basis();
            let frozen = FrozenSystem::new(basis, data.unlabeled(), report.chosen_lambda)?;
            let permuted = rounds
                .map(|round| {
                    let mut stream = rng::substream(label_seed, round as u64);
                    let picked = pseudo_positives(data.n_u(), prior, &mut stream)?;
                    let mut h_p = Array1::<f64>::zeros(basis.size());
                    for &i in &picked {
                        h_p += &frozen.phi_u.row(i);
                    }
                    h_p /= picked.len() as f64;
                    let j = frozen.objective_for(&h_p)?;
                    Ok(SmiEstimate::from_objective(j, prior).value)
                })
                .collect::<Result<_>>()?;
            (observed.value, permuted)
        }
    };

    Ok(PermTestResult {
        observed,
        p_value: p_value(observed, &permuted),
        permuted,
        b_count: config.b_count,
        prior_used: prior,
    })
}

/// Rows at `picked` become positives, the others unlabeled.
fn split_pooled(pooled: &Array2<f64>, picked: &[usize]) -> Result<PuDataset> {
    let mut is_pos = vec![false; pooled.nrows()];
    picked.iter().for_each(|&i| is_pos[i] = true);
    let rest: Vec<usize> = (0..pooled.nrows()).filter(|&i| !is_pos[i]).collect();
    PuDataset::new(
        pooled.select(Axis(0), picked),
        pooled.select(Axis(0), &rest),
    )
}

/// Fraction of `trials` independent datasets on which the test rejects at
/// `level`.
#[allow(clippy::too_many_arguments)]
pub fn rejection_frequency(
    spec: &GaussianMixtureSpec,
    n_p: usize,
    n_u: usize,
    level: f64,
    trials: usize,
    config: &PuitConfig,
    seed: u64,
) -> Result<f64> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(precondition(format!(
            "level must lie in (0, 1], got {level}"
        )));
    }
    if trials == 0 {
        return Err(precondition("at least one trial is required"));
    }
    let prior = spec.theta_p;
    let rejections: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = derive_seed(seed, t as u64);
            let data = sample_gaussian_pu(spec, n_p, n_u, derive_seed(trial_seed, 0))?;
            let r = permutation_test(&data, prior, config, derive_seed(trial_seed, 1))?;
            Ok(r.p_value <= level)
        })
        .collect::<Result<_>>()?;
    Ok(rejections.iter().filter(|&&r| r).count() as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type2Row {
    pub n_p: usize,
    pub n_u: usize,
    pub level: f64,
    pub trials: usize,
    pub type2_freq: f64,
}

/// Type-II error frequency (failures to reject) over every `(n_p, n_u)` pair
/// of the two grids.
pub fn type2_experiment(
    spec: &GaussianMixtureSpec,
    n_p_grid: &[usize],
    n_u_grid: &[usize],
    level: f64,
    trials: usize,
    config: &PuitConfig,
    seed: u64,
) -> Result<Vec<Type2Row>> {
    if n_p_grid.is_empty() || n_u_grid.is_empty() {
        return Err(precondition("sample size grids must be non-empty"));
    }
    let mut rows = Vec::with_capacity(n_p_grid.len() * n_u_grid.len());
    for (i, &n_p) in n_p_grid.iter().enumerate() {
        for (j, &n_u) in n_u_grid.iter().enumerate() {
            let cell_seed = derive_seed(seed, (i * n_u_grid.len() + j) as u64);
            let reject = rejection_frequency(spec, n_p, n_u, level, trials, config, cell_seed)?;
            rows.push(Type2Row {
                n_p,
                n_u,
                level,
                trials,
                type2_freq: 1.0 - reject,
            });
        }
    }
    Ok(rows)
}

pub fn write_type2_csv<W: std::io::Write>(rows: &[Type2Row], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
