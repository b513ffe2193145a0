//! Squared-loss mutual information from positive and unlabeled samples.
//!
//! The density ratio `w(x) ~ p(x | y=+1) / p(x)` is fitted by minimizing
//!
//! ```text
//! J(w) = 1/(2 nU) sum_k w(xU_k)^2 - 1/nP sum_i w(xP_i)
//! ```
//!
//! over a Gaussian linear-in-parameter model `w = beta' phi`, which with an
//! L2 penalty has the closed form `beta = (H_U + lambda I)^-1 h_P`. The SMI
//! estimate is `theta_p / theta_n * (-J(w) - 1/2)`. The class prior enters
//! only as that final factor, so fitting, model selection and any comparison
//! of estimates are prior-free.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::basis::{self, GaussianBasis, DEFAULT_B_MAX};
use crate::data::{column_means, ClassPrior, PuDataset};
use crate::error::{precondition, shape, Error, Result};
use crate::linalg::{factor_ridge, ridge_residual, Cholesky};
use crate::rng;

pub const DEFAULT_LAMBDA_GRID: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];
pub const DEFAULT_SIGMA_MULTIPLIERS: [f64; 3] = [0.5, 1.0, 2.0];
pub const DEFAULT_FOLDS: usize = 5;

/// Fits whose coefficient norm exceeds this are rejected as ill-conditioned.
pub const BETA_NORM_CAP: f64 = 1e6;
/// Required relative residual of the ridge solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// `w(x) = beta' phi(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RatioModelDoc", into = "RatioModelDoc")]
pub struct RatioModel {
    basis: GaussianBasis,
    beta: Array1<f64>,
}

/// JSON layout of a [`RatioModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioModelDoc {
    pub sigma: f64,
    pub centers: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
}

impl From<RatioModel> for RatioModelDoc {
    fn from(m: RatioModel) -> Self {
        RatioModelDoc {
            sigma: m.basis.sigma(),
            centers: m
                .basis
                .centers()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            beta: m.beta.to_vec(),
        }
    }
}

impl TryFrom<RatioModelDoc> for RatioModel {
    type Error = Error;

    fn try_from(doc: RatioModelDoc) -> Result<Self> {
        let centers = rows_to_matrix(&doc.centers)?;
        RatioModel::new(
            GaussianBasis::new(centers, doc.sigma)?,
            Array1::from(doc.beta),
        )
    }
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(shape("ragged matrix rows"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(|e| shape(e.to_string()))
}

impl RatioModel {
    pub fn new(basis: GaussianBasis, beta: Array1<f64>) -> Result<Self> {
        if beta.len() != basis.size() {
            return Err(shape(format!(
                "beta has {} entries, basis has {} functions",
                beta.len(),
                basis.size()
            )));
        }
        if !beta.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric("non-finite model coefficients".into()));
        }
        Ok(RatioModel { basis, beta })
    }

    pub fn basis(&self) -> &GaussianBasis {
        &self.basis
    }

    pub fn beta(&self) -> &Array1<f64> {
        &self.beta
    }

    /// `w` at every row of `points`.
    pub fn eval(&self, points: &Array2<f64>) -> Result<Array1<f64>> {
        Ok(self.basis.eval(points)?.dot(&self.beta))
    }

    pub fn eval_one(&self, x: ArrayView1<f64>) -> Result<f64> {
        let row = x.to_owned().insert_axis(Axis(0));
        Ok(self.eval(&row)?[0])
    }
}

/// Empirical objective evaluated directly from the model's values.
pub fn j_hat(model: &RatioModel, data: &PuDataset) -> Result<f64> {
    data.ensure_nonempty()?;
    let w_u = model.eval(data.unlabeled())?;
    let w_p = model.eval(data.positives())?;
    Ok(0.5 * w_u.dot(&w_u) / data.n_u() as f64 - w_p.sum() / data.n_p() as f64)
}

/// Second moment of the basis over unlabeled data and first moment over
/// positives: `H_U = 1/nU sum phi phi'`, `h_P = 1/nP sum phi`.
#[derive(Debug, Clone)]
pub struct PuMoments {
    pub h_u: Array2<f64>,
    pub h_p: Array1<f64>,
}

impl PuMoments {
    pub fn from_design(phi_p: &Array2<f64>, phi_u: &Array2<f64>) -> Result<Self> {
        if phi_p.nrows() == 0 || phi_u.nrows() == 0 {
            return Err(precondition(
                "moments need non-empty positive and unlabeled sets",
            ));
        }
        let h_u = phi_u.t().dot(phi_u) / phi_u.nrows() as f64;
        Ok(PuMoments {
            h_u,
            h_p: column_means(phi_p),
        })
    }

    pub fn build(basis: &GaussianBasis, data: &PuDataset) -> Result<Self> {
        data.ensure_nonempty()?;
        PuMoments::from_design(
            &basis.eval(data.positives())?,
            &basis.eval(data.unlabeled())?,
        )
    }

    /// `1/2 beta' H_U beta - beta' h_P`, equal to [`j_hat`] of the model.
    pub fn objective(&self, beta: &Array1<f64>) -> f64 {
        0.5 * beta.dot(&self.h_u.dot(beta)) - beta.dot(&self.h_p)
    }

    pub fn regularized_objective(&self, beta: &Array1<f64>, lambda: f64) -> f64 {
        self.objective(beta) + 0.5 * lambda * beta.dot(beta)
    }

    pub fn solve(&self, lambda: f64) -> Result<Array1<f64>> {
        solve_ridge(&self.h_u, &self.h_p, lambda)
    }
}

/// Solves `(gram + lambda I) x = rhs` with one round of iterative refinement
/// when needed, then enforces the residual and norm limits.
pub(crate) fn solve_ridge(
    gram: &Array2<f64>,
    rhs: &Array1<f64>,
    lambda: f64,
) -> Result<Array1<f64>> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(precondition(format!("lambda must be >= 0, got {lambda}")));
    }
    let chol = factor_ridge(gram, lambda)?;
    solve_factored(&chol, gram, rhs, lambda)
}

pub(crate) fn solve_factored(
    chol: &Cholesky,
    gram: &Array2<f64>,
    rhs: &Array1<f64>,
    lambda: f64,
) -> Result<Array1<f64>> {
    let mut x = chol.solve(rhs);
    let mut res = ridge_residual(gram, lambda, &x, rhs);
    if res > RESIDUAL_TOL && res.is_finite() {
        let r = rhs - &(gram.dot(&x) + lambda * &x);
        x = x + chol.solve(&r);
        res = ridge_residual(gram, lambda, &x, rhs);
    }
    let norm = x.dot(&x).sqrt();
    if !norm.is_finite() || norm > BETA_NORM_CAP {
        return Err(Error::IllConditioned(format!(
            "coefficient norm {norm:e} exceeds {BETA_NORM_CAP:e} at lambda={lambda}"
        )));
    }
    if !(res <= RESIDUAL_TOL) {
        return Err(Error::IllConditioned(format!(
            "relative residual {res:e} at lambda={lambda}"
        )));
    }
    Ok(x)
}

/// Closed-form ridge minimizer of the empirical objective over `basis`.
pub fn fit_analytic(data: &PuDataset, basis: &GaussianBasis, lambda: f64) -> Result<RatioModel> {
    let moments = PuMoments::build(basis, data)?;
    let beta = moments.solve(lambda)?;
    RatioModel::new(basis.clone(), beta)
}

/// SMI value derived from an objective value and a class prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmiEstimate {
    pub value: f64,
    /// Set when `value < 0`; the estimate is reported unclamped.
    pub raw_negative_flag: bool,
    pub prior: ClassPrior,
    pub j_hat: f64,
}

impl SmiEstimate {
    pub fn from_objective(j_hat: f64, prior: ClassPrior) -> Self {
        let value = prior.ratio() * (-j_hat - 0.5);
        SmiEstimate {
            value,
            raw_negative_flag: value < 0.0,
            prior,
            j_hat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub sigma: f64,
    pub lambda: f64,
    /// Mean held-out objective; infinite when the fit failed on some fold.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub chosen_sigma: f64,
    pub chosen_lambda: f64,
    pub cv_table: Vec<CvRow>,
    /// Objective of the final model on all training data; filled in by
    /// [`estimate_smi`].
    pub final_objective: Option<f64>,
}

/// How the bandwidth candidates are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaGrid {
    /// Multiples of the median heuristic computed on the unlabeled set.
    MedianMultiples(Vec<f64>),
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub sigma_grid: SigmaGrid,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub b_max: usize,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            sigma_grid: SigmaGrid::MedianMultiples(DEFAULT_SIGMA_MULTIPLIERS.to_vec()),
            lambda_grid: DEFAULT_LAMBDA_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            b_max: DEFAULT_B_MAX,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Concrete bandwidth candidates for `unlabeled`.
    pub fn resolve_sigmas(&self, unlabeled: &Array2<f64>) -> Result<Vec<f64>> {
        match &self.sigma_grid {
            SigmaGrid::Fixed(s) => Ok(s.clone()),
            SigmaGrid::MedianMultiples(m) => {
                let med = basis::median_bandwidth(unlabeled, rng::derive_seed(self.seed, 0))?;
                Ok(m.iter().map(|k| k * med).collect())
            }
        }
    }
}

/// Balanced random fold labels for `n` items.
pub(crate) fn fold_labels(n: usize, folds: usize, rng: &mut rng::Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = pos % folds;
    }
    labels
}

pub(crate) fn split_by_fold(labels: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, &f) in labels.iter().enumerate() {
        if f == fold {
            test.push(i)
        } else {
            train.push(i)
        }
    }
    (train, test)
}

pub(crate) fn check_grids(sigma_grid: &[f64], lambda_grid: &[f64], folds: usize) -> Result<()> {
    if sigma_grid.is_empty() || lambda_grid.is_empty() {
        return Err(precondition(
            "bandwidth and regularization grids must be non-empty",
        ));
    }
    if folds < 2 {
        return Err(precondition("cross-validation needs at least two folds"));
    }
    if let Some(s) = sigma_grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(precondition(format!(
            "bandwidth candidate {s} is not positive"
        )));
    }
    if let Some(l) = lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return Err(precondition(format!(
            "regularization candidate {l} is negative"
        )));
    }
    Ok(())
}

/// Picks the row with the smallest score; ties go to the smaller lambda, then
/// the smaller sigma.
pub(crate) fn choose(table: &[CvRow]) -> Result<(f64, f64)> {
    table
        .iter()
        .filter(|r| r.score.is_finite())
        .min_by(|a, b| {
            a.score
                .total_cmp(&b.score)
                .then(a.lambda.total_cmp(&b.lambda))
                .then(a.sigma.total_cmp(&b.sigma))
        })
        .map(|r| (r.sigma, r.lambda))
        .ok_or_else(|| Error::IllConditioned("every cross-validation candidate failed".into()))
}

/// K-fold cross-validation of `(sigma, lambda)` scored by the held-out
/// objective. Positives and unlabeled samples are split into folds
/// independently; centres are drawn from each training fold's unlabeled part.
pub fn cross_validate(
    data: &PuDataset,
    sigma_grid: &[f64],
    lambda_grid: &[f64],
    folds: usize,
    b_max: usize,
    seed: u64,
) -> Result<FitReport> {
    check_grids(sigma_grid, lambda_grid, folds)?;
    if data.n_p() < folds || data.n_u() < folds {
        return Err(precondition(format!(
            "{folds}-fold cross-validation needs nP, nU >= {folds} (nP={}, nU={})",
            data.n_p(),
            data.n_u()
        )));
    }
    let pos_folds = fold_labels(data.n_p(), folds, &mut rng::substream(seed, 0));
    let unl_folds = fold_labels(data.n_u(), folds, &mut rng::substream(seed, 1));

    let mut sums = vec![0.0; sigma_grid.len() * lambda_grid.len()];
    for fold in 0..folds {
        let (p_train, p_test) = split_by_fold(&pos_folds, fold);
        let (u_train, u_test) = split_by_fold(&unl_folds, fold);
        let train = data.select(&p_train, &u_train);
        let test = data.select(&p_test, &u_test);
        let centers = basis::select_centers(
            train.unlabeled(),
            b_max,
            rng::derive_seed(seed, fold as u64),
        )?;
        for (si, &sigma) in sigma_grid.iter().enumerate() {
            let basis = GaussianBasis::new(centers.clone(), sigma)?;
            let train_m = PuMoments::build(&basis, &train)?;
            let test_m = PuMoments::build(&basis, &test)?;
            for (li, &lambda) in lambda_grid.iter().enumerate() {
                let slot = &mut sums[si * lambda_grid.len() + li];
                match train_m.solve(lambda) {
                    Ok(beta) => *slot += test_m.objective(&beta),
                    Err(e) if e.is_numeric() => *slot = f64::INFINITY,
                    Err(e) => return Err(e),
                }
            }
        }
    }

    let mut cv_table = Vec::with_capacity(sums.len());
    for (si, &sigma) in sigma_grid.iter().enumerate() {
        for (li, &lambda) in lambda_grid.iter().enumerate() {
            cv_table.push(CvRow {
                sigma,
                lambda,
                score: sums[si * lambda_grid.len() + li] / folds as f64,
            });
        }
    }
    let (chosen_sigma, chosen_lambda) = choose(&cv_table)?;
    Ok(FitReport {
        chosen_sigma,
        chosen_lambda,
        cv_table,
        final_objective: None,
    })
}

/// Full pipeline: bandwidth candidates, cross-validation, refit on all data
/// with centres from the whole unlabeled set, and the SMI estimate.
pub fn estimate_smi(
    data: &PuDataset,
    prior: ClassPrior,
    config: &EstimatorConfig,
) -> Result<(SmiEstimate, RatioModel, FitReport)> {
    data.ensure_nonempty()?;
    let sigmas = config.resolve_sigmas(data.unlabeled())?;
    let mut report = cross_validate(
        data,
        &sigmas,
        &config.lambda_grid,
        config.folds,
        config.b_max,
        rng::derive_seed(config.seed, 1),
    )?;
    let centers = basis::select_centers(
        data.unlabeled(),
        config.b_max,
        rng::derive_seed(config.seed, 2),
    )?;
    let basis = GaussianBasis::new(centers, report.chosen_sigma)?;
    let model = fit_analytic(data, &basis, report.chosen_lambda)?;
    let j = j_hat(&model, data)?;
    report.final_objective = Some(j);
    Ok((SmiEstimate::from_objective(j, prior), model, report))
}

/// Plug-in class posterior `theta_p * max(w(x), 0)`.
pub fn posterior(model: &RatioModel, prior: ClassPrior, x: ArrayView1<f64>) -> Result<f64> {
    Ok(prior.theta_p() * model.eval_one(x)?.max(0.0))
}

/// Positive iff the plug-in posterior exceeds 1/2.
pub fn classify(model: &RatioModel, prior: ClassPrior, x: ArrayView1<f64>) -> Result<bool> {
    Ok(posterior(model, prior, x)? > 0.5)
}

/// A factorized ridge system over a fixed unlabeled design. Re-fitting with
/// a different positive set only costs a column mean and two triangular
/// solves.
#[derive(Debug, Clone)]
pub(crate) struct FrozenSystem {
    pub phi_u: Array2<f64>,
    moments_u: Array2<f64>,
    chol: Cholesky,
    lambda: f64,
}

impl FrozenSystem {
    pub fn new(basis: &GaussianBasis, unlabeled: &Array2<f64>, lambda: f64) -> Result<Self> {
        if unlabeled.nrows() == 0 {
            return Err(precondition("empty unlabeled set"));
        }
        let phi_u = basis.eval(unlabeled)?;
        let moments_u = phi_u.t().dot(&phi_u) / phi_u.nrows() as f64;
        let chol = factor_ridge(&moments_u, lambda)?;
        Ok(FrozenSystem {
            phi_u,
            moments_u,
            chol,
            lambda,
        })
    }

    /// Objective of the refit model when the positives are given through
    /// their mean feature vector.
    pub fn objective_for(&self, h_p: &Array1<f64>) -> Result<f64> {
        let beta = solve_factored(&self.chol, &self.moments_u, h_p, self.lambda)?;
        Ok(0.5 * beta.dot(&self.moments_u.dot(&beta)) - beta.dot(h_p))
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use crate::data::{sample_gaussian_pu, GaussianMixtureSpec};
    use ndarray::array;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn half() -> ClassPrior {
        ClassPrior::new(0.5).unwrap()
    }

    fn random_pu(n_p: usize, n_u: usize, d: usize, seed: u64) -> PuDataset {
        let mut rng = rng::from_seed(seed);
        let mut draw = |n: usize, shift: f64| {
            Array2::from_shape_simple_fn((n, d), || {
                let z: f64 = StandardNormal.sample(&mut rng);
                shift + z
            })
        };
        let p = draw(n_p, 0.7);
        let u = draw(n_u, 0.0);
        PuDataset::new(p, u).unwrap()
    }

    #[test]
    fn constant_model_objective() {
        let data = random_pu(13, 21, 2, 0);
        assert!((j_hat(&constant_model(2, 1.0), &data).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(j_hat(&constant_model(2, 0.0), &data).unwrap(), 0.0);
    }

    #[test]
    fn j_hat_matches_naive_summation() {
        let data = random_pu(17, 29, 3, 1);
        let centers = data.unlabeled().select(Axis(0), &[0, 3, 5, 8]);
        let basis = GaussianBasis::new(centers.clone(), 0.9).unwrap();
        let beta = array![0.3, -1.2, 2.0, 0.5];
        let model = RatioModel::new(basis, beta.clone()).unwrap();
        let w = |x: ArrayView1<f64>| -> f64 {
            let mut acc = 0.0;
            for l in 0..4 {
                let mut d2 = 0.0;
                for j in 0..3 {
                    d2 += (x[j] - centers[[l, j]]).powi(2);
                }
                acc += beta[l] * (-d2 / (2.0 * 0.81)).exp();
            }
            acc
        };
        let mut su = 0.0;
        for row in data.unlabeled().rows() {
            su += w(row).powi(2);
        }
        let mut sp = 0.0;
        for row in data.positives().rows() {
            sp += w(row);
        }
        let want = su / (2.0 * 29.0) - sp / 17.0;
        assert!((j_hat(&model, &data).unwrap() - want).abs() < 1e-12);
        let moments = PuMoments::build(model.basis(), &data).unwrap();
        assert!((moments.objective(model.beta()) - want).abs() < 1e-12);
    }

    #[test]
    fn constant_basis_closed_forms() {
        let data = random_pu(10, 10, 2, 2);
        let basis = constant_basis(2);
        let m0 = fit_analytic(&data, &basis, 0.0).unwrap();
        assert!((m0.beta()[0] - 1.0).abs() < 1e-15);
        let j = j_hat(&m0, &data).unwrap();
        assert!((j + 0.5).abs() < 1e-15);
        for theta in [0.2, 0.5, 0.9] {
            let est = SmiEstimate::from_objective(j, ClassPrior::new(theta).unwrap());
            assert!(est.value.abs() < 1e-14);
        }
        let m1 = fit_analytic(&data, &basis, 1.0).unwrap();
        assert!((m1.beta()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn analytic_fit_matches_gradient_oracle() {
        let data = random_pu(40, 40, 2, 3);
        let centers = basis::select_centers(data.unlabeled(), 10, 4).unwrap();
        let basis = GaussianBasis::new(centers, 1.0).unwrap();
        let model = fit_analytic(&data, &basis, 0.1).unwrap();
        let moments = PuMoments::build(&basis, &data).unwrap();
        let oracle = gradient_oracle(&moments, 0.1, BETA_NORM_CAP);
        let diff = model.beta() - &oracle;
        assert!(diff.dot(&diff).sqrt() < 1e-6);
    }

    #[test]
    fn fitted_coefficients_are_optimal_under_perturbation() {
        let data = random_pu(30, 50, 2, 5);
        let basis = GaussianBasis::new(basis::select_centers(data.unlabeled(), 8, 1).unwrap(), 0.8)
            .unwrap();
        let lambda = 0.05;
        let model = fit_analytic(&data, &basis, lambda).unwrap();
        let moments = PuMoments::build(&basis, &data).unwrap();
        let best = moments.regularized_objective(model.beta(), lambda);
        let mut rng = rng::from_seed(77);
        for _ in 0..100 {
            let dir: Array1<f64> = (0..8).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r: f64 = rng.random();
            let delta = &dir * (r / dir.dot(&dir).sqrt());
            let other = model.beta() + &delta;
            assert!(best <= moments.regularized_objective(&other, lambda) + 1e-9);
        }
    }

    #[test]
    fn unregularized_optimum_identity() {
        let data = random_pu(60, 120, 2, 6);
        let basis = GaussianBasis::new(basis::select_centers(data.unlabeled(), 5, 2).unwrap(), 1.5)
            .unwrap();
        let model = fit_analytic(&data, &basis, 0.0).unwrap();
        let m = PuMoments::build(&basis, &data).unwrap();
        let beta = model.beta();
        let quad = beta.dot(&m.h_u.dot(beta));
        let lin = beta.dot(&m.h_p);
        assert!((quad - lin).abs() < 1e-8 * lin.abs().max(1.0));
        assert!((j_hat(&model, &data).unwrap() + 0.5 * lin).abs() < 1e-8);
    }

    #[test]
    fn negative_lambda_rejected() {
        let data = random_pu(5, 5, 1, 7);
        assert!(matches!(
            fit_analytic(&data, &constant_basis(1), -1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn exploding_coefficients_rejected() {
        // Unlabeled mass sits far from the second centre, positives sit on it.
        let u = array![[0.0], [0.1], [-0.1]];
        let p = array![[40.0], [40.1]];
        let data = PuDataset::new(p, u).unwrap();
        let basis = GaussianBasis::new(array![[0.0], [40.0]], 1.0).unwrap();
        assert!(matches!(
            fit_analytic(&data, &basis, 0.0),
            Err(Error::IllConditioned(_))
        ));
        assert!(fit_analytic(&data, &basis, 0.1).is_ok());
    }

    #[test]
    fn cross_validation_single_candidate() {
        let data = random_pu(20, 40, 2, 8);
        let r = cross_validate(&data, &[1.0], &[0.1], 5, 50, 3).unwrap();
        assert_eq!(r.cv_table.len(), 1);
        assert_eq!((r.chosen_sigma, r.chosen_lambda), (1.0, 0.1));
    }

    #[test]
    fn cross_validation_duplicate_candidates_score_identically() {
        let data = random_pu(20, 40, 2, 9);
        let r = cross_validate(&data, &[0.7, 0.7], &[0.1, 0.1, 1.0], 4, 50, 3).unwrap();
        let t = &r.cv_table;
        assert_eq!(t[0].score, t[1].score);
        assert_eq!(t[0].score, t[3].score);
        assert_eq!(t[2].score, t[5].score);
    }

    #[test]
    fn cross_validation_preconditions() {
        let data = random_pu(3, 40, 2, 10);
        assert!(cross_validate(&data, &[], &[0.1], 2, 10, 0).is_err());
        assert!(cross_validate(&data, &[1.0], &[], 2, 10, 0).is_err());
        assert!(cross_validate(&data, &[1.0], &[0.1], 1, 10, 0).is_err());
        assert!(cross_validate(&data, &[1.0], &[0.1], 5, 10, 0).is_err());
    }

    #[test]
    fn tie_break_prefers_small_lambda_then_sigma() {
        let rows = [
            CvRow {
                sigma: 2.0,
                lambda: 0.1,
                score: -1.0,
            },
            CvRow {
                sigma: 1.0,
                lambda: 1.0,
                score: -1.0,
            },
            CvRow {
                sigma: 3.0,
                lambda: 0.1,
                score: -1.0,
            },
            CvRow {
                sigma: 0.5,
                lambda: 0.1,
                score: -0.5,
            },
        ];
        assert_eq!(choose(&rows).unwrap(), (2.0, 0.1));
    }

    #[test]
    fn toy_cross_validation_is_reproducible() {
        let spec = GaussianMixtureSpec::toy(half());
        let data = sample_gaussian_pu(&spec, 200, 400, 1).unwrap();
        let sigmas = EstimatorConfig::default()
            .resolve_sigmas(data.unlabeled())
            .unwrap();
        let grid = [1e-3, 1e-1, 10.0];
        let a = cross_validate(&data, &sigmas, &grid, 5, 200, 4).unwrap();
        let b = cross_validate(&data, &sigmas, &grid, 5, 200, 4).unwrap();
        assert_eq!(a, b);
        assert!(a.chosen_lambda > 0.0 && grid.contains(&a.chosen_lambda));
        let best = a
            .cv_table
            .iter()
            .map(|r| r.score)
            .fold(f64::INFINITY, f64::min);
        let chosen = a
            .cv_table
            .iter()
            .find(|r| r.sigma == a.chosen_sigma && r.lambda == a.chosen_lambda)
            .unwrap();
        assert_eq!(chosen.score, best);
    }

    #[test]
    fn estimate_with_balanced_prior_is_negated_objective() {
        let spec = GaussianMixtureSpec::toy(half());
        let data = sample_gaussian_pu(&spec, 100, 200, 2).unwrap();
        let (est, model, report) =
            estimate_smi(&data, half(), &EstimatorConfig::default()).unwrap();
        assert_eq!(est.value, -est.j_hat - 0.5);
        assert_eq!(report.final_objective, Some(est.j_hat));
        assert_eq!(est.j_hat, j_hat(&model, &data).unwrap());
        assert!(est.value > 0.0);
    }

    #[test]
    fn estimate_scales_with_prior_ratio_only() {
        let spec = GaussianMixtureSpec::toy(half());
        let data = sample_gaussian_pu(&spec, 60, 120, 3).unwrap();
        let cfg = EstimatorConfig::default().with_seed(5);
        let (a, ma, ra) = estimate_smi(&data, ClassPrior::new(0.5).unwrap(), &cfg).unwrap();
        let (b, mb, rb) = estimate_smi(&data, ClassPrior::new(0.7).unwrap(), &cfg).unwrap();
        assert_eq!(a.j_hat, b.j_hat);
        assert_eq!(ma, mb);
        assert_eq!(ra, rb);
        assert_eq!(
            b.value,
            ClassPrior::new(0.7).unwrap().ratio() * (-b.j_hat - 0.5)
        );
        assert!((b.value - (0.7 / 0.3) * (-b.j_hat - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn negative_estimates_flagged_not_clamped() {
        let est = SmiEstimate::from_objective(-0.4, half());
        assert!(est.raw_negative_flag);
        assert!((est.value + 0.1).abs() < 1e-15);
    }

    #[test]
    fn posterior_plug_in() {
        let x = array![0.0, 0.0];
        let m2 = constant_model(2, 2.0);
        assert_eq!(posterior(&m2, half(), x.view()).unwrap(), 1.0);
        assert!(classify(&m2, half(), x.view()).unwrap());
        let m1 = constant_model(2, 1.0);
        assert_eq!(posterior(&m1, half(), x.view()).unwrap(), 0.5);
        assert!(!classify(&m1, half(), x.view()).unwrap());
        let mneg = constant_model(2, -0.3);
        assert_eq!(posterior(&mneg, half(), x.view()).unwrap(), 0.0);
        assert!(!classify(&mneg, half(), x.view()).unwrap());
    }

    #[test]
    fn model_json_layout() {
        let model = RatioModel::new(
            GaussianBasis::new(array![[1.0, 2.0], [3.0, 4.0]], 0.5).unwrap(),
            array![0.25, -1.0],
        )
        .unwrap();
        let json = serde_json::to_value(&model).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"sigma": 0.5, "centers": [[1.0, 2.0], [3.0, 4.0]], "beta": [0.25, -1.0]})
        );
        let back: RatioModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, model);
        let bad = serde_json::json!({"sigma": 0.5, "centers": [[1.0]], "beta": [1.0, 2.0]});
        assert!(serde_json::from_value::<RatioModel>(bad).is_err());
    }

    #[test]
    fn frozen_system_matches_fresh_fit() {
        let data = random_pu(25, 60, 2, 11);
        let basis =
            GaussianBasis::new(basis::select_centers(data.unlabeled(), 12, 0).unwrap(), 1.1)
                .unwrap();
        let frozen = FrozenSystem::new(&basis, data.unlabeled(), 0.05).unwrap();
        let h_p = column_means(&basis.eval(data.positives()).unwrap());
        let model = fit_analytic(&data, &basis, 0.05).unwrap();
        let want = j_hat(&model, &data).unwrap();
        assert!((frozen.objective_for(&h_p).unwrap() - want).abs() < 1e-12);
    }
}
