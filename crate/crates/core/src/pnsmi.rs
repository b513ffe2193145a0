//! Supervised SMI from fully labeled samples, and exact SMI of Gaussian
//! mixtures by quadrature. Both serve as ground truth for the PU estimator.
//!
//! The joint ratio model is `g(x, y) = alpha_y' phi(x)`: one copy of the
//! Gaussian basis per class, so the ridge system splits into two `b x b`
//! blocks `(n_y / n) G + lambda I` with `G = 1/n sum_i phi(x_i) phi(x_i)'`.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::basis::{self, GaussianBasis};
use crate::data::{GaussianMixtureSpec, LabeledDataset};
use crate::error::{precondition, shape, Error, Result};
use crate::pusmi::{check_grids, choose, fold_labels, rows_to_matrix, solve_ridge, split_by_fold};
use crate::pusmi::{CvRow, EstimatorConfig, FitReport};
use crate::quadrature::{self, Tolerance};
use crate::rng;

/// Agreement required between the two quadrature routes.
pub const QUADRATURE_AGREEMENT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRatioModelDoc", into = "JointRatioModelDoc")]
pub struct JointRatioModel {
    basis: GaussianBasis,
    alpha_pos: Array1<f64>,
    alpha_neg: Array1<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointRatioModelDoc {
    pub sigma: f64,
    pub centers: Vec<Vec<f64>>,
    pub alpha_pos: Vec<f64>,
    pub alpha_neg: Vec<f64>,
}

impl From<JointRatioModel> for JointRatioModelDoc {
    fn from(m: JointRatioModel) -> Self {
        JointRatioModelDoc {
            sigma: m.basis.sigma(),
            centers: m
                .basis
                .centers()
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            alpha_pos: m.alpha_pos.to_vec(),
            alpha_neg: m.alpha_neg.to_vec(),
        }
    }
}

impl TryFrom<JointRatioModelDoc> for JointRatioModel {
    type Error = Error;

    fn try_from(doc: JointRatioModelDoc) -> Result<Self> {
        let basis = GaussianBasis::new(rows_to_matrix(&doc.centers)?, doc.sigma)?;
        JointRatioModel::new(basis, doc.alpha_pos.into(), doc.alpha_neg.into())
    }
}

impl JointRatioModel {
    pub fn new(
        basis: GaussianBasis,
        alpha_pos: Array1<f64>,
        alpha_neg: Array1<f64>,
    ) -> Result<Self> {
        if alpha_pos.len() != basis.size() || alpha_neg.len() != basis.size() {
            return Err(shape(format!(
                "weights of length {}/{} for a basis of size {}",
                alpha_pos.len(),
                alpha_neg.len(),
                basis.size()
            )));
        }
        Ok(JointRatioModel {
            basis,
            alpha_pos,
            alpha_neg,
        })
    }

    pub fn basis(&self) -> &GaussianBasis {
        &self.basis
    }

    pub fn alpha_pos(&self) -> &Array1<f64> {
        &self.alpha_pos
    }

    pub fn alpha_neg(&self) -> &Array1<f64> {
        &self.alpha_neg
    }

    /// `g(x, y)` for every row, with `y` given per row.
    pub fn eval(&self, points: &Array2<f64>, label: i8) -> Result<Array1<f64>> {
        let phi = self.basis.eval(points)?;
        Ok(phi.dot(if label > 0 {
            &self.alpha_pos
        } else {
            &self.alpha_neg
        }))
    }
}

/// Per-class blocks of the supervised system.
#[derive(Debug, Clone)]
pub struct PnMoments {
    pub h_pos: Array2<f64>,
    pub h_neg: Array2<f64>,
    pub h_vec_pos: Array1<f64>,
    pub h_vec_neg: Array1<f64>,
}

impl PnMoments {
    pub fn build(basis: &GaussianBasis, data: &LabeledDataset) -> Result<Self> {
        let n = data.len();
        let (n_pos, n_neg) = (data.count(1), data.count(-1));
        if n_pos == 0 || n_neg == 0 {
            return Err(precondition(format!(
                "supervised SMI needs both classes (n+={n_pos}, n-={n_neg})"
            )));
        }
        let phi = basis.eval(data.features())?;
        let nf = n as f64;
        let gram = phi.t().dot(&phi) / nf;
        let sum_of = |label: i8| -> Array1<f64> {
            phi.select(Axis(0), &data.indices_of(label))
                .sum_axis(Axis(0))
                / nf
        };
        Ok(PnMoments {
            h_pos: &gram * (n_pos as f64 / nf),
            h_neg: &gram * (n_neg as f64 / nf),
            h_vec_pos: sum_of(1),
            h_vec_neg: sum_of(-1),
        })
    }

    /// `J(g) = 1/2 sum_y a_y' H_y a_y - sum_y a_y' h_y`.
    pub fn objective(&self, alpha_pos: &Array1<f64>, alpha_neg: &Array1<f64>) -> f64 {
        0.5 * alpha_pos.dot(&self.h_pos.dot(alpha_pos))
            + 0.5 * alpha_neg.dot(&self.h_neg.dot(alpha_neg))
            - alpha_pos.dot(&self.h_vec_pos)
            - alpha_neg.dot(&self.h_vec_neg)
    }

    pub fn solve(&self, lambda: f64) -> Result<(Array1<f64>, Array1<f64>)> {
        Ok((
            solve_ridge(&self.h_pos, &self.h_vec_pos, lambda)?,
            solve_ridge(&self.h_neg, &self.h_vec_neg, lambda)?,
        ))
    }
}

/// Closed-form ridge fit of the joint ratio model.
pub fn fit_pn(
    data: &LabeledDataset,
    basis: &GaussianBasis,
    lambda: f64,
) -> Result<JointRatioModel> {
    let m = PnMoments::build(basis, data)?;
    let (a_pos, a_neg) = m.solve(lambda)?;
    JointRatioModel::new(basis.clone(), a_pos, a_neg)
}

/// `alpha' h - 1/2 alpha' H alpha - 1/2` on `data`.
pub fn smi_hat_pn(model: &JointRatioModel, data: &LabeledDataset) -> Result<f64> {
    if data.dim() != model.basis.dim() {
        return Err(shape(format!(
            "model expects {} features, data has {}",
            model.basis.dim(),
            data.dim()
        )));
    }
    let m = PnMoments::build(&model.basis, data)?;
    Ok(-m.objective(&model.alpha_pos, &model.alpha_neg) - 0.5)
}

/// Cross-validated supervised estimate, using the same candidate grids and
/// fold logic as the PU estimator. Folds are stratified by class.
pub fn estimate_smi_pn(
    data: &LabeledDataset,
    config: &EstimatorConfig,
) -> Result<(f64, JointRatioModel, FitReport)> {
    let (n_pos, n_neg) = (data.count(1), data.count(-1));
    let folds = config.folds;
    if n_pos < folds || n_neg < folds {
        return Err(precondition(format!(
            "{folds}-fold cross-validation needs {folds} samples per class (n+={n_pos}, n-={n_neg})"
        )));
    }
    let negatives = data.rows_with(-1);
    let positives = data.rows_with(1);
    let all = data.features();
    let sigmas = config.resolve_sigmas(all)?;
    check_grids(&sigmas, &config.lambda_grid, folds)?;

    let cv_seed = rng::derive_seed(config.seed, 1);
    let pos_folds = fold_labels(n_pos, folds, &mut rng::substream(cv_seed, 0));
    let neg_folds = fold_labels(n_neg, folds, &mut rng::substream(cv_seed, 1));
    let nl = config.lambda_grid.len();
    let mut sums = vec![0.0; sigmas.len() * nl];
    for fold in 0..folds {
        let (p_tr, p_te) = split_by_fold(&pos_folds, fold);
        let (n_tr, n_te) = split_by_fold(&neg_folds, fold);
        let join = |p: &[usize], n: &[usize]| -> Result<LabeledDataset> {
            let feats = ndarray::concatenate(
                Axis(0),
                &[
                    positives.select(Axis(0), p).view(),
                    negatives.select(Axis(0), n).view(),
                ],
            )
            .map_err(|e| shape(e.to_string()))?;
            let mut labels = vec![1i8; p.len()];
            labels.extend(std::iter::repeat_n(-1i8, n.len()));
            LabeledDataset::new(feats, labels)
        };
        let train = join(&p_tr, &n_tr)?;
        let test = join(&p_te, &n_te)?;
        let centers = basis::select_centers(
            train.features(),
            config.b_max,
            rng::derive_seed(cv_seed, fold as u64),
        )?;
        for (si, &sigma) in sigmas.iter().enumerate() {
            let basis = GaussianBasis::new(centers.clone(), sigma)?;
            let train_m = PnMoments::build(&basis, &train)?;
            let test_m = PnMoments::build(&basis, &test)?;
            for (li, &lambda) in config.lambda_grid.iter().enumerate() {
                let slot = &mut sums[si * nl + li];
                match train_m.solve(lambda) {
                    Ok((a, b)) => *slot += test_m.objective(&a, &b),
                    Err(e) if e.is_numeric() => *slot = f64::INFINITY,
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let mut cv_table = Vec::new();
    for (si, &sigma) in sigmas.iter().enumerate() {
        for (li, &lambda) in config.lambda_grid.iter().enumerate() {
            cv_table.push(CvRow {
                sigma,
                lambda,
                score: sums[si * nl + li] / folds as f64,
            });
        }
    }
    let (sigma, lambda) = choose(&cv_table)?;
    let centers = basis::select_centers(all, config.b_max, rng::derive_seed(config.seed, 2))?;
    let model = fit_pn(data, &GaussianBasis::new(centers, sigma)?, lambda)?;
    let smi = smi_hat_pn(&model, data)?;
    Ok((
        smi,
        model,
        FitReport {
            chosen_sigma: sigma,
            chosen_lambda: lambda,
            cv_table,
            final_objective: Some(-smi - 0.5),
        },
    ))
}

/// Both quadrature routes to the SMI of a Gaussian mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmiQuadrature {
    /// The definition: Pearson divergence over both class slices.
    pub joint: f64,
    /// The positive-unlabeled form using only `p(x | +1)` and `p(x)`.
    pub positive_unlabeled: f64,
}

/// For a shared diagonal covariance the class ratio depends on `x` only
/// through the log-likelihood ratio `t = log p(x|+1) - log p(x|-1)`, which
/// is `N(+D/2, D)` under the positive class and `N(-D/2, D)` under the
/// negative one, `D` being the squared Mahalanobis distance between the
/// means. Both integrals are taken over `t`.
pub fn quadrature_smi(spec: &GaussianMixtureSpec) -> Result<SmiQuadrature> {
    spec.validate()?;
    let maha: f64 = spec
        .mean_pos
        .iter()
        .zip(&spec.mean_neg)
        .zip(&spec.cov_diag)
        .map(|((a, b), c)| (a - b) * (a - b) / c)
        .sum();
    if maha == 0.0 {
        return Ok(SmiQuadrature {
            joint: 0.0,
            positive_unlabeled: 0.0,
        });
    }
    let tp = spec.theta_p.theta_p();
    let tn = spec.theta_p.theta_n();
    let sd = maha.sqrt();
    let normal = |t: f64, mean: f64| {
        let z = (t - mean) / sd;
        (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
    };
    let dens = |t: f64| {
        let pp = normal(t, 0.5 * maha);
        let pn = normal(t, -0.5 * maha);
        (pp, pn, tp * pp + tn * pn)
    };
    // (r - 1)^2 p = (q - p)^2 / p for a class-conditional density q.
    let pearson = |q: f64, p: f64| if p > 0.0 { (q - p) * (q - p) / p } else { 0.0 };
    let span = 0.5 * maha + 40f64.sqrt() * sd;
    let tol = Tolerance {
        abs: 1e-14,
        rel: 1e-12,
        max_intervals: 4000,
    };
    let joint = quadrature::integrate(
        |t| {
            let (pp, pn, p) = dens(t);
            0.5 * tp * pearson(pp, p) + 0.5 * tn * pearson(pn, p)
        },
        -span,
        span,
        tol,
    )?
    .value;
    let positive_unlabeled = quadrature::integrate(
        |t| {
            let (pp, _, p) = dens(t);
            tp / (2.0 * tn) * pearson(pp, p)
        },
        -span,
        span,
        tol,
    )?
    .value;
    Ok(SmiQuadrature {
        joint,
        positive_unlabeled,
    })
}

/// Exact SMI of the mixture. Fails if the two quadrature routes disagree by
/// more than [`QUADRATURE_AGREEMENT`] (relative).
pub fn true_smi_quadrature(spec: &GaussianMixtureSpec) -> Result<f64> {
    let q = quadrature_smi(spec)?;
    let scale = q.joint.abs().max(q.positive_unlabeled.abs()).max(1e-300);
    if (q.joint - q.positive_unlabeled).abs() > QUADRATURE_AGREEMENT * scale {
        return Err(Error::Numeric(format!(
            "quadrature routes disagree: {} vs {}",
            q.joint, q.positive_unlabeled
        )));
    }
    Ok(q.joint)
}
