//! Squared-loss mutual information (SMI) from positive-unlabeled data.
//!
//! * [`pusmi`]: closed-form density-ratio fit, cross-validation and the SMI
//!   estimate computed from positive and unlabeled samples only.
//! * [`pnsmi`]: the supervised estimator and exact quadrature values used as
//!   ground truth.
//! * [`mlp`] and [`purl`]: neural representation learning that maximizes the
//!   PU estimate, plus a PCA baseline.
//! * [`puit`]: permutation independence test on PU data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mlp;
pub mod pca;
pub mod pnsmi;
pub mod puit;
pub mod purl;
pub mod pusmi;
pub mod quadrature;
pub mod rng;

pub use basis::{median_bandwidth, select_centers, GaussianBasis};
pub use data::{
    load_csv, load_labeled, load_libsvm, make_pu, sample_gaussian_labeled, sample_gaussian_pu,
    write_libsvm, ClassPrior, GaussianMixtureSpec, LabeledDataset, MinMaxScaler, PuDataset,
};
pub use error::{Error, Result};
pub use experiment::{loglog_slope, mse_sweep_gaussian, mse_sweep_labeled, MseRow, SweepAxis};
pub use mlp::{Mlp, MlpGrads, MlpSpec, Mode, SgdConfig};
pub use pca::{pca_project, PcaProjection};
pub use pnsmi::{estimate_smi_pn, fit_pn, smi_hat_pn, true_smi_quadrature, JointRatioModel};
pub use puit::{
    permutation_test, rejection_frequency, type2_experiment, NullScheme, PermTestResult,
    PuitConfig, Type2Row,
};
pub use purl::{train_purl, transform, HistoryRow, PurlConfig, PurlResult};
pub use pusmi::{
    classify, cross_validate, estimate_smi, fit_analytic, j_hat, posterior, EstimatorConfig,
    FitReport, RatioModel, SigmaGrid, SmiEstimate,
};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
