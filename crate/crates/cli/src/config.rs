//! Experiment configuration: a JSON file layered under command-line flags.

use std::path::{Path, PathBuf};

use pusmi_core::data::{
    load_labeled, make_pu, sample_gaussian_pu, ClassPrior, GaussianMixtureSpec, LabeledDataset,
    PuDataset,
};
use pusmi_core::puit::PuitConfig;
use pusmi_core::purl::PurlConfig;
use pusmi_core::pusmi::EstimatorConfig;
use pusmi_core::rng::derive_seed;
use pusmi_core::SweepAxis;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Two Gaussian classes separated along the first axis.
    Toy,
    /// Both classes share one Gaussian: features independent of labels.
    ToyNull,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Toy,
    ToyNull,
    Gaussian {
        mean_pos: Vec<f64>,
        mean_neg: Vec<f64>,
        cov_diag: Vec<f64>,
    },
}

impl From<GeneratorKind> for Generator {
    fn from(k: GeneratorKind) -> Self {
        match k {
            GeneratorKind::Toy => Generator::Toy,
            GeneratorKind::ToyNull => Generator::ToyNull,
        }
    }
}

impl Generator {
    pub fn spec(&self, prior: ClassPrior) -> Result<GaussianMixtureSpec, CliError> {
        Ok(match self {
            Generator::Toy => GaussianMixtureSpec::toy(prior),
            Generator::ToyNull => GaussianMixtureSpec::toy_null(prior),
            Generator::Gaussian {
                mean_pos,
                mean_neg,
                cov_diag,
            } => GaussianMixtureSpec::new(
                mean_pos.clone(),
                mean_neg.clone(),
                cov_diag.clone(),
                prior,
            )
            .map_err(CliError::config)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Labeled corpus (LIBSVM or CSV); PU samples are drawn from it.
    pub input: Option<PathBuf>,
    pub generator: Option<Generator>,
    pub n_p: Option<usize>,
    pub n_u: Option<usize>,
    /// Class prior of the sampled population; defaults to the estimation prior.
    pub sample_prior: Option<f64>,
    pub validation_n_p: Option<usize>,
    pub validation_n_u: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<usize>,
    pub trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axis: SweepAxis::Positive { n_u: 400 },
            grid: (1..=20).map(|k| 10 * k).collect(),
            trials: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Type2Config {
    pub n_p_grid: Vec<usize>,
    pub n_u_grid: Vec<usize>,
    pub level: f64,
    pub trials: usize,
}

impl Default for Type2Config {
    fn default() -> Self {
        Type2Config {
            n_p_grid: vec![25, 50, 100, 150, 200],
            n_u_grid: vec![400],
            level: 0.05,
            trials: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PurlToyConfig {
    pub n_p: usize,
    pub n_u: usize,
    /// Size of the labeled sample whose projections are written out.
    pub eval_n: usize,
}

impl Default for PurlToyConfig {
    fn default() -> Self {
        PurlToyConfig {
            n_p: 200,
            n_u: 400,
            eval_n: 400,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub prior: Option<f64>,
    pub data: DataConfig,
    pub estimator: EstimatorConfig,
    pub sweep: SweepConfig,
    pub purl: Option<PurlConfig>,
    pub purl_toy: PurlToyConfig,
    pub puit: PuitConfig,
    pub type2: Type2Config,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ExperimentConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn generator(&self) -> Generator {
        self.data.generator.clone().unwrap_or(Generator::Toy)
    }

    pub fn prior_or(&self, fallback: f64) -> Result<ClassPrior, CliError> {
        ClassPrior::new(self.prior.unwrap_or(fallback)).map_err(CliError::config)
    }

    pub fn corpus(&self) -> Result<Option<LabeledDataset>, CliError> {
        match &self.data.input {
            None => Ok(None),
            Some(path) => load_labeled(path)
                .map(Some)
                .map_err(|e| CliError::Config(format!("cannot load {}: {e}", path.display()))),
        }
    }

    /// Prior for a corpus: the configured value, else the positive fraction.
    pub fn corpus_prior(&self, corpus: &LabeledDataset) -> Result<ClassPrior, CliError> {
        let fraction = corpus.count(1) as f64 / corpus.len().max(1) as f64;
        self.prior_or(fraction)
    }

    pub fn gaussian_spec(&self) -> Result<GaussianMixtureSpec, CliError> {
        let theta = self.data.sample_prior.or(self.prior).unwrap_or(0.5);
        let spec = self
            .generator()
            .spec(ClassPrior::new(theta).map_err(CliError::config)?)?;
        spec.validate().map_err(CliError::config)?;
        Ok(spec)
    }

    /// The PU training sample, plus an optional validation sample, and the
    /// prior that goes with them.
    pub fn pu_data(&self) -> Result<(PuDataset, Option<PuDataset>, ClassPrior), CliError> {
        let n_p = self.data.n_p.unwrap_or(200);
        let n_u = self.data.n_u.unwrap_or(400);
        let seed = self.seed();
        let validation_sizes = match (self.data.validation_n_p, self.data.validation_n_u) {
            (Some(p), Some(u)) => Some((p, u)),
            (None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "validation needs both validation_n_p and validation_n_u".into(),
                ))
            }
        };
        match self.corpus()? {
            Some(corpus) => {
                let prior = self.corpus_prior(&corpus)?;
                let sampling = match self.data.sample_prior {
                    Some(t) => ClassPrior::new(t).map_err(CliError::config)?,
                    None => prior,
                };
                let train = make_pu(&corpus, n_p, n_u, sampling, derive_seed(seed, 100))?;
                let val = validation_sizes
                    .map(|(p, u)| make_pu(&corpus, p, u, sampling, derive_seed(seed, 101)))
                    .transpose()?;
                Ok((train, val, prior))
            }
            None => {
                let spec = self.gaussian_spec()?;
                let train = sample_gaussian_pu(&spec, n_p, n_u, derive_seed(seed, 100))?;
                let val = validation_sizes
                    .map(|(p, u)| sample_gaussian_pu(&spec, p, u, derive_seed(seed, 101)))
                    .transpose()?;
                Ok((train, val, self.prior_or(spec.theta_p.theta_p())?))
            }
        }
    }
}
