//! Representation learning by maximizing the PU SMI estimate.
//!
//! A map `v: R^d -> R^m` and a ratio head `w: R^m -> R` are trained by
//! alternating mini-batch SGD on `J = 1/2 mean_U (w∘v)^2 - mean_P (w∘v)`.
//! Training never sees the class prior: it only rescales the SMI estimate.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::PuDataset;
use crate::error::{precondition, Error, Result};
use crate::mlp::{Mlp, MlpSpec, Mode, SgdConfig};
use crate::rng::{self, derive_seed};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PurlConfig {
    pub v_spec: MlpSpec,
    pub w_spec: MlpSpec,
    pub sgd_w: SgdConfig,
    pub sgd_v: SgdConfig,
    #[serde(default = "default_w_steps")]
    pub w_steps_per_v_step: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Epochs without improvement before stopping; 0 disables early stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(skip)]
    pub validation: Option<PuDataset>,
}

fn default_w_steps() -> usize {
    4
}
fn default_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    20
}

impl PurlConfig {
    /// `d-60-20-1` with batch normalization: `v` is `d-60-20` ending in an
    /// activated layer, `w` is the final `20-1` linear layer.
    pub fn standard(input_dim: usize) -> Result<Self> {
        let sgd = SgdConfig {
            learning_rate: 1e-3,
            weight_decay: 5e-4,
            grad_noise_std: 0.01,
            batch_size: 100,
            seed: 0,
        };
        Ok(PurlConfig {
            v_spec: MlpSpec::new(vec![input_dim, 60, 20], vec![true, true], true)?,
            w_spec: MlpSpec::plain(vec![20, 1])?,
            sgd_w: sgd.clone(),
            sgd_v: SgdConfig { seed: 1, ..sgd },
            w_steps_per_v_step: default_w_steps(),
            epochs: default_epochs(),
            patience: default_patience(),
            validation: None,
        })
    }

    /// Linear projection `2 -> 1` with a small ReLU ratio head.
    pub fn toy() -> Self {
        let sgd = SgdConfig {
            learning_rate: 0.05,
            weight_decay: 1e-4,
            grad_noise_std: 0.0,
            batch_size: 60,
            seed: 0,
        };
        PurlConfig {
            v_spec: MlpSpec::plain(vec![2, 1]).unwrap(),
            w_spec: MlpSpec::plain(vec![1, 16, 1]).unwrap(),
            sgd_w: sgd.clone(),
            sgd_v: SgdConfig { seed: 1, ..sgd },
            w_steps_per_v_step: default_w_steps(),
            epochs: 200,
            patience: 0,
            validation: None,
        }
    }

    pub fn validate(&self, data: &PuDataset) -> Result<()> {
        self.v_spec.validate()?;
        self.w_spec.validate()?;
        self.sgd_w.validate()?;
        self.sgd_v.validate()?;
        let (d, m) = (self.v_spec.input_dim(), self.v_spec.output_dim());
        if m != self.w_spec.input_dim() {
            return Err(precondition(format!(
                "representation width {m} differs from ratio head input {}",
                self.w_spec.input_dim()
            )));
        }
        if m >= d {
            return Err(precondition(format!(
                "representation width {m} must be below input width {d}"
            )));
        }
        if self.w_spec.output_dim() != 1 {
            return Err(precondition("ratio head must have a single output"));
        }
        if self.w_steps_per_v_step == 0 {
            return Err(precondition("w_steps_per_v_step must be at least 1"));
        }
        if data.dim() != d {
            return Err(precondition(format!(
                "data has {} features, network expects {d}",
                data.dim()
            )));
        }
        if let Some(val) = &self.validation {
            val.ensure_nonempty()?;
            if val.dim() != d {
                return Err(precondition(
                    "validation data dimension differs from the training data",
                ));
            }
        }
        for sgd in [&self.sgd_w, &self.sgd_v] {
            let (kp, ku) = batch_split(sgd.batch_size, data.n_p(), data.n_u())?;
            if kp > data.n_p() || ku > data.n_u() {
                return Err(precondition(format!(
                    "batch of {kp} positive and {ku} unlabeled rows exceeds the data ({} / {})",
                    data.n_p(),
                    data.n_u()
                )));
            }
        }
        Ok(())
    }
}

/// Positive and unlabeled rows per mini-batch.
fn batch_split(batch_size: usize, n_p: usize, n_u: usize) -> Result<(usize, usize)> {
    if n_p == 0 || n_u == 0 {
        return Err(precondition(
            "both positive and unlabeled rows are required",
        ));
    }
    let kp = (batch_size * n_p).div_ceil(n_p + n_u);
    if kp == 0 || kp >= batch_size {
        return Err(precondition(format!(
            "batch size {batch_size} cannot hold both positive and unlabeled rows"
        )));
    }
    Ok((kp, batch_size - kp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// 0 before training, then the epoch number.
    pub iteration: usize,
    pub train_j: f64,
    pub validation_j: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PurlResult {
    pub v: Mlp,
    pub w: Mlp,
    pub history: Vec<HistoryRow>,
    pub best_iteration: usize,
}

impl PurlResult {
    /// Unit direction of a linear one-dimensional map.
    pub fn linear_direction(&self) -> Option<Array1<f64>> {
        let layers = self.v.layers();
        if layers.len() != 1 || layers[0].relu || layers[0].weight.nrows() != 1 {
            return None;
        }
        let row = layers[0].weight.row(0).to_owned();
        let norm = row.dot(&row).sqrt();
        (norm > 0.0).then(|| row / norm)
    }

    pub fn write_history_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["iteration", "train_j", "validation_j"])?;
        for h in &self.history {
            out.write_record([
                h.iteration.to_string(),
                h.train_j.to_string(),
                h.validation_j.map_or_else(String::new, |v| v.to_string()),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Training events, in order, for instrumentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PurlEvent {
    WUpdate { epoch: usize },
    VUpdate { epoch: usize },
    EpochEnd { epoch: usize, train_j: f64 },
}

/// Objective of the composed network in eval mode.
pub fn purl_objective(v: &Mlp, w: &Mlp, data: &PuDataset) -> Result<f64> {
    let out_p = w.predict(&v.predict(data.positives())?)?;
    let out_u = w.predict(&v.predict(data.unlabeled())?)?;
    let j = 0.5 * out_u.mapv(|r| r * r).mean().unwrap() - out_p.mean().unwrap();
    Ok(j)
}

/// Eval-mode forward of the learned map.
pub fn transform(result: &PurlResult, points: &Array2<f64>) -> Result<Array2<f64>> {
    result.v.predict(points)
}

struct EpochSampler {
    pos: Vec<usize>,
    unl: Vec<usize>,
    pos_at: usize,
    unl_at: usize,
}

impl EpochSampler {
    fn new(n_p: usize, n_u: usize, rng: &mut rng::Rng) -> Self {
        let mut pos: Vec<usize> = (0..n_p).collect();
        let mut unl: Vec<usize> = (0..n_u).collect();
        pos.shuffle(rng);
        unl.shuffle(rng);
        EpochSampler {
            pos,
            unl,
            pos_at: 0,
            unl_at: 0,
        }
    }

    fn next(&mut self, kp: usize, ku: usize) -> Option<(&[usize], &[usize])> {
        if self.pos_at + kp > self.pos.len() || self.unl_at + ku > self.unl.len() {
            return None;
        }
        let p = &self.pos[self.pos_at..self.pos_at + kp];
        let u = &self.unl[self.unl_at..self.unl_at + ku];
        self.pos_at += kp;
        self.unl_at += ku;
        Some((p, u))
    }
}

/// Gradient of the batch objective with respect to the head output: rows
/// `0..kp` are positives, the rest unlabeled.
fn objective_grad(out: &Array2<f64>, kp: usize) -> Array2<f64> {
    let ku = out.nrows() - kp;
    let mut g = Array2::zeros(out.dim());
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        row[0] = if i < kp {
            -1.0 / kp as f64
        } else {
            out[[i, 0]] / ku as f64
        };
    }
    g
}

pub fn train_purl(data: &PuDataset, config: &PurlConfig, seed: u64) -> Result<PurlResult> {
    train_purl_observed(data, config, seed, |_| {})
}

pub fn train_purl_observed<F: FnMut(PurlEvent)>(
    data: &PuDataset,
    config: &PurlConfig,
    seed: u64,
    mut observer: F,
) -> Result<PurlResult> {
    config.validate(data)?;
    let mut v = Mlp::new(config.v_spec.clone(), derive_seed(seed, 0))?;
    let mut w = Mlp::new(config.w_spec.clone(), derive_seed(seed, 1))?;
    let mut batch_rng = rng::substream(seed, 2);
    let mut noise_w = rng::substream(derive_seed(seed, 3), config.sgd_w.seed);
    let mut noise_v = rng::substream(derive_seed(seed, 4), config.sgd_v.seed);
    let split_w = batch_split(config.sgd_w.batch_size, data.n_p(), data.n_u())?;
    let split_v = batch_split(config.sgd_v.batch_size, data.n_p(), data.n_u())?;

    let evaluate = |v: &Mlp, w: &Mlp, iteration: usize| -> Result<HistoryRow> {
        let train_j = purl_objective(v, w, data)?;
        if !train_j.is_finite() {
            return Err(Error::Divergence {
                iteration,
                message: format!("training objective became {train_j}"),
            });
        }
        let validation_j = config
            .validation
            .as_ref()
            .map(|val| purl_objective(v, w, val))
            .transpose()?;
        Ok(HistoryRow {
            iteration,
            train_j,
            validation_j,
        })
    };
    let score = |h: &HistoryRow| h.validation_j.unwrap_or(h.train_j);

    let first = evaluate(&v, &w, 0)?;
    let mut best = (score(&first), 0usize, v.clone(), w.clone());
    let mut history = vec![first];
    let mut stale_epochs = 0usize;
    let mut cycle = 0usize;

    for epoch in 1..=config.epochs {
        let mut sampler = EpochSampler::new(data.n_p(), data.n_u(), &mut batch_rng);
        loop {
            let w_turn = cycle % (config.w_steps_per_v_step + 1) < config.w_steps_per_v_step;
            let (kp, ku) = if w_turn { split_w } else { split_v };
            let Some((pi, ui)) = sampler.next(kp, ku) else {
                break;
            };
            let batch = concatenate![
                Axis(0),
                data.positives().select(Axis(0), pi),
                data.unlabeled().select(Axis(0), ui)
            ];
            let (z, cache_v) = v.forward(&batch, Mode::Train)?;
            let (out, cache_w) = w.forward(&z, Mode::Train)?;
            if out.iter().any(|r| !r.is_finite()) {
                return Err(Error::Divergence {
                    iteration: epoch,
                    message: "network output became non-finite".into(),
                });
            }
            let grad_out = objective_grad(&out, kp);
            let (grads_w, grad_z) = w.backward(&cache_w, &grad_out)?;
            if w_turn {
                w.sgd_step(&grads_w, &config.sgd_w, &mut noise_w)?;
                observer(PurlEvent::WUpdate { epoch });
            } else {
                let (grads_v, _) = v.backward(&cache_v, &grad_z)?;
                v.sgd_step(&grads_v, &config.sgd_v, &mut noise_v)?;
                observer(PurlEvent::VUpdate { epoch });
            }
            cycle += 1;
        }

        let row = evaluate(&v, &w, epoch)?;
        observer(PurlEvent::EpochEnd {
            epoch,
            train_j: row.train_j,
        });
        let s = score(&row);
        history.push(row);
        if s < best.0 {
            best = (s, epoch, v.clone(), w.clone());
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if config.patience > 0 && stale_epochs >= config.patience {
                break;
            }
        }
    }

    let (_, best_iteration, v, w) = best;
    Ok(PurlResult {
        v,
        w,
        history,
        best_iteration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_gaussian_pu, ClassPrior, GaussianMixtureSpec};
    use crate::pca::pca_project;

    fn toy_data(seed: u64) -> PuDataset {
        let spec = GaussianMixtureSpec::toy(ClassPrior::new(0.5).unwrap());
        sample_gaussian_pu(&spec, 200, 400, seed).unwrap()
    }

    #[test]
    fn batch_split_follows_proportions() {
        assert_eq!(batch_split(60, 200, 400).unwrap(), (20, 40));
        assert_eq!(batch_split(10, 1, 100).unwrap(), (1, 9));
        assert!(batch_split(1, 5, 5).is_err());
        assert!(batch_split(10, 0, 5).is_err());
    }

    #[test]
    fn config_invariants_enforced() {
        let data = toy_data(0);
        let mut cfg = PurlConfig::toy();
        cfg.v_spec = MlpSpec::plain(vec![2, 2]).unwrap();
        cfg.w_spec = MlpSpec::plain(vec![2, 1]).unwrap();
        assert!(cfg.validate(&data).is_err());
        let mut cfg = PurlConfig::toy();
        cfg.w_steps_per_v_step = 0;
        assert!(cfg.validate(&data).is_err());
        let mut cfg = PurlConfig::toy();
        cfg.sgd_v.batch_size = 10_000;
        assert!(cfg.validate(&data).is_err());
        assert!(PurlConfig::standard(5).unwrap().validate(&data).is_err());
    }

    #[test]
    fn alternation_schedule_is_exact() {
        // 600 rows at 120 per batch is 5 batches per epoch.
        let data = toy_data(1);
        let mut cfg = PurlConfig::toy();
        cfg.sgd_w.batch_size = 120;
        cfg.sgd_v.batch_size = 120;
        cfg.epochs = 3;
        let mut events = Vec::new();
        train_purl_observed(&data, &cfg, 0, |e| events.push(e)).unwrap();
        for epoch in 1..=3 {
            let kinds: Vec<char> = events
                .iter()
                .filter_map(|e| match *e {
                    PurlEvent::WUpdate { epoch: k } if k == epoch => Some('w'),
                    PurlEvent::VUpdate { epoch: k } if k == epoch => Some('v'),
                    _ => None,
                })
                .collect();
            assert_eq!(kinds, vec!['w', 'w', 'w', 'w', 'v']);
        }
        assert_eq!(
            events
                .iter()
                .filter(|e| matches!(e, PurlEvent::EpochEnd { .. }))
                .count(),
            3
        );
    }

    #[test]
    fn zero_learning_rates_leave_parameters_alone() {
        let data = toy_data(2);
        let mut cfg = PurlConfig::toy();
        cfg.sgd_w.learning_rate = 0.0;
        cfg.sgd_v.learning_rate = 0.0;
        cfg.epochs = 4;
        let r = train_purl(&data, &cfg, 5).unwrap();
        let init = Mlp::new(cfg.v_spec.clone(), derive_seed(5, 0)).unwrap();
        assert_eq!(r.v.params_flat(), init.params_flat());
        let first = r.history[0].train_j;
        assert!(r.history.iter().all(|h| h.train_j == first));
        assert_eq!(r.best_iteration, 0);
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let data = toy_data(3);
        let mut cfg = PurlConfig::toy();
        cfg.epochs = 0;
        let r = train_purl(&data, &cfg, 9).unwrap();
        assert_eq!(r.history.len(), 1);
        let init = Mlp::new(cfg.v_spec.clone(), derive_seed(9, 0)).unwrap();
        assert_eq!(r.v.params_flat(), init.params_flat());
    }

    #[test]
    fn best_iteration_minimizes_history() {
        let data = toy_data(4);
        let mut cfg = PurlConfig::toy();
        cfg.epochs = 20;
        cfg.validation = Some(toy_data(40));
        let r = train_purl(&data, &cfg, 1).unwrap();
        let min = r
            .history
            .iter()
            .map(|h| h.validation_j.unwrap())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(r.history[r.best_iteration].validation_j.unwrap(), min);
        assert!(min <= r.history[0].validation_j.unwrap());
        let reproduced = purl_objective(&r.v, &r.w, cfg.validation.as_ref().unwrap()).unwrap();
        assert_eq!(reproduced, min);
    }

    #[test]
    fn training_decreases_objective() {
        let data = toy_data(5);
        let r = train_purl(&data, &PurlConfig::toy(), 2).unwrap();
        assert!(r.history[r.best_iteration].train_j < r.history[0].train_j);
    }

    #[test]
    fn early_stopping_respects_patience() {
        let data = toy_data(6);
        let mut cfg = PurlConfig::toy();
        cfg.sgd_w.learning_rate = 0.0;
        cfg.sgd_v.learning_rate = 0.0;
        cfg.epochs = 50;
        cfg.patience = 3;
        let r = train_purl(&data, &cfg, 0).unwrap();
        assert_eq!(r.history.len(), 4);
    }

    #[test]
    fn divergence_is_reported() {
        let data = toy_data(7);
        let mut cfg = PurlConfig::toy();
        cfg.sgd_w.learning_rate = 1e200;
        cfg.sgd_v.learning_rate = 1e200;
        cfg.epochs = 20;
        assert!(matches!(
            train_purl(&data, &cfg, 0),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let data = toy_data(8);
        let mut cfg = PurlConfig::toy();
        cfg.epochs = 5;
        cfg.sgd_v.grad_noise_std = 0.01;
        let a = train_purl(&data, &cfg, 3).unwrap();
        let b = train_purl(&data, &cfg, 3).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.v.params_flat(), b.v.params_flat());
    }

    #[test]
    fn transform_is_row_wise() {
        let data = toy_data(9);
        let mut cfg = PurlConfig::standard(2).unwrap();
        cfg.v_spec = MlpSpec::new(vec![2, 8, 1], vec![true, true], true).unwrap();
        cfg.w_spec = MlpSpec::plain(vec![1, 1]).unwrap();
        cfg.epochs = 2;
        let r = train_purl(&data, &cfg, 0).unwrap();
        let x = data.unlabeled().slice(ndarray::s![0..10, ..]).to_owned();
        let perm: Vec<usize> = (0..10).rev().collect();
        let a = transform(&r, &x.select(Axis(0), &perm)).unwrap();
        let b = transform(&r, &x).unwrap().select(Axis(0), &perm);
        assert_eq!(a, b);
        assert!(transform(&r, &Array2::zeros((3, 5))).is_err());
    }

    #[test]
    fn toy_direction_is_horizontal_and_pca_vertical() {
        let data = toy_data(10);
        let r = train_purl(&data, &PurlConfig::toy(), 10).unwrap();
        let dir = r.linear_direction().unwrap();
        assert!(dir[0].abs() >= 0.95, "direction {dir}");
        let pca = pca_project(data.unlabeled(), 1).unwrap();
        assert!(pca.components[[0, 1]].abs() >= 0.95);
    }

    #[test]
    fn history_csv_has_header_and_rows() {
        let data = toy_data(11);
        let mut cfg = PurlConfig::toy();
        cfg.epochs = 2;
        let r = train_purl(&data, &cfg, 0).unwrap();
        let mut buf = Vec::new();
        r.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,train_j,validation_j\n"));
        assert_eq!(text.lines().count(), 4);
        let json = serde_json::to_string(&r).unwrap();
        let back: PurlResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.v.params_flat(), r.v.params_flat());
    }
}
