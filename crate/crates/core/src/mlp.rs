//! Small fully connected networks with hand-written backpropagation.
//!
//! Each layer is `dense -> [batchnorm] -> [relu]`. Hidden layers are always
//! activated; the output layer is linear unless `activate_output` is set,
//! which is how a representation map that ends in a hidden layer is built.

use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, shape, Error, Result};
use crate::pusmi::rows_to_matrix;
use crate::rng;

pub const BATCHNORM_MOMENTUM: f64 = 0.9;
pub const BATCHNORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width first, output width last.
    pub layer_sizes: Vec<usize>,
    /// One flag per activated layer.
    pub batchnorm: Vec<bool>,
    #[serde(default)]
    pub activate_output: bool,
}

impl MlpSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        batchnorm: Vec<bool>,
        activate_output: bool,
    ) -> Result<Self> {
        let spec = MlpSpec {
            layer_sizes,
            batchnorm,
            activate_output,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// ReLU hidden layers, no batch normalization, linear output.
    pub fn plain(layer_sizes: Vec<usize>) -> Result<Self> {
        let n = layer_sizes.len().saturating_sub(2);
        MlpSpec::new(layer_sizes, vec![false; n], false)
    }

    /// Batch normalization on every hidden layer, linear output.
    pub fn with_batchnorm(layer_sizes: Vec<usize>) -> Result<Self> {
        let n = layer_sizes.len().saturating_sub(2);
        MlpSpec::new(layer_sizes, vec![true; n], false)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(precondition("a network needs an input and an output size"));
        }
        if self.layer_sizes.contains(&0) {
            return Err(precondition("layer sizes must be at least 1"));
        }
        if self.batchnorm.len() != self.activated_layers() {
            return Err(precondition(format!(
                "{} batchnorm flags for {} activated layers",
                self.batchnorm.len(),
                self.activated_layers()
            )));
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    fn activated_layers(&self) -> usize {
        self.n_layers() - 1 + usize::from(self.activate_output)
    }

    fn is_activated(&self, layer: usize) -> bool {
        layer + 1 < self.n_layers() || self.activate_output
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn uses_batchnorm(&self) -> bool {
        self.batchnorm.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
            momentum: BATCHNORM_MOMENTUM,
            eps: BATCHNORM_EPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out x in`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub batchnorm: Option<BatchNorm>,
    pub relu: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub grad_noise_std: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(precondition("learning rate must be non-negative"));
        }
        if !(self.weight_decay >= 0.0) || !(self.grad_noise_std >= 0.0) {
            return Err(precondition(
                "weight decay and gradient noise must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Network parameters and batch-normalization state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MlpDoc", into = "MlpDoc")]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Dense>,
    // Bumped on every parameter change so stale caches are detected.
    generation: u64,
}

#[derive(Debug, Clone)]
struct BnCache {
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Array2<f64>,
    bn: Option<BnCache>,
    // Value fed to the ReLU (or the layer output when there is none).
    pre_activation: Array2<f64>,
}

/// Intermediate values of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    mode: Mode,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.layers[0].input.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Option<Array1<f64>>,
    pub beta: Option<Array1<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads {
    pub layers: Vec<DenseGrads>,
}

impl MlpGrads {
    /// Trainable-parameter gradients in [`Mlp::params_flat`] order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend(g.weight.iter());
            out.extend(g.bias.iter());
            if let (Some(gm), Some(bt)) = (&g.gamma, &g.beta) {
                out.extend(gm.iter());
                out.extend(bt.iter());
            }
        }
        out
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases, identity batch normalization.
    pub fn new(spec: MlpSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::from_seed(seed);
        let mut bn_flags = spec.batchnorm.iter();
        let mut layers = Vec::with_capacity(spec.n_layers());
        for l in 0..spec.n_layers() {
            let (fan_in, fan_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weight = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                rng.random_range(-limit..=limit)
            });
            let relu = spec.is_activated(l);
            let batchnorm = if relu && *bn_flags.next().unwrap() {
                Some(BatchNorm::new(fan_out))
            } else {
                None
            };
            layers.push(Dense {
                weight,
                bias: Array1::zeros(fan_out),
                batchnorm,
                relu,
            });
        }
        Ok(Mlp {
            spec,
            layers,
            generation: 0,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    /// Mutable parameter access; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.generation += 1;
        &mut self.layers
    }

    pub fn forward(
        &mut self,
        batch: &Array2<f64>,
        mode: Mode,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        if batch.ncols() != self.spec.input_dim() {
            return Err(shape(format!(
                "network expects {} inputs, batch has {}",
                self.spec.input_dim(),
                batch.ncols()
            )));
        }
        if mode == Mode::Train && self.spec.uses_batchnorm() && batch.nrows() < 2 {
            return Err(precondition(
                "batch normalization in training mode needs at least two rows",
            ));
        }
        let n = batch.nrows() as f64;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for layer in &mut self.layers {
            let z = x.dot(&layer.weight.t()) + &layer.bias;
            let (pre, bn_cache) = match &mut layer.batchnorm {
                None => (z, None),
                Some(bn) => {
                    let (mean, var) = match mode {
                        Mode::Train => {
                            let mean = z.mean_axis(Axis(0)).unwrap();
                            let var = z.var_axis(Axis(0), 0.0);
                            let unbiased = &var * (n / (n - 1.0));
                            bn.running_mean =
                                &bn.running_mean * bn.momentum + &mean * (1.0 - bn.momentum);
                            bn.running_var =
                                &bn.running_var * bn.momentum + unbiased * (1.0 - bn.momentum);
                            (mean, var)
                        }
                        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
                    };
                    let inv_std = var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
                    let x_hat = (&z - &mean) * &inv_std;
                    let y = &x_hat * &bn.gamma + &bn.beta;
                    (y, Some(BnCache { x_hat, inv_std }))
                }
            };
            let out = if layer.relu {
                pre.mapv(|v| v.max(0.0))
            } else {
                pre.clone()
            };
            caches.push(LayerCache {
                input: x,
                bn: bn_cache,
                pre_activation: pre,
            });
            x = out;
        }
        Ok((
            x,
            ForwardCache {
                generation: self.generation,
                mode,
                layers: caches,
            },
        ))
    }

    /// Eval-mode forward pass: a pure per-row function of the parameters.
    pub fn predict(&self, batch: &Array2<f64>) -> Result<Array2<f64>> {
        // Eval mode never touches the running statistics.
        let mut scratch = self.clone();
        Ok(scratch.forward(batch, Mode::Eval)?.0)
    }

    /// Gradients of `sum(output_grad * output)` with respect to every
    /// trainable parameter and to the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &Array2<f64>,
    ) -> Result<(MlpGrads, Array2<f64>)> {
        if cache.generation != self.generation || cache.layers.len() != self.layers.len() {
            return Err(precondition(
                "forward cache is stale: parameters changed since the forward pass",
            ));
        }
        let n_rows = cache.batch_size();
        if output_grad.dim() != (n_rows, self.spec.output_dim()) {
            return Err(shape(format!(
                "output gradient is {:?}, expected ({n_rows}, {})",
                output_grad.dim(),
                self.spec.output_dim()
            )));
        }
        let n = n_rows as f64;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = output_grad.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            if layer.relu {
                g.zip_mut_with(&lc.pre_activation, |gi, &p| {
                    if p <= 0.0 {
                        *gi = 0.0
                    }
                });
            }
            let (dz, d_gamma, d_beta) = match (&layer.batchnorm, &lc.bn) {
                (None, _) => (g, None, None),
                (Some(bn), Some(bc)) => {
                    let d_gamma = (&g * &bc.x_hat).sum_axis(Axis(0));
                    let d_beta = g.sum_axis(Axis(0));
                    let dx_hat = &g * &bn.gamma;
                    let dz = match cache.mode {
                        Mode::Train => {
                            let s1 = dx_hat.sum_axis(Axis(0));
                            let s2 = (&dx_hat * &bc.x_hat).sum_axis(Axis(0));
                            ((&dx_hat * n - &s1) - &bc.x_hat * &s2) * &(&bc.inv_std / n)
                        }
                        Mode::Eval => &dx_hat * &bc.inv_std,
                    };
                    (dz, Some(d_gamma), Some(d_beta))
                }
                (Some(_), None) => {
                    return Err(Error::Precondition("cache lacks batchnorm state".into()))
                }
            };
            grads.push(DenseGrads {
                weight: dz.t().dot(&lc.input),
                bias: dz.sum_axis(Axis(0)),
                gamma: d_gamma,
                beta: d_beta,
            });
            g = dz.dot(&layer.weight);
        }
        grads.reverse();
        Ok((MlpGrads { layers: grads }, g))
    }

    /// `p <- p - lr (g + decay p + noise)`. Decay applies to dense weights and
    /// biases only; batch-normalization scale and shift get gradient and
    /// noise, running statistics get neither.
    pub fn sgd_step(
        &mut self,
        grads: &MlpGrads,
        config: &SgdConfig,
        step_rng: &mut rng::Rng,
    ) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(shape("gradient layer count does not match the network"));
        }
        let noise = if config.grad_noise_std > 0.0 {
            Some(
                Normal::new(0.0, config.grad_noise_std)
                    .map_err(|e| Error::Numeric(e.to_string()))?,
            )
        } else {
            None
        };
        let lr = config.learning_rate;
        let decay = config.weight_decay;
        let mut update = |p: &mut f64, g: f64, decayed: bool| {
            let xi = noise.map_or(0.0, |d| d.sample(step_rng));
            let wd = if decayed { decay * *p } else { 0.0 };
            *p -= lr * (g + wd + xi);
        };
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            if layer.weight.dim() != g.weight.dim() || layer.bias.len() != g.bias.len() {
                return Err(shape("gradient shapes do not match the network"));
            }
            layer
                .weight
                .zip_mut_with(&g.weight, |p, &gi| update(p, gi, true));
            layer
                .bias
                .zip_mut_with(&g.bias, |p, &gi| update(p, gi, true));
            if let (Some(bn), Some(gg), Some(gb)) = (&mut layer.batchnorm, &g.gamma, &g.beta) {
                bn.gamma.zip_mut_with(gg, |p, &gi| update(p, gi, false));
                bn.beta.zip_mut_with(gb, |p, &gi| update(p, gi, false));
            }
        }
        self.generation += 1;
        Ok(())
    }

    /// Trainable parameters, layer by layer: weight (row-major), bias, then
    /// batchnorm scale and shift.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.weight.iter());
            out.extend(l.bias.iter());
            if let Some(bn) = &l.batchnorm {
                out.extend(bn.gamma.iter());
                out.extend(bn.beta.iter());
            }
        }
        out
    }

    pub fn set_params_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.params_flat().len() {
            return Err(shape("flat parameter vector has the wrong length"));
        }
        let mut it = values.iter().copied();
        for l in self.layers_mut() {
            l.weight.iter_mut().for_each(|p| *p = it.next().unwrap());
            l.bias.iter_mut().for_each(|p| *p = it.next().unwrap());
            if let Some(bn) = &mut l.batchnorm {
                bn.gamma.iter_mut().for_each(|p| *p = it.next().unwrap());
                bn.beta.iter_mut().for_each(|p| *p = it.next().unwrap());
            }
        }
        Ok(())
    }
}

/// JSON layout: the spec plus one record per layer with nested row-major
/// arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpDoc {
    pub spec: MlpSpec,
    pub layers: Vec<DenseDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseDoc {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batchnorm: Option<BatchNormDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchNormDoc {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl From<Mlp> for MlpDoc {
    fn from(m: Mlp) -> Self {
        MlpDoc {
            spec: m.spec,
            layers: m
                .layers
                .into_iter()
                .map(|l| DenseDoc {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                    batchnorm: l.batchnorm.map(|bn| BatchNormDoc {
                        gamma: bn.gamma.to_vec(),
                        beta: bn.beta.to_vec(),
                        running_mean: bn.running_mean.to_vec(),
                        running_var: bn.running_var.to_vec(),
                        momentum: bn.momentum,
                        eps: bn.eps,
                    }),
                })
                .collect(),
        }
    }
}

impl TryFrom<MlpDoc> for Mlp {
    type Error = Error;

    fn try_from(doc: MlpDoc) -> Result<Self> {
        let mut net = Mlp::new(doc.spec, 0)?;
        if doc.layers.len() != net.layers.len() {
            return Err(shape("layer count does not match the spec"));
        }
        for (layer, d) in net.layers.iter_mut().zip(doc.layers) {
            let weight = rows_to_matrix(&d.weight)?;
            if weight.dim() != layer.weight.dim() || d.bias.len() != layer.bias.len() {
                return Err(shape("layer parameter shapes do not match the spec"));
            }
            layer.weight = weight;
            layer.bias = d.bias.into();
            match (&mut layer.batchnorm, d.batchnorm) {
                (Some(bn), Some(b)) => {
                    let w = bn.gamma.len();
                    if [
                        b.gamma.len(),
                        b.beta.len(),
                        b.running_mean.len(),
                        b.running_var.len(),
                    ]
                    .iter()
                    .any(|&l| l != w)
                    {
                        return Err(shape("batchnorm parameter shapes do not match the spec"));
                    }
                    if b.running_var.iter().any(|&v| v < 0.0) {
                        return Err(precondition("negative running variance"));
                    }
                    *bn = BatchNorm {
                        gamma: b.gamma.into(),
                        beta: b.beta.into(),
                        running_mean: b.running_mean.into(),
                        running_var: b.running_var.into(),
                        momentum: b.momentum,
                        eps: b.eps,
                    };
                }
                (None, None) => {}
                _ => return Err(shape("batchnorm presence does not match the spec")),
            }
        }
        Ok(net)
    }
}
