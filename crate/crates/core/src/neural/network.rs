use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cell::{CellKind, CellParams, StepCache};
use super::tensor::{dot, Matrix};
use super::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub cell: CellKind,
    pub layers: usize,
    pub hidden: usize,
    pub input_features: usize,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            cell: CellKind::Lstm,
            layers: 2,
            hidden: 64,
            input_features: 2,
            dropout_rate: 0.2,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: String| Err(NeuralError::InvalidConfig(m));
        if self.layers == 0 {
            return bad("layers must be at least 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be at least 1".into());
        }
        if self.input_features == 0 {
            return bad("input_features must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} must lie in [0, 1)", self.dropout_rate));
        }
        Ok(())
    }

    /// Closed-form trainable parameter count including the output head.
    pub fn param_count(&self) -> usize {
        let first = self.cell.layer_param_count(self.hidden, self.input_features);
        let rest = self.cell.layer_param_count(self.hidden, self.hidden);
        first + (self.layers - 1) * rest + self.hidden + 1
    }
}

/// `y = W_hy · h + b_y`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    pub w_hy: Vec<f64>,
    pub b_y: f64,
}

/// All trainable tensors of a network. Gradients use the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub layers: Vec<CellParams>,
    pub head: OutputHead,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| CellParams::zeros(l.kind(), l.hidden(), l.input()))
                .collect(),
            head: OutputHead {
                w_hy: vec![0.0; self.head.w_hy.len()],
                b_y: 0.0,
            },
        }
    }

    /// Every tensor in canonical order: layer by layer, then `w_hy`, `b_y`.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.layers.iter().flat_map(|l| l.tensors()).collect();
        v.push(&self.head.w_hy);
        v.push(std::slice::from_ref(&self.head.b_y));
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self
            .layers
            .iter_mut()
            .flat_map(|l| l.tensors_mut())
            .collect();
        v.push(&mut self.head.w_hy);
        v.push(std::slice::from_mut(&mut self.head.b_y));
        v
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn copy_from_flat(&mut self, flat: &[f64]) -> Result<(), NeuralError> {
        let n = self.param_count();
        if flat.len() != n {
            return Err(NeuralError::ShapeMismatch {
                what: "flat parameter vector",
                expected: n,
                got: flat.len(),
            });
        }
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
}

/// Inverted-dropout multipliers: `0` with probability `p`, else `1/(1-p)`.
pub(crate) fn dropout_mask<R: Rng>(rng: &mut R, len: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

/// Distinct value for every parameter state of every network in the process,
/// so a cache can tell whether it still describes the weights it came from.
fn next_generation() -> u64 {
    static COUNTER: AtomicU64 = AtomicU64::new(1);
    COUNTER.fetch_add(1, Ordering::Relaxed)
}

/// Stacked recurrent layers with dropout on each layer's output sequence and
/// a linear head on the last step of the top layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    config: NetworkConfig,
    params: Params,
    #[serde(skip, default = "next_generation")]
    generation: u64,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

struct LayerCache {
    /// `inputs[t]` fed to step `t`.
    inputs: Vec<Vec<f64>>,
    /// `hs[0]` is the zero initial state, `hs[t + 1]` the output of step `t`.
    hs: Vec<Vec<f64>>,
    cs: Vec<Vec<f64>>,
    steps: Vec<StepCache>,
    /// Inverted-dropout multipliers for the output sequence, if training.
    mask: Option<Vec<Vec<f64>>>,
}

/// Activations from [`Network::forward`], consumed by [`Network::backward`].
pub struct ForwardCache {
    generation: u64,
    layers: Vec<LayerCache>,
    /// Top-layer output at the last step, after dropout.
    top: Vec<f64>,
}

impl Network {
    /// Randomly initialised network, seeded by `config.seed`.
    pub fn new(config: NetworkConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layers = (0..config.layers)
            .map(|l| {
                let input = if l == 0 { config.input_features } else { config.hidden };
                CellParams::random(config.cell, config.hidden, input, &mut rng)
            })
            .collect();
        let bound = 1.0 / (config.hidden as f64).sqrt();
        let w_hy = (0..config.hidden)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        let b_y = rng.random_range(-bound..bound);
        Ok(Self {
            config,
            params: Params {
                layers,
                head: OutputHead { w_hy, b_y },
            },
            generation: next_generation(),
        })
    }

    /// Wraps explicit weights after checking them against `config`.
    pub fn from_params(config: NetworkConfig, params: Params) -> Result<Self, NeuralError> {
        config.validate()?;
        let mismatch = |what, expected, got| Err(NeuralError::ShapeMismatch { what, expected, got });
        if params.layers.len() != config.layers {
            return mismatch("layer count", config.layers, params.layers.len());
        }
        for (l, layer) in params.layers.iter().enumerate() {
            let input = if l == 0 { config.input_features } else { config.hidden };
            if layer.kind() != config.cell {
                return Err(NeuralError::InvalidConfig(format!(
                    "layer {l} is {} but the config says {}",
                    layer.kind(),
                    config.cell
                )));
            }
            let want = CellParams::zeros(config.cell, config.hidden, input);
            for ((got_t, want_t), (name, ..)) in layer.tensors().iter().zip(want.tensors()).zip(want.layout()) {
                if got_t.len() != want_t.len() {
                    return mismatch(name, want_t.len(), got_t.len());
                }
            }
            if layer.hidden() != config.hidden || layer.input() != input {
                return mismatch("layer shape", config.hidden, layer.hidden());
            }
        }
        if params.head.w_hy.len() != config.hidden {
            return mismatch("w_hy", config.hidden, params.head.w_hy.len());
        }
        if params.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(NeuralError::NonFinite);
        }
        Ok(Self {
            config,
            params,
            generation: next_generation(),
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Mutable weights. Any cache taken before this call becomes stale.
    pub fn params_mut(&mut self) -> &mut Params {
        self.generation = next_generation();
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn forward(
        &self,
        sequence: &Matrix,
        training: bool,
        seed: u64,
    ) -> Result<(f64, ForwardCache), NeuralError> {
        if sequence.rows() == 0 {
            return Err(NeuralError::ShapeMismatch {
                what: "sequence length",
                expected: 1,
                got: 0,
            });
        }
        if sequence.cols() != self.config.input_features {
            return Err(NeuralError::ShapeMismatch {
                what: "input features",
                expected: self.config.input_features,
                got: sequence.cols(),
            });
        }
        let p = self.config.dropout_rate;
        let dropout = training && p > 0.0;
        let mut rng = dropout.then(|| ChaCha8Rng::seed_from_u64(seed));
        let hn = self.config.hidden;
        let steps = sequence.rows();

        let mut inputs: Vec<Vec<f64>> = (0..steps).map(|t| sequence.row(t).to_vec()).collect();
        let mut layers = Vec::with_capacity(self.config.layers);
        for layer in &self.params.layers {
            let mut hs = Vec::with_capacity(steps + 1);
            let mut cs = Vec::with_capacity(steps + 1);
            let mut caches = Vec::with_capacity(steps);
            hs.push(vec![0.0; hn]);
            cs.push(vec![0.0; hn]);
            for x in &inputs {
                let out = layer.step(&hs[hs.len() - 1], &cs[cs.len() - 1], x);
                hs.push(out.h);
                cs.push(out.c);
                caches.push(out.cache);
            }
            let mask = rng
                .as_mut()
                .map(|rng| (0..steps).map(|_| dropout_mask(rng, hn, p)).collect::<Vec<_>>());
            let outputs: Vec<Vec<f64>> = match &mask {
                Some(m) => hs[1..]
                    .iter()
                    .zip(m)
                    .map(|(h, m)| h.iter().zip(m).map(|(a, b)| a * b).collect())
                    .collect(),
                None => hs[1..].to_vec(),
            };
            layers.push(LayerCache {
                inputs: std::mem::replace(&mut inputs, outputs),
                hs,
                cs,
                steps: caches,
                mask,
            });
        }
        let top = inputs.pop().expect("at least one step");
        let head = &self.params.head;
        let prediction = dot(&head.w_hy, &top) + head.b_y;
        Ok((
            prediction,
            ForwardCache {
                generation: self.generation,
                layers,
                top,
            },
        ))
    }

    /// Inference-mode forward pass.
    pub fn predict(&self, sequence: &Matrix) -> Result<f64, NeuralError> {
        Ok(self.forward(sequence, false, 0)?.0)
    }

    /// Backpropagation through time for `dloss/dprediction = loss_grad`.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: f64) -> Result<Params, NeuralError> {
        if cache.generation != self.generation {
            return Err(NeuralError::StaleCache);
        }
        let mut grads = self.params.zeros_like();
        grads.head.b_y = loss_grad;
        grads
            .head
            .w_hy
            .iter_mut()
            .zip(&cache.top)
            .for_each(|(g, h)| *g = loss_grad * h);

        let hn = self.config.hidden;
        let steps = cache.layers[0].steps.len();
        // Gradient w.r.t. each layer's (post-dropout) output sequence.
        let mut d_out: Vec<Vec<f64>> = vec![vec![0.0; hn]; steps];
        d_out[steps - 1] = self.params.head.w_hy.iter().map(|w| w * loss_grad).collect();

        for (l, (layer, lc)) in self.params.layers.iter().zip(&cache.layers).enumerate().rev() {
            if let Some(mask) = &lc.mask {
                for (d, m) in d_out.iter_mut().zip(mask) {
                    d.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
                }
            }
            let input_dim = lc.inputs[0].len();
            let mut d_in = vec![vec![0.0; input_dim]; steps];
            let mut dh_next = vec![0.0; hn];
            let mut dc_next = vec![0.0; hn];
            let g = &mut grads.layers[l];
            for t in (0..steps).rev() {
                let dh: Vec<f64> = d_out[t].iter().zip(&dh_next).map(|(a, b)| a + b).collect();
                let (dhp, dcp) = layer.step_backward(
                    g,
                    &lc.steps[t],
                    &lc.hs[t],
                    &lc.cs[t],
                    &lc.inputs[t],
                    &lc.hs[t + 1],
                    &dh,
                    &dc_next,
                    &mut d_in[t],
                );
                dh_next = dhp;
                if !dcp.is_empty() {
                    dc_next = dcp;
                }
            }
            d_out = d_in;
        }
        Ok(grads)
    }
}
