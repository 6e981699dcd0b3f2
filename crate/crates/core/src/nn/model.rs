use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout, dropout_backward, leaky_relu,
    leaky_relu_backward, maxpool2, maxpool2_backward, softmax, softmax_xent, ConvCache,
};
use super::tensor::Tensor;
use crate::error::{ConfigError, NnError};
use crate::scalar::Scalar;
use crate::signature::SignatureProfile;
use crate::sim::BehaviorClass;

/// CNN architecture: `[conv, leaky ReLU, 2×2 max-pool, dropout]` per entry
/// of `conv_depths`, then a hidden dense layer and the output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub conv_depths: Vec<usize>,
    pub kernel: usize,
    pub fc_hidden: usize,
    pub num_classes: usize,
    pub leaky_slope: f64,
    pub dropout_p: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_height: 64,
            input_width: 48,
            conv_depths: vec![32, 64, 128],
            kernel: 3,
            fc_hidden: 128,
            num_classes: BehaviorClass::COUNT,
            leaky_slope: 0.01,
            dropout_p: 0.05,
        }
    }
}

impl ModelConfig {
    /// Default architecture sized for a signature profile.
    pub fn for_profile(profile: &SignatureProfile) -> Self {
        Self { input_height: profile.depth, input_width: profile.width, ..Self::default() }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let div = 1usize << self.conv_depths.len();
        if self.input_height == 0 || self.input_width == 0 || self.input_height % div != 0 || self.input_width % div != 0 {
            return Err(ConfigError::inconsistent(
                "input height and width divisible by 2^conv_layers",
                format!("{}x{} with {} conv layers", self.input_height, self.input_width, self.conv_depths.len()),
            ));
        }
        if self.kernel % 2 == 0 {
            return Err(ConfigError::inconsistent("odd kernel", self.kernel.to_string()));
        }
        if self.conv_depths.iter().any(|&d| d == 0) || self.fc_hidden == 0 {
            return Err(ConfigError::inconsistent("layer widths >= 1", format!("{:?}, fc {}", self.conv_depths, self.fc_hidden)));
        }
        if self.num_classes < 2 {
            return Err(ConfigError::inconsistent("num_classes >= 2", self.num_classes.to_string()));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(ConfigError::inconsistent("0 < leaky_slope < 1", self.leaky_slope.to_string()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(ConfigError::inconsistent("0 <= dropout_p < 1", self.dropout_p.to_string()));
        }
        Ok(())
    }

    /// Length of the flattened feature vector entering the hidden layer.
    pub fn flatten_len(&self) -> usize {
        let div = 1usize << self.conv_depths.len();
        let c = self.conv_depths.last().copied().unwrap_or(1);
        (self.input_height / div) * (self.input_width / div) * c
    }

    /// Parameter names and shapes in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let k = self.kernel;
        let mut out = Vec::new();
        let mut cin = 1;
        for (i, &c) in self.conv_depths.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), vec![k, k, cin, c]));
            out.push((format!("conv{}.bias", i + 1), vec![c]));
            cin = c;
        }
        out.push(("fc1.weight".into(), vec![self.flatten_len(), self.fc_hidden]));
        out.push(("fc1.bias".into(), vec![self.fc_hidden]));
        out.push(("fc2.weight".into(), vec![self.fc_hidden, self.num_classes]));
        out.push(("fc2.bias".into(), vec![self.num_classes]));
        out
    }

    /// Trainable parameters per layer (each conv layer, then both dense layers).
    pub fn layer_param_counts(&self) -> Result<Vec<usize>, NnError> {
        self.check()?;
        let shapes = self.param_shapes();
        Ok(shapes.chunks(2).map(|pair| pair.iter().map(|(_, s)| s.iter().product::<usize>()).sum()).collect())
    }
}

pub fn param_count(config: &ModelConfig) -> Result<usize, NnError> {
    Ok(config.layer_param_counts()?.iter().sum())
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub t: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn for_params(params: &[Tensor<T>]) -> Self {
        Self {
            t: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// One bias-corrected Adam update. Nothing is modified if any gradient is
/// non-finite.
pub fn adam_step<T: Scalar>(
    params: &mut [Tensor<T>],
    names: &[String],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    hp: &AdamParams,
) -> Result<(), NnError> {
    if grads.len() != params.len() {
        return Err(NnError::shape("adam gradients", params.len(), grads.len()));
    }
    for (i, (g, p)) in grads.iter().zip(params.iter()).enumerate() {
        g.expect_shape("adam gradient", p.shape())?;
        if !g.is_finite() {
            return Err(NnError::NonFiniteGradient(names.get(i).cloned().unwrap_or_else(|| format!("param{i}"))));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::lit(hp.beta1), T::lit(hp.beta2));
    let (one_b1, one_b2) = (T::lit(1.0 - hp.beta1), T::lit(1.0 - hp.beta2));
    let c1 = T::lit(1.0 / (1.0 - hp.beta1.powi(t)));
    let c2 = T::lit(1.0 / (1.0 - hp.beta2.powi(t)));
    let (lr, eps) = (T::lit(hp.lr), T::lit(hp.eps));
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let it = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
        for ((pv, &gv), (mv, vv)) in it {
            *mv = b1 * *mv + one_b1 * gv;
            *vv = b2 * *vv + one_b2 * gv * gv;
            let mhat = *mv * c1;
            let vhat = *vv * c2;
            *pv -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

struct StageCache<T> {
    conv: ConvCache<T>,
    pre: Tensor<T>,
    argmax: Vec<usize>,
    mask: Option<Vec<T>>,
}

/// Intermediate values of a training forward pass.
pub struct ForwardCache<T> {
    stages: Vec<StageCache<T>>,
    flat: Tensor<T>,
    hidden_pre: Tensor<T>,
    hidden_mask: Option<Vec<T>>,
    hidden_out: Tensor<T>,
}

/// Network parameters with their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    config: ModelConfig,
    names: Vec<String>,
    pub params: Vec<Tensor<T>>,
    pub adam: AdamState<T>,
}

impl<T: Scalar> Model<T> {
    /// He-initialized weights, zero biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self, NnError> {
        config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shapes = config.param_shapes();
        let params: Vec<Tensor<T>> = shapes
            .iter()
            .map(|(name, shape)| {
                if name.ends_with("bias") {
                    return Tensor::zeros(shape);
                }
                let fan_in: usize = shape[..shape.len() - 1].iter().product();
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                let data = (0..shape.iter().product::<usize>()).map(|_| T::lit(normal.sample(&mut rng))).collect();
                Tensor::from_vec(shape, data).expect("shape from config")
            })
            .collect();
        Self::from_params(config, params)
    }

    /// Wraps existing parameter tensors, checking their shapes.
    pub fn from_params(config: ModelConfig, params: Vec<Tensor<T>>) -> Result<Self, NnError> {
        config.check()?;
        let shapes = config.param_shapes();
        if shapes.len() != params.len() {
            return Err(NnError::shape("model parameters", shapes.len(), params.len()));
        }
        for ((name, shape), p) in shapes.iter().zip(&params) {
            if p.shape() != shape.as_slice() {
                return Err(NnError::Shape { op: "model parameter", expected: format!("{name} {shape:?}"), got: format!("{:?}", p.shape()) });
            }
        }
        let adam = AdamState::for_params(&params);
        Ok(Self { config, names: shapes.into_iter().map(|(n, _)| n).collect(), params, adam })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_names(&self) -> &[String] {
        &self.names
    }

    pub fn allocated_params(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model::from_params(self.config.clone(), self.params.iter().map(Tensor::cast).collect()).expect("same config")
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(), NnError> {
        let c = &self.config;
        x.expect_rank("model input", 4)?;
        if x.shape()[1..] != [c.input_height, c.input_width, 1] {
            return Err(NnError::shape("model input", [c.input_height, c.input_width, 1], &x.shape()[1..]));
        }
        Ok(())
    }

    /// Forward pass keeping everything the backward pass needs.
    pub fn forward_train(&self, x: &Tensor<T>, rng: &mut ChaCha8Rng, training: bool) -> Result<(Tensor<T>, ForwardCache<T>), NnError> {
        self.check_input(x)?;
        let slope = T::lit(self.config.leaky_slope);
        let p = self.config.dropout_p;
        let mut stages = Vec::with_capacity(self.config.conv_depths.len());
        let mut h = x.clone();
        for i in 0..self.config.conv_depths.len() {
            let (pre, conv) = conv2d_forward(&h, &self.params[2 * i], &self.params[2 * i + 1])?;
            let act = leaky_relu(&pre, slope);
            let (pooled, argmax) = maxpool2(&act)?;
            let (out, mask) = dropout(&pooled, p, rng, training);
            stages.push(StageCache { conv, pre, argmax, mask });
            h = out;
        }
        let b = x.shape()[0];
        let flat = h.reshape(&[b, self.config.flatten_len()])?;
        let n = self.params.len();
        let hidden_pre = dense_forward(&flat, &self.params[n - 4], &self.params[n - 3])?;
        let (hidden_out, hidden_mask) = dropout(&leaky_relu(&hidden_pre, slope), p, rng, training);
        let logits = dense_forward(&hidden_out, &self.params[n - 2], &self.params[n - 1])?;
        Ok((logits, ForwardCache { stages, flat, hidden_pre, hidden_mask, hidden_out }))
    }

    /// Parameter gradients given the loss gradient with respect to the logits.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &Tensor<T>) -> Result<Vec<Tensor<T>>, NnError> {
        let slope = T::lit(self.config.leaky_slope);
        let n = self.params.len();
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; n];
        let (dh, dw2, db2) = dense_backward(&cache.hidden_out, &self.params[n - 2], dlogits)?;
        grads[n - 2] = Some(dw2);
        grads[n - 1] = Some(db2);
        let dh = dropout_backward(cache.hidden_mask.as_deref(), &dh);
        let dh = leaky_relu_backward(&cache.hidden_pre, &dh, slope)?;
        let (dflat, dw1, db1) = dense_backward(&cache.flat, &self.params[n - 4], &dh)?;
        grads[n - 4] = Some(dw1);
        grads[n - 3] = Some(db1);

        let b = dlogits.shape()[0];
        let mut d = dflat;
        for (i, st) in cache.stages.iter().enumerate().rev() {
            let pre_shape = st.pre.shape();
            let pooled_shape = [b, pre_shape[1] / 2, pre_shape[2] / 2, pre_shape[3]];
            d = d.reshape(&pooled_shape)?;
            let d_pool = dropout_backward(st.mask.as_deref(), &d);
            let d_act = maxpool2_backward(pre_shape, &st.argmax, &d_pool)?;
            let d_pre = leaky_relu_backward(&st.pre, &d_act, slope)?;
            let (dx, dw, db) = conv2d_backward(&st.conv, &self.params[2 * i], &d_pre, i > 0)?;
            grads[2 * i] = Some(dw);
            grads[2 * i + 1] = Some(db);
            if let Some(dx) = dx {
                d = dx;
            }
        }
        Ok(grads.into_iter().map(|g| g.expect("every parameter has a gradient")).collect())
    }

    /// Mean cross-entropy and parameter gradients for one batch.
    pub fn loss_and_grads(&self, x: &Tensor<T>, labels: &[usize], rng: &mut ChaCha8Rng, training: bool) -> Result<(f64, Vec<Tensor<T>>), NnError> {
        let (logits, cache) = self.forward_train(x, rng, training)?;
        let (_, loss, dlogits) = softmax_xent(&logits, labels)?;
        Ok((loss, self.backward(&cache, &dlogits)?))
    }

    /// Inference logits (no dropout).
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward_train(x, &mut rng, false)?.0)
    }

    pub fn apply_gradients(&mut self, grads: &[Tensor<T>], hp: &AdamParams) -> Result<(), NnError> {
        adam_step(&mut self.params, &self.names, grads, &mut self.adam, hp)
    }

    /// Class index (ties to the lowest) and probabilities for one D×T input.
    pub fn predict_input(&self, input: &[f32]) -> Result<(usize, Vec<f64>), NnError> {
        let c = &self.config;
        let x = Tensor::from_vec(&[1, c.input_height, c.input_width, 1], input.iter().map(|&v| T::lit(v as f64)).collect())?;
        let probs: Vec<f64> = softmax(&self.forward(&x)?).data().iter().map(|v| v.as_f64()).collect();
        Ok((argmax(&probs), probs))
    }

    /// Predicted behavior for a pattern matching the input size.
    pub fn predict(&self, pattern: &crate::signature::DopplerPattern) -> Result<(BehaviorClass, Vec<f64>), NnError> {
        if (pattern.depth, pattern.width) != (self.config.input_height, self.config.input_width) {
            return Err(NnError::shape(
                "predict",
                (self.config.input_height, self.config.input_width),
                (pattern.depth, pattern.width),
            ));
        }
        if self.config.num_classes != BehaviorClass::COUNT {
            return Err(NnError::shape("predict classes", BehaviorClass::COUNT, self.config.num_classes));
        }
        let (k, probs) = self.predict_input(&pattern.values)?;
        Ok((BehaviorClass::from_label(k as u8).expect("six classes"), probs))
    }
}

/// Index of the first maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
