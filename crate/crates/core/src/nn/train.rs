use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::softmax_xent;
use super::model::{argmax, AdamParams, Model, ModelConfig};
use super::tensor::Tensor;
use crate::error::NnError;
use crate::scalar::Scalar;

/// Anything that can feed the network: a flat D×T input and a class index.
pub trait LabeledInput {
    fn input(&self) -> &[f32];
    fn label(&self) -> usize;
}

impl LabeledInput for (Vec<f32>, usize) {
    fn input(&self) -> &[f32] {
        &self.0
    }

    fn label(&self) -> usize {
        self.1
    }
}

impl<S: LabeledInput> LabeledInput for &S {
    fn input(&self) -> &[f32] {
        (*self).input()
    }

    fn label(&self) -> usize {
        (*self).label()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 64, adam: AdamParams::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch, with dropout active.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn first(&self) -> Option<&EpochStats> {
        self.epochs.first()
    }

    pub fn last(&self) -> Option<&EpochStats> {
        self.epochs.last()
    }
}

/// Stacks inputs into a `[B, H, W, 1]` batch.
pub fn batch_tensor<T: Scalar, S: LabeledInput>(samples: &[S], idx: &[usize], h: usize, w: usize) -> Result<Tensor<T>, NnError> {
    let mut data = Vec::with_capacity(idx.len() * h * w);
    for &i in idx {
        let input = samples[i].input();
        if input.len() != h * w {
            return Err(NnError::shape("sample input", h * w, input.len()));
        }
        data.extend(input.iter().map(|&v| T::lit(v as f64)));
    }
    Tensor::from_vec(&[idx.len(), h, w, 1], data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub predictions: Vec<usize>,
}

/// Inference-mode loss, accuracy and predicted classes.
pub fn evaluate<T: Scalar, S: LabeledInput>(model: &Model<T>, samples: &[S], batch_size: usize) -> Result<Evaluation, NnError> {
    let c = model.config();
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut predictions = Vec::with_capacity(samples.len());
    let idx: Vec<usize> = (0..samples.len()).collect();
    for chunk in idx.chunks(batch_size.max(1)) {
        let x = batch_tensor::<T, S>(samples, chunk, c.input_height, c.input_width)?;
        let labels: Vec<usize> = chunk.iter().map(|&i| samples[i].label()).collect();
        let logits = model.forward(&x)?;
        let (probs, l, _) = softmax_xent(&logits, &labels)?;
        loss += l * chunk.len() as f64;
        for (row, &label) in probs.data().chunks_exact(c.num_classes).zip(&labels) {
            let p: Vec<f64> = row.iter().map(|v| v.as_f64()).collect();
            let k = argmax(&p);
            correct += usize::from(k == label);
            predictions.push(k);
        }
    }
    let n = samples.len().max(1) as f64;
    Ok(Evaluation { loss: loss / n, accuracy: correct as f64 / n, predictions })
}

fn check_labels<S: LabeledInput>(samples: &[S], classes: usize, require_all: bool) -> Result<(), NnError> {
    let mut seen = vec![false; classes];
    for s in samples {
        let l = s.label();
        if l >= classes {
            return Err(NnError::Dataset(format!("label {l} outside 0..{classes}")));
        }
        seen[l] = true;
    }
    if require_all {
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(NnError::Dataset(format!("class {missing} has no training samples")));
        }
    }
    Ok(())
}

/// Mini-batch Adam training from a seeded He initialization. `on_epoch` sees
/// each epoch's statistics as soon as they are known.
pub fn train<T: Scalar, S: LabeledInput>(
    config: &ModelConfig,
    train_set: &[S],
    val_set: &[S],
    opts: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<(Model<T>, TrainHistory), NnError> {
    let mut model = Model::<T>::new(config.clone(), opts.seed)?;
    let mut history = TrainHistory::default();
    if opts.epochs == 0 {
        return Ok((model, history));
    }
    if train_set.is_empty() {
        return Err(NnError::Dataset("training set is empty".into()));
    }
    if opts.batch_size == 0 {
        return Err(NnError::Dataset("batch size must be >= 1".into()));
    }
    check_labels(train_set, config.num_classes, true)?;
    check_labels(val_set, config.num_classes, false)?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    dropout_rng.set_stream(2);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=opts.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for chunk in order.chunks(opts.batch_size) {
            let x = batch_tensor::<T, S>(train_set, chunk, config.input_height, config.input_width)?;
            let labels: Vec<usize> = chunk.iter().map(|&i| train_set[i].label()).collect();
            let (loss, grads) = model.loss_and_grads(&x, &labels, &mut dropout_rng, true)?;
            if !loss.is_finite() {
                return Err(NnError::Diverged { epoch, loss });
            }
            model.apply_gradients(&grads, &opts.adam)?;
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / train_set.len() as f64;
        let (val_loss, val_accuracy) = if val_set.is_empty() {
            (None, None)
        } else {
            let e = evaluate(&model, val_set, opts.batch_size)?;
            (Some(e.loss), Some(e.accuracy))
        };
        let stats = EpochStats { epoch, train_loss, val_loss, val_accuracy };
        on_epoch(&stats);
        history.epochs.push(stats);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ModelConfig {
        ModelConfig { input_height: 8, input_width: 8, conv_depths: vec![4], fc_hidden: 8, num_classes: 2, ..Default::default() }
    }

    fn stripes(n: usize) -> Vec<(Vec<f32>, usize)> {
        (0..n)
            .map(|i| {
                let label = i % 2;
                let v = (0..64).map(|p| if (p / 8) % 2 == label { 1.0 } else { 0.0 }).collect();
                (v, label)
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let cfg = toy();
        let (m, h) = train::<f32, _>(&cfg, &stripes(4), &[], &TrainConfig { epochs: 0, ..Default::default() }, |_| {}).unwrap();
        assert!(h.epochs.is_empty());
        assert_eq!(m, Model::new(cfg, 0).unwrap());
    }

    #[test]
    fn missing_class_is_a_dataset_error() {
        let only_zero: Vec<_> = stripes(8).into_iter().filter(|s| s.1 == 0).collect();
        let r = train::<f32, _>(&toy(), &only_zero, &[], &TrainConfig::default(), |_| {});
        assert!(matches!(r, Err(NnError::Dataset(_))));
    }

    #[test]
    fn learns_stripes() {
        let data = stripes(64);
        let opts = TrainConfig { epochs: 15, batch_size: 8, adam: AdamParams { lr: 1e-2, ..Default::default() }, seed: 3 };
        let (m, h) = train::<f32, _>(&toy(), &data, &data, &opts, |_| {}).unwrap();
        assert_eq!(h.epochs.len(), 15);
        assert!(h.last().unwrap().train_loss < h.first().unwrap().train_loss);
        assert_eq!(evaluate(&m, &data, 16).unwrap().accuracy, 1.0);
    }
}
