//! The three-step training procedure: reconstruction pretraining, joint
//! warm-up of all blocks, and the adversarial loop that alternates between
//! updating the feature extractor/classifier against a frozen discriminator
//! and refreshing the discriminator against frozen features.

use std::collections::{BTreeMap, HashSet};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::evaluate;
use crate::ingest::{DatasetKind, LabeledDataset, Window};
use crate::losses::LossWeights;
use crate::model::{softmax_rows, windows_to_tensor, Block, ModelBundle, LATENT_DIM};
use crate::nn::{Adam, Mode, Sequential, Tensor};
use crate::pairset::{shuffled_indices, PairDataset, PairSample};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Per-block learning rates and epoch count for one training step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepHyper {
    pub lr_f: f32,
    pub lr_r: f32,
    pub lr_c: f32,
    pub lr_d: f32,
    pub epochs: usize,
}

impl StepHyper {
    pub fn uniform(lr: f32, epochs: usize) -> Self {
        StepHyper {
            lr_f: lr,
            lr_r: lr,
            lr_c: lr,
            lr_d: lr,
            epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub step1: StepHyper,
    pub step2: StepHyper,
    pub step3: StepHyper,
    pub batch_size_a: usize,
    pub batch_size_aprime: usize,
    pub weights: LossWeights,
    pub seed: u64,
    /// Global-norm clip per block; None (the default) disables clipping.
    pub grad_clip: Option<f32>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let step2 = StepHyper {
            lr_d: 1e-3,
            ..StepHyper::uniform(1e-4, 5)
        };
        TrainingConfig {
            step1: StepHyper::uniform(1e-4, 15),
            step2,
            step3: StepHyper::uniform(1e-4, 150),
            batch_size_a: 64,
            batch_size_aprime: 350,
            weights: LossWeights::default(),
            seed: 0,
            grad_clip: None,
        }
    }
}

impl TrainingConfig {
    /// Per-dataset reference batch sizes; everything else is shared.
    pub fn for_dataset(kind: DatasetKind) -> Self {
        let (a, aprime) = match kind {
            DatasetKind::Pamap2 => (64, 350),
            DatasetKind::Mhealth => (32, 375),
            DatasetKind::Realdisp => (30, 395),
            DatasetKind::Synthetic => (32, 64),
        };
        TrainingConfig {
            batch_size_a: a,
            batch_size_aprime: aprime,
            ..TrainingConfig::default()
        }
    }
}

/// What the discriminator sees and predicts. `ActivityPairs` is the main
/// task (binary same-subject on same-activity pairs); `ActivityAgnosticPairs`
/// drops the shared-activity constraint; `SubjectIdentity` replaces the pair
/// head with per-subject classification of single latents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscriminationTask {
    ActivityPairs,
    ActivityAgnosticPairs,
    SubjectIdentity,
}

/// Everything one fold's training run needs. `pairs_train` must index into
/// `train` and `pairs_val` into `val`; the subject audit enforces this.
pub struct FoldInputs {
    pub fold_id: usize,
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub pairs_train: PairDataset,
    pub pairs_val: PairDataset,
    pub training_subjects: Vec<u32>,
    pub num_activities: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub fold: usize,
    pub step: String,
    pub epoch: usize,
    pub l_r: Option<f64>,
    pub l_c: Option<f64>,
    pub l_d: Option<f64>,
    pub l_a: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub val_f1w: Option<f64>,
    pub disc_val_acc: Option<f64>,
}

/// Selection metadata for the returned snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionInfo {
    pub epoch: Option<usize>,
    pub val_f1w: f64,
    pub disc_val_acc: f64,
}

pub struct TrainedModel {
    pub bundle: ModelBundle,
    pub selection: SelectionInfo,
    pub traces: Vec<EpochTrace>,
    pub config: TrainingConfig,
}

// ---------------------------------------------------------------------------
// Batch plumbing
// ---------------------------------------------------------------------------

fn mix(parts: &[u64]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &p in parts {
        h ^= p;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Exactly `iters` index batches: chunks of a fresh permutation per cycle,
/// cycling (reshuffled) until the longer stream's iteration count is met.
fn plan_batches(n: usize, batch_size: usize, iters: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(iters);
    let mut cycle = 0u64;
    while out.len() < iters {
        let perm = shuffled_indices(n, mix(&[seed, cycle]));
        for chunk in perm.chunks(batch_size) {
            if out.len() == iters {
                break;
            }
            out.push(chunk.to_vec());
        }
        cycle += 1;
    }
    out
}

fn batches_per_epoch(n: usize, batch_size: usize) -> usize {
    (n + batch_size - 1) / batch_size
}

fn clip_grads(net: &mut Sequential, clip: Option<f32>) {
    let Some(c) = clip else { return };
    let norm: f32 = net
        .params()
        .iter()
        .map(|p| p.g.iter().map(|v| v * v).sum::<f32>())
        .sum::<f32>()
        .sqrt();
    if norm > c {
        let scale = c / norm;
        for p in net.params_mut() {
            p.g.mapv_inplace(|v| v * scale);
        }
    }
}

// ---------------------------------------------------------------------------
// Per-batch loss/gradient kernels (fused forms; losses logged in f64)
// ---------------------------------------------------------------------------

const PROB_EPS: f32 = 1e-7;

fn ln_clamped(p: f32) -> f64 {
    (p.clamp(PROB_EPS, 1.0 - PROB_EPS) as f64).ln()
}

/// Mean squared error and its gradient with respect to the reconstruction.
fn recon_loss_grad(recon: &Array3<f32>, target: &Array3<f32>) -> (f64, Array3<f32>) {
    let n = recon.len() as f64;
    let mut loss = 0.0f64;
    let mut grad = recon.clone();
    ndarray::Zip::from(&mut grad).and(target).for_each(|g, &t| {
        let diff = *g - t;
        loss += (diff as f64) * (diff as f64);
        *g = 2.0 * diff / n as f32;
    });
    (loss / n, grad)
}

/// Softmax cross-entropy against integer labels; gradient is with respect
/// to the logits ((p - onehot)/B).
fn ce_loss_grad(logits: &Array2<f32>, labels: &[usize]) -> (f64, Array2<f32>) {
    let b = labels.len();
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut grad = probs.clone();
    for (i, &label) in labels.iter().enumerate() {
        loss -= ln_clamped(probs[[i, label]]);
        grad[[i, label]] -= 1.0;
    }
    grad.mapv_inplace(|v| v / b as f32);
    (loss / b as f64, grad)
}

fn sigmoid(z: f32) -> f32 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary cross-entropy on discriminator logits; gradient (sigma - g)/B.
fn bce_loss_grad(logits: &Array2<f32>, targets: &[u8]) -> (f64, Array2<f32>) {
    let b = targets.len();
    let mut loss = 0.0;
    let mut grad = Array2::<f32>::zeros(logits.raw_dim());
    for (i, &g) in targets.iter().enumerate() {
        let p = sigmoid(logits[[i, 0]]);
        loss -= if g == 1 {
            ln_clamped(p)
        } else {
            ln_clamped(1.0 - p)
        };
        grad[[i, 0]] = (p - g as f32) / b as f32;
    }
    (loss / b as f64, grad)
}

/// Non-saturating adversarial objective -log D on same-activity pairs of
/// different subjects; gradient (sigma - 1)/B toward "same subject".
fn adversarial_loss_grad(logits: &Array2<f32>) -> (f64, Array2<f32>) {
    let b = logits.nrows();
    let mut loss = 0.0;
    let mut grad = Array2::<f32>::zeros(logits.raw_dim());
    for i in 0..b {
        let p = sigmoid(logits[[i, 0]]);
        loss -= ln_clamped(p);
        grad[[i, 0]] = (p - 1.0) / b as f32;
    }
    (loss / b as f64, grad)
}

/// Multi-class fooling objective: cross-entropy toward the uniform subject
/// distribution; gradient (p - 1/n)/B with respect to the logits.
fn uniform_ce_loss_grad(logits: &Array2<f32>) -> (f64, Array2<f32>) {
    let (b, n) = logits.dim();
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut grad = probs.clone();
    let u = 1.0 / n as f32;
    for i in 0..b {
        for s in 0..n {
            loss -= ln_clamped(probs[[i, s]]) / n as f64;
            grad[[i, s]] -= u;
        }
    }
    grad.mapv_inplace(|v| v / b as f32);
    (loss / b as f64, grad)
}

// ---------------------------------------------------------------------------
// The trainer
// ---------------------------------------------------------------------------

pub struct Trainer<'a> {
    config: &'a TrainingConfig,
    task: DiscriminationTask,
    inputs: &'a FoldInputs,
    allowed_subjects: HashSet<u32>,
    /// Dense index per training subject, for the identity head's labels.
    subject_index: BTreeMap<u32, usize>,
    traces: Vec<EpochTrace>,
}

struct RunningMean {
    sum: f64,
    count: u64,
}

impl RunningMean {
    fn new() -> Self {
        RunningMean { sum: 0.0, count: 0 }
    }

    fn add(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

impl<'a> Trainer<'a> {
    pub fn new(
        config: &'a TrainingConfig,
        task: DiscriminationTask,
        inputs: &'a FoldInputs,
    ) -> Self {
        let allowed_subjects: HashSet<u32> = inputs.training_subjects.iter().copied().collect();
        let subject_index = inputs
            .training_subjects
            .iter()
            .enumerate()
            .map(|(i, &s)| (s, i))
            .collect();
        Trainer {
            config,
            task,
            inputs,
            allowed_subjects,
            subject_index,
            traces: Vec::new(),
        }
    }

    /// Subject-id audit: every window reaching a gradient computation must
    /// belong to a training subject.
    fn audit_batch(&self, windows: &[&Window], context: &str) -> Result<()> {
        for w in windows {
            if !self.allowed_subjects.contains(&w.subject) {
                return Err(Error::Training(format!(
                    "data-hygiene violation in {context}: subject {} is not a training subject",
                    w.subject
                )));
            }
        }
        Ok(())
    }

    fn check_finite(&self, losses: &[(&str, f64)], context: &str, batch: &[usize]) -> Result<()> {
        for (name, v) in losses {
            if !v.is_finite() {
                return Err(Error::Training(format!(
                    "non-finite {name}={v} in {context}; batch indices {batch:?}"
                )));
            }
        }
        Ok(())
    }

    fn train_windows(&self, indices: &[usize]) -> Vec<&'a Window> {
        indices.iter().map(|&i| &self.inputs.train.windows[i]).collect()
    }

    fn activity_labels(windows: &[&Window]) -> Vec<usize> {
        windows.iter().map(|w| w.activity).collect()
    }

    fn subject_labels(&self, windows: &[&Window]) -> Vec<usize> {
        windows.iter().map(|w| self.subject_index[&w.subject]).collect()
    }

    /// Member windows of a pair batch stacked a-halves first, so row i and
    /// row i + n_pairs are partners.
    fn pair_member_windows(&self, pairs: &[&PairSample]) -> Vec<&'a Window> {
        let mut members: Vec<&Window> = pairs
            .iter()
            .map(|p| &self.inputs.train.windows[p.a_index])
            .collect();
        members.extend(pairs.iter().map(|p| &self.inputs.train.windows[p.b_index]));
        members
    }

    fn concat_pair_latents(latents: &Array2<f32>) -> Array2<f32> {
        let n = latents.nrows() / 2;
        let mut out = Array2::<f32>::zeros((n, 2 * LATENT_DIM));
        for i in 0..n {
            for j in 0..LATENT_DIM {
                out[[i, j]] = latents[[i, j]];
                out[[i, LATENT_DIM + j]] = latents[[n + i, j]];
            }
        }
        out
    }

    /// Split a gradient over concatenated pair latents back into per-member
    /// latent gradients, matching `pair_member_windows` row order.
    fn split_pair_grad(grad: &Array2<f32>) -> Array2<f32> {
        let n = grad.nrows();
        let mut out = Array2::<f32>::zeros((2 * n, LATENT_DIM));
        for i in 0..n {
            for j in 0..LATENT_DIM {
                out[[i, j]] = grad[[i, j]];
                out[[n + i, j]] = grad[[i, LATENT_DIM + j]];
            }
        }
        out
    }

    // -- validation ---------------------------------------------------------

    fn validation_metrics(&self, bundle: &mut ModelBundle) -> Result<(f64, f64)> {
        let cm = evaluate(
            &mut bundle.f,
            &mut bundle.c,
            &self.inputs.val.windows,
            self.inputs.num_activities,
        )?;
        let (acc, _, f1w) = crate::eval::metrics_from_confusion(&cm);
        Ok((acc, f1w))
    }

    /// Discriminator accuracy on held-out pairs. For the identity task the
    /// head only covers training subjects, so the proxy is per-subject
    /// accuracy on training windows instead.
    fn discriminator_val_accuracy(&self, bundle: &mut ModelBundle) -> f64 {
        match self.task {
            DiscriminationTask::SubjectIdentity => {
                let stride = (self.inputs.train.len() / 512).max(1);
                let windows: Vec<&Window> = self
                    .inputs
                    .train
                    .windows
                    .iter()
                    .step_by(stride)
                    .collect();
                let mut correct = 0usize;
                let mut total = 0usize;
                for chunk in windows.chunks(128) {
                    let x = windows_to_tensor(chunk);
                    let latents = bundle.f.forward(Tensor::D3(x), Mode::Eval);
                    let logits = bundle.d.forward(latents, Mode::Eval).d2();
                    for (row, w) in logits.rows().into_iter().zip(chunk) {
                        let pred = row
                            .iter()
                            .enumerate()
                            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                            .map(|(i, _)| i)
                            .unwrap();
                        if pred == self.subject_index[&w.subject] {
                            correct += 1;
                        }
                        total += 1;
                    }
                }
                correct as f64 / total.max(1) as f64
            }
            _ => {
                let mut correct = 0usize;
                let mut total = 0usize;
                for chunk in self.inputs.pairs_val.pairs.chunks(256) {
                    let mut members: Vec<&Window> = chunk
                        .iter()
                        .map(|p| &self.inputs.val.windows[p.a_index])
                        .collect();
                    members.extend(chunk.iter().map(|p| &self.inputs.val.windows[p.b_index]));
                    let x = windows_to_tensor(&members);
                    let latents = bundle.f.forward(Tensor::D3(x), Mode::Eval).d2();
                    let concat = Self::concat_pair_latents(&latents);
                    let logits = bundle.d.forward(Tensor::D2(concat), Mode::Eval).d2();
                    for (i, p) in chunk.iter().enumerate() {
                        if (sigmoid(logits[[i, 0]]) > 0.5) == (p.g == 1) {
                            correct += 1;
                        }
                        total += 1;
                    }
                }
                correct as f64 / total.max(1) as f64
            }
        }
    }

    // -- step 1: reconstruction pretraining ---------------------------------

    pub fn run_step1(&mut self, bundle: &mut ModelBundle) -> Result<()> {
        bundle.set_frozen(Block::C, true);
        bundle.set_frozen(Block::D, true);
        let hp = self.config.step1;
        let mut adam_f = Adam::new(hp.lr_f);
        let mut adam_r = Adam::new(hp.lr_r);
        let n = self.inputs.train.len();
        let iters = batches_per_epoch(n, self.config.batch_size_a);
        for epoch in 0..hp.epochs {
            let seed = mix(&[self.config.seed, self.inputs.fold_id as u64, 1, epoch as u64]);
            let mut l_r = RunningMean::new();
            for batch in plan_batches(n, self.config.batch_size_a, iters, seed) {
                let windows = self.train_windows(&batch);
                self.audit_batch(&windows, "step1")?;
                bundle.f.zero_grads();
                bundle.r.zero_grads();
                let x = windows_to_tensor(&windows);
                let latent = bundle.f.forward(Tensor::D3(x.clone()), Mode::Train);
                let recon = bundle.r.forward(latent, Mode::Train).d3();
                let (loss, grad) = recon_loss_grad(&recon, &x);
                self.check_finite(&[("L_R", loss)], "step1", &batch)?;
                let grad_latent = bundle.r.backward(Tensor::D3(grad));
                bundle.f.backward(grad_latent);
                clip_grads(&mut bundle.f, self.config.grad_clip);
                clip_grads(&mut bundle.r, self.config.grad_clip);
                adam_f.step(&mut bundle.f);
                adam_r.step(&mut bundle.r);
                l_r.add(loss);
            }
            self.traces.push(EpochTrace {
                fold: self.inputs.fold_id,
                step: "step1".into(),
                epoch,
                l_r: l_r.mean(),
                l_c: None,
                l_d: None,
                l_a: None,
                val_accuracy: None,
                val_f1w: None,
                disc_val_acc: None,
            });
        }
        bundle.set_frozen(Block::C, false);
        bundle.set_frozen(Block::D, false);
        Ok(())
    }

    // -- step 2: joint warm-up ----------------------------------------------

    /// One discriminator update from a pair batch (or, for the identity
    /// task, a window batch), with gradients stopped at the latents.
    pub fn discriminator_batch(
        &self,
        bundle: &mut ModelBundle,
        batch: &[usize],
        context: &str,
    ) -> Result<f64> {
        bundle.d.zero_grads();
        let loss = match self.task {
            DiscriminationTask::SubjectIdentity => {
                let windows = self.train_windows(batch);
                self.audit_batch(&windows, context)?;
                let labels = self.subject_labels(&windows);
                let x = windows_to_tensor(&windows);
                let latents = bundle.f.forward(Tensor::D3(x), Mode::Eval);
                let logits = bundle.d.forward(latents, Mode::Train).d2();
                let (loss, grad) = ce_loss_grad(&logits, &labels);
                bundle.d.backward(Tensor::D2(grad));
                loss
            }
            _ => {
                let pairs: Vec<&PairSample> = batch
                    .iter()
                    .map(|&i| &self.inputs.pairs_train.pairs[i])
                    .collect();
                let members = self.pair_member_windows(&pairs);
                self.audit_batch(&members, context)?;
                let targets: Vec<u8> = pairs.iter().map(|p| p.g).collect();
                let x = windows_to_tensor(&members);
                let latents = bundle.f.forward(Tensor::D3(x), Mode::Eval).d2();
                let concat = Self::concat_pair_latents(&latents);
                let logits = bundle.d.forward(Tensor::D2(concat), Mode::Train).d2();
                let (loss, grad) = bce_loss_grad(&logits, &targets);
                bundle.d.backward(Tensor::D2(grad));
                loss
            }
        };
        self.check_finite(&[("L_D", loss)], context, batch)?;
        Ok(loss)
    }

    fn aprime_len(&self) -> usize {
        match self.task {
            DiscriminationTask::SubjectIdentity => self.inputs.train.len(),
            _ => self.inputs.pairs_train.pairs.len(),
        }
    }

    pub fn run_step2(&mut self, bundle: &mut ModelBundle) -> Result<()> {
        let hp = self.config.step2;
        let mut adam_f = Adam::new(hp.lr_f);
        let mut adam_r = Adam::new(hp.lr_r);
        let mut adam_c = Adam::new(hp.lr_c);
        let mut adam_d = Adam::new(hp.lr_d);
        let n_a = self.inputs.train.len();
        let n_p = self.aprime_len();
        let iters = batches_per_epoch(n_a, self.config.batch_size_a)
            .max(batches_per_epoch(n_p, self.config.batch_size_aprime));
        for epoch in 0..hp.epochs {
            let fold = self.inputs.fold_id as u64;
            let seed_a = mix(&[self.config.seed, fold, 2, epoch as u64, 0]);
            let seed_p = mix(&[self.config.seed, fold, 2, epoch as u64, 1]);
            let a_plan = plan_batches(n_a, self.config.batch_size_a, iters, seed_a);
            let p_plan = plan_batches(n_p, self.config.batch_size_aprime, iters, seed_p);
            let (mut l_r, mut l_c, mut l_d) =
                (RunningMean::new(), RunningMean::new(), RunningMean::new());
            for (a_batch, p_batch) in a_plan.iter().zip(&p_plan) {
                // A batch: F by L_R + L_C, R by L_R, C by L_C.
                let windows = self.train_windows(a_batch);
                self.audit_batch(&windows, "step2/A")?;
                bundle.f.zero_grads();
                bundle.r.zero_grads();
                bundle.c.zero_grads();
                let labels = Self::activity_labels(&windows);
                let x = windows_to_tensor(&windows);
                let latent = bundle.f.forward(Tensor::D3(x.clone()), Mode::Train);
                let recon = bundle.r.forward(latent.clone(), Mode::Train).d3();
                let logits = bundle.c.forward(latent, Mode::Train).d2();
                let (loss_r, grad_r) = recon_loss_grad(&recon, &x);
                let (loss_c, grad_c) = ce_loss_grad(&logits, &labels);
                self.check_finite(&[("L_R", loss_r), ("L_C", loss_c)], "step2/A", a_batch)?;
                let mut grad_latent = bundle.r.backward(Tensor::D3(grad_r)).d2();
                grad_latent += &bundle.c.backward(Tensor::D2(grad_c)).d2();
                bundle.f.backward(Tensor::D2(grad_latent));
                clip_grads(&mut bundle.f, self.config.grad_clip);
                clip_grads(&mut bundle.r, self.config.grad_clip);
                clip_grads(&mut bundle.c, self.config.grad_clip);
                adam_f.step(&mut bundle.f);
                adam_r.step(&mut bundle.r);
                adam_c.step(&mut bundle.c);
                l_r.add(loss_r);
                l_c.add(loss_c);

                // A' batch: D alone, latents computed without touching F.
                let loss_d = self.discriminator_batch(bundle, p_batch, "step2/A'")?;
                clip_grads(&mut bundle.d, self.config.grad_clip);
                adam_d.step(&mut bundle.d);
                l_d.add(loss_d);
            }
            let (val_acc, val_f1w) = self.validation_metrics(bundle)?;
            let disc = self.discriminator_val_accuracy(bundle);
            self.traces.push(EpochTrace {
                fold: self.inputs.fold_id,
                step: "step2".into(),
                epoch,
                l_r: l_r.mean(),
                l_c: l_c.mean(),
                l_d: l_d.mean(),
                l_a: None,
                val_accuracy: Some(val_acc),
                val_f1w: Some(val_f1w),
                disc_val_acc: Some(disc),
            });
        }
        Ok(())
    }

    // -- step 3: adversarial loop -------------------------------------------

    /// Sub-step 3.1: with R and D frozen, update F (and C) by the weighted
    /// composite of reconstruction, classification, and fooling terms.
    pub fn step3_substep1(
        &self,
        bundle: &mut ModelBundle,
        a_batch: &[usize],
        p_batch: &[usize],
        adam_f: &mut Adam,
        adam_c: &mut Adam,
    ) -> Result<(f64, f64, f64)> {
        let w = &self.config.weights;
        bundle.f.zero_grads();
        bundle.c.zero_grads();

        let windows = self.train_windows(a_batch);
        self.audit_batch(&windows, "step3.1/A")?;
        let labels = Self::activity_labels(&windows);
        let x = windows_to_tensor(&windows);
        let latent = bundle.f.forward(Tensor::D3(x.clone()), Mode::Train);
        let recon = bundle.r.forward(latent.clone(), Mode::Eval).d3();
        let logits = bundle.c.forward(latent, Mode::Train).d2();
        let (loss_r, mut grad_r) = recon_loss_grad(&recon, &x);
        let (loss_c, mut grad_c) = ce_loss_grad(&logits, &labels);
        grad_r.mapv_inplace(|v| v * w.w_r as f32);
        grad_c.mapv_inplace(|v| v * w.w_c as f32);
        let mut grad_latent = bundle.r.backward(Tensor::D3(grad_r)).d2();
        grad_latent += &bundle.c.backward(Tensor::D2(grad_c)).d2();
        // F's A-path backward must run before the fooling pass overwrites
        // the layer caches; gradients accumulate across the two passes.
        bundle.f.backward(Tensor::D2(grad_latent));

        let loss_a = match self.task {
            DiscriminationTask::SubjectIdentity => {
                let foil_windows = self.train_windows(p_batch);
                self.audit_batch(&foil_windows, "step3.1/A'")?;
                let xf = windows_to_tensor(&foil_windows);
                let latents = bundle.f.forward(Tensor::D3(xf), Mode::Train);
                let logits = bundle.d.forward(latents, Mode::Eval).d2();
                let (loss_a, mut grad) = uniform_ce_loss_grad(&logits);
                grad.mapv_inplace(|v| v * w.w_d as f32);
                let grad_latent = bundle.d.backward(Tensor::D2(grad));
                bundle.f.backward(grad_latent);
                loss_a
            }
            _ => {
                let diff_pairs: Vec<&PairSample> = p_batch
                    .iter()
                    .map(|&i| &self.inputs.pairs_train.pairs[i])
                    .filter(|p| p.g == 0)
                    .collect();
                if diff_pairs.is_empty() {
                    // A batch with no different-subject pairs contributes
                    // nothing to the fooling term.
                    0.0
                } else {
                    let members = self.pair_member_windows(&diff_pairs);
                    self.audit_batch(&members, "step3.1/A'")?;
                    let xf = windows_to_tensor(&members);
                    let latents = bundle.f.forward(Tensor::D3(xf), Mode::Train).d2();
                    let concat = Self::concat_pair_latents(&latents);
                    let logits = bundle.d.forward(Tensor::D2(concat), Mode::Eval).d2();
                    let (loss_a, mut grad) = adversarial_loss_grad(&logits);
                    grad.mapv_inplace(|v| v * w.w_d as f32);
                    let grad_concat = bundle.d.backward(Tensor::D2(grad)).d2();
                    let grad_latents = Self::split_pair_grad(&grad_concat);
                    bundle.f.backward(Tensor::D2(grad_latents));
                    loss_a
                }
            }
        };
        self.check_finite(
            &[("L_R", loss_r), ("L_C", loss_c), ("L_A", loss_a)],
            "step3.1",
            a_batch,
        )?;
        clip_grads(&mut bundle.f, self.config.grad_clip);
        clip_grads(&mut bundle.c, self.config.grad_clip);
        adam_f.step(&mut bundle.f);
        adam_c.step(&mut bundle.c);
        // R and D accumulated pass-through gradients; drop them so the
        // frozen blocks carry no state out of this sub-step.
        bundle.r.zero_grads();
        bundle.d.zero_grads();
        Ok((loss_r, loss_c, loss_a))
    }

    pub fn run_step3(&mut self, bundle: &mut ModelBundle) -> Result<SelectionInfo> {
        let hp = self.config.step3;
        let mut adam_f = Adam::new(hp.lr_f);
        let mut adam_c = Adam::new(hp.lr_c);
        let mut adam_d = Adam::new(hp.lr_d);
        bundle.set_frozen(Block::R, true);
        let n_a = self.inputs.train.len();
        let n_p = self.aprime_len();
        let iters = batches_per_epoch(n_a, self.config.batch_size_a)
            .max(batches_per_epoch(n_p, self.config.batch_size_aprime));
        let mut best: Option<(f64, f64, usize, ModelBundle)> = None;
        for epoch in 0..hp.epochs {
            let fold = self.inputs.fold_id as u64;
            let seed_a = mix(&[self.config.seed, fold, 3, epoch as u64, 0]);
            let seed_p = mix(&[self.config.seed, fold, 3, epoch as u64, 1]);
            let seed_d = mix(&[self.config.seed, fold, 3, epoch as u64, 2]);
            let a_plan = plan_batches(n_a, self.config.batch_size_a, iters, seed_a);
            let p_plan = plan_batches(n_p, self.config.batch_size_aprime, iters, seed_p);
            let d_plan = plan_batches(n_p, self.config.batch_size_aprime, iters, seed_d);
            let (mut l_r, mut l_c, mut l_d, mut l_a) = (
                RunningMean::new(),
                RunningMean::new(),
                RunningMean::new(),
                RunningMean::new(),
            );
            for i in 0..iters {
                bundle.set_frozen(Block::D, true);
                let (lr, lc, la) = self.step3_substep1(
                    bundle,
                    &a_plan[i],
                    &p_plan[i],
                    &mut adam_f,
                    &mut adam_c,
                )?;
                bundle.set_frozen(Block::D, false);

                bundle.set_frozen(Block::F, true);
                bundle.set_frozen(Block::C, true);
                let ld = self.discriminator_batch(bundle, &d_plan[i], "step3.2")?;
                clip_grads(&mut bundle.d, self.config.grad_clip);
                adam_d.step(&mut bundle.d);
                bundle.set_frozen(Block::F, false);
                bundle.set_frozen(Block::C, false);

                l_r.add(lr);
                l_c.add(lc);
                l_a.add(la);
                l_d.add(ld);
            }
            let (val_acc, val_f1w) = self.validation_metrics(bundle)?;
            let disc = self.discriminator_val_accuracy(bundle);
            self.traces.push(EpochTrace {
                fold: self.inputs.fold_id,
                step: "step3".into(),
                epoch,
                l_r: l_r.mean(),
                l_c: l_c.mean(),
                l_d: l_d.mean(),
                l_a: l_a.mean(),
                val_accuracy: Some(val_acc),
                val_f1w: Some(val_f1w),
                disc_val_acc: Some(disc),
            });
            // Highest validation weighted F1 wins; ties go to the epoch
            // whose discriminator is closest to chance.
            let better = match &best {
                None => true,
                Some((bf, bd, _, _)) => {
                    val_f1w > *bf
                        || (val_f1w == *bf && (disc - 0.5).abs() < (bd - 0.5).abs())
                }
            };
            if better {
                best = Some((val_f1w, disc, epoch, bundle.snapshot()));
            }
        }
        bundle.set_frozen(Block::R, false);
        if let Some((f1w, disc, epoch, snapshot)) = best {
            *bundle = snapshot;
            Ok(SelectionInfo {
                epoch: Some(epoch),
                val_f1w: f1w,
                disc_val_acc: disc,
            })
        } else {
            Ok(SelectionInfo {
                epoch: None,
                val_f1w: 0.0,
                disc_val_acc: 0.0,
            })
        }
    }

    pub fn run(mut self, mut bundle: ModelBundle) -> Result<TrainedModel> {
        self.run_step1(&mut bundle)?;
        self.run_step2(&mut bundle)?;
        let selection = self.run_step3(&mut bundle)?;
        Ok(TrainedModel {
            bundle,
            selection,
            traces: self.traces,
            config: self.config.clone(),
        })
    }
}

pub fn train_step1(
    bundle: &mut ModelBundle,
    inputs: &FoldInputs,
    config: &TrainingConfig,
) -> Result<Vec<EpochTrace>> {
    let mut t = Trainer::new(config, DiscriminationTask::ActivityPairs, inputs);
    t.run_step1(bundle)?;
    Ok(t.traces)
}

pub fn train_step2(
    bundle: &mut ModelBundle,
    inputs: &FoldInputs,
    config: &TrainingConfig,
) -> Result<Vec<EpochTrace>> {
    let mut t = Trainer::new(config, DiscriminationTask::ActivityPairs, inputs);
    t.run_step2(bundle)?;
    Ok(t.traces)
}

pub fn train_step3(
    bundle: &mut ModelBundle,
    inputs: &FoldInputs,
    config: &TrainingConfig,
) -> Result<(SelectionInfo, Vec<EpochTrace>)> {
    let mut t = Trainer::new(config, DiscriminationTask::ActivityPairs, inputs);
    let sel = t.run_step3(bundle)?;
    Ok((sel, t.traces))
}

/// Full Algorithm: steps 1 -> 2 -> 3 on one fold's inputs.
pub fn run_training(
    inputs: &FoldInputs,
    config: &TrainingConfig,
    task: DiscriminationTask,
    bundle: ModelBundle,
) -> Result<TrainedModel> {
    Trainer::new(config, task, inputs).run(bundle)
}

/// Serialize traces as JSON-lines.
pub fn write_trace_log(path: &std::path::Path, traces: &[EpochTrace]) -> Result<()> {
    use std::io::Write;
    let mut out = Vec::new();
    for t in traces {
        serde_json::to_writer(&mut out, t)
            .map_err(|e| Error::Training(format!("trace serialization failed: {e}")))?;
        writeln!(out).expect("infallible vec write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        classifier_spec, discriminator_spec, feature_extractor_spec, identity_discriminator_spec,
        reconstructor_spec, BundleSpec,
    };
    use crate::pairset::{enumerate_pair_groups, sample_pairs};
    use crate::synth::{generate_synthetic, SyntheticSpec};

    fn tiny_spec() -> SyntheticSpec {
        SyntheticSpec {
            n_subjects: 4,
            n_activities: 3,
            windows_per_cell: 6,
            window_size: 128,
            channels: 3,
            subject_variability: 1.0,
            noise_sigma: 0.05,
            window_jitter: 0.0,
            seed: 7,
        }
    }

    fn tiny_inputs(task: DiscriminationTask) -> (FoldInputs, BundleSpec) {
        let data = generate_synthetic(&tiny_spec());
        let subjects = data.subjects.clone();
        let train_subjects: Vec<u32> = subjects[..2].to_vec();
        let val_subjects: Vec<u32> = subjects[2..].to_vec();
        let train = data.filter_subjects(&train_subjects);
        let val = data.filter_subjects(&val_subjects);
        let pairs_train = sample_pairs(&enumerate_pair_groups(&train), 24, 1).unwrap();
        let pairs_val = sample_pairs(&enumerate_pair_groups(&val), 12, 2).unwrap();
        let k = train.schema.activity_labels.len();
        let c = train.schema.channel_columns.len();
        let w = 128;
        let d = match task {
            DiscriminationTask::SubjectIdentity => {
                identity_discriminator_spec(train_subjects.len())
            }
            _ => discriminator_spec(),
        };
        let spec = BundleSpec {
            f: feature_extractor_spec(c),
            r: reconstructor_spec(w, c).unwrap(),
            c: classifier_spec(k),
            d,
        };
        (
            FoldInputs {
                fold_id: 0,
                train,
                val,
                pairs_train,
                pairs_val,
                training_subjects: train_subjects,
                num_activities: k,
            },
            spec,
        )
    }

    fn tiny_config(e1: usize, e2: usize, e3: usize) -> TrainingConfig {
        TrainingConfig {
            step1: StepHyper::uniform(1e-3, e1),
            step2: StepHyper {
                lr_d: 1e-3,
                ..StepHyper::uniform(1e-3, e2)
            },
            step3: StepHyper::uniform(1e-3, e3),
            batch_size_a: 12,
            batch_size_aprime: 12,
            weights: LossWeights::default(),
            seed: 3,
            grad_clip: None,
        }
    }

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let cfg = TrainingConfig::default();
        assert_eq!(cfg.step1.epochs, 15);
        assert_eq!(cfg.step2.epochs, 5);
        assert_eq!(cfg.step3.epochs, 150);
        assert_eq!(cfg.step1.lr_f, 1e-4);
        assert_eq!(cfg.step2.lr_d, 1e-3);
        assert_eq!(cfg.step2.lr_c, 1e-4);
        assert_eq!(cfg.step3.lr_f, 1e-4);
        let m = TrainingConfig::for_dataset(DatasetKind::Mhealth);
        assert_eq!((m.batch_size_a, m.batch_size_aprime), (32, 375));
        let r = TrainingConfig::for_dataset(DatasetKind::Realdisp);
        assert_eq!((r.batch_size_a, r.batch_size_aprime), (30, 395));
    }

    #[test]
    fn step1_leaves_classifier_and_discriminator_untouched() {
        let (inputs, spec) = tiny_inputs(DiscriminationTask::ActivityPairs);
        let mut bundle = ModelBundle::new(spec, 11);
        let dc = bundle.param_digest(Block::C);
        let dd = bundle.param_digest(Block::D);
        let df = bundle.param_digest(Block::F);
        let cfg = tiny_config(1, 0, 0);
        train_step1(&mut bundle, &inputs, &cfg).unwrap();
        assert_eq!(bundle.param_digest(Block::C), dc);
        assert_eq!(bundle.param_digest(Block::D), dd);
        assert_ne!(bundle.param_digest(Block::F), df);
    }

    #[test]
    fn zero_rates_change_nothing() {
        let (inputs, spec) = tiny_inputs(DiscriminationTask::ActivityPairs);
        let bundle = ModelBundle::new(spec, 11);
        let digests: Vec<String> = [Block::F, Block::R, Block::C, Block::D]
            .iter()
            .map(|&b| bundle.param_digest(b))
            .collect();
        let mut cfg = tiny_config(1, 1, 1);
        cfg.step1 = StepHyper::uniform(0.0, 1);
        cfg.step2 = StepHyper::uniform(0.0, 1);
        cfg.step3 = StepHyper::uniform(0.0, 1);
        run_training(&inputs, &cfg, DiscriminationTask::ActivityPairs, bundle)
            .map(|tm| {
                for (b, d) in [Block::F, Block::R, Block::C, Block::D].iter().zip(&digests) {
                    assert_eq!(&tm.bundle.param_digest(*b), d, "{b:?} drifted at zero lr");
                }
            })
            .unwrap();
    }

    #[test]
    fn zero_epochs_returns_initial_bundle() {
        let (inputs, spec) = tiny_inputs(DiscriminationTask::ActivityPairs);
        let bundle = ModelBundle::new(spec, 11);
        let before = bundle.param_digest(Block::F);
        let cfg = tiny_config(0, 0, 0);
        let tm = run_training(&inputs, &cfg, DiscriminationTask::ActivityPairs, bundle).unwrap();
        assert_eq!(tm.bundle.param_digest(Block::F), before);
        assert_eq!(tm.selection.epoch, None);
        assert!(tm.traces.is_empty());
    }

    #[test]
    fn toy_reconstruction_gradient_is_hand_value() {
        // recon = a*x with x = 1, target 1, a = 0: mean-squared loss
        // gradient d/da (a-1)^2 = -2; a plain 0.1-rate step gives a = 0.2.
        let recon = Array3::from_elem((1, 1, 1), 0.0f32);
        let target = Array3::from_elem((1, 1, 1), 1.0f32);
        let (loss, grad) = recon_loss_grad(&recon, &target);
        assert!((loss - 1.0).abs() < 1e-6);
        assert!((grad[[0, 0, 0]] - (-2.0)).abs() < 1e-6);
        let a = 0.0 - 0.1 * grad[[0, 0, 0]];
        assert!((a - 0.2).abs() < 1e-6);
    }

    #[test]
    fn freeze_schedule_digests() {
        let (inputs, spec) = tiny_inputs(DiscriminationTask::ActivityPairs);
        let mut bundle = ModelBundle::new(spec, 5);
        let cfg = tiny_config(1, 1, 2);
        let mut t = Trainer::new(&cfg, DiscriminationTask::ActivityPairs, &inputs);
        t.run_step1(&mut bundle).unwrap();
        t.run_step2(&mut bundle).unwrap();
        let dr = bundle.param_digest(Block::R);
        t.run_step3(&mut bundle).unwrap();
        assert_eq!(bundle.param_digest(Block::R), dr, "R drifted in step 3");
    }

    #[test]
    fn substep_freezes_hold_within_one_iteration() {
        let (inputs, spec) = tiny_inputs(DiscriminationTask::ActivityPairs);
        let mut bundle = ModelBundle::new(spec, 5);
        let cfg = tiny_config(1, 1, 0);
        let mut t = Trainer::new(&cfg, DiscriminationTask::ActivityPairs, &inputs);
        t.run_step1(&mut bundle).unwrap();
        t.run_step2(&mut bundle).unwrap();

        let dd = bundle.param_digest(Block::D);
        let mut adam_f = Adam::new(1e-3);
        let mut adam_c = Adam::new(1e-3);
        let a_batch: Vec<usize> = (0..8).collect();
        let p_batch: Vec<usize> = (0..8).collect();
        t.step3_substep1(&mut bundle, &a_batch, &p_batch, &mut adam_f, &mut adam_c)
            .unwrap();
        assert_eq!(bundle.param_digest(Block::D), dd, "D drifted in 3.1");

        let df = bundle.param_digest(Block::F);
        let dc = bundle.param_digest(Block::C);
        let mut adam_d = Adam::new(1e-3);
        let ld = t.discriminator_batch(&mut bundle, &p_batch, "test/3.2").unwrap();
        adam_d.step(&mut bundle.d);
        assert!(ld.is_finite());
        assert_eq!(bundle.param_digest(Block::F), df, "F drifted in 3.2");
        assert_eq!(bundle.param_digest(Block::C), dc, "C drifted in 3.2");
    }

    #[test]
    fn training_is_deterministic() {
        let (inputs, spec) = tiny_inputs(DiscriminationTask::ActivityPairs);
        let cfg = tiny_config(1, 1, 1);
        let run = |spec: BundleSpec| {
            let bundle = ModelBundle::new(spec, 9);
            run_training(&inputs, &cfg, DiscriminationTask::ActivityPairs, bundle).unwrap()
        };
        let t1 = run(spec.clone());
        let t2 = run(spec);
        assert_eq!(t1.traces, t2.traces);
        for b in [Block::F, Block::R, Block::C, Block::D] {
            assert_eq!(t1.bundle.param_digest(b), t2.bundle.param_digest(b));
        }
    }

    #[test]
    fn hygiene_audit_rejects_foreign_subjects() {
        let (mut inputs, spec) = tiny_inputs(DiscriminationTask::ActivityPairs);
        // Smuggle a validation-subject window into the training set.
        inputs.train.windows.push(inputs.val.windows[0].clone());
        let bundle = ModelBundle::new(spec, 1);
        let cfg = tiny_config(1, 0, 0);
        let err = run_training(&inputs, &cfg, DiscriminationTask::ActivityPairs, bundle);
        match err {
            Err(Error::Training(msg)) => assert!(msg.contains("data-hygiene"), "{msg}"),
            other => panic!("expected hygiene error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn identity_task_trains_with_subject_head() {
        let (inputs, spec) = tiny_inputs(DiscriminationTask::SubjectIdentity);
        let bundle = ModelBundle::new(spec, 21);
        let cfg = tiny_config(1, 1, 1);
        let tm = run_training(&inputs, &cfg, DiscriminationTask::SubjectIdentity, bundle).unwrap();
        let last = tm.traces.last().unwrap();
        assert!(last.l_d.unwrap().is_finite());
        assert!(last.l_a.unwrap().is_finite());
    }

    #[test]
    fn step2_classification_loss_decreases() {
        let (inputs, spec) = tiny_inputs(DiscriminationTask::ActivityPairs);
        let mut bundle = ModelBundle::new(spec, 17);
        let cfg = tiny_config(2, 5, 0);
        let mut t = Trainer::new(&cfg, DiscriminationTask::ActivityPairs, &inputs);
        t.run_step1(&mut bundle).unwrap();
        t.run_step2(&mut bundle).unwrap();
        let step2: Vec<f64> = t
            .traces
            .iter()
            .filter(|e| e.step == "step2")
            .map(|e| e.l_c.unwrap())
            .collect();
        assert!(
            step2.last().unwrap() < step2.first().unwrap(),
            "L_C did not decrease: {step2:?}"
        );
    }

    #[test]
    fn plan_batches_covers_every_index_each_cycle() {
        let plan = plan_batches(10, 3, 8, 42);
        assert_eq!(plan.len(), 8);
        // first cycle = 4 chunks covering 0..10 exactly once
        let mut first: Vec<usize> = plan[..4].iter().flatten().copied().collect();
        first.sort_unstable();
        assert_eq!(first, (0..10).collect::<Vec<_>>());
        // second cycle reshuffles, still without repetition inside the cycle
        let mut second: Vec<usize> = plan[4..8].iter().flatten().copied().collect();
        second.sort_unstable();
        assert_eq!(second, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn pair_concat_split_round_trip() {
        let latents = Array2::from_shape_fn((6, LATENT_DIM), |(i, j)| (i * 100 + j) as f32);
        let concat = Trainer::concat_pair_latents(&latents);
        assert_eq!(concat.dim(), (3, 2 * LATENT_DIM));
        assert_eq!(concat[[0, 0]], latents[[0, 0]]);
        assert_eq!(concat[[0, LATENT_DIM]], latents[[3, 0]]);
        let back = Trainer::split_pair_grad(&concat);
        assert_eq!(back, latents);
    }

    #[test]
    fn fused_grads_match_analytic_losses() {
        // fused batched kernels vs the scalar f64 reference implementations
        let logits = Array2::from_shape_vec((2, 3), vec![0.2, -0.1, 0.4, 1.0, 0.0, -1.0]).unwrap();
        let labels = [2usize, 0usize];
        let (loss, grad) = ce_loss_grad(&logits, &labels);
        let probs = softmax_rows(&logits);
        let mut expected = 0.0;
        for (i, &l) in labels.iter().enumerate() {
            let p: Vec<f64> = probs.row(i).iter().map(|&v| v as f64).collect();
            expected += crate::losses::classification_loss(&p, l).unwrap();
        }
        assert!((loss - expected / 2.0).abs() < 1e-6);
        // gradient row sums vanish for softmax CE
        for row in grad.rows() {
            assert!(row.sum().abs() < 1e-6);
        }

        let z = Array2::from_shape_vec((2, 1), vec![0.3, -0.7]).unwrap();
        let (bce, _) = bce_loss_grad(&z, &[1, 0]);
        let d0 = sigmoid(0.3) as f64;
        let d1 = sigmoid(-0.7) as f64;
        let expected = (crate::losses::discrimination_loss(d0, 1).unwrap()
            + crate::losses::discrimination_loss(d1, 0).unwrap())
            / 2.0;
        assert!((bce - expected).abs() < 1e-6);

        let (adv, adv_grad) = adversarial_loss_grad(&z);
        let expected = (crate::losses::adversarial_loss(d0).unwrap()
            + crate::losses::adversarial_loss(d1).unwrap())
            / 2.0;
        assert!((adv - expected).abs() < 1e-6);
        assert!(adv_grad[[0, 0]] < 0.0); // pushes D(z) toward 1
    }

    #[test]
    fn uniform_ce_gradient_vanishes_at_uniform_logits() {
        let logits = Array2::<f32>::zeros((3, 4));
        let (loss, grad) = uniform_ce_loss_grad(&logits);
        assert!((loss - (4.0f64).ln()).abs() < 1e-6);
        assert!(grad.iter().all(|v| v.abs() < 1e-7));
    }
}
