//! Tabular diffusion with a handful of noise levels and no timestep input.
//!
//! Training noises each Poisson batch at every level `t = 1..T`, stacks the
//! `T` noised copies into one `bT`-row pass, and averages the per-level
//! losses per sample before a single DP-SGD update. Row `r` of the stack
//! belongs to sample `r % b`.

use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{decode, EncodedMatrix, RawTable};
use crate::error::{Error, Result};
use crate::nn::{build_generator, AdamState, Mode, Network};
use crate::privacy::{budget_exhausted, poisson_sample, privatize_factored, PrivacyParams, RdpLedger};
use crate::rng::{normal_matrix, seeded};

use super::bundle::{ModelBundle, ModelConfig, ModelKind, FORMAT_VERSION};
use super::log::{HaltReason, LogEntry, Phase, TrainingLog};
use super::schedule::{noise_data, NoiseSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionVariant {
    /// Predicts the added noise; sampling subtracts it level by level.
    NoisePredictor,
    /// Predicts the clean row; categorical spans are logits.
    Denoiser,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub diffusion_steps: usize,
    pub variant: DiffusionVariant,
    /// Expected Poisson batch size. Ignored for sampling when `privacy`
    /// fixes the rate.
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// `None` trains without clipping, noise, or accounting.
    pub privacy: Option<PrivacyParams>,
    /// Optional cap on processed batches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_batches: Option<u64>,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            diffusion_steps: 5,
            variant: DiffusionVariant::NoisePredictor,
            batch_size: 64,
            epochs: 300,
            learning_rate: 1e-3,
            privacy: None,
            max_batches: None,
        }
    }
}

impl DiffusionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.diffusion_steps == 0 {
            return bad("diffusion steps must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if let Some(p) = &self.privacy {
            p.validate()?;
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        match self.variant {
            DiffusionVariant::NoisePredictor => ModelKind::TableDiffusion,
            DiffusionVariant::Denoiser => ModelKind::TableDiffusionDenoiser,
        }
    }
}

/// Poisson rate: the private rate when set, else `B / m` capped at 1.
pub(crate) fn sampling_rate(privacy: Option<&PrivacyParams>, batch: usize, rows: usize) -> f64 {
    match privacy {
        Some(p) => p.sampling_rate,
        None => (batch as f64 / rows as f64).min(1.0),
    }
}

pub(crate) fn batches_per_epoch(q: f64) -> usize {
    (1.0 / q).ceil() as usize
}

/// Feature layout the denoiser loss and sampler need.
#[derive(Debug, Clone)]
pub(crate) struct SpanLayout {
    continuous: Vec<usize>,
    categorical: Vec<Range<usize>>,
}

impl SpanLayout {
    pub(crate) fn of(data: &EncodedMatrix) -> Self {
        SpanLayout {
            continuous: data.continuous_spans().map(|s| s.start).collect(),
            categorical: data.categorical_spans().map(|s| s.range()).collect(),
        }
    }
}

/// Replaces every categorical span of each row by its softmax.
pub(crate) fn span_softmax(values: &mut Array2<f64>, layout: &SpanLayout) {
    for mut row in values.rows_mut() {
        for span in &layout.categorical {
            let mut seg = row.slice_mut(s![span.clone()]);
            let max = seg.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            seg.mapv_inplace(|v| (v - max).exp());
            let total = seg.sum();
            seg.mapv_inplace(|v| v / total);
        }
    }
}

/// Per-sample loss (averaged over the `T` stacked copies) and `∂L_i/∂pred`.
fn noise_loss(pred: &Array2<f64>, target: &Array2<f64>, samples: usize) -> (Array1<f64>, Array2<f64>) {
    let (rows, n) = pred.dim();
    let copies = (rows / samples) as f64;
    let diff = pred - target;
    let row_loss = diff.mapv(|v| v * v).sum_axis(Axis(1)) / n as f64;
    let grad = diff * (2.0 / (n as f64 * copies));
    (per_sample_mean(&row_loss, samples), grad)
}

fn denoise_loss(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    samples: usize,
    layout: &SpanLayout,
) -> (Array1<f64>, Array2<f64>) {
    let rows = pred.nrows();
    let copies = (rows / samples) as f64;
    let mut row_loss = Array1::<f64>::zeros(rows);
    let mut grad = Array2::<f64>::zeros(pred.raw_dim());
    let n_cont = layout.continuous.len();
    if n_cont > 0 {
        let scale = 1.0 / n_cont as f64;
        for &c in &layout.continuous {
            for r in 0..rows {
                let d = pred[[r, c]] - target[[r, c]];
                row_loss[r] += d * d * scale;
                grad[[r, c]] = 2.0 * d * scale / copies;
            }
        }
    }
    let n_cat = layout.categorical.len();
    if n_cat > 0 {
        let scale = 1.0 / n_cat as f64;
        for r in 0..rows {
            for span in &layout.categorical {
                let logits = pred.slice(s![r, span.clone()]);
                let truth = target.slice(s![r, span.clone()]);
                let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                let log_z = max + logits.mapv(|v| (v - max).exp()).sum().ln();
                let mass = truth.sum();
                let mut kl = 0.0;
                for (j, (&l, &p)) in logits.iter().zip(truth.iter()).enumerate() {
                    let log_q = l - log_z;
                    if p > 0.0 {
                        kl += p * (p.ln() - log_q);
                    }
                    // ∂KL(p‖softmax(l))/∂l_j = q_j Σp − p_j
                    grad[[r, span.start + j]] = (log_q.exp() * mass - p) * scale / copies;
                }
                row_loss[r] += kl * scale;
            }
        }
    }
    (per_sample_mean(&row_loss, samples), grad)
}

fn per_sample_mean(row_loss: &Array1<f64>, samples: usize) -> Array1<f64> {
    let copies = row_loss.len() / samples;
    Array1::from_shape_fn(samples, |i| {
        row_loss.slice(s![i..;samples]).sum() / copies as f64
    })
}

/// Trains a diffusion model from scratch and returns the bundle and the
/// per-batch log. Privatized runs halt before the step that would push ε
/// past the target.
pub fn train_diffusion(
    data: &EncodedMatrix,
    config: &DiffusionConfig,
    seed: u64,
) -> Result<(ModelBundle, TrainingLog)> {
    config.validate()?;
    let m = data.n_rows();
    if m == 0 {
        return Err(Error::Empty("training data has no rows".into()));
    }
    let n = data.width();
    let schedule = NoiseSchedule::cosine(config.diffusion_steps)?;
    let layout = SpanLayout::of(data);
    let privacy = config.privacy.as_ref();
    let q = sampling_rate(privacy, config.batch_size, m);
    let per_epoch = batches_per_epoch(q);

    let mut rng = seeded(seed);
    let mut net: Network<f64> = build_generator(n, n, &mut rng)?;
    net.set_mode(Mode::Train);
    let mut adam = AdamState::new(net.param_count(), config.learning_rate);
    let mut ledger = RdpLedger::default();
    let mut entries = Vec::new();
    let mut processed: u64 = 0;
    let mut halt = HaltReason::EpochLimit;

    'epochs: for epoch in 0..config.epochs {
        for batch in 0..per_epoch {
            if config.max_batches.is_some_and(|cap| processed >= cap) {
                halt = HaltReason::BatchLimit;
                break 'epochs;
            }
            if let Some(p) = privacy {
                if budget_exhausted(&ledger, p) {
                    halt = HaltReason::BudgetExhausted;
                    break 'epochs;
                }
            }
            let idx = poisson_sample(m, q, &mut rng);
            if idx.is_empty() {
                continue;
            }
            let b = idx.len();
            let x = data.values.select(Axis(0), &idx);
            let mut inputs = Array2::<f64>::zeros((b * schedule.steps(), n));
            let mut targets = Array2::<f64>::zeros((b * schedule.steps(), n));
            for t in 1..=schedule.steps() {
                let rows = s![(t - 1) * b..t * b, ..];
                let (noisy, z) = noise_data(x.view(), schedule.beta(t), &mut rng);
                inputs.slice_mut(rows).assign(&noisy);
                match config.variant {
                    DiffusionVariant::NoisePredictor => targets.slice_mut(rows).assign(&z),
                    DiffusionVariant::Denoiser => targets.slice_mut(rows).assign(&x),
                }
            }
            let (pred, cache) = net.forward(inputs.view(), &mut rng)?;
            let (losses, loss_grad) = match config.variant {
                DiffusionVariant::NoisePredictor => noise_loss(&pred, &targets, b),
                DiffusionVariant::Denoiser => denoise_loss(&pred, &targets, b, &layout),
            };
            let loss = losses.mean().unwrap_or(0.0);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss at epoch {epoch}, batch {batch}"
                )));
            }
            let (grads, _) = net.backward(cache, loss_grad.view(), b)?;
            let update = match privacy {
                Some(p) => privatize_factored(&grads, p.clip_norm, p.noise_multiplier, &mut rng)?,
                None => grads.sum() / b as f64,
            };
            adam.step(&mut net, update.view())?;
            let epsilon = match privacy {
                Some(p) => {
                    ledger.accumulate_step(p.sampling_rate, p.noise_multiplier);
                    ledger.epsilon(p.delta)?
                }
                None => 0.0,
            };
            processed += 1;
            entries.push(LogEntry {
                epoch,
                batch,
                phase: Phase::Train,
                loss,
                epsilon,
            });
        }
    }

    let (epsilon_spent, delta) = match privacy {
        Some(p) => (ledger.epsilon(p.delta)?, Some(p.delta)),
        None => (0.0, None),
    };
    let bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        kind: config.kind(),
        schema: data.schema.clone(),
        spans: data.spans.clone(),
        layer_specs: net.layers().to_vec(),
        parameters: net.params().to_vec(),
        adam: Some(adam),
        critic: None,
        config: ModelConfig::Diffusion(config.clone()),
        ledger,
        epsilon_spent,
        delta,
        seed,
    };
    Ok((bundle, TrainingLog { entries, halt }))
}

/// Runs the reverse process from `x̂_T ~ N(0, I)` in the encoded space.
pub(crate) fn reverse_process(
    net: &Network<f64>,
    config: &DiffusionConfig,
    layout: &SpanLayout,
    start: Array2<f64>,
) -> Result<Array2<f64>> {
    let schedule = NoiseSchedule::cosine(config.diffusion_steps)?;
    // Eval mode draws nothing; the generator is a placeholder.
    let mut unused = seeded(0);
    let mut x = start;
    for t in (1..=schedule.steps()).rev() {
        let out = net.predict(x.view(), &mut unused)?;
        match config.variant {
            DiffusionVariant::NoisePredictor => {
                x = x - out * schedule.beta(t).sqrt();
            }
            DiffusionVariant::Denoiser => {
                x = out;
                span_softmax(&mut x, layout);
            }
        }
    }
    Ok(x)
}

/// Draws `rows` synthetic records from a diffusion bundle.
pub fn sample_diffusion(bundle: &ModelBundle, rows: usize, seed: u64) -> Result<RawTable> {
    let ModelConfig::Diffusion(config) = &bundle.config else {
        return Err(Error::Bundle("bundle does not hold a diffusion model".into()));
    };
    if rows == 0 {
        return Err(Error::InvalidArgument("row count must be at least 1".into()));
    }
    let mut net = bundle.network()?;
    net.set_mode(Mode::Eval);
    let n = bundle.schema.encoded_width();
    let mut rng = seeded(seed);
    let start = normal_matrix::<f64, _>(rows, n, &mut rng);
    let probe = EncodedMatrix::new(Array2::zeros((0, n)), bundle.schema.clone())?;
    let layout = SpanLayout::of(&probe);
    let x = reverse_process(&net, config, &layout, start)?;
    decode(&EncodedMatrix::new(x, bundle.schema.clone())?)
}

/// Loss of `net` on a fixed noised batch, for diagnostics and tests.
pub fn evaluate_batch_loss(
    net: &Network<f64>,
    data: &EncodedMatrix,
    config: &DiffusionConfig,
    batch: ArrayView2<'_, f64>,
    seed: u64,
) -> Result<f64> {
    let schedule = NoiseSchedule::cosine(config.diffusion_steps)?;
    let layout = SpanLayout::of(data);
    let mut rng = seeded(seed);
    let b = batch.nrows();
    let mut total = 0.0;
    for t in 1..=schedule.steps() {
        let (noisy, z) = noise_data(batch, schedule.beta(t), &mut rng);
        let pred = net.predict(noisy.view(), &mut rng)?;
        let (losses, _) = match config.variant {
            DiffusionVariant::NoisePredictor => noise_loss(&pred, &z, b),
            DiffusionVariant::Denoiser => denoise_loss(&pred, &batch.to_owned(), b, &layout),
        };
        total += losses.mean().unwrap_or(0.0);
    }
    Ok(total / schedule.steps() as f64)
}
