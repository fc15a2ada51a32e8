//! Wasserstein GAN baseline with a DP critic.
//!
//! Only the critic sees real rows, so only critic updates are privatized
//! and charged. The generator learns through the critic's input gradient.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{decode, EncodedMatrix, RawTable};
use crate::error::{Error, Result};
use crate::nn::{build_discriminator, build_generator, AdamState, CriticHead, Mode, Network};
use crate::privacy::{budget_exhausted, poisson_sample, privatize_factored, PrivacyParams, RdpLedger};
use crate::rng::{normal_matrix, seeded, SeededRng};

use super::bundle::{ModelBundle, ModelConfig, ModelKind, NetworkState, FORMAT_VERSION};
use super::diffusion::{batches_per_epoch, sampling_rate};
use super::log::{HaltReason, LogEntry, Phase, TrainingLog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub generator_lr: f64,
    pub critic_lr: f64,
    /// Critic updates per generator update.
    pub critic_steps: usize,
    pub latent_dim: usize,
    /// Critic parameters are clamped to `[−w, w]` after every update.
    pub weight_clip: f64,
    pub privacy: Option<PrivacyParams>,
    /// Optional cap on critic batches.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_batches: Option<u64>,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            batch_size: 64,
            epochs: 300,
            generator_lr: 1e-3,
            critic_lr: 1e-3,
            critic_steps: 5,
            latent_dim: 128,
            weight_clip: 0.01,
            privacy: None,
            max_batches: None,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_owned()));
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch size and epochs must be at least 1");
        }
        if self.critic_steps == 0 {
            return bad("critic steps must be at least 1");
        }
        if self.latent_dim == 0 {
            return bad("latent dimension must be at least 1");
        }
        if !(self.weight_clip > 0.0 && self.weight_clip.is_finite()) {
            return bad("weight clip must be positive");
        }
        for lr in [self.generator_lr, self.critic_lr] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad("learning rates must be positive");
            }
        }
        if let Some(p) = &self.privacy {
            p.validate()?;
        }
        Ok(())
    }
}

/// One generator update on `batch` fresh latent draws. Takes no data: the
/// only path to the real rows is through the critic's parameters.
pub fn generator_step(
    generator: &mut Network<f64>,
    adam: &mut AdamState<f64>,
    critic: &Network<f64>,
    batch: usize,
    rng: &mut SeededRng,
) -> Result<f64> {
    let z = normal_matrix::<f64, _>(batch, generator.in_dim(), rng);
    let (fake, g_cache) = generator.forward(z.view(), rng)?;
    let (scores, c_cache) = critic.forward(fake.view(), rng)?;
    let loss = -scores.mean().unwrap_or(0.0);
    if !loss.is_finite() {
        return Err(Error::NonFinite("generator loss".into()));
    }
    let d_scores = Array2::from_elem((batch, 1), -1.0 / batch as f64);
    let (_, d_fake) = critic.backward(c_cache, d_scores.view(), batch)?;
    let (grads, _) = generator.backward(g_cache, d_fake.view(), batch)?;
    adam.step(generator, grads.sum().view())?;
    Ok(loss)
}

struct CriticUpdate {
    loss: f64,
}

fn critic_step(
    critic: &mut Network<f64>,
    adam: &mut AdamState<f64>,
    generator: &Network<f64>,
    real: &Array2<f64>,
    config: &GanConfig,
    rng: &mut SeededRng,
) -> Result<CriticUpdate> {
    let b = real.nrows();
    let z = normal_matrix::<f64, _>(b, generator.in_dim(), rng);
    let fake = generator.predict(z.view(), rng)?;

    let (real_scores, real_cache) = critic.forward(real.view(), rng)?;
    let (fake_scores, fake_cache) = critic.forward(fake.view(), rng)?;
    let loss = fake_scores.mean().unwrap_or(0.0) - real_scores.mean().unwrap_or(0.0);
    if !loss.is_finite() {
        return Err(Error::NonFinite("critic loss".into()));
    }
    // Per-sample real term: ℓ_i = −D(x_i).
    let real_grads = critic
        .backward(real_cache, Array2::from_elem((b, 1), -1.0).view(), b)?
        .0;
    let real_update = match &config.privacy {
        Some(p) => privatize_factored(&real_grads, p.clip_norm, p.noise_multiplier, rng)?,
        None => real_grads.sum() / b as f64,
    };
    // The fake term is a function of the generator alone.
    let fake_update = critic
        .backward(fake_cache, Array2::from_elem((b, 1), 1.0 / b as f64).view(), b)?
        .0
        .sum();
    adam.step(critic, (real_update + fake_update).view())?;
    critic.clamp_params(config.weight_clip);
    Ok(CriticUpdate { loss })
}

pub fn train_dpwgan(data: &EncodedMatrix, config: &GanConfig, seed: u64) -> Result<(ModelBundle, TrainingLog)> {
    config.validate()?;
    let m = data.n_rows();
    if m == 0 {
        return Err(Error::Empty("training data has no rows".into()));
    }
    let n = data.width();
    let privacy = config.privacy.as_ref();
    let q = sampling_rate(privacy, config.batch_size, m);
    let per_epoch = batches_per_epoch(q);

    let mut rng = seeded(seed);
    let mut generator: Network<f64> = build_generator(config.latent_dim, n, &mut rng)?;
    let mut critic: Network<f64> = build_discriminator(n, CriticHead::Wasserstein, &mut rng)?;
    generator.set_mode(Mode::Train);
    critic.set_mode(Mode::Train);
    let mut g_adam = AdamState::new(generator.param_count(), config.generator_lr);
    let mut c_adam = AdamState::new(critic.param_count(), config.critic_lr);
    let mut ledger = RdpLedger::default();
    let mut entries = Vec::new();
    let mut critic_updates: u64 = 0;
    let mut halt = HaltReason::EpochLimit;

    'epochs: for epoch in 0..config.epochs {
        for batch in 0..per_epoch {
            if config.max_batches.is_some_and(|cap| critic_updates >= cap) {
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
            let real = data.values.select(Axis(0), &idx);
            let update = critic_step(&mut critic, &mut c_adam, &generator, &real, config, &mut rng)?;
            let epsilon = match privacy {
                Some(p) => {
                    ledger.accumulate_step(p.sampling_rate, p.noise_multiplier);
                    ledger.epsilon(p.delta)?
                }
                None => 0.0,
            };
            critic_updates += 1;
            entries.push(LogEntry {
                epoch,
                batch,
                phase: Phase::Critic,
                loss: update.loss,
                epsilon,
            });
            if critic_updates % config.critic_steps as u64 == 0 {
                let loss = generator_step(&mut generator, &mut g_adam, &critic, config.batch_size, &mut rng)?;
                entries.push(LogEntry {
                    epoch,
                    batch,
                    phase: Phase::Generator,
                    loss,
                    epsilon,
                });
            }
        }
    }

    let (epsilon_spent, delta) = match privacy {
        Some(p) => (ledger.epsilon(p.delta)?, Some(p.delta)),
        None => (0.0, None),
    };
    let bundle = ModelBundle {
        format_version: FORMAT_VERSION,
        kind: ModelKind::DpWgan,
        schema: data.schema.clone(),
        spans: data.spans.clone(),
        layer_specs: generator.layers().to_vec(),
        parameters: generator.params().to_vec(),
        adam: Some(g_adam),
        critic: Some(NetworkState {
            layer_specs: critic.layers().to_vec(),
            parameters: critic.params().to_vec(),
        }),
        config: ModelConfig::Gan(config.clone()),
        ledger,
        epsilon_spent,
        delta,
        seed,
    };
    Ok((bundle, TrainingLog { entries, halt }))
}

/// Decodes `G(z)` for `rows` latent draws.
pub fn sample_gan(bundle: &ModelBundle, rows: usize, seed: u64) -> Result<RawTable> {
    let ModelConfig::Gan(config) = &bundle.config else {
        return Err(Error::Bundle("bundle does not hold a GAN".into()));
    };
    if rows == 0 {
        return Err(Error::InvalidArgument("row count must be at least 1".into()));
    }
    let mut generator = bundle.network()?;
    generator.set_mode(Mode::Eval);
    let mut rng = seeded(seed);
    let z = normal_matrix::<f64, _>(rows, config.latent_dim, &mut rng);
    let x = generator.predict(z.view(), &mut rng)?;
    decode(&EncodedMatrix::new(x, bundle.schema.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode, Cell, ColumnSpec, ColumnType, TableSchema};

    fn table(rows: usize) -> RawTable {
        let schema = TableSchema::new(vec![
            ColumnSpec::categorical("k", vec!["p".into(), "q".into()]),
            ColumnSpec::continuous("v", 0.0, 4.0, true),
        ])
        .unwrap();
        let rows = (0..rows)
            .map(|i| vec![Cell::Category(["p", "q"][i % 2].into()), Cell::Number((i % 5) as f64)])
            .collect();
        RawTable::new(schema, rows).unwrap()
    }

    fn small_config() -> GanConfig {
        GanConfig {
            batch_size: 16,
            epochs: 2,
            latent_dim: 8,
            ..GanConfig::default()
        }
    }

    #[test]
    fn critic_weights_stay_clamped() {
        let data = encode(&table(64)).unwrap();
        let (bundle, log) = train_dpwgan(&data, &small_config(), 1).unwrap();
        let critic = bundle.critic.as_ref().unwrap();
        assert!(critic.parameters.iter().all(|p| p.abs() <= 0.01));
        assert!(!log.losses(Phase::Generator).is_empty());
    }

    #[test]
    fn generator_step_uses_no_real_rows() {
        // The signature admits no data; check it still moves the generator.
        let mut rng = seeded(2);
        let mut g: Network<f64> = build_generator(4, 3, &mut rng).unwrap();
        let c: Network<f64> = build_discriminator(3, CriticHead::Wasserstein, &mut rng).unwrap();
        let before = g.params().clone();
        let mut adam = AdamState::new(g.param_count(), 1e-3);
        let loss = generator_step(&mut g, &mut adam, &c, 8, &mut rng).unwrap();
        assert!(loss.is_finite());
        assert_ne!(&before, g.params());
    }

    #[test]
    fn privatized_run_charges_only_critic_steps() {
        let data = encode(&table(200)).unwrap();
        let mut config = small_config();
        config.epochs = 200;
        config.privacy = Some(PrivacyParams::new(1.0, 2.0, 0.08, 1e-5, 1.0).unwrap());
        let (bundle, log) = train_dpwgan(&data, &config, 4).unwrap();
        assert_eq!(log.halt, HaltReason::BudgetExhausted);
        assert!(bundle.epsilon_spent <= 1.0);
        assert_eq!(bundle.ledger.steps as usize, log.losses(Phase::Critic).len());
        assert_eq!(log.losses(Phase::Generator).len(), log.losses(Phase::Critic).len() / 5);
    }

    #[test]
    fn samples_stay_in_vocabulary_and_range() {
        let data = encode(&table(64)).unwrap();
        let (bundle, _) = train_dpwgan(&data, &small_config(), 5).unwrap();
        let out = sample_gan(&bundle, 5, 1).unwrap();
        assert_eq!(out.n_rows(), 5);
        assert_eq!(out, sample_gan(&bundle, 5, 1).unwrap());
        let ColumnType::Categorical { vocabulary } = &out.schema().columns[0].ty else {
            unreachable!()
        };
        for row in out.rows() {
            assert!(vocabulary.iter().any(|v| Some(v.as_str()) == row[0].as_category()));
            let v = row[1].as_number().unwrap();
            assert!((0.0..=4.0).contains(&v) && v.fract() == 0.0);
        }
    }
}
