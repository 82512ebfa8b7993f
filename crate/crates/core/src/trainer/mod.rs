//! Likelihood training with plain SGD.
//!
//! Recipe: weights uniform in ±√(3/d), biases 0.1; shuffled mini-batches of
//! 64; inverted dropout 0.2 on embeddings and recurrent outputs; loss is the
//! mean negative log-likelihood per target token (EOS included); global-norm
//! gradient clipping at 10; learning rate 2 for five epochs, halved every
//! epoch after that; ten epochs.

mod checkpoint;

use std::ops::ControlFlow;
use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use checkpoint::{load_checkpoint, load_checkpoint_into, save_checkpoint, MAGIC, VERSION};

use crate::dropout::Dropout;
use crate::encoder::EncodeOptions;
use crate::error::{Error, Result};
use crate::math::{ParamKind, ParamStore, Tape};
use crate::model::{Model, ModelConfig};
use crate::text::{Example, Vocabulary};

pub const INIT_BIAS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub model: ModelConfig,
    pub vocab_size: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// Halve the learning rate every epoch after the fifth.
    pub schedule: bool,
    pub clip: f64,
    pub dropout: f64,
    pub seed: u64,
}

impl TrainingConfig {
    pub fn new(model: ModelConfig, vocab_size: usize) -> Self {
        TrainingConfig {
            model,
            vocab_size,
            epochs: 10,
            batch_size: 64,
            lr0: 2.0,
            schedule: true,
            clip: 10.0,
            dropout: 0.2,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs < 1 {
            return fail("epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return fail("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must be in [0, 1)");
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return fail("clip threshold must be positive");
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return fail("learning rate must be finite and non-negative");
        }
        if self.model.dim == 0 {
            return fail("dimension must be positive");
        }
        Ok(())
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        if self.schedule {
            lr_schedule(self.lr0, epoch)
        } else {
            self.lr0
        }
    }
}

/// `lr0` for epochs 1–5, then halved once per epoch.
pub fn lr_schedule(lr0: f64, epoch: usize) -> f64 {
    assert!(epoch >= 1, "epochs are 1-based");
    if epoch <= 5 {
        lr0
    } else {
        lr0 * 0.5f64.powi((epoch - 5) as i32)
    }
}

/// Half-width of the uniform weight initializer.
pub fn init_range(dim: usize) -> f64 {
    (3.0 / dim as f64).sqrt()
}

/// Weights ~ U(−√(3/d), √(3/d)); biases = 0.1. Deterministic per seed.
pub fn init_params(store: &mut ParamStore, dim: usize, seed: u64) {
    let r = init_range(dim);
    let dist = Uniform::new_inclusive(-r, r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in store.iter_mut() {
        match t.kind {
            ParamKind::Weight => t.values.iter_mut().for_each(|v| *v = dist.sample(&mut rng)),
            ParamKind::Bias => t.values.iter_mut().for_each(|v| *v = INIT_BIAS),
        }
    }
}

/// Global-norm clipping: if ‖g‖₂ exceeds `threshold`, every gradient is
/// scaled by `threshold / ‖g‖₂`. Returns the factor applied.
pub fn clip_gradients(store: &mut ParamStore, threshold: f64) -> Result<f64> {
    let mut sq = 0.0;
    for t in store.iter() {
        if let Some(bad) = t.grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {} ({bad})", t.name)));
        }
        sq += t.grad.iter().map(|g| g * g).sum::<f64>();
    }
    let norm = sq.sqrt();
    if norm <= threshold {
        return Ok(1.0);
    }
    let scale = threshold / norm;
    for t in store.iter_mut() {
        t.grad.iter_mut().for_each(|g| *g *= scale);
    }
    Ok(scale)
}

pub fn grad_norm(store: &ParamStore) -> f64 {
    store
        .iter()
        .flat_map(|t| t.grad.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

fn sgd_step(store: &mut ParamStore, lr: f64) {
    if lr == 0.0 {
        return;
    }
    for t in store.iter_mut() {
        for (v, g) in t.values.iter_mut().zip(&t.grad) {
            *v -= lr * g;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training NLL per target token (with dropout, if enabled).
    pub mean_nll: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn lrs(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.lr).collect()
    }

    pub fn nlls(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_nll).collect()
    }

    /// `epoch,lr,mean_nll,seconds` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,mean_nll,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{:.6}\n",
                e.epoch, e.lr, e.mean_nll, e.seconds
            ));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Invalid(#[from] Error),

    /// The loss became non-finite; `last_good` holds the parameters from the
    /// end of the last completed epoch (or the initialization).
    #[error("training diverged during epoch {epoch}")]
    Diverged {
        epoch: usize,
        last_good: Box<Model>,
        history: TrainHistory,
    },
}

/// Builds and initializes a model, then trains it.
pub fn train(
    config: &TrainingConfig,
    corpus: &[Example],
    vocab: Vocabulary,
) -> std::result::Result<(Model, TrainHistory), TrainError> {
    config.validate()?;
    let mut model = Model::new(config.model, vocab)?;
    init_params(&mut model.params, config.model.dim, config.seed);
    let history = train_model(&mut model, config, corpus, |_, _| ControlFlow::Continue(()))?;
    Ok((model, history))
}

fn shuffle_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Trains `model` in place. `on_epoch` sees the model after every epoch and
/// may stop training early.
pub fn train_model<F>(
    model: &mut Model,
    config: &TrainingConfig,
    corpus: &[Example],
    mut on_epoch: F,
) -> std::result::Result<TrainHistory, TrainError>
where
    F: FnMut(&Model, &EpochRecord) -> ControlFlow<()>,
{
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Config("empty training corpus".into()).into());
    }
    if model.config != config.model {
        return Err(Error::Mismatch("model and training configs differ".into()).into());
    }
    let mut dropout = Dropout::new(config.dropout, config.seed.wrapping_add(1));
    let opts = EncodeOptions::default();
    let mut history = TrainHistory::default();
    let mut last_good = model.params.clone();

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let lr = config.lr(epoch);
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed(
            config.seed,
            epoch,
        )));

        let (mut loss_sum, mut token_sum) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            model.params.zero_grads();
            let tokens: usize = batch.iter().map(|&i| corpus[i].target.len() + 1).sum();
            let seed = 1.0 / tokens as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let mut tape = Tape::new();
                match model.example_loss(&mut tape, &corpus[i], &opts, &mut dropout) {
                    Ok((loss, _)) => {
                        batch_loss += tape.scalar(loss);
                        tape.backward_scaled(loss, seed, &mut model.params)?;
                    }
                    // non-finite parameters surface as numeric errors in the forward pass
                    Err(Error::NonFinite(_) | Error::EmptySupport) => batch_loss = f64::NAN,
                    Err(e) => return Err(e.into()),
                }
                if !batch_loss.is_finite() {
                    break;
                }
            }
            let clipped = if batch_loss.is_finite() {
                clip_gradients(&mut model.params, config.clip).ok()
            } else {
                None
            };
            if clipped.is_none() {
                model.params = last_good.clone();
                return Err(TrainError::Diverged {
                    epoch,
                    last_good: Box::new(model.clone()),
                    history,
                });
            }
            sgd_step(&mut model.params, lr);
            loss_sum += batch_loss;
            token_sum += tokens;
        }
        if model
            .params
            .iter()
            .any(|t| t.values.iter().any(|v| !v.is_finite()))
        {
            model.params = last_good.clone();
            return Err(TrainError::Diverged {
                epoch,
                last_good: Box::new(model.clone()),
                history,
            });
        }

        let record = EpochRecord {
            epoch,
            lr,
            mean_nll: loss_sum / token_sum as f64,
            seconds: started.elapsed().as_secs_f64(),
        };
        history.epochs.push(record);
        last_good = model.params.clone();
        if on_epoch(model, &record).is_break() {
            break;
        }
    }
    Ok(history)
}

/// Teacher-forced mean NLL per target token, dropout off.
pub fn mean_nll(model: &Model, corpus: &[Example]) -> Result<f64> {
    let opts = EncodeOptions::default();
    let mut dropout = Dropout::off();
    let (mut total, mut tokens) = (0.0, 0usize);
    for ex in corpus {
        let mut tape = Tape::new();
        let (loss, n) = model.example_loss(&mut tape, ex, &opts, &mut dropout)?;
        total += tape.scalar(loss);
        tokens += n;
    }
    Ok(total / tokens as f64)
}
