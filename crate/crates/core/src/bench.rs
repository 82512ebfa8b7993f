//! Wall-clock decode timing across output vocabulary sizes.

use std::time::Instant;

use crate::encoder::EncoderMode;
use crate::error::{Error, Result};
use crate::inference::greedy_fixed_steps;
use crate::model::{Model, ModelConfig};
use crate::text::Vocabulary;
use crate::trainer::init_params;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub vocab_size: usize,
    /// Mean wall-clock seconds to decode one source.
    pub seconds_per_sentence: f64,
}

/// Vocabulary of `size` entries: the specials plus `w0`, `w1`, ...
pub fn filler_vocab(size: usize) -> Result<Vocabulary> {
    if size < 5 {
        return Err(Error::Config(format!("vocabulary size {size} is below 5")));
    }
    Vocabulary::from_words((0..size - 4).map(|i| format!("w{i}")))
}

/// Times `steps` greedy decoding steps per source (EOS ignored, so every
/// size does the same number of steps) for randomly initialised LSTM copy models
/// of width `dim`, one per vocabulary size. Each source is decoded `reps`
/// times; the mean per source is reported.
pub fn bench_decode(
    vocab_sizes: &[usize],
    dim: usize,
    sources: &[Vec<Vec<String>>],
    steps: usize,
    reps: usize,
) -> Result<Vec<BenchRow>> {
    if sources.is_empty() || reps == 0 || steps == 0 {
        return Err(Error::Config(
            "bench needs sources, reps >= 1 and steps >= 1".into(),
        ));
    }
    let mut rows = Vec::with_capacity(vocab_sizes.len());
    for &v in vocab_sizes {
        let mut model = Model::new(ModelConfig::new(dim, EncoderMode::LSTM), filler_vocab(v)?)?;
        init_params(&mut model.params, dim, 0);
        // warm-up so allocation of the first tape is not timed
        greedy_fixed_steps(&model, &sources[0], 1)?;
        let start = Instant::now();
        for _ in 0..reps {
            for s in sources {
                greedy_fixed_steps(&model, s, steps)?;
            }
        }
        let secs = start.elapsed().as_secs_f64() / (reps * sources.len()) as f64;
        rows.push(BenchRow {
            vocab_size: v,
            seconds_per_sentence: secs,
        });
    }
    Ok(rows)
}

/// Seconds per sentence at the largest over the smallest vocabulary in the
/// published LSTM timings.
pub const REFERENCE_RATIO_64K_2K: f64 = 0.356 / 0.076;
