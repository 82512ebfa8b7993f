//! Binary checkpoint format, little-endian throughout:
//!
//! ```text
//! magic "RAS2" | u32 version
//! config: u32 dim | u8 mode | u8 copy | u32 vocab_size | u32 epochs
//!         u32 batch_size | f64 lr0 | u8 schedule | f64 clip | f64 dropout | u64 seed
//! vocab:  u32 count, then per token u32 byte length + UTF-8 bytes
//! tensors: u32 count, then per tensor u32 name length + name | u8 rank
//!          | u64 per dim | f64 per value
//! ```

use std::fs;
use std::path::Path;

use super::TrainingConfig;
use crate::encoder::EncoderMode;
use crate::error::{Error, Result};
use crate::math::Shape;
use crate::model::{Model, ModelConfig};
use crate::text::Vocabulary;

pub const MAGIC: &[u8; 4] = b"RAS2";
pub const VERSION: u32 = 1;

pub fn save_checkpoint(
    model: &Model,
    config: &TrainingConfig,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut w = Vec::new();
    w.extend_from_slice(MAGIC);
    put_u32(&mut w, VERSION);

    put_u32(&mut w, config.model.dim as u32);
    w.push(config.model.mode.code());
    w.push(config.model.copy as u8);
    put_u32(&mut w, config.vocab_size as u32);
    put_u32(&mut w, config.epochs as u32);
    put_u32(&mut w, config.batch_size as u32);
    put_f64(&mut w, config.lr0);
    w.push(config.schedule as u8);
    put_f64(&mut w, config.clip);
    put_f64(&mut w, config.dropout);
    w.extend_from_slice(&config.seed.to_le_bytes());

    put_u32(&mut w, model.vocab.len() as u32);
    for t in model.vocab.tokens() {
        put_str(&mut w, t);
    }

    put_u32(&mut w, model.params.len() as u32);
    for t in model.params.iter() {
        put_str(&mut w, &t.name);
        match t.shape {
            Shape::Vector(n) => {
                w.push(1);
                w.extend_from_slice(&(n as u64).to_le_bytes());
            }
            Shape::Matrix(r, c) => {
                w.push(2);
                w.extend_from_slice(&(r as u64).to_le_bytes());
                w.extend_from_slice(&(c as u64).to_le_bytes());
            }
        }
        for v in &t.values {
            put_f64(&mut w, *v);
        }
    }
    fs::write(path, w)?;
    Ok(())
}

/// Fully parsed checkpoint contents.
struct Parsed {
    config: TrainingConfig,
    vocab: Vocabulary,
    tensors: Vec<(String, Shape, Vec<f64>)>,
}

/// Rebuilds the model exactly as saved, with its training config.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, TrainingConfig)> {
    let parsed = parse(&fs::read(path)?)?;
    let mut model = Model::new(parsed.config.model, parsed.vocab.clone())?;
    fill(&mut model, &parsed)?;
    Ok((model, parsed.config))
}

/// Loads tensors into an existing model; every name and shape must match.
/// Nothing is written unless the whole file validates.
pub fn load_checkpoint_into(path: impl AsRef<Path>, model: &mut Model) -> Result<TrainingConfig> {
    let parsed = parse(&fs::read(path)?)?;
    if parsed.vocab != model.vocab {
        return Err(Error::Mismatch(
            "checkpoint vocabulary differs from the model's".into(),
        ));
    }
    let mut staged = model.clone();
    fill(&mut staged, &parsed)?;
    *model = staged;
    Ok(parsed.config)
}

fn fill(model: &mut Model, parsed: &Parsed) -> Result<()> {
    if parsed.tensors.len() != model.params.len() {
        return Err(Error::Mismatch(format!(
            "checkpoint has {} tensors, model expects {}",
            parsed.tensors.len(),
            model.params.len()
        )));
    }
    for (name, shape, values) in &parsed.tensors {
        let id = model
            .params
            .by_name(name)
            .ok_or_else(|| Error::Mismatch(format!("unexpected tensor {name}")))?;
        let t = model.params.get_mut(id);
        if t.shape != *shape {
            return Err(Error::Mismatch(format!(
                "tensor {name}: checkpoint shape {shape}, model shape {}",
                t.shape
            )));
        }
        t.values.copy_from_slice(values);
    }
    Ok(())
}

fn parse(bytes: &[u8]) -> Result<Parsed> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let dim = r.u32()? as usize;
    let mode = EncoderMode::from_code(r.u8()?)
        .ok_or_else(|| Error::Checkpoint("unknown encoder mode".into()))?;
    let copy = r.u8()? != 0;
    let vocab_size = r.u32()? as usize;
    let epochs = r.u32()? as usize;
    let batch_size = r.u32()? as usize;
    let lr0 = r.f64()?;
    let schedule = r.u8()? != 0;
    let clip = r.f64()?;
    let dropout = r.f64()?;
    let seed = r.u64()?;
    let config = TrainingConfig {
        model: ModelConfig { dim, mode, copy },
        vocab_size,
        epochs,
        batch_size,
        lr0,
        schedule,
        clip,
        dropout,
        seed,
    };

    let n_tokens = r.u32()? as usize;
    let mut tokens = Vec::with_capacity(n_tokens.min(1 << 20));
    for _ in 0..n_tokens {
        tokens.push(r.string()?);
    }
    let vocab = if tokens.len() >= 4 {
        Vocabulary::from_words(tokens[4..].iter().cloned())
            .ok()
            .filter(|v| v.tokens() == tokens.as_slice())
    } else {
        None
    }
    .ok_or_else(|| Error::Checkpoint("invalid vocabulary block".into()))?;

    let n_tensors = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n_tensors.min(1 << 12));
    for _ in 0..n_tensors {
        let name = r.string()?;
        let shape = match r.u8()? {
            1 => Shape::Vector(r.u64()? as usize),
            2 => Shape::Matrix(r.u64()? as usize, r.u64()? as usize),
            k => return Err(Error::Checkpoint(format!("tensor {name}: bad rank {k}"))),
        };
        let len = shape.len();
        if len.checked_mul(8).is_none_or(|b| b > r.remaining()) {
            return Err(Error::Checkpoint(format!("truncated tensor {name}")));
        }
        let values = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        tensors.push((name, shape, values));
    }
    if r.remaining() != 0 {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok(Parsed {
        config,
        vocab,
        tensors,
    })
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_str(w: &mut Vec<u8>, s: &str) {
    put_u32(w, s.len() as u32);
    w.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Checkpoint("non-UTF-8 string".into()))
    }
}
