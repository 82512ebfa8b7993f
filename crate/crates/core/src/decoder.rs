//! Attention LSTM decoder whose output is one distribution over generating
//! a vocabulary word or copying a source position.
//!
//! Per step: attention over the second-read states with the previous
//! decoder state gives the context `c_t`; the LSTM consumes
//! `[y_{t−1}, c_t]`; the new state scores every vocabulary word (`W_out`,
//! `b_out`) and every source position (`v_pᵀ tanh(W_p s_t + U_p h²_i)`), and
//! a single softmax over the concatenation yields the joint distribution.
//! Previous words outside the vocabulary that occur in the source are fed
//! back as `tanh(W_c h²_i + b_c)`.

use crate::dropout::Dropout;
use crate::encoder::{lstm_cell, EncodedSource, LstmParams};
use crate::error::{Error, Result};
use crate::math::{NodeId, ParamId, ParamKind, ParamStore, Shape, Tape};
use crate::text::vocab::{Vocabulary, BOS_ID, PAD_ID, UNK_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderParams {
    pub dim: usize,
    pub vocab_size: usize,
    pub lstm: LstmParams,
    pub v_a: ParamId,
    pub w_a: ParamId,
    pub u_a: ParamId,
    pub w_c: ParamId,
    pub b_c: ParamId,
    pub w_out: ParamId,
    pub b_out: ParamId,
    pub v_p: ParamId,
    pub w_p: ParamId,
    pub u_p: ParamId,
}

impl DecoderParams {
    pub fn register(store: &mut ParamStore, dim: usize, vocab_size: usize) -> Self {
        let d = dim;
        let sq = Shape::Matrix(d, d);
        DecoderParams {
            dim,
            vocab_size,
            lstm: LstmParams::register(store, "dec.lstm", 2 * d, d),
            v_a: store.add("dec.v_a", Shape::Vector(d), ParamKind::Weight),
            w_a: store.add("dec.w_a", sq, ParamKind::Weight),
            u_a: store.add("dec.u_a", sq, ParamKind::Weight),
            w_c: store.add("dec.w_c", sq, ParamKind::Weight),
            b_c: store.add("dec.b_c", Shape::Vector(d), ParamKind::Bias),
            w_out: store.add("dec.w_out", Shape::Matrix(vocab_size, d), ParamKind::Weight),
            b_out: store.add("dec.b_out", Shape::Vector(vocab_size), ParamKind::Bias),
            v_p: store.add("dec.v_p", Shape::Vector(d), ParamKind::Weight),
            w_p: store.add("dec.w_p", sq, ParamKind::Weight),
            u_p: store.add("dec.u_p", sq, ParamKind::Weight),
        }
    }
}

/// Source-side projections that do not change across decoder steps.
#[derive(Debug, Clone)]
pub struct SourceCache {
    pub h2: Vec<NodeId>,
    ua_h: Vec<NodeId>,
    up_h: Vec<NodeId>,
    v_a: NodeId,
    v_p: NodeId,
}

impl SourceCache {
    pub fn new(
        tape: &mut Tape,
        store: &ParamStore,
        p: &DecoderParams,
        enc: &EncodedSource,
    ) -> Result<Self> {
        if enc.is_empty() {
            return Err(Error::EmptySource);
        }
        let ua_h = enc
            .h2
            .iter()
            .map(|&h| tape.matvec(store, p.u_a, h))
            .collect::<Result<Vec<_>>>()?;
        let up_h = enc
            .h2
            .iter()
            .map(|&h| tape.matvec(store, p.u_p, h))
            .collect::<Result<Vec<_>>>()?;
        Ok(SourceCache {
            h2: enc.h2.clone(),
            ua_h,
            up_h,
            v_a: tape.param(store, p.v_a),
            v_p: tape.param(store, p.v_p),
        })
    }

    pub fn len(&self) -> usize {
        self.h2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h2.is_empty()
    }
}

/// Decoder LSTM state `(h, C)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderState {
    pub h: NodeId,
    pub c: NodeId,
}

impl DecoderState {
    pub fn zero(tape: &mut Tape, dim: usize) -> Self {
        let h = tape.constant(vec![0.0; dim]);
        DecoderState { h, c: h }
    }
}

/// `β = softmax_i(v_aᵀ tanh(W_a s + U_a h²_i))`, `c = Σ β_i h²_i`.
pub fn attention(
    tape: &mut Tape,
    store: &ParamStore,
    p: &DecoderParams,
    src: &SourceCache,
    s_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let wa_s = tape.matvec(store, p.w_a, s_prev)?;
    let mut scores = Vec::with_capacity(src.len());
    for &ua_h in &src.ua_h {
        let pre = tape.add(wa_s, ua_h)?;
        let act = tape.tanh(pre);
        scores.push(tape.dot(src.v_a, act)?);
    }
    let scores = tape.stack(&scores)?;
    let beta = tape.softmax(scores)?;
    let context = tape.weighted_sum(beta, &src.h2)?;
    Ok((context, beta))
}

/// The previously emitted word as seen by the next decoder step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrevToken<'a> {
    Bos,
    Word {
        surface: &'a str,
        /// Source position it was copied from, if it was.
        copied_from: Option<usize>,
    },
}

/// Embedding fed back for the previous word: its vocabulary row if it has
/// one, else `tanh(W_c h²_i + b_c)` for the source position it came from
/// (the copied position, otherwise its first occurrence), else UNK.
#[allow(clippy::too_many_arguments)]
pub fn input_embedding(
    tape: &mut Tape,
    store: &ParamStore,
    p: &DecoderParams,
    embedding: ParamId,
    vocab: &Vocabulary,
    source: &[String],
    src: &SourceCache,
    prev: PrevToken<'_>,
) -> Result<NodeId> {
    let (surface, copied_from) = match prev {
        PrevToken::Bos => return tape.row(store, embedding, BOS_ID as usize),
        PrevToken::Word {
            surface,
            copied_from,
        } => (surface, copied_from),
    };
    if let Some(id) = vocab.id(surface) {
        return tape.row(store, embedding, id as usize);
    }
    let position = copied_from
        .filter(|&i| source.get(i).is_some_and(|t| t == surface))
        .or_else(|| source.iter().position(|t| t == surface));
    match position {
        Some(i) => {
            let h2 = *src.h2.get(i).ok_or_else(|| {
                Error::shape("input_embedding", src.len(), format!("position {i}"))
            })?;
            let pre = tape.affine(store, p.w_c, h2, Some(p.b_c))?;
            Ok(tape.tanh(pre))
        }
        None => tape.row(store, embedding, UNK_ID as usize),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepOutput {
    pub state: DecoderState,
    /// Probabilities over `|Y| + n` slots: generate slots first.
    pub probs: NodeId,
    pub beta: NodeId,
}

/// Slots removed from the joint softmax.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SlotMask {
    /// Disables every copy slot.
    pub no_copy: bool,
    /// Per-position copy mask (e.g. padding); length must equal the source.
    pub copy: Option<Vec<bool>>,
}

#[allow(clippy::too_many_arguments)]
pub fn decoder_step(
    tape: &mut Tape,
    store: &ParamStore,
    p: &DecoderParams,
    src: &SourceCache,
    prev: DecoderState,
    y_prev: NodeId,
    mask: &SlotMask,
    dropout: &mut Dropout,
) -> Result<StepOutput> {
    let (context, beta) = attention(tape, store, p, src, prev.h)?;
    let input = tape.concat(&[y_prev, context]);
    let (h, c) = lstm_cell(tape, store, &p.lstm, input, prev.h, prev.c)?;
    let out = dropout.apply(tape, h)?;

    let gen = tape.affine(store, p.w_out, out, Some(p.b_out))?;
    let wp_s = tape.matvec(store, p.w_p, out)?;
    let mut copy = Vec::with_capacity(src.len());
    for &up_h in &src.up_h {
        let pre = tape.add(wp_s, up_h)?;
        let act = tape.tanh(pre);
        copy.push(tape.dot(src.v_p, act)?);
    }
    let copy = tape.stack(&copy)?;
    let logits = tape.concat(&[gen, copy]);

    let n = src.len();
    let mut masked = vec![false; p.vocab_size + n];
    masked[PAD_ID as usize] = true;
    masked[BOS_ID as usize] = true;
    if mask.no_copy {
        masked[p.vocab_size..].iter_mut().for_each(|m| *m = true);
    }
    if let Some(cm) = &mask.copy {
        if cm.len() != n {
            return Err(Error::shape("copy mask", n, cm.len()));
        }
        for (m, &c) in masked[p.vocab_size..].iter_mut().zip(cm) {
            *m |= c;
        }
    }
    let logits = tape.mask(logits, masked)?;
    let probs = tape.softmax(logits)?;
    Ok(StepOutput {
        state: DecoderState { h, c },
        probs,
        beta,
    })
}

/// Slots whose probability mass counts towards emitting `target`: its
/// vocabulary id plus every source position holding it. A target that is
/// neither in the vocabulary nor copyable falls back to UNK.
pub fn target_slots(
    vocab: &Vocabulary,
    source: &[String],
    target: &str,
    copy: bool,
) -> Result<Vec<usize>> {
    let id = vocab.id(target);
    if id == Some(PAD_ID) || id == Some(BOS_ID) {
        return Err(Error::PadTarget);
    }
    let mut slots: Vec<usize> = id.map(|i| i as usize).into_iter().collect();
    if copy {
        slots.extend(
            source
                .iter()
                .enumerate()
                .filter(|(_, t)| *t == target)
                .map(|(i, _)| vocab.len() + i),
        );
    }
    if slots.is_empty() {
        slots.push(UNK_ID as usize);
    }
    Ok(slots)
}

/// `ln p(target)` as a tape node.
pub fn target_log_prob(
    tape: &mut Tape,
    probs: NodeId,
    vocab: &Vocabulary,
    source: &[String],
    target: &str,
    copy: bool,
) -> Result<NodeId> {
    let slots = target_slots(vocab, source, target, copy)?;
    tape.ln_sum(probs, slots)
}

/// Plain-value view of one step's output distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub gen: Vec<f64>,
    pub copy: Vec<f64>,
}

impl JointDistribution {
    pub fn from_probs(probs: &[f64], vocab_size: usize) -> Self {
        JointDistribution {
            gen: probs[..vocab_size].to_vec(),
            copy: probs[vocab_size..].to_vec(),
        }
    }

    pub fn total(&self) -> f64 {
        self.gen.iter().chain(&self.copy).sum()
    }

    /// `ln(gen[id] + Σ copy[i])` following the same rules as
    /// [`target_log_prob`].
    pub fn target_log_prob(
        &self,
        vocab: &Vocabulary,
        source: &[String],
        target: &str,
        copy: bool,
    ) -> Result<f64> {
        let slots = target_slots(vocab, source, target, copy)?;
        let v = self.gen.len();
        let p: f64 = slots
            .iter()
            .map(|&s| if s < v { self.gen[s] } else { self.copy[s - v] })
            .sum();
        Ok(p.ln())
    }
}
