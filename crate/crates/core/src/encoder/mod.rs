//! Two-pass ("read-again") source encoding.
//!
//! The first pass is a plain recurrent read. Its per-token states and the
//! final sentence state then bias a second read over the same tokens: the
//! GRU variant gates the second-read update with importance weights, the
//! LSTM variant feeds the first-read states to the second cell as extra
//! inputs. Two-sentence inputs are first-read independently and combined
//! either by concatenation or through a nonlinear global vector.

mod cells;

use std::fmt;
use std::str::FromStr;

pub use cells::{
    gated_update, gru_cell, gru_parts, lstm_cell, CellParams, GruParams, GruParts, LstmParams,
};

use crate::dropout::Dropout;
use crate::error::{Error, Result};
use crate::math::{NodeId, ParamId, ParamKind, ParamStore, Shape, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Gru,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SentenceLayout {
    Single,
    /// Both sentence vectors are appended to every second-read input.
    MultiConcat,
    /// Sentence vectors are merged into `h_global = tanh(W_r h + U_r h' + v_r)`.
    MultiGlobal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncoderMode {
    pub cell: CellKind,
    pub layout: SentenceLayout,
}

impl EncoderMode {
    pub const GRU: Self = Self::new(CellKind::Gru, SentenceLayout::Single);
    pub const LSTM: Self = Self::new(CellKind::Lstm, SentenceLayout::Single);
    pub const MULTI_CONCAT: Self = Self::new(CellKind::Lstm, SentenceLayout::MultiConcat);
    pub const MULTI_GLOBAL: Self = Self::new(CellKind::Lstm, SentenceLayout::MultiGlobal);

    pub const fn new(cell: CellKind, layout: SentenceLayout) -> Self {
        EncoderMode { cell, layout }
    }

    pub fn is_multi(&self) -> bool {
        self.layout != SentenceLayout::Single
    }

    /// Width of the second-read cell input for hidden size `d`.
    pub fn second_input_width(&self, d: usize) -> usize {
        match (self.cell, self.layout) {
            (CellKind::Gru, SentenceLayout::Single) => d,
            (CellKind::Lstm, SentenceLayout::Single) => 3 * d,
            (_, _) => 4 * d,
        }
    }

    pub fn code(&self) -> u8 {
        let cell = match self.cell {
            CellKind::Gru => 0,
            CellKind::Lstm => 1,
        };
        let layout = match self.layout {
            SentenceLayout::Single => 0,
            SentenceLayout::MultiConcat => 1,
            SentenceLayout::MultiGlobal => 2,
        };
        cell * 3 + layout
    }

    pub fn from_code(code: u8) -> Option<Self> {
        let cell = match code / 3 {
            0 => CellKind::Gru,
            1 => CellKind::Lstm,
            _ => return None,
        };
        let layout = match code % 3 {
            0 => SentenceLayout::Single,
            1 => SentenceLayout::MultiConcat,
            _ => SentenceLayout::MultiGlobal,
        };
        Some(Self::new(cell, layout))
    }
}

impl fmt::Display for EncoderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match (self.cell, self.layout) {
            (CellKind::Gru, SentenceLayout::Single) => "gru",
            (CellKind::Lstm, SentenceLayout::Single) => "lstm",
            (CellKind::Lstm, SentenceLayout::MultiConcat) => "multi-concat",
            (CellKind::Lstm, SentenceLayout::MultiGlobal) => "multi-global",
            (CellKind::Gru, SentenceLayout::MultiConcat) => "gru-multi-concat",
            (CellKind::Gru, SentenceLayout::MultiGlobal) => "gru-multi-global",
        };
        f.write_str(s)
    }
}

impl FromStr for EncoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        (0..6)
            .filter_map(Self::from_code)
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown encoder mode {s:?}")))
    }
}

/// `α_i = tanh(W_e h¹_i + U_e h¹_n + V_e x_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImportanceParams {
    pub w_e: ParamId,
    pub u_e: ParamId,
    pub v_e: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinerParams {
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub v_r: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderParams {
    pub mode: EncoderMode,
    pub dim: usize,
    /// Word embeddings, shared with the decoder.
    pub embedding: ParamId,
    pub first: CellParams,
    pub second: CellParams,
    /// GRU modes only.
    pub importance: Option<ImportanceParams>,
    /// `MultiGlobal` only.
    pub combiner: Option<CombinerParams>,
}

impl EncoderParams {
    pub fn register(
        store: &mut ParamStore,
        mode: EncoderMode,
        dim: usize,
        embedding: ParamId,
    ) -> Self {
        let d = dim;
        let wide = mode.second_input_width(d);
        let (first, second) = match mode.cell {
            CellKind::Gru => (
                CellParams::Gru(GruParams::register(store, "enc.read1", d, d)),
                CellParams::Gru(GruParams::register(store, "enc.read2", wide, d)),
            ),
            CellKind::Lstm => (
                CellParams::Lstm(LstmParams::register(store, "enc.read1", d, d)),
                CellParams::Lstm(LstmParams::register(store, "enc.read2", wide, d)),
            ),
        };
        let square = Shape::Matrix(d, d);
        let importance = (mode.cell == CellKind::Gru).then(|| ImportanceParams {
            w_e: store.add("enc.w_e", square, ParamKind::Weight),
            u_e: store.add("enc.u_e", square, ParamKind::Weight),
            v_e: store.add("enc.v_e", square, ParamKind::Weight),
        });
        let combiner = (mode.layout == SentenceLayout::MultiGlobal).then(|| CombinerParams {
            w_r: store.add("enc.w_r", square, ParamKind::Weight),
            u_r: store.add("enc.u_r", square, ParamKind::Weight),
            v_r: store.add("enc.v_r", Shape::Vector(d), ParamKind::Bias),
        });
        EncoderParams {
            mode,
            dim,
            embedding,
            first,
            second,
            importance,
            combiner,
        }
    }
}

/// Test hook: replaces every importance vector with a constant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EncodeOptions {
    pub alpha_override: Option<f64>,
}

/// Tape nodes produced by [`encode`]. Per-token lists run over both
/// sentences in order.
#[derive(Debug, Clone)]
pub struct EncodedSource {
    pub h1: Vec<NodeId>,
    /// Importance vectors; empty for LSTM modes.
    pub alpha: Vec<NodeId>,
    pub h2: Vec<NodeId>,
    /// Final first-read state of each sentence.
    pub sentence_vecs: Vec<NodeId>,
    pub global: Option<NodeId>,
}

impl EncodedSource {
    pub fn len(&self) -> usize {
        self.h2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h2.is_empty()
    }
}

fn zeros(tape: &mut Tape, d: usize) -> NodeId {
    tape.constant(vec![0.0; d])
}

/// First pass from a zero state; the last element is the sentence vector.
pub fn first_read(
    tape: &mut Tape,
    store: &ParamStore,
    cell: &CellParams,
    dim: usize,
    xs: &[NodeId],
) -> Result<Vec<NodeId>> {
    if xs.is_empty() {
        return Err(Error::EmptySource);
    }
    let mut h = zeros(tape, dim);
    let mut c = h;
    let mut out = Vec::with_capacity(xs.len());
    for &x in xs {
        match cell {
            CellParams::Gru(p) => h = gru_cell(tape, store, p, x, h)?,
            CellParams::Lstm(p) => (h, c) = lstm_cell(tape, store, p, x, h, c)?,
        }
        out.push(h);
    }
    Ok(out)
}

pub fn importance_weights(
    tape: &mut Tape,
    store: &ParamStore,
    p: &ImportanceParams,
    h1_i: NodeId,
    h1_n: NodeId,
    x_i: NodeId,
) -> Result<NodeId> {
    let a = tape.matvec(store, p.w_e, h1_i)?;
    let b = tape.matvec(store, p.u_e, h1_n)?;
    let c = tape.matvec(store, p.v_e, x_i)?;
    let ab = tape.add(a, b)?;
    let pre = tape.add(ab, c)?;
    Ok(tape.tanh(pre))
}

/// Importance-gated GRU: `h²_i = (1 − α_i⊙z_i)⊙h²_{i−1} + (α_i⊙z_i)⊙h̃²_i`,
/// which is `(1 − α_i)⊙h²_{i−1} + α_i⊙GRU²(x_i, h²_{i−1})` rearranged.
pub fn second_read_gru(
    tape: &mut Tape,
    store: &ParamStore,
    p: &GruParams,
    dim: usize,
    inputs: &[NodeId],
    alphas: &[NodeId],
) -> Result<Vec<NodeId>> {
    if inputs.len() != alphas.len() {
        return Err(Error::shape(
            "second_read_gru",
            format!("{} inputs", inputs.len()),
            format!("{} importance vectors", alphas.len()),
        ));
    }
    let mut h = zeros(tape, dim);
    let mut out = Vec::with_capacity(inputs.len());
    for (&x, &alpha) in inputs.iter().zip(alphas) {
        let parts = gru_parts(tape, store, p, x, h)?;
        let gate = tape.hadamard(alpha, parts.z)?;
        h = gated_update(tape, gate, h, parts.candidate)?;
        out.push(h);
    }
    Ok(out)
}

/// LSTM² over pre-assembled wide inputs, from a zero state.
pub fn second_read_lstm(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    dim: usize,
    inputs: &[NodeId],
) -> Result<Vec<NodeId>> {
    let mut h = zeros(tape, dim);
    let mut c = h;
    let mut out = Vec::with_capacity(inputs.len());
    for &x in inputs {
        (h, c) = lstm_cell(tape, store, p, x, h, c)?;
        out.push(h);
    }
    Ok(out)
}

/// Per-sentence state gathered before the second read.
struct SentenceRead {
    xs: Vec<NodeId>,
    h1: Vec<NodeId>,
}

impl SentenceRead {
    fn last(&self) -> NodeId {
        *self.h1.last().expect("non-empty sentence")
    }
}

/// Encodes sentences of token ids. `Single` mode reads all tokens as one
/// sentence; multi modes need exactly two.
///
/// Dropout is applied to embeddings and to the states each read passes
/// downstream; recurrent connections see undropped states.
pub fn encode(
    tape: &mut Tape,
    store: &ParamStore,
    params: &EncoderParams,
    sentences: &[Vec<u32>],
    opts: &EncodeOptions,
    dropout: &mut Dropout,
) -> Result<EncodedSource> {
    let mode = params.mode;
    let d = params.dim;
    let sentences: Vec<Vec<u32>> = if mode.is_multi() {
        if sentences.len() != 2 {
            return Err(Error::SentenceCount(sentences.len()));
        }
        sentences.to_vec()
    } else {
        vec![sentences.concat()]
    };
    if sentences.iter().any(Vec::is_empty) {
        return Err(Error::EmptySource);
    }

    let mut reads = Vec::with_capacity(sentences.len());
    for ids in &sentences {
        let mut xs = Vec::with_capacity(ids.len());
        for &id in ids {
            let x = tape.row(store, params.embedding, id as usize)?;
            xs.push(dropout.apply(tape, x)?);
        }
        let raw = first_read(tape, store, &params.first, d, &xs)?;
        let h1 = raw
            .into_iter()
            .map(|h| dropout.apply(tape, h))
            .collect::<Result<Vec<_>>>()?;
        reads.push(SentenceRead { xs, h1 });
    }

    let sentence_vecs: Vec<NodeId> = reads.iter().map(SentenceRead::last).collect();
    let global = match (mode.layout, params.combiner) {
        (SentenceLayout::MultiGlobal, Some(p)) => {
            let a = tape.matvec(store, p.w_r, sentence_vecs[0])?;
            let b = tape.matvec(store, p.u_r, sentence_vecs[1])?;
            let ab = tape.add(a, b)?;
            let bias = tape.param(store, p.v_r);
            let pre = tape.add(ab, bias)?;
            Some(tape.tanh(pre))
        }
        (SentenceLayout::MultiGlobal, None) => {
            return Err(Error::Config(
                "multi-global mode without combiner parameters".into(),
            ))
        }
        _ => None,
    };

    let mut out = EncodedSource {
        h1: Vec::new(),
        alpha: Vec::new(),
        h2: Vec::new(),
        sentence_vecs: sentence_vecs.clone(),
        global,
    };
    for read in &reads {
        let own_last = read.last();
        let inputs: Vec<NodeId> = read
            .xs
            .iter()
            .zip(&read.h1)
            .map(|(&x, &h1)| match (mode.cell, mode.layout) {
                (CellKind::Gru, SentenceLayout::Single) => x,
                (CellKind::Lstm, SentenceLayout::Single) => tape.concat(&[x, h1, own_last]),
                (_, SentenceLayout::MultiConcat) => {
                    tape.concat(&[x, h1, sentence_vecs[0], sentence_vecs[1]])
                }
                (_, SentenceLayout::MultiGlobal) => {
                    tape.concat(&[x, h1, own_last, global.expect("global vector")])
                }
            })
            .collect();

        let h2 = match (&params.second, params.importance) {
            (CellParams::Gru(p), Some(imp)) => {
                let mut alphas = Vec::with_capacity(inputs.len());
                for (&x, &h1) in read.xs.iter().zip(&read.h1) {
                    let a = match opts.alpha_override {
                        Some(v) => tape.constant(vec![v; d]),
                        None => importance_weights(tape, store, &imp, h1, own_last, x)?,
                    };
                    alphas.push(a);
                }
                let h2 = second_read_gru(tape, store, p, d, &inputs, &alphas)?;
                out.alpha.extend(alphas);
                h2
            }
            (CellParams::Lstm(p), _) => second_read_lstm(tape, store, p, d, &inputs)?,
            (CellParams::Gru(_), None) => {
                return Err(Error::Config(
                    "GRU mode without importance parameters".into(),
                ))
            }
        };
        for h in h2 {
            out.h2.push(dropout.apply(tape, h)?);
        }
        out.h1.extend_from_slice(&read.h1);
    }
    Ok(out)
}
