use crate::error::Result;
use crate::math::{NodeId, ParamId, ParamKind, ParamStore, Shape, Tape};

/// GRU without bias terms; every gate reads the concatenation `[x, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
}

/// LSTM without bias terms; every gate reads the concatenation `[x, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    pub w_f: ParamId,
    pub w_i: ParamId,
    pub w_o: ParamId,
    pub w_c: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellParams {
    Gru(GruParams),
    Lstm(LstmParams),
}

impl GruParams {
    pub fn register(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize) -> Self {
        let shape = Shape::Matrix(hidden, input + hidden);
        GruParams {
            w_z: store.add(format!("{prefix}.w_z"), shape, ParamKind::Weight),
            w_r: store.add(format!("{prefix}.w_r"), shape, ParamKind::Weight),
            w_h: store.add(format!("{prefix}.w_h"), shape, ParamKind::Weight),
        }
    }
}

impl LstmParams {
    pub fn register(store: &mut ParamStore, prefix: &str, input: usize, hidden: usize) -> Self {
        let shape = Shape::Matrix(hidden, input + hidden);
        LstmParams {
            w_f: store.add(format!("{prefix}.w_f"), shape, ParamKind::Weight),
            w_i: store.add(format!("{prefix}.w_i"), shape, ParamKind::Weight),
            w_o: store.add(format!("{prefix}.w_o"), shape, ParamKind::Weight),
            w_c: store.add(format!("{prefix}.w_c"), shape, ParamKind::Weight),
        }
    }
}

/// Update gate and candidate state of one GRU step.
#[derive(Debug, Clone, Copy)]
pub struct GruParts {
    pub z: NodeId,
    pub candidate: NodeId,
}

pub fn gru_parts(
    tape: &mut Tape,
    store: &ParamStore,
    p: &GruParams,
    x: NodeId,
    h_prev: NodeId,
) -> Result<GruParts> {
    let xh = tape.concat(&[x, h_prev]);
    let z = tape.matvec(store, p.w_z, xh)?;
    let z = tape.sigmoid(z);
    let r = tape.matvec(store, p.w_r, xh)?;
    let r = tape.sigmoid(r);
    let rh = tape.hadamard(r, h_prev)?;
    let xrh = tape.concat(&[x, rh]);
    let candidate = tape.matvec(store, p.w_h, xrh)?;
    let candidate = tape.tanh(candidate);
    Ok(GruParts { z, candidate })
}

/// `h = (1 − gate) ⊙ h_prev + gate ⊙ candidate`.
pub fn gated_update(
    tape: &mut Tape,
    gate: NodeId,
    h_prev: NodeId,
    candidate: NodeId,
) -> Result<NodeId> {
    let keep = tape.one_minus(gate);
    let kept = tape.hadamard(keep, h_prev)?;
    let fresh = tape.hadamard(gate, candidate)?;
    tape.add(kept, fresh)
}

pub fn gru_cell(
    tape: &mut Tape,
    store: &ParamStore,
    p: &GruParams,
    x: NodeId,
    h_prev: NodeId,
) -> Result<NodeId> {
    let parts = gru_parts(tape, store, p, x, h_prev)?;
    gated_update(tape, parts.z, h_prev, parts.candidate)
}

/// One LSTM step; returns `(h, C)`.
pub fn lstm_cell(
    tape: &mut Tape,
    store: &ParamStore,
    p: &LstmParams,
    x: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
) -> Result<(NodeId, NodeId)> {
    let xh = tape.concat(&[x, h_prev]);
    let gate = |w: ParamId, tape: &mut Tape| -> Result<NodeId> {
        let a = tape.matvec(store, w, xh)?;
        Ok(tape.sigmoid(a))
    };
    let f = gate(p.w_f, tape)?;
    let i = gate(p.w_i, tape)?;
    let o = gate(p.w_o, tape)?;
    let c_new = tape.matvec(store, p.w_c, xh)?;
    let c_new = tape.tanh(c_new);
    let kept = tape.hadamard(f, c_prev)?;
    let written = tape.hadamard(i, c_new)?;
    let c = tape.add(kept, written)?;
    let squashed = tape.tanh(c);
    let h = tape.hadamard(o, squashed)?;
    Ok((h, c))
}
