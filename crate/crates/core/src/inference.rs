//! Beam search over the joint generate/copy emission space.

use std::cmp::Ordering;

use crate::decoder::{DecoderState, PrevToken};
use crate::dropout::Dropout;
use crate::encoder::EncodeOptions;
use crate::error::{Error, Result};
use crate::math::Tape;
use crate::model::{Model, SourceContext};
use crate::text::vocab::EOS_ID;

/// Where an emitted word came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Generate(u32),
    Copy(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Emission {
    pub slot: Slot,
    pub surface: String,
}

impl Emission {
    pub fn is_eos(&self) -> bool {
        self.slot == Slot::Generate(EOS_ID)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub emitted: Vec<Emission>,
    /// Sum of per-step log-probabilities.
    pub logp: f64,
    /// Last emission is EOS.
    pub done: bool,
}

impl Hypothesis {
    /// Emitted surface forms without the closing EOS.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.emitted
            .iter()
            .filter(|e| !e.is_eos())
            .map(|e| e.surface.as_str())
    }
}

/// Space-joined surface forms; copied slots give the exact source token.
pub fn realize(hyp: &Hypothesis) -> String {
    hyp.words().collect::<Vec<_>>().join(" ")
}

struct Live {
    hyp: Hypothesis,
    state: DecoderState,
}

struct Candidate {
    parent: usize,
    slot_index: usize,
    logp: f64,
}

fn by_score(a: &Candidate, b: &Candidate) -> Ordering {
    b.logp
        .total_cmp(&a.logp)
        .then(a.parent.cmp(&b.parent))
        .then(a.slot_index.cmp(&b.slot_index))
}

/// Standard beam search. Every unmasked generate slot and every copy slot is
/// a candidate at each step; finished hypotheses stay in the pool and
/// compete on raw total log-probability (no length normalization). Stops
/// when the beam holds only finished hypotheses or after `max_len` steps.
/// Returns up to `beam` hypotheses, best first.
pub fn beam_search(
    model: &Model,
    sentences: &[Vec<String>],
    beam: usize,
    max_len: usize,
) -> Result<Vec<Hypothesis>> {
    if beam == 0 || max_len == 0 {
        return Err(Error::Config("beam and max_len must be at least 1".into()));
    }
    if sentences.iter().all(Vec::is_empty) {
        return Err(Error::EmptySource);
    }
    let mut tape = Tape::new();
    let mut dropout = Dropout::off();
    let src = model.encode(
        &mut tape,
        sentences,
        &EncodeOptions::default(),
        &mut dropout,
    )?;
    let start = model.start_state(&mut tape);
    let mut live = vec![Live {
        hyp: Hypothesis {
            emitted: Vec::new(),
            logp: 0.0,
            done: false,
        },
        state: start,
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    let v = model.vocab.len();

    for _ in 0..max_len {
        if live.is_empty() {
            break;
        }
        let mut states = Vec::with_capacity(live.len());
        let mut candidates = Vec::new();
        for (parent, l) in live.iter().enumerate() {
            let (state, probs) = expand(model, &mut tape, &src, l, &mut dropout)?;
            states.push(state);
            let mut own: Vec<Candidate> = probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(slot_index, &p)| Candidate {
                    parent,
                    slot_index,
                    logp: l.hyp.logp + p.ln(),
                })
                .collect();
            if own.len() > beam {
                own.select_nth_unstable_by(beam - 1, by_score);
                own.truncate(beam);
            }
            own.sort_by(by_score);
            candidates.extend(own);
        }

        // Finished hypotheses compete with the expansions for beam slots.
        let mut pool: Vec<(f64, Option<Candidate>, Option<Hypothesis>)> = finished
            .drain(..)
            .map(|h| (h.logp, None, Some(h)))
            .chain(candidates.into_iter().map(|c| (c.logp, Some(c), None)))
            .collect();
        pool.sort_by(|a, b| b.0.total_cmp(&a.0));
        pool.truncate(beam);

        let mut next = Vec::new();
        for (_, cand, done) in pool {
            if let Some(h) = done {
                finished.push(h);
                continue;
            }
            let c = cand.expect("candidate");
            let slot = if c.slot_index < v {
                Slot::Generate(c.slot_index as u32)
            } else {
                Slot::Copy(c.slot_index - v)
            };
            let surface = match slot {
                Slot::Generate(id) => model.vocab.token(id).to_string(),
                Slot::Copy(i) => src.tokens[i].clone(),
            };
            let mut hyp = live[c.parent].hyp.clone();
            hyp.emitted.push(Emission { slot, surface });
            hyp.logp = c.logp;
            if slot == Slot::Generate(EOS_ID) {
                hyp.done = true;
                finished.push(hyp);
            } else {
                next.push(Live {
                    hyp,
                    state: states[c.parent],
                });
            }
        }
        live = next;
    }

    let mut out: Vec<Hypothesis> = finished
        .into_iter()
        .chain(live.into_iter().map(|l| l.hyp))
        .collect();
    out.sort_by(|a, b| b.logp.total_cmp(&a.logp));
    out.truncate(beam);
    Ok(out)
}

fn expand(
    model: &Model,
    tape: &mut Tape,
    src: &SourceContext,
    l: &Live,
    dropout: &mut Dropout,
) -> Result<(DecoderState, Vec<f64>)> {
    let prev = match l.hyp.emitted.last() {
        None => PrevToken::Bos,
        Some(e) => PrevToken::Word {
            surface: &e.surface,
            copied_from: match e.slot {
                Slot::Copy(i) => Some(i),
                Slot::Generate(_) => None,
            },
        },
    };
    let y = model.embed_prev(tape, src, prev)?;
    let out = model.step(tape, src, l.state, y, dropout)?;
    Ok((out.state, tape.value(out.probs).to_vec()))
}

/// Beam search with a beam of one.
pub fn greedy(model: &Model, sentences: &[Vec<String>], max_len: usize) -> Result<Hypothesis> {
    Ok(beam_search(model, sentences, 1, max_len)?.remove(0))
}

/// Decodes exactly `steps` argmax steps without stopping at EOS; used for
/// timing, where every vocabulary size must do the same amount of work.
pub fn greedy_fixed_steps(
    model: &Model,
    sentences: &[Vec<String>],
    steps: usize,
) -> Result<Vec<Slot>> {
    let mut tape = Tape::new();
    let mut dropout = Dropout::off();
    let src = model.encode(
        &mut tape,
        sentences,
        &EncodeOptions::default(),
        &mut dropout,
    )?;
    let mut l = Live {
        hyp: Hypothesis {
            emitted: Vec::new(),
            logp: 0.0,
            done: false,
        },
        state: model.start_state(&mut tape),
    };
    let v = model.vocab.len();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (state, probs) = expand(model, &mut tape, &src, &l, &mut dropout)?;
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("non-empty distribution");
        let slot = if best < v {
            Slot::Generate(best as u32)
        } else {
            Slot::Copy(best - v)
        };
        let surface = match slot {
            Slot::Generate(id) => model.vocab.token(id).to_string(),
            Slot::Copy(i) => src.tokens[i].clone(),
        };
        l.hyp.emitted.push(Emission { slot, surface });
        l.state = state;
        out.push(slot);
    }
    Ok(out)
}

/// Position-wise matches between a decoded summary and the gold one;
/// returns `(matching positions, gold length)`.
pub fn token_matches<A: AsRef<str>, B: AsRef<str>>(predicted: &[A], gold: &[B]) -> (usize, usize) {
    let hits = predicted
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.as_ref() == g.as_ref())
        .count();
    (hits, gold.len())
}
