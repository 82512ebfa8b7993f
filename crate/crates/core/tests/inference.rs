mod common;

use common::*;
use readagain::decoder::PrevToken;
use readagain::dropout::Dropout;
use readagain::encoder::{EncodeOptions, EncoderMode};
use readagain::inference::{beam_search, greedy, realize, Emission, Hypothesis, Slot};
use readagain::math::Tape;
use readagain::text::vocab::EOS_ID;
use readagain::{Error, Model, ModelConfig};

fn toy_model(seed: u64, mode: EncoderMode) -> Model {
    let mut m = Model::new(ModelConfig::new(4, mode), toy_vocab(2)).unwrap();
    assert_eq!(m.vocab.len(), 6);
    randomize(&mut m.params, seed, 1.5);
    m
}

fn slot_of(v: usize, k: usize) -> Slot {
    if k < v {
        Slot::Generate(k as u32)
    } else {
        Slot::Copy(k - v)
    }
}

fn surface(model: &Model, source: &[String], slot: Slot) -> String {
    match slot {
        Slot::Generate(id) => model.vocab.token(id).to_string(),
        Slot::Copy(i) => source[i].clone(),
    }
}

/// Step probabilities after feeding `prefix`, computed from scratch.
fn probs_after(model: &Model, sentences: &[Vec<String>], prefix: &[Slot]) -> Vec<f64> {
    let source: Vec<String> = sentences.concat();
    let mut tape = Tape::new();
    let mut drop = Dropout::off();
    let src = model
        .encode(&mut tape, sentences, &EncodeOptions::default(), &mut drop)
        .unwrap();
    let mut state = model.start_state(&mut tape);
    let mut probs = None;
    let surfaces: Vec<String> = prefix.iter().map(|&s| surface(model, &source, s)).collect();
    for t in 0..=prefix.len() {
        let prev = if t == 0 {
            PrevToken::Bos
        } else {
            PrevToken::Word {
                surface: &surfaces[t - 1],
                copied_from: match prefix[t - 1] {
                    Slot::Copy(i) => Some(i),
                    Slot::Generate(_) => None,
                },
            }
        };
        let y = model.embed_prev(&mut tape, &src, prev).unwrap();
        let out = model.step(&mut tape, &src, state, y, &mut drop).unwrap();
        state = out.state;
        probs = Some(tape.value(out.probs).to_vec());
    }
    probs.unwrap()
}

#[test]
fn beam_one_is_stepwise_argmax() {
    for seed in 0..10 {
        let model = toy_model(seed, EncoderMode::GRU);
        let sentences = vec![words("w0 zz w1 yy")];
        let hyp = greedy(&model, &sentences, 6).unwrap();
        let v = model.vocab.len();
        let mut prefix = Vec::new();
        let mut logp = 0.0;
        for _ in 0..6 {
            let p = probs_after(&model, &sentences, &prefix);
            let (k, &best) = p
                .iter()
                .enumerate()
                .fold((0, &f64::NEG_INFINITY), |acc, (i, x)| {
                    if *x > *acc.1 {
                        (i, x)
                    } else {
                        acc
                    }
                });
            let slot = slot_of(v, k);
            prefix.push(slot);
            logp += best.ln();
            if slot == Slot::Generate(EOS_ID) {
                break;
            }
        }
        let got: Vec<Slot> = hyp.emitted.iter().map(|e| e.slot).collect();
        assert_eq!(got, prefix, "seed {seed}");
        assert!((hyp.logp - logp).abs() <= 1e-12);
    }
}

#[test]
fn exhaustive_beam_matches_brute_force() {
    for seed in 0..20 {
        let model = toy_model(100 + seed, EncoderMode::LSTM);
        let sentences = vec![words("w1 qq")];
        let v = model.vocab.len();
        let slots = v + 2;

        let mut best: Option<(f64, Vec<Slot>)> = None;
        let mut consider = |lp: f64, seq: Vec<Slot>| {
            if best.as_ref().is_none_or(|(b, _)| lp > *b) {
                best = Some((lp, seq));
            }
        };
        let p1 = probs_after(&model, &sentences, &[]);
        for (a, &pa) in p1.iter().enumerate().take(slots) {
            if pa == 0.0 {
                continue;
            }
            let sa = slot_of(v, a);
            if sa == Slot::Generate(EOS_ID) {
                consider(pa.ln(), vec![sa]);
                continue;
            }
            let p2 = probs_after(&model, &sentences, &[sa]);
            for (b, &pb) in p2.iter().enumerate().take(slots) {
                if pb > 0.0 {
                    consider(pa.ln() + pb.ln(), vec![sa, slot_of(v, b)]);
                }
            }
        }
        let (want_lp, want_seq) = best.unwrap();

        let hyps = beam_search(&model, &sentences, slots * slots, 2).unwrap();
        let got: Vec<Slot> = hyps[0].emitted.iter().map(|e| e.slot).collect();
        assert_eq!(got, want_seq, "seed {seed}");
        assert!((hyps[0].logp - want_lp).abs() <= 1e-12);
        assert!(hyps.windows(2).all(|w| w[0].logp >= w[1].logp));
    }
}

#[test]
fn top_score_is_monotone_in_beam_width() {
    for seed in 0..20 {
        let model = toy_model(200 + seed, EncoderMode::GRU);
        let sentences = vec![words("qq w0")];
        let scores: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&b| beam_search(&model, &sentences, b, 2).unwrap()[0].logp)
            .collect();
        assert!(
            scores.windows(2).all(|w| w[1] >= w[0]),
            "seed {seed}: {scores:?}"
        );
    }
}

#[test]
fn certain_eos_gives_one_empty_hypothesis() {
    let mut model = toy_model(3, EncoderMode::GRU);
    set(&mut model.params, model.decoder.w_out, 0.0);
    set(&mut model.params, model.decoder.v_p, 0.0);
    let b = model.decoder.b_out;
    model.params.get_mut(b).values[EOS_ID as usize] = 1000.0;
    let hyps = beam_search(&model, &[words("w0 zz")], 4, 10).unwrap();
    assert_eq!(hyps.len(), 1);
    assert_eq!(hyps[0].logp, 0.0);
    assert!(hyps[0].done);
    assert_eq!(realize(&hyps[0]), "");
}

#[test]
fn copied_words_come_from_the_source() {
    for seed in 0..10 {
        let model = toy_model(300 + seed, EncoderMode::GRU);
        let source = words("w0 kavo w1 lumi");
        for h in beam_search(&model, std::slice::from_ref(&source), 5, 6).unwrap() {
            for e in &h.emitted {
                if !model.vocab.contains(&e.surface) {
                    match e.slot {
                        Slot::Copy(i) => assert_eq!(source[i], e.surface),
                        Slot::Generate(_) => panic!("OOV surface from a generate slot"),
                    }
                }
            }
            assert!(h.emitted.len() <= 6);
            assert_eq!(h.done, h.emitted.last().is_some_and(Emission::is_eos));
        }
    }
}

#[test]
fn logp_is_the_sum_of_step_log_probs() {
    let model = toy_model(7, EncoderMode::LSTM);
    let sentences = vec![words("w1 qq w0")];
    let v = model.vocab.len();
    for h in beam_search(&model, &sentences, 3, 4).unwrap() {
        let slots: Vec<Slot> = h.emitted.iter().map(|e| e.slot).collect();
        let mut total = 0.0;
        for t in 0..slots.len() {
            let p = probs_after(&model, &sentences, &slots[..t]);
            let k = match slots[t] {
                Slot::Generate(id) => id as usize,
                Slot::Copy(i) => v + i,
            };
            total += p[k].ln();
        }
        assert!((total - h.logp).abs() <= 1e-12);
    }
}

#[test]
fn bad_arguments() {
    let model = toy_model(1, EncoderMode::GRU);
    assert!(matches!(
        beam_search(&model, &[vec![]], 2, 3),
        Err(Error::EmptySource)
    ));
    assert!(beam_search(&model, &[words("w0")], 0, 3).is_err());
    assert!(beam_search(&model, &[words("w0")], 2, 0).is_err());
}

#[test]
fn realize_uses_copied_surface() {
    let h = Hypothesis {
        emitted: vec![
            Emission {
                slot: Slot::Generate(4),
                surface: "air".into(),
            },
            Emission {
                slot: Slot::Copy(3),
                surface: "ansett".into(),
            },
            Emission {
                slot: Slot::Generate(EOS_ID),
                surface: "<eos>".into(),
            },
        ],
        logp: -1.0,
        done: true,
    };
    assert_eq!(realize(&h), "air ansett");
}
