//! Scalar-loop reference implementations and fixtures shared by the
//! integration tests. Nothing here goes through the tape.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use readagain::encoder::{GruParams, LstmParams};
use readagain::math::{ParamId, ParamStore};
use readagain::text::Vocabulary;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Overwrites every parameter entry, biases included, with U(−scale, scale).
pub fn randomize(store: &mut ParamStore, seed: u64, scale: f64) {
    let mut r = rng(seed);
    for t in store.iter_mut() {
        for v in &mut t.values {
            *v = r.gen_range(-scale..scale);
        }
    }
}

pub fn set(store: &mut ParamStore, id: ParamId, value: f64) {
    store.get_mut(id).values.iter_mut().for_each(|v| *v = value);
}

pub fn set_identity(store: &mut ParamStore, id: ParamId, scale: f64) {
    let t = store.get_mut(id);
    let (rows, cols) = t.shape.dims();
    t.values.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..rows.min(cols) {
        t.values[i * cols + i] = scale;
    }
}

#[allow(clippy::needless_range_loop)]
pub fn mv(store: &ParamStore, id: ParamId, x: &[f64]) -> Vec<f64> {
    let t = store.get(id);
    let (rows, cols) = t.shape.dims();
    assert_eq!(cols, x.len(), "oracle matvec width");
    let mut out = vec![0.0; rows];
    for r in 0..rows {
        let mut acc = 0.0;
        for c in 0..cols {
            acc += t.values[r * cols + c] * x[c];
        }
        out[r] = acc;
    }
    out
}

pub fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn cat(parts: &[&[f64]]) -> Vec<f64> {
    parts.concat()
}

pub fn vadd(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn gru_ref(store: &ParamStore, p: &GruParams, x: &[f64], h: &[f64]) -> Vec<f64> {
    let xh = cat(&[x, h]);
    let z: Vec<f64> = mv(store, p.w_z, &xh).into_iter().map(sig).collect();
    let r: Vec<f64> = mv(store, p.w_r, &xh).into_iter().map(sig).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let cand: Vec<f64> = mv(store, p.w_h, &cat(&[x, &rh]))
        .into_iter()
        .map(f64::tanh)
        .collect();
    (0..h.len())
        .map(|k| (1.0 - z[k]) * h[k] + z[k] * cand[k])
        .collect()
}

/// `(1 − α)⊙h + α⊙GRU(x, h)`.
pub fn gru_reweighted_ref(
    store: &ParamStore,
    p: &GruParams,
    x: &[f64],
    h: &[f64],
    alpha: &[f64],
) -> Vec<f64> {
    let g = gru_ref(store, p, x, h);
    (0..h.len())
        .map(|k| (1.0 - alpha[k]) * h[k] + alpha[k] * g[k])
        .collect()
}

pub fn lstm_ref(
    store: &ParamStore,
    p: &LstmParams,
    x: &[f64],
    h: &[f64],
    c: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let xh = cat(&[x, h]);
    let f: Vec<f64> = mv(store, p.w_f, &xh).into_iter().map(sig).collect();
    let i: Vec<f64> = mv(store, p.w_i, &xh).into_iter().map(sig).collect();
    let o: Vec<f64> = mv(store, p.w_o, &xh).into_iter().map(sig).collect();
    let g: Vec<f64> = mv(store, p.w_c, &xh).into_iter().map(f64::tanh).collect();
    let c_new: Vec<f64> = (0..h.len()).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
    let h_new = (0..h.len()).map(|k| o[k] * c_new[k].tanh()).collect();
    (h_new, c_new)
}

pub fn softmax_ref(v: &[f64]) -> Vec<f64> {
    let m = v
        .iter()
        .copied()
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = v.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Specials plus `w0 .. w{n-1}`.
pub fn toy_vocab(n: usize) -> Vocabulary {
    Vocabulary::from_words((0..n).map(|i| format!("w{i}"))).unwrap()
}

/// The gradient-check example: a length-4 source (two sentences of two for
/// multi modes) with an OOV entity that the target copies.
pub fn grad_check_example() -> readagain::text::Example {
    readagain::text::Example::new(vec![words("w0 kavo"), words("w3 w5")], words("kavo w3"))
}

/// d = 8, |Y| = 12, weights U(−1, 1) from the first seed at or after
/// `start` whose analytic gradient has no non-zero entry smaller than 1e-6.
/// Central differences in f64 cannot resolve such entries to 1e-5 relative
/// error with the 1e-8 floor (loss round-off over 2·eps is ~1e-11), so the
/// instance is chosen before any numerical comparison is made.
pub fn grad_check_model(
    mode: readagain::encoder::EncoderMode,
    start: u64,
) -> (readagain::Model, u64) {
    use readagain::dropout::Dropout;
    use readagain::encoder::EncodeOptions;
    use readagain::math::Tape;
    use readagain::{Model, ModelConfig};

    let ex = grad_check_example();
    for seed in start..start + 1000 {
        let mut model = Model::new(ModelConfig::new(8, mode), toy_vocab(8)).unwrap();
        randomize(&mut model.params, seed, 1.0);
        let mut tape = Tape::new();
        let (loss, _) = model
            .example_loss(
                &mut tape,
                &ex,
                &EncodeOptions::default(),
                &mut Dropout::off(),
            )
            .unwrap();
        let mut probe = model.params.clone();
        tape.backward(loss, &mut probe).unwrap();
        let tiny = probe
            .iter()
            .flat_map(|t| t.grad.iter())
            .any(|&g| g != 0.0 && g.abs() < 1e-6);
        if !tiny {
            return (model, seed);
        }
    }
    panic!("no well-conditioned instance for {mode}");
}

/// Whole-model teacher-forced NLL gradient check (eps 1e-4) on
/// [`grad_check_example`]. Returns the max relative error and the seed used.
pub fn model_grad_check(mode: readagain::encoder::EncoderMode, start: u64) -> (f64, u64) {
    use readagain::dropout::Dropout;
    use readagain::encoder::EncodeOptions;

    let (mut model, seed) = grad_check_model(mode, start);
    assert_eq!(model.vocab.len(), 12);
    let ex = grad_check_example();
    let params = model.params.ids();
    let skeleton = model.clone();
    let err = readagain::math::grad_check(&mut model.params, &params, 1e-4, |tape, store| {
        let mut m = skeleton.clone();
        m.params = store.clone();
        let (loss, _) =
            m.example_loss(tape, &ex, &EncodeOptions::default(), &mut Dropout::off())?;
        Ok(loss)
    })
    .unwrap();
    (err, seed)
}
