//! Trains copy and no-copy models on the synthetic copy task and reports
//! greedy exact-token accuracy after every epoch.
//!
//!     cargo run --release -p readagain --example copy_task -- [epochs] [dim] [lr] [batch] [dropout]

use std::ops::ControlFlow;

use readagain::encoder::EncoderMode;
use readagain::inference::{greedy, token_matches};
use readagain::text::{build_vocab, synth_copy_corpus, Example};
use readagain::trainer::{init_params, train_model, TrainingConfig};
use readagain::{Model, ModelConfig};

fn accuracy(model: &Model, test: &[Example]) -> f64 {
    let (mut hits, mut total) = (0, 0);
    for ex in test {
        let hyp = greedy(model, &ex.source, ex.target.len() + 1).expect("decode");
        let words: Vec<&str> = hyp.words().collect();
        let (h, t) = token_matches(&words, &ex.target);
        hits += h;
        total += t;
    }
    hits as f64 / total as f64
}

fn main() {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(30, |a| a.parse().expect("epochs"));
    let dim: usize = args.next().map_or(32, |a| a.parse().expect("dim"));
    let lr: f64 = args.next().map_or(2.0, |a| a.parse().expect("lr"));
    let batch: usize = args.next().map_or(64, |a| a.parse().expect("batch"));
    let dropout: f64 = args.next().map_or(0.2, |a| a.parse().expect("dropout"));
    let corpus = synth_copy_corpus(7, 2200);
    let (train, test) = corpus.split_at(2000);
    let vocab = build_vocab(train, 24).expect("vocab");

    for copy in [true, false] {
        let mut cfg = TrainingConfig::new(
            ModelConfig {
                dim,
                mode: EncoderMode::GRU,
                copy,
            },
            24,
        );
        cfg.epochs = epochs;
        cfg.seed = 7;
        cfg.lr0 = lr;
        cfg.batch_size = batch;
        cfg.dropout = dropout;
        cfg.schedule = false;
        let mut model = Model::new(cfg.model, vocab.clone()).expect("model");
        init_params(&mut model.params, dim, cfg.seed);
        train_model(&mut model, &cfg, train, |m, rec| {
            let acc = accuracy(m, test);
            println!(
                "copy={copy} epoch={} lr={} nll={:.4} acc={:.3} ({:.1}s)",
                rec.epoch, rec.lr, rec.mean_nll, acc, rec.seconds
            );
            ControlFlow::Continue(())
        })
        .expect("training");
    }
}
