//! `readagain` command-line front end.
//!
//! Exit codes: 0 success, 2 I/O or format error (and usage errors),
//! 3 numeric abort during training, 4 checkpoint/vocabulary mismatch.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use readagain::bench::bench_decode;
use readagain::dropout::Dropout;
use readagain::encoder::{CellKind, EncodeOptions, EncoderMode};
use readagain::inference::{beam_search, realize};
use readagain::math::Tape;
use readagain::rouge::{evaluate, EvalMode};
use readagain::text::corpus::{join_sentences, parse_source};
use readagain::text::{
    build_vocab, preprocess, read_corpus, split_first_sentence, synth_copy_corpus, Vocabulary,
};
use readagain::trainer::{load_checkpoint, save_checkpoint, train, TrainError, TrainingConfig};
use readagain::{Error, ModelConfig};

#[derive(Parser)]
#[command(
    name = "readagain",
    version,
    about = "Read-again encoder with copy decoder for abstractive summarization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn `article<TAB>title` lines into a training corpus.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Keep the first two sentences, joined by " <s> ".
        #[arg(long)]
        two_sent: bool,
    },
    /// Train a model and write a checkpoint plus `<out>.history.csv`.
    Train(TrainArgs),
    /// Beam-search one summary per source line.
    Summarize {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        beam: usize,
        #[arg(long, default_value_t = 30)]
        max_len: usize,
        #[arg(long)]
        out: PathBuf,
        /// Vocabulary file that must match the checkpoint's.
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// ROUGE-1/2/L of candidates against tab-separated references.
    Evaluate {
        #[arg(long)]
        cand: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long, value_enum, default_value = "f1")]
        mode: Mode,
    },
    /// Mean importance weight per source token, as CSV.
    ExportAlpha {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Greedy decoding time per sentence across vocabulary sizes.
    BenchDecode {
        #[arg(long, value_delimiter = ',', default_value = "64")]
        dims: Vec<usize>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "2000,5000,15000,30000,64000"
        )]
        vocab_sizes: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 15)]
        steps: usize,
        #[arg(long, default_value_t = 5)]
        sources: usize,
    },
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    vocab_size: usize,
    /// gru, lstm, multi-concat or multi-global.
    #[arg(long, default_value = "gru")]
    mode: EncoderMode,
    #[arg(long, default_value_t = 512)]
    dim: usize,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..), default_value_t = 10)]
    epochs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch_size: usize,
    /// Keep the learning rate constant instead of halving after epoch 5.
    #[arg(long)]
    no_schedule: bool,
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    /// Train without copy slots.
    #[arg(long)]
    no_copy: bool,
    /// History CSV path; defaults to `<out>.history.csv`.
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    F1,
    CappedRecall,
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Numeric(String),
    Mismatch(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Mismatch(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Numeric(m) | Failure::Mismatch(m) => m,
        }
    }

    fn with_line(self, line: usize) -> Self {
        match self {
            Failure::Io(m) => Failure::Io(format!("line {line}: {m}")),
            Failure::Numeric(m) => Failure::Numeric(format!("line {line}: {m}")),
            Failure::Mismatch(m) => Failure::Mismatch(format!("line {line}: {m}")),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NonFinite(_) | Error::EmptySupport => Failure::Numeric(msg),
            Error::Checkpoint(_) | Error::Mismatch(_) => Failure::Mismatch(msg),
            _ => Failure::Io(msg),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, Failure> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn run_preprocess(input: &Path, out: &Path, two_sent: bool) -> Outcome {
    let text = read_text(input)?;
    let mut w = create(out)?;
    let (mut no_tab, mut empty) = (0usize, 0usize);
    for line in text.lines() {
        let Some((article, title)) = line.split_once('\t') else {
            no_tab += 1;
            continue;
        };
        let (first, rest) = split_first_sentence(article);
        let mut source = vec![preprocess(first)];
        if two_sent {
            source.push(preprocess(split_first_sentence(rest).0));
        }
        source.retain(|s| !s.is_empty());
        let target = preprocess(title);
        if source.is_empty() || target.is_empty() {
            empty += 1;
            continue;
        }
        writeln!(w, "{}\t{}", join_sentences(&source), target.join(" "))?;
    }
    w.flush()?;
    if no_tab > 0 {
        eprintln!("warning: skipped {no_tab} line(s) without a TAB");
    }
    if empty > 0 {
        eprintln!("warning: skipped {empty} line(s) empty after preprocessing");
    }
    Ok(())
}

fn history_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".history.csv");
    PathBuf::from(name)
}

fn run_train(args: TrainArgs) -> Outcome {
    let TrainArgs {
        corpus,
        vocab_size,
        mode,
        dim,
        epochs,
        seed,
        out,
        lr,
        batch_size,
        no_schedule,
        dropout,
        no_copy,
        history,
    } = args;
    let data =
        read_corpus(&corpus).map_err(|e| Failure::Io(format!("{}: {e}", corpus.display())))?;
    let vocab = build_vocab(&data, vocab_size)?;
    let config = TrainingConfig {
        model: ModelConfig {
            dim,
            mode,
            copy: !no_copy,
        },
        vocab_size,
        epochs: epochs as usize,
        batch_size,
        lr0: lr,
        schedule: !no_schedule,
        clip: 10.0,
        dropout,
        seed,
    };
    eprintln!(
        "training {mode} d={dim} on {} examples, vocabulary {}",
        data.len(),
        vocab.len()
    );
    let history_out = history.unwrap_or_else(|| history_path(&out));
    match train(&config, &data, vocab) {
        Ok((model, hist)) => {
            for e in &hist.epochs {
                eprintln!(
                    "epoch {} lr {} nll {:.4} ({:.1}s)",
                    e.epoch, e.lr, e.mean_nll, e.seconds
                );
            }
            save_checkpoint(&model, &config, &out)?;
            fs::write(&history_out, hist.to_csv())?;
            Ok(())
        }
        Err(TrainError::Invalid(e)) => Err(e.into()),
        Err(TrainError::Diverged {
            epoch,
            last_good,
            history,
        }) => {
            save_checkpoint(&last_good, &config, &out)?;
            fs::write(&history_out, history.to_csv())?;
            Err(Failure::Numeric(format!(
                "loss became non-finite in epoch {epoch}; saved the last good parameters"
            )))
        }
    }
}

/// Source part of an input line: everything before a TAB, if any.
fn source_of(line: &str) -> &str {
    line.split_once('\t').map_or(line, |(s, _)| s)
}

fn run_summarize(
    ckpt: &Path,
    input: &Path,
    beam: usize,
    max_len: usize,
    out: &Path,
    vocab: Option<&Path>,
) -> Outcome {
    let (model, _) = load_checkpoint(ckpt)?;
    if let Some(path) = vocab {
        let expected = Vocabulary::load(path)?;
        if expected != model.vocab {
            return Err(Failure::Mismatch(format!(
                "{} does not match the checkpoint vocabulary",
                path.display()
            )));
        }
    }
    let text = read_text(input)?;
    let mut w = create(out)?;
    for (i, line) in text.lines().enumerate() {
        let source = parse_source(source_of(line));
        if source.is_empty() {
            writeln!(w)?;
            continue;
        }
        let best = beam_search(&model, &source, beam, max_len)
            .map_err(|e| Failure::from(e).with_line(i + 1))?;
        writeln!(w, "{}", realize(&best[0]))?;
    }
    w.flush()?;
    Ok(())
}

fn run_evaluate(cand: &Path, refs: &Path, mode: Mode) -> Outcome {
    let cands: Vec<String> = read_text(cand)?.lines().map(String::from).collect();
    let refs: Vec<Vec<String>> = read_text(refs)?
        .lines()
        .map(|l| l.split('\t').map(String::from).collect())
        .collect();
    if refs.len() < cands.len() {
        return Err(Failure::Io(format!(
            "missing references: {} candidate line(s) but {} reference line(s)",
            cands.len(),
            refs.len()
        )));
    }
    if refs.len() > cands.len() {
        return Err(Failure::Io(format!(
            "{} reference line(s) but only {} candidate line(s)",
            refs.len(),
            cands.len()
        )));
    }
    let mode = match mode {
        Mode::F1 => EvalMode::F1,
        Mode::CappedRecall => EvalMode::CappedRecall,
    };
    print!("{}", evaluate(&cands, &refs, mode).report());
    Ok(())
}

fn run_export_alpha(ckpt: &Path, input: &Path, out: &Path) -> Outcome {
    let (model, _) = load_checkpoint(ckpt)?;
    if model.config.mode.cell != CellKind::Gru {
        return Err(Failure::Mismatch(format!(
            "{} uses an LSTM second read, which has no importance weights",
            model.config.mode
        )));
    }
    let text = read_text(input)?;
    let mut w = csv::Writer::from_writer(create(out)?);
    w.write_record(["sentence_id", "position", "token", "mean_alpha"])?;
    for (i, line) in text.lines().enumerate() {
        let source = parse_source(source_of(line));
        if source.is_empty() {
            continue;
        }
        let mut tape = Tape::new();
        let ctx = model
            .encode(
                &mut tape,
                &source,
                &EncodeOptions::default(),
                &mut Dropout::off(),
            )
            .map_err(|e| Failure::from(e).with_line(i + 1))?;
        for (pos, (&a, token)) in ctx.encoded.alpha.iter().zip(&ctx.tokens).enumerate() {
            let alpha = tape.value(a);
            let mean = alpha.iter().sum::<f64>() / alpha.len() as f64;
            w.write_record([
                i.to_string(),
                pos.to_string(),
                token.clone(),
                mean.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run_bench(
    dims: &[usize],
    vocab_sizes: &[usize],
    reps: usize,
    steps: usize,
    n_sources: usize,
) -> Outcome {
    let sources: Vec<Vec<Vec<String>>> = synth_copy_corpus(11, n_sources)
        .into_iter()
        .map(|e| e.source)
        .collect();
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["dim", "vocab_size", "seconds_per_sentence"])?;
    for &dim in dims {
        for row in bench_decode(vocab_sizes, dim, &sources, steps, reps)? {
            w.write_record([
                dim.to_string(),
                row.vocab_size.to_string(),
                format!("{:.6}", row.seconds_per_sentence),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Preprocess {
            input,
            out,
            two_sent,
        } => run_preprocess(&input, &out, two_sent),
        Command::Train(args) => run_train(args),
        Command::Summarize {
            ckpt,
            input,
            beam,
            max_len,
            out,
            vocab,
        } => run_summarize(&ckpt, &input, beam, max_len, &out, vocab.as_deref()),
        Command::Evaluate { cand, refs, mode } => run_evaluate(&cand, &refs, mode),
        Command::ExportAlpha { ckpt, input, out } => run_export_alpha(&ckpt, &input, &out),
        Command::BenchDecode {
            dims,
            vocab_sizes,
            reps,
            steps,
            sources,
        } => run_bench(&dims, &vocab_sizes, reps, steps, sources),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
