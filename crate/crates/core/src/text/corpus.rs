use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Separator between source sentences in corpus files.
pub const SENTENCE_MARK: &str = "<s>";

/// One source/summary pair. Sentence boundaries in the source are kept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub source: Vec<Vec<String>>,
    pub target: Vec<String>,
    pub raw_source: String,
}

impl Example {
    pub fn new(source: Vec<Vec<String>>, target: Vec<String>) -> Self {
        let raw_source = join_sentences(&source);
        Example {
            source,
            target,
            raw_source,
        }
    }

    /// All source tokens in order, ignoring sentence boundaries.
    pub fn source_tokens(&self) -> impl Iterator<Item = &String> + '_ {
        self.source.iter().flatten()
    }

    pub fn flat_source(&self) -> Vec<String> {
        self.source_tokens().cloned().collect()
    }

    /// Parses `source<TAB>target`, with source sentences split on `<s>`.
    pub fn parse_tsv(line: &str) -> Result<Self> {
        let mut fields = line.split('\t');
        let (Some(src), Some(tgt), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Format("expected exactly one TAB".into()));
        };
        let source = parse_source(src);
        let target: Vec<String> = tgt.split_whitespace().map(String::from).collect();
        if source.is_empty() || target.is_empty() {
            return Err(Error::Format("empty source or target".into()));
        }
        Ok(Example {
            source,
            target,
            raw_source: src.trim().to_string(),
        })
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}",
            join_sentences(&self.source),
            self.target.join(" ")
        )
    }
}

/// Splits a source line into sentences at `<s>` markers, dropping empty ones.
pub fn parse_source(src: &str) -> Vec<Vec<String>> {
    let mut sentences = vec![Vec::new()];
    for tok in src.split_whitespace() {
        if tok == SENTENCE_MARK {
            sentences.push(Vec::new());
        } else {
            sentences
                .last_mut()
                .expect("non-empty")
                .push(tok.to_string());
        }
    }
    sentences.retain(|s| !s.is_empty());
    sentences
}

pub fn join_sentences(source: &[Vec<String>]) -> String {
    source
        .iter()
        .map(|s| s.join(" "))
        .collect::<Vec<_>>()
        .join(&format!(" {SENTENCE_MARK} "))
}

/// Reads a TSV corpus; any malformed line is an error naming its line number.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Example>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Example::parse_tsv(l).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &[Example]) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    for ex in corpus {
        writeln!(f, "{}", ex.to_tsv())?;
    }
    f.flush()?;
    Ok(())
}
