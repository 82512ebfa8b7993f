//! ROUGE-1/2/L against one or more references. No stemming, no stopword
//! removal; tokens compare as exact strings.

use std::collections::HashMap;
use std::fmt;

/// Byte budget for limited-length recall.
pub const CAP_BYTES: usize = 75;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(overlap: usize, cand: usize, reference: usize) -> Self {
        let precision = if cand == 0 {
            0.0
        } else {
            overlap as f64 / cand as f64
        };
        let recall = if reference == 0 {
            0.0
        } else {
            overlap as f64 / reference as f64
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Rouge1,
    Rouge2,
    RougeL,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Rouge1, Metric::Rouge2, Metric::RougeL];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Rouge1 => "ROUGE-1",
            Metric::Rouge2 => "ROUGE-2",
            Metric::RougeL => "ROUGE-L",
        })
    }
}

fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut out = HashMap::new();
    if n == 0 {
        return out;
    }
    for w in tokens.windows(n) {
        *out.entry(w.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    out
}

fn best<I: IntoIterator<Item = RougeScore>>(scores: I) -> RougeScore {
    scores
        .into_iter()
        .fold(None, |acc: Option<RougeScore>, s| match acc {
            Some(a) if a.f1 >= s.f1 => Some(a),
            _ => Some(s),
        })
        .unwrap_or_default()
}

fn rouge_n_single<S: AsRef<str>, R: AsRef<str>>(
    cand: &[S],
    reference: &[R],
    n: usize,
) -> RougeScore {
    let c = ngrams(cand, n);
    let r = ngrams(reference, n);
    let overlap = c
        .iter()
        .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_counts(overlap, c.values().sum(), r.values().sum())
}

/// Clipped n-gram overlap; the reference with the highest F1 wins.
///
/// # Panics
/// If `n` is not 1 or 2.
pub fn rouge_n<S: AsRef<str>, R: AsRef<str>>(
    cand: &[S],
    references: &[Vec<R>],
    n: usize,
) -> RougeScore {
    assert!(n == 1 || n == 2, "rouge_n supports n in {{1, 2}}, got {n}");
    best(references.iter().map(|r| rouge_n_single(cand, r, n)))
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: AsRef<str>, R: AsRef<str>>(a: &[S], b: &[R]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l<S: AsRef<str>, R: AsRef<str>>(cand: &[S], references: &[Vec<R>]) -> RougeScore {
    best(
        references
            .iter()
            .map(|r| RougeScore::from_counts(lcs_len(cand, r), cand.len(), r.len())),
    )
}

pub fn score<S: AsRef<str>, R: AsRef<str>>(
    metric: Metric,
    cand: &[S],
    references: &[Vec<R>],
) -> RougeScore {
    match metric {
        Metric::Rouge1 => rouge_n(cand, references, 1),
        Metric::Rouge2 => rouge_n(cand, references, 2),
        Metric::RougeL => rouge_l(cand, references),
    }
}

/// Longest whitespace-token prefix whose space-joined form fits in `cap`
/// bytes. Never cuts inside a token.
pub fn truncate_tokens(text: &str, cap: usize) -> Vec<&str> {
    let mut used = 0;
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        let next = used + usize::from(!out.is_empty()) + tok.len();
        if next > cap {
            break;
        }
        used = next;
        out.push(tok);
    }
    out
}

/// Recall of `metric` after capping the candidate at [`CAP_BYTES`]. With
/// several references the recall of the max-F1 reference is returned.
pub fn capped_recall(cand: &str, references: &[&str], metric: Metric) -> f64 {
    capped_recall_with(cand, references, metric, CAP_BYTES)
}

pub fn capped_recall_with(cand: &str, references: &[&str], metric: Metric, cap: usize) -> f64 {
    let c = truncate_tokens(cand, cap);
    let refs: Vec<Vec<&str>> = references
        .iter()
        .map(|r| r.split_whitespace().collect())
        .collect();
    score(metric, &c, &refs).recall
}

/// Which of the two reporting modes to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Full-length F1.
    F1,
    /// Limited-length recall at [`CAP_BYTES`].
    CappedRecall,
}

/// Corpus-level averages (macro over candidates) per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScores {
    pub rows: Vec<(Metric, RougeScore)>,
}

impl CorpusScores {
    /// One line per metric: `ROUGE-k P R F1`, five decimals.
    pub fn report(&self) -> String {
        self.rows
            .iter()
            .map(|(m, s)| format!("{m} {:.5} {:.5} {:.5}\n", s.precision, s.recall, s.f1))
            .collect()
    }
}

/// Scores aligned candidates and reference sets. In capped-recall mode the
/// candidate is capped before every metric, so P and F1 describe the capped
/// candidate too.
pub fn evaluate<C: AsRef<str>, R: AsRef<str>>(
    cands: &[C],
    refs: &[Vec<R>],
    mode: EvalMode,
) -> CorpusScores {
    let n = cands.len().min(refs.len());
    let mut sums = [RougeScore::default(); 3];
    for (c, rs) in cands.iter().zip(refs).take(n) {
        let toks: Vec<&str> = match mode {
            EvalMode::F1 => c.as_ref().split_whitespace().collect(),
            EvalMode::CappedRecall => truncate_tokens(c.as_ref(), CAP_BYTES),
        };
        let rt: Vec<Vec<&str>> = rs
            .iter()
            .map(|r| r.as_ref().split_whitespace().collect())
            .collect();
        for (sum, m) in sums.iter_mut().zip(Metric::ALL) {
            let s = score(m, &toks, &rt);
            sum.precision += s.precision;
            sum.recall += s.recall;
            sum.f1 += s.f1;
        }
    }
    let k = n.max(1) as f64;
    CorpusScores {
        rows: Metric::ALL
            .into_iter()
            .zip(sums)
            .map(|(m, s)| {
                (
                    m,
                    RougeScore {
                        precision: s.precision / k,
                        recall: s.recall / k,
                        f1: s.f1 / k,
                    },
                )
            })
            .collect(),
    }
}
