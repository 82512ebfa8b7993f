/// Whitespace-tokenizes, lower-cases and rewrites every digit to `#`.
///
/// Input is expected to be tokenized already (PTB-style for news text);
/// punctuation stays attached exactly as whitespace splitting leaves it.
pub fn preprocess(line: &str) -> Vec<String> {
    line.split_whitespace()
        .map(|tok| {
            tok.to_lowercase()
                .chars()
                .map(|c| if c.is_ascii_digit() { '#' } else { c })
                .collect()
        })
        .collect()
}

/// Text up to and including the first `.`, `!` or `?`, trimmed. No
/// abbreviation handling: "dr. smith" splits after "dr.".
pub fn first_sentence(article: &str) -> &str {
    split_first_sentence(article).0
}

/// `(first sentence, remainder)`, both trimmed.
pub fn split_first_sentence(article: &str) -> (&str, &str) {
    match article.find(['.', '!', '?']) {
        Some(pos) => (article[..=pos].trim(), article[pos + 1..].trim()),
        None => (article.trim(), ""),
    }
}
