//! Synthetic copy task: summaries are exactly the rare "entity" tokens of the
//! source, in order. Entities are drawn from a pool far larger than any
//! decoder vocabulary, so a model can only get them right by copying.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::Example;

pub const FUNCTION_WORDS: [&str; 20] = [
    "the", "a", "of", "to", "in", "and", "for", "on", "with", "at", "by", "from", "is", "was",
    "as", "that", "its", "has", "said", "after",
];

pub const ENTITY_POOL_SIZE: usize = 5000;

const SYLLABLES: [&str; 20] = [
    "ka", "lo", "mi", "ru", "te", "zo", "ne", "pa", "si", "vu", "bo", "da", "fe", "gi", "ho", "ju",
    "ky", "le", "mo", "nu",
];

/// The `i`-th entity name: three syllables, no digits, never a function word.
pub fn entity(i: usize) -> String {
    assert!(i < ENTITY_POOL_SIZE);
    let n = SYLLABLES.len();
    [i / (n * n), (i / n) % n, i % n]
        .iter()
        .map(|&k| SYLLABLES[k])
        .collect()
}

/// Deterministic per seed. Sources have 6–12 tokens of which 1–4 are
/// distinct entities; the target lists those entities in source order.
pub fn synth_copy_corpus(seed: u64, n_examples: usize) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_examples)
        .map(|_| {
            let len = rng.gen_range(6..=12);
            let n_ent = rng.gen_range(1..=4);
            let mut slots = index::sample(&mut rng, len, n_ent).into_vec();
            slots.sort_unstable();
            let names = index::sample(&mut rng, ENTITY_POOL_SIZE, n_ent).into_vec();
            let mut source: Vec<String> = (0..len)
                .map(|_| FUNCTION_WORDS[rng.gen_range(0..FUNCTION_WORDS.len())].to_string())
                .collect();
            let mut target = Vec::with_capacity(n_ent);
            for (&pos, &name) in slots.iter().zip(&names) {
                source[pos] = entity(name);
                target.push(source[pos].clone());
            }
            Example::new(vec![source], target)
        })
        .collect()
}
