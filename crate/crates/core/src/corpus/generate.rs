//! Deterministic synthetic corpora for desk-scale experiments.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Label, LabeledMessage};
use crate::encoding::Codebook;

/// Shape of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSpec {
    pub n_spam: usize,
    pub n_legit: usize,
    pub spam_vocab: usize,
    pub legit_vocab: usize,
    /// Words used by both classes.
    pub shared_vocab: usize,
    pub spam_senders: usize,
    pub legit_senders: usize,
    /// Inclusive range of word lengths in symbols.
    pub word_len: (usize, usize),
    pub header_words: (usize, usize),
    pub body_words: (usize, usize),
    /// Chance that any one word is drawn from the shared vocabulary.
    pub shared_rate: f64,
    /// Chance that a spam-vocabulary word gets a confusable-character swap.
    pub substitution_rate: f64,
    /// Messages before this position are never substituted.
    pub substitute_from: usize,
    pub drift: Option<DriftSpec>,
}

/// From message `at` onward, spam switches to a fresh vocabulary and/or a
/// fresh sender pool of the same sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftSpec {
    pub at: usize,
    pub rotate_vocabulary: bool,
    pub rotate_senders: bool,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            at: 0,
            rotate_vocabulary: true,
            rotate_senders: true,
        }
    }
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_spam: 50,
            n_legit: 50,
            spam_vocab: 40,
            legit_vocab: 40,
            shared_vocab: 6,
            spam_senders: 10,
            legit_senders: 20,
            word_len: (3, 6),
            header_words: (1, 3),
            body_words: (4, 10),
            shared_rate: 0.15,
            substitution_rate: 0.0,
            substitute_from: 0,
            drift: None,
        }
    }
}

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

pub(crate) struct Vocabulary {
    pub spam: [Vec<String>; 2],
    pub legit: Vec<String>,
    pub shared: Vec<String>,
    pub spam_senders: [Vec<String>; 2],
    pub legit_senders: Vec<String>,
}

pub(crate) fn build_vocabulary(
    rng: &mut ChaCha8Rng,
    spec: &CorpusSpec,
    codebook: &Codebook,
) -> Vocabulary {
    let mut used = BTreeSet::new();
    let (lo, hi) = (
        spec.word_len.0.max(1),
        spec.word_len.1.max(spec.word_len.0.max(1)),
    );
    let mut words = |n: usize, needs_confusable: bool, rng: &mut ChaCha8Rng| -> Vec<String> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let len = rng.gen_range(lo..=hi);
            let w: String = (0..len)
                .map(|_| *LETTERS.choose(rng).expect("non-empty") as char)
                .collect();
            if needs_confusable && !w.chars().any(|c| !codebook.confusable_with(c).is_empty()) {
                continue;
            }
            if used.insert(w.clone()) {
                out.push(w);
            }
        }
        out
    };
    let spam0 = words(spec.spam_vocab, true, rng);
    let legit = words(spec.legit_vocab, false, rng);
    let shared = words(spec.shared_vocab, false, rng);
    let spam1 = match &spec.drift {
        Some(d) if d.rotate_vocabulary => words(spec.spam_vocab, true, rng),
        _ => spam0.clone(),
    };

    let mut senders_used = BTreeSet::new();
    let mut senders = |n: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let name: String = (0..rng.gen_range(4..=8))
                .map(|_| *LETTERS.choose(rng).expect("non-empty") as char)
                .collect();
            let host: String = (0..rng.gen_range(3..=6))
                .map(|_| *LETTERS.choose(rng).expect("non-empty") as char)
                .collect();
            let s = format!("{name}{}@{host}.com", rng.gen_range(0..100));
            if senders_used.insert(s.clone()) {
                out.push(s);
            }
        }
        out
    };
    let spam_senders0 = senders(spec.spam_senders.max(1), rng);
    let legit_senders = senders(spec.legit_senders.max(1), rng);
    let spam_senders1 = match &spec.drift {
        Some(d) if d.rotate_senders => senders(spec.spam_senders.max(1), rng),
        _ => spam_senders0.clone(),
    };

    Vocabulary {
        spam: [spam0, spam1],
        legit,
        shared,
        spam_senders: [spam_senders0, spam_senders1],
        legit_senders,
    }
}

/// Replaces one symbol that has a confusable partner with a random partner.
pub(crate) fn confusable_swap(word: &str, rng: &mut ChaCha8Rng, codebook: &Codebook) -> String {
    let chars: Vec<char> = word.chars().collect();
    let candidates: Vec<usize> = (0..chars.len())
        .filter(|&i| !codebook.confusable_with(chars[i]).is_empty())
        .collect();
    let Some(&pos) = candidates.choose(rng) else {
        return word.to_string();
    };
    let partners = codebook.confusable_with(chars[pos]);
    let mut out = chars;
    out[pos] = *partners.choose(rng).expect("non-empty");
    out.into_iter().collect()
}

/// Generates a labeled corpus. Identical seeds and specs give identical
/// corpora; the substitution stream is separate, so changing only the
/// substitution rate leaves every other choice unchanged.
pub fn gen_corpus(seed: u64, spec: &CorpusSpec) -> Vec<LabeledMessage> {
    let codebook = Codebook::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut swaps = ChaCha8Rng::seed_from_u64(seed);
    swaps.set_stream(1);
    let vocab = build_vocabulary(&mut rng, spec, &codebook);

    let mut labels: Vec<Label> = std::iter::repeat_n(Label::Spam, spec.n_spam)
        .chain(std::iter::repeat_n(Label::Legitimate, spec.n_legit))
        .collect();
    labels.shuffle(&mut rng);

    let range = |(lo, hi): (usize, usize), rng: &mut ChaCha8Rng| rng.gen_range(lo..=hi.max(lo));

    labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let phase = spec.drift.as_ref().is_some_and(|d| i >= d.at) as usize;
            let (own_words, senders) = match label {
                Label::Spam => (&vocab.spam[phase], &vocab.spam_senders[phase]),
                Label::Legitimate => (&vocab.legit, &vocab.legit_senders),
            };
            let sender = senders
                .choose(&mut rng)
                .expect("sender pools are non-empty")
                .clone();
            let mut pick = |rng: &mut ChaCha8Rng| -> String {
                if !vocab.shared.is_empty() && rng.gen_bool(spec.shared_rate.clamp(0.0, 1.0)) {
                    return vocab.shared.choose(rng).expect("non-empty").clone();
                }
                let Some(w) = own_words.choose(rng) else {
                    return vocab.shared.choose(rng).cloned().unwrap_or_default();
                };
                // always draw, so the substitution rate never shifts the stream
                let roll: f64 = swaps.gen();
                if label == Label::Spam
                    && i >= spec.substitute_from
                    && roll < spec.substitution_rate
                {
                    confusable_swap(w, &mut swaps, &codebook)
                } else {
                    w.clone()
                }
            };
            let header: Vec<String> = (0..range(spec.header_words, &mut rng))
                .map(|_| pick(&mut rng))
                .collect();
            let body: Vec<String> = (0..range(spec.body_words, &mut rng))
                .map(|_| pick(&mut rng))
                .collect();
            LabeledMessage::new(
                format!("msg-{i:05}"),
                sender,
                header.join(" "),
                body.join(" "),
                Some(label),
            )
        })
        .collect()
}
