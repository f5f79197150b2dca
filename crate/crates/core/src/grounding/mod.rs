//! Concept recognition: map question and answer text onto knowledge-graph
//! concepts by n-gram matching.
//!
//! Text is lowercased and split into maximal alphanumeric runs. Every n-gram
//! up to `max_ngram` tokens that is not made solely of stop words is looked
//! up twice, once as the raw tokens joined with `_` and once with each token
//! lemmatized first. Overlapping matches are all kept, so "watch tv" yields
//! `watch_tv`, `watch` and `tv`.

mod lemma;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{ConceptId, KnowledgeGraph};

pub use lemma::lemmatize;

const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

pub const DEFAULT_MAX_NGRAM: usize = 4;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StopWords(HashSet<String>);

impl StopWords {
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn none() -> Self {
        Self::default()
    }

    /// One word per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopWords(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Half-open token range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

/// Concepts recognized in one piece of text, with the spans that matched.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionSet {
    pub tokens: Vec<String>,
    pub mentions: BTreeMap<ConceptId, Vec<Span>>,
}

impl MentionSet {
    pub fn concepts(&self) -> Vec<ConceptId> {
        self.mentions.keys().copied().collect()
    }

    pub fn contains(&self, c: ConceptId) -> bool {
        self.mentions.contains_key(&c)
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    /// Surface forms of the recognized concepts, in concept-id order.
    pub fn surfaces<'a>(&self, kg: &'a KnowledgeGraph) -> Vec<&'a str> {
        self.mentions
            .keys()
            .filter_map(|&c| kg.surface(c).ok())
            .collect()
    }
}

/// Lowercase and split on anything that is not alphanumeric.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Recognize mentioned concepts in `text`.
pub fn recognize(
    text: &str,
    kg: &KnowledgeGraph,
    max_ngram: usize,
    stopwords: &StopWords,
) -> MentionSet {
    let tokens = tokenize(text);
    let lemmas: Vec<String> = tokens.iter().map(|t| lemmatize(t)).collect();
    let mut mentions: BTreeMap<ConceptId, Vec<Span>> = BTreeMap::new();
    for n in 1..=max_ngram.max(1) {
        for start in 0..tokens.len().saturating_sub(n - 1) {
            let window = &tokens[start..start + n];
            if window.iter().all(|t| stopwords.contains(t)) {
                continue;
            }
            let raw = window.join("_");
            let lemma = lemmas[start..start + n].join("_");
            let span = Span {
                start,
                end: start + n,
            };
            for key in [&raw, &lemma] {
                if let Some(c) = kg.lookup_surface(key) {
                    let spans = mentions.entry(c).or_default();
                    if !spans.contains(&span) {
                        spans.push(span);
                    }
                }
            }
        }
    }
    for spans in mentions.values_mut() {
        spans.sort();
    }
    MentionSet { tokens, mentions }
}

/// Recognizer with its configuration bundled.
#[derive(Debug, Clone)]
pub struct Grounder {
    pub max_ngram: usize,
    pub stopwords: StopWords,
}

impl Default for Grounder {
    fn default() -> Self {
        Grounder {
            max_ngram: DEFAULT_MAX_NGRAM,
            stopwords: StopWords::english(),
        }
    }
}

impl Grounder {
    pub fn recognize(&self, text: &str, kg: &KnowledgeGraph) -> MentionSet {
        recognize(text, kg, self.max_ngram, &self.stopwords)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab_graph(surfaces: &[&str]) -> KnowledgeGraph {
        let mut b = KnowledgeGraph::builder();
        for s in surfaces {
            b.concept(s);
        }
        b.build().unwrap()
    }

    fn surfaces(m: &MentionSet, kg: &KnowledgeGraph) -> Vec<String> {
        let mut v: Vec<String> = m.surfaces(kg).into_iter().map(String::from).collect();
        v.sort();
        v
    }

    #[test]
    fn watch_tv_sentence() {
        let kg = vocab_graph(&[
            "sitting", "close", "watch_tv", "watch", "tv", "sort", "pain", "cause", "can", "what",
            "unrelated",
        ]);
        let m = recognize(
            "Sitting too close to watch tv can cause what sort of pain?",
            &kg,
            4,
            &StopWords::english(),
        );
        let got = surfaces(&m, &kg);
        for want in ["sitting", "close", "watch_tv", "watch", "tv", "sort", "pain"] {
            assert!(got.contains(&want.to_string()), "missing {want}: {got:?}");
        }
        // stop words never match on their own
        assert!(!got.contains(&"can".to_string()));
        assert!(!got.contains(&"what".to_string()));
        assert!(!got.contains(&"unrelated".to_string()));
    }

    #[test]
    fn lemma_matching_for_glue_sticks() {
        // Hand-applied rules: tokens [adults, use, glue, sticks], lemmas
        // [adult, use, glue, stick]. Unigram lemmas hit adult, glue, stick;
        // the bigram lemma "glue_stick" hits glue_stick.
        let kg = vocab_graph(&["adult", "glue_stick", "glue", "stick"]);
        let m = recognize("adults use glue sticks", &kg, 4, &StopWords::english());
        assert_eq!(surfaces(&m, &kg), ["adult", "glue", "glue_stick", "stick"]);
        let gs = kg.lookup_surface("glue_stick").unwrap();
        assert_eq!(m.mentions[&gs], vec![Span { start: 2, end: 4 }]);
    }

    #[test]
    fn empty_text() {
        let kg = vocab_graph(&["a"]);
        assert!(recognize("", &kg, 4, &StopWords::english()).is_empty());
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        assert_eq!(tokenize("Glue-sticks, desk drawer!"), ["glue", "sticks", "desk", "drawer"]);
    }

    #[test]
    fn stopword_ngrams_are_skipped_but_mixed_ones_kept() {
        let kg = vocab_graph(&["of", "sort_of"]);
        let m = recognize("sort of", &kg, 4, &StopWords::english());
        assert_eq!(surfaces(&m, &kg), ["sort_of"]);
    }
}
