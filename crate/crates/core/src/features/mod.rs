//! Sparse handcrafted clause features.
//!
//! Each clause yields a multiset of [`FeatureKey`]s drawn from six templates:
//! lexicon categories, word bigrams, POS bigrams, word/POS pairs, visual cues
//! and the dyad relationship. A [`FeatureSpace`] built on training dialogs
//! keeps the keys seen at least `rare_threshold` times and freezes their
//! column ids; [`vectorize`] then maps any clause to a [`SparseVector`] of
//! occurrence counts.

mod pos;
mod space;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Clause;
use crate::error::{Error, Result};

pub use pos::{pos_tag_fallback, tag_word};
pub use space::{
    build_feature_space, encode_meta, vectorize, FeatureSpace, Fingerprint, SparseVector,
    ValueMode, DEFAULT_RARE_THRESHOLD, META_DIM,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    LexiconCategory,
    WordBigram,
    PosBigram,
    WordPosPair,
    Visual,
    Relationship,
}

impl Template {
    pub const ALL: [Template; 6] = [
        Template::LexiconCategory,
        Template::WordBigram,
        Template::PosBigram,
        Template::WordPosPair,
        Template::Visual,
        Template::Relationship,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Template::LexiconCategory => "lexicon_category",
            Template::WordBigram => "word_bigram",
            Template::PosBigram => "pos_bigram",
            Template::WordPosPair => "word_pos_pair",
            Template::Visual => "visual",
            Template::Relationship => "relationship",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Template::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

/// A feature identity; ordering is by template, then payload.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureKey {
    pub template: Template,
    pub payload: String,
}

impl FeatureKey {
    pub fn new(template: Template, payload: impl Into<String>) -> Self {
        FeatureKey {
            template,
            payload: payload.into(),
        }
    }

    fn joined(template: Template, a: &str, b: &str) -> Self {
        FeatureKey::new(template, format!("{a}|{b}"))
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.template.as_str(), self.payload)
    }
}

/// Word-category lexicon. Patterns are literal words or prefixes ending in `*`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    categories: BTreeMap<String, Vec<String>>,
}

impl Lexicon {
    pub fn new(categories: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut normalized = BTreeMap::new();
        for (name, patterns) in categories {
            if name.is_empty() {
                return Err(Error::InvalidConfig("empty lexicon category name".into()));
            }
            let mut out = Vec::with_capacity(patterns.len());
            for p in patterns {
                let p = p.trim().to_lowercase();
                if p.is_empty() || p == "*" {
                    return Err(Error::InvalidConfig(format!(
                        "empty pattern in lexicon category `{name}`"
                    )));
                }
                out.push(p);
            }
            normalized.insert(name, out);
        }
        Ok(Lexicon {
            categories: normalized,
        })
    }

    pub fn categories(&self) -> &BTreeMap<String, Vec<String>> {
        &self.categories
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Categories whose patterns match `word`.
    pub fn matches<'a>(&'a self, word: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.categories
            .iter()
            .filter(move |(_, patterns)| patterns.iter().any(|p| pattern_matches(p, word)))
            .map(|(name, _)| name.as_str())
    }
}

fn pattern_matches(pattern: &str, word: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => word.starts_with(prefix),
        None => pattern == word,
    }
}

/// Multiset of feature keys with occurrence counts.
pub type KeyCounts = BTreeMap<FeatureKey, u32>;

/// Emits every feature key occurrence of `clause`. Clauses without POS
/// annotation are tagged with [`pos_tag_fallback`].
pub fn extract_feature_keys(clause: &Clause, lexicon: &Lexicon) -> KeyCounts {
    let mut out = KeyCounts::new();
    let mut add = |k: FeatureKey| *out.entry(k).or_insert(0) += 1;

    let fallback;
    let tags: &[String] = match &clause.pos_tags {
        Some(t) => t,
        None => {
            fallback = pos_tag_fallback(&clause.words);
            &fallback
        }
    };
    let words = &clause.words;

    for w in words {
        for cat in lexicon.matches(w) {
            add(FeatureKey::new(Template::LexiconCategory, cat));
        }
    }
    for pair in words.windows(2) {
        add(FeatureKey::joined(Template::WordBigram, &pair[0], &pair[1]));
    }
    for pair in tags.windows(2) {
        add(FeatureKey::joined(Template::PosBigram, &pair[0], &pair[1]));
    }
    for (w, t) in words.iter().zip(tags) {
        add(FeatureKey::joined(Template::WordPosPair, w, t));
    }
    let m = &clause.meta;
    for (on, name) in [
        (m.head_nod, "head_nod"),
        (m.smile, "smile"),
        (m.gaze_partner, "gaze_partner"),
    ] {
        if on {
            add(FeatureKey::new(Template::Visual, name));
        }
    }
    add(FeatureKey::new(
        Template::Relationship,
        m.relationship.as_str(),
    ));
    out
}
