//! Coarse rule-based part-of-speech tagger used when a corpus carries no tags.

use alloc::string::String;
use alloc::vec::Vec;

pub const PRON: &str = "PRON";
pub const DET: &str = "DET";
pub const PREP: &str = "PREP";
pub const CONJ: &str = "CONJ";
pub const VERB: &str = "VERB";
pub const ADJ: &str = "ADJ";
pub const ADV: &str = "ADV";
pub const NOUN: &str = "NOUN";
pub const NUM: &str = "NUM";
pub const PUNCT: &str = "PUNCT";
pub const OTHER: &str = "OTHER";

const CLOSED_CLASS: &[(&str, &str)] = &[
    ("i", PRON),
    ("me", PRON),
    ("my", PRON),
    ("mine", PRON),
    ("myself", PRON),
    ("you", PRON),
    ("your", PRON),
    ("yours", PRON),
    ("yourself", PRON),
    ("he", PRON),
    ("him", PRON),
    ("his", PRON),
    ("she", PRON),
    ("her", PRON),
    ("hers", PRON),
    ("it", PRON),
    ("its", PRON),
    ("we", PRON),
    ("us", PRON),
    ("our", PRON),
    ("they", PRON),
    ("them", PRON),
    ("their", PRON),
    ("this", PRON),
    ("that", PRON),
    ("these", PRON),
    ("those", PRON),
    ("who", PRON),
    ("what", PRON),
    ("which", PRON),
    ("u", PRON),
    ("ur", PRON),
    ("the", DET),
    ("a", DET),
    ("an", DET),
    ("some", DET),
    ("any", DET),
    ("every", DET),
    ("each", DET),
    ("no", DET),
    ("all", DET),
    ("in", PREP),
    ("on", PREP),
    ("at", PREP),
    ("by", PREP),
    ("for", PREP),
    ("with", PREP),
    ("about", PREP),
    ("to", PREP),
    ("from", PREP),
    ("of", PREP),
    ("into", PREP),
    ("over", PREP),
    ("under", PREP),
    ("after", PREP),
    ("before", PREP),
    ("like", PREP),
    ("and", CONJ),
    ("or", CONJ),
    ("but", CONJ),
    ("because", CONJ),
    ("so", CONJ),
    ("if", CONJ),
    ("then", CONJ),
    ("when", CONJ),
    ("while", CONJ),
    ("is", VERB),
    ("am", VERB),
    ("are", VERB),
    ("was", VERB),
    ("were", VERB),
    ("be", VERB),
    ("been", VERB),
    ("do", VERB),
    ("does", VERB),
    ("did", VERB),
    ("have", VERB),
    ("has", VERB),
    ("had", VERB),
    ("can", VERB),
    ("will", VERB),
    ("would", VERB),
    ("should", VERB),
    ("could", VERB),
    ("get", VERB),
    ("got", VERB),
    ("go", VERB),
    ("know", VERB),
    ("think", VERB),
    ("suck", VERB),
    ("sucks", VERB),
    ("good", ADJ),
    ("bad", ADJ),
    ("stupid", ADJ),
    ("dumb", ADJ),
    ("nice", ADJ),
    ("great", ADJ),
    ("right", ADJ),
    ("wrong", ADJ),
    ("easy", ADJ),
    ("hard", ADJ),
    ("not", ADV),
    ("very", ADV),
    ("too", ADV),
    ("just", ADV),
    ("really", ADV),
    ("now", ADV),
    ("here", ADV),
    ("there", ADV),
    ("again", ADV),
    ("never", ADV),
    ("yeah", OTHER),
    ("yes", OTHER),
    ("ok", OTHER),
    ("okay", OTHER),
    ("oh", OTHER),
    ("um", OTHER),
    ("uh", OTHER),
    ("hmm", OTHER),
    ("lol", OTHER),
    ("ha", OTHER),
];

/// Tags one token: closed-class lookup, then suffix rules, then `NOUN`.
pub fn tag_word(word: &str) -> &'static str {
    if let Some(&(_, tag)) = CLOSED_CLASS.iter().find(|(w, _)| *w == word) {
        return tag;
    }
    if !word.is_empty() && word.chars().all(|c| c.is_ascii_punctuation()) {
        return PUNCT;
    }
    if word.chars().any(|c| c.is_ascii_digit())
        && word
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == ',')
    {
        return NUM;
    }
    if word.len() > 3 && word.ends_with("ly") {
        return ADV;
    }
    if word.len() > 4 && (word.ends_with("ing") || word.ends_with("ed")) {
        return VERB;
    }
    NOUN
}

pub fn pos_tag_fallback(words: &[String]) -> Vec<String> {
    words.iter().map(|w| String::from(tag_word(w))).collect()
}
