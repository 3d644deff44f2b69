//! Dialog data model, clause validation, session-level splits and corpus statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relationship {
    Friend,
    Stranger,
}

impl Relationship {
    pub fn as_str(self) -> &'static str {
        match self {
            Relationship::Friend => "friend",
            Relationship::Stranger => "stranger",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "friend" => Some(Relationship::Friend),
            "stranger" => Some(Relationship::Stranger),
            _ => None,
        }
    }
}

/// Annotated speaker behavior and dyad relationship for one clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NonverbalMeta {
    pub relationship: Relationship,
    pub head_nod: bool,
    pub smile: bool,
    pub gaze_partner: bool,
}

/// Second-pass annotation of a violation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationCategory {
    RuleBreaking,
    FaceThreat,
    Reference,
}

impl ViolationCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCategory::RuleBreaking => "rule_breaking",
            ViolationCategory::FaceThreat => "face_threat",
            ViolationCategory::Reference => "reference",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rule_breaking" => Some(ViolationCategory::RuleBreaking),
            "face_threat" => Some(ViolationCategory::FaceThreat),
            "reference" => Some(ViolationCategory::Reference),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub words: Vec<String>,
    pub pos_tags: Option<Vec<String>>,
    pub meta: NonverbalMeta,
    pub label: bool,
    pub category: Option<ViolationCategory>,
}

impl Clause {
    /// Builds a clause, lowercasing tokens and checking its invariants.
    pub fn new(
        words: Vec<String>,
        pos_tags: Option<Vec<String>>,
        meta: NonverbalMeta,
        label: bool,
        category: Option<ViolationCategory>,
    ) -> Result<Self> {
        let clause = Clause {
            words: words.into_iter().map(|w| w.to_lowercase()).collect(),
            pos_tags,
            meta,
            label,
            category,
        };
        clause.validate()?;
        Ok(clause)
    }

    pub fn validate(&self) -> Result<()> {
        if self.words.is_empty() {
            return Err(Error::InvalidClause("words must be non-empty".into()));
        }
        if self.words.iter().any(|w| w.is_empty()) {
            return Err(Error::InvalidClause("empty token".into()));
        }
        if let Some(tags) = &self.pos_tags {
            if tags.len() != self.words.len() {
                return Err(Error::InvalidClause(format!(
                    "pos has {} tags for {} words",
                    tags.len(),
                    self.words.len()
                )));
            }
        }
        if self.category.is_some() && !self.label {
            return Err(Error::InvalidClause(
                "category is only allowed on label=1 clauses".into(),
            ));
        }
        Ok(())
    }

    pub fn label_index(&self) -> usize {
        self.label as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialog {
    pub session_id: String,
    pub clauses: Vec<Clause>,
}

impl Dialog {
    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = bool> + '_ {
        self.clauses.iter().map(|c| c.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Cv,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Cv => "cv",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Split::Train),
            "cv" => Some(Split::Cv),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Dialog>,
    pub cv: Vec<Dialog>,
    pub test: Vec<Dialog>,
}

impl CorpusSplit {
    pub fn get(&self, split: Split) -> &[Dialog] {
        match split {
            Split::Train => &self.train,
            Split::Cv => &self.cv,
            Split::Test => &self.test,
        }
    }
}

/// Checks that session ids are unique across `dialogs`.
pub fn check_unique_sessions(dialogs: &[Dialog]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for d in dialogs {
        if !seen.insert(d.session_id.as_str()) {
            return Err(Error::DuplicateSession(d.session_id.clone()));
        }
    }
    Ok(())
}

/// Places whole sessions into train/cv/test according to `assignment`.
/// Dialog order within each split follows input order.
pub fn split_corpus(
    dialogs: Vec<Dialog>,
    assignment: &BTreeMap<String, Split>,
) -> Result<CorpusSplit> {
    check_unique_sessions(&dialogs)?;
    if let Some(d) = dialogs
        .iter()
        .find(|d| !assignment.contains_key(&d.session_id))
    {
        return Err(Error::UnassignedSession(d.session_id.clone()));
    }
    let mut out = CorpusSplit::default();
    for d in dialogs {
        match assignment[&d.session_id] {
            Split::Train => out.train.push(d),
            Split::Cv => out.cv.push(d),
            Split::Test => out.test.push(d),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub sessions: usize,
    pub clauses: usize,
    pub positives: usize,
}

impl SplitStats {
    pub fn of(dialogs: &[Dialog]) -> Self {
        let clauses = dialogs.iter().map(Dialog::len).sum();
        let positives = dialogs
            .iter()
            .flat_map(|d| d.labels())
            .filter(|&l| l)
            .count();
        SplitStats {
            sessions: dialogs.len(),
            clauses,
            positives,
        }
    }

    pub fn positive_rate(&self) -> Option<f64> {
        (self.clauses > 0).then(|| self.positives as f64 / self.clauses as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub train: SplitStats,
    pub cv: SplitStats,
    pub test: SplitStats,
    pub total_clauses: usize,
    /// Mean clauses per training dialog, rounded to one decimal; absent when
    /// there are no training sessions.
    pub mean_train_clauses: Option<f64>,
    pub positive_rate: Option<f64>,
}

/// Mean dialog length rounded to one decimal place.
pub fn mean_clauses(clauses: usize, sessions: usize) -> Option<f64> {
    if sessions == 0 {
        return None;
    }
    let mean = clauses as f64 / sessions as f64;
    Some(libm::round(mean * 10.0) / 10.0)
}

pub fn corpus_stats(split: &CorpusSplit) -> CorpusStats {
    let train = SplitStats::of(&split.train);
    let cv = SplitStats::of(&split.cv);
    let test = SplitStats::of(&split.test);
    let total_clauses = train.clauses + cv.clauses + test.clauses;
    let positives = train.positives + cv.positives + test.positives;
    CorpusStats {
        train,
        cv,
        test,
        total_clauses,
        mean_train_clauses: mean_clauses(train.clauses, train.sessions),
        positive_rate: (total_clauses > 0).then(|| positives as f64 / total_clauses as f64),
    }
}

/// Groups records into dialogs by session id, in order of first appearance.
pub fn group_sessions(records: Vec<(String, Clause)>) -> Vec<Dialog> {
    let mut order: Vec<Dialog> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (session, clause) in records {
        match index.get(&session) {
            Some(&i) => order[i].clauses.push(clause),
            None => {
                index.insert(session.clone(), order.len());
                order.push(Dialog {
                    session_id: session,
                    clauses: alloc::vec![clause],
                });
            }
        }
    }
    order
}

impl core::fmt::Display for Split {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::parse(s).ok_or_else(|| Error::InvalidConfig(format!("unknown split `{s}`")))
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn category_without_positive_label_is_rejected() {
        let err = Clause::new(
            vec!["you".into()],
            None,
            meta(),
            false,
            Some(ViolationCategory::FaceThreat),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidClause(_)));
    }

    #[test]
    fn pos_length_mismatch_is_rejected() {
        let err = Clause::new(
            vec!["you".into(), "suck".into()],
            Some(vec!["PRON".into()]),
            meta(),
            true,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidClause(_)));
    }

    #[test]
    fn tokens_are_lowercased() {
        let c = Clause::new(vec!["HeLLo".into()], None, meta(), false, None).unwrap();
        assert_eq!(c.words, vec!["hello".to_string()]);
    }

    #[test]
    fn empty_words_rejected() {
        assert!(Clause::new(vec![], None, meta(), false, None).is_err());
    }

    fn assignment(n: usize, f: impl Fn(usize) -> Split) -> BTreeMap<String, Split> {
        (0..n).map(|i| (format!("s{i}"), f(i))).collect()
    }

    #[test]
    fn split_48_6_6() {
        let dialogs: Vec<_> = (0..60).map(|i| dialog(&format!("s{i}"), 2)).collect();
        let a = assignment(60, |i| match i {
            0..=47 => Split::Train,
            48..=53 => Split::Cv,
            _ => Split::Test,
        });
        let s = split_corpus(dialogs, &a).unwrap();
        assert_eq!((s.train.len(), s.cv.len(), s.test.len()), (48, 6, 6));
    }

    #[test]
    fn all_train_leaves_cv_and_test_empty() {
        let dialogs: Vec<_> = (0..4).map(|i| dialog(&format!("s{i}"), 2)).collect();
        let s = split_corpus(dialogs, &assignment(4, |_| Split::Train)).unwrap();
        assert_eq!(s.train.len(), 4);
        assert!(s.cv.is_empty() && s.test.is_empty());
    }

    #[test]
    fn missing_assignment_names_session() {
        let dialogs: Vec<_> = (0..3).map(|i| dialog(&format!("s{i}"), 2)).collect();
        let mut a = assignment(3, |_| Split::Train);
        a.remove("s1");
        assert_eq!(
            split_corpus(dialogs, &a).unwrap_err(),
            Error::UnassignedSession("s1".into())
        );
    }

    #[test]
    fn duplicate_session_rejected() {
        let dialogs = vec![dialog("a", 1), dialog("a", 2)];
        let a = assignment(0, |_| Split::Train);
        assert_eq!(
            split_corpus(dialogs, &a).unwrap_err(),
            Error::DuplicateSession("a".into())
        );
    }

    #[test]
    fn split_preserves_every_clause() {
        let dialogs: Vec<_> = (0..9).map(|i| dialog(&format!("s{i}"), i + 1)).collect();
        let before: usize = dialogs.iter().map(Dialog::len).sum();
        let s = split_corpus(
            dialogs,
            &assignment(9, |i| [Split::Train, Split::Cv, Split::Test][i % 3]),
        )
        .unwrap();
        assert_eq!(corpus_stats(&s).total_clauses, before);
    }

    #[test]
    fn mean_of_reference_training_split() {
        assert_eq!(mean_clauses(39_254, 48), Some(817.8));
    }

    #[test]
    fn mean_single_clause() {
        let s = CorpusSplit {
            train: vec![dialog("a", 1)],
            ..Default::default()
        };
        let st = corpus_stats(&s);
        assert_eq!(st.mean_train_clauses, Some(1.0));
        assert_eq!(st.train.clauses, 1);
    }

    #[test]
    fn mean_of_three_dialogs() {
        let s = CorpusSplit {
            train: vec![dialog("a", 10), dialog("b", 20), dialog("c", 30)],
            ..Default::default()
        };
        assert_eq!(corpus_stats(&s).mean_train_clauses, Some(20.0));
    }

    #[test]
    fn empty_split_has_no_mean() {
        let st = corpus_stats(&CorpusSplit::default());
        assert_eq!(st.mean_train_clauses, None);
        assert_eq!(st.total_clauses, 0);
        assert_eq!(st.positive_rate, None);
    }

    #[test]
    fn grouping_keeps_first_appearance_order() {
        let recs = vec![
            ("b".to_string(), clause(&["x"], false)),
            ("a".to_string(), clause(&["y"], false)),
            ("b".to_string(), clause(&["z"], true)),
        ];
        let d = group_sessions(recs);
        assert_eq!(d[0].session_id, "b");
        assert_eq!(d[0].len(), 2);
        assert_eq!(d[1].session_id, "a");
    }
}
