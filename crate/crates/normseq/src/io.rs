//! On-disk formats: JSONL corpora, split assignments, lexicons, feature
//! spaces and prediction streams.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use normseq_core::corpus::{Clause, Dialog, NonverbalMeta, Relationship, Split, ViolationCategory};
use normseq_core::features::{FeatureKey, FeatureSpace, Lexicon, Template, ValueMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("cannot read `{path}`: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write `{path}`: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("`{path}` is not valid JSON: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {}", diagnostics_summary(.diagnostics))]
    InvalidCorpus {
        path: PathBuf,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("`{path}`: {source}")]
    Invalid {
        path: PathBuf,
        source: normseq_core::Error,
    },
    #[error("`{path}`: unknown split `{name}` for session `{session}`")]
    UnknownSplit {
        path: PathBuf,
        session: String,
        name: String,
    },
}

fn diagnostics_summary(d: &[Diagnostic]) -> String {
    d.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// A problem with one corpus record. Line 0 denotes a file-level problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// One line of a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClauseRecord {
    pub session: String,
    pub index: u64,
    pub words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Vec<String>>,
    pub relationship: Relationship,
    pub head_nod: bool,
    pub smile: bool,
    pub gaze_partner: bool,
    pub label: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

impl ClauseRecord {
    fn from_clause(session: &str, index: usize, c: &Clause) -> Self {
        ClauseRecord {
            session: session.to_owned(),
            index: index as u64,
            words: c.words.clone(),
            pos: c.pos_tags.clone(),
            relationship: c.meta.relationship,
            head_nod: c.meta.head_nod,
            smile: c.meta.smile,
            gaze_partner: c.meta.gaze_partner,
            label: c.label as u8,
            category: c.category.map(|k| k.as_str().to_owned()),
        }
    }

    fn into_clause(self) -> Result<Clause, String> {
        let label = match self.label {
            0 => false,
            1 => true,
            other => return Err(format!("label must be 0 or 1, got {other}")),
        };
        let category = match self.category {
            None => None,
            Some(name) => Some(
                ViolationCategory::parse(&name)
                    .ok_or_else(|| format!("unknown category `{name}`"))?,
            ),
        };
        let meta = NonverbalMeta {
            relationship: self.relationship,
            head_nod: self.head_nod,
            smile: self.smile,
            gaze_partner: self.gaze_partner,
        };
        Clause::new(self.words, self.pos, meta, label, category).map_err(|e| e.to_string())
    }
}

/// Parses corpus text, collecting every record-level problem. Dialogs are
/// returned in order of their first record.
pub fn parse_corpus(text: &str) -> Result<Vec<Dialog>, Vec<Diagnostic>> {
    let mut diagnostics = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut sessions: BTreeMap<String, (Option<u64>, Vec<Clause>)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: ClauseRecord = match serde_json::from_str(raw) {
            Ok(r) => r,
            Err(e) => {
                diagnostics.push(Diagnostic {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let session = record.session.clone();
        let index = record.index;
        let entry = sessions.entry(session.clone()).or_insert_with(|| {
            order.push(session.clone());
            (None, Vec::new())
        });
        if let Some(prev) = entry.0 {
            if index <= prev {
                diagnostics.push(Diagnostic {
                    line,
                    message: format!(
                        "session `{session}`: index {index} does not follow previous index {prev}"
                    ),
                });
                continue;
            }
        }
        match record.into_clause() {
            Ok(c) => {
                entry.0 = Some(index);
                entry.1.push(c);
            }
            Err(message) => diagnostics.push(Diagnostic {
                line,
                message: format!("session `{session}` index {index}: {message}"),
            }),
        }
    }
    if diagnostics.is_empty() && order.is_empty() {
        diagnostics.push(Diagnostic {
            line: 0,
            message: "no dialogs".into(),
        });
    }
    if !diagnostics.is_empty() {
        return Err(diagnostics);
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let (_, clauses) = sessions
                .remove(&id)
                .expect("every ordered session was inserted");
            Dialog {
                session_id: id,
                clauses,
            }
        })
        .collect())
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> Result<(), IoError> {
    let wrap = |source| IoError::Write {
        path: path.to_owned(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(wrap)?);
    f(&mut w).map_err(wrap)?;
    w.flush().map_err(wrap)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    serde_json::from_str(&read(path)?).map_err(|source| IoError::Json {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

pub fn load_corpus(path: &Path) -> Result<Vec<Dialog>, IoError> {
    parse_corpus(&read(path)?).map_err(|diagnostics| IoError::InvalidCorpus {
        path: path.to_owned(),
        diagnostics,
    })
}

/// Serializes dialogs as JSONL; indices are rewritten as 0-based positions.
pub fn write_corpus<W: Write>(dialogs: &[Dialog], w: &mut W) -> std::io::Result<()> {
    for d in dialogs {
        for (i, c) in d.clauses.iter().enumerate() {
            serde_json::to_writer(&mut *w, &ClauseRecord::from_clause(&d.session_id, i, c))?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn save_corpus(dialogs: &[Dialog], path: &Path) -> Result<(), IoError> {
    write_with(path, |w| write_corpus(dialogs, w))
}

pub fn load_splits(path: &Path) -> Result<BTreeMap<String, Split>, IoError> {
    let raw: BTreeMap<String, String> = read_json(path)?;
    raw.into_iter()
        .map(|(session, name)| match Split::parse(&name) {
            Some(s) => Ok((session, s)),
            None => Err(IoError::UnknownSplit {
                path: path.to_owned(),
                session,
                name,
            }),
        })
        .collect()
}

pub fn save_splits(assignment: &BTreeMap<String, Split>, path: &Path) -> Result<(), IoError> {
    write_json(path, assignment)
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, IoError> {
    let raw: BTreeMap<String, Vec<String>> = read_json(path)?;
    Lexicon::new(raw).map_err(|source| IoError::Invalid {
        path: path.to_owned(),
        source,
    })
}

pub fn save_lexicon(lexicon: &Lexicon, path: &Path) -> Result<(), IoError> {
    write_json(path, lexicon.categories())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureEntry {
    pub template: Template,
    pub payload: String,
    pub column: usize,
    pub count: u64,
}

/// Persisted form of a [`FeatureSpace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpaceFile {
    pub rare_threshold: u32,
    pub dim: usize,
    #[serde(default)]
    pub mode: ValueMode,
    pub entries: Vec<FeatureEntry>,
}

impl FeatureSpaceFile {
    pub fn from_space(space: &FeatureSpace) -> Self {
        FeatureSpaceFile {
            rare_threshold: space.rare_threshold(),
            dim: space.dim(),
            mode: space.mode(),
            entries: space
                .entries()
                .enumerate()
                .map(|(column, (k, count))| FeatureEntry {
                    template: k.template,
                    payload: k.payload.clone(),
                    column,
                    count,
                })
                .collect(),
        }
    }

    pub fn into_space(self) -> Result<FeatureSpace, normseq_core::Error> {
        if self.dim != self.entries.len() {
            return Err(normseq_core::Error::LengthMismatch {
                left: self.dim,
                right: self.entries.len(),
            });
        }
        if let Some(e) = self
            .entries
            .iter()
            .enumerate()
            .find(|(i, e)| e.column != *i)
        {
            return Err(normseq_core::Error::InvalidConfig(format!(
                "feature entry {} declares column {}",
                e.0, e.1.column
            )));
        }
        let entries = self
            .entries
            .into_iter()
            .map(|e| (FeatureKey::new(e.template, e.payload), e.count))
            .collect();
        FeatureSpace::from_entries(self.rare_threshold, self.mode, entries)
    }
}

pub fn feature_space_to_json(space: &FeatureSpace) -> String {
    serde_json::to_string_pretty(&FeatureSpaceFile::from_space(space))
        .expect("feature space serializes")
}

pub fn feature_space_from_json(text: &str) -> Result<FeatureSpace, String> {
    let file: FeatureSpaceFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
    file.into_space().map_err(|e| e.to_string())
}

pub fn load_feature_space(path: &Path) -> Result<FeatureSpace, IoError> {
    let file: FeatureSpaceFile = read_json(path)?;
    file.into_space().map_err(|source| IoError::Invalid {
        path: path.to_owned(),
        source,
    })
}

pub fn save_feature_space(space: &FeatureSpace, path: &Path) -> Result<(), IoError> {
    write_json(path, &FeatureSpaceFile::from_space(space))
}

/// One line of prediction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub session: String,
    pub index: u64,
    pub p_violation: f64,
    pub label: u8,
}
