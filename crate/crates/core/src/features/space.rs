use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{extract_feature_keys, FeatureKey, KeyCounts, Lexicon};
use crate::corpus::{Clause, Dialog, Relationship};
use crate::error::{Error, Result};

pub const DEFAULT_RARE_THRESHOLD: u32 = 20;

/// Length of the dense meta vector produced by [`encode_meta`].
pub const META_DIM: usize = 4;

pub type Fingerprint = [u8; 32];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueMode {
    #[default]
    Count,
    Binary,
}

/// Frozen key → column mapping. Columns follow key order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpace {
    keys: Vec<FeatureKey>,
    counts: Vec<u64>,
    index: BTreeMap<FeatureKey, u32>,
    rare_threshold: u32,
    mode: ValueMode,
}

impl FeatureSpace {
    /// Rebuilds a space from persisted `(key, count)` entries listed in column order.
    pub fn from_entries(
        rare_threshold: u32,
        mode: ValueMode,
        entries: Vec<(FeatureKey, u64)>,
    ) -> Result<Self> {
        let mut keys = Vec::with_capacity(entries.len());
        let mut counts = Vec::with_capacity(entries.len());
        let mut index = BTreeMap::new();
        for (col, (key, count)) in entries.into_iter().enumerate() {
            if count < rare_threshold as u64 {
                return Err(Error::InvalidConfig(format!(
                    "feature `{key}` has count {count} below threshold {rare_threshold}"
                )));
            }
            if let Some(prev) = keys.last() {
                if *prev >= key {
                    return Err(Error::InvalidConfig(format!(
                        "feature `{key}` out of order or duplicated"
                    )));
                }
            }
            index.insert(key.clone(), col as u32);
            keys.push(key);
            counts.push(count);
        }
        if keys.is_empty() {
            return Err(Error::EmptyFeatureSpace {
                threshold: rare_threshold,
            });
        }
        Ok(FeatureSpace {
            keys,
            counts,
            index,
            rare_threshold,
            mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.keys.len()
    }

    pub fn rare_threshold(&self) -> u32 {
        self.rare_threshold
    }

    pub fn mode(&self) -> ValueMode {
        self.mode
    }

    pub fn column(&self, key: &FeatureKey) -> Option<usize> {
        self.index.get(key).map(|&c| c as usize)
    }

    /// `(key, training count)` in column order.
    pub fn entries(&self) -> impl Iterator<Item = (&FeatureKey, u64)> {
        self.keys.iter().zip(self.counts.iter().copied())
    }

    /// SHA-256 over a canonical encoding of threshold, mode and entries.
    pub fn fingerprint(&self) -> Fingerprint {
        let mut h = Sha256::new();
        h.update(b"normseq-feature-space-v1\0");
        h.update(self.rare_threshold.to_le_bytes());
        h.update([self.mode as u8]);
        for (key, count) in self.entries() {
            h.update(key.template.as_str().as_bytes());
            h.update([0]);
            h.update(key.payload.as_bytes());
            h.update([0]);
            h.update(count.to_le_bytes());
        }
        h.finalize().into()
    }

    /// Number of retained keys per template, in template order.
    pub fn template_counts(&self) -> BTreeMap<super::Template, usize> {
        let mut out = BTreeMap::new();
        for k in &self.keys {
            *out.entry(k.template).or_insert(0) += 1;
        }
        out
    }
}

/// Counts keys across all training clauses and keeps those seen at least
/// `rare_threshold` times.
pub fn build_feature_space(
    train: &[Dialog],
    lexicon: &Lexicon,
    rare_threshold: u32,
    mode: ValueMode,
) -> Result<FeatureSpace> {
    if train.iter().all(|d| d.is_empty()) {
        return Err(Error::EmptyTrainingSet);
    }
    let mut totals: BTreeMap<FeatureKey, u64> = BTreeMap::new();
    for clause in train.iter().flat_map(|d| &d.clauses) {
        for (key, n) in extract_feature_keys(clause, lexicon) {
            *totals.entry(key).or_insert(0) += n as u64;
        }
    }
    let entries = totals
        .into_iter()
        .filter(|(_, n)| *n >= rare_threshold as u64)
        .collect();
    FeatureSpace::from_entries(rare_threshold, mode, entries)
}

/// Sparse vector with strictly increasing column ids and positive values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn new(dim: usize, mut entries: Vec<(u32, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidConfig(format!("duplicate column {}", w[0].0)));
            }
        }
        if let Some(&(c, _)) = entries.last() {
            if c as usize >= dim {
                return Err(Error::ShapeMismatch {
                    what: "sparse column",
                    expected: dim,
                    got: c as usize,
                });
            }
        }
        if entries
            .iter()
            .any(|e| e.1.is_nan() || e.1 <= 0.0 || e.1.is_infinite())
        {
            return Err(Error::NonFinite(
                "sparse values must be positive and finite".into(),
            ));
        }
        Ok(SparseVector { dim, entries })
    }

    pub fn empty(dim: usize) -> Self {
        SparseVector {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(c, v)| dense[c as usize] * v)
            .sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.dim];
        for &(c, v) in &self.entries {
            out[c as usize] = v;
        }
        out
    }
}

/// Maps a clause into the frozen space. Keys the space does not know are dropped.
pub fn vectorize(clause: &Clause, space: &FeatureSpace, lexicon: &Lexicon) -> SparseVector {
    vectorize_counts(&extract_feature_keys(clause, lexicon), space)
}

pub(crate) fn vectorize_counts(keys: &KeyCounts, space: &FeatureSpace) -> SparseVector {
    let mut entries: Vec<(u32, f64)> = keys
        .iter()
        .filter_map(|(k, &n)| {
            space.index.get(k).map(|&c| {
                let v = match space.mode {
                    ValueMode::Count => n as f64,
                    ValueMode::Binary => 1.0,
                };
                (c, v)
            })
        })
        .collect();
    entries.sort_unstable_by_key(|e| e.0);
    SparseVector {
        dim: space.dim(),
        entries,
    }
}

/// `[relationship == friend, head_nod, smile, gaze_partner]` as 0/1.
pub fn encode_meta(clause: &Clause) -> [f64; META_DIM] {
    let m = &clause.meta;
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    [
        b(m.relationship == Relationship::Friend),
        b(m.head_nod),
        b(m.smile),
        b(m.gaze_partner),
    ]
}
