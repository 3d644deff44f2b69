//! Binary checkpoint container.
//!
//! Layout (little-endian): magic, format version, then length-prefixed
//! UTF-8 sections (model kind, metadata JSON, feature-space JSON, lexicon
//! JSON, feature-space fingerprint hex), then parameter blocks (name, rank,
//! dims, row-major `f64` values), and finally a CRC-32 of every preceding
//! byte. The checksum is verified before anything is parsed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use normseq_core::features::{FeatureSpace, Lexicon};
use normseq_core::models::{
    Classifier, EpochRecord, GlobalContextModel, GlobalParams, LocalContextModel, LocalParams,
    LogRegModel, Model, ModelConfig, ModelKind, TrainConfig, Vocab,
};
use normseq_core::nn::Parameterized;
use serde::{Deserialize, Serialize};

use crate::io::{feature_space_from_json, feature_space_to_json};

pub const MAGIC: &[u8; 8] = b"NORMSEQ\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("checkpoint checksum mismatch (file truncated or corrupt)")]
    Checksum,
    #[error("malformed checkpoint: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] normseq_core::Error),
}

type Result<T> = std::result::Result<T, CheckpointError>;

/// Everything besides parameters needed to rebuild a classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub kind: ModelKind,
    pub dim: usize,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<Vec<String>>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub classifier: Classifier,
    pub space: FeatureSpace,
    pub lexicon: Lexicon,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub history: Vec<EpochRecord>,
}

impl Checkpoint {
    fn meta(&self) -> CheckpointMeta {
        let mut model_config = self.model_config;
        let (threshold, vocab) = match &self.classifier.model {
            Model::LogReg(m) => (m.threshold, None),
            Model::Local(m) => {
                model_config.local = m.config;
                (
                    normseq_core::models::DEFAULT_THRESHOLD,
                    Some(m.vocab.words().to_vec()),
                )
            }
            Model::Global(m) => {
                model_config.global = m.config;
                (normseq_core::models::DEFAULT_THRESHOLD, None)
            }
        };
        CheckpointMeta {
            kind: self.classifier.model.kind(),
            dim: self.space.dim(),
            model_config,
            train_config: self.train_config.clone(),
            threshold,
            vocab,
            history: self.history.clone(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = self.meta();
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.str(meta.kind.as_str());
        w.str(&serde_json::to_string(&meta).expect("metadata serializes"));
        w.str(&feature_space_to_json(&self.space));
        w.str(&serde_json::to_string(self.lexicon.categories()).expect("lexicon serializes"));
        w.str(&hex::encode(self.classifier.space_fingerprint));
        let blocks = match &self.classifier.model {
            Model::LogReg(m) => m.params.blocks(),
            Model::Local(m) => m.params.blocks(),
            Model::Global(m) => m.params.blocks(),
        };
        w.u32(blocks.len() as u32);
        for b in blocks {
            w.str(&b.name);
            w.u32(b.shape.len() as u32);
            for &d in &b.shape {
                w.u64(d as u64);
            }
            for &v in b.data {
                w.0.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&w.0);
        w.u32(crc);
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 8 {
            return Err(CheckpointError::Checksum);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(CheckpointError::Checksum);
        }
        let mut r = Reader { buf: body, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version { found: version });
        }
        let kind_tag = r.str()?;
        let meta: CheckpointMeta = serde_json::from_str(&r.str()?).map_err(fmt_err)?;
        if meta.kind.as_str() != kind_tag {
            return Err(CheckpointError::Format(format!(
                "kind tag `{kind_tag}` disagrees with metadata `{}`",
                meta.kind
            )));
        }
        let space = feature_space_from_json(&r.str()?).map_err(CheckpointError::Format)?;
        let categories: BTreeMap<String, Vec<String>> =
            serde_json::from_str(&r.str()?).map_err(fmt_err)?;
        let lexicon = Lexicon::new(categories)?;
        let fingerprint = hex::decode(r.str()?).map_err(fmt_err)?;
        if fingerprint != space.fingerprint() {
            return Err(normseq_core::Error::SpaceMismatch.into());
        }
        if meta.dim != space.dim() {
            return Err(CheckpointError::Format(format!(
                "metadata dim {} but embedded feature space has {}",
                meta.dim,
                space.dim()
            )));
        }
        let n = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.str()?;
            let rank = r.u32()? as usize;
            let shape = (0..rank)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
            let len =
                len.ok_or_else(|| CheckpointError::Format(format!("block `{name}` is too large")))?;
            let raw = r.take(
                len.checked_mul(8)
                    .ok_or_else(|| CheckpointError::Format("overflow".into()))?,
            )?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            blocks.push(RawBlock { name, shape, data });
        }
        if r.pos != body.len() {
            return Err(CheckpointError::Format(
                "trailing bytes after parameter blocks".into(),
            ));
        }

        let model = match meta.kind {
            ModelKind::LogReg => {
                let mut m = LogRegModel::zeros(meta.dim, meta.train_config.l2_lambda);
                m.threshold = meta.threshold;
                fill(&mut m.params, &blocks)?;
                Model::LogReg(m)
            }
            ModelKind::Local => {
                let words = meta.vocab.clone().ok_or_else(|| {
                    CheckpointError::Format("local model without vocabulary".into())
                })?;
                let vocab = Vocab::from_words(words)?;
                let config = meta.model_config.local;
                config.validate()?;
                let mut params = LocalParams::zeros(vocab.rows(), &config);
                fill(&mut params, &blocks)?;
                Model::Local(LocalContextModel {
                    config,
                    vocab,
                    params,
                })
            }
            ModelKind::Global1 | ModelKind::Global2 => {
                let config = meta.model_config.global;
                config.validate()?;
                let mut params = GlobalParams::zeros(meta.dim, &config);
                fill(&mut params, &blocks)?;
                Model::Global(GlobalContextModel { config, params })
            }
        };
        if model.kind() != meta.kind {
            return Err(CheckpointError::Format(format!(
                "configuration describes {} but kind is {}",
                model.kind(),
                meta.kind
            )));
        }
        Ok(Checkpoint {
            classifier: Classifier {
                model,
                space_fingerprint: space.fingerprint(),
            },
            space,
            lexicon,
            model_config: meta.model_config,
            train_config: meta.train_config,
            history: meta.history,
        })
    }
}

fn fmt_err(e: impl std::fmt::Display) -> CheckpointError {
    CheckpointError::Format(e.to_string())
}

struct RawBlock {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn fill<P: Parameterized>(params: &mut P, blocks: &[RawBlock]) -> Result<()> {
    let expected: Vec<(String, Vec<usize>)> = params
        .blocks()
        .into_iter()
        .map(|b| (b.name, b.shape))
        .collect();
    if expected.len() != blocks.len() {
        return Err(CheckpointError::Format(format!(
            "expected {} parameter blocks, found {}",
            expected.len(),
            blocks.len()
        )));
    }
    for ((name, shape), raw) in expected.iter().zip(blocks) {
        if *name != raw.name || *shape != raw.shape {
            return Err(CheckpointError::Format(format!(
                "block `{}` {:?} does not match expected `{name}` {shape:?}",
                raw.name, raw.shape
            )));
        }
    }
    for (dst, raw) in params.blocks_mut().into_iter().zip(blocks) {
        dst.copy_from_slice(&raw.data);
    }
    Ok(())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| CheckpointError::Format("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn str(&mut self) -> Result<String> {
        let n = usize::try_from(self.u64()?).map_err(fmt_err)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(fmt_err)
    }
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, checkpoint.to_bytes()).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Checkpoint::from_bytes(&bytes)
}
