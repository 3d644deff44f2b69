mod common;

use normseq::checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, FORMAT_VERSION, MAGIC,
};
use normseq_core::corpus::{split_corpus, CorpusSplit, Dialog};
use normseq_core::features::{build_feature_space, FeatureSpace, Lexicon, ValueMode};
use normseq_core::models::{
    predict_dialog, train_model, GlobalConfig, LocalConfig, ModelConfig, ModelKind, TrainConfig,
};
use normseq_core::synth::{generate, SplitSizes, SynthConfig};
use normseq_core::Error;

struct Setup {
    split: CorpusSplit,
    probe: Vec<Dialog>,
    space: FeatureSpace,
    lexicon: Lexicon,
}

fn setup() -> Setup {
    let synth = generate(&SynthConfig {
        sessions: 6,
        clauses_per_session: 30,
        splits: SplitSizes {
            train: 4,
            cv: 1,
            test: 1,
        },
        seed: 11,
        ..SynthConfig::default()
    })
    .unwrap();
    let lexicon = Lexicon::new(synth.rule.lexicon()).unwrap();
    let probe = generate(&SynthConfig {
        sessions: 2,
        clauses_per_session: 25,
        splits: SplitSizes {
            train: 2,
            cv: 0,
            test: 0,
        },
        seed: 99,
        ..SynthConfig::default()
    })
    .unwrap()
    .dialogs;
    let split = split_corpus(synth.dialogs, &synth.assignment).unwrap();
    let space = build_feature_space(&split.train, &lexicon, 3, ValueMode::Count).unwrap();
    Setup {
        split,
        probe,
        space,
        lexicon,
    }
}

fn small_model_config() -> ModelConfig {
    ModelConfig {
        global: GlobalConfig {
            embed: 6,
            hidden: 7,
            mlp_hidden: 5,
            layers: 1,
            dropout: 0.5,
        },
        local: LocalConfig {
            embed: 5,
            hidden: 6,
        },
    }
}

fn trained(kind: ModelKind, s: &Setup) -> Checkpoint {
    let train_config = TrainConfig {
        epochs: 2,
        seed: 5,
        ..TrainConfig::default()
    };
    let (classifier, history) = train_model(
        kind,
        &small_model_config(),
        &s.split,
        &s.space,
        &s.lexicon,
        &train_config,
    )
    .unwrap();
    Checkpoint {
        classifier,
        space: s.space.clone(),
        lexicon: s.lexicon.clone(),
        model_config: small_model_config(),
        train_config,
        history,
    }
}

fn probabilities(c: &Checkpoint, dialogs: &[Dialog]) -> Vec<u64> {
    dialogs
        .iter()
        .flat_map(|d| predict_dialog(&c.classifier, d, &c.space, &c.lexicon).unwrap())
        .map(|p| p.probability.to_bits())
        .collect()
}

#[test]
fn every_kind_round_trips_with_identical_predictions() {
    let s = setup();
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let ckpt = trained(kind, &s);
        let path = dir.path().join(format!("{kind}.ckpt"));
        save_checkpoint(&ckpt, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.classifier.model.kind(), kind);
        assert_eq!(back.classifier, ckpt.classifier);
        assert_eq!(back.history, ckpt.history);
        assert_eq!(back.space, ckpt.space);
        assert_eq!(back.lexicon, ckpt.lexicon);
        assert_eq!(
            probabilities(&back, &s.probe),
            probabilities(&ckpt, &s.probe)
        );
        assert_eq!(back.to_bytes(), ckpt.to_bytes());
    }
}

#[test]
fn truncated_file_fails_checksum() {
    let s = setup();
    let bytes = trained(ModelKind::LogReg, &s).to_bytes();
    for cut in [0, 3, 12, bytes.len() / 2, bytes.len() - 1] {
        assert!(
            matches!(
                Checkpoint::from_bytes(&bytes[..cut]),
                Err(CheckpointError::Checksum)
            ),
            "cut {cut}"
        );
    }
}

#[test]
fn flipped_byte_fails_checksum() {
    let s = setup();
    let mut bytes = trained(ModelKind::Global1, &s).to_bytes();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x10;
    assert!(matches!(
        Checkpoint::from_bytes(&bytes),
        Err(CheckpointError::Checksum)
    ));
}

fn reseal(mut body: Vec<u8>) -> Vec<u8> {
    body.truncate(body.len() - 4);
    let crc = crc32fast::hash(&body);
    body.extend_from_slice(&crc.to_le_bytes());
    body
}

#[test]
fn magic_and_version_are_checked() {
    let s = setup();
    let bytes = trained(ModelKind::LogReg, &s).to_bytes();
    assert_eq!(&bytes[..8], MAGIC);
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        Checkpoint::from_bytes(&reseal(bad_magic)),
        Err(CheckpointError::BadMagic)
    ));
    let mut bad_version = bytes;
    bad_version[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    assert!(matches!(
        Checkpoint::from_bytes(&reseal(bad_version)),
        Err(CheckpointError::Version { found }) if found == FORMAT_VERSION + 1
    ));
}

#[test]
fn mismatched_feature_space_is_rejected_at_prediction() {
    let s = setup();
    let ckpt = trained(ModelKind::Global1, &s);
    let other = build_feature_space(&s.split.train, &s.lexicon, 4, ValueMode::Count).unwrap();
    assert_ne!(other.fingerprint(), s.space.fingerprint());
    let err = predict_dialog(&ckpt.classifier, &s.probe[0], &other, &ckpt.lexicon).unwrap_err();
    assert_eq!(err, Error::SpaceMismatch);
}
