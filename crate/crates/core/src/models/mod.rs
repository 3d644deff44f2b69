//! The three classifier architectures, their training loops, and a common
//! prediction interface over whole dialogs.

mod check;
mod config;
mod global;
mod local;
mod logreg;
mod tbptt;

use alloc::vec::Vec;

pub use check::{
    describe as describe_gradcheck, tiny_global_config, tiny_gradcheck, tiny_local_config,
    CORRUPTION_FACTOR, GRADCHECK_STEP, GRADCHECK_TOLERANCE,
};
pub use config::{
    EpochRecord, GlobalConfig, LocalConfig, ModelConfig, ModelKind, TrainConfig, DEFAULT_THRESHOLD,
};
pub use global::{ChunkTrace, GlobalContextModel, GlobalParams, RecurrentState, StateGrad};
pub use local::{
    local_loss, local_loss_and_grad, local_train, LocalContextModel, LocalParams, Vocab,
    WordExample,
};
pub use logreg::{
    logreg_train, regularized_loss, regularized_loss_and_grad, Example, LogRegModel, LogRegParams,
};
pub use tbptt::{
    chunk_ranges, full_bptt_gradients, sequence_loss, tbptt_gradients, tbptt_train, SequenceExample,
};

use crate::corpus::{Clause, CorpusSplit, Dialog};
use crate::error::{Error, Result};
use crate::eval::Prf;
use crate::features::{vectorize, FeatureSpace, Fingerprint, Lexicon};

/// Keeps the parameters of the epoch with the best CV F1 (earliest on ties;
/// the latest epoch when no CV data exists) and applies optional patience.
pub(crate) struct BestTracker<P> {
    best: Option<P>,
    best_f1: Option<f64>,
    since_best: usize,
    patience: Option<usize>,
    history: Vec<EpochRecord>,
}

impl<P: Clone> BestTracker<P> {
    pub(crate) fn new(patience: Option<usize>) -> Self {
        BestTracker {
            best: None,
            best_f1: None,
            since_best: 0,
            patience,
            history: Vec::new(),
        }
    }

    /// Records an epoch; returns `false` once patience is exhausted.
    pub(crate) fn observe(
        &mut self,
        epoch: usize,
        train_loss: f64,
        cv: Option<Prf>,
        params: &P,
    ) -> bool {
        let improved = match (cv, self.best_f1) {
            (None, _) => true,
            (Some(s), None) => {
                self.best_f1 = Some(s.f1);
                true
            }
            (Some(s), Some(b)) if s.f1 > b => {
                self.best_f1 = Some(s.f1);
                true
            }
            _ => false,
        };
        if improved || self.best.is_none() {
            self.best = Some(params.clone());
            self.since_best = 0;
            for r in &mut self.history {
                r.best = false;
            }
        } else {
            self.since_best += 1;
        }
        self.history.push(EpochRecord {
            epoch,
            train_loss,
            cv,
            best: improved,
        });
        match self.patience {
            Some(p) => self.since_best < p,
            None => true,
        }
    }

    pub(crate) fn finish(self) -> (Option<P>, Vec<EpochRecord>) {
        (self.best, self.history)
    }
}

/// Any of the trained architectures.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    LogReg(LogRegModel),
    Local(LocalContextModel),
    Global(GlobalContextModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::LogReg(_) => ModelKind::LogReg,
            Model::Local(_) => ModelKind::Local,
            Model::Global(g) if g.config.layers == 2 => ModelKind::Global2,
            Model::Global(_) => ModelKind::Global1,
        }
    }
}

/// A model bound to the fingerprint of the feature space it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub model: Model,
    pub space_fingerprint: Fingerprint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub label: bool,
}

impl Prediction {
    fn from_probability(probability: f64, threshold: f64) -> Self {
        Prediction {
            probability,
            label: probability >= threshold,
        }
    }
}

/// Left-to-right prediction over a dialog. Recurrent state is threaded over
/// the entire dialog; nothing after clause `t` influences its output.
pub fn predict_dialog(
    classifier: &Classifier,
    dialog: &Dialog,
    space: &FeatureSpace,
    lexicon: &Lexicon,
) -> Result<Vec<Prediction>> {
    if space.fingerprint() != classifier.space_fingerprint {
        return Err(Error::SpaceMismatch);
    }
    match &classifier.model {
        Model::LogReg(m) => dialog
            .clauses
            .iter()
            .map(|c| {
                let p = m.predict_proba(&vectorize(c, space, lexicon))?;
                Ok(Prediction::from_probability(p, m.threshold))
            })
            .collect(),
        Model::Local(m) => dialog
            .clauses
            .iter()
            .map(|c| {
                Ok(Prediction::from_probability(
                    m.forward(c)?[1],
                    DEFAULT_THRESHOLD,
                ))
            })
            .collect(),
        Model::Global(m) => {
            let seq: Vec<_> = dialog
                .clauses
                .iter()
                .map(|c| vectorize(c, space, lexicon))
                .collect();
            Ok(m.predict_sequence(&seq)?
                .into_iter()
                .map(|p| Prediction::from_probability(p[1], DEFAULT_THRESHOLD))
                .collect())
        }
    }
}

pub fn examples(dialogs: &[Dialog], space: &FeatureSpace, lexicon: &Lexicon) -> Vec<Example> {
    dialogs
        .iter()
        .flat_map(|d| &d.clauses)
        .map(|c| Example {
            features: vectorize(c, space, lexicon),
            label: c.label,
        })
        .collect()
}

pub fn sequences(
    dialogs: &[Dialog],
    space: &FeatureSpace,
    lexicon: &Lexicon,
) -> Vec<SequenceExample> {
    dialogs
        .iter()
        .map(|d| SequenceExample {
            features: d
                .clauses
                .iter()
                .map(|c| vectorize(c, space, lexicon))
                .collect(),
            labels: d.labels().collect(),
        })
        .collect()
}

/// Trains `kind` on the train split with CV-based model selection.
pub fn train_model(
    kind: ModelKind,
    model_config: &ModelConfig,
    split: &CorpusSplit,
    space: &FeatureSpace,
    lexicon: &Lexicon,
    config: &TrainConfig,
) -> Result<(Classifier, Vec<EpochRecord>)> {
    config.validate()?;
    if split.train.iter().all(Dialog::is_empty) {
        return Err(Error::EmptyTrainingSet);
    }
    let (model, history) = match kind {
        ModelKind::LogReg => {
            let train = examples(&split.train, space, lexicon);
            let cv = examples(&split.cv, space, lexicon);
            let (m, h) = logreg_train(&train, &cv, space.dim(), config)?;
            (Model::LogReg(m), h)
        }
        ModelKind::Local => {
            let train: Vec<&Clause> = split.train.iter().flat_map(|d| &d.clauses).collect();
            let cv: Vec<&Clause> = split.cv.iter().flat_map(|d| &d.clauses).collect();
            let (m, h) = local_train(&train, &cv, model_config.local, config)?;
            (Model::Local(m), h)
        }
        ModelKind::Global1 | ModelKind::Global2 => {
            let gc = GlobalConfig {
                layers: if kind == ModelKind::Global2 { 2 } else { 1 },
                ..model_config.global
            };
            let train = sequences(&split.train, space, lexicon);
            let cv = sequences(&split.cv, space, lexicon);
            let (m, h) = tbptt_train(&train, &cv, space.dim(), gc, config)?;
            (Model::Global(m), h)
        }
    };
    Ok((
        Classifier {
            model,
            space_fingerprint: space.fingerprint(),
        },
        history,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures;
    use crate::features::{build_feature_space, ValueMode};
    use crate::rng::Rng;
    use alloc::format;
    use alloc::vec;

    fn corpus(seed: u64) -> Vec<Dialog> {
        let words = ["you", "suck", "ok", "the", "math", "is", "hard", "lol"];
        let mut rng = Rng::new(seed);
        (0..3)
            .map(|d| Dialog {
                session_id: format!("s{d}"),
                clauses: (0..12)
                    .map(|_| {
                        let ws: Vec<&str> =
                            (0..1 + rng.below(4)).map(|_| words[rng.below(8)]).collect();
                        fixtures::clause(&ws, rng.bernoulli(0.3))
                    })
                    .collect(),
            })
            .collect()
    }

    fn small_models(space: &FeatureSpace) -> Vec<Classifier> {
        let fp = space.fingerprint();
        let tiny = GlobalConfig {
            embed: 4,
            hidden: 5,
            mlp_hidden: 3,
            layers: 2,
            dropout: 0.5,
        };
        let mut lr = LogRegModel::zeros(space.dim(), 0.0);
        Rng::new(2).fill_uniform(&mut lr.params.w, 1.0);
        let vocab = Vocab::build(corpus(1).iter().flat_map(|d| &d.clauses));
        vec![
            Classifier {
                model: Model::LogReg(lr),
                space_fingerprint: fp,
            },
            Classifier {
                model: Model::Local(
                    LocalContextModel::new(
                        vocab,
                        LocalConfig {
                            embed: 3,
                            hidden: 3,
                        },
                        4,
                    )
                    .unwrap(),
                ),
                space_fingerprint: fp,
            },
            Classifier {
                model: Model::Global(GlobalContextModel::new(space.dim(), tiny, 9).unwrap()),
                space_fingerprint: fp,
            },
        ]
    }

    #[test]
    fn logreg_is_permutation_invariant() {
        let d = corpus(1);
        let space = build_feature_space(&d, &Lexicon::default(), 1, ValueMode::Count).unwrap();
        let clf = &small_models(&space)[0];
        let dialog = d[0].clone();
        let mut rev = dialog.clone();
        rev.clauses.reverse();
        let a = predict_dialog(clf, &dialog, &space, &Lexicon::default()).unwrap();
        let mut b = predict_dialog(clf, &rev, &space, &Lexicon::default()).unwrap();
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn recurrent_models_are_causal() {
        let d = corpus(1);
        let space = build_feature_space(&d, &Lexicon::default(), 1, ValueMode::Count).unwrap();
        for clf in &small_models(&space) {
            let base = d[0].clone();
            let mut perturbed = base.clone();
            for t in 5..perturbed.len() {
                perturbed.clauses[t] = fixtures::clause(&["math", "lol", "suck"], true);
            }
            let a = predict_dialog(clf, &base, &space, &Lexicon::default()).unwrap();
            let b = predict_dialog(clf, &perturbed, &space, &Lexicon::default()).unwrap();
            assert_eq!(a[..5], b[..5]);
            assert_ne!(a[5..], b[5..]);
        }
    }

    #[test]
    fn mismatched_space_is_rejected() {
        let d = corpus(1);
        let space = build_feature_space(&d, &Lexicon::default(), 1, ValueMode::Count).unwrap();
        let other = build_feature_space(&d, &Lexicon::default(), 2, ValueMode::Count).unwrap();
        let clf = &small_models(&space)[0];
        assert_eq!(
            predict_dialog(clf, &d[0], &other, &Lexicon::default()).unwrap_err(),
            Error::SpaceMismatch
        );
    }

    #[test]
    fn probabilities_are_valid() {
        let d = corpus(3);
        let space = build_feature_space(&d, &Lexicon::default(), 1, ValueMode::Count).unwrap();
        for clf in &small_models(&space) {
            for p in predict_dialog(clf, &d[1], &space, &Lexicon::default()).unwrap() {
                assert!((0.0..=1.0).contains(&p.probability));
                assert_eq!(p.label, p.probability >= 0.5);
            }
        }
    }

    #[test]
    fn tracker_keeps_earliest_best() {
        let mut t = BestTracker::new(Some(2));
        let s = |f1| {
            Some(Prf {
                precision: 0.0,
                recall: 0.0,
                f1,
            })
        };
        assert!(t.observe(1, 1.0, s(0.5), &1));
        assert!(t.observe(2, 1.0, s(0.7), &2));
        assert!(t.observe(3, 1.0, s(0.7), &3));
        assert!(!t.observe(4, 1.0, s(0.6), &4));
        let (best, hist) = t.finish();
        assert_eq!(best, Some(2));
        assert_eq!(hist.len(), 4);
        assert_eq!(hist.iter().filter(|r| r.best).count(), 1);
        assert!(hist[1].best);
    }

    #[test]
    fn model_kind_reports_layers() {
        let d = corpus(1);
        let space = build_feature_space(&d, &Lexicon::default(), 1, ValueMode::Count).unwrap();
        let kinds: Vec<_> = small_models(&space)
            .iter()
            .map(|c| c.model.kind())
            .collect();
        assert_eq!(
            kinds,
            [ModelKind::LogReg, ModelKind::Local, ModelKind::Global2]
        );
    }
}
