//! Clause-level detection metrics and inter-annotator agreement.

mod alpha;
mod metrics;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use alpha::krippendorff_alpha_nominal;
pub use metrics::{f1_from, precision_recall_f1, Confusion, Prf};

use crate::corpus::{Dialog, Split};
use crate::error::Result;
use crate::features::{FeatureSpace, Lexicon};
use crate::models::{predict_dialog, Classifier, ModelKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session: String,
    pub clauses: usize,
    pub confusion: Confusion,
    pub f1: f64,
}

/// Aggregate metrics over one split, with a per-session breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: ModelKind,
    pub split: Split,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub base_rate: f64,
    pub sessions: Vec<SessionMetrics>,
    pub seed: Option<u64>,
}

/// Scores any per-dialog labeler against the gold labels of `dialogs`.
pub fn evaluate_with<F>(
    model: ModelKind,
    split: Split,
    dialogs: &[Dialog],
    seed: Option<u64>,
    mut predict: F,
) -> Result<MetricsReport>
where
    F: FnMut(&Dialog) -> Result<Vec<bool>>,
{
    let mut total = Confusion::default();
    let mut sessions = Vec::with_capacity(dialogs.len());
    for d in dialogs {
        let preds = predict(d)?;
        let golds: Vec<bool> = d.labels().collect();
        let c = Confusion::from_labels(&preds, &golds)?;
        total.merge(&c);
        sessions.push(SessionMetrics {
            session: d.session_id.clone(),
            clauses: d.len(),
            f1: c.scores().f1,
            confusion: c,
        });
    }
    let scores = total.scores();
    let n = total.total();
    let base_rate = if n == 0 {
        0.0
    } else {
        (total.tp + total.fn_) as f64 / n as f64
    };
    Ok(MetricsReport {
        model,
        split,
        precision: scores.precision,
        recall: scores.recall,
        f1: scores.f1,
        confusion: total,
        base_rate,
        sessions,
        seed,
    })
}

pub fn evaluate(
    classifier: &Classifier,
    split: Split,
    dialogs: &[Dialog],
    space: &FeatureSpace,
    lexicon: &Lexicon,
    seed: Option<u64>,
) -> Result<MetricsReport> {
    evaluate_with(classifier.model.kind(), split, dialogs, seed, |d| {
        Ok(predict_dialog(classifier, d, space, lexicon)?
            .into_iter()
            .map(|p| p.label)
            .collect())
    })
}
