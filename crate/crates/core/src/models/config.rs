use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Prf;
use crate::nn::OptimizerConfig;

/// Decision threshold on `p(violation)`; ties go to the positive class.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "logreg")]
    LogReg,
    #[serde(rename = "local")]
    Local,
    #[serde(rename = "global-1")]
    Global1,
    #[serde(rename = "global-2")]
    Global2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::LogReg,
        ModelKind::Local,
        ModelKind::Global1,
        ModelKind::Global2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::LogReg => "logreg",
            ModelKind::Local => "local",
            ModelKind::Global1 => "global-1",
            ModelKind::Global2 => "global-2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ModelKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_recurrent(self) -> bool {
        self != ModelKind::LogReg
    }
}

impl core::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::parse(s).ok_or_else(|| Error::InvalidConfig(format!("unknown model `{s}`")))
    }
}

/// Clause-sequence model sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalConfig {
    pub embed: usize,
    pub hidden: usize,
    pub mlp_hidden: usize,
    pub layers: usize,
    pub dropout: f64,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            embed: 150,
            hidden: 600,
            mlp_hidden: 100,
            layers: 1,
            dropout: 0.5,
        }
    }
}

impl GlobalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.hidden == 0 || self.mlp_hidden == 0 {
            return Err(Error::InvalidConfig(
                "global model sizes must be positive".into(),
            ));
        }
        if !(1..=2).contains(&self.layers) {
            return Err(Error::InvalidConfig(format!(
                "global model supports 1 or 2 LSTM layers, got {}",
                self.layers
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }
}

/// Word-level model sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalConfig {
    pub embed: usize,
    pub hidden: usize,
}

impl Default for LocalConfig {
    fn default() -> Self {
        LocalConfig {
            embed: 300,
            hidden: 300,
        }
    }
}

impl LocalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig(
                "local model sizes must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub global: GlobalConfig,
    pub local: LocalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// TBPTT window length in clauses.
    pub unroll: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    /// L2 penalty `λ‖w‖²` for the logistic baseline.
    pub l2_lambda: f64,
    pub seed: u64,
    /// Clauses per update for the per-clause models.
    pub batch_size: usize,
    /// Dialogs advanced in lockstep per TBPTT update.
    pub streams: usize,
    /// Loss weight on positive clauses.
    pub pos_weight: f64,
    /// Stop after this many epochs without CV F1 improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            unroll: 20,
            epochs: 10,
            optimizer: OptimizerConfig::default(),
            l2_lambda: 1e-4,
            seed: 0,
            batch_size: 32,
            streams: 1,
            pos_weight: 1.0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.unroll < 1 {
            return fail("unroll must be at least 1".into());
        }
        if self.epochs < 1 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size < 1 || self.streams < 1 {
            return fail("batch_size and streams must be at least 1".into());
        }
        if self.optimizer.lr.is_nan() || self.optimizer.lr <= 0.0 || self.optimizer.lr.is_infinite()
        {
            return fail(format!(
                "learning rate must be positive, got {}",
                self.optimizer.lr
            ));
        }
        if self.l2_lambda.is_nan()
            || self.l2_lambda < 0.0
            || self.pos_weight.is_nan()
            || self.pos_weight <= 0.0
        {
            return fail("l2_lambda must be ≥ 0 and pos_weight > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub cv: Option<Prf>,
    pub best: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(ModelKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(ModelKind::parse("global-3"), None);
    }

    #[test]
    fn zero_unroll_rejected() {
        let cfg = TrainConfig {
            unroll: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_sizes() {
        let g = GlobalConfig::default();
        assert_eq!(
            (g.embed, g.hidden, g.mlp_hidden, g.dropout),
            (150, 600, 100, 0.5)
        );
        let l = LocalConfig::default();
        assert_eq!((l.embed, l.hidden), (300, 300));
        assert_eq!(TrainConfig::default().unroll, 20);
    }
}
