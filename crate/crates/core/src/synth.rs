//! Planted-rule synthetic corpus generator.
//!
//! Clause `t` is a violation iff it contains a trigger token, or every one
//! of the `depth` preceding clauses contains a cue token. Cue tokens carry
//! no information about their own clause's label, so a per-clause model can
//! only recover the trigger component, while a sequence model that
//! remembers the last `depth` clauses can reproduce the labels exactly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Clause, Dialog, NonverbalMeta, Relationship, Split};
use crate::error::{Error, Result};
use crate::rng::{Rng, STREAM_SYNTH};

const CLOSED_CLASS_FILLER: [&str; 12] = [
    "the", "a", "i", "you", "it", "is", "and", "to", "of", "we", "so", "that",
];

pub const TRIGGER_PREFIX: &str = "xtrig";
pub const CUE_PREFIX: &str = "xcue";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub cv: usize,
    pub test: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub sessions: usize,
    pub clauses_per_session: usize,
    /// Number of neutral filler words (closed-class words, then pseudo-words).
    pub vocab_size: usize,
    pub triggers: usize,
    pub cues: usize,
    pub depth: usize,
    pub positive_rate: f64,
    /// Fraction of positives produced by the context rule alone.
    pub context_share: f64,
    pub min_words: usize,
    pub max_words: usize,
    pub splits: SplitSizes,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            sessions: 50,
            clauses_per_session: 200,
            vocab_size: 40,
            triggers: 4,
            cues: 4,
            depth: 2,
            positive_rate: 0.3,
            context_share: 0.6,
            min_words: 3,
            max_words: 8,
            splits: SplitSizes {
                train: 40,
                cv: 5,
                test: 5,
            },
            seed: 0,
        }
    }
}

pub const MIN_CONTEXT_SHARE: f64 = 0.4;

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.sessions == 0 || self.clauses_per_session == 0 {
            return bad("sessions and clauses_per_session must be positive".into());
        }
        if self.vocab_size == 0 || self.triggers == 0 || self.cues == 0 {
            return bad("vocab_size, triggers and cues must be positive".into());
        }
        if self.depth == 0 {
            return bad("depth must be at least 1".into());
        }
        if self.min_words < 2 || self.max_words < self.min_words {
            return bad(format!(
                "word counts must satisfy 2 <= min_words <= max_words, got {}..{}",
                self.min_words, self.max_words
            ));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad(format!(
                "positive_rate must lie in (0, 1), got {}",
                self.positive_rate
            ));
        }
        if !(MIN_CONTEXT_SHARE..1.0).contains(&self.context_share) {
            return bad(format!(
                "context_share must lie in [{MIN_CONTEXT_SHARE}, 1), got {}",
                self.context_share
            ));
        }
        let s = self.splits;
        if s.train + s.cv + s.test != self.sessions || s.train == 0 {
            return bad(format!(
                "split sizes {}+{}+{} must sum to sessions={} with a non-empty train split",
                s.train, s.cv, s.test, self.sessions
            ));
        }
        Ok(())
    }

    /// Probability that a clause carries a trigger.
    pub fn trigger_rate(&self) -> f64 {
        (1.0 - self.context_share) * self.positive_rate
    }

    /// Probability that all `depth` preceding clauses carry a cue.
    fn context_window_rate(&self) -> f64 {
        self.context_share * self.positive_rate / (1.0 - self.trigger_rate())
    }

    /// Per-clause probability of a cue token.
    pub fn cue_rate(&self) -> f64 {
        libm::pow(self.context_window_rate(), 1.0 / self.depth as f64)
    }

    pub fn trigger_words(&self) -> Vec<String> {
        (0..self.triggers)
            .map(|i| format!("{TRIGGER_PREFIX}{i}"))
            .collect()
    }

    pub fn cue_words(&self) -> Vec<String> {
        (0..self.cues).map(|i| format!("{CUE_PREFIX}{i}")).collect()
    }

    pub fn filler_words(&self) -> Vec<String> {
        (0..self.vocab_size)
            .map(|i| match CLOSED_CLASS_FILLER.get(i) {
                Some(w) => w.to_string(),
                None => format!("w{:03}", i - CLOSED_CLASS_FILLER.len()),
            })
            .collect()
    }
}

/// Machine-readable statement of the planted rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleDescription {
    pub rule: String,
    pub triggers: Vec<String>,
    pub cues: Vec<String>,
    pub depth: usize,
    pub trigger_rate: f64,
    pub cue_rate: f64,
    pub expected_positive_rate: f64,
    pub expected_context_share: f64,
}

impl RuleDescription {
    pub fn of(config: &SynthConfig) -> Self {
        RuleDescription {
            rule: format!(
                "label[t] = 1 iff clause t contains a trigger token, or each of clauses t-1..t-{} contains a cue token",
                config.depth
            ),
            triggers: config.trigger_words(),
            cues: config.cue_words(),
            depth: config.depth,
            trigger_rate: config.trigger_rate(),
            cue_rate: config.cue_rate(),
            expected_positive_rate: config.positive_rate,
            expected_context_share: config.context_share,
        }
    }

    /// Applies the rule to clause `t` of a sequence of token lists.
    pub fn label_at<W: AsRef<[String]>>(&self, clauses: &[W], t: usize) -> bool {
        let has = |i: usize, set: &[String]| clauses[i].as_ref().iter().any(|w| set.contains(w));
        has(t, &self.triggers)
            || (t >= self.depth && (t - self.depth..t).all(|i| has(i, &self.cues)))
    }

    pub fn label_dialog(&self, dialog: &Dialog) -> Vec<bool> {
        let words: Vec<&[String]> = dialog.clauses.iter().map(|c| c.words.as_slice()).collect();
        (0..words.len()).map(|t| self.label_at(&words, t)).collect()
    }

    /// Lexicon categories naming the trigger and cue tokens.
    pub fn lexicon(&self) -> BTreeMap<String, Vec<String>> {
        let mut m = BTreeMap::new();
        m.insert("trigger".into(), alloc::vec![format!("{TRIGGER_PREFIX}*")]);
        m.insert("cue".into(), alloc::vec![format!("{CUE_PREFIX}*")]);
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub dialogs: Vec<Dialog>,
    pub assignment: BTreeMap<String, Split>,
    pub rule: RuleDescription,
}

pub fn session_name(i: usize) -> String {
    format!("synth-{i:03}")
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let rule = RuleDescription::of(config);
    let filler = config.filler_words();
    let mut rng = Rng::with_stream(config.seed, STREAM_SYNTH);
    let (p_trigger, p_cue) = (config.trigger_rate(), config.cue_rate());

    let mut dialogs = Vec::with_capacity(config.sessions);
    let mut assignment = BTreeMap::new();
    for s in 0..config.sessions {
        let relationship = if rng.bernoulli(0.5) {
            Relationship::Friend
        } else {
            Relationship::Stranger
        };
        let mut tokens: Vec<Vec<String>> = Vec::with_capacity(config.clauses_per_session);
        let mut metas = Vec::with_capacity(config.clauses_per_session);
        for _ in 0..config.clauses_per_session {
            let n = config.min_words + rng.below(config.max_words - config.min_words + 1);
            let mut words: Vec<String> = (0..n)
                .map(|_| filler[rng.below(filler.len())].clone())
                .collect();
            let trigger_slot = rng.below(n);
            if rng.bernoulli(p_trigger) {
                words[trigger_slot] = rule.triggers[rng.below(rule.triggers.len())].clone();
            }
            if rng.bernoulli(p_cue) {
                let cue_slot = (trigger_slot + 1 + rng.below(n - 1)) % n;
                words[cue_slot] = rule.cues[rng.below(rule.cues.len())].clone();
            }
            tokens.push(words);
            metas.push(NonverbalMeta {
                relationship,
                head_nod: rng.bernoulli(0.3),
                smile: rng.bernoulli(0.3),
                gaze_partner: rng.bernoulli(0.5),
            });
        }
        let labels: Vec<bool> = (0..tokens.len())
            .map(|t| rule.label_at(&tokens, t))
            .collect();
        let clauses = tokens
            .into_iter()
            .zip(metas)
            .zip(labels)
            .map(|((words, meta), label)| Clause::new(words, None, meta, label, None))
            .collect::<Result<Vec<_>>>()?;
        let id = session_name(s);
        let split = if s < config.splits.train {
            Split::Train
        } else if s < config.splits.train + config.splits.cv {
            Split::Cv
        } else {
            Split::Test
        };
        assignment.insert(id.clone(), split);
        dialogs.push(Dialog {
            session_id: id,
            clauses,
        });
    }
    Ok(SynthCorpus {
        dialogs,
        assignment,
        rule,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::Confusion;

    #[test]
    fn fixed_seed_is_deterministic() {
        let cfg = SynthConfig {
            sessions: 4,
            clauses_per_session: 30,
            splits: SplitSizes {
                train: 2,
                cv: 1,
                test: 1,
            },
            seed: 17,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = generate(&SynthConfig { seed: 18, ..cfg }).unwrap();
        assert_ne!(generate(&cfg).unwrap().dialogs, other.dialogs);
    }

    fn rates(cfg: &SynthConfig) -> (f64, f64) {
        let c = generate(cfg).unwrap();
        let (mut pos, mut ctx_only, mut n) = (0usize, 0usize, 0usize);
        for d in &c.dialogs {
            for cl in &d.clauses {
                n += 1;
                if cl.label {
                    pos += 1;
                    if !cl.words.iter().any(|w| c.rule.triggers.contains(w)) {
                        ctx_only += 1;
                    }
                }
            }
        }
        (pos as f64 / n as f64, ctx_only as f64 / pos as f64)
    }

    #[test]
    fn positive_rate_and_context_share_match_config() {
        for (rate, share, seed) in [(0.3, 0.6, 1), (0.2, 0.4, 2), (0.4, 0.5, 3)] {
            let cfg = SynthConfig {
                sessions: 50,
                clauses_per_session: 200,
                positive_rate: rate,
                context_share: share,
                seed,
                ..SynthConfig::default()
            };
            let (r, s) = rates(&cfg);
            assert!((r - rate).abs() < 0.02, "rate {r} vs {rate}");
            assert!(s >= MIN_CONTEXT_SHARE - 0.03, "share {s}");
            assert!((s - share).abs() < 0.04, "share {s} vs {share}");
        }
    }

    #[test]
    fn planted_rule_scores_perfectly() {
        let c = generate(&SynthConfig {
            seed: 5,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut conf = Confusion::default();
        for d in &c.dialogs {
            let golds: Vec<bool> = d.labels().collect();
            conf.merge(&Confusion::from_labels(&c.rule.label_dialog(d), &golds).unwrap());
        }
        assert_eq!(conf.scores().f1, 1.0);
    }

    #[test]
    fn first_clauses_cannot_be_contextual() {
        let c = generate(&SynthConfig {
            seed: 9,
            ..SynthConfig::default()
        })
        .unwrap();
        for d in &c.dialogs {
            for cl in &d.clauses[..2] {
                assert_eq!(
                    cl.label,
                    cl.words.iter().any(|w| w.starts_with(TRIGGER_PREFIX))
                );
            }
        }
    }

    #[test]
    fn splits_follow_session_order() {
        let c = generate(&SynthConfig::default()).unwrap();
        let count = |s| c.assignment.values().filter(|&&v| v == s).count();
        assert_eq!(
            (count(Split::Train), count(Split::Cv), count(Split::Test)),
            (40, 5, 5)
        );
        assert_eq!(c.assignment[&session_name(44)], Split::Cv);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let d = SynthConfig::default();
        for cfg in [
            SynthConfig {
                context_share: 0.3,
                ..d
            },
            SynthConfig {
                positive_rate: 0.0,
                ..d
            },
            SynthConfig { depth: 0, ..d },
            SynthConfig { min_words: 1, ..d },
            SynthConfig { sessions: 49, ..d },
            SynthConfig {
                splits: SplitSizes {
                    train: 0,
                    cv: 25,
                    test: 25,
                },
                ..d
            },
        ] {
            assert!(
                matches!(cfg.validate(), Err(Error::InvalidConfig(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn filler_vocabulary_is_disjoint_from_rule_tokens() {
        let cfg = SynthConfig {
            vocab_size: 30,
            ..SynthConfig::default()
        };
        let f = cfg.filler_words();
        assert_eq!(f.len(), 30);
        assert!(f
            .iter()
            .all(|w| !w.starts_with(TRIGGER_PREFIX) && !w.starts_with(CUE_PREFIX)));
    }
}
