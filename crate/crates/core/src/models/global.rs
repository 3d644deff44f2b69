//! Clause-level recurrent model: sparse features → linear embedding → one or
//! two LSTM layers → tanh MLP → two-way softmax, with inverted dropout on the
//! LSTM input, between/after LSTM layers and on the MLP hidden layer.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::config::GlobalConfig;
use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::math::tanh;
use crate::nn::{
    sample_mask, softmax, softmax_cross_entropy, DenseParams, LstmParams, LstmState, ParamBlock,
    Parameterized, StepCache,
};
use crate::rng::Rng;

/// Per-layer LSTM state threaded across clauses.
pub type RecurrentState = Vec<LstmState>;

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalParams {
    pub embed: DenseParams,
    pub lstm: Vec<LstmParams>,
    pub mlp: DenseParams,
    pub output: DenseParams,
}

impl Parameterized for GlobalParams {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        fn prefixed<'a>(prefix: &str, blocks: Vec<ParamBlock<'a>>) -> Vec<ParamBlock<'a>> {
            blocks
                .into_iter()
                .map(|mut b| {
                    b.name = format!("{prefix}.{}", b.name);
                    b
                })
                .collect()
        }
        let mut out = prefixed("embed", self.embed.blocks());
        for (l, p) in self.lstm.iter().enumerate() {
            out.extend(prefixed(&format!("lstm{l}"), p.blocks()));
        }
        out.extend(prefixed("mlp", self.mlp.blocks()));
        out.extend(prefixed("output", self.output.blocks()));
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.embed.blocks_mut();
        for p in &mut self.lstm {
            out.extend(p.blocks_mut());
        }
        out.extend(self.mlp.blocks_mut());
        out.extend(self.output.blocks_mut());
        out
    }
}

/// Everything one training-mode step keeps for the backward pass.
#[derive(Debug, Clone)]
struct StepTrace {
    embed_mask: Option<Vec<f64>>,
    lstm: Vec<StepCache>,
    /// Mask applied to each layer's hidden output.
    out_masks: Vec<Option<Vec<f64>>>,
    top: Vec<f64>,
    hidden: Vec<f64>,
    hidden_mask: Option<Vec<f64>>,
    hidden_dropped: Vec<f64>,
    logits: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ChunkTrace {
    steps: Vec<StepTrace>,
    pub outgoing: RecurrentState,
}

impl ChunkTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Gradient of the loss with respect to a chunk's incoming `(h, c)` per layer.
pub type StateGrad = Vec<(Vec<f64>, Vec<f64>)>;

fn apply_mask(x: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, k) in x.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

impl GlobalParams {
    pub fn zeros(dim: usize, config: &GlobalConfig) -> Self {
        let mut lstm = vec![LstmParams::zeros(config.hidden, config.embed)];
        if config.layers == 2 {
            lstm.push(LstmParams::zeros(config.hidden, config.hidden));
        }
        GlobalParams {
            embed: DenseParams::zeros(config.embed, dim),
            lstm,
            mlp: DenseParams::zeros(config.mlp_hidden, config.hidden),
            output: DenseParams::zeros(2, config.mlp_hidden),
        }
    }

    pub fn init(dim: usize, config: &GlobalConfig, rng: &mut Rng) -> Self {
        let embed = DenseParams::init(config.embed, dim, rng);
        let mut lstm = vec![LstmParams::init(config.hidden, config.embed, rng)];
        if config.layers == 2 {
            lstm.push(LstmParams::init(config.hidden, config.hidden, rng));
        }
        GlobalParams {
            embed,
            lstm,
            mlp: DenseParams::init(config.mlp_hidden, config.hidden, rng),
            output: DenseParams::init(2, config.mlp_hidden, rng),
        }
    }

    pub fn dim(&self) -> usize {
        self.embed.input()
    }

    pub fn hidden(&self) -> usize {
        self.lstm[0].hidden()
    }

    pub fn zero_state(&self) -> RecurrentState {
        self.lstm
            .iter()
            .map(|l| LstmState::zeros(l.hidden()))
            .collect()
    }

    fn check_state(&self, state: &[LstmState]) -> Result<()> {
        if state.len() != self.lstm.len() {
            return Err(Error::ShapeMismatch {
                what: "recurrent state layers",
                expected: self.lstm.len(),
                got: state.len(),
            });
        }
        Ok(())
    }

    /// One clause. `dropout = Some((rate, rng))` selects training mode.
    fn step(
        &self,
        f: &SparseVector,
        state: &mut RecurrentState,
        dropout: &mut Option<(f64, &mut Rng)>,
    ) -> Result<StepTrace> {
        let mut mask = |n: usize| -> Option<Vec<f64>> {
            match dropout {
                Some((rate, rng)) if *rate > 0.0 => Some(sample_mask(n, *rate, rng)),
                _ => None,
            }
        };
        let mut x = self.embed.forward_sparse(f)?;
        let embed_mask = mask(x.len());
        apply_mask(&mut x, &embed_mask);

        let mut caches = Vec::with_capacity(self.lstm.len());
        let mut out_masks = Vec::with_capacity(self.lstm.len());
        for (layer, st) in self.lstm.iter().zip(state.iter_mut()) {
            let (next, cache) = layer.forward(&x, st)?;
            x = next.h.clone();
            *st = next;
            let m = mask(x.len());
            apply_mask(&mut x, &m);
            caches.push(cache);
            out_masks.push(m);
        }

        let mut hidden = self.mlp.forward(&x)?;
        for v in &mut hidden {
            *v = tanh(*v);
        }
        let hidden_mask = mask(hidden.len());
        let mut hidden_dropped = hidden.clone();
        apply_mask(&mut hidden_dropped, &hidden_mask);
        let logits = self.output.forward(&hidden_dropped)?;
        Ok(StepTrace {
            embed_mask,
            lstm: caches,
            out_masks,
            top: x,
            hidden,
            hidden_mask,
            hidden_dropped,
            logits,
        })
    }

    /// Runs a chunk from `incoming` and returns per-step `[p(0), p(1)]` and the outgoing state.
    pub fn forward_chunk(
        &self,
        chunk: &[SparseVector],
        incoming: &[LstmState],
        dropout: Option<(f64, &mut Rng)>,
    ) -> Result<(Vec<[f64; 2]>, RecurrentState)> {
        let trace = self.forward_chunk_trace(chunk, incoming, dropout)?;
        let probs = trace.steps.iter().map(|s| probs_of(&s.logits)).collect();
        Ok((probs, trace.outgoing))
    }

    pub fn forward_chunk_trace(
        &self,
        chunk: &[SparseVector],
        incoming: &[LstmState],
        mut dropout: Option<(f64, &mut Rng)>,
    ) -> Result<ChunkTrace> {
        self.check_state(incoming)?;
        let mut state: RecurrentState = incoming.to_vec();
        let mut steps = Vec::with_capacity(chunk.len());
        for f in chunk {
            steps.push(self.step(f, &mut state, &mut dropout)?);
        }
        Ok(ChunkTrace {
            steps,
            outgoing: state,
        })
    }

    /// Backpropagates `Σ_t weights[t]·CE_t` through one chunk.
    ///
    /// `carry` is the gradient arriving at the chunk's outgoing state from
    /// later chunks; truncated BPTT passes `None`. Returns the weighted loss
    /// and the gradient at the chunk's incoming state.
    pub fn backward_chunk(
        &self,
        chunk: &[SparseVector],
        trace: &ChunkTrace,
        golds: &[usize],
        weights: &[f64],
        carry: Option<StateGrad>,
        grads: &mut GlobalParams,
    ) -> Result<(f64, StateGrad)> {
        let n = trace.steps.len();
        if chunk.len() != n || golds.len() != n || weights.len() != n {
            return Err(Error::LengthMismatch {
                left: n,
                right: golds.len().min(weights.len()).min(chunk.len()),
            });
        }
        let mut carry = carry.unwrap_or_else(|| {
            self.lstm
                .iter()
                .map(|l| (vec![0.0; l.hidden()], vec![0.0; l.hidden()]))
                .collect()
        });
        let mut loss = 0.0;
        for t in (0..n).rev() {
            let s = &trace.steps[t];
            let (ce, mut dlogits) = softmax_cross_entropy(&s.logits, golds[t])?;
            loss += weights[t] * ce;
            for d in &mut dlogits {
                *d *= weights[t];
            }
            let mut d_hidden =
                self.output
                    .backward(&s.hidden_dropped, &dlogits, &mut grads.output)?;
            apply_mask(&mut d_hidden, &s.hidden_mask);
            for (d, a) in d_hidden.iter_mut().zip(&s.hidden) {
                *d *= 1.0 - a * a;
            }
            let mut dx = self.mlp.backward(&s.top, &d_hidden, &mut grads.mlp)?;
            for l in (0..self.lstm.len()).rev() {
                apply_mask(&mut dx, &s.out_masks[l]);
                let (dh_carry, dc_carry) = &carry[l];
                for (d, c) in dx.iter_mut().zip(dh_carry) {
                    *d += c;
                }
                let (d_in, dh_prev, dc_prev) =
                    self.lstm[l].backward(&s.lstm[l], &dx, dc_carry, &mut grads.lstm[l])?;
                carry[l] = (dh_prev, dc_prev);
                dx = d_in;
            }
            apply_mask(&mut dx, &s.embed_mask);
            self.embed
                .backward_sparse(&chunk[t], &dx, &mut grads.embed)?;
        }
        Ok((loss, carry))
    }
}

fn probs_of(logits: &[f64]) -> [f64; 2] {
    let p = softmax(logits);
    [p[0], p[1]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalContextModel {
    pub config: GlobalConfig,
    pub params: GlobalParams,
}

impl GlobalContextModel {
    pub fn new(dim: usize, config: GlobalConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::with_stream(seed, crate::rng::STREAM_INIT);
        Ok(GlobalContextModel {
            params: GlobalParams::init(dim, &config, &mut rng),
            config,
        })
    }

    pub fn zero_state(&self) -> RecurrentState {
        self.params.zero_state()
    }

    /// Inference-mode chunk forward (no dropout).
    pub fn forward_chunk(
        &self,
        chunk: &[SparseVector],
        incoming: &[LstmState],
    ) -> Result<(Vec<[f64; 2]>, RecurrentState)> {
        self.params.forward_chunk(chunk, incoming, None)
    }

    /// Probabilities for a whole dialog from the zero state, without truncation.
    pub fn predict_sequence(&self, seq: &[SparseVector]) -> Result<Vec<[f64; 2]>> {
        Ok(self.forward_chunk(seq, &self.zero_state())?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_config(layers: usize) -> GlobalConfig {
        GlobalConfig {
            embed: 4,
            hidden: 5,
            mlp_hidden: 3,
            layers,
            dropout: 0.0,
        }
    }

    fn random_seq(rng: &mut Rng, dim: usize, len: usize) -> Vec<SparseVector> {
        (0..len)
            .map(|_| {
                let entries = (0..dim)
                    .filter_map(|c| {
                        if rng.bernoulli(0.3) {
                            Some((c as u32, 1.0 + rng.below(2) as f64))
                        } else {
                            None
                        }
                    })
                    .collect();
                SparseVector::new(dim, entries).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_params_give_uniform_output_and_zero_state() {
        let cfg = tiny_config(2);
        let p = GlobalParams::zeros(12, &cfg);
        let seq = random_seq(&mut Rng::new(1), 12, 5);
        let (probs, out) = p.forward_chunk(&seq, &p.zero_state(), None).unwrap();
        assert!(probs.iter().all(|q| *q == [0.5, 0.5]));
        assert!(out
            .iter()
            .all(|s| s.h.iter().chain(&s.c).all(|&v| v == 0.0)));
    }

    #[test]
    fn single_step_chunk_outgoing_state() {
        let m = GlobalContextModel::new(12, tiny_config(1), 3).unwrap();
        let seq = random_seq(&mut Rng::new(2), 12, 1);
        let trace = m
            .params
            .forward_chunk_trace(&seq, &m.zero_state(), None)
            .unwrap();
        assert_eq!(trace.len(), 1);
        let (_, out) = m.forward_chunk(&seq, &m.zero_state()).unwrap();
        assert_eq!(out, trace.outgoing);
        assert_ne!(out[0].h, vec![0.0; 5]);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = GlobalContextModel::new(12, tiny_config(2), 9).unwrap();
        let seq = random_seq(&mut Rng::new(3), 12, 30);
        for p in m.predict_sequence(&seq).unwrap() {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = GlobalContextModel::new(12, tiny_config(1), 3).unwrap();
        let seq = random_seq(&mut Rng::new(2), 11, 2);
        assert!(m.predict_sequence(&seq).is_err());
    }

    #[test]
    fn dropout_changes_training_output_only() {
        let cfg = GlobalConfig {
            dropout: 0.5,
            ..tiny_config(1)
        };
        let m = GlobalContextModel::new(12, cfg, 3).unwrap();
        let seq = random_seq(&mut Rng::new(5), 12, 6);
        let eval_a = m.predict_sequence(&seq).unwrap();
        let eval_b = m.predict_sequence(&seq).unwrap();
        assert_eq!(eval_a, eval_b);
        let mut rng = Rng::new(0);
        let (train, _) = m
            .params
            .forward_chunk(&seq, &m.zero_state(), Some((0.5, &mut rng)))
            .unwrap();
        assert_ne!(train, eval_a);
    }

    #[test]
    fn block_names_are_qualified() {
        let mut p = GlobalParams::zeros(3, &tiny_config(2));
        let names: Vec<_> = p.blocks().into_iter().map(|b| b.name).collect();
        assert_eq!(
            names,
            [
                "embed.w", "embed.b", "lstm0.w", "lstm0.b", "lstm1.w", "lstm1.b", "mlp.w", "mlp.b",
                "output.w", "output.b"
            ]
        );
        assert_eq!(p.blocks_mut().len(), names.len());
    }
}
