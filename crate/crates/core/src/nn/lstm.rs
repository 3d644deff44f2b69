use alloc::vec;
use alloc::vec::Vec;

use super::params::{ParamBlock, Parameterized};
use crate::error::{Error, Result};
use crate::math::{all_finite, sigmoid, sqrt, tanh, Matrix};
use crate::rng::Rng;

/// One LSTM layer.
///
/// `w` stacks the input, forget, output and candidate gates (in that order)
/// as `[4H, H + X]`; its first `H` columns multiply the previous hidden state
/// and the remaining `X` columns the input.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w: Matrix,
    pub b: Vec<f64>,
    hidden: usize,
    input: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Activations of one forward step, consumed by [`LstmParams::backward`].
#[derive(Debug, Clone)]
pub struct StepCache {
    /// `[h_prev; x]`
    z: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gate values `[i; f; o; j]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl StepCache {
    pub fn gates(&self) -> &[f64] {
        &self.gates
    }
}

impl LstmParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        LstmParams {
            w: Matrix::zeros(4 * hidden, hidden + input),
            b: vec![0.0; 4 * hidden],
            hidden,
            input,
        }
    }

    /// Uniform `[−k, k]` weights with `k = 1/√(H + X)`; forget-gate bias 1, other biases 0.
    pub fn init(hidden: usize, input: usize, rng: &mut Rng) -> Self {
        let mut p = LstmParams::zeros(hidden, input);
        let k = 1.0 / sqrt((hidden + input) as f64);
        rng.fill_uniform(p.w.as_mut_slice(), k);
        p.b[hidden..2 * hidden].fill(1.0);
        p
    }

    pub fn from_parts(w: Matrix, b: Vec<f64>, hidden: usize, input: usize) -> Result<Self> {
        if w.rows() != 4 * hidden || w.cols() != hidden + input {
            return Err(Error::ShapeMismatch {
                what: "lstm weight",
                expected: 4 * hidden * (hidden + input),
                got: w.rows() * w.cols(),
            });
        }
        if b.len() != 4 * hidden {
            return Err(Error::ShapeMismatch {
                what: "lstm bias",
                expected: 4 * hidden,
                got: b.len(),
            });
        }
        Ok(LstmParams {
            w,
            b,
            hidden,
            input,
        })
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn input(&self) -> usize {
        self.input
    }

    fn check_shapes(&self, x: &[f64], prev: &LstmState) -> Result<()> {
        let checks = [
            ("lstm input", self.input, x.len()),
            ("lstm h_prev", self.hidden, prev.h.len()),
            ("lstm c_prev", self.hidden, prev.c.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::ShapeMismatch {
                    what,
                    expected,
                    got,
                });
            }
        }
        if !all_finite(x) || !all_finite(&prev.h) || !all_finite(&prev.c) {
            return Err(Error::NonFinite("lstm step input".into()));
        }
        Ok(())
    }

    /// `[i;f;o;j] = [σ;σ;σ;tanh](W·[h_prev; x] + b)`, `c = f⊙c_prev + i⊙j`, `h = o⊙tanh(c)`.
    pub fn forward(&self, x: &[f64], prev: &LstmState) -> Result<(LstmState, StepCache)> {
        self.check_shapes(x, prev)?;
        let hsz = self.hidden;
        let mut z = Vec::with_capacity(hsz + self.input);
        z.extend_from_slice(&prev.h);
        z.extend_from_slice(x);

        let mut gates = vec![0.0; 4 * hsz];
        self.w.matvec_bias(&z, &self.b, &mut gates);
        for g in &mut gates[..3 * hsz] {
            *g = sigmoid(*g);
        }
        for g in &mut gates[3 * hsz..] {
            *g = tanh(*g);
        }

        let mut c = vec![0.0; hsz];
        let mut h = vec![0.0; hsz];
        let mut tanh_c = vec![0.0; hsz];
        for k in 0..hsz {
            let (i, f, o, j) = (
                gates[k],
                gates[hsz + k],
                gates[2 * hsz + k],
                gates[3 * hsz + k],
            );
            c[k] = f * prev.c[k] + i * j;
            tanh_c[k] = tanh(c[k]);
            h[k] = o * tanh_c[k];
        }
        let cache = StepCache {
            z,
            c_prev: prev.c.clone(),
            gates,
            tanh_c,
        };
        Ok((LstmState { h, c }, cache))
    }

    /// Backpropagates `(∂L/∂h, ∂L/∂c)` of one step. Parameter gradients are
    /// accumulated into `grads`; returns `(∂L/∂x, ∂L/∂h_prev, ∂L/∂c_prev)`.
    pub fn backward(
        &self,
        cache: &StepCache,
        grad_h: &[f64],
        grad_c: &[f64],
        grads: &mut LstmParams,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let hsz = self.hidden;
        if cache.z.len() != hsz + self.input || cache.c_prev.len() != hsz {
            return Err(Error::ShapeMismatch {
                what: "lstm cache",
                expected: hsz + self.input,
                got: cache.z.len(),
            });
        }
        if grad_h.len() != hsz || grad_c.len() != hsz {
            return Err(Error::ShapeMismatch {
                what: "lstm output gradient",
                expected: hsz,
                got: grad_h.len().min(grad_c.len()),
            });
        }
        if grads.hidden != hsz || grads.input != self.input {
            return Err(Error::ShapeMismatch {
                what: "lstm gradient buffer",
                expected: hsz,
                got: grads.hidden,
            });
        }

        let g = &cache.gates;
        let mut dpre = vec![0.0; 4 * hsz];
        let mut dc_prev = vec![0.0; hsz];
        for k in 0..hsz {
            let (i, f, o, j) = (g[k], g[hsz + k], g[2 * hsz + k], g[3 * hsz + k]);
            let tc = cache.tanh_c[k];
            let d_o = grad_h[k] * tc;
            let dc = grad_c[k] + grad_h[k] * o * (1.0 - tc * tc);
            let d_i = dc * j;
            let d_f = dc * cache.c_prev[k];
            let d_j = dc * i;
            dc_prev[k] = dc * f;
            dpre[k] = d_i * i * (1.0 - i);
            dpre[hsz + k] = d_f * f * (1.0 - f);
            dpre[2 * hsz + k] = d_o * o * (1.0 - o);
            dpre[3 * hsz + k] = d_j * (1.0 - j * j);
        }

        let mut dz = vec![0.0; hsz + self.input];
        for (r, &d) in dpre.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            crate::math::axpy(grads.w.row_mut(r), d, &cache.z);
            crate::math::axpy(&mut dz, d, self.w.row(r));
            grads.b[r] += d;
        }
        let dx = dz.split_off(hsz);
        Ok((dx, dz, dc_prev))
    }
}

impl Parameterized for LstmParams {
    fn blocks(&self) -> Vec<ParamBlock<'_>> {
        vec![
            ParamBlock {
                name: "w".into(),
                shape: vec![self.w.rows(), self.w.cols()],
                data: self.w.as_slice(),
            },
            ParamBlock {
                name: "b".into(),
                shape: vec![self.b.len()],
                data: &self.b,
            },
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.w.as_mut_slice(), &mut self.b]
    }
}
