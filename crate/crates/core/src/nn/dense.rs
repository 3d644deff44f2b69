use alloc::vec;
use alloc::vec::Vec;

use super::params::{ParamBlock, Parameterized};
use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::math::{sqrt, Matrix};
use crate::rng::Rng;

/// Affine map `y = W·x + b` with `W` of shape `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(output: usize, input: usize) -> Self {
        DenseParams {
            w: Matrix::zeros(output, input),
            b: vec![0.0; output],
        }
    }

    /// Uniform `[−k, k]` weights with `k = 1/√in`, zero bias.
    pub fn init(output: usize, input: usize, rng: &mut Rng) -> Self {
        let mut p = DenseParams::zeros(output, input);
        rng.fill_uniform(p.w.as_mut_slice(), 1.0 / sqrt(input as f64));
        p
    }

    pub fn input(&self) -> usize {
        self.w.cols()
    }

    pub fn output(&self) -> usize {
        self.w.rows()
    }

    fn check_input(&self, got: usize) -> Result<()> {
        if got != self.input() {
            return Err(Error::ShapeMismatch {
                what: "dense input",
                expected: self.input(),
                got,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        let mut y = vec![0.0; self.output()];
        self.w.matvec_bias(x, &self.b, &mut y);
        Ok(y)
    }

    /// Same map as [`forward`](Self::forward), touching only the nonzero columns.
    pub fn forward_sparse(&self, x: &SparseVector) -> Result<Vec<f64>> {
        self.check_input(x.dim())?;
        let mut y = self.b.clone();
        let cols = self.w.cols();
        let data = self.w.as_slice();
        for &(c, v) in x.entries() {
            let c = c as usize;
            for (r, yr) in y.iter_mut().enumerate() {
                *yr += data[r * cols + c] * v;
            }
        }
        Ok(y)
    }

    /// Accumulates parameter gradients for upstream `dy` and returns `∂L/∂x`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grads: &mut DenseParams) -> Result<Vec<f64>> {
        self.check_input(x.len())?;
        if dy.len() != self.output() {
            return Err(Error::ShapeMismatch {
                what: "dense output gradient",
                expected: self.output(),
                got: dy.len(),
            });
        }
        grads.w.add_outer(dy, x);
        for (gb, d) in grads.b.iter_mut().zip(dy) {
            *gb += d;
        }
        let mut dx = vec![0.0; self.input()];
        self.w.matvec_transpose_acc(dy, &mut dx);
        Ok(dx)
    }

    /// Parameter gradients for a sparse input; no input gradient is produced.
    pub fn backward_sparse(
        &self,
        x: &SparseVector,
        dy: &[f64],
        grads: &mut DenseParams,
    ) -> Result<()> {
        self.check_input(x.dim())?;
        if dy.len() != self.output() {
            return Err(Error::ShapeMismatch {
                what: "dense output gradient",
                expected: self.output(),
                got: dy.len(),
            });
        }
        let cols = grads.w.cols();
        let data = grads.w.as_mut_slice();
        for &(c, v) in x.entries() {
            let c = c as usize;
            for (r, d) in dy.iter().enumerate() {
                data[r * cols + c] += d * v;
            }
        }
        for (gb, d) in grads.b.iter_mut().zip(dy) {
            *gb += d;
        }
        Ok(())
    }
}

impl Parameterized for DenseParams {
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
