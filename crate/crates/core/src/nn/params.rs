use alloc::string::String;
use alloc::vec::Vec;

/// A named, shaped view of one parameter tensor.
#[derive(Debug)]
pub struct ParamBlock<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

/// A collection of parameter tensors visited in a fixed order.
///
/// Gradients are represented with the same type as the parameters, so the
/// i-th block of a gradient corresponds to the i-th block of the model.
pub trait Parameterized: Clone {
    fn blocks(&self) -> Vec<ParamBlock<'_>>;
    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero(&mut self) {
        for b in self.blocks_mut() {
            b.fill(0.0);
        }
    }

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        z
    }

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.data.len()).sum()
    }

    /// `self += other`, block by block.
    fn add_assign(&mut self, other: &Self) {
        let src = other.blocks();
        for (dst, s) in self.blocks_mut().into_iter().zip(src) {
            for (d, v) in dst.iter_mut().zip(s.data) {
                *d += v;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for b in self.blocks_mut() {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }
}
