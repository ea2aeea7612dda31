//! Two-layer perceptron: linear → ReLU → linear.

use rand::Rng;

use crate::autodiff::adam::{adam_step, AdamState};
use crate::autodiff::tape::{DiffMatrix, Tape};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::Real;

/// Hidden width used by all three update networks.
pub const HIDDEN_WIDTH: usize = 200;

/// Plain parameters of a `d_in → hidden (ReLU) → d_out` network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub d_in: usize,
    pub hidden: usize,
    pub d_out: usize,
    /// `d_in x hidden`
    pub w1: CMatrix<T>,
    /// `1 x hidden`
    pub b1: CMatrix<T>,
    /// `hidden x d_out`
    pub w2: CMatrix<T>,
    /// `1 x d_out`
    pub b2: CMatrix<T>,
}

/// Parameters of an [`Mlp`] placed on a tape as differentiable leaves.
#[derive(Clone, Copy)]
pub struct BoundMlp<'t, T> {
    pub w1: DiffMatrix<'t, T>,
    pub b1: DiffMatrix<'t, T>,
    pub w2: DiffMatrix<'t, T>,
    pub b2: DiffMatrix<'t, T>,
}

impl<T: Real> Mlp<T> {
    pub fn zeros(d_in: usize, hidden: usize, d_out: usize) -> Self {
        Self {
            d_in,
            hidden,
            d_out,
            w1: CMatrix::zeros(d_in, hidden),
            b1: CMatrix::zeros(1, hidden),
            w2: CMatrix::zeros(hidden, d_out),
            b2: CMatrix::zeros(1, d_out),
        }
    }

    /// Hidden layer drawn uniformly in `±1/sqrt(fan_in)`; output layer zero, so
    /// a fresh network maps every input to zero.
    pub fn init<R: Rng + ?Sized>(d_in: usize, hidden: usize, d_out: usize, rng: &mut R) -> Self {
        let mut net = Self::zeros(d_in, hidden, d_out);
        let bound = 1.0 / (d_in as f64).sqrt();
        for v in net.w1.re_mut().iter_mut().chain(net.b1.re_mut()) {
            *v = T::lit(rng.gen_range(-bound..bound));
        }
        net
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn bind<'t>(&self, tape: &'t Tape<T>) -> BoundMlp<'t, T> {
        BoundMlp {
            w1: tape.var(self.w1.clone()),
            b1: tape.var(self.b1.clone()),
            w2: tape.var(self.w2.clone()),
            b2: tape.var(self.b2.clone()),
        }
    }

    /// Untaped evaluation of a single input vector.
    pub fn forward_values(&self, input: &[T]) -> Result<Vec<T>> {
        if input.len() != self.d_in {
            return Err(Error::ShapeMismatch(format!("mlp input length {} != {}", input.len(), self.d_in)));
        }
        let x = CMatrix::from_real(1, self.d_in, input.to_vec());
        let mut h = x.matmul(&self.w1).add(&self.b1);
        for v in h.re_mut() {
            *v = v.max(T::zero());
        }
        let out = h.matmul(&self.w2).add(&self.b2);
        Ok(out.re().to_vec())
    }

    pub fn params(&self) -> [&CMatrix<T>; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> [&mut CMatrix<T>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

impl<'t, T: Real> BoundMlp<'t, T> {
    /// Batched forward pass: each row of `input` (`B x d_in`) is one sample.
    pub fn forward(&self, input: &DiffMatrix<'t, T>) -> Result<DiffMatrix<'t, T>> {
        let (_, d_in) = input.shape();
        let (w_in, _) = self.w1.shape();
        if d_in != w_in {
            return Err(Error::ShapeMismatch(format!("mlp input width {d_in} != {w_in}")));
        }
        let h = input.matmul(&self.w1).add_row(&self.b1).relu();
        Ok(h.matmul(&self.w2).add_row(&self.b2))
    }

    pub fn leaves(&self) -> [DiffMatrix<'t, T>; 4] {
        [self.w1, self.b1, self.w2, self.b2]
    }
}

/// Taped forward pass of one input vector (`mlp_forward`).
pub fn mlp_forward<'t, T: Real>(net: &BoundMlp<'t, T>, input: &[T]) -> Result<DiffMatrix<'t, T>> {
    let tape = net.w1.tape();
    let x = tape.constant(CMatrix::from_real(1, input.len(), input.to_vec()));
    net.forward(&x)
}

/// Adam states for the four parameter tensors of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpOptimizer<T> {
    states: Vec<AdamState<T>>,
}

impl<T: Real> MlpOptimizer<T> {
    pub fn new(net: &Mlp<T>, learning_rate: T) -> Self {
        Self {
            states: net.params().iter().map(|p| AdamState::new(p.len(), learning_rate)).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.states[0].step_count
    }

    /// Applies one Adam step given per-tensor loss gradients (real planes used).
    pub fn step(&mut self, net: &mut Mlp<T>, grads: &[CMatrix<T>]) -> Result<()> {
        if grads.len() != 4 {
            return Err(Error::ShapeMismatch(format!("expected 4 gradient tensors, got {}", grads.len())));
        }
        for ((param, state), g) in net.params_mut().into_iter().zip(&mut self.states).zip(grads) {
            adam_step(state, param.re_mut(), g.re())?;
        }
        Ok(())
    }
}
