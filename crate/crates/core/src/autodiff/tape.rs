//! Reverse-mode differentiation over complex matrices.
//!
//! Every node on a [`Tape`] holds a complex matrix. Objectives are real
//! `1x1` nodes. The gradient of a real objective `f` with respect to a complex
//! entry `z` is stored as the complex number `∂f/∂Re z + j ∂f/∂Im z`, i.e. the
//! pair of independent real partials packed into one value. With that
//! convention the matrix-product rule reads `Ḡ_A = Ḡ_C Bᴴ`, `Ḡ_B = Aᴴ Ḡ_C`.
//!
//! Real-valued non-linearities (`relu`, `sigmoid`, `log2_1p`, `abs`, ...) act on
//! the real plane and treat the imaginary plane as absent.

use std::cell::{Ref, RefCell};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scalar::{Complex, Real};

enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Neg(usize),
    Hadamard(usize, usize),
    MatMul(usize, usize),
    Adjoint(usize),
    Transpose(usize),
    ScaleComplex(usize, Complex<T>),
    ScaleBy(usize, usize),
    AddConst(usize),
    AbsSq(usize),
    SumAll(usize),
    Log2OnePlus(usize),
    Sigmoid(usize),
    Relu(usize),
    Abs(usize),
    Div(usize, usize),
    Cis(usize),
    Norm(usize),
    BlockDiag(Vec<usize>),
    Col(usize, usize),
    Block(usize, usize, usize),
    Entry(usize, usize, usize),
    Reshape(usize),
    Complexify(usize),
    AddRowBroadcast(usize, usize),
    MirrorUpper(usize),
    Clamp(usize, Vec<bool>),
    ClampInward(usize, Vec<i8>),
    Passthrough(usize),
}

struct Node<T> {
    value: CMatrix<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Append-only record of taped operations. Confined to one thread.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::with_capacity(1024)),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Differentiable leaf (`requires_grad = true`).
    pub fn var(&self, value: CMatrix<T>) -> DiffMatrix<'_, T> {
        self.leaf(value, true)
    }

    /// Constant leaf; gradients never flow into it.
    pub fn constant(&self, value: CMatrix<T>) -> DiffMatrix<'_, T> {
        self.leaf(value, false)
    }

    pub fn leaf(&self, value: CMatrix<T>, requires_grad: bool) -> DiffMatrix<'_, T> {
        self.push(value, Op::Leaf, requires_grad)
    }

    pub fn real_scalar(&self, v: T) -> DiffMatrix<'_, T> {
        self.constant(CMatrix::real_scalar(v))
    }

    fn push(&self, value: CMatrix<T>, op: Op<T>, requires_grad: bool) -> DiffMatrix<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        DiffMatrix { tape: self, index }
    }

    fn value_ref(&self, index: usize) -> Ref<'_, CMatrix<T>> {
        Ref::map(self.nodes.borrow(), |n| &n[index].value)
    }

    fn rg(&self, index: usize) -> bool {
        self.nodes.borrow()[index].requires_grad
    }

    /// Gradients of a real scalar `objective` with respect to each target.
    ///
    /// Each returned matrix packs `∂f/∂Re` in its real plane and `∂f/∂Im` in
    /// its imaginary plane.
    pub fn grad(&self, objective: DiffMatrix<'_, T>, targets: &[DiffMatrix<'_, T>]) -> Result<Vec<CMatrix<T>>> {
        if !std::ptr::eq(objective.tape, self) {
            return Err(Error::InvalidArgument("objective is not on this tape".into()));
        }
        let (rows, cols) = objective.shape();
        if (rows, cols) != (1, 1) {
            return Err(Error::NonScalarObjective { rows, cols });
        }
        for t in targets {
            if !std::ptr::eq(t.tape, self) || t.index > objective.index || !self.rg(t.index) {
                return Err(Error::DisconnectedVariable(t.index));
            }
        }
        let grads = self.backward(objective.index);
        targets
            .iter()
            .map(|t| grads[t.index].clone().ok_or(Error::DisconnectedVariable(t.index)))
            .collect()
    }

    fn backward(&self, out: usize) -> Vec<Option<CMatrix<T>>> {
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<CMatrix<T>>> = (0..=out).map(|_| None).collect();
        grads[out] = Some(CMatrix::real_scalar(T::one()));

        fn acc<T: Real>(grads: &mut [Option<CMatrix<T>>], nodes: &[Node<T>], i: usize, g: CMatrix<T>) {
            if !nodes[i].requires_grad {
                return;
            }
            match &mut grads[i] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for idx in (0..=out).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let val = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    acc(&mut grads, &nodes, *a, g.clone());
                    acc(&mut grads, &nodes, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, &nodes, *a, g.clone());
                    acc(&mut grads, &nodes, *b, g.scale_real(-T::one()));
                }
                Op::Neg(a) => acc(&mut grads, &nodes, *a, g.scale_real(-T::one())),
                Op::Hadamard(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].requires_grad {
                        acc(&mut grads, &nodes, *a, g.zip_map(vb, |gz, bz| gz * bz.conj()));
                    }
                    if nodes[*b].requires_grad {
                        acc(&mut grads, &nodes, *b, g.zip_map(va, |gz, az| gz * az.conj()));
                    }
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].requires_grad {
                        acc(&mut grads, &nodes, *a, g.matmul(&vb.adjoint()));
                    }
                    if nodes[*b].requires_grad {
                        acc(&mut grads, &nodes, *b, va.adjoint().matmul(&g));
                    }
                }
                Op::Adjoint(a) => acc(&mut grads, &nodes, *a, g.adjoint()),
                Op::Transpose(a) => acc(&mut grads, &nodes, *a, g.transpose()),
                Op::ScaleComplex(a, c) => acc(&mut grads, &nodes, *a, g.scale(c.conj())),
                Op::ScaleBy(a, s) => {
                    let sv = nodes[*s].value.at(0);
                    if nodes[*a].requires_grad {
                        acc(&mut grads, &nodes, *a, g.scale(sv.conj()));
                    }
                    if nodes[*s].requires_grad {
                        let va = &nodes[*a].value;
                        let gs = g.entries().zip(va.entries()).fold(Complex::new(T::zero(), T::zero()), |s, (gz, az)| {
                            s + gz * az.conj()
                        });
                        acc(&mut grads, &nodes, *s, CMatrix::scalar(gs));
                    }
                }
                Op::AddConst(a) | Op::Reshape(a) | Op::Passthrough(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    acc(&mut grads, &nodes, *a, g.reshape(r, c));
                }
                Op::AbsSq(a) => {
                    let va = &nodes[*a].value;
                    let two = T::lit(2.0);
                    acc(&mut grads, &nodes, *a, va.zip_map(&g, |z, gz| z.scale(two * gz.re)));
                }
                Op::SumAll(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    let g0 = g.at(0);
                    acc(&mut grads, &nodes, *a, CMatrix::from_fn(r, c, |_, _| g0));
                }
                Op::Log2OnePlus(a) => {
                    let va = &nodes[*a].value;
                    let ln2 = T::LN_2();
                    acc(&mut grads, &nodes, *a, real_unary_grad(va, &g, |x| T::one() / ((T::one() + x) * ln2)));
                }
                Op::Sigmoid(a) => {
                    let out_re = val.re();
                    let mut d = CMatrix::zeros(val.rows(), val.cols());
                    for (k, dv) in d.re_mut().iter_mut().enumerate() {
                        let s = out_re[k];
                        *dv = g.re()[k] * s * (T::one() - s);
                    }
                    acc(&mut grads, &nodes, *a, d);
                }
                Op::Relu(a) => {
                    let va = &nodes[*a].value;
                    acc(&mut grads, &nodes, *a, real_unary_grad(va, &g, |x| if x > T::zero() { T::one() } else { T::zero() }));
                }
                Op::Abs(a) => {
                    let va = &nodes[*a].value;
                    acc(&mut grads, &nodes, *a, real_unary_grad(va, &g, |x| {
                        if x > T::zero() {
                            T::one()
                        } else if x < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        }
                    }));
                }
                Op::Div(a, b) => {
                    let (va, vb) = (&nodes[*a].value, &nodes[*b].value);
                    if nodes[*a].requires_grad {
                        let d = CMatrix::from_real(va.rows(), va.cols(), g.re().iter().zip(vb.re()).map(|(&gz, &bv)| gz / bv).collect());
                        acc(&mut grads, &nodes, *a, d);
                    }
                    if nodes[*b].requires_grad {
                        let d = CMatrix::from_real(
                            vb.rows(),
                            vb.cols(),
                            g.re()
                                .iter()
                                .zip(va.re())
                                .zip(vb.re())
                                .map(|((&gz, &av), &bv)| -gz * av / (bv * bv))
                                .collect(),
                        );
                        acc(&mut grads, &nodes, *b, d);
                    }
                }
                Op::Cis(a) => {
                    // out = cos θ + j sin θ; ∂f/∂θ = -Re(G) sin θ + Im(G) cos θ = -Re(G)·Im(out) + Im(G)·Re(out)
                    let d = CMatrix::from_real(
                        val.rows(),
                        val.cols(),
                        (0..val.len()).map(|k| -g.re()[k] * val.im()[k] + g.im()[k] * val.re()[k]).collect(),
                    );
                    acc(&mut grads, &nodes, *a, d);
                }
                Op::Norm(a) => {
                    let va = &nodes[*a].value;
                    let n = val.re()[0];
                    if n > T::zero() {
                        acc(&mut grads, &nodes, *a, va.scale_real(g.re()[0] / n));
                    } else {
                        let (r, c) = va.shape();
                        acc(&mut grads, &nodes, *a, CMatrix::zeros(r, c));
                    }
                }
                Op::BlockDiag(parts) => {
                    let (mut r, mut c) = (0, 0);
                    for &p in parts {
                        let (pr, pc) = nodes[p].value.shape();
                        if nodes[p].requires_grad {
                            acc(&mut grads, &nodes, p, g.block(r, c, pr, pc));
                        }
                        r += pr;
                        c += pc;
                    }
                }
                Op::Col(a, j) => {
                    let (r, c) = nodes[*a].value.shape();
                    let mut d = CMatrix::zeros(r, c);
                    for i in 0..r {
                        d.set(i, *j, g.at(i));
                    }
                    acc(&mut grads, &nodes, *a, d);
                }
                Op::Block(a, r0, c0) => {
                    let (r, c) = nodes[*a].value.shape();
                    let mut d = CMatrix::zeros(r, c);
                    d.set_block(*r0, *c0, &g);
                    acc(&mut grads, &nodes, *a, d);
                }
                Op::Entry(a, i, j) => {
                    let (r, c) = nodes[*a].value.shape();
                    let mut d = CMatrix::zeros(r, c);
                    d.set(*i, *j, g.at(0));
                    acc(&mut grads, &nodes, *a, d);
                }
                Op::Complexify(a) => {
                    let rows = val.rows();
                    let mut d = CMatrix::zeros(rows, 2);
                    for i in 0..rows {
                        d.re_mut()[2 * i] = g.re()[i];
                        d.re_mut()[2 * i + 1] = g.im()[i];
                    }
                    acc(&mut grads, &nodes, *a, d);
                }
                Op::AddRowBroadcast(a, bias) => {
                    if nodes[*a].requires_grad {
                        acc(&mut grads, &nodes, *a, g.clone());
                    }
                    if nodes[*bias].requires_grad {
                        let (r, c) = g.shape();
                        let mut d = CMatrix::zeros(1, c);
                        for i in 0..r {
                            for j in 0..c {
                                d.re_mut()[j] = d.re()[j] + g.re()[i * c + j];
                                d.im_mut()[j] = d.im()[j] + g.im()[i * c + j];
                            }
                        }
                        acc(&mut grads, &nodes, *bias, d);
                    }
                }
                Op::MirrorUpper(a) => {
                    let n = val.rows();
                    let mut d = CMatrix::zeros(n, n);
                    for i in 0..n {
                        for j in 0..n {
                            let (si, sj) = if i <= j { (i, j) } else { (j, i) };
                            let cur = d.get(si, sj);
                            d.set(si, sj, cur + g.get(i, j));
                        }
                    }
                    acc(&mut grads, &nodes, *a, d);
                }
                Op::ClampInward(a, side) => {
                    // descent moves by −g; keep g only where that re-enters the box
                    let mut d = CMatrix::from_real(g.rows(), g.cols(), g.re().to_vec());
                    for (k, &s) in side.iter().enumerate() {
                        let gk = d.re()[k];
                        if (s > 0 && gk < T::zero()) || (s < 0 && gk > T::zero()) {
                            d.re_mut()[k] = T::zero();
                        }
                    }
                    acc(&mut grads, &nodes, *a, d);
                }
                Op::Clamp(a, active) => {
                    let mut d = g.clone();
                    for (k, &on) in active.iter().enumerate() {
                        if !on {
                            d.re_mut()[k] = T::zero();
                            d.im_mut()[k] = T::zero();
                        }
                    }
                    acc(&mut grads, &nodes, *a, d);
                }
            }
            grads[idx] = Some(g);
        }
        grads
    }
}

fn real_unary_grad<T: Real>(input: &CMatrix<T>, g: &CMatrix<T>, deriv: impl Fn(T) -> T) -> CMatrix<T> {
    CMatrix::from_real(
        input.rows(),
        input.cols(),
        input.re().iter().zip(g.re()).map(|(&x, &gz)| gz * deriv(x)).collect(),
    )
}

/// Handle to a complex matrix recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct DiffMatrix<'t, T> {
    tape: &'t Tape<T>,
    index: usize,
}

impl<T: Real> fmt::Debug for DiffMatrix<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffMatrix")
            .field("tape_id", &self.index)
            .field("requires_grad", &self.requires_grad())
            .field("value", &*self.value_ref())
            .finish()
    }
}

impl<'t, T: Real> DiffMatrix<'t, T> {
    #[inline]
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    /// Node handle on the owning tape.
    #[inline]
    pub fn tape_id(&self) -> usize {
        self.index
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.rg(self.index)
    }

    pub fn value(&self) -> CMatrix<T> {
        self.tape.value_ref(self.index).clone()
    }

    pub fn value_ref(&self) -> Ref<'t, CMatrix<T>> {
        self.tape.value_ref(self.index)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value_ref().shape()
    }

    pub fn re(&self) -> Vec<T> {
        self.value_ref().re().to_vec()
    }

    pub fn im(&self) -> Vec<T> {
        self.value_ref().im().to_vec()
    }

    /// Real part of a `1x1` node.
    pub fn scalar(&self) -> T {
        self.value_ref().re()[0]
    }

    /// Same value, cut off from the graph.
    pub fn detach(&self) -> DiffMatrix<'t, T> {
        self.tape.constant(self.value())
    }

    fn same_tape(&self, other: &Self) {
        assert!(std::ptr::eq(self.tape, other.tape), "operands live on different tapes");
    }

    fn unary(&self, value: CMatrix<T>, op: Op<T>) -> Self {
        self.tape.push(value, op, self.requires_grad())
    }

    fn binary(&self, other: &Self, value: CMatrix<T>, op: Op<T>) -> Self {
        self.same_tape(other);
        let rg = self.requires_grad() || other.requires_grad();
        self.tape.push(value, op, rg)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        let v = self.value_ref().matmul(&rhs.value_ref());
        self.binary(rhs, v, Op::MatMul(self.index, rhs.index))
    }

    /// Element-wise product.
    pub fn hadamard(&self, rhs: &Self) -> Self {
        let v = self.value_ref().zip_map(&rhs.value_ref(), |a, b| a * b);
        self.binary(rhs, v, Op::Hadamard(self.index, rhs.index))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let v = self.value_ref().adjoint();
        self.unary(v, Op::Adjoint(self.index))
    }

    pub fn transpose(&self) -> Self {
        let v = self.value_ref().transpose();
        self.unary(v, Op::Transpose(self.index))
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        let v = self.value_ref().scale(c);
        self.unary(v, Op::ScaleComplex(self.index, c))
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(Complex::new(s, T::zero()))
    }

    /// Multiplies every entry by the `1x1` node `s`.
    pub fn scale_by(&self, s: &Self) -> Self {
        assert_eq!(s.shape(), (1, 1), "scale_by expects a 1x1 factor");
        let sv = s.value_ref().at(0);
        let v = self.value_ref().scale(sv);
        self.binary(s, v, Op::ScaleBy(self.index, s.index))
    }

    /// Adds a constant to every entry.
    pub fn add_const(&self, c: Complex<T>) -> Self {
        let v = self.value_ref().map(|z| z + c);
        self.unary(v, Op::AddConst(self.index))
    }

    pub fn add_real(&self, c: T) -> Self {
        self.add_const(Complex::new(c, T::zero()))
    }

    /// Element-wise `|z|²` (real result).
    pub fn abs_sq(&self) -> Self {
        let v = self.value_ref().map(|z| Complex::new(z.norm_sqr(), T::zero()));
        self.unary(v, Op::AbsSq(self.index))
    }

    /// Sum of all entries as a `1x1` node.
    pub fn sum(&self) -> Self {
        let s = self.value_ref().entries().fold(Complex::new(T::zero(), T::zero()), |a, b| a + b);
        self.unary(CMatrix::scalar(s), Op::SumAll(self.index))
    }

    /// Element-wise `log2(1 + x)` on the real plane, via `ln_1p`.
    pub fn log2_1p(&self) -> Self {
        let ln2 = T::LN_2();
        let v = real_map(&self.value_ref(), |x| x.ln_1p() / ln2);
        self.unary(v, Op::Log2OnePlus(self.index))
    }

    pub fn sigmoid(&self) -> Self {
        let v = real_map(&self.value_ref(), sigmoid);
        self.unary(v, Op::Sigmoid(self.index))
    }

    pub fn relu(&self) -> Self {
        let v = real_map(&self.value_ref(), |x| x.max(T::zero()));
        self.unary(v, Op::Relu(self.index))
    }

    pub fn abs(&self) -> Self {
        let v = real_map(&self.value_ref(), |x| x.abs());
        self.unary(v, Op::Abs(self.index))
    }

    /// Element-wise real division.
    pub fn div(&self, rhs: &Self) -> Self {
        let a = self.value_ref();
        let b = rhs.value_ref();
        assert_eq!(a.shape(), b.shape(), "div shape mismatch");
        let v = CMatrix::from_real(a.rows(), a.cols(), a.re().iter().zip(b.re()).map(|(&x, &y)| x / y).collect());
        drop((a, b));
        self.binary(rhs, v, Op::Div(self.index, rhs.index))
    }

    /// Element-wise `e^{jθ}` of a real phase matrix.
    pub fn cis(&self) -> Self {
        let v = {
            let a = self.value_ref();
            let (r, c) = a.shape();
            let (re, im): (Vec<T>, Vec<T>) = a.re().iter().map(|&t| (t.cos(), t.sin())).unzip();
            CMatrix::from_parts(r, c, re, im)
        };
        self.unary(v, Op::Cis(self.index))
    }

    /// Frobenius norm as a `1x1` real node. The derivative at zero is taken as zero.
    pub fn norm(&self) -> Self {
        let v = CMatrix::real_scalar(self.value_ref().frobenius_norm());
        self.unary(v, Op::Norm(self.index))
    }

    pub fn block_diag(blocks: &[Self]) -> Self {
        let first = blocks.first().expect("block_diag needs at least one block");
        for b in blocks {
            first.same_tape(b);
        }
        let vals: Vec<CMatrix<T>> = blocks.iter().map(|b| b.value()).collect();
        let rg = blocks.iter().any(|b| b.requires_grad());
        first
            .tape
            .push(CMatrix::block_diag(&vals), Op::BlockDiag(blocks.iter().map(|b| b.index).collect()), rg)
    }

    pub fn col(&self, j: usize) -> Self {
        let v = self.value_ref().col(j);
        self.unary(v, Op::Col(self.index, j))
    }

    /// Sub-matrix of size `rows x cols` starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let v = self.value_ref().block(r0, c0, rows, cols);
        self.unary(v, Op::Block(self.index, r0, c0))
    }

    pub fn entry(&self, i: usize, j: usize) -> Self {
        let v = CMatrix::scalar(self.value_ref().get(i, j));
        self.unary(v, Op::Entry(self.index, i, j))
    }

    /// Row-major reshape.
    pub fn reshape(&self, rows: usize, cols: usize) -> Self {
        let v = self.value_ref().reshape(rows, cols);
        self.unary(v, Op::Reshape(self.index))
    }

    /// `B x 2` real rows `(a, b)` become the `B x 1` complex column `a + jb`.
    pub fn complexify(&self) -> Self {
        let v = {
            let a = self.value_ref();
            assert_eq!(a.cols(), 2, "complexify expects two real columns");
            let rows = a.rows();
            let re = (0..rows).map(|i| a.re()[2 * i]).collect();
            let im = (0..rows).map(|i| a.re()[2 * i + 1]).collect();
            CMatrix::from_parts(rows, 1, re, im)
        };
        self.unary(v, Op::Complexify(self.index))
    }

    /// Adds the `1 x C` row `bias` to every row.
    pub fn add_row(&self, bias: &Self) -> Self {
        let v = {
            let a = self.value_ref();
            let b = bias.value_ref();
            assert_eq!(b.rows(), 1, "bias must be a single row");
            assert_eq!(a.cols(), b.cols(), "bias width mismatch");
            let c = a.cols();
            let mut out = a.clone();
            for i in 0..a.rows() {
                for j in 0..c {
                    out.re_mut()[i * c + j] = a.re()[i * c + j] + b.re()[j];
                    out.im_mut()[i * c + j] = a.im()[i * c + j] + b.im()[j];
                }
            }
            out
        };
        self.binary(bias, v, Op::AddRowBroadcast(self.index, bias.index))
    }

    /// Symmetric matrix built from the upper triangle (diagonal included).
    pub fn mirror_upper(&self) -> Self {
        let v = {
            let a = self.value_ref();
            assert_eq!(a.rows(), a.cols(), "mirror_upper expects a square matrix");
            CMatrix::from_fn(a.rows(), a.cols(), |i, j| if i <= j { a.get(i, j) } else { a.get(j, i) })
        };
        self.unary(v, Op::MirrorUpper(self.index))
    }

    /// Element-wise clamp of the real plane into `[lo_k, hi_k]`; gradient is
    /// zero where the bound is active.
    pub fn clamp(&self, lo: &[T], hi: &[T]) -> Self {
        let (v, active) = {
            let a = self.value_ref();
            assert_eq!(lo.len(), a.len());
            assert_eq!(hi.len(), a.len());
            let mut active = Vec::with_capacity(a.len());
            let re = a
                .re()
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    if x < lo[k] {
                        active.push(false);
                        lo[k]
                    } else if x > hi[k] {
                        active.push(false);
                        hi[k]
                    } else {
                        active.push(true);
                        x
                    }
                })
                .collect();
            (CMatrix::from_real(a.rows(), a.cols(), re), active)
        };
        self.unary(v, Op::Clamp(self.index, active))
    }

    /// Same forward pass as [`clamp`](Self::clamp). Backward, an entry held at
    /// a bound passes its gradient only when a descent step would move it back
    /// inside `[lo_k, hi_k]`; otherwise the gradient is blocked as in `clamp`.
    pub fn clamp_inward(&self, lo: &[T], hi: &[T]) -> Self {
        let (v, side) = {
            let a = self.value_ref();
            assert_eq!(lo.len(), a.len());
            assert_eq!(hi.len(), a.len());
            let mut side = Vec::with_capacity(a.len());
            let re = a
                .re()
                .iter()
                .enumerate()
                .map(|(k, &x)| {
                    if x < lo[k] {
                        side.push(-1);
                        lo[k]
                    } else if x > hi[k] {
                        side.push(1);
                        hi[k]
                    } else {
                        side.push(0);
                        x
                    }
                })
                .collect();
            (CMatrix::from_real(a.rows(), a.cols(), re), side)
        };
        self.unary(v, Op::ClampInward(self.index, side))
    }

    /// Wraps real phases into `[0, 2π)`. The shift is piecewise constant, so
    /// the gradient passes through unchanged.
    pub fn wrap_phase(&self) -> Self {
        let two_pi = T::TAU();
        let v = real_map(&self.value_ref(), |x| {
            let w = x - two_pi * (x / two_pi).floor();
            if w >= two_pi {
                w - two_pi
            } else {
                w
            }
        });
        self.unary(v, Op::Passthrough(self.index))
    }
}

fn real_map<T: Real>(a: &CMatrix<T>, f: impl Fn(T) -> T) -> CMatrix<T> {
    CMatrix::from_real(a.rows(), a.cols(), a.re().iter().map(|&x| f(x)).collect())
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<'t, T: Real> Add for DiffMatrix<'t, T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let v = self.value_ref().add(&rhs.value_ref());
        self.binary(&rhs, v, Op::Add(self.index, rhs.index))
    }
}

impl<'t, T: Real> Sub for DiffMatrix<'t, T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let v = self.value_ref().sub(&rhs.value_ref());
        self.binary(&rhs, v, Op::Sub(self.index, rhs.index))
    }
}

impl<'t, T: Real> Neg for DiffMatrix<'t, T> {
    type Output = Self;
    fn neg(self) -> Self {
        let v = self.value_ref().scale_real(-T::one());
        self.unary(v, Op::Neg(self.index))
    }
}

/// Element-wise product (same as [`DiffMatrix::hadamard`]).
impl<'t, T: Real> Mul for DiffMatrix<'t, T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.hadamard(&rhs)
    }
}
