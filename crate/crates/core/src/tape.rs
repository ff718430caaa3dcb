//! Tape-based reverse-mode automatic differentiation.
//!
//! Every primitive application is appended to a [`Tape`] together with its forward value.
//! [`Tape::backward`] walks the tape once in reverse order from a scalar root.
//!
//! Complex tensors carry gradients as pairs of real partials: the gradient of a complex
//! entry `z = a + ib` is stored as `(dL/da, dL/db)` in the same interleaved layout as the
//! value. Under that convention the adjoint of `y = x * r` is `g * conj(r)`.
//!
//! Leaves created with [`Tape::constant`] never receive gradients; dropout masks, noise
//! draws and data all enter the tape that way.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::fft::{self, spectrum_len};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Identifier of a differentiable primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Primitive {
    Add,
    Subtract,
    Multiply,
    ChannelLinear,
    ModeMultiply,
    FftReal,
    IfftReal,
    Gelu,
    TruncateModes,
    PadModes,
    ReduceSum,
    Sqrt,
    Norm,
    Softplus,
    Scale,
}

impl Primitive {
    pub const ALL: [Primitive; 15] = [
        Primitive::Add,
        Primitive::Subtract,
        Primitive::Multiply,
        Primitive::ChannelLinear,
        Primitive::ModeMultiply,
        Primitive::FftReal,
        Primitive::IfftReal,
        Primitive::Gelu,
        Primitive::TruncateModes,
        Primitive::PadModes,
        Primitive::ReduceSum,
        Primitive::Sqrt,
        Primitive::Norm,
        Primitive::Softplus,
        Primitive::Scale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Add => "add",
            Primitive::Subtract => "subtract",
            Primitive::Multiply => "multiply",
            Primitive::ChannelLinear => "channel_linear",
            Primitive::ModeMultiply => "mode_multiply",
            Primitive::FftReal => "fft_real",
            Primitive::IfftReal => "ifft_real",
            Primitive::Gelu => "gelu",
            Primitive::TruncateModes => "truncate_modes",
            Primitive::PadModes => "pad_modes",
            Primitive::ReduceSum => "reduce_sum",
            Primitive::Sqrt => "sqrt",
            Primitive::Norm => "norm",
            Primitive::Softplus => "softplus",
            Primitive::Scale => "scale",
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Primitive::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown primitive `{s}`")))
    }
}

/// A primitive together with its static parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op<T> {
    Add,
    Subtract,
    /// Elementwise product; complex operands multiply as complex numbers.
    Multiply,
    /// `y[o, n] = sum_i w[i, o] x[i, n] (+ b[o])`; inputs `[x, w]` or `[x, w, b]`.
    ChannelLinear,
    /// `y[o, k] = sum_i x[i, k] r[k, i, o]` on complex `(C_in, K)` modes.
    ModeMultiply,
    /// Real FFT along the last axis.
    FftReal,
    /// Inverse real FFT along the last axis to `n` samples.
    IfftReal { n: usize },
    /// Tanh-form GELU.
    Gelu,
    /// Keep the first `modes` bins of the last axis.
    TruncateModes { modes: usize },
    /// Zero-pad the last axis to `bins` entries.
    PadModes { bins: usize },
    ReduceSum,
    Sqrt,
    /// `sqrt(weight * sum of squares)` over every stored scalar.
    Norm { weight: T },
    Softplus,
    Scale { factor: T },
}

impl<T> Op<T> {
    pub fn primitive(&self) -> Primitive {
        match self {
            Op::Add => Primitive::Add,
            Op::Subtract => Primitive::Subtract,
            Op::Multiply => Primitive::Multiply,
            Op::ChannelLinear => Primitive::ChannelLinear,
            Op::ModeMultiply => Primitive::ModeMultiply,
            Op::FftReal => Primitive::FftReal,
            Op::IfftReal { .. } => Primitive::IfftReal,
            Op::Gelu => Primitive::Gelu,
            Op::TruncateModes { .. } => Primitive::TruncateModes,
            Op::PadModes { .. } => Primitive::PadModes,
            Op::ReduceSum => Primitive::ReduceSum,
            Op::Sqrt => Primitive::Sqrt,
            Op::Norm { .. } => Primitive::Norm,
            Op::Softplus => Primitive::Softplus,
            Op::Scale { .. } => Primitive::Scale,
        }
    }
}

#[derive(Debug, Clone)]
enum NodeKind<T> {
    Leaf,
    Op(Op<T>),
}

#[derive(Debug, Clone)]
struct Node<T> {
    kind: NodeKind<T>,
    inputs: Vec<NodeId>,
    value: Tensor<T>,
    requires_grad: bool,
}

/// Append-only record of a forward computation.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar root with respect to the leaves that require them.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient for `leaf`; `None` when the root does not depend on it.
    pub fn get(&self, leaf: NodeId) -> Option<&Tensor<T>> {
        self.grads.get(leaf.0).and_then(|g| g.as_ref())
    }

    /// Gradient for `leaf`, zeros when the root does not depend on it.
    pub fn get_or_zeros(&self, leaf: NodeId, like: &Tensor<T>) -> Tensor<T> {
        self.get(leaf).cloned().unwrap_or_else(|| like.zeros_like())
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

fn gelu<T: Scalar>(x: T) -> T {
    let u = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    T::lit(0.5) * x * (T::one() + u.tanh())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let u = T::lit(GELU_C) * (x + T::lit(GELU_A) * x * x * x);
    let t = u.tanh();
    let du = T::lit(GELU_C) * (T::one() + T::lit(3.0 * GELU_A) * x * x);
    T::lit(0.5) * (T::one() + t) + T::lit(0.5) * x * (T::one() - t * t) * du
}

pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

fn last_axis(t: &Tensor<impl Scalar>) -> Result<(usize, usize)> {
    let len = *t
        .shape()
        .last()
        .ok_or_else(|| Error::config("operation needs at least one axis"))?;
    let rows = t.numel().checked_div(len).unwrap_or(0);
    Ok((rows, len))
}

fn with_last<T: Scalar>(t: &Tensor<T>, len: usize) -> Vec<usize> {
    let mut s = t.shape().to_vec();
    *s.last_mut().expect("non-empty shape") = len;
    s
}

fn cx<T: Scalar>(d: &[T], i: usize) -> Complex<T> {
    Complex::new(d[2 * i], d[2 * i + 1])
}

fn accumulate<T: Scalar>(slot: &mut Option<Vec<T>>, add: Vec<T>) {
    match slot {
        Some(acc) => acc.iter_mut().zip(add).for_each(|(a, b)| *a += b),
        None => *slot = Some(add),
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            kind: NodeKind::Leaf,
            inputs: Vec::new(),
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A differentiable leaf (model parameter).
    pub fn param(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, true)
    }

    /// A leaf that never receives gradient (data, masks, noise).
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.leaf(value, false)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn primitive_of(&self, id: NodeId) -> Option<Primitive> {
        match &self.nodes[id.0].kind {
            NodeKind::Leaf => None,
            NodeKind::Op(op) => Some(op.primitive()),
        }
    }

    /// Computes the forward value of `op` on `inputs` and appends the node.
    pub fn record(&mut self, op: Op<T>, inputs: &[NodeId]) -> Result<NodeId> {
        if let Some(bad) = inputs.iter().find(|id| id.0 >= self.nodes.len()) {
            return Err(Error::config(format!("node {} is not on this tape", bad.0)));
        }
        let value = {
            let vals: Vec<&Tensor<T>> = inputs.iter().map(|id| &self.nodes[id.0].value).collect();
            forward(&op, &vals)?
        };
        let requires_grad = inputs.iter().any(|id| self.nodes[id.0].requires_grad);
        self.nodes.push(Node {
            kind: NodeKind::Op(op),
            inputs: inputs.to_vec(),
            value,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Subtract, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.record(Op::Multiply, &[a, b])
    }

    pub fn channel_linear(&mut self, x: NodeId, w: NodeId, bias: Option<NodeId>) -> Result<NodeId> {
        match bias {
            Some(b) => self.record(Op::ChannelLinear, &[x, w, b]),
            None => self.record(Op::ChannelLinear, &[x, w]),
        }
    }

    pub fn mode_multiply(&mut self, modes: NodeId, weights: NodeId) -> Result<NodeId> {
        self.record(Op::ModeMultiply, &[modes, weights])
    }

    pub fn fft_real(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::FftReal, &[x])
    }

    pub fn ifft_real(&mut self, x: NodeId, n: usize) -> Result<NodeId> {
        self.record(Op::IfftReal { n }, &[x])
    }

    pub fn gelu(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::Gelu, &[x])
    }

    pub fn truncate_modes(&mut self, x: NodeId, modes: usize) -> Result<NodeId> {
        self.record(Op::TruncateModes { modes }, &[x])
    }

    pub fn pad_modes(&mut self, x: NodeId, bins: usize) -> Result<NodeId> {
        self.record(Op::PadModes { bins }, &[x])
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::ReduceSum, &[x])
    }

    pub fn sqrt(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::Sqrt, &[x])
    }

    pub fn norm(&mut self, x: NodeId, weight: T) -> Result<NodeId> {
        self.record(Op::Norm { weight }, &[x])
    }

    pub fn softplus(&mut self, x: NodeId) -> Result<NodeId> {
        self.record(Op::Softplus, &[x])
    }

    pub fn scale(&mut self, x: NodeId, factor: T) -> Result<NodeId> {
        self.record(Op::Scale { factor }, &[x])
    }

    /// Sum of several same-shaped nodes.
    pub fn add_all(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        let (&first, rest) = terms
            .split_first()
            .ok_or_else(|| Error::config("add_all needs at least one term"))?;
        rest.iter().try_fold(first, |acc, &t| self.add(acc, t))
    }

    /// Reverse sweep from a scalar `root`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients<T>> {
        let root_value = &self
            .nodes
            .get(root.0)
            .ok_or_else(|| Error::config("root is not on this tape"))?
            .value;
        if root_value.is_complex() || root_value.numel() != 1 {
            return Err(Error::config(format!(
                "backward needs a real scalar root, got shape {:?}",
                root_value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![T::one()]);
        let mut out: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = None;
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            match &node.kind {
                NodeKind::Leaf => {
                    let t = if node.value.is_complex() {
                        Tensor::complex_from_interleaved(node.value.shape().to_vec(), g)?
                    } else {
                        Tensor::from_vec(node.value.shape().to_vec(), g)?
                    };
                    out[idx] = Some(t);
                }
                NodeKind::Op(op) => {
                    let inputs: Vec<&Tensor<T>> =
                        node.inputs.iter().map(|id| &self.nodes[id.0].value).collect();
                    let wants: Vec<bool> = node
                        .inputs
                        .iter()
                        .map(|id| self.nodes[id.0].requires_grad)
                        .collect();
                    let input_grads = backward_op(op, &inputs, &node.value, &g, &wants)?;
                    for ((id, want), ig) in node.inputs.iter().zip(&wants).zip(input_grads) {
                        if let (true, Some(ig)) = (*want, ig) {
                            accumulate(&mut grads[id.0], ig);
                        }
                    }
                }
            }
        }
        Ok(Gradients { grads: out })
    }
}

fn same_layout<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<()> {
    if !a.same_layout(b) {
        return Err(Error::config(format!(
            "{what}: operand layouts differ ({:?}{} vs {:?}{})",
            a.shape(),
            if a.is_complex() { " complex" } else { "" },
            b.shape(),
            if b.is_complex() { " complex" } else { "" },
        )));
    }
    Ok(())
}

fn require_real<T: Scalar>(t: &Tensor<T>, what: &str) -> Result<()> {
    if t.is_complex() {
        return Err(Error::config(format!("{what} needs a real operand")));
    }
    Ok(())
}

fn arity(inputs: &[&Tensor<impl Scalar>], allowed: &[usize], what: &str) -> Result<()> {
    if !allowed.contains(&inputs.len()) {
        return Err(Error::config(format!(
            "{what} takes {allowed:?} inputs, got {}",
            inputs.len()
        )));
    }
    Ok(())
}

fn elementwise<T: Scalar>(x: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    x.map(f)
}

fn forward<T: Scalar>(op: &Op<T>, inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let name = op.primitive().name();
    match *op {
        Op::Add | Op::Subtract => {
            arity(inputs, &[2], name)?;
            let (a, b) = (inputs[0], inputs[1]);
            same_layout(a, b, name)?;
            let sign = if matches!(op, Op::Add) { T::one() } else { -T::one() };
            let mut out = a.clone();
            out.data_mut()
                .iter_mut()
                .zip(b.data())
                .for_each(|(o, &v)| *o += sign * v);
            Ok(out)
        }
        Op::Multiply => {
            arity(inputs, &[2], name)?;
            let (a, b) = (inputs[0], inputs[1]);
            same_layout(a, b, name)?;
            let mut out = a.clone();
            if a.is_complex() {
                let bd = b.data();
                for (i, pair) in out.data_mut().chunks_exact_mut(2).enumerate() {
                    let z = Complex::new(pair[0], pair[1]) * cx(bd, i);
                    pair[0] = z.re;
                    pair[1] = z.im;
                }
            } else {
                out.data_mut().iter_mut().zip(b.data()).for_each(|(o, &v)| *o *= v);
            }
            Ok(out)
        }
        Op::ChannelLinear => {
            arity(inputs, &[2, 3], name)?;
            let (x, w) = (inputs[0], inputs[1]);
            require_real(x, name)?;
            require_real(w, name)?;
            if x.ndim() != 2 || w.ndim() != 2 || w.shape()[0] != x.shape()[0] {
                return Err(Error::config(format!(
                    "channel_linear: input {:?} incompatible with matrix {:?}",
                    x.shape(),
                    w.shape()
                )));
            }
            let (cin, n) = (x.shape()[0], x.shape()[1]);
            let cout = w.shape()[1];
            let mut y = vec![T::zero(); cout * n];
            if let Some(b) = inputs.get(2) {
                b.expect_layout(&[cout], false, "channel_linear bias")?;
                for o in 0..cout {
                    y[o * n..(o + 1) * n].fill(b.data()[o]);
                }
            }
            let (xd, wd) = (x.data(), w.data());
            for o in 0..cout {
                let yr = &mut y[o * n..(o + 1) * n];
                for i in 0..cin {
                    let wio = wd[i * cout + o];
                    let xr = &xd[i * n..(i + 1) * n];
                    yr.iter_mut().zip(xr).for_each(|(a, &b)| *a += wio * b);
                }
            }
            Tensor::from_vec(vec![cout, n], y)
        }
        Op::ModeMultiply => {
            arity(inputs, &[2], name)?;
            let (x, r) = (inputs[0], inputs[1]);
            if !x.is_complex() || !r.is_complex() || x.ndim() != 2 || r.ndim() != 3 {
                return Err(Error::config(
                    "mode_multiply needs complex (C_in, K) modes and (K, C_in, C_out) weights",
                ));
            }
            let (cin, k) = (x.shape()[0], x.shape()[1]);
            if r.shape()[0] != k || r.shape()[1] != cin {
                return Err(Error::config(format!(
                    "mode_multiply: modes {:?} incompatible with weights {:?}",
                    x.shape(),
                    r.shape()
                )));
            }
            let cout = r.shape()[2];
            let (xd, rd) = (x.data(), r.data());
            let mut y = vec![Complex::new(T::zero(), T::zero()); cout * k];
            for m in 0..k {
                for i in 0..cin {
                    let xv = cx(xd, i * k + m);
                    let base = (m * cin + i) * cout;
                    for o in 0..cout {
                        y[o * k + m] += xv * cx(rd, base + o);
                    }
                }
            }
            Tensor::complex_from_values(vec![cout, k], &y)
        }
        Op::FftReal => {
            arity(inputs, &[1], name)?;
            let x = inputs[0];
            require_real(x, name)?;
            let (rows, n) = last_axis(x)?;
            let plan = fft::plan::<T>(n)?;
            let bins = spectrum_len(n);
            let mut out = vec![Complex::new(T::zero(), T::zero()); rows * bins];
            for r in 0..rows {
                plan.forward(&x.data()[r * n..(r + 1) * n], &mut out[r * bins..(r + 1) * bins]);
            }
            Tensor::complex_from_values(with_last(x, bins), &out)
        }
        Op::IfftReal { n } => {
            arity(inputs, &[1], name)?;
            let x = inputs[0];
            let (rows, bins) = last_axis(x)?;
            fft::validate_len(n)?;
            if !x.is_complex() || bins != spectrum_len(n) {
                return Err(Error::config(format!(
                    "ifft_real: {bins} bins inconsistent with signal length {n}"
                )));
            }
            let plan = fft::plan::<T>(n)?;
            let spec = x.complex_values();
            let mut out = vec![T::zero(); rows * n];
            for r in 0..rows {
                plan.inverse(&spec[r * bins..(r + 1) * bins], &mut out[r * n..(r + 1) * n]);
            }
            Tensor::from_vec(with_last(x, n), out)
        }
        Op::Gelu => {
            arity(inputs, &[1], name)?;
            require_real(inputs[0], name)?;
            Ok(elementwise(inputs[0], gelu))
        }
        Op::Softplus => {
            arity(inputs, &[1], name)?;
            require_real(inputs[0], name)?;
            Ok(elementwise(inputs[0], softplus))
        }
        Op::Sqrt => {
            arity(inputs, &[1], name)?;
            require_real(inputs[0], name)?;
            Ok(elementwise(inputs[0], |v| v.sqrt()))
        }
        Op::Scale { factor } => {
            arity(inputs, &[1], name)?;
            Ok(elementwise(inputs[0], |v| v * factor))
        }
        Op::TruncateModes { modes } | Op::PadModes { bins: modes } => {
            arity(inputs, &[1], name)?;
            let x = inputs[0];
            let (rows, len) = last_axis(x)?;
            let truncate = matches!(op, Op::TruncateModes { .. });
            if !x.is_complex() || (truncate && modes > len) || (!truncate && modes < len) {
                return Err(Error::config(format!(
                    "{name}: cannot map {len} complex bins to {modes}"
                )));
            }
            let keep = len.min(modes);
            let src = x.data();
            let mut out = vec![T::zero(); 2 * rows * modes];
            for r in 0..rows {
                out[2 * r * modes..2 * (r * modes + keep)]
                    .copy_from_slice(&src[2 * r * len..2 * (r * len + keep)]);
            }
            Tensor::complex_from_interleaved(with_last(x, modes), out)
        }
        Op::ReduceSum => {
            arity(inputs, &[1], name)?;
            require_real(inputs[0], name)?;
            Ok(Tensor::scalar(inputs[0].data().iter().copied().sum()))
        }
        Op::Norm { weight } => {
            arity(inputs, &[1], name)?;
            let ss: T = inputs[0].data().iter().map(|&v| v * v).sum();
            Ok(Tensor::scalar((weight * ss).sqrt()))
        }
    }
}

type InputGrads<T> = Vec<Option<Vec<T>>>;

fn backward_op<T: Scalar>(
    op: &Op<T>,
    inputs: &[&Tensor<T>],
    output: &Tensor<T>,
    g: &[T],
    wants: &[bool],
) -> Result<InputGrads<T>> {
    let mut res: InputGrads<T> = vec![None; inputs.len()];
    match *op {
        Op::Add => {
            res[0] = Some(g.to_vec());
            res[1] = Some(g.to_vec());
        }
        Op::Subtract => {
            res[0] = Some(g.to_vec());
            res[1] = Some(g.iter().map(|&v| -v).collect());
        }
        Op::Multiply => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.is_complex() {
                let prod = |other: &Tensor<T>| -> Vec<T> {
                    let od = other.data();
                    (0..g.len() / 2)
                        .flat_map(|i| {
                            let z = cx(g, i) * cx(od, i).conj();
                            [z.re, z.im]
                        })
                        .collect()
                };
                if wants[0] {
                    res[0] = Some(prod(b));
                }
                if wants[1] {
                    res[1] = Some(prod(a));
                }
            } else {
                if wants[0] {
                    res[0] = Some(g.iter().zip(b.data()).map(|(&u, &v)| u * v).collect());
                }
                if wants[1] {
                    res[1] = Some(g.iter().zip(a.data()).map(|(&u, &v)| u * v).collect());
                }
            }
        }
        Op::ChannelLinear => {
            let (x, w) = (inputs[0], inputs[1]);
            let (cin, n) = (x.shape()[0], x.shape()[1]);
            let cout = w.shape()[1];
            let (xd, wd) = (x.data(), w.data());
            if wants[0] {
                let mut gx = vec![T::zero(); cin * n];
                for i in 0..cin {
                    let gxr = &mut gx[i * n..(i + 1) * n];
                    for o in 0..cout {
                        let wio = wd[i * cout + o];
                        gxr.iter_mut()
                            .zip(&g[o * n..(o + 1) * n])
                            .for_each(|(a, &b)| *a += wio * b);
                    }
                }
                res[0] = Some(gx);
            }
            if wants[1] {
                let mut gw = vec![T::zero(); cin * cout];
                for i in 0..cin {
                    let xr = &xd[i * n..(i + 1) * n];
                    for o in 0..cout {
                        gw[i * cout + o] = xr
                            .iter()
                            .zip(&g[o * n..(o + 1) * n])
                            .map(|(&a, &b)| a * b)
                            .sum();
                    }
                }
                res[1] = Some(gw);
            }
            if inputs.len() == 3 && wants[2] {
                res[2] = Some((0..cout).map(|o| g[o * n..(o + 1) * n].iter().copied().sum()).collect());
            }
        }
        Op::ModeMultiply => {
            let (x, r) = (inputs[0], inputs[1]);
            let (cin, k) = (x.shape()[0], x.shape()[1]);
            let cout = r.shape()[2];
            let (xd, rd) = (x.data(), r.data());
            if wants[0] {
                let mut gx = vec![T::zero(); 2 * cin * k];
                for m in 0..k {
                    for i in 0..cin {
                        let base = (m * cin + i) * cout;
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for o in 0..cout {
                            acc += cx(g, o * k + m) * cx(rd, base + o).conj();
                        }
                        gx[2 * (i * k + m)] = acc.re;
                        gx[2 * (i * k + m) + 1] = acc.im;
                    }
                }
                res[0] = Some(gx);
            }
            if wants[1] {
                let mut gr = vec![T::zero(); 2 * k * cin * cout];
                for m in 0..k {
                    for i in 0..cin {
                        let xc = cx(xd, i * k + m).conj();
                        let base = (m * cin + i) * cout;
                        for o in 0..cout {
                            let z = cx(g, o * k + m) * xc;
                            gr[2 * (base + o)] = z.re;
                            gr[2 * (base + o) + 1] = z.im;
                        }
                    }
                }
                res[1] = Some(gr);
            }
        }
        Op::FftReal => {
            // dL/dx_n = sum_k Re(g_k exp(+2 pi i k n / N)): an inverse FFT of the scaled pairs.
            let x = inputs[0];
            let (rows, n) = last_axis(x)?;
            let bins = spectrum_len(n);
            let plan = fft::plan::<T>(n)?;
            let nt = T::from_usize_lossy(n);
            let mut gx = vec![T::zero(); rows * n];
            let mut spec = vec![Complex::new(T::zero(), T::zero()); bins];
            for r in 0..rows {
                for (k, s) in spec.iter_mut().enumerate() {
                    let c = if k == 0 || k == bins - 1 { nt } else { nt * T::lit(0.5) };
                    *s = cx(g, r * bins + k) * c;
                }
                plan.inverse(&spec, &mut gx[r * n..(r + 1) * n]);
            }
            res[0] = Some(gx);
        }
        Op::IfftReal { n } => {
            // dL/dY_k = (c_k / N) FFT(g)_k with c_k = 1 at DC and Nyquist, 2 elsewhere.
            let bins = spectrum_len(n);
            let rows = output.numel() / n;
            let plan = fft::plan::<T>(n)?;
            let nt = T::from_usize_lossy(n);
            let mut spec = vec![Complex::new(T::zero(), T::zero()); bins];
            let mut gy = vec![T::zero(); 2 * rows * bins];
            for r in 0..rows {
                plan.forward(&g[r * n..(r + 1) * n], &mut spec);
                for (k, z) in spec.iter().enumerate() {
                    let c = if k == 0 || k == bins - 1 { T::one() } else { T::lit(2.0) } / nt;
                    let idx = 2 * (r * bins + k);
                    gy[idx] = z.re * c;
                    gy[idx + 1] = if k == 0 || k == bins - 1 { T::zero() } else { z.im * c };
                }
            }
            res[0] = Some(gy);
        }
        Op::Gelu => {
            res[0] = Some(g.iter().zip(inputs[0].data()).map(|(&u, &x)| u * gelu_grad(x)).collect());
        }
        Op::Softplus => {
            res[0] = Some(g.iter().zip(inputs[0].data()).map(|(&u, &x)| u * sigmoid(x)).collect());
        }
        Op::Sqrt => {
            res[0] = Some(
                g.iter()
                    .zip(output.data())
                    .map(|(&u, &y)| if y > T::zero() { u / (T::lit(2.0) * y) } else { T::zero() })
                    .collect(),
            );
        }
        Op::Scale { factor } => {
            res[0] = Some(g.iter().map(|&u| u * factor).collect());
        }
        Op::TruncateModes { modes } | Op::PadModes { bins: modes } => {
            let x = inputs[0];
            let (rows, len) = last_axis(x)?;
            let keep = len.min(modes);
            let mut gx = vec![T::zero(); 2 * rows * len];
            for r in 0..rows {
                gx[2 * r * len..2 * (r * len + keep)]
                    .copy_from_slice(&g[2 * r * modes..2 * (r * modes + keep)]);
            }
            res[0] = Some(gx);
        }
        Op::ReduceSum => {
            res[0] = Some(vec![g[0]; inputs[0].data().len()]);
        }
        Op::Norm { weight } => {
            let y = output.data()[0];
            let s = if y > T::zero() { g[0] * weight / y } else { T::zero() };
            res[0] = Some(inputs[0].data().iter().map(|&v| v * s).collect());
        }
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, v: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn add_forward() {
        let mut tape = Tape::new();
        let a = tape.constant(t(vec![2], &[1.0, 2.0]));
        let b = tape.constant(t(vec![2], &[3.0, 4.0]));
        let c = tape.add(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[4.0, 6.0]);
    }

    #[test]
    fn channel_linear_identity_is_noop() {
        let mut tape = Tape::new();
        let x = tape.constant(t(vec![2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let w = tape.constant(t(vec![2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let y = tape.channel_linear(x, w, None).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
    }

    #[test]
    fn softplus_at_zero_is_ln2() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(0.0));
        let y = tape.softplus(x).unwrap();
        assert!((tape.value(y).item().unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!((softplus(800.0f64) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0f64) >= 0.0);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(t(vec![3], &[1.0, 2.0, 3.0]));
        let sq = tape.mul(x, x).unwrap();
        let root = tape.sum(sq).unwrap();
        let grads = tape.backward(root).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(t(vec![2], &[1.0, 2.0]));
        let mask = tape.constant(t(vec![2], &[0.0, 2.0]));
        let y = tape.mul(x, mask).unwrap();
        let root = tape.sum(y).unwrap();
        let grads = tape.backward(root).unwrap();
        assert!(grads.get(mask).is_none());
        assert_eq!(grads.get(x).unwrap().data(), &[0.0, 2.0]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(t(vec![2], &[1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_primitive_name_is_rejected() {
        assert!(matches!("conv2d".parse::<Primitive>(), Err(Error::Config(_))));
        for p in Primitive::ALL {
            assert_eq!(p.name().parse::<Primitive>().unwrap(), p);
        }
    }

    #[test]
    fn shape_mismatch_is_configuration_error() {
        let mut tape = Tape::new();
        let a = tape.constant(t(vec![2], &[1.0, 2.0]));
        let b = tape.constant(t(vec![3], &[1.0, 2.0, 3.0]));
        assert!(matches!(tape.add(a, b), Err(Error::Config(_))));
    }

    #[test]
    fn reused_node_accumulates_gradient() {
        // y = x + x + x
        let mut tape = Tape::new();
        let x = tape.param(t(vec![1], &[5.0]));
        let y = tape.add_all(&[x, x, x]).unwrap();
        let root = tape.sum(y).unwrap();
        assert_eq!(tape.backward(root).unwrap().get(x).unwrap().data(), &[3.0]);
    }
}
