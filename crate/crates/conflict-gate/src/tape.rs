//! Scalar reverse-mode automatic differentiation on a Wengert tape.
//!
//! Operations are recorded into an append-only arena during the forward
//! pass; [`Tape::backward`] replays the arena in reverse, accumulating
//! adjoints through the stored local partials. Node indices are
//! topologically ordered by construction (an operation can only consume
//! already-existing nodes), so the reverse sweep is a single linear pass.
//!
//! The tape is rebuilt from scratch every training step; [`Tape::clear`]
//! keeps the allocated capacity.

use crate::error::{Error, Result};

/// Denominators smaller than this are rejected rather than propagated as
/// near-infinities.
pub const DIV_GUARD: f64 = 1e-12;

const NONE: u32 = u32::MAX;

/// Handle to a node on a specific [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Operation tag of a recorded node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Var,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Square,
    Tanh,
    Sigmoid,
    Relu,
    Ln,
    Exp,
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Append-only computation graph. Single writer; `backward` is read-only.
#[derive(Debug, Default)]
pub struct Tape {
    values: Vec<f64>,
    ops: Vec<Op>,
    // Up to two parent indices per node; NONE marks an absent slot.
    inputs: Vec<[u32; 2]>,
    // Analytic derivatives of the op w.r.t. its inputs at the recorded values.
    partials: Vec<[f64; 2]>,
    // Independent variables in creation order; backward reports over these.
    leaves: Vec<u32>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Tape {
            values: Vec::with_capacity(nodes),
            ops: Vec::with_capacity(nodes),
            inputs: Vec::with_capacity(nodes),
            partials: Vec::with_capacity(nodes),
            leaves: Vec::new(),
        }
    }

    /// Drops all nodes, keeping allocations for reuse.
    pub fn clear(&mut self) {
        self.values.clear();
        self.ops.clear();
        self.inputs.clear();
        self.partials.clear();
        self.leaves.clear();
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    #[inline]
    pub fn value(&self, n: NodeId) -> f64 {
        self.values[n.index()]
    }

    pub fn op(&self, n: NodeId) -> Op {
        self.ops[n.index()]
    }

    #[inline]
    fn push(&mut self, op: Op, value: f64, inputs: [u32; 2], partials: [f64; 2]) -> NodeId {
        let id = self.values.len() as u32;
        self.values.push(value);
        self.ops.push(op);
        self.inputs.push(inputs);
        self.partials.push(partials);
        NodeId(id)
    }

    /// New independent variable (leaf). Distinct calls create distinct leaves.
    pub fn var(&mut self, value: f64) -> NodeId {
        let id = self.push(Op::Var, value, [NONE, NONE], [0.0, 0.0]);
        self.leaves.push(id.0);
        id
    }

    /// Registers a slice of values as consecutive leaves.
    pub fn vars(&mut self, values: &[f64]) -> Vec<NodeId> {
        values.iter().map(|&v| self.var(v)).collect()
    }

    /// Constant node: participates in the graph but not in the gradient.
    pub fn constant(&mut self, value: f64) -> NodeId {
        self.push(Op::Const, value, [NONE, NONE], [0.0, 0.0])
    }

    #[inline]
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.values[a.index()] + self.values[b.index()];
        self.push(Op::Add, v, [a.0, b.0], [1.0, 1.0])
    }

    #[inline]
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.values[a.index()] - self.values[b.index()];
        self.push(Op::Sub, v, [a.0, b.0], [1.0, -1.0])
    }

    #[inline]
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.values[a.index()];
        let vb = self.values[b.index()];
        self.push(Op::Mul, va * vb, [a.0, b.0], [vb, va])
    }

    /// Fails on a near-zero denominator instead of producing an infinity.
    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let va = self.values[a.index()];
        let vb = self.values[b.index()];
        if vb.abs() <= DIV_GUARD {
            return Err(Error::Domain(format!("division by near-zero ({vb:e})")));
        }
        Ok(self.push(Op::Div, va / vb, [a.0, b.0], [1.0 / vb, -va / (vb * vb)]))
    }

    pub fn neg(&mut self, a: NodeId) -> NodeId {
        let v = -self.values[a.index()];
        self.push(Op::Neg, v, [a.0, NONE], [-1.0, 0.0])
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let va = self.values[a.index()];
        self.push(Op::Square, va * va, [a.0, NONE], [2.0 * va, 0.0])
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let t = self.values[a.index()].tanh();
        self.push(Op::Tanh, t, [a.0, NONE], [1.0 - t * t, 0.0])
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let s = sigmoid(self.values[a.index()]);
        self.push(Op::Sigmoid, s, [a.0, NONE], [s * (1.0 - s), 0.0])
    }

    /// `max(x, 0)`. The partial at exactly 0 is defined as 0, so an
    /// inactive penalty contributes nothing at the boundary.
    #[inline]
    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let va = self.values[a.index()];
        let (v, p) = if va > 0.0 { (va, 1.0) } else { (0.0, 0.0) };
        self.push(Op::Relu, v, [a.0, NONE], [p, 0.0])
    }

    /// Alias for [`Tape::relu`].
    pub fn max0(&mut self, a: NodeId) -> NodeId {
        self.relu(a)
    }

    pub fn ln(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.values[a.index()];
        if va <= 0.0 {
            return Err(Error::Domain(format!("ln of non-positive value ({va:e})")));
        }
        Ok(self.push(Op::Ln, va.ln(), [a.0, NONE], [1.0 / va, 0.0]))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let e = self.values[a.index()].exp();
        self.push(Op::Exp, e, [a.0, NONE], [e, 0.0])
    }

    /// Sequential sum of a non-empty slice of nodes.
    pub fn sum(&mut self, nodes: &[NodeId]) -> NodeId {
        assert!(!nodes.is_empty(), "sum of zero nodes");
        let mut acc = nodes[0];
        for &n in &nodes[1..] {
            acc = self.add(acc, n);
        }
        acc
    }

    /// Reverse sweep from `root`; returns the gradient over all leaves in
    /// creation order. Read-only: repeated calls return identical vectors.
    pub fn backward(&self, root: NodeId) -> Vec<f64> {
        let r = root.index();
        assert!(r < self.values.len(), "root not on this tape");
        let mut adjoint = vec![0.0; r + 1];
        adjoint[r] = 1.0;
        for idx in (0..=r).rev() {
            let a = adjoint[idx];
            if a == 0.0 {
                continue;
            }
            let [i0, i1] = self.inputs[idx];
            if i0 != NONE {
                let p = self.partials[idx];
                adjoint[i0 as usize] += a * p[0];
                if i1 != NONE {
                    adjoint[i1 as usize] += a * p[1];
                }
            }
        }
        self.leaves
            .iter()
            .map(|&l| if (l as usize) <= r { adjoint[l as usize] } else { 0.0 })
            .collect()
    }
}
