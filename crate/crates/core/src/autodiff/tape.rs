//! A scalar reverse-mode tape used to assemble losses from jet entries.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug)]
struct Node {
    lhs: u32,
    d_lhs: f64,
    rhs: u32,
    d_rhs: f64,
}

/// Records every operation on its [`Var`]s so that one reverse sweep yields
/// the derivative of a result with respect to every recorded node.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// A scalar living on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: u32,
    value: f64,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, lhs: u32, d_lhs: f64, rhs: u32, d_rhs: f64) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let index = u32::try_from(nodes.len()).expect("tape exceeds u32 nodes");
        nodes.push(Node { lhs, d_lhs, rhs, d_rhs });
        index
    }

    /// An independent input.
    pub fn var(&self, value: f64) -> Var<'_> {
        Var { tape: self, index: self.push(NONE, 0.0, NONE, 0.0), value }
    }

    /// A value the result should not be differentiated through.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.var(value)
    }

    /// Records `values.len()` consecutive inputs and returns the first index.
    pub(crate) fn leaves(&self, values: usize) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        let start = u32::try_from(nodes.len()).expect("tape exceeds u32 nodes");
        let leaf = Node { lhs: NONE, d_lhs: 0.0, rhs: NONE, d_rhs: 0.0 };
        let end = nodes.len() + values;
        nodes.resize(end, leaf);
        start
    }

    pub(crate) fn at(&self, index: u32, value: f64) -> Var<'_> {
        Var { tape: self, index, value }
    }

    pub fn sum<'t>(&'t self, terms: impl IntoIterator<Item = Var<'t>>) -> Var<'t> {
        terms.into_iter().fold(self.constant(0.0), |acc, t| acc + t)
    }

    /// Adjoint of every node with respect to `output`.
    pub fn gradient(&self, output: Var<'_>) -> Vec<f64> {
        assert!(std::ptr::eq(self, output.tape), "variable belongs to another tape");
        let nodes = self.nodes.borrow();
        let mut adj = vec![0.0; nodes.len()];
        adj[output.index as usize] = 1.0;
        for i in (0..=output.index as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let node = nodes[i];
            if node.lhs != NONE {
                adj[node.lhs as usize] += a * node.d_lhs;
            }
            if node.rhs != NONE {
                adj[node.rhs as usize] += a * node.d_rhs;
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index as usize
    }

    fn unary(self, value: f64, d: f64) -> Self {
        Var { tape: self.tape, index: self.tape.push(self.index, d, NONE, 0.0), value }
    }

    fn binary(self, other: Self, value: f64, d_self: f64, d_other: f64) -> Self {
        assert!(std::ptr::eq(self.tape, other.tape), "variables belong to different tapes");
        Var { tape: self.tape, index: self.tape.push(self.index, d_self, other.index, d_other), value }
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }

    pub fn square(self) -> Self {
        self.unary(self.value * self.value, 2.0 * self.value)
    }

    /// `|x|`, with derivative 0 at the kink.
    pub fn abs(self) -> Self {
        let d = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.unary(self.value.abs(), d)
    }

    /// Same value, cut off from the tape.
    pub fn detach(self) -> Self {
        self.tape.constant(self.value)
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: Self) -> Self {
        self.binary(o, self.value + o.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: Self) -> Self {
        self.binary(o, self.value - o.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: Self) -> Self {
        self.binary(o, self.value * o.value, o.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: Self) -> Self {
        let q = self.value / o.value;
        self.binary(o, q, 1.0 / o.value, -q / o.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, o: f64) -> Self {
        self.unary(self.value + o, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, o: f64) -> Self {
        self.unary(self.value - o, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, o: f64) -> Self {
        self.unary(self.value * o, o)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Var<'t>;
    fn div(self, o: f64) -> Self {
        self.unary(self.value / o, 1.0 / o)
    }
}

impl<'t> Mul<Var<'t>> for f64 {
    type Output = Var<'t>;
    fn mul(self, v: Var<'t>) -> Var<'t> {
        v * self
    }
}
