//! Minimal reverse-mode autodiff over `ndarray` tensors.
//!
//! A [`Tape`] records a forward computation as a flat list of nodes in
//! topological order; [`Tape::backward`] replays it in reverse and returns
//! per-node gradients. One tape lives for exactly one forward/backward pass,
//! so there is no graph bookkeeping beyond the node list itself.
//!
//! Everything is generic over [`Element`] (`f32` in production, `f64` for
//! finite-difference verification).

mod conv;
mod norm;
mod ops;

pub mod gradcheck;

use ndarray::{ArrayD, IxDyn, LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssign};
use std::fmt::Debug;

/// Scalar element type the engine runs on.
pub trait Element:
    Float + NumAssign + ScalarOperand + LinalgScalar + Debug + Send + Sync + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Element for f32 {
    fn from_f64(v: f64) -> f32 {
        v as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Element for f64 {
    fn from_f64(v: f64) -> f64 {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Handle to a node on a [`Tape`]. Only valid for the tape that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

type BackFn<T> = Box<dyn Fn(&Tape<T>, &ArrayD<T>) -> Vec<Option<ArrayD<T>>>>;

struct Node<T: Element> {
    value: ArrayD<T>,
    parents: Vec<usize>,
    needs_grad: bool,
    backward: Option<BackFn<T>>,
}

/// Recorded forward computation.
pub struct Tape<T: Element> {
    nodes: Vec<Node<T>>,
}

/// Gradients of one scalar root with respect to every tape node that needed them.
pub struct Gradients<T: Element> {
    grads: Vec<Option<ArrayD<T>>>,
}

impl<T: Element> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&ArrayD<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<ArrayD<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

impl<T: Element> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Push a leaf. `requires_grad` marks trainable parameters; constants
    /// (inputs, detached values) pass `false` so backward prunes their subtrees.
    pub fn leaf(&mut self, value: ArrayD<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            parents: Vec::new(),
            needs_grad: requires_grad,
            backward: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: ArrayD<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn scalar(&mut self, v: T) -> Var {
        self.constant(ArrayD::from_elem(IxDyn(&[]), v))
    }

    /// Re-enter a value as a gradient-free leaf.
    pub fn detach(&mut self, x: Var) -> Var {
        let v = self.value(x).clone();
        self.constant(v)
    }

    pub fn value(&self, v: Var) -> &ArrayD<T> {
        &self.nodes[v.0].value
    }

    pub fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Value of a 0-dim (scalar) node.
    pub fn scalar_value(&self, v: Var) -> T {
        let a = self.value(v);
        debug_assert_eq!(a.ndim(), 0, "scalar_value on non-scalar node");
        *a.first().expect("empty tensor")
    }

    pub(crate) fn push(
        &mut self,
        value: ArrayD<T>,
        parents: Vec<usize>,
        backward: BackFn<T>,
    ) -> Var {
        let needs_grad = parents.iter().any(|&p| self.nodes[p].needs_grad);
        self.nodes.push(Node {
            value,
            parents,
            needs_grad,
            backward: if needs_grad { Some(backward) } else { None },
        });
        Var(self.nodes.len() - 1)
    }

    /// Index the next node will get; lets op builders capture their own output id.
    pub(crate) fn next_id(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn parent_needs(&self, parents: &[usize]) -> Vec<bool> {
        parents.iter().map(|&p| self.nodes[p].needs_grad).collect()
    }

    /// Reverse sweep from a scalar `root`. Nodes whose subtree holds no
    /// gradient-requiring leaf are skipped entirely.
    pub fn backward(&self, root: Var) -> Gradients<T> {
        assert_eq!(
            self.nodes[root.0].value.ndim(),
            0,
            "backward root must be scalar"
        );
        let mut grads: Vec<Option<ArrayD<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        if !self.nodes[root.0].needs_grad {
            return Gradients { grads };
        }
        grads[root.0] = Some(ArrayD::from_elem(IxDyn(&[]), T::one()));
        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if let Some(back) = &self.nodes[i].backward {
                let pgrads = back(self, &g);
                debug_assert_eq!(pgrads.len(), self.nodes[i].parents.len());
                for (&p, pg) in self.nodes[i].parents.iter().zip(pgrads) {
                    if let Some(pg) = pg {
                        debug_assert_eq!(pg.shape(), self.nodes[p].value.shape());
                        match &mut grads[p] {
                            Some(acc) => *acc += &pg,
                            None => grads[p] = Some(pg),
                        }
                    }
                }
            }
            grads[i] = Some(g);
        }
        Gradients { grads }
    }
}

/// Dims of a 4-d (N, C, H, W) tensor.
pub(crate) fn dims4<T: Element>(a: &ArrayD<T>) -> (usize, usize, usize, usize) {
    let s = a.shape();
    assert_eq!(s.len(), 4, "expected 4-d tensor, got {:?}", s);
    (s[0], s[1], s[2], s[3])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr0;

    #[test]
    fn leaf_and_value() {
        let mut t: Tape<f64> = Tape::new();
        let x = t.leaf(arr0(3.0).into_dyn(), true);
        assert_eq!(t.scalar_value(x), 3.0);
        assert!(t.needs_grad(x));
    }

    #[test]
    fn backward_skips_constant_subtrees() {
        let mut t: Tape<f64> = Tape::new();
        let a = t.constant(arr0(2.0).into_dyn());
        let b = t.constant(arr0(5.0).into_dyn());
        let c = t.mul(a, b);
        let grads = t.backward(c);
        assert!(grads.get(a).is_none());
        assert!(grads.get(b).is_none());
    }

    #[test]
    fn product_rule() {
        let mut t: Tape<f64> = Tape::new();
        let a = t.leaf(arr0(2.0).into_dyn(), true);
        let b = t.leaf(arr0(5.0).into_dyn(), true);
        let c = t.mul(a, b);
        let grads = t.backward(c);
        assert_eq!(grads.get(a).unwrap()[[]], 5.0);
        assert_eq!(grads.get(b).unwrap()[[]], 2.0);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut t: Tape<f64> = Tape::new();
        let a = t.leaf(arr0(2.0).into_dyn(), true);
        let d = t.detach(a);
        let b = t.mul(d, d);
        let grads = t.backward(b);
        assert!(grads.get(a).is_none());
    }
}
