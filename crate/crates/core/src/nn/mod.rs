//! Parameter storage, layers, the Adam optimizer, and checkpoint IO.

mod adam;
pub mod io;
mod layers;

pub use adam::Adam;
pub use layers::{
    Activation, ConvBlock, Conv2dLayer, InstanceNorm2dLayer, LinearLayer, Norm, ResBlock,
    INIT_STD,
};

use crate::tensor::{Element, Gradients, Tape, Var};
use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashMap;

/// Handle to a named parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

pub(crate) struct ParamEntry<T: Element> {
    pub name: String,
    pub value: ArrayD<T>,
    // Adam state
    pub m: ArrayD<T>,
    pub v: ArrayD<T>,
    pub t: u64,
}

/// Owns every trainable tensor of a model, keyed by registration order and
/// by name. Binding pushes the current values onto a tape as grad leaves.
pub struct ParamStore<T: Element> {
    pub(crate) entries: Vec<ParamEntry<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Element> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Element> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { entries: Vec::new(), by_name: HashMap::new() }
    }

    pub fn register(&mut self, name: impl Into<String>, value: ArrayD<T>) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter name: {name}"
        );
        let m = ArrayD::zeros(value.raw_dim());
        let v = ArrayD::zeros(value.raw_dim());
        self.entries.push(ParamEntry { name: name.clone(), value, m, v, t: 0 });
        let id = ParamId(self.entries.len() - 1);
        self.by_name.insert(name, id.0);
        id
    }

    /// Gaussian-initialized parameter (mean 0, the conventional 0.02 std for
    /// GAN conv weights unless a layer overrides it).
    pub fn register_normal(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        std: f64,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let dist = Normal::new(0.0f64, std).expect("valid std");
        let n: usize = shape.iter().product();
        let data: Vec<T> = (0..n).map(|_| T::from_f64(dist.sample(rng))).collect();
        self.register(name, ArrayD::from_shape_vec(IxDyn(shape), data).unwrap())
    }

    pub fn register_const(&mut self, name: impl Into<String>, shape: &[usize], c: T) -> ParamId {
        self.register(name, ArrayD::from_elem(IxDyn(shape), c))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &ArrayD<T> {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut ArrayD<T> {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn param_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Push every parameter onto `tape` as a gradient leaf.
    pub fn bind(&self, tape: &mut Tape<T>) -> Binding {
        self.bind_with_grad(tape, true)
    }

    /// Push every parameter as a constant; forwards run, gradients prune.
    pub fn bind_frozen(&self, tape: &mut Tape<T>) -> Binding {
        self.bind_with_grad(tape, false)
    }

    fn bind_with_grad(&self, tape: &mut Tape<T>, requires_grad: bool) -> Binding {
        let vars = self
            .entries
            .iter()
            .map(|e| tape.leaf(e.value.clone(), requires_grad))
            .collect();
        Binding { vars }
    }
}

/// Tape-local vars for one [`ParamStore`] binding.
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Extract this binding's parameter gradients from a backward pass.
pub fn collect_grads<T: Element>(
    store: &ParamStore<T>,
    binding: &Binding,
    grads: &mut Gradients<T>,
) -> Vec<Option<ArrayD<T>>> {
    store.ids().map(|id| grads.take(binding.var(id))).collect()
}
