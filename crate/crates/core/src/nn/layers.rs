//! Layer building blocks shared by the generators, discriminators, and the
//! segmentation U-Net.

use super::{Binding, ParamId, ParamStore};
use crate::tensor::{Element, Tape, Var};
use rand_chacha::ChaCha8Rng;

/// Weight init std for conv/linear layers.
pub const INIT_STD: f64 = 0.02;
const IN_EPS: f64 = 1e-5;

pub struct Conv2dLayer {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2dLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        let w = store.register_normal(format!("{name}.w"), &[cout, cin, k, k], INIT_STD, rng);
        let b = store.register_const(format!("{name}.b"), &[cout], T::zero());
        Conv2dLayer { w, b, stride, pad }
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, bind: &Binding, x: Var) -> Var {
        tape.conv2d(x, bind.var(self.w), bind.var(self.b), self.stride, self.pad)
    }
}

pub struct InstanceNorm2dLayer {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl InstanceNorm2dLayer {
    pub fn new<T: Element>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        let gamma = store.register_const(format!("{name}.gamma"), &[channels], T::one());
        let beta = store.register_const(format!("{name}.beta"), &[channels], T::zero());
        InstanceNorm2dLayer { gamma, beta }
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, bind: &Binding, x: Var) -> Var {
        tape.instance_norm(
            x,
            bind.var(self.gamma),
            bind.var(self.beta),
            T::from_f64(IN_EPS),
        )
    }
}

pub struct LinearLayer {
    pub w: ParamId,
    pub b: ParamId,
}

impl LinearLayer {
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        fin: usize,
        fout: usize,
    ) -> Self {
        let w = store.register_normal(format!("{name}.w"), &[fout, fin], INIT_STD, rng);
        let b = store.register_const(format!("{name}.b"), &[fout], T::zero());
        LinearLayer { w, b }
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, bind: &Binding, x: Var) -> Var {
        tape.linear(x, bind.var(self.w), bind.var(self.b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    None,
    Instance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    None,
    Relu,
    /// slope 0.2
    LeakyRelu,
    /// tanh rescaled onto [0,1]
    Tanh01,
}

/// conv -> (norm) -> (activation)
pub struct ConvBlock {
    pub conv: Conv2dLayer,
    pub norm: Option<InstanceNorm2dLayer>,
    pub act: Activation,
}

impl ConvBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        stride: usize,
        pad: usize,
        norm: Norm,
        act: Activation,
    ) -> Self {
        let conv = Conv2dLayer::new(store, rng, name, cin, cout, k, stride, pad);
        let norm = match norm {
            Norm::None => None,
            Norm::Instance => Some(InstanceNorm2dLayer::new(store, &format!("{name}.norm"), cout)),
        };
        ConvBlock { conv, norm, act }
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, bind: &Binding, x: Var) -> Var {
        let mut y = self.conv.forward(tape, bind, x);
        if let Some(norm) = &self.norm {
            y = norm.forward(tape, bind, y);
        }
        match self.act {
            Activation::None => y,
            Activation::Relu => tape.relu(y),
            Activation::LeakyRelu => tape.leaky_relu(y, T::from_f64(0.2)),
            Activation::Tanh01 => {
                let t = tape.tanh(y);
                tape.affine(t, T::from_f64(0.5), T::from_f64(0.5))
            }
        }
    }
}

/// Two 3x3 convs with instance norm; identity skip; no activation after the sum.
pub struct ResBlock {
    c1: ConvBlock,
    c2: ConvBlock,
}

impl ResBlock {
    pub fn new<T: Element>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        channels: usize,
    ) -> Self {
        let c1 = ConvBlock::new(
            store,
            rng,
            &format!("{name}.c1"),
            channels,
            channels,
            3,
            1,
            1,
            Norm::Instance,
            Activation::Relu,
        );
        let c2 = ConvBlock::new(
            store,
            rng,
            &format!("{name}.c2"),
            channels,
            channels,
            3,
            1,
            1,
            Norm::Instance,
            Activation::None,
        );
        ResBlock { c1, c2 }
    }

    pub fn forward<T: Element>(&self, tape: &mut Tape<T>, bind: &Binding, x: Var) -> Var {
        let y = self.c1.forward(tape, bind, x);
        let y = self.c2.forward(tape, bind, y);
        tape.add(x, y)
    }
}
