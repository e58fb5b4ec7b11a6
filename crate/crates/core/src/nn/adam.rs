//! Adam with per-parameter step counts, so parameters absent from a step's
//! graph (ablated or frozen subnets) keep unbiased moment corrections.

use super::ParamStore;
use crate::tensor::Element;
use ndarray::ArrayD;

pub struct Adam<T: Element> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Element> Adam<T> {
    pub fn new(beta1: f64, beta2: f64) -> Self {
        Adam {
            beta1: T::from_f64(beta1),
            beta2: T::from_f64(beta2),
            eps: T::from_f64(1e-8),
        }
    }

    /// Apply one update. `grads[i]` pairs with registration order; `None`
    /// entries (parameters not on the tape this step) are skipped.
    pub fn step(&self, store: &mut ParamStore<T>, grads: &[Option<ArrayD<T>>], lr: T) {
        assert_eq!(grads.len(), store.len());
        let one = T::one();
        for (entry, grad) in store.entries.iter_mut().zip(grads) {
            let Some(g) = grad else { continue };
            entry.t += 1;
            let t = entry.t as i32;
            let bc1 = one - self.beta1.powi(t);
            let bc2 = one - self.beta2.powi(t);
            let ms = entry.m.as_slice_mut().unwrap();
            let vs = entry.v.as_slice_mut().unwrap();
            let ps = entry.value.as_slice_mut().unwrap();
            let gs = g.as_slice().unwrap();
            for i in 0..ps.len() {
                ms[i] = self.beta1 * ms[i] + (one - self.beta1) * gs[i];
                vs[i] = self.beta2 * vs[i] + (one - self.beta2) * gs[i] * gs[i];
                let mhat = ms[i] / bc1;
                let vhat = vs[i] / bc2;
                ps[i] = ps[i] - lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{ArrayD, IxDyn};

    #[test]
    fn skipped_params_untouched() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let a = store.register("a", ArrayD::from_elem(IxDyn(&[2]), 1.0));
        let b = store.register("b", ArrayD::from_elem(IxDyn(&[2]), 1.0));
        let adam = Adam::new(0.5, 0.999);
        let grads = vec![Some(ArrayD::from_elem(IxDyn(&[2]), 1.0)), None];
        adam.step(&mut store, &grads, 0.1);
        assert!(store.value(a)[[0]] < 1.0);
        assert_eq!(store.value(b)[[0]], 1.0);
        assert_eq!(store.entries[1].t, 0);
    }
}
