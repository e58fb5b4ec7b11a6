//! Instance normalization over (N, C, H, W): each (sample, channel) plane is
//! normalized by its own spatial mean and variance, then scaled and shifted
//! by per-channel affine parameters.

use super::{dims4, Element, Tape, Var};
use ndarray::{ArrayD, IxDyn};

impl<T: Element> Tape<T> {
    /// gamma, beta: (C,). `eps` stabilizes the variance.
    pub fn instance_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Var {
        let (n, c, h, w) = dims4(self.value(x));
        assert_eq!(self.value(gamma).shape(), [c]);
        assert_eq!(self.value(beta).shape(), [c]);
        let m = h * w;
        let inv_m = T::from_f64(1.0 / m as f64);

        // Per-(n,c) inverse stddev, reused verbatim by the backward pass.
        let mut inv_std = vec![T::zero(); n * c];
        let mut means = vec![T::zero(); n * c];
        let mut out = ArrayD::<T>::zeros(IxDyn(&[n, c, h, w]));
        {
            let xv = self.value(x);
            let xs = xv.as_slice().expect("input layout");
            let gv = self.value(gamma);
            let bv = self.value(beta);
            let os = out.as_slice_mut().unwrap();
            for ni in 0..n {
                for ci in 0..c {
                    let base = (ni * c + ci) * m;
                    let plane = &xs[base..base + m];
                    let mut mu = T::zero();
                    for &v in plane {
                        mu += v;
                    }
                    mu *= inv_m;
                    let mut var = T::zero();
                    for &v in plane {
                        let d = v - mu;
                        var += d * d;
                    }
                    var *= inv_m;
                    let istd = T::one() / (var + eps).sqrt();
                    inv_std[ni * c + ci] = istd;
                    means[ni * c + ci] = mu;
                    let (ga, be) = (gv[[ci]], bv[[ci]]);
                    for (o, &v) in os[base..base + m].iter_mut().zip(plane) {
                        *o = ga * (v - mu) * istd + be;
                    }
                }
            }
        }

        let need = self.parent_needs(&[x.0, gamma.0, beta.0]);
        self.push(
            out,
            vec![x.0, gamma.0, beta.0],
            Box::new(move |t, g| {
                let xv = &t.nodes[x.0].value;
                let xs = xv.as_slice().expect("input layout");
                let gv = &t.nodes[gamma.0].value;
                let gs = g.as_slice().expect("grad layout");

                let mut dgamma = vec![T::zero(); c];
                let mut dbeta = vec![T::zero(); c];
                let mut dx = if need[0] {
                    Some(ArrayD::<T>::zeros(IxDyn(&[n, c, h, w])))
                } else {
                    None
                };
                for ni in 0..n {
                    for ci in 0..c {
                        let base = (ni * c + ci) * m;
                        let istd = inv_std[ni * c + ci];
                        let mu = means[ni * c + ci];
                        let plane = &xs[base..base + m];
                        let gplane = &gs[base..base + m];
                        // sums over the plane: of g and of g*xhat
                        let mut sg = T::zero();
                        let mut sgx = T::zero();
                        for (&ge, &xe) in gplane.iter().zip(plane) {
                            sg += ge;
                            sgx += ge * (xe - mu) * istd;
                        }
                        if need[1] {
                            dgamma[ci] += sgx;
                        }
                        if need[2] {
                            dbeta[ci] += sg;
                        }
                        if let Some(dx) = dx.as_mut() {
                            let coeff = gv[[ci]] * istd;
                            let mg = sg * inv_m;
                            let mgx = sgx * inv_m;
                            let ds = dx.as_slice_mut().unwrap();
                            for ((d, &ge), &xe) in
                                ds[base..base + m].iter_mut().zip(gplane).zip(plane)
                            {
                                let xhat = (xe - mu) * istd;
                                *d = coeff * (ge - mg - xhat * mgx);
                            }
                        }
                    }
                }
                vec![
                    dx,
                    need[1].then(|| ArrayD::from_shape_vec(IxDyn(&[c]), dgamma).unwrap()),
                    need[2].then(|| ArrayD::from_shape_vec(IxDyn(&[c]), dbeta).unwrap()),
                ]
            }),
        )
    }
}
