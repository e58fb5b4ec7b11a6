//! Elementwise, reduction, and shape ops.

use super::{Element, Tape, Var};
use ndarray::{ArrayD, Axis, IxDyn, Slice};

impl<T: Element> Tape<T> {
    fn unary(
        &mut self,
        x: Var,
        f: impl Fn(T) -> T,
        // d(out)/d(in) from (input element, output element)
        df: impl Fn(T, T) -> T + 'static,
    ) -> Var {
        let out = self.value(x).mapv(&f);
        let out_id = self.next_id();
        self.push(
            out,
            vec![x.0],
            Box::new(move |t, g| {
                let xin = &t.nodes[x.0].value;
                let yout = &t.nodes[out_id].value;
                let mut dx = g.clone();
                ndarray::Zip::from(&mut dx)
                    .and(xin)
                    .and(yout)
                    .for_each(|d, &xe, &ye| *d *= df(xe, ye));
                vec![Some(dx)]
            }),
        )
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(
            x,
            |v| if v > T::zero() { v } else { T::zero() },
            |xe, _| if xe > T::zero() { T::one() } else { T::zero() },
        )
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Var {
        self.unary(
            x,
            move |v| if v > T::zero() { v } else { v * slope },
            move |xe, _| if xe > T::zero() { T::one() } else { slope },
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.tanh(), |_, ye| T::one() - ye * ye)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(
            x,
            |v| T::one() / (T::one() + (-v).exp()),
            |_, ye| ye * (T::one() - ye),
        )
    }

    /// Numerically stable ln(1 + e^x); gradient is the sigmoid.
    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(
            x,
            |v| v.max(T::zero()) + (-v.abs()).exp().ln_1p(),
            |xe, _| T::one() / (T::one() + (-xe).exp()),
        )
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.abs(), |xe, _| xe.signum_or_zero())
    }

    /// Elementwise a*x + b with scalar constants.
    pub fn affine(&mut self, x: Var, a: T, b: T) -> Var {
        self.unary(x, move |v| a * v + b, move |_, _| a)
    }

    pub fn scale(&mut self, x: Var, a: T) -> Var {
        self.affine(x, a, T::zero())
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -T::one())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = {
            let av = self.value(a);
            let bv = self.value(b);
            assert_eq!(av.shape(), bv.shape(), "add: shape mismatch");
            av + bv
        };
        self.push(
            out,
            vec![a.0, b.0],
            Box::new(move |_, g| vec![Some(g.clone()), Some(g.clone())]),
        )
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = {
            let av = self.value(a);
            let bv = self.value(b);
            assert_eq!(av.shape(), bv.shape(), "sub: shape mismatch");
            av - bv
        };
        self.push(
            out,
            vec![a.0, b.0],
            Box::new(move |_, g| vec![Some(g.clone()), Some(-g.clone())]),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = {
            let av = self.value(a);
            let bv = self.value(b);
            assert_eq!(av.shape(), bv.shape(), "mul: shape mismatch");
            av * bv
        };
        self.push(
            out,
            vec![a.0, b.0],
            Box::new(move |t, g| {
                vec![
                    Some(g * &t.nodes[b.0].value),
                    Some(g * &t.nodes[a.0].value),
                ]
            }),
        )
    }

    /// Scale each sample of a (N, C, H, W) tensor by its own scalar from an
    /// (N, 1) tensor. Used by the dynamic element-wise sum.
    pub fn mul_per_sample(&mut self, x: Var, s: Var) -> Var {
        let (n, svals) = {
            let xv = self.value(x);
            let sv = self.value(s);
            assert_eq!(xv.ndim(), 4);
            assert_eq!(sv.shape(), [xv.shape()[0], 1], "mul_per_sample: weights must be (N,1)");
            (xv.shape()[0], sv.iter().copied().collect::<Vec<T>>())
        };
        let mut out = self.value(x).clone();
        for (ni, mut sample) in out.axis_iter_mut(Axis(0)).enumerate() {
            sample.mapv_inplace(|v| v * svals[ni]);
        }
        let need = self.parent_needs(&[x.0, s.0]);
        self.push(
            out,
            vec![x.0, s.0],
            Box::new(move |t, g| {
                let xv = &t.nodes[x.0].value;
                let sv = &t.nodes[s.0].value;
                let dx = if need[0] {
                    let mut dx = g.clone();
                    for (ni, mut sample) in dx.axis_iter_mut(Axis(0)).enumerate() {
                        let w = sv[[ni, 0]];
                        sample.mapv_inplace(|v| v * w);
                    }
                    Some(dx)
                } else {
                    None
                };
                let ds = if need[1] {
                    let mut ds = ArrayD::zeros(IxDyn(&[n, 1]));
                    for ni in 0..n {
                        let gi = g.index_axis(Axis(0), ni);
                        let xi = xv.index_axis(Axis(0), ni);
                        let mut acc = T::zero();
                        ndarray::Zip::from(&gi).and(&xi).for_each(|&ge, &xe| acc += ge * xe);
                        ds[[ni, 0]] = acc;
                    }
                    Some(ds)
                } else {
                    None
                };
                vec![dx, ds]
            }),
        )
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let n = xv.len();
        let inv = T::from_f64(1.0 / n as f64);
        let mut acc = T::zero();
        for &v in xv.iter() {
            acc += v;
        }
        let out = ArrayD::from_elem(IxDyn(&[]), acc * inv);
        self.push(
            out,
            vec![x.0],
            Box::new(move |t, g| {
                let shape = t.nodes[x.0].value.raw_dim();
                let gs = *g.first().expect("scalar grad");
                vec![Some(ArrayD::from_elem(shape, gs * inv))]
            }),
        )
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let mut acc = T::zero();
        for &v in xv.iter() {
            acc += v;
        }
        let out = ArrayD::from_elem(IxDyn(&[]), acc);
        self.push(
            out,
            vec![x.0],
            Box::new(move |t, g| {
                let shape = t.nodes[x.0].value.raw_dim();
                let gs = *g.first().expect("scalar grad");
                vec![Some(ArrayD::from_elem(shape, gs))]
            }),
        )
    }

    /// Concatenate (N, C_i, H, W) tensors along the channel axis.
    pub fn concat_channels(&mut self, xs: &[Var]) -> Var {
        assert!(!xs.is_empty());
        let views: Vec<_> = xs.iter().map(|v| self.nodes[v.0].value.view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("concat_channels: shape mismatch");
        let channels: Vec<usize> = xs.iter().map(|v| self.nodes[v.0].value.shape()[1]).collect();
        let parents: Vec<usize> = xs.iter().map(|v| v.0).collect();
        let need = self.parent_needs(&parents);
        self.push(
            out,
            parents,
            Box::new(move |_, g| {
                let mut outs = Vec::with_capacity(channels.len());
                let mut start = 0isize;
                for (i, &c) in channels.iter().enumerate() {
                    if need[i] {
                        let part = g
                            .slice_axis(Axis(1), Slice::from(start..start + c as isize))
                            .to_owned();
                        outs.push(Some(part));
                    } else {
                        outs.push(None);
                    }
                    start += c as isize;
                }
                outs
            }),
        )
    }

    /// (N, F) x (O, F)^T + (O,) -> (N, O)
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        use ndarray::linalg::general_mat_mul;
        let (n, f, o) = {
            let xv = self.value(x);
            let wv = self.value(w);
            let bv = self.value(b);
            assert_eq!(xv.ndim(), 2, "linear input must be 2-d");
            assert_eq!(wv.ndim(), 2);
            assert_eq!(xv.shape()[1], wv.shape()[1], "linear: feature dim mismatch");
            assert_eq!(bv.shape(), [wv.shape()[0]]);
            (xv.shape()[0], xv.shape()[1], wv.shape()[0])
        };
        let x2 = self.value(x).view().into_dimensionality::<ndarray::Ix2>().unwrap().to_owned();
        let w2 = self.value(w).view().into_dimensionality::<ndarray::Ix2>().unwrap().to_owned();
        let mut out = ndarray::Array2::<T>::zeros((n, o));
        general_mat_mul(T::one(), &x2, &w2.t(), T::zero(), &mut out);
        {
            let bv = self.value(b);
            for mut row in out.rows_mut() {
                for (j, e) in row.iter_mut().enumerate() {
                    *e += bv[[j]];
                }
            }
        }
        let need = self.parent_needs(&[x.0, w.0, b.0]);
        self.push(
            out.into_dyn(),
            vec![x.0, w.0, b.0],
            Box::new(move |t, g| {
                let g2 = g.view().into_dimensionality::<ndarray::Ix2>().unwrap();
                let xv = t.nodes[x.0]
                    .value
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .unwrap();
                let wv = t.nodes[w.0]
                    .value
                    .view()
                    .into_dimensionality::<ndarray::Ix2>()
                    .unwrap();
                let dx = if need[0] {
                    let mut dx = ndarray::Array2::<T>::zeros((n, f));
                    general_mat_mul(T::one(), &g2, &wv, T::zero(), &mut dx);
                    Some(dx.into_dyn())
                } else {
                    None
                };
                let dw = if need[1] {
                    let mut dw = ndarray::Array2::<T>::zeros((o, f));
                    general_mat_mul(T::one(), &g2.t(), &xv, T::zero(), &mut dw);
                    Some(dw.into_dyn())
                } else {
                    None
                };
                let db = if need[2] {
                    Some(g2.sum_axis(Axis(0)).into_dyn())
                } else {
                    None
                };
                vec![dx, dw, db]
            }),
        )
    }

    /// (N, C, H, W) -> (N, C), mean over the spatial axes.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let (n, c, h, w) = super::dims4(self.value(x));
        let inv = T::from_f64(1.0 / (h * w) as f64);
        let mut out = ndarray::Array2::<T>::zeros((n, c));
        for ni in 0..n {
            for ci in 0..c {
                let mut acc = T::zero();
                for hi in 0..h {
                    for wi in 0..w {
                        acc += self.value(x)[[ni, ci, hi, wi]];
                    }
                }
                out[[ni, ci]] = acc * inv;
            }
        }
        self.push(
            out.into_dyn(),
            vec![x.0],
            Box::new(move |_, g| {
                let mut dx = ArrayD::zeros(IxDyn(&[n, c, h, w]));
                for ni in 0..n {
                    for ci in 0..c {
                        let gv = g[[ni, ci]] * inv;
                        for hi in 0..h {
                            for wi in 0..w {
                                dx[[ni, ci, hi, wi]] = gv;
                            }
                        }
                    }
                }
                vec![Some(dx)]
            }),
        )
    }
}

trait SignumOrZero {
    fn signum_or_zero(self) -> Self;
}

impl<T: Element> SignumOrZero for T {
    fn signum_or_zero(self) -> T {
        if self > T::zero() {
            T::one()
        } else if self < T::zero() {
            -T::one()
        } else {
            T::zero()
        }
    }
}
