//! Spatial ops: zero-padded 2-d convolution (im2col + GEMM), 2x2 average
//! pooling, and nearest-neighbor 2x upsampling.

use super::{dims4, Element, Tape, Var};
use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayD, ArrayView3, ArrayViewMut3, Axis, IxDyn};

/// Output side length for one conv axis.
pub fn conv_out_len(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input + 2 * pad - kernel) / stride + 1
}

struct ConvGeom {
    cin: usize,
    kh: usize,
    kw: usize,
    h: usize,
    w: usize,
    ho: usize,
    wo: usize,
    stride: usize,
    pad: usize,
}

/// Fill `col` (cin*kh*kw, ho*wo) from one input sample (cin, h, w).
fn im2col<T: Element>(x: &ArrayView3<T>, g: &ConvGeom, col: &mut Array2<T>) {
    col.fill(T::zero());
    let cs = col.as_slice_mut().expect("col layout");
    let xs = x.as_slice().expect("input layout");
    let row_len = g.ho * g.wo;
    for ci in 0..g.cin {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let base = row * row_len;
                for oi in 0..g.ho {
                    let si = (oi * g.stride + ki) as isize - g.pad as isize;
                    if si < 0 || si >= g.h as isize {
                        continue;
                    }
                    let xrow = (ci * g.h + si as usize) * g.w;
                    let orow = base + oi * g.wo;
                    for oj in 0..g.wo {
                        let sj = (oj * g.stride + kj) as isize - g.pad as isize;
                        if sj >= 0 && sj < g.w as isize {
                            cs[orow + oj] = xs[xrow + sj as usize];
                        }
                    }
                }
            }
        }
    }
}

/// Scatter-add `col` gradients back onto one input-sample gradient.
fn col2im<T: Element>(col: &Array2<T>, g: &ConvGeom, dx: &mut ArrayViewMut3<T>) {
    let cs = col.as_slice().expect("col layout");
    let ds = dx.as_slice_mut().expect("dx layout");
    let row_len = g.ho * g.wo;
    for ci in 0..g.cin {
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (ci * g.kh + ki) * g.kw + kj;
                let base = row * row_len;
                for oi in 0..g.ho {
                    let si = (oi * g.stride + ki) as isize - g.pad as isize;
                    if si < 0 || si >= g.h as isize {
                        continue;
                    }
                    let xrow = (ci * g.h + si as usize) * g.w;
                    let orow = base + oi * g.wo;
                    for oj in 0..g.wo {
                        let sj = (oj * g.stride + kj) as isize - g.pad as isize;
                        if sj >= 0 && sj < g.w as isize {
                            ds[xrow + sj as usize] += cs[orow + oj];
                        }
                    }
                }
            }
        }
    }
}

impl<T: Element> Tape<T> {
    /// Zero-padded convolution. x: (N, Cin, H, W), w: (Cout, Cin, kh, kw),
    /// b: (Cout,). Output (N, Cout, Ho, Wo).
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Var {
        let (n, cin, h, wd) = dims4(self.value(x));
        let (cout, cin2, kh, kw) = dims4(self.value(w));
        assert_eq!(cin, cin2, "conv2d: channel mismatch");
        assert_eq!(self.value(b).shape(), [cout]);
        let ho = conv_out_len(h, kh, stride, pad);
        let wo = conv_out_len(wd, kw, stride, pad);
        let k = cin * kh * kw;

        let mut out = ArrayD::<T>::zeros(IxDyn(&[n, cout, ho, wo]));
        {
            let geom = ConvGeom { cin, kh, kw, h, w: wd, ho, wo, stride, pad };
            let xv = self.value(x).view().into_dimensionality::<ndarray::Ix4>().unwrap();
            let w2 = self
                .value(w)
                .view()
                .into_shape_with_order((cout, k))
                .expect("weight layout");
            let w2 = w2.to_owned();
            let bv = self.value(b).clone();
            let mut col = Array2::<T>::zeros((k, ho * wo));
            for ni in 0..n {
                im2col(&xv.index_axis(Axis(0), ni), &geom, &mut col);
                let mut o2 = out
                    .index_axis_mut(Axis(0), ni)
                    .into_shape_with_order((cout, ho * wo))
                    .expect("out layout");
                general_mat_mul(T::one(), &w2, &col, T::zero(), &mut o2);
                for (ci, mut row) in o2.rows_mut().into_iter().enumerate() {
                    let bc = bv[[ci]];
                    row.mapv_inplace(|v| v + bc);
                }
            }
        }

        let need = self.parent_needs(&[x.0, w.0, b.0]);
        self.push(
            out,
            vec![x.0, w.0, b.0],
            Box::new(move |t, g| {
                let geom = ConvGeom { cin, kh, kw, h, w: wd, ho, wo, stride, pad };
                let xv = t.nodes[x.0]
                    .value
                    .view()
                    .into_dimensionality::<ndarray::Ix4>()
                    .unwrap();
                let w2 = t.nodes[w.0]
                    .value
                    .view()
                    .into_shape_with_order((cout, k))
                    .expect("weight layout")
                    .to_owned();
                let g4 = g.view().into_dimensionality::<ndarray::Ix4>().unwrap();

                let mut dw2 = if need[1] { Some(Array2::<T>::zeros((cout, k))) } else { None };
                let mut dx = if need[0] {
                    Some(ArrayD::<T>::zeros(IxDyn(&[n, cin, h, wd])))
                } else {
                    None
                };
                let mut col = Array2::<T>::zeros((k, ho * wo));
                let mut dcol = Array2::<T>::zeros((k, ho * wo));
                for ni in 0..n {
                    let g2 = g4
                        .index_axis(Axis(0), ni)
                        .into_shape_with_order((cout, ho * wo))
                        .expect("grad layout");
                    if let Some(dw2) = dw2.as_mut() {
                        im2col(&xv.index_axis(Axis(0), ni), &geom, &mut col);
                        general_mat_mul(T::one(), &g2, &col.t(), T::one(), dw2);
                    }
                    if let Some(dx) = dx.as_mut() {
                        general_mat_mul(T::one(), &w2.t(), &g2, T::zero(), &mut dcol);
                        let mut dxn = dx
                            .view_mut()
                            .into_dimensionality::<ndarray::Ix4>()
                            .unwrap()
                            .index_axis_move(Axis(0), ni);
                        col2im(&dcol, &geom, &mut dxn);
                    }
                }
                let db = if need[2] {
                    let mut db = ndarray::Array1::<T>::zeros(cout);
                    for ni in 0..n {
                        for ci in 0..cout {
                            let mut acc = T::zero();
                            for &v in g4.index_axis(Axis(0), ni).index_axis(Axis(0), ci).iter() {
                                acc += v;
                            }
                            db[ci] += acc;
                        }
                    }
                    Some(db.into_dyn())
                } else {
                    None
                };
                vec![
                    dx,
                    dw2.map(|d| {
                        d.into_shape_with_order(IxDyn(&[cout, cin, kh, kw]))
                            .expect("dw layout")
                    }),
                    db,
                ]
            }),
        )
    }

    /// 2x2 average pooling with stride 2; halves both spatial dims.
    pub fn avg_pool2(&mut self, x: Var) -> Var {
        let (n, c, h, w) = dims4(self.value(x));
        assert!(h % 2 == 0 && w % 2 == 0, "avg_pool2 requires even dims");
        let (ho, wo) = (h / 2, w / 2);
        let quarter = T::from_f64(0.25);
        let mut out = ArrayD::<T>::zeros(IxDyn(&[n, c, ho, wo]));
        {
            let xv = self.value(x);
            for ni in 0..n {
                for ci in 0..c {
                    for oi in 0..ho {
                        for oj in 0..wo {
                            let s = xv[[ni, ci, 2 * oi, 2 * oj]]
                                + xv[[ni, ci, 2 * oi, 2 * oj + 1]]
                                + xv[[ni, ci, 2 * oi + 1, 2 * oj]]
                                + xv[[ni, ci, 2 * oi + 1, 2 * oj + 1]];
                            out[[ni, ci, oi, oj]] = s * quarter;
                        }
                    }
                }
            }
        }
        self.push(
            out,
            vec![x.0],
            Box::new(move |_, g| {
                let mut dx = ArrayD::<T>::zeros(IxDyn(&[n, c, h, w]));
                for ni in 0..n {
                    for ci in 0..c {
                        for oi in 0..ho {
                            for oj in 0..wo {
                                let gv = g[[ni, ci, oi, oj]] * quarter;
                                dx[[ni, ci, 2 * oi, 2 * oj]] = gv;
                                dx[[ni, ci, 2 * oi, 2 * oj + 1]] = gv;
                                dx[[ni, ci, 2 * oi + 1, 2 * oj]] = gv;
                                dx[[ni, ci, 2 * oi + 1, 2 * oj + 1]] = gv;
                            }
                        }
                    }
                }
                vec![Some(dx)]
            }),
        )
    }

    /// Nearest-neighbor upsampling by 2 in both spatial dims.
    pub fn upsample_nearest2(&mut self, x: Var) -> Var {
        let (n, c, h, w) = dims4(self.value(x));
        let (ho, wo) = (h * 2, w * 2);
        let mut out = ArrayD::<T>::zeros(IxDyn(&[n, c, ho, wo]));
        {
            let xv = self.value(x);
            for ni in 0..n {
                for ci in 0..c {
                    for oi in 0..ho {
                        for oj in 0..wo {
                            out[[ni, ci, oi, oj]] = xv[[ni, ci, oi / 2, oj / 2]];
                        }
                    }
                }
            }
        }
        self.push(
            out,
            vec![x.0],
            Box::new(move |_, g| {
                let mut dx = ArrayD::<T>::zeros(IxDyn(&[n, c, h, w]));
                for ni in 0..n {
                    for ci in 0..c {
                        for oi in 0..ho {
                            for oj in 0..wo {
                                dx[[ni, ci, oi / 2, oj / 2]] += g[[ni, ci, oi, oj]];
                            }
                        }
                    }
                }
                vec![Some(dx)]
            }),
        )
    }
}
