//! Central-difference oracles for gradient verification.
//!
//! These reuse only the *forward* evaluation of whatever function they probe;
//! they never touch the reverse-mode path they are checking.

use super::Element;
use ndarray::ArrayD;

/// Elementwise central differences: d f / d theta_i via (f(θ+h e_i) − f(θ−h e_i)) / 2h.
pub fn central_diff<T: Element>(
    mut f: impl FnMut(&ArrayD<T>) -> T,
    theta: &ArrayD<T>,
    h: T,
) -> ArrayD<T> {
    let mut out = ArrayD::<T>::zeros(theta.raw_dim());
    let mut probe = theta.clone();
    let two_h = h + h;
    for idx in 0..theta.len() {
        let orig = probe.as_slice().unwrap()[idx];
        probe.as_slice_mut().unwrap()[idx] = orig + h;
        let fp = f(&probe);
        probe.as_slice_mut().unwrap()[idx] = orig - h;
        let fm = f(&probe);
        probe.as_slice_mut().unwrap()[idx] = orig;
        out.as_slice_mut().unwrap()[idx] = (fp - fm) / two_h;
    }
    out
}

/// Directional derivative along `dir`: (f(θ+h·u) − f(θ−h·u)) / 2h.
pub fn directional_diff<T: Element>(
    mut f: impl FnMut(&ArrayD<T>) -> T,
    theta: &ArrayD<T>,
    dir: &ArrayD<T>,
    h: T,
) -> T {
    let plus = theta + &dir.mapv(|v| v * h);
    let minus = theta - &dir.mapv(|v| v * h);
    (f(&plus) - f(&minus)) / (h + h)
}

/// Max over elements of |a−b| / max(|a|, |b|, floor).
pub fn max_rel_err<T: Element>(analytic: &ArrayD<T>, numeric: &ArrayD<T>, floor: T) -> T {
    assert_eq!(analytic.shape(), numeric.shape());
    let mut worst = T::zero();
    for (&a, &n) in analytic.iter().zip(numeric.iter()) {
        let denom = a.abs().max(n.abs()).max(floor);
        let rel = (a - n).abs() / denom;
        if rel > worst {
            worst = rel;
        }
    }
    worst
}

pub fn rel_err<T: Element>(a: T, b: T, floor: T) -> T {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}
