//! Fixed-order Gauss-Legendre quadrature.

use crate::Real;

const NODES_5: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const WEIGHTS_5: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Nodes and weights of the 5-point rule mapped to `[a, b]`.
pub fn gauss_legendre_5<T: Real>(a: T, b: T) -> [(T, T); 5] {
    let half = T::lit(0.5) * (b - a);
    let mid = T::lit(0.5) * (a + b);
    let mut out = [(T::zero(), T::zero()); 5];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (mid + half * T::lit(NODES_5[i]), half * T::lit(WEIGHTS_5[i]));
    }
    out
}

/// Composite 5-point Gauss-Legendre rule with `panels` equal panels.
pub fn integrate_gauss<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, panels: usize) -> T {
    let panels = panels.max(1);
    let h = (b - a) / T::from_count(panels);
    let mut acc = T::zero();
    for p in 0..panels {
        let lo = a + h * T::from_count(p);
        for (x, w) in gauss_legendre_5(lo, lo + h) {
            acc += w * f(x);
        }
    }
    acc
}
