//! Wavefunctions stored as cubic Hermite interpolants.

use crate::fem::{element_mass, shape, Mesh};
use crate::numerics::{gauss_legendre_5, Vec2};
use crate::{Complex, Error, Real, Result};

/// Complex wavefunction on a mesh starting at the hard wall `x = 0`.
///
/// Every node carries `ψ(x_j)` and `ψ'(x_j)`; between nodes the function is
/// the cubic Hermite interpolant. Norms and overlaps are exact integrals of
/// that interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionGrid<T> {
    mesh: Mesh<T>,
    values: Vec<Complex<T>>,
    slopes: Vec<Complex<T>>,
}

impl<T: Real> WavefunctionGrid<T> {
    /// `values[0]` must vanish (hard wall).
    pub fn new(mesh: Mesh<T>, values: Vec<Complex<T>>, slopes: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != mesh.len() || slopes.len() != mesh.len() {
            return Err(Error::Grid(format!(
                "{} nodes but {} values and {} slopes",
                mesh.len(),
                values.len(),
                slopes.len()
            )));
        }
        if values[0] != Complex::new(T::zero(), T::zero()) {
            return Err(Error::Grid("wavefunction must vanish at the wall".into()));
        }
        Ok(Self { mesh, values, slopes })
    }

    pub(crate) fn from_dofs(mesh: Mesh<T>, dofs: &[Vec2<T>]) -> Self {
        let values = dofs.iter().map(|v| v.0[0]).collect();
        let slopes = dofs.iter().map(|v| v.0[1]).collect();
        Self { mesh, values, slopes }
    }

    pub(crate) fn dofs(&self) -> Vec<Vec2<T>> {
        self.values.iter().zip(&self.slopes).map(|(&v, &s)| Vec2::new(v, s)).collect()
    }

    /// Left edge, always the wall.
    pub fn x0(&self) -> T {
        T::zero()
    }
    /// Largest node spacing.
    pub fn dx(&self) -> T {
        self.mesh.max_spacing()
    }
    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }
    pub fn nodes(&self) -> &[T] {
        self.mesh.nodes()
    }
    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }
    pub fn slopes(&self) -> &[Complex<T>] {
        &self.slopes
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn right_edge(&self) -> T {
        self.mesh.length()
    }

    /// Largest `|ψ|` over the nodes.
    pub fn max_abs(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }

    /// Interpolated value and derivative at `x` (zero outside the mesh).
    pub fn evaluate(&self, x: T) -> (Complex<T>, Complex<T>) {
        let zero = Complex::new(T::zero(), T::zero());
        if x < T::zero() || x > self.right_edge() {
            return (zero, zero);
        }
        let e = self.mesh.element_of(x);
        let x0 = self.mesh.nodes()[e];
        let h = self.mesh.element_length(e);
        let (n, dn) = shape((x - x0) / h, h);
        let d = [self.values[e], self.slopes[e], self.values[e + 1], self.slopes[e + 1]];
        let mut v = zero;
        let mut dv = zero;
        for a in 0..4 {
            v = v + d[a] * n[a];
            dv = dv + d[a] * dn[a];
        }
        (v, dv)
    }

    fn element_dofs(&self, e: usize) -> [Complex<T>; 4] {
        [self.values[e], self.slopes[e], self.values[e + 1], self.slopes[e + 1]]
    }

    /// `∫ conj(self) other dx` over element `e`.
    fn element_overlap(&self, other: &Self, e: usize) -> Complex<T> {
        let m = element_mass(self.mesh.element_length(e));
        let a = self.element_dofs(e);
        let b = other.element_dofs(e);
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..4 {
            let mut row = Complex::new(T::zero(), T::zero());
            for j in 0..4 {
                row = row + b[j] * m[i][j];
            }
            acc = acc + a[i].conj() * row;
        }
        acc
    }

    /// `<self|other>`; both must live on the same mesh.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if self.mesh != other.mesh {
            return Err(Error::Grid("inner product of wavefunctions on different meshes".into()));
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        for e in 0..self.mesh.elements() {
            acc = acc + self.element_overlap(other, e);
        }
        Ok(acc)
    }

    /// `∫ |ψ|² dx` over the whole mesh.
    pub fn norm_sq(&self) -> T {
        (0..self.mesh.elements()).map(|e| self.element_overlap(self, e).re).sum()
    }

    /// `∫_a^b |ψ|² dx`, exact for the interpolant.
    pub fn probability_in(&self, a: T, b: T) -> T {
        let a = a.max(T::zero());
        let b = b.min(self.right_edge());
        if !(b > a) {
            return T::zero();
        }
        let nodes = self.mesh.nodes();
        let first = self.mesh.element_of(a);
        let mut acc = T::zero();
        for e in first..self.mesh.elements() {
            let (x0, x1) = (nodes[e], nodes[e + 1]);
            if x0 >= b {
                break;
            }
            if x0 >= a && x1 <= b {
                acc += self.element_overlap(self, e).re;
            } else {
                let (lo, hi) = (x0.max(a), x1.min(b));
                if hi > lo {
                    for (x, w) in gauss_legendre_5(lo, hi) {
                        acc += w * self.evaluate(x).0.norm_sqr();
                    }
                }
            }
        }
        acc
    }

    /// Returns a copy scaled to unit norm.
    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sq();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::Grid(format!("cannot normalize a state with norm {n}")));
        }
        let s = T::one() / n.sqrt();
        Ok(Self {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
            slopes: self.slopes.iter().map(|v| v * s).collect(),
        })
    }

    /// `L²` distance to `other` evaluated at the nodes both meshes share,
    /// as `sqrt(Σ |Δψ_j|² Δx_j)` with local spacings from `self`.
    pub fn l2_distance_on_common_nodes(&self, other: &Self) -> T {
        let (xa, xb) = (self.nodes(), other.nodes());
        let tol = T::lit(1e-9);
        let (mut i, mut j) = (0, 0);
        let mut acc = T::zero();
        let mut prev_x: Option<T> = None;
        while i < xa.len() && j < xb.len() {
            if (xa[i] - xb[j]).abs() <= tol {
                let w = prev_x.map_or(T::zero(), |p| xa[i] - p);
                acc += (self.values[i] - other.values[j]).norm_sqr() * w;
                prev_x = Some(xa[i]);
                i += 1;
                j += 1;
            } else if xa[i] < xb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        acc.sqrt()
    }
}

/// `P_W = ∫_0^d |ψ|² dx`.
pub fn probability_in_well<T: Real>(state: &WavefunctionGrid<T>, d: T) -> Result<T> {
    if !(d > T::zero()) {
        return Err(Error::invalid("d", format!("well width must be positive, got {d}")));
    }
    if state.right_edge() < d {
        return Err(Error::invalid(
            "snapshot",
            format!("grid ends at {} before the well edge {d}", state.right_edge()),
        ));
    }
    Ok(state.probability_in(T::zero(), d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine_state(n: usize) -> WavefunctionGrid<f64> {
        let mesh = Mesh::uniform(&[], 1.0 / n as f64, 1.0).unwrap();
        let pi = std::f64::consts::PI;
        let v = mesh.nodes().iter().map(|&x| Complex::new((pi * x).sin(), 0.0)).collect::<Vec<_>>();
        let s = mesh.nodes().iter().map(|&x| Complex::new(pi * (pi * x).cos(), 0.0)).collect();
        let mut v = v;
        v[0] = Complex::new(0.0, 0.0);
        WavefunctionGrid::new(mesh, v, s).unwrap()
    }

    #[test]
    fn norm_converges_fast() {
        // ∫ sin² over [0,1] = 1/2; Hermite interpolation error is O(h⁴)
        let e1 = (sine_state(10).norm_sq() - 0.5).abs();
        let e2 = (sine_state(20).norm_sq() - 0.5).abs();
        assert!(e1 < 1e-4 && e2 < e1 / 12.0, "{e1} {e2}");
    }

    #[test]
    fn partial_probability_is_additive() {
        let s = sine_state(16);
        let total = s.norm_sq();
        let a = s.probability_in(0.0, 0.3);
        let b = s.probability_in(0.3, 1.0);
        assert!((a + b - total).abs() < 1e-14);
        assert_eq!(s.probability_in(2.0, 3.0), 0.0);
    }

    #[test]
    fn interpolation_hits_nodes() {
        let s = sine_state(8);
        for (x, v) in s.nodes().iter().zip(s.values()) {
            assert!((s.evaluate(*x).0 - v).norm() < 1e-15);
        }
    }

    #[test]
    fn well_probability_errors_on_short_grid() {
        let s = sine_state(8);
        assert!(probability_in_well(&s, 2.0).is_err());
        assert!((probability_in_well(&s, 1.0).unwrap() - s.norm_sq()).abs() < 1e-15);
    }
}
