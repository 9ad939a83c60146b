//! Cubic Hermite finite elements on a piecewise-uniform mesh.
//!
//! Each node carries the value and the slope of the wavefunction, so the
//! discrete state is `C¹` and the matching conditions at the potential steps
//! hold exactly when every step sits on a node. The kinetic term is
//! `(kappa/2) ∫ ψ'* φ' dx` (weak form), which leaves the element matrices
//! exact for a piecewise-constant potential.

use crate::numerics::{gauss_legendre_5, BlockTridiagonal, Mat2, Vec2};
use crate::{Complex, Error, PotentialConfig, Real, Result};

/// 4×4 element matrix in the local order `[v_0, s_0, v_1, s_1]`.
pub type ElementMatrix<T> = [[T; 4]; 4];

/// Consistent mass matrix of an element of length `h`.
pub fn element_mass<T: Real>(h: T) -> ElementMatrix<T> {
    let f = h / T::lit(420.0);
    let l = |v: f64| T::lit(v);
    let h2 = h * h;
    let m = [
        [l(156.0), l(22.0) * h, l(54.0), l(-13.0) * h],
        [l(22.0) * h, l(4.0) * h2, l(13.0) * h, l(-3.0) * h2],
        [l(54.0), l(13.0) * h, l(156.0), l(-22.0) * h],
        [l(-13.0) * h, l(-3.0) * h2, l(-22.0) * h, l(4.0) * h2],
    ];
    m.map(|row| row.map(|v| v * f))
}

/// `∫ N_a' N_b' dx` of an element of length `h`.
pub fn element_stiffness<T: Real>(h: T) -> ElementMatrix<T> {
    let f = T::one() / (T::lit(30.0) * h);
    let l = |v: f64| T::lit(v);
    let h2 = h * h;
    let s = [
        [l(36.0), l(3.0) * h, l(-36.0), l(3.0) * h],
        [l(3.0) * h, l(4.0) * h2, l(-3.0) * h, -h2],
        [l(-36.0), l(-3.0) * h, l(36.0), l(-3.0) * h],
        [l(3.0) * h, -h2, l(-3.0) * h, l(4.0) * h2],
    ];
    s.map(|row| row.map(|v| v * f))
}

/// Hermite shape functions and their derivatives at local coordinate `s ∈ [0, 1]`.
pub fn shape<T: Real>(s: T, h: T) -> ([T; 4], [T; 4]) {
    let l = |v: f64| T::lit(v);
    let s2 = s * s;
    let s3 = s2 * s;
    let n = [
        T::one() - l(3.0) * s2 + l(2.0) * s3,
        h * (s - l(2.0) * s2 + s3),
        l(3.0) * s2 - l(2.0) * s3,
        h * (s3 - s2),
    ];
    let dn = [
        (l(6.0) * s2 - l(6.0) * s) / h,
        T::one() - l(4.0) * s + l(3.0) * s2,
        (l(6.0) * s - l(6.0) * s2) / h,
        l(3.0) * s2 - l(2.0) * s,
    ];
    (n, dn)
}

/// `∫ w(x) N_a N_b dx` over `[x0, x0 + h]` by 5-point Gauss (exact for
/// polynomial `w` of degree up to 3).
pub fn element_weighted_mass<T: Real, F: Fn(T) -> T>(x0: T, h: T, w: F) -> ElementMatrix<T> {
    let mut m = [[T::zero(); 4]; 4];
    for (x, wt) in gauss_legendre_5(x0, x0 + h) {
        let (n, _) = shape((x - x0) / h, h);
        let wx = w(x) * wt;
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] += wx * n[a] * n[b];
            }
        }
    }
    m
}

/// Element matrix with complex entries.
pub type ComplexElementMatrix<T> = [[Complex<T>; 4]; 4];

/// Mass `∫ s N_a N_b dx` and stiffness `∫ N_a' N_b' / s dx` for a complex
/// coordinate stretch `s(x)`, by 5-point Gauss.
pub fn element_stretched<T: Real, F: Fn(T) -> Complex<T>>(
    x0: T,
    h: T,
    s: F,
) -> (ComplexElementMatrix<T>, ComplexElementMatrix<T>) {
    let zero = Complex::new(T::zero(), T::zero());
    let (mut m, mut k) = ([[zero; 4]; 4], [[zero; 4]; 4]);
    for (x, wt) in gauss_legendre_5(x0, x0 + h) {
        let (n, dn) = shape((x - x0) / h, h);
        let sx = s(x);
        let (ms, ks) = (sx * wt, sx.inv() * wt);
        for a in 0..4 {
            for b in 0..4 {
                m[a][b] = m[a][b] + ms * (n[a] * n[b]);
                k[a][b] = k[a][b] + ks * (dn[a] * dn[b]);
            }
        }
    }
    (m, k)
}

/// Sorted node positions starting at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    nodes: Vec<T>,
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh on `[0, length]` whose elements never straddle a
    /// breakpoint. Segments left of `fine_until` use spacing at most `dx`,
    /// the rest at most `dx_outer`.
    pub fn build(breakpoints: &[T], dx: T, fine_until: T, dx_outer: T, length: T) -> Result<Self> {
        if !(dx > T::zero()) || !(dx_outer > T::zero()) {
            return Err(Error::Grid(format!("spacings must be positive (dx = {dx}, dx_outer = {dx_outer})")));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::Grid(format!("box length must be positive, got {length}")));
        }
        let mut cuts: Vec<T> = breakpoints
            .iter()
            .copied()
            .chain([fine_until])
            .filter(|&b| b > T::zero() && b < length)
            .collect();
        cuts.push(T::zero());
        cuts.push(length);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() <= T::epsilon() * T::lit(16.0) * length);
        let mut nodes = vec![T::zero()];
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let h = if a < fine_until { dx } else { dx_outer };
            let n = ((b - a) / h - T::tolerance(1e-9)).ceil().max(T::one());
            let count = n.to_usize().ok_or_else(|| Error::Grid("too many elements".into()))?;
            for i in 1..count {
                nodes.push(a + (b - a) * T::from_count(i) / T::from_count(count));
            }
            nodes.push(b);
        }
        Ok(Self { nodes })
    }

    /// Uniform breakpoint-aligned mesh with a single spacing.
    pub fn uniform(breakpoints: &[T], dx: T, length: T) -> Result<Self> {
        Self::build(breakpoints, dx, length, dx, length)
    }

    pub fn from_nodes(nodes: Vec<T>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != T::zero() {
            return Err(Error::Grid("mesh needs at least two nodes starting at x = 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("mesh nodes must be strictly ascending".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }
    pub fn length(&self) -> T {
        *self.nodes.last().unwrap()
    }
    pub fn element_length(&self, e: usize) -> T {
        self.nodes[e + 1] - self.nodes[e]
    }
    pub fn max_spacing(&self) -> T {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max)
    }
    /// Index of the node at `x`, if one lies within rounding distance.
    pub fn node_at(&self, x: T) -> Option<usize> {
        let tol = T::epsilon() * T::lit(64.0) * self.length().max(T::one());
        let i = self.nodes.partition_point(|&n| n < x - tol);
        (i < self.nodes.len() && (self.nodes[i] - x).abs() <= tol).then_some(i)
    }
    /// Element containing `x` (the left one on a shared node).
    pub fn element_of(&self, x: T) -> usize {
        let i = self.nodes.partition_point(|&n| n < x);
        i.saturating_sub(1).min(self.elements() - 1)
    }
}

/// Global block-tridiagonal matrix assembled from element matrices.
#[derive(Debug, Clone)]
pub struct BlockMatrix<T> {
    pub diag: Vec<Mat2<T>>,
    pub upper: Vec<Mat2<T>>,
}

impl<T: Real> BlockMatrix<T> {
    pub fn zeros(nodes: usize) -> Self {
        Self { diag: vec![Mat2::zero(); nodes], upper: vec![Mat2::zero(); nodes - 1] }
    }

    /// Adds `scale * m` of element `e`.
    pub fn add_element(&mut self, e: usize, m: &ElementMatrix<T>, scale: Complex<T>) {
        let blk = |r: usize, c: usize| {
            Mat2::from_real([[m[r][c], m[r][c + 1]], [m[r + 1][c], m[r + 1][c + 1]]]).scale(scale)
        };
        self.diag[e] = self.diag[e] + blk(0, 0);
        self.diag[e + 1] = self.diag[e + 1] + blk(2, 2);
        self.upper[e] = self.upper[e] + blk(0, 2);
    }

    /// Adds `scale * m` for a complex element matrix.
    pub fn add_complex_element(&mut self, e: usize, m: &ComplexElementMatrix<T>, scale: Complex<T>) {
        let blk = |r: usize, c: usize| Mat2([[m[r][c], m[r][c + 1]], [m[r + 1][c], m[r + 1][c + 1]]]).scale(scale);
        self.diag[e] = self.diag[e] + blk(0, 0);
        self.diag[e + 1] = self.diag[e + 1] + blk(2, 2);
        self.upper[e] = self.upper[e] + blk(0, 2);
    }

    pub fn apply(&self, c: &[Vec2<T>], out: &mut [Vec2<T>]) {
        let n = c.len();
        for j in 0..n {
            let mut y = self.diag[j].apply(c[j]);
            if j + 1 < n {
                y = y + self.upper[j].apply(c[j + 1]);
            }
            if j > 0 {
                y = y + self.upper[j - 1].apply_transpose(c[j - 1]);
            }
            out[j] = y;
        }
    }

    /// Imposes `value = 0` at the first and last node: the rows and columns
    /// of those degrees of freedom become identity rows.
    pub fn pin_boundary_values(&mut self) {
        let one = Complex::new(T::one(), T::zero());
        let zero = Complex::new(T::zero(), T::zero());
        let n = self.diag.len();
        for &j in &[0, n - 1] {
            self.diag[j].0[0] = [one, zero];
            self.diag[j].0[1][0] = zero;
        }
        self.upper[0].0[0] = [zero, zero];
        self.upper[n - 2].0[0][0] = zero;
        self.upper[n - 2].0[1][0] = zero;
    }
}

/// Mass, stiffness and potential matrices for a static configuration.
#[derive(Debug, Clone)]
pub struct StaticOperator<T> {
    pub mass: BlockMatrix<T>,
    /// `(kappa/2) S + V M`.
    pub hamiltonian: BlockMatrix<T>,
}

impl<T: Real> StaticOperator<T> {
    pub fn new(mesh: &Mesh<T>, config: &PotentialConfig<T>, kappa: T) -> Self {
        let n = mesh.len();
        let mut mass = BlockMatrix::zeros(n);
        let mut ham = BlockMatrix::zeros(n);
        let c = |v: T| Complex::new(v, T::zero());
        for e in 0..mesh.elements() {
            let h = mesh.element_length(e);
            let mid = mesh.nodes()[e] + h * T::lit(0.5);
            let me = element_mass(h);
            mass.add_element(e, &me, c(T::one()));
            ham.add_element(e, &element_stiffness(h), c(kappa * T::lit(0.5)));
            ham.add_element(e, &me, c(config.value_at(mid)));
        }
        Self { mass, hamiltonian: ham }
    }

    /// Relative residual `‖M⁻¹(H c - E M c)‖_M / (|E| ‖c‖_M)` of an
    /// approximate eigenpair, with the wall and box-edge values pinned.
    pub fn eigen_residual(&self, c: &[Vec2<T>], energy: T) -> T {
        let n = c.len();
        let mut hc = vec![Vec2::zero(); n];
        let mut mc = vec![Vec2::zero(); n];
        self.hamiltonian.apply(c, &mut hc);
        self.mass.apply(c, &mut mc);
        let e = Complex::new(energy, T::zero());
        let mut r: Vec<Vec2<T>> = hc.iter().zip(&mc).map(|(a, b)| *a - b.scale(e)).collect();
        for &j in &[0, n - 1] {
            r[j].0[0] = Complex::new(T::zero(), T::zero());
        }
        let mut pinned = self.mass.clone();
        pinned.pin_boundary_values();
        BlockTridiagonal::factor(&pinned.diag, &pinned.upper).solve(&pinned.upper, &mut r);
        let mut mr = vec![Vec2::zero(); n];
        self.mass.apply(&r, &mut mr);
        let num: T = r.iter().zip(&mr).map(|(a, b)| (a.0[0].conj() * b.0[0] + a.0[1].conj() * b.0[1]).re).sum();
        let den: T = c.iter().zip(&mc).map(|(a, b)| (a.0[0].conj() * b.0[0] + a.0[1].conj() * b.0[1]).re).sum();
        num.max(T::zero()).sqrt() / (energy.abs() * den.sqrt())
    }
}
