//! 2×2 complex blocks and a block-tridiagonal solver for complex-symmetric
//! systems (lower blocks are the transposes of the upper ones).

use std::ops::{Add, Mul, Sub};

use crate::{Complex, Real};

/// Two-component complex vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T>(pub [Complex<T>; 2]);

/// 2×2 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2<T>(pub [[Complex<T>; 2]; 2]);

impl<T: Real> Vec2<T> {
    pub fn zero() -> Self {
        Self([Complex::new(T::zero(), T::zero()); 2])
    }
    pub fn new(a: Complex<T>, b: Complex<T>) -> Self {
        Self([a, b])
    }
    pub fn scale(self, s: Complex<T>) -> Self {
        Self([self.0[0] * s, self.0[1] * s])
    }

    /// Zeroes every real or imaginary part smaller than `tiny` in magnitude.
    #[inline]
    pub fn flush_below(self, tiny: T) -> Self {
        let f = |v: T| if v.abs() < tiny { T::zero() } else { v };
        Self(self.0.map(|z| Complex::new(f(z.re), f(z.im))))
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1]])
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1]])
    }
}

impl<T: Real> Mat2<T> {
    pub fn zero() -> Self {
        Self([[Complex::new(T::zero(), T::zero()); 2]; 2])
    }

    pub fn identity() -> Self {
        let (o, z) = (Complex::new(T::one(), T::zero()), Complex::new(T::zero(), T::zero()));
        Self([[o, z], [z, o]])
    }

    pub fn from_real(m: [[T; 2]; 2]) -> Self {
        let c = |v: T| Complex::new(v, T::zero());
        Self([[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]])
    }

    pub fn transpose(self) -> Self {
        let m = self.0;
        Self([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn scale(self, s: Complex<T>) -> Self {
        let m = self.0;
        Self([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn det(self) -> Complex<T> {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn inverse(self) -> Self {
        let m = self.0;
        let inv = Complex::new(T::one(), T::zero()) / self.det();
        Self([[m[1][1] * inv, -m[0][1] * inv], [-m[1][0] * inv, m[0][0] * inv]])
    }

    #[inline]
    pub fn apply(self, v: Vec2<T>) -> Vec2<T> {
        let m = self.0;
        Vec2([m[0][0] * v.0[0] + m[0][1] * v.0[1], m[1][0] * v.0[0] + m[1][1] * v.0[1]])
    }

    /// `selfᵀ v`.
    #[inline]
    pub fn apply_transpose(self, v: Vec2<T>) -> Vec2<T> {
        let m = self.0;
        Vec2([m[0][0] * v.0[0] + m[1][0] * v.0[1], m[0][1] * v.0[0] + m[1][1] * v.0[1]])
    }
}

impl<T: Real> Add for Mat2<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl<T: Real> Sub for Mat2<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self([[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]])
    }
}

impl<T: Real> Mul for Mat2<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (self.0, o.0);
        Self([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

/// Factorization of a block-tridiagonal matrix with diagonal blocks `D_j`
/// and upper blocks `U_j` (row `j`, column `j+1`), lower blocks `U_jᵀ`.
///
/// Elimination runs from the last block towards the first, so a trailing
/// range of blocks that never changes can keep its factors between calls to
/// [`BlockTridiagonal::refactor_leading`].
#[derive(Debug, Clone)]
pub struct BlockTridiagonal<T> {
    inv_s: Vec<Mat2<T>>,
    g: Vec<Mat2<T>>,
}

impl<T: Real> BlockTridiagonal<T> {
    /// Factors the full matrix.
    pub fn factor(diag: &[Mat2<T>], upper: &[Mat2<T>]) -> Self {
        assert_eq!(upper.len() + 1, diag.len(), "need one upper block fewer than diagonal blocks");
        let n = diag.len();
        let mut me = Self { inv_s: vec![Mat2::zero(); n], g: vec![Mat2::zero(); n.saturating_sub(1)] };
        me.refactor_leading(diag, upper, n);
        me
    }

    /// Recomputes the factors of blocks `0..count`, reusing those of
    /// `count..`. Valid when `diag[count..]` and `upper[count..]` are
    /// unchanged since the last factorization.
    pub fn refactor_leading(&mut self, diag: &[Mat2<T>], upper: &[Mat2<T>], count: usize) {
        let n = diag.len();
        let count = count.min(n);
        if count == 0 {
            return;
        }
        let mut j = count;
        if j == n {
            self.inv_s[n - 1] = diag[n - 1].inverse();
            j = n - 1;
        }
        while j > 0 {
            j -= 1;
            let g = upper[j] * self.inv_s[j + 1];
            self.g[j] = g;
            self.inv_s[j] = (diag[j] - g * upper[j].transpose()).inverse();
        }
    }

    /// Like [`BlockTridiagonal::solve`] for a right-hand side that vanishes
    /// from `support` on. The solution's tail beyond `support` is cut where
    /// every component has dropped below `tiny`; the rest is set to zero.
    /// Returns the length of the (possibly) nonzero prefix.
    pub fn solve_supported(&self, upper: &[Mat2<T>], rhs: &mut [Vec2<T>], support: usize, tiny: T) -> usize {
        let n = rhs.len();
        assert_eq!(n, self.inv_s.len());
        let support = support.min(n);
        if support == 0 {
            return 0;
        }
        for j in (0..support.min(n - 1)).rev() {
            let y = self.g[j].apply(rhs[j + 1]);
            rhs[j] = rhs[j] - y;
        }
        rhs[0] = self.inv_s[0].apply(rhs[0]);
        let small = |v: Vec2<T>| v.0.iter().all(|z| z.re.abs() < tiny && z.im.abs() < tiny);
        for j in 1..n {
            let lower = upper[j - 1].apply_transpose(rhs[j - 1]);
            rhs[j] = self.inv_s[j].apply(rhs[j] - lower);
            if j >= support && small(rhs[j]) {
                for r in &mut rhs[j..] {
                    *r = Vec2::zero();
                }
                return j;
            }
        }
        n
    }

    /// Solves in place; `upper` must be the blocks used for factoring.
    pub fn solve(&self, upper: &[Mat2<T>], rhs: &mut [Vec2<T>]) {
        let n = rhs.len();
        assert_eq!(n, self.inv_s.len());
        for j in (0..n.saturating_sub(1)).rev() {
            let y = self.g[j].apply(rhs[j + 1]);
            rhs[j] = rhs[j] - y;
        }
        rhs[0] = self.inv_s[0].apply(rhs[0]);
        for j in 1..n {
            let lower = upper[j - 1].apply_transpose(rhs[j - 1]);
            rhs[j] = self.inv_s[j].apply(rhs[j] - lower);
        }
    }
}
