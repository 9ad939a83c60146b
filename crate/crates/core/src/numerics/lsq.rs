//! Damped least squares (Levenberg-Marquardt) for small parameter counts.

use crate::Real;

#[derive(Debug, Clone, Copy)]
pub struct LmOptions<T> {
    /// Converged when every `|Δp_i| <= rel_tol * max(|p_i|, tiny)`.
    pub rel_tol: T,
    pub max_iterations: usize,
    pub initial_damping: T,
}

impl<T: Real> Default for LmOptions<T> {
    fn default() -> Self {
        Self { rel_tol: T::tolerance(1e-10), max_iterations: 200, initial_damping: T::lit(1e-3) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport<T> {
    pub params: Vec<T>,
    /// Half the residual sum of squares at `params`.
    pub cost: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Residuals and their Jacobian (`jac[i][j] = ∂r_i/∂p_j`) at a parameter vector.
pub type Evaluation<T> = (Vec<T>, Vec<Vec<T>>);

fn cost<T: Real>(r: &[T]) -> T {
    r.iter().map(|&v| v * v).sum::<T>() * T::lit(0.5)
}

/// Solves the dense symmetric system `a x = rhs` by Gaussian elimination with
/// partial pivoting. Returns `None` if singular.
fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut rhs: Vec<T>) -> Option<Vec<T>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col] == T::zero() || !a[piv][col].is_finite() {
            return None;
        }
        a.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = rhs[col];
            rhs[row] -= f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    Some(x)
}

/// Minimizes `½ Σ r_i(p)²` starting from `p0`.
///
/// `eval` returns residuals and Jacobian. The damping follows the Marquardt
/// scaling `(JᵀJ + λ diag(JᵀJ)) Δ = -Jᵀr`.
pub fn levenberg_marquardt<T: Real, F>(mut eval: F, p0: &[T], opts: LmOptions<T>) -> LmReport<T>
where
    F: FnMut(&[T]) -> Evaluation<T>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let (mut r, mut jac) = eval(&p);
    let mut c = cost(&r);
    let mut lambda = opts.initial_damping;
    let tiny = T::min_positive_value().sqrt();
    for iter in 1..=opts.max_iterations {
        let mut jtj = vec![vec![T::zero(); n]; n];
        let mut jtr = vec![T::zero(); n];
        for (ri, row) in r.iter().zip(&jac) {
            for a in 0..n {
                jtr[a] += row[a] * *ri;
                for b in 0..n {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        loop {
            let mut sys = jtj.clone();
            for (a, row) in sys.iter_mut().enumerate() {
                row[a] += lambda * jtj[a][a].max(tiny);
            }
            let rhs: Vec<T> = jtr.iter().map(|&v| -v).collect();
            let step = match solve_dense(sys, rhs) {
                Some(s) => s,
                None => {
                    lambda *= T::lit(10.0);
                    if lambda > T::lit(1e30) {
                        return LmReport { params: p, cost: c, iterations: iter, converged: false };
                    }
                    continue;
                }
            };
            let trial: Vec<T> = p.iter().zip(&step).map(|(&a, &s)| a + s).collect();
            let (rt, jt) = eval(&trial);
            let ct = cost(&rt);
            if ct.is_finite() && ct <= c {
                let small = p
                    .iter()
                    .zip(&step)
                    .all(|(&a, &s)| s.abs() <= opts.rel_tol * a.abs().max(tiny));
                p = trial;
                r = rt;
                jac = jt;
                c = ct;
                lambda = (lambda * T::lit(0.3)).max(T::lit(1e-12));
                if small {
                    return LmReport { params: p, cost: c, iterations: iter, converged: true };
                }
                break;
            }
            lambda *= T::lit(10.0);
            if lambda > T::lit(1e30) {
                // No descent direction left: the iterate is stationary to working precision.
                return LmReport { params: p, cost: c, iterations: iter, converged: true };
            }
        }
    }
    LmReport { params: p, cost: c, iterations: opts.max_iterations, converged: false }
}
