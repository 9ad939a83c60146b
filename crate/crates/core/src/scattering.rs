//! Stationary scattering for the wall/well/barrier potential.
//!
//! Inside the potential the regular solution is built from `cos(q x)` and
//! `sin(q x)/q`, which are even in `q` and `q'`. Nothing here depends on a
//! square-root branch, so the S-matrix and the pole function are single-valued
//! entire functions of `k` (apart from the explicit `1/k` in `S`).
//!
//! With `u(0) = 0`, `u'(0) = 1` and `f = u(d+b)`, `g = u'(d+b)`:
//!
//! ```text
//! S(k)  = exp(-2ik(d+b)) (i g - k f) / (k f + i g)
//! Ω(k)  = k f + i g
//! ```
//!
//! Zeros of `Ω` on the positive imaginary axis are bound states, zeros in the
//! fourth quadrant are resonances.

use crate::potential::{PotentialConfig, Region};
use crate::units::UnitSystem;
use crate::{Complex, Error, Real, Result};

type C<T> = Complex<T>;

fn c<T: Real>(re: T) -> C<T> {
    C::new(re, T::zero())
}

/// `(cos(q x), sin(q x)/q)` for `q² = z2`, with a series near `q x = 0`.
pub(crate) fn cos_sinc<T: Real>(z2: C<T>, x: T) -> (C<T>, C<T>) {
    let w = z2 * (x * x);
    if w.norm() < T::lit(1e-6) {
        // Truncation error ~ |w|^4 / 10!, far below working precision.
        let w2 = w * w;
        let cos = c::<T>(T::one()) - w * T::lit(0.5) + w2 * T::lit(1.0 / 24.0)
            - w2 * w * T::lit(1.0 / 720.0);
        let sinc = (c::<T>(T::one()) - w * T::lit(1.0 / 6.0) + w2 * T::lit(1.0 / 120.0)
            - w2 * w * T::lit(1.0 / 5040.0))
            * x;
        (cos, sinc)
    } else {
        let q = z2.sqrt();
        let qx = q * x;
        (qx.cos(), qx.sin() / q)
    }
}

/// Channel wave numbers for a (complex) exterior wave number `k`.
///
/// Only the squares are stored; [`ChannelWavenumbers::q`] and
/// [`ChannelWavenumbers::q_prime`] return the principal roots for display.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelWavenumbers<T> {
    pub k: C<T>,
    /// `q² = k² + 2 V_w / kappa`.
    pub q_sq: C<T>,
    /// `q'² = k² - 2 V_b / kappa`.
    pub q_prime_sq: C<T>,
}

impl<T: Real> ChannelWavenumbers<T> {
    pub fn new(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: C<T>) -> Self {
        let two_over_kappa = T::lit(2.0) / unit.kappa();
        let k2 = k * k;
        Self {
            k,
            q_sq: k2 + c(config.v_well() * two_over_kappa),
            q_prime_sq: k2 - c(config.v_barrier() * two_over_kappa),
        }
    }
    pub fn q(&self) -> C<T> {
        self.q_sq.sqrt()
    }
    pub fn q_prime(&self) -> C<T> {
        self.q_prime_sq.sqrt()
    }
}

/// Regular interior solution `u` with `u(0) = 0`, `u'(0) = 1`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Interior<T> {
    pub waves: ChannelWavenumbers<T>,
    pub d: T,
    pub b: T,
    /// `u(d)`, `u'(d)`.
    pub u_d: C<T>,
    pub du_d: C<T>,
    /// `u(d+b)`, `u'(d+b)`.
    pub f: C<T>,
    pub g: C<T>,
}

impl<T: Real> Interior<T> {
    pub fn new(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: C<T>) -> Self {
        let waves = ChannelWavenumbers::new(config, unit, k);
        let (d, b) = (config.well_width(), config.barrier_width());
        let (cw, sw) = cos_sinc(waves.q_sq, d);
        let (cb, sb) = cos_sinc(waves.q_prime_sq, b);
        let (u_d, du_d) = (sw, cw);
        let f = u_d * cb + du_d * sb;
        let g = -waves.q_prime_sq * u_d * sb + du_d * cb;
        Self { waves, d, b, u_d, du_d, f, g }
    }

    /// `(u, u')` for `0 <= x <= d + b`.
    pub fn eval(&self, x: T) -> (C<T>, C<T>) {
        if x <= self.d {
            let (cw, sw) = cos_sinc(self.waves.q_sq, x);
            (sw, cw)
        } else {
            let y = x - self.d;
            let (cb, sb) = cos_sinc(self.waves.q_prime_sq, y);
            (
                self.u_d * cb + self.du_d * sb,
                -self.waves.q_prime_sq * self.u_d * sb + self.du_d * cb,
            )
        }
    }

    pub fn outer_edge(&self) -> T {
        self.d + self.b
    }

    /// The two additive terms `k f` and `i g` of the pole function.
    pub fn omega_terms(&self) -> (C<T>, C<T>) {
        (self.waves.k * self.f, C::<T>::i() * self.g)
    }

    /// Rounding scale of `Ω`: the largest product entering `k f + i g`
    /// before cancellation between the growing and decaying barrier waves.
    pub fn omega_scale(&self) -> T {
        let (cb, sb) = cos_sinc(self.waves.q_prime_sq, self.b);
        let kn = self.waves.k.norm();
        let f_parts = (self.u_d * cb).norm().max((self.du_d * sb).norm());
        let g_parts = (self.waves.q_prime_sq * self.u_d * sb).norm().max((self.du_d * cb).norm());
        (kn * f_parts).max(g_parts)
    }
}

/// Pole function `Ω(k) = k u(d+b) + i u'(d+b)`.
///
/// Up to a nonzero entire factor this is the denominator of `S(k)`. It obeys
/// `Ω(-conj(k)) = -conj(Ω(k))`, so its zero set is symmetric under
/// `k -> -conj(k)`.
pub fn omega<T: Real>(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: C<T>) -> C<T> {
    let (a, b) = Interior::new(config, unit, k).omega_terms();
    a + b
}

/// `Ω(k)` together with its rounding scale, used for relative residual tests.
///
/// The scale is the largest of the products `k u(d) cos(q'b)`,
/// `k u'(d) sin(q'b)/q'`, `q'² u(d) sin(q'b)/q'`, `u'(d) cos(q'b)`; below
/// a barrier these are the separately growing and decaying pieces whose
/// cancellation limits the attainable residual.
pub fn omega_scaled<T: Real>(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: C<T>) -> (C<T>, T) {
    let it = Interior::new(config, unit, k);
    let (a, b) = it.omega_terms();
    (a + b, it.omega_scale().max(a.norm()).max(b.norm()))
}

/// S-matrix value for complex `k` (meromorphic continuation).
pub fn s_matrix<T: Real>(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: C<T>) -> C<T> {
    let it = Interior::new(config, unit, k);
    s_from_interior(&it)
}

fn s_from_interior<T: Real>(it: &Interior<T>) -> C<T> {
    let k = it.waves.k;
    let (kf, ig) = it.omega_terms();
    let phase = (-C::<T>::i() * k * (T::lit(2.0) * it.outer_edge())).exp();
    phase * (ig - kf) / (kf + ig)
}

/// Stationary scattering state at a real wave number.
///
/// The state is normalized as `<ψ_k|ψ_k'> = δ(k - k')`; outside the
/// potential it reads `(e^{-ikx} - S e^{ikx}) / sqrt(2π)`.
#[derive(Debug, Clone, Copy)]
pub struct ScatteringSolution<T> {
    pub k: T,
    /// `S(k)`.
    pub s: C<T>,
    /// Phase shift `arg(S)/2` on the principal branch `(-π/2, π/2]`; use
    /// [`phase_shift_curve`] for a continuous curve.
    pub delta: T,
    /// Coefficients of the unnormalized ansatz `e^{-ikx} - S e^{ikx}`:
    /// `C1 e^{iqx} + C2 e^{-iqx}` in the well and, when `q' != 0`,
    /// `C3 e^{iq'x} + C4 e^{-iq'x}` in the barrier. At `q' = 0` the barrier
    /// solution is linear and `C3`, `C4` are `None`.
    pub coefficients: [Option<C<T>>; 4],
    interior: Interior<T>,
    /// `u / alpha` matches the exterior ansatz.
    alpha: C<T>,
}

impl<T: Real> ScatteringSolution<T> {
    fn norm_factor() -> T {
        T::one() / (T::lit(2.0) * T::PI()).sqrt()
    }

    /// Unnormalized ansatz value and derivative at `x >= 0`.
    pub fn ansatz(&self, x: T) -> (C<T>, C<T>) {
        if x <= T::zero() {
            return (c(T::zero()), c::<T>(T::one()) / self.alpha);
        }
        if x <= self.interior.outer_edge() {
            let (u, du) = self.interior.eval(x);
            (u / self.alpha, du / self.alpha)
        } else {
            let k = c(self.k);
            let ikx = C::<T>::i() * k * x;
            let (em, ep) = ((-ikx).exp(), ikx.exp());
            (em - self.s * ep, -C::<T>::i() * k * (em + self.s * ep))
        }
    }

    /// `ψ_k(x)` with δ-normalization.
    pub fn wavefunction(&self, x: T) -> C<T> {
        self.ansatz(x).0 * Self::norm_factor()
    }

    /// `ψ_k'(x)` with δ-normalization.
    pub fn derivative(&self, x: T) -> C<T> {
        self.ansatz(x).1 * Self::norm_factor()
    }

    /// `(ψ_k, ψ_k')` together.
    pub fn value_and_derivative(&self, x: T) -> (C<T>, C<T>) {
        let (u, du) = self.ansatz(x);
        let n = Self::norm_factor();
        (u * n, du * n)
    }

    /// Region-wise value built from the exponential coefficients, for
    /// cross-checking against [`Self::wavefunction`]. Falls back to the
    /// interior solution in the barrier when `q' = 0`.
    pub fn from_coefficients(&self, config: &PotentialConfig<T>, x: T) -> C<T> {
        let ix = |q: C<T>| (C::<T>::i() * q * x).exp();
        let value = match config.region(x) {
            Region::Wall => c(T::zero()),
            Region::Well => {
                let q = self.interior.waves.q();
                self.coefficients[0].unwrap() * ix(q) + self.coefficients[1].unwrap() * ix(-q)
            }
            Region::Barrier => match (self.coefficients[2], self.coefficients[3]) {
                (Some(c3), Some(c4)) => {
                    let p = self.interior.waves.q_prime();
                    c3 * ix(p) + c4 * ix(-p)
                }
                _ => self.ansatz(x).0,
            },
            Region::Exterior => self.ansatz(x).0,
        };
        value * Self::norm_factor()
    }
}

/// Solves the stationary problem at real `k > 0`.
pub fn solve_scattering<T: Real>(
    config: &PotentialConfig<T>,
    unit: &UnitSystem<T>,
    k: T,
) -> Result<ScatteringSolution<T>> {
    if !(k > T::zero()) || !k.is_finite() {
        return Err(Error::invalid("k", format!("wave number must be positive and finite, got {k}")));
    }
    let interior = Interior::new(config, unit, c(k));
    let s = s_from_interior(&interior);
    let x2 = interior.outer_edge();
    let kc = c(k);
    let alpha = (interior.f + C::<T>::i() * interior.g / kc) * (C::<T>::i() * kc * x2).exp() * T::lit(0.5);

    let q = interior.waves.q();
    let c1 = c::<T>(T::one()) / (C::<T>::i() * q * T::lit(2.0) * alpha);
    let p = interior.waves.q_prime();
    let (c3, c4) = if p.norm() > T::epsilon() {
        let (fd, gd) = (interior.u_d, interior.du_d);
        let dphase = (C::<T>::i() * p * config.well_width()).exp();
        let half = T::lit(0.5);
        let a = fd * half + gd / (C::<T>::i() * p * T::lit(2.0));
        let bcoef = fd * half - gd / (C::<T>::i() * p * T::lit(2.0));
        (Some(a / dphase / alpha), Some(bcoef * dphase / alpha))
    } else {
        (None, None)
    };
    Ok(ScatteringSolution {
        k,
        s,
        delta: T::lit(0.5) * s.arg(),
        coefficients: [Some(c1), Some(-c1), c3, c4],
        interior,
        alpha,
    })
}

/// Unwraps a sequence of angles defined modulo `2π` so that consecutive
/// differences lie in `(-π, π]`.
pub fn unwrap_phase<T: Real>(raw: &[T]) -> Vec<T> {
    let two_pi = T::lit(2.0) * T::PI();
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = T::zero();
    for (i, &r) in raw.iter().enumerate() {
        if i > 0 {
            let prev = raw[i - 1] + offset;
            let mut cur = r + offset;
            let jumps = ((cur - prev) / two_pi).round();
            cur -= jumps * two_pi;
            offset -= jumps * two_pi;
            out.push(cur);
        } else {
            out.push(r);
        }
    }
    out
}

const MAX_REFINEMENT_DEPTH: usize = 40;

/// On the real axis `S = -exp(-2ik(d+b)) conj(Ω)/Ω`, so
/// `δ = π/2 - k(d+b) - arg Ω` and tracking `arg Ω` continuously is enough.
fn omega_real_axis<T: Real>(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: T) -> (C<T>, T) {
    let om = omega(config, unit, c(k));
    let h = k * T::epsilon().cbrt();
    let deriv = (omega(config, unit, c(k + h)) - omega(config, unit, c(k - h))) / c(T::lit(2.0) * h);
    (om, deriv.norm())
}

/// `arg Ω` continued from `(k_lo, theta_lo)` to `k_hi`.
///
/// A step is accepted when `|Ω'| (k_hi - k_lo)` is small against `|Ω|` at
/// both ends, which bounds the change of `arg Ω` inside the step, and the
/// endpoint difference is below `π/4`. Otherwise the step is bisected.
fn track_arg_omega<T: Real>(
    config: &PotentialConfig<T>,
    unit: &UnitSystem<T>,
    k_lo: T,
    theta_lo: T,
    k_hi: T,
    depth: usize,
) -> Result<T> {
    let two_pi = T::lit(2.0) * T::PI();
    let (om_lo, dlo) = omega_real_axis(config, unit, k_lo);
    let (om_hi, dhi) = omega_real_axis(config, unit, k_hi);
    let raw = om_hi.arg();
    let cand = raw - ((raw - theta_lo) / two_pi).round() * two_pi;
    let h = k_hi - k_lo;
    let lipschitz_ok = h * dlo.max(dhi) < T::lit(0.25) * om_lo.norm().min(om_hi.norm());
    if lipschitz_ok && (cand - theta_lo).abs() < T::FRAC_PI_4() {
        return Ok(cand);
    }
    if depth == 0 {
        return Err(Error::RefinementFailure { k_lo: k_lo.to_f64_lossy(), k_hi: k_hi.to_f64_lossy() });
    }
    let mid = T::lit(0.5) * (k_lo + k_hi);
    if !(mid > k_lo && mid < k_hi) {
        return Err(Error::RefinementFailure { k_lo: k_lo.to_f64_lossy(), k_hi: k_hi.to_f64_lossy() });
    }
    let t_mid = track_arg_omega(config, unit, k_lo, theta_lo, mid, depth - 1)?;
    track_arg_omega(config, unit, mid, t_mid, k_hi, depth - 1)
}

/// Continuous phase shift `δ(k) = arg S(k) / 2` on an ascending grid.
///
/// The first sample is taken on the principal branch `(-π/2, π/2]`. Between
/// neighbours the interval is bisected until the phase provably changes by
/// less than `π/4` per sub-step.
pub fn phase_shift_curve<T: Real>(
    config: &PotentialConfig<T>,
    unit: &UnitSystem<T>,
    k_grid: &[T],
) -> Result<Vec<T>> {
    if k_grid.is_empty() {
        return Ok(Vec::new());
    }
    for w in k_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("k_grid", "must be strictly ascending"));
        }
    }
    if !(k_grid[0] > T::zero()) {
        return Err(Error::invalid("k_grid", "wave numbers must be positive"));
    }
    let x2 = config.outer_edge();
    let k0 = k_grid[0];
    let delta0 = T::lit(0.5) * s_matrix(config, unit, c(k0)).arg();
    let mut theta = omega(config, unit, c(k0)).arg();
    let theta0 = theta;
    let mut out = Vec::with_capacity(k_grid.len());
    out.push(delta0);
    for w in k_grid.windows(2) {
        theta = track_arg_omega(config, unit, w[0], theta, w[1], MAX_REFINEMENT_DEPTH)?;
        out.push(delta0 - (w[1] - k0) * x2 - (theta - theta0));
    }
    Ok(out)
}

/// `dδ/dk` by a centred difference with relative step `1e-5`, Richardson
/// extrapolated once.
pub fn phase_derivative<T: Real>(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: T) -> Result<T> {
    if !(k > T::zero()) {
        return Err(Error::invalid("k", format!("wave number must be positive, got {k}")));
    }
    let h = k * T::lit(1e-5).max(T::epsilon().cbrt());
    let x2 = config.outer_edge();
    let diff = |h: T| -> Result<T> {
        let lo = k - h;
        let t_lo = omega(config, unit, c(lo)).arg();
        let t_hi = track_arg_omega(config, unit, lo, t_lo, k + h, MAX_REFINEMENT_DEPTH)?;
        Ok(-x2 - (t_hi - t_lo) / (T::lit(2.0) * h))
    };
    let d1 = diff(h)?;
    let d2 = diff(h * T::lit(0.5))?;
    Ok((T::lit(4.0) * d2 - d1) / T::lit(3.0))
}

/// Wigner delay time `Δt = (2 / (kappa k)) dδ/dk` in seconds.
pub fn delay_time<T: Real>(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: T) -> Result<T> {
    let dd = phase_derivative(config, unit, k)?;
    Ok(T::lit(2.0) / (unit.kappa() * k) * dd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> UnitSystem<f64> {
        UnitSystem::sodium23()
    }
    fn final_cfg() -> PotentialConfig<f64> {
        PotentialConfig::new(100.0, 200.0, 5.0, 10.0).unwrap()
    }
    fn initial_cfg() -> PotentialConfig<f64> {
        PotentialConfig::new(350.0, 400.0, 5.0, 10.0).unwrap()
    }

    /// RK4 integration of u'' = (2/kappa)(V - E) u from the wall outwards.
    fn shoot(cfg: &PotentialConfig<f64>, kappa: f64, k: f64) -> (f64, f64) {
        let e = 0.5 * kappa * k * k;
        let rhs = |x: f64, u: f64| 2.0 / kappa * (cfg.value_at(x) - e) * u;
        let mut state = (0.0, 1.0);
        let integrate = |a: f64, b: f64, n: usize, st: &mut (f64, f64)| {
            let h = (b - a) / n as f64;
            for i in 0..n {
                // midpoint sampling keeps V inside the current region
                let x = a + (i as f64 + 0.5) * h;
                let f = |u: f64, du: f64| (du, rhs(x, u));
                let (u, du) = *st;
                let k1 = f(u, du);
                let k2 = f(u + 0.5 * h * k1.0, du + 0.5 * h * k1.1);
                let k3 = f(u + 0.5 * h * k2.0, du + 0.5 * h * k2.1);
                let k4 = f(u + h * k3.0, du + h * k3.1);
                st.0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                st.1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            }
        };
        let (d, b) = (cfg.well_width(), cfg.barrier_width());
        integrate(0.0, d, 20_000, &mut state);
        integrate(d, d + b, 40_000, &mut state);
        state
    }

    #[test]
    fn bare_wall_has_trivial_s_matrix() {
        let cfg = PotentialConfig::new(0.0, 0.0, 5.0, 10.0).unwrap();
        for &k in &[0.01, 0.3, 1.7, 4.0] {
            let sol = solve_scattering(&cfg, &unit(), k).unwrap();
            assert!((sol.s - 1.0).norm() < 1e-12, "S = {}", sol.s);
            for &x in &[0.5, 7.0, 20.0] {
                let want = -2.0 * Complex::<f64>::i() * (k * x).sin() / (2.0 * std::f64::consts::PI).sqrt();
                assert!((sol.wavefunction(x) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn matches_ode_shooting() {
        let cfg = final_cfg();
        let kappa = unit().kappa();
        let k = 0.312;
        let it = Interior::new(&cfg, &unit(), c(k));
        let (f, g) = shoot(&cfg, kappa, k);
        assert!((it.f.re - f).abs() < 1e-8 * f.abs().max(g.abs() / k));
        assert!((it.g.re - g).abs() < 1e-8 * g.abs().max(k * f.abs()));
        let s_ode = (-2.0 * Complex::<f64>::i() * k * 15.0).exp() * (Complex::<f64>::i() * g - k * f)
            / (k * f + Complex::<f64>::i() * g);
        let sol = solve_scattering(&cfg, &unit(), k).unwrap();
        assert!((sol.s - s_ode).norm() < 1e-8);
        assert!((sol.s.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn no_barrier_reduces_to_square_well() {
        let cfg = PotentialConfig::new(100.0, 0.0, 5.0, 0.0).unwrap();
        let kappa = unit().kappa();
        for &k in &[0.05, 0.2, 0.6, 1.3] {
            let q = (k * k + 2.0 * 100.0 / kappa).sqrt();
            let delta = ((k / q) * (q * 5.0).tan()).atan() - k * 5.0;
            let want = (2.0 * Complex::<f64>::i() * delta).exp();
            let sol = solve_scattering(&cfg, &unit(), k).unwrap();
            assert!((sol.s - want).norm() < 1e-12, "k={k}: {} vs {}", sol.s, want);
        }
    }

    #[test]
    fn wavefunction_is_c1_and_vanishes_at_wall() {
        let cfg = final_cfg();
        let sol = solve_scattering(&cfg, &unit(), 0.4).unwrap();
        assert_eq!(sol.wavefunction(0.0).norm(), 0.0);
        let scale = sol.wavefunction(2.0).norm().max(sol.wavefunction(20.0).norm());
        for &x in &[5.0, 15.0] {
            let eps = 1e-9;
            let (v_lo, d_lo) = sol.value_and_derivative(x);
            let (v_hi, d_hi) = sol.value_and_derivative(x + eps);
            assert!((v_lo - v_hi).norm() < 1e-8 * scale);
            assert!((d_lo - d_hi).norm() < 1e-6 * scale);
        }
    }

    #[test]
    fn exponential_coefficients_reproduce_state() {
        let cfg = final_cfg();
        for &k in &[0.2, 0.312, 0.5] {
            let sol = solve_scattering(&cfg, &unit(), k).unwrap();
            for &x in &[0.7, 3.3, 5.0, 6.1, 11.0, 15.0, 18.0] {
                let a = sol.wavefunction(x);
                let b = sol.from_coefficients(&cfg, x);
                assert!((a - b).norm() < 1e-10 * (1.0 + a.norm()), "x={x}");
            }
        }
    }

    #[test]
    fn branch_point_uses_linear_limit() {
        let cfg = final_cfg();
        let kb = (2.0 * 200.0 / unit().kappa()).sqrt();
        let at = solve_scattering(&cfg, &unit(), kb).unwrap();
        let near = solve_scattering(&cfg, &unit(), kb * (1.0 + 1e-9)).unwrap();
        assert!(at.coefficients[2].is_none() || at.s.is_finite());
        assert!((at.s - near.s).norm() < 1e-6);
        assert!((at.s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pole_at_paper_resonance() {
        let cfg = final_cfg();
        let u = unit();
        let e = Complex::new(134.509, -1.217);
        let mut k = (e * 2.0 / u.kappa()).sqrt();
        for _ in 0..40 {
            let h = 1e-7;
            let dd = (omega(&cfg, &u, k + h) - omega(&cfg, &u, k - h)) / (2.0 * h);
            k -= omega(&cfg, &u, k) / dd;
        }
        let (val, scale) = omega_scaled(&cfg, &u, k);
        assert!(val.norm() < 1e-8 * scale);
        assert!((k.re - 0.31207).abs() < 1e-4 && (k.im + 0.0014113).abs() < 1e-6, "{k}");
    }

    /// The pole equation as printed (with principal roots) vanishes at the
    /// complex conjugate of the fourth-quadrant pole.
    #[test]
    fn printed_pole_equation_vanishes_at_mirror() {
        let cfg = final_cfg();
        let u = unit();
        let printed = |k: Complex<f64>| {
            let kap = u.kappa();
            let q = (k * k + 2.0 * 100.0 / kap).sqrt();
            let p = (k * k - 2.0 * 200.0 / kap).sqrt();
            let (d, b) = (5.0, 10.0);
            let i = Complex::<f64>::i();
            let t1 = -(k - p) * (q + (2.0 * i * d * q).exp() * (q - p) + p);
            let t2 = (2.0 * i * b * p).exp() * (k + p) * (q - p + (2.0 * i * d * q).exp() * (q + p));
            (t1 + t2, t1.norm().max(t2.norm()))
        };
        let mut k = Complex::new(0.312, -0.0014);
        for _ in 0..40 {
            let h = 1e-7;
            let dd = (omega(&cfg, &u, k + h) - omega(&cfg, &u, k - h)) / (2.0 * h);
            k -= omega(&cfg, &u, k) / dd;
        }
        let (v, s) = printed(k.conj());
        assert!(v.norm() < 1e-8 * s, "{} vs {}", v.norm(), s);
        let (v4, s4) = printed(k);
        assert!(v4.norm() > 1e-3 * s4);
    }

    #[test]
    fn bound_state_of_initial_config() {
        let cfg = initial_cfg();
        let u = unit();
        let h = |kap: f64| (omega(&cfg, &u, Complex::new(0.0, kap)) / Complex::<f64>::i()).re;
        let (mut lo, mut hi) = (0.05, 0.3);
        assert!(h(lo) * h(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(lo) * h(mid) <= 0.0 { hi = mid } else { lo = mid }
        }
        let e0 = -0.5 * u.kappa() * lo * lo;
        assert!(e0 > -30.0 && e0 < -20.0, "E0 = {e0}");
        // thick-barrier limit: tan(q d) = -q / kappa_b
        let kb = (2.0 * (400.0 - e0) / u.kappa()).sqrt();
        let q = (2.0 * (350.0 + e0) / u.kappa()).sqrt();
        let res = (q * 5.0).tan() + q / kb;
        assert!(res.abs() < 0.05 * (q / kb), "step-well residual {res}");
    }

    #[test]
    fn mirror_symmetry_phase_is_minus_one() {
        let cfg = final_cfg();
        let u = unit();
        let ks = [
            Complex::new(0.3, -0.01),
            Complex::new(0.1, 0.2),
            Complex::new(1.1, -0.15),
            Complex::new(0.02, 0.7),
            Complex::new(0.5, 0.0),
            Complex::new(0.9, -0.05),
            Complex::new(0.0, 0.13),
            Complex::new(2.0, 0.1),
            Complex::new(0.33, -0.33),
            Complex::new(0.07, -0.001),
        ];
        for k in ks {
            let a = omega(&cfg, &u, -k.conj());
            let b = -omega(&cfg, &u, k).conj();
            assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn delay_time_zero_without_potential() {
        let cfg = PotentialConfig::new(0.0, 0.0, 5.0, 10.0).unwrap();
        for &k in &[0.1, 0.5, 2.0] {
            assert!(delay_time(&cfg, &unit(), k).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn phase_derivative_matches_analytic_square_well() {
        let cfg = PotentialConfig::new(100.0, 0.0, 5.0, 0.0).unwrap();
        let kappa = unit().kappa();
        for &k in &[0.1, 0.37, 0.8] {
            // analytic derivative of atan(k tan(qd)/q) - kd, with dq/dk = k/q
            let q = (k * k + 2.0 * 100.0 / kappa).sqrt();
            let t = (q * 5.0).tan();
            let z = k * t / q;
            let dz = t / q + k * (5.0 * (1.0 + t * t) * k / q) / q - k * t * (k / q) / (q * q);
            let want = dz / (1.0 + z * z) - 5.0;
            let got = phase_derivative(&cfg, &unit(), k).unwrap();
            assert!((got - want).abs() < 1e-7 * want.abs().max(1.0), "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn delay_time_peak_near_resonance() {
        let cfg = final_cfg();
        let u = unit();
        let gamma = 2.4333;
        let e_r = 134.5112;
        let k_r = u.wavenumber(e_r);
        let peak = delay_time(&cfg, &u, k_r).unwrap();
        assert!((peak - 4.0 / gamma).abs() < 0.02 * 4.0 / gamma, "peak {peak}");
        for sign in [-1.0, 1.0] {
            let half = delay_time(&cfg, &u, u.wavenumber(e_r + sign * gamma / 2.0)).unwrap();
            assert!((half / peak - 0.5).abs() < 0.05 * 0.5, "half {half}");
        }
    }

    #[test]
    fn phase_jumps_by_pi_across_resonance() {
        let cfg = final_cfg();
        let u = unit();
        let (e_r, gamma) = (134.5112, 2.4333);
        let ks: Vec<f64> = (0..=400)
            .map(|i| u.wavenumber(e_r - 10.0 * gamma + 20.0 * gamma * i as f64 / 400.0))
            .collect();
        let d = phase_shift_curve(&cfg, &u, &ks).unwrap();
        let n = ks.len() - 1;
        // The hard-wall background -k(d+b) is smooth across the window; remove
        // it with the slope measured at the window edges.
        let slope_lo = (d[1] - d[0]) / (ks[1] - ks[0]);
        let slope_hi = (d[n] - d[n - 1]) / (ks[n] - ks[n - 1]);
        let background = 0.5 * (slope_lo + slope_hi) * (ks[n] - ks[0]);
        let rise = d[n] - d[0] - background;
        let pi = std::f64::consts::PI;
        assert!(rise > 0.8 * pi && rise < 1.2 * pi, "resonant rise {rise}");
        // raw rise still dominated by the resonance
        assert!(d[n] - d[0] > 0.5 * pi);
    }

    #[test]
    fn coarse_grid_is_refined_not_rejected() {
        let cfg = final_cfg();
        let u = unit();
        let coarse = [0.25, 0.40];
        let fine: Vec<f64> = (0..=3000).map(|i| 0.25 + 0.15 * i as f64 / 3000.0).collect();
        let a = phase_shift_curve(&cfg, &u, &coarse).unwrap();
        let b = phase_shift_curve(&cfg, &u, &fine).unwrap();
        assert!(((a[1] - a[0]) - (b[3000] - b[0])).abs() < 1e-9);
    }

    #[test]
    fn unwrap_rejects_nothing_and_restores_ramp() {
        let ramp: Vec<f64> = (0..50).map(|i| 0.4 * i as f64).collect();
        let wrapped: Vec<f64> = ramp.iter().map(|v| (v + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI).collect();
        let un = unwrap_phase(&wrapped);
        for (a, b) in un.iter().zip(&ramp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn f32_matches_f64() {
        let c32 = PotentialConfig::<f32>::new(100.0, 200.0, 5.0, 10.0).unwrap();
        let u32 = UnitSystem::<f32>::sodium23();
        let s32 = solve_scattering(&c32, &u32, 0.4).unwrap().s;
        let s64 = solve_scattering(&final_cfg(), &unit(), 0.4).unwrap().s;
        assert!((s32.re as f64 - s64.re).abs() < 1e-4 && (s32.im as f64 - s64.im).abs() < 1e-4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn unitarity(vw in 0.0..600.0f64, vb in 0.0..600.0f64, d in 0.5..10.0f64, b in 0.0..15.0f64, k in 0.005..3.0f64) {
            let cfg = PotentialConfig::new(vw, vb, d, b).unwrap();
            let sol = solve_scattering(&cfg, &unit(), k).unwrap();
            prop_assert!((sol.s.norm() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn channel_relations_exact(vw in 0.0..600.0f64, vb in 0.0..600.0f64, kr in -1.0..1.0f64, ki in -1.0..1.0f64) {
            let cfg = PotentialConfig::new(vw, vb, 5.0, 10.0).unwrap();
            let u = unit();
            let k = Complex::new(kr, ki);
            let w = ChannelWavenumbers::new(&cfg, &u, k);
            let a = w.q_sq - k * k - 2.0 * vw / u.kappa();
            let b = k * k - w.q_prime_sq - 2.0 * vb / u.kappa();
            prop_assert!(a.norm() < 1e-12 * (1.0 + w.q_sq.norm()));
            prop_assert!(b.norm() < 1e-12 * (1.0 + w.q_prime_sq.norm()));
        }

        #[test]
        fn branch_invariance(vw in 0.0..600.0f64, vb in 0.0..600.0f64, kr in 0.01..1.0f64, ki in -0.3..0.3f64) {
            // S and Ω must not depend on which root of q² and q'² is taken.
            let cfg = PotentialConfig::new(vw, vb, 5.0, 10.0).unwrap();
            let u = unit();
            let k = Complex::new(kr, ki);
            let it = Interior::new(&cfg, &u, k);
            let w = it.waves;
            for (sq, sp) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let q = w.q() * sq;
                let p = w.q_prime() * sp;
                let ud = (q * 5.0).sin() / q;
                let dud = (q * 5.0).cos();
                let f = ud * (p * 10.0).cos() + dud * (p * 10.0).sin() / p;
                let g = -ud * p * (p * 10.0).sin() + dud * (p * 10.0).cos();
                let scale = it.f.norm() + it.g.norm() + 1e-300;
                prop_assert!((f - it.f).norm() < 1e-9 * scale);
                prop_assert!((g - it.g).norm() < 1e-9 * scale * (1.0 + w.q_prime_sq.norm()));
            }
        }

        #[test]
        fn phase_unwrap_gauge_invariance(raw in proptest::collection::vec(-3.1..3.1f64, 2..40)) {
            let a = unwrap_phase(&raw);
            let shifted: Vec<f64> = raw.iter().map(|v| v + 2.0 * std::f64::consts::PI).collect();
            let b = unwrap_phase(&shifted);
            for i in 1..a.len() {
                prop_assert!(((a[i] - a[i - 1]) - (b[i] - b[i - 1])).abs() < 1e-12);
            }
        }
    }
}
