//! Zeros of the pole function in the complex wave-number plane.
//!
//! Candidate zeros come from recursive subdivision of the search rectangle;
//! each cell's zero count is the winding number of `Ω` along its boundary,
//! obtained by tracking `arg Ω` with adaptive steps. Cells holding a single
//! zero are handed to complex Newton. Bound states are bracketed on the
//! imaginary axis where `Ω(iκ)/i` is real.

use crate::scattering::omega_scaled;
use crate::{Complex, Error, PotentialConfig, Real, Result, UnitSystem};

type C<T> = Complex<T>;

/// Where to look for zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchRegion<T> {
    /// Open rectangle `re.0 < Re k < re.1`, `im.0 < Im k < im.1`.
    Rectangle { re: (T, T), im: (T, T) },
    /// The positive imaginary axis up to `i sqrt(2 V_w / kappa)`.
    BoundStates,
}

impl<T: Real> SearchRegion<T> {
    /// Fourth-quadrant rectangle `(0, re_max) × (-im_depth, 0)`.
    pub fn resonances(re_max: T, im_depth: T) -> Self {
        SearchRegion::Rectangle { re: (T::zero(), re_max), im: (-im_depth, T::zero()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PoleKind {
    /// Positive imaginary axis, `E < 0`.
    Bound,
    /// Fourth quadrant, decaying quasi-bound state.
    Resonance,
    /// Third quadrant, mirror image of a resonance.
    Antiresonance,
    /// Negative imaginary axis (virtual state).
    Antibound,
}

impl std::fmt::Display for PoleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PoleKind::Bound => "bound",
            PoleKind::Resonance => "resonance",
            PoleKind::Antiresonance => "antiresonance",
            PoleKind::Antibound => "antibound",
        };
        f.write_str(s)
    }
}

/// An S-matrix pole and its derived energy parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resonance<T> {
    pub k_res: C<T>,
    /// `(kappa/2) k_res²`.
    pub e_complex: C<T>,
    pub e_r: T,
    /// `|2 kappa k1 k2|`, zero for poles on the imaginary axis.
    pub gamma: T,
    /// `1/gamma`, infinite for bound states.
    pub tau: T,
    pub kind: PoleKind,
    /// `|Ω(k_res)| / max(|k f|, |g|)`.
    pub residual: T,
}

/// Relative angular tolerance for treating a pole as lying on the imaginary axis.
const AXIS_TOLERANCE: f64 = 1e-9;

impl<T: Real> Resonance<T> {
    /// Classifies `k` and derives the energy parameters. Poles within the
    /// angular tolerance of the imaginary axis are snapped onto it.
    pub fn from_pole(unit: &UnitSystem<T>, mut k: C<T>, residual: T) -> Self {
        let on_axis = k.re.abs() <= T::tolerance(AXIS_TOLERANCE) * k.norm();
        let kind = if on_axis {
            k.re = T::zero();
            if k.im > T::zero() {
                PoleKind::Bound
            } else {
                PoleKind::Antibound
            }
        } else if k.re > T::zero() {
            // An off-axis zero with Im k >= 0 can only be a very narrow
            // resonance whose width is below the floating-point resolution.
            PoleKind::Resonance
        } else {
            PoleKind::Antiresonance
        };
        let e_complex = unit.complex_energy(k);
        let (gamma, tau) = match kind {
            PoleKind::Bound | PoleKind::Antibound => (T::zero(), T::infinity()),
            _ => {
                let g = (T::lit(2.0) * unit.kappa() * k.re * k.im).abs();
                (g, T::one() / g)
            }
        };
        let e_r = match kind {
            PoleKind::Bound | PoleKind::Antibound => -T::lit(0.5) * unit.kappa() * k.im * k.im,
            _ => e_complex.re,
        };
        Self { k_res: k, e_complex, e_r, gamma, tau, kind, residual }
    }
}

fn residual_tolerance<T: Real>() -> T {
    T::tolerance(1e-10)
}

fn omega_rel<T: Real>(config: &PotentialConfig<T>, unit: &UnitSystem<T>, k: C<T>) -> (C<T>, T) {
    omega_scaled(config, unit, k)
}

/// Complex Newton iteration on `Ω` from `seed`.
pub fn refine_pole<T: Real>(
    config: &PotentialConfig<T>,
    unit: &UnitSystem<T>,
    seed: C<T>,
) -> Result<Resonance<T>> {
    let tol = residual_tolerance::<T>();
    let mut k = seed;
    let step_scale = T::epsilon().cbrt();
    for _ in 0..100 {
        let (val, scale) = omega_rel(config, unit, k);
        if !(val.re.is_finite() && val.im.is_finite()) {
            break;
        }
        let h = step_scale * (T::one() + k.norm());
        let hc = C::new(h, T::zero());
        let deriv = (omega_rel(config, unit, k + hc).0 - omega_rel(config, unit, k - hc).0) / (hc * T::lit(2.0));
        if deriv.norm() == T::zero() {
            break;
        }
        let step = val / deriv;
        k = k - step;
        if val.norm() <= tol * scale * T::lit(1e-2) || step.norm() <= T::epsilon() * T::lit(4.0) * k.norm() {
            let (v2, s2) = omega_rel(config, unit, k);
            let rel = v2.norm() / s2;
            if rel < tol {
                return Ok(Resonance::from_pole(unit, k, rel));
            }
        }
    }
    let (v, s) = omega_rel(config, unit, k);
    let rel = v.norm() / s;
    if rel < tol && k.re.is_finite() {
        return Ok(Resonance::from_pole(unit, k, rel));
    }
    Err(Error::NewtonFailure { re: seed.re.to_f64_lossy(), im: seed.im.to_f64_lossy() })
}

/// Winding number of `Ω` around the positively oriented rectangle.
struct Winding<'a, T> {
    config: &'a PotentialConfig<T>,
    unit: &'a UnitSystem<T>,
}

impl<T: Real> Winding<'_, T> {
    fn eval(&self, k: C<T>) -> Result<C<T>> {
        let (v, s) = omega_rel(self.config, self.unit, k);
        if v.norm() <= residual_tolerance::<T>() * s * T::lit(1e3) || !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::ZeroOnContour { re: k.re.to_f64_lossy(), im: k.im.to_f64_lossy() });
        }
        Ok(v)
    }

    /// Change of `arg Ω` along the segment `a → b`.
    fn segment(&self, a: C<T>, fa: C<T>, b: C<T>, fb: C<T>, depth: usize) -> Result<T> {
        let m = (a + b) * T::lit(0.5);
        let fm = self.eval(m)?;
        let d1 = (fm / fa).arg();
        let d2 = (fb / fm).arg();
        let whole = (fb / fa).arg();
        let limit = T::FRAC_PI_4();
        let consistent = (d1 + d2 - whole).abs() < T::lit(1e-6).max(T::epsilon() * T::lit(100.0));
        if (d1.abs() < limit && d2.abs() < limit && consistent) || depth == 0 {
            if depth == 0 && !consistent {
                return Err(Error::ZeroOnContour { re: m.re.to_f64_lossy(), im: m.im.to_f64_lossy() });
            }
            return Ok(d1 + d2);
        }
        Ok(self.segment(a, fa, m, fm, depth - 1)? + self.segment(m, fm, b, fb, depth - 1)?)
    }

    fn count(&self, re: (T, T), im: (T, T)) -> Result<i64> {
        let corners = [
            C::new(re.0, im.0),
            C::new(re.1, im.0),
            C::new(re.1, im.1),
            C::new(re.0, im.1),
        ];
        let per_edge = 32usize;
        let mut total = T::zero();
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            let mut za = a;
            let mut fa = self.eval(za)?;
            for i in 1..=per_edge {
                let t = T::from_count(i) / T::from_count(per_edge);
                let zb = a + (b - a) * t;
                let fb = self.eval(zb)?;
                total += self.segment(za, fa, zb, fb, 30)?;
                za = zb;
                fa = fb;
            }
        }
        let n = total / (T::lit(2.0) * T::PI());
        let r = n.round();
        if (n - r).abs() > T::lit(0.05) {
            return Err(Error::ZeroOnContour { re: re.0.to_f64_lossy(), im: im.0.to_f64_lossy() });
        }
        Ok(r.to_i64().unwrap_or(-1))
    }

    /// Counts with the rectangle nudged outwards by growing amounts when the
    /// contour passes through a zero.
    fn count_robust(&self, re: (T, T), im: (T, T)) -> Result<(i64, (T, T), (T, T))> {
        let scale = (re.1 - re.0).max(im.1 - im.0);
        let mut last = None;
        for attempt in 0..6 {
            let eps = if attempt == 0 { T::zero() } else { scale * T::lit(1e-7) * T::lit(7.3).powi(attempt) };
            let (r, i) = ((re.0 - eps, re.1 + eps * T::lit(0.61)), (im.0 - eps * T::lit(0.83), im.1 + eps * T::lit(0.47)));
            match self.count(r, i) {
                Ok(n) => return Ok((n, r, i)),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap())
    }
}

/// Membership test with a margin of `1e-9` of the cell size, so zeros
/// hugging an edge (narrow resonances next to the real axis) are kept.
fn inside<T: Real>(k: C<T>, re: (T, T), im: (T, T)) -> bool {
    let m = T::lit(1e-9) * (re.1 - re.0).max(im.1 - im.0);
    k.re > re.0 - m && k.re < re.1 + m && k.im > im.0 - m && k.im < im.1 + m
}

fn search_rectangle<T: Real>(
    w: &Winding<'_, T>,
    re: (T, T),
    im: (T, T),
    expected: i64,
    depth: usize,
    out: &mut Vec<Resonance<T>>,
) -> Result<()> {
    if expected <= 0 {
        return Ok(());
    }
    if expected == 1 {
        let center = C::new((re.0 + re.1) * T::lit(0.5), (im.0 + im.1) * T::lit(0.5));
        if let Ok(p) = refine_pole(w.config, w.unit, center) {
            if inside(p.k_res, re, im) || (p.kind == PoleKind::Bound && inside(C::new(T::zero(), p.k_res.im), re, im)) {
                out.push(p);
                return Ok(());
            }
        }
    }
    if depth == 0 {
        return Err(Error::IncompleteSearch { found: out.len(), expected });
    }
    // split the longer side, slightly off-centre so split lines rarely hit zeros
    let (wr, wi) = (re.1 - re.0, im.1 - im.0);
    let mut fraction = T::lit(0.5);
    for attempt in 0..5 {
        let halves = if wr >= wi {
            let s = re.0 + wr * fraction;
            [((re.0, s), im), ((s, re.1), im)]
        } else {
            let s = im.0 + wi * fraction;
            [(re, (im.0, s)), (re, (s, im.1))]
        };
        let counts: Result<Vec<i64>> = halves.iter().map(|(r, i)| w.count(*r, *i)).collect();
        match counts {
            Ok(c) if c.iter().sum::<i64>() == expected => {
                for ((r, i), n) in halves.iter().zip(c) {
                    search_rectangle(w, *r, *i, n, depth - 1, out)?;
                }
                return Ok(());
            }
            _ => {
                fraction = T::lit(0.5) + T::lit(0.0731) * T::from_count(attempt + 1) * if attempt % 2 == 0 { T::one() } else { -T::one() };
            }
        }
    }
    Err(Error::IncompleteSearch { found: out.len(), expected })
}

fn bound_states<T: Real>(config: &PotentialConfig<T>, unit: &UnitSystem<T>) -> Result<Vec<Resonance<T>>> {
    let kappa_max = (T::lit(2.0) * config.v_well() / unit.kappa()).sqrt();
    if kappa_max <= T::zero() {
        return Ok(Vec::new());
    }
    let h = |kap: T| -> T { (omega_rel(config, unit, C::new(T::zero(), kap)).0 / C::<T>::i()).re };
    // Each bound state adds one oscillation inside the well.
    let nodes_estimate = (kappa_max * config.well_width() / T::PI()).to_f64_lossy().ceil() as usize + 1;
    let n = (400 * nodes_estimate).max(400);
    let mut roots = Vec::new();
    let lo0 = kappa_max * T::lit(1e-9);
    let mut prev_x = lo0;
    let mut prev_h = h(prev_x);
    for i in 1..=n {
        let x = lo0 + (kappa_max - lo0) * T::from_count(i) / T::from_count(n);
        let hx = h(x);
        if hx == T::zero() {
            roots.push(x);
        } else if prev_h * hx < T::zero() {
            let (mut a, mut b, mut ha) = (prev_x, x, prev_h);
            for _ in 0..200 {
                let m = (a + b) * T::lit(0.5);
                if m <= a || m >= b {
                    break;
                }
                let hm = h(m);
                if ha * hm <= T::zero() {
                    b = m;
                } else {
                    a = m;
                    ha = hm;
                }
            }
            roots.push((a + b) * T::lit(0.5));
        }
        prev_x = x;
        prev_h = hx;
    }
    let mut poles = Vec::with_capacity(roots.len());
    for r in roots {
        let k = C::new(T::zero(), r);
        let (v, s) = omega_rel(config, unit, k);
        poles.push(Resonance::from_pole(unit, k, v.norm() / s));
    }
    // certify with a thin rectangle around the axis segment
    let w = Winding { config, unit };
    // wide enough that the contour stays clear of the zeros in low precision
    let half_width = kappa_max * T::lit(1e-3).max(T::epsilon().sqrt() * T::lit(30.0));
    let (count, _, _) = w.count_robust((-half_width, half_width), (lo0 * T::lit(0.5), kappa_max * (T::one() + T::lit(1e-6))))?;
    if count != poles.len() as i64 {
        return Err(Error::IncompleteSearch { found: poles.len(), expected: count });
    }
    Ok(poles)
}

fn dedupe<T: Real>(poles: &mut Vec<Resonance<T>>) {
    let mut kept: Vec<Resonance<T>> = Vec::with_capacity(poles.len());
    for p in poles.drain(..) {
        let dup = kept
            .iter()
            .any(|q| (q.k_res - p.k_res).norm() <= T::tolerance(1e-9) * p.k_res.norm().max(T::one()));
        if !dup {
            kept.push(p);
        }
    }
    *poles = kept;
}

/// Finds every zero of `Ω` in `region`, refines it and certifies the count
/// with the argument principle. The result is sorted by `e_r` (then by
/// `Im k`) and truncated to `max_count`.
pub fn find_poles<T: Real>(
    config: &PotentialConfig<T>,
    unit: &UnitSystem<T>,
    region: SearchRegion<T>,
    max_count: usize,
) -> Result<Vec<Resonance<T>>> {
    let mut poles = match region {
        SearchRegion::BoundStates => bound_states(config, unit)?,
        SearchRegion::Rectangle { re, im } => {
            if !(re.1 > re.0 && im.1 > im.0) {
                return Err(Error::invalid("region", "rectangle must have positive width and height"));
            }
            let w = Winding { config, unit };
            let (n, r, i) = w.count_robust(re, im)?;
            let mut out = Vec::new();
            search_rectangle(&w, r, i, n, 40, &mut out)?;
            dedupe(&mut out);
            if out.len() as i64 != n {
                return Err(Error::IncompleteSearch { found: out.len(), expected: n });
            }
            out
        }
    };
    poles.sort_by(|a, b| {
        a.e_r
            .partial_cmp(&b.e_r)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.k_res.im.partial_cmp(&b.k_res.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    poles.truncate(max_count);
    Ok(poles)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> UnitSystem<f64> {
        UnitSystem::sodium23()
    }

    #[test]
    fn paper_resonance() {
        let cfg = PotentialConfig::new(100.0, 200.0, 5.0, 10.0).unwrap();
        let poles = find_poles(&cfg, &unit(), SearchRegion::resonances(1.2, 0.2), 50).unwrap();
        let p = poles[0];
        assert_eq!(p.kind, PoleKind::Resonance);
        assert!((p.e_complex.re - 134.509).abs() < 1e-3 * 134.509, "{}", p.e_complex);
        assert!((p.e_complex.im + 1.217).abs() < 1e-3 * 1.217, "{}", p.e_complex);
        assert!((p.tau * p.gamma - 1.0).abs() <= f64::EPSILON);
        assert!(p.residual < 1e-10);
        let k = p.k_res;
        let e_r = 0.5 * unit().kappa() * (k.re * k.re - k.im * k.im);
        assert!((p.e_r - e_r).abs() < 1e-12 * e_r);
        for w in poles.windows(2) {
            assert!(w[0].e_r <= w[1].e_r);
        }
    }

    #[test]
    fn single_bound_state_initially() {
        let cfg = PotentialConfig::new(350.0, 400.0, 5.0, 10.0).unwrap();
        let b = find_poles(&cfg, &unit(), SearchRegion::BoundStates, 10).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].kind, PoleKind::Bound);
        assert_eq!(b[0].k_res.re, 0.0);
        assert!(b[0].e_r > -30.0 && b[0].e_r < -20.0);
        assert_eq!(b[0].gamma, 0.0);
    }

    #[test]
    fn final_config_has_no_bound_state() {
        let cfg = PotentialConfig::new(100.0, 200.0, 5.0, 10.0).unwrap();
        assert!(find_poles(&cfg, &unit(), SearchRegion::BoundStates, 10).unwrap().is_empty());
    }

    #[test]
    fn deep_well_approaches_box_levels() {
        let kap = unit().kappa();
        for &vw in &[2.0e4, 2.0e5] {
            let cfg = PotentialConfig::new(vw, 0.0, 5.0, 10.0).unwrap();
            let b = find_poles(&cfg, &unit(), SearchRegion::BoundStates, 3).unwrap();
            assert_eq!(b.len(), 3);
            for (n, p) in b.iter().enumerate() {
                let box_level = 0.5 * kap * ((n + 1) as f64 * std::f64::consts::PI / 5.0).powi(2) - vw;
                let rel = ((p.e_r - box_level) / (box_level + vw)).abs();
                // leakage correction to the box levels scales like 1/sqrt(V_w)
                let bound = 4.0 * (kap / 2.0).sqrt() / (5.0 * vw.sqrt());
                assert!(rel < bound, "V_w={vw} n={n}: rel {rel} bound {bound}");
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = PotentialConfig::new(100.0, 200.0, 5.0, 10.0).unwrap();
        let a = find_poles(&cfg, &unit(), SearchRegion::resonances(1.2, 0.2), 50).unwrap();
        let b = find_poles(&cfg, &unit(), SearchRegion::resonances(1.2, 0.2), 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classification() {
        let u = unit();
        let r = Resonance::from_pole(&u, C::new(-0.3, -0.01), 0.0);
        assert_eq!(r.kind, PoleKind::Antiresonance);
        assert!(r.gamma > 0.0);
        let a = Resonance::from_pole(&u, C::new(1e-14, -0.2), 0.0);
        assert_eq!(a.kind, PoleKind::Antibound);
        assert_eq!(a.k_res.re, 0.0);
    }

    #[test]
    fn max_count_truncates() {
        let cfg = PotentialConfig::new(100.0, 200.0, 5.0, 10.0).unwrap();
        let p = find_poles(&cfg, &unit(), SearchRegion::resonances(1.2, 0.2), 1).unwrap();
        assert_eq!(p.len(), 1);
    }
}
