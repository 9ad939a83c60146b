//! Iso-resonance curves: `(V_w, V_b)` pairs sharing one resonance energy.
//!
//! The traced family is the lowest pole (the ground level of the well). For
//! the first point the pole is located at a high barrier, where it is narrow,
//! and followed by Newton continuation while the barrier is lowered until its
//! real energy crosses the target. The curve is then continued in `V_w` with
//! a secant iteration in `V_b`, each pole re-found by Newton from the previous
//! one.

use crate::poles::{find_poles, refine_pole, PoleKind, Resonance, SearchRegion};
use crate::{Error, PotentialConfig, Real, Result, UnitSystem};

/// Parameters of an iso-curve trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoSearch<T> {
    /// `V_w` range, start to end.
    pub v_well_range: (T, T),
    /// Number of emitted `V_w` samples (including both ends).
    pub samples: usize,
    /// Highest barrier tried when bracketing the first point.
    pub v_barrier_max: T,
    pub d: T,
    pub b: T,
}

impl<T: Real> IsoSearch<T> {
    pub fn new(d: T, b: T) -> Self {
        Self {
            v_well_range: (T::lit(5.0), T::lit(350.0)),
            samples: 60,
            v_barrier_max: T::lit(2000.0),
            d,
            b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoSample<T> {
    pub v_well: T,
    pub v_barrier: T,
    pub pole: Resonance<T>,
}

impl<T: Real> IsoSample<T> {
    pub fn gamma(&self) -> T {
        self.pole.gamma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsoCurve<T> {
    pub e_r_target: T,
    pub samples: Vec<IsoSample<T>>,
    /// Why the curve stops early, if it does.
    pub truncated: Option<String>,
}

impl<T: Real> IsoCurve<T> {
    /// Relative spread `(max - min) / max` of `(Γ, V_b)` over the samples
    /// with `V_w` in the lowest `fraction` of `v_well_range`. `None` with
    /// fewer than two such samples.
    pub fn shallow_variation(&self, v_well_range: (T, T), fraction: T) -> Option<(T, T)> {
        let cut = v_well_range.0 + (v_well_range.1 - v_well_range.0) * fraction;
        let pts: Vec<&IsoSample<T>> = self.samples.iter().filter(|s| s.v_well <= cut).collect();
        if pts.len() < 2 {
            return None;
        }
        let spread = |f: &dyn Fn(&IsoSample<T>) -> T| {
            let (lo, hi) = pts.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), s| (lo.min(f(s)), hi.max(f(s))));
            (hi - lo) / hi
        };
        Some((spread(&|s| s.gamma()), spread(&|s| s.v_barrier)))
    }

    /// `|dV_b/dV_w|` from the first two and the last two samples.
    pub fn end_slopes(&self) -> Option<(T, T)> {
        let n = self.samples.len();
        if n < 2 {
            return None;
        }
        let slope = |a: &IsoSample<T>, b: &IsoSample<T>| ((b.v_barrier - a.v_barrier) / (b.v_well - a.v_well)).abs();
        Some((slope(&self.samples[0], &self.samples[1]), slope(&self.samples[n - 2], &self.samples[n - 1])))
    }
}

fn config<T: Real>(s: &IsoSearch<T>, vw: T, vb: T) -> Result<PotentialConfig<T>> {
    PotentialConfig::new(vw, vb, s.d, s.b)
}

/// Lowest pole of a configuration (bound state if any, else lowest resonance).
fn lowest_pole<T: Real>(cfg: &PotentialConfig<T>, unit: &UnitSystem<T>) -> Result<Resonance<T>> {
    if let Some(b) = find_poles(cfg, unit, SearchRegion::BoundStates, 1)?.first() {
        return Ok(*b);
    }
    let box_level = T::lit(0.5) * unit.kappa() * (T::PI() / cfg.well_width()).powi(2);
    let k_max = unit.wavenumber(box_level * T::lit(1.5) + T::lit(10.0));
    let region = SearchRegion::resonances(k_max, k_max * T::lit(0.1));
    find_poles(cfg, unit, region, 1)?
        .first()
        .copied()
        .ok_or_else(|| Error::IsoSearch("no pole found at the highest barrier".into()))
}

/// Newton continuation that rejects jumps to another family.
fn track<T: Real>(cfg: &PotentialConfig<T>, unit: &UnitSystem<T>, prev: &Resonance<T>) -> Option<Resonance<T>> {
    let p = refine_pole(cfg, unit, prev.k_res).ok()?;
    let jump = (p.k_res - prev.k_res).norm();
    if jump > T::lit(0.25) * prev.k_res.norm().max(T::lit(1e-3)) {
        return None;
    }
    if p.kind == PoleKind::Antiresonance {
        return None;
    }
    Some(p)
}

/// First point: `V_b` at `V_w = start` whose lowest pole has `e_r = target`.
fn first_point<T: Real>(s: &IsoSearch<T>, unit: &UnitSystem<T>, target: T) -> Result<IsoSample<T>> {
    let vw = s.v_well_range.0;
    let mut vb = s.v_barrier_max;
    let mut pole = lowest_pole(&config(s, vw, vb)?, unit)?;
    if pole.e_r < target {
        return Err(Error::IsoSearch(format!(
            "target {target} above the lowest level {} reachable with V_b <= {}",
            pole.e_r, s.v_barrier_max
        )));
    }
    // march the barrier down until the level drops below the target
    let min_step = s.v_barrier_max * T::lit(1e-9);
    let mut step = vb * T::lit(0.02);
    let (hi_vb, hi_pole, lo_vb, lo_pole) = loop {
        let cand_vb = (vb - step).max(T::zero());
        let tracked = track(&config(s, vw, cand_vb)?, unit, &pole);
        match tracked {
            Some(p) => {
                if p.e_r < target {
                    break (vb, pole, cand_vb, p);
                }
                if cand_vb == T::zero() {
                    return Err(Error::IsoSearch(format!(
                        "target {target} below the lowest achievable resonance energy {} at V_w = {vw}",
                        p.e_r
                    )));
                }
                vb = cand_vb;
                pole = p;
                step = (step * T::lit(1.5)).min(vb * T::lit(0.05)).max(min_step);
            }
            None => {
                step = step * T::lit(0.5);
                if step < min_step {
                    return Err(Error::IsoSearch(format!("lost the pole near V_b = {vb} at V_w = {vw}")));
                }
            }
        }
    };
    let (vb, pole) = solve_barrier(s, unit, vw, target, (hi_vb, hi_pole), (lo_vb, lo_pole))?;
    Ok(IsoSample { v_well: vw, v_barrier: vb, pole })
}

/// Secant iteration on `e_r(V_b) - target` from two tracked points, falling
/// back to bisection when the secant leaves the bracket.
fn solve_barrier<T: Real>(
    s: &IsoSearch<T>,
    unit: &UnitSystem<T>,
    vw: T,
    target: T,
    a: (T, Resonance<T>),
    b: (T, Resonance<T>),
) -> Result<(T, Resonance<T>)> {
    let tol = target.abs() * T::tolerance(1e-10);
    let (mut x0, mut p0) = a;
    let (mut x1, mut p1) = b;
    let bracketed = |f0: T, f1: T| f0 * f1 <= T::zero();
    for _ in 0..100 {
        let (f0, f1) = (p0.e_r - target, p1.e_r - target);
        if f1.abs() <= tol {
            return Ok((x1, p1));
        }
        if f0.abs() <= tol {
            return Ok((x0, p0));
        }
        let mut x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        let (lo, hi) = (x0.min(x1), x0.max(x1));
        if bracketed(f0, f1) && !(x2 > lo && x2 < hi) {
            x2 = T::lit(0.5) * (x0 + x1);
        }
        if !(x2 >= T::zero()) || !x2.is_finite() {
            x2 = T::lit(0.5) * x1.min(x0);
        }
        let seed = if (x2 - x0).abs() < (x2 - x1).abs() { &p0 } else { &p1 };
        let p2 = track(&config(s, vw, x2)?, unit, seed)
            .ok_or_else(|| Error::IsoSearch(format!("lost the pole near V_b = {x2} at V_w = {vw}")))?;
        let f2 = p2.e_r - target;
        if bracketed(f0, f1) {
            if bracketed(f0, f2) {
                x1 = x2;
                p1 = p2;
            } else {
                x0 = x2;
                p0 = p2;
            }
        } else {
            x0 = x1;
            p0 = p1;
            x1 = x2;
            p1 = p2;
        }
        if (x1 - x0).abs() <= x1.abs() * T::epsilon() * T::lit(8.0) {
            let best = if (p0.e_r - target).abs() < (p1.e_r - target).abs() { (x0, p0) } else { (x1, p1) };
            if (best.1.e_r - target).abs() <= tol * T::lit(1e3) {
                return Ok(best);
            }
            break;
        }
    }
    Err(Error::IsoSearch(format!("barrier iteration did not converge at V_w = {vw}")))
}

/// Next point at `vw` continued from `prev` (and the one before for a predictor).
fn continue_to<T: Real>(
    s: &IsoSearch<T>,
    unit: &UnitSystem<T>,
    target: T,
    vw: T,
    prev: &IsoSample<T>,
    before: Option<&IsoSample<T>>,
) -> Result<IsoSample<T>> {
    let predicted = match before {
        Some(bp) => {
            let slope = (prev.v_barrier - bp.v_barrier) / (prev.v_well - bp.v_well);
            (prev.v_barrier + slope * (vw - prev.v_well)).max(prev.v_barrier * T::lit(0.5))
        }
        None => prev.v_barrier,
    };
    let p_a = track(&config(s, vw, prev.v_barrier)?, unit, &prev.pole)
        .ok_or_else(|| Error::IsoSearch(format!("lost the pole stepping V_w to {vw}")))?;
    let second = if (predicted - prev.v_barrier).abs() > prev.v_barrier * T::lit(1e-6) {
        predicted
    } else {
        prev.v_barrier * T::lit(1.001) + T::lit(1e-3)
    };
    let p_b = track(&config(s, vw, second)?, unit, &p_a)
        .ok_or_else(|| Error::IsoSearch(format!("lost the pole near V_b = {second} at V_w = {vw}")))?;
    let (v, pole) = solve_barrier(s, unit, vw, target, (prev.v_barrier, p_a), (second, p_b))?;
    Ok(IsoSample { v_well: vw, v_barrier: v, pole })
}

/// Traces the iso-resonance curve `Re E_pole(V_w, V_b) = e_r_target`.
///
/// If the continuation loses the pole, the curve is returned up to the last
/// good sample with [`IsoCurve::truncated`] set.
pub fn trace_iso_resonance<T: Real>(
    e_r_target: T,
    search: &IsoSearch<T>,
    unit: &UnitSystem<T>,
) -> Result<IsoCurve<T>> {
    if !(e_r_target > T::zero()) || !e_r_target.is_finite() {
        return Err(Error::invalid("e_r_target", format!("must be positive, got {e_r_target}")));
    }
    let (v0, v1) = search.v_well_range;
    if !(v0 >= T::zero() && v1 > v0) {
        return Err(Error::invalid("v_well_range", "need 0 <= start < end"));
    }
    if search.samples < 2 {
        return Err(Error::invalid("samples", "need at least two samples"));
    }
    let first = first_point(search, unit, e_r_target)?;
    let mut samples = vec![first];
    let mut truncated = None;
    let n = search.samples - 1;
    'outer: for i in 1..=n {
        let vw_target = v0 + (v1 - v0) * T::from_count(i) / T::from_count(n);
        // sub-step if the plain step loses the pole
        let mut sub = 1usize;
        loop {
            let mut local = *samples.last().unwrap();
            let mut before = if samples.len() >= 2 { Some(samples[samples.len() - 2]) } else { None };
            let start = local.v_well;
            let mut ok = true;
            for j in 1..=sub {
                let vw = start + (vw_target - start) * T::from_count(j) / T::from_count(sub);
                match continue_to(search, unit, e_r_target, vw, &local, before.as_ref()) {
                    Ok(next) => {
                        before = Some(local);
                        local = next;
                    }
                    Err(e) => {
                        ok = false;
                        if sub >= 256 {
                            truncated = Some(format!("stopped before V_w = {vw_target}: {e}"));
                            log::warn!("iso curve for E_R = {e_r_target} truncated: {e}");
                            break 'outer;
                        }
                        break;
                    }
                }
            }
            if ok {
                samples.push(local);
                break;
            }
            sub *= 4;
        }
    }
    Ok(IsoCurve { e_r_target, samples, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_target() {
        let u = UnitSystem::<f64>::sodium23();
        assert!(trace_iso_resonance(0.0, &IsoSearch::new(5.0, 10.0), &u).is_err());
        assert!(trace_iso_resonance(-3.0, &IsoSearch::new(5.0, 10.0), &u).is_err());
    }

    #[test]
    fn unreachable_target_fails_cleanly() {
        let u = UnitSystem::<f64>::sodium23();
        let mut s = IsoSearch::new(5.0, 10.0);
        s.samples = 3;
        let e = trace_iso_resonance(5.0e4, &s, &u).unwrap_err();
        assert!(matches!(e, Error::IsoSearch(_)));
    }

    #[test]
    fn passes_through_paper_final_config() {
        let u = UnitSystem::<f64>::sodium23();
        let mut s = IsoSearch::new(5.0, 10.0);
        s.v_well_range = (100.0, 110.0);
        s.samples = 2;
        let c = trace_iso_resonance(134.511_25, &s, &u).unwrap();
        assert!((c.samples[0].v_barrier - 200.0).abs() < 1e-3, "{}", c.samples[0].v_barrier);
    }
}
