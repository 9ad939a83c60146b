//! Energy distributions, line-shape fits and the switching-time scan.

use rayon::prelude::*;

use crate::fem::{element_mass, BlockMatrix};
use crate::initial::{ground_state, GridSpec, GroundStateSelection};
use crate::numerics::{levenberg_marquardt, LmOptions, Vec2};
use crate::poles::{find_poles, PoleKind, Resonance, SearchRegion};
use crate::propagator::{propagate, DecayRecord, PropagationSetup, DEFAULT_DT, DEFAULT_DX, DEFAULT_E_CUT};
use crate::scattering::solve_scattering;
use crate::wavefunction::WavefunctionGrid;
use crate::{Complex, Error, PotentialConfig, Real, Result, SwitchingSchedule, UnitSystem};

/// Ascending energy samples, ħ·s⁻¹.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrid<T> {
    energies: Vec<T>,
}

/// Default number of energy samples.
pub const DEFAULT_ENERGY_POINTS: usize = 2000;

impl<T: Real> EnergyGrid<T> {
    /// Validates an explicit grid (non-negative, strictly ascending, ≥ 2 points).
    pub fn from_energies(energies: Vec<T>) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::invalid("energies", "need at least two samples"));
        }
        if !(energies[0] >= T::zero()) || energies.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("energies", "must be non-negative and strictly ascending"));
        }
        Ok(Self { energies })
    }

    /// Uniform spacing `Γ/50` over `E_R ± 10Γ`, linear spacing over the rest
    /// of `[0, e_cut]`, `points` samples in total.
    pub fn around_resonance(e_r: T, gamma: T, e_cut: T, points: usize) -> Result<Self> {
        if !(gamma > T::zero()) || !(e_r > T::zero()) {
            return Err(Error::invalid("resonance", "need E_R > 0 and Γ > 0"));
        }
        let lo = (e_r - T::lit(10.0) * gamma).max(T::zero());
        let hi = e_r + T::lit(10.0) * gamma;
        if !(e_cut > hi) {
            return Err(Error::invalid("e_cut", format!("cutoff {e_cut} must exceed E_R + 10Γ = {hi}")));
        }
        let dense = ((hi - lo) / (gamma / T::lit(50.0))).ceil().to_usize().unwrap_or(0) + 1;
        if points < dense + 4 {
            return Err(Error::invalid("points", format!("need more than {dense} samples")));
        }
        let rest = points - dense;
        let (span_lo, span_hi) = (lo, e_cut - hi);
        let mut n_lo = if lo > T::zero() {
            (T::from_count(rest) * span_lo / (span_lo + span_hi)).round().to_usize().unwrap_or(0).max(2)
        } else {
            0
        };
        n_lo = n_lo.min(rest - 2);
        let n_hi = rest - n_lo;
        let mut e = Vec::with_capacity(points);
        for i in 0..n_lo {
            e.push(lo * T::from_count(i) / T::from_count(n_lo));
        }
        for i in 0..dense {
            e.push(lo + (hi - lo) * T::from_count(i) / T::from_count(dense - 1));
        }
        for i in 1..=n_hi {
            e.push(hi + (e_cut - hi) * T::from_count(i) / T::from_count(n_hi));
        }
        Self::from_energies(e)
    }

    /// Default grid for a resonance: 2000 points up to 3000 ħ·s⁻¹.
    pub fn for_resonance(res: &Resonance<T>) -> Result<Self> {
        Self::around_resonance(res.e_r, res.gamma, T::lit(DEFAULT_E_CUT), DEFAULT_ENERGY_POINTS)
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }
}

fn trapezoid<T: Real>(x: &[T], y: &[T]) -> T {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| (a[1] - a[0]) * (b[0] + b[1]) * T::lit(0.5)).sum()
}

/// `P(E)` on an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDistribution<T> {
    pub energies: Vec<T>,
    pub p: Vec<T>,
    /// `∫ P dE` (trapezoid).
    pub total: T,
    /// Time of the projected snapshot.
    pub projection_time: T,
}

impl<T: Real> EnergyDistribution<T> {
    /// `∫_a^b P dE` over the grid points inside `[a, b]`.
    pub fn weight_in(&self, a: T, b: T) -> T {
        let (x, y): (Vec<T>, Vec<T>) =
            self.energies.iter().zip(&self.p).filter(|(e, _)| **e >= a && **e <= b).map(|(e, p)| (*e, *p)).unzip();
        trapezoid(&x, &y)
    }

    /// Energy splitting the distribution's weight in half.
    pub fn median(&self) -> T {
        let half = self.total * T::lit(0.5);
        let mut acc = T::zero();
        for i in 1..self.energies.len() {
            let (e0, e1) = (self.energies[i - 1], self.energies[i]);
            let seg = (e1 - e0) * (self.p[i - 1] + self.p[i]) * T::lit(0.5);
            if acc + seg >= half && seg > T::zero() {
                return e0 + (e1 - e0) * (half - acc) / seg;
            }
            acc += seg;
        }
        *self.energies.last().unwrap()
    }

    /// `(E, P)` at the largest sample.
    pub fn peak(&self) -> (T, T) {
        let i = argmax(&self.p);
        (self.energies[i], self.p[i])
    }

    /// `∫ |P - Q| dE` against a distribution on the same grid.
    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        if self.energies != other.energies {
            return Err(Error::invalid("other", "distributions live on different energy grids"));
        }
        let d: Vec<T> = self.p.iter().zip(&other.p).map(|(a, b)| (*a - *b).abs()).collect();
        Ok(trapezoid(&self.energies, &d))
    }
}

fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Width of the edge region checked for containment, µm.
const CONTAINMENT_EDGE: f64 = 5.0;
/// Largest tolerated `|ψ|` near the edge relative to the maximum.
const CONTAINMENT_RATIO: f64 = 1e-8;

/// Projects `state` onto the δ-normalized scattering states of `target`:
/// `P(E) = |<ψ_k|state>|² / (kappa k)`.
///
/// The overlap is taken with the Hermite interpolant of `ψ_k` (its exact
/// values and slopes at the nodes) through the mass matrix.
pub fn energy_distribution<T: Real>(
    state: &WavefunctionGrid<T>,
    target: &PotentialConfig<T>,
    unit: &UnitSystem<T>,
    grid: &EnergyGrid<T>,
    projection_time: T,
) -> Result<EnergyDistribution<T>> {
    let bound = find_poles(target, unit, SearchRegion::BoundStates, usize::MAX)?;
    if !bound.is_empty() {
        return Err(Error::CompletenessViolation { count: bound.len() });
    }
    let max = state.max_abs();
    let edge = state.right_edge() - T::lit(CONTAINMENT_EDGE);
    let tail = state
        .nodes()
        .iter()
        .zip(state.values())
        .filter(|(x, _)| **x >= edge)
        .map(|(_, v)| v.norm())
        .fold(T::zero(), T::max);
    if tail > T::lit(CONTAINMENT_RATIO) * max {
        return Err(Error::Containment { ratio: (tail / max).to_f64_lossy() });
    }

    let mesh = state.mesh();
    let mut mass = BlockMatrix::zeros(mesh.len());
    for e in 0..mesh.elements() {
        mass.add_element(e, &element_mass(mesh.element_length(e)), Complex::new(T::one(), T::zero()));
    }
    let mut mc = vec![Vec2::zero(); mesh.len()];
    mass.apply(&state.dofs(), &mut mc);
    let x2 = target.outer_edge();
    let split = mesh.nodes().partition_point(|&x| x <= x2);
    let (inner_nodes, outer_nodes) = mesh.nodes().split_at(split);
    let (inner_mc, outer_mc) = mc.split_at(split);
    let norm = T::one() / (T::lit(2.0) * T::PI()).sqrt();

    let kappa = unit.kappa();
    let p: Vec<T> = grid
        .energies()
        .par_iter()
        .map(|&e| -> Result<T> {
            if e <= T::zero() {
                return Ok(T::zero());
            }
            let k = unit.wavenumber(e);
            let sol = solve_scattering(target, unit, k)?;
            let mut acc = Complex::new(T::zero(), T::zero());
            for (x, m) in inner_nodes.iter().zip(inner_mc) {
                let (v, d) = sol.value_and_derivative(*x);
                acc = acc + v.conj() * m.0[0] + d.conj() * m.0[1];
            }
            // outside: conj ψ = (e^{ikx} - S* e^{-ikx}) n, conj ψ' = ik (e^{ikx} + S* e^{-ikx}) n
            let ik = Complex::new(T::zero(), k);
            let (mut plus, mut minus) = (Complex::new(T::zero(), T::zero()), Complex::new(T::zero(), T::zero()));
            for (x, m) in outer_nodes.iter().zip(outer_mc) {
                let (s, c) = (k * *x).sin_cos();
                let ph = Complex::new(c, s);
                plus = plus + ph * (m.0[0] + ik * m.0[1]);
                minus = minus + ph.conj() * (m.0[0] - ik * m.0[1]);
            }
            acc = acc + (plus - sol.s.conj() * minus) * norm;
            Ok(acc.norm_sqr() / (kappa * k))
        })
        .collect::<Result<_>>()?;
    let total = trapezoid(grid.energies(), &p);
    Ok(EnergyDistribution { energies: grid.energies().to_vec(), p, total, projection_time })
}

/// Normalized pole Lorentzian on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianReference<T> {
    pub density: Vec<T>,
    /// `1 - ∫` of the Lorentzian over the grid's span (analytic).
    pub truncation_deficit: T,
}

/// `(Γ/2π) / ((E - E_R)² + (Γ/2)²)` at every grid energy.
pub fn lorentzian_reference<T: Real>(resonance: &Resonance<T>, energies: &[T]) -> Result<LorentzianReference<T>> {
    if resonance.kind != PoleKind::Resonance {
        return Err(Error::invalid("resonance", format!("pole kind is {}, not a resonance", resonance.kind)));
    }
    let (er, g) = (resonance.e_r, resonance.gamma);
    let hg = g * T::lit(0.5);
    let density = energies.iter().map(|&e| g / (T::lit(2.0) * T::PI()) / ((e - er).powi(2) + hg * hg)).collect();
    let deficit = match (energies.first(), energies.last()) {
        (Some(&a), Some(&b)) => T::one() - (((b - er) / hg).atan() - ((a - er) / hg).atan()) / T::PI(),
        _ => T::one(),
    };
    Ok(LorentzianReference { density, truncation_deficit: deficit })
}

/// Result of a Lorentzian fit `A (Γ/2)² / ((E - E_R)² + (Γ/2)²) + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit<T> {
    pub e_r: T,
    /// Full width at half maximum.
    pub gamma: T,
    /// Peak height `A` above the background.
    pub amplitude: T,
    /// Constant offset `c`; zero unless fitted.
    pub background: T,
    /// Window energies used in the fit.
    pub energies: Vec<T>,
    /// Unit-area Lorentzian with the fitted `E_R`, `Γ` on `energies`.
    pub normalized_reference: Vec<T>,
    /// `∫ |y - normalized_reference| dE` over the window.
    pub deviation: T,
    pub iterations: usize,
}

/// Damped least-squares Lorentzian fit to the samples inside `window`.
pub fn fit_lorentzian<T: Real>(energies: &[T], values: &[T], window: (T, T)) -> Result<LorentzianFit<T>> {
    fit_lorentzian_impl(energies, values, window, false)
}

/// Like [`fit_lorentzian`] with a free constant offset, for curves that sit
/// on a non-resonant background (the delay time does).
pub fn fit_lorentzian_with_background<T: Real>(
    energies: &[T],
    values: &[T],
    window: (T, T),
) -> Result<LorentzianFit<T>> {
    fit_lorentzian_impl(energies, values, window, true)
}

fn fit_lorentzian_impl<T: Real>(energies: &[T], values: &[T], window: (T, T), background: bool) -> Result<LorentzianFit<T>> {
    if energies.len() != values.len() {
        return Err(Error::invalid("values", "length differs from energies"));
    }
    let (x, y): (Vec<T>, Vec<T>) = energies
        .iter()
        .zip(values)
        .filter(|(e, _)| **e >= window.0 && **e <= window.1)
        .map(|(e, v)| (*e, *v))
        .unzip();
    if x.len() < 10 {
        return Err(Error::InsufficientData(format!("{} samples in the fit window, need 10", x.len())));
    }
    let ip = argmax(&y);
    if ip == 0 || ip == x.len() - 1 {
        return Err(Error::FitWindow(format!("maximum at the window edge E = {}", x[ip])));
    }
    let c0 = if background { y[0].min(y[y.len() - 1]) } else { T::zero() };
    let amp0 = y[ip] - c0;
    let half = c0 + amp0 * T::lit(0.5);
    let left = (0..ip).rev().find(|&i| y[i] < half).map_or(x[0], |i| x[i]);
    let right = (ip + 1..x.len()).find(|&i| y[i] < half).map_or(x[x.len() - 1], |i| x[i]);
    let gamma0 = (right - left).max(x[ip + 1] - x[ip - 1]);
    if x[x.len() - 1] - x[0] < T::lit(4.0) * gamma0 {
        return Err(Error::FitWindow(format!(
            "window [{}, {}] spans less than 4 widths (width estimate {gamma0})",
            x[0],
            x[x.len() - 1]
        )));
    }

    let model = |p: &[T]| -> (Vec<T>, Vec<Vec<T>>) {
        let (er, g, a) = (p[0], p[1], p[2]);
        let c = if background { p[3] } else { T::zero() };
        let h2 = g * g * T::lit(0.25);
        let mut r = Vec::with_capacity(x.len());
        let mut j = Vec::with_capacity(x.len());
        for (&e, &v) in x.iter().zip(&y) {
            let u = e - er;
            let den = u * u + h2;
            let l = h2 / den;
            r.push(a * l + c - v);
            let dl_der = h2 * T::lit(2.0) * u / (den * den);
            let dl_dg = (g * T::lit(0.5) * den - h2 * g * T::lit(0.5)) / (den * den);
            let mut row = vec![a * dl_der, a * dl_dg, l];
            if background {
                row.push(T::one());
            }
            j.push(row);
        }
        (r, j)
    };
    let mut start = vec![x[ip], gamma0, amp0];
    if background {
        start.push(c0);
    }
    let report = levenberg_marquardt(model, &start, LmOptions::default());
    if !report.converged {
        return Err(Error::FitFailure {
            iterations: report.iterations,
            reason: format!("last iterate E_R = {}, Γ = {}, A = {}", report.params[0], report.params[1], report.params[2]),
        });
    }
    let (e_r, gamma, amplitude) = (report.params[0], report.params[1].abs(), report.params[2]);
    let offset = if background { report.params[3] } else { T::zero() };
    let hg = gamma * T::lit(0.5);
    let reference: Vec<T> =
        x.iter().map(|&e| gamma / (T::lit(2.0) * T::PI()) / ((e - e_r).powi(2) + hg * hg)).collect();
    let diff: Vec<T> = y.iter().zip(&reference).map(|(a, b)| (*a - *b).abs()).collect();
    let deviation = trapezoid(&x, &diff);
    Ok(LorentzianFit {
        e_r,
        gamma,
        amplitude,
        background: offset,
        energies: x,
        normalized_reference: reference,
        deviation,
        iterations: report.iterations,
    })
}

/// Straight-line fit of `ln P_W` against time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit<T> {
    pub tau: T,
    /// `ln P_W` extrapolated to `t = 0`.
    pub log_intercept: T,
    /// Largest absolute residual of the log fit.
    pub quality: T,
    pub samples: usize,
    pub t_min: T,
    pub t_end: T,
}

impl<T: Real> ExponentialFit<T> {
    /// `ln P_W(t)` of the fitted pure exponential.
    pub fn log_value(&self, t: T) -> T {
        self.log_intercept - t / self.tau
    }
}

/// Level below which `P_W` is treated as round-off.
const NOISE_FLOOR: f64 = 1e-12;

/// Least squares on `ln p_w` over `[t_min, t_end]`.
pub fn fit_exponential_decay<T: Real>(record: &DecayRecord<T>, t_min: T) -> Result<ExponentialFit<T>> {
    let pts: Vec<(T, T)> = record
        .times
        .iter()
        .zip(&record.p_w)
        .filter(|(t, p)| **t >= t_min && p.is_finite() && **p > T::zero())
        .map(|(t, p)| (*t, p.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!("{} usable samples after t_min = {t_min}, need 10", pts.len())));
    }
    if pts[0].1 < (T::lit(10.0 * NOISE_FLOOR)).ln() {
        return Err(Error::InsufficientData(format!("p_w(t_min) = {} is at the noise floor", pts[0].1.exp())));
    }
    let n = T::from_count(pts.len());
    let mt = pts.iter().map(|p| p.0).sum::<T>() / n;
    let my = pts.iter().map(|p| p.1).sum::<T>() / n;
    let sxy: T = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: T = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    let slope = sxy / sxx;
    if !(slope < T::zero()) {
        return Err(Error::FitFailure { iterations: 1, reason: format!("non-decaying slope {slope}") });
    }
    let intercept = my - slope * mt;
    let quality = pts.iter().map(|p| (p.1 - (intercept + slope * p.0)).abs()).fold(T::zero(), T::max);
    let tau = -T::one() / slope;
    let (t0, t1) = (pts[0].0, pts[pts.len() - 1].0);
    if t1 - t0 < T::lit(3.0) * tau {
        return Err(Error::FitWindow(format!(
            "record spans {} s after t_min, less than 3 lifetimes ({} s)",
            t1 - t0,
            T::lit(3.0) * tau
        )));
    }
    Ok(ExponentialFit { tau, log_intercept: intercept, quality, samples: pts.len(), t_min: t0, t_end: t1 })
}

/// Figure of merit minimized over the switching time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `∫ |P_T - L_pole| dE` over `E_R ± 10Γ`.
    LorentzianDeviation,
    /// `max_{t <= 3τ} |ln P_W(t) - ln P_W^exp(t)|` against the late-time fit.
    ExponentialDeviation,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::LorentzianDeviation => "lorentzian-deviation",
            Objective::ExponentialDeviation => "exponential-deviation",
        })
    }
}

/// Residual potential deviation at which a snapshot is projected, ħ·s⁻¹.
pub const DEFAULT_EPS_V: f64 = 1e-3;
/// Time-step cap of a single spectrum run.
pub const MAX_SPECTRUM_STEPS: f64 = 20000.0;

/// A fixed pair of configurations studied as a function of the switching time.
#[derive(Debug, Clone)]
pub struct SwitchStudy<T> {
    pub initial: PotentialConfig<T>,
    pub target: PotentialConfig<T>,
    pub unit: UnitSystem<T>,
    /// Lowest resonance of the target configuration.
    pub resonance: Resonance<T>,
    pub energy_grid: EnergyGrid<T>,
    pub dx: T,
    pub dt: T,
    pub e_cut: T,
    pub eps_v: T,
}

impl<T: Real> SwitchStudy<T> {
    /// Finds the target's lowest resonance and sets default numerics.
    pub fn new(initial: PotentialConfig<T>, target: PotentialConfig<T>, unit: UnitSystem<T>) -> Result<Self> {
        let re_max = unit.wavenumber(T::lit(2.0) * target.v_barrier()).max(T::lit(0.5));
        let region = SearchRegion::resonances(re_max, re_max * T::lit(0.5));
        let resonance = *find_poles(&target, &unit, region, usize::MAX)?
            .iter()
            .find(|p| p.kind == PoleKind::Resonance)
            .ok_or_else(|| Error::invalid("target", "no resonance found"))?;
        let energy_grid = EnergyGrid::for_resonance(&resonance)?;
        Ok(Self {
            initial,
            target,
            unit,
            resonance,
            energy_grid,
            dx: T::lit(DEFAULT_DX),
            dt: T::lit(DEFAULT_DT),
            e_cut: T::lit(DEFAULT_E_CUT),
            eps_v: T::lit(DEFAULT_EPS_V),
        })
    }

    pub fn schedule(&self, t_switch: T) -> Result<SwitchingSchedule<T>> {
        SwitchingSchedule::new(self.initial, self.target, t_switch)
    }

    /// `t* = T ln(max|ΔV| / eps_v)`.
    pub fn projection_time(&self, t_switch: T) -> Result<T> {
        Ok(self.schedule(t_switch)?.settle_time(self.eps_v))
    }

    /// Spectrum-profile setup that reaches `t_end`.
    pub fn spectrum_setup(&self, t_switch: T, t_end: T) -> Result<PropagationSetup<T>> {
        let mut setup = PropagationSetup::spectrum_profile(self.schedule(t_switch)?, self.unit, t_end);
        setup.e_cut = self.e_cut;
        setup.dt = self.dt.max(t_end / T::lit(MAX_SPECTRUM_STEPS));
        setup.grid.dx = self.dx;
        setup.grid.dx_outer = Some(setup.max_dx().min(T::lit(0.2)));
        setup.grid.length = Some(setup.required_length());
        Ok(setup)
    }

    /// `P(E)` after a switch of duration `t_switch`, projected at `t*`.
    /// `t_switch = 0` projects the ground state directly.
    pub fn spectrum(&self, t_switch: T) -> Result<EnergyDistribution<T>> {
        let t_star = self.projection_time(t_switch)?;
        if t_star <= T::zero() {
            let gs = ground_state(&self.initial, &self.unit, &GridSpec::new(self.dx), GroundStateSelection::RequireUnique)?;
            return energy_distribution(&gs.wavefunction, &self.target, &self.unit, &self.energy_grid, T::zero());
        }
        let mut setup = self.spectrum_setup(t_switch, t_star)?;
        setup.accuracy_check = true;
        let gs = ground_state(&self.initial, &self.unit, &setup.initial_grid(), GroundStateSelection::RequireUnique)?;
        let run = propagate(&gs.wavefunction, &setup)?;
        let snap = run.snapshots.last().ok_or_else(|| Error::Grid("no snapshot recorded".into()))?;
        energy_distribution(&snap.state, &self.target, &self.unit, &self.energy_grid, snap.time)
    }

    /// Decay-profile record of `P_W(t)` up to `t_end`.
    pub fn decay(&self, t_switch: T, t_end: T) -> Result<DecayRecord<T>> {
        let mut setup = PropagationSetup::decay_profile(self.schedule(t_switch)?, self.unit);
        setup.t_end = t_end;
        setup.dt = self.dt;
        setup.grid.dx = self.dx;
        setup.e_cut = self.e_cut;
        let gs = ground_state(&self.initial, &self.unit, &setup.initial_grid(), GroundStateSelection::RequireUnique)?;
        Ok(propagate(&gs.wavefunction, &setup)?.record)
    }

    /// Lorentzian deviation of a computed distribution.
    pub fn lorentzian_deviation_of(&self, dist: &EnergyDistribution<T>) -> Result<T> {
        let (er, g) = (self.resonance.e_r, self.resonance.gamma);
        let (lo, hi) = (er - T::lit(10.0) * g, er + T::lit(10.0) * g);
        let (x, p): (Vec<T>, Vec<T>) =
            dist.energies.iter().zip(&dist.p).filter(|(e, _)| **e >= lo && **e <= hi).map(|(e, p)| (*e, *p)).unzip();
        let reference = lorentzian_reference(&self.resonance, &x)?;
        let d: Vec<T> = p.iter().zip(&reference.density).map(|(a, b)| (*a - *b).abs()).collect();
        Ok(trapezoid(&x, &d))
    }

    /// Exponential deviation of a decay record; the late fit covers `[3τ, t_end]`.
    pub fn exponential_deviation_of(&self, record: &DecayRecord<T>) -> Result<T> {
        let tau = self.resonance.tau;
        let fit = fit_exponential_decay(record, T::lit(3.0) * tau)?;
        let mut worst = T::zero();
        for (t, p) in record.times.iter().zip(&record.p_w) {
            if *t > T::lit(3.0) * tau {
                break;
            }
            worst = worst.max((p.ln() - fit.log_value(*t)).abs());
        }
        Ok(worst)
    }

    /// Duration of the decay runs used by the exponential objective.
    pub fn decay_t_end(&self) -> T {
        T::lit(6.5) * self.resonance.tau
    }

    pub fn objective(&self, objective: Objective, t_switch: T) -> Result<T> {
        match objective {
            Objective::LorentzianDeviation => self.lorentzian_deviation_of(&self.spectrum(t_switch)?),
            Objective::ExponentialDeviation => {
                self.exponential_deviation_of(&self.decay(t_switch, self.decay_t_end())?)
            }
        }
    }
}

/// Coarse grid and refinement budget of a switching-time scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec<T> {
    /// Log-spaced coarse points.
    pub points: usize,
    /// Refine until the bracket is within this relative half-width.
    pub relative_precision: T,
    pub max_refinements: usize,
}

impl<T: Real> Default for ScanSpec<T> {
    fn default() -> Self {
        Self { points: 15, relative_precision: T::lit(0.05), max_refinements: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult<T> {
    pub t_star: T,
    pub value: T,
    /// Every evaluated `(T, objective)`, sorted by `T`.
    pub curve: Vec<(T, T)>,
    /// Several coarse local minima within 10% of each other.
    pub multimodal: bool,
}

/// Minimizes `f` over `t_range` (`0 < lo < hi`): log-spaced coarse scan,
/// then golden-section refinement in `ln T` around the best grid point.
pub fn minimize_switch_time<T: Real, F>(mut f: F, t_range: (T, T), scan: ScanSpec<T>) -> Result<ScanResult<T>>
where
    F: FnMut(T) -> Result<T>,
{
    let (lo, hi) = t_range;
    if !(lo > T::zero()) || !(hi > lo) {
        return Err(Error::invalid("t_range", format!("need 0 < lo < hi, got ({lo}, {hi})")));
    }
    if scan.points < 3 {
        return Err(Error::invalid("points", "coarse scan needs at least 3 points"));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let grid: Vec<T> = (0..scan.points)
        .map(|i| (llo + (lhi - llo) * T::from_count(i) / T::from_count(scan.points - 1)).exp())
        .collect();
    let mut curve = Vec::new();
    let mut values = Vec::with_capacity(grid.len());
    for &t in &grid {
        let v = f(t)?;
        curve.push((t, v));
        values.push(v);
    }
    let best = (0..values.len()).min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap()).unwrap();

    let minima: Vec<usize> = (0..values.len())
        .filter(|&i| {
            (i == 0 || values[i] < values[i - 1]) && (i + 1 == values.len() || values[i] < values[i + 1])
        })
        .collect();
    let multimodal = minima.iter().any(|&i| i != best && (values[i] - values[best]) < T::lit(0.1) * values[best].abs());
    if multimodal {
        log::warn!("switching-time scan has several local minima within 10%; using the global grid minimum");
    }

    // golden section on ln T between the neighbours of the best grid point
    let mut a = grid[best.saturating_sub(1)].ln();
    let mut b = grid[(best + 1).min(grid.len() - 1)].ln();
    let (mut x_best, mut v_best) = (grid[best], values[best]);
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let target = (T::one() + scan.relative_precision).ln() * T::lit(2.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut eval = |x: T, curve: &mut Vec<(T, T)>| -> Result<T> {
        let v = f(x.exp())?;
        curve.push((x.exp(), v));
        Ok(v)
    };
    if best > 0 && best + 1 < grid.len() {
        let mut fc = eval(c, &mut curve)?;
        let mut fd = eval(d, &mut curve)?;
        let mut n = 2;
        while b - a > target && n < scan.max_refinements {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - inv_phi * (b - a);
                fc = eval(c, &mut curve)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + inv_phi * (b - a);
                fd = eval(d, &mut curve)?;
            }
            n += 1;
        }
        for (t, v) in [(c.exp(), fc), (d.exp(), fd)] {
            if v < v_best {
                x_best = t;
                v_best = v;
            }
        }
    }
    curve.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    Ok(ScanResult { t_star: x_best, value: v_best, curve, multimodal })
}

/// Scans the switching time of `study` for the minimum of `objective`.
pub fn optimal_switch_time<T: Real>(
    study: &SwitchStudy<T>,
    objective: Objective,
    t_range: (T, T),
    scan: ScanSpec<T>,
) -> Result<ScanResult<T>> {
    let two_tau = T::lit(2.0) * study.resonance.tau;
    if t_range.1 > two_tau * (T::one() + T::epsilon()) {
        return Err(Error::invalid("t_range", format!("upper end {} exceeds 2τ = {two_tau}", t_range.1)));
    }
    minimize_switch_time(|t| study.objective(objective, t), t_range, scan)
}
