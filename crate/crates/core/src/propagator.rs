//! Crank-Nicolson propagation through the potential switch.
//!
//! Space is discretized with cubic Hermite elements (see [`crate::fem`]); in
//! time the implicit midpoint rule is used with the potential sampled at
//! `t + dt/2`:
//!
//! ```text
//! (M + i dt/2 K(t + dt/2)) c_{n+1} = (M - i dt/2 K(t + dt/2)) c_n
//! K = (kappa/2) S + V M - i W
//! ```
//!
//! where `W` is the optional absorbing layer. Only the elements whose
//! potential changes during the switch are reassembled each step; the
//! factors of the static outer part of the box are reused.

use crate::fem::{element_mass, element_stiffness, element_stretched, element_weighted_mass, BlockMatrix, Mesh};
use crate::initial::GridSpec;
use crate::numerics::{golden_section, BlockTridiagonal, Vec2};
use crate::potential::SwitchingSchedule;
use crate::wavefunction::{probability_in_well, WavefunctionGrid};
use crate::{Complex, Error, Real, Result, UnitSystem};

/// Boundary treatment at the right end of the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Absorber<T> {
    /// Hard wall at the box edge; the box must be large enough.
    None,
    /// Quadratic negative-imaginary ramp `W0 ((x - x_a)/width)²` over the
    /// outer `width` of the box. `strength = None` tunes `W0` automatically.
    Layer { width: T, strength: Option<T> },
    /// Complex coordinate stretch `x -> x + i ∫ σ` with
    /// `σ = strength ((x - x_a)/width)²` over the outer `width` of the box.
    ComplexScaling { width: T, strength: T },
}

/// Default peak stretch rate of the complex-scaling layer.
pub const DEFAULT_SCALING_STRENGTH: f64 = 4.0;

/// Everything needed for one propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationSetup<T> {
    pub schedule: SwitchingSchedule<T>,
    pub unit: UnitSystem<T>,
    /// Mesh request; `length` must be set.
    pub grid: GridSpec<T>,
    pub dt: T,
    pub t_end: T,
    pub absorber: Absorber<T>,
    pub snapshot_times: Vec<T>,
    /// Energy cutoff used by the resolution and box-size rules.
    pub e_cut: T,
    /// Compare the energy drift of `dt` and `dt/2` over a short window before running.
    pub accuracy_check: bool,
}

/// A violated setup rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupIssue {
    pub field: &'static str,
    pub message: String,
}

/// Default spatial step near the potential, µm.
pub const DEFAULT_DX: f64 = 0.05;
/// Default time step, s.
pub const DEFAULT_DT: f64 = 2e-4;
/// Default energy cutoff, s⁻¹.
pub const DEFAULT_E_CUT: f64 = 3000.0;
/// Box length of the decay profile, µm.
pub const DECAY_BOX: f64 = 150.0;
/// Decay-profile duration, s.
pub const DECAY_T_END: f64 = 2.5;
/// Extra room beyond the fastest outgoing front, µm.
pub const CONTAINMENT_MARGIN: f64 = 100.0;

impl<T: Real> PropagationSetup<T> {
    /// Long run in a 150 µm box with an absorbing outer quarter.
    pub fn decay_profile(schedule: SwitchingSchedule<T>, unit: UnitSystem<T>) -> Self {
        let length = T::lit(DECAY_BOX);
        Self {
            schedule,
            unit,
            grid: GridSpec::new(T::lit(DEFAULT_DX)).with_length(length),
            dt: T::lit(DEFAULT_DT),
            t_end: T::lit(DECAY_T_END),
            absorber: Absorber::ComplexScaling {
                width: length * T::lit(0.25),
                strength: T::lit(DEFAULT_SCALING_STRENGTH),
            },
            snapshot_times: Vec::new(),
            e_cut: T::lit(DEFAULT_E_CUT),
            accuracy_check: false,
        }
    }

    /// No absorber; the box holds every component up to the cutoff until
    /// `t_end`. Beyond the potential the mesh is coarsened to the spacing
    /// the resolution rule allows (at most 0.2 µm).
    pub fn spectrum_profile(schedule: SwitchingSchedule<T>, unit: UnitSystem<T>, t_end: T) -> Self {
        let mut s = Self {
            schedule,
            unit,
            grid: GridSpec::new(T::lit(DEFAULT_DX)),
            dt: T::lit(DEFAULT_DT),
            t_end,
            absorber: Absorber::None,
            snapshot_times: vec![t_end],
            e_cut: T::lit(DEFAULT_E_CUT),
            accuracy_check: false,
        };
        s.grid.dx_outer = Some(s.max_dx().min(T::lit(0.2)));
        s.grid.length = Some(s.required_length());
        s
    }

    fn outer_edge(&self) -> T {
        self.schedule.initial().outer_edge().max(self.schedule.target().outer_edge())
    }

    /// `2π / (20 k_max)` with `k_max = sqrt(2 (E_cut + V_w,max) / kappa)`.
    pub fn max_dx(&self) -> T {
        let vw = self.schedule.initial().v_well().max(self.schedule.target().v_well());
        let k_max = (T::lit(2.0) * (self.e_cut + vw) / self.unit.kappa()).sqrt();
        T::lit(2.0) * T::PI() / (T::lit(20.0) * k_max)
    }

    /// Fastest front speed: the larger of `kappa k_cut` and the largest
    /// group velocity the Crank-Nicolson dispersion
    /// `ω = (2/dt) atan(E dt/2)` allows.
    pub fn front_velocity(&self) -> T {
        let kappa = self.unit.kappa();
        let k_cut = self.unit.wavenumber(self.e_cut);
        let a = kappa * self.dt.abs() / T::lit(4.0);
        let k_star = (T::lit(3.0) * a * a).powf(T::lit(-0.25));
        let v_cn = T::lit(0.75) * kappa * k_star;
        (kappa * k_cut).max(v_cn)
    }

    /// Box length needed without an absorber.
    pub fn required_length(&self) -> T {
        self.outer_edge() + self.front_velocity() * self.t_end + T::lit(CONTAINMENT_MARGIN)
    }

    /// All rule violations, without running anything.
    pub fn diagnostics(&self) -> Vec<SetupIssue> {
        let mut out = Vec::new();
        let mut push = |field: &'static str, message: String| out.push(SetupIssue { field, message });
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            push("dt", format!("time step must be positive, got {}", self.dt));
        }
        if !(self.t_end >= T::zero()) || !self.t_end.is_finite() {
            push("t_end", format!("end time must be >= 0, got {}", self.t_end));
        }
        if !(self.e_cut > T::zero()) {
            push("e_cut", format!("energy cutoff must be positive, got {}", self.e_cut));
        }
        let bound = self.max_dx();
        if !(self.grid.dx > T::zero()) || self.grid.dx > bound {
            push(
                "dx",
                format!("dx = {} violates the resolution bound dx <= 2π/(20 k_max) = {}", self.grid.dx, bound),
            );
        }
        if let Some(o) = self.grid.dx_outer {
            if !(o > T::zero()) || o > bound {
                push(
                    "dx_outer",
                    format!("dx_outer = {o} violates the resolution bound dx <= 2π/(20 k_max) = {bound}"),
                );
            }
        }
        match self.grid.length {
            None => push("length", "box length must be set for propagation".into()),
            Some(l) => {
                if !(l > self.outer_edge()) {
                    push("length", format!("box length {l} does not exceed the potential edge {}", self.outer_edge()));
                }
                match self.absorber {
                    Absorber::None => {
                        let need = self.required_length();
                        if l < need {
                            push(
                                "length",
                                format!(
                                    "box length {l} is shorter than d+b + v t_end + margin = {need} required without an absorber"
                                ),
                            );
                        }
                    }
                    Absorber::Layer { width, strength } => {
                        if !(width > T::zero()) || !(l - width > self.outer_edge()) {
                            push("absorber", format!("layer width {width} must be positive and leave the potential outside it"));
                        }
                        if let Some(s) = strength {
                            if !(s > T::zero()) {
                                push("absorber", format!("strength must be positive, got {s}"));
                            }
                        }
                    }
                    Absorber::ComplexScaling { width, strength } => {
                        if !(width > T::zero()) || !(l - width > self.outer_edge()) {
                            push("absorber", format!("layer width {width} must be positive and leave the potential outside it"));
                        }
                        if !(strength > T::zero()) {
                            push("absorber", format!("strength must be positive, got {strength}"));
                        }
                    }
                }
            }
        }
        for &t in &self.snapshot_times {
            if !(t >= T::zero()) || t > self.t_end {
                push("snapshot_times", format!("snapshot time {t} outside [0, t_end]"));
            }
        }
        out
    }

    /// First violation as an error.
    pub fn validate(&self) -> Result<()> {
        match self.diagnostics().into_iter().next() {
            None => Ok(()),
            Some(SetupIssue { field, message }) => Err(Error::InvalidArgument { name: field, reason: message }),
        }
    }

    /// Mesh the initial state must live on.
    pub fn mesh(&self) -> Result<Mesh<T>> {
        let length = self.grid.length.ok_or_else(|| Error::invalid("length", "box length must be set"))?;
        self.grid.mesh_for(&[self.schedule.initial(), self.schedule.target()], length)
    }

    /// Grid request for the initial state on this setup's mesh.
    pub fn initial_grid(&self) -> GridSpec<T> {
        let mut g = self.grid.clone();
        g.fine_until = Some(g.fine_until.unwrap_or(self.outer_edge() + T::lit(10.0)));
        g.breakpoints.push(self.schedule.target().well_width());
        g.breakpoints.push(self.schedule.target().outer_edge());
        g
    }

    fn steps(&self) -> usize {
        (self.t_end / self.dt).round().to_usize().unwrap_or(0)
    }
}

/// Snapshot at a requested time, quantized to the step grid.
#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub requested: T,
    /// Exact time of the stored state.
    pub time: T,
    pub state: WavefunctionGrid<T>,
}

/// Non-escape probability and norm after every step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DecayRecord<T> {
    pub times: Vec<T>,
    pub p_w: Vec<T>,
    pub norm: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct PropagationResult<T> {
    pub final_state: WavefunctionGrid<T>,
    pub record: DecayRecord<T>,
    pub snapshots: Vec<Snapshot<T>>,
    /// `W0` actually used (after tuning), if an absorber was present.
    pub absorber_strength: Option<T>,
}

/// Reflection probability of the quadratic layer at energy `e`, from the
/// stationary equation integrated (RK4) from the box wall back to the
/// layer onset.
pub fn layer_reflection<T: Real>(kappa: T, width: T, strength: T, e: T) -> T {
    let steps = 1500usize;
    let h = width / T::from_count(steps);
    let two_over_kappa = T::lit(2.0) / kappa;
    let rhs = |y: T, psi: Complex<T>| -> Complex<T> {
        let s = y / width;
        -psi * Complex::new(e, strength * s * s) * two_over_kappa
    };
    // y runs from width (box wall) down to 0 (layer onset)
    let mut psi = Complex::new(T::zero(), T::zero());
    let mut dpsi = Complex::new(T::one(), T::zero());
    for i in 0..steps {
        let y = width - h * T::from_count(i);
        let mh = -h;
        let f = |yy: T, p: Complex<T>, dp: Complex<T>| (dp, rhs(yy, p));
        let k1 = f(y, psi, dpsi);
        let k2 = f(y + mh * T::lit(0.5), psi + k1.0 * (mh * T::lit(0.5)), dpsi + k1.1 * (mh * T::lit(0.5)));
        let k3 = f(y + mh * T::lit(0.5), psi + k2.0 * (mh * T::lit(0.5)), dpsi + k2.1 * (mh * T::lit(0.5)));
        let k4 = f(y + mh, psi + k3.0 * mh, dpsi + k3.1 * mh);
        psi = psi + (k1.0 + k2.0 * T::lit(2.0) + k3.0 * T::lit(2.0) + k4.0) * (mh / T::lit(6.0));
        dpsi = dpsi + (k1.1 + k2.1 * T::lit(2.0) + k3.1 * T::lit(2.0) + k4.1) * (mh / T::lit(6.0));
        let n = psi.norm().max(dpsi.norm());
        if n > T::lit(1e100) {
            psi = psi / n;
            dpsi = dpsi / n;
        }
    }
    let k = (two_over_kappa * e).sqrt();
    let ik = Complex::new(T::zero(), k);
    let right = (psi + dpsi / ik) * T::lit(0.5);
    let left = (psi - dpsi / ik) * T::lit(0.5);
    (left / right).norm_sqr()
}

/// Strength minimizing the worst reflection over `[e_min, e_max]`.
pub fn tune_absorber<T: Real>(kappa: T, width: T, e_min: T, e_max: T) -> T {
    let energies: Vec<T> = (0..24)
        .map(|i| e_min * (e_max / e_min).powf(T::from_count(i) / T::lit(23.0)))
        .collect();
    let worst = |log_w: T| -> T {
        let w = log_w.exp();
        energies.iter().map(|&e| layer_reflection(kappa, width, w, e)).fold(T::zero(), T::max)
    };
    let (lo, hi) = (T::lit(1.0).ln(), T::lit(1e7).ln());
    // coarse scan then golden refinement around the best point
    let n = 29;
    let mut best = (lo, T::infinity());
    for i in 0..n {
        let x = lo + (hi - lo) * T::from_count(i) / T::from_count(n - 1);
        let v = worst(x);
        if v < best.1 {
            best = (x, v);
        }
    }
    let step = (hi - lo) / T::from_count(n - 1);
    let r = golden_section(worst, best.0 - step, best.0 + step, T::zero(), T::lit(1e-3), 40);
    r.x.exp()
}

/// Lower bound of the energy band the automatic absorber is tuned for, s⁻¹.
const ABSORBER_E_MIN: f64 = 10.0;

/// Reusable stepper for a fixed setup and time step.
pub struct Propagator<T> {
    mesh: Mesh<T>,
    schedule: SwitchingSchedule<T>,
    dt: T,
    mass: BlockMatrix<T>,
    /// Mass matrix of the time derivative (stretched inside a scaling layer).
    step_mass: BlockMatrix<T>,
    base: BlockMatrix<T>,
    system: BlockMatrix<T>,
    factor: BlockTridiagonal<T>,
    /// Elements whose potential follows the schedule: (index, midpoint).
    dynamic: Vec<(usize, T)>,
    prefix_nodes: usize,
    last_mixing: Option<T>,
    well_elements: usize,
    rhs: Vec<Vec2<T>>,
    absorber_strength: Option<T>,
}

impl<T: Real> Propagator<T> {
    /// Builds the stepper. `dt` may be negative for backward propagation.
    pub fn new(setup: &PropagationSetup<T>, mesh: Mesh<T>, dt: T) -> Result<Self> {
        let kappa = setup.unit.kappa();
        let schedule = setup.schedule;
        let n = mesh.len();
        let c = |v: T| Complex::new(v, T::zero());
        let half_dt = dt * T::lit(0.5);
        let mut mass = BlockMatrix::zeros(n);
        let mut base = BlockMatrix::zeros(n);
        let mut dynamic = Vec::new();
        let switching = !schedule.is_sudden();

        let absorber_strength = match setup.absorber {
            Absorber::None => None,
            Absorber::ComplexScaling { strength, .. } => Some(strength),
            Absorber::Layer { width, strength } => Some(
                strength.unwrap_or_else(|| tune_absorber(kappa, width, T::lit(ABSORBER_E_MIN), setup.e_cut)),
            ),
        };
        let layer = match (setup.absorber, absorber_strength) {
            (Absorber::Layer { width, .. }, Some(w0)) => Some((mesh.length() - width, width, w0)),
            _ => None,
        };
        let stretch = match setup.absorber {
            Absorber::ComplexScaling { width, strength } => Some((mesh.length() - width, width, strength)),
            _ => None,
        };
        let mut step_mass = BlockMatrix::zeros(n);

        for e in 0..mesh.elements() {
            let h = mesh.element_length(e);
            let x0 = mesh.nodes()[e];
            let mid = x0 + h * T::lit(0.5);
            let me = element_mass(h);
            mass.add_element(e, &me, c(T::one()));
            let kin = Complex::new(T::zero(), half_dt * kappa * T::lit(0.5));
            match stretch {
                Some((xa, width, sigma)) if x0 + h > xa => {
                    let (ms, ks) = element_stretched(x0, h, |x| {
                        let y = ((x - xa) / width).max(T::zero());
                        Complex::new(T::one(), sigma * y * y)
                    });
                    step_mass.add_complex_element(e, &ms, c(T::one()));
                    base.add_complex_element(e, &ms, c(T::one()));
                    base.add_complex_element(e, &ks, kin);
                    let v = schedule.target().value_at(mid);
                    if v != T::zero() {
                        base.add_complex_element(e, &ms, Complex::new(T::zero(), half_dt * v));
                    }
                    continue;
                }
                _ => {
                    step_mass.add_element(e, &me, c(T::one()));
                    base.add_element(e, &me, c(T::one()));
                    base.add_element(e, &element_stiffness(h), kin);
                }
            }
            let (vi, vf) = (schedule.initial().value_at(mid), schedule.target().value_at(mid));
            if switching && vi != vf {
                dynamic.push((e, mid));
            } else {
                base.add_element(e, &me, Complex::new(T::zero(), half_dt * vf));
            }
            if let Some((xa, width, w0)) = layer {
                if x0 + h > xa {
                    let wm = element_weighted_mass(x0, h, |x| {
                        let s = ((x - xa) / width).max(T::zero());
                        w0 * s * s
                    });
                    base.add_element(e, &wm, c(half_dt));
                }
            }
        }
        let prefix_nodes = dynamic.last().map_or(0, |&(e, _)| e + 2);
        let mut system = base.clone();
        system.pin_boundary_values();
        let factor = BlockTridiagonal::factor(&system.diag, &system.upper);
        let d = schedule.target().well_width();
        let well_elements = mesh
            .node_at(d)
            .ok_or_else(|| Error::Grid(format!("well edge {d} is not a mesh node")))?;
        Ok(Self {
            rhs: vec![Vec2::zero(); n],
            mesh,
            schedule,
            dt,
            mass,
            step_mass,
            base,
            system,
            factor,
            dynamic,
            prefix_nodes,
            last_mixing: None,
            well_elements,
            absorber_strength,
        })
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    fn update_system(&mut self, t_mid: T) -> Result<()> {
        if self.dynamic.is_empty() {
            return Ok(());
        }
        let lambda = self.schedule.mixing(t_mid.max(T::zero()))?;
        if self.last_mixing == Some(lambda) {
            return Ok(());
        }
        let p = self.prefix_nodes;
        self.system.diag[..p].copy_from_slice(&self.base.diag[..p]);
        self.system.upper[..p - 1].copy_from_slice(&self.base.upper[..p - 1]);
        let half_dt = self.dt * T::lit(0.5);
        for &(e, mid) in &self.dynamic {
            let v = self.schedule.potential_at(t_mid.max(T::zero()), mid)?;
            let me = element_mass(self.mesh.element_length(e));
            self.system.add_element(e, &me, Complex::new(T::zero(), half_dt * v));
        }
        self.system.pin_boundary_values();
        self.factor.refactor_leading(&self.system.diag, &self.system.upper, p);
        self.last_mixing = Some(lambda);
        Ok(())
    }

    /// Advances `c` from `t` to `t + dt`; returns `‖c(t)‖²`.
    pub fn step(&mut self, c: &mut [Vec2<T>], t: T) -> Result<T> {
        self.update_system(t + self.dt * T::lit(0.5))?;
        self.step_mass.apply(c, &mut self.rhs);
        let mut norm = T::zero();
        for (r, x) in self.rhs.iter_mut().zip(c.iter()) {
            norm += (x.0[0].conj() * r.0[0] + x.0[1].conj() * r.0[1]).re;
            *r = r.scale(Complex::new(T::lit(2.0), T::zero()));
        }
        let last = self.rhs.len() - 1;
        self.rhs[0].0[0] = Complex::new(T::zero(), T::zero());
        self.rhs[last].0[0] = Complex::new(T::zero(), T::zero());
        // Values below `tiny` are dropped: far tails would otherwise decay
        // into subnormals, which are slow, and the empty part of a long box
        // is skipped.
        let tiny = T::min_positive_value().sqrt();
        let support = c.iter().rposition(|x| *x != Vec2::zero()).map_or(0, |i| i + 2);
        let end = self.factor.solve_supported(&self.system.upper, &mut self.rhs, support, tiny);
        for (x, r) in c[..end].iter_mut().zip(&self.rhs) {
            *x = (*r - *x).flush_below(tiny);
        }
        for x in &mut c[end..] {
            *x = Vec2::zero();
        }
        Ok(norm)
    }

    /// `‖c‖²` with the Hermite mass matrix.
    pub fn norm_sq(&self, c: &[Vec2<T>]) -> T {
        self.quadratic_form(&self.mass, c, self.mesh.len())
    }

    /// `∫_0^d |ψ|²` over the target well.
    pub fn well_probability(&self, c: &[Vec2<T>]) -> T {
        let mut acc = T::zero();
        for e in 0..self.well_elements {
            let m = element_mass(self.mesh.element_length(e));
            let d = [c[e].0[0], c[e].0[1], c[e + 1].0[0], c[e + 1].0[1]];
            for a in 0..4 {
                let mut row = Complex::new(T::zero(), T::zero());
                for b in 0..4 {
                    row = row + d[b] * m[a][b];
                }
                acc += (d[a].conj() * row).re;
            }
        }
        acc
    }

    fn quadratic_form(&self, m: &BlockMatrix<T>, c: &[Vec2<T>], n: usize) -> T {
        let mut out = vec![Vec2::zero(); n];
        m.apply(c, &mut out);
        c.iter().zip(&out).map(|(a, b)| (a.0[0].conj() * b.0[0] + a.0[1].conj() * b.0[1]).re).sum()
    }

    /// `<H(t)> / <1>` with the potential of the schedule at `t`.
    pub fn energy(&self, c: &[Vec2<T>], t: T, kappa: T) -> Result<T> {
        let mut acc = T::zero();
        for e in 0..self.mesh.elements() {
            let h = self.mesh.element_length(e);
            let mid = self.mesh.nodes()[e] + h * T::lit(0.5);
            let v = self.schedule.potential_at(t, mid)?;
            let (me, se) = (element_mass(h), element_stiffness(h));
            let d = [c[e].0[0], c[e].0[1], c[e + 1].0[0], c[e + 1].0[1]];
            for a in 0..4 {
                let mut row = Complex::new(T::zero(), T::zero());
                for b in 0..4 {
                    row = row + d[b] * (se[a][b] * kappa * T::lit(0.5) + me[a][b] * v);
                }
                acc += (d[a].conj() * row).re;
            }
        }
        Ok(acc / self.norm_sq(c))
    }

    pub fn absorber_strength(&self) -> Option<T> {
        self.absorber_strength
    }
}

fn check_state<T: Real>(initial: &WavefunctionGrid<T>, mesh: &Mesh<T>) -> Result<()> {
    if initial.mesh() != mesh {
        return Err(Error::Grid(
            "initial state is not on the propagation mesh; build it from PropagationSetup::initial_grid".into(),
        ));
    }
    Ok(())
}

/// Steps of the `dt` / `dt/2` comparison window.
const ACCURACY_WINDOW: usize = 50;
/// Largest tolerated relative energy difference between `dt` and `dt/2`.
const ACCURACY_TOLERANCE: f64 = 1e-3;

fn accuracy_check<T: Real>(initial: &WavefunctionGrid<T>, setup: &PropagationSetup<T>, mesh: &Mesh<T>) -> Result<()> {
    let steps = ACCURACY_WINDOW.min(setup.steps().max(1));
    let kappa = setup.unit.kappa();
    let run = |dt: T, n: usize| -> Result<T> {
        let mut p = Propagator::new(setup, mesh.clone(), dt)?;
        let mut c = initial.dofs();
        let mut t = T::zero();
        for _ in 0..n {
            p.step(&mut c, t)?;
            t += dt;
        }
        p.energy(&c, t, kappa)
    };
    let e1 = run(setup.dt, steps)?;
    let e2 = run(setup.dt * T::lit(0.5), 2 * steps)?;
    let drift = ((e1 - e2) / e2.abs().max(T::one())).abs();
    if drift > T::lit(ACCURACY_TOLERANCE) {
        return Err(Error::Resolution { drift: drift.to_f64_lossy() });
    }
    Ok(())
}

/// Propagates `initial` through the setup's schedule.
pub fn propagate<T: Real>(initial: &WavefunctionGrid<T>, setup: &PropagationSetup<T>) -> Result<PropagationResult<T>> {
    setup.validate()?;
    let mesh = setup.mesh()?;
    check_state(initial, &mesh)?;
    if setup.accuracy_check {
        accuracy_check(initial, setup, &mesh)?;
    }
    let mut prop = Propagator::new(setup, mesh.clone(), setup.dt)?;
    let n_steps = setup.steps();
    let mut wanted: Vec<(usize, T)> = setup
        .snapshot_times
        .iter()
        .map(|&t| ((t / setup.dt).round().to_usize().unwrap_or(0).min(n_steps), t))
        .collect();
    wanted.sort_by_key(|w| w.0);
    let mut snapshots = Vec::with_capacity(wanted.len());
    let mut next_snap = 0;

    let mut c = initial.dofs();
    let mut record = DecayRecord {
        times: Vec::with_capacity(n_steps + 1),
        p_w: Vec::with_capacity(n_steps + 1),
        norm: Vec::with_capacity(n_steps + 1),
    };
    let step_time = |i: usize| setup.dt * T::from_count(i);
    for i in 0..=n_steps {
        let t = step_time(i);
        while next_snap < wanted.len() && wanted[next_snap].0 == i {
            snapshots.push(Snapshot {
                requested: wanted[next_snap].1,
                time: t,
                state: WavefunctionGrid::from_dofs(mesh.clone(), &c),
            });
            next_snap += 1;
        }
        let pw = prop.well_probability(&c);
        if i == n_steps {
            let norm = prop.norm_sq(&c);
            if !norm.is_finite() {
                return Err(Error::NumericalBlowup { step: i });
            }
            record.times.push(t);
            record.p_w.push(pw);
            record.norm.push(norm);
            break;
        }
        let norm = prop.step(&mut c, t)?;
        if !norm.is_finite() || !pw.is_finite() {
            return Err(Error::NumericalBlowup { step: i });
        }
        record.times.push(t);
        record.p_w.push(pw);
        record.norm.push(norm);
    }
    Ok(PropagationResult {
        final_state: WavefunctionGrid::from_dofs(mesh, &c),
        record,
        snapshots,
        absorber_strength: prop.absorber_strength(),
    })
}

/// `P_W = ∫_0^d |ψ|² dx` of a snapshot.
pub fn non_escape_probability<T: Real>(snapshot: &WavefunctionGrid<T>, d: T) -> Result<T> {
    probability_in_well(snapshot, d)
}

/// Propagates `state` by `steps` steps of `dt` (negative for backwards)
/// starting at `t0`, without recording observables.
pub fn evolve<T: Real>(
    state: &WavefunctionGrid<T>,
    setup: &PropagationSetup<T>,
    dt: T,
    steps: usize,
    t0: T,
) -> Result<WavefunctionGrid<T>> {
    let mesh = state.mesh().clone();
    let mut prop = Propagator::new(setup, mesh.clone(), dt)?;
    let mut c = state.dofs();
    let mut t = t0;
    for i in 0..steps {
        let n = prop.step(&mut c, t)?;
        if !n.is_finite() {
            return Err(Error::NumericalBlowup { step: i });
        }
        t += dt;
    }
    Ok(WavefunctionGrid::from_dofs(mesh, &c))
}

