//! Analytic ground state of a configuration, sampled on a Hermite mesh.

use crate::fem::Mesh;
use crate::poles::{find_poles, Resonance, SearchRegion};
use crate::scattering::Interior;
use crate::wavefunction::WavefunctionGrid;
use crate::{Complex, Error, PotentialConfig, Real, Result, UnitSystem};

/// Mesh request for a wavefunction.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    /// Spacing near the potential.
    pub dx: T,
    /// Spacing beyond `fine_until` (defaults to `dx`).
    pub dx_outer: Option<T>,
    /// End of the finely meshed region (defaults to `d + b + 10 µm`).
    pub fine_until: Option<T>,
    /// Box length; `None` truncates where the tail falls below `1e-12` of the peak.
    pub length: Option<T>,
    /// Extra positions that must be element edges (e.g. the other
    /// configuration's steps).
    pub breakpoints: Vec<T>,
}

impl<T: Real> GridSpec<T> {
    pub fn new(dx: T) -> Self {
        Self { dx, dx_outer: None, fine_until: None, length: None, breakpoints: Vec::new() }
    }

    pub fn with_length(mut self, length: T) -> Self {
        self.length = Some(length);
        self
    }

    /// Builds the mesh for a box of `length`, aligned with the steps of `configs`.
    pub fn mesh_for(&self, configs: &[&PotentialConfig<T>], length: T) -> Result<Mesh<T>> {
        let mut breaks = self.breakpoints.clone();
        let mut edge = T::zero();
        for c in configs {
            breaks.push(c.well_width());
            breaks.push(c.outer_edge());
            edge = edge.max(c.outer_edge());
        }
        let fine = self.fine_until.unwrap_or(edge + T::lit(10.0));
        Mesh::build(&breaks, self.dx, fine, self.dx_outer.unwrap_or(self.dx), length)
    }
}

/// What to do when the configuration holds several bound states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroundStateSelection {
    /// Fail unless there is exactly one bound state.
    #[default]
    RequireUnique,
    /// Take the lowest one.
    Lowest,
}

#[derive(Debug, Clone)]
pub struct GroundState<T> {
    pub wavefunction: WavefunctionGrid<T>,
    /// `E_0 = -(kappa/2) κ0²` from the imaginary-axis pole.
    pub energy: T,
    pub pole: Resonance<T>,
    /// Number of bound states the configuration holds.
    pub bound_states: usize,
}

impl<T: Real> GroundState<T> {
    /// Relative residual of `(H - E_0) φ₀` for the Hermite discretization of `config`.
    pub fn eigen_residual(&self, config: &PotentialConfig<T>, unit: &UnitSystem<T>) -> T {
        let op = crate::fem::StaticOperator::new(self.wavefunction.mesh(), config, unit.kappa());
        op.eigen_residual(&self.wavefunction.dofs(), self.energy)
    }
}

/// Relative tail level at which the automatic box is truncated.
const TAIL_CUTOFF: f64 = 1e-12;

/// Builds the normalized ground state `φ₀` of `config`.
///
/// The energy comes from the bound-state pole; the wavefunction is the closed
/// form `sin(qx)/q` in the well, the matched barrier solution and
/// `u(d+b) exp(-κ0 (x - d - b))` outside, sampled with its slope at every
/// node and normalized with the exact Hermite norm.
pub fn ground_state<T: Real>(
    config: &PotentialConfig<T>,
    unit: &UnitSystem<T>,
    grid: &GridSpec<T>,
    selection: GroundStateSelection,
) -> Result<GroundState<T>> {
    let bound = find_poles(config, unit, SearchRegion::BoundStates, usize::MAX)?;
    if bound.is_empty() {
        return Err(Error::NoBoundState);
    }
    if bound.len() > 1 && selection == GroundStateSelection::RequireUnique {
        return Err(Error::AmbiguousGroundState { count: bound.len() });
    }
    let pole = bound[0];
    let kappa0 = pole.k_res.im;
    let interior = Interior::new(config, unit, Complex::new(T::zero(), kappa0));
    let x2 = config.outer_edge();
    let f = interior.f.re;

    let eval = |x: T| -> (T, T) {
        if x <= T::zero() {
            (T::zero(), T::one())
        } else if x <= x2 {
            let (u, du) = interior.eval(x);
            (u.re, du.re)
        } else {
            let v = f * (-kappa0 * (x - x2)).exp();
            (v, -kappa0 * v)
        }
    };

    let length = match grid.length {
        Some(l) => l,
        None => {
            // peak of |u| over the potential region, sampled finely
            let samples = 2000;
            let peak = (0..=samples)
                .map(|i| eval(x2 * T::from_count(i) / T::from_count(samples)).0.abs())
                .fold(T::zero(), T::max);
            let ratio = (f.abs() / (T::lit(TAIL_CUTOFF) * peak)).max(T::one());
            x2 + ratio.ln() / kappa0 + grid.dx
        }
    };
    let mesh = grid.mesh_for(&[config], length)?;
    let mut values = Vec::with_capacity(mesh.len());
    let mut slopes = Vec::with_capacity(mesh.len());
    for &x in mesh.nodes() {
        let (v, dv) = eval(x);
        values.push(Complex::new(v, T::zero()));
        slopes.push(Complex::new(dv, T::zero()));
    }
    values[0] = Complex::new(T::zero(), T::zero());
    let wavefunction = WavefunctionGrid::new(mesh, values, slopes)?.normalized()?;
    Ok(GroundState { wavefunction, energy: pole.e_r, pole, bound_states: bound.len() })
}
