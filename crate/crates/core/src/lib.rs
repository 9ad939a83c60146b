//! Velocity preparation of cold atoms by converting a trap bound state into a
//! resonance.
//!
//! The crate models a hard wall at `x = 0`, a well of depth `V_w` on `(0, d]`
//! and a barrier of height `V_b` on `(d, d + b]`. It provides
//!
//! * closed-form stationary scattering for that geometry: S-matrix, phase
//!   shift, Wigner delay time and the pole function whose zeros are bound
//!   states and resonances ([`scattering`]);
//! * certified pole search in the complex wave-number plane and iso-resonance
//!   curve tracing ([`poles`], [`iso`]);
//! * the analytic ground state of a configuration ([`initial`]);
//! * Crank-Nicolson propagation through a time-dependent switch between two
//!   configurations ([`propagator`]);
//! * release-energy spectra, Lorentzian/exponential fits and the search for the
//!   optimal switching time ([`spectral`]).
//!
//! Units: `hbar = 1`, lengths in µm, times in s, energies in s⁻¹ (that is,
//! `hbar/s`). The mass enters only through `kappa = hbar/m` in µm²/s.
//!
//! All numerical code is generic over the scalar type through [`Real`]; the
//! `f64` instantiations are re-exported under the aliases at the bottom of
//! this file.

pub mod error;
pub mod fem;
pub mod initial;
pub mod iso;
pub mod numerics;
pub mod poles;
pub mod potential;
pub mod propagator;
pub mod scattering;
pub mod spectral;
pub mod units;
pub mod wavefunction;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Complex number over the crate scalar.
pub type Complex<T> = num_complex::Complex<T>;

/// Floating-point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count into the scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// A relative tolerance that never drops below what the type can resolve.
    #[inline]
    fn tolerance(requested: f64) -> Self {
        Self::lit(requested).max(Self::epsilon() * Self::lit(64.0))
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub use initial::{ground_state, GroundState, GroundStateSelection, GridSpec};
pub use iso::{trace_iso_resonance, IsoCurve, IsoSample, IsoSearch};
pub use poles::{find_poles, PoleKind, Resonance, SearchRegion};
pub use propagator::{
    non_escape_probability, propagate, Absorber, DecayRecord, PropagationResult, PropagationSetup,
    Snapshot,
};
pub use potential::{PotentialConfig, SwitchingSchedule};
pub use scattering::{delay_time, omega, phase_shift_curve, solve_scattering, ChannelWavenumbers, ScatteringSolution};
pub use spectral::{
    energy_distribution, fit_exponential_decay, fit_lorentzian, fit_lorentzian_with_background, lorentzian_reference, minimize_switch_time,
    optimal_switch_time, EnergyDistribution, EnergyGrid, ExponentialFit, LorentzianFit, LorentzianReference,
    Objective, ScanResult, ScanSpec, SwitchStudy,
};
pub use units::UnitSystem;
pub use wavefunction::{probability_in_well, WavefunctionGrid};

/// `f64` potential geometry.
pub type PotentialConfigF64 = PotentialConfig<f64>;
/// `f64` switching schedule.
pub type SwitchingScheduleF64 = SwitchingSchedule<f64>;
/// `f64` unit system.
pub type UnitSystemF64 = UnitSystem<f64>;
/// `f64` S-matrix pole.
pub type ResonanceF64 = Resonance<f64>;
/// `f64` wavefunction on the propagation grid.
pub type WavefunctionGridF64 = WavefunctionGrid<f64>;
/// `f64` energy distribution.
pub type EnergyDistributionF64 = EnergyDistribution<f64>;
/// `f32` potential geometry.
pub type PotentialConfigF32 = PotentialConfig<f32>;
/// `f32` unit system.
pub type UnitSystemF32 = UnitSystem<f32>;
/// `f32` S-matrix pole.
pub type ResonanceF32 = Resonance<f32>;
