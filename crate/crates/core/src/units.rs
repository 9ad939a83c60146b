//! Unit system with `hbar = 1`.
//!
//! Energies are carried as angular frequencies (s⁻¹), lengths in µm and times
//! in s, so the only physical constant left is `kappa = hbar/m` in µm²·s⁻¹.

use crate::{Error, Real, Result};

/// Reduced Planck constant, J·s (CODATA 2018).
pub const HBAR_SI: f64 = 1.054_571_817e-34;
/// Unified atomic mass unit, kg (CODATA 2018).
pub const ATOMIC_MASS_UNIT_SI: f64 = 1.660_539_066_60e-27;
/// Mass of ²³Na in atomic mass units.
pub const SODIUM_23_AMU: f64 = 22.989_769_28;

/// `hbar / u` expressed in µm²·s⁻¹.
const HBAR_PER_AMU_UM2_S: f64 = HBAR_SI / ATOMIC_MASS_UNIT_SI * 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem<T> {
    kappa: T,
    mass_amu: T,
}

impl<T: Real> UnitSystem<T> {
    /// Builds the unit system for a particle of `mass_amu` atomic mass units.
    pub fn from_mass_amu(mass_amu: T) -> Result<Self> {
        if !(mass_amu > T::zero()) || !mass_amu.is_finite() {
            return Err(Error::invalid("mass_amu", format!("must be positive and finite, got {mass_amu}")));
        }
        let kappa = T::lit(HBAR_PER_AMU_UM2_S) / mass_amu;
        Ok(Self { kappa, mass_amu })
    }

    pub fn sodium23() -> Self {
        Self::from_mass_amu(T::lit(SODIUM_23_AMU)).expect("positive mass")
    }

    /// `hbar/m` in µm²·s⁻¹.
    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn mass_amu(&self) -> T {
        self.mass_amu
    }

    /// `E = kappa k² / 2`.
    pub fn energy(&self, k: T) -> T {
        T::lit(0.5) * self.kappa * k * k
    }

    /// Complex energy of a complex wave number.
    pub fn complex_energy(&self, k: crate::Complex<T>) -> crate::Complex<T> {
        k * k * (T::lit(0.5) * self.kappa)
    }

    /// Non-negative wave number for a non-negative energy.
    pub fn wavenumber(&self, energy: T) -> T {
        (T::lit(2.0) * energy.max(T::zero()) / self.kappa).sqrt()
    }

    /// Group velocity `kappa k` in µm/s.
    pub fn velocity(&self, k: T) -> T {
        self.kappa * k
    }
}

/// Free-function form of [`UnitSystem::from_mass_amu`].
pub fn make_unit_system<T: Real>(mass_amu: T) -> Result<UnitSystem<T>> {
    UnitSystem::from_mass_amu(mass_amu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sodium_kappa_matches_direct_si_evaluation() {
        let u = UnitSystem::<f64>::sodium23();
        // independent route: m in kg, hbar/m in m²/s, then to µm²/s
        let m = SODIUM_23_AMU * 1.660_539_066_60e-27;
        let direct = 1.054_571_817e-34 / m * 1e12;
        assert!((u.kappa() - direct).abs() / direct < 1e-12);
        assert!((u.kappa() - 2762.44).abs() < 0.01, "kappa = {}", u.kappa());
    }

    #[test]
    fn kappa_is_inversely_proportional_to_mass() {
        let a = UnitSystem::from_mass_amu(7.0_f64).unwrap();
        let b = UnitSystem::from_mass_amu(14.0_f64).unwrap();
        assert!((a.kappa() / 2.0 - b.kappa()).abs() <= 1e-15 * a.kappa());
        let one = UnitSystem::from_mass_amu(1.0_f64).unwrap();
        let na = UnitSystem::<f64>::sodium23();
        assert!((one.kappa() / na.kappa() - SODIUM_23_AMU).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_positive_mass() {
        assert!(UnitSystem::from_mass_amu(0.0_f64).is_err());
        assert!(UnitSystem::from_mass_amu(-1.0_f64).is_err());
        assert!(UnitSystem::from_mass_amu(f64::NAN).is_err());
    }

    #[test]
    fn single_precision_agrees() {
        let a = UnitSystem::<f32>::sodium23();
        assert!((a.kappa() - 2762.4374).abs() < 0.01);
    }
}
