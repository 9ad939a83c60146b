//! Static well/barrier geometry and its time-dependent switch.

use crate::{Error, Real, Result};

/// Region of the half-line a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `x <= 0`, infinite potential.
    Wall,
    /// `0 < x <= d`, potential `-V_w`.
    Well,
    /// `d < x <= d + b`, potential `+V_b`.
    Barrier,
    /// `x > d + b`, potential 0.
    Exterior,
}

/// Hard wall, square well and square barrier.
///
/// ```text
/// V(x) = +inf  for x <= 0
///        -V_w  for 0 < x <= d
///        +V_b  for d < x <= d + b
///        0     for x > d + b
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialConfig<T> {
    v_well: T,
    v_barrier: T,
    d: T,
    b: T,
}

impl<T: Real> PotentialConfig<T> {
    pub fn new(v_well: T, v_barrier: T, d: T, b: T) -> Result<Self> {
        let finite = |v: T| v.is_finite();
        if !(finite(v_well) && v_well >= T::zero()) {
            return Err(Error::invalid("v_well", format!("must be finite and >= 0, got {v_well}")));
        }
        if !(finite(v_barrier) && v_barrier >= T::zero()) {
            return Err(Error::invalid("v_barrier", format!("must be finite and >= 0, got {v_barrier}")));
        }
        if !(finite(d) && d > T::zero()) {
            return Err(Error::invalid("d", format!("well width must be > 0, got {d}")));
        }
        if !(finite(b) && b >= T::zero()) {
            return Err(Error::invalid("b", format!("barrier width must be >= 0, got {b}")));
        }
        Ok(Self { v_well, v_barrier, d, b })
    }

    pub fn v_well(&self) -> T {
        self.v_well
    }
    pub fn v_barrier(&self) -> T {
        self.v_barrier
    }
    pub fn well_width(&self) -> T {
        self.d
    }
    pub fn barrier_width(&self) -> T {
        self.b
    }
    /// Position `d + b` beyond which the potential vanishes.
    pub fn outer_edge(&self) -> T {
        self.d + self.b
    }

    pub fn region(&self, x: T) -> Region {
        if x <= T::zero() {
            Region::Wall
        } else if x <= self.d {
            Region::Well
        } else if x <= self.d + self.b {
            Region::Barrier
        } else {
            Region::Exterior
        }
    }

    /// Potential value in a finite region. `Wall` maps to `+inf`.
    pub fn region_value(&self, region: Region) -> T {
        match region {
            Region::Wall => T::infinity(),
            Region::Well => -self.v_well,
            Region::Barrier => self.v_barrier,
            Region::Exterior => T::zero(),
        }
    }

    /// `V(x)`, with `+inf` marking the hard wall.
    pub fn value_at(&self, x: T) -> T {
        self.region_value(self.region(x))
    }

    /// Same geometry with different depths.
    pub fn with_strengths(&self, v_well: T, v_barrier: T) -> Result<Self> {
        Self::new(v_well, v_barrier, self.d, self.b)
    }

    /// Largest `|V_fin(x) - V_init(x)|` over `x > 0`. Both configurations must
    /// share the geometry for the switch to be region-wise.
    pub fn max_difference(&self, other: &Self) -> T {
        let mut m = T::zero();
        for x in self.breakpoints_with(other) {
            let dv = (self.value_at(x) - other.value_at(x)).abs();
            m = m.max(dv);
        }
        m
    }

    /// Sample points, one inside every interval of the merged region partition.
    fn breakpoints_with(&self, other: &Self) -> Vec<T> {
        let mut edges = vec![T::zero(), self.d, self.d + self.b, other.d, other.d + other.b];
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup();
        let mut pts = Vec::with_capacity(edges.len());
        for w in edges.windows(2) {
            pts.push(T::lit(0.5) * (w[0] + w[1]));
        }
        pts.push(*edges.last().unwrap() + T::one());
        pts
    }
}

/// `V(t, x) = [V_fin(x) - V_init(x)] (1 - exp(-t/T)) + V_init(x)`.
///
/// `t_switch = 0` is the sudden switch: the final potential for every `t > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingSchedule<T> {
    initial: PotentialConfig<T>,
    target: PotentialConfig<T>,
    t_switch: T,
}

impl<T: Real> SwitchingSchedule<T> {
    pub fn new(initial: PotentialConfig<T>, target: PotentialConfig<T>, t_switch: T) -> Result<Self> {
        if !(t_switch >= T::zero()) || !t_switch.is_finite() {
            return Err(Error::invalid("t_switch", format!("must be finite and >= 0, got {t_switch}")));
        }
        Ok(Self { initial, target, t_switch })
    }

    pub fn sudden(initial: PotentialConfig<T>, target: PotentialConfig<T>) -> Self {
        Self { initial, target, t_switch: T::zero() }
    }

    /// A schedule that never changes the potential.
    pub fn constant(config: PotentialConfig<T>) -> Self {
        Self { initial: config, target: config, t_switch: T::zero() }
    }

    pub fn initial(&self) -> &PotentialConfig<T> {
        &self.initial
    }
    /// The final configuration.
    pub fn target(&self) -> &PotentialConfig<T> {
        &self.target
    }
    pub fn t_switch(&self) -> T {
        self.t_switch
    }
    pub fn is_sudden(&self) -> bool {
        self.t_switch == T::zero()
    }

    /// Interpolation weight `1 - exp(-t/T)` in `[0, 1]`.
    pub fn mixing(&self, t: T) -> Result<T> {
        if !(t >= T::zero()) {
            return Err(Error::invalid("t", format!("time must be >= 0, got {t}")));
        }
        Ok(self.mixing_unchecked(t))
    }

    pub(crate) fn mixing_unchecked(&self, t: T) -> T {
        if t <= T::zero() {
            T::zero()
        } else if self.is_sudden() {
            T::one()
        } else {
            -(-t / self.t_switch).exp_m1()
        }
    }

    pub fn potential_at(&self, t: T, x: T) -> Result<T> {
        let lambda = self.mixing(t)?;
        if x <= T::zero() {
            return Ok(T::infinity());
        }
        let vi = self.initial.value_at(x);
        let vf = self.target.value_at(x);
        if lambda == T::zero() {
            return Ok(vi);
        }
        if lambda == T::one() {
            return Ok(vf);
        }
        let v = vi + (vf - vi) * lambda;
        Ok(v.max(vi.min(vf)).min(vi.max(vf)))
    }

    /// `sup_x |V(t, x) - V_fin(x)|`.
    pub fn residual_deviation(&self, t: T) -> Result<T> {
        let lambda = self.mixing(t)?;
        Ok((T::one() - lambda) * self.initial.max_difference(&self.target))
    }

    /// Earliest time at which [`Self::residual_deviation`] drops to `eps`:
    /// `T ln(max|ΔV| / eps)`, and 0 for a sudden or trivial switch.
    pub fn settle_time(&self, eps: T) -> T {
        let dv = self.initial.max_difference(&self.target);
        if self.is_sudden() || dv <= eps {
            T::zero()
        } else {
            self.t_switch * (dv / eps).ln()
        }
    }
}
