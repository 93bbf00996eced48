//! Rotating triaxial logarithmic potential: parameters, potential, Hamiltonian
//! and equations of motion in the rotating barycentric frame.
//!
//! Units: lengths in kpc, velocities and momenta in km/s, energies in
//! km²/s². The time unit is kpc/(km/s) (about 0.9778 Gyr).

mod contour;

pub use contour::{zero_velocity_curve, Contour, ContourOptions};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Gravitational constant in kpc·(km/s)²/M☉.
pub const GRAVITATIONAL_CONSTANT: f64 = 4.300917270e-6;

/// Length of one time unit, kpc/(km/s), expressed in Gyr.
pub const TIME_UNIT_GYR: f64 = 0.977_792_221_680_356;

/// The five constants of the potential plus the pattern speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Asymptotic circular velocity (km/s).
    pub v0: f64,
    /// Core radius (kpc).
    pub r0: f64,
    /// Planar axial ratio.
    pub p_phi: f64,
    /// Vertical axial ratio.
    pub q_phi: f64,
    /// Pattern speed (km/s/kpc).
    pub omega: f64,
}

impl ModelParams {
    /// The standard triaxial model with `R0² = 200 kpc²` stored exactly.
    pub fn model1() -> Self {
        Self {
            v0: 200.0,
            r0: 200f64.sqrt(),
            p_phi: 0.75,
            q_phi: 0.65,
            omega: 5.0,
        }
    }

    pub fn with_p_phi(mut self, p: f64) -> Self {
        self.p_phi = p;
        self
    }

    pub fn with_q_phi(mut self, q: f64) -> Self {
        self.q_phi = q;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn r0_sq(&self) -> f64 {
        self.r0 * self.r0
    }

    /// Checks every parameter constraint, collecting all violations.
    pub fn validate(&self) -> Result<(), ViolationReport> {
        let mut v = Vec::new();
        let finite = [self.v0, self.r0, self.p_phi, self.q_phi, self.omega]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            v.push(Violation::NonFinite);
            return Err(ViolationReport(v));
        }
        if self.v0 <= 0.0 {
            v.push(Violation::NonPositiveV0);
        }
        if self.r0 <= 0.0 {
            v.push(Violation::NonPositiveR0);
        }
        if self.omega < 0.0 {
            v.push(Violation::NegativeOmega);
        }
        if !(self.q_phi > 0.0 && self.q_phi <= self.p_phi && self.p_phi <= 1.0) {
            v.push(Violation::AxisOrdering);
        }
        let p2 = self.p_phi * self.p_phi;
        if self.q_phi * self.q_phi <= p2 / (1.0 + p2) {
            v.push(Violation::NegativeDensity);
        }
        if self.omega > 0.0 && self.v0 / self.omega <= self.r0 {
            v.push(Violation::NoSaddlePoints);
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(ViolationReport(v))
        }
    }

    /// `R0² + x² + y²/p² + z²/q²`, the argument of the logarithm.
    #[inline]
    fn log_arg(&self, x: f64, y: f64, z: f64) -> f64 {
        self.r0_sq()
            + x * x
            + y * y / (self.p_phi * self.p_phi)
            + z * z / (self.q_phi * self.q_phi)
    }

    pub fn potential(&self, pos: [f64; 3]) -> f64 {
        0.5 * self.v0 * self.v0 * self.log_arg(pos[0], pos[1], pos[2]).ln()
    }

    pub fn potential_gradient(&self, pos: [f64; 3]) -> [f64; 3] {
        let [x, y, z] = pos;
        let s = self.v0 * self.v0 / self.log_arg(x, y, z);
        [
            s * x,
            s * y / (self.p_phi * self.p_phi),
            s * z / (self.q_phi * self.q_phi),
        ]
    }

    /// Closed-form Laplacian of the potential.
    pub fn density_laplacian(&self, pos: [f64; 3]) -> f64 {
        let [x, y, z] = pos;
        let (p2, q2) = (self.p_phi * self.p_phi, self.q_phi * self.q_phi);
        let d = self.log_arg(x, y, z);
        let v2 = self.v0 * self.v0;
        v2 * (1.0 + 1.0 / p2 + 1.0 / q2) / d
            - 2.0 * v2 * (x * x + y * y / (p2 * p2) + z * z / (q2 * q2)) / (d * d)
    }

    /// Mass density in M☉/kpc³ from Poisson's equation.
    pub fn density(&self, pos: [f64; 3]) -> f64 {
        self.density_laplacian(pos) / (4.0 * std::f64::consts::PI * GRAVITATIONAL_CONSTANT)
    }

    /// Jacobi energy of a phase-space point.
    pub fn hamiltonian(&self, s: &PhaseState) -> f64 {
        0.5 * (s.px * s.px + s.py * s.py + s.pz * s.pz) + self.potential([s.x, s.y, s.z])
            - self.omega * (s.x * s.py - s.y * s.px)
    }

    /// Hamiltonian vector field.
    pub fn eom(&self, s: &PhaseState) -> PhaseState {
        let [gx, gy, gz] = self.potential_gradient([s.x, s.y, s.z]);
        let w = self.omega;
        PhaseState {
            x: s.px + w * s.y,
            y: s.py - w * s.x,
            z: s.pz,
            px: -gx + w * s.py,
            py: -gy - w * s.px,
            pz: -gz,
        }
    }

    /// Gradient of the Hamiltonian in `(x, y, z, px, py, pz)` order.
    pub fn hamiltonian_gradient(&self, s: &PhaseState) -> [f64; 6] {
        let [gx, gy, gz] = self.potential_gradient([s.x, s.y, s.z]);
        let w = self.omega;
        [
            gx - w * s.py,
            gy + w * s.px,
            gz,
            s.px + w * s.y,
            s.py - w * s.x,
            s.pz,
        ]
    }

    /// `H(base + delta) − H(base)` without the cancellation of two large energies.
    pub fn hamiltonian_offset(&self, base: &PhaseState, delta: &PhaseState) -> f64 {
        let (b, d) = (base, delta);
        let kinetic = b.px * d.px + b.py * d.py + b.pz * d.pz
            + 0.5 * (d.px * d.px + d.py * d.py + d.pz * d.pz);
        let (p2, q2) = (self.p_phi * self.p_phi, self.q_phi * self.q_phi);
        let den = self.r0_sq() + b.x * b.x + b.y * b.y / p2 + b.z * b.z / q2;
        let dden = d.x * (2.0 * b.x + d.x)
            + d.y * (2.0 * b.y + d.y) / p2
            + d.z * (2.0 * b.z + d.z) / q2;
        let potential = 0.5 * self.v0 * self.v0 * (dden / den).ln_1p();
        let coriolis = -self.omega
            * (b.x * d.py + d.x * b.py + d.x * d.py - b.y * d.px - d.y * b.px - d.y * d.px);
        kinetic + potential + coriolis
    }

    /// `Φ − ½Ω²(x² + y²)`; its level set at `E_J` is the zero-velocity surface.
    pub fn effective_potential(&self, pos: [f64; 3]) -> f64 {
        let [x, y, _] = pos;
        self.potential(pos) - 0.5 * self.omega * self.omega * (x * x + y * y)
    }

    /// Circular velocity along the major (x) axis.
    pub fn circular_velocity(&self, r: f64) -> f64 {
        let r = r.abs();
        let dphi = self.potential_gradient([r, 0.0, 0.0])[0];
        (r * dphi).max(0.0).sqrt()
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::model1()
    }
}

/// One failed parameter constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    NonFinite,
    NonPositiveV0,
    NonPositiveR0,
    NegativeOmega,
    AxisOrdering,
    NegativeDensity,
    NoSaddlePoints,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Violation::NonFinite => "all parameters must be finite",
            Violation::NonPositiveV0 => "v0 must be > 0",
            Violation::NonPositiveR0 => "R0 must be > 0",
            Violation::NegativeOmega => "omega must be >= 0",
            Violation::AxisOrdering => "axis ratios must satisfy 0 < q_phi <= p_phi <= 1",
            Violation::NegativeDensity => "q_phi^2 must exceed p_phi^2/(1+p_phi^2) (density positivity)",
            Violation::NoSaddlePoints => "v0/omega must exceed R0 for L1/L2 to exist",
        };
        f.write_str(s)
    }
}

/// All constraint violations of a parameter set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationReport(pub Vec<Violation>);

impl ViolationReport {
    pub fn contains(&self, v: Violation) -> bool {
        self.0.contains(&v)
    }
}

impl fmt::Display for ViolationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ViolationReport {}

/// A point of phase space in rotating barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl PhaseState {
    pub fn new(x: f64, y: f64, z: f64, px: f64, py: f64, pz: f64) -> Self {
        Self { x, y, z, px, py, pz }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.z, self.px, self.py, self.pz]
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Rotating-frame velocity `(ẋ, ẏ, ż)`.
    pub fn velocity(&self, omega: f64) -> [f64; 3] {
        [self.px + omega * self.y, self.py - omega * self.x, self.pz]
    }

    /// Image under the 180° rotation about the z-axis.
    pub fn rotated_pi(&self) -> Self {
        Self::new(-self.x, -self.y, self.z, -self.px, -self.py, self.pz)
    }

    /// Image under the time-reversing reflection `(y, px, pz, t) → (−y, −px, −pz, −t)`.
    pub fn reflected(&self) -> Self {
        Self::new(self.x, -self.y, self.z, -self.px, self.py, -self.pz)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn five_point(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn model1_is_valid() {
        assert!(ModelParams::model1().validate().is_ok());
    }

    #[test]
    fn density_boundary_is_rejected() {
        let m = ModelParams::model1().with_p_phi(0.75).with_q_phi(0.60);
        let r = m.validate().unwrap_err();
        assert!(r.contains(Violation::NegativeDensity));
        assert_eq!(r.0.len(), 1);
    }

    #[test]
    fn spherical_limit_is_valid() {
        let m = ModelParams::model1().with_p_phi(1.0).with_q_phi(1.0);
        assert!(m.validate().is_ok());
    }

    #[test]
    fn report_lists_every_violation() {
        let m = ModelParams {
            v0: -1.0,
            r0: 0.0,
            p_phi: 0.5,
            q_phi: 0.9,
            omega: -2.0,
        };
        let r = m.validate().unwrap_err();
        for v in [
            Violation::NonPositiveV0,
            Violation::NonPositiveR0,
            Violation::NegativeOmega,
            Violation::AxisOrdering,
        ] {
            assert!(r.contains(v), "{v:?} missing from {r}");
        }
    }

    #[test]
    fn potential_at_origin() {
        let m = ModelParams::model1();
        assert_relative_eq!(m.potential([0.0; 3]), 20000.0 * 200f64.ln(), max_relative = 1e-14);
        assert!((m.potential([0.0; 3]) - 105966.346).abs() < 2e-3);
    }

    #[test]
    fn potential_symmetries() {
        let m = ModelParams::model1().with_p_phi(1.0).with_q_phi(1.0);
        let a = m.potential([1.0, 0.0, 0.0]);
        assert_eq!(a, m.potential([0.0, 1.0, 0.0]));
        assert_eq!(a, m.potential([0.0, 0.0, 1.0]));
        let m = ModelParams::model1();
        let p = [3.0, -7.0, 2.5];
        assert_eq!(m.potential(p), m.potential([-3.0, 7.0, -2.5]));
    }

    #[test]
    fn gradient_at_l1_balances_centrifugal_term() {
        let m = ModelParams::model1();
        let x = 1400f64.sqrt();
        let g = m.potential_gradient([x, 0.0, 0.0]);
        assert_relative_eq!(g[0], 25.0 * x, max_relative = 1e-14);
        assert_eq!(g[1], 0.0);
        assert_eq!(m.potential_gradient([0.0; 3]), [0.0; 3]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = ModelParams::model1();
        let p = [12.3, -4.5, 7.7];
        let g = m.potential_gradient(p);
        for k in 0..3 {
            let fd = five_point(
                |t| {
                    let mut q = p;
                    q[k] = t;
                    m.potential(q)
                },
                p[k],
                1e-3,
            );
            assert_relative_eq!(g[k], fd, max_relative = 1e-8);
        }
    }

    #[test]
    fn laplacian_at_origin_closed_form() {
        let m = ModelParams::model1();
        let expected = 200.0 * (1.0 + 1.0 / 0.5625 + 1.0 / 0.4225);
        assert_relative_eq!(m.density_laplacian([0.0; 3]), expected, max_relative = 1e-13);
    }

    #[test]
    fn laplacian_goes_negative_on_z_axis_when_constraint_fails() {
        let bad = ModelParams::model1().with_q_phi(0.5);
        assert!(bad.validate().is_err());
        assert!(bad.density_laplacian([0.0, 0.0, 500.0]) < 0.0);
        let good = ModelParams::model1();
        for i in 0..200 {
            let z = i as f64 * 5.0;
            assert!(good.density([0.0, 0.0, z]) > 0.0);
        }
    }

    #[test]
    fn jacobi_energy_of_l1() {
        let m = ModelParams::model1();
        let x = 1400f64.sqrt();
        let s = PhaseState::new(x, 0.0, 0.0, 0.0, 5.0 * x, 0.0);
        assert!((m.hamiltonian(&s) - 130055.178).abs() < 1e-3);
        let origin = PhaseState::default();
        assert_relative_eq!(m.hamiltonian(&origin), m.potential([0.0; 3]));
    }

    #[test]
    fn eom_vanishes_at_l1_and_conserves_energy() {
        let m = ModelParams::model1();
        let x = 1400f64.sqrt();
        let f = m.eom(&PhaseState::new(x, 0.0, 0.0, 0.0, 5.0 * x, 0.0));
        assert!(f.to_array().iter().all(|v| v.abs() < 1e-10));
        let s = PhaseState::new(20.0, -3.0, 1.5, 12.0, 80.0, -4.0);
        let g = m.hamiltonian_gradient(&s);
        let f = m.eom(&s).to_array();
        let dot: f64 = g.iter().zip(f).map(|(a, b)| a * b).sum();
        let scale: f64 = g.iter().map(|v| v * v).sum::<f64>();
        assert!(dot.abs() < 1e-10 * scale);
    }

    #[test]
    fn rotation_curve() {
        let m = ModelParams::model1();
        assert_eq!(m.circular_velocity(0.0), 0.0);
        assert_relative_eq!(m.circular_velocity(m.r0), 200.0 / 2f64.sqrt(), max_relative = 1e-13);
        assert!((m.circular_velocity(1e6) - 200.0).abs() < 1e-3);
        let mut prev = 0.0;
        for i in 1..500 {
            let v = m.circular_velocity(i as f64 * 0.5);
            assert!(v > prev && v < 200.0);
            prev = v;
        }
    }

    #[test]
    fn energy_offset_matches_direct_difference() {
        let m = ModelParams::model1();
        let base = PhaseState::new(30.0, -4.0, 1.5, 20.0, 150.0, -3.0);
        let delta = PhaseState::new(0.7, 0.3, -0.2, 4.0, -6.0, 1.0);
        let b = base.to_array();
        let d = delta.to_array();
        let sum = PhaseState::from_array(std::array::from_fn(|k| b[k] + d[k]));
        let direct = m.hamiltonian(&sum) - m.hamiltonian(&base);
        assert_relative_eq!(m.hamiltonian_offset(&base, &delta), direct, max_relative = 1e-9);
    }

}
