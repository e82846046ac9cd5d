//! Equations of motion for a planar two-link arm with point masses at the
//! link tips.
//!
//! The model is `M(q) q̈ + C(q, q̇) + G(q) + F(q̇) = τ`, where `C` is already
//! the full velocity-product force vector (not a matrix awaiting `q̇`).
//! Gravity follows the sign convention in which `q = 0` is the upright
//! configuration: `G = ∂V/∂q` with `V = (m1 + m2) g l1 cos q1 + m2 g l2 cos(q1 + q2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pair of per-joint quantities (angles, rates, torques, ...).
pub type Vec2 = [f64; 2];

/// Which expression to use for the second Coriolis/centripetal component.
///
/// The two forms share the first component
/// `-m2 l1 l2 sin(q2) (2 q̇1 q̇2 + q̇2²)` and differ in the second:
///
/// * `Lagrangian`: `+m2 l1 l2 sin(q2) q̇1²`, the term derived from the kinetic
///   energy `½ q̇ᵀ M(q) q̇`. Free motion conserves [`total_energy`].
/// * `Printed`: `-m2 l1 l2 sin(q2) q̇1 q̇2`, the literal published form. It is
///   not consistent with `M(q)`; a free swing gains or loses energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoriolisForm {
    #[default]
    Lagrangian,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    /// Mass of link 1 (kg).
    pub m1: f64,
    /// Mass of link 2 (kg).
    pub m2: f64,
    /// Length of link 1 (m).
    pub l1: f64,
    /// Length of link 2 (m).
    pub l2: f64,
    /// Gravitational acceleration (m/s²).
    pub g: f64,
    /// Viscous friction of joint 1 (N·m·s/rad).
    pub b1: f64,
    /// Viscous friction of joint 2 (N·m·s/rad).
    pub b2: f64,
    pub coriolis: CoriolisForm,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            m1: 5.0,
            m2: 5.0,
            l1: 0.34,
            l2: 0.34,
            g: 9.81,
            b1: 0.0,
            b2: 0.0,
            coriolis: CoriolisForm::Lagrangian,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m1", self.m1),
            ("m2", self.m2),
            ("l1", self.l1),
            ("l2", self.l2),
            ("g", self.g),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(
                    format!("robot.{name}"),
                    format!("must be finite and > 0 (got {v})"),
                ));
            }
        }
        for (name, v) in [("b1", self.b1), ("b2", self.b2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    format!("robot.{name}"),
                    format!("must be finite and >= 0 (got {v})"),
                ));
            }
        }
        Ok(())
    }

    /// `m2 l1 l2`, the coupling coefficient shared by `M` and `C`.
    #[inline]
    fn coupling(&self) -> f64 {
        self.m2 * self.l1 * self.l2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    /// Joint angles (rad).
    pub q: Vec2,
    /// Joint angular velocities (rad/s).
    pub qdot: Vec2,
}

impl JointState {
    pub fn new(q: Vec2, qdot: Vec2) -> Self {
        JointState { q, qdot }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(&self.qdot).all(|v| v.is_finite())
    }
}

/// Row-major 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    #[inline]
    pub fn det(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        a * d - b * c
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        let [[a, b], [c, d]] = self.0;
        [a * v[0] + b * v[1], c * v[0] + d * v[1]]
    }

    /// Solves `self · x = rhs` by the closed-form inverse.
    #[inline]
    pub fn solve(&self, rhs: Vec2) -> Vec2 {
        let [[a, b], [c, d]] = self.0;
        let inv_det = 1.0 / self.det();
        [
            (d * rhs[0] - b * rhs[1]) * inv_det,
            (a * rhs[1] - c * rhs[0]) * inv_det,
        ]
    }

    /// `½ vᵀ · self · v`
    #[inline]
    pub fn half_quadratic_form(&self, v: Vec2) -> f64 {
        let mv = self.mul_vec(v);
        0.5 * (v[0] * mv[0] + v[1] * mv[1])
    }
}

/// Inertia matrix `M(q)` (kg·m²).
pub fn mass_matrix(p: &RobotParams, q: Vec2) -> Mat2 {
    let h = p.coupling() * q[1].cos();
    let m22 = p.m2 * p.l2 * p.l2;
    let m12 = m22 + h;
    let m11 = (p.m1 + p.m2) * p.l1 * p.l1 + m22 + 2.0 * h;
    Mat2([[m11, m12], [m12, m22]])
}

/// Coriolis and centripetal generalized forces (N·m).
pub fn coriolis_vector(p: &RobotParams, s: &JointState) -> Vec2 {
    let h = p.coupling() * s.q[1].sin();
    let [w1, w2] = s.qdot;
    let c1 = -h * (2.0 * w1 * w2 + w2 * w2);
    let c2 = match p.coriolis {
        CoriolisForm::Lagrangian => h * w1 * w1,
        CoriolisForm::Printed => -h * w1 * w2,
    };
    [c1, c2]
}

/// Gravity generalized forces (N·m).
pub fn gravity_vector(p: &RobotParams, q: Vec2) -> Vec2 {
    let outer = p.m2 * p.l2 * p.g * (q[0] + q[1]).sin();
    [-(p.m1 + p.m2) * p.l1 * p.g * q[0].sin() - outer, -outer]
}

/// Viscous joint friction `B q̇` (N·m).
pub fn friction(p: &RobotParams, qdot: Vec2) -> Vec2 {
    [p.b1 * qdot[0], p.b2 * qdot[1]]
}

/// Joint accelerations `M(q)⁻¹ (τ − C − G − F)`.
pub fn forward_dynamics(p: &RobotParams, s: &JointState, tau: Vec2) -> Result<Vec2> {
    if !s.is_finite() || !tau.iter().all(|t| t.is_finite()) {
        return Err(Error::NonFiniteInput("forward_dynamics"));
    }
    let c = coriolis_vector(p, s);
    let g = gravity_vector(p, s.q);
    let f = friction(p, s.qdot);
    let rhs = [tau[0] - c[0] - g[0] - f[0], tau[1] - c[1] - g[1] - f[1]];
    Ok(mass_matrix(p, s.q).solve(rhs))
}

pub fn kinetic_energy(p: &RobotParams, s: &JointState) -> f64 {
    mass_matrix(p, s.q).half_quadratic_form(s.qdot)
}

/// Potential whose gradient is [`gravity_vector`].
pub fn potential_energy(p: &RobotParams, q: Vec2) -> f64 {
    (p.m1 + p.m2) * p.g * p.l1 * q[0].cos() + p.m2 * p.g * p.l2 * (q[0] + q[1]).cos()
}

/// Kinetic plus potential energy (J).
pub fn total_energy(p: &RobotParams, s: &JointState) -> f64 {
    kinetic_energy(p, s) + potential_energy(p, s.q)
}
