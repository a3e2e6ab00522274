//! Backstepping maneuvering controller with the unit-tangent gradient update
//! law for the path parameter.

use nalgebra::{Matrix2, Matrix3, Vector3};
use thiserror::Error;

use crate::flowfield::wrap_angle;
use crate::pathgen::BezierSegment;
use crate::vessel::{rotation, VesselParams, VesselState};
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid gains: {0}")]
    Gains(String),
    #[error("path parameter s = {s} is beyond the {segments} built segments")]
    PathExhausted { s: f64, segments: usize },
    #[error("no path segments")]
    EmptyPath,
    #[error("non-finite controller output: z_p = {z_p:?}, z_psi = {z_psi}, z_nu = {z_nu:?}")]
    Fault {
        z_p: [f64; 2],
        z_psi: f64,
        z_nu: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlGains {
    pub kp: Matrix2<f64>,
    pub k_psi: f64,
    pub k_nu: Matrix3<f64>,
    pub mu: f64,
    pub eps_reg: f64,
    pub u_d: f64,
}

impl ControlGains {
    pub fn new(
        kp: Matrix2<f64>,
        k_psi: f64,
        k_nu: Matrix3<f64>,
        mu: f64,
        eps_reg: f64,
        u_d: f64,
    ) -> Result<Self, ControlError> {
        if (kp - kp.transpose()).amax() > 1e-12 || kp.cholesky().is_none() {
            return Err(ControlError::Gains("K_p must be symmetric positive definite".into()));
        }
        if ((k_nu + k_nu.transpose()) * 0.5).cholesky().is_none() {
            return Err(ControlError::Gains("K_nu must be positive definite".into()));
        }
        if k_psi.is_nan() || k_psi <= 0.0 {
            return Err(ControlError::Gains(format!("k_psi must be positive, got {k_psi}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(ControlError::Gains(format!("mu must be non-negative, got {mu}")));
        }
        if !(eps_reg > 0.0 && eps_reg.is_finite()) {
            return Err(ControlError::Gains(format!("eps_reg must be positive, got {eps_reg}")));
        }
        if !(u_d > 0.0 && u_d.is_finite()) {
            return Err(ControlError::Gains(format!("u_d must be positive, got {u_d}")));
        }
        Ok(ControlGains { kp, k_psi, k_nu, mu, eps_reg, u_d })
    }

    /// Tuning used throughout the bundled scenarios.
    pub fn standard() -> Self {
        Self::new(
            Matrix2::from_diagonal(&Vec2::new(20.0, 20.0)),
            40.0,
            Matrix3::from_diagonal(&Vector3::new(20.0, 20.0, 20.0)),
            1e-4,
            0.01,
            0.2,
        )
        .expect("standard gains are valid")
    }
}

/// Desired position and heading with their path derivatives at `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSignal {
    pub s: f64,
    pub p_d: Vec2,
    pub p_d_s: Vec2,
    pub p_d_s2: Vec2,
    pub p_d_s3: Vec2,
    pub psi_d: f64,
    pub psi_d_s: f64,
    pub psi_d_s2: f64,
    /// Speed assignment `vartheta_d(s)`.
    pub speed: f64,
    pub speed_s: f64,
}

impl PathSignal {
    pub fn from_derivatives(s: f64, d: [Vec2; 4], u_d: f64, eps: f64) -> Self {
        let [p, p1, p2, p3] = d;
        let len = p1.norm();
        let num = p1.x * p2.y - p1.y * p2.x;
        let den = p1.norm_squared();
        let (psi_d_s, psi_d_s2) = if den > 0.0 {
            let num_s = p1.x * p3.y - p1.y * p3.x;
            let den_s = 2.0 * p1.dot(&p2);
            (num / den, (num_s * den - num * den_s) / (den * den))
        } else {
            (0.0, 0.0)
        };
        let speed = u_d / (len + eps);
        let speed_s = if len > 0.0 {
            -u_d * p1.dot(&p2) / (len * (len + eps).powi(2))
        } else {
            0.0
        };
        PathSignal {
            s,
            p_d: p,
            p_d_s: p1,
            p_d_s2: p2,
            p_d_s3: p3,
            psi_d: p1.y.atan2(p1.x),
            psi_d_s,
            psi_d_s2,
            speed,
            speed_s,
        }
    }

    /// Stationary reference at `p` facing `psi`: no path motion.
    pub fn hold(s: f64, p: Vec2, psi: f64) -> Self {
        PathSignal {
            s,
            p_d: p,
            p_d_s: Vec2::zeros(),
            p_d_s2: Vec2::zeros(),
            p_d_s3: Vec2::zeros(),
            psi_d: psi,
            psi_d_s: 0.0,
            psi_d_s2: 0.0,
            speed: 0.0,
            speed_s: 0.0,
        }
    }
}

/// Segment number (1-based) and local parameter for `s`. The end of the
/// path `s = n` maps to the last segment at `theta = 1`.
pub fn locate(s: f64, segments: usize) -> (usize, f64) {
    let f = s.floor();
    let k = (f as usize).saturating_add(1);
    if k > segments && s == segments as f64 {
        return (segments, 1.0);
    }
    (k, s - f)
}

pub fn path_signal(
    segments: &[BezierSegment],
    s: f64,
    gains: &ControlGains,
) -> Result<PathSignal, ControlError> {
    if segments.is_empty() {
        return Err(ControlError::EmptyPath);
    }
    if !(s >= 0.0 && s <= segments.len() as f64) {
        return Err(ControlError::PathExhausted { s, segments: segments.len() });
    }
    let (k, theta) = locate(s, segments.len());
    Ok(signal_on_segment(&segments[k - 1], s, theta, gains))
}

/// Evaluate one segment at local `theta`, extrapolating if outside `[0, 1]`.
pub fn signal_on_segment(seg: &BezierSegment, s: f64, theta: f64, gains: &ControlGains) -> PathSignal {
    let d = [0, 1, 2, 3].map(|o| seg.eval_polynomial(theta, o));
    PathSignal::from_derivatives(s, d, gains.u_d, gains.eps_reg)
}

pub fn update_law(p: Vec2, sig: &PathSignal, gains: &ControlGains) -> f64 {
    gains.mu * sig.p_d_s.dot(&(p - sig.p_d)) / (sig.p_d_s.norm() + gains.eps_reg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    pub z_p: Vec2,
    pub z_psi: f64,
    pub z_nu: Vector3<f64>,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub tau: Vector3<f64>,
    pub errors: ErrorState,
    pub alpha: Vector3<f64>,
    pub alpha_dot: Vector3<f64>,
    /// Path speed `s' = vartheta_d + omega`.
    pub s_dot: f64,
}

const S: Matrix2<f64> = Matrix2::new(0.0, -1.0, 1.0, 0.0);

/// Virtual control `alpha(p, psi, s)`.
pub fn virtual_control(state: &VesselState, sig: &PathSignal, gains: &ControlGains) -> Vector3<f64> {
    let rt = rotation(state.heading).transpose();
    let z_p = rt * (state.position - sig.p_d);
    let z_psi = wrap_angle(state.heading - sig.psi_d);
    let a_p = -gains.kp * z_p + rt * sig.p_d_s * sig.speed;
    let a_psi = -gains.k_psi * z_psi + sig.psi_d_s * sig.speed;
    Vector3::new(a_p.x, a_p.y, a_psi)
}

pub fn control_law(
    state: &VesselState,
    sig: &PathSignal,
    gains: &ControlGains,
    params: &VesselParams,
) -> Result<ControlOutput, ControlError> {
    let rt = rotation(state.heading).transpose();
    let r = state.yaw_rate();
    let v = state.body_velocity();
    let z_p = rt * (state.position - sig.p_d);
    let z_psi = wrap_angle(state.heading - sig.psi_d);
    let omega = update_law(state.position, sig, gains);
    let s_dot = sig.speed + omega;

    let tangent = rt * sig.p_d_s;
    let a_p = -gains.kp * z_p + tangent * sig.speed;
    let a_psi = -gains.k_psi * z_psi + sig.psi_d_s * sig.speed;
    let alpha = Vector3::new(a_p.x, a_p.y, a_psi);

    let z_p_dot = -(S * z_p) * r + v - tangent * s_dot;
    let a_p_dot = -gains.kp * z_p_dot - (S * tangent) * (r * sig.speed)
        + rt * sig.p_d_s2 * (s_dot * sig.speed)
        + tangent * (sig.speed_s * s_dot);
    let psi_dd = sig.psi_d_s2 * sig.speed * sig.speed + sig.psi_d_s * sig.speed_s * sig.speed;
    let a_psi_dot = -gains.k_psi * (r - sig.psi_d_s * sig.speed) + psi_dd;
    let alpha_dot = Vector3::new(a_p_dot.x, a_p_dot.y, a_psi_dot);

    let nu = state.nu;
    let z_nu = nu - alpha;
    let tau = -gains.k_nu * z_nu
        + params.coriolis(&nu) * nu
        + params.damping() * alpha
        + params.mass() * alpha_dot;

    let errors = ErrorState { z_p, z_psi, z_nu, omega };
    if !(tau.iter().all(|x| x.is_finite()) && s_dot.is_finite()) {
        return Err(ControlError::Fault {
            z_p: [z_p.x, z_p.y],
            z_psi,
            z_nu: [z_nu[0], z_nu[1], z_nu[2]],
        });
    }
    Ok(ControlOutput { tau, errors, alpha, alpha_dot, s_dot })
}
