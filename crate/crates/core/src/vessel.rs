//! 3DOF surface vessel: `p' = R(psi) v`, `psi' = r`, `M nu' + C(nu) nu + D nu = tau`.

use nalgebra::{Matrix2, Matrix3, Vector3};
use thiserror::Error;

use crate::flowfield::wrap_angle;
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VesselError {
    #[error("invalid vessel parameters: {0}")]
    Params(String),
    #[error("non-finite state after step at p = ({x}, {y}), psi = {psi}, nu = {nu:?}")]
    Blowup {
        x: f64,
        y: f64,
        psi: f64,
        nu: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselState {
    pub position: Vec2,
    pub heading: f64,
    /// Body velocities `[u, v, r]`.
    pub nu: Vector3<f64>,
}

impl VesselState {
    pub fn at_rest(position: Vec2, heading: f64) -> Self {
        VesselState {
            position,
            heading: wrap_angle(heading),
            nu: Vector3::zeros(),
        }
    }

    pub fn body_velocity(&self) -> Vec2 {
        Vec2::new(self.nu[0], self.nu[1])
    }

    pub fn yaw_rate(&self) -> f64 {
        self.nu[2]
    }

    fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.heading.is_finite()
            && self.nu.iter().all(|v| v.is_finite())
    }
}

/// Time derivative of the state: `[x', y', psi', u', v', r']`.
pub type StateRate = [f64; 6];

#[derive(Debug, Clone, PartialEq)]
pub struct VesselParams {
    mass: Matrix3<f64>,
    mass_inv: Matrix3<f64>,
    damping: Matrix3<f64>,
}

impl VesselParams {
    /// Placeholder plant, not calibrated against any real model ship.
    pub fn default_plant() -> Self {
        Self::new(
            Matrix3::from_diagonal(&Vector3::new(30.0, 40.0, 6.0)),
            Matrix3::from_diagonal(&Vector3::new(50.0, 50.0, 10.0)),
        )
        .expect("default plant is valid")
    }

    pub fn new(mass: Matrix3<f64>, damping: Matrix3<f64>) -> Result<Self, VesselError> {
        if !mass.iter().chain(damping.iter()).all(|v| v.is_finite()) {
            return Err(VesselError::Params("non-finite entries".into()));
        }
        if (mass - mass.transpose()).amax() > 1e-12 * mass.amax() {
            return Err(VesselError::Params("inertia matrix is not symmetric".into()));
        }
        let chol = mass
            .cholesky()
            .ok_or_else(|| VesselError::Params("inertia matrix is not positive definite".into()))?;
        let sym = (damping + damping.transpose()) * 0.5;
        if sym.cholesky().is_none() {
            return Err(VesselError::Params(
                "damping matrix must have a positive definite symmetric part".into(),
            ));
        }
        Ok(VesselParams {
            mass,
            mass_inv: chol.inverse(),
            damping,
        })
    }

    pub fn mass(&self) -> &Matrix3<f64> {
        &self.mass
    }

    pub fn mass_inv(&self) -> &Matrix3<f64> {
        &self.mass_inv
    }

    pub fn damping(&self) -> &Matrix3<f64> {
        &self.damping
    }

    /// Rigid-body Coriolis matrix, skew-symmetric for symmetric `M`.
    pub fn coriolis(&self, nu: &Vector3<f64>) -> Matrix3<f64> {
        let m = &self.mass;
        let c13 = -(m[(1, 0)] * nu[0] + m[(1, 1)] * nu[1] + m[(1, 2)] * nu[2]);
        let c23 = m[(0, 0)] * nu[0] + m[(0, 1)] * nu[1] + m[(0, 2)] * nu[2];
        Matrix3::new(0.0, 0.0, c13, 0.0, 0.0, c23, -c13, -c23, 0.0)
    }

    pub fn kinetic_energy(&self, nu: &Vector3<f64>) -> f64 {
        0.5 * nu.dot(&(self.mass * nu))
    }
}

pub fn rotation(psi: f64) -> Matrix2<f64> {
    let (s, c) = psi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

pub fn derivative(state: &VesselState, tau: &Vector3<f64>, params: &VesselParams) -> StateRate {
    let pdot = rotation(state.heading) * state.body_velocity();
    let nu = &state.nu;
    let nudot = params.mass_inv * (tau - params.coriolis(nu) * nu - params.damping * nu);
    [pdot.x, pdot.y, nu[2], nudot[0], nudot[1], nudot[2]]
}

/// Classic RK4 over a fixed-size state.
pub fn rk4<const N: usize>(
    y: &[f64; N],
    dt: f64,
    mut f: impl FnMut(&[f64; N]) -> [f64; N],
) -> [f64; N] {
    let shift = |base: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] {
        std::array::from_fn(|i| base[i] + h * k[i])
    };
    let k1 = f(y);
    let k2 = f(&shift(y, &k1, dt / 2.0));
    let k3 = f(&shift(y, &k2, dt / 2.0));
    let k4 = f(&shift(y, &k3, dt));
    std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

pub(crate) fn pack(state: &VesselState) -> [f64; 6] {
    [
        state.position.x,
        state.position.y,
        state.heading,
        state.nu[0],
        state.nu[1],
        state.nu[2],
    ]
}

pub(crate) fn unpack(y: &[f64]) -> VesselState {
    VesselState {
        position: Vec2::new(y[0], y[1]),
        heading: y[2],
        nu: Vector3::new(y[3], y[4], y[5]),
    }
}

/// Finish a step: wrap the heading and reject non-finite states.
pub(crate) fn finish(mut next: VesselState) -> Result<VesselState, VesselError> {
    if !next.is_finite() {
        return Err(VesselError::Blowup {
            x: next.position.x,
            y: next.position.y,
            psi: next.heading,
            nu: [next.nu[0], next.nu[1], next.nu[2]],
        });
    }
    next.heading = wrap_angle(next.heading);
    Ok(next)
}

/// One RK4 step with `tau` held over the interval.
pub fn step(
    state: &VesselState,
    tau: &Vector3<f64>,
    params: &VesselParams,
    dt: f64,
) -> Result<VesselState, VesselError> {
    if dt.is_nan() || dt <= 0.0 {
        return Err(VesselError::Params(format!("dt must be positive, got {dt}")));
    }
    let y = rk4(&pack(state), dt, |y| derivative(&unpack(y), tau, params));
    finish(unpack(&y))
}
