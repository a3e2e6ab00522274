//! Composite stream function: a sink at the target, one circle-theorem
//! obstacle term per obstacle, and a vortex per moving obstacle whose spin
//! encodes the COLREGs-aware passing side.
//!
//! Multiple obstacles are combined by addition and thresholding: if a point
//! lies within the influence range of any obstacle, only the in-range
//! obstacle terms are summed; otherwise every term is summed.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::{self, Write};

use thiserror::Error;

use crate::workspace::{GridIndex, GridSpec, Obstacle, Workspace};
use crate::Vec2;

/// Evaluations closer than this to a singular point are rejected.
pub const SINGULARITY_RADIUS: f64 = 1e-6;

/// Default sink strength. Positive values make the flow point at the target.
pub const DEFAULT_SINK_STRENGTH: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("stream function singular at ({x}, {y}): {what}")]
    Singularity { x: f64, y: f64, what: &'static str },
    #[error("invalid flow primitive: {0}")]
    InvalidPrimitive(String),
}

fn singular(p: Vec2, what: &'static str) -> FlowError {
    FlowError::Singularity { x: p.x, y: p.y, what }
}

/// Elementary potential flows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowPrimitive {
    /// Uniform flow along +x.
    Uniform { strength: f64 },
    /// Positive strength is a source, negative a sink.
    SourceSink { strength: f64, center: Vec2 },
    /// Positive strength rotates counterclockwise in the (x, y) plane.
    Vortex { strength: f64, center: Vec2 },
}

impl FlowPrimitive {
    pub fn validate(self) -> Result<Self, FlowError> {
        let strength = match self {
            Self::Uniform { strength } => strength,
            Self::SourceSink { strength, .. } | Self::Vortex { strength, .. } => {
                if strength == 0.0 {
                    return Err(FlowError::InvalidPrimitive("zero strength".into()));
                }
                strength
            }
        };
        if !strength.is_finite() {
            return Err(FlowError::InvalidPrimitive("non-finite strength".into()));
        }
        Ok(self)
    }

    /// Complex potential `(phi, psi)` at `p`.
    pub fn potential(&self, p: Vec2) -> Result<(f64, f64), FlowError> {
        match *self {
            Self::Uniform { strength } => Ok((strength * p.x, strength * p.y)),
            Self::SourceSink { strength, center } => {
                let d = p - center;
                if d.norm() < SINGULARITY_RADIUS {
                    return Err(singular(p, "source/sink center"));
                }
                Ok((0.5 * strength * d.norm_squared().ln(), strength * d.y.atan2(d.x)))
            }
            Self::Vortex { strength, center } => {
                let d = p - center;
                if d.norm() < SINGULARITY_RADIUS {
                    return Err(singular(p, "vortex center"));
                }
                Ok((strength * d.y.atan2(d.x), -0.5 * strength * d.norm_squared().ln()))
            }
        }
    }

    /// Flow velocity `grad(phi)`.
    pub fn velocity(&self, p: Vec2) -> Result<Vec2, FlowError> {
        match *self {
            Self::Uniform { strength } => Ok(Vec2::new(strength, 0.0)),
            Self::SourceSink { strength, center } => {
                let d = p - center;
                let r2 = d.norm_squared();
                if r2.sqrt() < SINGULARITY_RADIUS {
                    return Err(singular(p, "source/sink center"));
                }
                Ok(d * (strength / r2))
            }
            Self::Vortex { strength, center } => {
                let d = p - center;
                let r2 = d.norm_squared();
                if r2.sqrt() < SINGULARITY_RADIUS {
                    return Err(singular(p, "vortex center"));
                }
                Ok(Vec2::new(-d.y, d.x) * (strength / r2))
            }
        }
    }
}

/// Signed angle from `axis` to `v`, in `(-pi, pi]`.
fn angle_from(axis: Vec2, v: Vec2) -> f64 {
    (axis.x * v.y - axis.y * v.x).atan2(axis.dot(&v))
}

/// Circle-theorem term for one obstacle in a sink at `target`, with the
/// angle branch measured from `axis`.
fn sink_obstacle_psi_about(
    p: Vec2,
    target: Vec2,
    center: Vec2,
    radius: f64,
    strength: f64,
    axis: Vec2,
) -> Result<f64, FlowError> {
    let rel = p - target;
    if rel.norm() < SINGULARITY_RADIUS {
        return Err(singular(p, "sink at target"));
    }
    let d = p - center;
    let d2 = d.norm_squared();
    if d2.sqrt() < SINGULARITY_RADIUS {
        return Err(singular(p, "obstacle center"));
    }
    // Inverse point of p in the obstacle circle, relative to the target.
    let mirror = d * (radius * radius / d2) + (center - target);
    if mirror.norm() < SINGULARITY_RADIUS {
        return Err(singular(p, "image of the sink"));
    }
    Ok(-strength * angle_from(axis, rel) + strength * angle_from(axis, mirror))
}

/// Stream function of a sink at `target` with one circular obstacle,
/// evaluated in target-centered coordinates.
pub fn sink_obstacle_psi(
    p: Vec2,
    target: Vec2,
    obstacle: &Obstacle,
    strength: f64,
) -> Result<f64, FlowError> {
    sink_obstacle_psi_about(
        p,
        target,
        obstacle.position,
        obstacle.radius,
        strength,
        Vec2::x(),
    )
}

/// Uniform flow past a circular obstacle at the origin.
pub fn uniform_obstacle_psi(p: Vec2, radius: f64, strength: f64) -> Result<f64, FlowError> {
    let r2 = p.norm_squared();
    if r2.sqrt() < SINGULARITY_RADIUS {
        return Err(singular(p, "obstacle center"));
    }
    Ok(strength * p.y * (1.0 - radius * radius / r2))
}

/// Pure sink streamline value (no obstacles).
fn sink_psi_about(p: Vec2, target: Vec2, strength: f64, axis: Vec2) -> Result<f64, FlowError> {
    let rel = p - target;
    if rel.norm() < SINGULARITY_RADIUS {
        return Err(singular(p, "sink at target"));
    }
    Ok(-strength * angle_from(axis, rel))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexSpin {
    /// +1 counterclockwise (as drawn North-up), -1 clockwise.
    pub value: i8,
    /// Angle from the target direction to the obstacle heading, in `[-pi, pi)`.
    pub relative_angle: f64,
    /// The obstacle does not move; its vortex term vanishes.
    pub stationary: bool,
}

impl VortexSpin {
    pub const COUNTERCLOCKWISE: Self = Self {
        value: 1,
        relative_angle: 0.0,
        stationary: false,
    };

    pub fn sign(&self) -> f64 {
        f64::from(self.value)
    }
}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Spin rule: compliant obstacles always get +1; otherwise an obstacle
/// crossing from port (relative angle in (pi/4, 3pi/4)) gets -1.
pub fn spin_rule(colregs_compliant: bool, relative_angle: f64) -> i8 {
    if !colregs_compliant && relative_angle > FRAC_PI_4 && relative_angle < 3.0 * FRAC_PI_4 {
        -1
    } else {
        1
    }
}

pub fn vortex_spin(obstacle: &Obstacle, current_wp: Vec2, target: Vec2) -> VortexSpin {
    let speed = obstacle.speed();
    if speed == 0.0 {
        return VortexSpin {
            value: 1,
            relative_angle: 0.0,
            stationary: true,
        };
    }
    let to_target = target - current_wp;
    let relative_angle = if to_target.norm() == 0.0 {
        0.0
    } else {
        let dt = to_target / to_target.norm();
        let di = obstacle.velocity / speed;
        wrap_angle((dt.x * di.y - dt.y * di.x).atan2(dt.dot(&di)))
    };
    VortexSpin {
        value: spin_rule(obstacle.colregs_compliant, relative_angle),
        relative_angle,
        stationary: false,
    }
}

/// Vortex term centered on the obstacle: `C_v * S * |v| * ln(|p - p_i|^2)`.
pub fn vortex_psi(p: Vec2, obstacle: &Obstacle, spin: VortexSpin) -> Result<f64, FlowError> {
    let d = p - obstacle.position;
    let d2 = d.norm_squared();
    if d2.sqrt() < SINGULARITY_RADIUS {
        return Err(singular(p, "vortex center"));
    }
    Ok(obstacle.vortex_gain * spin.sign() * obstacle.speed() * d2.ln())
}

/// The stream function for one planning step: spins are fixed once from the
/// current waypoint and reused for every evaluation.
#[derive(Debug, Clone)]
pub struct StreamField<'a> {
    workspace: &'a Workspace,
    spins: Vec<VortexSpin>,
    sink_strength: f64,
    /// Reference direction of the angle branch: from the target towards the
    /// current waypoint, so the branch cut trails behind the target.
    axis: Vec2,
}

impl<'a> StreamField<'a> {
    pub fn new(workspace: &'a Workspace, current_wp: Vec2) -> Self {
        let spins = workspace
            .obstacles
            .iter()
            .map(|ob| vortex_spin(ob, current_wp, workspace.target))
            .collect();
        let from_target = current_wp - workspace.target;
        let axis = if from_target.norm() > 0.0 {
            from_target / from_target.norm()
        } else {
            Vec2::x()
        };
        Self {
            workspace,
            spins,
            sink_strength: DEFAULT_SINK_STRENGTH,
            axis,
        }
    }

    pub fn with_sink_strength(mut self, strength: f64) -> Self {
        self.sink_strength = strength;
        self
    }

    /// Replace every spin with +1 (all vessels treated as COLREGs compliant).
    pub fn with_uniform_spin(mut self) -> Self {
        for s in &mut self.spins {
            s.value = 1;
        }
        self
    }

    pub fn spins(&self) -> &[VortexSpin] {
        &self.spins
    }

    pub fn workspace(&self) -> &Workspace {
        self.workspace
    }

    /// `psi_i(p) + psi_{v_i}(p)` for obstacle `i`.
    pub fn obstacle_term(&self, i: usize, p: Vec2) -> Result<f64, FlowError> {
        let ob = &self.workspace.obstacles[i];
        let psi_i = sink_obstacle_psi_about(
            p,
            self.workspace.target,
            ob.position,
            ob.radius,
            self.sink_strength,
            self.axis,
        )?;
        let spin = self.spins[i];
        let psi_v = if spin.stationary {
            0.0
        } else {
            vortex_psi(p, ob, spin)?
        };
        Ok(psi_i + psi_v)
    }

    /// Whether `p` is within the influence range of at least one obstacle.
    pub fn in_any_range(&self, p: Vec2) -> bool {
        self.workspace
            .obstacles
            .iter()
            .any(|ob| (p - ob.position).norm() <= ob.influence_range)
    }

    pub fn psi(&self, p: Vec2) -> Result<f64, FlowError> {
        let obstacles = &self.workspace.obstacles;
        if obstacles.is_empty() {
            return sink_psi_about(p, self.workspace.target, self.sink_strength, self.axis);
        }
        let thresholded = self.in_any_range(p);
        let mut total = 0.0;
        for (i, ob) in obstacles.iter().enumerate() {
            if thresholded && (p - ob.position).norm() > ob.influence_range {
                continue;
            }
            total += self.obstacle_term(i, p)?;
        }
        Ok(total)
    }
}

/// Composite stream function at `p` for the given planning context.
pub fn composite_psi(p: Vec2, workspace: &Workspace, current_wp: Vec2) -> Result<f64, FlowError> {
    StreamField::new(workspace, current_wp).psi(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Value(f64),
    /// Strictly inside an obstacle disc; never evaluated.
    Masked,
    /// Too close to a singular point to evaluate.
    Singular,
}

impl FieldValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(*v),
            _ => None,
        }
    }
}

/// Stream function sampled on every grid point, row-major in `m`.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub grid: GridSpec,
    pub values: Vec<FieldValue>,
}

impl FieldGrid {
    pub fn get(&self, idx: GridIndex) -> FieldValue {
        self.values[(idx.m - 1) * self.grid.count_y() + (idx.n - 1)]
    }

    /// One row per grid point: `m n x y psi masked`, tab separated.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "m\tn\tx\ty\tpsi\tmasked")?;
        for ((idx, p), v) in self.grid.points().zip(&self.values) {
            let (psi, masked) = match v {
                FieldValue::Value(x) => (*x, 0),
                _ => (f64::NAN, 1),
            };
            writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", idx.m, idx.n, p.x, p.y, psi, masked)?;
        }
        Ok(())
    }
}

pub fn field_on_grid(workspace: &Workspace, current_wp: Vec2) -> FieldGrid {
    sample_field(&StreamField::new(workspace, current_wp))
}

pub fn sample_field(field: &StreamField<'_>) -> FieldGrid {
    let w = field.workspace();
    let values = w
        .grid
        .points()
        .map(|(_, p)| {
            if w.obstacles.iter().any(|ob| ob.contains(p)) {
                FieldValue::Masked
            } else {
                field
                    .psi(p)
                    .map(FieldValue::Value)
                    .unwrap_or(FieldValue::Singular)
            }
        })
        .collect();
    FieldGrid {
        grid: w.grid,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, TAU};

    fn obstacle(x: f64, y: f64, v: Vec2, gain: f64, compliant: bool) -> Obstacle {
        Obstacle {
            position: Vec2::new(x, y),
            velocity: v,
            radius: 1.5,
            influence_range: 1.5,
            vortex_gain: gain,
            colregs_compliant: compliant,
        }
    }

    fn circle(center: Vec2, r: f64, n: usize) -> impl Iterator<Item = Vec2> {
        (0..n).map(move |k| {
            let a = TAU * k as f64 / n as f64 + 0.1;
            center + r * Vec2::new(a.cos(), a.sin())
        })
    }

    fn spread(vals: &[f64]) -> f64 {
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        max - min
    }

    #[test]
    fn sink_obstacle_constant_on_boundary() {
        let ob = obstacle(10.0, 10.0, Vec2::zeros(), 0.0, false);
        let target = Vec2::new(0.0, 10.0);
        let vals: Vec<f64> = circle(ob.position, ob.radius, 16)
            .map(|p| sink_obstacle_psi(p, target, &ob, 1.0).unwrap())
            .collect();
        assert!(spread(&vals) < 1e-9, "spread {}", spread(&vals));
    }

    #[test]
    fn vanishing_obstacle_reduces_to_sink() {
        let mut ob = obstacle(10.0, 10.0, Vec2::zeros(), 0.0, false);
        ob.radius = 1e-12;
        let target = Vec2::new(0.0, 10.0);
        let dir = Vec2::new(0.6, 0.8);
        let vals: Vec<f64> = [1.0, 3.0, 7.5]
            .iter()
            .map(|t| sink_obstacle_psi(target + dir * *t, target, &ob, 1.0).unwrap())
            .collect();
        assert!(spread(&vals) < 1e-9);
    }

    #[test]
    fn sink_singularities() {
        let ob = obstacle(10.0, 10.0, Vec2::zeros(), 0.0, false);
        let target = Vec2::new(0.0, 10.0);
        assert!(matches!(
            sink_obstacle_psi(target, target, &ob, 1.0),
            Err(FlowError::Singularity { .. })
        ));
        assert!(sink_obstacle_psi(ob.position, target, &ob, 1.0).is_err());
    }

    #[test]
    fn uniform_obstacle_values() {
        let r = 1.3;
        assert_eq!(uniform_obstacle_psi(Vec2::new(4.0, 0.0), r, 1.0).unwrap(), 0.0);
        for p in circle(Vec2::zeros(), r, 12) {
            assert!(uniform_obstacle_psi(p, r, 2.0).unwrap().abs() < 1e-12);
        }
        let v = uniform_obstacle_psi(Vec2::new(0.0, 2.0 * r), r, 1.0).unwrap();
        assert!((v - 1.5 * r).abs() < 1e-12);
        assert!(uniform_obstacle_psi(Vec2::zeros(), r, 1.0).is_err());
    }

    #[test]
    fn spin_table() {
        let wp = Vec2::new(18.8, 9.8);
        let target = Vec2::new(0.8, 9.8);
        // head-on: obstacle heading north against a southbound own ship
        let head_on = obstacle(5.8, 9.8, Vec2::new(0.04, 0.0), 1.25, false);
        let s = vortex_spin(&head_on, wp, target);
        assert_eq!(s.value, 1);
        assert!((s.relative_angle + PI).abs() < 1e-12);
        // westbound crosser
        let west = obstacle(14.8, 11.8, Vec2::new(0.0, -0.04), 1.25, false);
        let s = vortex_spin(&west, wp, target);
        assert_eq!(s.value, -1);
        assert!((s.relative_angle - FRAC_PI_2).abs() < 1e-12);
        // eastbound crosser
        let east = obstacle(11.8, 5.8, Vec2::new(0.0, 0.04), 2.0, false);
        assert_eq!(vortex_spin(&east, wp, target).value, 1);
        // compliant, any geometry
        let mut compliant = west.clone();
        compliant.colregs_compliant = true;
        assert_eq!(vortex_spin(&compliant, wp, target).value, 1);
        // stationary
        let still = obstacle(10.0, 10.0, Vec2::zeros(), 1.0, false);
        let s = vortex_spin(&still, wp, target);
        assert!(s.stationary);
        assert_eq!(s.value, 1);
    }

    #[test]
    fn spin_rule_boundaries_are_open() {
        assert_eq!(spin_rule(false, FRAC_PI_4), 1);
        assert_eq!(spin_rule(false, 3.0 * FRAC_PI_4), 1);
        assert_eq!(spin_rule(false, FRAC_PI_4 + 1e-9), -1);
        for k in 0..64 {
            let a = -PI + TAU * k as f64 / 64.0;
            assert_eq!(spin_rule(true, a), 1);
        }
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-PI) + PI).abs() < 1e-15);
        assert!((wrap_angle(0.3 + 4.0 * PI) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn vortex_values() {
        let mut ob = obstacle(3.0, 4.0, Vec2::new(0.05, 0.0), 1.0, false);
        let spin = VortexSpin::COUNTERCLOCKWISE;
        for p in circle(ob.position, 1.0, 8) {
            assert!(vortex_psi(p, &ob, spin).unwrap().abs() < 1e-15);
        }
        let v = vortex_psi(ob.position + Vec2::new(0.0, 2.0), &ob, spin).unwrap();
        assert!((v - 0.05 * 4f64.ln()).abs() < 1e-15);
        assert!((v - 0.0693).abs() < 1e-4);
        let vals: Vec<f64> = circle(ob.position, 1.7, 32)
            .map(|p| vortex_psi(p, &ob, spin).unwrap())
            .collect();
        assert!(spread(&vals) <= 1e-12 * vals[0].abs());
        ob.vortex_gain *= 3.0;
        let scaled = vortex_psi(ob.position + Vec2::new(0.0, 2.0), &ob, spin).unwrap();
        assert!((scaled - 3.0 * v).abs() < 1e-15);
        assert!(vortex_psi(ob.position, &ob, spin).is_err());
    }

    fn workspace(obstacles: Vec<Obstacle>) -> Workspace {
        Workspace {
            grid: GridSpec::new(20.0, 20.0, 100, 100).unwrap(),
            target: Vec2::new(0.8, 9.8),
            obstacles,
        }
    }

    #[test]
    fn empty_roster_is_pure_sink() {
        let w = workspace(vec![]);
        let wp = Vec2::new(18.8, 9.8);
        let dir = Vec2::new(0.8, 0.6);
        let vals: Vec<f64> = [0.5, 2.0, 9.0]
            .iter()
            .map(|t| composite_psi(w.target + dir * *t, &w, wp).unwrap())
            .collect();
        assert!(spread(&vals) < 1e-12);
    }

    #[test]
    fn threshold_inclusive_at_influence_range() {
        let ob = obstacle(10.0, 10.0, Vec2::new(0.04, 0.0), 1.25, false);
        let w = workspace(vec![ob.clone(), obstacle(4.0, 4.0, Vec2::new(0.0, 0.04), 2.0, false)]);
        let wp = Vec2::new(18.8, 9.8);
        let field = StreamField::new(&w, wp);
        let p = Vec2::new(11.5, 10.0);
        assert!(field.in_any_range(p));
        assert_eq!(field.psi(p).unwrap(), field.obstacle_term(0, p).unwrap());
    }

    #[test]
    fn two_obstacles_hand_composed() {
        let a = obstacle(10.0, 10.0, Vec2::new(0.0, -0.04), 1.25, false);
        let b = obstacle(4.0, 14.0, Vec2::new(0.04, 0.04), 2.0, false);
        let w = workspace(vec![a.clone(), b.clone()]);
        let wp = Vec2::new(18.8, 9.8);
        let t = w.target;
        // independent evaluation of the printed formulas
        let term = |ob: &Obstacle, spin: f64, p: Vec2| {
            let (x, y) = (p.x - t.x, p.y - t.y);
            let (xi, yi) = (ob.position.x - t.x, ob.position.y - t.y);
            let d2 = (x - xi).powi(2) + (y - yi).powi(2);
            let r2 = ob.radius * ob.radius;
            let axis = (wp - t).normalize();
            let ang = |u: f64, v: f64| (axis.x * v - axis.y * u).atan2(axis.x * u + axis.y * v);
            let mx = r2 * (x - xi) / d2 + xi;
            let my = r2 * (y - yi) / d2 + yi;
            -ang(x, y) + ang(mx, my) + ob.vortex_gain * spin * ob.velocity.norm() * d2.ln()
        };
        // inside obstacle a's range only
        let p = Vec2::new(11.0, 10.6);
        let got = composite_psi(p, &w, wp).unwrap();
        // a moves west against a southbound heading: spin -1
        let want = term(&a, -1.0, p);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        // outside both: full sum
        let q = Vec2::new(15.0, 3.0);
        let got = composite_psi(q, &w, wp).unwrap();
        let want = term(&a, -1.0, q) + term(&b, 1.0, q);
        assert!((got - want).abs() < 1e-12);
    }

    fn laplacian(f: impl Fn(Vec2) -> f64, p: Vec2, h: f64) -> f64 {
        let c = f(p);
        (f(p + Vec2::new(h, 0.0)) + f(p - Vec2::new(h, 0.0)) + f(p + Vec2::new(0.0, h))
            + f(p - Vec2::new(0.0, h))
            - 4.0 * c)
            / (h * h)
    }

    #[test]
    fn single_obstacle_field_is_harmonic() {
        let ob = obstacle(10.0, 10.0, Vec2::zeros(), 0.0, false);
        let target = Vec2::new(0.0, 10.0);
        let f = |p: Vec2| sink_obstacle_psi(p, target, &ob, 1.0).unwrap();
        for p in [Vec2::new(15.0, 3.0), Vec2::new(6.0, 15.0), Vec2::new(14.0, 14.0)] {
            let lap = laplacian(f, p, 1e-3);
            assert!(lap.abs() < 1e-3 * (1.0 + f(p).abs()), "lap {lap} at {p:?}");
        }
    }

    #[test]
    fn primitives_satisfy_cauchy_riemann() {
        let prims = [
            FlowPrimitive::Uniform { strength: 0.7 },
            FlowPrimitive::SourceSink {
                strength: -1.2,
                center: Vec2::new(1.0, 2.0),
            },
            FlowPrimitive::Vortex {
                strength: 0.4,
                center: Vec2::new(-1.0, 0.5),
            },
        ];
        let h = 1e-5;
        for prim in prims {
            let prim = prim.validate().unwrap();
            let p = Vec2::new(3.0, -2.0);
            let phi = |q: Vec2| prim.potential(q).unwrap().0;
            let psi = |q: Vec2| prim.potential(q).unwrap().1;
            let dx = Vec2::new(h, 0.0);
            let dy = Vec2::new(0.0, h);
            let phi_x = (phi(p + dx) - phi(p - dx)) / (2.0 * h);
            let phi_y = (phi(p + dy) - phi(p - dy)) / (2.0 * h);
            let psi_x = (psi(p + dx) - psi(p - dx)) / (2.0 * h);
            let psi_y = (psi(p + dy) - psi(p - dy)) / (2.0 * h);
            assert!((phi_x - psi_y).abs() < 1e-7);
            assert!((phi_y + psi_x).abs() < 1e-7);
            let v = prim.velocity(p).unwrap();
            assert!((v.x - phi_x).abs() < 1e-7 && (v.y - phi_y).abs() < 1e-7);
            assert!(laplacian(psi, p, 1e-3).abs() < 1e-5);
        }
        assert!(FlowPrimitive::Vortex {
            strength: 0.0,
            center: Vec2::zeros()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn field_masks_obstacle_interiors() {
        let ob = obstacle(10.0, 10.0, Vec2::new(0.04, 0.0), 1.25, false);
        let w = workspace(vec![ob.clone()]);
        let field = field_on_grid(&w, Vec2::new(18.8, 9.8));
        assert_eq!(field.values.len(), 10_000);
        for ((idx, p), v) in w.grid.points().zip(&field.values) {
            if ob.contains(p) {
                assert_eq!(*v, FieldValue::Masked, "{idx}");
            } else if (p - w.target).norm() < 1e-9 {
                assert_eq!(*v, FieldValue::Singular);
            } else {
                assert_eq!(v.value(), Some(composite_psi(p, &w, Vec2::new(18.8, 9.8)).unwrap()));
            }
        }
        let mut buf = Vec::new();
        field.write_tsv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 10_001);
    }
}
