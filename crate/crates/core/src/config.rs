//! Scenario files (TOML) and the six bundled scenarios.

use std::path::Path;

use log::info;
use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::ControlGains;
use crate::simulator::{ObstacleMode, SimConfig};
use crate::vessel::{VesselParams, VesselState};
use crate::workspace::{GridSpec, Obstacle, Workspace};
use crate::Vec2;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("unknown scenario '{0}' (not a bundled name or an existing file)")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L_x")]
    pub l_x: f64,
    #[serde(rename = "L_y")]
    pub l_y: f64,
    #[serde(rename = "N_x")]
    pub n_x: usize,
    #[serde(rename = "N_y")]
    pub n_y: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselSection {
    pub x0: f64,
    pub y0: f64,
    pub psi0: f64,
    /// Diagonal of the inertia matrix.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<[f64; 3]>,
    /// Diagonal of the damping matrix.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSection {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub r: f64,
    pub l: f64,
    #[serde(rename = "Cv")]
    pub cv: f64,
    pub compliant: bool,
    /// Destination of a stream-guided target ship.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    pub gamma: f64,
    pub n_r: usize,
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sink_strength: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    pub zeta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(rename = "Kp")]
    pub kp: [f64; 2],
    pub kpsi: f64,
    #[serde(rename = "Knu")]
    pub knu: [f64; 3],
    pub ud: f64,
    pub eps_reg: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub t_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle_mode: Option<ObstacleMode>,
}

/// A scenario file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub grid: GridSection,
    pub target: TargetSection,
    pub vessel: VesselSection,
    pub planner: PlannerSection,
    pub path: PathSection,
    pub controller: ControllerSection,
    pub sim: SimSection,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSection>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
            ConfigError::Parse {
                origin: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerSettings {
    pub gamma: f64,
    pub ring_radius: usize,
    pub sink_strength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSettings {
    pub zeta: f64,
    pub epsilon: f64,
}

/// One position moved onto the grid at load time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapRecord {
    pub what: String,
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub distance: f64,
}

/// A validated, ready-to-run scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub workspace: Workspace,
    pub vessel0: VesselState,
    pub params: VesselParams,
    pub gains: ControlGains,
    pub planner: PlannerSettings,
    pub path: PathSettings,
    pub sim: SimConfig,
    /// Destinations of stream-guided target ships, per obstacle.
    pub goals: Vec<Option<Vec2>>,
    pub snaps: Vec<SnapRecord>,
}

fn positive(what: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid(format!("{what} must be positive, got {v}")))
    }
}

impl Scenario {
    pub fn from_file(file: &ScenarioFile) -> Result<Self, ConfigError> {
        let inv = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        let g = &file.grid;
        let grid = GridSpec::new(g.l_x, g.l_y, g.n_x, g.n_y).map_err(|e| inv(&e))?;
        let mut snaps = Vec::new();
        let mut snap = |what: String, x: f64, y: f64| -> Result<Vec2, ConfigError> {
            let p = Vec2::new(x, y);
            let (_, q) = grid
                .snap_to_grid(p)
                .map_err(|e| ConfigError::Invalid(format!("{what}: {e}")))?;
            let distance = (q - p).norm();
            if distance > 0.0 {
                info!("snapped {what} from ({x}, {y}) to ({}, {}), {distance:.3} m", q.x, q.y);
                snaps.push(SnapRecord {
                    what,
                    from: [x, y],
                    to: [q.x, q.y],
                    distance,
                });
            }
            Ok(q)
        };

        let target = snap("target".into(), file.target.x, file.target.y)?;
        let start = snap("vessel".into(), file.vessel.x0, file.vessel.y0)?;
        let mode = file.sim.obstacle_mode.unwrap_or_default();
        let mut obstacles = Vec::with_capacity(file.obstacles.len());
        let mut goals = Vec::with_capacity(file.obstacles.len());
        for (i, o) in file.obstacles.iter().enumerate() {
            let position = snap(format!("obstacle {}", i + 1), o.x, o.y)?;
            let goal = match (o.tx, o.ty) {
                (Some(tx), Some(ty)) => Some(snap(format!("obstacle {} goal", i + 1), tx, ty)?),
                (None, None) => None,
                _ => {
                    return Err(ConfigError::Invalid(format!(
                        "obstacle {}: tx and ty must be given together",
                        i + 1
                    )))
                }
            };
            if goal.is_some() && mode == ObstacleMode::ConstantVelocity {
                log::warn!(
                    "obstacle {} has a goal but obstacle_mode is constant-velocity; goal ignored",
                    i + 1
                );
            }
            goals.push(goal);
            obstacles.push(Obstacle {
                position,
                velocity: Vec2::new(o.vx, o.vy),
                radius: o.r,
                influence_range: o.l,
                vortex_gain: o.cv,
                colregs_compliant: o.compliant,
            });
        }
        let workspace = Workspace {
            grid,
            target,
            obstacles,
        }
        .validate()
        .map_err(|e| inv(&e))?;

        let v = &file.vessel;
        let params = VesselParams::new(
            Matrix3::from_diagonal(&Vector3::from(v.mass.unwrap_or([30.0, 40.0, 6.0]))),
            Matrix3::from_diagonal(&Vector3::from(v.damping.unwrap_or([50.0, 50.0, 10.0]))),
        )
        .map_err(|e| inv(&e))?;
        let c = &file.controller;
        let gains = ControlGains::new(
            Matrix2::from_diagonal(&Vec2::from(c.kp)),
            c.kpsi,
            Matrix3::from_diagonal(&Vector3::from(c.knu)),
            c.mu,
            c.eps_reg,
            c.ud,
        )
        .map_err(|e| inv(&e))?;

        let p = &file.planner;
        if p.n_r < 1 {
            return Err(ConfigError::Invalid("planner.n_r must be at least 1".into()));
        }
        if !(p.gamma >= 0.0 && p.gamma.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "planner.gamma must be non-negative, got {}",
                p.gamma
            )));
        }
        let planner = PlannerSettings {
            gamma: p.gamma,
            ring_radius: p.n_r,
            sink_strength: positive("planner.sink_strength", p.sink_strength.unwrap_or(1.0))?,
        };
        let path = PathSettings {
            zeta: positive("path.zeta", file.path.zeta)?,
            epsilon: positive("path.epsilon", file.path.epsilon)?,
        };
        let sim = SimConfig {
            dt: positive("sim.dt", file.sim.dt)?,
            t_max: positive("sim.t_max", file.sim.t_max)?,
            delta: positive("planner.delta", p.delta)?,
            obstacle_mode: mode,
        };
        if !v.psi0.is_finite() {
            return Err(ConfigError::Invalid("vessel.psi0 must be finite".into()));
        }
        Ok(Scenario {
            name: file.name.clone(),
            description: file.description.clone(),
            workspace,
            vessel0: VesselState::at_rest(start, v.psi0),
            params,
            gains,
            planner,
            path,
            sim,
            goals,
            snaps,
        })
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        Self::from_file(&ScenarioFile::parse(text, origin)?)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// A bundled scenario name, or otherwise a file path.
    pub fn resolve(name_or_path: &str) -> Result<Self, ConfigError> {
        if let Some(text) = bundled_source(name_or_path) {
            return Self::parse(text, name_or_path);
        }
        let path = Path::new(name_or_path);
        if path.exists() {
            return Self::from_path(path);
        }
        Err(ConfigError::Unknown(name_or_path.to_string()))
    }
}

pub const BUNDLED: [(&str, &str); 6] = [
    (
        "colregs_headon_overtaking",
        include_str!("../scenarios/colregs_headon_overtaking.toml"),
    ),
    ("colregs_crossing", include_str!("../scenarios/colregs_crossing.toml")),
    ("anticollision_headon", include_str!("../scenarios/anticollision_headon.toml")),
    ("anticollision_crossing", include_str!("../scenarios/anticollision_crossing.toml")),
    ("complex_1", include_str!("../scenarios/complex_1.toml")),
    ("complex_2", include_str!("../scenarios/complex_2.toml")),
];

/// Alternative spellings accepted wherever a bundled name is.
pub const ALIASES: [(&str, &str); 2] = [
    ("headon_anticollision", "anticollision_headon"),
    ("crossing_colregs", "colregs_crossing"),
];

pub fn bundled_source(name: &str) -> Option<&'static str> {
    let name = ALIASES.iter().find(|(a, _)| *a == name).map_or(name, |(_, n)| *n);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn bundled(name: &str) -> Option<Scenario> {
    bundled_source(name).map(|s| Scenario::parse(s, name).expect("bundled scenario is valid"))
}
