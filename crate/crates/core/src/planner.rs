//! Stepwise waypoint selection on the stream function.
//!
//! Candidates are the grid points on the boundary of the square box of
//! half-width `n_r` cells around the current waypoint. The winner minimizes
//! `|psi(p) - psi(WP_k)| + gamma * |p - p_t|`; if the target is inside the
//! box it is returned directly.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::flowfield::{FlowError, StreamField};
use crate::workspace::{GridIndex, GridSpec, Workspace};
use crate::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid waypoint query: {0}")]
    InvalidQuery(String),
    #[error("current waypoint ({x}, {y}) is not on the grid")]
    OffGrid { x: f64, y: f64 },
    #[error("no admissible candidate around ({x}, {y}): planning is stuck")]
    Stuck { x: f64, y: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaypointQuery {
    pub current_wp: Vec2,
    pub ring_radius: usize,
    pub gamma: f64,
    pub target: Vec2,
}

impl WaypointQuery {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.ring_radius < 1 {
            return Err(PlanError::InvalidQuery("ring radius must be at least 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(PlanError::InvalidQuery(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub stream_deviation: f64,
    pub target_distance: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaypointChoice {
    pub position: [f64; 2],
    pub index: (usize, usize),
    /// `None` when the target was inside the search box.
    pub cost: Option<CostBreakdown>,
    pub spins: Vec<i8>,
}

impl WaypointChoice {
    pub fn point(&self) -> Vec2 {
        Vec2::new(self.position[0], self.position[1])
    }
}

/// Chebyshev distance in cells between two grid indices.
fn cell_distance(a: GridIndex, b: GridIndex) -> usize {
    a.m.abs_diff(b.m).max(a.n.abs_diff(b.n))
}

/// Grid points on the boundary of the search box, clipped to the workspace
/// and with points strictly inside obstacle discs removed. Ordered by index.
pub fn candidate_ring(
    query: &WaypointQuery,
    grid: &GridSpec,
    workspace: &Workspace,
) -> Result<Vec<(GridIndex, Vec2)>, PlanError> {
    query.validate()?;
    let center = grid.index_of(query.current_wp).ok_or(PlanError::OffGrid {
        x: query.current_wp.x,
        y: query.current_wp.y,
    })?;
    let nr = query.ring_radius;
    let m_lo = center.m.saturating_sub(nr).max(1);
    let n_lo = center.n.saturating_sub(nr).max(1);
    let m_hi = (center.m + nr).min(grid.count_x());
    let n_hi = (center.n + nr).min(grid.count_y());
    let mut ring = Vec::with_capacity(8 * nr);
    for m in m_lo..=m_hi {
        for n in n_lo..=n_hi {
            let idx = GridIndex { m, n };
            if cell_distance(idx, center) != nr {
                continue;
            }
            let p = grid.point_unchecked(idx);
            if workspace.obstacles.iter().any(|ob| ob.contains(p)) {
                continue;
            }
            ring.push((idx, p));
        }
    }
    if ring.is_empty() {
        return Err(PlanError::Stuck {
            x: query.current_wp.x,
            y: query.current_wp.y,
        });
    }
    Ok(ring)
}

/// Whether the target lies in the closed search box around the waypoint.
pub fn target_in_box(query: &WaypointQuery, grid: &GridSpec) -> bool {
    let d = query.target - query.current_wp;
    let cells = (d.x.abs() / grid.spacing_x()).max(d.y.abs() / grid.spacing_y());
    cells <= query.ring_radius as f64 + 1e-9
}

/// Deterministic ordering of scored candidates: cost, then distance to the
/// target, then grid index.
pub fn candidate_order(a: (f64, f64, GridIndex), b: (f64, f64, GridIndex)) -> Ordering {
    a.0.total_cmp(&b.0)
        .then(a.1.total_cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

/// Pick the next waypoint using a prepared stream field.
pub fn select_with_field(
    query: &WaypointQuery,
    field: &StreamField<'_>,
) -> Result<WaypointChoice, PlanError> {
    query.validate()?;
    let w = field.workspace();
    let grid = &w.grid;
    let spins = field.spins().iter().map(|s| s.value).collect();
    if target_in_box(query, grid) {
        let index = grid
            .index_of(query.target)
            .map(|i| (i.m, i.n))
            .unwrap_or((0, 0));
        return Ok(WaypointChoice {
            position: [query.target.x, query.target.y],
            index,
            cost: None,
            spins,
        });
    }
    let ring = candidate_ring(query, grid, w)?;
    let reference = field.psi(query.current_wp)?;
    let mut best: Option<(f64, f64, GridIndex, Vec2, CostBreakdown)> = None;
    for (idx, p) in ring {
        let stream_deviation = (field.psi(p)? - reference).abs();
        let target_distance = (p - query.target).norm();
        let total = stream_deviation + query.gamma * target_distance;
        let better = match &best {
            None => true,
            Some((c, d, i, _, _)) => {
                candidate_order((total, target_distance, idx), (*c, *d, *i)) == Ordering::Less
            }
        };
        if better {
            best = Some((
                total,
                target_distance,
                idx,
                p,
                CostBreakdown {
                    stream_deviation,
                    target_distance,
                    total,
                },
            ));
        }
    }
    let (_, _, idx, p, cost) = best.expect("ring is non-empty");
    Ok(WaypointChoice {
        position: [p.x, p.y],
        index: (idx.m, idx.n),
        cost: Some(cost),
        spins,
    })
}

pub fn select_next_waypoint(
    query: &WaypointQuery,
    workspace: &Workspace,
) -> Result<WaypointChoice, PlanError> {
    let field = StreamField::new(workspace, query.current_wp);
    select_with_field(query, &field)
}
