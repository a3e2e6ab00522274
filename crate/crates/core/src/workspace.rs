//! Discretized planar world: the grid, the target and the obstacle roster.
//!
//! Coordinates follow the North-East convention: `x` points North and `y`
//! points East. Grid point `(m, n)` (1-based) sits at
//! `((m - 1) * d_x, (n - 1) * d_y)`.

use std::fmt;

use thiserror::Error;

use crate::Vec2;

/// Distance below which a coordinate counts as lying on a grid point.
pub const ON_GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorkspaceError {
    #[error("grid index ({m}, {n}) outside 1..={count_x} x 1..={count_y}")]
    Index {
        m: usize,
        n: usize,
        count_x: usize,
        count_y: usize,
    },
    #[error("point ({x}, {y}) lies outside the workspace")]
    OutOfBounds { x: f64, y: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("configuration error: {0}")]
    Config(String),
}

/// 1-based grid index `(m, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridIndex {
    pub m: usize,
    pub n: usize,
}

impl fmt::Display for GridIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.m, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    length_x: f64,
    length_y: f64,
    count_x: usize,
    count_y: usize,
}

impl GridSpec {
    pub fn new(
        length_x: f64,
        length_y: f64,
        count_x: usize,
        count_y: usize,
    ) -> Result<Self, WorkspaceError> {
        if !(length_x.is_finite() && length_x > 0.0 && length_y.is_finite() && length_y > 0.0) {
            return Err(WorkspaceError::Grid(format!(
                "lengths must be positive, got {length_x} x {length_y}"
            )));
        }
        if count_x == 0 || count_y == 0 {
            return Err(WorkspaceError::Grid(format!(
                "point counts must be positive, got {count_x} x {count_y}"
            )));
        }
        Ok(Self {
            length_x,
            length_y,
            count_x,
            count_y,
        })
    }

    pub fn length_x(&self) -> f64 {
        self.length_x
    }

    pub fn length_y(&self) -> f64 {
        self.length_y
    }

    pub fn count_x(&self) -> usize {
        self.count_x
    }

    pub fn count_y(&self) -> usize {
        self.count_y
    }

    pub fn spacing_x(&self) -> f64 {
        self.length_x / self.count_x as f64
    }

    pub fn spacing_y(&self) -> f64 {
        self.length_y / self.count_y as f64
    }

    pub fn total_points(&self) -> usize {
        self.count_x * self.count_y
    }

    pub fn contains_index(&self, idx: GridIndex) -> bool {
        (1..=self.count_x).contains(&idx.m) && (1..=self.count_y).contains(&idx.n)
    }

    /// Coordinate of the `(m, n)`-th grid point.
    pub fn grid_point(&self, m: usize, n: usize) -> Result<Vec2, WorkspaceError> {
        let idx = GridIndex { m, n };
        if !self.contains_index(idx) {
            return Err(WorkspaceError::Index {
                m,
                n,
                count_x: self.count_x,
                count_y: self.count_y,
            });
        }
        Ok(self.point_unchecked(idx))
    }

    pub(crate) fn point_unchecked(&self, idx: GridIndex) -> Vec2 {
        Vec2::new(
            (idx.m - 1) as f64 * self.spacing_x(),
            (idx.n - 1) as f64 * self.spacing_y(),
        )
    }

    pub fn in_bounds(&self, p: Vec2) -> bool {
        p.x >= -ON_GRID_TOLERANCE
            && p.y >= -ON_GRID_TOLERANCE
            && p.x <= self.length_x + ON_GRID_TOLERANCE
            && p.y <= self.length_y + ON_GRID_TOLERANCE
    }

    /// Nearest grid index along one axis; exact half-cell ties go to the
    /// smaller index.
    fn nearest_axis(coord: f64, spacing: f64, count: usize) -> usize {
        let scaled = coord / spacing;
        let lower = scaled.floor();
        let frac = scaled - lower;
        // Round-off can push an exact tie (e.g. 15.9 / 0.2) to either side of 0.5.
        let pick = if frac <= 0.5 + 1e-9 { lower } else { lower + 1.0 };
        let zero_based = pick.max(0.0) as usize;
        zero_based.min(count - 1) + 1
    }

    /// Nearest grid point (and its index) to `p`.
    pub fn snap_to_grid(&self, p: Vec2) -> Result<(GridIndex, Vec2), WorkspaceError> {
        if !p.iter().all(|c| c.is_finite()) || !self.in_bounds(p) {
            return Err(WorkspaceError::OutOfBounds { x: p.x, y: p.y });
        }
        let idx = GridIndex {
            m: Self::nearest_axis(p.x, self.spacing_x(), self.count_x),
            n: Self::nearest_axis(p.y, self.spacing_y(), self.count_y),
        };
        Ok((idx, self.point_unchecked(idx)))
    }

    /// Index of `p` if it lies on a grid point.
    pub fn index_of(&self, p: Vec2) -> Option<GridIndex> {
        let (idx, q) = self.snap_to_grid(p).ok()?;
        ((p - q).norm() <= ON_GRID_TOLERANCE).then_some(idx)
    }

    pub fn is_on_grid(&self, p: Vec2) -> bool {
        self.index_of(p).is_some()
    }

    /// Iterate every grid point in `(m, n)` order, `n` varying fastest.
    pub fn points(&self) -> impl Iterator<Item = (GridIndex, Vec2)> + '_ {
        (1..=self.count_x).flat_map(move |m| {
            (1..=self.count_y).map(move |n| {
                let idx = GridIndex { m, n };
                (idx, self.point_unchecked(idx))
            })
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub influence_range: f64,
    pub vortex_gain: f64,
    pub colregs_compliant: bool,
}

impl Obstacle {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Strictly inside the circular domain.
    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.position).norm() < self.radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub grid: GridSpec,
    pub target: Vec2,
    pub obstacles: Vec<Obstacle>,
}

impl Workspace {
    /// Check every invariant of the world model.
    ///
    /// Two obstacles conflict when either center lies inside the other's
    /// circular domain; rosters whose discs merely intersect are accepted.
    pub fn validate(self) -> Result<Self, WorkspaceError> {
        if !self.grid.is_on_grid(self.target) {
            return Err(WorkspaceError::Config(format!(
                "target ({}, {}) is not on a grid point",
                self.target.x, self.target.y
            )));
        }
        for (i, ob) in self.obstacles.iter().enumerate() {
            let id = i + 1;
            if !(ob.radius.is_finite() && ob.radius > 0.0) {
                return Err(WorkspaceError::Config(format!(
                    "obstacle {id}: radius must be positive, got {}",
                    ob.radius
                )));
            }
            if !(ob.influence_range.is_finite() && ob.influence_range >= ob.radius) {
                return Err(WorkspaceError::Config(format!(
                    "obstacle {id}: influence range {} is smaller than radius {}",
                    ob.influence_range, ob.radius
                )));
            }
            if !ob.vortex_gain.is_finite() || !ob.velocity.iter().all(|v| v.is_finite()) {
                return Err(WorkspaceError::Config(format!(
                    "obstacle {id}: non-finite velocity or vortex gain"
                )));
            }
            if !self.grid.is_on_grid(ob.position) {
                return Err(WorkspaceError::Config(format!(
                    "obstacle {id} at ({}, {}) is not on a grid point",
                    ob.position.x, ob.position.y
                )));
            }
        }
        for (i, a) in self.obstacles.iter().enumerate() {
            for (j, b) in self.obstacles.iter().enumerate().skip(i + 1) {
                let d = (a.position - b.position).norm();
                if d < a.radius.max(b.radius) {
                    return Err(WorkspaceError::Config(format!(
                        "obstacles {} and {} overlap (center distance {d:.3} m)",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(self)
    }
}
