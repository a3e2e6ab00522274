//! Closed loop: waypoint planning, segment construction, control, plant and
//! obstacle motion, stepped until the vessel reaches the target.

use std::f64::consts::FRAC_PI_4;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::control::{
    control_law, locate, signal_on_segment, update_law, ControlGains, PathSignal,
};
use crate::flowfield::{wrap_angle, StreamField};
use crate::pathgen::{first_segment, junction_mismatch, solve_corridor_qp, BezierSegment};
use crate::planner::{select_with_field, CostBreakdown, WaypointQuery};
use crate::vessel::{derivative, finish, pack, rk4, rotation, unpack, VesselState};
use crate::workspace::{Obstacle, Workspace};
use crate::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObstacleMode {
    #[default]
    ConstantVelocity,
    /// Obstacles with a goal plan their own waypoints on the stream function
    /// (all spins +1) and sail straight between them.
    StreamGuided,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_max: f64,
    /// Arrival radius around the target.
    pub delta: f64,
    pub obstacle_mode: ObstacleMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 0.01,
            t_max: 600.0,
            delta: 0.01,
            obstacle_mode: ObstacleMode::ConstantVelocity,
        }
    }
}

/// Clearance below this fraction of the obstacle radius aborts the run.
pub const COLLISION_FRACTION: f64 = 0.5;
/// Position error (m) beyond which the run is abandoned.
pub const TRACKING_LIMIT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickRow {
    pub t: f64,
    pub s: f64,
    pub k: usize,
    pub theta: f64,
    pub position: [f64; 2],
    pub psi: f64,
    pub nu: [f64; 3],
    pub p_d: [f64; 2],
    pub psi_d: f64,
    pub z_p: [f64; 2],
    pub z_psi: f64,
    pub z_nu: [f64; 3],
    pub omega: f64,
    pub tau: [f64; 3],
    pub obstacles: Vec<[f64; 2]>,
    #[serde(skip)]
    pub obstacle_velocities: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanningRecord {
    pub step: usize,
    pub t: f64,
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub index: (usize, usize),
    pub cost: Option<CostBreakdown>,
    pub spins: Vec<i8>,
    /// World model the waypoint was chosen in.
    #[serde(skip)]
    pub snapshot: Workspace,
    #[serde(skip)]
    pub uniform_spin: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SegmentRecord {
    pub index: usize,
    pub alpha: f64,
    pub control_points: [[f64; 2]; 8],
    pub chi: Option<[f64; 3]>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum Outcome {
    Reached,
    Timeout,
    Fault(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub outcome: Outcome,
    pub arrival_time: Option<f64>,
    pub final_time: f64,
    pub final_distance: f64,
    pub path_length: f64,
    pub max_z_p: f64,
    /// Closest distance to each obstacle center.
    pub min_clearance: Vec<f64>,
    pub waypoints: usize,
    pub segments: usize,
    pub max_junction_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub scenario: String,
    pub rows: Vec<TickRow>,
    pub planning: Vec<PlanningRecord>,
    pub segments: Vec<BezierSegment>,
    pub segment_records: Vec<SegmentRecord>,
    pub waypoints: Vec<Vec2>,
    pub obstacle_radii: Vec<f64>,
    pub target: Vec2,
    pub sink_strength: f64,
    pub summary: Summary,
}

impl RunTrace {
    pub fn outcome(&self) -> &Outcome {
        &self.summary.outcome
    }
}

/// A target ship that plans on the stream function and sails straight
/// between its waypoints.
#[derive(Debug, Clone)]
struct GuidedShip {
    speed: f64,
    goal: Vec2,
    waypoint: Vec2,
    next: Option<Vec2>,
    arrived: bool,
}

/// Obstacle positions and velocities over time.
#[derive(Debug, Clone)]
struct ObstacleTracker {
    initial: Vec<Obstacle>,
    current: Vec<Obstacle>,
    ships: Vec<Option<GuidedShip>>,
}

impl ObstacleTracker {
    fn new(workspace: &Workspace, goals: &[Option<Vec2>], mode: ObstacleMode) -> Self {
        let ships = workspace
            .obstacles
            .iter()
            .zip(goals)
            .map(|(ob, goal)| match (mode, goal) {
                (ObstacleMode::StreamGuided, Some(goal)) => Some(GuidedShip {
                    speed: ob.speed(),
                    goal: *goal,
                    waypoint: ob.position,
                    next: None,
                    arrived: (ob.position - goal).norm() == 0.0,
                }),
                _ => None,
            })
            .collect();
        ObstacleTracker {
            initial: workspace.obstacles.clone(),
            current: workspace.obstacles.clone(),
            ships,
        }
    }

    fn snapshot(&self) -> &[Obstacle] {
        &self.current
    }

    /// Plan pending target-ship waypoints against the current traffic.
    fn plan_ships(&mut self, own: &VesselState, sc: &Scenario) {
        let own_velocity = rotation(own.heading) * own.body_velocity();
        for i in 0..self.ships.len() {
            let Some(ship) = &self.ships[i] else { continue };
            if ship.arrived || ship.next.is_some() {
                continue;
            }
            let me = &self.current[i];
            let mut traffic = vec![Obstacle {
                position: own.position,
                velocity: own_velocity,
                radius: me.radius,
                influence_range: me.influence_range,
                vortex_gain: me.vortex_gain,
                colregs_compliant: true,
            }];
            traffic.extend(
                self.current
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, o)| o.clone()),
            );
            let world = Workspace {
                grid: sc.workspace.grid,
                target: ship.goal,
                obstacles: traffic,
            };
            let query = WaypointQuery {
                current_wp: ship.waypoint,
                ring_radius: sc.planner.ring_radius,
                gamma: sc.planner.gamma,
                target: ship.goal,
            };
            let field = StreamField::new(&world, ship.waypoint)
                .with_sink_strength(sc.planner.sink_strength)
                .with_uniform_spin();
            match select_with_field(&query, &field) {
                Ok(choice) => {
                    let next = choice.point();
                    let ship = self.ships[i].as_mut().expect("guided ship");
                    ship.next = Some(next);
                    let dir = next - ship.waypoint;
                    self.current[i].velocity = dir / dir.norm() * ship.speed;
                }
                Err(e) => {
                    debug!("target ship {} holds this tick: {e}", i + 1);
                    self.current[i].velocity = Vec2::zeros();
                }
            }
        }
    }

    /// Move every obstacle to time `t` (one step of `dt` after the last call).
    fn advance(&mut self, t: f64, dt: f64) {
        for (i, ob) in self.current.iter_mut().enumerate() {
            match &mut self.ships[i] {
                None => {
                    let o = &self.initial[i];
                    ob.position = o.position + o.velocity * t;
                }
                Some(ship) => {
                    let Some(next) = ship.next else { continue };
                    let remaining = next - ob.position;
                    let reach = ship.speed * dt;
                    if remaining.norm() <= reach {
                        ob.position = next;
                        ship.waypoint = next;
                        ship.next = None;
                        ob.velocity = Vec2::zeros();
                        if (next - ship.goal).norm() == 0.0 {
                            ship.arrived = true;
                        }
                    } else {
                        ob.position += remaining / remaining.norm() * reach;
                    }
                }
            }
        }
    }
}

fn arr(v: Vec2) -> [f64; 2] {
    [v.x, v.y]
}

/// Path signal at `s`, extrapolating the last segment if `s` runs past it.
fn signal_at(segments: &[BezierSegment], s: f64, gains: &ControlGains) -> PathSignal {
    let n = segments.len();
    if s < 0.0 {
        return signal_on_segment(&segments[0], s, s, gains);
    }
    let (k, theta) = locate(s, n);
    if k > n {
        let last = &segments[n - 1];
        return signal_on_segment(last, s, s - (n - 1) as f64, gains);
    }
    signal_on_segment(&segments[k - 1], s, theta, gains)
}

struct Planner<'a> {
    sc: &'a Scenario,
    uniform_spin: bool,
}

impl Planner<'_> {
    fn next_waypoint(
        &self,
        from: Vec2,
        obstacles: &[Obstacle],
        step: usize,
        t: f64,
    ) -> Result<PlanningRecord, String> {
        let world = Workspace {
            grid: self.sc.workspace.grid,
            target: self.sc.workspace.target,
            obstacles: obstacles.to_vec(),
        };
        let query = WaypointQuery {
            current_wp: from,
            ring_radius: self.sc.planner.ring_radius,
            gamma: self.sc.planner.gamma,
            target: world.target,
        };
        let mut field = StreamField::new(&world, from).with_sink_strength(self.sc.planner.sink_strength);
        if self.uniform_spin {
            field = field.with_uniform_spin();
        }
        let choice = select_with_field(&query, &field).map_err(|e| format!("planning step {step}: {e}"))?;
        Ok(PlanningRecord {
            step,
            t,
            from: arr(from),
            to: choice.position,
            index: choice.index,
            cost: choice.cost,
            spins: choice.spins.clone(),
            snapshot: world.clone(),
            uniform_spin: self.uniform_spin,
        })
    }
}

pub fn run(sc: &Scenario) -> RunTrace {
    let sim = sc.sim;
    let dt = sim.dt;
    let gains = &sc.gains;
    let target = sc.workspace.target;
    let mut tracker = ObstacleTracker::new(&sc.workspace, &sc.goals, sim.obstacle_mode);
    let planner = Planner {
        sc,
        uniform_spin: sim.obstacle_mode == ObstacleMode::StreamGuided,
    };
    let n_obs = sc.workspace.obstacles.len();

    let mut state = sc.vessel0;
    let mut s = 0.0_f64;
    let mut waypoints = vec![state.position];
    let mut segments: Vec<BezierSegment> = Vec::new();
    let mut segment_records = Vec::new();
    let mut planning = Vec::new();
    let mut rows: Vec<TickRow> = Vec::new();
    let mut min_clearance = vec![f64::INFINITY; n_obs];
    let mut path_length = 0.0;
    let mut max_z_p: f64 = 0.0;
    let mut hold_heading = state.heading;
    let mut tick: usize = 0;

    let outcome = loop {
        let t = tick as f64 * dt;
        if tick == 0 {
            tracker.plan_ships(&state, sc);
        }
        let obstacles = tracker.snapshot().to_vec();
        let mut collided = None;
        for (i, ob) in obstacles.iter().enumerate() {
            let d = (state.position - ob.position).norm();
            min_clearance[i] = min_clearance[i].min(d);
            if d < COLLISION_FRACTION * ob.radius && collided.is_none() {
                collided = Some(format!(
                    "collision with obstacle {} at t = {t:.2} s (clearance {d:.3} m)",
                    i + 1
                ));
            }
        }
        if let Some(msg) = collided {
            break Outcome::Fault(msg);
        }
        if (target - state.position).norm() < sim.delta {
            break Outcome::Reached;
        }
        if t > sim.t_max {
            break Outcome::Timeout;
        }

        // replan when s enters a segment that has not been built yet
        let mut fault = None;
        let done_planning = |wps: &[Vec2]| wps.last().is_some_and(|w| (*w - target).norm() == 0.0);
        while s.floor() as usize + 1 > segments.len() && !done_planning(&waypoints) {
            let from = *waypoints.last().expect("start waypoint");
            let record = match planner.next_waypoint(from, &obstacles, planning.len() + 1, t) {
                Ok(r) => r,
                Err(e) => {
                    fault = Some(e);
                    break;
                }
            };
            let to = Vec2::new(record.to[0], record.to[1]);
            let built = match segments.last() {
                None => first_segment(from, to, sc.path.zeta).map(|seg| (seg, None)),
                Some(prev) => solve_corridor_qp(prev, to, sc.path.zeta, sc.path.epsilon)
                    .map(|sol| (sol.segment, Some((sol.chi, sol.objective)))),
            };
            let (segment, qp) = match built {
                Ok(b) => b,
                Err(e) => {
                    fault = Some(format!("segment {}: {e}", segments.len() + 1));
                    break;
                }
            };
            debug!("waypoint {} -> ({:.2}, {:.2})", record.step, to.x, to.y);
            segment_records.push(SegmentRecord {
                index: segment.index,
                alpha: segment.alpha,
                control_points: segment.control_points.map(arr),
                chi: qp.map(|(c, _)| [c[0], c[1], c[2]]),
                objective: qp.map(|(_, o)| o),
            });
            let end_tangent = segment.eval_polynomial(1.0, 1);
            hold_heading = end_tangent.y.atan2(end_tangent.x);
            segments.push(segment);
            planning.push(record);
            waypoints.push(to);
        }
        if let Some(e) = fault {
            break Outcome::Fault(e);
        }

        let n = segments.len();
        let terminal = done_planning(&waypoints) && s >= n as f64;
        let sig = if terminal {
            PathSignal::hold(s, target, hold_heading)
        } else {
            signal_at(&segments, s, gains)
        };
        let out = match control_law(&state, &sig, gains, &sc.params) {
            Ok(o) => o,
            Err(e) => break Outcome::Fault(e.to_string()),
        };
        let (k, theta) = locate(s.min(n as f64), n);
        max_z_p = max_z_p.max(out.errors.z_p.norm());
        rows.push(TickRow {
            t,
            s,
            k,
            theta,
            position: arr(state.position),
            psi: state.heading,
            nu: state.nu.into(),
            p_d: arr(sig.p_d),
            psi_d: sig.psi_d,
            z_p: arr(out.errors.z_p),
            z_psi: out.errors.z_psi,
            z_nu: out.errors.z_nu.into(),
            omega: out.errors.omega,
            tau: out.tau.into(),
            obstacles: obstacles.iter().map(|o| arr(o.position)).collect(),
            obstacle_velocities: obstacles.iter().map(|o| arr(o.velocity)).collect(),
        });

        // vessel and path parameter advance together with tau held
        let tau = out.tau;
        let mut y = [0.0; 7];
        y[..6].copy_from_slice(&pack(&state));
        y[6] = s;
        let y1 = rk4(&y, dt, |y| {
            let st = unpack(&y[..6]);
            let d = derivative(&st, &tau, &sc.params);
            let s_dot = if terminal {
                0.0
            } else {
                let sg = signal_at(&segments, y[6], gains);
                sg.speed + update_law(st.position, &sg, gains)
            };
            [d[0], d[1], d[2], d[3], d[4], d[5], s_dot]
        });
        let next = match finish(unpack(&y1[..6])) {
            Ok(v) => v,
            Err(e) => break Outcome::Fault(e.to_string()),
        };
        if !y1[6].is_finite() {
            break Outcome::Fault(format!("path parameter diverged at t = {t:.2} s"));
        }
        if out.errors.z_p.norm() > TRACKING_LIMIT {
            break Outcome::Fault(format!("tracking lost at t = {t:.2} s"));
        }
        path_length += (next.position - state.position).norm();
        state = next;
        s = y1[6];
        if done_planning(&waypoints) {
            s = s.min(segments.len() as f64);
        }
        tick += 1;
        tracker.advance(tick as f64 * dt, dt);
        tracker.plan_ships(&state, sc);
    };

    let final_time = tick as f64 * dt;
    if let Outcome::Fault(msg) = &outcome {
        warn!("{}: run ended with a fault: {msg}", sc.name);
    }
    // final row so the trace ends at the terminal state
    let obstacles = tracker.snapshot();
    let last_sig = rows.last().map(|r| (r.p_d, r.psi_d)).unwrap_or((arr(target), 0.0));
    let n = segments.len();
    let (k, theta) = if n > 0 { locate(s.min(n as f64), n) } else { (0, 0.0) };
    if rows.last().is_none_or(|r| r.t < final_time) {
        rows.push(TickRow {
            t: final_time,
            s,
            k,
            theta,
            position: arr(state.position),
            psi: state.heading,
            nu: state.nu.into(),
            p_d: last_sig.0,
            psi_d: last_sig.1,
            z_p: [f64::NAN; 2],
            z_psi: f64::NAN,
            z_nu: [f64::NAN; 3],
            omega: f64::NAN,
            tau: [f64::NAN; 3],
            obstacles: obstacles.iter().map(|o| arr(o.position)).collect(),
            obstacle_velocities: obstacles.iter().map(|o| arr(o.velocity)).collect(),
        });
    }
    let max_junction_mismatch = segments
        .windows(2)
        .map(|w| junction_mismatch(&w[0], &w[1]))
        .fold(0.0, f64::max);
    let summary = Summary {
        arrival_time: (outcome == Outcome::Reached).then_some(final_time),
        outcome,
        final_time,
        final_distance: (target - state.position).norm(),
        path_length,
        max_z_p,
        min_clearance,
        waypoints: waypoints.len(),
        segments: segments.len(),
        max_junction_mismatch,
    };
    RunTrace {
        scenario: sc.name.clone(),
        rows,
        planning,
        segments,
        segment_records,
        waypoints,
        obstacle_radii: sc.workspace.obstacles.iter().map(|o| o.radius).collect(),
        target,
        sink_strength: sc.planner.sink_strength,
        summary,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encounter {
    HeadOn,
    Crossing,
    Overtaking,
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Port,
    Starboard,
    Ahead,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncounterReport {
    pub obstacle: usize,
    pub encounter: Encounter,
    pub min_clearance: f64,
    pub time_of_closest_approach: f64,
    /// Side of the own ship the obstacle is on at closest approach.
    pub side: Side,
    /// Own-ship offset along the obstacle's direction of travel at closest
    /// approach; positive means the own ship passed ahead of it.
    pub along_track_offset: Option<f64>,
}

pub fn classify(own_heading: f64, obstacle_velocity: Vec2) -> Encounter {
    if obstacle_velocity.norm() == 0.0 {
        return Encounter::Static;
    }
    let rel = wrap_angle(obstacle_velocity.y.atan2(obstacle_velocity.x) - own_heading).abs();
    if rel > 3.0 * FRAC_PI_4 {
        Encounter::HeadOn
    } else if rel < FRAC_PI_4 {
        Encounter::Overtaking
    } else {
        Encounter::Crossing
    }
}

/// `cross(h, d) > 0` puts `d` to starboard of heading `h` in the North-East frame.
pub fn side_of(heading: f64, own: Vec2, other: Vec2) -> Side {
    let h = Vec2::new(heading.cos(), heading.sin());
    let d = other - own;
    let c = h.x * d.y - h.y * d.x;
    if c > 0.0 {
        Side::Starboard
    } else if c < 0.0 {
        Side::Port
    } else {
        Side::Ahead
    }
}

pub fn colregs_metrics(trace: &RunTrace) -> Vec<EncounterReport> {
    let Some(first) = trace.rows.first() else {
        return Vec::new();
    };
    let n = first.obstacles.len();
    (0..n)
        .map(|i| {
            let (mut best, mut at) = (f64::INFINITY, 0);
            for (j, row) in trace.rows.iter().enumerate() {
                let d = (Vec2::from(row.position) - Vec2::from(row.obstacles[i])).norm();
                if d < best {
                    best = d;
                    at = j;
                }
            }
            let row = &trace.rows[at];
            let own = Vec2::from(row.position);
            let ob = Vec2::from(row.obstacles[i]);
            let v0 = Vec2::from(first.obstacle_velocities[i]);
            let v = Vec2::from(row.obstacle_velocities[i]);
            let track = if v.norm() > 0.0 { Some(v) } else if v0.norm() > 0.0 { Some(v0) } else { None };
            EncounterReport {
                obstacle: i + 1,
                encounter: classify(first.psi, v0),
                min_clearance: best,
                time_of_closest_approach: row.t,
                side: side_of(row.psi, own, ob),
                along_track_offset: track.map(|v| (own - ob).dot(&(v / v.norm()))),
            }
        })
        .collect()
}
