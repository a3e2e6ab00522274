//! SVG figures: streamline contours, trajectory and obstacle discs.
//!
//! North points up and East to the right.

use std::fmt::Write;

use crate::flowfield::FieldGrid;
use crate::simulator::{PlanningRecord, RunTrace, TickRow};
use crate::workspace::{GridIndex, GridSpec};
use crate::Vec2;

const SCALE: f64 = 30.0;
const MARGIN: f64 = 24.0;
const LEVELS: usize = 48;

/// Line pieces of the `level` isoline over the sampled grid. Cells touching
/// a masked or singular node are skipped, as are cells whose corner spread
/// exceeds `max_spread` (branch cuts of the angular terms).
pub fn marching_squares(field: &FieldGrid, level: f64, max_spread: f64) -> Vec<[Vec2; 2]> {
    let g = &field.grid;
    let mut out = Vec::new();
    for m in 1..g.count_x() {
        for n in 1..g.count_y() {
            let Some(cell) = cell_values(field, m, n) else { continue };
            let lo = cell.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = cell.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > max_spread || level < lo || level > hi {
                continue;
            }
            let corners = corner_points(g, m, n);
            let above: Vec<bool> = cell.iter().map(|v| *v > level).collect();
            // edge e joins corner e and corner e+1
            let crossing = |e: usize| {
                let (i, j) = (e, (e + 1) % 4);
                let t = (level - cell[i]) / (cell[j] - cell[i]);
                corners[i] + (corners[j] - corners[i]) * t
            };
            let cut: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            match cut.len() {
                2 => out.push([crossing(cut[0]), crossing(cut[1])]),
                4 => {
                    // saddle: pair edges according to the cell average
                    let centre_above = cell.iter().sum::<f64>() / 4.0 > level;
                    if centre_above == above[0] {
                        out.push([crossing(0), crossing(3)]);
                        out.push([crossing(1), crossing(2)]);
                    } else {
                        out.push([crossing(0), crossing(1)]);
                        out.push([crossing(2), crossing(3)]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

fn cell_values(field: &FieldGrid, m: usize, n: usize) -> Option<[f64; 4]> {
    let at = |m, n| field.get(GridIndex { m, n }).value();
    Some([at(m, n)?, at(m + 1, n)?, at(m + 1, n + 1)?, at(m, n + 1)?])
}

fn corner_points(g: &GridSpec, m: usize, n: usize) -> [Vec2; 4] {
    let p = |m: usize, n: usize| Vec2::new((m - 1) as f64 * g.spacing_x(), (n - 1) as f64 * g.spacing_y());
    [p(m, n), p(m + 1, n), p(m + 1, n + 1), p(m, n + 1)]
}

/// Contour levels at evenly spaced quantiles of the sampled values, so the
/// lines spread over the whole workspace whatever the value range.
pub fn contour_levels(field: &FieldGrid, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = field.values.iter().filter_map(|x| x.value()).collect();
    if v.is_empty() || count == 0 {
        return Vec::new();
    }
    v.sort_by(f64::total_cmp);
    let mut levels: Vec<f64> = (1..=count)
        .map(|i| v[(i * (v.len() - 1)) / (count + 1)])
        .collect();
    levels.dedup();
    levels
}

/// Typical cell spread times a generous factor.
fn spread_limit(field: &FieldGrid) -> f64 {
    let g = &field.grid;
    let mut spreads = Vec::new();
    for m in 1..g.count_x() {
        for n in 1..g.count_y() {
            if let Some(c) = cell_values(field, m, n) {
                let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                spreads.push(hi - lo);
            }
        }
    }
    if spreads.is_empty() {
        return f64::INFINITY;
    }
    spreads.sort_by(f64::total_cmp);
    (spreads[spreads.len() / 2] * 40.0).max(1e-9)
}

struct Canvas {
    body: String,
    length_x: f64,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(grid: &GridSpec) -> Self {
        Canvas {
            body: String::new(),
            length_x: grid.length_x(),
            width: grid.length_y() * SCALE + 2.0 * MARGIN,
            height: grid.length_x() * SCALE + 2.0 * MARGIN,
        }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        (MARGIN + p.y * SCALE, MARGIN + (self.length_x - p.x) * SCALE)
    }

    fn segments(&mut self, segs: &[[Vec2; 2]], style: &str) {
        if segs.is_empty() {
            return;
        }
        let mut d = String::new();
        for [a, b] in segs {
            let (ax, ay) = self.map(*a);
            let (bx, by) = self.map(*b);
            let _ = write!(d, "M{ax:.2} {ay:.2}L{bx:.2} {by:.2}");
        }
        let _ = writeln!(self.body, r#"<path d="{d}" {style}/>"#);
    }

    fn polyline(&mut self, pts: impl Iterator<Item = Vec2>, style: &str) {
        let mut s = String::new();
        for p in pts {
            let (x, y) = self.map(p);
            let _ = write!(s, "{x:.2},{y:.2} ");
        }
        let _ = writeln!(self.body, r#"<polyline points="{}" fill="none" {style}/>"#, s.trim_end());
    }

    fn circle(&mut self, c: Vec2, radius: f64, style: &str) {
        let (x, y) = self.map(c);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{:.2}" {style}/>"#,
            radius * SCALE
        );
    }

    fn dot(&mut self, c: Vec2, px: f64, style: &str) {
        let (x, y) = self.map(c);
        let _ = writeln!(self.body, r#"<circle cx="{x:.2}" cy="{y:.2}" r="{px}" {style}/>"#);
    }

    fn line(&mut self, a: Vec2, b: Vec2, style: &str) {
        let (ax, ay) = self.map(a);
        let (bx, by) = self.map(b);
        let _ = writeln!(
            self.body,
            r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" {style}/>"#
        );
    }

    fn text(&mut self, s: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="13">{}</text>"#,
            MARGIN - 8.0,
            escape(s)
        );
    }

    fn finish(self) -> String {
        let (w, h) = (self.width, self.height);
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="#fbfbf8" stroke="#999"/>"##,
            w - 2.0 * MARGIN,
            h - 2.0 * MARGIN
        );
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const CONTOUR: &str = r##"stroke="#7fa3c9" stroke-width="0.7" fill="none""##;
const DISC: &str = r##"fill="#d9534f" fill-opacity="0.35" stroke="#a33" stroke-width="1""##;
const RANGE: &str = r##"fill="none" stroke="#a33" stroke-width="0.8" stroke-dasharray="4 3""##;
const TRACK: &str = r##"stroke="#222" stroke-width="1.6""##;
const WAYPOINT: &str = r##"fill="#fff" stroke="#222" stroke-width="1""##;
const TARGET: &str = r##"fill="#2a9d3a" stroke="#145c1f" stroke-width="1""##;

fn own_track(trace: &RunTrace, until: f64) -> impl Iterator<Item = Vec2> + '_ {
    let last = trace.rows.iter().rposition(|r| r.t <= until).unwrap_or(0);
    trace.rows[..=last]
        .iter()
        .enumerate()
        .filter(move |(i, _)| i % 10 == 0 || *i == last)
        .map(|(_, r)| Vec2::new(r.position[0], r.position[1]))
}

/// Field, discs and own-ship track at one planning step.
pub fn snapshot_svg(trace: &RunTrace, record: &PlanningRecord, field: &FieldGrid) -> String {
    let w = &record.snapshot;
    let mut c = Canvas::new(&w.grid);
    let limit = spread_limit(field);
    for level in contour_levels(field, LEVELS) {
        let segs = marching_squares(field, level, limit);
        c.segments(&segs, CONTOUR);
    }
    for ob in &w.obstacles {
        c.circle(ob.position, ob.radius, DISC);
        if ob.influence_range > ob.radius {
            c.circle(ob.position, ob.influence_range, RANGE);
        }
        if ob.speed() > 0.0 {
            c.line(ob.position, ob.position + ob.velocity * 20.0, r##"stroke="#a33" stroke-width="1.5""##);
        }
    }
    if trace.rows.is_empty() {
        c.text(&format!("{}: step {}", trace.scenario, record.step));
        return c.finish();
    }
    c.polyline(own_track(trace, record.t), TRACK);
    for wp in trace.waypoints.iter().take(record.step) {
        c.dot(*wp, 2.5, WAYPOINT);
    }
    c.dot(Vec2::new(record.to[0], record.to[1]), 3.5, r##"fill="#f0a020" stroke="#222""##);
    c.dot(w.target, 5.0, TARGET);
    c.text(&format!("{}: step {}, t = {:.1} s", trace.scenario, record.step, record.t));
    c.finish()
}

/// Whole run: own track, obstacle tracks, discs at closest approach and
/// waypoints.
pub fn summary_svg(trace: &RunTrace) -> String {
    let grid = trace
        .planning
        .first()
        .map(|p| p.snapshot.grid)
        .unwrap_or_else(|| GridSpec::new(20.0, 20.0, 100, 100).expect("default grid"));
    let mut c = Canvas::new(&grid);
    let n_obs = trace.obstacle_radii.len();
    for i in 0..n_obs {
        let pts = trace
            .rows
            .iter()
            .step_by(10)
            .map(|r| Vec2::new(r.obstacles[i][0], r.obstacles[i][1]));
        c.polyline(pts, r##"stroke="#a33" stroke-width="1" stroke-dasharray="3 3""##);
    }
    // each disc where it was at closest approach, with the own ship then
    for (i, r) in trace.obstacle_radii.iter().enumerate() {
        let gap = |row: &TickRow| {
            (Vec2::new(row.obstacles[i][0], row.obstacles[i][1]) - Vec2::new(row.position[0], row.position[1])).norm()
        };
        let Some(row) = trace.rows.iter().min_by(|a, b| gap(a).total_cmp(&gap(b))) else { continue };
        c.circle(Vec2::new(row.obstacles[i][0], row.obstacles[i][1]), *r, DISC);
        c.dot(Vec2::new(row.position[0], row.position[1]), 3.0, r##"fill="#a33""##);
    }
    if let Some(last) = trace.rows.last() {
        c.polyline(own_track(trace, last.t), TRACK);
    }
    for wp in &trace.waypoints {
        c.dot(*wp, 2.5, WAYPOINT);
    }
    c.dot(trace.target, 5.0, TARGET);
    c.text(&format!("{}: {:?}", trace.scenario, trace.summary.outcome));
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowfield::FieldValue;

    fn linear_field(f: impl Fn(Vec2) -> f64) -> FieldGrid {
        let grid = GridSpec::new(2.2, 2.2, 11, 11).unwrap();
        let values = grid.points().map(|(_, p)| FieldValue::Value(f(p))).collect();
        FieldGrid { grid, values }
    }

    #[test]
    fn isoline_of_a_plane_is_straight() {
        let f = linear_field(|p| p.x + 2.0 * p.y);
        let segs = marching_squares(&f, 1.3, f64::INFINITY);
        assert!(!segs.is_empty());
        for [a, b] in segs {
            assert!((a.x + 2.0 * a.y - 1.3).abs() < 1e-12);
            assert!((b.x + 2.0 * b.y - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_isoline_stays_near_radius() {
        let c = Vec2::new(1.0, 1.0);
        let f = linear_field(|p| (p - c).norm_squared());
        let segs = marching_squares(&f, 0.49, f64::INFINITY);
        assert!(segs.len() > 8);
        for [a, b] in segs {
            for p in [a, b] {
                assert!(((p - c).norm() - 0.7).abs() < 0.02);
            }
        }
    }

    #[test]
    fn masked_and_jumping_cells_are_skipped() {
        let mut f = linear_field(|p| if p.y > 1.05 { p.x + 100.0 } else { p.x });
        let segs = marching_squares(&f, 0.55, 10.0);
        assert!(segs.iter().all(|[a, b]| a.y <= 1.0 + 1e-12 && b.y <= 1.0 + 1e-12));
        for v in f.values.iter_mut() {
            *v = FieldValue::Masked;
        }
        assert!(marching_squares(&f, 0.55, 10.0).is_empty());
        assert!(contour_levels(&f, 5).is_empty());
    }

    #[test]
    fn levels_are_sorted_and_inside_range() {
        let f = linear_field(|p| p.x * p.y);
        let lv = contour_levels(&f, 10);
        assert!(lv.windows(2).all(|w| w[0] < w[1]));
        assert!(lv[0] >= 0.0 && *lv.last().unwrap() <= 4.0);
    }
}
