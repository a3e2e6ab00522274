//! Degree-7 Bézier path segments joined with continuous third derivative.
//!
//! The first segment is a straight chord. Every later segment starts with the
//! three control points forced by C³ continuity and places `P4..P6` on its
//! own chord, choosing their along-chord coordinates with a small QP.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

use crate::qp::{solve_qp, QpError, QpSolution};
use crate::Vec2;

pub const DEGREE: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("degenerate segment: waypoints ({x}, {y}) coincide")]
    Degenerate { x: f64, y: f64 },
    #[error("path reverses onto itself at ({x}, {y})")]
    Reversal { x: f64, y: f64 },
    #[error("corridor problem infeasible (rows {rows:?}): {reason}")]
    Infeasible { rows: Vec<usize>, reason: String },
    #[error("theta = {0} is outside [0, 1]")]
    Domain(f64),
    #[error("derivative order {0} not supported (0..=3)")]
    Order(usize),
    #[error("invalid corridor parameters: {0}")]
    Parameters(String),
    #[error(transparent)]
    Qp(#[from] QpError),
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Lower-triangular map from control points to monomial coefficients:
/// `b(theta) = sum_j theta^j (B P)_j`.
pub fn bernstein_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n + 1, n + 1, |i, j| {
        if j > i {
            return 0.0;
        }
        let sign = if (i - j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * factorial(n) / factorial(n - i) / (factorial(j) * factorial(i - j))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BezierSegment {
    pub control_points: [Vec2; 8],
    /// 1-based segment number along the path.
    pub index: usize,
    /// Chord angle from start to end waypoint.
    pub alpha: f64,
    coeffs: [Vec2; 8],
}

impl BezierSegment {
    pub fn new(control_points: [Vec2; 8], index: usize) -> Self {
        let b = bernstein_matrix(DEGREE);
        let mut coeffs = [Vec2::zeros(); 8];
        for (j, c) in coeffs.iter_mut().enumerate() {
            for (i, p) in control_points.iter().enumerate() {
                *c += p * b[(j, i)];
            }
        }
        let chord = control_points[7] - control_points[0];
        BezierSegment {
            control_points,
            index,
            alpha: chord.y.atan2(chord.x),
            coeffs,
        }
    }

    pub fn start(&self) -> Vec2 {
        self.control_points[0]
    }

    pub fn end(&self) -> Vec2 {
        self.control_points[7]
    }

    /// Monomial coefficients of the curve.
    pub fn coefficients(&self) -> &[Vec2; 8] {
        &self.coeffs
    }

    /// Position or theta-derivative, valid on `[0, 1]`.
    pub fn eval(&self, theta: f64, order: usize) -> Result<Vec2, PathError> {
        if order > 3 {
            return Err(PathError::Order(order));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(PathError::Domain(theta));
        }
        Ok(self.eval_polynomial(theta, order))
    }

    /// Polynomial evaluation without the domain check; used to extrapolate
    /// slightly past the end of the last built segment.
    pub fn eval_polynomial(&self, theta: f64, order: usize) -> Vec2 {
        let mut acc = Vec2::zeros();
        for j in (order..=DEGREE).rev() {
            let falling: f64 = (0..order).map(|k| (j - k) as f64).product();
            acc = acc * theta + self.coeffs[j] * falling;
        }
        acc
    }
}

pub fn eval_bezier(seg: &BezierSegment, theta: f64, order: usize) -> Result<Vec2, PathError> {
    seg.eval(theta, order)
}

pub fn first_segment(wp0: Vec2, wp1: Vec2, zeta: f64) -> Result<BezierSegment, PathError> {
    let chord = wp1 - wp0;
    if chord.norm() == 0.0 {
        return Err(PathError::Degenerate { x: wp0.x, y: wp0.y });
    }
    let mut pts = [Vec2::zeros(); 8];
    for (i, p) in pts.iter_mut().enumerate() {
        *p = if i <= 3 {
            wp0 + chord * (i as f64 / 3.0) * (zeta / 2.0)
        } else {
            wp1 - chord * ((7 - i) as f64 / 3.0) * (zeta / 2.0)
        };
    }
    Ok(BezierSegment::new(pts, 1))
}

/// `P0..P3` of the next segment from C³ continuity with `prev`.
pub fn continuation_points(prev: &BezierSegment) -> [Vec2; 4] {
    let [_, _, _, _, p4, p5, p6, p7] = prev.control_points;
    let p1 = p7 * 2.0 - p6;
    let p2 = p6 * -2.0 + p5 + p1 * 2.0;
    let p3 = p7 * 2.0 - p6 * 3.0 + p5 * 3.0 - p4 - p1 * 3.0 + p2 * 3.0;
    [p7, p1, p2, p3]
}

/// The corridor QP in the frame of the new chord: origin at its start
/// waypoint, x axis along the chord.
#[derive(Debug, Clone, PartialEq)]
pub struct CorridorQp {
    pub q_mat: Matrix3<f64>,
    pub q_vec: Vector3<f64>,
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    /// Chord length, the frame x-coordinate of the end waypoint.
    pub x7: f64,
}

const Q_ENTRIES: [f64; 9] = [
    24500.0, -7350.0, 980.0, //
    -7350.0, 2646.0, -441.0, //
    980.0, -441.0, 98.0,
];

const A_ROWS: [[f64; 3]; 10] = [
    // ordering chi1 <= chi2 <= chi3
    [1.0, -1.0, 0.0],
    [0.0, 1.0, -1.0],
    // next segment's P1..P3 within zeta/2 past the end waypoint
    [0.0, 0.0, -1.0],
    [0.0, 1.0, -4.0],
    [-1.0, 6.0, -12.0],
    // curvature margin
    [0.0, 0.0, 1.0],
    [0.0, -1.0, 4.0],
    [1.0, -6.0, 12.0],
    // next segment's P1 <= P2 <= P3
    [0.0, -1.0, 3.0],
    [1.0, -5.0, 8.0],
];

impl CorridorQp {
    /// `x` holds the frame x-coordinates of `P0..P3`.
    pub fn new(x: [f64; 4], x7: f64, zeta: f64, eps: f64) -> Self {
        let [x0, x1, x2, x3] = x;
        let q_vec = Vector3::new(
            8400.0 * x0 - 41160.0 * x1 + 82320.0 * x2 - 85750.0 * x3 - 70.0 * x7,
            -1512.0 * x0 + 8232.0 * x1 - 18522.0 * x2 + 22050.0 * x3 + 42.0 * x7,
            112.0 * x0 - 686.0 * x1 + 1764.0 * x2 - 2450.0 * x3 - 14.0 * x7,
        );
        let h = zeta / 2.0;
        let c = DVector::from_vec(vec![
            0.0,
            0.0,
            -x7 + h,
            -3.0 * x7 + h,
            -7.0 * x7 + h,
            x7 - eps,
            3.0 * x7 - eps,
            7.0 * x7 - eps,
            2.0 * x7,
            4.0 * x7,
        ]);
        CorridorQp {
            q_mat: Matrix3::from_row_slice(&Q_ENTRIES),
            q_vec,
            a: DMatrix::from_fn(10, 3, |i, j| A_ROWS[i][j]),
            c,
            x7,
        }
    }

    pub fn objective(&self, chi: &Vector3<f64>) -> f64 {
        chi.dot(&(self.q_mat * chi)) + self.q_vec.dot(chi)
    }

    /// Smallest slack over all rows including the box `0 <= chi <= x7`.
    pub fn min_slack(&self, chi: &Vector3<f64>) -> f64 {
        let mut s = f64::INFINITY;
        for i in 0..10 {
            let row: f64 = (0..3).map(|j| self.a[(i, j)] * chi[j]).sum();
            s = s.min(self.c[i] - row);
        }
        for j in 0..3 {
            s = s.min(chi[j]).min(self.x7 - chi[j]);
        }
        s
    }

    pub fn solve(&self) -> Result<QpSolution, QpError> {
        let q = DMatrix::from_iterator(3, 3, self.q_mat.iter().copied());
        let lin = DVector::from_iterator(3, self.q_vec.iter().copied());
        solve_qp(
            &q,
            &lin,
            &self.a,
            &self.c,
            &DVector::zeros(3),
            &DVector::from_element(3, self.x7),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorridorSolution {
    pub segment: BezierSegment,
    pub chi: Vector3<f64>,
    pub objective: f64,
    pub qp: QpSolution,
}

fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Build the segment after `prev` ending at `wp_next`.
pub fn solve_corridor_qp(
    prev: &BezierSegment,
    wp_next: Vec2,
    zeta: f64,
    eps: f64,
) -> Result<CorridorSolution, PathError> {
    if !(zeta > 0.0 && eps > 0.0 && zeta.is_finite() && eps.is_finite()) {
        return Err(PathError::Parameters(format!(
            "zeta = {zeta}, epsilon = {eps} must be positive"
        )));
    }
    let start = prev.end();
    let chord = wp_next - start;
    let x7 = chord.norm();
    if x7 == 0.0 {
        return Err(PathError::Degenerate { x: start.x, y: start.y });
    }
    let incoming = prev.eval_polynomial(1.0, 1);
    if incoming.norm() > 0.0 && incoming.dot(&chord) / (incoming.norm() * x7) < -1.0 + 1e-9 {
        return Err(PathError::Reversal { x: start.x, y: start.y });
    }
    let alpha = chord.y.atan2(chord.x);
    let head = continuation_points(prev);
    let local = head.map(|p| rotate(p - start, -alpha));
    let problem = CorridorQp::new(local.map(|p| p.x), x7, zeta, eps);
    let sol = problem.solve().map_err(|e| match e {
        QpError::Infeasible { rows } => PathError::Infeasible {
            reason: format!(
                "no admissible P4..P6 on a {x7:.4} m chord with zeta = {zeta}, epsilon = {eps}"
            ),
            rows,
        },
        other => PathError::Qp(other),
    })?;
    let chi = Vector3::new(sol.x[0], sol.x[1], sol.x[2]);
    let slack = problem.min_slack(&chi);
    if slack < -1e-8 {
        return Err(PathError::Infeasible {
            rows: sol.active.clone(),
            reason: format!("solver returned a point with slack {slack:e}"),
        });
    }
    let dir = chord / x7;
    let mut pts = [Vec2::zeros(); 8];
    pts[..4].copy_from_slice(&head);
    for j in 0..3 {
        pts[4 + j] = start + dir * chi[j];
    }
    pts[7] = wp_next;
    let mut segment = BezierSegment::new(pts, prev.index + 1);
    segment.alpha = alpha;
    Ok(CorridorSolution {
        segment,
        chi,
        objective: problem.objective(&chi),
        qp: sol,
    })
}

/// Max mismatch over orders 0..=3 between the end of `a` and start of `b`.
pub fn junction_mismatch(a: &BezierSegment, b: &BezierSegment) -> f64 {
    (0..=3)
        .map(|o| (a.eval_polynomial(1.0, o) - b.eval_polynomial(0.0, o)).amax())
        .fold(0.0, f64::max)
}

/// Exhaustive search over the feasible chi set at the given resolution.
/// Returns the best objective and its point. Intended as a test oracle.
pub fn grid_search(problem: &CorridorQp, step: f64) -> Option<(f64, Vector3<f64>)> {
    let n = (problem.x7 / step).floor() as usize;
    let mut best: Option<(f64, Vector3<f64>)> = None;
    // chi3 is pinned to [x7 - zeta/2, x7 - eps] by rows 3 and 6, so walk it
    // first and prune the others by ordering
    for k in (0..=n).rev() {
        let c3 = k as f64 * step;
        if c3 > problem.c[5] + 1e-12 || -c3 > problem.c[2] + 1e-12 {
            continue;
        }
        for j in 0..=k {
            let c2 = j as f64 * step;
            for i in 0..=j {
                let chi = Vector3::new(i as f64 * step, c2, c3);
                if problem.min_slack(&chi) < -1e-12 {
                    continue;
                }
                let f = problem.objective(&chi);
                if best.is_none_or(|(b, _)| f < b) {
                    best = Some((f, chi));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn straight(len: f64) -> BezierSegment {
        first_segment(Vec2::zeros(), Vec2::new(len, 0.0), 0.5).unwrap()
    }

    #[test]
    fn bernstein_entries() {
        let b = bernstein_matrix(7);
        assert_eq!(b[(0, 0)], 1.0);
        assert_eq!(b[(1, 0)], -7.0);
        assert_eq!(b[(1, 1)], 7.0);
        assert_eq!(b[(0, 3)], 0.0);
        for i in 1..=7 {
            let s: f64 = (0..=7).map(|j| b[(i, j)]).sum();
            assert_eq!(s, 0.0, "row {i}");
        }
        // small n by hand: cubic
        let b3 = bernstein_matrix(3);
        let expect = [1., 0., 0., 0., -3., 3., 0., 0., 3., -6., 3., 0., -1., 3., -3., 1.];
        assert_eq!(b3, DMatrix::from_row_slice(4, 4, &expect));
    }

    #[test]
    fn eval_endpoints_and_first_derivative() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 2.0),
            Vec2::new(2.0, -1.0),
            Vec2::new(3.0, 0.5),
            Vec2::new(4.0, 3.0),
            Vec2::new(5.0, 1.0),
            Vec2::new(6.0, 0.0),
            Vec2::new(7.0, 2.0),
        ];
        let seg = BezierSegment::new(pts, 1);
        assert!((seg.eval(0.0, 0).unwrap() - pts[0]).amax() < 1e-12);
        assert!((seg.eval(1.0, 0).unwrap() - pts[7]).amax() < 1e-12);
        assert!((seg.eval(0.0, 1).unwrap() - (pts[1] - pts[0]) * 7.0).amax() < 1e-12);
        assert!((seg.eval(1.0, 1).unwrap() - (pts[7] - pts[6]) * 7.0).amax() < 1e-12);
        assert!(matches!(seg.eval(1.01, 0), Err(PathError::Domain(_))));
        assert!(matches!(seg.eval(0.5, 4), Err(PathError::Order(4))));
        // derivatives against central differences
        let h = 1e-5;
        for order in 1..=3 {
            let fd = (seg.eval(0.4 + h, order - 1).unwrap() - seg.eval(0.4 - h, order - 1).unwrap())
                / (2.0 * h);
            let an = seg.eval(0.4, order).unwrap();
            assert!((fd - an).norm() < 1e-5 * (1.0 + an.norm()), "order {order}");
        }
    }

    #[test]
    fn first_segment_placement() {
        let seg = straight(10.0);
        assert_eq!(seg.control_points[0], Vec2::zeros());
        assert_eq!(seg.control_points[7], Vec2::new(10.0, 0.0));
        assert_relative_eq!(seg.control_points[3].x, 2.5, epsilon = 1e-12);
        assert_relative_eq!(seg.control_points[4].x, 7.5, epsilon = 1e-12);
        for t in [0.1, 0.5, 0.9] {
            assert_eq!(seg.eval(t, 0).unwrap().y, 0.0);
            assert_eq!(seg.eval(t, 2).unwrap().y, 0.0);
        }
        assert!(matches!(
            first_segment(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0), 0.5),
            Err(PathError::Degenerate { .. })
        ));
    }

    #[test]
    fn continuation_cases() {
        let p = Vec2::new(3.0, 4.0);
        let stop = BezierSegment::new([Vec2::zeros(), Vec2::zeros(), Vec2::zeros(), Vec2::zeros(), p, p, p, p], 1);
        assert_eq!(continuation_points(&stop), [p, p, p, p]);

        // evenly spaced line: P4..P7 at 4,5,6,7 continue to 8,9,10
        let line: [Vec2; 8] = std::array::from_fn(|i| Vec2::new(i as f64, 0.0));
        let head = continuation_points(&BezierSegment::new(line, 1));
        for (k, q) in head.iter().enumerate() {
            assert_relative_eq!(q.x, 7.0 + k as f64, epsilon = 1e-12);
        }
        // the forward substitution satisfies the printed triangular system
        let seg = straight(1.3);
        let [_, p1, p2, p3] = continuation_points(&seg);
        let [_, _, _, _, p4, p5, p6, p7] = seg.control_points;
        assert!((p1 - (p7 * 2.0 - p6)).norm() < 1e-12);
        assert!((p1 * -2.0 + p2 - (p6 * -2.0 + p5)).norm() < 1e-12);
        assert!((p1 * 3.0 - p2 * 3.0 + p3 - (p7 * 2.0 - p6 * 3.0 + p5 * 3.0 - p4)).norm() < 1e-12);
    }

    #[test]
    fn q_is_positive_definite() {
        let q = Matrix3::from_row_slice(&Q_ENTRIES);
        let eig = q.symmetric_eigenvalues();
        let mut e: Vec<f64> = eig.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        assert!(e[0] > 0.0);
        assert_relative_eq!(e[0], 8.77, epsilon = 0.01);
        assert_relative_eq!(e[2], 26784.6, epsilon = 0.1);
    }

    /// The QP objective differs from the sum of squared high-order monomial
    /// coefficients (x part) by a chi-independent constant.
    #[test]
    fn objective_matches_monomial_oracle() {
        let b = bernstein_matrix(7);
        let x = [0.0, 0.13, 0.31, 0.52];
        let x7 = 1.2;
        let problem = CorridorQp::new(x, x7, 0.5, 0.005);
        let oracle = |chi: &Vector3<f64>| {
            let p = [x[0], x[1], x[2], x[3], chi[0], chi[1], chi[2], x7];
            (4..=7)
                .map(|j| {
                    let a: f64 = (0..8).map(|i| b[(j, i)] * p[i]).sum();
                    a * a
                })
                .sum::<f64>()
        };
        let probes = [
            Vector3::new(0.1, 0.5, 0.9),
            Vector3::new(0.7, 0.8, 1.1),
            Vector3::new(-0.3, 2.0, 0.4),
            Vector3::zeros(),
        ];
        let offset = oracle(&probes[0]) - problem.objective(&probes[0]);
        for chi in &probes[1..] {
            assert_relative_eq!(
                oracle(chi) - problem.objective(chi),
                offset,
                epsilon = 1e-7,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn constraint_rows_match_geometry() {
        // rows 3..5 are x_i' <= x7 + zeta/2 for the next continuation points,
        // rows 9..10 are their ordering
        let problem = CorridorQp::new([0.0; 4], 1.0, 0.5, 0.005);
        let chi = Vector3::new(0.8, 0.85, 0.9);
        let prev = BezierSegment::new(
            [
                Vec2::zeros(),
                Vec2::zeros(),
                Vec2::zeros(),
                Vec2::zeros(),
                Vec2::new(chi[0], 0.0),
                Vec2::new(chi[1], 0.0),
                Vec2::new(chi[2], 0.0),
                Vec2::new(1.0, 0.0),
            ],
            1,
        );
        let [_, n1, n2, n3] = continuation_points(&prev);
        let row = |i: usize| (0..3).map(|j| problem.a[(i, j)] * chi[j]).sum::<f64>();
        assert_relative_eq!(problem.c[2] - row(2), 1.25 - n1.x, epsilon = 1e-12);
        assert_relative_eq!(problem.c[3] - row(3), 1.25 - n2.x, epsilon = 1e-12);
        assert_relative_eq!(problem.c[4] - row(4), 1.25 - n3.x, epsilon = 1e-12);
        assert_relative_eq!(problem.c[8] - row(8), n2.x - n1.x, epsilon = 1e-12);
        assert_relative_eq!(problem.c[9] - row(9), n3.x - n2.x, epsilon = 1e-12);
    }

    fn chain(wps: &[Vec2]) -> Vec<BezierSegment> {
        let mut segs = vec![first_segment(wps[0], wps[1], 0.5).unwrap()];
        for w in &wps[2..] {
            let next = solve_corridor_qp(segs.last().unwrap(), *w, 0.5, 0.005).unwrap();
            segs.push(next.segment);
        }
        segs
    }

    fn zigzag() -> Vec<Vec2> {
        vec![
            Vec2::new(10.0, 10.0),
            Vec2::new(9.0, 10.0),
            Vec2::new(8.0, 10.8),
            Vec2::new(7.0, 11.2),
            Vec2::new(6.0, 11.0),
            Vec2::new(5.0, 10.2),
            Vec2::new(4.2, 10.0),
        ]
    }

    #[test]
    fn c3_junctions_and_collinearity() {
        let segs = chain(&zigzag());
        for pair in segs.windows(2) {
            assert!(junction_mismatch(&pair[0], &pair[1]) < 1e-9);
        }
        for seg in &segs[1..] {
            let a = seg.start();
            let dir = (seg.end() - a).normalize();
            for p in &seg.control_points[4..7] {
                let d = p - a;
                assert!((dir.x * d.y - dir.y * d.x).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ordering_and_corridor() {
        let wps = zigzag();
        let segs = chain(&wps);
        for seg in &segs[1..] {
            let a = seg.start();
            let dir = (seg.end() - a).normalize();
            let chi: Vec<f64> = seg.control_points[4..7].iter().map(|p| (p - a).dot(&dir)).collect();
            let x7 = (seg.end() - a).norm();
            assert!(chi[0] <= chi[1] + 1e-12 && chi[1] <= chi[2] + 1e-12 && chi[2] <= x7 + 1e-12);
        }
        // once the incoming segment was itself QP-built, the curve stays
        // within zeta/2 of its chord
        for seg in &segs[2..] {
            let a = seg.start();
            let b = seg.end();
            let ab = b - a;
            for i in 0..=1000 {
                let p = seg.eval(i as f64 / 1000.0, 0).unwrap();
                let t = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
                let d = (p - (a + ab * t)).norm();
                assert!(d <= 0.25 + 1e-9, "segment {} sample {i}: {d}", seg.index);
            }
        }
    }

    #[test]
    fn affine_equivariance() {
        let wps = zigzag();
        let segs = chain(&wps);
        let (angle, shift) = (0.7, Vec2::new(-3.0, 5.0));
        let moved: Vec<Vec2> = wps.iter().map(|p| rotate(*p, angle) + shift).collect();
        let segs2 = chain(&moved);
        for (s1, s2) in segs.iter().zip(&segs2) {
            for (p, q) in s1.control_points.iter().zip(&s2.control_points) {
                assert!((rotate(*p, angle) + shift - q).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn qp_beats_grid_oracle() {
        let wps = zigzag();
        let segs = chain(&wps[..3]);
        let prev = &segs[0];
        let start = prev.end();
        let chord = wps[2] - start;
        let alpha = chord.y.atan2(chord.x);
        let local = continuation_points(prev).map(|p| rotate(p - start, -alpha).x);
        let problem = CorridorQp::new(local, chord.norm(), 0.5, 0.005);
        let sol = solve_corridor_qp(prev, wps[2], 0.5, 0.005).unwrap();
        let (best, _) = grid_search(&problem, 0.01).unwrap();
        assert!(sol.objective <= best + 1e-4, "{} vs {}", sol.objective, best);
        assert!(problem.min_slack(&sol.chi) >= -1e-8);
    }

    #[test]
    fn reversal_rejected() {
        let seg = straight(1.0);
        assert!(matches!(
            solve_corridor_qp(&seg, Vec2::new(0.0, 0.0), 0.5, 0.005),
            Err(PathError::Reversal { .. })
        ));
        assert!(matches!(
            solve_corridor_qp(&seg, Vec2::new(1.0, 0.0), 0.5, 0.005),
            Err(PathError::Degenerate { .. })
        ));
    }
}
