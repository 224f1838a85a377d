//! CMM measurement processing: sphere fits on probed balls and platform
//! frames from three ball centres.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Rotation3, Vector3, Vector4};
use thiserror::Error;

use crate::geometry::{Point3, Transform3D};
use crate::par::{self, Execution};
use crate::rng;

/// Probe points on one ball are rejected if they lie within this distance
/// (mm, RMS) of a common plane.
pub const COPLANAR_TOL: f64 = 1e-9;
/// Minimum ball triangle area (mm²).
pub const MIN_TRIANGLE_AREA: f64 = 1.0;
/// Default rigid-body congruence tolerance on triangle edge lengths (mm).
pub const DEFAULT_CONGRUENCE_TOL: f64 = 0.025;
/// Default number of probe points per ball.
pub const DEFAULT_POINTS_PER_BALL: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetrologyError {
    #[error("degenerate probe points: {0}")]
    DegeneratePoints(String),
    #[error("sphere fit did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error("ball centres are collinear (triangle area {0:e} mm²)")]
    CollinearBalls(f64),
    #[error("measured ball triangle edge {edge} differs from the stored one by {discrepancy:e} mm (tolerance {tolerance:e} mm)")]
    ShapeMismatch { edge: usize, discrepancy: f64, tolerance: f64 },
}

/// Points probed on the surface of one ball, in the CMM frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbePointSet {
    points: Vec<Point3>,
    nominal_radius: Option<f64>,
}

impl ProbePointSet {
    pub fn new(points: Vec<Point3>, nominal_radius: Option<f64>) -> Result<Self, MetrologyError> {
        if points.len() < 4 {
            return Err(MetrologyError::DegeneratePoints(format!(
                "{} points, at least 4 required",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.coords.iter().all(|v| v.is_finite())) {
            return Err(MetrologyError::DegeneratePoints("non-finite coordinate".into()));
        }
        let off_plane = out_of_plane_rms(&points);
        if off_plane <= COPLANAR_TOL {
            return Err(MetrologyError::DegeneratePoints(format!(
                "points are coplanar (RMS distance to plane {off_plane:e} mm)"
            )));
        }
        Ok(Self { points, nominal_radius })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn nominal_radius(&self) -> Option<f64> {
        self.nominal_radius
    }
}

fn centroid(points: &[Point3]) -> Vector3<f64> {
    points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / points.len() as f64
}

fn out_of_plane_rms(points: &[Point3]) -> f64 {
    let c = centroid(points);
    let scatter: Matrix3<f64> = points
        .iter()
        .map(|p| {
            let d = p.coords - c;
            d * d.transpose()
        })
        .sum();
    let min_eig = scatter.symmetric_eigenvalues().min().max(0.0);
    (min_eig / points.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit {
    pub center: Point3,
    pub radius: f64,
    /// RMS of `|p - center| - radius` over the points (mm).
    pub rms_residual: f64,
    pub iterations: usize,
}

fn geometric_sse(points: &[Point3], center: &Vector3<f64>, radius: f64) -> f64 {
    points
        .iter()
        .map(|p| {
            let e = (p.coords - center).norm() - radius;
            e * e
        })
        .sum()
}

/// Least-squares sphere: algebraic fit on centred points, then Gauss-Newton
/// on the geometric distances.
pub fn fit_sphere(set: &ProbePointSet) -> Result<SphereFit, MetrologyError> {
    let pts = set.points();
    let n = pts.len();
    let c0 = centroid(pts);

    // |p|² = 2 a·p + d  on centred coordinates
    let mut a = DMatrix::zeros(n, 4);
    let mut b = DVector::zeros(n);
    for (i, p) in pts.iter().enumerate() {
        let d = p.coords - c0;
        a[(i, 0)] = 2.0 * d.x;
        a[(i, 1)] = 2.0 * d.y;
        a[(i, 2)] = 2.0 * d.z;
        a[(i, 3)] = 1.0;
        b[i] = d.norm_squared();
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| MetrologyError::DegeneratePoints(e.to_string()))?;
    let offset = Vector3::new(sol[0], sol[1], sol[2]);
    let r2 = sol[3] + offset.norm_squared();
    if !(r2 > 0.0) {
        return Err(MetrologyError::DegeneratePoints("algebraic fit gave no real radius".into()));
    }

    // refine in centred coordinates
    let local: Vec<Point3> = pts.iter().map(|p| Point3::from(p.coords - c0)).collect();
    let mut center = offset;
    let mut radius = r2.sqrt();
    let mut sse = geometric_sse(&local, &center, radius);
    let max_iter = 100;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_small_step = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for p in &local {
            let d = p.coords - center;
            let dist = d.norm();
            if dist == 0.0 {
                return Err(MetrologyError::DegeneratePoints("probe point at sphere centre".into()));
            }
            let u = d / dist;
            let row = Vector4::new(-u.x, -u.y, -u.z, -1.0);
            let e = dist - radius;
            jtj += row * row.transpose();
            jtr += row * e;
        }
        let Some(step) = jtj.cholesky().map(|c| c.solve(&jtr)) else {
            return Err(MetrologyError::DegeneratePoints("singular normal equations".into()));
        };
        let scale = radius.abs().max(1.0);
        let size = step.amax();
        if size <= 1e-9 * scale {
            // close to the optimum the residual comparison is lost in
            // rounding; take plain steps until they stop shrinking
            center -= step.fixed_rows::<3>(0);
            radius -= step[3];
            if size <= 1e-15 * scale || size >= last_small_step * 0.5 {
                sse = geometric_sse(&local, &center, radius);
                converged = true;
                break;
            }
            last_small_step = size;
            continue;
        }
        // halve until the geometric residual does not grow
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let c = center - step.fixed_rows::<3>(0) * lambda;
            let r = radius - step[3] * lambda;
            let s = geometric_sse(&local, &c, r);
            if s <= sse {
                center = c;
                radius = r;
                sse = s;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(MetrologyError::NoConvergence(max_iter));
    }
    Ok(SphereFit {
        center: Point3::from(center + c0),
        radius,
        rms_residual: (sse / n as f64).sqrt(),
        iterations,
    })
}

fn triangle_area(p: &[Point3; 3]) -> f64 {
    0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm()
}

fn check_non_collinear(p: &[Point3; 3]) -> Result<(), MetrologyError> {
    let area = triangle_area(p);
    if area > MIN_TRIANGLE_AREA {
        Ok(())
    } else {
        Err(MetrologyError::CollinearBalls(area))
    }
}

/// Ball centres expressed in the platform frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallPlateRelation {
    balls: [Point3; 3],
}

impl BallPlateRelation {
    pub fn new(balls: [Point3; 3]) -> Result<Self, MetrologyError> {
        check_non_collinear(&balls)?;
        Ok(Self { balls })
    }

    /// Equilateral triangle of side `side` centred on the platform axis at
    /// height `height` above the platform frame.
    pub fn equilateral(side: f64, height: f64) -> Result<Self, MetrologyError> {
        let r = side / 3f64.sqrt();
        let balls = std::array::from_fn(|k| {
            let a = (90.0 + 120.0 * k as f64).to_radians();
            Point3::new(r * a.cos(), r * a.sin(), height)
        });
        Self::new(balls)
    }

    pub fn balls(&self) -> &[Point3; 3] {
        &self.balls
    }

    fn edges(p: &[Point3; 3]) -> [f64; 3] {
        [(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()]
    }
}

/// Records where the balls sit in the platform frame, given their measured
/// centres and the platform frame, both in the CMM frame.
pub fn establish_relation(
    ball_centers_in_m: &[Point3; 3],
    platform_frame_in_m: &Transform3D,
) -> Result<BallPlateRelation, MetrologyError> {
    check_non_collinear(ball_centers_in_m)?;
    let inv = platform_frame_in_m.inverse();
    BallPlateRelation::new(ball_centers_in_m.map(|c| inv.apply(&c)))
}

/// Platform frame in the CMM frame from three measured ball centres, with
/// the default congruence tolerance.
pub fn frame_from_balls(relation: &BallPlateRelation, measured: &[Point3; 3]) -> Result<Transform3D, MetrologyError> {
    frame_from_balls_with_tolerance(relation, measured, DEFAULT_CONGRUENCE_TOL)
}

pub fn frame_from_balls_with_tolerance(
    relation: &BallPlateRelation,
    measured: &[Point3; 3],
    tolerance: f64,
) -> Result<Transform3D, MetrologyError> {
    check_non_collinear(measured)?;
    let stored = BallPlateRelation::edges(&relation.balls);
    let seen = BallPlateRelation::edges(measured);
    for edge in 0..3 {
        let discrepancy = (stored[edge] - seen[edge]).abs();
        if discrepancy > tolerance {
            return Err(MetrologyError::ShapeMismatch {
                edge,
                discrepancy,
                tolerance,
            });
        }
    }
    Ok(rigid_fit(&relation.balls, measured))
}

/// Least-squares rigid transform mapping `from[i]` onto `to[i]`
/// (centroid alignment, rotation from the SVD of the cross-covariance,
/// reflection excluded).
pub fn rigid_fit(from: &[Point3], to: &[Point3]) -> Transform3D {
    assert_eq!(from.len(), to.len());
    let ca = centroid(from);
    let cb = centroid(to);
    let h: Matrix3<f64> = from
        .iter()
        .zip(to)
        .map(|(a, b)| (a.coords - ca) * (b.coords - cb).transpose())
        .sum();
    let svd = h.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let r = polish_rotation(reorthonormalize(r), from, to, &ca, &cb);
    Transform3D::from_parts(r, cb - r * ca)
}

/// Gauss-Newton on the rotation alone. The SVD loses digits when two
/// singular values are close (thin triangles); this restores them.
fn polish_rotation(mut r: Matrix3<f64>, from: &[Point3], to: &[Point3], ca: &Vector3<f64>, cb: &Vector3<f64>) -> Matrix3<f64> {
    for _ in 0..2 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (a, b) in from.iter().zip(to) {
            let a = a.coords - ca;
            // residual of R exp([d]x) a - b, linearised: R a - b - R [a]x d
            let j = -(r * a.cross_matrix());
            let e = r * a - (b.coords - cb);
            jtj += j.transpose() * j;
            jtr += j.transpose() * e;
        }
        let Some(d) = jtj.cholesky().map(|c| -c.solve(&jtr)) else {
            break;
        };
        r = reorthonormalize(r * Rotation3::new(d).into_inner());
    }
    r
}

/// One Newton step toward the nearest orthonormal matrix; removes the
/// ~1e-16 drift left by the SVD.
fn reorthonormalize(r: Matrix3<f64>) -> Matrix3<f64> {
    let rtr = r.transpose() * r;
    r * (Matrix3::identity() * 1.5 - rtr * 0.5)
}

/// `n` points spread over the cap of polar angle `max_polar` (rad, measured
/// from +Z) of a sphere, on a Fibonacci spiral. `max_polar = π` covers the
/// whole sphere.
pub fn sphere_probe_pattern(center: &Point3, radius: f64, n: usize, max_polar: f64) -> Vec<Point3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let cos_min = max_polar.cos();
    (0..n)
        .map(|i| {
            // uniform in cos(polar) over [cos_min, 1]
            let t = (i as f64 + 0.5) / n as f64;
            let cz = 1.0 - t * (1.0 - cos_min);
            let sz = (1.0 - cz * cz).max(0.0).sqrt();
            let phi = golden * i as f64;
            center + Vector3::new(sz * phi.cos(), sz * phi.sin(), cz) * radius
        })
        .collect()
}

/// Centre error (mm) of sphere fits to `n_points` noisy points on a full
/// sphere, one value per draw.
pub fn monte_carlo_sphere_center_errors(
    center: &Point3,
    radius: f64,
    n_points: usize,
    sigma: f64,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<f64>, MetrologyError> {
    let pattern = sphere_probe_pattern(center, radius, n_points, std::f64::consts::PI);
    par::try_map_indexed(exec, draws, |k| {
        let mut r = rng::stream(seed, k as u64);
        let pts = pattern.iter().map(|p| p + rng::gaussian_vector(&mut r, sigma)).collect();
        let fit = fit_sphere(&ProbePointSet::new(pts, Some(radius))?)?;
        Ok((fit.center - center).norm())
    })
}

/// Translation (mm) and rotation (rad) error of [`frame_from_balls`] when
/// each measured centre carries isotropic noise of per-axis deviation
/// `sigma`, one pair per draw.
pub fn monte_carlo_frame_errors(
    relation: &BallPlateRelation,
    frame: &Transform3D,
    sigma: f64,
    draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<(f64, f64)>, MetrologyError> {
    let exact = relation.balls().map(|b| frame.apply(&b));
    par::try_map_indexed(exec, draws, |k| {
        let mut r = rng::stream(seed, k as u64);
        let noisy = exact.map(|c| c + rng::gaussian_vector(&mut r, sigma));
        let est = frame_from_balls(relation, &noisy)?;
        Ok((
            (est.translation() - frame.translation()).norm(),
            est.rotation_angle_to(frame),
        ))
    })
}
