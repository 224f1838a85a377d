//! Inverse and forward geometric models of a 6-UPS hexapod.
//!
//! Joints are ideal points: `q_i = |R p_i + t - b_i|` with `b_i` the base
//! joint centre in frame O and `p_i` the platform joint centre in frame S.

use std::ops::{Index, Sub};

use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, Point3, Pose6};
use crate::par::{self, Execution};

/// Minimum admissible leg length (mm).
pub const MIN_LEG_LENGTH: f64 = 1e-6;
/// Minimum distance between two joints of the same body (mm).
pub const MIN_JOINT_SEPARATION: f64 = 1e-6;
/// Tolerance on equal leg lengths at the zero pose (mm).
pub const ZERO_POSE_EQUAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("degenerate geometry: leg {leg} has length {length:e} mm")]
    DegenerateGeometry { leg: usize, length: f64 },
    #[error("{body} joints {a} and {b} coincide")]
    CoincidentJoints { body: &'static str, a: usize, b: usize },
    #[error("zero-pose leg lengths differ by {spread:e} mm")]
    UnequalZeroPoseLengths { spread: f64 },
    #[error("leg length {index} is {value} mm; lengths must be positive and finite")]
    InvalidLegLength { index: usize, value: f64 },
    #[error("forward model did not converge after {iterations} iterations (residual {residual:e} mm): {reason}")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        reason: ConvergenceFailure,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergenceFailure {
    MaxIterations,
    IllConditioned(f64),
    Stalled,
}

impl std::fmt::Display for ConvergenceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConvergenceFailure::MaxIterations => write!(f, "iteration limit reached"),
            ConvergenceFailure::IllConditioned(c) => write!(f, "jacobian condition number {c:e}"),
            ConvergenceFailure::Stalled => write!(f, "line search stalled"),
        }
    }
}

/// Six leg lengths (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegLengths(pub [f64; 6]);

impl LegLengths {
    pub fn new(q: [f64; 6]) -> Result<Self, KinematicsError> {
        for (index, &value) in q.iter().enumerate() {
            if !value.is_finite() || value <= 0.0 {
                return Err(KinematicsError::InvalidLegLength { index, value });
            }
        }
        Ok(Self(q))
    }

    pub fn as_array(&self) -> &[f64; 6] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn max_abs_diff(&self, other: &LegLengths) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn to_vector(self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.0)
    }
}

impl Index<usize> for LegLengths {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Sub for LegLengths {
    type Output = [f64; 6];
    fn sub(self, rhs: Self) -> [f64; 6] {
        std::array::from_fn(|i| self.0[i] - rhs.0[i])
    }
}

/// Joint centres of the base (frame O) and platform (frame S).
#[derive(Debug, Clone, PartialEq)]
pub struct HexapodGeometry {
    base_joints: [Point3; 6],
    platform_joints: [Point3; 6],
}

impl HexapodGeometry {
    /// Validates joint separation and equal leg lengths at the zero pose.
    pub fn new(base_joints: [Point3; 6], platform_joints: [Point3; 6]) -> Result<Self, KinematicsError> {
        check_distinct("base", &base_joints)?;
        check_distinct("platform", &platform_joints)?;
        let g = Self { base_joints, platform_joints };
        let q0 = g.raw_lengths(&Pose6::zero());
        let lo = q0.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = q0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(hi - lo <= ZERO_POSE_EQUAL_TOL) {
            return Err(KinematicsError::UnequalZeroPoseLengths { spread: hi - lo });
        }
        Ok(g)
    }

    /// Three-fold symmetric hexapod whose zero pose puts the base joints
    /// below the platform frame so that every leg has length `leg_length`.
    ///
    /// Base joint pairs are centred at 0°, 120° and 240°, platform pairs at
    /// 60°, 180° and 300°; `*_half_angle` is the half-spacing of each pair
    /// (rad). Legs are numbered clockwise seen from above, starting at the
    /// base pair on +X, so legs 1/6, 2/5 and 3/4 are mirror images across
    /// the XZ plane and legs 3 and 4 sit on the −X side.
    pub fn symmetric(
        base_radius: f64,
        platform_radius: f64,
        base_half_angle: f64,
        platform_half_angle: f64,
        leg_length: f64,
    ) -> Result<Self, KinematicsError> {
        use std::f64::consts::{FRAC_PI_3, TAU};
        let (hb, hp) = (base_half_angle, platform_half_angle);
        let base_centre = |k: usize| k as f64 * 2.0 * FRAC_PI_3;
        let plat_centre = |k: usize| FRAC_PI_3 + k as f64 * 2.0 * FRAC_PI_3;
        // counter-clockwise (base angle, platform angle) per leg, then mirrored
        let ccw = [
            (base_centre(0) + hb, plat_centre(0) - hp),
            (base_centre(1) - hb, plat_centre(0) + hp),
            (base_centre(1) + hb, plat_centre(1) - hp),
            (base_centre(2) - hb, plat_centre(1) + hp),
            (base_centre(2) + hb, plat_centre(2) - hp),
            (TAU - hb, plat_centre(2) + hp),
        ];
        let mut base = [Point3::origin(); 6];
        let mut plat = [Point3::origin(); 6];
        for (leg, (ba, pa)) in ccw.iter().enumerate() {
            let (ba, pa) = (-ba, -pa);
            base[leg] = Point3::new(base_radius * ba.cos(), base_radius * ba.sin(), 0.0);
            plat[leg] = Point3::new(platform_radius * pa.cos(), platform_radius * pa.sin(), 0.0);
        }
        let d = (plat[0] - base[0]).norm();
        if !(leg_length > d) {
            return Err(KinematicsError::DegenerateGeometry { leg: 0, length: leg_length });
        }
        let height = (leg_length * leg_length - d * d).sqrt();
        for b in base.iter_mut() {
            b.z = -height;
        }
        Self::new(base, plat)
    }

    /// The documented default stand-in machine: base radius 250 mm,
    /// platform radius 150 mm, 15° pair half-angles, 500 mm legs at zero pose.
    pub fn default_synthetic() -> Self {
        Self::symmetric(250.0, 150.0, 15f64.to_radians(), 15f64.to_radians(), 500.0)
            .expect("default geometry is valid")
    }

    pub fn base_joints(&self) -> &[Point3; 6] {
        &self.base_joints
    }

    pub fn platform_joints(&self) -> &[Point3; 6] {
        &self.platform_joints
    }

    /// Returns a copy with every base joint shifted by `offset`.
    pub fn with_base_offset(&self, offset: Vector3<f64>) -> Self {
        let mut g = self.clone();
        for b in g.base_joints.iter_mut() {
            *b += offset;
        }
        g
    }

    fn leg_vectors(&self, pose: &Pose6) -> ([Vector3<f64>; 6], [Vector3<f64>; 6]) {
        let r = pose.rotation();
        let t = pose.translation();
        let mut legs = [Vector3::zeros(); 6];
        let mut arms = [Vector3::zeros(); 6];
        for i in 0..6 {
            arms[i] = r * self.platform_joints[i].coords;
            legs[i] = arms[i] + t - self.base_joints[i].coords;
        }
        (legs, arms)
    }

    fn raw_lengths(&self, pose: &Pose6) -> [f64; 6] {
        let (legs, _) = self.leg_vectors(pose);
        legs.map(|l| l.norm())
    }
}

fn check_distinct(body: &'static str, joints: &[Point3; 6]) -> Result<(), KinematicsError> {
    for a in 0..6 {
        if !joints[a].coords.iter().all(|v| v.is_finite()) {
            return Err(KinematicsError::CoincidentJoints { body, a, b: a });
        }
        for b in a + 1..6 {
            if (joints[a] - joints[b]).norm() <= MIN_JOINT_SEPARATION {
                return Err(KinematicsError::CoincidentJoints { body, a, b });
            }
        }
    }
    Ok(())
}

/// Inverse geometric model: pose to leg lengths.
pub fn igm(geom: &HexapodGeometry, pose: &Pose6) -> Result<LegLengths, KinematicsError> {
    pose.validate()?;
    let q = geom.raw_lengths(pose);
    for (leg, &length) in q.iter().enumerate() {
        if length < MIN_LEG_LENGTH {
            return Err(KinematicsError::DegenerateGeometry { leg, length });
        }
    }
    Ok(LegLengths(q))
}

/// `∂q_i / ∂pose_j` with pose components ordered `tx ty tz rx ry rz`.
///
/// Each row is the unit leg vector `n_i` followed by the moment
/// `(R p_i) × n_i`, mapped from angular velocity to Euler-angle rates.
pub fn leg_jacobian(geom: &HexapodGeometry, pose: &Pose6) -> Result<Matrix6<f64>, KinematicsError> {
    let q = igm(geom, pose)?;
    let (legs, arms) = geom.leg_vectors(pose);
    let rates = pose.angular_velocity_map();
    let mut jac = Matrix6::zeros();
    for i in 0..6 {
        let n = legs[i] / q[i];
        let moment = arms[i].cross(&n);
        let rot = rates.transpose() * moment;
        for j in 0..3 {
            jac[(i, j)] = n[j];
            jac[(i, 3 + j)] = rot[j];
        }
    }
    Ok(jac)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FgmOptions {
    pub max_iter: usize,
    /// Required `‖igm(pose) − q‖∞` (mm).
    pub tolerance: f64,
    /// Jacobian condition numbers above this abort the solve.
    pub max_condition: f64,
}

impl Default for FgmOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tolerance: 1e-9,
            max_condition: 1e12,
        }
    }
}

/// Forward geometric model with default options.
pub fn fgm(geom: &HexapodGeometry, q_target: &LegLengths, initial_guess: &Pose6) -> Result<Pose6, KinematicsError> {
    fgm_with(geom, q_target, initial_guess, &FgmOptions::default())
}

/// Damped Newton on `igm(pose) − q_target` with step halving.
///
/// Once the residual is inside `tolerance` the iteration keeps polishing
/// until it stops improving, so results sit at round-off level.
pub fn fgm_with(
    geom: &HexapodGeometry,
    q_target: &LegLengths,
    initial_guess: &Pose6,
    opts: &FgmOptions,
) -> Result<Pose6, KinematicsError> {
    initial_guess.validate()?;
    let target = q_target.to_vector();
    let residual_of = |x: &Vector6<f64>| -> Result<(Vector6<f64>, f64), KinematicsError> {
        let q = igm(geom, &Pose6::from_array((*x).into()))?;
        let r = q.to_vector() - target;
        Ok((r, r.amax()))
    };

    let mut x = Vector6::from(initial_guess.to_array());
    let (mut r, mut rn) = residual_of(&x)?;
    // round-off floor for the residual
    let floor = 4.0 * f64::EPSILON * target.amax();

    for iter in 0..opts.max_iter {
        if rn <= floor {
            return Ok(Pose6::from_array(x.into()));
        }
        let pose = Pose6::from_array(x.into());
        let jac = leg_jacobian(geom, &pose)?;
        let sv = jac.singular_values();
        let cond = sv.max() / sv.min();
        if !cond.is_finite() || cond > opts.max_condition {
            return Err(KinematicsError::NoConvergence {
                iterations: iter,
                residual: rn,
                reason: ConvergenceFailure::IllConditioned(cond),
            });
        }
        let step = match jac.lu().solve(&r) {
            Some(s) => s,
            None => {
                return Err(KinematicsError::NoConvergence {
                    iterations: iter,
                    residual: rn,
                    reason: ConvergenceFailure::IllConditioned(f64::INFINITY),
                })
            }
        };

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = x - step * lambda;
            match residual_of(&cand) {
                Ok((rc, rcn)) if rcn < rn => {
                    accepted = Some((cand, rc, rcn));
                    break;
                }
                _ => lambda *= 0.5,
            }
        }
        match accepted {
            Some((cand, rc, rcn)) => {
                x = cand;
                r = rc;
                rn = rcn;
            }
            None if rn < opts.tolerance => return Ok(Pose6::from_array(x.into())),
            None => {
                return Err(KinematicsError::NoConvergence {
                    iterations: iter,
                    residual: rn,
                    reason: ConvergenceFailure::Stalled,
                })
            }
        }
    }
    if rn < opts.tolerance {
        Ok(Pose6::from_array(x.into()))
    } else {
        Err(KinematicsError::NoConvergence {
            iterations: opts.max_iter,
            residual: rn,
            reason: ConvergenceFailure::MaxIterations,
        })
    }
}

/// IGM over a batch of poses.
pub fn igm_batch(geom: &HexapodGeometry, poses: &[Pose6], exec: Execution) -> Vec<Result<LegLengths, KinematicsError>> {
    par::map_slice(exec, poses, |p| igm(geom, p))
}

/// For each pose: IGM, then FGM from `guess`; returns the recovered poses.
pub fn roundtrip_batch(
    geom: &HexapodGeometry,
    poses: &[Pose6],
    guess: &Pose6,
    exec: Execution,
) -> Vec<Result<Pose6, KinematicsError>> {
    par::map_slice(exec, poses, |p| {
        let q = igm(geom, p)?;
        fgm(geom, &q, guess)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spread(q: &LegLengths) -> f64 {
        let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    #[test]
    fn default_geometry_zero_pose_legs_are_500mm() {
        let g = HexapodGeometry::default_synthetic();
        let q = igm(&g, &Pose6::zero()).unwrap();
        for &l in q.iter() {
            assert_abs_diff_eq!(l, 500.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn lowering_platform_shortens_all_legs_equally() {
        let g = HexapodGeometry::default_synthetic();
        let q0 = igm(&g, &Pose6::zero()).unwrap();
        let q = igm(&g, &Pose6::new(0.0, 0.0, -40.0, 0.0, 0.0, 0.0)).unwrap();
        assert!(spread(&q) < 1e-9);
        // direct distance per leg
        for i in 0..6 {
            let b = g.base_joints()[i];
            let p = g.platform_joints()[i] + Vector3::new(0.0, 0.0, -40.0);
            assert_abs_diff_eq!(q[i], (p - b).norm(), epsilon = 1e-12);
            assert!(q[i] < q0[i]);
        }
    }

    #[test]
    fn collinear_single_leg() {
        // platform joints coincide with base joints; lift by 500 mm
        let pts: [Point3; 6] = std::array::from_fn(|i| {
            let a = i as f64;
            if i == 0 {
                Point3::origin()
            } else {
                Point3::new(100.0 * a.cos(), 100.0 * a.sin(), 0.0)
            }
        });
        let g = HexapodGeometry::new(pts, pts).unwrap();
        let q = igm(&g, &Pose6::new(0.0, 0.0, 500.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(q[0], 500.0);
        assert!(matches!(
            igm(&g, &Pose6::zero()),
            Err(KinematicsError::DegenerateGeometry { .. })
        ));
    }

    #[test]
    fn coincident_joints_rejected() {
        let g = HexapodGeometry::default_synthetic();
        let mut base = *g.base_joints();
        base[3] = base[1];
        assert!(matches!(
            HexapodGeometry::new(base, *g.platform_joints()),
            Err(KinematicsError::CoincidentJoints { body: "base", a: 1, b: 3 })
        ));
    }

    #[test]
    fn unequal_zero_pose_rejected() {
        let g = HexapodGeometry::default_synthetic();
        let mut base = *g.base_joints();
        base[2].z -= 1e-6;
        assert!(matches!(
            HexapodGeometry::new(base, *g.platform_joints()),
            Err(KinematicsError::UnequalZeroPoseLengths { .. })
        ));
    }

    #[test]
    fn invalid_leg_lengths() {
        assert!(LegLengths::new([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).is_ok());
        assert!(matches!(
            LegLengths::new([1.0, 2.0, -3.0, 4.0, 5.0, 6.0]),
            Err(KinematicsError::InvalidLegLength { index: 2, .. })
        ));
        assert!(LegLengths::new([1.0, 2.0, 3.0, f64::NAN, 5.0, 6.0]).is_err());
    }

    #[test]
    fn jacobian_rows_have_unit_translational_part() {
        let g = HexapodGeometry::default_synthetic();
        let j = leg_jacobian(&g, &Pose6::new(3.0, -2.0, 5.0, 0.01, -0.02, 0.03)).unwrap();
        for i in 0..6 {
            let n = Vector3::new(j[(i, 0)], j[(i, 1)], j[(i, 2)]);
            assert_abs_diff_eq!(n.norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn jacobian_tz_column_uniform_at_zero_pose() {
        let g = HexapodGeometry::default_synthetic();
        let j = leg_jacobian(&g, &Pose6::zero()).unwrap();
        for i in 1..6 {
            assert_abs_diff_eq!(j[(i, 2)], j[(0, 2)], epsilon = 1e-15);
        }
    }

    #[test]
    fn fgm_recovers_zero_pose_from_perturbed_guess() {
        let g = HexapodGeometry::default_synthetic();
        let q = igm(&g, &Pose6::zero()).unwrap();
        let guess = Pose6::new(0.1, 0.1, 0.1, 1e-3, 1e-3, 1e-3);
        let p = fgm(&g, &q, &guess).unwrap();
        assert!(p.max_abs_translation() < 1e-9);
        assert!(p.max_abs_rotation() < 1e-11);
    }

    #[test]
    fn fgm_reports_singular_configuration() {
        // planar hexapod at zero height: every leg horizontal, no tz authority
        let g = HexapodGeometry::default_synthetic();
        let flat = g.with_base_offset(Vector3::new(0.0, 0.0, -g.base_joints()[0].z));
        let q = igm(&flat, &Pose6::new(0.0, 0.0, 1e-3, 0.0, 0.0, 0.0)).unwrap();
        let err = fgm(&flat, &q, &Pose6::zero()).unwrap_err();
        assert!(matches!(
            err,
            KinematicsError::NoConvergence {
                reason: ConvergenceFailure::IllConditioned(_),
                ..
            }
        ));
    }

    #[test]
    fn fgm_iteration_limit() {
        let g = HexapodGeometry::default_synthetic();
        let q = igm(&g, &Pose6::new(10.0, -5.0, 3.0, 0.02, 0.01, -0.03)).unwrap();
        let opts = FgmOptions {
            max_iter: 1,
            ..FgmOptions::default()
        };
        assert!(matches!(
            fgm_with(&g, &q, &Pose6::zero(), &opts),
            Err(KinematicsError::NoConvergence {
                reason: ConvergenceFailure::MaxIterations,
                ..
            })
        ));
    }
}
