//! Closed-loop kinematics of one foldable arm.
//!
//! Each arm is four rigid tiles joined by four flexural hinges whose axes
//! meet at a single point, i.e. a spherical 4R loop (equivalently a
//! non-developable degree-4 origami vertex). Tile `i` spans the angle `a_i`
//! between the hinge axes on its two edges; tiles ① and ② share hinge 1 and
//! tiles ③ and ④ share hinge 3. Kite symmetry (`a1 = a2`, `a3 = a4`) is stored
//! structurally as two link angles, which makes `theta2 == theta4`.
//!
//! Starting on tile ① with hinge 1 along `x` and the tile plane as `xy`, the
//! loop product is
//!
//! ```text
//! Rx(z1) Rz(a2) Rx(z2) Rz(a3) Rx(z3) Rz(a4) Rx(z4) Rz(a1) = I
//! ```
//!
//! where `z_i = theta_i + offset_i` is the fold angle about hinge `i`; with
//! zero offsets a joint angle is zero when its two tiles are co-planar.

mod calibrate;
mod coupler;

pub use calibrate::{calibrate, Anchor, CalibrationLimits, DEFAULT_ANCHORS};
pub use coupler::{coupler_rotation, CouplerGeometry};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, linspace, normalize_deg};

/// Closure residual accepted for a solved state (radians).
pub const CLOSURE_TOLERANCE: f64 = 1e-9;
/// Iteration cap for one Gauss-Newton solve.
pub const MAX_ITERATIONS: usize = 100;
/// Largest continuation step when walking to a target `theta2` (degrees).
const CONTINUATION_STEP_DEG: f64 = 5.0;
/// Largest joint update per iteration (radians).
const MAX_STEP_RAD: f64 = 0.35;
/// Configuration from which every standalone solve is continued.
const REFERENCE_THETA2_DEG: f64 = 90.0;

/// Assembly branch of the loop.
///
/// `Flight` contains the flight configuration. `Mirrored` is the same loop
/// with every joint angle negated (a half-turn about the vertex normal maps
/// one onto the other); it accepts negative `theta2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    Flight,
    Mirrored,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Flight => 1.0,
            Branch::Mirrored => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkageGeometry {
    /// Link angle of tiles ① and ② (degrees).
    pub a12_deg: f64,
    /// Link angle of tiles ③ and ④ (degrees).
    pub a34_deg: f64,
    /// Zero offsets of the four joints (degrees); offsets 2 and 4 must match.
    pub joint_offsets_deg: [f64; 4],
    pub theta2_max_deg: f64,
    pub theta1_fold_limit_deg: f64,
    pub branch: Branch,
}

impl LinkageGeometry {
    pub const DEFAULT_THETA2_MAX_DEG: f64 = 110.0;
    pub const DEFAULT_THETA1_FOLD_LIMIT_DEG: f64 = 70.0;

    pub fn new(a12_deg: f64, a34_deg: f64) -> Result<Self> {
        let geom = LinkageGeometry {
            a12_deg,
            a34_deg,
            joint_offsets_deg: [0.0; 4],
            theta2_max_deg: Self::DEFAULT_THETA2_MAX_DEG,
            theta1_fold_limit_deg: Self::DEFAULT_THETA1_FOLD_LIMIT_DEG,
            branch: Branch::Flight,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// The four link angles `[a1, a2, a3, a4]` in degrees.
    pub fn link_angles(&self) -> [f64; 4] {
        [self.a12_deg, self.a12_deg, self.a34_deg, self.a34_deg]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in [("a12", self.a12_deg), ("a34", self.a34_deg)] {
            if !(a > 0.0 && a < 180.0) {
                return Err(Error::InvalidParameter(format!(
                    "link angle {name} = {a}° must lie in (0°, 180°)"
                )));
            }
        }
        if self.joint_offsets_deg[1] != self.joint_offsets_deg[3] {
            return Err(Error::InvalidParameter(
                "joint offsets 2 and 4 must be equal to keep theta2 == theta4".into(),
            ));
        }
        if !(self.theta2_max_deg > 90.0 && self.theta2_max_deg < 180.0) {
            return Err(Error::InvalidParameter(format!(
                "theta2_max = {}° must lie in (90°, 180°)",
                self.theta2_max_deg
            )));
        }
        if !(self.theta1_fold_limit_deg > 0.0 && self.theta1_fold_limit_deg < 180.0) {
            return Err(Error::InvalidParameter(format!(
                "theta1 fold limit = {}° must lie in (0°, 180°)",
                self.theta1_fold_limit_deg
            )));
        }
        Ok(())
    }

    pub fn with_branch(mut self, branch: Branch) -> Self {
        self.branch = branch;
        self
    }

    fn loop_angles_rad(&self, state: &ArmState) -> [f64; 4] {
        let t = state.angles();
        let o = self.joint_offsets_deg;
        [
            (t[0] + o[0]).to_radians(),
            (t[1] + o[1]).to_radians(),
            (t[2] + o[2]).to_radians(),
            (t[3] + o[3]).to_radians(),
        ]
    }
}

/// A joint-angle tuple (degrees) for one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub theta4: f64,
}

impl ArmState {
    pub fn new(theta1: f64, theta2: f64, theta3: f64, theta4: f64) -> Self {
        ArmState { theta1, theta2, theta3, theta4 }
    }

    pub fn angles(&self) -> [f64; 4] {
        [self.theta1, self.theta2, self.theta3, self.theta4]
    }

    fn from_angles(a: [f64; 4]) -> Self {
        ArmState::new(a[0], a[1], a[2], a[3])
    }

    /// The state seen through the kite's mirror plane (hinges 2 and 4 swap).
    pub fn mirrored(&self) -> Self {
        ArmState::new(self.theta1, self.theta4, self.theta3, self.theta2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotParams {
    /// Distance of the thrust point from the theta1 axis (mm).
    pub d_mm: f64,
    /// Elevation of the thrust point above tile ② (degrees).
    pub gamma_deg: f64,
    /// Total thrust of all propellers (N).
    pub thrust_n: f64,
    pub mass_g: f64,
    pub arm_count: u32,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            d_mm: 40.0,
            gamma_deg: 10.0,
            thrust_n: 0.52,
            mass_g: 51.2,
            arm_count: 4,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_mm > 0.0) {
            return Err(Error::InvalidParameter(format!("d = {} mm must be positive", self.d_mm)));
        }
        if !(self.gamma_deg >= 0.0 && self.gamma_deg < 90.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {}° must lie in [0°, 90°)",
                self.gamma_deg
            )));
        }
        if !(self.thrust_n > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "thrust = {} N must be positive",
                self.thrust_n
            )));
        }
        if !(self.mass_g > 0.0) {
            return Err(Error::InvalidParameter(format!("mass = {} g must be positive", self.mass_g)));
        }
        if self.arm_count == 0 {
            return Err(Error::InvalidParameter("arm count must be positive".into()));
        }
        Ok(())
    }
}

fn rot_x(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_z(t: f64) -> Matrix3<f64> {
    let (s, c) = t.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation vector of `m`, accurate near the identity.
fn rotation_log(m: &Matrix3<f64>) -> Vector3<f64> {
    let v = 0.5 * Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = v.norm();
    let cos = 0.5 * (m.trace() - 1.0);
    let angle = sin.atan2(cos);
    if sin < 1e-300 {
        if cos > 0.0 {
            return Vector3::zeros();
        }
        // Half-turn: recover the axis from the symmetric part.
        let b = 0.5 * (m + Matrix3::identity());
        let col = (0..3)
            .map(|i| b.column(i).into_owned())
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .unwrap();
        return col.normalize() * std::f64::consts::PI;
    }
    v * (angle / sin)
}

/// Loop product and the base-frame direction of each hinge axis.
fn loop_product(a12: f64, a34: f64, z: [f64; 4]) -> (Matrix3<f64>, [Vector3<f64>; 4]) {
    let ex = Vector3::x();
    let links = [a12, a34, a34, a12];
    let mut acc = Matrix3::identity();
    let mut axes = [Vector3::zeros(); 4];
    for i in 0..4 {
        axes[i] = acc * ex;
        acc = acc * rot_x(z[i]) * rot_z(links[i]);
    }
    (acc, axes)
}

/// Rotation-vector components (radians) of the loop product; zero iff the
/// loop closes at `state`.
pub fn closure_residual(geom: &LinkageGeometry, state: &ArmState) -> [f64; 3] {
    let z = geom.loop_angles_rad(state);
    let (m, _) = loop_product(geom.a12_deg.to_radians(), geom.a34_deg.to_radians(), z);
    let r = rotation_log(&m);
    [r.x, r.y, r.z]
}

pub fn closure_residual_norm(geom: &LinkageGeometry, state: &ArmState) -> f64 {
    let [x, y, z] = closure_residual(geom, state);
    (x * x + y * y + z * z).sqrt()
}

/// Damped Gauss-Newton on the joints listed in `free`, holding the others.
///
/// `state` supplies the fixed angles and the initial guess. The Jacobian
/// column of hinge `i` is its axis in the base frame, which is the exact
/// derivative of the rotation vector at closure. Iterates past
/// [`CLOSURE_TOLERANCE`] until the residual stops improving so that finite
/// differences taken on the output are not dominated by solver error.
pub fn close_loop(geom: &LinkageGeometry, state: ArmState, free: &[usize]) -> Result<ArmState> {
    let a12 = geom.a12_deg.to_radians();
    let a34 = geom.a34_deg.to_radians();
    let mut z = geom.loop_angles_rad(&state);

    let eval = |z: &[f64; 4]| {
        let (m, axes) = loop_product(a12, a34, *z);
        (rotation_log(&m), axes)
    };

    let (mut r, mut axes) = eval(&z);
    let mut norm = r.norm();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        if norm < 1e-15 {
            break;
        }
        iterations += 1;
        let jac = DMatrix::from_fn(3, free.len(), |row, col| axes[free[col]][row]);
        let rhs = DVector::from_iterator(3, r.iter().map(|v| -v));
        let svd = jac.svd(true, true);
        let Ok(mut delta) = svd.solve(&rhs, 1e-12) else {
            break;
        };
        let step_norm = delta.amax();
        if step_norm > MAX_STEP_RAD {
            delta *= MAX_STEP_RAD / step_norm;
        }

        // Backtrack until the residual decreases.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let mut trial = z;
            for (k, &j) in free.iter().enumerate() {
                trial[j] += scale * delta[k];
            }
            let (tr, ta) = eval(&trial);
            let tn = tr.norm();
            if tn < norm {
                z = trial;
                r = tr;
                axes = ta;
                norm = tn;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted || scale * delta.amax() < 1e-16 {
            break;
        }
    }

    if !(norm <= CLOSURE_TOLERANCE) {
        return Err(Error::NoConvergence { residual: norm, iterations });
    }
    let o = geom.joint_offsets_deg;
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = normalize_deg(z[i].to_degrees() - o[i]);
    }
    Ok(ArmState::from_angles(out))
}

/// Closes the loop at `theta2 = theta4` starting from `seed`'s theta1/theta3,
/// without joint-limit checks.
pub(crate) fn solve_from(geom: &LinkageGeometry, theta2: f64, seed: &ArmState) -> Result<ArmState> {
    let guess = ArmState::new(seed.theta1, theta2, seed.theta3, theta2);
    let mut s = close_loop(geom, guess, &[0, 2])?;
    // Exact by construction; undo the rounding of the degree round trip.
    s.theta2 = theta2;
    s.theta4 = theta2;
    Ok(s)
}

/// Continuation from the branch reference configuration to `theta2`, without
/// joint-limit checks.
pub(crate) fn solve_unchecked(geom: &LinkageGeometry, theta2: f64) -> Result<ArmState> {
    let start = geom.branch.sign() * REFERENCE_THETA2_DEG;
    let mut state = solve_from(geom, start, &ArmState::new(0.0, start, 0.0, start))?;
    let span = theta2 - start;
    let steps = (span.abs() / CONTINUATION_STEP_DEG).ceil().max(1.0) as usize;
    for k in 1..=steps {
        let t = if k == steps { theta2 } else { start + span * k as f64 / steps as f64 };
        state = solve_from(geom, t, &state)?;
    }
    Ok(state)
}

/// Domain of `theta2` on the geometry's branch: `[fold state, theta2_max]`
/// (negated on the mirrored branch).
pub fn branch_domain(geom: &LinkageGeometry) -> Result<(f64, f64)> {
    let lo = fold_theta2(geom)?;
    let hi = geom.theta2_max_deg;
    Ok(match geom.branch {
        Branch::Flight => (lo, hi),
        Branch::Mirrored => (-hi, -lo),
    })
}

fn out_of_range(geom: &LinkageGeometry, theta2: f64) -> Error {
    let (lo, hi) = branch_domain(geom).unwrap_or(match geom.branch {
        Branch::Flight => (f64::NAN, geom.theta2_max_deg),
        Branch::Mirrored => (-geom.theta2_max_deg, f64::NAN),
    });
    Error::OutOfRange { theta2, lo, hi }
}

/// Solves the arm at `theta2` (degrees) on the geometry's branch.
pub fn solve_arm(geom: &LinkageGeometry, theta2: f64) -> Result<ArmState> {
    let sign = geom.branch.sign();
    let t = sign * theta2;
    if !(t > 0.0 && t <= geom.theta2_max_deg) {
        return Err(out_of_range(geom, theta2));
    }
    let state = solve_unchecked(geom, theta2)?;
    if sign * state.theta1 > geom.theta1_fold_limit_deg + 1e-9 {
        return Err(out_of_range(geom, theta2));
    }
    Ok(state)
}

/// `theta2` at which theta1 reaches its fold limit (the folded state).
///
/// Reported for the flight branch; the mirrored branch domain is its negation.
pub fn fold_theta2(geom: &LinkageGeometry) -> Result<f64> {
    let g = geom.with_branch(Branch::Flight);
    let limit = g.theta1_fold_limit_deg;
    let mut prev = solve_unchecked(&g, REFERENCE_THETA2_DEG)?;
    if prev.theta1 >= limit {
        return Err(Error::InvalidParameter(format!(
            "theta1 = {}° at theta2 = 90° already exceeds the fold limit",
            prev.theta1
        )));
    }
    let mut t_prev = REFERENCE_THETA2_DEG;
    let step = 2.0;
    while t_prev - step > 0.0 {
        let t = t_prev - step;
        let cur = solve_from(&g, t, &prev)?;
        if cur.theta1 >= limit {
            let seed = prev;
            return bisect(
                |x| Ok(solve_from(&g, x, &seed)?.theta1 - limit),
                t,
                t_prev,
                1e-10,
                200,
            );
        }
        prev = cur;
        t_prev = t;
    }
    Err(Error::InvalidParameter(format!(
        "theta1 never reaches the fold limit {limit}° for theta2 in (0°, 90°]"
    )))
}

/// One row of the joint curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointSample {
    pub theta2_deg: f64,
    pub theta1_deg: f64,
    pub theta3_deg: f64,
}

/// `n` evenly spaced solves from `lo` to `hi`, each warm-started from the
/// previous one.
pub fn joint_curve(geom: &LinkageGeometry, lo: f64, hi: f64, n: usize) -> Result<Vec<JointSample>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("joint curve needs n >= 2, got {n}")));
    }
    let grid = linspace(lo, hi, n);
    let mut out = Vec::with_capacity(n);
    let mut state = solve_arm(geom, grid[0])?;
    for &t in &grid {
        let sign = geom.branch.sign();
        if !(sign * t > 0.0 && sign * t <= geom.theta2_max_deg) {
            return Err(out_of_range(geom, t));
        }
        state = solve_from(geom, t, &state)?;
        if sign * state.theta1 > geom.theta1_fold_limit_deg + 1e-9 {
            return Err(out_of_range(geom, t));
        }
        out.push(JointSample {
            theta2_deg: t,
            theta1_deg: state.theta1,
            theta3_deg: state.theta3,
        });
    }
    Ok(out)
}

/// Writes a joint curve as CSV with header `theta2_deg,theta1_deg,theta3_deg`.
pub fn joint_curve_csv(rows: &[JointSample]) -> String {
    let mut s = String::from("theta2_deg,theta1_deg,theta3_deg\n");
    for r in rows {
        s.push_str(&format!("{:.9},{:.9},{:.9}\n", r.theta2_deg, r.theta1_deg, r.theta3_deg));
    }
    s
}

/// Thrust point in the ground frame (mm): hinge 1 is the `x` axis, tile ①
/// lies in the `xy` plane and `z` is its normal.
pub fn motor_position(geom: &LinkageGeometry, params: &RobotParams, theta2: f64) -> Result<[f64; 3]> {
    let state = solve_arm(geom, theta2)?;
    Ok(motor_position_at(params, state.theta1))
}

pub(crate) fn motor_position_at(params: &RobotParams, theta1: f64) -> [f64; 3] {
    let elevation = (theta1 + params.gamma_deg).to_radians();
    [0.0, params.d_mm * elevation.cos(), params.d_mm * elevation.sin()]
}
