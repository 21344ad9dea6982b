//! Fold-trigger contact kinematics and the virtual-work activation model.
//!
//! The trigger is a flexure (angle `phi`) carried by tile ②. A wall at yaw
//! `psi` displaces it by `x`; its tip presses tile ③ and so ties `phi` to the
//! arm angle `theta2`. Balancing the virtual work of the wall force against
//! that of the total thrust gives the force ratio `F/T`, and integrating `F`
//! over the stroke from the flight limit to the flip point (`theta2 = 90°`)
//! gives the activation work.

use serde::{Deserialize, Serialize};

use crate::airframe::Airframe;
use crate::error::{Error, Result};
use crate::linkage::{solve_arm, solve_from, ArmState};
use crate::numeric::{bisect, central_difference, linspace, trapezoid};

/// `theta2` at which the arm flips into the folding branch (degrees).
pub const FLIP_THETA2_DEG: f64 = 90.0;
/// Finite-difference step in `theta2` (degrees).
pub const THETA2_STEP_DEG: f64 = 1e-3;
/// Yaw band in which two arms touch the wall together (degrees).
pub const DOUBLE_CONTACT_BAND: (f64, f64) = (-45.0, -40.0);
/// Nodes of the stroke quadrature in [`activation_work`].
pub const WORK_NODES: usize = 401;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriggerGeometry {
    /// Radius of the circular-arc approximation of the trigger (mm).
    pub r_mm: f64,
    /// Height of the contact on tile ③ above the theta2 hinge (mm).
    pub h_mm: f64,
    /// Distance from the contact to the trigger flexure (mm).
    pub l_mm: f64,
}

impl Default for TriggerGeometry {
    fn default() -> Self {
        TriggerGeometry { r_mm: 18.0, h_mm: 5.0, l_mm: 40.0 }
    }
}

impl TriggerGeometry {
    /// Positive lengths, and `phi` solvable down to the flip point.
    pub fn validate(&self, theta2_max: f64) -> Result<()> {
        for (name, v) in [("r", self.r_mm), ("h", self.h_mm), ("l", self.l_mm)] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("trigger {name} = {v} mm must be positive")));
            }
        }
        let reach = self.h_mm * (cot_deg(FLIP_THETA2_DEG) - cot_deg(theta2_max));
        if reach > self.l_mm {
            return Err(Error::InvalidParameter(format!(
                "trigger cannot reach the flip point: h*(cot 90° - cot theta2_max) = {reach} mm > l = {} mm",
                self.l_mm
            )));
        }
        Ok(())
    }
}

/// Contact configuration at one point of the stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactState {
    pub psi_deg: f64,
    pub phi_deg: f64,
    pub x_mm: f64,
    pub theta2_deg: f64,
}

fn cot_deg(a: f64) -> f64 {
    let r = a.to_radians();
    r.cos() / r.sin()
}

/// True when `psi` falls in the double-contact band.
pub fn is_double_contact(psi: f64) -> bool {
    psi >= DOUBLE_CONTACT_BAND.0 && psi <= DOUBLE_CONTACT_BAND.1
}

/// Maps any yaw onto the representative interval (-45°, 45°] using the
/// four-fold symmetry of the airframe.
pub fn reduce_yaw(psi: f64) -> f64 {
    let r = (psi + 45.0).rem_euclid(90.0) - 45.0;
    if r == -45.0 { 45.0 } else { r }
}

fn check_yaw(psi: f64) -> Result<()> {
    if is_double_contact(psi) {
        return Err(Error::DoubleContact { psi });
    }
    if !(psi > -45.0 && psi <= 45.0) {
        return Err(Error::InvalidParameter(format!("yaw {psi}° outside (-45°, 45°]")));
    }
    Ok(())
}

/// Wall-normal displacement of the trigger (mm) for yaw `psi` and trigger
/// rotation `phi` (degrees).
pub fn trigger_x(geom: &TriggerGeometry, psi: f64, phi: f64) -> f64 {
    let (psi, phi) = (psi.to_radians(), phi.to_radians());
    geom.r_mm * (psi.sin() - (psi - phi).sin())
}

/// `phi` without the contact check; negative above `theta2_max`.
fn phi_extended(geom: &TriggerGeometry, theta2: f64, theta2_max: f64) -> Result<f64> {
    let value = geom.h_mm * (cot_deg(theta2) - cot_deg(theta2_max)) / geom.l_mm;
    if !(-1.0..=1.0).contains(&value) {
        return Err(Error::ArgOutOfRange { value });
    }
    Ok(value.asin().to_degrees())
}

/// Trigger rotation `phi` (degrees) while its tip presses tile ③.
pub fn phi_from_theta2(geom: &TriggerGeometry, theta2: f64, theta2_max: f64) -> Result<f64> {
    if theta2 > theta2_max {
        return Err(Error::NoContact { theta2, theta2_max });
    }
    if !(theta2 > 0.0) {
        return Err(Error::InvalidParameter(format!("theta2 = {theta2}° must be positive")));
    }
    phi_extended(geom, theta2, theta2_max)
}

/// Trigger displacement (mm) reached when the arm is at `theta2`.
fn contact_x(geom: &TriggerGeometry, theta2: f64, theta2_max: f64, psi: f64) -> Result<f64> {
    Ok(trigger_x(geom, psi, phi_extended(geom, theta2, theta2_max)?))
}

/// Displacement (mm) from first contact to the flip point.
pub fn flip_stroke(geom: &TriggerGeometry, theta2_max: f64, psi: f64) -> Result<f64> {
    contact_x(geom, FLIP_THETA2_DEG, theta2_max, psi)
}

/// Arm angle `theta2` (degrees) after the wall has pushed the trigger by `x`.
pub fn theta2_from_x(geom: &TriggerGeometry, theta2_max: f64, x: f64, psi: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidParameter(format!("displacement {x} mm must be non-negative")));
    }
    if !(psi.abs() <= 45.0) {
        return Err(Error::InvalidParameter(format!("yaw {psi}° outside [-45°, 45°]")));
    }
    if x == 0.0 {
        return Ok(theta2_max);
    }
    let stroke = flip_stroke(geom, theta2_max, psi)?;
    if x > stroke {
        return Err(Error::BeyondFlip { x, stroke });
    }
    bisect(
        |t| Ok(contact_x(geom, t, theta2_max, psi)? - x),
        FLIP_THETA2_DEG,
        theta2_max,
        1e-12,
        200,
    )
}

/// Full contact state at arm angle `theta2`.
pub fn contact_state(geom: &TriggerGeometry, theta2_max: f64, theta2: f64, psi: f64) -> Result<ContactState> {
    let phi = phi_from_theta2(geom, theta2, theta2_max)?;
    Ok(ContactState {
        psi_deg: psi,
        phi_deg: phi,
        x_mm: trigger_x(geom, psi, phi),
        theta2_deg: theta2,
    })
}

fn check_stroke_domain(af: &Airframe, theta2: f64) -> Result<()> {
    let hi = af.linkage.theta2_max_deg;
    if !(theta2 >= FLIP_THETA2_DEG && theta2 <= hi) {
        return Err(Error::OutOfRange { theta2, lo: FLIP_THETA2_DEG, hi });
    }
    Ok(())
}

/// `F/T` at `theta2` given a converged arm state there (used as warm start).
///
/// `dtheta1/dx` is formed as `(dtheta1/dtheta2) / (dx/dtheta2)`, both central
/// differences in `theta2` checked under step halving. Differencing in the
/// angle keeps the step meaningful at the flight limit, where `x = 0`.
fn force_ratio_at(af: &Airframe, theta2: f64, psi: f64, state: &ArmState) -> Result<f64> {
    let h = THETA2_STEP_DEG.to_radians();
    let t2 = theta2.to_radians();
    let t2max = af.linkage.theta2_max_deg;
    let dtheta1 = central_difference(
        |t| Ok(solve_from(&af.linkage, t.to_degrees(), state)?.theta1.to_radians()),
        t2,
        h,
        1e-10,
    )?;
    let dx = central_difference(|t| contact_x(&af.trigger, t.to_degrees(), t2max, psi), t2, h, 1e-10)?;
    let p = &af.params;
    Ok(-p.d_mm * p.gamma_deg.to_radians().cos() * dtheta1.extrapolated() / dx.extrapolated())
}

/// Ratio of wall force to total thrust that balances the arm at `theta2`.
pub fn force_ratio(af: &Airframe, theta2: f64, psi: f64) -> Result<f64> {
    check_yaw(psi)?;
    check_stroke_domain(af, theta2)?;
    let state = solve_arm(&af.linkage, theta2)?;
    force_ratio_at(af, theta2, psi, &state)
}

/// Force (N) needed to start the fold from the flight configuration.
pub fn activation_force(af: &Airframe, psi: f64) -> Result<f64> {
    Ok(af.params.thrust_n * force_ratio(af, af.linkage.theta2_max_deg, psi)?)
}

/// One point along the contact stroke.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrokeSample {
    pub theta2_deg: f64,
    pub theta1_deg: f64,
    pub theta3_deg: f64,
    pub phi_deg: f64,
    pub x_mm: f64,
    pub force_ratio: f64,
}

/// Samples the stroke at the given `theta2` values (each in
/// `[90°, theta2_max]`), warm-starting each solve from the previous one.
pub fn stroke_profile(af: &Airframe, psi: f64, theta2: &[f64]) -> Result<Vec<StrokeSample>> {
    check_yaw(psi)?;
    let mut out = Vec::with_capacity(theta2.len());
    let mut state: Option<ArmState> = None;
    for &t in theta2 {
        check_stroke_domain(af, t)?;
        let s = match &state {
            Some(prev) => solve_from(&af.linkage, t, prev)?,
            None => solve_arm(&af.linkage, t)?,
        };
        let phi = phi_extended(&af.trigger, t, af.linkage.theta2_max_deg)?;
        out.push(StrokeSample {
            theta2_deg: t,
            theta1_deg: s.theta1,
            theta3_deg: s.theta3,
            phi_deg: phi,
            x_mm: trigger_x(&af.trigger, psi, phi),
            force_ratio: force_ratio_at(af, t, psi, &s)?,
        });
        state = Some(s);
    }
    Ok(out)
}

/// Activation work (mJ) by two routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationWork {
    pub psi_deg: f64,
    /// `T d cos(gamma) (theta1(theta2_max) - theta1(90°))`.
    pub closed_form_mj: f64,
    /// Trapezoidal integral of `F dx` along the stroke at `psi_deg`.
    pub integral_mj: f64,
}

impl ActivationWork {
    pub fn relative_disagreement(&self) -> f64 {
        (self.integral_mj - self.closed_form_mj).abs() / self.closed_form_mj.abs()
    }
}

pub fn activation_work_closed_form(af: &Airframe) -> Result<f64> {
    let flight = solve_arm(&af.linkage, af.linkage.theta2_max_deg)?;
    let flip = solve_arm(&af.linkage, FLIP_THETA2_DEG)?;
    let p = &af.params;
    Ok(p.thrust_n * p.d_mm * p.gamma_deg.to_radians().cos() * (flight.theta1 - flip.theta1).to_radians())
}

/// Minimum work (mJ) the wall must do to carry the arm from the flight limit
/// to the flip point.
pub fn activation_work(af: &Airframe, psi: f64) -> Result<ActivationWork> {
    check_yaw(psi)?;
    let closed_form_mj = activation_work_closed_form(af)?;
    let nodes = linspace(af.linkage.theta2_max_deg, FLIP_THETA2_DEG, WORK_NODES);
    let profile = stroke_profile(af, psi, &nodes)?;
    let xs: Vec<f64> = profile.iter().map(|s| s.x_mm).collect();
    let fs: Vec<f64> = profile.iter().map(|s| af.params.thrust_n * s.force_ratio).collect();
    Ok(ActivationWork {
        psi_deg: psi,
        closed_form_mj,
        integral_mj: trapezoid(&xs, &fs),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn trig() -> TriggerGeometry {
        TriggerGeometry::default()
    }

    /// Closed-form inverse of the two contact relations, as an oracle for the
    /// root-finding route.
    fn theta2_oracle(g: &TriggerGeometry, theta2_max: f64, x: f64, psi: f64) -> f64 {
        let psi = psi.to_radians();
        let phi = psi - (psi.sin() - x / g.r_mm).asin();
        let cot = g.l_mm * phi.sin() / g.h_mm + cot_deg(theta2_max);
        (1.0 / cot).atan().rem_euclid(std::f64::consts::PI).to_degrees()
    }

    #[test]
    fn trigger_x_hand_values() {
        assert_eq!(trigger_x(&trig(), 0.0, 0.0), 0.0);
        assert_relative_eq!(trigger_x(&trig(), 30.0, 30.0), 9.0, epsilon = 1e-12);
        assert_relative_eq!(trigger_x(&trig(), 0.0, 2.608), 0.819, epsilon = 5e-4);
        for psi in [-44.0, -10.0, 0.0, 17.0, 45.0] {
            assert_eq!(trigger_x(&trig(), psi, 0.0), 0.0);
        }
    }

    #[test]
    fn phi_hand_values() {
        assert_eq!(phi_from_theta2(&trig(), 110.0, 110.0).unwrap(), 0.0);
        assert_relative_eq!(phi_from_theta2(&trig(), 90.0, 110.0).unwrap(), 2.608, epsilon = 5e-4);
        assert_relative_eq!(phi_from_theta2(&trig(), 100.0, 110.0).unwrap(), 1.344, epsilon = 5e-4);
    }

    #[test]
    fn phi_errors() {
        assert!(matches!(phi_from_theta2(&trig(), 111.0, 110.0), Err(Error::NoContact { .. })));
        let tiny = TriggerGeometry { l_mm: 0.1, ..trig() };
        assert!(matches!(phi_from_theta2(&tiny, 20.0, 110.0), Err(Error::ArgOutOfRange { .. })));
        assert!(tiny.validate(110.0).is_err());
        assert!(trig().validate(110.0).is_ok());
    }

    #[test]
    fn phi_decreases_with_theta2() {
        let v: Vec<f64> = linspace(30.0, 110.0, 200)
            .iter()
            .map(|&t| phi_from_theta2(&trig(), t, 110.0).unwrap())
            .collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn theta2_from_x_matches_closed_form() {
        for psi in [-30.0, 0.0, 30.0, 44.0] {
            let stroke = flip_stroke(&trig(), 110.0, psi).unwrap();
            for k in 0..=10 {
                let x = stroke * k as f64 / 10.0;
                let t = theta2_from_x(&trig(), 110.0, x, psi).unwrap();
                assert_relative_eq!(t, theta2_oracle(&trig(), 110.0, x, psi), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn theta2_from_x_edges() {
        assert_eq!(theta2_from_x(&trig(), 110.0, 0.0, 10.0).unwrap(), 110.0);
        let stroke = flip_stroke(&trig(), 110.0, 0.0).unwrap();
        assert!((stroke - 0.819).abs() < 0.005);
        let t = theta2_from_x(&trig(), 110.0, stroke, 0.0).unwrap();
        assert!((t - 90.0).abs() < 1e-6, "{t}");
        assert!(matches!(theta2_from_x(&trig(), 110.0, 5.0, 0.0), Err(Error::BeyondFlip { .. })));
        assert!(theta2_from_x(&trig(), 110.0, -0.1, 0.0).is_err());
        let a = theta2_from_x(&trig(), 110.0, 0.5, 30.0).unwrap();
        let b = theta2_from_x(&trig(), 110.0, 0.5, 0.0).unwrap();
        assert!((a - b).abs() > 0.1);
    }

    #[test]
    fn yaw_reduction() {
        assert_eq!(reduce_yaw(0.0), 0.0);
        assert_eq!(reduce_yaw(90.0), 0.0);
        assert_eq!(reduce_yaw(-45.0), 45.0);
        assert_eq!(reduce_yaw(50.0), -40.0);
        assert!(is_double_contact(-42.0));
        assert!(!is_double_contact(-39.9));
    }
}
