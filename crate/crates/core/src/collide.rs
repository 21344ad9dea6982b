//! Energy-threshold prediction of fold activation in a wall collision.

use serde::{Deserialize, Serialize};

use crate::airframe::Airframe;
use crate::error::{Error, Result};
use crate::linkage::solve_arm;
use crate::trigger::{activation_work_closed_form, is_double_contact};

/// Kinetic energy (mJ) of a body of `mass_g` grams moving at `speed` m/s.
pub fn kinetic_energy(mass_g: f64, speed: f64) -> f64 {
    // g * (m/s)^2 is mJ.
    0.5 * mass_g * speed * speed
}

/// Lowest impact speed (m/s) whose kinetic energy, scaled by `efficiency`,
/// covers `required_work_mj`.
pub fn min_activation_speed(mass_g: f64, required_work_mj: f64, efficiency: f64) -> f64 {
    (2.0 * required_work_mj / (efficiency * mass_g)).sqrt()
}

/// Where the required work comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkSource {
    /// The model's minimum activation work.
    Model,
    /// A fixed value in mJ, e.g. a benchtop measurement.
    Value(f64),
}

impl WorkSource {
    pub fn resolve(&self, af: &Airframe) -> Result<f64> {
        match *self {
            WorkSource::Model => activation_work_closed_form(af),
            WorkSource::Value(w) => Ok(w),
        }
    }
}

impl std::str::FromStr for WorkSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "model" {
            return Ok(WorkSource::Model);
        }
        match s.strip_prefix("value:") {
            Some(v) => v
                .parse::<f64>()
                .map(WorkSource::Value)
                .map_err(|e| Error::Parse(format!("work source value {v:?}: {e}"))),
            None => Err(Error::Parse(format!(
                "work source must be `model` or `value:<mJ>`, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionScenario {
    /// Impact speed (m/s).
    pub speed: f64,
    /// Yaw at impact (degrees).
    pub psi_deg: f64,
    /// Fraction of kinetic energy converted into fold work.
    pub efficiency: f64,
    pub required_work_mj: f64,
}

impl CollisionScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed >= 0.0) {
            return Err(Error::InvalidParameter(format!("speed {} m/s must be non-negative", self.speed)));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "efficiency {} must lie in (0, 1]",
                self.efficiency
            )));
        }
        if !(self.required_work_mj >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "required work {} mJ must be non-negative",
                self.required_work_mj
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldState {
    Flight,
    Folded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionWarning {
    /// Two arms likely touch the wall; the single-contact model does not apply.
    DoubleContact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionOutcome {
    pub activates: bool,
    pub kinetic_energy_mj: f64,
    /// `efficiency * K - required work`.
    pub energy_margin_mj: f64,
    pub min_activation_speed: f64,
    pub final_state: FoldState,
    /// theta1 of every arm after the collision (degrees).
    pub arm_theta1_deg: Vec<f64>,
    pub warning: Option<CollisionWarning>,
}

/// Predicts whether the collision folds the airframe.
///
/// Activation is decided on speed against [`min_activation_speed`], so the
/// threshold is inclusive and consistent with that function.
pub fn collision_outcome(scenario: &CollisionScenario, af: &Airframe) -> Result<CollisionOutcome> {
    scenario.validate()?;
    let mass = af.params.mass_g;
    let k = kinetic_energy(mass, scenario.speed);
    let v_min = min_activation_speed(mass, scenario.required_work_mj, scenario.efficiency);
    let activates = scenario.speed >= v_min;
    let (final_state, theta1) = if activates {
        (FoldState::Folded, af.linkage.theta1_fold_limit_deg)
    } else {
        (FoldState::Flight, solve_arm(&af.linkage, af.linkage.theta2_max_deg)?.theta1)
    };
    Ok(CollisionOutcome {
        activates,
        kinetic_energy_mj: k,
        energy_margin_mj: scenario.efficiency * k - scenario.required_work_mj,
        min_activation_speed: v_min,
        final_state,
        arm_theta1_deg: vec![theta1; af.params.arm_count as usize],
        warning: is_double_contact(scenario.psi_deg).then_some(CollisionWarning::DoubleContact),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kinetic_energy_values() {
        assert_relative_eq!(kinetic_energy(51.2, 0.2795), 2.0, max_relative = 0.01);
        assert_eq!(kinetic_energy(51.2, 0.0), 0.0);
        assert_relative_eq!(kinetic_energy(51.2, 1.5), 57.6, epsilon = 1e-12);
    }

    #[test]
    fn min_speed_values() {
        assert_relative_eq!(min_activation_speed(51.2, 2.0, 1.0), 0.2795, max_relative = 1e-3);
        assert_eq!(min_activation_speed(51.2, 0.0, 1.0), 0.0);
        assert_relative_eq!(min_activation_speed(51.2, 0.23, 1.0), 0.0948, max_relative = 1e-3);
    }

    #[test]
    fn work_source_parsing() {
        assert_eq!("model".parse::<WorkSource>().unwrap(), WorkSource::Model);
        assert_eq!("value:2".parse::<WorkSource>().unwrap(), WorkSource::Value(2.0));
        assert!("value:x".parse::<WorkSource>().is_err());
        assert!("2".parse::<WorkSource>().is_err());
    }

    #[test]
    fn bad_scenarios_are_rejected() {
        let s = CollisionScenario { speed: 1.0, psi_deg: 0.0, efficiency: 0.0, required_work_mj: 2.0 };
        assert!(s.validate().is_err());
        let s = CollisionScenario { speed: -1.0, efficiency: 1.0, ..s };
        assert!(s.validate().is_err());
    }
}
