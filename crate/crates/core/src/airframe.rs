use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linkage::{calibrate, CalibrationLimits, CouplerGeometry, LinkageGeometry, RobotParams, DEFAULT_ANCHORS};
use crate::trigger::TriggerGeometry;

/// All geometry and robot constants needed to evaluate the fold model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Airframe {
    pub linkage: LinkageGeometry,
    pub trigger: TriggerGeometry,
    pub coupler: CouplerGeometry,
    pub params: RobotParams,
}

impl Airframe {
    pub fn new(
        linkage: LinkageGeometry,
        trigger: TriggerGeometry,
        coupler: CouplerGeometry,
        params: RobotParams,
    ) -> Result<Self> {
        let a = Airframe { linkage, trigger, coupler, params };
        a.validate()?;
        Ok(a)
    }

    /// Default constants with the linkage calibrated to the default anchors.
    pub fn reference() -> Result<Self> {
        let linkage = calibrate(&DEFAULT_ANCHORS, &CalibrationLimits::default())?;
        Airframe::new(
            linkage,
            TriggerGeometry::default(),
            CouplerGeometry::default(),
            RobotParams::default(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.linkage.validate()?;
        self.coupler.validate()?;
        self.params.validate()?;
        self.trigger.validate(self.linkage.theta2_max_deg)
    }

    /// Copy with every linear dimension multiplied by `s`.
    ///
    /// Angles, thrust and mass are untouched; see
    /// [`crate::design::scale_design`] for the mass and thrust laws.
    pub fn scaled_lengths(&self, s: f64) -> Self {
        let mut a = *self;
        a.trigger.r_mm *= s;
        a.trigger.h_mm *= s;
        a.trigger.l_mm *= s;
        a.params.d_mm *= s;
        a
    }
}
