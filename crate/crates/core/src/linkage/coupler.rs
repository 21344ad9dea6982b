//! The fold coupler on tile ④.
//!
//! The trimmed top edge of tile ④ makes the taper angle with the theta4
//! hinge, so as the tile turns about that hinge the edge sweeps a cone whose
//! axis is the hinge and whose apex is the airframe centre. Seen from above,
//! the edge stays radial and its azimuth relative to the hinge is
//! `atan(tan(taper) * cos(theta4))`.

use serde::{Deserialize, Serialize};

use super::{solve_arm, LinkageGeometry};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerGeometry {
    pub taper_deg: f64,
}

impl Default for CouplerGeometry {
    fn default() -> Self {
        CouplerGeometry { taper_deg: 13.0 }
    }
}

impl CouplerGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.taper_deg > 0.0 && self.taper_deg < 90.0) {
            return Err(Error::InvalidParameter(format!(
                "coupler taper {}° must lie in (0°, 90°)",
                self.taper_deg
            )));
        }
        Ok(())
    }

    fn edge_azimuth_deg(&self, theta4: f64) -> f64 {
        (self.taper_deg.to_radians().tan() * theta4.to_radians().cos())
            .atan()
            .to_degrees()
    }
}

/// Top-view rotation (degrees) of the coupler edge at `theta4`, measured from
/// the flight configuration `theta4 = theta2_max`.
pub fn coupler_rotation(geom: &LinkageGeometry, coupler: &CouplerGeometry, theta4: f64) -> Result<f64> {
    coupler.validate()?;
    // Confirms theta4 lies on the branch; theta4 == theta2 by symmetry.
    solve_arm(geom, theta4)?;
    Ok(coupler.edge_azimuth_deg(theta4) - coupler.edge_azimuth_deg(geom.theta2_max_deg))
}
