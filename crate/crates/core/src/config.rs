//! Geometry and robot constants loaded from a TOML key-value file.
//!
//! Any key may be omitted and falls back to the reference value. When either
//! link angle is missing the linkage is calibrated from the anchors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::airframe::Airframe;
use crate::error::{Error, Result};
use crate::linkage::{calibrate, Anchor, CalibrationLimits, CouplerGeometry, LinkageGeometry, RobotParams, DEFAULT_ANCHORS};
use crate::trigger::TriggerGeometry;

/// Environment variable naming a config file when `--config` is not given.
pub const CONFIG_ENV: &str = "FOLDFRAME_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirframeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_angle_a12_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_angle_a34_deg: Option<f64>,
    pub joint_offset_1_deg: f64,
    pub joint_offset_2_deg: f64,
    pub joint_offset_3_deg: f64,
    pub joint_offset_4_deg: f64,
    pub theta2_max_deg: f64,
    pub theta1_fold_limit_deg: f64,
    pub taper_deg: f64,
    pub d_mm: f64,
    pub gamma_deg: f64,
    #[serde(rename = "thrust_N")]
    pub thrust_n: f64,
    pub mass_g: f64,
    pub arm_count: u32,
    pub r_mm: f64,
    pub h_mm: f64,
    pub l_mm: f64,
    /// `[[theta2_deg, theta1_deg], ...]` used when calibrating.
    pub anchors: Vec<[f64; 2]>,
}

impl Default for AirframeConfig {
    fn default() -> Self {
        let p = RobotParams::default();
        let t = TriggerGeometry::default();
        AirframeConfig {
            link_angle_a12_deg: None,
            link_angle_a34_deg: None,
            joint_offset_1_deg: 0.0,
            joint_offset_2_deg: 0.0,
            joint_offset_3_deg: 0.0,
            joint_offset_4_deg: 0.0,
            theta2_max_deg: LinkageGeometry::DEFAULT_THETA2_MAX_DEG,
            theta1_fold_limit_deg: LinkageGeometry::DEFAULT_THETA1_FOLD_LIMIT_DEG,
            taper_deg: CouplerGeometry::default().taper_deg,
            d_mm: p.d_mm,
            gamma_deg: p.gamma_deg,
            thrust_n: p.thrust_n,
            mass_g: p.mass_g,
            arm_count: p.arm_count,
            r_mm: t.r_mm,
            h_mm: t.h_mm,
            l_mm: t.l_mm,
            anchors: DEFAULT_ANCHORS.iter().map(|a| [a.theta2_deg, a.theta1_deg]).collect(),
        }
    }
}

impl AirframeConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn anchors(&self) -> Vec<Anchor> {
        self.anchors.iter().map(|&[t2, t1]| Anchor::new(t2, t1)).collect()
    }

    fn offsets(&self) -> [f64; 4] {
        [self.joint_offset_1_deg, self.joint_offset_2_deg, self.joint_offset_3_deg, self.joint_offset_4_deg]
    }

    pub fn linkage(&self) -> Result<LinkageGeometry> {
        match (self.link_angle_a12_deg, self.link_angle_a34_deg) {
            (Some(a12), Some(a34)) => {
                let g = LinkageGeometry {
                    joint_offsets_deg: self.offsets(),
                    theta2_max_deg: self.theta2_max_deg,
                    theta1_fold_limit_deg: self.theta1_fold_limit_deg,
                    ..LinkageGeometry::new(a12, a34)?
                };
                g.validate()?;
                Ok(g)
            }
            _ => calibrate(
                &self.anchors(),
                &CalibrationLimits {
                    theta2_max_deg: self.theta2_max_deg,
                    theta1_fold_limit_deg: self.theta1_fold_limit_deg,
                    joint_offsets_deg: self.offsets(),
                },
            ),
        }
    }

    pub fn airframe(&self) -> Result<Airframe> {
        Airframe::new(
            self.linkage()?,
            TriggerGeometry { r_mm: self.r_mm, h_mm: self.h_mm, l_mm: self.l_mm },
            CouplerGeometry { taper_deg: self.taper_deg },
            RobotParams {
                d_mm: self.d_mm,
                gamma_deg: self.gamma_deg,
                thrust_n: self.thrust_n,
                mass_g: self.mass_g,
                arm_count: self.arm_count,
            },
        )
    }

    /// Config that reproduces `af` exactly, with link angles pinned.
    pub fn from_airframe(af: &Airframe) -> Self {
        let [o1, o2, o3, o4] = af.linkage.joint_offsets_deg;
        AirframeConfig {
            link_angle_a12_deg: Some(af.linkage.a12_deg),
            link_angle_a34_deg: Some(af.linkage.a34_deg),
            joint_offset_1_deg: o1,
            joint_offset_2_deg: o2,
            joint_offset_3_deg: o3,
            joint_offset_4_deg: o4,
            theta2_max_deg: af.linkage.theta2_max_deg,
            theta1_fold_limit_deg: af.linkage.theta1_fold_limit_deg,
            taper_deg: af.coupler.taper_deg,
            d_mm: af.params.d_mm,
            gamma_deg: af.params.gamma_deg,
            thrust_n: af.params.thrust_n,
            mass_g: af.params.mass_g,
            arm_count: af.params.arm_count,
            r_mm: af.trigger.r_mm,
            h_mm: af.trigger.h_mm,
            l_mm: af.trigger.l_mm,
            anchors: AirframeConfig::default().anchors,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_reference() {
        let cfg = AirframeConfig::parse("").unwrap();
        assert_eq!(cfg, AirframeConfig::default());
        assert_eq!(cfg.airframe().unwrap(), Airframe::reference().unwrap());
    }

    #[test]
    fn keys_override() {
        let cfg = AirframeConfig::parse("d_mm = 80\nthrust_N = 1.0\nlink_angle_a12_deg = 90\nlink_angle_a34_deg = 85\n").unwrap();
        let af = cfg.airframe().unwrap();
        assert_eq!(af.params.d_mm, 80.0);
        assert_eq!(af.params.thrust_n, 1.0);
        assert_eq!(af.linkage.a34_deg, 85.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(AirframeConfig::parse("dd_mm = 3"), Err(Error::Parse(_))));
    }

    #[test]
    fn round_trip() {
        let af = Airframe::reference().unwrap();
        let text = AirframeConfig::from_airframe(&af).to_toml();
        let back = AirframeConfig::parse(&text).unwrap().airframe().unwrap();
        assert_eq!(back, af);
    }
}
