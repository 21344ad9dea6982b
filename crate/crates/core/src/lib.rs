//! Kinematic and quasi-static model of a quadrotor airframe whose arms fold
//! when it hits a wall.
//!
//! Each arm is a spherical kite linkage driven through a fold trigger. The
//! crate solves the arm pose, maps wall displacement to joint angles, gives
//! the activation force and work by virtual work, predicts fold activation
//! in collisions, processes benchtop force traces and explores the design
//! space.

pub mod airframe;
pub mod cli;
pub mod collide;
pub mod config;
pub mod design;
pub mod error;
pub mod linkage;
pub mod measure;
pub mod numeric;
pub mod svg;
pub mod trigger;

pub use airframe::Airframe;
pub use collide::{collision_outcome, kinetic_energy, min_activation_speed, CollisionOutcome, CollisionScenario, WorkSource};
pub use config::AirframeConfig;
pub use design::{scale_design, scale_predict, search, sweep, DesignMetrics, DesignParam, ParamRange, ScaledMetrics};
pub use error::{Error, Result};
pub use linkage::{calibrate, joint_curve, solve_arm, Anchor, ArmState, Branch, LinkageGeometry, RobotParams};
pub use measure::{compare_dataset, synthetic_trace, ForceTrace, WorkWindow};
pub use trigger::{activation_force, activation_work, force_ratio, phi_from_theta2, theta2_from_x, trigger_x, TriggerGeometry};
