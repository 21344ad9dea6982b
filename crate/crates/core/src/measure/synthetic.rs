//! Force traces generated from the activation model, for exercising the
//! processing pipeline without hardware.
//!
//! The wall advances at constant speed. Before contact the force is zero;
//! structural compliance is represented by a linear ramp up to the model's
//! activation force (optionally held for a dwell), after which the force
//! follows the model `F(x)` along the stroke to the flip point and then
//! returns to zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ForceTrace, Sample};
use crate::airframe::Airframe;
use crate::error::{Error, Result};
use crate::numeric::linspace;
use crate::trigger::{stroke_profile, FLIP_THETA2_DEG};

const PROFILE_NODES: usize = 801;
const NOISE_TONES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOptions {
    pub sample_rate_hz: f64,
    pub wall_speed_mm_s: f64,
    pub approach_mm: f64,
    pub ramp_mm: f64,
    pub dwell_mm: f64,
    pub tail_mm: f64,
    /// Peak noise amplitude as a fraction of the activation force.
    pub noise_fraction: f64,
    /// Frequency band of the additive noise tones (Hz).
    pub noise_band_hz: (f64, f64),
    /// Multiplies the whole force channel.
    pub gain: f64,
    pub seed: u64,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        SyntheticOptions {
            sample_rate_hz: 1000.0,
            wall_speed_mm_s: 0.25,
            approach_mm: 0.25,
            ramp_mm: 0.25,
            dwell_mm: 0.0,
            tail_mm: 0.25,
            noise_fraction: 0.0,
            noise_band_hz: (200.0, 450.0),
            gain: 1.0,
            seed: 0,
        }
    }
}

/// Linear interpolation on increasing `xs`; zero outside.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return 0.0;
    }
    let i = xs.partition_point(|&v| v <= x).clamp(1, xs.len() - 1);
    let (x0, x1, y0, y1) = (xs[i - 1], xs[i], ys[i - 1], ys[i]);
    if x1 == x0 {
        return y0;
    }
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Model-generated trace at yaw `psi`.
pub fn synthetic_trace(af: &Airframe, psi: f64, opts: &SyntheticOptions) -> Result<ForceTrace> {
    if !(opts.sample_rate_hz > 0.0 && opts.wall_speed_mm_s > 0.0) {
        return Err(Error::InvalidParameter("sample rate and wall speed must be positive".into()));
    }
    if [opts.approach_mm, opts.ramp_mm, opts.dwell_mm, opts.tail_mm].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("trace segment lengths must be non-negative".into()));
    }

    let nodes = linspace(af.linkage.theta2_max_deg, FLIP_THETA2_DEG, PROFILE_NODES);
    let profile = stroke_profile(af, psi, &nodes)?;
    let xs: Vec<f64> = profile.iter().map(|s| s.x_mm).collect();
    let fs: Vec<f64> = profile.iter().map(|s| af.params.thrust_n * s.force_ratio).collect();
    let f_max = fs[0];
    let stroke = xs[xs.len() - 1];

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let tones: Vec<(f64, f64)> = (0..NOISE_TONES)
        .map(|_| {
            let f = rng.random_range(opts.noise_band_hz.0..=opts.noise_band_hz.1);
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (f, phase)
        })
        .collect();
    let tone_amp = opts.noise_fraction * f_max / NOISE_TONES as f64;

    let contact_end = opts.ramp_mm + opts.dwell_mm;
    let travel = opts.approach_mm + contact_end + stroke + opts.tail_mm;
    let n = (travel / opts.wall_speed_mm_s * opts.sample_rate_hz).floor() as usize + 1;

    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / opts.sample_rate_hz;
            let p = t * opts.wall_speed_mm_s - opts.approach_mm;
            let clean = if p < 0.0 {
                0.0
            } else if p < opts.ramp_mm {
                f_max * p / opts.ramp_mm
            } else if p < contact_end {
                f_max
            } else {
                interpolate(&xs, &fs, p - contact_end)
            };
            let noise: f64 = tones
                .iter()
                .map(|&(f, ph)| tone_amp * (std::f64::consts::TAU * f * t + ph).sin())
                .sum();
            Sample { time_s: t, position_mm: p, force_n: opts.gain * clean + noise }
        })
        .collect();
    ForceTrace::new(samples, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trigger::activation_force;

    #[test]
    fn clean_trace_peaks_at_activation_force() {
        let af = Airframe::reference().unwrap();
        let t = synthetic_trace(&af, 0.0, &SyntheticOptions::default()).unwrap();
        let peak = t.forces().into_iter().fold(f64::MIN, f64::max);
        let f = activation_force(&af, 0.0).unwrap();
        assert!((peak - f).abs() / f < 1e-3, "{peak} vs {f}");
        assert!((t.sample_rate_hz - 1000.0).abs() < 1e-6);
        assert_eq!(t.samples()[0].force_n, 0.0);
    }

    #[test]
    fn noise_is_bounded() {
        let af = Airframe::reference().unwrap();
        let opts = SyntheticOptions { noise_fraction: 0.05, seed: 7, ..SyntheticOptions::default() };
        let clean = synthetic_trace(&af, 0.0, &SyntheticOptions::default()).unwrap();
        let noisy = synthetic_trace(&af, 0.0, &opts).unwrap();
        let f = activation_force(&af, 0.0).unwrap();
        let worst = clean
            .forces()
            .iter()
            .zip(noisy.forces())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.05 * f + 1e-12);
        assert!(worst > 0.01 * f);
    }

    #[test]
    fn interpolation_clamps_to_zero_outside() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [1.0, 3.0, 5.0];
        assert_eq!(interpolate(&xs, &ys, -0.1), 0.0);
        assert_eq!(interpolate(&xs, &ys, 2.1), 0.0);
        assert_eq!(interpolate(&xs, &ys, 1.5), 4.0);
        assert_eq!(interpolate(&xs, &ys, 2.0), 5.0);
    }
}
