//! Second-order Butterworth low-pass applied forward and backward.

use crate::error::{Error, Result};

/// Direct-form-II-transposed biquad coefficients, `a0` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Butterworth low-pass via the bilinear transform with pre-warping.
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0) {
            return Err(Error::InvalidParameter(format!("cutoff {cutoff_hz} Hz must be positive")));
        }
        if !(sample_rate_hz > 2.0 * cutoff_hz) {
            return Err(Error::RateTooLow { rate: sample_rate_hz, cutoff: cutoff_hz });
        }
        let k = (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let sqrt2 = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sqrt2 * k + k2);
        let b0 = k2 * norm;
        Ok(Biquad {
            b: [b0, 2.0 * b0, b0],
            a: [2.0 * (k2 - 1.0) * norm, (1.0 - sqrt2 * k + k2) * norm],
        })
    }

    /// Internal state that makes a constant input `x0` pass through unchanged.
    fn steady_state(&self, x0: f64) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let gain = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let y0 = gain * x0;
        let z2 = b2 * x0 - a2 * y0;
        [b1 * x0 - a1 * y0 + z2, z2]
    }

    fn run(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let [mut z1, mut z2] = self.steady_state(first);
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }
}

/// Zero-phase filtering: odd reflection at both ends, a forward pass and a
/// backward pass, each started from steady state.
pub fn filtfilt(filter: &Biquad, x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return x.to_vec();
    }
    let pad = pad.min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    filter.run(&mut ext);
    ext.reverse();
    filter.run(&mut ext);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Zero-phase low-pass of `x` sampled at `sample_rate_hz`.
pub fn zero_phase_lowpass(x: &[f64], cutoff_hz: f64, sample_rate_hz: f64) -> Result<Vec<f64>> {
    let filter = Biquad::butterworth_lowpass(cutoff_hz, sample_rate_hz)?;
    // Three time constants of the cutoff on each side.
    let pad = (3.0 * sample_rate_hz / cutoff_hz).ceil() as usize;
    Ok(filtfilt(&filter, x, pad.max(9)))
}
