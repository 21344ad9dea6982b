//! Small numerical kernels shared by the kinematic and trigger models.

use crate::error::{Error, Result};

/// Relative disagreement allowed between a central difference and its
/// half-step counterpart.
pub const STEP_HALVING_TOLERANCE: f64 = 0.05;

/// Wraps an angle in degrees into (-180, 180].
pub fn normalize_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Wraps an angle in radians into (-pi, pi].
pub fn normalize_rad(angle: f64) -> f64 {
    normalize_deg(angle.to_degrees()).to_radians()
}

/// A central-difference derivative together with its half-step estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckedDerivative {
    pub coarse: f64,
    pub fine: f64,
}

impl CheckedDerivative {
    /// Richardson-extrapolated value, eliminating the O(h^2) term.
    pub fn extrapolated(&self) -> f64 {
        (4.0 * self.fine - self.coarse) / 3.0
    }

    /// Ratio fine/coarse; 1 for a converged derivative.
    pub fn ratio(&self) -> f64 {
        self.fine / self.coarse
    }
}

/// Central difference at `x` with step `h`, repeated at `h / 2`.
///
/// The two estimates must agree to [`STEP_HALVING_TOLERANCE`] relative to the
/// larger of them, unless both are below `abs_floor` (a derivative that
/// vanishes has no meaningful ratio).
pub fn central_difference<F>(mut f: F, x: f64, h: f64, abs_floor: f64) -> Result<CheckedDerivative>
where
    F: FnMut(f64) -> Result<f64>,
{
    let coarse = (f(x + h)? - f(x - h)?) / (2.0 * h);
    let half = 0.5 * h;
    let fine = (f(x + half)? - f(x - half)?) / (2.0 * half);
    let scale = coarse.abs().max(fine.abs());
    let diff = (coarse - fine).abs();
    if diff > abs_floor && diff > STEP_HALVING_TOLERANCE * scale {
        return Err(Error::DerivativeUnstable { at: x, coarse, fine });
    }
    Ok(CheckedDerivative { coarse, fine })
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// `f(lo)` and `f(hi)` must bracket a root; stops when the bracket is narrower
/// than `tol`.
pub fn bisect<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::InvalidParameter(format!(
            "root not bracketed on [{lo}, {hi}]"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::NoConvergence {
        residual: (hi - lo).abs(),
        iterations: max_iter,
    })
}

/// Trapezoidal integral of `ys` over the abscissae `xs` (same length).
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

/// `n` evenly spaced samples from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normalize_keeps_half_open_interval() {
        assert_eq!(normalize_deg(180.0), 180.0);
        assert_eq!(normalize_deg(-180.0), 180.0);
        assert_eq!(normalize_deg(190.0), -170.0);
        assert_eq!(normalize_deg(-540.0), 180.0);
        assert_eq!(normalize_deg(45.0), 45.0);
    }

    #[test]
    fn central_difference_of_sine() {
        let d = central_difference(|x| Ok(x.sin()), 0.3, 1e-3, 1e-12).unwrap();
        assert_relative_eq!(d.extrapolated(), 0.3f64.cos(), epsilon = 1e-10);
        assert!((d.ratio() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn central_difference_flags_kinks() {
        // |x| near zero: coarse and fine steps straddle the kink differently.
        let f = |x: f64| Ok(if x > 1e-4 { x } else { 0.0 });
        let err = central_difference(f, 1e-4, 1.5e-4, 1e-12).unwrap_err();
        assert!(matches!(err, Error::DerivativeUnstable { .. }));
    }

    #[test]
    fn vanishing_derivative_passes_on_floor() {
        let d = central_difference(|x| Ok(x * x), 0.0, 1e-3, 1e-12).unwrap();
        assert_eq!(d.coarse, 0.0);
    }

    #[test]
    fn bisection_finds_cube_root() {
        let r = bisect(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-14, 200).unwrap();
        assert_relative_eq!(r, 2f64.cbrt(), epsilon = 1e-13);
    }

    #[test]
    fn bisection_requires_bracket() {
        assert!(bisect(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn trapezoid_is_exact_for_linear() {
        let xs = linspace(0.0, 2.0, 7);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x + 1.0).collect();
        assert_relative_eq!(trapezoid(&xs, &ys), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let v = linspace(85.0, 110.0, 101);
        assert_eq!(v.len(), 101);
        assert_eq!(v[0], 85.0);
        assert_eq!(v[100], 110.0);
        assert_eq!(linspace(110.0, 110.0, 2), vec![110.0, 110.0]);
    }
}
