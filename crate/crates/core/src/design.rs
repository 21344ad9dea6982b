//! Design-space sweeps, grid-plus-coordinate-descent search, and the
//! length-scaling laws of the activation model.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airframe::Airframe;
use crate::collide::{kinetic_energy, min_activation_speed};
use crate::error::{Error, Result};
use crate::trigger::{activation_force, activation_work_closed_form, phi_from_theta2, FLIP_THETA2_DEG};

/// A scalar design variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignParam {
    RMm,
    HMm,
    LMm,
    DMm,
    GammaDeg,
    Theta2MaxDeg,
    ThrustN,
    MassG,
}

impl DesignParam {
    pub const ALL: [DesignParam; 8] = [
        DesignParam::RMm,
        DesignParam::HMm,
        DesignParam::LMm,
        DesignParam::DMm,
        DesignParam::GammaDeg,
        DesignParam::Theta2MaxDeg,
        DesignParam::ThrustN,
        DesignParam::MassG,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            DesignParam::RMm => "r_mm",
            DesignParam::HMm => "h_mm",
            DesignParam::LMm => "l_mm",
            DesignParam::DMm => "d_mm",
            DesignParam::GammaDeg => "gamma_deg",
            DesignParam::Theta2MaxDeg => "theta2_max_deg",
            DesignParam::ThrustN => "thrust_N",
            DesignParam::MassG => "mass_g",
        }
    }

    pub fn get(&self, af: &Airframe) -> f64 {
        match self {
            DesignParam::RMm => af.trigger.r_mm,
            DesignParam::HMm => af.trigger.h_mm,
            DesignParam::LMm => af.trigger.l_mm,
            DesignParam::DMm => af.params.d_mm,
            DesignParam::GammaDeg => af.params.gamma_deg,
            DesignParam::Theta2MaxDeg => af.linkage.theta2_max_deg,
            DesignParam::ThrustN => af.params.thrust_n,
            DesignParam::MassG => af.params.mass_g,
        }
    }

    pub fn set(&self, af: &mut Airframe, v: f64) {
        match self {
            DesignParam::RMm => af.trigger.r_mm = v,
            DesignParam::HMm => af.trigger.h_mm = v,
            DesignParam::LMm => af.trigger.l_mm = v,
            DesignParam::DMm => af.params.d_mm = v,
            DesignParam::GammaDeg => af.params.gamma_deg = v,
            DesignParam::Theta2MaxDeg => af.linkage.theta2_max_deg = v,
            DesignParam::ThrustN => af.params.thrust_n = v,
            DesignParam::MassG => af.params.mass_g = v,
        }
    }
}

impl fmt::Display for DesignParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DesignParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DesignParam::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown design parameter {s:?}")))
    }
}

/// Grid values for one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub param: DesignParam,
    pub values: Vec<f64>,
}

impl ParamRange {
    pub fn new(param: DesignParam, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{param}: grid must hold finite values")));
        }
        Ok(ParamRange { param, values })
    }

    /// `lo:hi:step` inclusive of `hi` (within rounding).
    pub fn stepped(param: DesignParam, lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || hi < lo {
            return Err(Error::InvalidParameter(format!("{param}: need lo <= hi and step > 0")));
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        ParamRange::new(param, (0..n).map(|i| lo + step * i as f64).collect())
    }

    pub fn bounds(&self) -> (f64, f64) {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    fn spacing(&self) -> f64 {
        let (lo, hi) = self.bounds();
        if self.values.len() > 1 { (hi - lo) / (self.values.len() - 1) as f64 } else { 0.0 }
    }
}

impl FromStr for ParamRange {
    type Err = Error;

    /// `name=lo:hi:step` or `name=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, grid) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected name=lo:hi:step, got {s:?}")))?;
        let param: DesignParam = name.trim().parse()?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let parts: Vec<&str> = grid.split(':').collect();
        match parts.as_slice() {
            [lo, hi, step] => ParamRange::stepped(param, num(lo)?, num(hi)?, num(step)?),
            [list] => ParamRange::new(param, list.split(',').map(num).collect::<Result<_>>()?),
            _ => Err(Error::Parse(format!("expected name=lo:hi:step, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignMetrics {
    pub force_ratio: f64,
    pub activation_force_n: f64,
    pub activation_work_mj: f64,
    pub min_activation_speed: f64,
    pub phi_at_flip_deg: f64,
}

/// Metrics of one design at reference yaw `psi`.
pub fn evaluate(af: &Airframe, psi: f64) -> Result<DesignMetrics> {
    af.validate()?;
    let force = activation_force(af, psi)?;
    let work = activation_work_closed_form(af)?;
    Ok(DesignMetrics {
        force_ratio: force / af.params.thrust_n,
        activation_force_n: force,
        activation_work_mj: work,
        min_activation_speed: min_activation_speed(af.params.mass_g, work, 1.0),
        phi_at_flip_deg: phi_from_theta2(&af.trigger, FLIP_THETA2_DEG, af.linkage.theta2_max_deg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Parameter values in the order of the ranges.
    pub values: Vec<f64>,
    pub point: Airframe,
    /// Solver failures are kept as a message rather than aborting the sweep.
    pub metrics: std::result::Result<DesignMetrics, String>,
}

fn grid_size(ranges: &[ParamRange]) -> usize {
    ranges.iter().map(|r| r.values.len()).product()
}

fn grid_point(ranges: &[ParamRange], mut index: usize) -> Vec<f64> {
    let mut values = vec![0.0; ranges.len()];
    for (k, r) in ranges.iter().enumerate().rev() {
        values[k] = r.values[index % r.values.len()];
        index /= r.values.len();
    }
    values
}

fn apply(base: &Airframe, ranges: &[ParamRange], values: &[f64]) -> Airframe {
    let mut af = *base;
    for (r, &v) in ranges.iter().zip(values) {
        r.param.set(&mut af, v);
    }
    af
}

/// Full-factorial sweep; the last range varies fastest.
pub fn sweep(base: &Airframe, ranges: &[ParamRange], psi: f64) -> Vec<SweepRow> {
    (0..grid_size(ranges))
        .into_par_iter()
        .map(|i| {
            let values = grid_point(ranges, i);
            let point = apply(base, ranges, &values);
            let metrics = evaluate(&point, psi).map_err(|e| e.to_string());
            SweepRow { values, point, metrics }
        })
        .collect()
}

pub fn sweep_csv(ranges: &[ParamRange], rows: &[SweepRow]) -> String {
    let mut s = String::new();
    for r in ranges {
        s.push_str(r.param.name());
        s.push(',');
    }
    s.push_str("force_ratio,activation_force_N,work_mJ,v_min_m_s,phi_flip_deg,error\n");
    for row in rows {
        for v in &row.values {
            s.push_str(&format!("{v:.9},"));
        }
        match &row.metrics {
            Ok(m) => s.push_str(&format!(
                "{:.9},{:.9},{:.9},{:.9},{:.9},\n",
                m.force_ratio, m.activation_force_n, m.activation_work_mj, m.min_activation_speed, m.phi_at_flip_deg
            )),
            Err(e) => s.push_str(&format!("nan,nan,nan,nan,nan,\"{}\"\n", e.replace('"', "'"))),
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    MinWork,
    /// Maximise `F - k T`, with `k` from [`Constraints::min_force_ratio`]
    /// (zero when unset).
    MaxForceMargin,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-work" | "min_work" => Ok(Objective::MinWork),
            "max-force-margin" | "max_force_margin" => Ok(Objective::MaxForceMargin),
            _ => Err(Error::Parse(format!("unknown objective {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Constraints {
    /// Require `F >= k T` so hover disturbances cannot fold the frame.
    pub min_force_ratio: Option<f64>,
    pub max_work_mj: Option<f64>,
}

impl Constraints {
    fn feasible(&self, m: &DesignMetrics) -> bool {
        self.min_force_ratio.is_none_or(|k| m.force_ratio >= k)
            && self.max_work_mj.is_none_or(|w| m.activation_work_mj <= w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub point: Airframe,
    pub values: Vec<(String, f64)>,
    pub metrics: DesignMetrics,
    pub objective_value: f64,
    /// Constraints and range bounds that hold with equality at the optimum.
    pub active_constraints: Vec<String>,
}

fn score(objective: Objective, c: &Constraints, af: &Airframe, m: &DesignMetrics) -> f64 {
    match objective {
        Objective::MinWork => m.activation_work_mj,
        Objective::MaxForceMargin => {
            -(m.activation_force_n - c.min_force_ratio.unwrap_or(0.0) * af.params.thrust_n)
        }
    }
}

const MAX_DESCENT_ROUNDS: usize = 400;
const STEP_FLOOR: f64 = 1e-6;

/// Best feasible grid point, refined by coordinate descent inside the
/// ranges' bounds. Scores are minimised; ties keep the earlier grid point.
pub fn search(
    base: &Airframe,
    ranges: &[ParamRange],
    objective: Objective,
    constraints: &Constraints,
    psi: f64,
) -> Result<SearchResult> {
    let rows = sweep(base, ranges, psi);
    let eval = |values: &[f64]| -> Option<(Airframe, DesignMetrics, f64)> {
        let af = apply(base, ranges, values);
        let m = evaluate(&af, psi).ok()?;
        constraints
            .feasible(&m)
            .then(|| (af, m, score(objective, constraints, &af, &m)))
    };

    let mut best: Option<(Vec<f64>, Airframe, DesignMetrics, f64)> = None;
    for row in &rows {
        let Ok(m) = row.metrics else { continue };
        if !constraints.feasible(&m) {
            continue;
        }
        let sc = score(objective, constraints, &row.point, &m);
        if best.as_ref().is_none_or(|b| sc < b.3) {
            best = Some((row.values.clone(), row.point, m, sc));
        }
    }
    let (mut values, mut point, mut metrics, mut best_score) =
        best.ok_or_else(|| Error::Infeasible("no grid point satisfies the constraints".into()))?;

    let bounds: Vec<(f64, f64)> = ranges.iter().map(ParamRange::bounds).collect();
    let mut steps: Vec<f64> = ranges.iter().map(ParamRange::spacing).collect();
    let floors: Vec<f64> = bounds.iter().map(|(lo, hi)| STEP_FLOOR * (hi - lo)).collect();

    for _ in 0..MAX_DESCENT_ROUNDS {
        if steps.iter().zip(&floors).all(|(s, f)| *s <= *f) {
            break;
        }
        let mut improved = false;
        for k in 0..ranges.len() {
            if steps[k] <= floors[k] {
                continue;
            }
            for dir in [-1.0, 1.0] {
                let mut trial = values.clone();
                trial[k] = (values[k] + dir * steps[k]).clamp(bounds[k].0, bounds[k].1);
                if trial[k] == values[k] {
                    continue;
                }
                if let Some((af, m, sc)) = eval(&trial) {
                    if sc < best_score {
                        (values, point, metrics, best_score) = (trial, af, m, sc);
                        improved = true;
                        break;
                    }
                }
            }
        }
        if !improved {
            steps.iter_mut().for_each(|s| *s *= 0.5);
        }
    }

    let mut active = Vec::new();
    let near = |a: f64, b: f64| (a - b).abs() <= 1e-4 * b.abs().max(1e-12);
    if let Some(k) = constraints.min_force_ratio {
        if near(metrics.force_ratio, k) {
            active.push(format!("force_ratio>={k}"));
        }
    }
    if let Some(w) = constraints.max_work_mj {
        if near(metrics.activation_work_mj, w) {
            active.push(format!("work_mJ<={w}"));
        }
    }
    for (r, (&v, &(lo, hi))) in ranges.iter().zip(values.iter().zip(&bounds)) {
        if lo < hi && v == lo {
            active.push(format!("{}>={lo}", r.param));
        } else if lo < hi && v == hi {
            active.push(format!("{}<={hi}", r.param));
        }
    }

    Ok(SearchResult {
        point,
        values: ranges.iter().zip(&values).map(|(r, &v)| (r.param.name().to_string(), v)).collect(),
        metrics,
        objective_value: best_score,
        active_constraints: active,
    })
}

/// Exponents of the characteristic-length scaling, under the assumption that
/// thrust (and mass) grow as `l^3` and impact speed as `l^(1/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleLaw {
    pub force: f64,
    pub work: f64,
    pub kinetic: f64,
    pub speed: f64,
}

impl Default for ScaleLaw {
    fn default() -> Self {
        ScaleLaw { force: 3.0, work: 4.0, kinetic: 4.0, speed: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaledMetrics {
    #[serde(rename = "force_N")]
    pub force_n: f64,
    #[serde(rename = "work_mJ")]
    pub work_mj: f64,
    #[serde(rename = "kinetic_mJ")]
    pub kinetic_mj: f64,
    pub speed_m_s: f64,
}

impl ScaledMetrics {
    /// Activation force and work of `af`, with kinetic energy at `speed`.
    pub fn of(af: &Airframe, psi: f64, speed: f64) -> Result<Self> {
        let m = evaluate(af, psi)?;
        Ok(ScaledMetrics {
            force_n: m.activation_force_n,
            work_mj: m.activation_work_mj,
            kinetic_mj: kinetic_energy(af.params.mass_g, speed),
            speed_m_s: speed,
        })
    }
}

/// Applies the scaling laws for a length ratio `s`.
pub fn scale_predict(base: &ScaledMetrics, s: f64) -> Result<ScaledMetrics> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("scale factor {s} must be positive")));
    }
    let law = ScaleLaw::default();
    Ok(ScaledMetrics {
        force_n: base.force_n * s.powf(law.force),
        work_mj: base.work_mj * s.powf(law.work),
        kinetic_mj: base.kinetic_mj * s.powf(law.kinetic),
        speed_m_s: base.speed_m_s * s.powf(law.speed),
    })
}

/// The airframe with lengths scaled by `s` and thrust and mass by `s^3`.
pub fn scale_design(af: &Airframe, s: f64) -> Result<Airframe> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!("scale factor {s} must be positive")));
    }
    let mut out = af.scaled_lengths(s);
    out.params.thrust_n *= s.powi(3);
    out.params.mass_g *= s.powi(3);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn range_parsing() {
        let r: ParamRange = "r_mm=10:30:5".parse().unwrap();
        assert_eq!(r.param, DesignParam::RMm);
        assert_eq!(r.values, vec![10.0, 15.0, 20.0, 25.0, 30.0]);
        let r: ParamRange = "h_mm=2.5,5,10".parse().unwrap();
        assert_eq!(r.values, vec![2.5, 5.0, 10.0]);
        assert!("q_mm=1:2:1".parse::<ParamRange>().is_err());
        assert!("r_mm=3:1:1".parse::<ParamRange>().is_err());
        assert!("r_mm".parse::<ParamRange>().is_err());
    }

    #[test]
    fn grid_order_is_row_major() {
        let ranges = vec![
            ParamRange::new(DesignParam::RMm, vec![1.0, 2.0]).unwrap(),
            ParamRange::new(DesignParam::HMm, vec![3.0, 4.0, 5.0]).unwrap(),
        ];
        let pts: Vec<Vec<f64>> = (0..6).map(|i| grid_point(&ranges, i)).collect();
        assert_eq!(pts[0], vec![1.0, 3.0]);
        assert_eq!(pts[1], vec![1.0, 4.0]);
        assert_eq!(pts[5], vec![2.0, 5.0]);
    }

    #[test]
    fn scale_identity_and_composition() {
        let m = ScaledMetrics { force_n: 0.5, work_mj: 0.23, kinetic_mj: 2.0, speed_m_s: 0.3 };
        assert_eq!(scale_predict(&m, 1.0).unwrap(), m);
        let two = scale_predict(&m, 2.0).unwrap();
        assert_relative_eq!(two.work_mj, 16.0 * 0.23, epsilon = 1e-12);
        assert_relative_eq!(two.force_n, 4.0, epsilon = 1e-12);
        let a = scale_predict(&scale_predict(&m, 1.7).unwrap(), 0.6).unwrap();
        let b = scale_predict(&m, 1.7 * 0.6).unwrap();
        assert_relative_eq!(a.force_n, b.force_n, max_relative = 1e-12);
        assert_relative_eq!(a.work_mj, b.work_mj, max_relative = 1e-12);
        assert_relative_eq!(a.kinetic_mj, b.kinetic_mj, max_relative = 1e-12);
        assert_relative_eq!(a.speed_m_s, b.speed_m_s, max_relative = 1e-12);
        assert!(scale_predict(&m, 0.0).is_err());
    }

    #[test]
    fn failed_points_are_tagged_not_fatal() {
        let base = Airframe::reference().unwrap();
        let ranges = vec![ParamRange::new(DesignParam::LMm, vec![0.1, 40.0]).unwrap()];
        let rows = sweep(&base, &ranges, 0.0);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].metrics.is_err());
        assert!(rows[1].metrics.is_ok());
        let csv = sweep_csv(&ranges, &rows);
        assert!(csv.lines().nth(1).unwrap().contains("nan"));
    }
}
