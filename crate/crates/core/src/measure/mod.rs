//! Benchtop force-trace processing: filtering, peak alignment, work by
//! integration, and comparison against the activation model.

mod filter;
mod synthetic;

pub use filter::{filtfilt, zero_phase_lowpass, Biquad};
pub use synthetic::{synthetic_trace, SyntheticOptions};

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airframe::Airframe;
use crate::error::{Error, Result};
use crate::trigger::{activation_force, activation_work_closed_form};

/// Cutoff used for benchtop traces (Hz).
pub const DEFAULT_CUTOFF_HZ: f64 = 50.0;
/// Deviation from the model (%) at or beyond which a measurement is flagged.
pub const DEFAULT_FLAG_THRESHOLD_PCT: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time_s: f64,
    pub position_mm: f64,
    pub force_n: f64,
}

/// Force against wall position, sampled in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceTrace {
    samples: Vec<Sample>,
    pub psi_deg: f64,
    pub sample_rate_hz: f64,
}

impl ForceTrace {
    /// Builds a trace; times must be strictly increasing. The sample rate is
    /// the mean rate over the trace.
    pub fn new(samples: Vec<Sample>, psi_deg: f64) -> Result<Self> {
        if let Some(w) = samples.windows(2).find(|w| !(w[1].time_s > w[0].time_s)) {
            return Err(Error::InvalidParameter(format!(
                "trace times must increase strictly ({} then {})",
                w[0].time_s, w[1].time_s
            )));
        }
        let sample_rate_hz = match (samples.first(), samples.last()) {
            (Some(a), Some(b)) if samples.len() > 1 => (samples.len() - 1) as f64 / (b.time_s - a.time_s),
            _ => 0.0,
        };
        Ok(ForceTrace { samples, psi_deg, sample_rate_hz })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.position_mm).collect()
    }

    pub fn forces(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.force_n).collect()
    }

    fn with_forces(&self, forces: &[f64]) -> Self {
        let samples = self
            .samples
            .iter()
            .zip(forces)
            .map(|(s, &f)| Sample { force_n: f, ..*s })
            .collect();
        ForceTrace { samples, ..*self }
    }

    fn shifted(&self, dx: f64) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|s| Sample { position_mm: s.position_mm - dx, ..*s })
            .collect();
        ForceTrace { samples, ..*self }
    }

    pub fn position_range(&self) -> Option<(f64, f64)> {
        self.samples.iter().fold(None, |acc, s| {
            let p = s.position_mm;
            Some(match acc {
                None => (p, p),
                Some((lo, hi)) => (f64::min(lo, p), f64::max(hi, p)),
            })
        })
    }

    /// CSV with a `# psi_deg=` header comment and columns
    /// `time_s,position_mm,force_N`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# psi_deg={}\ntime_s,position_mm,force_N\n", self.psi_deg);
        for p in &self.samples {
            s.push_str(&format!("{:.9},{:.9},{:.9}\n", p.time_s, p.position_mm, p.force_n));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut psi = None;
        for line in text.lines().map(str::trim).filter(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some(v) = body.strip_prefix("psi_deg=") {
                psi = Some(v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("psi_deg: {e}")))?);
            }
        }
        let psi = psi.ok_or_else(|| Error::Parse("missing `# psi_deg=` header".into()))?;

        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let expected = ["time_s", "position_mm", "force_N"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!(
                "trace header must be `time_s,position_mm,force_N`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut samples = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| Error::Parse(format!("row {}: missing column {k}", i + 1)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)))
            };
            samples.push(Sample { time_s: field(0)?, position_mm: field(1)?, force_n: field(2)? });
        }
        ForceTrace::new(samples, psi)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ForceTrace::from_csv(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Zero-phase low-pass of the force channel.
pub fn lowpass(trace: &ForceTrace, cutoff_hz: f64) -> Result<ForceTrace> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if trace.len() < 2 {
        return Ok(trace.clone());
    }
    let y = zero_phase_lowpass(&trace.forces(), cutoff_hz, trace.sample_rate_hz)?;
    Ok(trace.with_forces(&y))
}

/// Maximum force and the trace shifted so that the maximum sits at `x = 0`.
pub fn peak_align(trace: &ForceTrace) -> Result<(f64, ForceTrace)> {
    let peak = trace
        .samples()
        .iter()
        .fold(None::<&Sample>, |best, s| match best {
            Some(b) if b.force_n >= s.force_n => Some(b),
            _ => Some(s),
        })
        .ok_or(Error::EmptyTrace)?;
    Ok((peak.force_n, trace.shifted(peak.position_mm)))
}

/// Trapezoidal integral of force over position (mJ) between `x_lo` and
/// `x_hi`, interpolating linearly where a bound falls between samples.
pub fn work_done(trace: &ForceTrace, x_lo: f64, x_hi: f64) -> Result<f64> {
    let (min, max) = trace.position_range().ok_or(Error::EmptyTrace)?;
    let slack = 1e-9 * (max - min).abs().max(1.0);
    if !(x_lo <= x_hi && x_lo >= min - slack && x_hi <= max + slack) {
        return Err(Error::RangeOutsideTrace { lo: x_lo, hi: x_hi, min, max });
    }
    let mut total = 0.0;
    for w in trace.samples().windows(2) {
        let (x0, f0, x1, f1) = (w[0].position_mm, w[0].force_n, w[1].position_mm, w[1].force_n);
        let (a, b) = if x0 <= x1 { (x0, x1) } else { (x1, x0) };
        let lo = a.max(x_lo);
        let hi = b.min(x_hi);
        if !(hi > lo) {
            continue;
        }
        let at = |x: f64| f0 + (f1 - f0) * (x - x0) / (x1 - x0);
        let seg = 0.5 * (at(lo) + at(hi)) * (hi - lo);
        total += if x1 >= x0 { seg } else { -seg };
    }
    Ok(total)
}

/// Part of an aligned trace over which work is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorkWindow {
    /// From the start of the trace to the force peak.
    #[default]
    ToPeak,
    /// From the force peak to the end of the trace.
    FromPeak,
    Full,
}

impl std::str::FromStr for WorkWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "to-peak" => Ok(WorkWindow::ToPeak),
            "from-peak" => Ok(WorkWindow::FromPeak),
            "full" => Ok(WorkWindow::Full),
            _ => Err(Error::Parse(format!("work window must be to-peak, from-peak or full, got {s:?}"))),
        }
    }
}

impl WorkWindow {
    /// Integration bounds on a peak-aligned trace.
    pub fn bounds(&self, aligned: &ForceTrace) -> Result<(f64, f64)> {
        let (min, max) = aligned.position_range().ok_or(Error::EmptyTrace)?;
        Ok(match self {
            WorkWindow::ToPeak => (min, 0.0),
            WorkWindow::FromPeak => (0.0, max),
            WorkWindow::Full => (min, max),
        })
    }
}

/// Filtered peak force and work of one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub psi_deg: f64,
    pub f_max_n: f64,
    pub work_mj: f64,
}

pub fn summarize(trace: &ForceTrace, cutoff_hz: f64, window: WorkWindow) -> Result<TraceSummary> {
    let filtered = lowpass(trace, cutoff_hz)?;
    let (f_max_n, aligned) = peak_align(&filtered)?;
    let (lo, hi) = window.bounds(&aligned)?;
    Ok(TraceSummary { psi_deg: trace.psi_deg, f_max_n, work_mj: work_done(&aligned, lo, hi)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub cutoff_hz: f64,
    pub window: WorkWindow,
    pub flag_threshold_pct: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            window: WorkWindow::default(),
            flag_threshold_pct: DEFAULT_FLAG_THRESHOLD_PCT,
        }
    }
}

/// Measured values of one trace next to the model prediction at its yaw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub psi_deg: f64,
    pub f_max_n: f64,
    pub work_mj: f64,
    /// Absent where the model has no single-contact prediction.
    pub f_model_n: Option<f64>,
    pub w_model_mj: f64,
    /// Peak-force deviation from the model (%).
    pub deviation_pct: Option<f64>,
    pub work_deviation_pct: f64,
    pub flagged: bool,
}

/// Compares every trace with the model, preserving input order.
pub fn compare_dataset(traces: &[ForceTrace], af: &Airframe, opts: &CompareOptions) -> Result<Vec<ComparisonRow>> {
    if traces.is_empty() {
        return Ok(Vec::new());
    }
    let w_model = activation_work_closed_form(af)?;

    let mut yaws: Vec<f64> = traces.iter().map(|t| t.psi_deg).collect();
    yaws.sort_by(f64::total_cmp);
    yaws.dedup();
    let forces: HashMap<u64, Option<f64>> = yaws
        .par_iter()
        .map(|&psi| (psi.to_bits(), activation_force(af, psi).ok()))
        .collect();

    let summaries: Vec<TraceSummary> = traces
        .par_iter()
        .map(|t| summarize(t, opts.cutoff_hz, opts.window))
        .collect::<Result<_>>()?;

    Ok(summaries
        .into_iter()
        .map(|s| {
            let f_model_n = forces[&s.psi_deg.to_bits()];
            let deviation_pct = f_model_n.map(|f| 100.0 * (s.f_max_n - f) / f);
            ComparisonRow {
                psi_deg: s.psi_deg,
                f_max_n: s.f_max_n,
                work_mj: s.work_mj,
                f_model_n,
                w_model_mj: w_model,
                deviation_pct,
                work_deviation_pct: 100.0 * (s.work_mj - w_model) / w_model,
                flagged: deviation_pct.is_some_and(|d| d.abs() >= opts.flag_threshold_pct),
            }
        })
        .collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| format!("{x:.9}"))
}

/// CSV `psi_deg,f_max_N,work_mJ,f_model_N,w_model_mJ,deviation_pct`.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from("psi_deg,f_max_N,work_mJ,f_model_N,w_model_mJ,deviation_pct\n");
    for r in rows {
        s.push_str(&format!(
            "{:.9},{:.9},{:.9},{},{:.9},{}\n",
            r.psi_deg,
            r.f_max_n,
            r.work_mj,
            fmt_opt(r.f_model_n),
            r.w_model_mj,
            fmt_opt(r.deviation_pct)
        ));
    }
    s
}

/// Reads every `*.csv` trace in `dir`, sorted by file name.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<ForceTrace>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    paths.sort();
    paths.iter().map(|p| ForceTrace::read(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn trace_from(points: &[(f64, f64)]) -> ForceTrace {
        let samples = points
            .iter()
            .enumerate()
            .map(|(i, &(x, f))| Sample { time_s: i as f64 * 0.01, position_mm: x, force_n: f })
            .collect();
        ForceTrace::new(samples, 0.0).unwrap()
    }

    #[test]
    fn triangle_peak_moves_to_origin() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64, 5.0 - (i as f64 - 5.0).abs())).collect();
        let (f, aligned) = peak_align(&trace_from(&pts)).unwrap();
        assert_eq!(f, 5.0);
        assert_eq!(aligned.samples()[5].position_mm, 0.0);
        assert_eq!(aligned.samples()[0].position_mm, -5.0);
    }

    #[test]
    fn ramp_peaks_at_last_sample() {
        let pts: Vec<(f64, f64)> = (0..20).map(|i| (i as f64 * 0.1, i as f64)).collect();
        let (f, aligned) = peak_align(&trace_from(&pts)).unwrap();
        assert_eq!(f, 19.0);
        assert_eq!(aligned.samples().last().unwrap().position_mm, 0.0);
    }

    #[test]
    fn empty_trace_errors() {
        let t = ForceTrace::new(Vec::new(), 0.0).unwrap();
        assert_eq!(peak_align(&t).unwrap_err(), Error::EmptyTrace);
        assert_eq!(lowpass(&t, 50.0).unwrap_err(), Error::EmptyTrace);
        assert!(work_done(&t, 0.0, 1.0).is_err());
    }

    #[test]
    fn rectangle_work() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 * 0.1, 1.0)).collect();
        assert_relative_eq!(work_done(&trace_from(&pts), 0.0, 1.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(work_done(&trace_from(&pts), 0.25, 0.75).unwrap(), 0.5, epsilon = 1e-12);
        let zero: Vec<(f64, f64)> = pts.iter().map(|&(x, _)| (x, 0.0)).collect();
        assert_eq!(work_done(&trace_from(&zero), 0.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn work_range_must_lie_in_trace() {
        let pts: Vec<(f64, f64)> = (0..=10).map(|i| (i as f64 * 0.1, 1.0)).collect();
        let t = trace_from(&pts);
        assert!(matches!(work_done(&t, -0.5, 0.5), Err(Error::RangeOutsideTrace { .. })));
        assert!(matches!(work_done(&t, 0.6, 0.5), Err(Error::RangeOutsideTrace { .. })));
    }

    #[test]
    fn times_must_increase() {
        let s = vec![
            Sample { time_s: 0.0, position_mm: 0.0, force_n: 0.0 },
            Sample { time_s: 0.0, position_mm: 0.1, force_n: 0.0 },
        ];
        assert!(ForceTrace::new(s, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64 * 0.25, 0.5 * i as f64)).collect();
        let mut t = trace_from(&pts);
        t.psi_deg = -30.0;
        let back = ForceTrace::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back.psi_deg, -30.0);
        assert_eq!(back.len(), 5);
        assert_relative_eq!(back.samples()[3].force_n, 1.5);
        assert!(ForceTrace::from_csv("time_s,position_mm,force_N\n0,0,0\n").is_err());
        assert!(ForceTrace::from_csv("# psi_deg=0\nt,x,f\n0,0,0\n").is_err());
    }

    #[test]
    fn window_parsing() {
        assert_eq!("to-peak".parse::<WorkWindow>().unwrap(), WorkWindow::ToPeak);
        assert_eq!("full".parse::<WorkWindow>().unwrap(), WorkWindow::Full);
        assert!("peak".parse::<WorkWindow>().is_err());
    }

    #[test]
    fn empty_dataset_gives_empty_report() {
        let af = Airframe::reference().unwrap();
        assert!(compare_dataset(&[], &af, &CompareOptions::default()).unwrap().is_empty());
    }
}
