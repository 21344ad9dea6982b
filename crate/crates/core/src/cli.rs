//! `foldframe` command-line interface.
//!
//! Geometry comes from built-in defaults, then the config file (`--config`
//! or `FOLDFRAME_CONFIG`), then individual flags. Usage errors exit 2 and
//! domain errors exit 1; both print one JSON line to stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::airframe::Airframe;
use crate::collide::{collision_outcome, CollisionOutcome, CollisionScenario, WorkSource};
use crate::config::{AirframeConfig, CONFIG_ENV};
use crate::design::{
    scale_design, scale_predict, search, sweep, sweep_csv, Constraints, Objective, ParamRange, ScaledMetrics,
};
use crate::error::{Error, Result};
use crate::linkage::{calibrate, joint_curve, joint_curve_csv, Anchor, CalibrationLimits};
use crate::measure::{
    compare_dataset, comparison_csv, read_trace_dir, synthetic_trace, CompareOptions, ComparisonRow,
    SyntheticOptions, WorkWindow, DEFAULT_CUTOFF_HZ, DEFAULT_FLAG_THRESHOLD_PCT,
};
use crate::svg::polyline_svg;
use crate::trigger::{activation_force, activation_work, stroke_profile};

#[derive(Debug, Parser)]
#[command(name = "foldframe", version, allow_negative_numbers = true, about = "Fold model of a collision-triggered foldable quadrotor airframe")]
pub struct Cli {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct GeometryArgs {
    /// Geometry config file (TOML)
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Link angle of tiles 1 and 2, degrees [default: calibrated from anchors]
    #[arg(long, global = true)]
    pub link_angle_a12_deg: Option<f64>,
    /// Link angle of tiles 3 and 4, degrees [default: calibrated from anchors]
    #[arg(long, global = true)]
    pub link_angle_a34_deg: Option<f64>,
    /// Calibration anchor THETA2:THETA1 in degrees, repeat twice [default: 90:10 110:10.643]
    #[arg(long = "anchor", global = true, value_name = "THETA2:THETA1")]
    pub anchors: Vec<String>,
    /// Joint 1 zero offset, degrees [default: 0]
    #[arg(long, global = true)]
    pub joint_offset_1_deg: Option<f64>,
    /// Joint 2 zero offset, degrees [default: 0]
    #[arg(long, global = true)]
    pub joint_offset_2_deg: Option<f64>,
    /// Joint 3 zero offset, degrees [default: 0]
    #[arg(long, global = true)]
    pub joint_offset_3_deg: Option<f64>,
    /// Joint 4 zero offset, degrees [default: 0]
    #[arg(long, global = true)]
    pub joint_offset_4_deg: Option<f64>,
    /// Flight joint limit on theta2, degrees [default: 110]
    #[arg(long, global = true)]
    pub theta2_max_deg: Option<f64>,
    /// Folded joint limit on theta1, degrees [default: 70]
    #[arg(long, global = true)]
    pub theta1_fold_limit_deg: Option<f64>,
    /// Coupler taper, degrees [default: 13]
    #[arg(long, global = true)]
    pub taper_deg: Option<f64>,
    /// Thrust point distance from the theta1 axis, mm [default: 40]
    #[arg(long, global = true)]
    pub d_mm: Option<f64>,
    /// Thrust point elevation, degrees [default: 10]
    #[arg(long, global = true)]
    pub gamma_deg: Option<f64>,
    /// Total thrust, N [default: 0.52]
    #[arg(long = "thrust-N", global = true)]
    pub thrust_n: Option<f64>,
    /// Vehicle mass, g [default: 51.2]
    #[arg(long, global = true)]
    pub mass_g: Option<f64>,
    /// Trigger arc radius, mm [default: 18]
    #[arg(long, global = true)]
    pub r_mm: Option<f64>,
    /// Trigger lever height, mm [default: 5]
    #[arg(long, global = true)]
    pub h_mm: Option<f64>,
    /// Trigger lever length, mm [default: 40]
    #[arg(long, global = true)]
    pub l_mm: Option<f64>,
}

impl GeometryArgs {
    pub fn resolve(&self) -> Result<AirframeConfig> {
        let mut cfg = match &self.config {
            Some(path) => AirframeConfig::load(path)?,
            None => AirframeConfig::default(),
        };
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        if self.link_angle_a12_deg.is_some() {
            cfg.link_angle_a12_deg = self.link_angle_a12_deg;
        }
        if self.link_angle_a34_deg.is_some() {
            cfg.link_angle_a34_deg = self.link_angle_a34_deg;
        }
        if !self.anchors.is_empty() {
            cfg.anchors = self.anchors.iter().map(|a| parse_anchor(a)).collect::<Result<_>>()?;
        }
        set(&mut cfg.joint_offset_1_deg, self.joint_offset_1_deg);
        set(&mut cfg.joint_offset_2_deg, self.joint_offset_2_deg);
        set(&mut cfg.joint_offset_3_deg, self.joint_offset_3_deg);
        set(&mut cfg.joint_offset_4_deg, self.joint_offset_4_deg);
        set(&mut cfg.theta2_max_deg, self.theta2_max_deg);
        set(&mut cfg.theta1_fold_limit_deg, self.theta1_fold_limit_deg);
        set(&mut cfg.taper_deg, self.taper_deg);
        set(&mut cfg.d_mm, self.d_mm);
        set(&mut cfg.gamma_deg, self.gamma_deg);
        set(&mut cfg.thrust_n, self.thrust_n);
        set(&mut cfg.mass_g, self.mass_g);
        set(&mut cfg.r_mm, self.r_mm);
        set(&mut cfg.h_mm, self.h_mm);
        set(&mut cfg.l_mm, self.l_mm);
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the two link angles to the anchors and print the pinned config
    #[command(allow_negative_numbers = true)]
    Calibrate {
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Joint curve CSV: theta2_deg,theta1_deg,theta3_deg
    #[command(allow_negative_numbers = true)]
    Kinematics {
        /// theta2 grid LO:HI:STEP, degrees
        #[arg(long, default_value = "85:110:0.25", allow_hyphen_values = true)]
        range: String,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trigger stroke CSV: theta2_deg,theta1_deg,theta3_deg,x_mm
    #[command(allow_negative_numbers = true)]
    Trigger {
        /// Yaw, degrees
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        psi: f64,
        /// theta2 grid LO:HI:STEP, degrees, inside [90, theta2_max]
        #[arg(long, default_value = "90:110:0.5", allow_hyphen_values = true)]
        range: String,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Force ratio CSV: theta2_deg,psi_deg,force_ratio
    #[command(allow_negative_numbers = true)]
    Force {
        /// Yaw values, degrees, as a list A,B,... or LO:HI:STEP
        #[arg(long, default_value = "-30,0,30", allow_hyphen_values = true)]
        psi: String,
        /// theta2 grid LO:HI:STEP, degrees, inside [90, theta2_max]
        #[arg(long, default_value = "90:110:0.5", allow_hyphen_values = true)]
        range: String,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Activation force and work report (JSON)
    #[command(allow_negative_numbers = true)]
    Work {
        /// Yaw values, degrees; more than one gives a JSON array
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        psi: String,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict whether a wall collision folds the airframe (JSON)
    #[command(allow_negative_numbers = true)]
    Collide {
        /// Impact speed, m/s
        #[arg(long)]
        speed: f64,
        /// Yaw at impact, degrees
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        psi: f64,
        /// `model` or `value:<mJ>`
        #[arg(long, default_value = "model")]
        work_source: String,
        /// Fraction of kinetic energy converted into fold work
        #[arg(long, default_value_t = 1.0)]
        efficiency: f64,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Filter benchtop traces and compare them with the model (CSV)
    #[command(allow_negative_numbers = true)]
    Ingest {
        /// Directory of trace CSV files
        dir: PathBuf,
        /// Low-pass cutoff, Hz
        #[arg(long, default_value_t = DEFAULT_CUTOFF_HZ)]
        cutoff: f64,
        /// Work window on the peak-aligned trace: to-peak, from-peak or full
        #[arg(long, default_value = "to-peak")]
        window: String,
        /// Peak-force deviation flag threshold, percent
        #[arg(long, default_value_t = DEFAULT_FLAG_THRESHOLD_PCT)]
        flag_threshold: f64,
        /// Output CSV [default: stdout]
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write model-generated traces for exercising `ingest`
    #[command(allow_negative_numbers = true)]
    Synth {
        /// Output directory
        #[arg(long)]
        out_dir: PathBuf,
        /// Yaw values, degrees, as a list A,B,... or LO:HI:STEP
        #[arg(long, default_value = "-35:45:5", allow_hyphen_values = true)]
        psi: String,
        /// Traces per yaw
        #[arg(long, default_value_t = 4)]
        repeats: usize,
        /// Peak noise amplitude as a fraction of the activation force
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Force gain applied to the model
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        /// Contact plateau before the stroke, mm
        #[arg(long, default_value_t = 0.0)]
        dwell_mm: f64,
        /// Sample rate, Hz
        #[arg(long, default_value_t = 1000.0)]
        sample_rate: f64,
        /// Base RNG seed; trace k uses seed + k
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Full-factorial design sweep (CSV)
    #[command(allow_negative_numbers = true)]
    Sweep {
        /// NAME=LO:HI:STEP or NAME=A,B,...; NAME is one of r_mm, h_mm, l_mm,
        /// d_mm, gamma_deg, theta2_max_deg, thrust_N, mass_g
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// Yaw used for the activation force, degrees
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        psi: f64,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Constrained design search over parameter ranges (JSON)
    #[command(allow_negative_numbers = true)]
    Search {
        /// NAME=LO:HI:STEP or NAME=A,B,... as for `sweep`
        #[arg(long = "param", required = true)]
        params: Vec<String>,
        /// min-work or max-force-margin
        #[arg(long, default_value = "min-work")]
        objective: String,
        /// Require activation force >= K * thrust
        #[arg(long)]
        min_force_ratio: Option<f64>,
        /// Require activation work <= W mJ
        #[arg(long)]
        max_work_mj: Option<f64>,
        /// Yaw used for the activation force, degrees
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        psi: f64,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scaling-law prediction next to exact recomputation (JSON)
    #[command(allow_negative_numbers = true)]
    Scale {
        /// Length scale factor
        #[arg(long)]
        factor: f64,
        /// Reference impact speed at the base scale, m/s
        #[arg(long, default_value_t = 1.5)]
        speed: f64,
        /// Yaw, degrees
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        psi: f64,
        /// Output file [default: stdout]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write all figure data (and optionally SVG renderings) to a directory
    #[command(allow_negative_numbers = true)]
    Report {
        /// Output directory, created if missing
        #[arg(long)]
        out_dir: PathBuf,
        /// Trace directory to compare against the model
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Also write an SVG polyline rendering of each CSV
        #[arg(long)]
        figures: bool,
        /// Yaw values for the force and work outputs, degrees
        #[arg(long, default_value = "-30,0,30", allow_hyphen_values = true)]
        psi: String,
        /// Low-pass cutoff for traces, Hz
        #[arg(long, default_value_t = DEFAULT_CUTOFF_HZ)]
        cutoff: f64,
        /// Work window for traces: to-peak, from-peak or full
        #[arg(long, default_value = "to-peak")]
        window: String,
    },
}

/// Parses `THETA2:THETA1`.
fn parse_anchor(s: &str) -> Result<[f64; 2]> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("anchor must be THETA2:THETA1, got {s:?}")))?;
    Ok([parse_num(a)?, parse_num(b)?])
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}")))
}

/// `LO:HI:STEP` (inclusive of HI within rounding) or `A,B,...`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, step] => {
            let (lo, hi, step) = (parse_num(lo)?, parse_num(hi)?, parse_num(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(Error::Parse(format!("grid {s:?} needs LO <= HI and STEP > 0")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|i| lo + step * i as f64).collect())
        }
        [list] => list.split(',').map(parse_num).collect(),
        _ => Err(Error::Parse(format!("expected LO:HI:STEP or a comma list, got {s:?}"))),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(content.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(format!("{}: {}", path.display(), e.error)))?;
    Ok(())
}

fn emit(out: Option<&Path>, content: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, content),
        None => stdout.write_all(content.as_bytes()).map_err(Error::from),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialises");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct WorkReport {
    psi_deg: f64,
    #[serde(rename = "activation_force_N")]
    activation_force_n: f64,
    #[serde(rename = "work_mJ_closed_form")]
    work_mj_closed_form: f64,
    #[serde(rename = "work_mJ_integral")]
    work_mj_integral: f64,
}

fn work_report(af: &Airframe, psi: f64) -> Result<WorkReport> {
    let w = activation_work(af, psi)?;
    Ok(WorkReport {
        psi_deg: psi,
        activation_force_n: activation_force(af, psi)?,
        work_mj_closed_form: w.closed_form_mj,
        work_mj_integral: w.integral_mj,
    })
}

fn work_json(af: &Airframe, psis: &[f64]) -> Result<String> {
    let reports = psis.iter().map(|&p| work_report(af, p)).collect::<Result<Vec<_>>>()?;
    Ok(if reports.len() == 1 { to_json(&reports[0]) } else { to_json(&reports) })
}

#[derive(Serialize)]
struct CollideReport {
    speed_m_s: f64,
    psi_deg: f64,
    efficiency: f64,
    #[serde(rename = "required_work_mJ")]
    required_work_mj: f64,
    activates: bool,
    #[serde(rename = "kinetic_energy_mJ")]
    kinetic_energy_mj: f64,
    #[serde(rename = "energy_margin_mJ")]
    energy_margin_mj: f64,
    min_activation_speed_m_s: f64,
    final_state: crate::collide::FoldState,
    arm_theta1_deg: Vec<f64>,
    warning: Option<crate::collide::CollisionWarning>,
}

impl CollideReport {
    fn new(s: &CollisionScenario, o: CollisionOutcome) -> Self {
        CollideReport {
            speed_m_s: s.speed,
            psi_deg: s.psi_deg,
            efficiency: s.efficiency,
            required_work_mj: s.required_work_mj,
            activates: o.activates,
            kinetic_energy_mj: o.kinetic_energy_mj,
            energy_margin_mj: o.energy_margin_mj,
            min_activation_speed_m_s: o.min_activation_speed,
            final_state: o.final_state,
            arm_theta1_deg: o.arm_theta1_deg,
            warning: o.warning,
        }
    }
}

#[derive(Serialize)]
struct ScaleReport {
    factor: f64,
    base: ScaledMetrics,
    predicted: ScaledMetrics,
    recomputed: ScaledMetrics,
}

fn trigger_csv(af: &Airframe, psi: f64, grid: &[f64]) -> Result<String> {
    let mut s = String::from("theta2_deg,theta1_deg,theta3_deg,x_mm\n");
    for p in stroke_profile(af, psi, grid)? {
        s.push_str(&format!("{:.9},{:.9},{:.9},{:.9}\n", p.theta2_deg, p.theta1_deg, p.theta3_deg, p.x_mm));
    }
    Ok(s)
}

fn force_rows(af: &Airframe, psis: &[f64], grid: &[f64]) -> Result<Vec<Vec<(f64, f64)>>> {
    psis.iter()
        .map(|&psi| Ok(stroke_profile(af, psi, grid)?.iter().map(|p| (p.theta2_deg, p.force_ratio)).collect()))
        .collect()
}

fn force_csv(psis: &[f64], rows: &[Vec<(f64, f64)>]) -> String {
    let mut s = String::from("theta2_deg,psi_deg,force_ratio\n");
    for (psi, series) in psis.iter().zip(rows) {
        for (t, f) in series {
            s.push_str(&format!("{t:.9},{psi:.9},{f:.9}\n"));
        }
    }
    s
}

fn kinematics_rows(af: &Airframe, grid: &[f64]) -> Result<Vec<crate::linkage::JointSample>> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    joint_curve(&af.linkage, lo, hi, grid.len())
}

fn non_empty(grid: Vec<f64>) -> Result<Vec<f64>> {
    if grid.is_empty() {
        Err(Error::Parse("empty grid".into()))
    } else {
        Ok(grid)
    }
}

fn write_report(
    af: &Airframe,
    out_dir: &Path,
    traces: Option<&Path>,
    figures: bool,
    psis: &[f64],
    opts: &CompareOptions,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let put = |name: &str, content: &str| write_atomic(&out_dir.join(name), content);

    let kin = kinematics_rows(af, &parse_grid("85:110:0.25")?)?;
    put("fig5_kinematics.csv", &joint_curve_csv(&kin))?;
    let stroke_grid = parse_grid(&format!("90:{}:0.5", af.linkage.theta2_max_deg))?;
    let stroke = stroke_profile(af, 0.0, &stroke_grid)?;
    put("fig5_trigger.csv", &trigger_csv(af, 0.0, &stroke_grid)?)?;
    let force = force_rows(af, psis, &stroke_grid)?;
    put("fig7_force_ratio.csv", &force_csv(psis, &force))?;
    put("activation.json", &work_json(af, psis)?)?;

    let comparison = match traces {
        Some(dir) => {
            let rows = compare_dataset(&read_trace_dir(dir)?, af, opts)?;
            put("fig11_12_comparison.csv", &comparison_csv(&rows))?;
            Some(rows)
        }
        None => None,
    };

    if figures {
        put(
            "fig5_kinematics.svg",
            &polyline_svg(&[
                kin.iter().map(|s| (s.theta2_deg, s.theta1_deg)).collect(),
                kin.iter().map(|s| (s.theta2_deg, s.theta3_deg)).collect(),
            ]),
        )?;
        put("fig5_trigger.svg", &polyline_svg(&[stroke.iter().map(|s| (s.theta2_deg, s.x_mm)).collect()]))?;
        put("fig7_force_ratio.svg", &polyline_svg(&force))?;
        if let Some(rows) = &comparison {
            let series = |f: fn(&ComparisonRow) -> Option<f64>| -> Vec<(f64, f64)> {
                rows.iter().filter_map(|r| f(r).map(|v| (r.psi_deg, v))).collect()
            };
            put(
                "fig11_force.svg",
                &polyline_svg(&[series(|r| Some(r.f_max_n)), series(|r| r.f_model_n)]),
            )?;
            put(
                "fig12_work.svg",
                &polyline_svg(&[series(|r| Some(r.work_mj)), series(|r| Some(r.w_model_mj))]),
            )?;
        }
    }
    Ok(())
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = cli.geometry.resolve()?;
    if let Command::Calibrate { out } = &cli.command {
        let linkage = calibrate(
            &cfg.anchors.iter().map(|&[t2, t1]| Anchor::new(t2, t1)).collect::<Vec<_>>(),
            &CalibrationLimits {
                theta2_max_deg: cfg.theta2_max_deg,
                theta1_fold_limit_deg: cfg.theta1_fold_limit_deg,
                joint_offsets_deg: [
                    cfg.joint_offset_1_deg,
                    cfg.joint_offset_2_deg,
                    cfg.joint_offset_3_deg,
                    cfg.joint_offset_4_deg,
                ],
            },
        )?;
        let calibrated = AirframeConfig {
            link_angle_a12_deg: Some(linkage.a12_deg),
            link_angle_a34_deg: Some(linkage.a34_deg),
            ..cfg
        };
        calibrated.airframe()?;
        return emit(out.as_deref(), &calibrated.to_toml(), stdout);
    }
    let af = cfg.airframe()?;

    match cli.command {
        Command::Calibrate { .. } => unreachable!(),
        Command::Kinematics { range, out } => {
            let rows = kinematics_rows(&af, &non_empty(parse_grid(&range)?)?)?;
            emit(out.as_deref(), &joint_curve_csv(&rows), stdout)
        }
        Command::Trigger { psi, range, out } => {
            emit(out.as_deref(), &trigger_csv(&af, psi, &parse_grid(&range)?)?, stdout)
        }
        Command::Force { psi, range, out } => {
            let psis = non_empty(parse_grid(&psi)?)?;
            let rows = force_rows(&af, &psis, &parse_grid(&range)?)?;
            emit(out.as_deref(), &force_csv(&psis, &rows), stdout)
        }
        Command::Work { psi, out } => {
            emit(out.as_deref(), &work_json(&af, &non_empty(parse_grid(&psi)?)?)?, stdout)
        }
        Command::Collide { speed, psi, work_source, efficiency, out } => {
            let source: WorkSource = work_source.parse()?;
            let scenario = CollisionScenario {
                speed,
                psi_deg: psi,
                efficiency,
                required_work_mj: source.resolve(&af)?,
            };
            let outcome = collision_outcome(&scenario, &af)?;
            emit(out.as_deref(), &to_json(&CollideReport::new(&scenario, outcome)), stdout)
        }
        Command::Ingest { dir, cutoff, window, flag_threshold, report } => {
            let opts = CompareOptions { cutoff_hz: cutoff, window: window.parse()?, flag_threshold_pct: flag_threshold };
            let rows = compare_dataset(&read_trace_dir(&dir)?, &af, &opts)?;
            let flagged = rows.iter().filter(|r| r.flagged).count();
            writeln!(stderr, "{} traces, {} flagged", rows.len(), flagged)?;
            emit(report.as_deref(), &comparison_csv(&rows), stdout)
        }
        Command::Synth { out_dir, psi, repeats, noise, gain, dwell_mm, sample_rate, seed } => {
            std::fs::create_dir_all(&out_dir)?;
            let mut k = 0u64;
            for p in non_empty(parse_grid(&psi)?)? {
                for _ in 0..repeats {
                    let opts = SyntheticOptions {
                        sample_rate_hz: sample_rate,
                        noise_fraction: noise,
                        gain,
                        dwell_mm,
                        seed: seed.wrapping_add(k),
                        ..SyntheticOptions::default()
                    };
                    let trace = synthetic_trace(&af, p, &opts)?;
                    write_atomic(&out_dir.join(format!("trace_{k:04}.csv")), &trace.to_csv())?;
                    k += 1;
                }
            }
            writeln!(stderr, "{k} traces written")?;
            Ok(())
        }
        Command::Sweep { params, psi, out } => {
            let ranges = params.iter().map(|p| p.parse()).collect::<Result<Vec<ParamRange>>>()?;
            let rows = sweep(&af, &ranges, psi);
            emit(out.as_deref(), &sweep_csv(&ranges, &rows), stdout)
        }
        Command::Search { params, objective, min_force_ratio, max_work_mj, psi, out } => {
            let ranges = params.iter().map(|p| p.parse()).collect::<Result<Vec<ParamRange>>>()?;
            let objective: Objective = objective.parse()?;
            let result = search(&af, &ranges, objective, &Constraints { min_force_ratio, max_work_mj }, psi)?;
            emit(out.as_deref(), &to_json(&result), stdout)
        }
        Command::Scale { factor, speed, psi, out } => {
            let base = ScaledMetrics::of(&af, psi, speed)?;
            let predicted = scale_predict(&base, factor)?;
            let recomputed = ScaledMetrics::of(&scale_design(&af, factor)?, psi, speed * factor.sqrt())?;
            emit(out.as_deref(), &to_json(&ScaleReport { factor, base, predicted, recomputed }), stdout)
        }
        Command::Report { out_dir, traces, figures, psi, cutoff, window } => {
            let opts = CompareOptions { cutoff_hz: cutoff, window: window.parse::<WorkWindow>()?, ..CompareOptions::default() };
            write_report(&af, &out_dir, traces.as_deref(), figures, &non_empty(parse_grid(&psi)?)?, &opts)
        }
    }
}

fn error_line(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

/// Runs the CLI against explicit output streams and returns the exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", error_line("usage", first));
            return 2;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{}", error_line(e.kind(), &e.to_string()));
            1
        }
    }
}

/// Runs the CLI on the process streams.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
