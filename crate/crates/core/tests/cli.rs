use std::path::Path;

use foldframe::cli::run_with;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("foldframe").chain(args.iter().copied());
    let code = run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn kinematics_csv() {
    let (code, out, _) = run(&["kinematics", "--range", "85:110:0.25"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "theta2_deg,theta1_deg,theta3_deg");
    assert_eq!(lines.len(), 102);
    assert!(lines[21].starts_with("90.000000000,10.000000000,"));
}

#[test]
fn work_report() {
    let (code, out, _) = run(&["work"]);
    assert_eq!(code, 0);
    let v = json(&out);
    for key in ["work_mJ_closed_form", "work_mJ_integral"] {
        let w = v[key].as_f64().unwrap();
        assert!((w - 0.23).abs() / 0.23 < 0.1, "{key} = {w}");
    }
    assert_eq!(v["psi_deg"].as_f64(), Some(0.0));
    assert!(v["activation_force_N"].as_f64().unwrap() > 0.0);
}

#[test]
fn collide_report() {
    let (code, out, _) = run(&["collide", "--speed", "0.3", "--work-source", "value:2"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["activates"], true);
    assert_eq!(v["final_state"], "folded");
    let (_, out, _) = run(&["collide", "--speed", "0.2", "--psi", "-42", "--work-source", "value:2"]);
    let v = json(&out);
    assert_eq!(v["activates"], false);
    assert_eq!(v["warning"], "double_contact");
}

#[test]
fn exit_codes_and_error_lines() {
    let (code, _, err) = run(&["frobnicate"]);
    assert_eq!(code, 2);
    assert_eq!(json(err.trim())["error"], "usage");
    assert_eq!(err.lines().count(), 1);

    let (code, _, err) = run(&["collide"]);
    assert_eq!(code, 2, "{err}");

    let (code, _, err) = run(&["force", "--psi", "-42"]);
    assert_eq!(code, 1);
    assert_eq!(json(err.trim())["error"], "double_contact");
    assert_eq!(err.lines().count(), 1);

    let (code, _, err) = run(&["work", "--d-mm", "-1"]);
    assert_eq!(code, 1);
    assert_eq!(json(err.trim())["error"], "invalid_parameter");

    let (code, _, err) = run(&["--anchor", "90:10", "--anchor", "90:11", "calibrate"]);
    assert_eq!(code, 1);
    assert_eq!(json(err.trim())["error"], "infeasible_anchors");
}

#[test]
fn help_lists_config_flags() {
    for sub in ["calibrate", "kinematics", "trigger", "force", "work", "collide", "ingest", "sweep", "scale", "report"] {
        let (code, out, _) = run(&[sub, "--help"]);
        assert_eq!(code, 0);
        for flag in [
            "--config",
            "--link-angle-a12-deg",
            "--link-angle-a34-deg",
            "--joint-offset-1-deg",
            "--theta2-max-deg",
            "--theta1-fold-limit-deg",
            "--taper-deg",
            "--d-mm",
            "--gamma-deg",
            "--thrust-N",
            "--mass-g",
        ] {
            assert!(out.contains(flag), "{sub} help lacks {flag}");
        }
        assert!(out.contains("[default: 110]"));
    }
}

#[test]
fn outputs_are_deterministic_and_atomic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let (code, _, _) = run(&["force", "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert!(std::fs::read_to_string(&a).unwrap().starts_with("theta2_deg,psi_deg,force_ratio\n"));
    let leftovers = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(leftovers, 2);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("frame.toml");
    std::fs::write(&cfg, "d_mm = 80\n").unwrap();
    let (_, base, _) = run(&["work"]);
    let (_, from_file, _) = run(&["--config", cfg.to_str().unwrap(), "work"]);
    let (_, flag, _) = run(&["--config", cfg.to_str().unwrap(), "work", "--d-mm", "40"]);
    let w = |s: &str| json(s)["work_mJ_closed_form"].as_f64().unwrap();
    assert!((w(&from_file) - 2.0 * w(&base)).abs() < 1e-12);
    assert_eq!(flag, base);

    let (code, _, err) = run(&["--config", dir.path().join("missing.toml").to_str().unwrap(), "work"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn calibrate_round_trips_through_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cal.toml");
    let (code, _, _) = run(&["calibrate", "--out", cfg.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&cfg).unwrap();
    assert!(text.contains("link_angle_a12_deg"));
    let (_, pinned, _) = run(&["--config", cfg.to_str().unwrap(), "kinematics", "--range", "90:110:5"]);
    let (_, default, _) = run(&["kinematics", "--range", "90:110:5"]);
    assert_eq!(pinned, default);
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn synth_ingest_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let (code, _, _) = run(&["synth", "--out-dir", traces.to_str().unwrap(), "--psi", "-30,0,30", "--repeats", "2"]);
    assert_eq!(code, 0);
    assert_eq!(files(&traces).len(), 6);

    let report = dir.path().join("cmp.csv");
    let (code, _, err) = run(&[
        "ingest",
        traces.to_str().unwrap(),
        "--window",
        "from-peak",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(err.contains("6 traces, 0 flagged"), "{err}");
    let csv = std::fs::read_to_string(&report).unwrap();
    assert!(csv.starts_with("psi_deg,f_max_N,work_mJ,f_model_N,w_model_mJ,deviation_pct\n"));
    assert_eq!(csv.lines().count(), 7);

    let out = dir.path().join("figs");
    let (code, _, err) = run(&[
        "report",
        "--out-dir",
        out.to_str().unwrap(),
        "--traces",
        traces.to_str().unwrap(),
        "--window",
        "from-peak",
        "--figures",
    ]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(
        files(&out),
        vec![
            "activation.json",
            "fig11_12_comparison.csv",
            "fig11_force.svg",
            "fig12_work.svg",
            "fig5_kinematics.csv",
            "fig5_kinematics.svg",
            "fig5_trigger.csv",
            "fig5_trigger.svg",
            "fig7_force_ratio.csv",
            "fig7_force_ratio.svg",
        ]
    );
    let trig = std::fs::read_to_string(out.join("fig5_trigger.csv")).unwrap();
    assert!(trig.starts_with("theta2_deg,theta1_deg,theta3_deg,x_mm\n"));
}

#[test]
fn sweep_search_and_scale() {
    let (code, out, _) = run(&["sweep", "--param", "r_mm=10:30:5", "--param", "h_mm=5,10"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 11);
    assert!(out.starts_with("r_mm,h_mm,force_ratio,"));

    let (code, out, _) = run(&["search", "--param", "d_mm=20:80:5", "--min-force-ratio", "1.5"]);
    assert_eq!(code, 0);
    let v = json(&out);
    assert_eq!(v["active_constraints"][0], "force_ratio>=1.5");

    let (code, out, _) = run(&["scale", "--factor", "2"]);
    assert_eq!(code, 0);
    let v = json(&out);
    let (p, e) = (&v["predicted"], &v["recomputed"]);
    for key in ["force_N", "work_mJ", "kinetic_mJ", "speed_m_s"] {
        let (a, b) = (p[key].as_f64().unwrap(), e[key].as_f64().unwrap());
        assert!((a - b).abs() / b < 0.01, "{key}");
    }
}
