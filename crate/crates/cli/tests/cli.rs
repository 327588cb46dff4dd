use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use rotator_cli::scenario::parse;
use rotator_cli::{execute, run_file, Failure, RunOptions, EXIT_OK, EXIT_REFUSED, EXIT_VALIDATION};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run_json(name: &str, opts: RunOptions) -> (i32, Value, tempfile::TempDir) {
    let out = tempfile::tempdir().unwrap();
    let (code, msg) = run_file(&scenarios_dir().join(name), out.path(), opts);
    let stem = Path::new(name).file_stem().unwrap().to_string_lossy().into_owned();
    let report = std::fs::read_to_string(out.path().join(format!("{stem}.report.json")))
        .unwrap_or_else(|e| panic!("{name}: no report ({msg}): {e}"));
    (code, serde_json::from_str(&report).unwrap(), out)
}

fn claim<'a>(r: &'a Value, q: &str) -> &'a Value {
    r["claims"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["quantity"] == q)
        .unwrap_or_else(|| panic!("no claim {q}"))
}

fn num(r: &Value, q: &str) -> f64 {
    claim(r, q)["value"].as_f64().unwrap()
}

fn doc(body: &str) -> String {
    format!(r#"{{"version": 1, {body}}}"#)
}

#[test]
fn every_sample_scenario_runs() {
    let mut names: Vec<_> = std::fs::read_dir(scenarios_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for n in names {
        let (code, r, _out) = run_json(&n, RunOptions::default());
        let want = if n.starts_with("refused_") { EXIT_REFUSED } else { EXIT_OK };
        assert_eq!(code, want, "{n}");
        assert_eq!(r["schema"], "rotator-report/1");
        for c in r["claims"].as_array().unwrap() {
            let op = c["operation"].as_str().unwrap();
            assert!(op.contains("::"), "{n}: claim {} has operation {op:?}", c["quantity"]);
        }
    }
}

#[test]
fn reports_are_byte_identical_for_same_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let f = scenarios_dir().join("hessian_sampled.json");
    assert_eq!(run_file(&f, a.path(), RunOptions::default()).0, EXIT_OK);
    assert_eq!(run_file(&f, b.path(), RunOptions::default()).0, EXIT_OK);
    for name in ["hessian_sampled.report.json", "hessian_sampled.hessian.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let c = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        seed: Some(8),
        ..Default::default()
    };
    run_file(&f, c.path(), opts);
    let x = std::fs::read_to_string(a.path().join("hessian_sampled.report.json")).unwrap();
    let z = std::fs::read_to_string(c.path().join("hessian_sampled.report.json")).unwrap();
    assert_ne!(x, z);
    let rz: Value = serde_json::from_str(&z).unwrap();
    assert_eq!(rz["seed"], 8);
}

#[test]
fn report_embeds_resolved_scenario() {
    let (_, r, _o) = run_json("kernel_minus.json", RunOptions::default());
    let scn = &r["scenario"];
    // defaults filled in
    assert_eq!(scn["sampling"]["q_max"], 0.9);
    assert_eq!(scn["run"]["rel_tol"], 1e-10);
    let again = parse(&scn.to_string()).unwrap();
    assert_eq!(again.name.as_deref(), Some("kernel_minus"));
}

#[test]
fn hessian_of_fundamental_has_rank_four_and_kernel() {
    let (_, r, _o) = run_json("hessian_sampled.json", RunOptions::default());
    assert_eq!(claim(&r, "rank_histogram")["value"], serde_json::json!({"4": 50}));
    for p in claim(&r, "probes")["value"].as_array().unwrap() {
        assert_eq!(p["kernel"].as_array().unwrap().len(), 1);
        assert!(p["universal_factor"].as_f64().unwrap().abs() <= 1e-12);
        assert!(p["constraint_residual"].as_f64().unwrap().abs() <= 1e-10);
        assert!(p["state"]["theta"].is_f64());
    }
}

#[test]
fn oracle_fd_switches_engine() {
    let (code, r, _o) = run_json(
        "hessian_sampled.json",
        RunOptions {
            oracle_fd: true,
            ..Default::default()
        },
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(r["engine"], "finite_difference");
    for p in claim(&r, "probes")["value"].as_array().unwrap() {
        assert!(p["fd_deviation"].as_f64().unwrap() <= 1e-6);
    }
}

#[test]
fn simulate_smooth_writes_trajectory_with_full_precision() {
    let (_, r, out) = run_json("simulate_smooth.json", RunOptions::default());
    assert_eq!(claim(&r, "termination")["value"], "Completed");
    assert!(num(&r, "drift.PP") <= 1e-8);
    assert!(num(&r, "drift.Q") <= 1e-8);
    let csv = std::fs::read_to_string(out.path().join("simulate_smooth.trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, rotator_core::dynamics::CSV_HEADER);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), header.split(',').count());
    let theta = row[4];
    let mantissa = theta.split('e').next().unwrap().replace(['-', '.'], "");
    assert_eq!(mantissa.len(), 17, "{theta}");
    assert_eq!(theta.parse::<f64>().unwrap(), 1.2);
}

#[test]
fn simulate_fundamental_refuses_with_diagnostic() {
    let (code, r, _o) = run_json("refused_fundamental_simulate.json", RunOptions::default());
    assert_eq!(code, EXIT_REFUSED);
    assert_eq!(r["status"], "refused");
    let d = &r["diagnostic"];
    assert_eq!(d["kind"], "degenerate_hessian");
    assert_eq!(d["detail"]["rank"], 4);
    assert_eq!(d["detail"]["kernel"].as_array().unwrap().len(), 1);
}

#[test]
fn validation_errors_exit_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            doc(r#""task": "hessian", "model": {"type": "rotator", "shape": "fundamental+", "m": 1, "l": 0}, "sampling": {"count": 2}"#),
            "model.l",
        ),
        (
            doc(r#""task": "scan-f", "model": {"type": "rotator", "m": 1, "l": 1}, "scan_f": {"shapes": ["wobbly"], "q": {"min": 0.1, "max": 0.5, "n": 3}}"#),
            "scan_f.shapes[0]",
        ),
        (
            doc(r#""task": "verify-free", "model": {"type": "rotator", "shape": "fundamental+", "m": 1, "l": 1}, "free": {"profile": "linear:omega=x"}"#),
            "free.profile",
        ),
        (
            doc(r#""task": "verify-magnetic", "model": {"type": "rotator", "shape": "fundamental+", "m": 1, "l": 1}, "field": {"H": [1, 0, 0], "e": 1}, "magnetic": {"radius": 1, "branch": "minus"}"#),
            "field.H",
        ),
        (
            doc(r#""task": "verify-free", "model": {"type": "rotator", "shape": "fundamental+", "m": 1, "l": 1}, "free": {"profile": "spline:missing.csv"}"#),
            "free",
        ),
    ];
    for (i, (text, loc)) in cases.iter().enumerate() {
        let p = dir.path().join(format!("case{i}.json"));
        std::fs::write(&p, text).unwrap();
        let (code, msg) = run_file(&p, &dir.path().join("out"), RunOptions::default());
        assert_eq!(code, EXIT_VALIDATION, "{text}: {msg}");
        assert!(msg.contains(&format!("at {loc}:")), "{loc} not in {msg}");
    }
}

#[test]
fn verify_magnetic_minus_branch_pipeline() {
    let (code, r, out) = run_json("magnetic_minus.json", RunOptions::default());
    assert_eq!(code, EXIT_OK);
    // m = e = H = R = 1, l = 2: mu_- = sqrt(2) |1 + 2R/l| - 1, phi' = -2 / (l mu_-)
    let (rr, l) = (1.0, 2.0);
    let mu = 2f64.sqrt() * (1.0 + 2.0 * rr / l) - 1.0;
    assert!((num(&r, "mu") - mu).abs() <= 1e-14);
    assert!((num(&r, "phidot") + 2.0 / (l * mu)).abs() <= 1e-14);
    assert!(num(&r, "max_residual_norm") <= 1e-8);
    assert!(num(&r, "max_abs_constraint_f") <= 1e-14);
    let w = num(&r, "phidot");
    assert!(w < 0.0 && rr * w.abs() < 1.0);
    let scan = std::fs::read_to_string(out.path().join("magnetic_minus.branch_scan.csv")).unwrap();
    assert_eq!(scan.lines().next().unwrap(), "R,H,branch,mu,phidot,speed,admissible,residual_norm");
    assert_eq!(scan.lines().count(), 1 + 5 * 3 * 2);
    for row in scan.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        if f[6] == "true" {
            assert!(f[7].parse::<f64>().unwrap() <= 1e-8, "{row}");
        }
    }
}

fn scan_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn scan_f_matches_closed_forms_and_survives_domain_errors() {
    let text = doc(
        r#""task": "scan-f", "model": {"type": "rotator", "m": 1, "l": 1},
        "scan_f": {"shapes": ["fundamental+", "fundamental-", "rational_sqrt"], "q": {"min": 0.01, "max": 1.6, "n": 12, "spacing": "linear"}}"#,
    );
    let scn = parse(&text).unwrap();
    let o = execute(&scn, None, RunOptions::default()).unwrap();
    let (name, csv) = &o.files[0];
    assert_eq!(name, "scenario.scan_f.csv");
    assert_eq!(csv.lines().next().unwrap(), "shape,Q,factor,det,sigma_ratio,status");
    let rows = scan_rows(csv);
    assert_eq!(rows.len(), 36);
    let mut domain = 0;
    for r in &rows {
        let q: f64 = r[1].parse().unwrap();
        match (r[0].as_str(), r[5].as_str()) {
            ("fundamental+", "ok") => assert!(r[2].parse::<f64>().unwrap().abs() <= 1e-12),
            ("fundamental-", "ok") => {
                assert!(q < 1.0);
                assert!(r[2].parse::<f64>().unwrap().abs() <= 1e-12);
            }
            ("fundamental-", "domain") => {
                assert!(q > 1.0);
                assert!(r[2].is_empty());
                domain += 1;
            }
            ("rational_sqrt", "ok") => {
                let f: f64 = r[2].parse().unwrap();
                let want = q.sqrt() / (1.0 + q.sqrt());
                assert!((f - want).abs() <= 1e-12 * want, "Q={q}: {f} vs {want}");
            }
            other => panic!("unexpected row {other:?}"),
        }
    }
    assert!(domain >= 3);
    let failed = o.report.claims.iter().find(|c| c.quantity == "points_failed").unwrap();
    assert_eq!(failed.value, serde_json::json!(domain));
}

#[test]
fn verify_free_spline_resolves_relative_path() {
    let (code, r, _o) = run_json("free_spline.json", RunOptions::default());
    assert_eq!(code, EXIT_OK);
    assert!(num(&r, "max_residual_norm") <= 1e-8);
    assert!(num(&r, "action_relative_mismatch") <= 1e-10);
    assert!(claim(&r, "indeterminacy_witness")["value"].is_object());
}

#[test]
fn toy_cases_report_residuals() {
    for n in ["toy_case_a.json", "toy_indeterminate.json"] {
        let (code, r, _o) = run_json(n, RunOptions::default());
        assert_eq!(code, EXIT_OK);
        assert!(num(&r, "max_residual_norm") <= 1e-10, "{n}");
        assert!(num(&r, "sigma_ratio_at_start") <= 1e-9, "{n}");
    }
    let (_, r, _o) = run_json("toy_case_a.json", RunOptions::default());
    // case a: omega = k~ R / (m (R + l/2))
    assert!((num(&r, "omega") - 0.7 * 1.5 / 2.0).abs() <= 1e-14);
}

#[test]
fn physics_refusal_inside_task_is_exit_three() {
    // plus-branch circle at R = l/2 is inadmissible
    let text = doc(
        r#""task": "verify-magnetic", "model": {"type": "rotator", "shape": "fundamental+", "m": 1, "l": 2},
        "field": {"H": [0, 0, 1], "e": 1}, "magnetic": {"radius": 1, "branch": "plus"}"#,
    );
    let scn = parse(&text).unwrap();
    match execute(&scn, None, RunOptions::default()) {
        Err(Failure::Refused(r, _)) => assert_eq!(r.diagnostic.as_ref().unwrap().kind, "inadmissible"),
        other => panic!("expected a refusal, got {other:?}"),
    }
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_rotator");
    let out = tempfile::tempdir().unwrap();
    let run = |f: &str| {
        Command::new(bin)
            .args(["run", scenarios_dir().join(f).to_str().unwrap(), "--out"])
            .arg(out.path())
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run("toy_case_a.json"), Some(0));
    assert_eq!(run("refused_fundamental_simulate.json"), Some(3));
    assert_eq!(run("does_not_exist.json"), Some(2));
    let bad = out.path().join("bad.json");
    std::fs::write(&bad, "{\"version\": 1,").unwrap();
    let o = Command::new(bin).args(["run", bad.to_str().unwrap(), "--out"]).arg(out.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("<document>"));
}

#[test]
fn batch_runs_directory_in_parallel() {
    let bin = env!("CARGO_BIN_EXE_rotator");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(&a, "4"), (&b, "1")] {
        let st = Command::new(bin)
            .args(["batch", scenarios_dir().to_str().unwrap(), "--jobs", jobs, "--out"])
            .arg(dir.path())
            .output()
            .unwrap();
        // one sample is a deliberate refusal
        assert_eq!(st.status.code(), Some(3));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 20);
    for n in names {
        assert_eq!(std::fs::read(a.path().join(&n)).unwrap(), std::fs::read(b.path().join(&n)).unwrap());
    }
}
