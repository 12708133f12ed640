use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_padic-hardy"));
    cmd.env_remove("PADIC_HARDY_PRESETS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const BILINEAR_HEADER: &str = r#"
kind = "herz"

[context]
p = 2
n = 1

[[slots]]
alpha = 0.0
q = 2.0
r = 4.0

[[slots]]
alpha = 0.0
q = 2.0
r = 4.0
"#;

#[test]
fn constant_preset_reports_the_pinned_value() {
    let out = run(&["constant", "--preset", "herz_forward_canonical"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["kind"], "herz");
    assert_eq!(v["p"], 2);
    let c = v["constant"].as_f64().unwrap();
    assert!((c - 2.914213562373095).abs() < 1e-8, "constant {c}");
    assert_eq!(v["per_slot"].as_array().unwrap().len(), 2);
}

#[test]
fn repeated_runs_emit_identical_bytes() {
    let a = run(&["mc-check", "--preset", "herz_dual_canonical"]);
    let b = run(&["mc-check", "--preset", "herz_dual_canonical"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = stdout_json(&a);
    assert!(v["sigma"].as_f64().unwrap() <= 4.0);

    let c = run(&["sharpness", "--preset", "herz_forward_canonical"]);
    let d = run(&["sharpness", "--preset", "herz_forward_canonical"]);
    assert_eq!(c.status.code(), Some(0));
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn seed_override_is_accepted() {
    let out = run(&["mc-check", "--preset", "herz_forward_canonical", "--seed", "99"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn missing_source_is_a_usage_error() {
    let out = run(&["constant"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn unknown_preset_is_rejected() {
    let out = run(&["constant", "--preset", "no_such_preset"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bundled presets"));
}

#[test]
fn conflicting_sources_are_rejected() {
    let out = run(&[
        "constant",
        "--preset",
        "herz_forward_canonical",
        "--config",
        "x.toml",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "bad.toml", "kind = \"herz\"\ncontext = 3\n");
    let out = run(&["constant", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let path = write_config(dir.path(), "unknown_key.toml", BILINEAR_HEADER);
    let mut body = fs::read_to_string(&path).unwrap();
    body.push_str("\nsurprise = 1\n");
    fs::write(&path, body).unwrap();
    let out = run(&["constant", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergent_constant_exits_with_three() {
    let out = run(&["constant", "--preset", "negative_divergent"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergent"));
}

#[test]
fn tight_sigma_budget_fails_after_reporting() {
    let out = run(&[
        "mc-check",
        "--preset",
        "herz_forward_canonical",
        "--max-sigma",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let v = stdout_json(&out);
    assert!(v["sigma"].as_f64().unwrap() > 0.5);
}

#[test]
fn verify_all_bundled_presets_pass() {
    let out = run(&["verify-all"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout:\n{text}");
    assert!(text.contains("checks passed"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn verify_all_env_dir_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "single.toml",
        "kind = \"herz\"\n[context]\np = 2\nn = 1\n[[slots]]\nalpha = 0.5\nq = 2.0\nr = 2.0\n[[expect]]\ncheck = \"divergent\"\n",
    );
    let out = bin()
        .env("PADIC_HARDY_PRESETS", dir.path())
        .arg("verify-all")
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "stdout:\n{text}");
    assert!(text.contains("[verify] single ::"));
    assert!(text.contains("1/1 checks passed"));
}

#[test]
fn verify_all_explicit_dir_overrides_env() {
    let good = tempfile::tempdir().unwrap();
    write_config(
        good.path(),
        "single.toml",
        "kind = \"herz\"\n[context]\np = 2\nn = 1\n[[slots]]\nalpha = 0.5\nq = 2.0\nr = 2.0\n[[expect]]\ncheck = \"divergent\"\n",
    );
    let negative = Path::new(env!("CARGO_MANIFEST_DIR")).join("presets/negative");
    let out = bin()
        .env("PADIC_HARDY_PRESETS", good.path())
        .arg("verify-all")
        .arg(&negative)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn verify_all_empty_dir_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify-all", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn apply_reports_shell_values() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        "{BILINEAR_HEADER}
[apply]
shells = [-2, 4]

[[apply.inputs]]
p = 2
n = 1
[[apply.inputs.table]]
shell = 0
value = 1.0

[[apply.inputs]]
p = 2
n = 1
[[apply.inputs.table]]
shell = 1
value = 1.0
"
    );
    let path = write_config(dir.path(), "apply.toml", &body);
    let out = run(&["apply", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["direction"], "forward");
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), 7);
    let at = |k: i64| {
        values
            .iter()
            .find(|sv| sv["shell"] == k)
            .and_then(|sv| sv["value"].as_f64())
            .unwrap()
    };
    assert_eq!(at(0), 0.0);
    assert!((at(1) - 0.125).abs() < 1e-12);
    assert!((at(2) - 0.03125).abs() < 1e-12);

    let csv = run(&[
        "apply",
        "--config",
        path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    let text = String::from_utf8_lossy(&csv.stdout);
    assert!(text.starts_with("shell,value\n"));
    assert_eq!(text.lines().count(), 8);
}

#[test]
fn norm_reports_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let shell_indicator = "
[norm.function]
p = 2
n = 1
[[norm.function.table]]
shell = 0
value = 1.0
";
    let lq = write_config(
        dir.path(),
        "lq.toml",
        &format!("{BILINEAR_HEADER}\n[norm]\nspace = \"lq\"\nq = 2.0\n{shell_indicator}"),
    );
    let out = run(&["norm", "--config", lq.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["value"].as_f64().unwrap() - 0.5f64.sqrt()).abs() < 1e-9);

    let mh = write_config(
        dir.path(),
        "mh.toml",
        &format!(
            "{BILINEAR_HEADER}\n[norm]\nspace = \"morrey-herz\"\nalpha = 0.25\nq = 2.0\nr = 2.0\nlambda = 0.125\n{shell_indicator}"
        ),
    );
    let out = run(&["norm", "--config", mh.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert!(v["attainment"].is_object() || v["attainment"].is_string());

    let missing = write_config(
        dir.path(),
        "missing.toml",
        &format!("{BILINEAR_HEADER}\n[norm]\nspace = \"herz\"\nq = 2.0\nr = 2.0\n{shell_indicator}"),
    );
    let out = run(&["norm", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_flag_writes_the_report_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.json");
    let out = run(&[
        "constant",
        "--preset",
        "mh_dual_equal",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(v["kind"], "morrey-herz-dual");
}

#[test]
fn csv_constant_has_a_stable_header() {
    let out = run(&[
        "constant",
        "--preset",
        "herz_forward_canonical",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("kind,p,n,constant,table_part\n"));
    assert!(text.contains("herz,2,1,"));
}

#[test]
fn sharpness_exactness_presets_exit_clean() {
    for preset in ["mh_forward_distinct", "mh_dual_mixed"] {
        let out = run(&["sharpness", "--preset", preset]);
        assert_eq!(out.status.code(), Some(0), "preset {preset}");
        let v = stdout_json(&out);
        assert!(v["relative_gap"].as_f64().unwrap() < 1e-9);
    }
}
