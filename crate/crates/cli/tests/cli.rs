use std::ffi::{OsStr, OsString};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"))
}

fn escort<S: AsRef<OsStr>>(args: impl IntoIterator<Item = S>) -> Output {
    Command::new(env!("CARGO_BIN_EXE_escort")).args(args).output().unwrap()
}

fn run_to(dir: &Path, name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let log = dir.join(format!("{name}.jsonl"));
    let mut args: Vec<OsString> = vec!["run".into(), scenario(name).into(), "--log".into(), log.clone().into()];
    args.extend(extra.iter().map(OsString::from));
    (escort(args), log)
}

#[test]
fn run_exit_code_follows_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    for (name, code) in [("s1_nominal", 0), ("s4_medical_emergency", 10), ("s5_door_fault", 12)] {
        let (out, log) = run_to(dir.path(), name, &[]);
        assert_eq!(
            out.status.code(),
            Some(code),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let text = std::fs::read_to_string(log).unwrap();
        assert!(text.lines().next().unwrap().contains("\"seed\""));
        assert!(text.lines().last().unwrap().contains("\"outcome\""));
    }
}

#[test]
fn until_cuts_the_run_short() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = run_to(dir.path(), "s1_nominal", &["--until", "30"]);
    assert_eq!(out.status.code(), Some(14));
}

#[test]
fn log_goes_to_stdout_without_a_path() {
    let out = escort([
        OsString::from("run"),
        scenario("s1_nominal").into(),
        "--until".into(),
        "5".into(),
    ]);
    assert_eq!(out.status.code(), Some(14));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().count() > 2);
    assert!(stdout.lines().last().unwrap().contains("INCOMPLETE"));
}

#[test]
fn alerts_file_carries_the_rescue_call() {
    let dir = tempfile::tempdir().unwrap();
    let alerts = dir.path().join("alerts.jsonl");
    let (out, _) = run_to(
        dir.path(),
        "s4_medical_emergency",
        &["--alerts", alerts.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(10));
    let text = std::fs::read_to_string(alerts).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.contains("\"RESCUE\"") && text.contains("\"MEDICAL_EMERGENCY\""));
}

#[test]
fn validate_accepts_and_rejects() {
    let ok = escort([OsString::from("validate"), scenario("s2_platform_boarding").into()]);
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("s2_platform_boarding: ok"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(scenario("s1_nominal")).unwrap();
    std::fs::write(&bad, text.replace("goal_node = \"C\"", "goal_node = \"Z\"")).unwrap();
    let out = escort([OsStr::new("validate"), bad.as_os_str()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let missing = escort([OsString::from("validate"), dir.path().join("nope.toml").into()]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn replay_reports_identity_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let (_, log) = run_to(dir.path(), "s3_door_traffic", &["--until", "30"]);
    let same = escort([OsStr::new("replay"), log.as_os_str()]);
    assert_eq!(same.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&same.stdout).starts_with("identical"));

    let text = std::fs::read_to_string(&log).unwrap();
    let edited = text.replacen("\"CLOSED\"", "\"OPEN\"", 1);
    assert_ne!(edited, text);
    std::fs::write(&log, edited).unwrap();
    let diverged = escort([OsStr::new("replay"), log.as_os_str()]);
    assert_eq!(diverged.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&diverged.stdout).contains("replay:"));
}
