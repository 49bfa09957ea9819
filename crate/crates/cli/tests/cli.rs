use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use bodyauth::body_model::{synthesize_csi, synthetic_subject_scene};
use bodyauth::csi_pipeline::{read_csv_file, write_csv_file, CsiSeries};
use bodyauth::matcher::{RegisteredProfile, RegistrationOptions};
use bodyauth::pipeline::{authenticate_series, register_series};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bodyauth"));
    c.env_remove("BODYAUTH_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scene_text(subject: u64, seed: u64, extra: &str) -> String {
    format!(
        "[scene]\nseed = {seed}\n{extra}\n[body.0]\nlabel = s{subject}\nl1_m = 1.25\nl2_m = 1.25\noffset_b_m = 0.01\npreset = subject:{subject}\n"
    )
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth_file(dir: &TempDir, name: &str, subject: u64, seed: u64, secs: f64) -> PathBuf {
    let scene = p(dir, &format!("{name}.scene"));
    fs::write(&scene, scene_text(subject, seed, "")).unwrap();
    let out = p(dir, &format!("{name}.csv"));
    let o = run(&["synth", "--scene", s(&scene), "--out", s(&out), "--duration", &secs.to_string()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn synth_counts_rows_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let scene = p(&dir, "a.scene");
    fs::write(&scene, scene_text(1, 3, "")).unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    for out in [&a, &b] {
        let o = run(&["synth", "--scene", s(&scene), "--out", s(out), "--duration", "120", "--seed", "9"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 6001);
    assert!(text.starts_with("ts_us,a1,"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    // environment seed wins over the flag
    let c = p(&dir, "c.csv");
    let o = bin()
        .args(["synth", "--scene", s(&scene), "--out", s(&c), "--duration", "120", "--seed", "1"])
        .env("BODYAUTH_SEED", "9")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn zero_noise_scene_rows_identical() {
    let dir = TempDir::new().unwrap();
    let scene = p(&dir, "z.scene");
    let noise = "[noise]\nsigma_s = 0\nsigma_b = 0\nsigma_m = 0\ncfo_delta_t = 0\namp_jitter_sigma = 0\nmotion_amp = 0\n";
    fs::write(&scene, scene_text(0, 1, "") + noise).unwrap();
    let out = p(&dir, "z.csv");
    let o = run(&["synth", "--scene", s(&scene), "--out", s(&out), "--duration", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).map(|l| l.split_once(',').unwrap().1).collect();
    assert_eq!(rows.len(), 100);
    assert!(rows.iter().all(|r| *r == rows[0]));
}

#[test]
fn bad_scene_reports_line() {
    let dir = TempDir::new().unwrap();
    let scene = p(&dir, "bad.scene");
    fs::write(&scene, "[scene]\nseed = 1\ncolour = blue\n").unwrap();
    let o = run(&["synth", "--scene", s(&scene), "--out", s(&p(&dir, "x.csv")), "--duration", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("line 3") && e.contains("colour"), "{e}");
}

#[test]
fn register_defaults_and_guards() {
    let dir = TempDir::new().unwrap();
    let two_min = synth_file(&dir, "r", 2, 4, 120.0);
    let prof = p(&dir, "r.json");
    let o = run(&["register", "--in", s(&two_min), "--out", s(&prof)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).matches("samples=30").count(), 4);
    let profile = RegisteredProfile::load(&prof).unwrap();
    assert_eq!(profile.t, 4);
    assert!(profile.periods.iter().all(|p| p.sample_count == 30));

    let one_min = synth_file(&dir, "m", 2, 5, 60.0);
    let o = run(&["register", "--in", s(&one_min), "--periods", "2", "--out", s(&prof)]);
    assert!(o.status.success());
    assert_eq!(RegisteredProfile::load(&prof).unwrap().t, 2);

    let half = synth_file(&dir, "h", 2, 6, 30.0);
    let o = run(&["register", "--in", s(&half), "--out", s(&p(&dir, "h.json"))]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("120.0 s") && e.contains("30.0 s"), "{e}");
}

fn acceptance_rate(out: &str) -> f64 {
    let last = out.lines().last().unwrap();
    assert!(last.starts_with("acceptance_rate "), "{last}");
    last.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn auth_self_impostor_and_errors() {
    let dir = TempDir::new().unwrap();
    let own = synth_file(&dir, "own", 3, 1, 180.0);
    let other = synth_file(&dir, "other", 7, 2, 60.0);
    let prof = p(&dir, "own.json");
    assert!(run(&["register", "--in", s(&own), "--out", s(&prof)]).status.success());

    let o = run(&["auth", "--profile", s(&prof), "--in", s(&own)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 181);
    let first: Vec<&str> = out.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(first.len(), 4);
    assert!(first[3] == "ACCEPT" || first[3] == "REJECT");
    assert!(acceptance_rate(&out) >= 0.9);

    let o = run(&["auth", "--profile", s(&prof), "--in", s(&other)]);
    assert!(o.status.success());
    assert!(acceptance_rate(&stdout(&o)) <= 0.2);

    let empty = p(&dir, "empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(run(&["auth", "--profile", s(&prof), "--in", s(&empty)]).status.code(), Some(2));

    // 10-subcarrier stream against a 30-subcarrier profile
    let narrow = p(&dir, "narrow.scene");
    fs::write(&narrow, scene_text(3, 1, "subcarriers = 10")).unwrap();
    let narrow_csv = p(&dir, "narrow.csv");
    assert!(run(&["synth", "--scene", s(&narrow), "--out", s(&narrow_csv), "--duration", "20"]).status.success());
    let o = run(&["auth", "--profile", s(&prof), "--in", s(&narrow_csv)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension mismatch"));
}

#[test]
fn file_round_trip_matches_in_memory() {
    let dir = TempDir::new().unwrap();
    let own = synth_file(&dir, "own", 5, 8, 150.0);
    let prof = p(&dir, "own.json");
    assert!(run(&["register", "--in", s(&own), "--out", s(&prof)]).status.success());
    let o = run(&["auth", "--profile", s(&prof), "--in", s(&own)]);
    let cli_lines: Vec<String> = stdout(&o).lines().map(String::from).collect();

    let series = read_csv_file(&own).unwrap();
    let profile = register_series(&series, 4, &RegistrationOptions::default()).unwrap();
    assert_eq!(profile, RegisteredProfile::load(&prof).unwrap());
    let decisions = authenticate_series(&profile, &series).unwrap();
    for (i, d) in decisions.iter().enumerate() {
        let expected = format!(
            "{i} {:.6e} {} {}",
            d.best_score(),
            d.best_period,
            if d.accepted { "ACCEPT" } else { "REJECT" }
        );
        assert_eq!(cli_lines[i], expected);
    }
}

fn handoff_stream(dir: &TempDir) -> PathBuf {
    let own = synthesize_csi(&synthetic_subject_scene(0, 11), 30.0 + 60.0).unwrap();
    let other = synthesize_csi(&synthetic_subject_scene(4, 12), 40.0).unwrap();
    let offset = own.frames.last().unwrap().timestamp_us + 20_000;
    let mut frames = own.frames;
    frames.extend(other.frames.into_iter().map(|mut f| {
        f.timestamp_us += offset;
        f
    }));
    let path = p(dir, "handoff.csv");
    write_csv_file(&CsiSeries { rate_hz: 50.0, frames }, &path).unwrap();
    path
}

const DESK_CONFIG: &str = "periods = 2\nperiod_secs = 15\nauth_interval_s = 20\n";

#[test]
fn run_self_stream_and_handoff() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "run.cfg");
    fs::write(&cfg, DESK_CONFIG).unwrap();

    let own = synth_file(&dir, "own", 0, 11, 90.0);
    let o = run(&["run", "--config", s(&cfg), "--in", s(&own)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let kinds: Vec<String> = stdout(&o).lines().map(|l| l.split_whitespace().nth(1).unwrap().to_string()).collect();
    assert_eq!(kinds, ["REGISTERED", "AUTH_OK", "AUTH_OK", "AUTH_OK"]);

    let handoff = handoff_stream(&dir);
    let o = run(&["run", "--config", s(&cfg), "--in", s(&handoff)]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l.split_whitespace().nth(1) == Some("LOCKED_OUT")));
}

#[test]
fn run_reads_stdin_and_counts_malformed_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "run.cfg");
    fs::write(&cfg, DESK_CONFIG).unwrap();
    let own = synth_file(&dir, "own", 0, 11, 10.0);
    let mut text = fs::read_to_string(&own).unwrap();
    text.push_str("999999999,1,2\n");
    let mut child = bin()
        .args(["run", "--config", s(&cfg), "--in", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    // stream ends mid-registration
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1);
    assert!(out.contains(" WARN ") && out.contains("no profile"), "{out}");
    let e = stderr(&o);
    assert!(e.contains("malformed=1") && e.contains("frames=500"), "{e}");
}

#[test]
fn run_rejects_bad_config() {
    let dir = TempDir::new().unwrap();
    let cfg = p(&dir, "run.cfg");
    fs::write(&cfg, "periods = 2\nspeed = 3\n").unwrap();
    let own = synth_file(&dir, "own", 0, 1, 2.0);
    let o = run(&["run", "--config", s(&cfg), "--in", s(&own)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"));
}

#[test]
fn evaluate_small_directory() {
    let dir = TempDir::new().unwrap();
    let subjects = dir.path().join("subjects");
    fs::create_dir(&subjects).unwrap();
    for i in 0..3u64 {
        let series = synthesize_csi(&synthetic_subject_scene(i, 40 + i), 180.0).unwrap();
        write_csv_file(&series, subjects.join(format!("s{i}.csv"))).unwrap();
    }
    let report = p(&dir, "report.json");
    let args = [
        "evaluate",
        "--subjects",
        s(&subjects),
        "--interval-min",
        "0.5",
        "--horizon-min",
        "1",
        "--report",
        s(&report),
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("mean_defending_precision"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["mii_minutes", "maa", "mdp", "histogram", "confusion", "latency_ms"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for stage in ["filter", "features", "match"] {
        assert!(v["latency_ms"][stage]["median"].is_number());
    }
    assert!(v["mdp"].as_f64().unwrap() >= 0.9);

    // duplicated subjects cannot be told apart
    let dup = dir.path().join("dup");
    fs::create_dir(&dup).unwrap();
    fs::copy(subjects.join("s0.csv"), dup.join("a.csv")).unwrap();
    fs::copy(subjects.join("s0.csv"), dup.join("b.csv")).unwrap();
    let mut dup_args = args;
    dup_args[2] = s(&dup);
    let o = run(&dup_args);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert!(v["mdp"].as_f64().unwrap() <= 0.05);

    fs::remove_file(dup.join("b.csv")).unwrap();
    assert_eq!(run(&dup_args).status.code(), Some(1));
}

#[test]
fn bench_prints_stage_table() {
    let dir = TempDir::new().unwrap();
    let f = synth_file(&dir, "b", 1, 2, 20.0);
    let o = run(&["bench", "--in", s(&f), "--iters", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for stage in ["filter", "features", "match", "total"] {
        assert!(out.lines().any(|l| l.starts_with(stage)), "{out}");
    }
    assert_eq!(run(&["bench", "--in", s(&f), "--iters", "5"]).status.code(), Some(2));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&["synth", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    for sub in ["synth", "register", "auth", "run", "evaluate", "bench"] {
        let o = run(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        assert!(stdout(&o).contains("Usage"));
    }
}
