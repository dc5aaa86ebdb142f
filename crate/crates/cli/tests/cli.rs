//! The `cochlea-plan` binary end to end.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::OnceLock;

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cochlea-plan"));
    c.env_remove("SOURCE_DATE_EPOCH")
        .env_remove("COCHLEA_PLAN_DATA");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A synthetic scene and its bundle, shared by the tests that only read them.
struct Case {
    _root: TempDir,
    scene: PathBuf,
    bundle: PathBuf,
}

fn case() -> &'static Case {
    static CASE: OnceLock<Case> = OnceLock::new();
    CASE.get_or_init(|| {
        let root = tempfile::tempdir().unwrap();
        let scene = root.path().join("scene");
        let bundle = root.path().join("bundle");
        assert!(run(&["synth", "--seed", "3", "--out", s(&scene)])
            .status
            .success());
        let o = run(&[
            "plan",
            "--scene",
            s(&scene),
            "--out",
            s(&bundle),
            "--case-id",
            "case-3",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        Case {
            _root: root,
            scene,
            bundle,
        }
    })
}

fn assert_usage_error(o: &Output) {
    assert_eq!(o.status.code(), Some(2), "{}", stderr(o));
    let err = stderr(o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[usage]: "), "{err}");
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["synth", "--seed", "11", "--format", "stl", "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o).trim(), s(&out.join("scene.json")));
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "st.stl"));
    for n in &names {
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n:?}"
        );
    }
    let other = dir.path().join("c");
    run(&[
        "synth",
        "--seed",
        "12",
        "--format",
        "stl",
        "--out",
        s(&other),
    ]);
    assert_ne!(
        fs::read(a.join("st.stl")).unwrap(),
        fs::read(other.join("st.stl")).unwrap()
    );
}

#[test]
fn plan_lists_the_three_candidates_and_writes_a_bundle() {
    let c = case();
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(c.bundle.join("bundle.json")).unwrap()).unwrap();
    assert_eq!(manifest["case_id"], "case-3");
    assert_eq!(manifest["trajectories"].as_array().unwrap().len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["plan", "--scene", s(&c.scene), "--out", s(dir.path())]);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4, "{text}");
    for (line, name) in lines.iter().zip(["center", "slight", "substantial"]) {
        assert!(
            line.starts_with(&format!("{name}: facial nerve ")),
            "{line}"
        );
    }
    assert!(!dir.path().join("plan.txt").exists());
}

#[test]
fn plan_with_a_selection_prints_the_text_plan() {
    let c = case();
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "plan",
        "--scene",
        s(&c.scene),
        "--out",
        s(dir.path()),
        "--select",
        "substantial",
        "--case-id",
        "case-3",
        "--timestamp",
        "2026-03-01T09:30:00Z",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("plan.txt")).unwrap();
    assert_eq!(stdout(&o), text);
    let paragraphs: Vec<&str> = text.trim_end().split("\n\n").collect();
    assert_eq!(paragraphs.len(), 4);
    assert_eq!(paragraphs[0], "Entry site: Substantially Extended RW.");
    assert!(paragraphs[1].starts_with(
        "Insertion vector: Distance of the insertion trajectory from the facial nerve: "
    ));
    assert!(paragraphs[2].starts_with("Base insertion depth: "));
    assert!(paragraphs[3].starts_with("Pullback: "));
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("selection.json")).unwrap())
            .unwrap();
    assert_eq!(
        record,
        serde_json::json!({
            "case_id": "case-3",
            "selected_entry_kind": "SUBSTANTIAL_EXTENDED_RW",
            "timestamp": "2026-03-01T09:30:00Z"
        })
    );
}

#[test]
fn source_date_epoch_stamps_the_selection() {
    let c = case();
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "plan",
            "--scene",
            s(&c.bundle),
            "--out",
            s(dir.path()),
            "--select",
            "center",
        ])
        .env("SOURCE_DATE_EPOCH", "1767225600")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let record = fs::read_to_string(dir.path().join("selection.json")).unwrap();
    assert!(record.contains("\"2026-01-01T00:00:00Z\""), "{record}");
    assert!(record.contains("\"case-3\""), "{record}");
}

#[test]
fn usage_errors_exit_2_with_one_line() {
    let c = case();
    assert_usage_error(&run(&["bogus"]));
    assert_usage_error(&run(&["synth"]));
    assert_usage_error(&run(&[
        "plan",
        "--scene",
        "/no/such/scene",
        "--out",
        "/tmp/x",
    ]));
    assert_usage_error(&run(&["power", "--mode", "sideways"]));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("config.json");
    fs::write(&bad, r#"{"array": {"contacts": 3}}"#).unwrap();
    assert_usage_error(&run(&[
        "plan",
        "--scene",
        s(&c.scene),
        "--out",
        s(dir.path()),
        "--config",
        s(&bad),
    ]));
    let o = run(&[
        "plan",
        "--scene",
        s(&c.scene),
        "--out",
        s(dir.path()),
        "--select",
        "middle",
    ]);
    assert_usage_error(&o);
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
}

#[test]
fn computation_errors_exit_1_with_one_line() {
    let c = case();
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("scene");
    fs::create_dir(&broken).unwrap();
    for e in fs::read_dir(&c.scene).unwrap() {
        let p = e.unwrap().path();
        fs::copy(&p, broken.join(p.file_name().unwrap())).unwrap();
    }
    fs::write(broken.join("st.ply"), "ply\nformat ascii 1.0\nend_header\n").unwrap();
    let o = run(&[
        "plan",
        "--scene",
        s(&broken),
        "--out",
        s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(
        err.starts_with("error[") && !err.starts_with("error[usage]"),
        "{err}"
    );

    // a selection for another case is rejected by the bundle
    let sel = dir.path().join("sel.json");
    fs::write(
        &sel,
        r#"{"case_id":"case-9","selected_entry_kind":"RW_CENTER","timestamp":"2026-03-01T09:30:00Z"}"#,
    )
    .unwrap();
    let o = run(&[
        "plan",
        "--scene",
        s(&c.bundle),
        "--out",
        s(&dir.path().join("o2")),
        "--selection",
        s(&sel),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn outputs_never_overwrite_inputs() {
    let c = case();
    let before = fs::read(c.scene.join("scene.json")).unwrap();
    assert_usage_error(&run(&[
        "plan",
        "--scene",
        s(&c.scene),
        "--out",
        s(&c.scene),
    ]));
    assert_usage_error(&run(&[
        "export-scene",
        "--scene",
        s(&c.bundle),
        "--out",
        s(&c.bundle),
    ]));
    assert_eq!(fs::read(c.scene.join("scene.json")).unwrap(), before);
    assert!(!c.scene.join("bundle.json").exists());
}

#[test]
fn export_scene_turns_a_bundle_back_into_a_scene() {
    let c = case();
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "export-scene",
        "--scene",
        s(&c.bundle),
        "--out",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(c.scene.join("scene.json")).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("scene.json")).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(c.scene.join("st.ply")).unwrap(),
        fs::read(dir.path().join("st.ply")).unwrap()
    );
}

#[test]
fn stats_prints_the_cell_diff() {
    let o = run(&["stats", "--cohort", s(&data_dir())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let last = text.lines().last().unwrap();
    assert!(
        last.ends_with(" FAIL") && last.contains(" cells: "),
        "{last}"
    );
    assert!(text
        .lines()
        .any(|l| l.starts_with("PASS Table 3 | Control WT | AID")));

    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["stats", "--out", s(dir.path())])
        .env("COCHLEA_PLAN_DATA", data_dir())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), text);
    for f in ["report.txt", "report.csv", "regression.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_usage_error(&run(&["stats", "--cohort", "/no/such/cohort"]));
}

#[test]
fn power_accepts_every_mode() {
    let dir = tempfile::tempdir().unwrap();
    for mode in ["observed-ratio", "equal", "fixed-control=60", "ratio=2:1"] {
        let out = dir.path().join(format!("{mode}.csv"));
        let o = run(&[
            "power",
            "--mode",
            mode,
            "--replicates",
            "200",
            "--seed",
            "3",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{mode}: {}", stderr(&o));
        let text = stdout(&o);
        for metric in ["AID", "MMD", "AMD"] {
            assert!(
                text.contains(&format!("Power | {metric} | required n")),
                "{text}"
            );
        }
        assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 4);
    }
    for bad in ["ratio=0:3", "fixed-control=x", "ratio=3"] {
        assert_usage_error(&run(&["power", "--mode", bad]));
    }
}

#[test]
fn metrics_writes_one_row_per_record() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.json");
    fs::write(
        &records,
        r#"[
            {"case_id": "A", "planned_base_depth": -0.5, "actual_base_depth": -0.9,
             "precomputed": {"aid_deg": 441.4, "mmd_mm": 0.314, "amd_mm": 0.2,
                             "scalar_label": "ST", "fold_flag": false}},
            {"case_id": "B",
             "precomputed": {"aid_deg": 388, "mmd_mm": 0.5, "amd_mm": 0.45,
                             "scalar_label": "ST/SV", "fold_flag": true}}
        ]"#,
    )
    .unwrap();
    let o = run(&["metrics", "--records", s(&records)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "case_id,d_mm,scalar,fold,aid_deg,aid_error_deg,mmd_mm,amd_mm,max_extent_deg\n\
         A,-0.40,ST,N,441,-9,0.31,0.20,\n\
         B,,ST/SV,Y,388,-62,0.50,0.45,\n"
    );
    fs::write(&records, r#"[{"case_id": "C"}]"#).unwrap();
    let o = run(&["metrics", "--records", s(&records)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

/// Sends one request and returns the status code and body.
fn http(addr: &str, method: &str, path: &str, body: &str) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status = response.split(' ').nth(1).unwrap().parse().unwrap();
    let body = response
        .split_once("\r\n\r\n")
        .map(|(_, b)| b.to_string())
        .unwrap_or_default();
    (status, body)
}

#[test]
fn served_selection_is_read_back_by_plan() {
    let c = case();
    let dir = tempfile::tempdir().unwrap();
    let bundle = dir.path().join("bundle");
    fs::create_dir(&bundle).unwrap();
    for e in fs::read_dir(&c.bundle).unwrap() {
        let p = e.unwrap().path();
        fs::copy(&p, bundle.join(p.file_name().unwrap())).unwrap();
    }
    let mut child = bin()
        .args([
            "serve",
            "--bundle",
            s(&bundle),
            "--addr",
            "127.0.0.1:0",
            "--once",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .unwrap();
    let addr = first
        .trim()
        .strip_prefix("listening on http://")
        .unwrap()
        .to_string();

    let (status, body) = http(&addr, "GET", "/bundle", "");
    assert_eq!(status, 200);
    assert_eq!(
        body.as_bytes(),
        fs::read(bundle.join("bundle.json")).unwrap()
    );
    assert_eq!(http(&addr, "GET", "/bundle/st.ply", "").0, 200);
    assert_eq!(http(&addr, "GET", "/bundle/../scene.json", "").0, 404);
    assert_eq!(http(&addr, "GET", "/selection", "").0, 404);
    let (status, body) = http(&addr, "POST", "/selection", r#"{"case_id":"case-3"}"#);
    assert_eq!(status, 400, "{body}");
    let record = r#"{"case_id":"case-3","selected_entry_kind":"SLIGHT_EXTENDED_RW","timestamp":"2026-03-01T09:30:00Z"}"#;
    let (status, body) = http(&addr, "POST", "/selection", record);
    assert_eq!(status, 201, "{body}");
    assert!(child.wait().unwrap().success());
    assert!(bundle.join("selection.json").exists());

    let out = dir.path().join("final");
    let o = run(&["plan", "--scene", s(&bundle), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("Entry site: Slightly Extended RW.\n"));
    let back: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("selection.json")).unwrap()).unwrap();
    assert_eq!(
        back,
        serde_json::from_str::<serde_json::Value>(record).unwrap()
    );
}

#[test]
fn a_second_selection_conflicts() {
    let c = case();
    let dir = tempfile::tempdir().unwrap();
    let sel = dir.path().join("chosen.json");
    let record = r#"{"case_id":"case-3","selected_entry_kind":"RW_CENTER","timestamp":"2026-03-01T09:30:00Z"}"#;
    fs::write(&sel, record).unwrap();
    let mut child = bin()
        .args([
            "serve",
            "--bundle",
            s(&c.bundle),
            "--addr",
            "127.0.0.1:0",
            "--selection-out",
            s(&sel),
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut first = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut first)
        .unwrap();
    let addr = first
        .trim()
        .strip_prefix("listening on http://")
        .unwrap()
        .to_string();
    let (status, body) = http(&addr, "GET", "/selection", "");
    assert_eq!(status, 200);
    assert_eq!(
        serde_json::from_str::<serde_json::Value>(&body).unwrap()["selected_entry_kind"],
        "RW_CENTER"
    );
    assert_eq!(http(&addr, "POST", "/selection", record).0, 409);
    assert_eq!(http(&addr, "PUT", "/selection", record).0, 405);
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(fs::read_to_string(&sel).unwrap(), record);
}
