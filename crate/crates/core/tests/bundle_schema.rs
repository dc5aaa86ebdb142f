//! Scene bundle, scene manifest and selection record against the shipped
//! JSON schemas, plus round trips through the files.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use cochlea_plan::array::{build_resting_shape, ArraySpec};
use cochlea_plan::geometry::io::{read_scene, write_scene, MeshFormat};
use cochlea_plan::geometry::{synth_cochlea, CochlearScene, SpiralParams, TriMesh};
use cochlea_plan::plan::bundle::{
    export_bundle, import_bundle, parse_selection, read_manifest, read_selection, write_selection,
    BUNDLE_FILE,
};
use cochlea_plan::plan::{candidate_plans, EntryKind, PlanConfig, SelectionRecord};
use serde_json::Value;

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(schema: &Value, instance: &Value) {
    let v = jsonschema::validator_for(schema).unwrap();
    let errors: Vec<String> = v
        .iter_errors(instance)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

struct Fixture {
    dir: PathBuf,
    scene: CochlearScene,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("bundle_schema");
        let _ = fs::remove_dir_all(&dir);
        let scene = synth_cochlea(&SpiralParams {
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let shape = build_resting_shape(&ArraySpec::default()).unwrap();
        let cfg = PlanConfig::default();
        let set = candidate_plans(&scene, &shape, &cfg).unwrap();
        export_bundle(&dir, "case-2", &scene, &shape, &set, cfg.approach_length).unwrap();
        Fixture { dir, scene }
    })
}

fn bundle_json() -> Value {
    serde_json::from_str(&fs::read_to_string(fixture().dir.join(BUNDLE_FILE)).unwrap()).unwrap()
}

/// Same triangles with corners within 1e-9 mm; vertex numbering may differ.
fn same_mesh(a: &TriMesh, b: &TriMesh) {
    assert_eq!(a.triangles().len(), b.triangles().len());
    assert_eq!(a.vertices().len(), b.vertices().len());
    for i in 0..a.triangles().len() {
        for (p, q) in a.triangle(i).iter().zip(&b.triangle(i)) {
            assert!((p - q).norm() <= 1e-9, "triangle {i}");
        }
    }
}

#[test]
fn bundle_validates_against_its_schema() {
    let bundle = bundle_json();
    assert_valid(&schema("bundle.schema.json"), &bundle);
    assert_eq!(bundle["trajectories"].as_array().unwrap().len(), 3);
}

#[test]
fn bundle_embeds_the_scene_schema() {
    let bundle = schema("bundle.schema.json");
    let scene = schema("scene.schema.json");
    for key in ["type", "properties", "required", "additionalProperties"] {
        assert_eq!(bundle["$defs"]["scene"][key], scene[key], "{key}");
    }
    for (name, def) in scene["$defs"].as_object().unwrap() {
        assert_eq!(&bundle["$defs"][name], def, "{name}");
    }
}

#[test]
fn scene_manifest_validates_and_round_trips() {
    let f = fixture();
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("scene_round_trip");
    for format in [MeshFormat::Ply, MeshFormat::Stl] {
        let _ = fs::remove_dir_all(&dir);
        let path = write_scene(&f.scene, &dir, format).unwrap();
        let json: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_valid(&schema("scene.schema.json"), &json);
        let back = read_scene(&dir).unwrap();
        same_mesh(&back.st, &f.scene.st);
        same_mesh(&back.modiolar_wall, &f.scene.modiolar_wall);
        same_mesh(&back.ossicles, &f.scene.ossicles);
        assert_eq!(back.frame, f.scene.frame);
        assert_eq!(back.st_centerline, f.scene.st_centerline);
        assert_eq!(back.facial_nerve, f.scene.facial_nerve);
    }
}

#[test]
fn bundle_round_trips_the_scene() {
    let f = fixture();
    let (manifest, scene) = import_bundle(&f.dir).unwrap();
    assert_eq!(manifest.case_id, "case-2");
    same_mesh(&scene.st, &f.scene.st);
    same_mesh(&scene.sv, &f.scene.sv);
    same_mesh(&scene.modiolar_wall, &f.scene.modiolar_wall);
    same_mesh(&scene.ossicles, &f.scene.ossicles);
    assert_eq!(scene.frame, f.scene.frame);
    assert_eq!(scene.chorda, f.scene.chorda);
    assert_eq!(scene.round_window, f.scene.round_window);
    let kinds: Vec<EntryKind> = manifest.trajectories.iter().map(|t| t.kind).collect();
    assert_eq!(kinds, EntryKind::ALL.to_vec());
}

#[test]
fn display_strings_are_the_plan_values() {
    let m = read_manifest(&fixture().dir).unwrap();
    for t in &m.trajectories {
        let d = serde_json::to_value(&t.display).unwrap();
        assert_eq!(
            d["curl_clock"],
            Value::String(t.plan.curl_clock.to_string())
        );
        let text = cochlea_plan::plan::emit_plan_text(&t.plan).unwrap();
        for v in d.as_object().unwrap().values() {
            if let Some(s) = v.as_str() {
                assert!(text.contains(s), "`{s}` missing from the plan text");
            }
        }
    }
}

#[test]
fn selection_records_round_trip_and_are_checked() {
    let f = fixture();
    let m = read_manifest(&f.dir).unwrap();
    let sel_schema = schema("selection.schema.json");
    for kind in EntryKind::ALL {
        let r = SelectionRecord {
            case_id: "case-2".into(),
            selected_entry_kind: kind,
            timestamp: "2026-03-01T09:30:00Z".into(),
        };
        let path = Path::new(env!("CARGO_TARGET_TMPDIR")).join(format!("selection-{kind}.json"));
        write_selection(&path, &r).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_valid(&sel_schema, &serde_json::from_str(&text).unwrap());
        assert_eq!(read_selection(&path).unwrap(), r);
        assert_eq!(
            parse_selection(&text, &m).unwrap().selected_entry_kind,
            kind
        );
    }
    let bad = [
        r#"{"case_id":"other","selected_entry_kind":"RW_CENTER","timestamp":"2026-03-01T09:30:00Z"}"#,
        r#"{"case_id":"case-2","selected_entry_kind":"CENTER","timestamp":"2026-03-01T09:30:00Z"}"#,
        r#"{"case_id":"case-2","selected_entry_kind":"RW_CENTER","timestamp":"yesterday"}"#,
        r#"{"case_id":"case-2","selected_entry_kind":"RW_CENTER","timestamp":"2026-03-01T09:30:00Z","extra":1}"#,
        r#"{"case_id":"case-2","selected_entry_kind":"RW_CENTER"}"#,
        "not json",
    ];
    let validator = jsonschema::validator_for(&sel_schema).unwrap();
    for body in bad {
        assert!(parse_selection(body, &m).is_err(), "{body}");
        if let Ok(v) = serde_json::from_str::<Value>(body) {
            // the case id is checked against the bundle, not the schema
            if v["case_id"] != "other" {
                assert!(!validator.is_valid(&v), "{body}");
            }
        }
    }
}

#[test]
fn corrupted_manifests_are_rejected() {
    let f = fixture();
    let original = fs::read_to_string(f.dir.join(BUNDLE_FILE)).unwrap();
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("corrupt_bundle");
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    for entry in fs::read_dir(&f.dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "ply") {
            fs::copy(&p, dir.join(p.file_name().unwrap())).unwrap();
        }
    }
    let mut wrong_count: Value = serde_json::from_str(&original).unwrap();
    wrong_count["scene"]["meshes"]["st"]["vertex_count"] = Value::from(3);
    let mut wrong_units: Value = serde_json::from_str(&original).unwrap();
    wrong_units["units"] = Value::from("cm");
    let cases = [
        original[..original.len() / 2].to_string(),
        original.replace("cochlea-plan-bundle", "something-else"),
        wrong_count.to_string(),
        wrong_units.to_string(),
    ];
    let bundle_schema = schema("bundle.schema.json");
    let validator = jsonschema::validator_for(&bundle_schema).unwrap();
    for text in cases {
        fs::write(dir.join(BUNDLE_FILE), &text).unwrap();
        assert!(import_bundle(&dir).is_err());
        if let Ok(v) = serde_json::from_str::<Value>(&text) {
            if v["scene"]["meshes"]["st"]["vertex_count"] != 3 {
                assert!(!validator.is_valid(&v));
            }
        }
    }
    fs::write(dir.join(BUNDLE_FILE), &original).unwrap();
    fs::write(dir.join("st.ply"), "ply\nformat ascii 1.0\n").unwrap();
    assert!(import_bundle(&dir).is_err());
}
