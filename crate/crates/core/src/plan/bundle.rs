//! Scene bundle for the 3D viewer.
//!
//! A bundle is a directory holding `bundle.json` and ASCII PLY payloads. The
//! manifest carries the scene description, the registered array, every
//! candidate trajectory and, for each plan, the exact strings the viewer
//! shows, so the viewer never formats or recomputes a number itself.
//!
//! The viewer posts back a [`SelectionRecord`], stored as `selection.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::register::FitReport;
use super::text::emit_plan_text;
use super::{CandidateSet, EntryKind, InsertionPlan, SelectionRecord};
use crate::array::RestingShape;
use crate::geometry::io::{
    read_json, write_json, write_mesh, MeshFormat, MeshRef, SceneManifest, UNITS,
};
use crate::geometry::{CochlearScene, Point, RigidTransform};
use crate::{fixed, Error, Result};

pub const BUNDLE_FORMAT: &str = "cochlea-plan-bundle";
pub const BUNDLE_VERSION: u32 = 1;
pub const BUNDLE_FILE: &str = "bundle.json";
pub const SELECTION_FILE: &str = "selection.json";

/// Tube segments used when the nerve and chorda are meshed for display.
const TUBE_SEGMENTS: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisplayMeshes {
    pub facial_nerve: MeshRef,
    pub chorda: MeshRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleArray {
    pub pose: RigidTransform,
    /// Posed contact centers, tip first.
    pub contacts: Vec<Point>,
    /// Posed depth markers, distal to proximal.
    pub markers: [Point; 3],
    /// Posed centerline, proximal end first.
    pub centerline: Vec<Point>,
}

/// Preformatted strings for one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDisplay {
    pub entry_site: String,
    pub clearance_fn: String,
    pub clearance_chorda: String,
    pub clearance_ossicles: String,
    pub tilt: String,
    pub curl_clock: String,
    pub entry_clock: String,
    pub base_depth: String,
    pub overinsert_depth: String,
    pub text: String,
}

impl PlanDisplay {
    pub fn new(plan: &InsertionPlan) -> Result<Self> {
        Ok(PlanDisplay {
            entry_site: plan.entry.kind.display_name().to_string(),
            clearance_fn: format!("{} mm", fixed(plan.clearance_fn, 1)),
            clearance_chorda: format!("{} mm", fixed(plan.clearance_chorda, 1)),
            clearance_ossicles: format!("{} mm", fixed(plan.clearance_ossicles, 0)),
            tilt: format!("{} degrees", fixed(plan.tilt_deg, 0)),
            curl_clock: plan.curl_clock.to_string(),
            entry_clock: plan
                .entry_clock
                .map_or_else(|| "center".to_string(), |c| c.to_string()),
            base_depth: format!("{} mm", fixed(plan.base_depth, 1)),
            overinsert_depth: format!("{} mm", fixed(plan.overinsert_depth, 1)),
            text: emit_plan_text(plan)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: EntryKind,
    /// Outer end of the approach segment, then the entry point.
    pub segment: [Point; 2],
    pub rw_intersection: Point,
    pub plan: InsertionPlan,
    pub display: PlanDisplay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub units: String,
    pub case_id: String,
    pub scene: SceneManifest,
    pub display_meshes: DisplayMeshes,
    pub array: BundleArray,
    pub registration: FitReport,
    pub trajectories: Vec<Trajectory>,
}

impl BundleManifest {
    pub fn trajectory(&self, kind: EntryKind) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.kind == kind)
    }
}

/// Writes a bundle for `set` into `dir` and returns the manifest path.
pub fn export_bundle(
    dir: &Path,
    case_id: &str,
    scene: &CochlearScene,
    shape: &RestingShape,
    set: &CandidateSet,
    approach_length: f64,
) -> Result<PathBuf> {
    if set.plans.is_empty() {
        return Err(Error::InvalidParameter(
            "bundle needs at least one plan".into(),
        ));
    }
    if case_id.trim().is_empty() {
        return Err(Error::InvalidParameter("case id is empty".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let scene_manifest = SceneManifest::write_meshes(scene, dir, "", MeshFormat::Ply)?;
    let mut display = Vec::new();
    for (tube, label) in [
        (&scene.facial_nerve, "facial_nerve"),
        (&scene.chorda, "chorda"),
    ] {
        let mesh = tube.to_mesh(label, TUBE_SEGMENTS)?;
        let file = format!("{label}_display.ply");
        write_mesh(&mesh, &dir.join(&file))?;
        display.push(MeshRef {
            file,
            label: label.to_string(),
            vertex_count: mesh.vertices().len(),
            triangle_count: mesh.triangles().len(),
        });
    }
    let chorda = display.pop().unwrap();
    let facial_nerve = display.pop().unwrap();

    let pose = set.registration.transform;
    let posed = shape.posed(&pose);
    let mut trajectories = Vec::with_capacity(set.plans.len());
    for plan in &set.plans {
        let entry = plan.entry.point;
        trajectories.push(Trajectory {
            kind: plan.entry.kind,
            segment: [entry - plan.vector * approach_length, entry],
            rw_intersection: plan
                .rw_intersection(&scene.frame.rw_center, &scene.frame.rw_plane_normal)?,
            plan: plan.clone(),
            display: PlanDisplay::new(plan)?,
        });
    }
    let manifest = BundleManifest {
        format: BUNDLE_FORMAT.into(),
        version: BUNDLE_VERSION,
        units: UNITS.into(),
        case_id: case_id.into(),
        scene: scene_manifest,
        display_meshes: DisplayMeshes {
            facial_nerve,
            chorda,
        },
        array: BundleArray {
            pose,
            contacts: posed.contact_centers,
            markers: posed.marker_points,
            centerline: posed.centerline,
        },
        registration: set.registration.report.clone(),
        trajectories,
    };
    let path = dir.join(BUNDLE_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Reads a bundle manifest, from either the directory or `bundle.json`.
pub fn read_manifest(path: &Path) -> Result<BundleManifest> {
    let file = if path.is_dir() {
        path.join(BUNDLE_FILE)
    } else {
        path.to_path_buf()
    };
    let m: BundleManifest = read_json(&file)?;
    if m.format != BUNDLE_FORMAT || m.version != BUNDLE_VERSION {
        return Err(Error::Format(format!(
            "{}: expected {BUNDLE_FORMAT} version {BUNDLE_VERSION}, found {} version {}",
            file.display(),
            m.format,
            m.version
        )));
    }
    if m.units != UNITS {
        return Err(Error::Format(format!(
            "{}: units must be {UNITS}",
            file.display()
        )));
    }
    Ok(m)
}

/// Reads a bundle and reloads its scene from the mesh payloads.
pub fn import_bundle(path: &Path) -> Result<(BundleManifest, CochlearScene)> {
    let m = read_manifest(path)?;
    let dir = if path.is_dir() {
        path
    } else {
        path.parent().unwrap_or(Path::new("."))
    };
    let scene = m.scene.load(dir)?;
    Ok((m, scene))
}

pub fn write_selection(path: &Path, record: &SelectionRecord) -> Result<()> {
    record.validate()?;
    write_json(path, record)
}

pub fn read_selection(path: &Path) -> Result<SelectionRecord> {
    let r: SelectionRecord = read_json(path)?;
    r.validate()?;
    Ok(r)
}

/// Parses a posted selection body and checks it against the bundle.
pub fn parse_selection(body: &str, manifest: &BundleManifest) -> Result<SelectionRecord> {
    let r: SelectionRecord =
        serde_json::from_str(body).map_err(|e| Error::Format(format!("selection record: {e}")))?;
    r.validate()?;
    if r.case_id != manifest.case_id {
        return Err(Error::InvalidParameter(format!(
            "selection is for case `{}`, bundle is `{}`",
            r.case_id, manifest.case_id
        )));
    }
    if manifest.trajectory(r.selected_entry_kind).is_none() {
        return Err(Error::InvalidParameter(format!(
            "bundle has no {} plan",
            r.selected_entry_kind
        )));
    }
    Ok(r)
}
