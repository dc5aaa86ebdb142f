//! ASCII PLY / STL mesh files and the JSON scene manifest.
//!
//! Every file states its length unit. PLY carries a `comment units mm` header
//! line; STL has no metadata slot, so the unit goes on the `solid` line as
//! `solid <label> units=mm`. Readers reject any other unit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    CenterlineSample, CenterlineTube, CochlearFrame, CochlearScene, Point, RoundWindow, TriMesh,
};
use crate::{Error, Result};

pub const UNITS: &str = "mm";
pub const SCENE_FORMAT: &str = "cochlea-plan-scene";
pub const SCENE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshFormat {
    Ply,
    Stl,
}

impl MeshFormat {
    pub fn extension(self) -> &'static str {
        match self {
            MeshFormat::Ply => "ply",
            MeshFormat::Stl => "stl",
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("ply") => Ok(MeshFormat::Ply),
            Some("stl") => Ok(MeshFormat::Stl),
            _ => Err(Error::Format(format!(
                "{}: unknown mesh extension",
                path.display()
            ))),
        }
    }
}

pub fn ply_string(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(64 * mesh.vertices().len() + 32 * mesh.triangles().len());
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment units {UNITS}");
    let _ = writeln!(s, "comment label {}", mesh.label());
    let _ = writeln!(s, "element vertex {}", mesh.vertices().len());
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    let _ = writeln!(s, "element face {}", mesh.triangles().len());
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn parse_ply(text: &str, source: &str) -> Result<TriMesh> {
    let bad = |m: &str| Error::Format(format!("{source}: {m}"));
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing `ply` magic"));
    }
    let mut units = None;
    let mut label = None;
    let mut n_vertices = None;
    let mut n_faces = None;
    let mut vertex_props: Vec<String> = Vec::new();
    let mut current = "";
    loop {
        let line = lines
            .next()
            .ok_or_else(|| bad("unterminated header"))?
            .trim();
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                if words.next() != Some("ascii") {
                    return Err(bad("only ASCII PLY is supported"));
                }
            }
            Some("comment") => match words.next() {
                Some("units") => units = words.next().map(str::to_string),
                Some("label") => label = Some(words.collect::<Vec<_>>().join(" ")),
                _ => {}
            },
            Some("element") => {
                let name = words.next().unwrap_or("");
                let count: usize = words
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| bad("bad element count"))?;
                match name {
                    "vertex" => {
                        n_vertices = Some(count);
                        current = "vertex";
                    }
                    "face" => {
                        n_faces = Some(count);
                        current = "face";
                    }
                    _ => return Err(bad(&format!("unsupported element `{name}`"))),
                }
            }
            Some("property") if current == "vertex" => {
                vertex_props.push(words.last().unwrap_or("").to_string());
            }
            Some("property") | Some("obj_info") => {}
            Some("end_header") => break,
            Some(other) => return Err(bad(&format!("unexpected header line `{other}`"))),
            None => {}
        }
    }
    match units.as_deref() {
        Some(UNITS) => {}
        Some(u) => return Err(bad(&format!("units `{u}` are not {UNITS}"))),
        None => return Err(bad("missing `comment units` header")),
    }
    let axis = |n: &str| {
        vertex_props
            .iter()
            .position(|p| p == n)
            .ok_or_else(|| bad("vertex lacks x/y/z"))
    };
    let (ix, iy, iz) = (axis("x")?, axis("y")?, axis("z")?);
    let nv = n_vertices.ok_or_else(|| bad("no vertex element"))?;
    let nf = n_faces.unwrap_or(0);
    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let line = lines.next().ok_or_else(|| bad("truncated vertex list"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(&format!("bad number in vertex {k}")))?;
        if vals.len() != vertex_props.len() {
            return Err(bad(&format!("vertex {k} has {} values", vals.len())));
        }
        vertices.push(Point::new(vals[ix], vals[iy], vals[iz]));
    }
    let mut triangles = Vec::with_capacity(nf);
    for k in 0..nf {
        let line = lines.next().ok_or_else(|| bad("truncated face list"))?;
        let vals: Vec<u32> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(&format!("bad index in face {k}")))?;
        if vals.first() != Some(&3) || vals.len() != 4 {
            return Err(bad(&format!("face {k} is not a triangle")));
        }
        triangles.push([vals[1], vals[2], vals[3]]);
    }
    TriMesh::new(
        label.unwrap_or_else(|| source.to_string()),
        vertices,
        triangles,
    )
}

pub fn stl_string(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "solid {} units={UNITS}", mesh.label());
    for i in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle(i);
        let n = (b - a).cross(&(c - a)).normalize();
        let _ = writeln!(s, "  facet normal {} {} {}", n.x, n.y, n.z);
        s.push_str("    outer loop\n");
        for p in [a, b, c] {
            let _ = writeln!(s, "      vertex {} {} {}", p.x, p.y, p.z);
        }
        s.push_str("    endloop\n  endfacet\n");
    }
    let _ = writeln!(s, "endsolid {}", mesh.label());
    s
}

/// Parses ASCII STL, welding bit-identical vertices so closed meshes stay
/// closed.
pub fn parse_stl(text: &str, source: &str) -> Result<TriMesh> {
    let bad = |m: &str| Error::Format(format!("{source}: {m}"));
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let head = lines.next().ok_or_else(|| bad("empty file"))?;
    let mut words = head.split_whitespace();
    if words.next() != Some("solid") {
        return Err(bad("missing `solid` header"));
    }
    let mut label = Vec::new();
    let mut units = None;
    for w in words {
        match w.strip_prefix("units=") {
            Some(u) => units = Some(u),
            None => label.push(w),
        }
    }
    match units {
        Some(UNITS) => {}
        Some(u) => return Err(bad(&format!("units `{u}` are not {UNITS}"))),
        None => return Err(bad("missing `units=` on the solid line")),
    }
    let mut index: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut corner = Vec::with_capacity(3);
    for line in lines {
        let mut w = line.split_whitespace();
        match w.next() {
            Some("vertex") => {
                let c: Vec<f64> = w
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("bad vertex coordinate"))?;
                if c.len() != 3 {
                    return Err(bad("vertex needs 3 coordinates"));
                }
                let key = [c[0].to_bits(), c[1].to_bits(), c[2].to_bits()];
                let id = *index.entry(key).or_insert_with(|| {
                    vertices.push(Point::new(c[0], c[1], c[2]));
                    (vertices.len() - 1) as u32
                });
                corner.push(id);
            }
            Some("endloop") => {
                if corner.len() != 3 {
                    return Err(bad("facet is not a triangle"));
                }
                triangles.push([corner[0], corner[1], corner[2]]);
                corner.clear();
            }
            Some("facet" | "outer" | "endfacet" | "endsolid") => {}
            Some(other) => return Err(bad(&format!("unexpected keyword `{other}`"))),
            None => {}
        }
    }
    let label = if label.is_empty() {
        source.to_string()
    } else {
        label.join(" ")
    };
    TriMesh::new(label, vertices, triangles)
}

pub fn write_mesh(mesh: &TriMesh, path: &Path) -> Result<()> {
    let text = match MeshFormat::from_path(path)? {
        MeshFormat::Ply => ply_string(mesh),
        MeshFormat::Stl => stl_string(mesh),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_mesh(path: &Path) -> Result<TriMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let source = path.display().to_string();
    match MeshFormat::from_path(path)? {
        MeshFormat::Ply => parse_ply(&text, &source),
        MeshFormat::Stl => parse_stl(&text, &source),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshRef {
    pub file: String,
    pub label: String,
    pub vertex_count: usize,
    pub triangle_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeshes {
    pub st: MeshRef,
    pub sv: MeshRef,
    pub modiolar_wall: MeshRef,
    pub ossicles: MeshRef,
}

/// JSON description of a [`CochlearScene`]; meshes live in sibling files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub format: String,
    pub version: u32,
    pub units: String,
    pub angle_units: String,
    pub meshes: SceneMeshes,
    pub facial_nerve: CenterlineTube,
    pub chorda: CenterlineTube,
    pub frame: CochlearFrame,
    pub round_window: RoundWindow,
    pub st_centerline: Vec<CenterlineSample>,
}

impl SceneManifest {
    /// Writes the scene's meshes into `dir` (with `prefix` on each file name)
    /// and returns the manifest referencing them.
    pub fn write_meshes(
        scene: &CochlearScene,
        dir: &Path,
        prefix: &str,
        format: MeshFormat,
    ) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |mesh: &TriMesh, name: &str| -> Result<MeshRef> {
            let file = format!("{prefix}{name}.{}", format.extension());
            write_mesh(mesh, &dir.join(&file))?;
            Ok(MeshRef {
                file,
                label: mesh.label().to_string(),
                vertex_count: mesh.vertices().len(),
                triangle_count: mesh.triangles().len(),
            })
        };
        let meshes = SceneMeshes {
            st: put(&scene.st, "st")?,
            sv: put(&scene.sv, "sv")?,
            modiolar_wall: put(&scene.modiolar_wall, "modiolar_wall")?,
            ossicles: put(&scene.ossicles, "ossicles")?,
        };
        Ok(SceneManifest {
            format: SCENE_FORMAT.into(),
            version: SCENE_VERSION,
            units: UNITS.into(),
            angle_units: "deg".into(),
            meshes,
            facial_nerve: scene.facial_nerve.clone(),
            chorda: scene.chorda.clone(),
            frame: scene.frame.clone(),
            round_window: scene.round_window,
            st_centerline: scene.st_centerline.clone(),
        })
    }

    /// Loads the referenced meshes relative to `dir`.
    pub fn load(&self, dir: &Path) -> Result<CochlearScene> {
        if self.units != UNITS {
            return Err(Error::Format(format!(
                "scene units `{}` are not {UNITS}",
                self.units
            )));
        }
        if self.angle_units != "deg" {
            return Err(Error::Format(format!(
                "scene angle units `{}` are not deg",
                self.angle_units
            )));
        }
        let get = |r: &MeshRef| -> Result<TriMesh> {
            let m = read_mesh(&dir.join(&r.file))?;
            if m.vertices().len() != r.vertex_count || m.triangles().len() != r.triangle_count {
                return Err(Error::Format(format!(
                    "{}: size differs from manifest",
                    r.file
                )));
            }
            Ok(m)
        };
        let scene = CochlearScene {
            st: get(&self.meshes.st)?,
            sv: get(&self.meshes.sv)?,
            modiolar_wall: get(&self.meshes.modiolar_wall)?,
            ossicles: get(&self.meshes.ossicles)?,
            facial_nerve: self.facial_nerve.clone(),
            chorda: self.chorda.clone(),
            frame: self.frame.clone(),
            round_window: self.round_window,
            st_centerline: self.st_centerline.clone(),
        };
        scene.validate()?;
        Ok(scene)
    }
}

pub const SCENE_FILE: &str = "scene.json";

/// Writes `scene.json` plus one mesh file per surface into `dir`.
pub fn write_scene(scene: &CochlearScene, dir: &Path, format: MeshFormat) -> Result<PathBuf> {
    let manifest = SceneManifest::write_meshes(scene, dir, "", format)?;
    let path = dir.join(SCENE_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Reads a scene manifest file, or `scene.json` inside a directory.
pub fn read_scene(path: &Path) -> Result<CochlearScene> {
    let path = if path.is_dir() {
        path.join(SCENE_FILE)
    } else {
        path.to_path_buf()
    };
    let manifest: SceneManifest = read_json(&path)?;
    if manifest.format != SCENE_FORMAT {
        return Err(Error::Format(format!(
            "{}: not a scene manifest",
            path.display()
        )));
    }
    manifest.load(path.parent().unwrap_or(Path::new(".")))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tetra() -> TriMesh {
        let v = vec![
            Point::new(0.0, 0.0, 0.0),
            Point::new(1.0, 0.0, 0.0),
            Point::new(0.0, 1.0, 0.0),
            Point::new(0.0, 0.0, 1.0 / 3.0),
        ];
        TriMesh::new("tetra", v, vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]).unwrap()
    }

    #[test]
    fn ply_round_trip_is_exact() {
        let m = tetra();
        let back = parse_ply(&ply_string(&m), "t").unwrap();
        assert_eq!(m, back);
        assert!(back.is_watertight());
    }

    #[test]
    fn stl_round_trip_welds() {
        let m = tetra();
        let back = parse_stl(&stl_string(&m), "t").unwrap();
        assert_eq!(back.vertices().len(), 4);
        assert!(back.is_watertight());
        assert_eq!(back.label(), "tetra");
    }

    #[test]
    fn units_enforced() {
        let text = ply_string(&tetra()).replace("units mm", "units cm");
        assert!(parse_ply(&text, "t").is_err());
        let text = stl_string(&tetra()).replace(" units=mm", "");
        assert!(parse_stl(&text, "t").is_err());
    }
}
