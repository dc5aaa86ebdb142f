//! Local HTTP endpoints for the viewer.
//!
//! | method | path             | response                                   |
//! |--------|------------------|--------------------------------------------|
//! | GET    | `/bundle`        | `bundle.json`                              |
//! | GET    | `/bundle/<file>` | a mesh payload listed in the manifest      |
//! | POST   | `/selection`     | 201 and the stored record, 409 if one exists |
//! | GET    | `/selection`     | the stored record, 404 before one arrives  |
//!
//! Requests are handled one at a time. The selection record is written to
//! disk once, on receipt.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use cochlea_plan::plan::bundle::{
    parse_selection, read_manifest, read_selection, write_selection, BundleManifest, BUNDLE_FILE,
};
use cochlea_plan::plan::SelectionRecord;
use tiny_http::{Header, Method, Request, Response, Server};

use crate::error::{CliError, CliResult};

const MAX_BODY: u64 = 64 * 1024;

pub struct ServeOptions {
    pub bundle_dir: PathBuf,
    pub addr: String,
    pub selection_out: PathBuf,
    /// Stop after the first accepted selection.
    pub once: bool,
}

struct State {
    dir: PathBuf,
    manifest: BundleManifest,
    bundle_bytes: Vec<u8>,
    selection: Option<SelectionRecord>,
    selection_out: PathBuf,
}

struct Reply {
    status: u16,
    content_type: &'static str,
    body: Vec<u8>,
}

impl Reply {
    fn json(status: u16, value: &impl serde::Serialize) -> Self {
        Reply {
            status,
            content_type: "application/json",
            body: serde_json::to_vec_pretty(value).unwrap_or_default(),
        }
    }

    fn error(status: u16, kind: &str, message: impl Into<String>) -> Self {
        Reply::json(
            status,
            &serde_json::json!({ "error": kind, "message": message.into() }),
        )
    }

    fn empty(status: u16) -> Self {
        Reply {
            status,
            content_type: "text/plain",
            body: Vec::new(),
        }
    }
}

pub fn serve(opts: ServeOptions) -> CliResult<()> {
    let manifest = read_manifest(&opts.bundle_dir)?;
    let bundle_path = opts.bundle_dir.join(BUNDLE_FILE);
    let bundle_bytes = fs::read(&bundle_path).map_err(|e| CliError::io(&bundle_path, e))?;
    let selection = if opts.selection_out.exists() {
        Some(read_selection(&opts.selection_out)?)
    } else {
        None
    };
    let mut state = State {
        dir: opts.bundle_dir,
        manifest,
        bundle_bytes,
        selection,
        selection_out: opts.selection_out,
    };

    let server = Server::http(opts.addr.as_str())
        .map_err(|e| CliError::Server(format!("bind {}: {e}", opts.addr)))?;
    let addr = server
        .server_addr()
        .to_ip()
        .map(|a| a.to_string())
        .unwrap_or_else(|| opts.addr.clone());
    let mut stdout = std::io::stdout();
    let _ = writeln!(stdout, "listening on http://{addr}");
    let _ = stdout.flush();

    for mut request in server.incoming_requests() {
        let (reply, accepted) = handle(&mut state, &mut request);
        eprintln!("{} {} {}", request.method(), request.url(), reply.status);
        respond(request, reply);
        if accepted && opts.once {
            break;
        }
    }
    Ok(())
}

/// Returns the reply and whether a selection was accepted.
fn handle(state: &mut State, request: &mut Request) -> (Reply, bool) {
    let url = request.url().split('?').next().unwrap_or("").to_string();
    let method = request.method().clone();
    if method == Method::Options {
        return (Reply::empty(204), false);
    }
    match (url.as_str(), method) {
        ("/bundle", Method::Get) => (
            Reply {
                status: 200,
                content_type: "application/json",
                body: state.bundle_bytes.clone(),
            },
            false,
        ),
        ("/selection", Method::Get) => match &state.selection {
            Some(r) => (Reply::json(200, r), false),
            None => (Reply::error(404, "not-found", "no selection yet"), false),
        },
        ("/selection", Method::Post) => post_selection(state, request),
        ("/bundle" | "/selection", _) => (Reply::error(405, "method", "method not allowed"), false),
        (path, Method::Get) if path.starts_with("/bundle/") => {
            (payload(state, &path["/bundle/".len()..]), false)
        }
        _ => (
            Reply::error(404, "not-found", format!("no route for {url}")),
            false,
        ),
    }
}

fn post_selection(state: &mut State, request: &mut Request) -> (Reply, bool) {
    if state.selection.is_some() {
        return (
            Reply::error(409, "conflict", "a selection has already been recorded"),
            false,
        );
    }
    let mut body = String::new();
    let mut reader = request.as_reader().take(MAX_BODY + 1);
    if let Err(e) = reader.read_to_string(&mut body) {
        return (Reply::error(400, "body", e.to_string()), false);
    }
    if body.len() as u64 > MAX_BODY {
        return (Reply::error(413, "body", "selection body too large"), false);
    }
    let record = match parse_selection(&body, &state.manifest) {
        Ok(r) => r,
        Err(e) => return (Reply::error(400, e.kind(), e.to_string()), false),
    };
    if let Err(e) = write_selection(&state.selection_out, &record) {
        return (Reply::error(500, e.kind(), e.to_string()), false);
    }
    let reply = Reply::json(201, &record);
    state.selection = Some(record);
    (reply, true)
}

fn payload(state: &State, name: &str) -> Reply {
    let m = &state.manifest;
    let meshes = &m.scene.meshes;
    let listed = [
        &meshes.st,
        &meshes.sv,
        &meshes.modiolar_wall,
        &meshes.ossicles,
        &m.display_meshes.facial_nerve,
        &m.display_meshes.chorda,
    ]
    .into_iter()
    .any(|r| r.file == name);
    if !listed {
        return Reply::error(
            404,
            "not-found",
            format!("`{name}` is not part of the bundle"),
        );
    }
    match fs::read(state.dir.join(Path::new(name))) {
        Ok(body) => Reply {
            status: 200,
            content_type: "application/octet-stream",
            body,
        },
        Err(e) => Reply::error(500, "io", format!("{name}: {e}")),
    }
}

fn respond(request: Request, reply: Reply) {
    let headers = [
        ("Content-Type", reply.content_type),
        ("Access-Control-Allow-Origin", "*"),
        ("Access-Control-Allow-Methods", "GET, POST, OPTIONS"),
        ("Access-Control-Allow-Headers", "Content-Type"),
    ];
    let mut response = Response::from_data(reply.body)
        .with_status_code(reply.status)
        .with_chunked_threshold(usize::MAX);
    for (k, v) in headers {
        if let Ok(h) = Header::from_bytes(k.as_bytes(), v.as_bytes()) {
            response.add_header(h);
        }
    }
    if let Err(e) = request.respond(response) {
        eprintln!("respond: {e}");
    }
}
