//! `cochlea-plan`: scene synthesis, insertion planning, post-operative
//! metrics, cohort statistics and the viewer bundle server.
//!
//! Exit codes: 0 on success, 1 when a computation fails, 2 on a usage error.
//! Failures print a single `error[kind]: message` line on stderr.

mod config;
mod error;
mod serve;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cochlea_plan::array::build_resting_shape;
use cochlea_plan::geometry::io::{read_scene, write_scene, MeshFormat, SCENE_FILE};
use cochlea_plan::geometry::{synth_cochlea_with, AnatomyLayout, CochlearScene, Winding};
use cochlea_plan::metrics::{write_metrics_csv, PostOpRecord};
use cochlea_plan::plan::bundle::{
    export_bundle, import_bundle, parse_selection, write_selection, BUNDLE_FILE, SELECTION_FILE,
};
use cochlea_plan::plan::{candidate_plans, emit_plan_text, EntryKind, SelectionRecord};
use cochlea_plan::stats::{
    figure3_series, ingest_cohort, power_report, reproduce_tables, write_regression_csv, PowerMode,
    ReportCell, StatsReport,
};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use config::FileConfig;
use error::{CliError, CliResult};

/// Environment variable naming the default cohort data directory.
const DATA_ENV: &str = "COCHLEA_PLAN_DATA";
const PLAN_TEXT_FILE: &str = "plan.txt";

#[derive(Parser)]
#[command(
    name = "cochlea-plan",
    version,
    about = "Electrode insertion planning and cohort statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic cochlear scene.
    Synth(SynthArgs),
    /// Register the array, compute the three candidate plans and write the viewer bundle.
    Plan(PlanArgs),
    /// Position metrics of implanted arrays.
    Metrics(MetricsArgs),
    /// Reproduce the cohort tables and print the diff summary.
    Stats(StatsArgs),
    /// Monte-Carlo sample size analysis.
    Power(PowerArgs),
    /// Cohort tables and power analysis into one report directory.
    Report(ReportArgs),
    /// Rewrite a scene, or the scene inside a bundle, as a standalone scene directory.
    ExportScene(ExportArgs),
    /// Serve a bundle to the viewer and record its selection.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Ply,
    Stl,
}

impl From<Format> for MeshFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Ply => MeshFormat::Ply,
            Format::Stl => MeshFormat::Stl,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    side: Option<Side>,
    /// Crowd the facial nerve towards the approach corridor.
    #[arg(long)]
    narrow_recess: bool,
    #[arg(long, value_enum, default_value = "ply")]
    format: Format,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlanArgs {
    /// Scene directory, `scene.json`, bundle directory or `bundle.json`.
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Entry site to emit the plan for: center, slight or substantial.
    #[arg(long, value_parser = parse_kind, conflicts_with = "selection")]
    select: Option<EntryKind>,
    /// Selection record to emit the plan for.
    #[arg(long)]
    selection: Option<PathBuf>,
    #[arg(long)]
    case_id: Option<String>,
    /// RFC 3339 UTC time stamped on the selection record.
    #[arg(long)]
    timestamp: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    contact_count: Option<usize>,
    #[arg(long)]
    active_length: Option<f64>,
    #[arg(long)]
    design_curl: Option<f64>,
    #[arg(long)]
    approach_length: Option<f64>,
}

#[derive(Args)]
struct MetricsArgs {
    /// JSON array of post-operative records.
    #[arg(long)]
    records: PathBuf,
    /// Scene the contact coordinates are given in.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fold_threshold: Option<f64>,
    #[arg(long)]
    angle_tolerance: Option<f64>,
    #[arg(long)]
    distance_tolerance: Option<f64>,
}

#[derive(Args)]
struct StatsArgs {
    /// Directory holding the cohort CSV files.
    #[arg(long)]
    cohort: Option<PathBuf>,
    /// Directory for report.txt, report.csv and regression.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PowerFlags {
    /// observed-ratio, equal, fixed-control=N or ratio=C:E.
    #[arg(long, default_value = "observed-ratio", value_parser = parse_mode)]
    mode: PowerMode,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    power: PowerFlags,
    /// CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    cohort: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    power: PowerFlags,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "ply")]
    format: Format,
}

#[derive(Args)]
struct ServeArgs {
    /// Bundle directory written by `plan`.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8750")]
    addr: String,
    /// Where the posted selection is written; `selection.json` in the bundle by default.
    #[arg(long)]
    selection_out: Option<PathBuf>,
    /// Exit after the first accepted selection.
    #[arg(long)]
    once: bool,
}

fn parse_kind(s: &str) -> Result<EntryKind, String> {
    s.parse().map_err(|e: cochlea_plan::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<PowerMode, String> {
    let s = s.trim().to_ascii_lowercase();
    let bad = || {
        format!("unknown power mode `{s}`; expected observed-ratio, equal, fixed-control=N or ratio=C:E")
    };
    if s == "observed-ratio" {
        return Ok(PowerMode::OBSERVED_RATIO);
    }
    if s == "equal" {
        return Ok(PowerMode::Equal);
    }
    if let Some(n) = s.strip_prefix("fixed-control=") {
        return n.parse().map(PowerMode::FixedControl).map_err(|_| bad());
    }
    if let Some(r) = s.strip_prefix("ratio=") {
        let (c, e) = r.split_once(':').ok_or_else(bad)?;
        let control: usize = c.parse().map_err(|_| bad())?;
        let experimental: usize = e.parse().map_err(|_| bad())?;
        if control == 0 || experimental == 0 {
            return Err(bad());
        }
        return Ok(PowerMode::Ratio {
            control,
            experimental,
        });
    }
    Err(bad())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            let first = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("{}", CliError::Usage(first.to_string()).line());
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Plan(a) => plan(a),
        Command::Metrics(a) => metrics(a),
        Command::Stats(a) => stats(a),
        Command::Power(a) => power(a),
        Command::Report(a) => report(a),
        Command::ExportScene(a) => export_scene(a),
        Command::Serve(a) => serve::serve(serve::ServeOptions {
            selection_out: a
                .selection_out
                .unwrap_or_else(|| a.bundle.join(SELECTION_FILE)),
            bundle_dir: require_dir(&a.bundle)?,
            addr: a.addr,
            once: a.once,
        }),
    }
}

fn require(path: &Path) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::Usage(format!(
            "{} does not exist",
            path.display()
        )))
    }
}

fn require_dir(path: &Path) -> CliResult<PathBuf> {
    if path.is_dir() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::Usage(format!(
            "{} is not a directory",
            path.display()
        )))
    }
}

/// Refuses to write outputs into the directory an input was read from.
fn distinct_output(input_dir: &Path, out: &Path) -> CliResult<()> {
    let same = match (fs::canonicalize(input_dir), fs::canonicalize(out)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if same {
        return Err(CliError::Usage(format!(
            "output directory {} would overwrite the inputs",
            out.display()
        )));
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let cfg = FileConfig::load(a.config.as_deref())?;
    let mut spiral = cfg.spiral;
    if let Some(seed) = a.seed {
        spiral.seed = seed;
    }
    let mut layout = cfg.layout;
    if a.narrow_recess {
        layout.facial_nerve_gap = AnatomyLayout::narrow_facial_recess().facial_nerve_gap;
    }
    match a.side {
        Some(Side::Left) => layout.side = Winding::Clockwise,
        Some(Side::Right) => layout.side = Winding::CounterClockwise,
        None => {}
    }
    let scene = synth_cochlea_with(&spiral, &layout)?;
    let path = write_scene(&scene, &a.out, a.format.into())?;
    println!("{}", path.display());
    Ok(())
}

struct LoadedScene {
    scene: CochlearScene,
    dir: PathBuf,
    /// Case id and selection file of an input bundle.
    bundle: Option<(String, PathBuf)>,
}

/// Loads a scene from a scene or bundle, given as a directory or manifest file.
fn load_scene(path: &Path) -> CliResult<LoadedScene> {
    let path = require(path)?;
    let (dir, file) = if path.is_dir() {
        let file = if path.join(BUNDLE_FILE).exists() {
            path.join(BUNDLE_FILE)
        } else {
            path.join(SCENE_FILE)
        };
        (path.clone(), file)
    } else {
        (
            path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            path.clone(),
        )
    };
    let is_bundle = file.file_name().is_some_and(|n| n == BUNDLE_FILE);
    if is_bundle {
        let (manifest, scene) = import_bundle(&file)?;
        Ok(LoadedScene {
            scene,
            bundle: Some((manifest.case_id, dir.join(SELECTION_FILE))),
            dir,
        })
    } else {
        Ok(LoadedScene {
            scene: read_scene(&file)?,
            dir,
            bundle: None,
        })
    }
}

/// `--timestamp`, else `SOURCE_DATE_EPOCH`, else the current time.
fn timestamp(flag: Option<String>) -> CliResult<String> {
    if let Some(t) = flag {
        return Ok(t);
    }
    let now = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => {
            let secs: i64 = s.trim().parse().map_err(|_| {
                CliError::Usage(format!("SOURCE_DATE_EPOCH `{s}` is not an integer"))
            })?;
            OffsetDateTime::from_unix_timestamp(secs)
                .map_err(|e| CliError::Usage(format!("SOURCE_DATE_EPOCH: {e}")))?
        }
        Err(_) => OffsetDateTime::now_utc(),
    };
    let now = now.replace_nanosecond(0).unwrap_or(now);
    now.format(&Rfc3339)
        .map_err(|e| CliError::Usage(format!("timestamp: {e}")))
}

fn plan(a: PlanArgs) -> CliResult<()> {
    let cfg = FileConfig::load(a.config.as_deref())?;
    let input = load_scene(&a.scene)?;
    if let Some(p) = &a.selection {
        require(p)?;
    }
    distinct_output(&input.dir, &a.out)?;

    let mut spec = cfg.array;
    spec.contact_count = a.contact_count.unwrap_or(spec.contact_count);
    spec.active_length = a.active_length.unwrap_or(spec.active_length);
    spec.design_curl = a.design_curl.unwrap_or(spec.design_curl);
    let mut plan_cfg = cfg.plan;
    plan_cfg.approach_length = a.approach_length.unwrap_or(plan_cfg.approach_length);

    let case_id = match (&a.case_id, &input.bundle) {
        (Some(c), _) => c.clone(),
        (None, Some((c, _))) => c.clone(),
        (None, None) => input
            .dir
            .canonicalize()
            .ok()
            .and_then(|d| d.file_name().map(|n| n.to_string_lossy().into_owned()))
            .unwrap_or_else(|| "case".into()),
    };

    let shape = build_resting_shape(&spec)?;
    let set = candidate_plans(&input.scene, &shape, &plan_cfg)?;
    let path = export_bundle(
        &a.out,
        &case_id,
        &input.scene,
        &shape,
        &set,
        plan_cfg.approach_length,
    )?;
    let manifest = cochlea_plan::plan::bundle::read_manifest(&path)?;

    let selection_file = match (&a.selection, &input.bundle) {
        (Some(p), _) => Some(p.clone()),
        (None, Some((_, p))) if a.select.is_none() && p.exists() => Some(p.clone()),
        _ => None,
    };
    let record = if let Some(kind) = a.select {
        let r = SelectionRecord {
            case_id: case_id.clone(),
            selected_entry_kind: kind,
            timestamp: timestamp(a.timestamp)?,
        };
        parse_selection(&serde_json::to_string(&r).unwrap_or_default(), &manifest)?
    } else if let Some(p) = selection_file {
        let body = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
        parse_selection(&body, &manifest)?
    } else {
        for plan in &set.plans {
            println!(
                "{}: facial nerve {:.2} mm, chorda {:.2} mm, ossicles {:.2} mm, tilt {:.1} deg",
                plan.entry.kind.short_name(),
                plan.clearance_fn,
                plan.clearance_chorda,
                plan.clearance_ossicles,
                plan.tilt_deg
            );
        }
        println!("{}", path.display());
        return Ok(());
    };

    let chosen = set
        .plans
        .iter()
        .find(|p| p.entry.kind == record.selected_entry_kind)
        .ok_or_else(|| CliError::Usage(format!("no {} plan", record.selected_entry_kind)))?;
    let text = emit_plan_text(chosen)?;
    write_selection(&a.out.join(SELECTION_FILE), &record)?;
    write_file(&a.out.join(PLAN_TEXT_FILE), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn metrics(a: MetricsArgs) -> CliResult<()> {
    let cfg = FileConfig::load(a.config.as_deref())?;
    let records_path = require(&a.records)?;
    let scene = a.scene.as_deref().map(load_scene).transpose()?;
    let mut mcfg = cfg.metrics;
    mcfg.fold_threshold_deg = a.fold_threshold.unwrap_or(mcfg.fold_threshold_deg);
    mcfg.angle_tolerance_deg = a.angle_tolerance.unwrap_or(mcfg.angle_tolerance_deg);
    mcfg.distance_tolerance_mm = a.distance_tolerance.unwrap_or(mcfg.distance_tolerance_mm);

    let text = fs::read_to_string(&records_path).map_err(|e| CliError::io(&records_path, e))?;
    let records: Vec<PostOpRecord> = serde_json::from_str(&text)
        .map_err(|e| cochlea_plan::Error::Format(format!("{}: {e}", records_path.display())))?;
    let rows = records
        .iter()
        .map(|r| r.evaluate(scene.as_ref().map(|s| &s.scene), &mcfg))
        .collect::<Result<Vec<_>, _>>()?;
    match &a.out {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| CliError::io(p, e))?;
            write_metrics_csv(f, &rows)?;
        }
        None => write_metrics_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn cohort_dir(flag: Option<PathBuf>) -> CliResult<PathBuf> {
    let dir = flag
        .or_else(|| std::env::var_os(DATA_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));
    require_dir(&dir)
}

fn write_stats(
    dir: &Path,
    report: &StatsReport,
    cohort: &cochlea_plan::stats::Cohort,
) -> CliResult<()> {
    create_dir(dir)?;
    write_file(&dir.join("report.txt"), report.to_text().as_bytes())?;
    let csv_path = dir.join("report.csv");
    let f = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    report.write_csv(f)?;
    let reg_path = dir.join("regression.csv");
    let f = fs::File::create(&reg_path).map_err(|e| CliError::io(&reg_path, e))?;
    write_regression_csv(f, &figure3_series(cohort)?)?;
    Ok(())
}

fn stats(a: StatsArgs) -> CliResult<()> {
    let dir = cohort_dir(a.cohort)?;
    let cohort = ingest_cohort(&dir)?;
    let report = reproduce_tables(&cohort)?;
    if let Some(out) = &a.out {
        write_stats(out, &report, &cohort)?;
    }
    print!("{}", report.to_text());
    Ok(())
}

fn power_cells(p: PowerFlags) -> CliResult<Vec<ReportCell>> {
    let cfg = FileConfig::load(p.config.as_deref())?;
    let mut pcfg = cfg.power;
    pcfg.replicates = p.replicates.unwrap_or(pcfg.replicates);
    pcfg.seed = p.seed.unwrap_or(pcfg.seed);
    Ok(power_report(p.mode, &pcfg)?)
}

fn power(a: PowerArgs) -> CliResult<()> {
    let report = StatsReport {
        cells: power_cells(a.power)?,
    };
    if let Some(p) = &a.out {
        let f = fs::File::create(p).map_err(|e| CliError::io(p, e))?;
        report.write_csv(f)?;
    }
    print!("{}", report.to_text());
    Ok(())
}

fn report(a: ReportArgs) -> CliResult<()> {
    let dir = cohort_dir(a.cohort)?;
    let cohort = ingest_cohort(&dir)?;
    let mut report = reproduce_tables(&cohort)?;
    report.cells.extend(power_cells(a.power)?);
    write_stats(&a.out, &report, &cohort)?;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(report.to_text().as_bytes());
    Ok(())
}

fn export_scene(a: ExportArgs) -> CliResult<()> {
    let input = load_scene(&a.scene)?;
    distinct_output(&input.dir, &a.out)?;
    let path = write_scene(&input.scene, &a.out, a.format.into())?;
    println!("{}", path.display());
    Ok(())
}
