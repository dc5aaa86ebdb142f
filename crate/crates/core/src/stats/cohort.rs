use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metrics::ScalarLabel;
use crate::{Error, Result};

pub const TEMPORAL_BONE_FILE: &str = "temporal_bone.csv";
pub const CLINICAL_FILE: &str = "clinical.csv";

const TEMPORAL_BONE_HEADER: &[&str] = &[
    "specimen",
    "condition",
    "group",
    "d_mm",
    "scalar",
    "fold",
    "aid_deg",
    "mmd_mm",
    "amd_mm",
];

const CLINICAL_HEADER: &[&str] = &[
    "subject",
    "condition",
    "group",
    "side",
    "dur_hl_yrs",
    "wear_hrs_day",
    "age_implant_yrs",
    "age_test_yrs",
    "hearing_config",
    "first_ear",
    "etiology",
    "sex",
    "d_mm",
    "scalar",
    "aid_deg",
    "mmd_mm",
    "amd_mm",
    "cnc_implant_only_pct",
    "cnc_bimodal_pct",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Study {
    TemporalBone,
    Clinical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Condition {
    Control,
    Experimental,
}

/// Group a record belongs to.
///
/// `ContDuring` marks the clinical control ear implanted while the
/// experimental series was under way; it counts as control but belongs to
/// neither the before nor the after sub-group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GroupTag {
    C1,
    C2,
    BeforePullback,
    Exp,
    ContBefore,
    ContDuring,
    ContAfter,
}

impl GroupTag {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupTag::C1 => "C1",
            GroupTag::C2 => "C2",
            GroupTag::BeforePullback => "BEFORE_PULLBACK",
            GroupTag::Exp => "EXP",
            GroupTag::ContBefore => "CONT_BEFORE",
            GroupTag::ContDuring => "CONT_DURING",
            GroupTag::ContAfter => "CONT_AFTER",
        }
    }

    fn condition(self) -> Condition {
        match self {
            GroupTag::BeforePullback | GroupTag::Exp => Condition::Experimental,
            _ => Condition::Control,
        }
    }

    fn allowed_in(self, study: Study) -> bool {
        match self {
            GroupTag::Exp => true,
            GroupTag::C1 | GroupTag::C2 | GroupTag::BeforePullback => study == Study::TemporalBone,
            _ => study == Study::Clinical,
        }
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            GroupTag::C1,
            GroupTag::C2,
            GroupTag::BeforePullback,
            GroupTag::Exp,
            GroupTag::ContBefore,
            GroupTag::ContDuring,
            GroupTag::ContAfter,
        ]
        .into_iter()
        .find(|g| g.as_str() == s)
        .ok_or_else(|| format!("unknown group `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Aid,
    Mmd,
    Amd,
    CncImplantOnly,
    CncBimodal,
}

impl Metric {
    pub const POSITION: [Metric; 3] = [Metric::Aid, Metric::Mmd, Metric::Amd];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Aid => "AID",
            Metric::Mmd => "MMD",
            Metric::Amd => "AMD",
            Metric::CncImplantOnly => "CNC implant only",
            Metric::CncBimodal => "CNC bimodal",
        }
    }
}

/// Pass-through clinical fields; not used by any analysis.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub side: Option<String>,
    pub duration_hl_yrs: Option<f64>,
    pub wear_hrs_day: Option<f64>,
    pub age_implant_yrs: Option<f64>,
    pub age_test_yrs: Option<f64>,
    pub hearing_config: Option<String>,
    pub first_ear: Option<bool>,
    pub etiology: Option<String>,
    pub sex: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRow {
    pub study: Study,
    pub case_id: String,
    pub condition: Condition,
    pub group: GroupTag,
    pub d_mm: Option<f64>,
    pub scalar: ScalarLabel,
    pub fold: bool,
    pub aid_deg: f64,
    pub mmd_mm: f64,
    pub amd_mm: f64,
    pub cnc_implant_only_pct: Option<f64>,
    pub cnc_bimodal_pct: Option<f64>,
    pub demographics: Demographics,
}

impl CohortRow {
    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Aid => Some(self.aid_deg),
            Metric::Mmd => Some(self.mmd_mm),
            Metric::Amd => Some(self.amd_mm),
            Metric::CncImplantOnly => self.cnc_implant_only_pct,
            Metric::CncBimodal => self.cnc_bimodal_pct,
        }
    }

    /// Neither translocated nor folded.
    pub fn is_wt(&self) -> bool {
        self.scalar == ScalarLabel::St && !self.fold
    }
}

/// Values of `metric` over `rows`, skipping rows where it is absent.
pub fn values<'a>(rows: impl IntoIterator<Item = &'a CohortRow>, metric: Metric) -> Vec<f64> {
    rows.into_iter().filter_map(|r| r.value(metric)).collect()
}

struct Cells<'a> {
    file: &'a str,
    row: usize,
    header: &'a [&'a str],
    record: &'a csv::StringRecord,
}

impl Cells<'_> {
    fn err(&self, column: &str, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file.to_string(),
            row: self.row,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn raw(&self, column: &str) -> Option<&str> {
        let i = self
            .header
            .iter()
            .position(|h| *h == column)
            .expect("known column");
        let s = self.record.get(i).unwrap_or("").trim();
        (!s.is_empty()).then_some(s)
    }

    fn text(&self, column: &str) -> Result<&str> {
        self.raw(column)
            .ok_or_else(|| self.err(column, "missing value"))
    }

    fn parse<T: FromStr>(&self, column: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let s = self.text(column)?;
        s.parse()
            .map_err(|e: T::Err| self.err(column, format!("`{s}`: {e}")))
    }

    fn opt_number(&self, column: &str) -> Result<Option<f64>> {
        match self.raw(column) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|e| self.err(column, format!("`{s}`: {e}"))),
        }
    }

    fn number(&self, column: &str) -> Result<f64> {
        self.opt_number(column)?
            .ok_or_else(|| self.err(column, "missing value"))
    }

    fn yes_no(&self, column: &str) -> Result<bool> {
        match self.text(column)? {
            "Y" => Ok(true),
            "N" => Ok(false),
            s => Err(self.err(column, format!("`{s}` is not Y or N"))),
        }
    }

    fn opt_string(&self, column: &str) -> Option<String> {
        self.raw(column).map(str::to_string)
    }

    fn condition(&self) -> Result<Condition> {
        match self.text("condition")? {
            "CONTROL" => Ok(Condition::Control),
            "EXPERIMENTAL" => Ok(Condition::Experimental),
            s => Err(self.err("condition", format!("`{s}` is not CONTROL or EXPERIMENTAL"))),
        }
    }
}

fn read_table(
    path: &Path,
    expected: &[&str],
    mut row_fn: impl FnMut(&Cells) -> Result<CohortRow>,
) -> Result<Vec<CohortRow>> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{file}: {other:?}")),
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Format(format!("{file}: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header != expected {
        return Err(Error::Parse {
            file,
            row: 1,
            column: "header".into(),
            message: format!("expected columns {}", expected.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            file: file.clone(),
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cells = Cells {
            file: &file,
            row,
            header: expected,
            record: &record,
        };
        let r = row_fn(&cells)?;
        check_row(&cells, &r)?;
        rows.push(r);
    }
    Ok(rows)
}

fn check_row(cells: &Cells, r: &CohortRow) -> Result<()> {
    if r.group.condition() != r.condition {
        return Err(cells.err(
            "group",
            format!("{} is not a {:?} group", r.group, r.condition),
        ));
    }
    if !r.group.allowed_in(r.study) {
        return Err(cells.err(
            "group",
            format!("{} does not belong to this study", r.group),
        ));
    }
    if r.d_mm.is_some() && r.condition != Condition::Experimental {
        return Err(cells.err("d_mm", "base depth error on a control case"));
    }
    for (column, v) in [
        ("cnc_implant_only_pct", r.cnc_implant_only_pct),
        ("cnc_bimodal_pct", r.cnc_bimodal_pct),
    ] {
        if let Some(v) = v {
            if !(0.0..=100.0).contains(&v) {
                return Err(cells.err(column, format!("{v} is outside [0, 100]")));
            }
        }
    }
    if r.aid_deg < 0.0 || r.mmd_mm < 0.0 || r.amd_mm < 0.0 {
        return Err(cells.err("aid_deg", "negative position metric"));
    }
    Ok(())
}

/// Reads the per-specimen temporal-bone table.
pub fn ingest_temporal_bone(path: &Path) -> Result<Vec<CohortRow>> {
    read_table(path, TEMPORAL_BONE_HEADER, |c| {
        Ok(CohortRow {
            study: Study::TemporalBone,
            case_id: c.text("specimen")?.to_string(),
            condition: c.condition()?,
            group: c.parse("group")?,
            d_mm: c.opt_number("d_mm")?,
            scalar: c.parse("scalar")?,
            fold: c.yes_no("fold")?,
            aid_deg: c.number("aid_deg")?,
            mmd_mm: c.number("mmd_mm")?,
            amd_mm: c.number("amd_mm")?,
            cnc_implant_only_pct: None,
            cnc_bimodal_pct: None,
            demographics: Demographics::default(),
        })
    })
}

/// Reads the per-ear clinical table.
pub fn ingest_clinical(path: &Path) -> Result<Vec<CohortRow>> {
    read_table(path, CLINICAL_HEADER, |c| {
        Ok(CohortRow {
            study: Study::Clinical,
            case_id: c.text("subject")?.to_string(),
            condition: c.condition()?,
            group: c.parse("group")?,
            d_mm: c.opt_number("d_mm")?,
            scalar: c.parse("scalar")?,
            fold: false,
            aid_deg: c.number("aid_deg")?,
            mmd_mm: c.number("mmd_mm")?,
            amd_mm: c.number("amd_mm")?,
            cnc_implant_only_pct: c.opt_number("cnc_implant_only_pct")?,
            cnc_bimodal_pct: c.opt_number("cnc_bimodal_pct")?,
            demographics: Demographics {
                side: c.opt_string("side"),
                duration_hl_yrs: c.opt_number("dur_hl_yrs")?,
                wear_hrs_day: c.opt_number("wear_hrs_day")?,
                age_implant_yrs: c.opt_number("age_implant_yrs")?,
                age_test_yrs: c.opt_number("age_test_yrs")?,
                hearing_config: c.opt_string("hearing_config"),
                first_ear: match c.raw("first_ear") {
                    None => None,
                    Some(_) => Some(c.yes_no("first_ear")?),
                },
                etiology: c.opt_string("etiology"),
                sex: c.opt_string("sex"),
            },
        })
    })
}

/// Both studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub rows: Vec<CohortRow>,
}

impl Cohort {
    pub fn group(&self, study: Study, tag: GroupTag) -> Vec<&CohortRow> {
        self.rows
            .iter()
            .filter(|r| r.study == study && r.group == tag)
            .collect()
    }

    pub fn study(&self, study: Study) -> impl Iterator<Item = &CohortRow> {
        self.rows.iter().filter(move |r| r.study == study)
    }
}

/// Reads `temporal_bone.csv` and `clinical.csv` from `dir`.
pub fn ingest_cohort(dir: &Path) -> Result<Cohort> {
    let mut rows = ingest_temporal_bone(&dir.join(TEMPORAL_BONE_FILE))?;
    rows.extend(ingest_clinical(&dir.join(CLINICAL_FILE))?);
    Ok(Cohort { rows })
}
