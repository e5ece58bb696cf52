//! The manifest: one CSV row per curated image, shared by every pipeline stage.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::identity::{ImageUid, SessionId};
use crate::triage::ViewLabel;

pub const MANIFEST_COLUMNS: [&str; 11] = [
    "image_uid",
    "session_id",
    "patient_id",
    "view",
    "status",
    "status_reason",
    "covid_label",
    "source_path",
    "output_image_path",
    "mask_path",
    "processing_flags",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Kept,
    Excluded,
    Quarantined,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Kept => "kept",
            Status::Excluded => "excluded",
            Status::Quarantined => "quarantined",
        }
    }
}

impl FromStr for Status {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kept" => Ok(Status::Kept),
            "excluded" => Ok(Status::Excluded),
            "quarantined" => Ok(Status::Quarantined),
            other => Err(format!("unknown status {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovidLabel {
    Positive,
    Negative,
    #[default]
    Unknown,
}

impl CovidLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CovidLabel::Positive => "positive",
            CovidLabel::Negative => "negative",
            CovidLabel::Unknown => "unknown",
        }
    }
}

impl fmt::Display for CovidLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CovidLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "pos" | "1" => Ok(CovidLabel::Positive),
            "negative" | "neg" | "0" => Ok(CovidLabel::Negative),
            "unknown" | "" => Ok(CovidLabel::Unknown),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One manifest row. `view` and `status` are empty until triage has run; paths are
/// stored as written (source paths relative to the input root, outputs relative to
/// the output root).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_uid: ImageUid,
    pub session_id: SessionId,
    pub patient_id: String,
    pub view: Option<ViewLabel>,
    pub status: Option<Status>,
    pub status_reason: String,
    pub covid_label: CovidLabel,
    pub source_path: Option<String>,
    pub output_image_path: Option<String>,
    pub mask_path: Option<String>,
    pub processing_flags: Vec<String>,
}

impl ManifestEntry {
    /// Kept, frontal and labelled: the population splits and evaluation draw from.
    pub fn is_split_eligible(&self) -> bool {
        self.status == Some(Status::Kept)
            && matches!(self.view, Some(ViewLabel::Ap | ViewLabel::Pa))
            && self.covid_label != CovidLabel::Unknown
    }

    fn to_record(&self) -> [String; 11] {
        [
            self.image_uid.to_string(),
            self.session_id.to_string(),
            self.patient_id.clone(),
            self.view.map(|v| v.as_str().to_string()).unwrap_or_default(),
            self.status.map(|s| s.as_str().to_string()).unwrap_or_default(),
            self.status_reason.clone(),
            self.covid_label.as_str().to_string(),
            self.source_path.clone().unwrap_or_default(),
            self.output_image_path.clone().unwrap_or_default(),
            self.mask_path.clone().unwrap_or_default(),
            self.processing_flags.join(";"),
        ]
    }

    fn from_record(r: &csv::StringRecord) -> Result<Self, String> {
        if r.len() != MANIFEST_COLUMNS.len() {
            return Err(format!("expected {} fields, found {}", MANIFEST_COLUMNS.len(), r.len()));
        }
        let opt = |i: usize| Some(r[i].to_string()).filter(|s| !s.is_empty());
        if r[0].is_empty() {
            return Err("empty image_uid".into());
        }
        let view = match &r[3] {
            "" => None,
            v => Some(v.parse::<ViewLabel>().map_err(|e| format!("view: {e}"))?),
        };
        let status = match &r[4] {
            "" => None,
            s => Some(s.parse::<Status>()?),
        };
        let covid_label = match &r[6] {
            "positive" => CovidLabel::Positive,
            "negative" => CovidLabel::Negative,
            "unknown" => CovidLabel::Unknown,
            other => return Err(format!("unknown covid_label {other:?}")),
        };
        let entry = Self {
            image_uid: ImageUid::from_raw(&r[0]),
            session_id: SessionId::from_raw(&r[1]),
            patient_id: r[2].to_string(),
            view,
            status,
            status_reason: r[5].to_string(),
            covid_label,
            source_path: opt(7),
            output_image_path: opt(8),
            mask_path: opt(9),
            processing_flags: if r[10].is_empty() { vec![] } else { r[10].split(';').map(str::to_string).collect() },
        };
        if entry.status == Some(Status::Kept) {
            if entry.output_image_path.is_none() {
                return Err("kept entry without output_image_path".into());
            }
            if !matches!(entry.view, Some(ViewLabel::Ap | ViewLabel::Pa)) {
                return Err("kept entry must have view AP or PA".into());
            }
        }
        Ok(entry)
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("manifest I/O on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ManifestError {
    fn parse(line: u64, message: impl Into<String>) -> Self {
        ManifestError::Parse { line, message: message.into() }
    }
}

fn csv_err(e: csv::Error, fallback_line: u64) -> ManifestError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    ManifestError::parse(line, e.to_string())
}

pub fn write_manifest_to<W: Write>(entries: &[ManifestEntry], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(MANIFEST_COLUMNS)?;
    for e in entries {
        w.write_record(e.to_record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest_from<R: Read>(input: R) -> Result<Vec<ManifestEntry>, ManifestError> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let header = match records.next() {
        None => return Err(ManifestError::parse(1, "missing header row")),
        Some(h) => h.map_err(|e| csv_err(e, 1))?,
    };
    if header.iter().ne(MANIFEST_COLUMNS) {
        return Err(ManifestError::parse(1, format!("header must be {}", MANIFEST_COLUMNS.join(","))));
    }
    let mut out = vec![];
    for rec in records {
        let rec = rec.map_err(|e| csv_err(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(ManifestEntry::from_record(&rec).map_err(|m| ManifestError::parse(line, m))?);
    }
    Ok(out)
}

/// Writes via a sibling temporary file and a rename, so readers never see a partial
/// manifest.
pub fn write_manifest(entries: &[ManifestEntry], path: &Path) -> Result<(), ManifestError> {
    let io = |source| ManifestError::Io { path: path.display().to_string(), source };
    let tmp = path.with_extension("csv.tmp");
    let file = File::create(&tmp).map_err(io)?;
    let mut buf = std::io::BufWriter::new(file);
    write_manifest_to(entries, &mut buf).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(err) => io(err),
        other => io(std::io::Error::other(format!("{other:?}"))),
    })?;
    buf.flush().map_err(io)?;
    drop(buf);
    std::fs::rename(&tmp, path).map_err(io)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, ManifestError> {
    let file = File::open(path).map_err(|source| ManifestError::Io { path: path.display().to_string(), source })?;
    read_manifest_from(std::io::BufReader::new(file))
}
