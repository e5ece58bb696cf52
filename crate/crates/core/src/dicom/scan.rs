use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::DicomError;

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error("cannot read input root {path}: {source}")]
    UnreadableRoot {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Why a candidate file never became a manifest row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    NotDicom,
    Unreadable(String),
    UnsupportedTransferSyntax(String),
    MalformedFile(String),
    UnsupportedPhotometric(String),
    MissingPatientId,
    MissingSopInstanceUid,
}

impl SkipReason {
    /// Stable short code used in the skip log.
    pub fn code(&self) -> &'static str {
        match self {
            SkipReason::NotDicom => "NotDicom",
            SkipReason::Unreadable(_) => "Unreadable",
            SkipReason::UnsupportedTransferSyntax(_) => "UnsupportedTransferSyntax",
            SkipReason::MalformedFile(_) => "MalformedFile",
            SkipReason::UnsupportedPhotometric(_) => "UnsupportedPhotometric",
            SkipReason::MissingPatientId => "MissingPatientId",
            SkipReason::MissingSopInstanceUid => "MissingSopInstanceUid",
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            SkipReason::Unreadable(d)
            | SkipReason::UnsupportedTransferSyntax(d)
            | SkipReason::MalformedFile(d)
            | SkipReason::UnsupportedPhotometric(d) => d,
            _ => "",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.detail() {
            "" => f.write_str(self.code()),
            d => write!(f, "{}: {d}", self.code()),
        }
    }
}

impl From<DicomError> for SkipReason {
    fn from(e: DicomError) -> Self {
        match e {
            DicomError::NotDicom => SkipReason::NotDicom,
            DicomError::UnsupportedTransferSyntax(s) => SkipReason::UnsupportedTransferSyntax(s),
            DicomError::MalformedFile(s) => SkipReason::MalformedFile(s),
            DicomError::UnsupportedPhotometric(s) => SkipReason::UnsupportedPhotometric(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub path: PathBuf,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanResult {
    /// Files carrying the Part-10 magic, in lexicographic path order.
    pub files: Vec<PathBuf>,
    pub skipped: Vec<SkipRecord>,
}

/// Recursively lists regular files under `root`, keeping those that start with the
/// 128-byte preamble followed by `DICM`.
pub fn scan_directory(root: &Path, follow_symlinks: bool) -> Result<ScanResult, ScanError> {
    let meta = std::fs::metadata(root).map_err(|source| ScanError::UnreadableRoot {
        path: root.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(ScanError::UnreadableRoot {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        });
    }
    std::fs::read_dir(root).map_err(|source| ScanError::UnreadableRoot {
        path: root.to_path_buf(),
        source,
    })?;

    let mut candidates = Vec::new();
    let mut skipped = Vec::new();
    for entry in WalkDir::new(root).follow_links(follow_symlinks) {
        match entry {
            Ok(e) if e.file_type().is_file() => candidates.push(e.into_path()),
            Ok(_) => {}
            Err(err) => {
                let path = err.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
                skipped.push(SkipRecord { path, reason: SkipReason::Unreadable(err.to_string()) });
            }
        }
    }
    candidates.sort();

    let mut files = Vec::new();
    for path in candidates {
        match has_dicom_magic(&path) {
            Ok(true) => files.push(path),
            Ok(false) => skipped.push(SkipRecord { path, reason: SkipReason::NotDicom }),
            Err(e) => skipped.push(SkipRecord { path, reason: SkipReason::Unreadable(e.to_string()) }),
        }
    }
    skipped.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(ScanResult { files, skipped })
}

fn has_dicom_magic(path: &Path) -> std::io::Result<bool> {
    let mut head = [0u8; 132];
    let mut file = File::open(path)?;
    let mut filled = 0;
    while filled < head.len() {
        let n = file.read(&mut head[filled..])?;
        if n == 0 {
            return Ok(false);
        }
        filled += n;
    }
    Ok(&head[128..132] == b"DICM")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::write::{DicomWriter, Syntax};

    fn dicom_bytes() -> Vec<u8> {
        DicomWriter::new(Syntax::ExplicitLittle).finish()
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        let scan = scan_directory(dir.path(), false).unwrap();
        assert!(scan.files.is_empty() && scan.skipped.is_empty());
    }

    #[test]
    fn lexicographic_order() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.dcm"), dicom_bytes()).unwrap();
        std::fs::write(dir.path().join("a.dcm"), dicom_bytes()).unwrap();
        let scan = scan_directory(dir.path(), false).unwrap();
        let names: Vec<_> = scan.files.iter().map(|p| p.file_name().unwrap().to_str().unwrap()).collect();
        assert_eq!(names, ["a.dcm", "b.dcm"]);
    }

    #[test]
    fn text_file_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("notes.txt"), "hello").unwrap();
        let scan = scan_directory(dir.path(), false).unwrap();
        assert!(scan.files.is_empty());
        assert_eq!(scan.skipped.len(), 1);
        assert_eq!(scan.skipped[0].reason, SkipReason::NotDicom);
        assert!(scan.skipped[0].path.ends_with("notes.txt"));
    }

    #[test]
    fn nested_directories_are_walked() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("p1/s1")).unwrap();
        std::fs::write(dir.path().join("p1/s1/x"), dicom_bytes()).unwrap();
        std::fs::write(dir.path().join("top.dcm"), dicom_bytes()).unwrap();
        let scan = scan_directory(dir.path(), false).unwrap();
        assert_eq!(scan.files.len(), 2);
        assert!(scan.files[0].ends_with("p1/s1/x"));
    }

    #[test]
    fn missing_root_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            scan_directory(&dir.path().join("nope"), false),
            Err(ScanError::UnreadableRoot { .. })
        ));
    }
}
