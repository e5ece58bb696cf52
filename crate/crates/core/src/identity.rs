//! Image and session identifiers.
//!
//! An image identifier is `<patient>_<YYYYMMDD>_<HHMMSS>` with a `_<n>` collision
//! suffix; a session identifier is the same string without the suffix, so two images
//! share a session exactly when patient, date and second-truncated time agree.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::DicomRecord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("record has an empty patient id (0010,0020)")]
    MissingPatientId,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageUid(String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(String);

macro_rules! id_common {
    ($t:ident) => {
        impl $t {
            pub fn as_str(&self) -> &str {
                &self.0
            }

            /// Wraps an existing identifier, e.g. one read back from a manifest.
            pub fn from_raw(value: impl Into<String>) -> Self {
                $t(value.into())
            }
        }

        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl AsRef<str> for $t {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

id_common!(ImageUid);
id_common!(SessionId);

/// Replaces every character outside `[A-Za-z0-9]` with `-`.
pub fn sanitize_patient_id(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

/// First `n` digits of `raw` (separators such as `-`, `:` ignored), right-padded with
/// zeros. `None` when no digits are present.
fn digits(raw: Option<&str>, n: usize) -> Option<String> {
    let raw = raw?;
    // Fractional seconds never contribute.
    let head = raw.split('.').next().unwrap_or("");
    let mut d: String = head.chars().filter(char::is_ascii_digit).take(n).collect();
    if d.is_empty() {
        return None;
    }
    while d.len() < n {
        d.push('0');
    }
    Some(d)
}

fn date_component(rec: &DicomRecord) -> String {
    // A partial date would alias distinct days, so anything short of 8 digits is absent.
    match rec.study_date.as_deref() {
        Some(d) if d.chars().filter(char::is_ascii_digit).count() >= 8 => {
            d.chars().filter(char::is_ascii_digit).take(8).collect()
        }
        _ => "00000000".to_string(),
    }
}

fn time_component(rec: &DicomRecord) -> String {
    digits(rec.acquisition_time.as_deref(), 6)
        .or_else(|| digits(rec.study_time.as_deref(), 6))
        .unwrap_or_else(|| "000000".to_string())
}

fn base_id(rec: &DicomRecord) -> Result<String, IdentityError> {
    let patient = rec.patient_id.trim();
    if patient.is_empty() {
        return Err(IdentityError::MissingPatientId);
    }
    Ok(format!("{}_{}_{}", sanitize_patient_id(patient), date_component(rec), time_component(rec)))
}

pub fn make_session_id(rec: &DicomRecord) -> Result<SessionId, IdentityError> {
    base_id(rec).map(SessionId)
}

/// Derives the image identifier and records it in `seen`. Collisions get `_1`, `_2`, ...
/// in encounter order.
pub fn make_image_uid(rec: &DicomRecord, seen: &mut HashSet<ImageUid>) -> Result<ImageUid, IdentityError> {
    let base = base_id(rec)?;
    let mut candidate = ImageUid(base.clone());
    let mut n = 0u32;
    while seen.contains(&candidate) {
        n += 1;
        candidate = ImageUid(format!("{base}_{n}"));
    }
    seen.insert(candidate.clone());
    Ok(candidate)
}
