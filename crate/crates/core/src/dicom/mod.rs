//! DICOM Part-10 ingestion.
//!
//! Only the uncompressed little-endian transfer syntaxes are decoded. The parser
//! extracts the small tag subset that identity assignment and view triage need,
//! plus the pixel module attributes; everything else is skipped over.

mod parse;
mod pixels;
mod scan;
pub mod write;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_dicom, parse_file};
pub use pixels::{decode_pixels, to_8bit, DEFAULT_HI_PCT, DEFAULT_LO_PCT};
pub use scan::{scan_directory, ScanError, ScanResult, SkipReason, SkipRecord};

/// A `(group, element)` tag address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub u16, pub u16);

impl std::fmt::Display for Tag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:04X},{:04X})", self.0, self.1)
    }
}

pub mod tags {
    use super::Tag;

    pub const TRANSFER_SYNTAX_UID: Tag = Tag(0x0002, 0x0010);
    pub const MEDIA_STORAGE_SOP_CLASS_UID: Tag = Tag(0x0002, 0x0002);
    pub const MEDIA_STORAGE_SOP_INSTANCE_UID: Tag = Tag(0x0002, 0x0003);
    pub const SOP_INSTANCE_UID: Tag = Tag(0x0008, 0x0018);
    pub const STUDY_DATE: Tag = Tag(0x0008, 0x0020);
    pub const STUDY_TIME: Tag = Tag(0x0008, 0x0030);
    pub const ACQUISITION_TIME: Tag = Tag(0x0008, 0x0032);
    pub const CODE_MEANING: Tag = Tag(0x0008, 0x0104);
    pub const STUDY_DESCRIPTION: Tag = Tag(0x0008, 0x1030);
    pub const SERIES_DESCRIPTION: Tag = Tag(0x0008, 0x103E);
    pub const PATIENT_ID: Tag = Tag(0x0010, 0x0020);
    pub const VIEW_POSITION: Tag = Tag(0x0018, 0x5101);
    pub const SAMPLES_PER_PIXEL: Tag = Tag(0x0028, 0x0002);
    pub const PHOTOMETRIC_INTERPRETATION: Tag = Tag(0x0028, 0x0004);
    pub const ROWS: Tag = Tag(0x0028, 0x0010);
    pub const COLUMNS: Tag = Tag(0x0028, 0x0011);
    pub const BITS_ALLOCATED: Tag = Tag(0x0028, 0x0100);
    pub const BITS_STORED: Tag = Tag(0x0028, 0x0101);
    pub const PIXEL_REPRESENTATION: Tag = Tag(0x0028, 0x0103);
    pub const VIEW_CODE_SEQUENCE: Tag = Tag(0x0054, 0x0220);
    pub const PIXEL_DATA: Tag = Tag(0x7FE0, 0x0010);

    pub const ITEM: Tag = Tag(0xFFFE, 0xE000);
    pub const ITEM_DELIMITATION: Tag = Tag(0xFFFE, 0xE00D);
    pub const SEQUENCE_DELIMITATION: Tag = Tag(0xFFFE, 0xE0DD);
}

pub mod transfer_syntax {
    pub const IMPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2";
    pub const EXPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2.1";
    pub const EXPLICIT_VR_BIG_ENDIAN: &str = "1.2.840.10008.1.2.2";
    pub const DEFLATED_EXPLICIT_VR_LITTLE_ENDIAN: &str = "1.2.840.10008.1.2.1.99";
    pub const JPEG_BASELINE: &str = "1.2.840.10008.1.2.4.50";
    pub const JPEG_LOSSLESS_SV1: &str = "1.2.840.10008.1.2.4.70";
    pub const JPEG_2000: &str = "1.2.840.10008.1.2.4.91";
    pub const RLE_LOSSLESS: &str = "1.2.840.10008.1.2.5";
}

/// Secondary Capture Image Storage, used for synthetic files.
pub const SECONDARY_CAPTURE_SOP_CLASS: &str = "1.2.840.10008.5.1.4.1.1.7";
/// Digital X-Ray Image Storage, for presentation.
pub const DX_PRESENTATION_SOP_CLASS: &str = "1.2.840.10008.5.1.4.1.1.1.1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Photometric {
    #[serde(rename = "MONOCHROME1")]
    Monochrome1,
    #[serde(rename = "MONOCHROME2")]
    Monochrome2,
    #[serde(rename = "OTHER")]
    Other,
}

impl Photometric {
    pub fn from_code(code: &str) -> Self {
        match code.trim() {
            "MONOCHROME1" => Photometric::Monochrome1,
            "MONOCHROME2" => Photometric::Monochrome2,
            _ => Photometric::Other,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Photometric::Monochrome1 => "MONOCHROME1",
            Photometric::Monochrome2 => "MONOCHROME2",
            Photometric::Other => "OTHER",
        }
    }
}

/// The tag subset of one DICOM file plus its raw pixel buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DicomRecord {
    pub source_path: PathBuf,
    pub transfer_syntax: String,
    pub patient_id: String,
    pub study_date: Option<String>,
    pub study_time: Option<String>,
    pub acquisition_time: Option<String>,
    pub sop_instance_uid: String,
    pub series_description: Option<String>,
    pub study_description: Option<String>,
    pub view_position: Option<String>,
    /// Every (0008,0104) value found inside sequences, in file order.
    pub code_meanings: Vec<String>,
    pub photometric: Photometric,
    pub rows: u16,
    pub cols: u16,
    pub bits_allocated: u16,
    pub bits_stored: u16,
    pub pixel_representation: u16,
    pub pixel_data: Vec<u8>,
}

impl DicomRecord {
    pub fn bytes_per_sample(&self) -> usize {
        usize::from(self.bits_allocated / 8)
    }

    pub fn expected_pixel_bytes(&self) -> usize {
        usize::from(self.rows) * usize::from(self.cols) * self.bytes_per_sample()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DicomError {
    #[error("missing 128-byte preamble and DICM magic")]
    NotDicom,
    #[error("unsupported transfer syntax {0}")]
    UnsupportedTransferSyntax(String),
    #[error("malformed file: {0}")]
    MalformedFile(String),
    #[error("unsupported photometric interpretation {0}")]
    UnsupportedPhotometric(String),
}

impl DicomError {
    pub(crate) fn malformed(msg: impl Into<String>) -> Self {
        DicomError::MalformedFile(msg.into())
    }
}
