use std::path::Path;

use super::{tags, transfer_syntax, DicomError, DicomRecord, Photometric, Tag};

const PREAMBLE_LEN: usize = 128;
const UNDEFINED_LENGTH: u32 = 0xFFFF_FFFF;

/// VRs whose explicit encoding carries two reserved bytes and a 32-bit length.
const LONG_VRS: [&[u8; 2]; 13] = [
    b"OB", b"OD", b"OF", b"OL", b"OV", b"OW", b"SQ", b"SV", b"UC", b"UN", b"UR", b"UT", b"UV",
];

pub fn parse_file(path: &Path) -> Result<DicomRecord, DicomError> {
    let bytes = std::fs::read(path).map_err(|e| DicomError::malformed(format!("read failed: {e}")))?;
    let mut rec = parse_dicom(&bytes)?;
    rec.source_path = path.to_path_buf();
    Ok(rec)
}

/// Parses a Part-10 byte stream. `source_path` on the result is left empty.
pub fn parse_dicom(bytes: &[u8]) -> Result<DicomRecord, DicomError> {
    if bytes.len() < PREAMBLE_LEN + 4 || &bytes[PREAMBLE_LEN..PREAMBLE_LEN + 4] != b"DICM" {
        return Err(DicomError::NotDicom);
    }
    let mut cursor = Cursor { bytes, pos: PREAMBLE_LEN + 4 };

    // File meta group is always explicit VR little endian.
    let mut syntax = None;
    while cursor.remaining() >= 4 && cursor.peek_group()? == 0x0002 {
        let el = cursor.read_header(true)?;
        let value = cursor.take(el.len as usize, el.tag)?;
        if el.tag == tags::TRANSFER_SYNTAX_UID {
            syntax = Some(clean_string(value));
        }
    }
    let syntax = syntax.ok_or_else(|| DicomError::malformed("file meta lacks (0002,0010) transfer syntax"))?;
    let explicit = match syntax.as_str() {
        transfer_syntax::EXPLICIT_VR_LITTLE_ENDIAN => true,
        transfer_syntax::IMPLICIT_VR_LITTLE_ENDIAN => false,
        _ => return Err(DicomError::UnsupportedTransferSyntax(syntax)),
    };

    let mut sink = Sink::default();
    let end = bytes.len();
    parse_dataset(&mut cursor, explicit, end, 0, &mut sink)?;
    sink.finish(syntax)
}

#[derive(Default)]
struct Sink {
    patient_id: Option<String>,
    study_date: Option<String>,
    study_time: Option<String>,
    acquisition_time: Option<String>,
    sop_instance_uid: Option<String>,
    series_description: Option<String>,
    study_description: Option<String>,
    view_position: Option<String>,
    code_meanings: Vec<String>,
    photometric: Option<String>,
    samples_per_pixel: Option<u16>,
    rows: Option<u16>,
    cols: Option<u16>,
    bits_allocated: Option<u16>,
    bits_stored: Option<u16>,
    pixel_representation: Option<u16>,
    pixel_data: Option<Vec<u8>>,
}

impl Sink {
    fn top_level(&mut self, tag: Tag, value: &[u8]) -> Result<(), DicomError> {
        let text = || non_empty(clean_string(value));
        match tag {
            tags::PATIENT_ID => self.patient_id = text(),
            tags::STUDY_DATE => self.study_date = text(),
            tags::STUDY_TIME => self.study_time = text(),
            tags::ACQUISITION_TIME => self.acquisition_time = text(),
            tags::SOP_INSTANCE_UID => self.sop_instance_uid = text(),
            tags::SERIES_DESCRIPTION => self.series_description = text(),
            tags::STUDY_DESCRIPTION => self.study_description = text(),
            tags::VIEW_POSITION => self.view_position = text(),
            tags::PHOTOMETRIC_INTERPRETATION => self.photometric = text(),
            tags::SAMPLES_PER_PIXEL => self.samples_per_pixel = Some(read_us(tag, value)?),
            tags::ROWS => self.rows = Some(read_us(tag, value)?),
            tags::COLUMNS => self.cols = Some(read_us(tag, value)?),
            tags::BITS_ALLOCATED => self.bits_allocated = Some(read_us(tag, value)?),
            tags::BITS_STORED => self.bits_stored = Some(read_us(tag, value)?),
            tags::PIXEL_REPRESENTATION => self.pixel_representation = Some(read_us(tag, value)?),
            tags::PIXEL_DATA => self.pixel_data = Some(value.to_vec()),
            _ => {}
        }
        Ok(())
    }

    fn finish(self, transfer_syntax: String) -> Result<DicomRecord, DicomError> {
        let need = |v: Option<u16>, name: &str| v.ok_or_else(|| DicomError::malformed(format!("missing {name}")));
        let rows = need(self.rows, "Rows (0028,0010)")?;
        let cols = need(self.cols, "Columns (0028,0011)")?;
        let bits_allocated = need(self.bits_allocated, "BitsAllocated (0028,0100)")?;
        let bits_stored = self.bits_stored.unwrap_or(bits_allocated);
        let pixel_representation = self.pixel_representation.unwrap_or(0);
        let pixel_data = self
            .pixel_data
            .ok_or_else(|| DicomError::malformed("missing PixelData (7FE0,0010)"))?;
        if rows == 0 || cols == 0 {
            return Err(DicomError::malformed("zero image dimension"));
        }
        if !matches!(bits_allocated, 8 | 16) || bits_stored == 0 || bits_stored > bits_allocated {
            return Err(DicomError::malformed(format!(
                "bits stored/allocated {bits_stored}/{bits_allocated} unsupported"
            )));
        }
        if pixel_representation > 1 {
            return Err(DicomError::malformed(format!("pixel representation {pixel_representation}")));
        }
        let mut photometric = self
            .photometric
            .as_deref()
            .map(Photometric::from_code)
            .unwrap_or(Photometric::Monochrome2);
        if self.samples_per_pixel.is_some_and(|s| s != 1) {
            photometric = Photometric::Other;
        }
        let rec = DicomRecord {
            source_path: Default::default(),
            transfer_syntax,
            patient_id: self.patient_id.unwrap_or_default(),
            study_date: self.study_date,
            study_time: self.study_time,
            acquisition_time: self.acquisition_time,
            sop_instance_uid: self.sop_instance_uid.unwrap_or_default(),
            series_description: self.series_description,
            study_description: self.study_description,
            view_position: self.view_position,
            code_meanings: self.code_meanings,
            photometric,
            rows,
            cols,
            bits_allocated,
            bits_stored,
            pixel_representation,
            pixel_data,
        };
        if rec.pixel_data.len() < rec.expected_pixel_bytes() {
            return Err(DicomError::malformed(format!(
                "pixel data holds {} bytes, {}x{} at {} bits needs {}",
                rec.pixel_data.len(),
                rec.cols,
                rec.rows,
                rec.bits_allocated,
                rec.expected_pixel_bytes()
            )));
        }
        Ok(rec)
    }
}

struct Header {
    tag: Tag,
    vr: Option<[u8; 2]>,
    len: u32,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn truncated(&self, what: impl std::fmt::Display) -> DicomError {
        DicomError::malformed(format!("truncated {what} at offset {}", self.pos))
    }

    fn u16(&mut self) -> Result<u16, DicomError> {
        let b = self.bytes.get(self.pos..self.pos + 2).ok_or_else(|| self.truncated("u16"))?;
        self.pos += 2;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, DicomError> {
        let b = self.bytes.get(self.pos..self.pos + 4).ok_or_else(|| self.truncated("u32"))?;
        self.pos += 4;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn peek_group(&self) -> Result<u16, DicomError> {
        let b = self.bytes.get(self.pos..self.pos + 2).ok_or_else(|| self.truncated("tag"))?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn take(&mut self, len: usize, tag: Tag) -> Result<&'a [u8], DicomError> {
        let end = self.pos.checked_add(len).ok_or_else(|| self.truncated(tag))?;
        let v = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| DicomError::malformed(format!("truncated element {tag}: needs {len} bytes, {} left", self.remaining())))?;
        self.pos = end;
        Ok(v)
    }

    fn read_tag(&mut self) -> Result<Tag, DicomError> {
        Ok(Tag(self.u16()?, self.u16()?))
    }

    fn read_header(&mut self, explicit: bool) -> Result<Header, DicomError> {
        let tag = self.read_tag()?;
        // Item and delimiter tags never carry a VR.
        if tag.0 == 0xFFFE {
            let len = self.u32()?;
            return Ok(Header { tag, vr: None, len });
        }
        if !explicit {
            let len = self.u32()?;
            return Ok(Header { tag, vr: None, len });
        }
        let vr_bytes = self.take(2, tag)?;
        let vr = [vr_bytes[0], vr_bytes[1]];
        if !vr.iter().all(u8::is_ascii_uppercase) {
            return Err(DicomError::malformed(format!("invalid VR bytes {vr:?} for {tag}")));
        }
        let len = if LONG_VRS.contains(&&vr) {
            self.u16()?;
            self.u32()?
        } else {
            u32::from(self.u16()?)
        };
        Ok(Header { tag, vr: Some(vr), len })
    }
}

fn parse_dataset(
    cursor: &mut Cursor<'_>,
    explicit: bool,
    end: usize,
    depth: usize,
    sink: &mut Sink,
) -> Result<(), DicomError> {
    if depth > 32 {
        return Err(DicomError::malformed("sequence nesting too deep"));
    }
    while cursor.pos < end {
        let start = cursor.pos;
        let el = cursor.read_header(explicit)?;
        if el.tag == tags::ITEM_DELIMITATION {
            if depth == 0 {
                return Err(DicomError::malformed("item delimiter outside a sequence"));
            }
            // Caller handles undefined-length items; rewind so it sees the delimiter.
            cursor.pos = start;
            return Ok(());
        }
        let is_sequence = match el.vr {
            Some(vr) => &vr == b"SQ" || (el.len == UNDEFINED_LENGTH && el.tag != tags::PIXEL_DATA),
            None => el.len == UNDEFINED_LENGTH || looks_like_sequence(cursor, &el),
        };
        if is_sequence && el.tag != tags::PIXEL_DATA {
            parse_sequence(cursor, explicit, el.len, depth + 1, sink)?;
            continue;
        }
        if el.len == UNDEFINED_LENGTH {
            // Encapsulated pixel data can only appear under a compressed syntax.
            return Err(DicomError::malformed(format!("undefined length on non-sequence element {}", el.tag)));
        }
        let value = cursor.take(el.len as usize, el.tag)?;
        if depth == 0 {
            sink.top_level(el.tag, value)?;
        } else if el.tag == tags::CODE_MEANING {
            if let Some(text) = non_empty(clean_string(value)) {
                sink.code_meanings.push(text);
            }
        }
    }
    if cursor.pos > end {
        return Err(DicomError::malformed("element overruns its container"));
    }
    Ok(())
}

/// Implicit VR offers no type information; a defined-length value that opens with an
/// item tag is treated as a sequence.
fn looks_like_sequence(cursor: &Cursor<'_>, el: &Header) -> bool {
    if el.len < 8 || el.tag == tags::PIXEL_DATA {
        return false;
    }
    matches!(cursor.bytes.get(cursor.pos..cursor.pos + 4), Some([0xFE, 0xFF, 0x00, 0xE0]))
}

fn parse_sequence(
    cursor: &mut Cursor<'_>,
    explicit: bool,
    len: u32,
    depth: usize,
    sink: &mut Sink,
) -> Result<(), DicomError> {
    let seq_end = if len == UNDEFINED_LENGTH {
        None
    } else {
        let end = cursor.pos + len as usize;
        if end > cursor.bytes.len() {
            return Err(cursor.truncated("sequence"));
        }
        Some(end)
    };
    loop {
        if let Some(e) = seq_end {
            if cursor.pos >= e {
                break;
            }
        }
        let item = cursor.read_header(false)?;
        match item.tag {
            tags::SEQUENCE_DELIMITATION if seq_end.is_none() => break,
            tags::ITEM => {}
            other => return Err(DicomError::malformed(format!("expected item tag in sequence, found {other}"))),
        }
        if item.len == UNDEFINED_LENGTH {
            parse_dataset(cursor, explicit, seq_end.unwrap_or(cursor.bytes.len()), depth, sink)?;
            let delim = cursor.read_header(false)?;
            if delim.tag != tags::ITEM_DELIMITATION {
                return Err(DicomError::malformed("unterminated sequence item"));
            }
        } else {
            let item_end = cursor.pos + item.len as usize;
            if item_end > cursor.bytes.len() {
                return Err(cursor.truncated("sequence item"));
            }
            parse_dataset(cursor, explicit, item_end, depth, sink)?;
        }
    }
    Ok(())
}

fn read_us(tag: Tag, value: &[u8]) -> Result<u16, DicomError> {
    match value {
        [a, b, ..] => Ok(u16::from_le_bytes([*a, *b])),
        _ => Err(DicomError::malformed(format!("{tag} holds {} bytes, expected US", value.len()))),
    }
}

/// Decodes a string value and strips trailing space/NUL padding.
fn clean_string(value: &[u8]) -> String {
    let text = String::from_utf8_lossy(value);
    text.trim_end_matches([' ', '\0']).to_string()
}

fn non_empty(s: String) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}
