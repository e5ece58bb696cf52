//! Minimal Part-10 writer used to build synthetic fixtures and to round-trip
//! [`DicomRecord`]s. It emits uncompressed little-endian datasets only; a
//! [`Syntax::Declared`] UID lets tests produce files that merely *claim* another
//! transfer syntax.

use std::collections::BTreeMap;

use super::{tags, transfer_syntax, DicomRecord, Tag, SECONDARY_CAPTURE_SOP_CLASS};

const IMPLEMENTATION_CLASS_UID: &str = "1.2.826.0.1.3680043.10.1127.1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Syntax {
    ExplicitLittle,
    ImplicitLittle,
    /// Writes this UID into the file meta but encodes the body as explicit VR LE.
    Declared(String),
}

impl Syntax {
    fn uid(&self) -> &str {
        match self {
            Syntax::ExplicitLittle => transfer_syntax::EXPLICIT_VR_LITTLE_ENDIAN,
            Syntax::ImplicitLittle => transfer_syntax::IMPLICIT_VR_LITTLE_ENDIAN,
            Syntax::Declared(uid) => uid,
        }
    }

    fn explicit(&self) -> bool {
        !matches!(self, Syntax::ImplicitLittle)
    }
}

#[derive(Debug, Clone)]
pub struct DicomWriter {
    syntax: Syntax,
    sop_class: String,
    sop_instance: String,
    elements: BTreeMap<Tag, Vec<u8>>,
}

impl DicomWriter {
    pub fn new(syntax: Syntax) -> Self {
        Self {
            syntax,
            sop_class: SECONDARY_CAPTURE_SOP_CLASS.to_string(),
            sop_instance: "1.2.3".to_string(),
            elements: BTreeMap::new(),
        }
    }

    pub fn sop_class(&mut self, uid: &str) -> &mut Self {
        self.sop_class = uid.to_string();
        self
    }

    /// Text element, padded to even length (NUL for UI, space otherwise).
    pub fn string(&mut self, tag: Tag, vr: &str, value: &str) -> &mut Self {
        if tag == tags::SOP_INSTANCE_UID && !value.is_empty() {
            self.sop_instance = value.to_string();
        }
        let mut bytes = value.as_bytes().to_vec();
        if bytes.len() % 2 == 1 {
            bytes.push(if vr == "UI" { 0 } else { b' ' });
        }
        self.put(tag, vr, &bytes)
    }

    pub fn us(&mut self, tag: Tag, value: u16) -> &mut Self {
        self.put(tag, "US", &value.to_le_bytes())
    }

    pub fn bytes(&mut self, tag: Tag, vr: &str, data: &[u8]) -> &mut Self {
        let mut bytes = data.to_vec();
        if bytes.len() % 2 == 1 {
            bytes.push(0);
        }
        self.put(tag, vr, &bytes)
    }

    /// Writes `data` unpadded; odd lengths produce a non-conformant (but parseable) element.
    pub fn raw(&mut self, tag: Tag, vr: &str, data: &[u8]) -> &mut Self {
        self.put(tag, vr, data)
    }

    /// A code sequence with one item per meaning.
    pub fn code_sequence(&mut self, tag: Tag, meanings: &[&str], undefined_length: bool) -> &mut Self {
        let explicit = self.syntax.explicit();
        let mut body = Vec::new();
        for (i, meaning) in meanings.iter().enumerate() {
            let mut item = Vec::new();
            encode_element(&mut item, Tag(0x0008, 0x0100), "SH", &pad_text(&format!("R-{:05}", 10200 + i)), explicit);
            encode_element(&mut item, Tag(0x0008, 0x0102), "SH", &pad_text("SRT"), explicit);
            encode_element(&mut item, tags::CODE_MEANING, "LO", &pad_text(meaning), explicit);
            push_tag(&mut body, tags::ITEM);
            if undefined_length {
                body.extend_from_slice(&u32::MAX.to_le_bytes());
                body.extend_from_slice(&item);
                push_tag(&mut body, tags::ITEM_DELIMITATION);
                body.extend_from_slice(&0u32.to_le_bytes());
            } else {
                body.extend_from_slice(&(item.len() as u32).to_le_bytes());
                body.extend_from_slice(&item);
            }
        }
        let mut encoded = Vec::new();
        push_tag(&mut encoded, tag);
        if explicit {
            encoded.extend_from_slice(b"SQ\0\0");
        }
        if undefined_length {
            encoded.extend_from_slice(&u32::MAX.to_le_bytes());
            encoded.extend_from_slice(&body);
            push_tag(&mut encoded, tags::SEQUENCE_DELIMITATION);
            encoded.extend_from_slice(&0u32.to_le_bytes());
        } else {
            encoded.extend_from_slice(&(body.len() as u32).to_le_bytes());
            encoded.extend_from_slice(&body);
        }
        self.elements.insert(tag, encoded);
        self
    }

    fn put(&mut self, tag: Tag, vr: &str, value: &[u8]) -> &mut Self {
        let mut encoded = Vec::new();
        encode_element(&mut encoded, tag, vr, value, self.syntax.explicit());
        self.elements.insert(tag, encoded);
        self
    }

    pub fn finish(&self) -> Vec<u8> {
        let mut meta = Vec::new();
        encode_element(&mut meta, Tag(0x0002, 0x0001), "OB", &[0, 1], true);
        encode_element(&mut meta, tags::MEDIA_STORAGE_SOP_CLASS_UID, "UI", &pad_uid(&self.sop_class), true);
        encode_element(&mut meta, tags::MEDIA_STORAGE_SOP_INSTANCE_UID, "UI", &pad_uid(&self.sop_instance), true);
        encode_element(&mut meta, tags::TRANSFER_SYNTAX_UID, "UI", &pad_uid(self.syntax.uid()), true);
        encode_element(&mut meta, Tag(0x0002, 0x0012), "UI", &pad_uid(IMPLEMENTATION_CLASS_UID), true);

        let mut out = vec![0u8; 128];
        out.extend_from_slice(b"DICM");
        encode_element(&mut out, Tag(0x0002, 0x0000), "UL", &(meta.len() as u32).to_le_bytes(), true);
        out.extend_from_slice(&meta);
        for encoded in self.elements.values() {
            out.extend_from_slice(encoded);
        }
        out
    }
}

/// Encodes every field of `rec` so that parsing the output yields an equal record
/// (apart from `source_path`).
pub fn serialize(rec: &DicomRecord, syntax: Syntax) -> Vec<u8> {
    let mut w = DicomWriter::new(syntax);
    w.string(tags::SOP_INSTANCE_UID, "UI", &rec.sop_instance_uid);
    if !rec.patient_id.is_empty() {
        w.string(tags::PATIENT_ID, "LO", &rec.patient_id);
    }
    let optional = [
        (tags::STUDY_DATE, "DA", &rec.study_date),
        (tags::STUDY_TIME, "TM", &rec.study_time),
        (tags::ACQUISITION_TIME, "TM", &rec.acquisition_time),
        (tags::SERIES_DESCRIPTION, "LO", &rec.series_description),
        (tags::STUDY_DESCRIPTION, "LO", &rec.study_description),
        (tags::VIEW_POSITION, "CS", &rec.view_position),
    ];
    for (tag, vr, value) in optional {
        if let Some(v) = value {
            w.string(tag, vr, v);
        }
    }
    if !rec.code_meanings.is_empty() {
        let meanings: Vec<&str> = rec.code_meanings.iter().map(String::as_str).collect();
        w.code_sequence(tags::VIEW_CODE_SEQUENCE, &meanings, false);
    }
    w.string(tags::PHOTOMETRIC_INTERPRETATION, "CS", rec.photometric.code());
    w.us(tags::SAMPLES_PER_PIXEL, 1);
    w.us(tags::ROWS, rec.rows);
    w.us(tags::COLUMNS, rec.cols);
    w.us(tags::BITS_ALLOCATED, rec.bits_allocated);
    w.us(tags::BITS_STORED, rec.bits_stored);
    w.us(tags::PIXEL_REPRESENTATION, rec.pixel_representation);
    let vr = if rec.bits_allocated > 8 { "OW" } else { "OB" };
    w.bytes(tags::PIXEL_DATA, vr, &rec.pixel_data);
    w.finish()
}

fn push_tag(out: &mut Vec<u8>, tag: Tag) {
    out.extend_from_slice(&tag.0.to_le_bytes());
    out.extend_from_slice(&tag.1.to_le_bytes());
}

fn encode_element(out: &mut Vec<u8>, tag: Tag, vr: &str, value: &[u8], explicit: bool) {
    push_tag(out, tag);
    if explicit {
        out.extend_from_slice(vr.as_bytes());
        if matches!(vr, "OB" | "OD" | "OF" | "OL" | "OV" | "OW" | "SQ" | "SV" | "UC" | "UN" | "UR" | "UT" | "UV") {
            out.extend_from_slice(&[0, 0]);
            out.extend_from_slice(&(value.len() as u32).to_le_bytes());
        } else {
            out.extend_from_slice(&(value.len() as u16).to_le_bytes());
        }
    } else {
        out.extend_from_slice(&(value.len() as u32).to_le_bytes());
    }
    out.extend_from_slice(value);
}

fn pad_text(s: &str) -> Vec<u8> {
    let mut b = s.as_bytes().to_vec();
    if b.len() % 2 == 1 {
        b.push(b' ');
    }
    b
}

fn pad_uid(s: &str) -> Vec<u8> {
    let mut b = s.as_bytes().to_vec();
    if b.len() % 2 == 1 {
        b.push(0);
    }
    b
}
