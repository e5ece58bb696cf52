//! Deterministic synthetic DICOM corpus with a ground-truth sidecar.
//!
//! Forty files covering every triage outcome plus unsupported and malformed inputs.
//! Pixel data are small lung phantoms stored in assorted bit depths and photometric
//! interpretations, so the full pipeline can run on the corpus.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use crate::dicom::write::{DicomWriter, Syntax};
use crate::dicom::{tags, transfer_syntax, DX_PRESENTATION_SOP_CLASS};
use crate::manifest::CovidLabel;
use crate::phantom::{LungPhantom, PhantomSpec};
use crate::triage::ViewLabel;

pub const CORPUS_DIR: &str = "corpus";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";
pub const LABELS_FILE: &str = "labels.csv";

/// What the pipeline must conclude about a fixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    View(ViewLabel),
    /// Rejected at ingest with this skip code.
    Skip(&'static str),
}

impl Expected {
    pub fn code(&self) -> &'static str {
        match self {
            Expected::View(v) => v.as_str(),
            Expected::Skip(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelFormat {
    Mono2U8,
    Mono2U12,
    Mono1U16,
    Mono2S16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Defect {
    None,
    Compressed(&'static str),
    Truncated,
    ShortPixels,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    /// Path relative to the corpus directory.
    pub file: String,
    pub patient_id: &'static str,
    pub study_date: &'static str,
    pub acquisition_time: Option<&'static str>,
    pub study_time: Option<&'static str>,
    pub sop_instance_uid: String,
    pub view_position: Option<&'static str>,
    pub series_description: Option<&'static str>,
    pub study_description: Option<&'static str>,
    pub code_meanings: Vec<&'static str>,
    pub expected: Expected,
    pub label: CovidLabel,
    pub pixel_format: PixelFormat,
    pub implicit_vr: bool,
    pub width: usize,
    pub height: usize,
    defect: Defect,
}

struct Row {
    name: &'static str,
    patient: &'static str,
    date: &'static str,
    time: &'static str,
    vp: Option<&'static str>,
    series: Option<&'static str>,
    study: Option<&'static str>,
    codes: &'static [&'static str],
    expected: Expected,
    defect: Defect,
}

const fn row(
    name: &'static str,
    patient: &'static str,
    date: &'static str,
    time: &'static str,
    vp: Option<&'static str>,
    series: Option<&'static str>,
    study: Option<&'static str>,
    codes: &'static [&'static str],
    expected: Expected,
) -> Row {
    Row { name, patient, date, time, vp, series, study, codes, expected, defect: Defect::None }
}

const AP: Expected = Expected::View(ViewLabel::Ap);
const PA: Expected = Expected::View(ViewLabel::Pa);
const LAT: Expected = Expected::View(ViewLabel::Lateral);
const ABD: Expected = Expected::View(ViewLabel::Abdomen);
const UNK: Expected = Expected::View(ViewLabel::Unknown);

#[rustfmt::skip]
const ROWS: [Row; 40] = [
    row("ap01", "A01", "20200314", "093122", Some("AP"), None, None, &[], AP),
    // same patient and second as ap01: identifier collision
    row("ap02", "A01", "20200314", "093122", Some("AP"), None, None, &[], AP),
    row("ap03", "A02", "20200315", "101500", Some("ap"), None, None, &[], AP),
    row("ap04", "A03", "20200316", "111111", None, None, None, &["X-Ray Image AP"], AP),
    row("ap05", "A04", "20200317", "120000", Some("SUPINE"), None, None, &[], AP),
    row("ap06", "A05", "20200318", "080102", None, None, None, &["Sitting"], AP),
    row("ap07", "A06", "20200319", "230000", None, Some("CHEST PORTABLE"), None, &["portable chest"], AP),
    row("ap08", "A07", "20200320", "000001", Some("AP"), Some("CHEST AP PORTABLE"), None, &[], AP),
    row("ap09", "A08", "20200321", "101010", Some("AP"), None, Some("CXR"), &[], AP),
    row("ap10", "A09", "20200322", "121212", Some("AP "), None, None, &[], AP),
    row("ap11", "A10", "20200323", "131313", Some("AP"), None, None, &[], AP),
    row("ap12", "A10", "20200401", "141414", Some("AP"), None, None, &[], AP),
    row("ap13", "A03", "20200402", "151515", Some("AP"), None, None, &[], AP),
    row("ap14", "A05", "20200318", "090102", Some("AP"), None, None, &[], AP),
    row("pa01", "B01", "20200501", "090000", Some("PA"), None, None, &[], PA),
    row("pa02", "B02", "20200502", "090500", Some("pa"), None, None, &[], PA),
    row("pa03", "B03", "20200503", "091000", None, None, None, &["postero-anterior PA"], PA),
    row("pa04", "B04", "20200504", "091500", Some("PA"), Some("CHEST PA"), None, &[], PA),
    row("pa05", "B05", "20200505", "092000", Some("PA"), None, None, &[], PA),
    row("pa06", "B06", "20200506", "092500", Some("PA"), None, None, &[], PA),
    row("pa07", "B07", "20200507", "093000", Some("PA"), None, None, &[], PA),
    row("pa08", "B01", "20200601", "093500", Some("PA"), None, None, &[], PA),
    row("pa09", "B03", "20200602", "094000", Some("PA"), None, None, &[], PA),
    row("pa10", "B06", "20200603", "094500", None, None, None, &["PA"], PA),
    row("lat01", "A01", "20200314", "093500", None, Some("CHEST LAT"), None, &[], LAT),
    row("lat02", "B02", "20200502", "091000", Some("LATERAL"), None, None, &[], LAT),
    row("lat03", "C01", "20200701", "100000", None, None, None, &["Lateral"], LAT),
    row("lat04", "C02", "20200702", "100500", Some("LL"), None, Some("CHEST LAT VIEW"), &[], LAT),
    row("abd01", "C03", "20200703", "110000", None, Some("ABDOMEN SUPINE"), None, &[], ABD),
    row("abd02", "C04", "20200704", "110500", Some("AP"), None, Some("AXR"), &[], ABD),
    row("abd03", "A02", "20200315", "103000", None, Some("Abdomen"), None, &[], ABD),
    row("abd04", "C05", "20200705", "111000", None, None, Some("ABDOMEN 1 VIEW"), &[], ABD),
    row("unk01", "D01", "20200801", "080000", None, None, None, &[], UNK),
    row("unk02", "D02", "20200802", "080500", Some("OBLIQUE"), None, None, &[], UNK),
    row("unk03", "D03", "20200803", "081000", None, Some("CHEST 1 VIEW"), Some("CHEST XRAY"), &[], UNK),
    row("unk04", "D04", "20200804", "081500", Some("RAO"), None, None, &["Chest"], UNK),
    Row { defect: Defect::Compressed(transfer_syntax::JPEG_BASELINE), ..row("jpeg01", "E01", "20200901", "090000", Some("AP"), None, None, &[], Expected::Skip("UnsupportedTransferSyntax")) },
    Row { defect: Defect::Compressed(transfer_syntax::RLE_LOSSLESS), ..row("rle01", "E02", "20200902", "090000", Some("PA"), None, None, &[], Expected::Skip("UnsupportedTransferSyntax")) },
    Row { defect: Defect::Truncated, ..row("bad01", "E03", "20200903", "090000", Some("AP"), None, None, &[], Expected::Skip("MalformedFile")) },
    Row { defect: Defect::ShortPixels, ..row("bad02", "E04", "20200904", "090000", Some("PA"), None, None, &[], Expected::Skip("MalformedFile")) },
];

/// Patient-level PCR labels; the D and E patients are unlabelled.
const LABELS: [(&str, CovidLabel); 17] = [
    ("A01", CovidLabel::Positive),
    ("A02", CovidLabel::Negative),
    ("A03", CovidLabel::Positive),
    ("A04", CovidLabel::Negative),
    ("A05", CovidLabel::Positive),
    ("A06", CovidLabel::Negative),
    ("A07", CovidLabel::Positive),
    ("A08", CovidLabel::Negative),
    ("A09", CovidLabel::Positive),
    ("A10", CovidLabel::Negative),
    ("B01", CovidLabel::Positive),
    ("B02", CovidLabel::Negative),
    ("B03", CovidLabel::Positive),
    ("B04", CovidLabel::Negative),
    ("B05", CovidLabel::Positive),
    ("B06", CovidLabel::Negative),
    ("B07", CovidLabel::Negative),
];

fn label_of(patient: &str) -> CovidLabel {
    LABELS.iter().find(|(p, _)| *p == patient).map_or(CovidLabel::Unknown, |(_, l)| *l)
}

/// The full fixture table in file order.
pub fn corpus() -> Vec<Fixture> {
    const FORMATS: [PixelFormat; 4] = [PixelFormat::Mono2U8, PixelFormat::Mono2U12, PixelFormat::Mono1U16, PixelFormat::Mono2S16];
    const SIZES: [(usize, usize); 3] = [(64, 80), (72, 90), (80, 80)];
    ROWS.iter()
        .enumerate()
        .map(|(i, r)| {
            let site = if matches!(r.expected, Expected::View(ViewLabel::Ap | ViewLabel::Pa)) { "site1" } else { "site2" };
            // a few files carry only a study time, one with fractional seconds
            let (acquisition_time, study_time) = match i % 7 {
                3 => (None, Some(r.time)),
                5 => (Some(leak_frac(r.time)), Some("000000")),
                _ => (Some(r.time), Some("000000")),
            };
            let (width, height) = SIZES[i % 3];
            Fixture {
                file: format!("{site}/{}.dcm", r.name),
                patient_id: r.patient,
                study_date: r.date,
                acquisition_time,
                study_time,
                sop_instance_uid: format!("1.2.826.0.1.3680043.10.1127.{}", i + 1),
                view_position: r.vp,
                series_description: r.series,
                study_description: r.study,
                code_meanings: r.codes.to_vec(),
                expected: r.expected,
                label: label_of(r.patient),
                pixel_format: FORMATS[i % 4],
                implicit_vr: i % 2 == 1,
                width,
                height,
                defect: r.defect,
            }
        })
        .collect()
}

/// Times are static strings; fractional variants come from a fixed table.
fn leak_frac(time: &'static str) -> &'static str {
    const FRACS: [(&str, &str); 8] = [
        ("230000", "230000.250"),
        ("092000", "092000.5"),
        ("151515", "151515.000001"),
        ("100500", "100500.75"),
        ("080000", "080000.1"),
        ("090000", "090000.9"),
        ("093122", "093122.123"),
        ("111000", "111000.01"),
    ];
    FRACS.iter().find(|(t, _)| *t == time).map_or(time, |(_, f)| f)
}

fn encode_pixels(f: &Fixture, seed: u64) -> (u16, u16, u16, &'static str, Vec<u8>) {
    let spec = PhantomSpec { width: f.width, height: f.height, noise: 8, ..PhantomSpec::default() };
    let img = LungPhantom::generate(&spec, seed).image;
    match f.pixel_format {
        PixelFormat::Mono2U8 => (8, 8, 0, "MONOCHROME2", img.data().to_vec()),
        PixelFormat::Mono2U12 => (
            16,
            12,
            0,
            "MONOCHROME2",
            img.data().iter().flat_map(|&v| (u16::from(v) * 16 + 7).to_le_bytes()).collect(),
        ),
        PixelFormat::Mono1U16 => (
            16,
            16,
            0,
            "MONOCHROME1",
            img.data().iter().flat_map(|&v| (65535 - u16::from(v) * 257).to_le_bytes()).collect(),
        ),
        PixelFormat::Mono2S16 => (
            16,
            16,
            1,
            "MONOCHROME2",
            img.data().iter().flat_map(|&v| (i16::from(v) * 100 - 12000).to_le_bytes()).collect(),
        ),
    }
}

/// Encodes one fixture file.
pub fn encode(f: &Fixture, index: usize) -> Vec<u8> {
    let syntax = match f.defect {
        Defect::Compressed(uid) => Syntax::Declared(uid.to_string()),
        _ if f.implicit_vr => Syntax::ImplicitLittle,
        _ => Syntax::ExplicitLittle,
    };
    let mut w = DicomWriter::new(syntax);
    w.sop_class(DX_PRESENTATION_SOP_CLASS)
        .string(tags::SOP_INSTANCE_UID, "UI", &f.sop_instance_uid)
        .string(tags::STUDY_DATE, "DA", f.study_date)
        .string(tags::PATIENT_ID, "LO", f.patient_id);
    if let Some(t) = f.study_time {
        w.string(tags::STUDY_TIME, "TM", t);
    }
    if let Some(t) = f.acquisition_time {
        w.string(tags::ACQUISITION_TIME, "TM", t);
    }
    if let Some(v) = f.view_position {
        w.string(tags::VIEW_POSITION, "CS", v);
    }
    if let Some(v) = f.series_description {
        w.string(tags::SERIES_DESCRIPTION, "LO", v);
    }
    if let Some(v) = f.study_description {
        w.string(tags::STUDY_DESCRIPTION, "LO", v);
    }
    if !f.code_meanings.is_empty() {
        w.code_sequence(tags::VIEW_CODE_SEQUENCE, &f.code_meanings, index % 3 == 0);
    }
    let (alloc, stored, repr, photometric, mut pixels) = encode_pixels(f, index as u64 + 1);
    w.us(tags::SAMPLES_PER_PIXEL, 1)
        .string(tags::PHOTOMETRIC_INTERPRETATION, "CS", photometric)
        .us(tags::ROWS, f.height as u16)
        .us(tags::COLUMNS, f.width as u16)
        .us(tags::BITS_ALLOCATED, alloc)
        .us(tags::BITS_STORED, stored)
        .us(tags::PIXEL_REPRESENTATION, repr);
    if f.defect == Defect::ShortPixels {
        pixels.truncate(pixels.len() / 2);
    }
    w.bytes(tags::PIXEL_DATA, if alloc == 8 { "OB" } else { "OW" }, &pixels);
    let mut bytes = w.finish();
    if f.defect == Defect::Truncated {
        // cut inside the pixel data element's value
        bytes.truncate(bytes.len() - pixels.len() / 2);
    }
    bytes
}

pub fn ground_truth_csv(fixtures: &[Fixture]) -> String {
    let mut s = String::from("file,patient_id,expected,covid_label\r\n");
    for f in fixtures {
        let _ = write!(s, "{},{},{},{}\r\n", f.file, f.patient_id, f.expected.code(), f.label);
    }
    s
}

pub fn labels_csv() -> String {
    let mut s = String::from("patient_id,sop_instance_uid,covid_label\r\n");
    for (p, l) in LABELS {
        let _ = write!(s, "{p},,{l}\r\n");
    }
    s
}

/// Every file the generator produces, as (path relative to `dir`, bytes).
pub fn render() -> Vec<(PathBuf, Vec<u8>)> {
    let fixtures = corpus();
    let mut out: Vec<(PathBuf, Vec<u8>)> = fixtures
        .iter()
        .enumerate()
        .map(|(i, f)| (Path::new(CORPUS_DIR).join(&f.file), encode(f, i)))
        .collect();
    out.push((PathBuf::from(GROUND_TRUTH_FILE), ground_truth_csv(&fixtures).into_bytes()));
    out.push((PathBuf::from(LABELS_FILE), labels_csv().into_bytes()));
    out
}

/// Writes the corpus under `dir/corpus` and the sidecars beside it.
pub fn write_corpus(dir: &Path) -> io::Result<()> {
    for (rel, bytes) in render() {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, bytes)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition() {
        let c = corpus();
        assert_eq!(c.len(), 40);
        let count = |code: &str| c.iter().filter(|f| f.expected.code() == code).count();
        assert_eq!(
            [count("AP"), count("PA"), count("LATERAL"), count("ABDOMEN"), count("UNKNOWN")],
            [14, 10, 4, 4, 4]
        );
        assert_eq!(count("UnsupportedTransferSyntax"), 2);
        assert_eq!(count("MalformedFile"), 2);
        let uids: std::collections::HashSet<_> = c.iter().map(|f| &f.sop_instance_uid).collect();
        assert_eq!(uids.len(), 40);
    }

    #[test]
    fn rendering_is_deterministic() {
        assert_eq!(render(), render());
    }
}
