#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cxr_curate::dicom::tags;
use cxr_curate::dicom::write::{DicomWriter, Syntax};
use cxr_curate::dicom::DX_PRESENTATION_SOP_CLASS;
use cxr_curate::phantom::{LungPhantom, PhantomSpec};
use cxr_curate::pipeline::RunConfig;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

/// Config with a small frame so tests stay fast.
pub fn small_config(input: &Path, output: &Path) -> RunConfig {
    RunConfig {
        input_root: Some(input.to_path_buf()),
        output_root: Some(output.to_path_buf()),
        frame_width: 128,
        frame_height: 160,
        workers: 2,
        ..RunConfig::default()
    }
}

pub struct Spec<'a> {
    pub patient: &'a str,
    pub date: &'a str,
    pub time: &'a str,
    pub sop: &'a str,
    pub view: Option<&'a str>,
    pub series: Option<&'a str>,
}

pub fn spec<'a>(patient: &'a str, time: &'a str, sop: &'a str, view: Option<&'a str>) -> Spec<'a> {
    Spec { patient, date: "20200401", time, sop, view, series: None }
}

/// Explicit VR, 8-bit MONOCHROME2 phantom.
pub fn dicom(s: &Spec, seed: u64) -> Vec<u8> {
    let ph = LungPhantom::generate(&PhantomSpec { width: 64, height: 80, noise: 8, ..PhantomSpec::default() }, seed);
    let mut w = DicomWriter::new(Syntax::ExplicitLittle);
    w.sop_class(DX_PRESENTATION_SOP_CLASS)
        .string(tags::SOP_INSTANCE_UID, "UI", s.sop)
        .string(tags::STUDY_DATE, "DA", s.date)
        .string(tags::ACQUISITION_TIME, "TM", s.time)
        .string(tags::PATIENT_ID, "LO", s.patient);
    if let Some(v) = s.view {
        w.string(tags::VIEW_POSITION, "CS", v);
    }
    if let Some(v) = s.series {
        w.string(tags::SERIES_DESCRIPTION, "LO", v);
    }
    w.us(tags::SAMPLES_PER_PIXEL, 1)
        .string(tags::PHOTOMETRIC_INTERPRETATION, "CS", "MONOCHROME2")
        .us(tags::ROWS, 80)
        .us(tags::COLUMNS, 64)
        .us(tags::BITS_ALLOCATED, 8)
        .us(tags::BITS_STORED, 8)
        .us(tags::PIXEL_REPRESENTATION, 0)
        .bytes(tags::PIXEL_DATA, "OB", ph.image.data());
    w.finish()
}

pub fn write(dir: &Path, rel: &str, bytes: &[u8]) {
    let p = dir.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, bytes).unwrap();
}

/// Every regular file under `dir` keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Perfect-score predictions for every image in a fold file.
pub fn perfect_predictions(folds_csv: &Path, manifest: &Path, out: &Path) {
    let entries = cxr_curate::manifest::read_manifest(manifest).unwrap();
    let labels: BTreeMap<String, cxr_curate::manifest::CovidLabel> =
        entries.iter().map(|e| (e.image_uid.to_string(), e.covid_label)).collect();
    let folds = cxr_curate::splits::read_folds(folds_csv).unwrap();
    let mut s = String::from("image_uid,score,true_label\r\n");
    for a in folds {
        let positive = labels[&a.image_uid] == cxr_curate::manifest::CovidLabel::Positive;
        let (score, label) = if positive { (0.9, "positive") } else { (0.1, "negative") };
        s.push_str(&format!("{},{score},{label}\r\n", a.image_uid));
    }
    std::fs::write(out, s).unwrap();
}
