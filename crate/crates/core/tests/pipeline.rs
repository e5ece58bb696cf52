mod common;

use std::collections::HashMap;

use common::{dicom, fixtures_dir, perfect_predictions, small_config, snapshot, spec, write, Spec};
use cxr_curate::fixtures::{corpus, Expected, CORPUS_DIR, LABELS_FILE};
use cxr_curate::manifest::{read_manifest, CovidLabel, Status};
use cxr_curate::pipeline::{
    evaluate, exit_code, ingest, preprocess, read_metrics, report, run, schema_text, split, triage, PipelineError,
    RunConfig, MANIFEST_FILE, METRICS_FILE, SKIP_LOG_FILE,
};
use cxr_curate::splits::fold_file_name;
use cxr_curate::triage::ViewLabel;

fn labels_file(dir: &std::path::Path, rows: &[(&str, &str)]) -> std::path::PathBuf {
    let mut s = String::from("patient_id,sop_instance_uid,covid_label\n");
    for (p, l) in rows {
        s.push_str(&format!("{p},,{l}\n"));
    }
    let path = dir.join("labels.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn five_frontal(input: &std::path::Path) {
    for (i, (p, v)) in [("P1", "AP"), ("P2", "PA"), ("P3", "AP"), ("P4", "PA"), ("P5", "AP")].iter().enumerate() {
        let time = format!("10000{i}");
        let sop = format!("1.2.{i}");
        write(input, &format!("{p}.dcm"), &dicom(&spec(p, &time, &sop, Some(v)), i as u64));
    }
}

#[test]
fn non_dicom_file_is_logged_and_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out) = (tmp.path().join("in"), tmp.path().join("out"));
    five_frontal(&input);
    write(&input, "notes.txt", b"not an image");
    let o = ingest(&small_config(&input, &out)).unwrap();
    assert_eq!(o.processed, 5);
    assert!(o.is_partial());
    assert_eq!(read_manifest(&out.join(MANIFEST_FILE)).unwrap().len(), 5);
    let log = std::fs::read_to_string(out.join(SKIP_LOG_FILE)).unwrap();
    assert_eq!(log, "path,reason,detail\r\nnotes.txt,NotDicom,\r\n");
    assert_eq!(exit_code(&Ok(vec![o])), 1);
}

#[test]
fn lateral_and_abdomen_rows_are_excluded() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out) = (tmp.path().join("in"), tmp.path().join("out"));
    let specs = [
        spec("P1", "100000", "1.1", Some("AP")),
        spec("P2", "100001", "1.2", Some("LL")),
        spec("P3", "100002", "1.3", Some("PA")),
        Spec { series: Some("ABDOMEN SUPINE"), ..spec("P4", "100003", "1.4", None) },
        spec("P5", "100004", "1.5", Some("PA")),
    ];
    for (i, s) in specs.iter().enumerate() {
        write(&input, &format!("f{i}.dcm"), &dicom(s, i as u64));
    }
    let cfg = small_config(&input, &out);
    ingest(&cfg).unwrap();
    let o = triage(&cfg).unwrap();
    assert!(!o.is_partial());
    let m = read_manifest(&out.join(MANIFEST_FILE)).unwrap();
    let excluded: Vec<_> = m.iter().filter(|e| e.status == Some(Status::Excluded)).map(|e| e.patient_id.as_str()).collect();
    assert_eq!(excluded, ["P2", "P4"]);
    assert!(m.iter().filter(|e| e.status.is_none()).all(|e| e.view.unwrap().is_frontal()));
    assert!(m[1].status_reason.contains("LATERAL"), "{}", m[1].status_reason);
}

#[test]
fn preprocess_writes_frames_and_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out) = (tmp.path().join("in"), tmp.path().join("out"));
    five_frontal(&input);
    let cfg = small_config(&input, &out);
    ingest(&cfg).unwrap();
    triage(&cfg).unwrap();
    preprocess(&cfg).unwrap();
    let m = read_manifest(&out.join(MANIFEST_FILE)).unwrap();
    for e in &m {
        assert_eq!(e.status, Some(Status::Kept), "{}: {}", e.image_uid, e.status_reason);
        assert_eq!(e.processing_flags, ["resize", "equalize", "mask", "crop"]);
        let img = cxr_curate::raster::GrayImage::load_png(&out.join(e.output_image_path.as_ref().unwrap())).unwrap();
        assert_eq!(img.dimensions(), (128, 160));
        let mask = cxr_curate::raster::GrayImage::load_png(&out.join(e.mask_path.as_ref().unwrap())).unwrap();
        assert!(mask.data().iter().all(|&v| v == 0 || v == 255));
    }
    let meta = std::fs::read_to_string(out.join("manifest.meta.toml")).unwrap();
    assert!(meta.contains("frame_width = 128") && meta.contains("frame_height = 160"), "{meta}");
    assert!(meta.contains("orientation = \"portrait\""));
}

#[test]
fn perfect_predictions_score_one() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out) = (tmp.path().join("in"), tmp.path().join("out"));
    let mut rows = vec![];
    for i in 0..8 {
        let p = format!("Q{i}");
        write(&input, &format!("{p}.dcm"), &dicom(&spec(&p, "090000", &format!("2.{i}"), Some("AP")), i));
        rows.push((p, if i % 2 == 0 { "positive" } else { "negative" }));
    }
    let refs: Vec<(&str, &str)> = rows.iter().map(|(p, l)| (p.as_str(), *l)).collect();
    let mut cfg = RunConfig { k: 2, labels: Some(labels_file(tmp.path(), &refs)), ..small_config(&input, &out) };
    run(&cfg).unwrap();
    let preds = tmp.path().join("preds.csv");
    perfect_predictions(&out.join(fold_file_name(2, 0)), &out.join(MANIFEST_FILE), &preds);
    cfg.predictions = vec![preds];
    let o = evaluate(&cfg).unwrap();
    assert!(!o.is_partial(), "{:?}", o.warnings);
    let rows = read_metrics(&out.join(METRICS_FILE)).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.auc == 1.0 && r.accuracy == 1.0 && r.f1 == 1.0), "{rows:?}");
    report(&cfg).unwrap();
    let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.contains("AP fold mean      1.00"), "{text}");
    assert!(text.contains("grouped by patient"));
}

#[test]
fn unwritable_output_is_fatal_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    five_frontal(&input);
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, b"x").unwrap();
    let out = blocker.join("out");
    let r = run(&small_config(&input, &out));
    assert!(matches!(r, Err(PipelineError::Output { .. })), "{r:?}");
    assert_eq!(exit_code(&r), 2);
    assert_eq!(std::fs::read(&blocker).unwrap(), b"x");
}

#[test]
fn output_inside_input_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    five_frontal(tmp.path());
    let r = ingest(&small_config(tmp.path(), &tmp.path().join("out")));
    assert!(matches!(r, Err(PipelineError::Config(_))));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn stages_run_out_of_order_name_the_missing_column() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out) = (tmp.path().join("in"), tmp.path().join("out"));
    five_frontal(&input);
    let cfg = small_config(&input, &out);
    let missing = |r: Result<_, PipelineError>| match r {
        Err(PipelineError::StageOrder(e)) => e.missing,
        other => panic!("{other:?}"),
    };
    assert_eq!(missing(triage(&cfg)), "image_uid");
    ingest(&cfg).unwrap();
    assert_eq!(missing(preprocess(&cfg)), "view");
    assert_eq!(missing(split(&cfg)), "view");
    triage(&cfg).unwrap();
    assert_eq!(missing(split(&cfg)), "status");
    assert_eq!(missing(evaluate(&cfg)), "fold_index");
    let msg = triage(&RunConfig { output_root: Some(tmp.path().join("empty")), ..cfg.clone() }).unwrap_err().to_string();
    assert!(msg.contains("run ingest first"), "{msg}");
}

#[test]
fn reruns_and_worker_counts_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let (input, out) = (tmp.path().join("in"), tmp.path().join("out"));
    five_frontal(&input);
    let cfg = small_config(&input, &out);
    run(&cfg).unwrap();
    let first = snapshot(&out);
    // Rerunning from any stage onward reproduces every artifact.
    let stages: [fn(&RunConfig) -> Result<_, PipelineError>; 5] = [ingest, triage, preprocess, split, report];
    for from in 0..stages.len() {
        for stage in &stages[from..] {
            stage(&cfg).unwrap();
        }
        assert_eq!(snapshot(&out), first, "rerun from stage {from}");
    }
    assert_eq!(snapshot(&out), first);
    let out1 = tmp.path().join("out1");
    run(&RunConfig { workers: 1, ..small_config(&input, &out1) }).unwrap();
    assert_eq!(snapshot(&out1), first);
}

#[test]
fn fixture_corpus_matches_ground_truth() {
    let root = fixtures_dir();
    let tmp = tempfile::tempdir().unwrap();
    let cfg = RunConfig { labels: Some(root.join(LABELS_FILE)), ..small_config(&root.join(CORPUS_DIR), tmp.path()) };
    let r = run(&cfg);
    assert_eq!(exit_code(&r), 1, "{r:?}");
    let m = read_manifest(&tmp.path().join(MANIFEST_FILE)).unwrap();
    let by_path: HashMap<&str, _> = m.iter().map(|e| (e.source_path.as_deref().unwrap(), e)).collect();
    let log = std::fs::read_to_string(tmp.path().join(SKIP_LOG_FILE)).unwrap();
    for f in corpus() {
        match f.expected {
            Expected::View(v) => {
                let e = by_path[f.file.as_str()];
                assert_eq!(e.view, Some(v), "{}", f.file);
                assert_eq!(e.covid_label, f.label, "{}", f.file);
                let want = match v {
                    ViewLabel::Ap | ViewLabel::Pa => Status::Kept,
                    ViewLabel::Lateral | ViewLabel::Abdomen => Status::Excluded,
                    ViewLabel::Unknown => Status::Quarantined,
                };
                assert_eq!(e.status, Some(want), "{}: {}", f.file, e.status_reason);
            }
            Expected::Skip(code) => assert!(log.contains(&format!("{},{code},", f.file)), "{}\n{log}", f.file),
        }
    }
    assert!(m.iter().any(|e| e.image_uid.as_str().ends_with("_1")));
    assert!(m.iter().any(|e| e.covid_label == CovidLabel::Unknown));
}

#[test]
fn schema_doc_is_current() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/schemas.md");
    if std::env::var_os("CXR_REGENERATE_DOCS").is_some() {
        std::fs::write(path, schema_text()).unwrap();
    }
    let doc = std::fs::read_to_string(path).unwrap();
    assert_eq!(doc, schema_text());
}
