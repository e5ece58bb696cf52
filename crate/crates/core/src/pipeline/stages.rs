use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{render_report, write_metrics, MetricsRow};
use super::{
    LabelTable, PipelineError, RunConfig, StageOrderError, StageOutcome, IMAGES_DIR, MANIFEST_FILE, MASKS_DIR,
    META_FILE, METRICS_FILE, REPORT_JSON_FILE, REPORT_TEXT_FILE, SKIP_LOG_FILE,
};
use crate::dicom::{decode_pixels, parse_file, scan_directory, to_8bit, DicomRecord, SkipReason, SkipRecord};
use crate::identity::{make_image_uid, make_session_id};
use crate::image_ops::{hist_equalize, resize_bilinear, resize_letterbox};
use crate::lung::{apply_mask, crop_to_mask, Segmenter};
use crate::manifest::{read_manifest, write_manifest, ManifestEntry, Status};
use crate::metrics::{evaluate_folds, read_predictions, PredictionRecord};
use crate::splits::{fold_file_name, read_folds, split_cohorts, write_folds};
use crate::triage::{classify_view, default_ruleset, RuleSet, ViewLabel};

pub const SKIP_LOG_COLUMNS: [&str; 3] = ["path", "reason", "detail"];

/// Preprocessing steps in the order they are applied.
pub const STEP_ORDER: [&str; 6] = ["to_8bit", "resize", "equalize", "segment", "mask", "crop"];

/// Sidecar describing the frame every output image shares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub frame_width: usize,
    pub frame_height: usize,
    pub orientation: String,
    pub resize: String,
    pub window_lo: f64,
    pub window_hi: f64,
    pub mask_backend: String,
    pub crop_margin: usize,
    pub step_order: Vec<String>,
}

fn worker_pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| PipelineError::Config(format!("cannot start {} workers: {e}", cfg.workers)))
}

fn load_rules(cfg: &RunConfig) -> Result<RuleSet, PipelineError> {
    Ok(match &cfg.rules {
        Some(p) => RuleSet::load(p)?,
        None => default_ruleset(),
    })
}

/// `path` relative to `root` with `/` separators.
fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn load_manifest_for(out: &Path, stage: &'static str) -> Result<Vec<ManifestEntry>, PipelineError> {
    let path = out.join(MANIFEST_FILE);
    if !path.is_file() {
        return Err(StageOrderError {
            stage,
            missing: "image_uid",
            producer: "ingest",
            detail: format!("{} does not exist", path.display()),
        }
        .into());
    }
    Ok(read_manifest(&path)?)
}

fn clear_from_triage(e: &mut ManifestEntry) {
    e.view = None;
    e.status = None;
    e.status_reason.clear();
    clear_from_preprocess(e);
}

fn clear_from_preprocess(e: &mut ManifestEntry) {
    if matches!(e.view, Some(ViewLabel::Ap | ViewLabel::Pa)) {
        e.status = None;
    }
    e.output_image_path = None;
    e.mask_path = None;
    e.processing_flags.clear();
}

fn parse_for_ingest(path: &Path) -> Result<DicomRecord, SkipReason> {
    let mut rec = parse_file(path).map_err(SkipReason::from)?;
    if rec.patient_id.trim().is_empty() {
        return Err(SkipReason::MissingPatientId);
    }
    if rec.sop_instance_uid.trim().is_empty() {
        return Err(SkipReason::MissingSopInstanceUid);
    }
    decode_pixels(&rec).map_err(SkipReason::from)?;
    rec.pixel_data = Vec::new();
    Ok(rec)
}

fn write_skip_log(skipped: &[SkipRecord], input: &Path, path: &Path) -> Result<(), PipelineError> {
    let err = |e: csv::Error| PipelineError::output(path, e);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path).map_err(err)?;
    w.write_record(SKIP_LOG_COLUMNS).map_err(err)?;
    for s in skipped {
        w.write_record([relative(input, &s.path).as_str(), s.reason.code(), s.reason.detail()]).map_err(err)?;
    }
    w.flush().map_err(|e| PipelineError::output(path, e))
}

/// Scans the input root, parses every candidate, assigns identifiers in path order
/// and writes a fresh manifest plus the skip log.
pub fn ingest(cfg: &RunConfig) -> Result<StageOutcome, PipelineError> {
    cfg.validate()?;
    let input = cfg.input_root()?;
    let out = cfg.output_root()?;
    let labels = cfg.labels.as_deref().map(LabelTable::load).transpose()?;
    let scan = scan_directory(input, cfg.follow_symlinks)?;
    std::fs::create_dir_all(out).map_err(|e| PipelineError::output(out, e))?;

    let parsed: Vec<Result<DicomRecord, SkipReason>> =
        worker_pool(cfg)?.install(|| scan.files.par_iter().map(|p| parse_for_ingest(p)).collect());

    let mut skipped = scan.skipped;
    let mut seen = HashSet::new();
    let mut entries = vec![];
    for (path, res) in scan.files.iter().zip(parsed) {
        let rec = match res {
            Ok(r) => r,
            Err(reason) => {
                skipped.push(SkipRecord { path: path.clone(), reason });
                continue;
            }
        };
        let image_uid = make_image_uid(&rec, &mut seen).expect("patient id checked");
        let session_id = make_session_id(&rec).expect("patient id checked");
        entries.push(ManifestEntry {
            image_uid,
            session_id,
            patient_id: rec.patient_id.trim().to_string(),
            view: None,
            status: None,
            status_reason: String::new(),
            covid_label: labels.as_ref().map(|l| l.lookup(&rec.patient_id, &rec.sop_instance_uid)).unwrap_or_default(),
            source_path: Some(relative(input, path)),
            output_image_path: None,
            mask_path: None,
            processing_flags: vec![],
        });
    }
    skipped.sort_by(|a, b| a.path.cmp(&b.path));

    write_skip_log(&skipped, input, &out.join(SKIP_LOG_FILE))?;
    write_manifest(&entries, &out.join(MANIFEST_FILE))?;
    let mut warnings = vec![];
    if !skipped.is_empty() {
        warnings.push(format!("{} files skipped (see {SKIP_LOG_FILE})", skipped.len()));
    }
    for w in &warnings {
        warn!("ingest: {w}");
    }
    info!("ingest: {} images", entries.len());
    Ok(StageOutcome { stage: "ingest", processed: entries.len(), warnings })
}

/// Assigns a view to every row. Lateral and abdominal rows are excluded, rows no
/// rule recognizes are quarantined, AP and PA rows are left for preprocessing.
pub fn triage(cfg: &RunConfig) -> Result<StageOutcome, PipelineError> {
    cfg.validate()?;
    let input = cfg.input_root()?;
    let out = cfg.output_root()?;
    let rules = load_rules(cfg)?;
    let mut entries = load_manifest_for(out, "triage")?;
    let mut sources = Vec::with_capacity(entries.len());
    for e in &entries {
        match &e.source_path {
            Some(p) => sources.push(input.join(p)),
            None => {
                return Err(StageOrderError {
                    stage: "triage",
                    missing: "source_path",
                    producer: "ingest",
                    detail: format!("row {} has no source", e.image_uid),
                }
                .into())
            }
        }
    }

    let decisions: Vec<_> = worker_pool(cfg)?
        .install(|| sources.par_iter().map(|p| parse_file(p).map(|rec| classify_view(&rec, &rules))).collect());

    let mut warnings = vec![];
    for (e, d) in entries.iter_mut().zip(decisions) {
        clear_from_triage(e);
        match d {
            Ok(d) => {
                e.view = Some(d.label);
                e.status_reason = d.reason(&rules);
                e.status = match d.label {
                    ViewLabel::Lateral | ViewLabel::Abdomen => Some(Status::Excluded),
                    ViewLabel::Unknown => Some(Status::Quarantined),
                    ViewLabel::Ap | ViewLabel::Pa => None,
                };
            }
            Err(err) => {
                e.view = Some(ViewLabel::Unknown);
                e.status = Some(Status::Quarantined);
                e.status_reason = format!("source unreadable: {err}");
                warnings.push(format!("{}: {}", e.image_uid, e.status_reason));
            }
        }
    }
    write_manifest(&entries, &out.join(MANIFEST_FILE))?;
    for w in &warnings {
        warn!("triage: {w}");
    }
    Ok(StageOutcome { stage: "triage", processed: entries.len(), warnings })
}

struct Processed {
    status: Status,
    reason: Option<String>,
    output: Option<String>,
    mask: Option<String>,
    flags: Vec<String>,
}

impl Processed {
    fn quarantined(reason: String, flags: Vec<String>) -> Self {
        Self { status: Status::Quarantined, reason: Some(reason), output: None, mask: None, flags }
    }
}

fn preprocess_one(
    e: &ManifestEntry,
    input: &Path,
    out: &Path,
    cfg: &RunConfig,
    seg: &Segmenter,
) -> Result<Processed, PipelineError> {
    let src = input.join(e.source_path.as_deref().unwrap_or_default());
    let raw = match parse_file(&src).and_then(|rec| decode_pixels(&rec)) {
        Ok(r) => r,
        Err(err) => return Ok(Processed::quarantined(format!("source unreadable: {err}"), vec![])),
    };
    let img = to_8bit(&raw, cfg.window_lo, cfg.window_hi);
    let (w, h) = (cfg.frame_width, cfg.frame_height);
    let mut flags = vec![];
    let frame = if cfg.letterbox {
        flags.push("letterbox".to_string());
        resize_letterbox(&img, w, h)
    } else {
        flags.push("resize".to_string());
        resize_bilinear(&img, w, h)
    };
    let eq = hist_equalize(&frame);
    flags.push("equalize".into());
    let uid = e.image_uid.as_str();
    let cropped = match seg.segment(uid, &eq).and_then(|m| {
        let masked = apply_mask(&eq, &m)?;
        let cropped = crop_to_mask(&masked, &m, cfg.crop_margin, w, h)?;
        Ok((m, cropped))
    }) {
        Ok(v) => v,
        Err(err) => return Ok(Processed::quarantined(format!("mask {}: {err}", err.code()), flags)),
    };
    let (mask, cropped) = cropped;
    flags.push("mask".into());
    flags.push("crop".into());

    let image_rel = format!("{IMAGES_DIR}/{uid}.png");
    let mask_rel = format!("{MASKS_DIR}/{uid}.png");
    let image_path = out.join(&image_rel);
    cropped.save_png(&image_path).map_err(|err| PipelineError::output(&image_path, err))?;
    let mask_path = out.join(&mask_rel);
    mask.to_image().save_png(&mask_path).map_err(|err| PipelineError::output(&mask_path, err))?;
    Ok(Processed { status: Status::Kept, reason: None, output: Some(image_rel), mask: Some(mask_rel), flags })
}

fn fresh_dir(path: &Path) -> Result<(), PipelineError> {
    if path.exists() {
        std::fs::remove_dir_all(path).map_err(|e| PipelineError::output(path, e))?;
    }
    std::fs::create_dir_all(path).map_err(|e| PipelineError::output(path, e))
}

/// Normalizes, segments, masks and crops every frontal row into the fixed frame.
pub fn preprocess(cfg: &RunConfig) -> Result<StageOutcome, PipelineError> {
    cfg.validate()?;
    let input = cfg.input_root()?;
    let out = cfg.output_root()?;
    let mut entries = load_manifest_for(out, "preprocess")?;
    if let Some(e) = entries.iter().find(|e| e.view.is_none()) {
        return Err(StageOrderError {
            stage: "preprocess",
            missing: "view",
            producer: "triage",
            detail: format!("row {} has no view", e.image_uid),
        }
        .into());
    }
    let seg = Segmenter::open(&cfg.mask).map_err(PipelineError::Mask)?;
    fresh_dir(&out.join(IMAGES_DIR))?;
    fresh_dir(&out.join(MASKS_DIR))?;

    let results: Vec<Option<Result<Processed, PipelineError>>> = worker_pool(cfg)?.install(|| {
        entries
            .par_iter()
            .map(|e| e.view.is_some_and(ViewLabel::is_frontal).then(|| preprocess_one(e, input, out, cfg, &seg)))
            .collect()
    });

    let mut warnings = vec![];
    let mut processed = 0;
    for (e, r) in entries.iter_mut().zip(results) {
        clear_from_preprocess(e);
        let Some(r) = r else { continue };
        let p = r?;
        processed += 1;
        e.status = Some(p.status);
        if let Some(reason) = p.reason {
            warnings.push(format!("{} quarantined: {reason}", e.image_uid));
            e.status_reason = reason;
        }
        e.output_image_path = p.output;
        e.mask_path = p.mask;
        e.processing_flags = p.flags;
    }

    let meta = FrameMeta {
        frame_width: cfg.frame_width,
        frame_height: cfg.frame_height,
        orientation: if cfg.frame_height >= cfg.frame_width { "portrait" } else { "landscape" }.into(),
        resize: if cfg.letterbox { "letterbox" } else { "bilinear" }.into(),
        window_lo: cfg.window_lo,
        window_hi: cfg.window_hi,
        mask_backend: cfg.mask.name().into(),
        crop_margin: cfg.crop_margin,
        step_order: STEP_ORDER.iter().map(|s| s.to_string()).collect(),
    };
    let meta_path = out.join(META_FILE);
    std::fs::write(&meta_path, toml::to_string(&meta).expect("meta serializes"))
        .map_err(|e| PipelineError::output(&meta_path, e))?;
    write_manifest(&entries, &out.join(MANIFEST_FILE))?;
    for w in &warnings {
        warn!("preprocess: {w}");
    }
    Ok(StageOutcome { stage: "preprocess", processed, warnings })
}

/// Writes the fold file for the kept, labelled AP and PA cohorts.
pub fn split(cfg: &RunConfig) -> Result<StageOutcome, PipelineError> {
    cfg.validate()?;
    let out = cfg.output_root()?;
    let entries = load_manifest_for(out, "split")?;
    for e in &entries {
        let (missing, producer) = match (e.view, e.status) {
            (None, _) => ("view", "triage"),
            (Some(ViewLabel::Ap | ViewLabel::Pa), None) => ("status", "preprocess"),
            _ => continue,
        };
        return Err(StageOrderError {
            stage: "split",
            missing,
            producer,
            detail: format!("row {} has no {missing}", e.image_uid),
        }
        .into());
    }
    let (assignments, skipped) = split_cohorts(&entries, cfg.k, cfg.seed, cfg.grouping)?;
    let path = out.join(fold_file_name(cfg.k, cfg.seed));
    write_folds(&assignments, cfg.k, &path)?;
    let warnings = skipped.iter().map(|s| format!("cohort {} not split: {}", s.cohort, s.reason)).collect();
    Ok(StageOutcome { stage: "split", processed: assignments.len(), warnings })
}

/// Joins prediction files with the fold file and writes per-fold and summary metrics.
pub fn evaluate(cfg: &RunConfig) -> Result<StageOutcome, PipelineError> {
    cfg.validate()?;
    let out = cfg.output_root()?;
    let folds_path = out.join(fold_file_name(cfg.k, cfg.seed));
    if !folds_path.is_file() {
        return Err(StageOrderError {
            stage: "evaluate",
            missing: "fold_index",
            producer: "split",
            detail: format!("{} does not exist", folds_path.display()),
        }
        .into());
    }
    if cfg.predictions.is_empty() {
        return Err(PipelineError::Config("evaluate needs at least one predictions file".into()));
    }
    let folds: HashMap<String, (String, usize)> =
        read_folds(&folds_path)?.into_iter().map(|a| (a.image_uid, (a.cohort, a.fold_index))).collect();

    let mut warnings = vec![];
    let mut per_fold: BTreeMap<(String, usize), Vec<PredictionRecord>> = BTreeMap::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut unmatched = 0usize;
    for file in &cfg.predictions {
        for p in read_predictions(file)? {
            if !seen.insert(p.image_uid.clone()) {
                return Err(PipelineError::Config(format!("duplicate prediction for {}", p.image_uid)));
            }
            match folds.get(&p.image_uid) {
                Some(key) => per_fold.entry(key.clone()).or_default().push(p),
                None => unmatched += 1,
            }
        }
    }
    if unmatched > 0 {
        warnings.push(format!("{unmatched} predictions name images absent from the fold file"));
    }
    let missing = folds.keys().filter(|u| !seen.contains(*u)).count();
    if missing > 0 {
        warnings.push(format!("{missing} fold-file images have no prediction"));
    }
    if per_fold.is_empty() {
        return Err(PipelineError::Config("no prediction matches the fold file".into()));
    }
    let reports = evaluate_folds(&per_fold, cfg.threshold, cfg.aggregate)?;
    let rows: Vec<MetricsRow> = reports.iter().map(MetricsRow::from).collect();
    write_metrics(&rows, &out.join(METRICS_FILE))?;
    for w in &warnings {
        warn!("evaluate: {w}");
    }
    Ok(StageOutcome { stage: "evaluate", processed: seen.len(), warnings })
}

/// Writes the text and structured reports from whatever artifacts exist.
pub fn report(cfg: &RunConfig) -> Result<StageOutcome, PipelineError> {
    cfg.validate()?;
    let out = cfg.output_root()?;
    let entries = load_manifest_for(out, "report")?;
    let (text, json) = render_report(cfg, out, &entries)?;
    for (name, body) in [(REPORT_TEXT_FILE, text), (REPORT_JSON_FILE, json)] {
        let p: PathBuf = out.join(name);
        std::fs::write(&p, body).map_err(|e| PipelineError::output(&p, e))?;
    }
    Ok(StageOutcome { stage: "report", processed: entries.len(), warnings: vec![] })
}

/// Every stage in order; evaluation runs only when prediction files are configured.
pub fn run(cfg: &RunConfig) -> Result<Vec<StageOutcome>, PipelineError> {
    let mut outcomes = vec![ingest(cfg)?, triage(cfg)?, preprocess(cfg)?, split(cfg)?];
    if !cfg.predictions.is_empty() {
        outcomes.push(evaluate(cfg)?);
    }
    outcomes.push(report(cfg)?);
    Ok(outcomes)
}
