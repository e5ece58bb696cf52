//! Acceptance suite. Prints one PASS/FAIL line per criterion, including its runtime
//! against the stated limit, and exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::time::{Duration, Instant};

use common::{fixtures_dir, perfect_predictions, snapshot};
use cxr_curate::fixtures::{CORPUS_DIR, GROUND_TRUTH_FILE, LABELS_FILE};
use cxr_curate::identity::{ImageUid, SessionId};
use cxr_curate::image_ops::hist_equalize;
use cxr_curate::lung::{apply_mask, classical_segment, crop_to_mask, ClassicalParams, DEFAULT_MARGIN};
use cxr_curate::manifest::{read_manifest, CovidLabel, ManifestEntry, Status};
use cxr_curate::metrics::{roc_auc, PredictionRecord, TableRow};
use cxr_curate::phantom::{stamp_text, text_extent, LungPhantom, PhantomSpec};
use cxr_curate::pipeline::{self, RunConfig, MANIFEST_FILE, SKIP_LOG_FILE};
use cxr_curate::raster::GrayImage;
use cxr_curate::splits::{fold_file_name, split_cohorts, write_folds_to, FoldAssignment, Grouping};
use cxr_curate::stats::dataset_stats;
use cxr_curate::triage::ViewLabel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Rows as printed in the results table: accuracy, sensitivity, specificity,
/// precision, F1, AUC.
const RESULTS_TABLE: [(&str, [f64; 6]); 6] = [
    ("raw data", [0.65, 0.56, 0.74, 0.68, 0.61, 0.72]),
    ("AXRs and Lat-CXRs were removed", [0.66, 0.60, 0.73, 0.69, 0.64, 0.75]),
    ("only AP CXRs", [0.73, 0.74, 0.73, 0.73, 0.73, 0.81]),
    ("only PA CXRs", [0.74, 0.74, 0.74, 0.74, 0.74, 0.81]),
    ("processed AP CXRs", [0.78, 0.78, 0.79, 0.79, 0.78, 0.88]),
    ("processed PA CXRs", [0.77, 0.77, 0.77, 0.77, 0.77, 0.82]),
];

fn table_f1_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, v) in RESULTS_TABLE {
        let (sens, prec, f1) = (v[1], v[3], v[4]);
        let expected = 2.0 * prec * sens / (prec + sens);
        let row = TableRow {
            dataset: name.into(),
            accuracy: v[0],
            sensitivity: sens,
            specificity: v[2],
            precision: prec,
            f1,
            auc: v[5],
        };
        ensure((row.recomputed_f1() - expected).abs() < 1e-12, || format!("{name}: library F1 {} vs {expected}", row.recomputed_f1()))?;
        ensure((expected - f1).abs() <= 0.01, || format!("{name}: recomputed {expected:.4} vs printed {f1}"))?;
        ensure(row.f1_consistent(0.01), || format!("{name}: f1_consistent rejected"))?;
        worst = worst.max((expected - f1).abs());
    }
    Ok(format!("6 rows, largest gap {worst:.4}"))
}

fn pairwise_auc(preds: &[PredictionRecord]) -> f64 {
    let pos: Vec<f64> = preds.iter().filter(|p| p.positive).map(|p| p.score).collect();
    let neg: Vec<f64> = preds.iter().filter(|p| !p.positive).map(|p| p.score).collect();
    let mut wins = 0.0;
    for &a in &pos {
        for &b in &neg {
            wins += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA0C);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = rng.random_range(2..=200);
        // Coarse score grids force ties in a share of the cases.
        let levels = [3u32, 10, 100, 1_000_000][case % 4];
        let mut preds: Vec<PredictionRecord> = (0..n)
            .map(|i| PredictionRecord::new(format!("u{i}"), f64::from(rng.random_range(0..=levels)) / f64::from(levels), rng.random_bool(0.4)))
            .collect();
        preds[0].positive = true;
        preds[1].positive = false;
        let got = roc_auc(&preds).map_err(|e| format!("case {case}: {e}"))?;
        let want = pairwise_auc(&preds);
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-12, || format!("case {case}: rank {got} vs pairwise {want}"))?;
    }
    Ok(format!("1000 sets, max |diff| {worst:e}"))
}

fn equalization() -> Outcome {
    let uniform = GrayImage::from_fn(256, 256, |x, y| ((x + y) % 256) as u8);
    ensure(hist_equalize(&uniform) == uniform, || "uniform image changed".into())?;

    let small = GrayImage::new(4, 1, vec![10, 10, 200, 200]).unwrap();
    ensure(hist_equalize(&small).data() == [0, 0, 255, 255], || format!("1x4 gave {:?}", hist_equalize(&small).data()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xE9);
    for case in 0..1000 {
        let (w, h) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let (lo, hi) = (rng.random_range(0..=255u8), rng.random_range(0..=255u8));
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let mut img = GrayImage::from_fn(w, h, |_, _| rng.random_range(lo..=hi));
        if img.data().iter().all(|&v| v == img.data()[0]) {
            if w * h < 2 {
                continue;
            }
            let v = img.data()[0];
            img.data_mut()[0] = v.wrapping_add(1);
        }
        let out = hist_equalize(&img);
        let (min, max) = img.min_max();
        let mut lut: BTreeMap<u8, u8> = BTreeMap::new();
        for (&a, &b) in img.data().iter().zip(out.data()) {
            ensure(*lut.entry(a).or_insert(b) == b, || format!("case {case}: level {a} maps to two values"))?;
        }
        ensure(lut.values().zip(lut.values().skip(1)).all(|(a, b)| a <= b), || format!("case {case}: order not preserved"))?;
        ensure(lut[&min] == 0 && lut[&max] == 255, || format!("case {case}: extremes map to {} and {}", lut[&min], lut[&max]))?;
    }
    Ok("uniform identity, 1x4 case, 1000 random images".into())
}

fn read_ground_truth() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(fixtures_dir().join(GROUND_TRUTH_FILE)).unwrap();
    text.lines().skip(1).map(|l| {
        let f: Vec<&str> = l.split(',').collect();
        (f[0].to_string(), f[2].to_string())
    }).collect()
}

fn triage_conformance() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = RunConfig {
        input_root: Some(fixtures_dir().join(CORPUS_DIR)),
        output_root: Some(tmp.path().to_path_buf()),
        ..RunConfig::default()
    };
    pipeline::ingest(&cfg).map_err(|e| e.to_string())?;
    pipeline::triage(&cfg).map_err(|e| e.to_string())?;
    let manifest = read_manifest(&tmp.path().join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
    let views: HashMap<String, &ManifestEntry> =
        manifest.iter().map(|e| (e.source_path.clone().unwrap_or_default(), e)).collect();
    let skip_log = std::fs::read_to_string(tmp.path().join(SKIP_LOG_FILE)).map_err(|e| e.to_string())?;
    let skips: HashMap<String, String> = skip_log
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();

    let truth = read_ground_truth();
    ensure(truth.len() == 40, || format!("sidecar has {} rows", truth.len()))?;
    let mut agree = 0;
    let (mut want_excluded, mut want_quarantined) = (0, 0);
    for (file, expected) in &truth {
        let got = match (views.get(file), skips.get(file)) {
            (Some(e), None) => e.view.map(|v| v.as_str().to_string()).unwrap_or_default(),
            (None, Some(code)) => code.clone(),
            _ => return Err(format!("{file}: in neither or both of manifest and skip log")),
        };
        ensure(&got == expected, || format!("{file}: got {got}, expected {expected}"))?;
        agree += 1;
        match expected.as_str() {
            "LATERAL" | "ABDOMEN" => want_excluded += 1,
            "UNKNOWN" => want_quarantined += 1,
            _ => {}
        }
    }
    ensure(manifest.len() + skips.len() == truth.len(), || "extra rows".into())?;
    let stats = dataset_stats(&manifest);
    ensure(stats.excluded == want_excluded && stats.quarantined == want_quarantined, || {
        format!("stats excluded {} quarantined {}, sidecar {want_excluded} and {want_quarantined}", stats.excluded, stats.quarantined)
    })?;
    ensure((want_excluded, want_quarantined) == (8, 4), || "sidecar composition changed".into())?;
    Ok(format!("{agree}/40 agree; excluded {}, quarantined {}", stats.excluded, stats.quarantined))
}

/// Fifty patients per frontal cohort with 1 to 5 images each and a random prevalence.
fn random_instance(rng: &mut ChaCha8Rng) -> Vec<ManifestEntry> {
    let mut out = vec![];
    for (c, view) in [ViewLabel::Ap, ViewLabel::Pa].into_iter().enumerate() {
        let prevalence = rng.random_range(0.3..=0.7);
        for p in 0..50 {
            let patient = format!("C{c}P{p:02}");
            let label = if rng.random_bool(prevalence) { CovidLabel::Positive } else { CovidLabel::Negative };
            for i in 0..rng.random_range(1..=5) {
                let uid = format!("{patient}_20200101_0000{i:02}");
                out.push(ManifestEntry {
                    image_uid: ImageUid::from_raw(uid.clone()),
                    session_id: SessionId::from_raw(uid),
                    patient_id: patient.clone(),
                    view: Some(view),
                    status: Some(Status::Kept),
                    status_reason: String::new(),
                    covid_label: label,
                    source_path: None,
                    output_image_path: Some("x.png".into()),
                    mask_path: None,
                    processing_flags: vec![],
                });
            }
        }
    }
    out
}

fn fold_bytes(a: &[FoldAssignment], k: usize) -> Vec<u8> {
    let mut buf = vec![];
    write_folds_to(a, k, &mut buf).unwrap();
    buf
}

fn split_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5917);
    let mut worst: f64 = 0.0;
    for case in 0..500 {
        let entries = random_instance(&mut rng);
        let k = 5;
        let seed = rng.random::<u64>();
        let (assign, skipped) = split_cohorts(&entries, k, seed, Grouping::Patient).map_err(|e| e.to_string())?;
        ensure(skipped.is_empty(), || format!("case {case}: skipped {skipped:?}"))?;
        let again = split_cohorts(&entries, k, seed, Grouping::Patient).map_err(|e| e.to_string())?.0;
        ensure(fold_bytes(&assign, k) == fold_bytes(&again, k), || format!("case {case}: rerun differs"))?;

        let eligible: BTreeSet<&str> = entries.iter().map(|e| e.image_uid.as_str()).collect();
        let assigned: Vec<&str> = assign.iter().map(|a| a.image_uid.as_str()).collect();
        ensure(assigned.len() == eligible.len() && assigned.iter().copied().collect::<BTreeSet<_>>() == eligible, || {
            format!("case {case}: not a partition")
        })?;
        let label: HashMap<&str, bool> =
            entries.iter().map(|e| (e.image_uid.as_str(), e.covid_label == CovidLabel::Positive)).collect();
        for cohort in ["AP", "PA"] {
            let rows: Vec<&FoldAssignment> = assign.iter().filter(|a| a.cohort == cohort).collect();
            let mut patient_fold: HashMap<&str, usize> = HashMap::new();
            for a in &rows {
                let f = *patient_fold.entry(a.patient_id.as_str()).or_insert(a.fold_index);
                ensure(f == a.fold_index, || format!("case {case}: patient {} in two folds", a.patient_id))?;
            }
            let global = rows.iter().filter(|a| label[a.image_uid.as_str()]).count() as f64 / rows.len() as f64;
            for f in 0..k {
                let in_fold: Vec<_> = rows.iter().filter(|a| a.fold_index == f).collect();
                ensure(!in_fold.is_empty(), || format!("case {case}: {cohort} fold {f} empty"))?;
                let frac = in_fold.iter().filter(|a| label[a.image_uid.as_str()]).count() as f64 / in_fold.len() as f64;
                worst = worst.max((frac - global).abs());
                ensure((frac - global).abs() <= 0.15, || {
                    format!("case {case}: {cohort} fold {f} positive fraction {frac:.3} vs global {global:.3}")
                })?;
            }
        }
    }
    Ok(format!("500 instances, largest fraction gap {worst:.3}"))
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut snaps = vec![];
    for name in ["first", "second"] {
        let out = tmp.path().join(name);
        let mut cfg = RunConfig {
            input_root: Some(fixtures_dir().join(CORPUS_DIR)),
            output_root: Some(out.clone()),
            labels: Some(fixtures_dir().join(LABELS_FILE)),
            k: 3,
            ..RunConfig::default()
        };
        pipeline::run(&cfg).map_err(|e| e.to_string())?;
        let preds = tmp.path().join(format!("{name}_predictions.csv"));
        perfect_predictions(&out.join(fold_file_name(cfg.k, cfg.seed)), &out.join(MANIFEST_FILE), &preds);
        cfg.predictions = vec![preds];
        pipeline::evaluate(&cfg).map_err(|e| e.to_string())?;
        pipeline::report(&cfg).map_err(|e| e.to_string())?;
        snaps.push(snapshot(&out));
    }
    let (a, b) = (&snaps[0], &snaps[1]);
    ensure(a.keys().eq(b.keys()), || "file sets differ".into())?;
    for (path, bytes) in a {
        ensure(&b[path] == bytes, || format!("{path} differs"))?;
    }
    let pngs = a.keys().filter(|k| k.ends_with(".png")).count();
    for required in ["manifest.csv", "folds_k3_seed0.csv", "metrics.csv", "report.txt", "report.json"] {
        ensure(a.contains_key(required), || format!("{required} missing"))?;
    }
    ensure(pngs > 0, || "no images written".into())?;
    Ok(format!("{} files identical ({pngs} PNGs)", a.len()))
}

fn confound_removal() -> Outcome {
    let params = ClassicalParams::default();
    let spec = PhantomSpec::default();
    let (w, h) = (spec.width, spec.height);
    let labels = ["L", "R", "PORTABLE", "AP SUPINE"];
    for seed in 0..100u64 {
        let ph = LungPhantom::generate(&spec, seed);
        let text = labels[seed as usize % labels.len()];
        let scale = 2 + seed as usize % 3;
        let ext = text_extent(text, 0, 0, scale);
        let (x, y) = match seed % 4 {
            0 => (6, 6),
            1 => (w - ext.width() - 6, 6),
            2 => (6, h - ext.height() - 6),
            _ => (w - ext.width() - 6, h - ext.height() - 6),
        };
        let mut stamped = ph.image.clone();
        let bbox = stamp_text(&mut stamped, text, x, y, scale, 255);
        let touches_lung = (bbox.y0..=bbox.y1).any(|yy| (bbox.x0..=bbox.x1).any(|xx| ph.truth[yy * w + xx]));
        ensure(!touches_lung, || format!("seed {seed}: text overlaps the lungs"))?;
        ensure(stamped != ph.image, || format!("seed {seed}: stamp changed nothing"))?;

        let process = |img: &GrayImage| -> Result<GrayImage, String> {
            let mask = classical_segment(img, &params).map_err(|e| e.to_string())?;
            let masked = apply_mask(img, &mask).map_err(|e| e.to_string())?;
            crop_to_mask(&masked, &mask, DEFAULT_MARGIN, w, h).map_err(|e| e.to_string())
        };
        let clean = process(&ph.image)?;
        let dirty = process(&stamped)?;
        ensure(clean == dirty, || format!("seed {seed}: outputs differ"))?;
    }
    Ok("100 stamped phantoms identical after mask and crop".into())
}

fn phantom_bounds() -> Outcome {
    let params = ClassicalParams::default();
    let (mut worst_cover, mut worst_bg): (f64, f64) = (1.0, 0.0);
    for seed in 0..20u64 {
        let spec = PhantomSpec { speck: true, ..PhantomSpec::default() };
        let ph = LungPhantom::generate(&spec, seed);
        let mask = classical_segment(&ph.image, &params).map_err(|e| e.to_string())?;
        let m = mask.data();
        let lung = ph.truth.iter().filter(|&&t| t).count();
        let bg = ph.truth.len() - lung;
        let covered = m.iter().zip(&ph.truth).filter(|(&a, &t)| a && t).count();
        let spill = m.iter().zip(&ph.truth).filter(|(&a, &t)| a && !t).count();
        let (cover, bg_frac) = (covered as f64 / lung as f64, spill as f64 / bg as f64);
        worst_cover = worst_cover.min(cover);
        worst_bg = worst_bg.max(bg_frac);
        let frac = lung as f64 / 2.0 / ph.truth.len() as f64;
        ensure((0.09..=0.11).contains(&frac), || format!("seed {seed}: ellipse covers {frac:.3} of the frame"))?;
        ensure(cover >= 0.90, || format!("seed {seed}: lung coverage {cover:.3}"))?;
        ensure(bg_frac <= 0.05, || format!("seed {seed}: background {bg_frac:.3}"))?;
        ensure(!ph.speck.is_empty() && ph.speck.iter().all(|&i| !m[i]), || format!("seed {seed}: speck survived"))?;
    }
    Ok(format!("20 phantoms, min coverage {worst_cover:.3}, max background {worst_bg:.4}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("results-table F1 consistency", table_f1_consistency, Duration::from_secs(1)),
        ("AUC oracle equivalence", auc_oracle, Duration::from_secs(10)),
        ("histogram-equalization exactness", equalization, Duration::from_secs(30)),
        ("triage conformance", triage_conformance, Duration::from_secs(5)),
        ("split correctness", split_correctness, Duration::from_secs(30)),
        ("end-to-end determinism", end_to_end_determinism, Duration::from_secs(60)),
        ("confound-removal mechanism", confound_removal, Duration::from_secs(30)),
        ("classical segmenter phantom bounds", phantom_bounds, Duration::from_secs(30)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let (status, detail) = match result {
            Ok(d) if took <= limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; exceeded runtime limit")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {name} [{:.2}s / limit {}s]: {detail}", took.as_secs_f64(), limit.as_secs());
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
