use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PipelineError, RunConfig, METRICS_FILE, REPORT_JSON_FILE};
use crate::manifest::{CovidLabel, ManifestEntry};
use crate::metrics::{table_report, Aggregate, MetricsReport, TableRow};
use crate::splits::{fold_file_name, read_folds, Grouping};
use crate::stats::dataset_stats;

pub const METRICS_COLUMNS: [&str; 10] =
    ["cohort", "fold", "n", "accuracy", "sensitivity", "specificity", "precision", "f1", "auc", "undefined"];

/// One line of the metrics file. `fold` is a fold index, `mean` or `pooled`;
/// `undefined` lists metrics that hit 0/0 and were written as 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub cohort: String,
    pub fold: String,
    pub n: u64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub auc: f64,
    pub undefined: String,
}

impl From<&MetricsReport> for MetricsRow {
    fn from(r: &MetricsReport) -> Self {
        Self {
            cohort: r.cohort.clone(),
            fold: r.fold.to_string(),
            n: r.n,
            accuracy: r.accuracy,
            sensitivity: r.sensitivity,
            specificity: r.specificity,
            precision: r.precision,
            f1: r.f1,
            auc: r.auc,
            undefined: r.undefined.names(),
        }
    }
}

impl MetricsRow {
    pub fn table_row(&self) -> TableRow {
        TableRow {
            dataset: format!("{} fold {}", self.cohort, self.fold),
            accuracy: self.accuracy,
            sensitivity: self.sensitivity,
            specificity: self.specificity,
            precision: self.precision,
            f1: self.f1,
            auc: self.auc,
        }
    }
}

pub fn write_metrics(rows: &[MetricsRow], path: &Path) -> Result<(), PipelineError> {
    let err = |e: csv::Error| PipelineError::output(path, e);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path).map_err(err)?;
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| PipelineError::output(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, PipelineError> {
    let bad = |m: String| PipelineError::Config(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(METRICS_COLUMNS) {
        return Err(bad(format!("header must be {}", METRICS_COLUMNS.join(","))));
    }
    r.deserialize().map(|row| row.map_err(|e| bad(e.to_string()))).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
struct FoldSummary {
    cohort: String,
    fold: usize,
    images: usize,
    patients: usize,
    positive: usize,
    negative: usize,
}

fn aggregate_name(a: Aggregate) -> &'static str {
    match a {
        Aggregate::Mean => "mean",
        Aggregate::Pooled => "pooled",
    }
}

fn grouping_note(g: Grouping) -> &'static str {
    match g {
        Grouping::Patient => {
            "folds are grouped by patient: every image of a patient falls in one fold, so no patient \
             appears in both training and test data of any round"
        }
        Grouping::Image => {
            "folds are per image (ungrouped): images of one patient may fall in different folds, \
             which lets patient identity leak between training and test data"
        }
    }
}

/// Text and JSON report bodies. Contains no timestamps or absolute paths.
pub(super) fn render_report(
    cfg: &RunConfig,
    out: &Path,
    entries: &[ManifestEntry],
) -> Result<(String, String), PipelineError> {
    let stats = dataset_stats(entries);
    let labels: BTreeMap<&str, CovidLabel> = entries.iter().map(|e| (e.image_uid.as_str(), e.covid_label)).collect();

    let folds_name = fold_file_name(cfg.k, cfg.seed);
    let folds_path = out.join(&folds_name);
    let mut folds: Vec<FoldSummary> = vec![];
    if folds_path.is_file() {
        let mut acc: BTreeMap<(String, usize), (FoldSummary, BTreeSet<String>)> = BTreeMap::new();
        for a in read_folds(&folds_path)? {
            let (s, patients) = acc.entry((a.cohort.clone(), a.fold_index)).or_insert_with(|| {
                (FoldSummary { cohort: a.cohort.clone(), fold: a.fold_index, ..Default::default() }, BTreeSet::new())
            });
            s.images += 1;
            patients.insert(a.patient_id);
            match labels.get(a.image_uid.as_str()) {
                Some(CovidLabel::Positive) => s.positive += 1,
                Some(CovidLabel::Negative) => s.negative += 1,
                _ => {}
            }
        }
        folds = acc
            .into_values()
            .map(|(mut s, p)| {
                s.patients = p.len();
                s
            })
            .collect();
    }

    let metrics_path = out.join(METRICS_FILE);
    let metrics = if metrics_path.is_file() { read_metrics(&metrics_path)? } else { vec![] };
    let table: Vec<TableRow> = metrics.iter().map(MetricsRow::table_row).collect();

    let mut text = String::new();
    let _ = writeln!(text, "curation report");
    let _ = writeln!(text, "splits: {}", grouping_note(cfg.grouping));
    let _ = writeln!(text);
    let _ = writeln!(text, "[dataset]");
    let _ = write!(text, "{stats}");
    let _ = writeln!(text);
    let _ = writeln!(text, "[folds] {folds_name}");
    if folds.is_empty() {
        let _ = writeln!(text, "no fold file");
    }
    for f in &folds {
        let _ = writeln!(
            text,
            "{} fold {}: {} images, {} patients, {} positive, {} negative",
            f.cohort, f.fold, f.images, f.patients, f.positive, f.negative
        );
    }
    let _ = writeln!(text);
    let _ = writeln!(text, "[metrics] threshold {} aggregate {}", cfg.threshold, aggregate_name(cfg.aggregate));
    if table.is_empty() {
        let _ = writeln!(text, "no metrics file");
    } else {
        text.push_str(&table_report(&table));
        for m in metrics.iter().filter(|m| !m.undefined.is_empty()) {
            let _ = writeln!(text, "{} fold {}: undefined {} reported as 0", m.cohort, m.fold, m.undefined);
        }
    }

    let json = serde_json::json!({
        "splits": grouping_note(cfg.grouping),
        "grouping": cfg.grouping,
        "dataset": stats,
        "fold_file": folds_name,
        "folds": folds,
        "threshold": cfg.threshold,
        "aggregate": cfg.aggregate,
        "metrics": metrics,
        "table": table,
    });
    let json = serde_json::to_string_pretty(&json).map_err(|e| PipelineError::output(&out.join(REPORT_JSON_FILE), e))? + "\n";
    Ok((text, json))
}
