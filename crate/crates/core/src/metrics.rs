//! Binary classification metrics, fold aggregation and the results table.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const PREDICTION_COLUMNS: [&str; 3] = ["image_uid", "score", "true_label"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty prediction set")]
    EmptyPredictionSet,
    #[error("AUC needs both classes; got {positives} positives and {negatives} negatives")]
    SingleClassAuc { positives: usize, negatives: usize },
    #[error("cannot aggregate reports from different cohorts ({0} vs {1})")]
    AggregationMismatch(String, String),
    #[error("no fold reports to aggregate")]
    NoReports,
}

#[derive(Debug, Error)]
pub enum PredictionFileError {
    #[error("prediction file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("prediction file I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub image_uid: String,
    pub score: f64,
    pub positive: bool,
}

impl PredictionRecord {
    pub fn new(image_uid: impl Into<String>, score: f64, positive: bool) -> Self {
        Self { image_uid: image_uid.into(), score, positive }
    }
}

/// Parses `image_uid,score,true_label` rows; scores must be finite and within [0, 1],
/// labels `positive` or `negative`.
pub fn read_predictions_from<R: Read>(input: R) -> Result<Vec<PredictionRecord>, PredictionFileError> {
    let parse = |line: u64, message: String| PredictionFileError::Parse { line, message };
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| parse(1, "missing header".into()))?
        .map_err(|e| parse(1, e.to_string()))?;
    if header.iter().ne(PREDICTION_COLUMNS) {
        return Err(parse(1, format!("header must be {}", PREDICTION_COLUMNS.join(","))));
    }
    let mut out = vec![];
    for rec in records {
        let rec = rec.map_err(|e| parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse(line, format!("expected 3 fields, found {}", rec.len())));
        }
        if rec[0].is_empty() {
            return Err(parse(line, "empty image_uid".into()));
        }
        let score: f64 = rec[1].trim().parse().map_err(|_| parse(line, format!("score {:?} is not a number", &rec[1])))?;
        if !score.is_finite() || !(0.0..=1.0).contains(&score) {
            return Err(parse(line, format!("score {score} outside [0, 1]")));
        }
        let positive = match rec[2].trim() {
            "positive" => true,
            "negative" => false,
            other => return Err(parse(line, format!("true_label {other:?} must be positive or negative"))),
        };
        out.push(PredictionRecord { image_uid: rec[0].to_string(), score, positive });
    }
    Ok(out)
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>, PredictionFileError> {
    read_predictions_from(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// `score >= t` predicts positive.
pub fn confusion_at_threshold(preds: &[PredictionRecord], t: f64) -> Result<ConfusionCounts, MetricsError> {
    if preds.is_empty() {
        return Err(MetricsError::EmptyPredictionSet);
    }
    let mut c = ConfusionCounts::default();
    for p in preds {
        match (p.score >= t, p.positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Which metrics hit a 0/0 and were reported as 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndefinedFlags {
    pub accuracy: bool,
    pub sensitivity: bool,
    pub specificity: bool,
    pub precision: bool,
    pub f1: bool,
    pub auc: bool,
}

impl UndefinedFlags {
    fn or(self, o: Self) -> Self {
        Self {
            accuracy: self.accuracy || o.accuracy,
            sensitivity: self.sensitivity || o.sensitivity,
            specificity: self.specificity || o.specificity,
            precision: self.precision || o.precision,
            f1: self.f1 || o.f1,
            auc: self.auc || o.auc,
        }
    }

    pub fn any(&self) -> bool {
        self.accuracy || self.sensitivity || self.specificity || self.precision || self.f1 || self.auc
    }

    /// Comma-separated names of the undefined metrics.
    pub fn names(&self) -> String {
        [
            (self.accuracy, "accuracy"),
            (self.sensitivity, "sensitivity"),
            (self.specificity, "specificity"),
            (self.precision, "precision"),
            (self.f1, "f1"),
            (self.auc, "auc"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect::<Vec<_>>()
        .join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub undefined: UndefinedFlags,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

pub fn basic_metrics(c: &ConfusionCounts) -> BasicMetrics {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let (accuracy, ua) = ratio(tp + tn, tp + fp + tn + fn_);
    let (sensitivity, us) = ratio(tp, tp + fn_);
    let (specificity, usp) = ratio(tn, tn + fp);
    let (precision, up) = ratio(tp, tp + fp);
    let (f1, uf) = ratio(2.0 * precision * sensitivity, precision + sensitivity);
    BasicMetrics {
        accuracy,
        sensitivity,
        specificity,
        precision,
        f1,
        undefined: UndefinedFlags { accuracy: ua, sensitivity: us, specificity: usp, precision: up, f1: uf, auc: false },
    }
}

/// Area under the ROC curve as the normalized Mann-Whitney U statistic, with tied
/// scores assigned their average rank (equivalently, each tied pair counts one half).
pub fn roc_auc(preds: &[PredictionRecord]) -> Result<f64, MetricsError> {
    let positives = preds.iter().filter(|p| p.positive).count();
    let negatives = preds.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClassAuc { positives, negatives });
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].score.total_cmp(&preds[b].score));
    // Doubled ranks keep tie averages integral: a tie block spanning 1-based ranks
    // i+1..=j has average rank (i+1+j)/2.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && preds[order[j]].score == preds[order[i]].score {
            j += 1;
        }
        let in_block = order[i..j].iter().filter(|&&k| preds[k].positive).count() as u128;
        doubled_rank_sum += in_block * (i as u128 + 1 + j as u128);
        i = j;
    }
    let (p, n) = (positives as u128, negatives as u128);
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2 * p * n) as f64)
}

/// Fold identifier in a report row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldTag {
    Index(usize),
    Mean,
    Pooled,
}

impl fmt::Display for FoldTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldTag::Index(i) => write!(f, "{i}"),
            FoldTag::Mean => f.write_str("mean"),
            FoldTag::Pooled => f.write_str("pooled"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cohort: String,
    pub fold: FoldTag,
    pub n: u64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub auc: f64,
    pub undefined: UndefinedFlags,
}

/// Thresholded metrics plus AUC for one set of predictions. A single-class set
/// reports AUC 0 with the undefined flag set.
pub fn evaluate(cohort: &str, fold: FoldTag, preds: &[PredictionRecord], threshold: f64) -> Result<MetricsReport, MetricsError> {
    let c = confusion_at_threshold(preds, threshold)?;
    let b = basic_metrics(&c);
    let (auc, auc_undefined) = match roc_auc(preds) {
        Ok(a) => (a, false),
        Err(MetricsError::SingleClassAuc { .. }) => (0.0, true),
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        cohort: cohort.to_string(),
        fold,
        n: c.total(),
        accuracy: b.accuracy,
        sensitivity: b.sensitivity,
        specificity: b.specificity,
        precision: b.precision,
        f1: b.f1,
        auc,
        undefined: UndefinedFlags { auc: auc_undefined, ..b.undefined },
    })
}

/// Unweighted mean of each metric across fold reports of one cohort.
pub fn fold_aggregate(reports: &[MetricsReport]) -> Result<MetricsReport, MetricsError> {
    let first = reports.first().ok_or(MetricsError::NoReports)?;
    if let Some(r) = reports.iter().find(|r| r.cohort != first.cohort) {
        return Err(MetricsError::AggregationMismatch(first.cohort.clone(), r.cohort.clone()));
    }
    let k = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    Ok(MetricsReport {
        cohort: first.cohort.clone(),
        fold: FoldTag::Mean,
        n: reports.iter().map(|r| r.n).sum(),
        accuracy: mean(|r| r.accuracy),
        sensitivity: mean(|r| r.sensitivity),
        specificity: mean(|r| r.specificity),
        precision: mean(|r| r.precision),
        f1: mean(|r| r.f1),
        auc: mean(|r| r.auc),
        undefined: reports.iter().fold(UndefinedFlags::default(), |acc, r| acc.or(r.undefined)),
    })
}

/// How fold results combine into the summary row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Mean,
    /// Metrics recomputed over all folds' predictions together.
    Pooled,
}

impl std::str::FromStr for Aggregate {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mean" => Ok(Aggregate::Mean),
            "pooled" => Ok(Aggregate::Pooled),
            other => Err(format!("aggregate must be mean or pooled, got {other:?}")),
        }
    }
}

/// Per-fold reports for every cohort, followed by each cohort's summary row.
pub fn evaluate_folds(
    per_fold: &BTreeMap<(String, usize), Vec<PredictionRecord>>,
    threshold: f64,
    aggregate: Aggregate,
) -> Result<Vec<MetricsReport>, MetricsError> {
    let mut rows = vec![];
    let mut by_cohort: BTreeMap<&str, Vec<MetricsReport>> = BTreeMap::new();
    for ((cohort, fold), preds) in per_fold {
        let r = evaluate(cohort, FoldTag::Index(*fold), preds, threshold)?;
        by_cohort.entry(cohort.as_str()).or_default().push(r.clone());
        rows.push(r);
    }
    for (cohort, reports) in by_cohort {
        let summary = match aggregate {
            Aggregate::Mean => fold_aggregate(&reports)?,
            Aggregate::Pooled => {
                let pooled: Vec<PredictionRecord> = per_fold
                    .iter()
                    .filter(|((c, _), _)| c == cohort)
                    .flat_map(|(_, p)| p.iter().cloned())
                    .collect();
                evaluate(cohort, FoldTag::Pooled, &pooled, threshold)?
            }
        };
        rows.push(summary);
    }
    Ok(rows)
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub auc: f64,
}

impl TableRow {
    pub fn from_report(r: &MetricsReport) -> Self {
        Self {
            dataset: format!("{} fold {}", r.cohort, r.fold),
            accuracy: r.accuracy,
            sensitivity: r.sensitivity,
            specificity: r.specificity,
            precision: r.precision,
            f1: r.f1,
            auc: r.auc,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        [self.accuracy, self.sensitivity, self.specificity, self.precision, self.f1, self.auc]
    }

    /// Harmonic mean of this row's precision and sensitivity columns.
    pub fn recomputed_f1(&self) -> f64 {
        ratio(2.0 * self.precision * self.sensitivity, self.precision + self.sensitivity).0
    }

    /// Whether the F1 column agrees with its own precision and sensitivity.
    pub fn f1_consistent(&self, tolerance: f64) -> bool {
        (self.recomputed_f1() - self.f1).abs() <= tolerance
    }
}

pub const TABLE_HEADERS: [&str; 7] = ["Dataset", "Accuracy", "Sensitivity", "Specificity", "Precision", "F1-score", "AUC"];

/// Aligned text table with values at two decimals.
pub fn table_report(rows: &[TableRow]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![r.dataset.clone()];
            v.extend(r.values().iter().map(|x| format!("{x:.2}")));
            v
        })
        .collect();
    let widths: Vec<usize> = (0..TABLE_HEADERS.len())
        .map(|c| cells.iter().map(|row| row[c].chars().count()).chain([TABLE_HEADERS[c].len()]).max().unwrap_or(0))
        .collect();
    let line = |fields: Vec<&str>| {
        let mut s = String::new();
        for (c, f) in fields.iter().enumerate() {
            if c == 0 {
                s.push_str(&format!("{f:<w$}", w = widths[0]));
            } else {
                s.push_str(&format!("  {f:>w$}", w = widths[c]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(TABLE_HEADERS.to_vec());
    for row in &cells {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// Structured twin of [`table_report`].
pub fn table_json(rows: &[TableRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(score: f64, positive: bool) -> PredictionRecord {
        PredictionRecord::new("x", score, positive)
    }

    /// Pairwise count over all (positive, negative) pairs.
    fn pairwise_auc(preds: &[PredictionRecord]) -> f64 {
        let (mut wins, mut ties, mut pairs) = (0u64, 0u64, 0u64);
        for a in preds.iter().filter(|x| x.positive) {
            for b in preds.iter().filter(|x| !x.positive) {
                pairs += 1;
                if a.score > b.score {
                    wins += 1;
                } else if a.score == b.score {
                    ties += 1;
                }
            }
        }
        (wins as f64 + 0.5 * ties as f64) / pairs as f64
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion_at_threshold(&[p(0.5, true)], 0.5).unwrap(), ConfusionCounts { tp: 1, fp: 0, tn: 0, fn_: 0 });
        let neg: Vec<_> = (0..7).map(|_| p(0.0, false)).collect();
        assert_eq!(confusion_at_threshold(&neg, 0.5).unwrap().tn, 7);
        let mixed = [p(0.9, true), p(0.2, true), p(0.8, false), p(0.1, false)];
        assert_eq!(confusion_at_threshold(&mixed, 0.5).unwrap(), ConfusionCounts { tp: 1, fp: 1, tn: 1, fn_: 1 });
        assert_eq!(confusion_at_threshold(&[], 0.5), Err(MetricsError::EmptyPredictionSet));
    }

    #[test]
    fn basic_metric_examples() {
        let m = basic_metrics(&ConfusionCounts { tp: 3, fp: 1, tn: 4, fn_: 2 });
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.sensitivity - 0.6).abs() < 1e-12);
        assert!((m.specificity - 0.8).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        // 2 * 0.75 * 0.6 / 1.35
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!(!m.undefined.any());

        let z = basic_metrics(&ConfusionCounts { tp: 0, fp: 0, tn: 4, fn_: 2 });
        assert_eq!(z.precision, 0.0);
        assert!(z.undefined.precision && z.undefined.f1);
        assert!(!z.undefined.sensitivity);

        let perfect = basic_metrics(&ConfusionCounts { tp: 5, fp: 0, tn: 5, fn_: 0 });
        assert_eq!([perfect.accuracy, perfect.sensitivity, perfect.specificity, perfect.precision, perfect.f1], [1.0; 5]);
    }

    #[test]
    fn auc_examples() {
        let sep = [p(0.9, true), p(0.8, true), p(0.3, false), p(0.1, false)];
        assert_eq!(roc_auc(&sep).unwrap(), 1.0);
        let ties = [p(0.4, true), p(0.4, false), p(0.4, true), p(0.4, false)];
        assert_eq!(roc_auc(&ties).unwrap(), 0.5);
        assert_eq!(roc_auc(&[p(0.3, true)]), Err(MetricsError::SingleClassAuc { positives: 1, negatives: 0 }));
    }

    #[test]
    fn aggregate_examples() {
        let mk = |cohort: &str, acc: f64| MetricsReport {
            cohort: cohort.into(),
            fold: FoldTag::Index(0),
            n: 10,
            accuracy: acc,
            sensitivity: 0.5,
            specificity: 0.5,
            precision: 0.5,
            f1: 0.5,
            auc: 0.5,
            undefined: UndefinedFlags::default(),
        };
        let m = fold_aggregate(&[mk("AP", 0.7), mk("AP", 0.8)]).unwrap();
        assert!((m.accuracy - 0.75).abs() < 1e-12);
        assert_eq!(m.fold, FoldTag::Mean);
        let single = fold_aggregate(&[mk("AP", 0.7)]).unwrap();
        assert_eq!(single.accuracy, 0.7);
        assert_eq!(
            fold_aggregate(&[mk("AP", 0.7), mk("PA", 0.8)]),
            Err(MetricsError::AggregationMismatch("AP".into(), "PA".into()))
        );
        assert_eq!(fold_aggregate(&[]), Err(MetricsError::NoReports));
    }

    #[test]
    fn pooled_differs_from_mean_on_uneven_folds() {
        let mut per_fold = BTreeMap::new();
        per_fold.insert(("AP".to_string(), 0), vec![p(0.9, true), p(0.1, false)]);
        per_fold.insert(("AP".to_string(), 1), vec![p(0.9, true), p(0.8, false), p(0.7, false), p(0.6, false)]);
        let mean = evaluate_folds(&per_fold, 0.5, Aggregate::Mean).unwrap();
        let pooled = evaluate_folds(&per_fold, 0.5, Aggregate::Pooled).unwrap();
        assert_eq!(mean.len(), 3);
        assert_eq!(mean[2].fold, FoldTag::Mean);
        assert_eq!(pooled[2].fold, FoldTag::Pooled);
        // fold accuracies 1.0 and 0.25 → mean 0.625; pooled 3/6
        assert!((mean[2].accuracy - 0.625).abs() < 1e-12);
        assert!((pooled[2].accuracy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn table_formatting() {
        assert_eq!(table_report(&[]), "Dataset  Accuracy  Sensitivity  Specificity  Precision  F1-score  AUC\n");
        let row = TableRow {
            dataset: "raw data".into(),
            accuracy: 0.65,
            sensitivity: 0.56,
            specificity: 0.74,
            precision: 0.68,
            f1: 0.61,
            auc: 0.72,
        };
        let text = table_report(&[row.clone()]);
        let body = text.lines().nth(1).unwrap();
        assert_eq!(body.split_whitespace().skip(2).collect::<Vec<_>>().join(" "), "0.65 0.56 0.74 0.68 0.61 0.72");
        let json: Vec<TableRow> = serde_json::from_str(&table_json(&[row.clone()])).unwrap();
        assert_eq!(json, vec![row]);
    }

    #[test]
    fn prediction_file_validation() {
        let ok = "image_uid,score,true_label\na,0.25,positive\nb,1,negative\n";
        let preds = read_predictions_from(ok.as_bytes()).unwrap();
        assert_eq!(preds, vec![PredictionRecord::new("a", 0.25, true), PredictionRecord::new("b", 1.0, false)]);
        for (bad, line) in [
            ("image_uid,prob,true_label\n", 1),
            ("image_uid,score,true_label\na,1.5,positive\n", 2),
            ("image_uid,score,true_label\na,0.5,positive\nb,NaN,negative\n", 3),
            ("image_uid,score,true_label\na,0.5,maybe\n", 2),
        ] {
            match read_predictions_from(bad.as_bytes()) {
                Err(PredictionFileError::Parse { line: l, .. }) => assert_eq!(l, line, "{bad}"),
                other => panic!("{bad}: {other:?}"),
            }
        }
    }

    fn arb_preds() -> impl Strategy<Value = Vec<PredictionRecord>> {
        prop::collection::vec((0u8..20, any::<bool>()), 2..80)
            .prop_map(|v| v.into_iter().map(|(s, l)| p(f64::from(s) / 19.0, l)).collect())
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise(preds in arb_preds()) {
            if let Ok(a) = roc_auc(&preds) {
                prop_assert!((a - pairwise_auc(&preds)).abs() <= 1e-12);
            }
        }

        #[test]
        fn auc_negation_and_monotone_transform(preds in arb_preds()) {
            if let Ok(a) = roc_auc(&preds) {
                let neg: Vec<_> = preds.iter().map(|x| p(1.0 - x.score, x.positive)).collect();
                prop_assert!((roc_auc(&neg).unwrap() - (1.0 - a)).abs() <= 1e-12);
                let sq: Vec<_> = preds.iter().map(|x| p(x.score.powi(3), x.positive)).collect();
                prop_assert!((roc_auc(&sq).unwrap() - a).abs() <= 1e-12);
            }
        }

        #[test]
        fn metrics_in_range_and_accuracy_identity(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let c = ConfusionCounts { tp, fp, tn, fn_ };
            let m = basic_metrics(&c);
            for v in [m.accuracy, m.sensitivity, m.specificity, m.precision, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let pos = (tp + fn_) as f64;
            let prev = pos / c.total() as f64;
            if tp + fn_ > 0 && tn + fp > 0 {
                prop_assert!((m.accuracy - (prev * m.sensitivity + (1.0 - prev) * m.specificity)).abs() < 1e-12);
            }
            let row = TableRow { dataset: String::new(), accuracy: m.accuracy, sensitivity: m.sensitivity,
                specificity: m.specificity, precision: m.precision, f1: m.f1, auc: 0.5 };
            prop_assert!(row.f1_consistent(0.005));
        }
    }
}
