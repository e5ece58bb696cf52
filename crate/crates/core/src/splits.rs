//! Patient-grouped, label-stratified k-fold assignment and the fold file format.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::{CovidLabel, ManifestEntry};
use crate::triage::ViewLabel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SplitError {
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("{cohort}: {groups} labelled groups is fewer than k={k}")]
    InsufficientGroups { cohort: String, groups: usize, k: usize },
}

#[derive(Debug, Error)]
pub enum FoldFileError {
    #[error("fold file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("fold file I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Whether all images of a patient move together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    #[default]
    Patient,
    /// Every image is its own group (the literal per-image protocol).
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub image_uid: String,
    pub patient_id: String,
    pub cohort: String,
    pub fold_index: usize,
    pub k: usize,
}

impl FoldAssignment {
    /// In evaluation round `r` the fold with index `r` is the test set.
    pub fn is_test_in(&self, round: usize) -> bool {
        self.fold_index == round
    }
}

pub fn fold_file_name(k: usize, seed: u64) -> String {
    format!("folds_k{k}_seed{seed}.csv")
}

struct Group<'a> {
    members: Vec<&'a ManifestEntry>,
    positive: usize,
}

impl Group<'_> {
    fn majority_positive(&self) -> bool {
        2 * self.positive >= self.members.len()
    }
}

/// Assigns every labelled entry of `entries` (one cohort) to one of `k` folds.
///
/// Groups are shuffled with a ChaCha8 generator seeded by `seed`, stably ordered by
/// majority label (positive first) then image count descending, and dealt one at a
/// time to the fold holding the fewest images of the group's label (ties: fewest
/// images overall, then lowest index). Entries with an unknown label are ignored.
pub fn grouped_stratified_kfold(
    entries: &[ManifestEntry],
    cohort: &str,
    k: usize,
    seed: u64,
    grouping: Grouping,
) -> Result<Vec<FoldAssignment>, SplitError> {
    if k < 2 {
        return Err(SplitError::InvalidK(k));
    }
    let mut by_key: BTreeMap<&str, Group> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.covid_label != CovidLabel::Unknown) {
        let key = match grouping {
            Grouping::Patient => e.patient_id.as_str(),
            Grouping::Image => e.image_uid.as_str(),
        };
        let g = by_key.entry(key).or_insert_with(|| Group { members: vec![], positive: 0 });
        g.members.push(e);
        g.positive += usize::from(e.covid_label == CovidLabel::Positive);
    }
    if by_key.len() < k {
        return Err(SplitError::InsufficientGroups { cohort: cohort.to_string(), groups: by_key.len(), k });
    }
    let mut groups: Vec<Group> = by_key.into_values().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    groups.sort_by_key(|g| (!g.majority_positive(), std::cmp::Reverse(g.members.len())));

    // Per fold: images of each majority label, then all images.
    let mut load = vec![[0usize; 2]; k];
    let mut total = vec![0usize; k];
    let mut out = vec![];
    for g in &groups {
        let label = usize::from(g.majority_positive());
        let fold = (0..k).min_by_key(|&f| (load[f][label], total[f], f)).expect("k >= 2");
        load[fold][label] += g.members.len();
        total[fold] += g.members.len();
        for e in &g.members {
            out.push(FoldAssignment {
                image_uid: e.image_uid.to_string(),
                patient_id: e.patient_id.clone(),
                cohort: cohort.to_string(),
                fold_index: fold,
                k,
            });
        }
    }
    // Present in manifest order rather than dealing order.
    let order: BTreeMap<&str, usize> = entries.iter().enumerate().map(|(i, e)| (e.image_uid.as_str(), i)).collect();
    out.sort_by_key(|a| order[a.image_uid.as_str()]);
    Ok(out)
}

/// A cohort left out of the split and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedCohort {
    pub cohort: String,
    pub reason: SplitError,
}

/// Splits the AP and PA cohorts independently over split-eligible entries. Cohorts
/// with too few groups are skipped with a warning.
pub fn split_cohorts(
    entries: &[ManifestEntry],
    k: usize,
    seed: u64,
    grouping: Grouping,
) -> Result<(Vec<FoldAssignment>, Vec<SkippedCohort>), SplitError> {
    if k < 2 {
        return Err(SplitError::InvalidK(k));
    }
    let mut all = vec![];
    let mut skipped = vec![];
    for view in [ViewLabel::Ap, ViewLabel::Pa] {
        let cohort: Vec<ManifestEntry> =
            entries.iter().filter(|e| e.is_split_eligible() && e.view == Some(view)).cloned().collect();
        match grouped_stratified_kfold(&cohort, view.as_str(), k, seed, grouping) {
            Ok(a) => all.extend(a),
            Err(reason @ SplitError::InsufficientGroups { .. }) => {
                warn!("skipping cohort {view}: {reason}");
                skipped.push(SkippedCohort { cohort: view.as_str().to_string(), reason });
            }
            Err(e) => return Err(e),
        }
    }
    Ok((all, skipped))
}

pub fn fold_columns(k: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["image_uid", "patient_id", "cohort", "fold_index"].iter().map(|s| s.to_string()).collect();
    cols.extend((0..k).map(|r| format!("round_{r}")));
    cols
}

pub fn write_folds_to<W: Write>(assignments: &[FoldAssignment], k: usize, out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(fold_columns(k))?;
    for a in assignments {
        let mut rec = vec![a.image_uid.clone(), a.patient_id.clone(), a.cohort.clone(), a.fold_index.to_string()];
        rec.extend((0..k).map(|r| if a.is_test_in(r) { "test" } else { "train" }.to_string()));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_folds(assignments: &[FoldAssignment], k: usize, path: &Path) -> Result<(), FoldFileError> {
    let mut buf = vec![];
    write_folds_to(assignments, k, &mut buf).map_err(|e| FoldFileError::Io(std::io::Error::other(e.to_string())))?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_folds_from<R: Read>(input: R) -> Result<Vec<FoldAssignment>, FoldFileError> {
    let parse = |line: u64, message: String| FoldFileError::Parse { line, message };
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| parse(1, "missing header".into()))?
        .map_err(|e| parse(1, e.to_string()))?;
    let k = header.len().saturating_sub(4);
    if k < 2 || header.iter().ne(fold_columns(k).iter().map(String::as_str)) {
        return Err(parse(1, "header must be image_uid,patient_id,cohort,fold_index,round_0..round_{k-1}".into()));
    }
    let mut out = vec![];
    for rec in records {
        let rec = rec.map_err(|e| parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != k + 4 {
            return Err(parse(line, format!("expected {} fields, found {}", k + 4, rec.len())));
        }
        let fold_index: usize = rec[3].parse().map_err(|_| parse(line, format!("bad fold_index {:?}", &rec[3])))?;
        if fold_index >= k {
            return Err(parse(line, format!("fold_index {fold_index} out of range for k={k}")));
        }
        for r in 0..k {
            let expect = if r == fold_index { "test" } else { "train" };
            if &rec[4 + r] != expect {
                return Err(parse(line, format!("round_{r} must be {expect}")));
            }
        }
        out.push(FoldAssignment {
            image_uid: rec[0].to_string(),
            patient_id: rec[1].to_string(),
            cohort: rec[2].to_string(),
            fold_index,
            k,
        });
    }
    Ok(out)
}

pub fn read_folds(path: &Path) -> Result<Vec<FoldAssignment>, FoldFileError> {
    read_folds_from(std::io::BufReader::new(std::fs::File::open(path)?))
}
