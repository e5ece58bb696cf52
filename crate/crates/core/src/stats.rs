//! Dataset composition summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::manifest::{CovidLabel, ManifestEntry, Status};
use crate::triage::ViewLabel;

/// `part / total` as a whole percentage, rounded half up; 0 when `total` is 0.
pub fn whole_percent(part: usize, total: usize) -> u64 {
    if total == 0 {
        return 0;
    }
    let (p, t) = (part as u128, total as u128);
    ((200 * p + t) / (2 * t)) as u64
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    pub positive: usize,
    pub negative: usize,
    pub unknown: usize,
}

impl LabelCounts {
    fn add(&mut self, l: CovidLabel) {
        match l {
            CovidLabel::Positive => self.positive += 1,
            CovidLabel::Negative => self.negative += 1,
            CovidLabel::Unknown => self.unknown += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub total: usize,
    pub ap: usize,
    pub pa: usize,
    pub lateral: usize,
    pub abdomen: usize,
    pub unknown_view: usize,
    pub kept: usize,
    pub excluded: usize,
    pub quarantined: usize,
    pub pending: usize,
    pub ap_percent: u64,
    pub pa_percent: u64,
    pub excluded_percent: u64,
    pub quarantined_percent: u64,
    pub labels: LabelCounts,
    /// Labels of kept images, per frontal cohort.
    pub kept_labels: BTreeMap<String, LabelCounts>,
    /// Patients whose images carry both a positive and a negative label.
    pub conflicting_patients: Vec<String>,
}

/// Counts by view, status and label. AP/PA percentages are of frontal images;
/// excluded and quarantined percentages are of all entries.
pub fn dataset_stats(entries: &[ManifestEntry]) -> DatasetStats {
    let mut s = DatasetStats { total: entries.len(), ..Default::default() };
    let mut seen_labels: BTreeMap<&str, BTreeSet<CovidLabel>> = BTreeMap::new();
    for e in entries {
        match e.view {
            Some(ViewLabel::Ap) => s.ap += 1,
            Some(ViewLabel::Pa) => s.pa += 1,
            Some(ViewLabel::Lateral) => s.lateral += 1,
            Some(ViewLabel::Abdomen) => s.abdomen += 1,
            Some(ViewLabel::Unknown) => s.unknown_view += 1,
            None => {}
        }
        match e.status {
            Some(Status::Kept) => {
                s.kept += 1;
                if let Some(v) = e.view {
                    s.kept_labels.entry(v.as_str().to_string()).or_default().add(e.covid_label);
                }
            }
            Some(Status::Excluded) => s.excluded += 1,
            Some(Status::Quarantined) => s.quarantined += 1,
            None => s.pending += 1,
        }
        s.labels.add(e.covid_label);
        if e.covid_label != CovidLabel::Unknown {
            seen_labels.entry(e.patient_id.as_str()).or_default().insert(e.covid_label);
        }
    }
    s.ap_percent = whole_percent(s.ap, s.ap + s.pa);
    s.pa_percent = whole_percent(s.pa, s.ap + s.pa);
    s.excluded_percent = whole_percent(s.excluded, s.total);
    s.quarantined_percent = whole_percent(s.quarantined, s.total);
    s.conflicting_patients = seen_labels.into_iter().filter(|(_, l)| l.len() > 1).map(|(p, _)| p.to_string()).collect();
    s
}

impl DatasetStats {
    pub fn cohort_line(&self) -> String {
        format!("{}% AP, {}% PA", self.ap_percent, self.pa_percent)
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "images: {}", self.total)?;
        writeln!(
            f,
            "frontal: {} AP, {} PA ({})",
            self.ap,
            self.pa,
            self.cohort_line()
        )?;
        writeln!(f, "views removed: {} lateral, {} abdomen", self.lateral, self.abdomen)?;
        writeln!(f, "{} images removed ({}%)", self.excluded, self.excluded_percent)?;
        writeln!(f, "{} images quarantined ({}%)", self.quarantined, self.quarantined_percent)?;
        writeln!(f, "kept: {}, pending: {}", self.kept, self.pending)?;
        writeln!(
            f,
            "labels: {} positive, {} negative, {} unknown",
            self.labels.positive, self.labels.negative, self.labels.unknown
        )?;
        for (cohort, l) in &self.kept_labels {
            writeln!(f, "kept {cohort}: {} positive, {} negative, {} unknown", l.positive, l.negative, l.unknown)?;
        }
        if self.conflicting_patients.is_empty() {
            writeln!(f, "patients with conflicting labels: none")
        } else {
            writeln!(
                f,
                "patients with conflicting labels: {} ({})",
                self.conflicting_patients.len(),
                self.conflicting_patients.join(", ")
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::tests::entry;

    #[test]
    fn percent_rounding() {
        assert_eq!(whole_percent(12023, 12023 + 4909), 71);
        assert_eq!(whole_percent(4909, 12023 + 4909), 29);
        assert_eq!(whole_percent(1, 8), 13);
        assert_eq!(whole_percent(1, 3), 33);
        assert_eq!(whole_percent(5, 0), 0);
    }

    #[test]
    fn paper_cohort_split() {
        let mut entries = vec![];
        for i in 0..12023 {
            entries.push(entry(&format!("a{i}"), "P", Some(ViewLabel::Ap), Some(Status::Kept), CovidLabel::Unknown));
        }
        for i in 0..4909 {
            entries.push(entry(&format!("p{i}"), "P", Some(ViewLabel::Pa), Some(Status::Kept), CovidLabel::Unknown));
        }
        assert_eq!(dataset_stats(&entries).cohort_line(), "71% AP, 29% PA");
    }

    #[test]
    fn empty_is_all_zero() {
        assert_eq!(dataset_stats(&[]), DatasetStats::default());
    }

    #[test]
    fn excluded_fraction() {
        let mut entries: Vec<_> = (0..3)
            .map(|i| entry(&format!("k{i}"), "P", Some(ViewLabel::Ap), Some(Status::Kept), CovidLabel::Negative))
            .collect();
        entries.push(entry("x", "P", Some(ViewLabel::Lateral), Some(Status::Excluded), CovidLabel::Negative));
        let s = dataset_stats(&entries);
        assert_eq!(s.excluded_percent, 25);
        assert!(s.to_string().contains("1 images removed (25%)"));
    }

    #[test]
    fn conflicting_labels_flagged() {
        let entries = vec![
            entry("a", "P1", Some(ViewLabel::Ap), Some(Status::Kept), CovidLabel::Positive),
            entry("b", "P1", Some(ViewLabel::Ap), Some(Status::Kept), CovidLabel::Negative),
            entry("c", "P2", Some(ViewLabel::Pa), Some(Status::Kept), CovidLabel::Positive),
            entry("d", "P2", Some(ViewLabel::Pa), Some(Status::Kept), CovidLabel::Unknown),
        ];
        let s = dataset_stats(&entries);
        assert_eq!(s.conflicting_patients, vec!["P1".to_string()]);
        assert_eq!(s.kept_labels["AP"], LabelCounts { positive: 1, negative: 1, unknown: 0 });
    }
}
