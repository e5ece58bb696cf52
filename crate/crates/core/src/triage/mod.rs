//! Rule-based view triage.
//!
//! A [`RuleSet`] is an ordered table of `(selector, pattern, mode, verdict, priority)`
//! rows. Classification walks the table by ascending priority and the first rule whose
//! pattern matches the selected tag text decides the [`ViewLabel`]. Nothing matching
//! yields `UNKNOWN`, which downstream code quarantines instead of guessing.

use std::borrow::Borrow;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::DicomRecord;
use crate::stats::whole_percent;

/// The built-in table, also emitted verbatim by `rules dump`.
pub const DEFAULT_RULES_TOML: &str = include_str!("default_rules.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViewLabel {
    #[serde(rename = "AP")]
    Ap,
    #[serde(rename = "PA")]
    Pa,
    #[serde(rename = "LATERAL")]
    Lateral,
    #[serde(rename = "ABDOMEN")]
    Abdomen,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl ViewLabel {
    pub const ALL: [ViewLabel; 5] = [ViewLabel::Ap, ViewLabel::Pa, ViewLabel::Lateral, ViewLabel::Abdomen, ViewLabel::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            ViewLabel::Ap => "AP",
            ViewLabel::Pa => "PA",
            ViewLabel::Lateral => "LATERAL",
            ViewLabel::Abdomen => "ABDOMEN",
            ViewLabel::Unknown => "UNKNOWN",
        }
    }

    pub fn is_frontal(self) -> bool {
        matches!(self, ViewLabel::Ap | ViewLabel::Pa)
    }

    pub fn is_excluded(self) -> bool {
        matches!(self, ViewLabel::Lateral | ViewLabel::Abdomen)
    }
}

impl fmt::Display for ViewLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ViewLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ViewLabel::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown view label {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    ViewPosition,
    SeriesDescription,
    StudyDescription,
    CodeMeanings,
}

impl Selector {
    pub fn as_str(self) -> &'static str {
        match self {
            Selector::ViewPosition => "view_position",
            Selector::SeriesDescription => "series_description",
            Selector::StudyDescription => "study_description",
            Selector::CodeMeanings => "code_meanings",
        }
    }

    fn values(self, rec: &DicomRecord) -> Vec<&str> {
        match self {
            Selector::ViewPosition => rec.view_position.as_deref().into_iter().collect(),
            Selector::SeriesDescription => rec.series_description.as_deref().into_iter().collect(),
            Selector::StudyDescription => rec.study_description.as_deref().into_iter().collect(),
            Selector::CodeMeanings => rec.code_meanings.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Case-insensitive match of whole alphanumeric tokens.
    Token,
    /// Case-insensitive substring match.
    Substring,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriageRule {
    pub selector: Selector,
    pub pattern: String,
    pub mode: MatchMode,
    pub verdict: ViewLabel,
    pub priority: i64,
}

impl TriageRule {
    fn matches(&self, text: &str) -> bool {
        match self.mode {
            MatchMode::Substring => text.to_ascii_uppercase().contains(&self.pattern.to_ascii_uppercase()),
            MatchMode::Token => {
                let hay = tokens(text);
                let needle = tokens(&self.pattern);
                !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle.as_slice())
            }
        }
    }

    pub fn describe(&self) -> String {
        let mode = match self.mode {
            MatchMode::Token => "token",
            MatchMode::Substring => "substring",
        };
        format!("rule {} ({} {} {:?} -> {})", self.priority, self.selector.as_str(), mode, self.pattern, self.verdict)
    }
}

/// Uppercased alphanumeric runs of `text`.
fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_uppercase)
        .collect()
}

#[derive(Debug, Error)]
pub enum RuleSetError {
    #[error("rule with priority {0} has an empty pattern")]
    EmptyPattern(i64),
    #[error("duplicate rule priority {0}")]
    DuplicatePriority(i64),
    #[error("rule with priority {0} assigns UNKNOWN; leave images unmatched instead")]
    UnknownVerdict(i64),
    #[error("cannot parse rule file: {0}")]
    Parse(String),
    #[error("cannot read rule file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Validated rule table, sorted by ascending priority.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<TriageRule>,
}

#[derive(Serialize, Deserialize)]
struct RuleFile {
    rule: Vec<TriageRule>,
}

impl RuleSet {
    pub fn new(mut rules: Vec<TriageRule>) -> Result<Self, RuleSetError> {
        rules.sort_by_key(|r| r.priority);
        for r in &rules {
            if r.pattern.trim().is_empty() {
                return Err(RuleSetError::EmptyPattern(r.priority));
            }
            if r.verdict == ViewLabel::Unknown {
                return Err(RuleSetError::UnknownVerdict(r.priority));
            }
        }
        if let Some(w) = rules.windows(2).find(|w| w[0].priority == w[1].priority) {
            return Err(RuleSetError::DuplicatePriority(w[0].priority));
        }
        Ok(Self { rules })
    }

    pub fn from_toml(text: &str) -> Result<Self, RuleSetError> {
        let file: RuleFile = toml::from_str(text).map_err(|e| RuleSetError::Parse(e.to_string()))?;
        Self::new(file.rule)
    }

    pub fn load(path: &Path) -> Result<Self, RuleSetError> {
        let text = std::fs::read_to_string(path).map_err(|source| RuleSetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RuleFile { rule: self.rules.clone() }).expect("rules serialize")
    }

    pub fn rules(&self) -> &[TriageRule] {
        &self.rules
    }

    pub fn rule(&self, priority: i64) -> Option<&TriageRule> {
        self.rules.iter().find(|r| r.priority == priority)
    }
}

/// The built-in ordered table: abdominal and lateral exclusions first, then PA, then AP.
pub fn default_ruleset() -> RuleSet {
    RuleSet::from_toml(DEFAULT_RULES_TOML).expect("built-in rule table is valid")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriageDecision {
    pub label: ViewLabel,
    /// Priority of the rule that fired.
    pub matched_rule: Option<i64>,
    pub matched_value: Option<String>,
}

impl TriageDecision {
    fn unknown() -> Self {
        Self { label: ViewLabel::Unknown, matched_rule: None, matched_value: None }
    }

    /// Human-readable reason recorded in the manifest.
    pub fn reason(&self, rules: &RuleSet) -> String {
        match (self.matched_rule, &self.matched_value) {
            (Some(p), Some(v)) => {
                let desc = rules.rule(p).map(TriageRule::describe).unwrap_or_else(|| format!("rule {p}"));
                format!("{}: {desc} matched {v:?}", self.label)
            }
            _ => format!("{}: no triage rule matched", self.label),
        }
    }
}

pub fn classify_view(rec: &DicomRecord, rules: &RuleSet) -> TriageDecision {
    for rule in &rules.rules {
        if let Some(value) = rule.selector.values(rec).into_iter().find(|v| rule.matches(v)) {
            return TriageDecision {
                label: rule.verdict,
                matched_rule: Some(rule.priority),
                matched_value: Some(value.to_string()),
            };
        }
    }
    TriageDecision::unknown()
}

/// Every input lands in exactly one bucket.
#[derive(Debug, Clone)]
pub struct Partition<T> {
    pub ap: Vec<T>,
    pub pa: Vec<T>,
    pub excluded: Vec<(T, TriageDecision)>,
    pub unknown: Vec<T>,
}

impl<T> Partition<T> {
    pub fn summary(&self) -> TriageSummary {
        TriageSummary {
            ap: self.ap.len(),
            pa: self.pa.len(),
            excluded: self.excluded.len(),
            unknown: self.unknown.len(),
        }
    }
}

pub fn filter_dataset<T: Borrow<DicomRecord>>(records: impl IntoIterator<Item = T>, rules: &RuleSet) -> Partition<T> {
    let mut out = Partition { ap: vec![], pa: vec![], excluded: vec![], unknown: vec![] };
    for item in records {
        let decision = classify_view(item.borrow(), rules);
        match decision.label {
            ViewLabel::Ap => out.ap.push(item),
            ViewLabel::Pa => out.pa.push(item),
            ViewLabel::Lateral | ViewLabel::Abdomen => out.excluded.push((item, decision)),
            ViewLabel::Unknown => out.unknown.push(item),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TriageSummary {
    pub ap: usize,
    pub pa: usize,
    pub excluded: usize,
    pub unknown: usize,
}

impl TriageSummary {
    pub fn total(&self) -> usize {
        self.ap + self.pa + self.excluded + self.unknown
    }
}

impl fmt::Display for TriageSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let frontal = self.ap + self.pa;
        writeln!(f, "{} images removed", self.excluded)?;
        writeln!(
            f,
            "{} AP ({}%), {} PA ({}%) of {frontal} frontal images",
            self.ap,
            whole_percent(self.ap, frontal),
            self.pa,
            whole_percent(self.pa, frontal)
        )?;
        write!(f, "{} images quarantined as UNKNOWN", self.unknown)
    }
}
