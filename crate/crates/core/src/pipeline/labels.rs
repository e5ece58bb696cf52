use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::manifest::CovidLabel;

use super::PipelineError;

pub const LABEL_COLUMNS: [&str; 3] = ["patient_id", "sop_instance_uid", "covid_label"];

/// Infection labels keyed by raw patient id. A row with an empty `sop_instance_uid`
/// labels every image of that patient; a row naming an instance overrides it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    by_patient: HashMap<String, CovidLabel>,
    by_instance: HashMap<(String, String), CovidLabel>,
}

impl LabelTable {
    pub fn from_reader<R: Read>(input: R) -> Result<Self, PipelineError> {
        let bad = |line: u64, m: String| PipelineError::Config(format!("labels line {line}: {m}"));
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers().map_err(|e| bad(1, e.to_string()))?.clone();
        if header.iter().ne(LABEL_COLUMNS) {
            return Err(bad(1, format!("header must be {}", LABEL_COLUMNS.join(","))));
        }
        let mut table = Self::default();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let patient = rec[0].trim().to_string();
            if patient.is_empty() {
                return Err(bad(line, "empty patient_id".into()));
            }
            let label: CovidLabel = rec[2].trim().parse().map_err(|e: String| bad(line, e))?;
            let sop = rec[1].trim();
            let previous = if sop.is_empty() {
                table.by_patient.insert(patient.clone(), label)
            } else {
                table.by_instance.insert((patient.clone(), sop.to_string()), label)
            };
            if previous.is_some_and(|p| p != label) {
                return Err(bad(line, format!("contradicts an earlier label for {patient} {sop}")));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let f = std::fs::File::open(path)
            .map_err(|e| PipelineError::Config(format!("cannot read labels {}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(f))
    }

    pub fn lookup(&self, patient_id: &str, sop_instance_uid: &str) -> CovidLabel {
        let patient = patient_id.trim();
        self.by_instance
            .get(&(patient.to_string(), sop_instance_uid.trim().to_string()))
            .or_else(|| self.by_patient.get(patient))
            .copied()
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_rows_override_patient_rows() {
        let t = LabelTable::from_reader("patient_id,sop_instance_uid,covid_label\nP1,,positive\nP1,1.2.3,negative\nP2,,0\n".as_bytes()).unwrap();
        assert_eq!(t.lookup("P1", "9.9"), CovidLabel::Positive);
        assert_eq!(t.lookup("P1", "1.2.3"), CovidLabel::Negative);
        assert_eq!(t.lookup("P2", ""), CovidLabel::Negative);
        assert_eq!(t.lookup("P3", ""), CovidLabel::Unknown);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(LabelTable::from_reader("patient,label\nP1,1\n".as_bytes()).is_err());
        assert!(LabelTable::from_reader("patient_id,sop_instance_uid,covid_label\nP1,,maybe\n".as_bytes()).is_err());
        assert!(LabelTable::from_reader("patient_id,sop_instance_uid,covid_label\nP1,,1\nP1,,0\n".as_bytes()).is_err());
    }
}
