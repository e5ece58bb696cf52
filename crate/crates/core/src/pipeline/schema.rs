use crate::manifest::MANIFEST_COLUMNS;
use crate::metrics::PREDICTION_COLUMNS;
use crate::splits::fold_columns;

use super::{LABEL_COLUMNS, METRICS_COLUMNS, SKIP_LOG_COLUMNS, STEP_ORDER};

fn manifest_doc(column: &str) -> &'static str {
    match column {
        "image_uid" => "`<patient>_<YYYYMMDD>_<HHMMSS>`, `_1`, `_2`, ... appended on collision in path order",
        "session_id" => "the image_uid without collision suffix",
        "patient_id" => "patient id as stored in the file, trimmed",
        "view" => "AP, PA, LATERAL, ABDOMEN or UNKNOWN; empty before triage",
        "status" => "kept, excluded or quarantined; empty while a frontal row awaits preprocessing",
        "status_reason" => "matched triage rule, or why preprocessing quarantined the row",
        "covid_label" => "positive, negative or unknown",
        "source_path" => "input file, relative to the input root",
        "output_image_path" => "8-bit PNG relative to the output root; set only for kept rows",
        "mask_path" => "lung mask PNG (0 or 255) at frame size, relative to the output root",
        "processing_flags" => "`;`-separated steps applied, in order",
        _ => "",
    }
}

/// Column reference for every file the pipeline reads or writes.
pub fn schema_text() -> String {
    let mut s = String::from("# File formats\n\nAll tables are RFC 4180 CSV with a header row, UTF-8, CRLF line ends.\n");
    s.push_str("\n## manifest.csv\n\n| column | content |\n|---|---|\n");
    for c in MANIFEST_COLUMNS {
        s.push_str(&format!("| {c} | {} |\n", manifest_doc(c)));
    }
    s.push_str(&format!(
        "\n`manifest.meta.toml` records frame_width, frame_height, orientation, resize mode, window \
         percentiles, mask backend, crop margin and step_order ({}).\n",
        STEP_ORDER.join(", ")
    ));
    s.push_str(&format!("\n## skipped.csv\n\nColumns: {}. Paths are relative to the input root.\n", SKIP_LOG_COLUMNS.join(", ")));
    s.push_str(&format!(
        "\n## folds_k<k>_seed<seed>.csv\n\nColumns: {}.\n\nfold_index is the row's fold; round_r is \
         `test` when fold_index equals r and `train` otherwise. AP and PA are split independently.\n",
        fold_columns(5).join(", ").replace("round_4", "round_<k-1>").replace("round_1, round_2, round_3, ", "..., ")
    ));
    s.push_str(&format!(
        "\n## labels CSV (input)\n\nColumns: {}. An empty sop_instance_uid labels every image of the \
         patient; a row naming an instance overrides it. Labels: positive/pos/1, negative/neg/0, unknown.\n",
        LABEL_COLUMNS.join(", ")
    ));
    s.push_str(&format!(
        "\n## predictions CSV (input)\n\nColumns: {}. score is a probability in [0, 1]; true_label is positive or negative.\n",
        PREDICTION_COLUMNS.join(", ")
    ));
    s.push_str(&format!(
        "\n## metrics.csv\n\nColumns: {}. fold is an index, `mean` or `pooled`; undefined lists \
         metrics whose denominator was zero (written as 0).\n",
        METRICS_COLUMNS.join(", ")
    ));
    s
}
