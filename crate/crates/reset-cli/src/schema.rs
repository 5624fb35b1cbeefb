//! Tab-separated input and output tables.
//!
//! Input files carry a header line naming each column. Exactly one of two
//! modes must be present: a `pvalue` column, or both `label` (values 1/-1)
//! and `score`. Any number of side-information columns prefixed `x_` and an
//! optional `id` column are allowed; nothing else is. Numeric fields accept
//! scientific notation; p-values may be exactly 0 (downstream conversion
//! replaces the resulting infinite scores).

use std::fs;
use std::path::Path;

use reset_core::model::{HypothesisTable, Matrix, PValueTable};

use crate::CliError;

/// A parsed input file, in whichever of the two schema modes it used.
pub enum LoadedInput {
    PValues(PValueTable),
    Competition(HypothesisTable),
}

impl LoadedInput {
    pub fn len(&self) -> usize {
        match self {
            LoadedInput::PValues(t) => t.len(),
            LoadedInput::Competition(t) => t.len(),
        }
    }

    pub fn ids(&self) -> &[String] {
        match self {
            LoadedInput::PValues(t) => t.ids(),
            LoadedInput::Competition(t) => t.ids(),
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            LoadedInput::PValues(_) => "pvalue",
            LoadedInput::Competition(_) => "competition",
        }
    }
}

fn data_err(msg: String) -> CliError {
    CliError::Data(msg)
}

/// Reads and validates an input table, reporting schema violations with the
/// offending line number.
pub fn read_input(path: &str) -> Result<LoadedInput, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| data_err(format!("{path}: cannot read: {e}")))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| data_err(format!("{path}: empty file, expected a header line")))?;
    let columns: Vec<&str> = header.split('\t').collect();

    let mut pvalue_col = None;
    let mut label_col = None;
    let mut score_col = None;
    let mut id_col = None;
    let mut side_cols = Vec::new();
    for (j, name) in columns.iter().enumerate() {
        match *name {
            "pvalue" => pvalue_col = Some(j),
            "label" => label_col = Some(j),
            "score" => score_col = Some(j),
            "id" => id_col = Some(j),
            _ if name.starts_with("x_") => side_cols.push(j),
            _ => {
                return Err(data_err(format!(
                    "{path}: line 1: unknown column '{name}' \
                     (expected pvalue | label+score, x_*, id)"
                )))
            }
        }
    }
    let pvalue_mode = match (pvalue_col, label_col, score_col) {
        (Some(_), None, None) => true,
        (None, Some(_), Some(_)) => false,
        (None, None, None) => {
            return Err(data_err(format!(
                "{path}: line 1: need either a 'pvalue' column or 'label' and 'score' columns"
            )))
        }
        (None, Some(_), None) => {
            return Err(data_err(format!(
                "{path}: line 1: 'label' requires a 'score' column"
            )))
        }
        (None, None, Some(_)) => {
            return Err(data_err(format!(
                "{path}: line 1: 'score' requires a 'label' column"
            )))
        }
        (Some(_), _, _) => {
            return Err(data_err(format!(
                "{path}: line 1: 'pvalue' cannot be combined with 'label'/'score'"
            )))
        }
    };

    let mut pvalues = Vec::new();
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    let mut ids = Vec::new();
    let mut side_rows: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (index, line) in lines {
        let line_no = index + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != columns.len() {
            return Err(data_err(format!(
                "{path}: line {line_no}: expected {} fields, found {}",
                columns.len(),
                fields.len()
            )));
        }
        let number = |j: usize, what: &str| -> Result<f64, CliError> {
            let raw = fields[j];
            let v: f64 = raw.parse().map_err(|_| {
                data_err(format!(
                    "{path}: line {line_no}: column '{what}': cannot parse '{raw}' as a number"
                ))
            })?;
            if !v.is_finite() {
                return Err(data_err(format!(
                    "{path}: line {line_no}: column '{what}': value '{raw}' is not finite"
                )));
            }
            Ok(v)
        };
        if pvalue_mode {
            let p = number(pvalue_col.unwrap(), "pvalue")?;
            if !(0.0..=1.0).contains(&p) {
                return Err(data_err(format!(
                    "{path}: line {line_no}: column 'pvalue': {p} is outside [0, 1]"
                )));
            }
            pvalues.push(p);
        } else {
            let raw = fields[label_col.unwrap()];
            let l: i32 = raw.parse().map_err(|_| {
                data_err(format!(
                    "{path}: line {line_no}: column 'label': cannot parse '{raw}' as an integer"
                ))
            })?;
            if l != 1 && l != -1 {
                return Err(data_err(format!(
                    "{path}: line {line_no}: column 'label': {l} is not 1 or -1"
                )));
            }
            labels.push(l as i8);
            scores.push(number(score_col.unwrap(), "score")?);
        }
        for &j in &side_cols {
            side_rows.push(number(j, columns[j])?);
        }
        ids.push(match id_col {
            Some(j) => fields[j].to_string(),
            None => n_rows.to_string(),
        });
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(data_err(format!("{path}: no data rows")));
    }
    let side = Matrix::new(n_rows, side_cols.len(), side_rows);
    if pvalue_mode {
        let table =
            PValueTable::new(pvalues, side, ids).map_err(|e| data_err(format!("{path}: {e}")))?;
        Ok(LoadedInput::PValues(table))
    } else {
        let table = HypothesisTable::new(labels, scores, side, ids)
            .map_err(|e| data_err(format!("{path}: {e}")))?;
        Ok(LoadedInput::Competition(table))
    }
}

/// One output row of discoveries.tsv.
pub struct DiscoveryRow {
    pub id: String,
    /// Pre-rescoring score; None when the hypothesis never entered the
    /// competition (dropped by conversion, zero score, or training split).
    pub score: Option<f64>,
    /// Rescored value, when the engine produced one for this hypothesis.
    pub wtilde: Option<f64>,
    pub discovered: bool,
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NA".to_string(),
    }
}

/// Writes discoveries.tsv: one row per input hypothesis, in input order.
pub fn write_discoveries(path: &Path, rows: &[DiscoveryRow]) -> Result<(), CliError> {
    let mut out = String::from("id\tscore\twtilde\tdiscovered\n");
    for row in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            row.id,
            fmt_opt(row.score),
            fmt_opt(row.wtilde),
            u8::from(row.discovered)
        ));
    }
    fs::write(path, out)
        .map_err(|e| CliError::Internal(format!("{}: cannot write: {e}", path.display())))
}

/// Writes a p-value table in the input schema (pvalue, x_*, id).
pub fn write_pvalue_tsv(path: &Path, table: &PValueTable) -> Result<(), CliError> {
    let d = table.side_info().cols();
    let mut out = String::from("pvalue");
    for j in 0..d {
        out.push_str(&format!("\tx_{}", j + 1));
    }
    out.push_str("\tid\n");
    for i in 0..table.len() {
        out.push_str(&format!("{}", table.pvalues()[i]));
        for j in 0..d {
            out.push_str(&format!("\t{}", table.side_info().get(i, j)));
        }
        out.push_str(&format!("\t{}\n", table.ids()[i]));
    }
    fs::write(path, out)
        .map_err(|e| CliError::Internal(format!("{}: cannot write: {e}", path.display())))
}

/// Writes a competition table in the input schema (label, score, x_*, id).
pub fn write_competition_tsv(path: &Path, table: &HypothesisTable) -> Result<(), CliError> {
    let d = table.side_info().cols();
    let mut out = String::from("label\tscore");
    for j in 0..d {
        out.push_str(&format!("\tx_{}", j + 1));
    }
    out.push_str("\tid\n");
    for i in 0..table.len() {
        out.push_str(&format!("{}\t{}", table.labels()[i], table.scores()[i]));
        for j in 0..d {
            out.push_str(&format!("\t{}", table.side_info().get(i, j)));
        }
        out.push_str(&format!("\t{}\n", table.ids()[i]));
    }
    fs::write(path, out)
        .map_err(|e| CliError::Internal(format!("{}: cannot write: {e}", path.display())))
}

/// Writes the ground-truth indicator next to a generated table.
pub fn write_truth_tsv(path: &Path, ids: &[String], false_nulls: &[bool]) -> Result<(), CliError> {
    let mut out = String::from("id\tfalse_null\n");
    for (id, &f) in ids.iter().zip(false_nulls) {
        out.push_str(&format!("{id}\t{}\n", u8::from(f)));
    }
    fs::write(path, out)
        .map_err(|e| CliError::Internal(format!("{}: cannot write: {e}", path.display())))
}
