//! Line-oriented report file: one summary line, then one line per query
//! record in query-id order. Plain text, diff-friendly, and byte-stable
//! for identical inputs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvalReport, QueryEvalRecord};

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    kind: String,
    method_label: String,
    n_queries: usize,
    n_fallback_verdicts: usize,
    precision_at_1: f64,
    mrr_at_20: f64,
    alpha_selection_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    kind: String,
    #[serde(flatten)]
    record: QueryEvalRecord,
}

impl EvalReport {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        let summary = SummaryLine {
            kind: "summary".to_string(),
            method_label: self.method_label.clone(),
            n_queries: self.n_queries,
            n_fallback_verdicts: self.n_fallback_verdicts,
            precision_at_1: self.precision_at_1,
            mrr_at_20: self.mrr_at_20,
            alpha_selection_accuracy: self.alpha_selection_accuracy,
        };
        out.push_str(&serde_json::to_string(&summary).map_err(json_err)?);
        out.push('\n');
        for record in &self.records {
            let line = RecordLine {
                kind: "record".to_string(),
                record: record.clone(),
            };
            out.push_str(&serde_json::to_string(&line).map_err(json_err)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(self.to_jsonl()?.as_bytes())
            .map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<EvalReport> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut summary: Option<SummaryLine> = None;
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let at = format!("{}:{}", path.display(), lineno + 1);
            let value: serde_json::Value =
                serde_json::from_str(&line).map_err(|e| Error::parse(at.clone(), e.to_string()))?;
            match value["kind"].as_str() {
                Some("summary") => {
                    summary = Some(
                        serde_json::from_value(value)
                            .map_err(|e| Error::parse(at, e.to_string()))?,
                    )
                }
                Some("record") => {
                    let record: RecordLine = serde_json::from_value(value)
                        .map_err(|e| Error::parse(at, e.to_string()))?;
                    records.push(record.record);
                }
                _ => return Err(Error::parse(at, "unknown record kind")),
            }
        }
        let summary =
            summary.ok_or_else(|| Error::parse(path.display().to_string(), "missing summary"))?;
        Ok(EvalReport {
            method_label: summary.method_label,
            n_queries: summary.n_queries,
            n_fallback_verdicts: summary.n_fallback_verdicts,
            precision_at_1: summary.precision_at_1,
            mrr_at_20: summary.mrr_at_20,
            alpha_selection_accuracy: summary.alpha_selection_accuracy,
            records,
        })
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse {
        at: "<report>".to_string(),
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::AlphaValue;
    use std::collections::BTreeMap;

    #[test]
    fn report_roundtrips_through_jsonl() {
        let grid: BTreeMap<AlphaValue, Option<u32>> = AlphaValue::grid()
            .into_iter()
            .enumerate()
            .map(|(i, alpha)| (alpha, if i == 3 { None } else { Some(i as u32 + 1) }))
            .collect();
        let record = QueryEvalRecord {
            query_id: "q1".to_string(),
            chosen_alpha: AlphaValue::from_tenths(6).unwrap(),
            chosen_rank: grid[&AlphaValue::from_tenths(6).unwrap()],
            gold_rank_by_alpha: grid,
            verdict: None,
        };
        let report = EvalReport::from_records("rt".to_string(), vec![record]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.jsonl");
        report.write_jsonl(&path).unwrap();
        let reloaded = EvalReport::read_jsonl(&path).unwrap();
        assert_eq!(report, reloaded);
        reloaded.verify_self_consistent().unwrap();
    }

    #[test]
    fn identical_reports_serialize_identically() {
        let report = EvalReport::from_records("x".to_string(), vec![]);
        assert_eq!(report.to_jsonl().unwrap(), report.to_jsonl().unwrap());
    }
}
