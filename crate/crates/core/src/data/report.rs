//! Concept reports as line-delimited JSON.
//!
//! One object per neuron, in neuron order, with fields
//! `neuron, top_vision, top_language, top_vision_ids, top_language_ids,
//! mean_activation, activation_count, dead`. A final line holds
//! `{"summary": {hidden, top_m, dead_count, concept_count,
//! intra_similarity, inter_similarity}}`; the two similarities are `null`
//! until an evaluation fills them in.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::concept::{ConceptReport, NeuronRecord};
use crate::data::format::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub hidden: usize,
    pub top_m: usize,
    pub dead_count: usize,
    pub concept_count: usize,
    pub intra_similarity: Option<f64>,
    pub inter_similarity: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: ReportSummary,
}

pub fn summarize(report: &ConceptReport) -> ReportSummary {
    ReportSummary {
        hidden: report.hidden(),
        top_m: report.top_m,
        dead_count: report.dead_count(),
        concept_count: report.concept_count(),
        intra_similarity: report.intra_similarity,
        inter_similarity: report.inter_similarity,
    }
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Malformed(format!("report JSON: {e}"))
}

pub fn encode_report(report: &ConceptReport) -> Result<String> {
    let mut out = String::new();
    for n in &report.neurons {
        out.push_str(&serde_json::to_string(n).map_err(json_err)?);
        out.push('\n');
    }
    let line = SummaryLine {
        summary: summarize(report),
    };
    out.push_str(&serde_json::to_string(&line).map_err(json_err)?);
    out.push('\n');
    Ok(out)
}

pub fn decode_report(text: &str) -> Result<ConceptReport> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let (last, body) = lines
        .split_last()
        .ok_or_else(|| Error::Malformed("empty report".into()))?;
    let summary: SummaryLine = serde_json::from_str(last).map_err(json_err)?;
    let neurons = body
        .iter()
        .map(|l| serde_json::from_str::<NeuronRecord>(l).map_err(json_err))
        .collect::<Result<Vec<_>>>()?;
    let s = summary.summary;
    if neurons.len() != s.hidden || neurons.iter().enumerate().any(|(i, n)| n.neuron != i) {
        return Err(Error::Malformed(format!(
            "summary declares {} neurons, body disagrees",
            s.hidden
        )));
    }
    let report = ConceptReport {
        neurons,
        top_m: s.top_m,
        intra_similarity: s.intra_similarity,
        inter_similarity: s.inter_similarity,
    };
    if report.dead_count() != s.dead_count {
        return Err(Error::Malformed("dead count disagrees with neuron records".into()));
    }
    Ok(report)
}

pub fn save_report(report: &ConceptReport, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), encode_report(report)?.as_bytes())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ConceptReport> {
    decode_report(&fs::read_to_string(path)?)
}
