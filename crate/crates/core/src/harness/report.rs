use std::fmt::Write as _;
use std::str::FromStr;

use super::{CategoryReport, RunReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?} (csv, json, markdown)")),
        }
    }
}

pub const CSV_HEADER: &str =
    "category_id,category_name,samples,accuracy,mean_iou,angle_error_deg,detection_rate,mean_gt_rows,mean_pred_rows";

fn angle(c: &CategoryReport) -> String {
    c.mean_angle_error.map_or_else(|| "NA".to_string(), |e| format!("{e:.4}"))
}

fn csv_row(c: &CategoryReport) -> [String; 9] {
    if c.sample_count == 0 {
        let na = || "NA".to_string();
        return [c.category_id.clone(), c.category_name.clone(), "0".into(), na(), na(), na(), na(), na(), na()];
    }
    [
        c.category_id.clone(),
        c.category_name.clone(),
        c.sample_count.to_string(),
        format!("{:.2}", c.mean_accuracy * 100.0),
        format!("{:.4}", c.mean_iou),
        angle(c),
        format!("{:.4}", c.detection_rate),
        format!("{:.2}", c.mean_gt_rows),
        format!("{:.2}", c.mean_pred_rows),
    ]
}

fn emit_csv(report: &RunReport) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for c in report.per_category.iter().chain(std::iter::once(&report.overall)) {
        w.write_record(csv_row(c)).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Category table with accuracy as a percentage and IoU/angle error to four
/// decimals, followed by the overall row.
fn emit_markdown(report: &RunReport) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("| Category Name | Accuracy | Mean IoU | Angle Error |\n");
    out.push_str("|---|---|---|---|\n");
    for c in report.per_category.iter().chain(std::iter::once(&report.overall)) {
        if c.sample_count == 0 {
            let _ = writeln!(out, "| {} | NA | NA | NA |", c.category_name);
            continue;
        }
        let err = c.mean_angle_error.map_or_else(|| "NA".to_string(), |e| format!("{e:.4}°"));
        let _ =
            writeln!(out, "| {} | {:.2}% | {:.4} | {} |", c.category_name, c.mean_accuracy * 100.0, c.mean_iou, err);
    }
    if !report.failures.is_empty() {
        let _ = writeln!(out, "\n{} sample(s) failed to evaluate.", report.failures.len());
    }
    for note in &report.notes {
        let _ = writeln!(out, "\nNote: {note}");
    }
    out.into_bytes()
}

pub fn emit_report(report: &RunReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => emit_csv(report),
        ReportFormat::Markdown => emit_markdown(report),
        ReportFormat::Json => {
            let mut v = serde_json::to_vec_pretty(report).expect("report serializes");
            v.push(b'\n');
            v
        }
    }
}

pub fn parse_report_json(bytes: &[u8]) -> Result<RunReport, serde_json::Error> {
    serde_json::from_slice(bytes)
}
