//! Report files with stable column order. Timing goes to its own file so
//! that everything else is byte-identical across runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimator::Variant;

use super::runner::{measure_rtf, Timing, TrialRecord};
use super::stats::ErrorSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Plotdata,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "plotdata" => Ok(ReportFormat::Plotdata),
            other => Err(crate::Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

pub const SUMMARY_HEADER: &str = "variant,snr_db,noise,band_hz,count,median,q25,q75,whisker_low,whisker_high";
pub const RECORD_HEADER: &str = "id,variant,noise,snr_db,estimate_db,truth_db,error_db,usable_bins,lag,status";

/// Deterministic part of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub summaries: Vec<ErrorSummary>,
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub trials: Vec<TrialTiming>,
    pub rtf: Vec<(Variant, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTiming {
    pub id: String,
    pub variant: Variant,
    pub audio_seconds: f64,
    #[serde(flatten)]
    pub timing: Timing,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn summaries_csv(summaries: &[ErrorSummary]) -> String {
    let mut s = format!("{SUMMARY_HEADER}\n");
    for e in summaries {
        let c = &e.condition;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            opt(c.variant),
            opt(c.snr_db),
            opt(c.noise),
            opt(c.band_hz),
            e.count,
            e.median,
            e.q25,
            e.q75,
            e.whisker_low,
            e.whisker_high
        );
    }
    s
}

pub fn records_csv(records: &[TrialRecord]) -> String {
    let mut s = format!("{RECORD_HEADER}\n");
    for r in records {
        let est = r.estimate.as_ref();
        let status = r.failure.as_deref().map_or("ok".to_string(), |f| format!("error: {f}"));
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.id),
            r.variant,
            opt(r.noise),
            opt(r.snr_db),
            opt(est.map(|e| e.fullband_db)),
            opt(r.truth_db),
            opt(r.error_db),
            opt(est.map(|e| e.usable_bins)),
            opt(est.map(|e| e.lag)),
            csv_field(&status)
        );
    }
    s
}

/// One row per condition: label and the five box-plot values.
pub fn plotdata(summaries: &[ErrorSummary]) -> String {
    let mut s = String::from("condition\twhisker_low\tq25\tmedian\tq75\twhisker_high\tcount\n");
    for e in summaries {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.condition.label(),
            e.whisker_low,
            e.q25,
            e.median,
            e.q75,
            e.whisker_high,
            e.count
        );
    }
    s
}

pub fn timing_report(records: &[TrialRecord]) -> TimingReport {
    let mut variants: Vec<Variant> = records.iter().map(|r| r.variant).collect();
    variants.sort();
    variants.dedup();
    TimingReport {
        trials: records
            .iter()
            .map(|r| TrialTiming {
                id: r.id.clone(),
                variant: r.variant,
                audio_seconds: r.audio_seconds,
                timing: r.timing,
            })
            .collect(),
        rtf: variants.into_iter().filter_map(|v| measure_rtf(records, v).ok().map(|x| (v, x))).collect(),
    }
}

/// Writes the requested formats into `dir` and returns the written paths.
pub fn emit_report(
    dir: &Path,
    summaries: &[ErrorSummary],
    records: &[TrialRecord],
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut write = |name: &str, content: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, content)?;
        written.push(path);
        Ok(())
    };
    for format in formats {
        match format {
            ReportFormat::Csv => {
                write("summary.csv", summaries_csv(summaries))?;
                write("records.csv", records_csv(records))?;
            }
            ReportFormat::Json => {
                let report = Report { summaries: summaries.to_vec(), records: records.to_vec() };
                write("report.json", serde_json::to_string_pretty(&report)? + "\n")?;
            }
            ReportFormat::Plotdata => write("plotdata.tsv", plotdata(summaries))?,
        }
    }
    Ok(written)
}

/// Writes `timing.json`, the only non-deterministic report file.
pub fn write_timing(dir: &Path, records: &[TrialRecord]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("timing.json");
    std::fs::write(&path, serde_json::to_string_pretty(&timing_report(records))? + "\n")?;
    Ok(path)
}

pub fn read_report(path: &Path) -> Result<Report> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
