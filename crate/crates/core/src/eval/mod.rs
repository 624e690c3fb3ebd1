//! Corpus generation, batch evaluation and reporting.

mod corpus;
mod manifest;
mod report;
mod runner;
mod stats;

pub use corpus::{generate_corpus, source_with_path_difference, CorpusSpec, RoomPreset};
pub use manifest::{format_manifest, parse_manifest, read_manifest, ManifestEntry, Truth};
pub use report::{
    emit_report, plotdata, read_report, records_csv, summaries_csv, timing_report, write_timing, Report, ReportFormat,
    TimingReport, TrialTiming, RECORD_HEADER, SUMMARY_HEADER,
};
pub use runner::{measure_rtf, run_corpus, thread_cpu_seconds, Timing, TrialRecord};
pub use stats::{quartiles, summarize, summarize_values, Condition, ErrorSummary, GroupKey};
