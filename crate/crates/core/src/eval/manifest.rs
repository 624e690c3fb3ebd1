//! Corpus manifests: one trial per line,
//!
//! ```text
//! # input            truth             noise   snr_db
//! r0p0_white_18.wav  r0p0_air.wav      white   18
//! recording.wav      truth:-3.5        -       -
//! ```
//!
//! Relative paths resolve against the manifest's directory. `-` marks an
//! unknown noise kind or SNR.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixer::NoiseKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    /// Impulse response of the reference microphone.
    Air(PathBuf),
    /// Precomputed fullband DRR in dB.
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub input: PathBuf,
    pub truth: Truth,
    pub noise: Option<NoiseKind>,
    pub snr_db: Option<f64>,
}

impl ManifestEntry {
    /// File id used in records: the input path without its extension.
    /// File stem of the input.
    pub fn id(&self) -> String {
        self.input
            .file_stem()
            .map_or_else(|| self.input.to_string_lossy().into_owned(), |s| s.to_string_lossy().into_owned())
    }

    pub fn resolve(&self, base: &Path) -> Self {
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        Self {
            input: join(&self.input),
            truth: match &self.truth {
                Truth::Air(p) => Truth::Air(join(p)),
                Truth::Value(v) => Truth::Value(*v),
            },
            ..self.clone()
        }
    }
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Manifest { line: n + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let truth = match fields[1].strip_prefix("truth:") {
            Some(v) => Truth::Value(v.parse().map_err(|e| err(format!("bad truth value '{v}': {e}")))?),
            None => Truth::Air(PathBuf::from(fields[1])),
        };
        let noise = match fields[2] {
            "-" => None,
            s => Some(s.parse().map_err(|e: Error| err(e.to_string()))?),
        };
        let snr_db = match fields[3] {
            "-" => None,
            s => Some(s.trim_end_matches("dB").parse().map_err(|e| err(format!("bad SNR '{s}': {e}")))?),
        };
        out.push(ManifestEntry { input: PathBuf::from(fields[0]), truth, noise, snr_db });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_manifest(&std::fs::read_to_string(path)?)?.into_iter().map(|e| e.resolve(base)).collect())
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("# input truth noise snr_db\n");
    for e in entries {
        let truth = match &e.truth {
            Truth::Air(p) => p.display().to_string(),
            Truth::Value(v) => format!("truth:{v}"),
        };
        let noise = e.noise.map_or("-".to_string(), |k| k.to_string());
        let snr = e.snr_db.map_or("-".to_string(), |v| v.to_string());
        let _ = writeln!(s, "{} {truth} {noise} {snr}", e.input.display());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        let text =
            "# header\n\na.wav a_air.wav white 18\nb.wav truth:-3.5 - -  # trailing\nc.wav c_air.wav babble -1dB\n";
        let entries = parse_manifest(text).unwrap();
        assert_eq!(entries.len(), 3);
        assert_eq!(entries[1].truth, Truth::Value(-3.5));
        assert_eq!(entries[1].noise, None);
        assert_eq!(entries[2].snr_db, Some(-1.0));
        assert_eq!(parse_manifest(&format_manifest(&entries)).unwrap(), entries);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_manifest("a.wav b.wav white 18\nx.wav y.wav hum 3\n") {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_manifest("a.wav b.wav white\n").is_err());
        assert!(parse_manifest("a.wav truth:x white 1\n").is_err());
    }

    #[test]
    fn empty_manifest() {
        assert!(parse_manifest("# nothing\n").unwrap().is_empty());
    }

    #[test]
    fn resolves_relative_paths() {
        let e = parse_manifest("a.wav air/a.wav - -\n").unwrap().remove(0).resolve(Path::new("/data"));
        assert_eq!(e.input, PathBuf::from("/data/a.wav"));
        assert_eq!(e.truth, Truth::Air(PathBuf::from("/data/air/a.wav")));
        assert_eq!(e.id(), "a");
    }
}
