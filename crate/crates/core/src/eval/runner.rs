//! Batch evaluation over a manifest with per-trial CPU accounting.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Variant;
use crate::ground_truth::{compute_drr, compute_subband_drr, AcousticImpulseResponse, SubbandTruth};
use crate::mixer::NoiseKind;
use crate::pipeline::{Denbe, DenbeConfig, DrrResult};
use crate::signal::read_wav;

use super::manifest::{ManifestEntry, Truth};

/// Timing of one estimator call. Kept apart from the deterministic fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub cpu_seconds: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: String,
    pub variant: Variant,
    pub noise: Option<NoiseKind>,
    pub snr_db: Option<f64>,
    pub estimate: Option<DrrResult>,
    pub truth_db: Option<f64>,
    pub truth_bands: Option<SubbandTruth>,
    /// Estimate minus truth, when both exist and the truth is finite.
    pub error_db: Option<f64>,
    /// Per-band error aligned with the estimate's bands.
    pub band_error_db: Option<Vec<Option<f64>>>,
    pub audio_seconds: f64,
    /// Failure message; the other result fields are empty when set.
    pub failure: Option<String>,
    #[serde(skip)]
    pub timing: Timing,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

/// CPU time consumed by the calling thread.
pub fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

struct LoadedTruth {
    fullband: Option<f64>,
    air: Option<AcousticImpulseResponse<f64>>,
}

fn load_truth(truth: &Truth) -> Result<LoadedTruth> {
    match truth {
        Truth::Value(db) => Ok(LoadedTruth { fullband: Some(*db), air: None }),
        Truth::Air(path) => {
            let audio = read_wav::<f64>(path)?;
            let air = AcousticImpulseResponse::new(audio.channel(0).to_vec(), audio.sample_rate())?;
            Ok(LoadedTruth { fullband: Some(compute_drr(&air)), air: Some(air) })
        }
    }
}

fn failed(entry: &ManifestEntry, variant: Variant, err: &Error) -> TrialRecord {
    TrialRecord {
        id: entry.id(),
        variant,
        noise: entry.noise,
        snr_db: entry.snr_db,
        estimate: None,
        truth_db: None,
        truth_bands: None,
        error_db: None,
        band_error_db: None,
        audio_seconds: 0.0,
        failure: Some(err.to_string()),
        timing: Timing::default(),
    }
}

fn run_entry(entry: &ManifestEntry, variants: &[Variant], config: &DenbeConfig) -> Vec<TrialRecord> {
    let setup = (|| -> Result<_> {
        let audio = read_wav::<f64>(&entry.input)?;
        let truth = load_truth(&entry.truth)?;
        let denbe = Denbe::<f64>::new(config.clone(), audio.sample_rate())?;
        Ok((audio, truth, denbe))
    })();
    let (audio, truth, denbe) = match setup {
        Ok(s) => s,
        Err(e) => {
            log::warn!("{}: {e}", entry.input.display());
            return variants.iter().map(|&v| failed(entry, v, &e)).collect();
        }
    };
    let mut bands_cache: Option<Result<SubbandTruth, String>> = None;
    variants
        .iter()
        .map(|&variant| {
            let (cpu0, wall0) = (thread_cpu_seconds(), Instant::now());
            let result = denbe.estimate(&audio, variant);
            let timing = Timing {
                cpu_seconds: (thread_cpu_seconds() - cpu0).max(0.0),
                wall_seconds: wall0.elapsed().as_secs_f64(),
            };
            let estimate = match result {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("{} variant {variant}: {e}", entry.input.display());
                    return failed(entry, variant, &e);
                }
            };
            let truth_db = truth.fullband.filter(|t| !t.is_nan());
            let error_db = truth_db.filter(|t| t.is_finite()).map(|t| estimate.fullband_db - t);
            let (truth_bands, band_error_db) = match (&estimate.per_band_db, &truth.air) {
                (Some(est), Some(air)) => {
                    let bands = bands_cache
                        .get_or_insert_with(|| compute_subband_drr(air, denbe.grid()).map_err(|e| e.to_string()));
                    match bands {
                        Ok(tb) => {
                            let errs = est
                                .iter()
                                .enumerate()
                                .map(|(i, &e)| (estimate.band_valid[i] && tb.valid[i]).then(|| e - tb.db[i]))
                                .collect();
                            (Some(tb.clone()), Some(errs))
                        }
                        Err(msg) => {
                            log::warn!("{}: band truth unavailable: {msg}", entry.input.display());
                            (None, None)
                        }
                    }
                }
                _ => (None, None),
            };
            TrialRecord {
                id: entry.id(),
                variant,
                noise: entry.noise,
                snr_db: entry.snr_db,
                estimate: Some(estimate),
                truth_db,
                truth_bands,
                error_db,
                band_error_db,
                audio_seconds: audio.duration_secs(),
                failure: None,
                timing,
            }
        })
        .collect()
}

/// One record per (entry, variant), in manifest order. Trials run on
/// `workers` threads; unreadable or failing files yield failure records.
pub fn run_corpus(
    entries: &[ManifestEntry],
    variants: &[Variant],
    config: &DenbeConfig,
    workers: usize,
) -> Result<Vec<TrialRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        entries.par_iter().map(|e| run_entry(e, variants, config)).collect::<Vec<_>>().into_iter().flatten().collect()
    }))
}

/// Total CPU time over total audio duration for `variant`.
pub fn measure_rtf(records: &[TrialRecord], variant: Variant) -> Result<f64> {
    let (cpu, audio, n) = records
        .iter()
        .filter(|r| r.variant == variant && r.is_ok())
        .fold((0.0, 0.0, 0usize), |(c, a, n), r| (c + r.timing.cpu_seconds, a + r.audio_seconds, n + 1));
    if n == 0 {
        return Err(Error::Domain(format!("no completed records for variant {variant}")));
    }
    if audio <= 0.0 {
        return Err(Error::Domain("total audio duration is zero".into()));
    }
    Ok(cpu / audio)
}
