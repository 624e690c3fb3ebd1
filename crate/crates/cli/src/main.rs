use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use denbe::eval::{
    emit_report, format_manifest, generate_corpus, measure_rtf, read_manifest, read_report, run_corpus, summarize,
    write_timing, CorpusSpec, GroupKey, ReportFormat,
};
use denbe::isim::{render_reverberant, simulate_air, RoomSpec};
use denbe::mixer::{generate_noise, mix_at_snr, synthetic_speech};
use denbe::signal::{read_wav, write_wav, WavFormat, Window};
use denbe::{Audio, DbClamp, DenbeConfig, Estimator, NoiseKind, Variant};

#[derive(Parser)]
#[command(name = "denbe", version, about = "Blind DRR estimation with a null-steered beamformer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a room simulation, or a whole synthetic evaluation corpus.
    Simulate(SimulateArgs),
    /// Estimate the DRR of a two-channel recording.
    Estimate(EstimateArgs),
    /// Run the estimator over a manifest and write a report.
    Evaluate(EvaluateArgs),
    /// Re-summarize the records of a previous evaluation.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
struct EstimatorArgs {
    /// Optional JSON estimator configuration; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    frame_ms: Option<f64>,
    #[arg(long)]
    hop_ms: Option<f64>,
    /// rectangular, hann or sqrt-hann
    #[arg(long)]
    window: Option<Window>,
    /// Microphone spacing in metres.
    #[arg(long)]
    mic_spacing: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    floor_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ceil_db: Option<f64>,
    /// Lowest frequency of the fullband integration range, Hz.
    #[arg(long)]
    range_lo: Option<f64>,
    /// Highest frequency of the fullband integration range, Hz.
    #[arg(long)]
    range_hi: Option<f64>,
    /// Skip inter-channel alignment.
    #[arg(long)]
    no_align: bool,
}

impl EstimatorArgs {
    fn build(&self) -> Result<DenbeConfig> {
        let mut cfg: DenbeConfig = match &self.config {
            Some(p) => {
                serde_json::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
                    .with_context(|| format!("parsing {}", p.display()))?
            }
            None => DenbeConfig::default(),
        };
        if let Some(v) = self.frame_ms {
            cfg.frame_ms = v;
        }
        if let Some(v) = self.hop_ms {
            cfg.hop_ms = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.mic_spacing {
            cfg.mic_spacing = v;
        }
        if self.floor_db.is_some() || self.ceil_db.is_some() {
            cfg.clamp =
                DbClamp::new(self.floor_db.unwrap_or(cfg.clamp.floor_db), self.ceil_db.unwrap_or(cfg.clamp.ceil_db))?;
        }
        if let Some(v) = self.range_lo {
            cfg.range_hz.0 = v;
        }
        if let Some(v) = self.range_hi {
            cfg.range_hz.1 = v;
        }
        if self.no_align {
            cfg.align = false;
        }
        Ok(cfg)
    }
}

fn parse_list<T: std::str::FromStr<Err = denbe::Error>>(s: &str) -> Result<Vec<T>> {
    let v = s.split(',').filter(|p| !p.trim().is_empty()).map(|p| p.parse::<T>()).collect::<Result<Vec<_>, _>>()?;
    if v.is_empty() {
        bail!("empty list '{s}'");
    }
    Ok(v)
}

#[derive(Args)]
struct SimulateArgs {
    /// Write the synthetic evaluation corpus and its manifest into this directory.
    #[arg(long, conflicts_with_all = ["room", "out"])]
    corpus: Option<PathBuf>,
    /// Room description file (key = value lines).
    #[arg(long, required_unless_present = "corpus")]
    room: Option<PathBuf>,
    /// Dry mono source; synthetic speech when omitted.
    #[arg(long)]
    speech: Option<PathBuf>,
    /// Length of the synthetic source in seconds.
    #[arg(long, default_value_t = 8.0)]
    duration: f64,
    /// Additive noise: white, pink or babble.
    #[arg(long, requires = "snr")]
    noise: Option<NoiseKind>,
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output multichannel WAV.
    #[arg(long, required_unless_present = "corpus")]
    out: Option<PathBuf>,
    /// Also write each microphone's impulse response here.
    #[arg(long)]
    air_out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Two-channel WAV recording.
    input: PathBuf,
    /// Comma-separated variants among C, D, E, F, G.
    #[arg(long, default_value = "E")]
    variants: String,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Manifest: one `input truth noise snr` line per trial.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "C,D,E,F,G")]
    variants: String,
    /// Output directory for report files.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated formats among csv, json, plotdata.
    #[arg(long, default_value = "csv,json,plotdata")]
    format: String,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    estimator: EstimatorArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json written by `evaluate`.
    input: PathBuf,
    /// Comma-separated grouping among variant, snr, noise, band.
    #[arg(long, default_value = "variant,snr")]
    group_by: String,
    #[arg(long, default_value = "csv,plotdata")]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

fn parse_group(s: &str) -> Result<Vec<GroupKey>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| match p.trim().to_ascii_lowercase().as_str() {
            "variant" => Ok(GroupKey::Variant),
            "snr" => Ok(GroupKey::Snr),
            "noise" => Ok(GroupKey::Noise),
            "band" => Ok(GroupKey::Band),
            other => bail!("unknown grouping '{other}'"),
        })
        .collect()
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    if let Some(dir) = &args.corpus {
        let spec = CorpusSpec { seed: args.seed, duration_secs: args.duration, ..CorpusSpec::default() };
        let entries = generate_corpus(&spec, dir)?;
        let manifest = dir.join("manifest.txt");
        std::fs::write(&manifest, format_manifest(&entries))?;
        println!("{} trials, manifest {}", entries.len(), manifest.display());
        return Ok(());
    }
    let (room_path, out) =
        (args.room.as_deref().unwrap_or(Path::new("")), args.out.as_deref().unwrap_or(Path::new("")));
    let text = std::fs::read_to_string(room_path).with_context(|| format!("reading {}", room_path.display()))?;
    let room = RoomSpec::from_config_str(&text)?;
    let fs = room.sample_rate;
    let dry: Audio = match &args.speech {
        Some(p) => {
            let a = read_wav::<f64>(p)?;
            if a.sample_rate() != fs {
                bail!("source is {} Hz but the room is simulated at {fs} Hz", a.sample_rate());
            }
            a.select(&[0])?
        }
        None => {
            if !args.duration.is_finite() || args.duration <= 0.0 {
                bail!("duration must be positive");
            }
            let len = (args.duration * f64::from(fs)).round() as usize;
            Audio::mono(synthetic_speech(len, fs, args.seed), fs)?
        }
    };
    let wet = render_reverberant(&room, &dry)?.slice(0, dry.len())?;
    let mixed = match (args.noise, args.snr) {
        (Some(kind), Some(snr)) => {
            let noise: Audio =
                generate_noise(kind, Some(&room), wet.num_channels(), wet.len(), fs, args.seed.wrapping_add(1))?;
            mix_at_snr(&wet, &noise, snr)?
        }
        _ => wet,
    };
    let peak = mixed.peak();
    let mixed = if peak > 0.0 { mixed.scaled(0.5 / peak) } else { mixed };
    write_wav(out, &mixed, WavFormat::Float32)?;
    if let Some(p) = &args.air_out {
        let airs = simulate_air::<f64>(&room)?;
        let len = airs.iter().map(|a| a.len()).max().unwrap_or(0);
        let chans = airs
            .iter()
            .map(|a| {
                let mut t = a.taps().to_vec();
                t.resize(len, 0.0);
                t
            })
            .collect();
        write_wav(p, &Audio::new(chans, fs)?, WavFormat::Float32)?;
    }
    Ok(())
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let variants: Vec<Variant> = parse_list(&args.variants)?;
    let config = args.estimator.build()?;
    let audio = read_wav::<f64>(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let denbe = Estimator::new(config, audio.sample_rate())?;
    let mut results = Vec::new();
    for v in variants {
        results.push(denbe.estimate(&audio, v)?);
    }
    println!("{}", serde_json::to_string_pretty(&results)?);
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let variants: Vec<Variant> = parse_list(&args.variants)?;
    let formats: Vec<ReportFormat> = parse_list(&args.format)?;
    let config = args.estimator.build()?;
    // validate once up front so a bad configuration fails before any work
    Estimator::new(config.clone(), 16000)?;
    if args.workers == Some(0) {
        bail!("workers must be at least 1");
    }
    let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let entries = read_manifest(&args.manifest)?;
    let records = run_corpus(&entries, &variants, &config, workers)?;
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    let mut group = vec![GroupKey::Variant, GroupKey::Snr];
    if entries.iter().any(|e| e.noise.is_some()) {
        group.push(GroupKey::Noise);
    }
    let mut summaries = summarize(&records, &group);
    if variants.iter().any(|v| v.is_subband()) {
        summaries.extend(summarize(&records, &[GroupKey::Variant, GroupKey::Band]));
    }
    let mut written = emit_report(&args.out, &summaries, &records, &formats)?;
    written.push(write_timing(&args.out, &records)?);
    for p in &written {
        println!("wrote {}", p.display());
    }
    for v in &variants {
        if let Ok(rtf) = measure_rtf(&records, *v) {
            println!("RTF {v}: {rtf:.4}");
        }
    }
    if failed > 0 {
        eprintln!("{failed} of {} trials failed; see records", records.len());
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let group = parse_group(&args.group_by)?;
    let formats: Vec<ReportFormat> = parse_list(&args.format)?;
    let rep = read_report(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let summaries = summarize(&rep.records, &group);
    for p in emit_report(&args.out, &summaries, &rep.records, &formats)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
