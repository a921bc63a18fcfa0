use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use dirspeech_core::attribution::TaggedChunk;
use dirspeech_core::audio::{read_manifest, read_wav};
use dirspeech_core::scene::ArrayGeometry;
use dirspeech_core::separator::{ExternalSeparator, Passthrough, SeparatorBackend, StreamingSeparator};
use dirspeech_core::slm::{run_stream, MockSlm, SlmBackend, SlmClient, StreamConfig, StreamInput, StreamStats};
use dirspeech_core::{Error, ManifestEntry};
use serde::Serialize;

use crate::config::{RunConfig, SeparatorConfig, SlmConfig};
use crate::exit::validation;
use crate::output::{write_json_pretty, AtomicFile};

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// Scene manifest (JSONL) to stream.
    #[arg(long, conflicts_with = "wav")]
    manifest: Option<PathBuf>,
    /// Only stream these scene ids.
    #[arg(long = "scene", requires = "manifest")]
    scenes: Vec<String>,
    /// A single WAV recording to stream.
    #[arg(long)]
    wav: Option<PathBuf>,
    /// Separator backend: oracle, passthrough or an external `host:port`.
    #[arg(long)]
    separator: Option<String>,
    /// SLM backend: oracle, noisy or an external `host:port`.
    #[arg(long)]
    slm: Option<String>,
    /// Substitution rate for the noisy mock.
    #[arg(long)]
    sub_rate: Option<f64>,
}

fn apply_overrides(cfg: &mut RunConfig, args: &StreamArgs) -> anyhow::Result<()> {
    if let Some(s) = &args.separator {
        cfg.separator = match s.as_str() {
            "oracle" => SeparatorConfig::Oracle,
            "passthrough" => SeparatorConfig::Passthrough,
            endpoint => SeparatorConfig::External { endpoint: endpoint.into(), timeout_ms: None },
        };
    }
    if let Some(s) = &args.slm {
        cfg.slm = match s.as_str() {
            "oracle" => SlmConfig::MockOracle,
            "noisy" => SlmConfig::MockNoisy { seed: None, sub_rate: args.sub_rate.unwrap_or(0.1) },
            endpoint => SlmConfig::External { endpoint: endpoint.into(), timeout_ms: None },
        };
    }
    if let Some(rate) = args.sub_rate {
        match &mut cfg.slm {
            SlmConfig::MockNoisy { sub_rate, .. } => *sub_rate = rate,
            _ => return Err(validation("--sub-rate needs the noisy mock SLM")),
        }
    }
    Ok(())
}

struct Job {
    id: String,
    input: StreamInput,
}

fn load_jobs(cfg: &RunConfig, args: &StreamArgs, stream_cfg: &StreamConfig, geometry: &ArrayGeometry) -> anyhow::Result<(Vec<Job>, Vec<ManifestEntry>)> {
    let need_refs = cfg.separator == SeparatorConfig::Oracle;
    if let Some(path) = &args.wav {
        let clip = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
        let id = path.file_stem().map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned());
        let mut input = StreamInput::from_clip(&clip, stream_cfg, geometry)?;
        input.scene_id = Some(id.clone());
        return Ok((vec![Job { id, input }], Vec::new()));
    }
    let Some(path) = &args.manifest else {
        return Err(validation("stream needs --manifest or --wav"));
    };
    let mut entries = read_manifest(path).with_context(|| format!("reading {}", path.display()))?;
    if !args.scenes.is_empty() {
        let missing: Vec<&str> =
            args.scenes.iter().filter(|s| !entries.iter().any(|e| &e.id == *s)).map(String::as_str).collect();
        if !missing.is_empty() {
            return Err(validation(format!("scene ids not in manifest: {}", missing.join(", "))));
        }
        entries.retain(|e| args.scenes.contains(&e.id));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let jobs = entries
        .iter()
        .map(|e| {
            let mix = read_wav(ManifestEntry::resolve(base, &e.wav)).with_context(|| format!("reading {}", e.wav))?;
            let clean = match (&e.clean, need_refs) {
                (Some(c), true) => Some((
                    read_wav(ManifestEntry::resolve(base, &c.wearer)).with_context(|| format!("reading {}", c.wearer))?,
                    read_wav(ManifestEntry::resolve(base, &c.partner)).with_context(|| format!("reading {}", c.partner))?,
                )),
                _ => None,
            };
            let input = StreamInput::from_clips(Some(e.id.clone()), &mix, clean.as_ref().map(|(w, p)| (w, p)), stream_cfg, geometry)
                .with_context(|| format!("scene {}", e.id))?;
            Ok(Job { id: e.id.clone(), input })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    Ok((jobs, entries))
}

fn separator_for(cfg: &RunConfig, job: &Job) -> anyhow::Result<Box<dyn SeparatorBackend>> {
    Ok(match &cfg.separator {
        SeparatorConfig::Oracle if job.input.oracle.is_some() => Box::new(StreamingSeparator::new(cfg.stft)?),
        SeparatorConfig::Oracle => {
            log::warn!("{}: no clean references, separating by passthrough", job.id);
            Box::new(Passthrough)
        }
        SeparatorConfig::Passthrough => Box::new(Passthrough),
        SeparatorConfig::External { endpoint, .. } => Box::new(
            ExternalSeparator::connect_with_timeout(endpoint.as_str(), cfg.separator_timeout())
                .with_context(|| format!("separator service at {endpoint}"))?,
        ),
    })
}

fn slm_for(cfg: &RunConfig, entries: &[ManifestEntry]) -> anyhow::Result<Box<dyn SlmBackend>> {
    Ok(match (&cfg.slm, cfg.mock_mode()) {
        (_, Some(mode)) => Box::new(MockSlm::new(entries.iter().cloned(), mode)),
        (SlmConfig::External { endpoint, .. }, None) => Box::new(
            SlmClient::connect(endpoint.as_str(), cfg.slm_timeout()).with_context(|| format!("SLM service at {endpoint}"))?,
        ),
        _ => unreachable!("mock_mode covers every mock backend"),
    })
}

#[derive(Serialize)]
struct TagLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    chunk: &'a TaggedChunk,
}

#[derive(Serialize)]
struct Totals {
    scenes: usize,
    chunks: usize,
    audio_s: f64,
    wall_s: f64,
    chunks_per_sec: f64,
    real_time_factor: f64,
    errors: usize,
}

#[derive(Serialize)]
struct StatsFile<'a> {
    total: Totals,
    scenes: BTreeMap<&'a str, &'a StreamStats>,
}

pub fn run(mut cfg: RunConfig, args: StreamArgs) -> anyhow::Result<()> {
    apply_overrides(&mut cfg, &args)?;
    cfg.validate()?;
    let stream_cfg = cfg.stream_config();
    let geometry = cfg.geometry()?;
    let (jobs, entries) = load_jobs(&cfg, &args, &stream_cfg, &geometry)?;
    let mut slm = slm_for(&cfg, &entries)?;

    let mut events = AtomicFile::create(cfg.out.join("events.jsonl"))?;
    let mut tags = AtomicFile::create(cfg.out.join("tags.jsonl"))?;
    let mut stats: Vec<(String, StreamStats)> = Vec::new();
    let mut n_errors = 0;
    for job in &jobs {
        let mut sep = separator_for(&cfg, job)?;
        let report = run_stream(&job.input, sep.as_mut(), slm.as_mut(), &stream_cfg)?;
        // a service that answered no request at all is a backend failure
        if report.stats.requests > 0 && report.stats.slm_errors * 2 == report.stats.requests {
            return Err(Error::Backend(format!("{}: {}", job.id, report.errors[0])).into());
        }
        n_errors += report.errors.len();
        for e in &report.events {
            events.json_line(e)?;
        }
        for t in &report.tags {
            tags.json_line(&TagLine { id: &job.id, chunk: t })?;
        }
        let s = &report.stats;
        eprintln!(
            "{}: {} chunks ({} speech), {} events, {:.1} chunks/s, RTF {:.3}",
            job.id,
            s.chunks,
            s.speech_chunks,
            report.events.len(),
            s.chunks_per_sec,
            s.real_time_factor
        );
        stats.push((job.id.clone(), report.stats));
    }
    let audio_s: f64 = stats.iter().map(|(_, s)| s.audio_s).sum();
    let wall_s: f64 = stats.iter().map(|(_, s)| s.wall_s).sum();
    let chunks: usize = stats.iter().map(|(_, s)| s.chunks).sum();
    let total = Totals {
        scenes: stats.len(),
        chunks,
        audio_s,
        wall_s,
        chunks_per_sec: if wall_s > 0.0 { chunks as f64 / wall_s } else { 0.0 },
        real_time_factor: if audio_s > 0.0 { wall_s / audio_s } else { 0.0 },
        errors: n_errors,
    };
    let file = StatsFile { total, scenes: stats.iter().map(|(id, s)| (id.as_str(), s)).collect() };
    events.commit()?;
    tags.commit()?;
    write_json_pretty(cfg.out.join("stats.json"), &file)?;
    Ok(())
}
