use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use dirspeech_core::audio::read_manifest;
use dirspeech_core::metrics::{score_corpus, Hypothesis, SeparationScores};
use dirspeech_core::slm::{events_to_hypothesis, StreamEvent, StreamStats};
use dirspeech_core::sot::{parse_sot_str, ParseMode};
use dirspeech_core::{Error, ManifestEntry, Speaker};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::config::RunConfig;
use crate::exit::validation;
use crate::output::write_json_pretty;

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Reference scene manifest (JSONL).
    #[arg(long)]
    manifest: PathBuf,
    /// Event log written by `stream`.
    #[arg(long, conflicts_with = "sot", required_unless_present = "sot")]
    events: Option<PathBuf>,
    /// SOT outputs: JSONL of `{"id", "transcript", "translation"}`.
    #[arg(long)]
    sot: Option<PathBuf>,
    /// `stats.json` from `stream`, for separation SI-SDR.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Reject malformed SOT strings instead of repairing them.
    #[arg(long)]
    strict: bool,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let file = File::open(path).map_err(Error::Io).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
            .with_context(|| path.display().to_string())?;
        out.push(v);
    }
    Ok(out)
}

fn single_id(entries: &[ManifestEntry]) -> anyhow::Result<String> {
    match entries {
        [only] => Ok(only.id.clone()),
        _ => Err(validation("events without an `id` can only be scored against a one-scene manifest")),
    }
}

fn hypotheses_from_events(path: &Path, entries: &[ManifestEntry]) -> anyhow::Result<BTreeMap<String, Hypothesis>> {
    let events: Vec<StreamEvent> = read_jsonl(path)?;
    let mut grouped: BTreeMap<String, Vec<StreamEvent>> = BTreeMap::new();
    for ev in events {
        let id = match &ev.id {
            Some(id) => id.clone(),
            None => single_id(entries)?,
        };
        grouped.entry(id).or_default().push(ev);
    }
    Ok(grouped.into_iter().map(|(id, evs)| (id, events_to_hypothesis(&evs))).collect())
}

#[derive(Deserialize)]
struct SotLine {
    #[serde(default)]
    id: Option<String>,
    #[serde(alias = "target")]
    transcript: String,
    #[serde(default)]
    translation: Option<String>,
    // accepted so `sot` command output scores directly
    #[serde(default)]
    #[allow(dead_code)]
    prompt: Option<String>,
}

fn hypotheses_from_sot(path: &Path, entries: &[ManifestEntry], strict: bool) -> anyhow::Result<BTreeMap<String, Hypothesis>> {
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let lines: Vec<SotLine> = read_jsonl(path)?;
    let mut out = BTreeMap::new();
    for line in lines {
        let id = match line.id {
            Some(id) => id,
            None => single_id(entries)?,
        };
        let parse = |text: &str| -> anyhow::Result<Vec<(Speaker, String)>> {
            let parsed = parse_sot_str(text, mode).with_context(|| format!("scene {id}"))?;
            for w in &parsed.warnings {
                log::warn!("{id}: {w}");
            }
            Ok(parsed.runs)
        };
        let hyp = Hypothesis {
            transcripts: parse(&line.transcript)?,
            translations: match &line.translation {
                Some(t) => parse(t)?,
                None => Vec::new(),
            },
        };
        if out.insert(id.clone(), hyp).is_some() {
            return Err(validation(format!("scene {id} appears twice in {}", path.display())));
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct StatsFile {
    scenes: BTreeMap<String, StreamStats>,
}

fn separation_from_stats(path: &Path) -> anyhow::Result<BTreeMap<String, BTreeMap<Speaker, SeparationScores>>> {
    let text = std::fs::read_to_string(path).map_err(Error::Io).with_context(|| format!("reading {}", path.display()))?;
    let stats: StatsFile =
        serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    Ok(stats.scenes.into_iter().filter_map(|(id, s)| s.si_sdr.map(|v| (id, v))).collect())
}

pub fn run(cfg: RunConfig, args: ScoreArgs) -> anyhow::Result<()> {
    let entries = read_manifest(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let hyps = match (&args.events, &args.sot) {
        (Some(p), _) => hypotheses_from_events(p, &entries)?,
        (None, Some(p)) => hypotheses_from_sot(p, &entries, args.strict)?,
        (None, None) => return Err(validation("score needs --events or --sot")),
    };
    let separation = args.stats.as_deref().map(separation_from_stats).transpose()?;
    let report = score_corpus(&entries, &hyps, separation.as_ref())?;
    let path = write_json_pretty(cfg.out.join("score.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    eprintln!("wrote {}", path.display());
    Ok(())
}
