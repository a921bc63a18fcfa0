use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::prompts::{PromptCatalog, Task};
use super::protocol::{build_requests, SlmBackend};
use super::window::SlidingWindow;
use crate::attribution::{smooth_tags, tag_record, SpeakerSpan, Tag, TaggedChunk, TaggerConfig};
use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::beamformer::{apply_beams, design_beams};
use crate::dsp::StftParams;
use crate::error::{Error, Result};
use crate::metrics::{si_sdr, SeparationScores};
use crate::scene::{ArrayGeometry, Scene};
use crate::separator::{ChunkInput, OracleRefs, SeparatorBackend};
use crate::speaker::Speaker;
use crate::CHUNK_SAMPLES;

/// Which single channel feeds separation and the SLM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChannel {
    Mic(usize),
    MouthBeam,
}

impl Default for ReferenceChannel {
    fn default() -> Self {
        ReferenceChannel::Mic(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamConfig {
    pub tagger: TaggerConfig,
    pub stft: StftParams,
    /// Speech chunks between request pairs.
    pub min_interval_chunks: usize,
    pub reference: ReferenceChannel,
    pub wearer_lang: String,
    pub partner_lang: String,
    pub prompts: PromptCatalog,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            tagger: TaggerConfig::default(),
            stft: StftParams::default(),
            min_interval_chunks: 1,
            reference: ReferenceChannel::default(),
            wearer_lang: "en".into(),
            partner_lang: "es".into(),
            prompts: PromptCatalog::default(),
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        self.tagger.validate()?;
        self.stft.validate()?;
        self.prompts.validate()?;
        if self.min_interval_chunks == 0 {
            return Err(Error::validation("min_interval_chunks must be at least 1"));
        }
        Ok(())
    }
}

/// Single-channel stream input, optionally with clean references for the
/// oracle separator.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamInput {
    pub scene_id: Option<String>,
    pub reference: Vec<f64>,
    pub oracle: Option<(Vec<f64>, Vec<f64>)>,
}

fn reference_of(clip: &AudioClip, which: ReferenceChannel, geometry: &ArrayGeometry, params: StftParams) -> Result<Vec<f64>> {
    clip.require_rate(SAMPLE_RATE)?;
    match which {
        ReferenceChannel::Mic(i) if clip.num_channels() == 1 => {
            if i != 0 {
                log::warn!("mono input: using its only channel instead of mic {i}");
            }
            Ok(clip.channel(0).to_vec())
        }
        ReferenceChannel::Mic(i) => {
            if i >= clip.num_channels() {
                return Err(Error::arg(format!("mic {i} out of range for a {}-channel input", clip.num_channels())));
            }
            Ok(clip.channel(i).to_vec())
        }
        ReferenceChannel::MouthBeam => {
            let weights = design_beams(geometry, &[], params)?;
            Ok(apply_beams(clip, &weights)?.into_channels().remove(0))
        }
    }
}

impl StreamInput {
    pub fn from_clip(clip: &AudioClip, cfg: &StreamConfig, geometry: &ArrayGeometry) -> Result<Self> {
        Ok(Self { scene_id: None, reference: reference_of(clip, cfg.reference, geometry, cfg.stft)?, oracle: None })
    }

    pub fn from_scene(scene: &Scene, id: Option<String>, cfg: &StreamConfig, geometry: &ArrayGeometry) -> Result<Self> {
        let r = |c: &AudioClip| reference_of(c, cfg.reference, geometry, cfg.stft);
        Ok(Self {
            scene_id: id,
            reference: r(&scene.mixture)?,
            oracle: Some((r(&scene.clean_wearer)?, r(&scene.clean_partner)?)),
        })
    }

    /// Builds an input from a mixture and its clean references.
    pub fn from_clips(
        id: Option<String>,
        mixture: &AudioClip,
        clean: Option<(&AudioClip, &AudioClip)>,
        cfg: &StreamConfig,
        geometry: &ArrayGeometry,
    ) -> Result<Self> {
        let r = |c: &AudioClip| reference_of(c, cfg.reference, geometry, cfg.stft);
        let reference = r(mixture)?;
        let oracle = match clean {
            Some((w, p)) => {
                let (w, p) = (r(w)?, r(p)?);
                if w.len() != reference.len() || p.len() != reference.len() {
                    return Err(Error::validation("clean references differ in length from the mixture"));
                }
                Some((w, p))
            }
            None => None,
        };
        Ok(Self { scene_id: id, reference, oracle })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub t: f64,
    pub tag: Tag,
    pub task: Task,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamStats {
    pub chunks: usize,
    pub speech_chunks: usize,
    pub requests: usize,
    pub audio_s: f64,
    pub wall_s: f64,
    pub chunks_per_sec: f64,
    /// Processing time over audio time; below 1 is faster than real time.
    pub real_time_factor: f64,
    pub separator_errors: usize,
    pub slm_errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub si_sdr: Option<BTreeMap<Speaker, SeparationScores>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamReport {
    pub events: Vec<StreamEvent>,
    pub tags: Vec<TaggedChunk>,
    pub segments: Vec<SpeakerSpan>,
    pub errors: Vec<String>,
    pub stats: StreamStats,
}

struct Runner<'a> {
    cfg: &'a StreamConfig,
    input: &'a StreamInput,
    slm: &'a mut dyn SlmBackend,
    window: SlidingWindow,
    next_id: u64,
    pending: usize,
    fresh_from: Option<f64>,
    last_speech: Option<(Tag, f64)>,
    report: StreamReport,
}

impl Runner<'_> {
    fn tag_chunk(&mut self, j: usize, wearer: &[f64], partner: &[f64]) -> Result<()> {
        let total = self.input.reference.len();
        let s = j * CHUNK_SAMPLES;
        let e = (s + CHUNK_SAMPLES).min(total);
        let rec = tag_record(j, s, SAMPLE_RATE, &wearer[s..e], &partner[s..e], &self.cfg.tagger)?;
        let (tag, end, start) = (rec.tag, rec.end, rec.start);
        self.report.tags.push(rec);
        if tag == Tag::Silence {
            return Ok(());
        }
        self.report.stats.speech_chunks += 1;
        self.window.push_chunk(&self.input.reference[s..e], start)?;
        self.pending += 1;
        self.fresh_from.get_or_insert(start);
        self.last_speech = Some((tag, end));
        if self.pending >= self.cfg.min_interval_chunks {
            self.fire(tag, end);
        }
        Ok(())
    }

    fn fire(&mut self, tag: Tag, t: f64) {
        self.pending = 0;
        let langs = (self.cfg.wearer_lang.as_str(), self.cfg.partner_lang.as_str());
        let mut requests = match build_requests(&self.window, tag, &self.cfg.prompts, langs, &mut self.next_id) {
            Ok(r) => r,
            Err(e) => {
                self.record_error(format!("t={t:.2}s: {e}"), true);
                return;
            }
        };
        let fresh = self.fresh_from.take();
        for r in &mut requests {
            r.scene = self.input.scene_id.clone();
            r.fresh_from = fresh;
        }
        self.report.stats.requests += requests.len();
        let responses = match self.slm.complete(&requests) {
            Ok(r) => r,
            Err(e) => {
                self.record_error(format!("t={t:.2}s: SLM request failed: {e}"), true);
                return;
            }
        };
        for (req, resp) in requests.iter().zip(responses) {
            if !resp.text.trim().is_empty() {
                self.report.events.push(StreamEvent {
                    id: self.input.scene_id.clone(),
                    t,
                    tag,
                    task: req.task,
                    text: resp.text.trim().to_string(),
                });
            }
            self.window.append_history(&resp.text);
        }
    }

    fn record_error(&mut self, msg: String, slm: bool) {
        log::warn!("{msg}");
        if slm {
            self.report.stats.slm_errors += 1;
        } else {
            self.report.stats.separator_errors += 1;
        }
        self.report.errors.push(msg);
    }
}

/// Runs the chunked cascade: separate, re-align separated output to the
/// chunk grid, tag, then for speech chunks push to the window and send
/// the transcribe/translate pair. Backend failures are recorded and the
/// stream continues; a failed separator chunk falls back to treating the
/// mixture as wearer speech.
pub fn run_stream(
    input: &StreamInput,
    separator: &mut dyn SeparatorBackend,
    slm: &mut dyn SlmBackend,
    cfg: &StreamConfig,
) -> Result<StreamReport> {
    cfg.validate()?;
    let started = Instant::now();
    let total = input.reference.len();
    if let Some((w, p)) = &input.oracle {
        if w.len() != total || p.len() != total {
            return Err(Error::arg("oracle references differ in length from the input"));
        }
    }
    let n_chunks = total.div_ceil(CHUNK_SAMPLES);
    let mut runner = Runner {
        cfg,
        input,
        slm,
        window: SlidingWindow::new(SAMPLE_RATE),
        next_id: 0,
        pending: 0,
        fresh_from: None,
        last_speech: None,
        report: StreamReport::default(),
    };
    let mut wearer: Vec<f64> = Vec::with_capacity(total + CHUNK_SAMPLES);
    let mut partner: Vec<f64> = Vec::with_capacity(total + CHUNK_SAMPLES);
    let mut next_tag = 0;

    for k in 0..n_chunks {
        let s = k * CHUNK_SAMPLES;
        let e = (s + CHUNK_SAMPLES).min(total);
        let mixture = &input.reference[s..e];
        let oracle = input.oracle.as_ref().map(|(w, p)| OracleRefs { wearer: &w[s..e], partner: &p[s..e] });
        match separator.push(&ChunkInput { index: k, mixture, oracle }) {
            Ok(out) => {
                wearer.extend(out.wearer);
                partner.extend(out.partner);
            }
            Err(err) => {
                runner.record_error(format!("chunk {k}: separator failed, passing through: {err}"), false);
                wearer.resize(s, 0.0);
                partner.resize(s, 0.0);
                wearer.extend_from_slice(mixture);
                partner.resize(e, 0.0);
            }
        }
        while next_tag < n_chunks && wearer.len() >= ((next_tag + 1) * CHUNK_SAMPLES).min(total) {
            runner.tag_chunk(next_tag, &wearer, &partner)?;
            next_tag += 1;
        }
    }
    match separator.finish() {
        Ok(out) => {
            wearer.extend(out.wearer);
            partner.extend(out.partner);
        }
        Err(e) => runner.record_error(format!("separator flush failed: {e}"), false),
    }
    wearer.resize(total, 0.0);
    partner.resize(total, 0.0);
    while next_tag < n_chunks {
        runner.tag_chunk(next_tag, &wearer, &partner)?;
        next_tag += 1;
    }
    if runner.pending > 0 {
        if let Some((tag, t)) = runner.last_speech {
            runner.fire(tag, t);
        }
    }

    let mut report = runner.report;
    report.segments = smooth_tags(&report.tags, &cfg.tagger)?;
    report.stats.si_sdr = match &input.oracle {
        Some((cw, cp)) => {
            let mut m = BTreeMap::new();
            for (s, clean, est) in [(Speaker::Wearer, cw, &wearer), (Speaker::Partner, cp, &partner)] {
                if clean.iter().any(|&v| v != 0.0) {
                    m.insert(
                        s,
                        SeparationScores { mixture: si_sdr(clean, &input.reference)?, separated: si_sdr(clean, est)? },
                    );
                }
            }
            Some(m)
        }
        None => None,
    };
    let wall = started.elapsed().as_secs_f64();
    let audio_s = total as f64 / f64::from(SAMPLE_RATE);
    report.stats.chunks = n_chunks;
    report.stats.audio_s = audio_s;
    report.stats.wall_s = wall;
    report.stats.chunks_per_sec = if wall > 0.0 { n_chunks as f64 / wall } else { 0.0 };
    report.stats.real_time_factor = if audio_s > 0.0 { wall / audio_s } else { 0.0 };
    Ok(report)
}

/// Groups events into transcript and translation runs for scoring.
pub fn events_to_hypothesis(events: &[StreamEvent]) -> crate::metrics::Hypothesis {
    let mut hyp = crate::metrics::Hypothesis::default();
    for ev in events {
        let Some(s) = ev.tag.speaker() else { continue };
        match ev.task {
            Task::Transcribe => hyp.transcripts.push((s, ev.text.clone())),
            Task::Translate => hyp.translations.push((s, ev.text.clone())),
        }
    }
    hyp
}
