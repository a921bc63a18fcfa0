//! Per-chunk wearer/partner attribution from separated stream energies.
//!
//! A chunk is speech when either separated stream reaches the VAD floor.
//! Speech chunks go to the wearer when `rms_w / (rms_p + eps) > alpha`,
//! otherwise to the partner; a ratio exactly at `alpha` falls to the
//! partner.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dsp::frame_rms;
use crate::error::{Error, Result};
use crate::speaker::Speaker;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaggerConfig {
    pub alpha: f64,
    pub vad_floor: f64,
    pub epsilon: f64,
    pub hangover_chunks: usize,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self { alpha: 1.0, vad_floor: 1e-3, epsilon: 1e-8, hangover_chunks: 1 }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::validation(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.vad_floor >= 0.0) {
            return Err(Error::validation(format!("vad_floor must be >= 0, got {}", self.vad_floor)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::validation(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    Wearer,
    Partner,
    Silence,
}

impl Tag {
    pub fn speaker(self) -> Option<Speaker> {
        match self {
            Tag::Wearer => Some(Speaker::Wearer),
            Tag::Partner => Some(Speaker::Partner),
            Tag::Silence => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Wearer => "wearer",
            Tag::Partner => "partner",
            Tag::Silence => "silence",
        }
    }
}

impl From<Speaker> for Tag {
    fn from(s: Speaker) -> Self {
        match s {
            Speaker::Wearer => Tag::Wearer,
            Speaker::Partner => Tag::Partner,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One line of the tag log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedChunk {
    pub chunk_idx: usize,
    pub start: f64,
    pub end: f64,
    pub tag: Tag,
    pub rms_w: f64,
    pub rms_p: f64,
}

/// A contiguous attributed time span produced by [`smooth_tags`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSpan {
    pub speaker: Speaker,
    pub start: f64,
    pub end: f64,
}

fn check_lengths(wearer: &[f64], partner: &[f64]) -> Result<()> {
    if wearer.len() != partner.len() {
        return Err(Error::arg(format!(
            "separated chunks differ in length ({} vs {})",
            wearer.len(),
            partner.len()
        )));
    }
    Ok(())
}

fn decide(rms_w: f64, rms_p: f64, cfg: &TaggerConfig) -> Tag {
    if rms_w.max(rms_p) < cfg.vad_floor {
        Tag::Silence
    } else if rms_w / (rms_p + cfg.epsilon) > cfg.alpha {
        Tag::Wearer
    } else {
        Tag::Partner
    }
}

pub fn energy_vad(wearer: &[f64], partner: &[f64], cfg: &TaggerConfig) -> Result<bool> {
    check_lengths(wearer, partner)?;
    Ok(frame_rms(wearer).max(frame_rms(partner)) >= cfg.vad_floor)
}

pub fn tag_chunk(wearer: &[f64], partner: &[f64], cfg: &TaggerConfig) -> Result<Tag> {
    check_lengths(wearer, partner)?;
    Ok(decide(frame_rms(wearer), frame_rms(partner), cfg))
}

/// Tags a chunk and records its timing; `start_sample` is the chunk offset.
pub fn tag_record(
    chunk_idx: usize,
    start_sample: usize,
    sample_rate: u32,
    wearer: &[f64],
    partner: &[f64],
    cfg: &TaggerConfig,
) -> Result<TaggedChunk> {
    check_lengths(wearer, partner)?;
    let (rms_w, rms_p) = (frame_rms(wearer), frame_rms(partner));
    let rate = f64::from(sample_rate);
    Ok(TaggedChunk {
        chunk_idx,
        start: start_sample as f64 / rate,
        end: (start_sample + wearer.len()) as f64 / rate,
        tag: decide(rms_w, rms_p, cfg),
        rms_w,
        rms_p,
    })
}

/// Absorbs isolated one-chunk speaker flips and merges runs into spans.
pub fn smooth_tags(chunks: &[TaggedChunk], cfg: &TaggerConfig) -> Result<Vec<SpeakerSpan>> {
    for pair in chunks.windows(2) {
        if pair[1].chunk_idx != pair[0].chunk_idx + 1 || pair[1].start < pair[0].start {
            return Err(Error::arg(format!(
                "tag chunks out of order: {} followed by {}",
                pair[0].chunk_idx, pair[1].chunk_idx
            )));
        }
    }
    let tags: Vec<Tag> = chunks.iter().map(|c| c.tag).collect();
    let mut smoothed = tags.clone();
    let h = cfg.hangover_chunks;
    if h > 0 {
        for i in h..tags.len().saturating_sub(h) {
            let Some(me) = tags[i].speaker() else { continue };
            let other = Tag::from(me.other());
            if tags[i - h..i].iter().all(|&t| t == other) && tags[i + 1..=i + h].iter().all(|&t| t == other) {
                smoothed[i] = other;
            }
        }
    }
    let mut spans: Vec<SpeakerSpan> = Vec::new();
    let mut open = false;
    for (chunk, tag) in chunks.iter().zip(smoothed) {
        match tag.speaker() {
            None => open = false,
            Some(s) => match spans.last_mut() {
                Some(last) if open && last.speaker == s => last.end = chunk.end,
                _ => {
                    spans.push(SpeakerSpan { speaker: s, start: chunk.start, end: chunk.end });
                    open = true;
                }
            },
        }
    }
    Ok(spans)
}
