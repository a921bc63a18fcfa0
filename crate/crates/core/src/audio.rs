//! Multichannel WAV audio and JSONL scene manifests.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::speaker::Speaker;

/// Canonical pipeline sample rate in Hz.
pub const SAMPLE_RATE: u32 = 16_000;

/// Largest value a PCM16 sample can reach after normalization.
pub const PCM16_MAX: f64 = 32767.0 / 32768.0;

/// A sampled multichannel waveform.
///
/// Samples are stored per channel (planar) as `f64`; all channels have the
/// same length.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    channels: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::arg("audio clip needs at least one channel"));
        }
        if sample_rate == 0 {
            return Err(Error::arg("sample rate must be positive"));
        }
        let len = channels[0].len();
        if let Some(bad) = channels.iter().position(|c| c.len() != len) {
            return Err(Error::arg(format!(
                "channel {bad} has {} samples, expected {len}",
                channels[bad].len()
            )));
        }
        Ok(Self { channels, sample_rate })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        Self::new(vec![samples], sample_rate)
    }

    pub fn zeros(channels: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![0.0; len]; channels.max(1)], sample_rate)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, idx: usize) -> &[f64] {
        &self.channels[idx]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<f64>> {
        self.channels
    }

    /// Rejects clips whose rate differs from `rate`; nothing is resampled.
    pub fn require_rate(&self, rate: u32) -> Result<()> {
        if self.sample_rate != rate {
            return Err(Error::validation(format!(
                "expected {rate} Hz audio, got {} Hz",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

/// Sample encoding used when writing WAV files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path.as_ref())?;
    let spec = reader.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err(Error::Format("WAV header declares zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::Format(format!(
                "{bits}-bit {fmt:?} samples (only PCM16 and float32 are supported)"
            )))
        }
    };
    if !interleaved.len().is_multiple_of(n_ch) {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "WAV data ends mid-frame",
        )));
    }
    let frames = interleaved.len() / n_ch;
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (ch, &v) in channels.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    AudioClip::new(channels, spec.sample_rate)
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, encoding: WavEncoding) -> Result<()> {
    let spec = hound::WavSpec {
        channels: clip.num_channels() as u16,
        sample_rate: clip.sample_rate(),
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => hound::SampleFormat::Int,
            WavEncoding::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut writer = hound::WavWriter::create(path.as_ref(), spec)?;
    for n in 0..clip.len() {
        for ch in clip.channels() {
            match encoding {
                WavEncoding::Pcm16 => writer.write_sample(pcm16_quantize(ch[n]))?,
                WavEncoding::Float32 => writer.write_sample(ch[n] as f32)?,
            }
        }
    }
    writer.finalize()?;
    Ok(())
}

fn pcm16_quantize(x: f64) -> i16 {
    let clamped = x.clamp(-1.0, PCM16_MAX);
    (clamped * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// A timestamped, attributed reference segment of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub speaker: Speaker,
    pub start: f64,
    pub end: f64,
    pub text: String,
    pub lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<String>,
}

impl Segment {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// Paths to the clean spatialized references written next to a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanRefs {
    pub wearer: String,
    pub partner: String,
}

/// One scene line of a JSONL manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub wav: String,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<CleanRefs>,
}

/// Per-role view of a manifest entry: the role's language and its segments.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleInfo {
    pub lang: String,
    pub segments: Vec<Segment>,
}

impl ManifestEntry {
    pub fn speaker_roles(&self) -> BTreeMap<Speaker, RoleInfo> {
        let mut roles: BTreeMap<Speaker, RoleInfo> = BTreeMap::new();
        for seg in &self.segments {
            roles
                .entry(seg.speaker)
                .or_insert_with(|| RoleInfo { lang: seg.lang.clone(), segments: Vec::new() })
                .segments
                .push(seg.clone());
        }
        roles
    }

    pub fn lang_of(&self, speaker: Speaker) -> Option<&str> {
        self.segments.iter().find(|s| s.speaker == speaker).map(|s| s.lang.as_str())
    }

    /// Checks that the id is non-empty and every segment has `0 <= start < end`.
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::validation("entry has an empty id"));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.start >= 0.0 && seg.start < seg.end) {
                return Err(Error::validation(format!(
                    "entry `{}` segment {i} ({} {:.3}-{:.3}): need 0 <= start < end",
                    self.id, seg.speaker, seg.start, seg.end
                )));
            }
        }
        Ok(())
    }

    /// Resolves a manifest-relative path against the manifest's directory.
    pub fn resolve(base_dir: &Path, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base_dir.join(p)
        }
    }
}

/// Parses manifest lines, keeping per-line outcomes so callers can decide
/// whether one bad line poisons the file. Blank lines are skipped; line
/// numbers are 1-based.
pub fn parse_manifest<R: BufRead>(reader: R) -> Vec<(usize, Result<ManifestEntry>)> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                out.push((line_no, Err(Error::Io(e))));
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawEntry>(&line)
            .map_err(|e| Error::Parse { line: line_no, message: e.to_string() })
            .and_then(|raw| raw.into_entry(line_no))
            .and_then(|entry| {
                entry.validate().map_err(|e| match e {
                    Error::Validation(msg) => Error::Validation(format!("line {line_no}: {msg}")),
                    other => other,
                })?;
                Ok(entry)
            });
        out.push((line_no, parsed));
    }
    out
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let file = File::open(path.as_ref())?;
    parse_manifest(BufReader::new(file)).into_iter().map(|(_, r)| r).collect()
}

pub fn write_manifest_line<W: Write>(mut writer: W, entry: &ManifestEntry) -> Result<()> {
    let line = serde_json::to_string(entry).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(writer, "{line}")?;
    Ok(())
}

// Speaker roles arrive as free strings so an unknown role is reported as a
// validation error naming the segment rather than a generic parse failure.
#[derive(Deserialize)]
struct RawEntry {
    id: String,
    wav: String,
    #[serde(default)]
    segments: Vec<RawSegment>,
    #[serde(default)]
    clean: Option<CleanRefs>,
}

#[derive(Deserialize)]
struct RawSegment {
    speaker: String,
    start: f64,
    end: f64,
    text: String,
    lang: String,
    #[serde(default)]
    translation: Option<String>,
}

impl RawEntry {
    fn into_entry(self, line_no: usize) -> Result<ManifestEntry> {
        let id = self.id;
        let segments = self
            .segments
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                let speaker = s.speaker.parse::<Speaker>().map_err(|_| {
                    Error::Validation(format!(
                        "line {line_no}: entry `{id}` segment {i}: speaker `{}` is not wearer|partner",
                        s.speaker
                    ))
                })?;
                Ok(Segment {
                    speaker,
                    start: s.start,
                    end: s.end,
                    text: s.text,
                    lang: s.lang,
                    translation: s.translation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ManifestEntry { id, wav: self.wav, segments, clean: self.clean })
    }
}
