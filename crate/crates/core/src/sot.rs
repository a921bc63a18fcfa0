//! Serialized output training (SOT) sequences.
//!
//! Segments are ordered by start time and emitted as one token stream.
//! Each speaker run opens with a role marker (`<wearer>` or `<partner>`)
//! and runs are separated by the change marker `<sc>`:
//!
//! ```text
//! <wearer> hi there <sc> <partner> bonjour
//! ```

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::{ManifestEntry, Segment};
use crate::error::{Error, Result};
use crate::lang::language_name;
use crate::speaker::Speaker;

pub const WEARER_TOKEN: &str = "<wearer>";
pub const PARTNER_TOKEN: &str = "<partner>";
pub const CHANGE_TOKEN: &str = "<sc>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SotToken {
    Role(Speaker),
    Change,
    Word(String),
}

impl SotToken {
    pub fn role(speaker: Speaker) -> Self {
        SotToken::Role(speaker)
    }

    fn from_str_token(tok: &str) -> Self {
        match tok {
            WEARER_TOKEN => SotToken::Role(Speaker::Wearer),
            PARTNER_TOKEN => SotToken::Role(Speaker::Partner),
            CHANGE_TOKEN => SotToken::Change,
            w => SotToken::Word(w.to_string()),
        }
    }
}

impl fmt::Display for SotToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SotToken::Role(Speaker::Wearer) => f.write_str(WEARER_TOKEN),
            SotToken::Role(Speaker::Partner) => f.write_str(PARTNER_TOKEN),
            SotToken::Change => f.write_str(CHANGE_TOKEN),
            SotToken::Word(w) => f.write_str(w),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SotSequence {
    pub tokens: Vec<SotToken>,
}

impl SotSequence {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn change_count(&self) -> usize {
        self.tokens.iter().filter(|t| **t == SotToken::Change).count()
    }

    /// Checks the structural invariants: leading role marker, a role
    /// marker after every `<sc>`, and no adjacent `<sc>`.
    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.tokens.first() {
            if !matches!(first, SotToken::Role(_)) {
                return Err(Error::validation(format!("sequence starts with `{first}`, not a role marker")));
            }
        }
        for (i, pair) in self.tokens.windows(2).enumerate() {
            if pair[0] == SotToken::Change && !matches!(pair[1], SotToken::Role(_)) {
                return Err(Error::validation(format!("token {}: `<sc>` followed by `{}`", i + 1, pair[1])));
            }
        }
        if self.tokens.last() == Some(&SotToken::Change) {
            return Err(Error::validation("sequence ends with `<sc>`"));
        }
        Ok(())
    }
}

impl fmt::Display for SotSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for SotSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(SotSequence { tokens: s.split_whitespace().map(SotToken::from_str_token).collect() })
    }
}

/// A transcript segment to serialize.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedSegment {
    pub speaker: Speaker,
    pub start: f64,
    pub text: String,
    pub lang: String,
}

impl From<&Segment> for AttributedSegment {
    fn from(s: &Segment) -> Self {
        Self { speaker: s.speaker, start: s.start, text: s.text.clone(), lang: s.lang.clone() }
    }
}

fn start_order(a: (f64, Speaker), b: (f64, Speaker)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn sorted_indices<T>(items: &[T], key: impl Fn(&T) -> (f64, Speaker)) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| start_order(key(&items[a]), key(&items[b])));
    idx
}

fn check_segment(speaker: Speaker, start: f64, text: &str) -> Result<()> {
    if !(start >= 0.0) {
        return Err(Error::validation(format!("{speaker} segment has negative start {start}")));
    }
    if text.split_whitespace().next().is_none() {
        return Err(Error::validation(format!("{speaker} segment at {start:.3}s has empty text")));
    }
    Ok(())
}

/// Serializes segments by start time (ties wearer-first); consecutive
/// same-speaker segments share one role marker.
pub fn serialize_sot(segments: &[AttributedSegment]) -> Result<SotSequence> {
    let mut tokens = Vec::new();
    let mut current: Option<Speaker> = None;
    for i in sorted_indices(segments, |s| (s.start, s.speaker)) {
        let seg = &segments[i];
        check_segment(seg.speaker, seg.start, &seg.text)?;
        if current != Some(seg.speaker) {
            if current.is_some() {
                tokens.push(SotToken::Change);
            }
            tokens.push(SotToken::Role(seg.speaker));
            current = Some(seg.speaker);
        }
        tokens.extend(seg.text.split_whitespace().map(|w| SotToken::Word(w.to_string())));
    }
    Ok(SotSequence { tokens })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Lenient,
    Strict,
}

/// Parse result: speaker runs (or blocks) and any repairs made.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedSot {
    pub runs: Vec<(Speaker, String)>,
    pub warnings: Vec<String>,
}

fn parse_impl(seq: &SotSequence, mode: ParseMode, merge_runs: bool) -> Result<ParsedSot> {
    let mut out = ParsedSot::default();
    let mut current: Option<Speaker> = None;
    let mut words: Vec<&str> = Vec::new();
    let mut after_change = false;
    let mut block_started = false;

    let repair = |out: &mut ParsedSot, pos: usize, msg: String| -> Result<()> {
        match mode {
            ParseMode::Strict => Err(Error::Parse { line: pos + 1, message: msg }),
            ParseMode::Lenient => {
                log::warn!("sot token {}: {msg}", pos + 1);
                out.warnings.push(format!("token {}: {msg}", pos + 1));
                Ok(())
            }
        }
    };

    fn close(out: &mut ParsedSot, speaker: Option<Speaker>, words: &mut Vec<&str>, merge: bool) {
        let Some(s) = speaker else { return };
        if words.is_empty() {
            return;
        }
        let text = words.join(" ");
        words.clear();
        match out.runs.last_mut() {
            Some((last, t)) if merge && *last == s => {
                t.push(' ');
                t.push_str(&text);
            }
            _ => out.runs.push((s, text)),
        }
    }

    for (pos, tok) in seq.tokens.iter().enumerate() {
        match tok {
            SotToken::Role(s) => {
                close(&mut out, current, &mut words, merge_runs);
                current = Some(*s);
                after_change = false;
                block_started = true;
            }
            SotToken::Change => {
                if after_change {
                    repair(&mut out, pos, "adjacent `<sc>` markers".to_string())?;
                    continue;
                }
                if !block_started {
                    repair(&mut out, pos, "`<sc>` before any role marker".to_string())?;
                }
                close(&mut out, current, &mut words, merge_runs);
                after_change = true;
            }
            SotToken::Word(w) => {
                if after_change {
                    let next = current.map_or(Speaker::Wearer, Speaker::other);
                    repair(&mut out, pos, format!("missing role marker after `<sc>`, assuming `{next}`"))?;
                    current = Some(next);
                    after_change = false;
                    block_started = true;
                } else if current.is_none() {
                    repair(&mut out, pos, "words before any role marker, assuming `wearer`".to_string())?;
                    current = Some(Speaker::Wearer);
                    block_started = true;
                }
                words.push(w);
            }
        }
    }
    if after_change {
        repair(&mut out, seq.tokens.len().saturating_sub(1), "trailing `<sc>`".to_string())?;
    }
    close(&mut out, current, &mut words, merge_runs);
    Ok(out)
}

/// One `(speaker, text)` per maximal same-speaker run, in order.
pub fn parse_sot(seq: &SotSequence, mode: ParseMode) -> Result<ParsedSot> {
    parse_impl(seq, mode, true)
}

/// Splits at every role marker without merging, so a transcript block and
/// the translation block that follows it stay separate.
pub fn parse_sot_blocks(seq: &SotSequence, mode: ParseMode) -> Result<ParsedSot> {
    parse_impl(seq, mode, false)
}

pub fn parse_sot_str(text: &str, mode: ParseMode) -> Result<ParsedSot> {
    parse_sot(&text.parse()?, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SotTask {
    Transcribe,
    Translate,
    Both,
}

impl FromStr for SotTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transcribe" => Ok(SotTask::Transcribe),
            "translate" => Ok(SotTask::Translate),
            "both" => Ok(SotTask::Both),
            other => Err(Error::arg(format!("unknown SOT task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub id: String,
    pub prompt: String,
    pub target: String,
}

fn role_languages(entry: &ManifestEntry) -> (String, String) {
    let lang = |s| entry.lang_of(s).map(language_name).unwrap_or("unknown").to_string();
    (lang(Speaker::Wearer), lang(Speaker::Partner))
}

fn training_prompt(entry: &ManifestEntry, task: SotTask) -> String {
    let (w, p) = role_languages(entry);
    let markers = "Mark each turn with <wearer> or <partner> and separate turns with <sc>.";
    match task {
        SotTask::Transcribe => format!(
            "Transcribe the conversation. The wearer speaks {w} and the partner speaks {p}. {markers}"
        ),
        SotTask::Translate => format!(
            "Translate the conversation. Render the wearer's {w} into {p} and the partner's {p} into {w}. {markers}"
        ),
        SotTask::Both => format!(
            "Transcribe the conversation and translate each turn. The wearer speaks {w} and the partner speaks {p}; \
             translate each turn into the other participant's language. {markers}"
        ),
    }
}

fn translation_of<'a>(entry: &ManifestEntry, seg: &'a Segment) -> Result<&'a str> {
    seg.translation.as_deref().filter(|t| !t.trim().is_empty()).ok_or_else(|| {
        Error::validation(format!(
            "entry `{}`: {} segment at {:.3}s has no translation",
            entry.id, seg.speaker, seg.start
        ))
    })
}

/// Builds a `(prompt, SOT target)` pair from one manifest entry.
pub fn build_training_example(entry: &ManifestEntry, task: SotTask) -> Result<TrainingExample> {
    entry.validate()?;
    let target = match task {
        SotTask::Transcribe => {
            let segs: Vec<AttributedSegment> = entry.segments.iter().map(AttributedSegment::from).collect();
            serialize_sot(&segs)?
        }
        SotTask::Translate => {
            let segs = entry
                .segments
                .iter()
                .map(|s| {
                    Ok(AttributedSegment {
                        speaker: s.speaker,
                        start: s.start,
                        text: translation_of(entry, s)?.to_string(),
                        lang: s.lang.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            serialize_sot(&segs)?
        }
        SotTask::Both => {
            let mut tokens = Vec::new();
            let mut current = None;
            for i in sorted_indices(&entry.segments, |s| (s.start, s.speaker)) {
                let seg = &entry.segments[i];
                check_segment(seg.speaker, seg.start, &seg.text)?;
                let translation = translation_of(entry, seg)?;
                if current.is_some() && current != Some(seg.speaker) {
                    tokens.push(SotToken::Change);
                }
                current = Some(seg.speaker);
                for block in [seg.text.as_str(), translation] {
                    tokens.push(SotToken::Role(seg.speaker));
                    tokens.extend(block.split_whitespace().map(|w| SotToken::Word(w.to_string())));
                }
            }
            SotSequence { tokens }
        }
    };
    Ok(TrainingExample { id: entry.id.clone(), prompt: training_prompt(entry, task), target: target.to_string() })
}
