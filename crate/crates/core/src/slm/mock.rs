use std::collections::HashMap;
use std::net::TcpListener;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::prompts::Task;
use super::protocol::{SlmBackend, SlmRequest, SlmResponse};
use crate::audio::ManifestEntry;
use crate::error::{Error, Result};
use crate::ndjson::{spawn_server, ServerHandle};
use crate::scene::Lexicon;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MockMode {
    Oracle,
    Noisy { seed: u64, sub_rate: f64 },
}

impl MockMode {
    pub fn validate(&self) -> Result<()> {
        if let MockMode::Noisy { sub_rate, .. } = self {
            if !(0.0..=1.0).contains(sub_rate) {
                return Err(Error::validation(format!("sub_rate must lie in [0, 1], got {sub_rate}")));
            }
        }
        Ok(())
    }
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn text_key(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| mix(h, u64::from(b)))
}

// Each word draws from its own stream keyed by scene, segment, task and
// position, so a higher rate substitutes a superset of words.
fn render_words(words: &[&str], key: u64, sub_rate: Option<(u64, f64)>, lang: &str) -> Vec<String> {
    let Some((seed, rate)) = sub_rate else {
        return words.iter().map(|w| w.to_string()).collect();
    };
    let vocab = Lexicon::vocabulary(lang);
    words
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, key), i as u64));
            let u: f64 = rng.random();
            if u >= rate {
                return w.to_string();
            }
            let mut pick = vocab[rng.random_range(0..vocab.len())];
            if pick == w {
                pick = vocab.iter().copied().find(|&v| v != w).unwrap_or("<unk>");
            }
            pick.to_string()
        })
        .collect()
}

fn contains_run(hay: &[&str], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w.iter().zip(needle).all(|(a, b)| *a == b))
}

/// Deterministic stand-in for the SLM. Emits the reference transcript (or
/// translation) of each segment in the request's source language whose
/// midpoint falls in the audio new since the last request. A segment whose
/// midpoint was passed earlier but which still reaches into the new audio
/// is emitted only if its text is not already in the history.
pub fn mock_slm(request: &SlmRequest, entry: &ManifestEntry, mode: MockMode) -> SlmResponse {
    let empty = SlmResponse { id: request.id, text: String::new(), latency_ms: Some(0.0) };
    let Some([t0, t1]) = request.span else { return empty };
    let fresh = request.fresh_from.unwrap_or(t0);
    let history: Vec<&str> = request.history.split_whitespace().collect();
    let noise = match mode {
        MockMode::Oracle => None,
        MockMode::Noisy { seed, sub_rate } => Some((seed, sub_rate)),
    };
    let scene_key = text_key(&entry.id);
    let mut order: Vec<usize> = (0..entry.segments.len()).collect();
    order.sort_by(|&a, &b| entry.segments[a].start.total_cmp(&entry.segments[b].start));
    let mut out: Vec<String> = Vec::new();
    for i in order {
        let seg = &entry.segments[i];
        let mid = seg.midpoint();
        if mid < t0 || mid > t1 || seg.end < fresh || seg.lang != request.src {
            continue;
        }
        let (text, out_lang) = match request.task {
            Task::Transcribe => (seg.text.as_str(), seg.lang.as_str()),
            Task::Translate => match seg.translation.as_deref() {
                Some(t) => (t, request.tgt.as_str()),
                None => continue,
            },
        };
        let words: Vec<&str> = text.split_whitespace().collect();
        let key = mix(mix(scene_key, i as u64), request.task as u64);
        let rendered = render_words(&words, key, noise, out_lang);
        if mid < fresh {
            let mut seen = history.clone();
            seen.extend(out.iter().map(String::as_str));
            if contains_run(&seen, &rendered) {
                continue;
            }
        }
        out.extend(rendered);
    }
    SlmResponse { id: request.id, text: out.join(" "), latency_ms: Some(0.0) }
}

/// In-process mock backend over a set of scenes. Requests without a scene
/// id use the only scene when there is exactly one.
#[derive(Debug, Clone)]
pub struct MockSlm {
    scenes: HashMap<String, ManifestEntry>,
    mode: MockMode,
}

impl MockSlm {
    pub fn new(entries: impl IntoIterator<Item = ManifestEntry>, mode: MockMode) -> Self {
        Self { scenes: entries.into_iter().map(|e| (e.id.clone(), e)).collect(), mode }
    }

    pub fn respond(&self, request: &SlmRequest) -> SlmResponse {
        let entry = match &request.scene {
            Some(id) => self.scenes.get(id),
            None if self.scenes.len() == 1 => self.scenes.values().next(),
            None => None,
        };
        match entry {
            Some(e) => mock_slm(request, e, self.mode),
            None => SlmResponse { id: request.id, text: String::new(), latency_ms: Some(0.0) },
        }
    }

    /// Serves this mock over TCP on background threads.
    pub fn serve(self, listener: TcpListener) -> Result<ServerHandle> {
        spawn_server(listener, move |req: SlmRequest| Some(self.respond(&req)))
    }
}

impl SlmBackend for MockSlm {
    fn complete(&mut self, requests: &[SlmRequest]) -> Result<Vec<SlmResponse>> {
        Ok(requests.iter().map(|r| self.respond(r)).collect())
    }
}
