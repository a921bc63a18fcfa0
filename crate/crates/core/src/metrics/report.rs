use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bleu::BleuStats;
use super::sa::{sa_wer, SaReport};
use super::words;
use crate::audio::ManifestEntry;
use crate::error::{Error, Result};
use crate::speaker::Speaker;

/// System output for one scene: attributed transcript and translation runs
/// in emission order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Hypothesis {
    pub transcripts: Vec<(Speaker, String)>,
    pub translations: Vec<(Speaker, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationScores {
    pub mixture: f64,
    pub separated: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeakerScore {
    pub wer: f64,
    pub ins: usize,
    pub del: usize,
    pub sub: usize,
    pub ref_words: usize,
    pub sa: f64,
    pub bleu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub wearer: SpeakerScore,
    pub partner: SpeakerScore,
    pub bleu: Option<f64>,
    pub si_sdr: Option<BTreeMap<Speaker, SeparationScores>>,
    pub scenes: usize,
}

impl ScoreReport {
    pub fn speaker(&self, s: Speaker) -> &SpeakerScore {
        match s {
            Speaker::Wearer => &self.wearer,
            Speaker::Partner => &self.partner,
        }
    }
}

fn joined_words<'a>(texts: impl Iterator<Item = &'a str>) -> Vec<String> {
    texts.flat_map(words).collect()
}

struct SceneScore {
    sa: SaReport,
    bleu: BTreeMap<Speaker, BleuStats>,
    has_translation_refs: BTreeSet<Speaker>,
}

fn score_scene(entry: &ManifestEntry, hyp: &Hypothesis) -> SceneScore {
    let mut segs: Vec<_> = entry.segments.iter().collect();
    segs.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.speaker.cmp(&b.speaker)));
    let reference: Vec<(Speaker, &str)> = segs.iter().map(|s| (s.speaker, s.text.as_str())).collect();
    let sa = sa_wer(&reference, &hyp.transcripts);
    let mut bleu = BTreeMap::new();
    let mut has_translation_refs = BTreeSet::new();
    for s in Speaker::BOTH {
        let refs = joined_words(segs.iter().filter(|g| g.speaker == s).filter_map(|g| g.translation.as_deref()));
        if refs.is_empty() {
            continue;
        }
        has_translation_refs.insert(s);
        let out = joined_words(hyp.translations.iter().filter(|(t, _)| *t == s).map(|(_, x)| x.as_str()));
        bleu.insert(s, BleuStats::sentence(&[refs], &out));
    }
    SceneScore { sa, bleu, has_translation_refs }
}

/// Scores every manifest scene against its hypothesis (missing ones count
/// as empty output). Hypothesis ids absent from the manifest are a
/// validation error.
pub fn score_corpus(
    entries: &[ManifestEntry],
    hyps: &BTreeMap<String, Hypothesis>,
    separation: Option<&BTreeMap<String, BTreeMap<Speaker, SeparationScores>>>,
) -> Result<ScoreReport> {
    let known: BTreeSet<&str> = entries.iter().map(|e| e.id.as_str()).collect();
    let unknown: Vec<&str> = hyps.keys().map(String::as_str).filter(|id| !known.contains(id)).collect();
    if !unknown.is_empty() {
        return Err(Error::validation(format!("ids not found in manifest: {}", unknown.join(", "))));
    }
    let empty = Hypothesis::default();
    let scenes: Vec<SceneScore> =
        entries.par_iter().map(|e| score_scene(e, hyps.get(&e.id).unwrap_or(&empty))).collect();

    let mut sa = SaReport::default();
    let mut bleu: BTreeMap<Speaker, BleuStats> = BTreeMap::new();
    let mut has_refs = BTreeSet::new();
    for sc in &scenes {
        sa = sa.combine(&sc.sa);
        for (s, st) in &sc.bleu {
            bleu.entry(*s).or_default().add(st);
        }
        has_refs.extend(sc.has_translation_refs.iter().copied());
    }
    let per_speaker = |s: Speaker| {
        let r = sa.get(s);
        SpeakerScore {
            wer: r.wer.wer_pct,
            ins: r.wer.ins,
            del: r.wer.del,
            sub: r.wer.sub,
            ref_words: r.wer.ref_words,
            sa: r.sa_pct,
            bleu: has_refs.contains(&s).then(|| bleu.get(&s).map_or(0.0, BleuStats::score)),
        }
    };
    let overall = (!has_refs.is_empty()).then(|| {
        let mut total = BleuStats::default();
        for st in bleu.values() {
            total.add(st);
        }
        total.score()
    });
    let si_sdr = separation.filter(|m| !m.is_empty()).map(|m| {
        let mut out = BTreeMap::new();
        for s in Speaker::BOTH {
            let vals: Vec<&SeparationScores> = m.values().filter_map(|v| v.get(&s)).collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            out.insert(
                s,
                SeparationScores {
                    mixture: vals.iter().map(|v| v.mixture).sum::<f64>() / n,
                    separated: vals.iter().map(|v| v.separated).sum::<f64>() / n,
                },
            );
        }
        out
    });
    Ok(ScoreReport {
        wearer: per_speaker(Speaker::Wearer),
        partner: per_speaker(Speaker::Partner),
        bleu: overall,
        si_sdr,
        scenes: entries.len(),
    })
}
