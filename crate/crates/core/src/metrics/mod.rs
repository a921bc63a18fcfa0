//! Scoring: WER with edit breakdown, speaker-attribution error, BLEU,
//! SI-SDR, and separation loss terms.

mod bleu;
mod report;
mod sa;
mod signal;
mod wer;

pub use bleu::{bleu, corpus_bleu, BleuStats};
pub use report::{score_corpus, Hypothesis, ScoreReport, SeparationScores, SpeakerScore};
pub use sa::{sa_wer, SaReport, SpeakerSa};
pub use signal::{loss_terms, si_sdr, LossTerms, LossWeights, SI_SDR_CAP_DB};
pub use wer::{align, wer, Alignment, EditOp, WerBreakdown};

/// Lowercases, drops punctuation, and collapses whitespace.
pub fn normalize_text(text: &str) -> String {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalized word list.
pub fn words(text: &str) -> Vec<String> {
    normalize_text(text).split_whitespace().map(String::from).collect()
}
