use std::collections::VecDeque;

use crate::audio::SAMPLE_RATE;
use crate::error::{Error, Result};

pub const MAX_WINDOW_SECONDS: f64 = 30.0;
pub const MAX_HISTORY_WORDS: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowChunk {
    /// Absolute start time of the chunk, seconds.
    pub start: f64,
    pub samples: Vec<f32>,
}

/// Audio context (at most 30 s of chunks) and text history (at most 50
/// words) sent with every request. The history is shared by both tasks.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    chunks: VecDeque<WindowChunk>,
    total_samples: usize,
    max_samples: usize,
    sample_rate: u32,
    history: VecDeque<String>,
    max_history: usize,
}

impl Default for SlidingWindow {
    fn default() -> Self {
        Self::new(SAMPLE_RATE)
    }
}

impl SlidingWindow {
    pub fn new(sample_rate: u32) -> Self {
        Self::with_limits(sample_rate, MAX_WINDOW_SECONDS, MAX_HISTORY_WORDS)
    }

    pub fn with_limits(sample_rate: u32, max_seconds: f64, max_history_words: usize) -> Self {
        Self {
            chunks: VecDeque::new(),
            total_samples: 0,
            max_samples: (max_seconds * f64::from(sample_rate)).round() as usize,
            sample_rate,
            history: VecDeque::new(),
            max_history: max_history_words,
        }
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.total_samples as f64 / f64::from(self.sample_rate)
    }

    pub fn max_duration_s(&self) -> f64 {
        self.max_samples as f64 / f64::from(self.sample_rate)
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> impl Iterator<Item = &WindowChunk> {
        self.chunks.iter()
    }

    /// Appends a chunk and evicts the oldest ones until the window fits.
    /// Returns the start times of the evicted chunks, oldest first.
    pub fn push_chunk(&mut self, samples: &[f64], timestamp: f64) -> Result<Vec<f64>> {
        if !timestamp.is_finite() {
            return Err(Error::arg("chunk timestamp must be finite"));
        }
        if let Some(last) = self.chunks.back() {
            if timestamp <= last.start {
                return Err(Error::arg(format!(
                    "chunk timestamp {timestamp} does not follow previous chunk at {}",
                    last.start
                )));
            }
        }
        if samples.len() > self.max_samples {
            return Err(Error::arg(format!(
                "chunk of {} samples exceeds the {:.1} s window",
                samples.len(),
                self.max_duration_s()
            )));
        }
        self.chunks.push_back(WindowChunk { start: timestamp, samples: samples.iter().map(|&x| x as f32).collect() });
        self.total_samples += samples.len();
        let mut evicted = Vec::new();
        while self.total_samples > self.max_samples {
            let old = self.chunks.pop_front().expect("window over budget implies a chunk");
            self.total_samples -= old.samples.len();
            evicted.push(old.start);
        }
        Ok(evicted)
    }

    /// `[oldest chunk start, newest chunk end]`, or `None` when empty.
    pub fn span(&self) -> Option<(f64, f64)> {
        let first = self.chunks.front()?;
        let last = self.chunks.back()?;
        Some((first.start, last.start + last.samples.len() as f64 / f64::from(self.sample_rate)))
    }

    pub fn audio(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.total_samples);
        for c in &self.chunks {
            out.extend_from_slice(&c.samples);
        }
        out
    }

    pub fn append_history(&mut self, text: &str) {
        self.history.extend(text.split_whitespace().map(String::from));
        while self.history.len() > self.max_history {
            self.history.pop_front();
        }
    }

    pub fn history_words(&self) -> impl Iterator<Item = &str> {
        self.history.iter().map(String::as_str)
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn history_text(&self) -> String {
        self.history_words().collect::<Vec<_>>().join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CHUNK_SAMPLES;

    #[test]
    fn push_and_evict() {
        let mut w = SlidingWindow::default();
        let chunk = vec![0.0; CHUNK_SAMPLES];
        assert!(w.push_chunk(&chunk, 0.0).unwrap().is_empty());
        assert!((w.duration_s() - 0.6).abs() < 1e-12);
        for i in 1..50 {
            assert!(w.push_chunk(&chunk, i as f64 * 0.6).unwrap().is_empty());
        }
        assert!((w.duration_s() - 30.0).abs() < 1e-9);
        let ev = w.push_chunk(&chunk, 50.0 * 0.6).unwrap();
        assert_eq!(ev, vec![0.0]);
        assert!((w.duration_s() - 30.0).abs() < 1e-9);
        let (a, b) = w.span().unwrap();
        assert!((a - 0.6).abs() < 1e-9 && (b - 30.6).abs() < 1e-9);
        assert_eq!(w.audio().len(), 50 * CHUNK_SAMPLES);
    }

    #[test]
    fn timestamps_must_increase() {
        let mut w = SlidingWindow::default();
        w.push_chunk(&[0.0; 10], 1.0).unwrap();
        assert!(w.push_chunk(&[0.0; 10], 1.0).is_err());
        assert!(w.push_chunk(&[0.0; 10], 0.5).is_err());
        assert!(w.push_chunk(&vec![0.0; 480_001], 2.0).is_err());
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn history_truncation() {
        let mut w = SlidingWindow::default();
        let ten: Vec<String> = (0..10).map(|i| format!("a{i}")).collect();
        w.append_history(&ten.join(" "));
        assert_eq!(w.history_len(), 10);
        let mut w = SlidingWindow::default();
        let first: Vec<String> = (0..45).map(|i| format!("w{i}")).collect();
        w.append_history(&first.join(" "));
        let more: Vec<String> = (45..55).map(|i| format!("w{i}")).collect();
        w.append_history(&more.join(" "));
        let expect: Vec<String> = (5..55).map(|i| format!("w{i}")).collect();
        assert_eq!(w.history_words().collect::<Vec<_>>(), expect);
        w.append_history("   ");
        assert_eq!(w.history_len(), 50);
    }
}
