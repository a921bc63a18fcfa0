//! STFT analysis/synthesis and frame energy.
//!
//! Framing convention: the signal is conceptually preceded by
//! `win_length - hop` zeros and frame `t` covers padded samples
//! `[t * hop, t * hop + win_length)`. With `T = ceil((len + pad) / hop)`
//! frames every input sample receives its full set of overlapping windows,
//! so weighted overlap-add with window-sum normalization reconstructs the
//! input exactly.
//!
//! [`StftStream`] and [`OlaStream`] implement the same grid incrementally for
//! chunked processing; they share no code path with [`stft`] / [`istft`]
//! beyond the window and FFT plans.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor on the overlap-add window sum.
pub const WINDOW_SUM_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftParams {
    pub fft_size: usize,
    pub win_length: usize,
    pub hop: usize,
}

impl Default for StftParams {
    /// 512-point FFT, 25 ms square-root Hann window, 10 ms hop at 16 kHz.
    fn default() -> Self {
        Self { fft_size: 512, win_length: 400, hop: 160 }
    }
}

impl StftParams {
    pub fn validate(&self) -> Result<()> {
        if self.hop == 0 || self.win_length == 0 {
            return Err(Error::arg("hop and win_length must be positive"));
        }
        if self.win_length > self.fft_size {
            return Err(Error::arg("win_length must not exceed fft_size"));
        }
        if self.hop > self.win_length {
            return Err(Error::arg("hop must not exceed win_length"));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Leading zero padding, equal to `win_length - hop`.
    pub fn pad(&self) -> usize {
        self.win_length - self.hop
    }

    pub fn num_frames(&self, len: usize) -> usize {
        (len + self.pad()).div_ceil(self.hop)
    }

    /// Periodic square-root Hann window of `win_length` taps.
    pub fn window(&self) -> Vec<f64> {
        let n = self.win_length as f64;
        (0..self.win_length)
            .map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos()).max(0.0).sqrt())
            .collect()
    }
}

/// A `T x F` complex time-frequency representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub params: StftParams,
    pub origin_length: usize,
}

impl Spectrogram {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn num_bins(&self) -> usize {
        self.params.num_bins()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_frames(), self.num_bins())
    }

    fn check(&self) -> Result<()> {
        self.params.validate()?;
        let bins = self.params.num_bins();
        if let Some(t) = self.frames.iter().position(|f| f.len() != bins) {
            return Err(Error::arg(format!(
                "frame {t} has {} bins, params imply {bins}",
                self.frames[t].len()
            )));
        }
        let expected = self.params.num_frames(self.origin_length);
        if self.frames.len().abs_diff(expected) > 1 {
            return Err(Error::arg(format!(
                "{} frames cannot describe {} samples (expected {expected})",
                self.frames.len(),
                self.origin_length
            )));
        }
        Ok(())
    }
}

/// FFT plans and window for one parameter set.
#[derive(Clone)]
pub struct StftEngine {
    params: StftParams,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StftEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StftEngine").field("params", &self.params).finish()
    }
}

impl StftEngine {
    pub fn new(params: StftParams) -> Result<Self> {
        params.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            params,
            window: params.window(),
            forward: planner.plan_fft_forward(params.fft_size),
            inverse: planner.plan_fft_inverse(params.fft_size),
        })
    }

    pub fn params(&self) -> StftParams {
        self.params
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Windows `segment` (length `win_length`) and returns its one-sided spectrum.
    pub fn analyze_frame(&self, segment: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(segment.len(), self.params.win_length);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.params.fft_size];
        for ((b, &x), &w) in buf.iter_mut().zip(segment).zip(&self.window) {
            b.re = x * w;
        }
        self.forward.process(&mut buf);
        buf.truncate(self.params.num_bins());
        buf
    }

    /// Inverse of one one-sided spectrum, synthesis-windowed, `win_length` long.
    pub fn synthesize_frame(&self, bins: &[Complex64]) -> Vec<f64> {
        let n = self.params.fft_size;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..bins.len()].copy_from_slice(bins);
        for k in 1..bins.len() {
            if n - k >= bins.len() {
                buf[n - k] = bins[k].conj();
            }
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter()
            .zip(&self.window)
            .map(|(c, &w)| c.re * scale * w)
            .collect()
    }
}

pub fn stft(signal: &[f64], params: StftParams) -> Result<Spectrogram> {
    if signal.is_empty() {
        return Err(Error::arg("cannot take the STFT of an empty signal"));
    }
    let engine = StftEngine::new(params)?;
    Ok(stft_with(&engine, signal))
}

pub(crate) fn stft_with(engine: &StftEngine, signal: &[f64]) -> Spectrogram {
    let params = engine.params();
    let pad = params.pad() as isize;
    let n_frames = params.num_frames(signal.len());
    let mut segment = vec![0.0; params.win_length];
    let frames = (0..n_frames)
        .map(|t| {
            let start = (t * params.hop) as isize - pad;
            for (k, s) in segment.iter_mut().enumerate() {
                let idx = start + k as isize;
                *s = if idx >= 0 && (idx as usize) < signal.len() { signal[idx as usize] } else { 0.0 };
            }
            engine.analyze_frame(&segment)
        })
        .collect();
    Spectrogram { frames, params, origin_length: signal.len() }
}

pub fn istft(spec: &Spectrogram) -> Result<Vec<f64>> {
    spec.check()?;
    let engine = StftEngine::new(spec.params)?;
    Ok(istft_with(&engine, spec))
}

pub(crate) fn istft_with(engine: &StftEngine, spec: &Spectrogram) -> Vec<f64> {
    let params = spec.params;
    let len = spec.origin_length;
    let pad = params.pad() as isize;
    let mut out = vec![0.0; len];
    let mut wsum = vec![0.0; len];
    for (t, frame) in spec.frames.iter().enumerate() {
        let chunk = engine.synthesize_frame(frame);
        let start = (t * params.hop) as isize - pad;
        for (k, (&y, &w)) in chunk.iter().zip(engine.window()).enumerate() {
            let idx = start + k as isize;
            if idx >= 0 && (idx as usize) < len {
                out[idx as usize] += y;
                wsum[idx as usize] += w * w;
            }
        }
    }
    for (o, w) in out.iter_mut().zip(&wsum) {
        *o /= w.max(WINDOW_SUM_FLOOR);
    }
    out
}

/// Root-mean-square level; 0 for an empty slice.
pub fn frame_rms(signal: &[f64]) -> f64 {
    if signal.is_empty() {
        return 0.0;
    }
    (signal.iter().map(|x| x * x).sum::<f64>() / signal.len() as f64).sqrt()
}

/// Incremental STFT analysis on the same frame grid as [`stft`].
#[derive(Debug, Clone)]
pub struct StftStream {
    engine: StftEngine,
    // Samples in padded coordinates; `buf[0]` sits at padded index `buf_origin`.
    buf: Vec<f64>,
    buf_origin: usize,
    next_frame: usize,
    pushed: usize,
    finished: bool,
}

impl StftStream {
    pub fn new(engine: StftEngine) -> Self {
        let pad = engine.params().pad();
        Self { engine, buf: vec![0.0; pad], buf_origin: 0, next_frame: 0, pushed: 0, finished: false }
    }

    /// Samples carried over to the next call; always `< win_length`.
    pub fn carried(&self) -> usize {
        self.buf.len()
    }

    pub fn samples_pushed(&self) -> usize {
        self.pushed
    }

    pub fn frames_emitted(&self) -> usize {
        self.next_frame
    }

    pub fn push(&mut self, samples: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        if self.finished {
            return Err(Error::arg("STFT stream already finished"));
        }
        self.buf.extend_from_slice(samples);
        self.pushed += samples.len();
        Ok(self.drain_frames(usize::MAX))
    }

    /// Zero-pads the tail and emits the remaining frames of the offline grid.
    pub fn finish(&mut self) -> Vec<Vec<Complex64>> {
        if self.finished {
            return Vec::new();
        }
        self.finished = true;
        let p = self.engine.params();
        let total = p.num_frames(self.pushed);
        if total <= self.next_frame {
            return Vec::new();
        }
        let needed_end = (total - 1) * p.hop + p.win_length;
        let have_end = self.buf_origin + self.buf.len();
        if needed_end > have_end {
            self.buf.resize(self.buf.len() + needed_end - have_end, 0.0);
        }
        self.drain_frames(total)
    }

    fn drain_frames(&mut self, limit: usize) -> Vec<Vec<Complex64>> {
        let p = self.engine.params();
        let mut frames = Vec::new();
        while self.next_frame < limit {
            let start = self.next_frame * p.hop - self.buf_origin;
            if start + p.win_length > self.buf.len() {
                break;
            }
            frames.push(self.engine.analyze_frame(&self.buf[start..start + p.win_length]));
            self.next_frame += 1;
        }
        let consumed = (self.next_frame * p.hop - self.buf_origin).min(self.buf.len());
        self.buf.drain(..consumed);
        self.buf_origin += consumed;
        frames
    }
}

/// Incremental weighted overlap-add on the grid of [`StftStream`].
#[derive(Debug, Clone)]
pub struct OlaStream {
    engine: StftEngine,
    // Accumulators in original coordinates; `acc[0]` sits at `origin`.
    acc: Vec<f64>,
    wsum: Vec<f64>,
    origin: usize,
    frames: usize,
}

impl OlaStream {
    pub fn new(engine: StftEngine) -> Self {
        Self { engine, acc: Vec::new(), wsum: Vec::new(), origin: 0, frames: 0 }
    }

    /// Samples already returned to the caller.
    pub fn emitted(&self) -> usize {
        self.origin
    }

    /// Adds one frame and returns the samples that no later frame can touch.
    pub fn push_frame(&mut self, bins: &[Complex64]) -> Vec<f64> {
        self.add_frame(bins);
        let p = self.engine.params();
        let next_start = (self.frames * p.hop) as isize - p.pad() as isize;
        if next_start > self.origin as isize {
            self.emit_until(next_start as usize)
        } else {
            Vec::new()
        }
    }

    /// Adds the trailing frames of a stream and flushes everything up to
    /// `total_len` original samples.
    pub fn finish(&mut self, tail_frames: &[Vec<Complex64>], total_len: usize) -> Vec<f64> {
        for f in tail_frames {
            self.add_frame(f);
        }
        if total_len <= self.origin {
            return Vec::new();
        }
        self.emit_until(total_len)
    }

    fn add_frame(&mut self, bins: &[Complex64]) {
        let p = self.engine.params();
        let chunk = self.engine.synthesize_frame(bins);
        let start = (self.frames * p.hop) as isize - p.pad() as isize;
        let end = start + p.win_length as isize;
        if end > self.origin as isize {
            let needed = end as usize - self.origin;
            if self.acc.len() < needed {
                self.acc.resize(needed, 0.0);
                self.wsum.resize(needed, 0.0);
            }
            for (k, (&y, &w)) in chunk.iter().zip(self.engine.window()).enumerate() {
                let idx = start + k as isize;
                if idx >= self.origin as isize {
                    let i = idx as usize - self.origin;
                    self.acc[i] += y;
                    self.wsum[i] += w * w;
                }
            }
        }
        self.frames += 1;
    }

    fn emit_until(&mut self, bound: usize) -> Vec<f64> {
        let n = bound - self.origin;
        if self.acc.len() < n {
            self.acc.resize(n, 0.0);
            self.wsum.resize(n, 0.0);
        }
        let out: Vec<f64> = self.acc[..n]
            .iter()
            .zip(&self.wsum[..n])
            .map(|(a, w)| a / w.max(WINDOW_SUM_FLOOR))
            .collect();
        self.acc.drain(..n);
        self.wsum.drain(..n);
        self.origin = bound;
        out
    }
}
