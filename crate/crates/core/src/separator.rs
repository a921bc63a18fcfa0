//! Two-source separation of the reference channel by time-frequency masking.
//!
//! [`oracle_irm`] computes ideal ratio masks from clean references, which
//! gives a best-case separator with known ground truth. A trained network
//! can be plugged in through the external line protocol
//! ([`ExternalSeparator`]). [`StreamingSeparator`] runs the mask pipeline
//! chunk by chunk on the same STFT grid as the offline path, with an
//! algorithmic latency of `win_length - hop` samples.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::time::Duration;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::dsp::{istft_with, stft_with, OlaStream, Spectrogram, StftEngine, StftParams, StftStream};
use crate::error::{Error, Result};
use crate::ndjson;
use crate::CHUNK_SAMPLES;

/// Guard in the ratio-mask denominator.
pub const IRM_EPS: f64 = 1e-8;

/// Per-chunk budget for the external separator.
pub const EXTERNAL_TIMEOUT: Duration = Duration::from_millis(200);

/// Wearer and partner masks, `T x F`, entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    pub wearer: Vec<Vec<f64>>,
    pub partner: Vec<Vec<f64>>,
}

impl MaskPair {
    pub fn shape(&self) -> (usize, usize) {
        (self.wearer.len(), self.wearer.first().map_or(0, Vec::len))
    }

    pub fn filled(frames: usize, bins: usize, wearer: f64, partner: f64) -> Self {
        Self { wearer: vec![vec![wearer; bins]; frames], partner: vec![vec![partner; bins]; frames] }
    }

    pub fn validate(&self) -> Result<()> {
        let (t, f) = self.shape();
        let same = |m: &Vec<Vec<f64>>| m.len() == t && m.iter().all(|row| row.len() == f);
        if !same(&self.wearer) || !same(&self.partner) {
            return Err(Error::arg("mask matrices have inconsistent shapes"));
        }
        if self.wearer.iter().chain(&self.partner).flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::arg("mask entries must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn irm_bin(w: Complex64, p: Complex64) -> (f64, f64) {
    let (aw, ap) = (w.norm(), p.norm());
    let denom = aw + ap + IRM_EPS;
    (aw / denom, ap / denom)
}

pub fn oracle_irm(mix: &Spectrogram, wearer: &Spectrogram, partner: &Spectrogram) -> Result<MaskPair> {
    if mix.shape() != wearer.shape() || mix.shape() != partner.shape() {
        return Err(Error::arg(format!(
            "spectrogram shapes differ: mix {:?}, wearer {:?}, partner {:?}",
            mix.shape(),
            wearer.shape(),
            partner.shape()
        )));
    }
    let mut masks = MaskPair { wearer: Vec::new(), partner: Vec::new() };
    for (fw, fp) in wearer.frames.iter().zip(&partner.frames) {
        let (mw, mp): (Vec<f64>, Vec<f64>) = fw.iter().zip(fp).map(|(&w, &p)| irm_bin(w, p)).unzip();
        masks.wearer.push(mw);
        masks.partner.push(mp);
    }
    Ok(masks)
}

fn masked(spec: &Spectrogram, mask: &[Vec<f64>]) -> Spectrogram {
    let frames = spec
        .frames
        .iter()
        .zip(mask)
        .map(|(row, m)| row.iter().zip(m).map(|(c, &g)| c * g).collect())
        .collect();
    Spectrogram { frames, params: spec.params, origin_length: spec.origin_length }
}

/// Offline masking of a mono reference channel; returns `(wearer, partner)`.
pub fn apply_masks(reference: &AudioClip, masks: &MaskPair, params: StftParams) -> Result<(AudioClip, AudioClip)> {
    if reference.num_channels() != 1 {
        return Err(Error::arg("reference must be mono"));
    }
    masks.validate()?;
    let rate = reference.sample_rate();
    if reference.is_empty() {
        return Ok((AudioClip::mono(vec![], rate)?, AudioClip::mono(vec![], rate)?));
    }
    let engine = StftEngine::new(params)?;
    let spec = stft_with(&engine, reference.channel(0));
    if masks.shape() != spec.shape() {
        return Err(Error::arg(format!(
            "mask shape {:?} does not match reference spectrogram {:?}",
            masks.shape(),
            spec.shape()
        )));
    }
    let wearer = istft_with(&engine, &masked(&spec, &masks.wearer));
    let partner = istft_with(&engine, &masked(&spec, &masks.partner));
    Ok((AudioClip::mono(wearer, rate)?, AudioClip::mono(partner, rate)?))
}

/// Oracle separation of a full signal: masks from the clean references,
/// applied to the mixture reference channel.
pub fn oracle_separate(
    mixture: &[f64],
    clean_wearer: &[f64],
    clean_partner: &[f64],
    params: StftParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if mixture.len() != clean_wearer.len() || mixture.len() != clean_partner.len() {
        return Err(Error::arg("mixture and references differ in length"));
    }
    if mixture.is_empty() {
        return Ok((vec![], vec![]));
    }
    let engine = StftEngine::new(params)?;
    let masks = oracle_irm(
        &stft_with(&engine, mixture),
        &stft_with(&engine, clean_wearer),
        &stft_with(&engine, clean_partner),
    )?;
    let (w, p) = apply_masks(&AudioClip::mono(mixture.to_vec(), SAMPLE_RATE)?, &masks, params)?;
    Ok((w.into_channels().remove(0), p.into_channels().remove(0)))
}

/// Output of one separation step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeparatedChunk {
    pub wearer: Vec<f64>,
    pub partner: Vec<f64>,
}

impl SeparatedChunk {
    pub fn len(&self) -> usize {
        self.wearer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wearer.is_empty()
    }
}

/// Clean references aligned with a mixture chunk, for the oracle backend.
#[derive(Debug, Clone, Copy)]
pub struct OracleRefs<'a> {
    pub wearer: &'a [f64],
    pub partner: &'a [f64],
}

/// One chunk handed to a separator backend.
#[derive(Debug, Clone, Copy)]
pub struct ChunkInput<'a> {
    pub index: usize,
    pub mixture: &'a [f64],
    pub oracle: Option<OracleRefs<'a>>,
}

/// A chunk-wise separator. Outputs may lag the input; concatenating every
/// `push` result and the final `finish` result yields the full signal.
pub trait SeparatorBackend {
    fn push(&mut self, chunk: &ChunkInput<'_>) -> Result<SeparatedChunk>;
    fn finish(&mut self) -> Result<SeparatedChunk>;
}

/// Chunk-wise oracle-mask separation carrying STFT and overlap-add state.
#[derive(Debug, Clone)]
pub struct StreamingSeparator {
    mix: StftStream,
    wearer_ref: StftStream,
    partner_ref: StftStream,
    out_wearer: OlaStream,
    out_partner: OlaStream,
    chunk_size: usize,
    chunks: usize,
    finished: bool,
}

impl StreamingSeparator {
    pub fn new(params: StftParams) -> Result<Self> {
        Self::with_chunk_size(params, CHUNK_SAMPLES)
    }

    pub fn with_chunk_size(params: StftParams, chunk_size: usize) -> Result<Self> {
        let engine = StftEngine::new(params)?;
        Ok(Self {
            mix: StftStream::new(engine.clone()),
            wearer_ref: StftStream::new(engine.clone()),
            partner_ref: StftStream::new(engine.clone()),
            out_wearer: OlaStream::new(engine.clone()),
            out_partner: OlaStream::new(engine),
            chunk_size,
            chunks: 0,
            finished: false,
        })
    }

    pub fn chunks_processed(&self) -> usize {
        self.chunks
    }

    /// Input samples held back for the next frame (`< win_length`).
    pub fn carried(&self) -> usize {
        self.mix.carried()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn separate_frames(
        &mut self,
        mix: &[Vec<Complex64>],
        wearer: &[Vec<Complex64>],
        partner: &[Vec<Complex64>],
    ) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
        let mut out_w = Vec::with_capacity(mix.len());
        let mut out_p = Vec::with_capacity(mix.len());
        for ((x, w), p) in mix.iter().zip(wearer).zip(partner) {
            let (yw, yp): (Vec<Complex64>, Vec<Complex64>) = x
                .iter()
                .zip(w.iter().zip(p))
                .map(|(&xb, (&wb, &pb))| {
                    let (mw, mp) = irm_bin(wb, pb);
                    (xb * mw, xb * mp)
                })
                .unzip();
            out_w.push(yw);
            out_p.push(yp);
        }
        (out_w, out_p)
    }

    /// Feeds one chunk (at most `chunk_size` samples). A short chunk ends
    /// the stream and flushes the tail; an empty chunk is a no-op.
    pub fn process_chunk(&mut self, mixture: &[f64], refs: OracleRefs<'_>) -> Result<SeparatedChunk> {
        if mixture.len() > self.chunk_size {
            return Err(Error::arg(format!(
                "chunk of {} samples exceeds the {}-sample chunk size",
                mixture.len(),
                self.chunk_size
            )));
        }
        if refs.wearer.len() != mixture.len() || refs.partner.len() != mixture.len() {
            return Err(Error::arg("oracle references must match the chunk length"));
        }
        if mixture.is_empty() {
            return Ok(SeparatedChunk::default());
        }
        if self.finished {
            return Err(Error::arg("separator stream already ended with a short chunk"));
        }
        let fm = self.mix.push(mixture)?;
        let fw = self.wearer_ref.push(refs.wearer)?;
        let fp = self.partner_ref.push(refs.partner)?;
        let (yw, yp) = self.separate_frames(&fm, &fw, &fp);
        let mut out = SeparatedChunk::default();
        for (w, p) in yw.iter().zip(&yp) {
            out.wearer.extend(self.out_wearer.push_frame(w));
            out.partner.extend(self.out_partner.push_frame(p));
        }
        self.chunks += 1;
        if mixture.len() < self.chunk_size {
            let tail = self.flush();
            out.wearer.extend(tail.wearer);
            out.partner.extend(tail.partner);
        }
        Ok(out)
    }

    /// Ends the stream and returns the samples still held in the overlap-add tails.
    pub fn flush(&mut self) -> SeparatedChunk {
        if self.finished {
            return SeparatedChunk::default();
        }
        self.finished = true;
        let total = self.mix.samples_pushed();
        let fm = self.mix.finish();
        let fw = self.wearer_ref.finish();
        let fp = self.partner_ref.finish();
        let (yw, yp) = self.separate_frames(&fm, &fw, &fp);
        SeparatedChunk {
            wearer: self.out_wearer.finish(&yw, total),
            partner: self.out_partner.finish(&yp, total),
        }
    }
}

impl SeparatorBackend for StreamingSeparator {
    fn push(&mut self, chunk: &ChunkInput<'_>) -> Result<SeparatedChunk> {
        let refs = chunk
            .oracle
            .ok_or_else(|| Error::backend("oracle separator needs clean references"))?;
        self.process_chunk(chunk.mixture, refs)
    }

    fn finish(&mut self) -> Result<SeparatedChunk> {
        Ok(self.flush())
    }
}

/// Treats the whole chunk as wearer speech; used when no separator is available.
#[derive(Debug, Clone, Copy, Default)]
pub struct Passthrough;

impl SeparatorBackend for Passthrough {
    fn push(&mut self, chunk: &ChunkInput<'_>) -> Result<SeparatedChunk> {
        Ok(SeparatedChunk { wearer: chunk.mixture.to_vec(), partner: vec![0.0; chunk.mixture.len()] })
    }

    fn finish(&mut self) -> Result<SeparatedChunk> {
        Ok(SeparatedChunk::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatorRequest {
    pub chunk_idx: usize,
    pub rate: u32,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatorResponse {
    pub chunk_idx: usize,
    pub wearer: Vec<f64>,
    pub partner: Vec<f64>,
}

/// Client for a separator service speaking JSON lines over TCP.
pub struct ExternalSeparator {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    timeout: Duration,
    pending: BTreeMap<usize, SeparatorResponse>,
}

impl ExternalSeparator {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        Self::connect_with_timeout(addr, EXTERNAL_TIMEOUT)
    }

    pub fn connect_with_timeout(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self> {
        let addrs: Vec<SocketAddr> = addr
            .to_socket_addrs()
            .map_err(|e| Error::backend(format!("resolve separator address: {e}")))?
            .collect();
        let mut last = None;
        for a in addrs {
            match TcpStream::connect_timeout(&a, timeout) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(timeout)).map_err(ndjson::transport_error)?;
                    stream.set_write_timeout(Some(timeout)).map_err(ndjson::transport_error)?;
                    stream.set_nodelay(true).ok();
                    let writer = BufWriter::new(stream.try_clone().map_err(ndjson::transport_error)?);
                    return Ok(Self { reader: BufReader::new(stream), writer, timeout, pending: BTreeMap::new() });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(Error::backend(format!(
            "cannot reach separator service: {}",
            last.map_or_else(|| "no address".to_string(), |e| e.to_string())
        )))
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn send(&mut self, chunk_idx: usize, samples: &[f64]) -> Result<()> {
        let req = SeparatorRequest { chunk_idx, rate: SAMPLE_RATE, samples: samples.to_vec() };
        ndjson::write_line(&mut self.writer, &req)
    }

    fn receive(&mut self, chunk_idx: usize, expected_len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let resp = loop {
            if let Some(r) = self.pending.remove(&chunk_idx) {
                break r;
            }
            let r: SeparatorResponse = ndjson::read_line(&mut self.reader)?
                .ok_or_else(|| Error::backend("separator service closed the connection"))?;
            self.pending.insert(r.chunk_idx, r);
        };
        if resp.wearer.len() != expected_len || resp.partner.len() != expected_len {
            return Err(Error::backend(format!(
                "chunk {chunk_idx}: service returned {}/{} samples for a {expected_len}-sample chunk",
                resp.wearer.len(),
                resp.partner.len()
            )));
        }
        Ok((resp.wearer, resp.partner))
    }

    /// Separates one chunk; returns `(wearer, partner)`.
    pub fn separate(&mut self, chunk_idx: usize, samples: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.send(chunk_idx, samples)?;
        self.receive(chunk_idx, samples.len())
    }

    /// Sends several chunks back to back and reassembles the replies by
    /// chunk index, tolerating out-of-order delivery.
    pub fn separate_batch(&mut self, chunks: &[(usize, &[f64])]) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        for &(idx, samples) in chunks {
            self.send(idx, samples)?;
        }
        chunks.iter().map(|&(idx, samples)| self.receive(idx, samples.len())).collect()
    }
}

impl SeparatorBackend for ExternalSeparator {
    fn push(&mut self, chunk: &ChunkInput<'_>) -> Result<SeparatedChunk> {
        if chunk.mixture.is_empty() {
            return Ok(SeparatedChunk::default());
        }
        let (wearer, partner) = self.separate(chunk.index, chunk.mixture)?;
        Ok(SeparatedChunk { wearer, partner })
    }

    fn finish(&mut self) -> Result<SeparatedChunk> {
        Ok(SeparatedChunk::default())
    }
}
