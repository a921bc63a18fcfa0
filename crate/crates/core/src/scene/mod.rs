//! Spatial two-talker scene simulation for the five-microphone array.
//!
//! Measured room responses are replaced by a free-field model: each
//! microphone receives a fractional-delay (windowed-sinc) impulse at the
//! propagation delay with `1/r` attenuation, plus an optional floor
//! reflection from the image source mirrored below the array.

mod synth;

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, Segment, SAMPLE_RATE};
use crate::dsp::frame_rms;
use crate::error::{Error, Result};
use crate::speaker::Speaker;

pub use synth::{synth_utterance, Lexicon, SynthVoice};

pub const SPEED_OF_SOUND: f64 = 343.0;
pub const NUM_MICS: usize = 5;

/// Partner azimuths of interest, degrees (0 = straight ahead, positive to the right).
pub const FRONTAL_DIRECTIONS: [f64; 5] = [-60.0, -30.0, 0.0, 30.0, 60.0];

/// The full 12-direction grid at 30 degree spacing, `[-180, 180)`.
pub fn direction_grid() -> Vec<f64> {
    (0..12).map(|i| -180.0 + 30.0 * i as f64).collect()
}

pub type Point = [f64; 3];

fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Microphone and mouth positions in meters relative to the glasses bridge.
///
/// Axes: x to the wearer's right, y up, z forward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub mics: Vec<Point>,
    pub mouth: Point,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self {
            mics: vec![
                [-0.07, 0.0, 0.0],
                [-0.06, -0.02, 0.01],
                [0.0, 0.0, 0.0],
                [0.06, -0.02, 0.01],
                [0.07, 0.0, 0.0],
            ],
            mouth: [0.0, -0.08, 0.02],
        }
    }
}

impl ArrayGeometry {
    pub fn new(mics: Vec<Point>, mouth: Point) -> Result<Self> {
        let g = Self { mics, mouth };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mics.len() != NUM_MICS {
            return Err(Error::validation(format!(
                "geometry needs exactly {NUM_MICS} microphones, got {}",
                self.mics.len()
            )));
        }
        for i in 0..self.mics.len() {
            for j in i + 1..self.mics.len() {
                if distance(self.mics[i], self.mics[j]) <= 0.0 {
                    return Err(Error::validation(format!("microphones {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let g: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("geometry: {e}")))?;
        g.validate()?;
        Ok(g)
    }
}

/// Source position at `azimuth_deg` in the horizontal plane through the bridge.
pub fn azimuth_position(azimuth_deg: f64, distance_m: f64) -> Point {
    let a = azimuth_deg.to_radians();
    [distance_m * a.sin(), 0.0, distance_m * a.cos()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorReflection {
    /// Height of the floor plane on the y axis (negative: below the array).
    pub floor_y: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RirConfig {
    /// Distance at which the direct path has unit gain.
    pub ref_distance: f64,
    /// Half-width of the windowed-sinc interpolator in taps.
    pub sinc_half_width: usize,
    pub reflection: Option<FloorReflection>,
    pub sample_rate: u32,
}

impl Default for RirConfig {
    fn default() -> Self {
        Self { ref_distance: 0.1, sinc_half_width: 16, reflection: None, sample_rate: SAMPLE_RATE }
    }
}

impl RirConfig {
    /// Bulk latency added to every impulse so the interpolator stays causal.
    pub fn base_delay(&self) -> f64 {
        self.sinc_half_width as f64
    }
}

/// Direct-path propagation delays in samples (without the bulk latency).
pub fn propagation_delays(mics: &[Point], source: Point, sample_rate: u32) -> Vec<f64> {
    mics.iter()
        .map(|&m| distance(source, m) / SPEED_OF_SOUND * sample_rate as f64)
        .collect()
}

fn add_fractional_impulse(taps: &mut Vec<f64>, delay: f64, amp: f64, half_width: usize) {
    let hw = half_width as f64;
    let last = (delay + hw).ceil() as usize;
    if taps.len() <= last {
        taps.resize(last + 1, 0.0);
    }
    let first = (delay - hw).floor().max(0.0) as usize;
    for (n, tap) in taps.iter_mut().enumerate().take(last + 1).skip(first) {
        let x = n as f64 - delay;
        if x.abs() >= hw {
            continue;
        }
        let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let window = 0.5 * (1.0 + (PI * x / hw).cos());
        *tap += amp * sinc * window;
    }
}

/// Impulse responses from an arbitrary source point to every microphone.
pub fn rirs_for_source(mics: &[Point], source: Point, cfg: &RirConfig) -> Result<Vec<Vec<f64>>> {
    let rate = cfg.sample_rate as f64;
    let mut out = Vec::with_capacity(mics.len());
    for (i, &m) in mics.iter().enumerate() {
        let r = distance(source, m);
        if r < 1e-6 {
            return Err(Error::arg(format!("source coincides with microphone {i}")));
        }
        let mut taps = Vec::new();
        add_fractional_impulse(
            &mut taps,
            cfg.base_delay() + r / SPEED_OF_SOUND * rate,
            cfg.ref_distance / r,
            cfg.sinc_half_width,
        );
        if let Some(refl) = cfg.reflection {
            let image = [source[0], 2.0 * refl.floor_y - source[1], source[2]];
            let ri = distance(image, m);
            add_fractional_impulse(
                &mut taps,
                cfg.base_delay() + ri / SPEED_OF_SOUND * rate,
                refl.gain * cfg.ref_distance / ri,
                cfg.sinc_half_width,
            );
        }
        out.push(taps);
    }
    Ok(out)
}

/// Free-field impulse responses for a source at `azimuth_deg`, `distance_m`.
pub fn synth_rir(
    geometry: &ArrayGeometry,
    azimuth_deg: f64,
    distance_m: f64,
    cfg: &RirConfig,
) -> Result<Vec<Vec<f64>>> {
    if !(distance_m > 0.0) {
        return Err(Error::arg("source distance must be positive"));
    }
    if !(-180.0..180.0).contains(&azimuth_deg) {
        return Err(Error::arg(format!("azimuth {azimuth_deg} outside [-180, 180)")));
    }
    rirs_for_source(&geometry.mics, azimuth_position(azimuth_deg, distance_m), cfg)
}

/// Index of the strongest tap across a set of responses.
fn peak_delay(rirs: &[Vec<f64>]) -> usize {
    rirs.iter()
        .filter_map(|r| {
            r.iter()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .map(|(i, _)| i)
        })
        .max()
        .unwrap_or(0)
}

fn convolve_trimmed(x: &[f64], h: &[f64], out_len: usize) -> Vec<f64> {
    let mut y = vec![0.0; out_len];
    for (k, &hk) in h.iter().enumerate() {
        if hk == 0.0 || k >= out_len {
            continue;
        }
        for (yn, &xn) in y[k..].iter_mut().zip(x) {
            *yn += hk * xn;
        }
    }
    y
}

/// Convolves a mono clip with one response per output channel.
///
/// Output length is the clip length plus the largest direct-path delay
/// (position of the strongest tap).
pub fn spatialize(clip: &AudioClip, rirs: &[Vec<f64>]) -> Result<AudioClip> {
    if clip.num_channels() != 1 {
        return Err(Error::arg("spatialize expects a mono clip"));
    }
    if rirs.is_empty() {
        return Err(Error::arg("need at least one impulse response"));
    }
    let out_len = clip.len() + peak_delay(rirs);
    let x = clip.channel(0);
    let channels = rirs.iter().map(|h| convolve_trimmed(x, h, out_len)).collect();
    AudioClip::new(channels, clip.sample_rate())
}

/// A mono source utterance with its reference text.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceClip {
    pub audio: AudioClip,
    pub text: String,
    pub lang: String,
    pub translation: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub wearer: SourceClip,
    pub partner: SourceClip,
    pub partner_direction: f64,
    pub partner_distance: f64,
    /// Wearer-to-partner level difference on microphone 0, dB.
    pub snr_db: f64,
    /// Seconds of simultaneous speech between the two turns.
    pub overlap_s: f64,
    /// Diffuse noise level relative to the wearer, dB; `None` disables noise.
    pub noise_level_db: Option<f64>,
    /// Who takes the first turn.
    pub first: Speaker,
    pub seed: u64,
    pub rir: RirConfig,
}

impl SceneSpec {
    pub fn new(wearer: SourceClip, partner: SourceClip) -> Self {
        Self {
            wearer,
            partner,
            partner_direction: 0.0,
            partner_distance: 1.5,
            snr_db: 0.0,
            overlap_s: 0.0,
            noise_level_db: None,
            first: Speaker::Wearer,
            seed: 0,
            rir: RirConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !FRONTAL_DIRECTIONS.iter().any(|d| (d - self.partner_direction).abs() < 1e-9) {
            return Err(Error::arg(format!(
                "partner direction {} is not one of {FRONTAL_DIRECTIONS:?}",
                self.partner_direction
            )));
        }
        for (who, clip) in [("wearer", &self.wearer), ("partner", &self.partner)] {
            if clip.audio.num_channels() != 1 {
                return Err(Error::arg(format!("{who} clip must be mono")));
            }
            if clip.audio.sample_rate() != self.rir.sample_rate {
                return Err(Error::arg(format!(
                    "{who} clip is {} Hz, scene runs at {} Hz",
                    clip.audio.sample_rate(),
                    self.rir.sample_rate
                )));
            }
        }
        let shortest = self.wearer.audio.duration_s().min(self.partner.audio.duration_s());
        if !(self.overlap_s >= 0.0 && self.overlap_s <= shortest) {
            return Err(Error::arg(format!(
                "overlap {}s must lie in [0, {shortest}] (shortest turn)",
                self.overlap_s
            )));
        }
        if !(self.partner_distance > 0.0) {
            return Err(Error::arg("partner distance must be positive"));
        }
        Ok(())
    }
}

/// A simulated five-channel conversation with its clean references.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub mixture: AudioClip,
    pub clean_wearer: AudioClip,
    pub clean_partner: AudioClip,
    pub noise: Option<AudioClip>,
    pub segments: Vec<Segment>,
}

impl Scene {
    pub fn duration_s(&self) -> f64 {
        self.mixture.duration_s()
    }
}

fn place(dst: &mut [Vec<f64>], src: &AudioClip, offset: usize, gain: f64) {
    for (d, s) in dst.iter_mut().zip(src.channels()) {
        for (dv, &sv) in d[offset..].iter_mut().zip(s) {
            *dv += gain * sv;
        }
    }
}

pub fn simulate_scene(spec: &SceneSpec, geometry: &ArrayGeometry) -> Result<Scene> {
    spec.validate()?;
    geometry.validate()?;
    let rate = spec.rir.sample_rate;

    let wearer_rirs = rirs_for_source(&geometry.mics, geometry.mouth, &spec.rir)?;
    let partner_rirs = synth_rir(geometry, spec.partner_direction, spec.partner_distance, &spec.rir)?;
    let wearer_sp = spatialize(&spec.wearer.audio, &wearer_rirs)?;
    let partner_sp = spatialize(&spec.partner.audio, &partner_rirs)?;

    let (first, second) = match spec.first {
        Speaker::Wearer => (&spec.wearer, &spec.partner),
        Speaker::Partner => (&spec.partner, &spec.wearer),
    };
    let overlap = ((spec.overlap_s * rate as f64).round() as usize).min(first.audio.len().min(second.audio.len()));
    let second_offset = first.audio.len() - overlap;
    let (wearer_offset, partner_offset) = match spec.first {
        Speaker::Wearer => (0, second_offset),
        Speaker::Partner => (second_offset, 0),
    };

    let total = (wearer_offset + wearer_sp.len()).max(partner_offset + partner_sp.len());
    let mut clean_w = vec![vec![0.0; total]; NUM_MICS];
    let mut clean_p = vec![vec![0.0; total]; NUM_MICS];
    place(&mut clean_w, &wearer_sp, wearer_offset, 1.0);
    place(&mut clean_p, &partner_sp, partner_offset, 1.0);

    let rms_w = frame_rms(&clean_w[0]);
    let rms_p = frame_rms(&clean_p[0]);
    if rms_p > 0.0 && rms_w > 0.0 {
        let gain = rms_w / (rms_p * 10f64.powf(spec.snr_db / 20.0));
        clean_p.iter_mut().flatten().for_each(|v| *v *= gain);
    }

    let noise = spec.noise_level_db.map(|db| {
        let sigma = rms_w * 10f64.powf(db / 20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        (0..NUM_MICS)
            .map(|_| {
                (0..total)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        sigma * z
                    })
                    .collect::<Vec<f64>>()
            })
            .collect::<Vec<_>>()
    });

    let mut mixture = clean_w.clone();
    for (m, p) in mixture.iter_mut().zip(&clean_p) {
        for (mv, pv) in m.iter_mut().zip(p) {
            *mv += pv;
        }
    }
    if let Some(n) = &noise {
        for (m, nc) in mixture.iter_mut().zip(n) {
            for (mv, nv) in m.iter_mut().zip(nc) {
                *mv += nv;
            }
        }
    }

    let seg = |speaker: Speaker, clip: &SourceClip, offset: usize| Segment {
        speaker,
        start: offset as f64 / rate as f64,
        end: (offset + clip.audio.len()) as f64 / rate as f64,
        text: clip.text.clone(),
        lang: clip.lang.clone(),
        translation: clip.translation.clone(),
    };
    let mut segments = vec![
        seg(Speaker::Wearer, &spec.wearer, wearer_offset),
        seg(Speaker::Partner, &spec.partner, partner_offset),
    ];
    segments.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.speaker.cmp(&b.speaker)));

    Ok(Scene {
        mixture: AudioClip::new(mixture, rate)?,
        clean_wearer: AudioClip::new(clean_w, rate)?,
        clean_partner: AudioClip::new(clean_p, rate)?,
        noise: noise.map(|n| AudioClip::new(n, rate)).transpose()?,
        segments,
    })
}
