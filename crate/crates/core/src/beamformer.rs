//! Fixed-coefficient multi-beam spatial filtering.
//!
//! Each beam holds one complex weight per frequency bin and microphone and
//! is applied in the STFT domain: `Y(t, f) = sum_m w(f, m) X_m(t, f)`.
//! Designed beams are delay-and-sum, normalized so the response toward the
//! steering point is exactly one. Externally designed weights can be loaded
//! from JSON and used unchanged.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioClip, SAMPLE_RATE};
use crate::dsp::{istft_with, stft_with, Spectrogram, StftEngine, StftParams};
use crate::error::{Error, Result};
use crate::scene::{azimuth_position, ArrayGeometry, Point, FRONTAL_DIRECTIONS, SPEED_OF_SOUND};

/// What a beam is steered at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamDirection {
    /// Near-field steering to the wearer's mouth.
    Mouth,
    /// Far-field plane wave from an azimuth in degrees.
    Azimuth(f64),
}

impl fmt::Display for BeamDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BeamDirection::Mouth => f.write_str("mouth"),
            BeamDirection::Azimuth(a) => write!(f, "{a}"),
        }
    }
}

impl Serialize for BeamDirection {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BeamDirection::Mouth => s.serialize_str("mouth"),
            BeamDirection::Azimuth(a) => s.serialize_f64(*a),
        }
    }
}

impl<'de> Deserialize<'de> for BeamDirection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(a) => Ok(BeamDirection::Azimuth(a)),
            Raw::Str(s) if s == "mouth" => Ok(BeamDirection::Mouth),
            Raw::Str(s) => s
                .parse::<f64>()
                .map(BeamDirection::Azimuth)
                .map_err(|_| de::Error::custom(format!("unknown beam direction `{s}`"))),
        }
    }
}

/// Weights for `K + 1` beams; beam 0 is the mouth beam.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    pub directions: Vec<BeamDirection>,
    /// Indexed beam, bin, microphone.
    pub weights: Vec<Vec<Vec<Complex64>>>,
    pub params: StftParams,
}

#[derive(Serialize, Deserialize)]
struct WeightFile {
    directions: Vec<BeamDirection>,
    fft_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    win_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hop: Option<usize>,
    weights: Vec<Vec<Vec<[f64; 2]>>>,
}

impl BeamWeights {
    pub fn num_beams(&self) -> usize {
        self.weights.len()
    }

    pub fn num_mics(&self) -> usize {
        self.weights.first().and_then(|b| b.first()).map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.weights.is_empty() || self.weights.len() != self.directions.len() {
            return Err(Error::validation(format!(
                "{} weight sets for {} directions",
                self.weights.len(),
                self.directions.len()
            )));
        }
        let bins = self.params.num_bins();
        let mics = self.num_mics();
        for (b, beam) in self.weights.iter().enumerate() {
            if beam.len() != bins {
                return Err(Error::validation(format!("beam {b} has {} bins, expected {bins}", beam.len())));
            }
            if beam.iter().any(|bin| bin.len() != mics || mics == 0) {
                return Err(Error::validation(format!("beam {b} has inconsistent microphone count")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = WeightFile {
            directions: self.directions.clone(),
            fft_size: self.params.fft_size,
            win_length: Some(self.params.win_length),
            hop: Some(self.params.hop),
            weights: self
                .weights
                .iter()
                .map(|beam| beam.iter().map(|bin| bin.iter().map(|c| [c.re, c.im]).collect()).collect())
                .collect(),
        };
        serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightFile = serde_json::from_str(text).map_err(|e| Error::Config(format!("weight file: {e}")))?;
        let defaults = StftParams::default();
        let params = StftParams {
            fft_size: file.fft_size,
            win_length: file.win_length.unwrap_or(defaults.win_length.min(file.fft_size)),
            hop: file.hop.unwrap_or(defaults.hop),
        };
        let weights = file
            .weights
            .into_iter()
            .map(|beam| {
                beam.into_iter()
                    .map(|bin| bin.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                    .collect()
            })
            .collect();
        let bw = Self { directions: file.directions, weights, params };
        bw.validate()?;
        Ok(bw)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

fn bin_frequency(bin: usize, params: &StftParams) -> f64 {
    bin as f64 * SAMPLE_RATE as f64 / params.fft_size as f64
}

/// Relative delays (seconds) and gains of a steering target, referenced to
/// the array origin.
fn steering_model(mics: &[Point], direction: BeamDirection, mouth: Point) -> Vec<(f64, f64)> {
    match direction {
        BeamDirection::Azimuth(az) => {
            let u = azimuth_position(az, 1.0);
            mics.iter()
                .map(|p| (-(u[0] * p[0] + u[1] * p[1] + u[2] * p[2]) / SPEED_OF_SOUND, 1.0))
                .collect()
        }
        BeamDirection::Mouth => {
            let dist = |a: Point, b: Point| {
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            };
            let r_ref = dist(mouth, [0.0; 3]);
            mics.iter()
                .map(|&p| {
                    let r = dist(mouth, p);
                    ((r - r_ref) / SPEED_OF_SOUND, r_ref / r)
                })
                .collect()
        }
    }
}

/// Steering vector of `direction` at frequency `freq_hz`.
pub fn steering_vector(mics: &[Point], direction: BeamDirection, mouth: Point, freq_hz: f64) -> Vec<Complex64> {
    steering_model(mics, direction, mouth)
        .into_iter()
        .map(|(tau, gain)| Complex64::from_polar(gain, -2.0 * PI * freq_hz * tau))
        .collect()
}

/// `sum_m w_m d_m`: the beam's complex gain for a given steering vector.
pub fn array_response(weights: &[Complex64], steering: &[Complex64]) -> Complex64 {
    weights.iter().zip(steering).map(|(w, d)| w * d).sum()
}

/// Distortionless delay-and-sum weights (`F x M`) for arbitrary mic positions.
pub fn steering_weights(mics: &[Point], mouth: Point, direction: BeamDirection, params: StftParams) -> Vec<Vec<Complex64>> {
    (0..params.num_bins())
        .map(|bin| {
            let d = steering_vector(mics, direction, mouth, bin_frequency(bin, &params));
            let norm: f64 = d.iter().map(|c| c.norm_sqr()).sum();
            d.iter().map(|c| c.conj() / norm).collect()
        })
        .collect()
}

pub fn design_delay_and_sum(
    geometry: &ArrayGeometry,
    direction: BeamDirection,
    params: StftParams,
) -> Vec<Vec<Complex64>> {
    steering_weights(&geometry.mics, geometry.mouth, direction, params)
}

/// Mouth beam followed by one beam per listed azimuth.
pub fn design_beams(geometry: &ArrayGeometry, azimuths: &[f64], params: StftParams) -> Result<BeamWeights> {
    params.validate()?;
    geometry.validate()?;
    let directions: Vec<BeamDirection> = std::iter::once(BeamDirection::Mouth)
        .chain(azimuths.iter().map(|&a| BeamDirection::Azimuth(a)))
        .collect();
    let weights = directions.iter().map(|&d| design_delay_and_sum(geometry, d, params)).collect();
    Ok(BeamWeights { directions, weights, params })
}

/// The default `K = 5` far-field beams at the frontal directions plus the mouth beam.
pub fn default_beams(geometry: &ArrayGeometry, params: StftParams) -> Result<BeamWeights> {
    design_beams(geometry, &FRONTAL_DIRECTIONS, params)
}

pub fn apply_beams(mixture: &AudioClip, weights: &BeamWeights) -> Result<AudioClip> {
    weights.validate()?;
    if mixture.num_channels() != weights.num_mics() {
        return Err(Error::arg(format!(
            "mixture has {} channels, weights expect {}",
            mixture.num_channels(),
            weights.num_mics()
        )));
    }
    mixture.require_rate(SAMPLE_RATE)?;
    if mixture.is_empty() {
        return AudioClip::zeros(weights.num_beams(), 0, mixture.sample_rate());
    }
    let engine = StftEngine::new(weights.params)?;
    let specs: Vec<Spectrogram> = mixture.channels().iter().map(|ch| stft_with(&engine, ch)).collect();
    let n_frames = specs[0].num_frames();
    let beams = weights
        .weights
        .iter()
        .map(|beam| {
            let frames = (0..n_frames)
                .map(|t| {
                    beam.iter()
                        .enumerate()
                        .map(|(f, w_bin)| w_bin.iter().zip(&specs).map(|(w, s)| w * s.frames[t][f]).sum())
                        .collect()
                })
                .collect();
            let spec = Spectrogram { frames, params: weights.params, origin_length: mixture.len() };
            istft_with(&engine, &spec)
        })
        .collect();
    AudioClip::new(beams, mixture.sample_rate())
}

pub fn select_mouth_beam(beams: &AudioClip) -> AudioClip {
    AudioClip::mono(beams.channel(0).to_vec(), beams.sample_rate()).expect("channel of a valid clip")
}
