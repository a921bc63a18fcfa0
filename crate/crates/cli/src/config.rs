use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use dirspeech_core::attribution::TaggerConfig;
use dirspeech_core::dsp::StftParams;
use dirspeech_core::scene::{ArrayGeometry, FRONTAL_DIRECTIONS};
use dirspeech_core::slm::{MockMode, PromptCatalog, ReferenceChannel, StreamConfig, DEFAULT_SLM_TIMEOUT};
use dirspeech_core::{Error, WavEncoding};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeparatorConfig {
    /// Ideal ratio masks from the clean references.
    Oracle,
    Passthrough,
    External {
        endpoint: String,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum SlmConfig {
    MockOracle,
    /// Word substitutions at `sub_rate`; the seed defaults to the run seed.
    MockNoisy {
        #[serde(default)]
        seed: Option<u64>,
        sub_rate: f64,
    },
    External {
        endpoint: String,
        #[serde(default)]
        timeout_ms: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub count: usize,
    /// Wearer-to-partner level range, dB.
    pub snr_db: [f64; 2],
    pub overlap_s: [f64; 2],
    pub noise_db: Option<f64>,
    pub partner_distance: f64,
    pub directions: Vec<f64>,
    /// Words per synthetic utterance.
    pub words: [usize; 2],
    pub encoding: WavEncoding,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            count: 10,
            snr_db: [0.0, 15.0],
            overlap_s: [0.0, 0.0],
            noise_db: None,
            partner_distance: 1.5,
            directions: FRONTAL_DIRECTIONS.to_vec(),
            words: [3, 6],
            encoding: WavEncoding::Float32,
        }
    }
}

impl SimulateConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !range_ok(self.snr_db) {
            return Err(Error::Config(format!("simulate.snr_db {:?} is not a range", self.snr_db)).into());
        }
        if !range_ok(self.overlap_s) || self.overlap_s[0] < 0.0 {
            return Err(Error::Config(format!("simulate.overlap_s {:?} is not a non-negative range", self.overlap_s)).into());
        }
        if self.words[0] == 0 || self.words[0] > self.words[1] {
            return Err(Error::Config(format!("simulate.words {:?} is not a positive range", self.words)).into());
        }
        if self.directions.is_empty() {
            return Err(Error::Config("simulate.directions is empty".into()).into());
        }
        if let Some(bad) = self.directions.iter().find(|d| !FRONTAL_DIRECTIONS.iter().any(|f| (*f - **d).abs() < 1e-9)) {
            return Err(Error::Config(format!("simulate.directions: {bad} is not one of {FRONTAL_DIRECTIONS:?}")).into());
        }
        Ok(())
    }
}

/// Everything a run needs, loaded from one JSON file; command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Option<PathBuf>,
    pub stft: StftParams,
    pub tagger: TaggerConfig,
    pub separator: SeparatorConfig,
    pub slm: SlmConfig,
    pub wearer_lang: String,
    pub partner_lang: String,
    pub out: PathBuf,
    pub seed: u64,
    pub min_interval_chunks: usize,
    pub reference: ReferenceChannel,
    pub prompts: Option<PromptCatalog>,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let stream = StreamConfig::default();
        Self {
            geometry: None,
            stft: stream.stft,
            tagger: stream.tagger,
            separator: SeparatorConfig::Oracle,
            slm: SlmConfig::MockOracle,
            wearer_lang: stream.wearer_lang,
            partner_lang: stream.partner_lang,
            out: PathBuf::from("out"),
            seed: 0,
            min_interval_chunks: stream.min_interval_chunks,
            reference: stream.reference,
            prompts: None,
            simulate: SimulateConfig::default(),
        }
    }
}

fn timeout(ms: Option<u64>, default: Duration) -> Duration {
    ms.map_or(default, Duration::from_millis)
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(Error::Io)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks the fields every command relies on, including that referenced
    /// paths exist.
    pub fn validate(&self) -> anyhow::Result<()> {
        if let Some(g) = &self.geometry {
            if !g.is_file() {
                return Err(Error::Config(format!("geometry file {} does not exist", g.display())).into());
            }
        }
        self.stream_config().validate()?;
        if let SlmConfig::MockNoisy { seed, sub_rate } = &self.slm {
            MockMode::Noisy { seed: seed.unwrap_or(self.seed), sub_rate: *sub_rate }.validate()?;
        }
        self.simulate.validate()
    }

    pub fn geometry(&self) -> anyhow::Result<ArrayGeometry> {
        match &self.geometry {
            Some(p) => Ok(ArrayGeometry::from_json_file(p).with_context(|| format!("loading geometry {}", p.display()))?),
            None => Ok(ArrayGeometry::default()),
        }
    }

    pub fn stream_config(&self) -> StreamConfig {
        let mut cfg = StreamConfig {
            tagger: self.tagger,
            stft: self.stft,
            min_interval_chunks: self.min_interval_chunks,
            reference: self.reference,
            wearer_lang: self.wearer_lang.clone(),
            partner_lang: self.partner_lang.clone(),
            ..StreamConfig::default()
        };
        if let Some(p) = &self.prompts {
            cfg.prompts = p.clone();
        }
        cfg
    }

    pub fn mock_mode(&self) -> Option<MockMode> {
        match &self.slm {
            SlmConfig::MockOracle => Some(MockMode::Oracle),
            SlmConfig::MockNoisy { seed, sub_rate } => {
                Some(MockMode::Noisy { seed: seed.unwrap_or(self.seed), sub_rate: *sub_rate })
            }
            SlmConfig::External { .. } => None,
        }
    }

    pub fn slm_timeout(&self) -> Duration {
        match &self.slm {
            SlmConfig::External { timeout_ms, .. } => timeout(*timeout_ms, DEFAULT_SLM_TIMEOUT),
            _ => DEFAULT_SLM_TIMEOUT,
        }
    }

    pub fn separator_timeout(&self) -> Duration {
        match &self.separator {
            SeparatorConfig::External { timeout_ms, .. } => {
                timeout(*timeout_ms, dirspeech_core::separator::EXTERNAL_TIMEOUT)
            }
            _ => dirspeech_core::separator::EXTERNAL_TIMEOUT,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"seed": 4, "slm": {"backend": "mock_noisy", "sub_rate": 0.1}, "tagger": {"alpha": 1.5}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.tagger.alpha, 1.5);
        assert_eq!(cfg.tagger.vad_floor, TaggerConfig::default().vad_floor);
        assert_eq!(cfg.mock_mode(), Some(MockMode::Noisy { seed: 4, sub_rate: 0.1 }));
        assert_eq!(cfg.separator, SeparatorConfig::Oracle);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 4}"#).is_err());
    }

    #[test]
    fn missing_geometry_fails_validation() {
        let cfg = RunConfig { geometry: Some("/nonexistent/geometry.json".into()), ..RunConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bad_simulate_ranges() {
        let mut cfg = RunConfig::default();
        cfg.simulate.snr_db = [5.0, 1.0];
        assert!(cfg.validate().is_err());
        cfg.simulate = SimulateConfig { directions: vec![45.0], ..SimulateConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
