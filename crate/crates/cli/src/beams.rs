use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use dirspeech_core::audio::{read_wav, write_wav};
use dirspeech_core::beamformer::{apply_beams, design_beams};
use dirspeech_core::scene::FRONTAL_DIRECTIONS;
use dirspeech_core::WavEncoding;

use crate::config::RunConfig;
use crate::output::AtomicFile;

#[derive(Debug, Args)]
pub struct BeamsArgs {
    /// Far-field beam azimuths in degrees; the mouth beam is always beam 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    azimuths: Option<Vec<f64>>,
    /// Five-channel recording to beamform into `beams.wav`.
    #[arg(long)]
    input: Option<PathBuf>,
}

pub fn run(cfg: RunConfig, args: BeamsArgs) -> anyhow::Result<()> {
    cfg.validate()?;
    let geometry = cfg.geometry()?;
    let azimuths = args.azimuths.unwrap_or_else(|| FRONTAL_DIRECTIONS.to_vec());
    let weights = design_beams(&geometry, &azimuths, cfg.stft)?;
    let mut file = AtomicFile::create(cfg.out.join("beams.json"))?;
    std::io::Write::write_all(file.writer(), weights.to_json()?.as_bytes()).map_err(dirspeech_core::Error::Io)?;
    let path = file.commit()?;
    println!("{} beams x {} bins x {} mics -> {}", weights.num_beams(), cfg.stft.num_bins(), weights.num_mics(), path.display());
    if let Some(input) = &args.input {
        let clip = read_wav(input).with_context(|| format!("reading {}", input.display()))?;
        let beams = apply_beams(&clip, &weights)?;
        let dest = cfg.out.join("beams.wav");
        write_wav(&beams, &dest, WavEncoding::Float32)?;
        println!("{} beam channels -> {}", beams.num_channels(), dest.display());
    }
    Ok(())
}
