use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use dirspeech_core::audio::{read_wav, write_wav, CleanRefs};
use dirspeech_core::scene::{
    simulate_scene, synth_utterance, ArrayGeometry, Lexicon, Scene, SceneSpec, SourceClip, SynthVoice,
};
use dirspeech_core::{AudioClip, Error, ManifestEntry, Speaker, SAMPLE_RATE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::config::RunConfig;
use crate::exit::validation;
use crate::output::AtomicFile;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSONL of mono 16 kHz source clips; synthetic voices when omitted.
    #[arg(long)]
    clips: Option<PathBuf>,
    /// Number of scenes.
    #[arg(long)]
    count: Option<usize>,
}

/// One line of a clip manifest.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipLine {
    wav: String,
    text: String,
    lang: String,
    #[serde(default)]
    translation: Option<String>,
}

fn load_clips(path: &Path) -> anyhow::Result<Vec<SourceClip>> {
    let file = File::open(path).map_err(Error::Io).with_context(|| format!("opening {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut clips = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(Error::Io)?;
        if line.trim().is_empty() {
            continue;
        }
        let loaded = serde_json::from_str::<ClipLine>(&line)
            .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })
            .and_then(|c| {
                let audio = read_wav(ManifestEntry::resolve(base, &c.wav))?;
                if audio.num_channels() != 1 || audio.sample_rate() != SAMPLE_RATE {
                    return Err(Error::Validation(format!(
                        "{}: need mono {SAMPLE_RATE} Hz, got {} channels at {} Hz",
                        c.wav,
                        audio.num_channels(),
                        audio.sample_rate()
                    )));
                }
                if c.text.trim().is_empty() {
                    return Err(Error::Validation(format!("{}: empty text", c.wav)));
                }
                Ok(SourceClip { audio, text: c.text, lang: c.lang, translation: c.translation })
            });
        match loaded {
            Ok(c) => clips.push(c),
            Err(e) => log::warn!("skipping clip on line {}: {e}", i + 1),
        }
    }
    Ok(clips)
}

fn synthetic_source(lang: &str, other: &str, words: [usize; 2], rng: &mut ChaCha8Rng) -> anyhow::Result<SourceClip> {
    let n = rng.random_range(words[0]..=words[1]);
    let voice = SynthVoice::random(rng);
    let audio = AudioClip::mono(synth_utterance(n, &voice, rng), SAMPLE_RATE)?;
    let (text, translation) = Lexicon::sentence(n, lang, other, rng);
    Ok(SourceClip { audio, text, lang: lang.into(), translation: Some(translation) })
}

struct Pools<'a> {
    wearer: Vec<&'a SourceClip>,
    partner: Vec<&'a SourceClip>,
}

fn pick_pair<'a>(pools: &Pools<'a>, rng: &mut ChaCha8Rng) -> anyhow::Result<(SourceClip, SourceClip)> {
    if pools.wearer.is_empty() || pools.partner.is_empty() {
        return Err(validation("no usable clips for one of the two languages"));
    }
    let w = rng.random_range(0..pools.wearer.len());
    let mut p = rng.random_range(0..pools.partner.len());
    // avoid pairing a clip with itself when both roles share one pool
    if std::ptr::eq(pools.wearer[w], pools.partner[p]) && pools.partner.len() > 1 {
        p = (p + 1) % pools.partner.len();
    }
    Ok((pools.wearer[w].clone(), pools.partner[p].clone()))
}

struct Planned {
    id: String,
    spec: SceneSpec,
}

fn plan_scene(cfg: &RunConfig, idx: usize, pools: Option<&Pools>) -> anyhow::Result<Planned> {
    let sim = &cfg.simulate;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(idx as u64));
    let (wearer, partner) = match pools {
        Some(p) => pick_pair(p, &mut rng)?,
        None => (
            synthetic_source(&cfg.wearer_lang, &cfg.partner_lang, sim.words, &mut rng)?,
            synthetic_source(&cfg.partner_lang, &cfg.wearer_lang, sim.words, &mut rng)?,
        ),
    };
    let mut spec = SceneSpec::new(wearer, partner);
    spec.partner_direction = sim.directions[rng.random_range(0..sim.directions.len())];
    spec.partner_distance = sim.partner_distance;
    spec.snr_db = rng.random_range(sim.snr_db[0]..=sim.snr_db[1]);
    let shortest = spec.wearer.audio.duration_s().min(spec.partner.audio.duration_s());
    spec.overlap_s = rng.random_range(sim.overlap_s[0]..=sim.overlap_s[1]).min(shortest);
    spec.noise_level_db = sim.noise_db;
    spec.first = if rng.random_bool(0.5) { Speaker::Wearer } else { Speaker::Partner };
    spec.seed = rng.random();
    Ok(Planned { id: format!("scene-{idx:05}"), spec })
}

fn write_scene(out: &Path, planned: &Planned, scene: &Scene, cfg: &RunConfig) -> anyhow::Result<ManifestEntry> {
    let dir = out.join("scenes");
    std::fs::create_dir_all(&dir).map_err(Error::Io)?;
    let id = &planned.id;
    let rel = |suffix: &str| format!("scenes/{id}{suffix}.wav");
    let enc = cfg.simulate.encoding;
    for (clip, suffix) in [(&scene.mixture, ""), (&scene.clean_wearer, "_wearer"), (&scene.clean_partner, "_partner")] {
        write_wav(clip, out.join(rel(suffix)), enc).with_context(|| format!("writing {}", rel(suffix)))?;
    }
    Ok(ManifestEntry {
        id: id.clone(),
        wav: rel(""),
        segments: scene.segments.clone(),
        clean: Some(CleanRefs { wearer: rel("_wearer"), partner: rel("_partner") }),
    })
}

pub fn run(mut cfg: RunConfig, args: SimulateArgs) -> anyhow::Result<()> {
    if let Some(n) = args.count {
        cfg.simulate.count = n;
    }
    cfg.validate()?;
    let geometry: ArrayGeometry = cfg.geometry()?;
    let clips = match &args.clips {
        Some(p) => Some(load_clips(p)?),
        None => None,
    };
    let pools = clips.as_ref().map(|c| Pools {
        wearer: c.iter().filter(|s| s.lang == cfg.wearer_lang).collect(),
        partner: c.iter().filter(|s| s.lang == cfg.partner_lang).collect(),
    });
    let count = cfg.simulate.count;
    let out = cfg.out.clone();
    let results: Vec<(usize, anyhow::Result<(ManifestEntry, f64, f64, f64)>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let r = plan_scene(&cfg, i, pools.as_ref()).and_then(|planned| {
                let scene = simulate_scene(&planned.spec, &geometry)?;
                let entry = write_scene(&out, &planned, &scene, &cfg)?;
                Ok((entry, scene.duration_s(), planned.spec.partner_direction, planned.spec.snr_db))
            });
            (i, r)
        })
        .collect();

    let mut manifest = AtomicFile::create(out.join("manifest.jsonl"))?;
    let mut written = 0;
    let mut first_err = None;
    for (i, r) in results {
        match r {
            Ok((entry, dur, dir, snr)) => {
                println!("{}  {dur:.2} s  partner at {dir:+.0} deg  snr {snr:+.1} dB", entry.id);
                manifest.json_line(&entry)?;
                written += 1;
            }
            Err(e) => {
                log::warn!("scene {i} failed: {e:#}");
                first_err.get_or_insert(e);
            }
        }
    }
    let path = manifest.commit()?;
    eprintln!("wrote {written} scene(s) to {}", path.display());
    match first_err {
        Some(e) if written == 0 => Err(e.context(format!("all {count} scenes failed"))),
        _ => Ok(()),
    }
}
