#![allow(dead_code)]

pub mod oracles;

use dirspeech_core::audio::{AudioClip, ManifestEntry, SAMPLE_RATE};
use dirspeech_core::scene::{simulate_scene, synth_utterance, ArrayGeometry, Lexicon, Scene, SceneSpec, SourceClip, SynthVoice};
use dirspeech_core::dsp::StftParams;
use dirspeech_core::separator::{oracle_separate, OracleRefs, StreamingSeparator};
use dirspeech_core::Speaker;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct SceneOpts {
    pub seed: u64,
    pub direction: f64,
    pub snr_db: f64,
    pub overlap_s: f64,
    pub wearer_lang: &'static str,
    pub partner_lang: &'static str,
    pub first: Speaker,
    pub noise_db: Option<f64>,
}

impl Default for SceneOpts {
    fn default() -> Self {
        Self {
            seed: 0,
            direction: 0.0,
            snr_db: 0.0,
            overlap_s: 0.0,
            wearer_lang: "en",
            partner_lang: "es",
            first: Speaker::Wearer,
            noise_db: None,
        }
    }
}

fn source(n_words: usize, lang: &str, to: &str, rng: &mut ChaCha8Rng) -> SourceClip {
    let voice = SynthVoice::random(rng);
    let audio = synth_utterance(n_words, &voice, rng);
    let (text, translation) = Lexicon::sentence(n_words, lang, to, rng);
    SourceClip { audio: AudioClip::mono(audio, SAMPLE_RATE).unwrap(), text, lang: lang.into(), translation: Some(translation) }
}

/// A two-turn bilingual scene from synthetic voices and lexicon sentences.
pub fn bilingual_scene(opts: &SceneOpts) -> (Scene, ManifestEntry) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let nw = rng.random_range(3..=6);
    let np = rng.random_range(3..=6);
    let wearer = source(nw, opts.wearer_lang, opts.partner_lang, &mut rng);
    let partner = source(np, opts.partner_lang, opts.wearer_lang, &mut rng);
    let mut spec = SceneSpec::new(wearer, partner);
    spec.partner_direction = opts.direction;
    spec.snr_db = opts.snr_db;
    spec.overlap_s = opts.overlap_s;
    spec.first = opts.first;
    spec.noise_level_db = opts.noise_db;
    spec.seed = opts.seed;
    let scene = simulate_scene(&spec, &ArrayGeometry::default()).unwrap();
    let id = format!("scene-{}", opts.seed);
    let entry = ManifestEntry { id: id.clone(), wav: format!("{id}.wav"), segments: scene.segments.clone(), clean: None };
    (scene, entry)
}

pub fn random_signal(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Concatenates simulated scenes (with a short pause between them) into
/// one long conversation until it lasts at least `min_seconds`.
pub fn long_conversation(min_seconds: f64, seed: u64) -> (Scene, ManifestEntry) {
    let gap = (0.3 * SAMPLE_RATE as f64) as usize;
    let mut chans: [Vec<Vec<f64>>; 3] = std::array::from_fn(|_| vec![Vec::new(); 5]);
    let mut segments = Vec::new();
    let mut k = 0;
    while (chans[0][0].len() as f64) < min_seconds * SAMPLE_RATE as f64 {
        let directions = [-60.0, -30.0, 0.0, 30.0, 60.0];
        let (scene, entry) = bilingual_scene(&SceneOpts {
            seed: seed * 1000 + k,
            direction: directions[k as usize % 5],
            snr_db: if k % 2 == 0 { 6.0 } else { -6.0 },
            first: if k % 3 == 0 { Speaker::Partner } else { Speaker::Wearer },
            ..Default::default()
        });
        let offset = chans[0][0].len();
        let t0 = offset as f64 / SAMPLE_RATE as f64;
        for mut seg in entry.segments {
            seg.start += t0;
            seg.end += t0;
            segments.push(seg);
        }
        for (dst, clip) in chans.iter_mut().zip([&scene.mixture, &scene.clean_wearer, &scene.clean_partner]) {
            for (d, s) in dst.iter_mut().zip(clip.channels()) {
                d.extend_from_slice(s);
                d.extend(std::iter::repeat_n(0.0, gap));
            }
        }
        k += 1;
    }
    let [m, w, p] = chans;
    let scene = Scene {
        mixture: AudioClip::new(m, SAMPLE_RATE).unwrap(),
        clean_wearer: AudioClip::new(w, SAMPLE_RATE).unwrap(),
        clean_partner: AudioClip::new(p, SAMPLE_RATE).unwrap(),
        noise: None,
        segments: segments.clone(),
    };
    let id = format!("long-{seed}");
    let entry = ManifestEntry { id: id.clone(), wav: format!("{id}.wav"), segments, clean: None };
    (scene, entry)
}

/// Chunked streaming separation next to the offline result: (stream w, stream p, offline w, offline p).
pub fn stream_separate(len: usize, seed: u64, chunk: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let w = random_signal(len, seed);
    let p = random_signal(len, seed + 1);
    let mix: Vec<f64> = w.iter().zip(&p).map(|(a, b)| a + b).collect();
    let mut sep = StreamingSeparator::with_chunk_size(StftParams::default(), chunk).unwrap();
    let (mut ow, mut op) = (Vec::new(), Vec::new());
    for start in (0..len).step_by(chunk) {
        let end = (start + chunk).min(len);
        let out = sep
            .process_chunk(&mix[start..end], OracleRefs { wearer: &w[start..end], partner: &p[start..end] })
            .unwrap();
        ow.extend(out.wearer);
        op.extend(out.partner);
    }
    let tail = sep.flush();
    ow.extend(tail.wearer);
    op.extend(tail.partner);
    let (rw, rp) = oracle_separate(&mix, &w, &p, StftParams::default()).unwrap();
    (ow, op, rw, rp)
}
