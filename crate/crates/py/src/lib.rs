//! Python bindings: metrics, STFT, oracle separation, chunk tagging, SOT
//! and a synthetic end-to-end run.

use std::collections::BTreeMap;

use dirspeech_core::attribution::{tag_chunk as core_tag_chunk, TaggerConfig};
use dirspeech_core::dsp::{istft as core_istft, stft as core_stft, Spectrogram, StftParams};
use dirspeech_core::metrics::{self, score_corpus, words};
use dirspeech_core::scene::{simulate_scene, synth_utterance, ArrayGeometry, Lexicon, Scene, SceneSpec, SourceClip, SynthVoice};
use dirspeech_core::separator::{oracle_separate as core_oracle_separate, StreamingSeparator};
use dirspeech_core::slm::{events_to_hypothesis, run_stream, MockMode, MockSlm, StreamConfig, StreamInput};
use dirspeech_core::sot::{parse_sot_str, serialize_sot as core_serialize_sot, AttributedSegment, ParseMode};
use dirspeech_core::{AudioClip, Error, ManifestEntry, Speaker, SAMPLE_RATE};
use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Format(_) => PyOSError::new_err(e.to_string()),
        Error::Backend(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn speaker(label: &str) -> PyResult<Speaker> {
    label.parse().map_err(py_err)
}

fn params(fft_size: usize, win_length: usize, hop: usize) -> PyResult<StftParams> {
    let p = StftParams { fft_size, win_length, hop };
    p.validate().map_err(py_err)?;
    Ok(p)
}

/// Word error counts after text normalization.
#[pyfunction]
fn wer<'py>(py: Python<'py>, reference: &str, hypothesis: &str) -> PyResult<Bound<'py, PyDict>> {
    let b = metrics::wer(&words(reference), &words(hypothesis));
    let d = PyDict::new(py);
    d.set_item("ref_words", b.ref_words)?;
    d.set_item("ins", b.ins)?;
    d.set_item("del", b.del)?;
    d.set_item("sub", b.sub)?;
    d.set_item("wer", b.wer_pct)?;
    Ok(d)
}

/// Speaker-attributed WER over `(speaker, text)` runs.
#[pyfunction]
fn sa_wer<'py>(
    py: Python<'py>,
    reference: Vec<(String, String)>,
    hypothesis: Vec<(String, String)>,
) -> PyResult<Bound<'py, PyDict>> {
    let conv = |runs: Vec<(String, String)>| -> PyResult<Vec<(Speaker, String)>> {
        runs.into_iter().map(|(s, t)| Ok((speaker(&s)?, t))).collect()
    };
    let report = metrics::sa_wer(&conv(reference)?, &conv(hypothesis)?);
    let out = PyDict::new(py);
    for s in Speaker::BOTH {
        let r = report.get(s);
        let d = PyDict::new(py);
        d.set_item("wer", r.wer.wer_pct)?;
        d.set_item("ins", r.wer.ins)?;
        d.set_item("del", r.wer.del)?;
        d.set_item("sub", r.wer.sub)?;
        d.set_item("ref_words", r.wer.ref_words)?;
        d.set_item("sa_words", r.sa_words)?;
        d.set_item("sa", r.sa_pct)?;
        out.set_item(s.as_str(), d)?;
    }
    Ok(out)
}

/// Sentence BLEU of one hypothesis against one or more references.
#[pyfunction]
fn bleu(references: Vec<String>, hypothesis: &str) -> f64 {
    let refs: Vec<Vec<String>> = references.iter().map(|r| words(r)).collect();
    metrics::bleu(&refs, &words(hypothesis))
}

#[pyfunction]
fn si_sdr(reference: Vec<f64>, estimate: Vec<f64>) -> PyResult<f64> {
    metrics::si_sdr(&reference, &estimate).map_err(py_err)
}

/// Frames of complex bins, one list per frame.
#[pyfunction]
#[pyo3(signature = (signal, fft_size = 512, win_length = 400, hop = 160))]
fn stft(signal: Vec<f64>, fft_size: usize, win_length: usize, hop: usize) -> PyResult<Vec<Vec<Complex64>>> {
    Ok(core_stft(&signal, params(fft_size, win_length, hop)?).map_err(py_err)?.frames)
}

#[pyfunction]
#[pyo3(signature = (frames, length, fft_size = 512, win_length = 400, hop = 160))]
fn istft(frames: Vec<Vec<Complex64>>, length: usize, fft_size: usize, win_length: usize, hop: usize) -> PyResult<Vec<f64>> {
    let spec = Spectrogram { frames, params: params(fft_size, win_length, hop)?, origin_length: length };
    core_istft(&spec).map_err(py_err)
}

/// Ideal-ratio-mask separation of a mono mixture into (wearer, partner).
#[pyfunction]
fn oracle_separate(mixture: Vec<f64>, wearer: Vec<f64>, partner: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    core_oracle_separate(&mixture, &wearer, &partner, StftParams::default()).map_err(py_err)
}

/// `"wearer"`, `"partner"` or `"silence"` for one chunk pair.
#[pyfunction]
#[pyo3(signature = (wearer, partner, alpha = 1.0, vad_floor = 1e-3))]
fn tag_chunk(wearer: Vec<f64>, partner: Vec<f64>, alpha: f64, vad_floor: f64) -> PyResult<&'static str> {
    let cfg = TaggerConfig { alpha, vad_floor, ..TaggerConfig::default() };
    cfg.validate().map_err(py_err)?;
    Ok(core_tag_chunk(&wearer, &partner, &cfg).map_err(py_err)?.as_str())
}

/// SOT string from `(speaker, start_s, text)` segments.
#[pyfunction]
fn serialize_sot(segments: Vec<(String, f64, String)>) -> PyResult<String> {
    let segs = segments
        .into_iter()
        .map(|(s, start, text)| Ok(AttributedSegment { speaker: speaker(&s)?, start, text, lang: String::new() }))
        .collect::<PyResult<Vec<_>>>()?;
    Ok(core_serialize_sot(&segs).map_err(py_err)?.to_string())
}

/// Speaker runs and repair warnings; strict mode raises instead of repairing.
#[pyfunction]
#[pyo3(signature = (text, strict = false))]
fn parse_sot(text: &str, strict: bool) -> PyResult<(Vec<(String, String)>, Vec<String>)> {
    let mode = if strict { ParseMode::Strict } else { ParseMode::Lenient };
    let parsed = parse_sot_str(text, mode).map_err(py_err)?;
    let runs = parsed.runs.into_iter().map(|(s, t)| (s.as_str().to_string(), t)).collect();
    Ok((runs, parsed.warnings.iter().map(|w| w.to_string()).collect()))
}

fn synthetic(lang: &str, other: &str, rng: &mut ChaCha8Rng) -> PyResult<SourceClip> {
    let n = rng.random_range(3..=6);
    let voice = SynthVoice::random(rng);
    let audio = AudioClip::mono(synth_utterance(n, &voice, rng), SAMPLE_RATE).map_err(py_err)?;
    let (text, translation) = Lexicon::sentence(n, lang, other, rng);
    Ok(SourceClip { audio, text, lang: lang.into(), translation: Some(translation) })
}

fn build_scene(seed: u64, direction: f64, snr_db: f64, overlap_s: f64, langs: (&str, &str)) -> PyResult<(Scene, ManifestEntry)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wearer = synthetic(langs.0, langs.1, &mut rng)?;
    let partner = synthetic(langs.1, langs.0, &mut rng)?;
    let mut spec = SceneSpec::new(wearer, partner);
    spec.partner_direction = direction;
    spec.snr_db = snr_db;
    spec.overlap_s = overlap_s;
    spec.seed = seed;
    let scene = simulate_scene(&spec, &ArrayGeometry::default()).map_err(py_err)?;
    let id = format!("scene-{seed}");
    let entry = ManifestEntry { id: id.clone(), wav: format!("{id}.wav"), segments: scene.segments.clone(), clean: None };
    Ok((scene, entry))
}

fn segments_list<'py>(py: Python<'py>, entry: &ManifestEntry) -> PyResult<Vec<Bound<'py, PyDict>>> {
    entry
        .segments
        .iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("speaker", s.speaker.as_str())?;
            d.set_item("start", s.start)?;
            d.set_item("end", s.end)?;
            d.set_item("text", &s.text)?;
            d.set_item("lang", &s.lang)?;
            d.set_item("translation", s.translation.as_deref())?;
            Ok(d)
        })
        .collect()
}

/// A synthetic two-speaker, five-channel scene with its clean references.
#[pyfunction]
#[pyo3(signature = (seed = 0, direction = 0.0, snr_db = 0.0, overlap_s = 0.0, wearer_lang = "en", partner_lang = "es"))]
fn simulate<'py>(
    py: Python<'py>,
    seed: u64,
    direction: f64,
    snr_db: f64,
    overlap_s: f64,
    wearer_lang: &str,
    partner_lang: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let (scene, entry) = build_scene(seed, direction, snr_db, overlap_s, (wearer_lang, partner_lang))?;
    let d = PyDict::new(py);
    d.set_item("id", &entry.id)?;
    d.set_item("sample_rate", SAMPLE_RATE)?;
    d.set_item("mixture", scene.mixture.channels().to_vec())?;
    d.set_item("clean_wearer", scene.clean_wearer.channels().to_vec())?;
    d.set_item("clean_partner", scene.clean_partner.channels().to_vec())?;
    d.set_item("segments", segments_list(py, &entry)?)?;
    Ok(d)
}

/// Streams a synthetic scene through the oracle separator and the mock SLM
/// (noisy when `sub_rate` is given) and scores the result.
#[pyfunction]
#[pyo3(signature = (seed = 0, direction = 0.0, snr_db = 0.0, sub_rate = None))]
fn oracle_pipeline<'py>(py: Python<'py>, seed: u64, direction: f64, snr_db: f64, sub_rate: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let (scene, entry) = build_scene(seed, direction, snr_db, 0.0, ("en", "es"))?;
    let mode = match sub_rate {
        Some(r) => MockMode::Noisy { seed, sub_rate: r },
        None => MockMode::Oracle,
    };
    mode.validate().map_err(py_err)?;
    let (report, score) = py.detach(|| -> Result<_, Error> {
        let cfg = StreamConfig::default();
        let input = StreamInput::from_scene(&scene, Some(entry.id.clone()), &cfg, &ArrayGeometry::default())?;
        let mut sep = StreamingSeparator::new(cfg.stft)?;
        let mut slm = MockSlm::new([entry.clone()], mode);
        let report = run_stream(&input, &mut sep, &mut slm, &cfg)?;
        let hyps: BTreeMap<String, _> = [(entry.id.clone(), events_to_hypothesis(&report.events))].into();
        let score = score_corpus(std::slice::from_ref(&entry), &hyps, None)?;
        Ok((report, score))
    })
    .map_err(py_err)?;
    let events = report
        .events
        .iter()
        .map(|e| {
            let d = PyDict::new(py);
            d.set_item("t", e.t)?;
            d.set_item("tag", e.tag.as_str())?;
            d.set_item("task", e.task.to_string())?;
            d.set_item("text", &e.text)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let out = PyDict::new(py);
    out.set_item("events", events)?;
    out.set_item("segments", segments_list(py, &entry)?)?;
    for s in Speaker::BOTH {
        let sc = score.speaker(s);
        let d = PyDict::new(py);
        d.set_item("wer", sc.wer)?;
        d.set_item("sa", sc.sa)?;
        d.set_item("bleu", sc.bleu)?;
        out.set_item(s.as_str(), d)?;
    }
    out.set_item("real_time_factor", report.stats.real_time_factor)?;
    Ok(out)
}

#[pymodule]
pub fn dirspeech(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SAMPLE_RATE", SAMPLE_RATE)?;
    m.add("CHUNK_SAMPLES", dirspeech_core::CHUNK_SAMPLES)?;
    m.add_function(wrap_pyfunction!(wer, m)?)?;
    m.add_function(wrap_pyfunction!(sa_wer, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(si_sdr, m)?)?;
    m.add_function(wrap_pyfunction!(stft, m)?)?;
    m.add_function(wrap_pyfunction!(istft, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_separate, m)?)?;
    m.add_function(wrap_pyfunction!(tag_chunk, m)?)?;
    m.add_function(wrap_pyfunction!(serialize_sot, m)?)?;
    m.add_function(wrap_pyfunction!(parse_sot, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_pipeline, m)?)?;
    Ok(())
}
