mod common;

use std::collections::BTreeMap;
use std::net::TcpListener;

use common::{bilingual_scene, SceneOpts};
use dirspeech_core::attribution::Tag;
use dirspeech_core::audio::{AudioClip, Segment, SAMPLE_RATE};
use dirspeech_core::dsp::StftParams;
use dirspeech_core::metrics::score_corpus;
use dirspeech_core::ndjson::spawn_server;
use dirspeech_core::scene::{synth_utterance, ArrayGeometry, SynthVoice};
use dirspeech_core::separator::{Passthrough, SeparatorRequest, SeparatorResponse, StreamingSeparator};
use dirspeech_core::slm::{
    events_to_hypothesis, run_stream, MockMode, MockSlm, ReferenceChannel, SlmBackend, SlmClient, SlmRequest,
    SlmResponse, StreamConfig, StreamInput, Task,
};
use dirspeech_core::{ManifestEntry, Speaker};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn oracle_run(opts: &SceneOpts) -> (dirspeech_core::slm::StreamReport, dirspeech_core::ManifestEntry) {
    let (scene, entry) = bilingual_scene(opts);
    let cfg = StreamConfig {
        wearer_lang: opts.wearer_lang.into(),
        partner_lang: opts.partner_lang.into(),
        ..StreamConfig::default()
    };
    let input = StreamInput::from_scene(&scene, Some(entry.id.clone()), &cfg, &ArrayGeometry::default()).unwrap();
    let mut sep = StreamingSeparator::new(StftParams::default()).unwrap();
    let mut slm = MockSlm::new([entry.clone()], MockMode::Oracle);
    (run_stream(&input, &mut sep, &mut slm, &cfg).unwrap(), entry)
}

#[test]
fn oracle_pipeline_reproduces_references() {
    let (report, entry) = oracle_run(&SceneOpts { seed: 11, direction: 30.0, snr_db: 6.0, ..Default::default() });
    assert!(report.errors.is_empty(), "{:?}", report.errors);
    let hyps: BTreeMap<_, _> = [(entry.id.clone(), events_to_hypothesis(&report.events))].into();
    let score = score_corpus(std::slice::from_ref(&entry), &hyps, None).unwrap();
    for s in Speaker::BOTH {
        assert_eq!(score.speaker(s).wer, 0.0, "{s}: {:?} {:?}", report.events, entry.segments);
        assert_eq!(score.speaker(s).sa, 0.0);
    }
    let tags: Vec<Tag> = report.events.iter().map(|e| e.tag).collect();
    let first_partner = tags.iter().position(|&t| t == Tag::Partner).unwrap();
    assert!(tags[..first_partner].iter().all(|&t| t == Tag::Wearer));
    assert!(tags[first_partner..].iter().all(|&t| t == Tag::Partner));
    assert!(report.events.windows(2).all(|w| w[0].t <= w[1].t));
}

#[test]
fn long_stream_stays_exact() {
    let (scene, entry) = common::long_conversation(75.0, 3);
    let cfg = StreamConfig::default();
    let input = StreamInput::from_scene(&scene, Some(entry.id.clone()), &cfg, &ArrayGeometry::default()).unwrap();
    let mut sep = StreamingSeparator::new(StftParams::default()).unwrap();
    let mut slm = MockSlm::new([entry.clone()], MockMode::Oracle);
    let report = run_stream(&input, &mut sep, &mut slm, &cfg).unwrap();
    let hyps: BTreeMap<_, _> = [(entry.id.clone(), events_to_hypothesis(&report.events))].into();
    let score = score_corpus(&[entry], &hyps, None).unwrap();
    for s in Speaker::BOTH {
        assert_eq!((score.speaker(s).wer, score.speaker(s).sa), (0.0, 0.0), "{s}: {:?}", score.speaker(s));
        assert!((score.speaker(s).bleu.unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn silent_input_yields_no_events() {
    let cfg = StreamConfig::default();
    let input = StreamInput { scene_id: None, reference: vec![0.0; 16_000 * 3], oracle: None };
    let mut slm = MockSlm::new([], MockMode::Oracle);
    let report = run_stream(&input, &mut Passthrough, &mut slm, &cfg).unwrap();
    assert!(report.events.is_empty());
    assert_eq!(report.tags.len(), 5);
    assert!(report.tags.iter().all(|t| t.tag == Tag::Silence));
    assert!(report.segments.is_empty());
    assert_eq!(report.stats.requests, 0);
}

#[test]
fn single_wearer_utterance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let voice = SynthVoice::random(&mut rng);
    let mut audio = vec![0.0; 8_000];
    let speech = synth_utterance(4, &voice, &mut rng);
    let (start, end) = (0.5, 0.5 + speech.len() as f64 / 16_000.0);
    audio.extend(speech);
    audio.extend(vec![0.0; 16_000]);
    let text = "where is the museum";
    let entry = ManifestEntry {
        id: "solo".into(),
        wav: "solo.wav".into(),
        segments: vec![Segment {
            speaker: Speaker::Wearer,
            start,
            end,
            text: text.into(),
            lang: "en".into(),
            translation: Some("dónde está el museo".into()),
        }],
        clean: None,
    };
    let zeros = vec![0.0; audio.len()];
    let input = StreamInput { scene_id: Some("solo".into()), reference: audio.clone(), oracle: Some((audio, zeros)) };
    let cfg = StreamConfig::default();
    let mut sep = StreamingSeparator::new(StftParams::default()).unwrap();
    let mut slm = MockSlm::new([entry], MockMode::Oracle);
    let report = run_stream(&input, &mut sep, &mut slm, &cfg).unwrap();
    let transcript: Vec<&str> =
        report.events.iter().filter(|e| e.task == Task::Transcribe).map(|e| e.text.as_str()).collect();
    assert_eq!(transcript.join(" "), text);
    assert!(report.events.iter().all(|e| e.tag == Tag::Wearer && e.id.as_deref() == Some("solo")));
    let translation: Vec<&str> =
        report.events.iter().filter(|e| e.task == Task::Translate).map(|e| e.text.as_str()).collect();
    assert_eq!(translation.join(" "), "dónde está el museo");
}

#[test]
fn runs_are_deterministic() {
    let opts = SceneOpts { seed: 21, direction: -60.0, snr_db: 3.0, ..Default::default() };
    let (a, _) = oracle_run(&opts);
    let (b, _) = oracle_run(&opts);
    assert_eq!(a.events, b.events);
    assert_eq!(a.tags, b.tags);
    assert_eq!(a.stats.si_sdr, b.stats.si_sdr);
}

#[test]
fn batching_cadence_keeps_text_exact() {
    let (scene, entry) = bilingual_scene(&SceneOpts { seed: 4, direction: 60.0, ..Default::default() });
    let cfg = StreamConfig { min_interval_chunks: 3, ..StreamConfig::default() };
    let input = StreamInput::from_scene(&scene, Some(entry.id.clone()), &cfg, &ArrayGeometry::default()).unwrap();
    let mut sep = StreamingSeparator::new(StftParams::default()).unwrap();
    let mut slm = MockSlm::new([entry.clone()], MockMode::Oracle);
    let report = run_stream(&input, &mut sep, &mut slm, &cfg).unwrap();
    assert!(report.stats.requests < 2 * report.stats.speech_chunks);
    let hyps: BTreeMap<_, _> = [(entry.id.clone(), events_to_hypothesis(&report.events))].into();
    let score = score_corpus(&[entry], &hyps, None).unwrap();
    assert_eq!((score.wearer.wer, score.partner.wer), (0.0, 0.0));
}

#[test]
fn mouth_beam_reference_runs() {
    let (scene, entry) = bilingual_scene(&SceneOpts { seed: 8, direction: 0.0, snr_db: 6.0, ..Default::default() });
    let cfg = StreamConfig { reference: ReferenceChannel::MouthBeam, ..StreamConfig::default() };
    let input = StreamInput::from_scene(&scene, Some(entry.id.clone()), &cfg, &ArrayGeometry::default()).unwrap();
    assert_eq!(input.reference.len(), scene.mixture.len());
    let mut sep = StreamingSeparator::new(StftParams::default()).unwrap();
    let mut slm = MockSlm::new([entry.clone()], MockMode::Oracle);
    let report = run_stream(&input, &mut sep, &mut slm, &cfg).unwrap();
    let hyps: BTreeMap<_, _> = [(entry.id.clone(), events_to_hypothesis(&report.events))].into();
    let score = score_corpus(&[entry], &hyps, None).unwrap();
    assert_eq!((score.wearer.wer, score.partner.wer), (0.0, 0.0));
}

#[test]
fn slm_over_tcp_matches_in_process() {
    let opts = SceneOpts { seed: 31, direction: 30.0, snr_db: 6.0, ..Default::default() };
    let (scene, entry) = bilingual_scene(&opts);
    let server = MockSlm::new([entry.clone()], MockMode::Oracle).serve(TcpListener::bind("127.0.0.1:0").unwrap()).unwrap();
    let cfg = StreamConfig::default();
    let input = StreamInput::from_scene(&scene, Some(entry.id.clone()), &cfg, &ArrayGeometry::default()).unwrap();
    let mut sep = StreamingSeparator::new(StftParams::default()).unwrap();
    let mut client = SlmClient::connect(server.addr(), std::time::Duration::from_secs(5)).unwrap();
    let remote = run_stream(&input, &mut sep, &mut client, &cfg).unwrap();
    let (local, _) = oracle_run(&opts);
    assert_eq!(remote.events, local.events);
    server.shutdown();
}

#[test]
fn slm_replies_are_matched_by_id() {
    // answers the pair in reverse order
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = std::thread::spawn(move || {
        use std::io::{BufRead, BufReader, Write};
        let (s, _) = listener.accept().unwrap();
        let mut r = BufReader::new(s.try_clone().unwrap());
        let mut w = s;
        let mut reqs = Vec::new();
        for _ in 0..2 {
            let mut line = String::new();
            r.read_line(&mut line).unwrap();
            reqs.push(serde_json::from_str::<SlmRequest>(&line).unwrap());
        }
        for q in reqs.iter().rev() {
            let resp = SlmResponse { id: q.id, text: format!("{}-{}", q.task, q.id), latency_ms: None };
            writeln!(w, "{}", serde_json::to_string(&resp).unwrap()).unwrap();
        }
    });
    let mut window = dirspeech_core::slm::SlidingWindow::default();
    window.push_chunk(&[0.1; 160], 0.0).unwrap();
    let mut id = 40;
    let reqs = dirspeech_core::slm::build_requests(
        &window,
        Tag::Wearer,
        &dirspeech_core::slm::PromptCatalog::default(),
        ("en", "es"),
        &mut id,
    )
    .unwrap();
    let mut client = SlmClient::connect(addr, std::time::Duration::from_secs(5)).unwrap();
    let out = client.complete(&reqs).unwrap();
    assert_eq!(out[0].text, "transcribe-40");
    assert_eq!(out[1].text, "translate-41");
    assert!(out.iter().all(|r| r.latency_ms.is_some()));
    handle.join().unwrap();
}

#[test]
fn separator_failures_fall_back_to_passthrough() {
    // service that only answers even chunks
    let server = spawn_server(TcpListener::bind("127.0.0.1:0").unwrap(), |r: SeparatorRequest| {
        (r.chunk_idx.is_multiple_of(2)).then(|| SeparatorResponse {
            chunk_idx: r.chunk_idx,
            wearer: r.samples.clone(),
            partner: vec![0.0; r.samples.len()],
        })
    })
    .unwrap();
    let (scene, entry) = bilingual_scene(&SceneOpts { seed: 2, ..Default::default() });
    let cfg = StreamConfig::default();
    let input = StreamInput::from_scene(&scene, Some(entry.id.clone()), &cfg, &ArrayGeometry::default()).unwrap();
    let mut sep = dirspeech_core::separator::ExternalSeparator::connect(server.addr()).unwrap();
    let mut slm = MockSlm::new([entry], MockMode::Oracle);
    let report = run_stream(&input, &mut sep, &mut slm, &cfg).unwrap();
    let chunks = report.tags.len();
    assert_eq!(report.stats.separator_errors, chunks / 2);
    assert!(report.tags.iter().all(|t| t.tag != Tag::Partner));
}

#[test]
fn mono_clip_input() {
    let clip = AudioClip::mono(vec![0.0; 20_000], SAMPLE_RATE).unwrap();
    let input = StreamInput::from_clip(&clip, &StreamConfig::default(), &ArrayGeometry::default()).unwrap();
    assert_eq!(input.reference.len(), 20_000);
    let bad = StreamConfig { reference: ReferenceChannel::Mic(7), ..StreamConfig::default() };
    let five = AudioClip::zeros(5, 100, SAMPLE_RATE).unwrap();
    assert!(StreamInput::from_clip(&five, &bad, &ArrayGeometry::default()).is_err());
}
