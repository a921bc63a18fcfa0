mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use common::{max_abs_diff, random_signal};
use dirspeech_core::dsp::StftParams;
use dirspeech_core::error::Error;
use dirspeech_core::ndjson::spawn_server;
use dirspeech_core::separator::{
    ExternalSeparator, OracleRefs, SeparatorRequest, SeparatorResponse, StreamingSeparator,
};
use dirspeech_core::CHUNK_SAMPLES;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn output_lags_by_window_minus_hop() {
    let w = random_signal(CHUNK_SAMPLES * 2, 1);
    let z = vec![0.0; CHUNK_SAMPLES * 2];
    let mut sep = StreamingSeparator::new(StftParams::default()).unwrap();
    let first = sep
        .process_chunk(&w[..CHUNK_SAMPLES], OracleRefs { wearer: &w[..CHUNK_SAMPLES], partner: &z[..CHUNK_SAMPLES] })
        .unwrap();
    assert_eq!(first.len(), CHUNK_SAMPLES - 240);
    let second = sep
        .process_chunk(&w[CHUNK_SAMPLES..], OracleRefs { wearer: &w[CHUNK_SAMPLES..], partner: &z[CHUNK_SAMPLES..] })
        .unwrap();
    assert_eq!(second.len(), CHUNK_SAMPLES);
    assert_eq!(sep.flush().len(), 240);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn streaming_matches_offline(chunks in 1usize..=20, tail in 0usize..CHUNK_SAMPLES, seed in 0u64..1000) {
        let len = (chunks - 1) * CHUNK_SAMPLES + tail.max(1);
        let (ow, op, rw, rp) = common::stream_separate(len, seed, CHUNK_SAMPLES);
        prop_assert!(max_abs_diff(&ow, &rw) <= 1e-6);
        prop_assert!(max_abs_diff(&op, &rp) <= 1e-6);
    }

    #[test]
    fn odd_chunk_sizes_match_offline(chunk in 1usize..700, len in 1usize..4000, seed in 0u64..1000) {
        let (ow, op, rw, rp) = common::stream_separate(len, seed, chunk);
        prop_assert!(max_abs_diff(&ow, &rw) <= 1e-6);
        prop_assert!(max_abs_diff(&op, &rp) <= 1e-6);
    }

    #[test]
    fn masks_partition_the_mixture(len in 500usize..6000, seed in 0u64..1000) {
        let (ow, op, _, _) = common::stream_separate(len, seed, CHUNK_SAMPLES);
        let w = random_signal(len, seed);
        let p = random_signal(len, seed + 1);
        let mix: Vec<f64> = w.iter().zip(&p).map(|(a, b)| a + b).collect();
        let sum: Vec<f64> = ow.iter().zip(&op).map(|(a, b)| a + b).collect();
        prop_assert!(max_abs_diff(&sum, &mix) <= 1e-6);
    }
}

fn echo_response(req: SeparatorRequest) -> SeparatorResponse {
    SeparatorResponse {
        chunk_idx: req.chunk_idx,
        partner: req.samples.iter().map(|x| x * 0.25).collect(),
        wearer: req.samples.iter().map(|x| x * 0.75).collect(),
    }
}

#[test]
fn external_round_trip() {
    let server = spawn_server(TcpListener::bind("127.0.0.1:0").unwrap(), |r| Some(echo_response(r))).unwrap();
    let mut client = ExternalSeparator::connect(server.addr()).unwrap();
    let x = random_signal(CHUNK_SAMPLES, 4);
    let (w, p) = client.separate(0, &x).unwrap();
    assert_eq!(w, x.iter().map(|v| v * 0.75).collect::<Vec<_>>());
    assert_eq!(p, x.iter().map(|v| v * 0.25).collect::<Vec<_>>());
    server.shutdown();
}

/// Reads a batch of requests, then answers them in shuffled order after
/// random short delays.
fn shuffling_service(batch: usize, seed: u64) -> (std::net::SocketAddr, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let handle = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut writer = stream;
        let mut reqs = Vec::new();
        let mut line = String::new();
        while reqs.len() < batch {
            line.clear();
            if reader.read_line(&mut line).unwrap() == 0 {
                return;
            }
            reqs.push(serde_json::from_str::<SeparatorRequest>(&line).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        reqs.shuffle(&mut rng);
        let (tx, rx) = mpsc::channel();
        for (k, r) in reqs.into_iter().enumerate() {
            let tx = tx.clone();
            thread::spawn(move || {
                thread::sleep(Duration::from_millis(5 * (k as u64 % 4)));
                tx.send(echo_response(r)).unwrap();
            });
        }
        drop(tx);
        for resp in rx {
            let mut out = serde_json::to_vec(&resp).unwrap();
            out.push(b'\n');
            writer.write_all(&out).unwrap();
        }
    });
    (addr, handle)
}

#[test]
fn pipelined_replies_are_reordered() {
    let batch = 8;
    let (addr, handle) = shuffling_service(batch, 9);
    let mut client = ExternalSeparator::connect(addr).unwrap();
    let chunks: Vec<Vec<f64>> = (0..batch).map(|i| random_signal(1000, 100 + i as u64)).collect();
    let refs: Vec<(usize, &[f64])> = chunks.iter().enumerate().map(|(i, c)| (i, c.as_slice())).collect();
    let out = client.separate_batch(&refs).unwrap();
    for (c, (w, _)) in chunks.iter().zip(&out) {
        assert_eq!(*w, c.iter().map(|v| v * 0.75).collect::<Vec<_>>());
    }
    handle.join().unwrap();
}

#[test]
fn unreachable_service_is_backend_error() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let t = Instant::now();
    let err = ExternalSeparator::connect(("127.0.0.1", port)).err().expect("nothing listens there");
    assert!(matches!(err, Error::Backend(_)));
    assert!(t.elapsed() < Duration::from_secs(1));
}

#[test]
fn silent_service_times_out() {
    let server = spawn_server(TcpListener::bind("127.0.0.1:0").unwrap(), |_r: SeparatorRequest| {
        None::<SeparatorResponse>
    })
    .unwrap();
    let mut client = ExternalSeparator::connect(server.addr()).unwrap();
    let t = Instant::now();
    let err = client.separate(0, &[0.1; 100]).unwrap_err();
    let waited = t.elapsed();
    assert!(matches!(err, Error::Backend(ref m) if m.contains("timed out")), "{err}");
    assert!(waited >= Duration::from_millis(150) && waited < Duration::from_millis(1000), "{waited:?}");
}

#[test]
fn short_reply_is_rejected() {
    let server = spawn_server(TcpListener::bind("127.0.0.1:0").unwrap(), |r: SeparatorRequest| {
        Some(SeparatorResponse { chunk_idx: r.chunk_idx, wearer: vec![0.0], partner: vec![0.0] })
    })
    .unwrap();
    let mut client = ExternalSeparator::connect(server.addr()).unwrap();
    assert!(matches!(client.separate(0, &[0.1; 10]), Err(Error::Backend(_))));
}
