mod common;

use common::oracles::fuzz;
use dirspeech_core::slm::SlidingWindow;
use dirspeech_core::CHUNK_SAMPLES;

#[test]
fn bounds_hold_under_fuzz() {
    fuzz(1, 10_000);
}

#[test]
fn fuzz_is_reproducible() {
    assert_eq!(fuzz(7, 2_000), fuzz(7, 2_000));
}

#[test]
fn hundred_pushes_stay_bounded() {
    let mut w = SlidingWindow::default();
    for i in 0..100 {
        w.push_chunk(&vec![0.0; CHUNK_SAMPLES], i as f64 * 0.6).unwrap();
        assert!(w.duration_s() <= 30.0 + 1e-12);
    }
    assert_eq!(w.len(), 50);
}
