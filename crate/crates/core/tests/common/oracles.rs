use dirspeech_core::slm::{SlidingWindow, MAX_HISTORY_WORDS};
use dirspeech_core::sot::AttributedSegment;
use dirspeech_core::{Speaker, CHUNK_SAMPLES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All word sequences over `vocab` up to `max_len` words.
pub fn all_sequences(vocab: &[&'static str], max_len: usize) -> Vec<Vec<&'static str>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for &v in vocab {
                let mut t: Vec<&str> = s.clone();
                t.push(v);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Textbook edit-distance table, then every minimum-cost path is walked to
/// find the fewest substitutions and, among those, the fewest insertions.
pub fn oracle_counts(r: &[&str], h: &[&str]) -> (usize, usize, usize) {
    let (n, m) = (r.len(), h.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for i in 0..=n {
        d[i][0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let c = usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = (d[i - 1][j] + 1).min(d[i][j - 1] + 1).min(d[i - 1][j - 1] + c);
        }
    }
    // best (sub, ins) over optimal paths ending at (i, j)
    fn walk(i: usize, j: usize, r: &[&str], h: &[&str], d: &[Vec<usize>]) -> (usize, usize) {
        if i == 0 && j == 0 {
            return (0, 0);
        }
        let mut best = (usize::MAX, usize::MAX);
        if i > 0 && j > 0 {
            let c = usize::from(r[i - 1] != h[j - 1]);
            if d[i - 1][j - 1] + c == d[i][j] {
                let (s, k) = walk(i - 1, j - 1, r, h, d);
                best = best.min((s + c, k));
            }
        }
        if j > 0 && d[i][j - 1] + 1 == d[i][j] {
            let (s, k) = walk(i, j - 1, r, h, d);
            best = best.min((s, k + 1));
        }
        if i > 0 && d[i - 1][j] + 1 == d[i][j] {
            best = best.min(walk(i - 1, j, r, h, d));
        }
        best
    }
    let (sub, ins) = walk(n, m, r, h, &d);
    let total = d[n][m];
    (ins, total - sub - ins, sub)
}

// Brute-force SA oracle: every hypothesis word is either kept in its tagged
// stream or moved to the other one; a moved word must exactly match a
// reference word of that stream and costs one misattribution. Each
// assignment is scored by an independent per-stream DP and the
// lexicographically smallest (total, sub, ins, del, sa_wearer) wins.
pub fn stream_cost(reference: &[&str], hyp: &[(&str, bool)]) -> Option<[usize; 5]> {
    // [total, sub, ins, del, moved]
    let (n, m) = (reference.len(), hyp.len());
    let inf = None;
    let mut t: Vec<Vec<Option<[usize; 5]>>> = vec![vec![inf; m + 1]; n + 1];
    t[0][0] = Some([0; 5]);
    let bump = |c: [usize; 5], sub: usize, ins: usize, del: usize, moved: usize| {
        [c[0] + sub + ins + del + moved, c[1] + sub, c[2] + ins, c[3] + del, c[4] + moved]
    };
    let better = |a: Option<[usize; 5]>, b: [usize; 5]| match a {
        None => Some(b),
        Some(x) => Some(if b[..4] < x[..4] { b } else { x }),
    };
    for i in 0..=n {
        for j in 0..=m {
            let Some(c) = t[i][j] else { continue };
            if i < n {
                t[i + 1][j] = better(t[i + 1][j], bump(c, 0, 0, 1, 0));
            }
            if j < m {
                let (w, moved) = hyp[j];
                if !moved {
                    t[i][j + 1] = better(t[i][j + 1], bump(c, 0, 1, 0, 0));
                }
                if i < n {
                    if moved {
                        if reference[i] == w {
                            t[i + 1][j + 1] = better(t[i + 1][j + 1], bump(c, 0, 0, 0, 1));
                        }
                    } else {
                        let s = usize::from(reference[i] != w);
                        t[i + 1][j + 1] = better(t[i + 1][j + 1], bump(c, s, 0, 0, 0));
                    }
                }
            }
        }
    }
    t[n][m]
}

pub fn brute_force_sa(ref_w: &[&str], ref_p: &[&str], hyp: &[(Speaker, &str)]) -> (usize, usize) {
    let mut best: Option<([usize; 5], usize)> = None;
    for mask in 0u32..(1 << hyp.len()) {
        let mut streams: [Vec<(&str, bool)>; 2] = [vec![], vec![]];
        for (k, &(tag, w)) in hyp.iter().enumerate() {
            let moved = mask >> k & 1 == 1;
            let own = if tag == Speaker::Wearer { 0 } else { 1 };
            let dest = if moved { 1 - own } else { own };
            streams[dest].push((w, moved));
        }
        let (Some(cw), Some(cp)) = (stream_cost(ref_w, &streams[0]), stream_cost(ref_p, &streams[1])) else {
            continue;
        };
        // moved into the wearer stream = wearer reference words misattributed
        let key = [cw[0] + cp[0], cw[1] + cp[1], cw[2] + cp[2], cw[3] + cp[3], cw[4]];
        if best.is_none_or(|(b, _)| key < b) {
            best = Some((key, cp[4]));
        }
    }
    let (key, sa_p) = best.unwrap();
    (key[4], sa_p)
}

/// Sort-then-merge oracle for the expected speaker runs.
pub fn merged_runs(segs: &[AttributedSegment]) -> Vec<(Speaker, String)> {
    let mut sorted: Vec<&AttributedSegment> = segs.iter().collect();
    sorted.sort_by(|a, b| {
        a.start.partial_cmp(&b.start).unwrap().then((a.speaker == Speaker::Partner).cmp(&(b.speaker == Speaker::Partner)))
    });
    let mut runs: Vec<(Speaker, String)> = Vec::new();
    for s in sorted {
        match runs.last_mut() {
            Some((sp, t)) if *sp == s.speaker => {
                t.push(' ');
                t.push_str(&s.text);
            }
            _ => runs.push((s.speaker, s.text.clone())),
        }
    }
    runs
}

/// Runs a random push/append sequence, checking the bounds after every
/// step, and returns a trace for reproducibility checks.
pub fn fuzz(seed: u64, ops: usize) -> Vec<(usize, usize, Vec<u64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = SlidingWindow::default();
    let mut t = 0.0;
    let mut trace = Vec::with_capacity(ops);
    let mut pushed: std::collections::VecDeque<f64> = Default::default();
    for _ in 0..ops {
        if rng.random_bool(0.6) {
            let len = if rng.random_bool(0.8) { CHUNK_SAMPLES } else { rng.random_range(1..=CHUNK_SAMPLES) };
            let evicted = w.push_chunk(&vec![0.01; len], t).unwrap();
            pushed.push_back(t);
            for e in &evicted {
                assert_eq!(Some(*e), pushed.pop_front(), "eviction must take the oldest chunk");
            }
            t += len as f64 / 16_000.0 + rng.random_range(0.0..0.5);
            trace.push((w.len(), w.history_len(), evicted.iter().map(|x| x.to_bits()).collect()));
        } else {
            let n = rng.random_range(0..30);
            let text: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
            w.append_history(&text.join(" "));
            trace.push((w.len(), w.history_len(), vec![]));
        }
        assert!(w.duration_s() <= 30.0 + 1e-12);
        assert!(w.history_len() <= MAX_HISTORY_WORDS);
        assert_eq!(w.chunks().next().map(|c| c.start), pushed.front().copied());
    }
    trace
}

