use std::collections::HashMap;

use serde::{Deserialize, Serialize};

const MAX_N: usize = 4;

/// Sufficient statistics for BLEU; sums over sentences give corpus BLEU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BleuStats {
    pub matches: [usize; MAX_N],
    pub totals: [usize; MAX_N],
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngram_counts<S: AsRef<str>>(words: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    for gram in words.windows(n) {
        *counts.entry(gram.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
    }
    counts
}

impl BleuStats {
    /// Clipped n-gram counts of one hypothesis against its references; the
    /// effective reference length is the closest one (shorter on ties).
    pub fn sentence<R: AsRef<[S]>, S: AsRef<str>, H: AsRef<str>>(refs: &[R], hyp: &[H]) -> Self {
        let mut stats = BleuStats { hyp_len: hyp.len(), ..Default::default() };
        stats.ref_len = refs
            .iter()
            .map(|r| r.as_ref().len())
            .min_by_key(|&len| (len.abs_diff(hyp.len()), len))
            .unwrap_or(0);
        for n in 1..=MAX_N {
            let hyp_counts = ngram_counts(hyp, n);
            let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
            for r in refs {
                for (gram, c) in ngram_counts(r.as_ref(), n) {
                    let e = max_ref.entry(gram).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            stats.totals[n - 1] = hyp.len().saturating_sub(n - 1);
            stats.matches[n - 1] =
                hyp_counts.iter().map(|(g, &c)| c.min(max_ref.get(g).copied().unwrap_or(0))).sum();
        }
        stats
    }

    pub fn add(&mut self, other: &BleuStats) {
        for n in 0..MAX_N {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    /// Modified n-gram precisions; orders 2..4 with no match use
    /// `1 / (total + 1)`.
    pub fn precisions(&self) -> [f64; MAX_N] {
        let mut p = [0.0; MAX_N];
        for n in 0..MAX_N {
            let (m, t) = (self.matches[n], self.totals[n]);
            p[n] = if n > 0 && m == 0 {
                1.0 / (t as f64 + 1.0)
            } else if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            };
        }
        p
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        }
    }

    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let p = self.precisions();
        if p[0] == 0.0 {
            return 0.0;
        }
        let log_mean = p.iter().map(|x| x.ln()).sum::<f64>() / MAX_N as f64;
        self.brevity_penalty() * log_mean.exp()
    }
}

/// Sentence BLEU of `hyp` against one or more references, in `[0, 1]`.
pub fn bleu<R: AsRef<[S]>, S: AsRef<str>, H: AsRef<str>>(refs: &[R], hyp: &[H]) -> f64 {
    BleuStats::sentence(refs, hyp).score()
}

/// Corpus BLEU over `(references, hypothesis)` pairs.
pub fn corpus_bleu<R: AsRef<[S]>, S: AsRef<str>, H: AsRef<str>>(pairs: &[(Vec<R>, Vec<H>)]) -> f64 {
    let mut total = BleuStats::default();
    for (refs, hyp) in pairs {
        total.add(&BleuStats::sentence(refs, hyp));
    }
    total.score()
}
