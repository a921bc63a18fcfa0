use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WerBreakdown {
    pub ref_words: usize,
    pub ins: usize,
    pub del: usize,
    pub sub: usize,
    pub wer_pct: f64,
    /// Set when the reference is empty but the hypothesis is not; `wer_pct`
    /// is then `100 * ins`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub empty_ref: bool,
}

impl WerBreakdown {
    pub fn from_counts(ref_words: usize, ins: usize, del: usize, sub: usize) -> Self {
        let errors = ins + del + sub;
        Self {
            ref_words,
            ins,
            del,
            sub,
            wer_pct: 100.0 * errors as f64 / ref_words.max(1) as f64,
            empty_ref: ref_words == 0 && errors > 0,
        }
    }

    pub fn errors(&self) -> usize {
        self.ins + self.del + self.sub
    }

    /// Pools counts, as for corpus-level WER.
    pub fn combine(&self, other: &WerBreakdown) -> WerBreakdown {
        WerBreakdown::from_counts(
            self.ref_words + other.ref_words,
            self.ins + other.ins,
            self.del + other.del,
            self.sub + other.sub,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match,
    Sub,
    Ins,
    Del,
}

/// An optimal alignment as `(op, ref index, hyp index)` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub steps: Vec<(EditOp, Option<usize>, Option<usize>)>,
    pub breakdown: WerBreakdown,
}

// (total, sub, ins) compared lexicographically
type Cost = (usize, usize, usize);

fn add(c: Cost, op: EditOp) -> Cost {
    match op {
        EditOp::Match => c,
        EditOp::Sub => (c.0 + 1, c.1 + 1, c.2),
        EditOp::Ins => (c.0 + 1, c.1, c.2 + 1),
        EditOp::Del => (c.0 + 1, c.1, c.2),
    }
}

/// Unit-cost Levenshtein alignment; among equal totals it keeps the one
/// with fewer substitutions, then fewer insertions.
pub fn align<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hyp: &[T]) -> Alignment {
    let (n, m) = (reference.len(), hyp.len());
    let mut cost = vec![vec![(0usize, 0usize, 0usize); m + 1]; n + 1];
    let mut back = vec![vec![EditOp::Match; m + 1]; n + 1];
    for i in 1..=n {
        cost[i][0] = add(cost[i - 1][0], EditOp::Del);
        back[i][0] = EditOp::Del;
    }
    for j in 1..=m {
        cost[0][j] = add(cost[0][j - 1], EditOp::Ins);
        back[0][j] = EditOp::Ins;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = if reference[i - 1].as_ref() == hyp[j - 1].as_ref() { EditOp::Match } else { EditOp::Sub };
            let mut best = (add(cost[i - 1][j - 1], diag), diag);
            for (c, op) in [(add(cost[i][j - 1], EditOp::Ins), EditOp::Ins), (add(cost[i - 1][j], EditOp::Del), EditOp::Del)] {
                if c < best.0 {
                    best = (c, op);
                }
            }
            cost[i][j] = best.0;
            back[i][j] = best.1;
        }
    }
    let mut steps = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    let (mut ins, mut del, mut sub) = (0, 0, 0);
    while i > 0 || j > 0 {
        let op = back[i][j];
        match op {
            EditOp::Match | EditOp::Sub => {
                if op == EditOp::Sub {
                    sub += 1;
                }
                i -= 1;
                j -= 1;
                steps.push((op, Some(i), Some(j)));
            }
            EditOp::Ins => {
                ins += 1;
                j -= 1;
                steps.push((op, None, Some(j)));
            }
            EditOp::Del => {
                del += 1;
                i -= 1;
                steps.push((op, Some(i), None));
            }
        }
    }
    steps.reverse();
    Alignment { steps, breakdown: WerBreakdown::from_counts(n, ins, del, sub) }
}

pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hyp: &[T]) -> WerBreakdown {
    align(reference, hyp).breakdown
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn examples() {
        let b = wer(&w("a b c"), &w("a b c"));
        assert_eq!((b.ins, b.del, b.sub, b.wer_pct), (0, 0, 0, 0.0));
        let b = wer(&w("a b c"), &w("a x c"));
        assert_eq!((b.ins, b.del, b.sub), (0, 0, 1));
        assert!((b.wer_pct - 100.0 / 3.0).abs() < 1e-9);
        let b = wer(&w("a b"), &w("a"));
        assert_eq!((b.ins, b.del, b.sub, b.wer_pct), (0, 1, 0, 50.0));
    }

    #[test]
    fn empty_sides() {
        let b = wer::<&str, &str>(&[], &[]);
        assert_eq!(b.wer_pct, 0.0);
        assert!(!b.empty_ref);
        let b = wer(&[] as &[&str], &w("x y"));
        assert_eq!((b.ins, b.wer_pct, b.empty_ref), (2, 200.0, true));
        let b = wer(&w("x y"), &[] as &[&str]);
        assert_eq!((b.del, b.wer_pct), (2, 100.0));
    }

    #[test]
    fn tie_break_prefers_fewer_substitutions() {
        // "a b" vs "b a": 2 subs or 1 del + 1 ins (total 2 either way)
        let b = wer(&w("a b"), &w("b a"));
        assert_eq!((b.sub, b.ins, b.del), (0, 1, 1));
    }

    #[test]
    fn alignment_steps_cover_both_sides() {
        let a = align(&w("a b c d"), &w("a x c e f"));
        let refs: Vec<usize> = a.steps.iter().filter_map(|s| s.1).collect();
        let hyps: Vec<usize> = a.steps.iter().filter_map(|s| s.2).collect();
        assert_eq!(refs, vec![0, 1, 2, 3]);
        assert_eq!(hyps, vec![0, 1, 2, 3, 4]);
        assert_eq!(a.breakdown.errors(), 3);
    }

    #[test]
    fn combine_pools_counts() {
        let a = WerBreakdown::from_counts(10, 1, 0, 1);
        let b = WerBreakdown::from_counts(30, 0, 2, 0);
        let c = a.combine(&b);
        assert_eq!((c.ref_words, c.errors()), (40, 4));
        assert!((c.wer_pct - 10.0).abs() < 1e-12);
    }
}
