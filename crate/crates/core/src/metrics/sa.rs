use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::wer::{wer, WerBreakdown};
use super::words;
use crate::speaker::Speaker;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpeakerSa {
    pub wer: WerBreakdown,
    /// Reference words of this speaker realized in the other speaker's stream.
    pub sa_words: usize,
    pub sa_pct: f64,
}

impl SpeakerSa {
    fn new(wer: WerBreakdown, sa_words: usize) -> Self {
        let sa_pct = if wer.ref_words == 0 { 0.0 } else { 100.0 * sa_words as f64 / wer.ref_words as f64 };
        Self { wer, sa_words, sa_pct }
    }

    pub fn combine(&self, other: &SpeakerSa) -> SpeakerSa {
        SpeakerSa::new(self.wer.combine(&other.wer), self.sa_words + other.sa_words)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SaReport {
    pub speakers: BTreeMap<Speaker, SpeakerSa>,
}

impl SaReport {
    pub fn get(&self, s: Speaker) -> SpeakerSa {
        self.speakers.get(&s).copied().unwrap_or_default()
    }

    pub fn combine(&self, other: &SaReport) -> SaReport {
        let speakers = Speaker::BOTH.iter().map(|&s| (s, self.get(s).combine(&other.get(s)))).collect();
        SaReport { speakers }
    }
}

fn idx(s: Speaker) -> usize {
    match s {
        Speaker::Wearer => 0,
        Speaker::Partner => 1,
    }
}

// (total, sub, ins, del, sa_wearer, sa_partner); the first five order states
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct JointCost([usize; 6]);

impl JointCost {
    const INF: JointCost = JointCost([usize::MAX; 6]);

    fn key(&self) -> [usize; 5] {
        [self.0[0], self.0[1], self.0[2], self.0[3], self.0[4]]
    }

    fn step(self, sub: usize, ins: usize, del: usize, sa: Option<Speaker>) -> JointCost {
        let mut c = self.0;
        c[0] += sub + ins + del + usize::from(sa.is_some());
        c[1] += sub;
        c[2] += ins;
        c[3] += del;
        if let Some(s) = sa {
            c[4 + idx(s)] += 1;
        }
        JointCost(c)
    }
}

fn relax(slot: &mut JointCost, cand: JointCost) {
    if *slot == JointCost::INF || cand.key() < slot.key() {
        *slot = cand;
    }
}

/// Minimum-cost joint alignment of the tagged hypothesis words against both
/// reference streams. A hypothesis word may match its own speaker's next
/// reference word (free or as a substitution), be inserted, or, at unit
/// cost, exactly match the other speaker's next reference word; the last
/// case counts a misattributed reference word. Returns `(sa_wearer, sa_partner)`.
fn joint_sa(refs: [&[String]; 2], hyp: &[(Speaker, String)]) -> (usize, usize) {
    let (a_len, b_len) = (refs[0].len(), refs[1].len());
    let plane = (a_len + 1) * (b_len + 1);
    let at = |a: usize, b: usize| a * (b_len + 1) + b;
    let mut cur = vec![JointCost::INF; plane];
    cur[0] = JointCost([0; 6]);
    for i in 0..=hyp.len() {
        let mut next = vec![JointCost::INF; plane];
        for a in 0..=a_len {
            for b in 0..=b_len {
                let c = cur[at(a, b)];
                if c == JointCost::INF {
                    continue;
                }
                if a < a_len {
                    relax(&mut cur[at(a + 1, b)], c.step(0, 0, 1, None));
                }
                if b < b_len {
                    relax(&mut cur[at(a, b + 1)], c.step(0, 0, 1, None));
                }
                let Some((tag, word)) = hyp.get(i) else { continue };
                relax(&mut next[at(a, b)], c.step(0, 1, 0, None));
                let pos = [a, b];
                let own = idx(*tag);
                let other = 1 - own;
                let advance = |k: usize| if k == 0 { at(a + 1, b) } else { at(a, b + 1) };
                if pos[own] < refs[own].len() {
                    let sub = usize::from(refs[own][pos[own]] != *word);
                    relax(&mut next[advance(own)], c.step(sub, 0, 0, None));
                }
                if pos[other] < refs[other].len() && refs[other][pos[other]] == *word {
                    relax(&mut next[advance(other)], c.step(0, 0, 0, Some(tag.other())));
                }
            }
        }
        if i == hyp.len() {
            let end = cur[at(a_len, b_len)];
            return (end.0[4], end.0[5]);
        }
        cur = next;
    }
    unreachable!("loop returns on the last hypothesis position")
}

/// Per-speaker WER plus speaker-attribution error.
///
/// `reference` holds attributed reference texts in time order, `hyp` the
/// hypothesis runs in emission order. WER for speaker `s` compares the
/// concatenation of `s`'s reference words against the hypothesis words
/// tagged `s`. SA for `s` is the share of `s`'s reference words that the
/// joint alignment places in the other speaker's hypothesis stream.
pub fn sa_wer<R: AsRef<str>, H: AsRef<str>>(reference: &[(Speaker, R)], hyp: &[(Speaker, H)]) -> SaReport {
    let stream = |items: &[(Speaker, String)], s: Speaker| -> Vec<String> {
        items.iter().filter(|(t, _)| *t == s).map(|(_, w)| w.clone()).collect()
    };
    let explode = |runs: Vec<(Speaker, &str)>| -> Vec<(Speaker, String)> {
        runs.into_iter().flat_map(|(s, t)| words(t).into_iter().map(move |w| (s, w))).collect()
    };
    let ref_words = explode(reference.iter().map(|(s, t)| (*s, t.as_ref())).collect());
    let hyp_words = explode(hyp.iter().map(|(s, t)| (*s, t.as_ref())).collect());
    let ref_w = stream(&ref_words, Speaker::Wearer);
    let ref_p = stream(&ref_words, Speaker::Partner);
    let (sa_w, sa_p) = joint_sa([&ref_w, &ref_p], &hyp_words);
    let mut speakers = BTreeMap::new();
    for (s, r, sa) in [(Speaker::Wearer, &ref_w, sa_w), (Speaker::Partner, &ref_p, sa_p)] {
        speakers.insert(s, SpeakerSa::new(wer(r, &stream(&hyp_words, s)), sa));
    }
    SaReport { speakers }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Speaker::{Partner, Wearer};

    #[test]
    fn perfect() {
        let r = [(Wearer, "hello there"), (Partner, "hola amigo")];
        let rep = sa_wer(&r, &r);
        for s in Speaker::BOTH {
            assert_eq!(rep.get(s).wer.wer_pct, 0.0);
            assert_eq!(rep.get(s).sa_pct, 0.0);
        }
    }

    #[test]
    fn migrated_word() {
        let r = [(Wearer, "hello world"), (Partner, "bonjour")];
        let h = [(Wearer, "hello world bonjour"), (Partner, "")];
        let rep = sa_wer(&r, &h);
        let p = rep.get(Partner);
        assert_eq!((p.wer.del, p.wer.wer_pct), (1, 100.0));
        assert_eq!(rep.get(Wearer).wer.ins, 1);
        assert_eq!(p.sa_pct, 100.0);
        assert_eq!(rep.get(Wearer).sa_pct, 0.0);
    }

    #[test]
    fn swapped_speakers() {
        let r = [(Wearer, "one two three"), (Partner, "uno dos")];
        let h = [(Partner, "one two three"), (Wearer, "uno dos")];
        let rep = sa_wer(&r, &h);
        assert_eq!(rep.get(Wearer).sa_pct, 100.0);
        assert_eq!(rep.get(Partner).sa_pct, 100.0);
    }

    #[test]
    fn substitution_is_not_migration() {
        let r = [(Wearer, "a b"), (Partner, "c")];
        let h = [(Wearer, "a x"), (Partner, "c")];
        let rep = sa_wer(&r, &h);
        assert_eq!(rep.get(Wearer).wer.sub, 1);
        assert_eq!(rep.get(Wearer).sa_words + rep.get(Partner).sa_words, 0);
    }

    #[test]
    fn combine_pools() {
        let r = [(Wearer, "a b"), (Partner, "c")];
        let h = [(Wearer, "a b c")];
        let one = sa_wer(&r, &h);
        let two = one.combine(&sa_wer(&r, &r));
        assert_eq!(two.get(Partner).wer.ref_words, 2);
        assert_eq!(two.get(Partner).sa_pct, 50.0);
    }
}
