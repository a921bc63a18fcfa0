mod common;

use common::oracles::merged_runs;
use dirspeech_core::sot::{parse_sot, serialize_sot, AttributedSegment, ParseMode, SotSequence, SotToken};
use dirspeech_core::Speaker;
use proptest::prelude::*;

fn segment() -> impl Strategy<Value = AttributedSegment> {
    (any::<bool>(), 0u32..50, proptest::collection::vec("[a-z]{1,6}", 1..5)).prop_map(|(w, start, words)| {
        AttributedSegment {
            speaker: if w { Speaker::Wearer } else { Speaker::Partner },
            start: f64::from(start) * 0.5,
            text: words.join(" "),
            lang: "en".into(),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip_and_change_count(segs in proptest::collection::vec(segment(), 0..8)) {
        let seq = serialize_sot(&segs).unwrap();
        seq.validate().unwrap();
        let parsed = parse_sot(&seq, ParseMode::Strict).unwrap();
        let expected = merged_runs(&segs);
        prop_assert!(parsed.warnings.is_empty());
        prop_assert_eq!(&parsed.runs, &expected);
        prop_assert_eq!(seq.change_count(), expected.len().saturating_sub(1));
        // text form parses back to the same tokens
        let reparsed: SotSequence = seq.to_string().parse().unwrap();
        prop_assert_eq!(reparsed, seq);
    }

    #[test]
    fn lenient_parse_never_fails(tokens in proptest::collection::vec(0u8..5, 0..20)) {
        let seq = SotSequence {
            tokens: tokens
                .iter()
                .map(|t| match t {
                    0 => SotToken::Role(Speaker::Wearer),
                    1 => SotToken::Role(Speaker::Partner),
                    2 => SotToken::Change,
                    _ => SotToken::Word(format!("w{t}")),
                })
                .collect(),
        };
        let parsed = parse_sot(&seq, ParseMode::Lenient).unwrap();
        let words: usize = parsed.runs.iter().map(|(_, t)| t.split_whitespace().count()).sum();
        let expected = seq.tokens.iter().filter(|t| matches!(t, SotToken::Word(_))).count();
        prop_assert_eq!(words, expected);
        if seq.validate().is_ok() {
            prop_assert!(parse_sot(&seq, ParseMode::Strict).is_ok());
        }
    }
}
