use proptest::prelude::*;

use turnforge_core::{
    apply_filters, check_invariants, compute_features, is_backchannel, parse_canonical_tokens,
    pearson, reference_oracle, segment, summarize, transcripts_agree, write_canonical_tokens,
    CueList, TokenStream, TurnKind, TurnModel, TurnModelConfig, WordToken,
};

const WORDS: [&str; 12] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet",
    "kilo", "lima",
];

fn token_stream_strategy(len: std::ops::Range<usize>) -> impl Strategy<Value = TokenStream> {
    prop::collection::vec(
        (
            0usize..2,
            0usize..WORDS.len(),
            0i64..120_000,
            1i64..3_000,
            0u32..=1000,
        ),
        len,
    )
    .prop_map(|raw| {
        let tokens: Vec<WordToken> = raw
            .into_iter()
            .map(|(speaker, word, start_ms, dur_ms, conf)| WordToken {
                speaker: if speaker == 0 { "A" } else { "B" }.to_string(),
                text: WORDS[word].to_string(),
                start_s: start_ms as f64 / 1000.0,
                end_s: (start_ms + dur_ms) as f64 / 1000.0,
                confidence: conf as f64 / 1000.0,
                low_confidence: false,
            })
            .collect();
        TokenStream::new("prop", tokens).unwrap()
    })
}

/// Streams whose inter-token silences cluster tightly around the pause
/// threshold, exercising the split boundary.
fn adversarial_stream_strategy() -> impl Strategy<Value = TokenStream> {
    prop::collection::vec(
        (
            0usize..2,
            0usize..WORDS.len(),
            prop_oneof![
                Just(1498i64),
                Just(1499),
                Just(1500),
                Just(1501),
                Just(1502),
                0i64..80,
                1400i64..1600,
            ],
            50i64..400,
        ),
        0..120,
    )
    .prop_map(|raw| {
        let mut clock: [i64; 2] = [0, 0];
        let tokens: Vec<WordToken> = raw
            .into_iter()
            .map(|(speaker, word, gap_ms, dur_ms)| {
                let start = clock[speaker] + gap_ms;
                clock[speaker] = start + dur_ms;
                WordToken {
                    speaker: if speaker == 0 { "A" } else { "B" }.to_string(),
                    text: WORDS[word].to_string(),
                    start_s: start as f64 / 1000.0,
                    end_s: (start + dur_ms) as f64 / 1000.0,
                    confidence: 1.0,
                    low_confidence: false,
                }
            })
            .collect();
        TokenStream::new("adversarial", tokens).unwrap()
    })
}

fn token_key(t: &WordToken) -> (u64, u64, String, String) {
    (
        t.start_s.to_bits(),
        t.end_s.to_bits(),
        t.speaker.clone(),
        t.text.clone(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_canonical_round_trip(stream in token_stream_strategy(1..80)) {
        let text = write_canonical_tokens(&stream);
        let parsed = parse_canonical_tokens(&text).unwrap();
        prop_assert_eq!(parsed.conversation_id(), stream.conversation_id());
        prop_assert_eq!(parsed.len(), stream.len());
        for (a, b) in parsed.tokens().iter().zip(stream.tokens().iter()) {
            prop_assert_eq!(a.start_s, b.start_s);
            prop_assert_eq!(a.end_s, b.end_s);
            prop_assert_eq!(&a.speaker, &b.speaker);
            prop_assert_eq!(&a.text, &b.text);
            prop_assert_eq!(a.confidence, b.confidence);
        }
    }

    #[test]
    fn prop_all_models_conserve_tokens(stream in token_stream_strategy(0..80)) {
        let config = TurnModelConfig::default();
        for model in [TurnModel::Baseline, TurnModel::Intermediate, TurnModel::NaturalTurn] {
            let transcript = segment(&stream, model, &config).unwrap();
            let mut expected: Vec<_> = stream.tokens().iter().map(token_key).collect();
            let mut actual: Vec<_> = transcript
                .turns
                .iter()
                .flat_map(|t| t.tokens.iter().map(token_key))
                .collect();
            expected.sort();
            actual.sort();
            prop_assert_eq!(expected, actual);
        }
    }

    #[test]
    fn prop_naturalturn_invariants_hold(stream in token_stream_strategy(0..80)) {
        let config = TurnModelConfig::default();
        let transcript = segment(&stream, TurnModel::NaturalTurn, &config).unwrap();
        let problems = check_invariants(&stream, &transcript);
        prop_assert!(problems.is_empty(), "violations: {:?}", problems);
    }

    #[test]
    fn prop_secondary_turns_contained_in_parent(stream in token_stream_strategy(0..80)) {
        let config = TurnModelConfig::default();
        let transcript = segment(&stream, TurnModel::NaturalTurn, &config).unwrap();
        for turn in &transcript.turns {
            if turn.kind == TurnKind::Primary {
                prop_assert!(turn.parent_turn_id.is_none());
                continue;
            }
            let parent_id = turn.parent_turn_id.unwrap();
            let parent = transcript
                .turns
                .iter()
                .find(|t| t.turn_id == parent_id)
                .unwrap();
            prop_assert_eq!(parent.kind, TurnKind::Primary);
            prop_assert!(parent.speaker != turn.speaker);
            prop_assert!(turn.end_s <= parent.end_s);
            prop_assert!(turn.start_s >= parent.start_s);
        }
    }

    #[test]
    fn prop_intra_turn_silences_below_threshold(stream in token_stream_strategy(0..80)) {
        let config = TurnModelConfig::default();
        let transcript = segment(&stream, TurnModel::NaturalTurn, &config).unwrap();
        for turn in &transcript.turns {
            for pair in turn.tokens.windows(2) {
                prop_assert!(pair[1].start_s - pair[0].end_s < config.max_pause_s);
            }
        }
    }

    #[test]
    fn prop_segmentation_deterministic(stream in token_stream_strategy(0..60)) {
        let config = TurnModelConfig::default();
        for model in [TurnModel::Baseline, TurnModel::Intermediate, TurnModel::NaturalTurn] {
            let first = segment(&stream, model, &config).unwrap();
            let second = segment(&stream, model, &config).unwrap();
            prop_assert_eq!(first, second);
        }
    }

    #[test]
    fn prop_engine_matches_oracle(stream in adversarial_stream_strategy()) {
        let config = TurnModelConfig::default();
        let engine = segment(&stream, TurnModel::NaturalTurn, &config).unwrap();
        let oracle = reference_oracle(&stream, &config).unwrap();
        prop_assert!(
            transcripts_agree(&engine, &oracle),
            "engine {:?} vs oracle {:?}",
            engine.turns,
            oracle.turns
        );
    }

    #[test]
    fn prop_baseline_alternates_speakers(stream in token_stream_strategy(0..80)) {
        let config = TurnModelConfig::default();
        let transcript = segment(&stream, TurnModel::Baseline, &config).unwrap();
        for pair in transcript.turns.windows(2) {
            prop_assert!(pair[0].speaker != pair[1].speaker);
        }
        for turn in &transcript.turns {
            prop_assert_eq!(turn.kind, TurnKind::Primary);
            let joined: Vec<&str> = turn.tokens.iter().map(|t| t.text.as_str()).collect();
            prop_assert_eq!(turn.text.clone(), joined.join(" "));
            prop_assert_eq!(turn.n_words, turn.tokens.len());
        }
    }

    #[test]
    fn prop_classifier_shrinks_with_cue_removal(
        words in prop::collection::vec(0usize..WORDS.len(), 1..4),
        cue_count in 1usize..6,
    ) {
        // Removing a cue from the list can only turn acceptance into
        // rejection, never the reverse.
        let config = TurnModelConfig::default();
        let sample: Vec<&str> = words.iter().map(|&i| WORDS[i]).collect();
        let full_cues: Vec<&str> = WORDS[..cue_count.min(WORDS.len())].to_vec();
        let full = CueList::new(full_cues.clone(), Vec::<String>::new());
        let reduced = CueList::new(full_cues[1..].to_vec(), Vec::<String>::new());
        let with_full = is_backchannel(&sample, &full, &config).unwrap();
        let with_reduced = is_backchannel(&sample, &reduced, &config).unwrap();
        prop_assert!(with_full || !with_reduced);
    }

    #[test]
    fn prop_classifier_case_insensitive(words in prop::collection::vec(0usize..WORDS.len(), 1..4)) {
        let config = TurnModelConfig::default();
        let cues = CueList::new(WORDS[..6].to_vec(), Vec::<String>::new());
        let lower: Vec<String> = words.iter().map(|&i| WORDS[i].to_string()).collect();
        let upper: Vec<String> = lower.iter().map(|w| w.to_uppercase()).collect();
        prop_assert_eq!(
            is_backchannel(&lower, &cues, &config).unwrap(),
            is_backchannel(&upper, &cues, &config).unwrap()
        );
    }

    #[test]
    fn prop_pearson_symmetric_and_affine_invariant(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 4..40),
        scale in 0.5f64..20.0,
        shift in -50.0f64..50.0,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let forward = pearson(&x, &y);
        let backward = pearson(&y, &x);
        match (forward, backward) {
            (Ok(f), Ok(b)) => {
                prop_assert!((f.r - b.r).abs() < 1e-12);
                let rescaled: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
                let r2 = pearson(&rescaled, &y).unwrap();
                prop_assert!((f.r - r2.r).abs() < 1e-9);
            }
            (Err(_), Err(_)) => {}
            (f, b) => prop_assert!(false, "asymmetric failure: {:?} vs {:?}", f.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn prop_unfiltered_summary_matches_permissive_filters(stream in token_stream_strategy(0..80)) {
        let config = TurnModelConfig::default();
        let transcript = segment(&stream, TurnModel::NaturalTurn, &config).unwrap();
        let unmarked = compute_features(&transcript);
        let mut marked = unmarked.clone();
        let permissive = TurnModelConfig {
            drop_first_turn: false,
            max_turn_duration_s: 1.0e9,
            interval_min_s: -1.0e9,
            interval_max_s: 1.0e9,
            ..TurnModelConfig::default()
        };
        apply_filters(&mut marked, &permissive);
        match (summarize(&unmarked, "m"), summarize(&marked, "m")) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "summaries disagree on emptiness"),
        }
    }
}
