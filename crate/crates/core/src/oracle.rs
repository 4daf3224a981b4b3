//! Reference implementation and invariant checks used for verification.
//!
//! `reference_oracle` recomputes the pause-and-containment model with a
//! deliberately naive quadratic construction that shares no segmentation
//! code with the production engine. Agreement between the two is checked in
//! tests and by the `verify` command.

use std::collections::BTreeSet;

use crate::config::TurnModelConfig;
use crate::error::Result;
use crate::segment::{Transcript, Turn, TurnKind, TurnModel};
use crate::token::{TokenStream, WordToken};

/// Segments a stream with a naive re-implementation of the
/// pause-and-containment model.
pub fn reference_oracle(stream: &TokenStream, config: &TurnModelConfig) -> Result<Transcript> {
    config.validate()?;

    let mut groups: Vec<Vec<WordToken>> = Vec::new();
    for speaker in stream.speakers() {
        let mine: Vec<WordToken> = stream
            .tokens()
            .iter()
            .filter(|t| t.speaker == speaker)
            .cloned()
            .collect();
        let mut start = 0;
        for i in 1..=mine.len() {
            let boundary =
                i == mine.len() || mine[i].start_s - mine[i - 1].end_s >= config.max_pause_s;
            if boundary {
                groups.push(mine[start..i].to_vec());
                start = i;
            }
        }
    }

    // Selection scan instead of a sort call: repeatedly take the earliest
    // remaining group, breaking start ties by speaker label then end time.
    let mut ordered: Vec<Vec<WordToken>> = Vec::with_capacity(groups.len());
    while !groups.is_empty() {
        let mut best = 0;
        for i in 1..groups.len() {
            let (a, b) = (&groups[i], &groups[best]);
            let key = |g: &[WordToken]| {
                (
                    g.first().unwrap().start_s,
                    g.first().unwrap().speaker.clone(),
                    g.last().unwrap().end_s,
                )
            };
            let (ka, kb) = (key(a), key(b));
            let earlier = ka.0 < kb.0
                || (ka.0 == kb.0 && ka.1 < kb.1)
                || (ka.0 == kb.0 && ka.1 == kb.1 && ka.2 < kb.2);
            if earlier {
                best = i;
            }
        }
        ordered.push(groups.remove(best));
    }

    let mut turns: Vec<Turn> = Vec::new();
    let mut last_primary: Option<(usize, String, f64)> = None;
    for tokens in ordered {
        let speaker = tokens[0].speaker.clone();
        let start_s = tokens[0].start_s;
        let end_s = tokens.last().unwrap().end_s;
        let subordinate = match &last_primary {
            Some((_, p_speaker, p_end)) => speaker != *p_speaker && end_s <= *p_end,
            None => false,
        };
        let turn_id = turns.len() as u32 + 1;
        let (kind, parent) = if subordinate {
            let (p_index, _, _) = last_primary.clone().unwrap();
            let words: Vec<String> = tokens.iter().map(|t| oracle_normalize(&t.text)).collect();
            let kind = if oracle_is_backchannel(&words, config) {
                TurnKind::Backchannel
            } else {
                TurnKind::Secondary
            };
            (kind, Some(turns[p_index].turn_id))
        } else {
            last_primary = Some((turns.len(), speaker.clone(), end_s));
            (TurnKind::Primary, None)
        };
        let text = tokens
            .iter()
            .map(|t| t.text.clone())
            .collect::<Vec<_>>()
            .join(" ");
        turns.push(Turn {
            turn_id,
            speaker,
            kind,
            n_words: tokens.len(),
            start_s,
            end_s,
            text,
            tokens,
            parent_turn_id: parent,
        });
    }

    Ok(Transcript {
        conversation_id: stream.conversation_id().to_string(),
        model: TurnModel::NaturalTurn,
        turns,
        config: config.clone(),
    })
}

fn oracle_normalize(word: &str) -> String {
    let chars: Vec<char> = word.chars().collect();
    let mut lo = 0;
    let mut hi = chars.len();
    while lo < hi && !chars[lo].is_alphanumeric() {
        lo += 1;
    }
    while hi > lo && !chars[hi - 1].is_alphanumeric() {
        hi -= 1;
    }
    chars[lo..hi].iter().collect::<String>().to_lowercase()
}

fn oracle_is_backchannel(normalized_words: &[String], config: &TurnModelConfig) -> bool {
    if normalized_words.is_empty() || normalized_words.len() > config.backchannel_max_words {
        return false;
    }
    let cues: BTreeSet<String> = config.cue_list.cues().map(String::from).collect();
    let prohibited: BTreeSet<String> = config
        .cue_list
        .prohibited_starts()
        .map(String::from)
        .collect();
    if prohibited.contains(&normalized_words[0]) {
        return false;
    }
    let cue_count = normalized_words.iter().filter(|w| cues.contains(*w)).count();
    cue_count as f64 > config.backchannel_fraction * normalized_words.len() as f64
}

/// True when two transcripts agree on every turn boundary, kind, speaker,
/// and parent link.
pub fn transcripts_agree(a: &Transcript, b: &Transcript) -> bool {
    a.conversation_id == b.conversation_id
        && a.turns.len() == b.turns.len()
        && a.turns.iter().zip(b.turns.iter()).all(|(x, y)| {
            x.turn_id == y.turn_id
                && x.speaker == y.speaker
                && x.kind == y.kind
                && x.start_s == y.start_s
                && x.end_s == y.end_s
                && x.text == y.text
                && x.parent_turn_id == y.parent_turn_id
        })
}

/// Checks structural invariants of a freshly segmented transcript.
///
/// Returns one message per violation; an empty list means the transcript is
/// sound. `stream` must be the exact stream the transcript was segmented
/// from.
pub fn check_invariants(stream: &TokenStream, transcript: &Transcript) -> Vec<String> {
    let mut problems = Vec::new();
    let config = &transcript.config;

    let total: usize = transcript.turns.iter().map(|t| t.tokens.len()).sum();
    if total != stream.len() {
        problems.push(format!(
            "token count mismatch: {} in turns, {} in stream",
            total,
            stream.len()
        ));
    }

    let mut stream_keys: Vec<(String, String, u64, u64)> = stream
        .tokens()
        .iter()
        .map(|t| {
            (
                t.speaker.clone(),
                t.text.clone(),
                t.start_s.to_bits(),
                t.end_s.to_bits(),
            )
        })
        .collect();
    let mut turn_keys: Vec<(String, String, u64, u64)> = transcript
        .turns
        .iter()
        .flat_map(|turn| turn.tokens.iter())
        .map(|t| {
            (
                t.speaker.clone(),
                t.text.clone(),
                t.start_s.to_bits(),
                t.end_s.to_bits(),
            )
        })
        .collect();
    stream_keys.sort();
    turn_keys.sort();
    if stream_keys != turn_keys {
        problems.push("turn tokens are not a permutation of the stream".to_string());
    }

    for (i, turn) in transcript.turns.iter().enumerate() {
        let id = turn.turn_id;
        if id != i as u32 + 1 {
            problems.push(format!("turn at position {i} has id {id}"));
        }
        if turn.tokens.is_empty() {
            problems.push(format!("turn {id} has no tokens"));
            continue;
        }
        if turn.start_s != turn.tokens[0].start_s {
            problems.push(format!("turn {id} start differs from first token"));
        }
        if turn.end_s != turn.tokens.last().unwrap().end_s {
            problems.push(format!("turn {id} end differs from last token"));
        }
        if turn.n_words != turn.tokens.len() {
            problems.push(format!("turn {id} word count differs from token count"));
        }
        let text = turn
            .tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        if turn.text != text {
            problems.push(format!("turn {id} text differs from joined tokens"));
        }
        if turn.tokens.iter().any(|t| t.speaker != turn.speaker) {
            problems.push(format!("turn {id} mixes speakers"));
        }
        if transcript.model == TurnModel::NaturalTurn {
            for pair in turn.tokens.windows(2) {
                if pair[1].start_s - pair[0].end_s >= config.max_pause_s {
                    problems.push(format!("turn {id} contains a pause of max_pause_s or more"));
                    break;
                }
            }
        }
        match turn.kind {
            TurnKind::Primary => {
                if turn.parent_turn_id.is_some() {
                    problems.push(format!("primary turn {id} has a parent"));
                }
            }
            TurnKind::Secondary | TurnKind::Backchannel => {
                match turn.parent_turn_id {
                    None => problems.push(format!("subordinate turn {id} has no parent")),
                    Some(parent_id) => {
                        match transcript.turns.iter().find(|t| t.turn_id == parent_id) {
                            None => problems.push(format!(
                                "turn {id} references missing parent {parent_id}"
                            )),
                            Some(parent) => {
                                if parent.kind != TurnKind::Primary {
                                    problems.push(format!(
                                        "turn {id} parent {parent_id} is not primary"
                                    ));
                                }
                                if parent.speaker == turn.speaker {
                                    problems.push(format!(
                                        "turn {id} parent {parent_id} has the same speaker"
                                    ));
                                }
                                if parent_id >= id {
                                    problems.push(format!(
                                        "turn {id} parent {parent_id} does not precede it"
                                    ));
                                }
                                if transcript.model == TurnModel::NaturalTurn
                                    && !(parent.start_s <= turn.start_s
                                        && turn.end_s <= parent.end_s)
                                {
                                    problems.push(format!(
                                        "turn {id} is not contained in parent {parent_id}"
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    for pair in transcript.turns.windows(2) {
        let earlier = pair[0].start_s < pair[1].start_s
            || (pair[0].start_s == pair[1].start_s && pair[0].speaker <= pair[1].speaker);
        if !earlier {
            problems.push(format!(
                "turns {} and {} are out of order",
                pair[0].turn_id, pair[1].turn_id
            ));
        }
    }

    problems
}
