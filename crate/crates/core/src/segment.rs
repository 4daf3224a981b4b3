//! Turn segmentation: utterance grouping and the three turn models.

use std::fmt;
use std::str::FromStr;

use crate::backchannel::is_backchannel;
use crate::config::TurnModelConfig;
use crate::error::{Error, Result};
use crate::token::{format_seconds, TokenStream, WordToken};

/// Which segmentation model produced a transcript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TurnModel {
    /// Maximal same-speaker token runs.
    Baseline,
    /// Baseline runs with backchannels demoted and adjacent turns merged.
    Intermediate,
    /// Pause-based utterance groups with containment handling.
    NaturalTurn,
}

impl fmt::Display for TurnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            TurnModel::Baseline => "baseline",
            TurnModel::Intermediate => "intermediate",
            TurnModel::NaturalTurn => "naturalturn",
        };
        f.write_str(label)
    }
}

impl FromStr for TurnModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(TurnModel::Baseline),
            "intermediate" => Ok(TurnModel::Intermediate),
            "naturalturn" => Ok(TurnModel::NaturalTurn),
            other => Err(Error::invalid(format!(
                "unknown model {other:?}, expected baseline, intermediate, or naturalturn"
            ))),
        }
    }
}

/// Role of a turn within its conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TurnKind {
    /// Holds the floor.
    Primary,
    /// Speech fully inside another speaker's turn that is not a backchannel.
    Secondary,
    /// Short listener feedback inside another speaker's turn.
    Backchannel,
}

impl fmt::Display for TurnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            TurnKind::Primary => "primary",
            TurnKind::Secondary => "secondary",
            TurnKind::Backchannel => "backchannel",
        };
        f.write_str(label)
    }
}

impl FromStr for TurnKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary" => Ok(TurnKind::Primary),
            "secondary" => Ok(TurnKind::Secondary),
            "backchannel" => Ok(TurnKind::Backchannel),
            other => Err(Error::invalid(format!("unknown turn kind {other:?}"))),
        }
    }
}

/// A maximal run of one speaker's tokens with no internal silence of
/// `max_pause_s` or longer.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceGroup {
    pub speaker: String,
    pub tokens: Vec<WordToken>,
    /// First token onset.
    pub start_s: f64,
    /// Last token offset.
    pub end_s: f64,
}

/// One conversational turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Turn {
    /// 1-based position in the transcript's chronological order.
    pub turn_id: u32,
    pub speaker: String,
    pub kind: TurnKind,
    /// Tokens making up the turn; empty on transcripts parsed from disk.
    pub tokens: Vec<WordToken>,
    /// First token onset.
    pub start_s: f64,
    /// Last token offset.
    pub end_s: f64,
    /// Word count; equals `tokens.len()` for freshly segmented turns.
    pub n_words: usize,
    /// Token texts joined by single spaces.
    pub text: String,
    /// Enclosing primary turn for secondary and backchannel turns.
    pub parent_turn_id: Option<u32>,
}

impl Turn {
    /// Turn length in seconds.
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// A segmented conversation together with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub conversation_id: String,
    pub model: TurnModel,
    /// Turns sorted by `(start_s, speaker)` with sequential ids from 1.
    pub turns: Vec<Turn>,
    pub config: TurnModelConfig,
}

/// Splits one speaker's tokens into utterance groups.
///
/// A group closes when the silence from the previous token's offset to the
/// next token's onset reaches `max_pause_s`.
pub fn group_utterances(
    stream: &TokenStream,
    speaker: &str,
    max_pause_s: f64,
) -> Vec<UtteranceGroup> {
    let mut groups: Vec<UtteranceGroup> = Vec::new();
    let mut current: Vec<WordToken> = Vec::new();
    for token in stream.tokens() {
        if token.speaker != speaker {
            continue;
        }
        if let Some(prev) = current.last() {
            if token.start_s - prev.end_s >= max_pause_s {
                groups.push(close_group(speaker, std::mem::take(&mut current)));
            }
        }
        current.push(token.clone());
    }
    if !current.is_empty() {
        groups.push(close_group(speaker, current));
    }
    groups
}

fn close_group(speaker: &str, tokens: Vec<WordToken>) -> UtteranceGroup {
    UtteranceGroup {
        speaker: speaker.to_string(),
        start_s: tokens.first().map(|t| t.start_s).unwrap_or(0.0),
        end_s: tokens.last().map(|t| t.end_s).unwrap_or(0.0),
        tokens,
    }
}

fn make_turn(
    turn_id: u32,
    speaker: String,
    kind: TurnKind,
    tokens: Vec<WordToken>,
    parent_turn_id: Option<u32>,
) -> Turn {
    let start_s = tokens.first().map(|t| t.start_s).unwrap_or(0.0);
    let end_s = tokens.last().map(|t| t.end_s).unwrap_or(0.0);
    let text = tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Turn {
        turn_id,
        speaker,
        kind,
        n_words: tokens.len(),
        start_s,
        end_s,
        text,
        tokens,
        parent_turn_id,
    }
}

fn token_words(tokens: &[WordToken]) -> Vec<&str> {
    tokens.iter().map(|t| t.text.as_str()).collect()
}

/// Runs the model named by `model` on a stream.
pub fn segment(
    stream: &TokenStream,
    model: TurnModel,
    config: &TurnModelConfig,
) -> Result<Transcript> {
    match model {
        TurnModel::Baseline => segment_baseline(stream, config),
        TurnModel::Intermediate => segment_intermediate(stream, config),
        TurnModel::NaturalTurn => segment_naturalturn(stream, config),
    }
}

/// Segments a stream into maximal same-speaker token runs.
///
/// Every run becomes a primary turn; a run ends exactly where a token of
/// the other speaker intervenes in chronological order.
pub fn segment_baseline(stream: &TokenStream, config: &TurnModelConfig) -> Result<Transcript> {
    config.validate()?;
    let runs = speaker_runs(stream);
    let turns = runs
        .into_iter()
        .enumerate()
        .map(|(i, (speaker, tokens))| {
            make_turn(i as u32 + 1, speaker, TurnKind::Primary, tokens, None)
        })
        .collect();
    Ok(Transcript {
        conversation_id: stream.conversation_id().to_string(),
        model: TurnModel::Baseline,
        turns,
        config: config.clone(),
    })
}

fn speaker_runs(stream: &TokenStream) -> Vec<(String, Vec<WordToken>)> {
    let mut runs: Vec<(String, Vec<WordToken>)> = Vec::new();
    for token in stream.tokens() {
        match runs.last_mut() {
            Some((speaker, tokens)) if *speaker == token.speaker => tokens.push(token.clone()),
            _ => runs.push((token.speaker.clone(), vec![token.clone()])),
        }
    }
    runs
}

/// Segments a stream with the pause-and-containment model.
///
/// Per-speaker utterance groups are processed in chronological order. A
/// group that falls entirely within the current primary turn of the other
/// speaker becomes a backchannel or secondary turn attached to it; any
/// other group opens a new primary turn.
pub fn segment_naturalturn(stream: &TokenStream, config: &TurnModelConfig) -> Result<Transcript> {
    config.validate()?;
    let mut groups: Vec<UtteranceGroup> = stream
        .speakers()
        .iter()
        .flat_map(|speaker| group_utterances(stream, speaker, config.max_pause_s))
        .collect();
    groups.sort_by(|a, b| {
        a.start_s
            .total_cmp(&b.start_s)
            .then_with(|| a.speaker.cmp(&b.speaker))
            .then_with(|| a.end_s.total_cmp(&b.end_s))
    });

    let mut turns: Vec<Turn> = Vec::with_capacity(groups.len());
    let mut current_primary: Option<usize> = None;
    for group in groups {
        let contained = match current_primary {
            Some(pi) => {
                let primary = &turns[pi];
                group.speaker != primary.speaker && group.end_s <= primary.end_s
            }
            None => false,
        };
        let turn_id = turns.len() as u32 + 1;
        if contained {
            let pi = current_primary.expect("containment implies a current primary");
            let kind = if is_backchannel(&token_words(&group.tokens), &config.cue_list, config)? {
                TurnKind::Backchannel
            } else {
                TurnKind::Secondary
            };
            let parent_id = turns[pi].turn_id;
            turns.push(make_turn(
                turn_id,
                group.speaker,
                kind,
                group.tokens,
                Some(parent_id),
            ));
        } else {
            current_primary = Some(turns.len());
            turns.push(make_turn(
                turn_id,
                group.speaker,
                TurnKind::Primary,
                group.tokens,
                None,
            ));
        }
    }

    Ok(Transcript {
        conversation_id: stream.conversation_id().to_string(),
        model: TurnModel::NaturalTurn,
        turns,
        config: config.clone(),
    })
}

/// Segments a stream with the demote-and-merge model.
///
/// Baseline runs are computed first; runs that pass the backchannel test
/// are demoted, then consecutive primary runs of the same speaker separated
/// by less than `max_pause_s` are merged. Demoted runs attach to the
/// enclosing primary of the other speaker, falling back to the nearest
/// preceding one; a demoted run with no candidate parent stays primary.
pub fn segment_intermediate(stream: &TokenStream, config: &TurnModelConfig) -> Result<Transcript> {
    config.validate()?;
    let runs = speaker_runs(stream);

    struct Piece {
        speaker: String,
        tokens: Vec<WordToken>,
        start_s: f64,
        demoted: bool,
    }
    let mut pieces: Vec<Piece> = Vec::with_capacity(runs.len());
    for (speaker, tokens) in runs {
        let demoted = is_backchannel(&token_words(&tokens), &config.cue_list, config)?;
        pieces.push(Piece {
            speaker,
            start_s: tokens.first().map(|t| t.start_s).unwrap_or(0.0),
            tokens,
            demoted,
        });
    }

    // A demotion only stands if some other-speaker primary can adopt the
    // turn: one that encloses it, or failing that one starting no later.
    // Merging never removes such a candidate, so this check is stable.
    for i in 0..pieces.len() {
        if !pieces[i].demoted {
            continue;
        }
        let has_parent = pieces.iter().any(|p| {
            !p.demoted && p.speaker != pieces[i].speaker && p.start_s <= pieces[i].start_s
        });
        if !has_parent {
            pieces[i].demoted = false;
        }
    }

    let mut primaries: Vec<(String, Vec<WordToken>)> = Vec::new();
    let mut demoted: Vec<(String, Vec<WordToken>)> = Vec::new();
    for piece in pieces {
        if piece.demoted {
            demoted.push((piece.speaker, piece.tokens));
            continue;
        }
        match primaries.last_mut() {
            Some((speaker, tokens)) if *speaker == piece.speaker => {
                let gap = piece.start_s - tokens.last().map(|t| t.end_s).unwrap_or(0.0);
                if gap < config.max_pause_s {
                    tokens.extend(piece.tokens);
                } else {
                    primaries.push((piece.speaker, piece.tokens));
                }
            }
            _ => primaries.push((piece.speaker, piece.tokens)),
        }
    }

    enum Entry {
        Primary(usize),
        Demoted(usize),
    }
    let mut entries: Vec<(f64, String, f64, Entry)> = Vec::new();
    for (i, (speaker, tokens)) in primaries.iter().enumerate() {
        let start = tokens.first().map(|t| t.start_s).unwrap_or(0.0);
        let end = tokens.last().map(|t| t.end_s).unwrap_or(0.0);
        entries.push((start, speaker.clone(), end, Entry::Primary(i)));
    }
    for (i, (speaker, tokens)) in demoted.iter().enumerate() {
        let start = tokens.first().map(|t| t.start_s).unwrap_or(0.0);
        let end = tokens.last().map(|t| t.end_s).unwrap_or(0.0);
        entries.push((start, speaker.clone(), end, Entry::Demoted(i)));
    }
    entries.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.2.total_cmp(&b.2))
    });

    let mut primary_ids = vec![0u32; primaries.len()];
    for (pos, entry) in entries.iter().enumerate() {
        if let Entry::Primary(i) = entry.3 {
            primary_ids[i] = pos as u32 + 1;
        }
    }

    let find_parent = |start: f64, end: f64, speaker: &str| -> u32 {
        let enclosing = primaries
            .iter()
            .enumerate()
            .filter(|(_, (s, tokens))| {
                let p_start = tokens.first().map(|t| t.start_s).unwrap_or(0.0);
                let p_end = tokens.last().map(|t| t.end_s).unwrap_or(0.0);
                s != speaker && p_start <= start && end <= p_end
            })
            .map(|(i, _)| i)
            .next_back();
        let candidate = enclosing.or_else(|| {
            primaries
                .iter()
                .enumerate()
                .filter(|(_, (s, tokens))| {
                    let p_start = tokens.first().map(|t| t.start_s).unwrap_or(0.0);
                    s != speaker && p_start <= start
                })
                .map(|(i, _)| i)
                .next_back()
        });
        let i = candidate.expect("demotion was reverted when no parent existed");
        primary_ids[i]
    };

    let mut turns: Vec<Turn> = Vec::with_capacity(entries.len());
    for (pos, (start, speaker, end, entry)) in entries.into_iter().enumerate() {
        let turn_id = pos as u32 + 1;
        let turn = match entry {
            Entry::Primary(i) => make_turn(
                turn_id,
                speaker,
                TurnKind::Primary,
                primaries[i].1.clone(),
                None,
            ),
            Entry::Demoted(i) => {
                let parent = find_parent(start, end, &speaker);
                make_turn(
                    turn_id,
                    speaker,
                    TurnKind::Backchannel,
                    demoted[i].1.clone(),
                    Some(parent),
                )
            }
        };
        turns.push(turn);
    }

    Ok(Transcript {
        conversation_id: stream.conversation_id().to_string(),
        model: TurnModel::Intermediate,
        turns,
        config: config.clone(),
    })
}

/// Header row of the transcript CSV format.
pub const TRANSCRIPT_HEADER: &str =
    "conversation_id,turn_id,speaker,kind,start_s,end_s,duration_s,n_words,parent_turn_id,text";

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

/// Writes a transcript as CSV with one row per turn.
///
/// Times carry three decimal places and the text column is always quoted,
/// so equal transcripts serialize to identical bytes.
pub fn write_transcript_csv(transcript: &Transcript) -> String {
    let mut out = String::with_capacity(64 + transcript.turns.len() * 64);
    out.push_str(TRANSCRIPT_HEADER);
    out.push('\n');
    for turn in &transcript.turns {
        out.push_str(&csv_field(&transcript.conversation_id));
        out.push(',');
        out.push_str(&turn.turn_id.to_string());
        out.push(',');
        out.push_str(&csv_field(&turn.speaker));
        out.push(',');
        out.push_str(&turn.kind.to_string());
        out.push(',');
        out.push_str(&format_seconds(turn.start_s));
        out.push(',');
        out.push_str(&format_seconds(turn.end_s));
        out.push(',');
        out.push_str(&format_seconds(turn.duration_s()));
        out.push(',');
        out.push_str(&turn.n_words.to_string());
        out.push(',');
        if let Some(parent) = turn.parent_turn_id {
            out.push_str(&parent.to_string());
        }
        out.push(',');
        out.push('"');
        out.push_str(&turn.text.replace('"', "\"\""));
        out.push('"');
        out.push('\n');
    }
    out
}

/// Parses a transcript CSV produced by `write_transcript_csv`.
///
/// The model label and config are not stored in the CSV, so the caller
/// supplies them. Turn tokens come back empty; `n_words` carries the word
/// count.
pub fn read_transcript_csv(
    input: &str,
    model: TurnModel,
    config: &TurnModelConfig,
) -> Result<Transcript> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::invalid(format!("bad transcript header: {e}")))?;
        let expected: Vec<&str> = TRANSCRIPT_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::invalid(format!(
                "bad transcript header: expected {TRANSCRIPT_HEADER:?}"
            )));
        }
    }

    let mut conversation_id: Option<String> = None;
    let mut turns = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::invalid(format!("bad transcript row: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(turns.len() + 2);
        if record.len() != 10 {
            return Err(Error::malformed(
                line,
                format!("expected 10 columns, got {}", record.len()),
            ));
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_f64 = |i: usize, label: &str| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .map_err(|_| Error::malformed(line, format!("bad {label} {:?}", field(i))))
        };
        match &conversation_id {
            None => conversation_id = Some(field(0).to_string()),
            Some(expected) if expected != field(0) => {
                return Err(Error::malformed(
                    line,
                    format!("conversation_id {:?} differs from {expected:?}", field(0)),
                ));
            }
            Some(_) => {}
        }
        let turn_id: u32 = field(1)
            .parse()
            .map_err(|_| Error::malformed(line, format!("bad turn_id {:?}", field(1))))?;
        let parent_turn_id = if field(8).is_empty() {
            None
        } else {
            Some(
                field(8)
                    .parse::<u32>()
                    .map_err(|_| Error::malformed(line, format!("bad parent_turn_id {:?}", field(8))))?,
            )
        };
        let n_words: usize = field(7)
            .parse()
            .map_err(|_| Error::malformed(line, format!("bad n_words {:?}", field(7))))?;
        turns.push(Turn {
            turn_id,
            speaker: field(2).to_string(),
            kind: field(3).parse()?,
            tokens: Vec::new(),
            start_s: parse_f64(4, "start_s")?,
            end_s: parse_f64(5, "end_s")?,
            n_words,
            text: field(9).to_string(),
            parent_turn_id,
        });
    }

    let conversation_id =
        conversation_id.ok_or_else(|| Error::invalid("transcript has no rows"))?;
    for (i, turn) in turns.iter().enumerate() {
        if turn.turn_id != i as u32 + 1 {
            return Err(Error::invalid(format!(
                "turn ids are not sequential at position {}",
                i + 1
            )));
        }
        if let Some(parent) = turn.parent_turn_id {
            if parent == 0 || parent >= turn.turn_id {
                return Err(Error::invalid(format!(
                    "turn {} references parent {} that does not precede it",
                    turn.turn_id, parent
                )));
            }
        }
    }
    Ok(Transcript {
        conversation_id,
        model,
        turns,
        config: config.clone(),
    })
}
