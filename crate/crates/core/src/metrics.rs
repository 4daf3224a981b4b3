//! Per-turn features, exclusion marking, and corpus-level statistics.

use std::collections::BTreeSet;
use std::fmt;

use crate::config::TurnModelConfig;
use crate::error::{Error, Result};
use crate::segment::{Transcript, TurnKind};
use crate::token::format_seconds;

/// Why a turn is left out of summary statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExclusionReason {
    /// First primary turn of its conversation.
    FirstTurn,
    /// Duration above the configured cap.
    DurationCap,
    /// Interval to the previous primary turn outside the plausible window.
    IntervalRange,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            ExclusionReason::FirstTurn => "first_turn",
            ExclusionReason::DurationCap => "duration_cap",
            ExclusionReason::IntervalRange => "interval_range",
        };
        f.write_str(label)
    }
}

/// Derived measurements for one turn.
///
/// Turns are never deleted by filtering; exclusions accumulate in
/// `excluded` so every statistic can state exactly which rows it used.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnFeatures {
    pub conversation_id: String,
    pub turn_id: u32,
    pub speaker: String,
    pub kind: TurnKind,
    pub duration_s: f64,
    pub n_words: usize,
    /// Start of this primary turn minus the end of the previous primary
    /// turn, regardless of speaker. `None` for the first primary turn and
    /// for non-primary turns.
    pub interval_to_prev_s: Option<f64>,
    /// True when the interval is negative.
    pub is_overlap: bool,
    /// True when the previous primary turn has the same speaker.
    pub same_speaker_prev: bool,
    pub excluded: BTreeSet<ExclusionReason>,
}

/// Computes features for every turn of a transcript.
///
/// Intervals are measured between consecutive primary turns in transcript
/// order; no exclusion marks are set here.
pub fn compute_features(transcript: &Transcript) -> Vec<TurnFeatures> {
    let mut features = Vec::with_capacity(transcript.turns.len());
    let mut prev_primary: Option<(f64, String)> = None;
    for turn in &transcript.turns {
        let mut interval = None;
        let mut same_speaker = false;
        if turn.kind == TurnKind::Primary {
            if let Some((prev_end, prev_speaker)) = &prev_primary {
                interval = Some(turn.start_s - prev_end);
                same_speaker = *prev_speaker == turn.speaker;
            }
            prev_primary = Some((turn.end_s, turn.speaker.clone()));
        }
        features.push(TurnFeatures {
            conversation_id: transcript.conversation_id.clone(),
            turn_id: turn.turn_id,
            speaker: turn.speaker.clone(),
            kind: turn.kind,
            duration_s: turn.duration_s(),
            n_words: turn.n_words,
            interval_to_prev_s: interval,
            is_overlap: interval.is_some_and(|i| i < 0.0),
            same_speaker_prev: same_speaker,
            excluded: BTreeSet::new(),
        });
    }
    features
}

/// Marks turns excluded by the configured filters.
///
/// Rows may span several conversations; the first-turn rule applies per
/// conversation. Duration and interval checks are strict: a duration equal
/// to the cap and an interval equal to either bound both survive.
pub fn apply_filters(features: &mut [TurnFeatures], config: &TurnModelConfig) {
    let mut first_indices: Vec<usize> = Vec::new();
    let mut seen: Vec<&str> = Vec::new();
    for (i, row) in features.iter().enumerate() {
        if row.kind != TurnKind::Primary {
            continue;
        }
        if !seen.iter().any(|c| *c == row.conversation_id) {
            seen.push(&row.conversation_id);
            first_indices.push(i);
        }
    }

    for (i, row) in features.iter_mut().enumerate() {
        if row.kind != TurnKind::Primary {
            continue;
        }
        if config.drop_first_turn && first_indices.contains(&i) {
            row.excluded.insert(ExclusionReason::FirstTurn);
        }
        if row.duration_s > config.max_turn_duration_s {
            row.excluded.insert(ExclusionReason::DurationCap);
        }
        if let Some(interval) = row.interval_to_prev_s {
            if interval < config.interval_min_s || interval > config.interval_max_s {
                row.excluded.insert(ExclusionReason::IntervalRange);
            }
        }
    }
}

/// Corpus-level turn statistics for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub model: String,
    pub mean_turn_duration_s: f64,
    pub mean_words_per_turn: f64,
    pub mean_turns_per_speaker_per_conversation: f64,
    /// `None` when no eligible interval exists.
    pub mean_interval_ms: Option<f64>,
    /// Share of eligible intervals below zero; `None` when none exist.
    pub prop_negative_intervals: Option<f64>,
}

fn duration_eligible(row: &TurnFeatures) -> bool {
    row.kind == TurnKind::Primary
        && !row.excluded.contains(&ExclusionReason::FirstTurn)
        && !row.excluded.contains(&ExclusionReason::DurationCap)
}

fn interval_eligible(row: &TurnFeatures) -> bool {
    row.kind == TurnKind::Primary && row.excluded.is_empty() && row.interval_to_prev_s.is_some()
}

/// Mean with a second pass over the residuals for numerical stability.
pub(crate) fn stable_mean(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let rough = values.iter().sum::<f64>() / n;
    let correction = values.iter().map(|v| v - rough).sum::<f64>() / n;
    rough + correction
}

/// Summarizes filtered features into the five corpus statistics.
///
/// Duration and word means use primary turns without first-turn or
/// duration-cap marks; interval statistics additionally require an interval
/// and no marks at all. Zero eligible turns is an error.
pub fn summarize(features: &[TurnFeatures], model: &str) -> Result<SummaryStats> {
    let durations: Vec<f64> = features
        .iter()
        .filter(|r| duration_eligible(r))
        .map(|r| r.duration_s)
        .collect();
    if durations.is_empty() {
        return Err(Error::invalid("empty summary"));
    }
    let words: Vec<f64> = features
        .iter()
        .filter(|r| duration_eligible(r))
        .map(|r| r.n_words as f64)
        .collect();

    let mut pairs: Vec<(String, String)> = Vec::new();
    for row in features {
        let key = (row.conversation_id.clone(), row.speaker.clone());
        if !pairs.contains(&key) {
            pairs.push(key);
        }
    }
    let turns_per_pair: Vec<f64> = pairs
        .iter()
        .map(|(conv, speaker)| {
            features
                .iter()
                .filter(|r| {
                    duration_eligible(r) && r.conversation_id == *conv && r.speaker == *speaker
                })
                .count() as f64
        })
        .collect();

    let intervals: Vec<f64> = features
        .iter()
        .filter(|r| interval_eligible(r))
        .filter_map(|r| r.interval_to_prev_s)
        .collect();
    let (mean_interval_ms, prop_negative) = if intervals.is_empty() {
        (None, None)
    } else {
        let negatives = intervals.iter().filter(|i| **i < 0.0).count();
        (
            Some(stable_mean(&intervals) * 1000.0),
            Some(negatives as f64 / intervals.len() as f64),
        )
    };

    Ok(SummaryStats {
        model: model.to_string(),
        mean_turn_duration_s: stable_mean(&durations),
        mean_words_per_turn: stable_mean(&words),
        mean_turns_per_speaker_per_conversation: stable_mean(&turns_per_pair),
        mean_interval_ms,
        prop_negative_intervals: prop_negative,
    })
}

/// Per-speaker turn statistics within one conversation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerAggregate {
    pub conversation_id: String,
    pub speaker: String,
    /// Primary turns surviving the first-turn and duration-cap marks.
    pub n_turns: usize,
    pub mean_turn_duration_s: Option<f64>,
    pub mean_words_per_turn: Option<f64>,
    /// Share of this speaker's eligible intervals that are negative.
    pub prop_overlap: Option<f64>,
}

/// Aggregates filtered features per conversation and speaker.
///
/// Every `(conversation, speaker)` pair appearing in the features is
/// reported, including pairs whose eligible turn count is zero. Output is
/// sorted by conversation then speaker.
pub fn speaker_aggregates(features: &[TurnFeatures]) -> Vec<SpeakerAggregate> {
    let mut pairs: BTreeSet<(String, String)> = BTreeSet::new();
    for row in features {
        pairs.insert((row.conversation_id.clone(), row.speaker.clone()));
    }

    pairs
        .into_iter()
        .map(|(conv, speaker)| {
            let mine: Vec<&TurnFeatures> = features
                .iter()
                .filter(|r| r.conversation_id == conv && r.speaker == speaker)
                .collect();
            let durations: Vec<f64> = mine
                .iter()
                .filter(|r| duration_eligible(r))
                .map(|r| r.duration_s)
                .collect();
            let words: Vec<f64> = mine
                .iter()
                .filter(|r| duration_eligible(r))
                .map(|r| r.n_words as f64)
                .collect();
            let intervals: Vec<&&TurnFeatures> =
                mine.iter().filter(|r| interval_eligible(r)).collect();
            let overlaps = intervals.iter().filter(|r| r.is_overlap).count();
            SpeakerAggregate {
                conversation_id: conv,
                speaker,
                n_turns: durations.len(),
                mean_turn_duration_s: if durations.is_empty() {
                    None
                } else {
                    Some(stable_mean(&durations))
                },
                mean_words_per_turn: if words.is_empty() {
                    None
                } else {
                    Some(stable_mean(&words))
                },
                prop_overlap: if intervals.is_empty() {
                    None
                } else {
                    Some(overlaps as f64 / intervals.len() as f64)
                },
            }
        })
        .collect()
}

/// Fixed-width histogram with half-open bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// Bin boundaries; bin `i` covers `[bin_edges[i], bin_edges[i + 1])`,
    /// with membership computed as `floor((value - min) / width)`.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values outside `[min, max)`, including values exactly at `max`.
    pub overflow: u64,
}

/// Bins values into `[min + k·width, min + (k + 1)·width)` bins.
///
/// Values outside `[min, max)` land in the overflow tally. Width must be
/// positive and the range non-empty.
pub fn histogram(values: &[f64], bin_width: f64, min: f64, max: f64) -> Result<Histogram> {
    if !bin_width.is_finite() || bin_width <= 0.0 {
        return Err(Error::invalid("histogram bin width must be positive"));
    }
    if !min.is_finite() || !max.is_finite() || min >= max {
        return Err(Error::invalid("histogram range must satisfy min < max"));
    }
    let n_bins = ((max - min) / bin_width).ceil() as usize;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|k| min + k as f64 * bin_width).collect();
    let mut counts = vec![0u64; n_bins];
    let mut overflow = 0u64;
    for &value in values {
        if value >= min && value < max {
            let k = (((value - min) / bin_width).floor() as usize).min(n_bins - 1);
            counts[k] += 1;
        } else {
            overflow += 1;
        }
    }
    Ok(Histogram {
        bin_edges,
        counts,
        overflow,
    })
}

/// Durations of turns eligible for duration statistics.
pub fn eligible_durations(features: &[TurnFeatures]) -> Vec<f64> {
    features
        .iter()
        .filter(|r| duration_eligible(r))
        .map(|r| r.duration_s)
        .collect()
}

/// Intervals of turns eligible for interval statistics.
pub fn eligible_intervals(features: &[TurnFeatures]) -> Vec<f64> {
    features
        .iter()
        .filter(|r| interval_eligible(r))
        .filter_map(|r| r.interval_to_prev_s)
        .collect()
}

/// Header row of the features CSV format.
pub const FEATURES_HEADER: &str =
    "conversation_id,turn_id,speaker,kind,duration_s,n_words,interval_to_prev_s,is_overlap,excluded,same_speaker_prev";

fn csv_field(value: &str) -> String {
    if value.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn format_stat(value: f64) -> String {
    format!("{value:.6}")
}

fn format_opt(value: Option<f64>) -> String {
    value.map(format_stat).unwrap_or_default()
}

/// Writes per-turn features as CSV, one row per turn.
pub fn write_features_csv(features: &[TurnFeatures]) -> String {
    let mut out = String::with_capacity(64 + features.len() * 48);
    out.push_str(FEATURES_HEADER);
    out.push('\n');
    for row in features {
        let excluded = row
            .excluded
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let interval = row
            .interval_to_prev_s
            .map(format_seconds)
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&row.conversation_id),
            row.turn_id,
            csv_field(&row.speaker),
            row.kind,
            format_seconds(row.duration_s),
            row.n_words,
            interval,
            row.is_overlap,
            excluded,
            row.same_speaker_prev,
        ));
    }
    out
}

/// Header row of the summary CSV format.
pub const SUMMARY_HEADER: &str = "model,mean_turn_duration_s,mean_words_per_turn,mean_turns_per_speaker_per_conversation,mean_interval_ms,prop_negative_intervals";

/// Writes summary rows as CSV, one row per model.
pub fn write_summary_csv(summaries: &[SummaryStats]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&s.model),
            format_stat(s.mean_turn_duration_s),
            format_stat(s.mean_words_per_turn),
            format_stat(s.mean_turns_per_speaker_per_conversation),
            format_opt(s.mean_interval_ms),
            format_opt(s.prop_negative_intervals),
        ));
    }
    out
}

/// Header row of the speaker aggregate CSV format.
pub const AGGREGATES_HEADER: &str =
    "conversation_id,speaker,n_turns,mean_turn_duration_s,mean_words_per_turn,prop_overlap";

/// Writes speaker aggregates as CSV.
pub fn write_aggregates_csv(aggregates: &[SpeakerAggregate]) -> String {
    let mut out = String::from(AGGREGATES_HEADER);
    out.push('\n');
    for a in aggregates {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            csv_field(&a.conversation_id),
            csv_field(&a.speaker),
            a.n_turns,
            format_opt(a.mean_turn_duration_s),
            format_opt(a.mean_words_per_turn),
            format_opt(a.prop_overlap),
        ));
    }
    out
}

/// Reads speaker aggregates written by `write_aggregates_csv`.
pub fn read_aggregates_csv(input: &str) -> Result<Vec<SpeakerAggregate>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::invalid(format!("bad aggregates header: {e}")))?;
        let expected: Vec<&str> = AGGREGATES_HEADER.split(',').collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::invalid(format!(
                "bad aggregates header: expected {AGGREGATES_HEADER:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::invalid(format!("bad aggregates row: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 2);
        if record.len() != 6 {
            return Err(Error::malformed(
                line,
                format!("expected 6 columns, got {}", record.len()),
            ));
        }
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_opt = |i: usize, label: &str| -> Result<Option<f64>> {
            if field(i).is_empty() {
                return Ok(None);
            }
            field(i)
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::malformed(line, format!("bad {label} {:?}", field(i))))
        };
        rows.push(SpeakerAggregate {
            conversation_id: field(0).to_string(),
            speaker: field(1).to_string(),
            n_turns: field(2)
                .parse()
                .map_err(|_| Error::malformed(line, format!("bad n_turns {:?}", field(2))))?,
            mean_turn_duration_s: parse_opt(3, "mean_turn_duration_s")?,
            mean_words_per_turn: parse_opt(4, "mean_words_per_turn")?,
            prop_overlap: parse_opt(5, "prop_overlap")?,
        });
    }
    Ok(rows)
}

/// Writes a histogram as CSV with a trailing overflow row.
pub fn write_histogram_csv(hist: &Histogram) -> String {
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, count) in hist.counts.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            format_seconds(hist.bin_edges[i]),
            format_seconds(hist.bin_edges[i + 1]),
            count
        ));
    }
    out.push_str(&format!("overflow,,{}\n", hist.overflow));
    out
}

/// Writes two summaries side by side, one row per statistic.
pub fn write_comparison_csv(a: &SummaryStats, b: &SummaryStats) -> String {
    let mut out = format!("statistic,{},{}\n", csv_field(&a.model), csv_field(&b.model));
    let rows: [(&str, String, String); 5] = [
        (
            "mean_turn_duration_s",
            format_stat(a.mean_turn_duration_s),
            format_stat(b.mean_turn_duration_s),
        ),
        (
            "mean_words_per_turn",
            format_stat(a.mean_words_per_turn),
            format_stat(b.mean_words_per_turn),
        ),
        (
            "mean_turns_per_speaker_per_conversation",
            format_stat(a.mean_turns_per_speaker_per_conversation),
            format_stat(b.mean_turns_per_speaker_per_conversation),
        ),
        (
            "mean_interval_ms",
            format_opt(a.mean_interval_ms),
            format_opt(b.mean_interval_ms),
        ),
        (
            "prop_negative_intervals",
            format_opt(a.prop_negative_intervals),
            format_opt(b.prop_negative_intervals),
        ),
    ];
    for (name, left, right) in rows {
        out.push_str(&format!("{name},{left},{right}\n"));
    }
    out
}
