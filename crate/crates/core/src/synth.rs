//! Deterministic conversation synthesis with exact planted turn structure.
//!
//! The generator plans every turn on an integer millisecond grid so that
//! the segmenter's recovery of the planted structure is exact rather than
//! approximate: intra-turn token gaps stay strictly below the pause
//! threshold, same-speaker turns are separated by strictly more than it,
//! and injected listener speech is either contained in the active turn or
//! deliberately straddles its end.

use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::analysis::{write_surveys_csv, SurveyRecord};
use crate::config::TurnModelConfig;
use crate::error::{Error, Result};
use crate::segment::{Transcript, Turn, TurnKind, TurnModel};
use crate::token::{write_canonical_tokens, TokenStream, WordToken};

/// Parameters of the synthetic conversation generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub seed: u64,
    pub n_conversations: usize,
    /// Inclusive bounds on the number of planted floor-holding turns.
    pub turns_min: usize,
    pub turns_max: usize,
    /// Mean of the log-normal turn duration distribution, in seconds.
    pub turn_duration_mean_s: f64,
    /// Standard deviation of the turn duration distribution, in seconds.
    pub turn_duration_sd_s: f64,
    /// Mean of the normal inter-turn silence distribution, in seconds.
    pub gap_mean_s: f64,
    pub gap_sd_s: f64,
    /// Truncation bounds for sampled silences, in seconds.
    pub gap_min_s: f64,
    pub gap_max_s: f64,
    /// Probability of planting a backchannel inside a floor-holding turn.
    pub backchannel_rate: f64,
    /// Probability of planting longer contained listener speech.
    pub parallel_rate: f64,
    /// Probability that a turn exchange overlaps the previous turn's end.
    pub straddle_rate: f64,
    /// Token synthesis rate for turn content.
    pub words_per_second: f64,
    /// Planted correlation between true mean turn duration and enjoyment.
    pub enjoyment_effect: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 42,
            n_conversations: 10,
            turns_min: 8,
            turns_max: 16,
            turn_duration_mean_s: 3.0,
            turn_duration_sd_s: 1.5,
            gap_mean_s: 2.5,
            gap_sd_s: 1.0,
            gap_min_s: 0.0,
            gap_max_s: 10.0,
            backchannel_rate: 0.3,
            parallel_rate: 0.2,
            straddle_rate: 0.1,
            words_per_second: 2.5,
            enjoyment_effect: 0.5,
        }
    }
}

impl SynthParams {
    /// Checks ranges and distribution feasibility.
    pub fn validate(&self) -> Result<()> {
        if self.turns_min == 0 || self.turns_min > self.turns_max {
            return Err(Error::invalid(
                "turns_min must be at least 1 and no greater than turns_max",
            ));
        }
        if !self.turn_duration_mean_s.is_finite() || self.turn_duration_mean_s <= 0.0 {
            return Err(Error::invalid("turn_duration_mean_s must be positive"));
        }
        if !self.turn_duration_sd_s.is_finite() || self.turn_duration_sd_s < 0.0 {
            return Err(Error::invalid("turn_duration_sd_s must be nonnegative"));
        }
        if !self.gap_mean_s.is_finite() || !self.gap_sd_s.is_finite() || self.gap_sd_s < 0.0 {
            return Err(Error::invalid("gap distribution must have nonnegative sd"));
        }
        if !self.gap_min_s.is_finite()
            || !self.gap_max_s.is_finite()
            || self.gap_min_s > self.gap_max_s
        {
            return Err(Error::invalid("gap truncation bounds out of order"));
        }
        for (name, rate) in [
            ("backchannel_rate", self.backchannel_rate),
            ("parallel_rate", self.parallel_rate),
            ("straddle_rate", self.straddle_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::invalid(format!("{name} must be in [0, 1]")));
            }
        }
        if !self.words_per_second.is_finite() || self.words_per_second <= 0.0 {
            return Err(Error::invalid("words_per_second must be positive"));
        }
        if !self.enjoyment_effect.is_finite() || self.enjoyment_effect.abs() > 1.0 {
            return Err(Error::invalid("enjoyment_effect must be in [-1, 1]"));
        }
        Ok(())
    }
}

/// Word pool for synthesized turn content; disjoint from the default cues.
const LEXICON: [&str; 40] = [
    "the", "quick", "garden", "river", "story", "about", "maybe", "think", "going", "really",
    "little", "house", "around", "because", "people", "always", "never", "thing", "today",
    "tomorrow", "morning", "coffee", "window", "music", "travel", "summer", "winter", "reading",
    "walking", "talking", "number", "question", "answer", "moment", "minute", "second", "friend",
    "family", "weather", "market",
];

/// Stream separation between tokens of one turn; must stay below the pause
/// threshold.
const TOKEN_GAP_CAP_MS: i64 = 50;

/// Margin keeping contained listener speech strictly inside its host turn.
const CONTAINMENT_MARGIN_MS: i64 = 10;

/// Lower clamp on planted turn durations.
const MIN_TURN_MS: i64 = 200;

/// Upper clamp on planted turn durations.
const MAX_TURN_MS: i64 = 120_000;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the independent sub-seed for one conversation.
pub fn conversation_seed(seed: u64, conversation_index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(conversation_index as u64 + 1))
}

fn survey_seed(seed: u64) -> u64 {
    splitmix64(seed ^ splitmix64(u64::MAX))
}

fn speaker_label(index: usize) -> &'static str {
    if index == 0 {
        "A"
    } else {
        "B"
    }
}

struct PlannedTurn {
    speaker: usize,
    start_ms: i64,
    end_ms: i64,
    kind: TurnKind,
    /// Index into the planned floor-holding turns, for contained speech.
    parent: Option<usize>,
    /// Preselected words; floor-holding turns sample theirs while tiling.
    words: Vec<String>,
}

struct GeneratorSetup {
    /// Silence that always splits same-speaker groups, in milliseconds.
    split_ms: i64,
    /// Largest token gap that never splits a group, in milliseconds.
    token_gap_ms: i64,
    gap_lo_ms: i64,
    gap_hi_ms: i64,
    backchannel_words: Vec<String>,
    parallel_words: Vec<String>,
}

fn prepare(params: &SynthParams, config: &TurnModelConfig) -> Result<GeneratorSetup> {
    params.validate()?;
    config.validate()?;

    let split_ms = (config.max_pause_s * 1000.0).ceil() as i64 + 2;
    let token_gap_ms = TOKEN_GAP_CAP_MS
        .min((config.max_pause_s * 1000.0).floor() as i64 - 1)
        .max(0);

    let gap_hi_ms = (params.gap_max_s * 1000.0).round() as i64;
    let gap_lo_ms = ((params.gap_min_s * 1000.0).round() as i64).max(split_ms);
    if gap_hi_ms < gap_lo_ms {
        return Err(Error::invalid(
            "infeasible params: gap truncation cannot reach max_pause_s",
        ));
    }

    let cue_list = &config.cue_list;
    let backchannel_words: Vec<String> = cue_list
        .cues()
        .filter(|w| !cue_list.is_prohibited_start(w))
        .map(String::from)
        .collect();
    if params.backchannel_rate > 0.0 {
        if backchannel_words.is_empty() {
            return Err(Error::invalid(
                "infeasible params: cue list has no usable backchannel words",
            ));
        }
        if config.backchannel_fraction >= 1.0 {
            return Err(Error::invalid(
                "infeasible params: backchannel_fraction admits no backchannels",
            ));
        }
    }

    let parallel_words: Vec<String> = LEXICON
        .iter()
        .filter(|w| !cue_list.is_cue(w))
        .map(|w| w.to_string())
        .collect();
    if params.parallel_rate > 0.0 && parallel_words.is_empty() {
        return Err(Error::invalid(
            "infeasible params: lexicon contains only cue words",
        ));
    }

    Ok(GeneratorSetup {
        split_ms,
        token_gap_ms,
        gap_lo_ms,
        gap_hi_ms,
        backchannel_words,
        parallel_words,
    })
}

fn duration_distribution(params: &SynthParams) -> Result<LogNormal<f64>> {
    let cv = params.turn_duration_sd_s / params.turn_duration_mean_s;
    LogNormal::from_mean_cv(params.turn_duration_mean_s, cv)
        .map_err(|e| Error::invalid(format!("bad turn duration distribution: {e}")))
}

fn sample_duration_ms(dist: &LogNormal<f64>, rng: &mut ChaCha8Rng) -> i64 {
    let sampled = (dist.sample(rng) * 1000.0).round() as i64;
    sampled.clamp(MIN_TURN_MS, MAX_TURN_MS)
}

fn sample_gap_ms(dist: &Normal<f64>, setup: &GeneratorSetup, rng: &mut ChaCha8Rng) -> i64 {
    let sampled = (dist.sample(rng) * 1000.0).round() as i64;
    sampled.clamp(setup.gap_lo_ms, setup.gap_hi_ms)
}

fn sample_word(pool: &[String], rng: &mut ChaCha8Rng) -> String {
    pool[rng.random_range(0..pool.len())].clone()
}

fn sample_confidence(config: &TurnModelConfig, rng: &mut ChaCha8Rng) -> f64 {
    let lo = config.min_confidence.max(0.9);
    let raw = lo + (1.0 - lo) * rng.random::<f64>();
    (raw * 10_000.0).round() / 10_000.0
}

/// Splits a span into `n_words` token spans with bounded internal gaps.
///
/// The first token starts exactly at `start_ms` and the last ends exactly
/// at `end_ms`.
fn tile_tokens(start_ms: i64, end_ms: i64, n_words: usize, gap_cap_ms: i64) -> Vec<(i64, i64)> {
    let total = end_ms - start_ms;
    let n = (n_words as i64).clamp(1, total.max(1));
    let gap = if n > 1 {
        ((total - n) / (n - 1)).min(gap_cap_ms).max(0)
    } else {
        0
    };
    let width = (total - (n - 1) * gap) / n;
    let mut remainder = total - (n - 1) * gap - n * width;
    let mut spans = Vec::with_capacity(n as usize);
    let mut t = start_ms;
    for _ in 0..n {
        let mut w = width;
        if remainder > 0 {
            w += 1;
            remainder -= 1;
        }
        spans.push((t, t + w));
        t += w + gap;
    }
    spans
}

fn ms(value: i64) -> f64 {
    value as f64 / 1000.0
}

/// Generates one conversation's token stream and its exact turn structure.
///
/// The returned transcript is what `segment_naturalturn` produces on the
/// returned stream under the same configuration, by construction.
pub fn generate_conversation(
    params: &SynthParams,
    config: &TurnModelConfig,
    conversation_index: usize,
) -> Result<(TokenStream, Transcript)> {
    let setup = prepare(params, config)?;
    let conversation_id = format!("conv{conversation_index:04}");
    let mut rng = ChaCha8Rng::seed_from_u64(conversation_seed(params.seed, conversation_index));

    let duration_dist = duration_distribution(params)?;
    let gap_dist = Normal::new(params.gap_mean_s, params.gap_sd_s)
        .map_err(|e| Error::invalid(format!("bad gap distribution: {e}")))?;

    let n_turns = rng.random_range(params.turns_min..=params.turns_max);
    let mut floor_turns: Vec<(usize, i64, i64)> = Vec::with_capacity(n_turns);
    for k in 0..n_turns {
        let duration = sample_duration_ms(&duration_dist, &mut rng);
        if k == 0 {
            floor_turns.push((0, 0, duration));
            continue;
        }
        let (_, prev_start, prev_end) = floor_turns[k - 1];
        let mut start = None;
        if rng.random_bool(params.straddle_rate) {
            let prev_duration = prev_end - prev_start;
            let mut overlap_max = prev_duration.min(duration) / 4;
            overlap_max = overlap_max.min(prev_duration - 2);
            if k >= 2 {
                let own_prev_end = floor_turns[k - 2].2;
                overlap_max = overlap_max.min(prev_end - own_prev_end - setup.split_ms - 1);
            }
            if overlap_max >= 1 {
                let overlap = rng.random_range(1..=overlap_max);
                start = Some(prev_end - overlap);
            }
        }
        let start = start.unwrap_or_else(|| prev_end + sample_gap_ms(&gap_dist, &setup, &mut rng));
        floor_turns.push((k % 2, start, start + duration));
    }

    let mut planned: Vec<PlannedTurn> = Vec::new();
    let mut last_activity = [i64::MIN / 4; 2];
    for (k, &(speaker, start_ms, end_ms)) in floor_turns.iter().enumerate() {
        planned.push(PlannedTurn {
            speaker,
            start_ms,
            end_ms,
            kind: TurnKind::Primary,
            parent: None,
            words: Vec::new(),
        });

        let listener = 1 - speaker;
        let next_start = floor_turns
            .get(k + 1)
            .map(|&(_, s, _)| s)
            .unwrap_or(i64::MAX / 4);
        let mut window_lo = (start_ms + CONTAINMENT_MARGIN_MS)
            .max(last_activity[listener] + setup.split_ms);
        let window_hi = (end_ms - CONTAINMENT_MARGIN_MS).min(next_start - setup.split_ms);

        let want_backchannel =
            params.backchannel_rate > 0.0 && rng.random_bool(params.backchannel_rate);
        let want_parallel = params.parallel_rate > 0.0 && rng.random_bool(params.parallel_rate);
        for backchannel in [true, false] {
            if backchannel && !want_backchannel || !backchannel && !want_parallel {
                continue;
            }
            let words: Vec<String> = if backchannel {
                let count = rng.random_range(1..=config.backchannel_max_words.clamp(1, 3));
                (0..count)
                    .map(|_| sample_word(&setup.backchannel_words, &mut rng))
                    .collect()
            } else {
                let count = config.backchannel_max_words + rng.random_range(1..=3);
                (0..count)
                    .map(|_| sample_word(&setup.parallel_words, &mut rng))
                    .collect()
            };
            let base = if backchannel {
                rng.random_range(150..=600)
            } else {
                rng.random_range(300..=1200)
            };
            let duration = base.max(2 * words.len() as i64);
            if window_lo + duration > window_hi {
                continue;
            }
            let inj_start = rng.random_range(window_lo..=window_hi - duration);
            let inj_end = inj_start + duration;
            planned.push(PlannedTurn {
                speaker: listener,
                start_ms: inj_start,
                end_ms: inj_end,
                kind: if backchannel {
                    TurnKind::Backchannel
                } else {
                    TurnKind::Secondary
                },
                parent: Some(k),
                words,
            });
            last_activity[listener] = inj_end;
            window_lo = inj_end + setup.split_ms;
        }

        last_activity[speaker] = end_ms;
    }

    planned.sort_by(|a, b| {
        a.start_ms
            .cmp(&b.start_ms)
            .then_with(|| speaker_label(a.speaker).cmp(speaker_label(b.speaker)))
    });

    let mut tokens: Vec<WordToken> = Vec::new();
    let mut turns: Vec<Turn> = Vec::new();
    let mut floor_turn_ids: Vec<u32> = vec![0; floor_turns.len()];
    let mut floor_seen = 0usize;
    for (idx, plan) in planned.iter().enumerate() {
        let turn_id = idx as u32 + 1;
        let word_budget = if plan.words.is_empty() {
            let seconds = ms(plan.end_ms - plan.start_ms);
            ((seconds * params.words_per_second).round() as usize).max(1)
        } else {
            plan.words.len()
        };
        let spans = tile_tokens(plan.start_ms, plan.end_ms, word_budget, setup.token_gap_ms);
        let words: Vec<String> = if plan.words.is_empty() {
            (0..spans.len())
                .map(|_| LEXICON[rng.random_range(0..LEXICON.len())].to_string())
                .collect()
        } else {
            plan.words.clone()
        };

        let mut turn_tokens = Vec::with_capacity(spans.len());
        for ((token_start, token_end), word) in spans.iter().zip(words.iter()) {
            turn_tokens.push(WordToken {
                speaker: speaker_label(plan.speaker).to_string(),
                text: word.clone(),
                start_s: ms(*token_start),
                end_s: ms(*token_end),
                confidence: sample_confidence(config, &mut rng),
                low_confidence: false,
            });
        }
        tokens.extend(turn_tokens.iter().cloned());

        if plan.kind == TurnKind::Primary {
            floor_turn_ids[floor_seen] = turn_id;
            floor_seen += 1;
        }
        let parent_turn_id = plan.parent.map(|p| floor_turn_ids[p]);
        turns.push(Turn {
            turn_id,
            speaker: speaker_label(plan.speaker).to_string(),
            kind: plan.kind,
            n_words: turn_tokens.len(),
            text: words.join(" "),
            start_s: ms(plan.start_ms),
            end_s: ms(plan.end_ms),
            tokens: turn_tokens,
            parent_turn_id,
        });
    }

    let stream = TokenStream::new(conversation_id.clone(), tokens)?;
    let transcript = Transcript {
        conversation_id,
        model: TurnModel::NaturalTurn,
        turns,
        config: config.clone(),
    };
    Ok((stream, transcript))
}

/// Per-conversation record in the corpus manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub conversation_id: String,
    pub seed: u64,
    pub tokens_file: String,
    pub truth_file: String,
    pub n_tokens: usize,
    pub n_turns: usize,
}

/// Reproducibility record written alongside a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub params: SynthParams,
    pub config: String,
    pub conversations: Vec<ManifestEntry>,
    pub surveys_file: String,
    pub n_survey_rows: usize,
}

/// Generates a full corpus on disk: token files, truth transcripts, a
/// survey file with a planted duration effect, and a manifest.
pub fn generate_corpus(
    params: &SynthParams,
    config: &TurnModelConfig,
    out_dir: &Path,
) -> Result<CorpusManifest> {
    prepare(params, config)?;
    let tokens_dir = out_dir.join("tokens");
    let truth_dir = out_dir.join("truth");
    fs::create_dir_all(&tokens_dir)?;
    fs::create_dir_all(&truth_dir)?;

    let mut entries = Vec::with_capacity(params.n_conversations);
    let mut speaker_durations: Vec<(String, String, f64)> = Vec::new();
    for index in 0..params.n_conversations {
        let (stream, truth) = generate_conversation(params, config, index)?;
        let tokens_file = format!("tokens/{}.tsv", stream.conversation_id());
        let truth_file = format!("truth/{}.csv", stream.conversation_id());
        fs::write(
            out_dir.join(&tokens_file),
            write_canonical_tokens(&stream),
        )?;
        fs::write(
            out_dir.join(&truth_file),
            crate::segment::write_transcript_csv(&truth),
        )?;

        for speaker in ["A", "B"] {
            let durations: Vec<f64> = truth
                .turns
                .iter()
                .filter(|t| t.kind == TurnKind::Primary && t.speaker == speaker)
                .map(Turn::duration_s)
                .collect();
            let mean = if durations.is_empty() {
                0.0
            } else {
                durations.iter().sum::<f64>() / durations.len() as f64
            };
            speaker_durations.push((
                truth.conversation_id.clone(),
                speaker.to_string(),
                mean,
            ));
        }

        entries.push(ManifestEntry {
            conversation_id: stream.conversation_id().to_string(),
            seed: conversation_seed(params.seed, index),
            tokens_file,
            truth_file,
            n_tokens: stream.len(),
            n_turns: truth.turns.len(),
        });
    }

    let surveys = planted_surveys(params, &speaker_durations);
    fs::write(out_dir.join("surveys.csv"), write_surveys_csv(&surveys))?;

    let manifest = CorpusManifest {
        params: params.clone(),
        config: config.to_key_values(),
        conversations: entries,
        surveys_file: "surveys.csv".to_string(),
        n_survey_rows: surveys.len(),
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::invalid(format!("manifest serialization failed: {e}")))?;
    manifest_json.push('\n');
    fs::write(out_dir.join("manifest.json"), manifest_json)?;
    Ok(manifest)
}

/// Builds survey rows whose enjoyment depends linearly on each speaker's
/// standardized true mean turn duration, plus Gaussian noise.
pub fn planted_surveys(
    params: &SynthParams,
    speaker_durations: &[(String, String, f64)],
) -> Vec<SurveyRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(survey_seed(params.seed));
    let n = speaker_durations.len();
    let values: Vec<f64> = speaker_durations.iter().map(|(_, _, d)| *d).collect();
    let mean = if n == 0 {
        0.0
    } else {
        values.iter().sum::<f64>() / n as f64
    };
    let sd = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };

    let effect = params.enjoyment_effect;
    let mut records = Vec::with_capacity(n);
    for (conversation_id, speaker, duration) in speaker_durations {
        let z = if sd > 0.0 { (duration - mean) / sd } else { 0.0 };
        let mut outcomes = std::collections::BTreeMap::new();
        for (name, scale) in [
            ("enjoyment", 1.0),
            ("affect_overall", 0.8),
            ("shared_reality", 0.6),
        ] {
            let noise: f64 = rng.sample(StandardNormal);
            let planted = effect * scale;
            let spread = (1.0 - planted * planted).max(0.0).sqrt();
            let value = 4.0 + planted * z + spread * noise;
            outcomes.insert(name.to_string(), value);
        }
        records.push(SurveyRecord {
            conversation_id: conversation_id.clone(),
            speaker: speaker.clone(),
            outcomes,
        });
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{pearson, read_surveys_csv};
    use crate::segment::{read_transcript_csv, segment, segment_naturalturn};
    use std::path::PathBuf;

    fn scratch_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "turnforge-synth-{}-{}",
            std::process::id(),
            tag
        ));
        if dir.exists() {
            std::fs::remove_dir_all(&dir).unwrap();
        }
        dir
    }

    #[test]
    fn test_recovery_on_default_params() {
        let params = SynthParams::default();
        let config = TurnModelConfig::default();
        for index in 0..6 {
            let (stream, truth) = generate_conversation(&params, &config, index).unwrap();
            let segmented = segment_naturalturn(&stream, &config).unwrap();
            assert_eq!(segmented, truth, "conversation {index} diverged");
        }
    }

    #[test]
    fn test_recovery_across_rates() {
        let config = TurnModelConfig::default();
        for backchannel_rate in [0.0, 0.5, 1.0] {
            for straddle_rate in [0.0, 0.4] {
                let params = SynthParams {
                    backchannel_rate,
                    parallel_rate: 0.5,
                    straddle_rate,
                    ..SynthParams::default()
                };
                let (stream, truth) = generate_conversation(&params, &config, 3).unwrap();
                let segmented = segment_naturalturn(&stream, &config).unwrap();
                assert_eq!(segmented, truth);
            }
        }
    }

    #[test]
    fn test_quiet_params_match_baseline_spans() {
        let params = SynthParams {
            backchannel_rate: 0.0,
            parallel_rate: 0.0,
            straddle_rate: 0.0,
            ..SynthParams::default()
        };
        let config = TurnModelConfig::default();
        let (stream, truth) = generate_conversation(&params, &config, 1).unwrap();
        assert!(truth.turns.iter().all(|t| t.kind == TurnKind::Primary));
        let baseline = segment(&stream, TurnModel::Baseline, &config).unwrap();
        assert_eq!(baseline.turns.len(), truth.turns.len());
        for (b, t) in baseline.turns.iter().zip(truth.turns.iter()) {
            assert_eq!(b.speaker, t.speaker);
            assert_eq!(b.start_s, t.start_s);
            assert_eq!(b.end_s, t.end_s);
        }
    }

    #[test]
    fn test_full_straddle_rate_overlaps_every_exchange() {
        let params = SynthParams {
            straddle_rate: 1.0,
            backchannel_rate: 0.0,
            parallel_rate: 0.0,
            turn_duration_mean_s: 6.0,
            turn_duration_sd_s: 0.5,
            turns_min: 6,
            turns_max: 10,
            ..SynthParams::default()
        };
        let config = TurnModelConfig::default();
        for index in 0..4 {
            let (_, truth) = generate_conversation(&params, &config, index).unwrap();
            assert!(truth.turns.len() >= 6);
            for pair in truth.turns.windows(2) {
                let interval = pair[1].start_s - pair[0].end_s;
                assert!(interval < 0.0, "exchange not overlapped: {interval}");
            }
        }
    }

    #[test]
    fn test_corpus_determinism() {
        let params = SynthParams {
            n_conversations: 3,
            turns_min: 3,
            turns_max: 5,
            ..SynthParams::default()
        };
        let config = TurnModelConfig::default();
        let dir_a = scratch_dir("det-a");
        let dir_b = scratch_dir("det-b");
        generate_corpus(&params, &config, &dir_a).unwrap();
        generate_corpus(&params, &config, &dir_b).unwrap();
        for relative in [
            "tokens/conv0000.tsv",
            "tokens/conv0002.tsv",
            "truth/conv0001.csv",
            "surveys.csv",
            "manifest.json",
        ] {
            let a = std::fs::read(dir_a.join(relative)).unwrap();
            let b = std::fs::read(dir_b.join(relative)).unwrap();
            assert_eq!(a, b, "{relative} differs between runs");
        }
        std::fs::remove_dir_all(&dir_a).unwrap();
        std::fs::remove_dir_all(&dir_b).unwrap();
    }

    #[test]
    fn test_corpus_counting_contract() {
        let params = SynthParams {
            seed: 7,
            n_conversations: 50,
            turns_min: 2,
            turns_max: 4,
            ..SynthParams::default()
        };
        let config = TurnModelConfig::default();
        let dir = scratch_dir("count");
        let manifest = generate_corpus(&params, &config, &dir).unwrap();
        assert_eq!(manifest.conversations.len(), 50);
        assert_eq!(manifest.n_survey_rows, 100);
        let token_files = std::fs::read_dir(dir.join("tokens")).unwrap().count();
        let truth_files = std::fs::read_dir(dir.join("truth")).unwrap().count();
        assert_eq!(token_files, 50);
        assert_eq!(truth_files, 50);
        let surveys =
            read_surveys_csv(&std::fs::read_to_string(dir.join("surveys.csv")).unwrap()).unwrap();
        assert_eq!(surveys.len(), 100);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_corpus_files_round_trip_to_recovery() {
        let params = SynthParams {
            n_conversations: 2,
            turns_min: 4,
            turns_max: 6,
            ..SynthParams::default()
        };
        let config = TurnModelConfig::default();
        let dir = scratch_dir("roundtrip");
        let manifest = generate_corpus(&params, &config, &dir).unwrap();
        for entry in &manifest.conversations {
            let token_text = std::fs::read_to_string(dir.join(&entry.tokens_file)).unwrap();
            let stream = crate::token::parse_canonical_tokens(&token_text).unwrap();
            let segmented = segment_naturalturn(&stream, &config).unwrap();
            let truth_text = std::fs::read_to_string(dir.join(&entry.truth_file)).unwrap();
            let truth = read_transcript_csv(&truth_text, TurnModel::NaturalTurn, &config).unwrap();
            assert!(crate::oracle::transcripts_agree(&segmented, &truth));
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_planted_effect_visible_in_surveys() {
        let params = SynthParams {
            n_conversations: 40,
            enjoyment_effect: 0.7,
            ..SynthParams::default()
        };
        let config = TurnModelConfig::default();
        let dir = scratch_dir("effect");
        generate_corpus(&params, &config, &dir).unwrap();
        let surveys =
            read_surveys_csv(&std::fs::read_to_string(dir.join("surveys.csv")).unwrap()).unwrap();
        let manifest_text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
        let manifest: CorpusManifest = serde_json::from_str(&manifest_text).unwrap();

        let mut durations = Vec::new();
        let mut enjoyment = Vec::new();
        for entry in &manifest.conversations {
            let truth_text = std::fs::read_to_string(dir.join(&entry.truth_file)).unwrap();
            let truth = read_transcript_csv(&truth_text, TurnModel::NaturalTurn, &config).unwrap();
            for speaker in ["A", "B"] {
                let turn_durations: Vec<f64> = truth
                    .turns
                    .iter()
                    .filter(|t| t.kind == TurnKind::Primary && t.speaker == speaker)
                    .map(Turn::duration_s)
                    .collect();
                if turn_durations.is_empty() {
                    continue;
                }
                let mean = turn_durations.iter().sum::<f64>() / turn_durations.len() as f64;
                let survey = surveys
                    .iter()
                    .find(|s| s.conversation_id == entry.conversation_id && s.speaker == speaker)
                    .unwrap();
                durations.push(mean);
                enjoyment.push(survey.outcomes["enjoyment"]);
            }
        }
        let result = pearson(&durations, &enjoyment).unwrap();
        assert!(result.r > 0.4, "planted effect washed out: r={}", result.r);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_infeasible_params_rejected() {
        let config = TurnModelConfig::default();
        let narrow_gap = SynthParams {
            gap_max_s: 1.0,
            ..SynthParams::default()
        };
        let err = generate_conversation(&narrow_gap, &config, 0).unwrap_err();
        assert!(err.to_string().contains("infeasible"));

        let mut strict_fraction = config.clone();
        strict_fraction.backchannel_fraction = 1.0;
        let err = generate_conversation(&SynthParams::default(), &strict_fraction, 0).unwrap_err();
        assert!(err.to_string().contains("infeasible"));

        let bad_rate = SynthParams {
            backchannel_rate: 1.5,
            ..SynthParams::default()
        };
        assert!(bad_rate.validate().is_err());
        let bad_turns = SynthParams {
            turns_min: 0,
            ..SynthParams::default()
        };
        assert!(bad_turns.validate().is_err());
    }

    #[test]
    fn test_conversation_seed_varies() {
        let a = conversation_seed(42, 0);
        let b = conversation_seed(42, 1);
        let c = conversation_seed(43, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
