//! Segmentation model configuration and its key=value file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::backchannel::CueList;
use crate::error::{Error, Result};

/// How the confidence threshold is applied during token filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceMode {
    /// Ignore confidences entirely.
    #[default]
    Off,
    /// Keep every token but mark those below the threshold.
    Flag,
    /// Drop tokens below the threshold.
    Remove,
}

impl fmt::Display for ConfidenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            ConfidenceMode::Off => "off",
            ConfidenceMode::Flag => "flag",
            ConfidenceMode::Remove => "remove",
        };
        f.write_str(label)
    }
}

impl FromStr for ConfidenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(ConfidenceMode::Off),
            "flag" => Ok(ConfidenceMode::Flag),
            "remove" => Ok(ConfidenceMode::Remove),
            other => Err(Error::invalid(format!(
                "unknown confidence_mode {other:?}, expected off, flag, or remove"
            ))),
        }
    }
}

/// Tunable parameters shared by the segmentation models and downstream
/// filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnModelConfig {
    /// Silence, in seconds, that closes an utterance group.
    pub max_pause_s: f64,
    /// Maximum word count for a backchannel.
    pub backchannel_max_words: usize,
    /// Cue fraction that a backchannel must strictly exceed.
    pub backchannel_fraction: f64,
    /// Cue words and prohibited start words.
    pub cue_list: CueList,
    /// Confidence threshold used by `flag` and `remove` modes.
    pub min_confidence: f64,
    /// What to do with tokens below `min_confidence`.
    pub confidence_mode: ConfidenceMode,
    /// Primary turns longer than this many seconds are marked for exclusion.
    pub max_turn_duration_s: f64,
    /// Lower bound of the plausible inter-turn interval, in seconds.
    pub interval_min_s: f64,
    /// Upper bound of the plausible inter-turn interval, in seconds.
    pub interval_max_s: f64,
    /// Whether the first primary turn of a conversation is marked for
    /// exclusion.
    pub drop_first_turn: bool,
}

impl Default for TurnModelConfig {
    fn default() -> Self {
        TurnModelConfig {
            max_pause_s: 1.5,
            backchannel_max_words: 3,
            backchannel_fraction: 0.5,
            cue_list: CueList::default_lists(),
            min_confidence: 0.0,
            confidence_mode: ConfidenceMode::Off,
            max_turn_duration_s: 120.0,
            interval_min_s: -5.0,
            interval_max_s: 5.0,
            drop_first_turn: true,
        }
    }
}

impl TurnModelConfig {
    /// Checks parameter ranges, returning the first violation.
    pub fn validate(&self) -> Result<()> {
        if !self.max_pause_s.is_finite() || self.max_pause_s <= 0.0 {
            return Err(Error::invalid("max_pause_s must be positive"));
        }
        if self.backchannel_max_words == 0 {
            return Err(Error::invalid("backchannel_max_words must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.backchannel_fraction) {
            return Err(Error::invalid("backchannel_fraction must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::invalid("min_confidence must be in [0, 1]"));
        }
        if !self.max_turn_duration_s.is_finite() || self.max_turn_duration_s <= 0.0 {
            return Err(Error::invalid("max_turn_duration_s must be positive"));
        }
        if !self.interval_min_s.is_finite() || !self.interval_max_s.is_finite() {
            return Err(Error::invalid("interval bounds must be finite"));
        }
        if self.interval_min_s >= self.interval_max_s {
            return Err(Error::invalid(
                "interval_min_s must be less than interval_max_s",
            ));
        }
        Ok(())
    }

    /// Parses a key=value config file.
    ///
    /// Unknown keys are rejected so that typos fail loudly. Blank lines and
    /// `#` comments are skipped. Word-list keys take comma-separated values.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut config = TurnModelConfig::default();
        let mut cues: Option<Vec<String>> = None;
        let mut prohibited: Option<Vec<String>> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let line_no = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::malformed(line_no, format!("expected key=value, got {line:?}")))?;
            let key = key.trim();
            let value = value.trim();
            let parse_num = |what: &str| -> Result<f64> {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::malformed(line_no, format!("{what} must be a number, got {value:?}")))
            };
            match key {
                "max_pause_s" => config.max_pause_s = parse_num(key)?,
                "backchannel_max_words" => {
                    config.backchannel_max_words = value.parse::<usize>().map_err(|_| {
                        Error::malformed(line_no, format!("{key} must be an integer, got {value:?}"))
                    })?;
                }
                "backchannel_fraction" => config.backchannel_fraction = parse_num(key)?,
                "cue_list" => {
                    cues = Some(value.split(',').map(|w| w.trim().to_string()).collect());
                }
                "prohibited_start_list" => {
                    prohibited = Some(value.split(',').map(|w| w.trim().to_string()).collect());
                }
                "min_confidence" => config.min_confidence = parse_num(key)?,
                "confidence_mode" => config.confidence_mode = value.parse()?,
                "max_turn_duration_s" => config.max_turn_duration_s = parse_num(key)?,
                "interval_min_s" => config.interval_min_s = parse_num(key)?,
                "interval_max_s" => config.interval_max_s = parse_num(key)?,
                "drop_first_turn" => {
                    config.drop_first_turn = match value {
                        "true" => true,
                        "false" => false,
                        _ => {
                            return Err(Error::malformed(
                                line_no,
                                format!("{key} must be true or false, got {value:?}"),
                            ));
                        }
                    };
                }
                _ => return Err(Error::malformed(line_no, format!("unknown config key {key:?}"))),
            }
        }

        if cues.is_some() || prohibited.is_some() {
            let defaults = CueList::default_lists();
            let cue_words: Vec<String> = match cues {
                Some(words) => words,
                None => defaults.cues().map(String::from).collect(),
            };
            let prohibited_words: Vec<String> = match prohibited {
                Some(words) => words,
                None => defaults.prohibited_starts().map(String::from).collect(),
            };
            config.cue_list = CueList::new(cue_words, prohibited_words);
        }

        config.validate()?;
        Ok(config)
    }

    /// Reads and parses a config file from disk.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        TurnModelConfig::from_key_values(&text)
    }

    /// Serializes the effective settings back to key=value lines.
    ///
    /// The output parses back to an equal config and is embedded in run
    /// manifests.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("max_pause_s={}\n", self.max_pause_s));
        out.push_str(&format!(
            "backchannel_max_words={}\n",
            self.backchannel_max_words
        ));
        out.push_str(&format!(
            "backchannel_fraction={}\n",
            self.backchannel_fraction
        ));
        out.push_str(&format!("cue_list={}\n", self.cue_list.cues_joined()));
        out.push_str(&format!(
            "prohibited_start_list={}\n",
            self.cue_list.prohibited_joined()
        ));
        out.push_str(&format!("min_confidence={}\n", self.min_confidence));
        out.push_str(&format!("confidence_mode={}\n", self.confidence_mode));
        out.push_str(&format!(
            "max_turn_duration_s={}\n",
            self.max_turn_duration_s
        ));
        out.push_str(&format!("interval_min_s={}\n", self.interval_min_s));
        out.push_str(&format!("interval_max_s={}\n", self.interval_max_s));
        out.push_str(&format!("drop_first_turn={}\n", self.drop_first_turn));
        out
    }
}
