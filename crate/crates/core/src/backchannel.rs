//! Backchannel cue lists and the short-utterance classifier.

use std::collections::BTreeSet;
use std::path::Path;

use crate::config::TurnModelConfig;
use crate::error::{Error, Result};

/// Cue inventory compiled into the binary and used when no file is supplied.
pub const DEFAULT_CUE_FILE: &str = include_str!("../data/default_cues.txt");

/// Lowercases a word and trims leading/trailing punctuation.
///
/// Interior characters are kept, so contractions like "i'm" survive intact.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Case-normalized cue words plus words that disqualify an utterance start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CueList {
    cues: BTreeSet<String>,
    prohibited_starts: BTreeSet<String>,
}

impl CueList {
    /// Builds a list from raw entries, normalizing each one.
    pub fn new<I, J, S, T>(cues: I, prohibited_starts: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        CueList {
            cues: cues
                .into_iter()
                .map(|w| normalize_word(w.as_ref()))
                .filter(|w| !w.is_empty())
                .collect(),
            prohibited_starts: prohibited_starts
                .into_iter()
                .map(|w| normalize_word(w.as_ref()))
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// Parses the two-section cue file format.
    ///
    /// Lines starting with `#` and blank lines are skipped. A `[cues]` or
    /// `[prohibited]` header selects the active section; every other line
    /// contributes one word per whitespace-separated field.
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Cues,
            Prohibited,
        }

        let mut section = Section::None;
        let mut cues: Vec<String> = Vec::new();
        let mut prohibited: Vec<String> = Vec::new();
        let mut saw_cues_header = false;
        let mut saw_prohibited_header = false;

        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[cues]" => {
                    section = Section::Cues;
                    saw_cues_header = true;
                }
                "[prohibited]" => {
                    section = Section::Prohibited;
                    saw_prohibited_header = true;
                }
                _ if line.starts_with('[') => {
                    return Err(Error::malformed(idx + 1, format!("unknown section {line}")));
                }
                _ => {
                    let target = match section {
                        Section::None => {
                            return Err(Error::malformed(idx + 1, "entry before section header"));
                        }
                        Section::Cues => &mut cues,
                        Section::Prohibited => &mut prohibited,
                    };
                    target.extend(line.split_whitespace().map(String::from));
                }
            }
        }

        if !saw_cues_header || !saw_prohibited_header {
            return Err(Error::invalid(
                "cue file must contain [cues] and [prohibited] sections",
            ));
        }
        let list = CueList::new(cues, prohibited);
        if list.cues.is_empty() {
            return Err(Error::invalid("empty cues section"));
        }
        Ok(list)
    }

    /// Reads and parses a cue file from disk.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        CueList::parse(&text)
    }

    /// Returns the compiled-in default lists.
    pub fn default_lists() -> Self {
        CueList::parse(DEFAULT_CUE_FILE).expect("embedded cue file is well formed")
    }

    /// True when the normalized form of `word` is a cue.
    pub fn is_cue(&self, word: &str) -> bool {
        self.cues.contains(&normalize_word(word))
    }

    /// True when the normalized form of `word` may not open a backchannel.
    pub fn is_prohibited_start(&self, word: &str) -> bool {
        self.prohibited_starts.contains(&normalize_word(word))
    }

    /// Cue words in sorted order.
    pub fn cues(&self) -> impl Iterator<Item = &str> {
        self.cues.iter().map(String::as_str)
    }

    /// Prohibited start words in sorted order.
    pub fn prohibited_starts(&self) -> impl Iterator<Item = &str> {
        self.prohibited_starts.iter().map(String::as_str)
    }

    /// Comma-joined cue words, used for config snapshots.
    pub fn cues_joined(&self) -> String {
        self.cues.iter().cloned().collect::<Vec<_>>().join(",")
    }

    /// Comma-joined prohibited start words, used for config snapshots.
    pub fn prohibited_joined(&self) -> String {
        self.prohibited_starts
            .iter()
            .cloned()
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl Default for CueList {
    fn default() -> Self {
        CueList::default_lists()
    }
}

/// Reads and parses a cue file from disk.
pub fn load_cue_list(path: &Path) -> Result<CueList> {
    CueList::load(path)
}

/// Decides whether a word sequence is a backchannel.
///
/// All three conditions must hold: the utterance has at most
/// `backchannel_max_words` words, its first word is not a prohibited start,
/// and the fraction of cue words is strictly greater than
/// `backchannel_fraction`. An empty sequence is rejected as invalid input.
pub fn is_backchannel<S: AsRef<str>>(
    words: &[S],
    cue_list: &CueList,
    config: &TurnModelConfig,
) -> Result<bool> {
    if words.is_empty() {
        return Err(Error::invalid("empty turn"));
    }
    if words.len() > config.backchannel_max_words {
        return Ok(false);
    }
    if cue_list.is_prohibited_start(words[0].as_ref()) {
        return Ok(false);
    }
    let cue_count = words
        .iter()
        .filter(|w| cue_list.is_cue(w.as_ref()))
        .count();
    let fraction = cue_count as f64 / words.len() as f64;
    Ok(fraction > config.backchannel_fraction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> TurnModelConfig {
        TurnModelConfig::default()
    }

    #[test]
    fn test_normalize_strips_edge_punctuation() {
        assert_eq!(normalize_word("Yeah!"), "yeah");
        assert_eq!(normalize_word("(okay)"), "okay");
        assert_eq!(normalize_word("I'm"), "i'm");
        assert_eq!(normalize_word("..."), "");
    }

    #[test]
    fn test_default_lists_parse() {
        let list = CueList::default_lists();
        assert!(list.is_cue("yeah"));
        assert!(list.is_cue("mhm"));
        assert!(list.is_prohibited_start("i'm"));
        assert!(!list.is_cue("banana"));
    }

    #[test]
    fn test_parse_rejects_missing_section() {
        let err = CueList::parse("[cues]\nyeah\n").unwrap_err();
        assert!(err.to_string().contains("[prohibited]"));
    }

    #[test]
    fn test_parse_rejects_empty_cues() {
        let err = CueList::parse("[cues]\n[prohibited]\nso\n").unwrap_err();
        assert!(err.to_string().contains("empty cues"));
    }

    #[test]
    fn test_parse_rejects_entry_before_header() {
        let err = CueList::parse("yeah\n[cues]\nyeah\n[prohibited]\n").unwrap_err();
        assert!(err.to_string().contains("before section header"));
    }

    #[test]
    fn test_single_cue_word_is_backchannel() {
        let cfg = config();
        assert!(is_backchannel(&["yeah"], &cfg.cue_list, &cfg).unwrap());
        assert!(is_backchannel(&["Yeah!"], &cfg.cue_list, &cfg).unwrap());
    }

    #[test]
    fn test_word_count_limit() {
        let cfg = config();
        let words = ["yeah", "yeah", "yeah", "yeah"];
        assert!(!is_backchannel(&words, &cfg.cue_list, &cfg).unwrap());
        assert!(is_backchannel(&words[..3], &cfg.cue_list, &cfg).unwrap());
    }

    #[test]
    fn test_prohibited_start_blocks() {
        let cfg = config();
        assert!(!is_backchannel(&["so", "yeah"], &cfg.cue_list, &cfg).unwrap());
        assert!(!is_backchannel(&["I'm", "okay"], &cfg.cue_list, &cfg).unwrap());
    }

    #[test]
    fn test_fraction_must_exceed_threshold() {
        let cfg = config();
        // One cue out of two words is exactly the 0.5 threshold.
        assert!(!is_backchannel(&["yeah", "thanks"], &cfg.cue_list, &cfg).unwrap());
        assert!(is_backchannel(&["yeah", "right"], &cfg.cue_list, &cfg).unwrap());
    }

    #[test]
    fn test_empty_sequence_is_error() {
        let cfg = config();
        let words: [&str; 0] = [];
        let err = is_backchannel(&words, &cfg.cue_list, &cfg).unwrap_err();
        assert!(err.to_string().contains("empty turn"));
    }
}
