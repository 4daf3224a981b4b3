//! Word tokens, the canonical token file format, the stereo STT adapter,
//! and confidence filtering.

use serde_json::Value;

use crate::config::{ConfidenceMode, TurnModelConfig};
use crate::error::{Error, Result};

/// Header row of the canonical tab-separated token format.
pub const CANONICAL_HEADER: &str = "conversation_id\tspeaker\ttext\tstart_s\tend_s\tconfidence";

/// One recognized word with its time span and recognizer confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct WordToken {
    /// Speaker label, opaque to the toolkit.
    pub speaker: String,
    /// The word itself, free of whitespace.
    pub text: String,
    /// Onset in seconds from conversation start.
    pub start_s: f64,
    /// Offset in seconds from conversation start.
    pub end_s: f64,
    /// Recognizer confidence in [0, 1].
    pub confidence: f64,
    /// Set by `flag` mode filtering for tokens below the threshold.
    pub low_confidence: bool,
}

impl WordToken {
    /// Convenience constructor with full confidence and no flag.
    pub fn new(speaker: &str, text: &str, start_s: f64, end_s: f64) -> Self {
        WordToken {
            speaker: speaker.to_string(),
            text: text.to_string(),
            start_s,
            end_s,
            confidence: 1.0,
            low_confidence: false,
        }
    }
}

/// All tokens of one conversation, sorted by start time.
///
/// Construction validates every token and sorts by `(start_s, speaker,
/// end_s)`, so consumers can rely on chronological order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStream {
    conversation_id: String,
    tokens: Vec<WordToken>,
}

impl TokenStream {
    /// Validates and sorts tokens into a stream.
    pub fn new(conversation_id: impl Into<String>, mut tokens: Vec<WordToken>) -> Result<Self> {
        let conversation_id = conversation_id.into();
        if conversation_id.is_empty() {
            return Err(Error::invalid("empty conversation_id"));
        }
        if conversation_id.contains(['\t', '\n', '\r']) {
            return Err(Error::invalid("conversation_id contains control characters"));
        }
        for token in &tokens {
            validate_token(token)?;
        }
        tokens.sort_by(|a, b| {
            a.start_s
                .total_cmp(&b.start_s)
                .then_with(|| a.speaker.cmp(&b.speaker))
                .then_with(|| a.end_s.total_cmp(&b.end_s))
        });
        let stream = TokenStream {
            conversation_id,
            tokens,
        };
        if stream.speakers().len() > 2 {
            return Err(Error::invalid("more than two speakers"));
        }
        Ok(stream)
    }

    /// Builds a stream from tokens already known to be valid and sorted.
    fn from_sorted_unchecked(conversation_id: String, tokens: Vec<WordToken>) -> Self {
        TokenStream {
            conversation_id,
            tokens,
        }
    }

    /// Conversation identifier shared by all tokens.
    pub fn conversation_id(&self) -> &str {
        &self.conversation_id
    }

    /// Tokens in chronological order.
    pub fn tokens(&self) -> &[WordToken] {
        &self.tokens
    }

    /// Number of tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// True when the stream holds no tokens.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Distinct speaker labels in sorted order.
    pub fn speakers(&self) -> Vec<String> {
        let mut speakers: Vec<String> = Vec::new();
        for token in &self.tokens {
            if !speakers.iter().any(|s| s == &token.speaker) {
                speakers.push(token.speaker.clone());
            }
        }
        speakers.sort();
        speakers
    }
}

fn validate_token(token: &WordToken) -> Result<()> {
    if token.speaker.is_empty() || token.speaker.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!(
            "bad speaker label {:?}",
            token.speaker
        )));
    }
    if token.text.is_empty() || token.text.chars().any(char::is_whitespace) {
        return Err(Error::invalid(format!("bad token text {:?}", token.text)));
    }
    if !token.start_s.is_finite() || !token.end_s.is_finite() {
        return Err(Error::invalid("non-finite token time"));
    }
    if token.start_s < 0.0 {
        return Err(Error::invalid("negative token start time"));
    }
    if token.end_s < token.start_s {
        return Err(Error::invalid("negative duration token"));
    }
    if !(0.0..=1.0).contains(&token.confidence) {
        return Err(Error::invalid(format!(
            "confidence {} outside [0, 1]",
            token.confidence
        )));
    }
    Ok(())
}

/// Rounds a time to whole milliseconds, halves away from zero.
pub fn round_ms(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

/// Formats a time with exactly three decimal places.
pub fn format_seconds(seconds: f64) -> String {
    format!("{:.3}", round_ms(seconds))
}

/// Parses the canonical tab-separated token format.
pub fn parse_canonical_tokens(input: &str) -> Result<TokenStream> {
    let mut lines = input.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, line)) if line.trim().is_empty() => continue,
            Some((idx, line)) => break (idx, line),
            None => return Err(Error::invalid("empty file")),
        }
    };
    if header.1.trim_end() != CANONICAL_HEADER {
        return Err(Error::malformed(
            header.0 + 1,
            format!("expected header {CANONICAL_HEADER:?}"),
        ));
    }

    let mut conversation_id: Option<String> = None;
    let mut tokens = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::malformed(
                line_no,
                format!("expected 6 tab-separated fields, got {}", fields.len()),
            ));
        }
        let parse_number = |label: &str, raw: &str| -> Result<f64> {
            let value: f64 = raw
                .parse()
                .map_err(|_| Error::malformed(line_no, format!("bad {label} {raw:?}")))?;
            if !value.is_finite() {
                return Err(Error::malformed(line_no, format!("bad {label} {raw:?}")));
            }
            Ok(value)
        };
        let start_s = parse_number("start_s", fields[3])?;
        let end_s = parse_number("end_s", fields[4])?;
        if end_s < start_s {
            return Err(Error::malformed(line_no, "negative duration token"));
        }
        match &conversation_id {
            None => conversation_id = Some(fields[0].to_string()),
            Some(expected) if expected != fields[0] => {
                return Err(Error::malformed(
                    line_no,
                    format!("conversation_id {:?} differs from {:?}", fields[0], expected),
                ));
            }
            Some(_) => {}
        }
        tokens.push(WordToken {
            speaker: fields[1].to_string(),
            text: fields[2].to_string(),
            start_s,
            end_s,
            confidence: parse_number("confidence", fields[5])?,
            low_confidence: false,
        });
    }

    match conversation_id {
        Some(id) => TokenStream::new(id, tokens),
        None => Err(Error::invalid("empty file")),
    }
}

/// Writes a stream in the canonical tab-separated format.
///
/// Times are rounded to milliseconds; the output parses back to an equal
/// stream whenever the stream is non-empty and its times already sit on
/// the millisecond grid. An empty stream writes as a bare header, which
/// carries no conversation id to parse back.
pub fn write_canonical_tokens(stream: &TokenStream) -> String {
    let mut out = String::with_capacity(64 + stream.len() * 48);
    out.push_str(CANONICAL_HEADER);
    out.push('\n');
    for token in stream.tokens() {
        out.push_str(stream.conversation_id());
        out.push('\t');
        out.push_str(&token.speaker);
        out.push('\t');
        out.push_str(&token.text);
        out.push('\t');
        out.push_str(&format_seconds(token.start_s));
        out.push('\t');
        out.push_str(&format_seconds(token.end_s));
        out.push('\t');
        out.push_str(&token.confidence.to_string());
        out.push('\n');
    }
    out
}

/// Result of adapting a vendor document: the stream plus any warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedStream {
    pub stream: TokenStream,
    pub warnings: Vec<String>,
}

/// Converts a two-channel vendor STT JSON document into a token stream.
///
/// The document carries an `items` array of word objects with `content`,
/// `start`, `end`, `channel`, and `confidence` fields; numeric fields may
/// arrive as JSON numbers or numeric strings. Channel labels are mapped to
/// the speaker labels `"0"` and `"1"`. `fallback_id` names the conversation
/// when the document has no `conversation_id` of its own. Every word item
/// becomes exactly one token.
pub fn adapt_stereo_stt(input: &str, fallback_id: &str) -> Result<AdaptedStream> {
    let doc: Value = serde_json::from_str(input)
        .map_err(|e| Error::invalid(format!("malformed document: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::invalid("malformed document: expected a JSON object"))?;

    let conversation_id = match obj.get("conversation_id") {
        Some(Value::String(id)) => id.clone(),
        Some(_) => return Err(Error::invalid("conversation_id must be a string")),
        None => fallback_id.to_string(),
    };

    let items = match obj.get("items") {
        Some(Value::Array(items)) => items,
        Some(_) => return Err(Error::invalid("malformed document: items must be an array")),
        None => return Err(Error::invalid("malformed document: missing items array")),
    };

    let mut warnings = Vec::new();
    if items.is_empty() {
        warnings.push("document contains zero word items".to_string());
    }

    let mut channels: Vec<String> = Vec::new();
    let mut raw: Vec<(String, String, f64, f64, f64)> = Vec::with_capacity(items.len());
    for (idx, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| Error::invalid(format!("item {idx}: expected an object")))?;
        let content = match obj.get("content") {
            Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
            Some(Value::String(_)) => {
                return Err(Error::invalid(format!("item {idx}: empty content")));
            }
            _ => return Err(Error::invalid(format!("item {idx}: missing content"))),
        };
        if content.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!(
                "item {idx}: content contains whitespace"
            )));
        }
        let start = number_field(obj.get("start"), idx, "start")?;
        let end = number_field(obj.get("end"), idx, "end")?;
        let confidence = number_field(obj.get("confidence"), idx, "confidence")?;
        let channel = match obj.get("channel") {
            Some(Value::String(s)) => s.trim().to_lowercase(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(Error::invalid(format!("item {idx}: missing channel"))),
        };
        if !channels.iter().any(|c| c == &channel) {
            channels.push(channel.clone());
        }
        raw.push((channel, content, start, end, confidence));
    }

    if channels.len() > 2 {
        return Err(Error::invalid("more than two channels"));
    }

    let mut tokens = Vec::with_capacity(raw.len());
    for (channel, content, start, end, confidence) in raw {
        let speaker = match channel.as_str() {
            "left" | "l" | "ch_0" | "0" => "0",
            "right" | "r" | "ch_1" | "1" => "1",
            other => {
                return Err(Error::invalid(format!("unknown channel label {other:?}")));
            }
        };
        tokens.push(WordToken {
            speaker: speaker.to_string(),
            text: content,
            start_s: start,
            end_s: end,
            confidence,
            low_confidence: false,
        });
    }

    let stream = TokenStream::new(conversation_id, tokens)?;
    Ok(AdaptedStream { stream, warnings })
}

fn number_field(value: Option<&Value>, idx: usize, label: &str) -> Result<f64> {
    match value {
        Some(Value::Number(n)) => n
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::invalid(format!("item {idx}: non-numeric {label} field"))),
        Some(Value::String(s)) => s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::invalid(format!("item {idx}: non-numeric {label} field"))),
        None if label == "start" || label == "end" => {
            Err(Error::invalid(format!("item {idx}: missing timestamps")))
        }
        _ => Err(Error::invalid(format!("item {idx}: missing {label}"))),
    }
}

/// Applies the configured confidence policy to a stream.
///
/// `off` returns the stream unchanged, `flag` marks tokens below the
/// threshold, and `remove` drops them. Order is preserved in every mode.
pub fn filter_tokens(stream: &TokenStream, config: &TurnModelConfig) -> TokenStream {
    let tokens = match config.confidence_mode {
        ConfidenceMode::Off => stream.tokens.clone(),
        ConfidenceMode::Flag => stream
            .tokens
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.low_confidence = t.confidence < config.min_confidence;
                t
            })
            .collect(),
        ConfidenceMode::Remove => stream
            .tokens
            .iter()
            .filter(|t| t.confidence >= config.min_confidence)
            .cloned()
            .collect(),
    };
    TokenStream::from_sorted_unchecked(stream.conversation_id.clone(), tokens)
}
