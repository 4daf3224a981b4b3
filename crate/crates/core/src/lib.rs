//! Turn segmentation and turn-taking analytics for word-level speech
//! transcripts.
//!
//! The pipeline runs in fixed stages: ingest word tokens with timestamps,
//! group them into conversational turns under one of three segmentation
//! models, derive per-turn features and summary statistics, and correlate
//! turn dynamics with post-conversation survey outcomes. A deterministic
//! synthesizer produces corpora with exact planted turn structure for
//! end-to-end verification.

pub mod analysis;
pub mod backchannel;
pub mod config;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod segment;
pub mod special;
pub mod synth;
pub mod token;

pub use analysis::{
    compare_models, join_survey, pearson, read_surveys_csv, williams_test, write_report_csv,
    CorrelationResult, JoinOutcome, JoinedRow, ModelComparison, PairedComparisonResult,
    SurveyRecord,
};
pub use backchannel::{is_backchannel, load_cue_list, normalize_word, CueList};
pub use config::{ConfidenceMode, TurnModelConfig};
pub use error::{Error, Result};
pub use metrics::{
    apply_filters, compute_features, histogram, speaker_aggregates, summarize, write_features_csv,
    write_histogram_csv, write_summary_csv, ExclusionReason, Histogram, SpeakerAggregate,
    SummaryStats, TurnFeatures,
};
pub use oracle::{check_invariants, reference_oracle, transcripts_agree};
pub use segment::{
    read_transcript_csv, segment, write_transcript_csv, Transcript, Turn, TurnKind, TurnModel,
};
pub use synth::{
    generate_conversation, generate_corpus, planted_surveys, CorpusManifest, SynthParams,
};
pub use token::{
    adapt_stereo_stt, filter_tokens, parse_canonical_tokens, write_canonical_tokens, AdaptedStream,
    TokenStream, WordToken,
};
