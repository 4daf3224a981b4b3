use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use turnforge_core::metrics::{
    eligible_durations, eligible_intervals, read_aggregates_csv, write_aggregates_csv,
    write_comparison_csv,
};
use turnforge_core::synth::SynthParams;
use turnforge_core::{
    adapt_stereo_stt, apply_filters, compare_models, compute_features, filter_tokens, histogram,
    join_survey, parse_canonical_tokens, read_surveys_csv, read_transcript_csv, reference_oracle,
    segment, speaker_aggregates, summarize, transcripts_agree, write_canonical_tokens,
    write_features_csv, write_histogram_csv, write_report_csv, write_summary_csv,
    write_transcript_csv, ConfidenceMode, TurnModel, TurnModelConfig,
};

#[derive(Parser)]
#[command(name = "turnforge", version, about = "Turn segmentation and turn-taking analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment token files into turns under a chosen model.
    Segment(SegmentArgs),
    /// Convert a two-channel vendor STT document to canonical tokens.
    Adapt(AdaptArgs),
    /// Compute features, summary statistics, and histogram exports.
    Stats(StatsArgs),
    /// Compare two segmented transcripts statistic by statistic.
    Compare(CompareArgs),
    /// Correlate speaker aggregates with survey outcomes across two models.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic corpus with known turn structure.
    Synth(SynthArgs),
    /// Check the segmentation engine against the reference implementation.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SegmentArgs {
    /// Segmentation model: baseline, intermediate, or naturalturn.
    #[arg(long)]
    model: TurnModel,
    /// Key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Canonical token file to segment.
    #[arg(long, conflicts_with = "input_dir", required_unless_present = "input_dir")]
    input: Option<PathBuf>,
    /// Directory of .tsv token files to segment.
    #[arg(long, requires = "out_dir")]
    input_dir: Option<PathBuf>,
    /// Transcript CSV to write.
    #[arg(long, conflicts_with = "out_dir", required_unless_present = "out_dir")]
    out: Option<PathBuf>,
    /// Directory receiving one transcript CSV per input file.
    #[arg(long, requires = "input_dir")]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AdaptArgs {
    /// Vendor JSON document.
    #[arg(long)]
    input: PathBuf,
    /// Canonical token file to write.
    #[arg(long)]
    out: PathBuf,
    /// Conversation id used when the document does not name one.
    #[arg(long)]
    conversation_id: Option<String>,
}

#[derive(Args)]
struct StatsArgs {
    /// Transcript CSV produced by `segment`.
    #[arg(long, conflicts_with = "input_dir", required_unless_present = "input_dir")]
    input: Option<PathBuf>,
    /// Directory of transcript CSVs pooled into one corpus-level run.
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Summary CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Model label for the summary row and transcript interpretation.
    #[arg(long, default_value_t = TurnModel::NaturalTurn)]
    model: TurnModel,
    /// Key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optional per-turn feature CSV.
    #[arg(long)]
    features_out: Option<PathBuf>,
    /// Optional per-speaker aggregate CSV for `analyze`.
    #[arg(long)]
    aggregates_out: Option<PathBuf>,
    /// Optional turn duration histogram CSV.
    #[arg(long)]
    hist_durations: Option<PathBuf>,
    /// Optional turn interval histogram CSV.
    #[arg(long)]
    hist_intervals: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// First transcript CSV.
    #[arg(long)]
    a: PathBuf,
    /// Second transcript CSV.
    #[arg(long)]
    b: PathBuf,
    /// Comparison CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Model for the first transcript; defaults to its file stem.
    #[arg(long)]
    model_a: Option<TurnModel>,
    /// Model for the second transcript; defaults to its file stem.
    #[arg(long)]
    model_b: Option<TurnModel>,
    /// Key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Speaker aggregate CSV for the first model.
    #[arg(long)]
    a: PathBuf,
    /// Speaker aggregate CSV for the second model.
    #[arg(long)]
    b: PathBuf,
    /// Survey CSV keyed by conversation and speaker.
    #[arg(long)]
    surveys: PathBuf,
    /// Correlation report CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Label for the first model; defaults to the file stem.
    #[arg(long)]
    label_a: Option<String>,
    /// Label for the second model; defaults to the file stem.
    #[arg(long)]
    label_b: Option<String>,
    /// Comma-separated outcome columns to analyze.
    #[arg(long, default_value = "enjoyment,affect_overall,shared_reality")]
    outcomes: String,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory receiving tokens/, truth/, surveys.csv, and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Key=value configuration file governing recovery guarantees.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    n_conversations: usize,
    #[arg(long, default_value_t = 8)]
    turns_min: usize,
    #[arg(long, default_value_t = 16)]
    turns_max: usize,
    #[arg(long, default_value_t = 3.0)]
    turn_duration_mean_s: f64,
    #[arg(long, default_value_t = 1.5)]
    turn_duration_sd_s: f64,
    #[arg(long, default_value_t = 2.5)]
    gap_mean_s: f64,
    #[arg(long, default_value_t = 1.0)]
    gap_sd_s: f64,
    #[arg(long, default_value_t = 0.0)]
    gap_min_s: f64,
    #[arg(long, default_value_t = 10.0)]
    gap_max_s: f64,
    #[arg(long, default_value_t = 0.3)]
    backchannel_rate: f64,
    #[arg(long, default_value_t = 0.2)]
    parallel_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    straddle_rate: f64,
    #[arg(long, default_value_t = 2.5)]
    words_per_second: f64,
    #[arg(long, default_value_t = 0.5)]
    enjoyment_effect: f64,
}

#[derive(Args)]
struct VerifyArgs {
    /// Directory of .tsv token files to check.
    #[arg(long)]
    input_dir: PathBuf,
    /// JSON mismatch report to write.
    #[arg(long, default_value = "verify_report.json")]
    report: PathBuf,
    /// Key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Reproducibility record written alongside every command's outputs.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    tool_version: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    config: String,
    processing_order: Vec<String>,
    tokens_read: usize,
    turns_emitted: usize,
    rows_excluded: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
        if let Some(core) = cause.downcast_ref::<turnforge_core::Error>() {
            return match core {
                turnforge_core::Error::Io(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Segment(args) => run_segment(args),
        Command::Adapt(args) => run_adapt(args),
        Command::Stats(args) => run_stats(args),
        Command::Compare(args) => run_compare(args),
        Command::Analyze(args) => run_analyze(args),
        Command::Synth(args) => run_synth(args),
        Command::Verify(args) => run_verify(args),
    }
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<TurnModelConfig> {
    match path {
        Some(path) => TurnModelConfig::load(path)
            .with_context(|| format!("loading config {}", path.display())),
        None => Ok(TurnModelConfig::default()),
    }
}

fn read_file(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes through a temporary sibling so partial output never lands under
/// the final name.
fn write_atomic(path: &Path, content: &str) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn write_manifest(out: &Path, manifest: &RunManifest) -> anyhow::Result<()> {
    let path = if out.is_dir() {
        out.join("run_manifest.json")
    } else {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    };
    let mut json = serde_json::to_string_pretty(manifest).context("encoding manifest")?;
    json.push('\n');
    write_atomic(&path, &json)
}

fn path_string(path: &Path) -> String {
    path.display().to_string()
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Worker pool sized by TURNFORGE_THREADS when set.
fn worker_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var("TURNFORGE_THREADS") {
        let n: usize = value
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .context("TURNFORGE_THREADS must be a positive integer")?;
        builder = builder.num_threads(n);
    }
    builder.build().context("building worker pool")
}

fn list_token_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "tsv"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .tsv token files in {}", dir.display());
    }
    Ok(files)
}

/// Tokens removed by the confidence policy, for the manifest tally.
fn removed_by_filter(config: &TurnModelConfig, before: usize, after: usize) -> usize {
    match config.confidence_mode {
        ConfidenceMode::Remove => before - after,
        _ => 0,
    }
}

fn run_segment(args: SegmentArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    config.validate()?;

    if let (Some(input), Some(out)) = (&args.input, &args.out) {
        let stream = parse_canonical_tokens(&read_file(input)?)
            .with_context(|| format!("parsing {}", input.display()))?;
        let filtered = filter_tokens(&stream, &config);
        let transcript = segment(&filtered, args.model, &config)?;
        write_atomic(out, &write_transcript_csv(&transcript))?;
        write_manifest(
            out,
            &RunManifest {
                command: format!("segment --model {}", args.model),
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                inputs: vec![path_string(input)],
                outputs: vec![path_string(out)],
                config: config.to_key_values(),
                processing_order: vec!["confidence_filter".to_string(), "segment".to_string()],
                tokens_read: stream.len(),
                turns_emitted: transcript.turns.len(),
                rows_excluded: removed_by_filter(&config, stream.len(), filtered.len()),
            },
        )?;
        return Ok(());
    }

    let input_dir = args.input_dir.as_ref().expect("clap enforces input_dir");
    let out_dir = args.out_dir.as_ref().expect("clap enforces out_dir");
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let files = list_token_files(input_dir)?;
    let pool = worker_pool()?;
    let results: Vec<(usize, usize, usize)> = pool.install(|| {
        use rayon::prelude::*;
        files
            .par_iter()
            .map(|file| -> anyhow::Result<(usize, usize, usize)> {
                let stream = parse_canonical_tokens(&read_file(file)?)
                    .with_context(|| format!("parsing {}", file.display()))?;
                let filtered = filter_tokens(&stream, &config);
                let transcript = segment(&filtered, args.model, &config)?;
                let out = out_dir.join(format!("{}.csv", file_stem(file)));
                write_atomic(&out, &write_transcript_csv(&transcript))?;
                Ok((
                    stream.len(),
                    transcript.turns.len(),
                    removed_by_filter(&config, stream.len(), filtered.len()),
                ))
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;

    let tokens_read: usize = results.iter().map(|r| r.0).sum();
    let turns_emitted: usize = results.iter().map(|r| r.1).sum();
    let rows_excluded: usize = results.iter().map(|r| r.2).sum();
    write_manifest(
        out_dir,
        &RunManifest {
            command: format!("segment --model {}", args.model),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: vec![path_string(input_dir)],
            outputs: vec![path_string(out_dir)],
            config: config.to_key_values(),
            processing_order: vec!["confidence_filter".to_string(), "segment".to_string()],
            tokens_read,
            turns_emitted,
            rows_excluded,
        },
    )?;
    println!(
        "segmented {} conversations, {} tokens, {} turns",
        files.len(),
        tokens_read,
        turns_emitted
    );
    Ok(())
}

fn run_adapt(args: AdaptArgs) -> anyhow::Result<()> {
    let fallback = args
        .conversation_id
        .clone()
        .unwrap_or_else(|| file_stem(&args.input));
    let adapted = adapt_stereo_stt(&read_file(&args.input)?, &fallback)
        .with_context(|| format!("adapting {}", args.input.display()))?;
    for warning in &adapted.warnings {
        eprintln!("warning: {warning}");
    }
    write_atomic(&args.out, &write_canonical_tokens(&adapted.stream))?;
    write_manifest(
        &args.out,
        &RunManifest {
            command: "adapt".to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: vec![path_string(&args.input)],
            outputs: vec![path_string(&args.out)],
            config: String::new(),
            processing_order: vec!["adapt".to_string()],
            tokens_read: adapted.stream.len(),
            turns_emitted: 0,
            rows_excluded: 0,
        },
    )?;
    Ok(())
}

fn list_transcript_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .csv transcript files in {}", dir.display());
    }
    Ok(files)
}

fn run_stats(args: StatsArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    config.validate()?;
    let (inputs, input_label) = match (&args.input, &args.input_dir) {
        (Some(file), _) => (vec![file.clone()], path_string(file)),
        (None, Some(dir)) => (list_transcript_files(dir)?, path_string(dir)),
        (None, None) => unreachable!("clap enforces one input form"),
    };

    let mut features = Vec::new();
    for path in &inputs {
        let transcript = read_transcript_csv(&read_file(path)?, args.model, &config)
            .with_context(|| format!("parsing {}", path.display()))?;
        features.extend(compute_features(&transcript));
    }
    apply_filters(&mut features, &config);
    let rows_excluded = features.iter().filter(|f| !f.excluded.is_empty()).count();

    let summary = summarize(&features, &args.model.to_string())?;
    write_atomic(&args.out, &write_summary_csv(&[summary]))?;

    let mut outputs = vec![path_string(&args.out)];
    if let Some(path) = &args.features_out {
        write_atomic(path, &write_features_csv(&features))?;
        outputs.push(path_string(path));
    }
    if let Some(path) = &args.aggregates_out {
        write_atomic(path, &write_aggregates_csv(&speaker_aggregates(&features)))?;
        outputs.push(path_string(path));
    }
    if let Some(path) = &args.hist_durations {
        let hist = histogram(&eligible_durations(&features), 1.0, 0.0, 120.0)?;
        write_atomic(path, &write_histogram_csv(&hist))?;
        outputs.push(path_string(path));
    }
    if let Some(path) = &args.hist_intervals {
        let hist = histogram(&eligible_intervals(&features), 0.1, -5.0, 5.0)?;
        write_atomic(path, &write_histogram_csv(&hist))?;
        outputs.push(path_string(path));
    }

    write_manifest(
        &args.out,
        &RunManifest {
            command: format!("stats --model {}", args.model),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: vec![input_label],
            outputs,
            config: config.to_key_values(),
            processing_order: vec![
                "features".to_string(),
                "filters".to_string(),
                "stats".to_string(),
            ],
            tokens_read: 0,
            turns_emitted: features.len(),
            rows_excluded,
        },
    )?;
    Ok(())
}

fn summarize_transcript_file(
    path: &Path,
    model: TurnModel,
    config: &TurnModelConfig,
) -> anyhow::Result<(turnforge_core::SummaryStats, usize, usize)> {
    let transcript = read_transcript_csv(&read_file(path)?, model, config)
        .with_context(|| format!("parsing {}", path.display()))?;
    let mut features = compute_features(&transcript);
    apply_filters(&mut features, config);
    let excluded = features.iter().filter(|f| !f.excluded.is_empty()).count();
    let summary = summarize(&features, &model.to_string())?;
    Ok((summary, features.len(), excluded))
}

fn run_compare(args: CompareArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    config.validate()?;
    let model_for = |flag: &Option<TurnModel>, path: &Path| -> anyhow::Result<TurnModel> {
        match flag {
            Some(model) => Ok(*model),
            None => file_stem(path).parse().map_err(|_| {
                anyhow::anyhow!(
                    "cannot infer model from {}; pass --model-a/--model-b",
                    path.display()
                )
            }),
        }
    };
    let model_a = model_for(&args.model_a, &args.a)?;
    let model_b = model_for(&args.model_b, &args.b)?;
    let (summary_a, turns_a, excluded_a) = summarize_transcript_file(&args.a, model_a, &config)?;
    let (summary_b, turns_b, excluded_b) = summarize_transcript_file(&args.b, model_b, &config)?;
    write_atomic(&args.out, &write_comparison_csv(&summary_a, &summary_b))?;
    write_manifest(
        &args.out,
        &RunManifest {
            command: format!("compare {model_a} {model_b}"),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: vec![path_string(&args.a), path_string(&args.b)],
            outputs: vec![path_string(&args.out)],
            config: config.to_key_values(),
            processing_order: vec![
                "features".to_string(),
                "filters".to_string(),
                "stats".to_string(),
            ],
            tokens_read: 0,
            turns_emitted: turns_a + turns_b,
            rows_excluded: excluded_a + excluded_b,
        },
    )?;
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let label_a = args.label_a.clone().unwrap_or_else(|| file_stem(&args.a));
    let label_b = args.label_b.clone().unwrap_or_else(|| file_stem(&args.b));
    let aggregates_a = read_aggregates_csv(&read_file(&args.a)?)
        .with_context(|| format!("parsing {}", args.a.display()))?;
    let aggregates_b = read_aggregates_csv(&read_file(&args.b)?)
        .with_context(|| format!("parsing {}", args.b.display()))?;
    let surveys = read_surveys_csv(&read_file(&args.surveys)?)
        .with_context(|| format!("parsing {}", args.surveys.display()))?;

    let join_a = join_survey(&aggregates_a, &surveys)?;
    let join_b = join_survey(&aggregates_b, &surveys)?;
    let dropped = join_a.unmatched_aggregates
        + join_a.unmatched_surveys
        + join_a.dropped_no_duration
        + join_b.unmatched_aggregates
        + join_b.unmatched_surveys
        + join_b.dropped_no_duration;

    let outcomes: Vec<&str> = args
        .outcomes
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if outcomes.is_empty() {
        bail!("no outcome columns requested");
    }
    let mut comparisons = Vec::with_capacity(outcomes.len());
    for outcome in &outcomes {
        comparisons.push(compare_models(&join_a.rows, &join_b.rows, outcome)?);
    }
    write_atomic(&args.out, &write_report_csv(&comparisons, &label_a, &label_b))?;
    write_manifest(
        &args.out,
        &RunManifest {
            command: format!("analyze {label_a} {label_b}"),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: vec![
                path_string(&args.a),
                path_string(&args.b),
                path_string(&args.surveys),
            ],
            outputs: vec![path_string(&args.out)],
            config: String::new(),
            processing_order: vec!["analyze".to_string()],
            tokens_read: 0,
            turns_emitted: join_a.rows.len() + join_b.rows.len(),
            rows_excluded: dropped,
        },
    )?;
    for comparison in &comparisons {
        let w = &comparison.williams;
        println!(
            "{}: r_{}={:.3} r_{}={:.3} williams t={:.3} p={:.4}",
            comparison.outcome, label_a, comparison.first.r, label_b, comparison.second.r, w.t, w.p
        );
    }
    Ok(())
}

fn run_synth(args: SynthArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    let params = SynthParams {
        seed: args.seed,
        n_conversations: args.n_conversations,
        turns_min: args.turns_min,
        turns_max: args.turns_max,
        turn_duration_mean_s: args.turn_duration_mean_s,
        turn_duration_sd_s: args.turn_duration_sd_s,
        gap_mean_s: args.gap_mean_s,
        gap_sd_s: args.gap_sd_s,
        gap_min_s: args.gap_min_s,
        gap_max_s: args.gap_max_s,
        backchannel_rate: args.backchannel_rate,
        parallel_rate: args.parallel_rate,
        straddle_rate: args.straddle_rate,
        words_per_second: args.words_per_second,
        enjoyment_effect: args.enjoyment_effect,
    };
    let manifest = turnforge_core::generate_corpus(&params, &config, &args.out_dir)?;
    let tokens: usize = manifest.conversations.iter().map(|c| c.n_tokens).sum();
    let turns: usize = manifest.conversations.iter().map(|c| c.n_turns).sum();
    write_manifest(
        &args.out_dir,
        &RunManifest {
            command: format!("synth --seed {}", args.seed),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            outputs: vec![path_string(&args.out_dir)],
            config: config.to_key_values(),
            processing_order: vec!["synth".to_string()],
            tokens_read: tokens,
            turns_emitted: turns,
            rows_excluded: 0,
        },
    )?;
    println!(
        "generated {} conversations, {} tokens, {} survey rows",
        manifest.conversations.len(),
        tokens,
        manifest.n_survey_rows
    );
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    files_checked: usize,
    mismatches: Vec<String>,
}

fn run_verify(args: VerifyArgs) -> anyhow::Result<()> {
    let config = load_config(&args.config)?;
    config.validate()?;
    let files = list_token_files(&args.input_dir)?;
    let pool = worker_pool()?;
    let outcomes: Vec<(usize, Option<String>)> = pool.install(|| {
        use rayon::prelude::*;
        files
            .par_iter()
            .map(|file| -> anyhow::Result<(usize, Option<String>)> {
                let stream = parse_canonical_tokens(&read_file(file)?)
                    .with_context(|| format!("parsing {}", file.display()))?;
                let filtered = filter_tokens(&stream, &config);
                let engine = segment(&filtered, TurnModel::NaturalTurn, &config)?;
                let oracle = reference_oracle(&filtered, &config)?;
                let mismatch = if transcripts_agree(&engine, &oracle) {
                    None
                } else {
                    Some(format!(
                        "{}: engine produced {} turns, reference {} turns",
                        file.display(),
                        engine.turns.len(),
                        oracle.turns.len()
                    ))
                };
                Ok((stream.len(), mismatch))
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;

    let tokens_read: usize = outcomes.iter().map(|o| o.0).sum();
    let mismatches: Vec<String> = outcomes.into_iter().filter_map(|o| o.1).collect();
    let report = VerifyReport {
        files_checked: files.len(),
        mismatches: mismatches.clone(),
    };
    let mut json = serde_json::to_string_pretty(&report).context("encoding report")?;
    json.push('\n');
    write_atomic(&args.report, &json)?;
    write_manifest(
        &args.report,
        &RunManifest {
            command: "verify".to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: vec![path_string(&args.input_dir)],
            outputs: vec![path_string(&args.report)],
            config: config.to_key_values(),
            processing_order: vec![
                "confidence_filter".to_string(),
                "segment".to_string(),
                "verify".to_string(),
            ],
            tokens_read,
            turns_emitted: 0,
            rows_excluded: 0,
        },
    )?;

    if mismatches.is_empty() {
        println!("verified {} files, no mismatches", files.len());
        Ok(())
    } else {
        for m in &mismatches {
            eprintln!("mismatch: {m}");
        }
        bail!("{} of {} files disagree with the reference", mismatches.len(), files.len());
    }
}
