//! Survey joins and the correlation analyses built on them.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::metrics::{stable_mean, SpeakerAggregate};
use crate::special::student_t_p_two_sided;

/// One participant's post-conversation survey responses.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyRecord {
    pub conversation_id: String,
    pub speaker: String,
    /// Outcome scales by column name; always includes `enjoyment`,
    /// `affect_overall`, and `shared_reality`.
    pub outcomes: BTreeMap<String, f64>,
}

/// Outcome columns every survey file must provide.
pub const REQUIRED_OUTCOMES: [&str; 3] = ["enjoyment", "affect_overall", "shared_reality"];

/// Parses a survey CSV.
///
/// The header must start with `conversation_id,speaker` followed by the
/// three required outcome columns; additional numeric columns are kept and
/// analyzable by name.
pub fn read_surveys_csv(input: &str) -> Result<Vec<SurveyRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input.as_bytes());
    let header: Vec<String> = {
        let headers = reader
            .headers()
            .map_err(|e| Error::invalid(format!("bad survey header: {e}")))?;
        headers.iter().map(String::from).collect()
    };
    if header.len() < 5 || header[0] != "conversation_id" || header[1] != "speaker" {
        return Err(Error::invalid(
            "bad survey header: expected conversation_id,speaker,enjoyment,affect_overall,shared_reality",
        ));
    }
    for required in REQUIRED_OUTCOMES {
        if !header[2..].iter().any(|h| h == required) {
            return Err(Error::invalid(format!(
                "bad survey header: missing column {required:?}"
            )));
        }
    }

    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::invalid(format!("bad survey row: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(records.len() + 2);
        if record.len() != header.len() {
            return Err(Error::malformed(
                line,
                format!("expected {} columns, got {}", header.len(), record.len()),
            ));
        }
        let mut outcomes = BTreeMap::new();
        for (i, name) in header.iter().enumerate().skip(2) {
            let raw = record.get(i).unwrap_or("");
            let value: f64 = raw
                .parse()
                .map_err(|_| Error::malformed(line, format!("bad {name} value {raw:?}")))?;
            if !value.is_finite() {
                return Err(Error::malformed(line, format!("bad {name} value {raw:?}")));
            }
            outcomes.insert(name.clone(), value);
        }
        records.push(SurveyRecord {
            conversation_id: record.get(0).unwrap_or("").to_string(),
            speaker: record.get(1).unwrap_or("").to_string(),
            outcomes,
        });
    }
    Ok(records)
}

/// Writes survey records in the format `read_surveys_csv` accepts.
pub fn write_surveys_csv(records: &[SurveyRecord]) -> String {
    let mut extra: Vec<String> = Vec::new();
    for record in records {
        for name in record.outcomes.keys() {
            if !REQUIRED_OUTCOMES.contains(&name.as_str()) && !extra.contains(name) {
                extra.push(name.clone());
            }
        }
    }
    extra.sort();
    let mut out = String::from("conversation_id,speaker,enjoyment,affect_overall,shared_reality");
    for name in &extra {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for record in records {
        out.push_str(&format!("{},{}", record.conversation_id, record.speaker));
        for name in REQUIRED_OUTCOMES.iter().map(|s| s.to_string()).chain(extra.iter().cloned()) {
            let value = record.outcomes.get(&name).copied().unwrap_or(f64::NAN);
            out.push_str(&format!(",{value:.6}"));
        }
        out.push('\n');
    }
    out
}

/// One joined row: a speaker's duration aggregate plus their survey.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedRow {
    pub conversation_id: String,
    pub speaker: String,
    pub mean_turn_duration_s: f64,
    pub outcomes: BTreeMap<String, f64>,
}

/// Inner-join result with drop tallies.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinOutcome {
    pub rows: Vec<JoinedRow>,
    /// Aggregate rows with no matching survey.
    pub unmatched_aggregates: usize,
    /// Survey rows with no matching aggregate.
    pub unmatched_surveys: usize,
    /// Matched rows dropped because the aggregate has no duration mean.
    pub dropped_no_duration: usize,
}

/// Joins speaker aggregates with survey records on
/// `(conversation_id, speaker)`.
///
/// Rows without a partner on either side are dropped and counted, as are
/// matches whose aggregate carries no duration mean. Duplicate keys in
/// either input are an error.
pub fn join_survey(
    aggregates: &[SpeakerAggregate],
    surveys: &[SurveyRecord],
) -> Result<JoinOutcome> {
    let mut survey_map: BTreeMap<(String, String), &SurveyRecord> = BTreeMap::new();
    for survey in surveys {
        let key = (survey.conversation_id.clone(), survey.speaker.clone());
        if survey_map.insert(key, survey).is_some() {
            return Err(Error::invalid(format!(
                "duplicate survey key ({}, {})",
                survey.conversation_id, survey.speaker
            )));
        }
    }
    let mut seen_aggregates: BTreeMap<(String, String), ()> = BTreeMap::new();
    for aggregate in aggregates {
        let key = (
            aggregate.conversation_id.clone(),
            aggregate.speaker.clone(),
        );
        if seen_aggregates.insert(key, ()).is_some() {
            return Err(Error::invalid(format!(
                "duplicate aggregate key ({}, {})",
                aggregate.conversation_id, aggregate.speaker
            )));
        }
    }

    let mut rows = Vec::new();
    let mut unmatched_aggregates = 0;
    let mut dropped_no_duration = 0;
    let mut matched_survey_keys: Vec<(String, String)> = Vec::new();
    for aggregate in aggregates {
        let key = (
            aggregate.conversation_id.clone(),
            aggregate.speaker.clone(),
        );
        let Some(survey) = survey_map.get(&key) else {
            unmatched_aggregates += 1;
            continue;
        };
        matched_survey_keys.push(key);
        let Some(duration) = aggregate.mean_turn_duration_s else {
            dropped_no_duration += 1;
            continue;
        };
        rows.push(JoinedRow {
            conversation_id: aggregate.conversation_id.clone(),
            speaker: aggregate.speaker.clone(),
            mean_turn_duration_s: duration,
            outcomes: survey.outcomes.clone(),
        });
    }
    let unmatched_surveys = surveys.len() - matched_survey_keys.len();

    Ok(JoinOutcome {
        rows,
        unmatched_aggregates,
        unmatched_surveys,
        dropped_no_duration,
    })
}

/// Pearson correlation with its t test and Fisher confidence interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub n: usize,
    pub r: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub t: f64,
    /// n − 2.
    pub df: usize,
    pub p: f64,
}

/// Product-moment correlation of two equal-length vectors.
///
/// Requires at least 4 observations and nonzero variance on both sides.
/// The t statistic uses n − 2 degrees of freedom and the 95% interval comes
/// from the Fisher z transform with the conventional 1.96 multiplier.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 4 {
        return Err(Error::invalid("fewer than 4 observations"));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite value"));
    }

    let mean_x = stable_mean(x);
    let mean_y = stable_mean(y);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (xi, yi) in x.iter().zip(y.iter()) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("degenerate input"));
    }

    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = n - 2;
    let t = r * (df as f64 / (1.0 - r * r)).sqrt();
    let p = student_t_p_two_sided(t, df as f64);
    let half_width = 1.96 / ((n - 3) as f64).sqrt();
    let z = r.atanh();
    let ci_low = (z - half_width).tanh();
    let ci_high = (z + half_width).tanh();

    Ok(CorrelationResult {
        n,
        r,
        ci_low,
        ci_high,
        t,
        df,
        p,
    })
}

/// Williams' test of two dependent correlations sharing one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedComparisonResult {
    pub r_a: f64,
    pub r_b: f64,
    /// Correlation between the two predictors.
    pub r_ab: f64,
    pub t: f64,
    /// n − 3.
    pub df: usize,
    pub p: f64,
    pub n: usize,
}

/// Compares two correlations that share one variable.
///
/// Implements Williams' t: with K = 1 − r_a² − r_b² − r_ab² +
/// 2·r_a·r_b·r_ab and r̄ = (r_a + r_b)/2,
/// t = (r_a − r_b)·√(((n−1)(1+r_ab)) / (2K(n−1)/(n−3) + r̄²(1−r_ab)³)) on
/// n − 3 degrees of freedom. Swapping r_a and r_b negates t exactly.
pub fn williams_test(r_a: f64, r_b: f64, r_ab: f64, n: usize) -> Result<PairedComparisonResult> {
    for r in [r_a, r_b, r_ab] {
        if !r.is_finite() || r <= -1.0 || r >= 1.0 {
            return Err(Error::invalid(format!(
                "correlation {r} outside the open interval (-1, 1)"
            )));
        }
    }
    if n < 5 {
        return Err(Error::invalid("fewer than 5 observations"));
    }

    let nf = n as f64;
    let k = 1.0 - r_a * r_a - r_b * r_b - r_ab * r_ab + 2.0 * r_a * r_b * r_ab;
    let r_mean = (r_a + r_b) / 2.0;
    let denominator =
        2.0 * k * (nf - 1.0) / (nf - 3.0) + r_mean * r_mean * (1.0 - r_ab).powi(3);
    if denominator <= 0.0 {
        return Err(Error::invalid("degenerate correlation matrix"));
    }
    let t = (r_a - r_b) * ((nf - 1.0) * (1.0 + r_ab) / denominator).sqrt();
    let df = n - 3;
    let p = student_t_p_two_sided(t, df as f64);

    Ok(PairedComparisonResult {
        r_a,
        r_b,
        r_ab,
        t,
        df,
        p,
        n,
    })
}

/// Side-by-side correlation analysis of one outcome under two models.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelComparison {
    pub outcome: String,
    /// Shared (conversation, speaker) keys used by every statistic.
    pub n: usize,
    pub first: CorrelationResult,
    pub second: CorrelationResult,
    /// Correlation between the two models' duration measures.
    pub duration_r: f64,
    pub williams: PairedComparisonResult,
}

/// Correlates one outcome with mean turn duration under two models and
/// tests the difference.
///
/// Only keys present in both joins are used; the paired test takes the
/// empirical correlation between the two duration measures as r_ab.
pub fn compare_models(
    joined_a: &[JoinedRow],
    joined_b: &[JoinedRow],
    outcome_name: &str,
) -> Result<ModelComparison> {
    let mut by_key: BTreeMap<(&str, &str), &JoinedRow> = BTreeMap::new();
    for row in joined_b {
        by_key.insert((row.conversation_id.as_str(), row.speaker.as_str()), row);
    }

    let mut duration_a = Vec::new();
    let mut duration_b = Vec::new();
    let mut outcome = Vec::new();
    for row_a in joined_a {
        let key = (row_a.conversation_id.as_str(), row_a.speaker.as_str());
        let Some(row_b) = by_key.get(&key) else {
            continue;
        };
        let Some(value) = row_a.outcomes.get(outcome_name) else {
            return Err(Error::invalid(format!(
                "unknown outcome column {outcome_name:?}"
            )));
        };
        duration_a.push(row_a.mean_turn_duration_s);
        duration_b.push(row_b.mean_turn_duration_s);
        outcome.push(*value);
    }
    if duration_a.len() < 4 {
        return Err(Error::invalid(format!(
            "fewer than 4 shared keys ({})",
            duration_a.len()
        )));
    }

    let first = pearson(&duration_a, &outcome)?;
    let second = pearson(&duration_b, &outcome)?;
    let duration_r = pearson(&duration_a, &duration_b)?.r;
    let williams = williams_test(first.r, second.r, duration_r, duration_a.len())?;

    Ok(ModelComparison {
        outcome: outcome_name.to_string(),
        n: duration_a.len(),
        first,
        second,
        duration_r,
        williams,
    })
}

/// Header row of the correlation report CSV.
pub const REPORT_HEADER: &str = "model,outcome,test,n,r,ci_low,ci_high,t,df,p";

fn format_p(p: f64) -> String {
    if p == 0.0 || p >= 1e-4 {
        format!("{p:.6}")
    } else {
        format!("{p:.3e}")
    }
}

/// Writes comparison results as a correlation report CSV.
///
/// Each comparison contributes one row per model and a `williams` row for
/// the difference test. The caller provides the model labels in the same
/// order the comparison was built.
pub fn write_report_csv(comparisons: &[ModelComparison], label_a: &str, label_b: &str) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for comparison in comparisons {
        for (label, result) in [(label_a, &comparison.first), (label_b, &comparison.second)] {
            out.push_str(&format!(
                "{},{},pearson,{},{:.6},{:.6},{:.6},{:.4},{},{}\n",
                label,
                comparison.outcome,
                result.n,
                result.r,
                result.ci_low,
                result.ci_high,
                result.t,
                result.df,
                format_p(result.p),
            ));
        }
        let w = &comparison.williams;
        out.push_str(&format!(
            "difference,{},williams,{},,,,{:.4},{},{}\n",
            comparison.outcome,
            w.n,
            w.t,
            w.df,
            format_p(w.p),
        ));
    }
    out
}
