use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_turnforge"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("turnforge-cli-{}-{tag}", std::process::id()));
    if dir.exists() {
        fs::remove_dir_all(&dir).unwrap();
    }
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process terminated by signal")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_segment_naturalturn_matches_golden() {
        let dir = scratch_dir("segment-nt");
        let out = dir.join("t1_nt.csv");
        let output = binary()
            .args(["segment", "--model", "naturalturn"])
            .arg("--input")
            .arg(fixture("t1.tsv"))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_success(&output);

        let produced = fs::read_to_string(&out).unwrap();
        let golden = fs::read_to_string(fixture("t1_naturalturn.csv")).unwrap();
        assert_eq!(produced, golden);

        let manifest = fs::read_to_string(dir.join("t1_nt.csv.manifest.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
        assert_eq!(parsed["tokens_read"], 7);
        assert_eq!(parsed["turns_emitted"], 3);
        assert_eq!(parsed["rows_excluded"], 0);
        assert_eq!(parsed["tool_version"], env!("CARGO_PKG_VERSION"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_segment_baseline_matches_golden() {
        let dir = scratch_dir("segment-bl");
        let out = dir.join("t1_bl.csv");
        let output = binary()
            .args(["segment", "--model", "baseline"])
            .arg("--input")
            .arg(fixture("t1.tsv"))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_success(&output);
        let produced = fs::read_to_string(&out).unwrap();
        let golden = fs::read_to_string(fixture("t1_baseline.csv")).unwrap();
        assert_eq!(produced, golden);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_overlap_interval_in_features() {
        let dir = scratch_dir("overlap");
        let transcript = dir.join("t2.csv");
        let output = binary()
            .args(["segment", "--model", "naturalturn"])
            .arg("--input")
            .arg(fixture("t2.tsv"))
            .arg("--out")
            .arg(&transcript)
            .output()
            .unwrap();
        assert_success(&output);

        let features = dir.join("features.csv");
        let output = binary()
            .args(["stats", "--model", "naturalturn"])
            .arg("--input")
            .arg(&transcript)
            .arg("--out")
            .arg(dir.join("summary.csv"))
            .arg("--features-out")
            .arg(&features)
            .output()
            .unwrap();
        assert_success(&output);

        let body = fs::read_to_string(&features).unwrap();
        let overlap_row = body
            .lines()
            .find(|line| line.starts_with("t2,2,"))
            .expect("second turn row");
        assert!(overlap_row.contains(",-0.500,true,"), "row: {overlap_row}");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_pause_threshold_changes_turn_count() {
        let dir = scratch_dir("pause");
        let strict = dir.join("strict.csv");
        let output = binary()
            .args(["segment", "--model", "naturalturn"])
            .arg("--input")
            .arg(fixture("t3.tsv"))
            .arg("--out")
            .arg(&strict)
            .output()
            .unwrap();
        assert_success(&output);
        let body = fs::read_to_string(&strict).unwrap();
        assert_eq!(body.lines().count(), 3, "header plus two turns: {body}");

        let config = dir.join("loose.cfg");
        fs::write(&config, "max_pause_s=3.5\n").unwrap();
        let loose = dir.join("loose.csv");
        let output = binary()
            .args(["segment", "--model", "naturalturn"])
            .arg("--config")
            .arg(&config)
            .arg("--input")
            .arg(fixture("t3.tsv"))
            .arg("--out")
            .arg(&loose)
            .output()
            .unwrap();
        assert_success(&output);
        let body = fs::read_to_string(&loose).unwrap();
        assert_eq!(body.lines().count(), 2, "header plus one turn: {body}");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_adapt_matches_golden() {
        let dir = scratch_dir("adapt");
        let out = dir.join("adapted.tsv");
        let output = binary()
            .arg("adapt")
            .arg("--input")
            .arg(fixture("vendor.json"))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_success(&output);
        let produced = fs::read_to_string(&out).unwrap();
        let golden = fs::read_to_string(fixture("vendor_adapted.tsv")).unwrap();
        assert_eq!(produced, golden);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_stats_summary_golden() {
        let dir = scratch_dir("summary");
        let transcript = dir.join("t1.csv");
        let output = binary()
            .args(["segment", "--model", "naturalturn"])
            .arg("--input")
            .arg(fixture("t1.tsv"))
            .arg("--out")
            .arg(&transcript)
            .output()
            .unwrap();
        assert_success(&output);

        let summary = dir.join("summary.csv");
        let output = binary()
            .args(["stats", "--model", "naturalturn"])
            .arg("--input")
            .arg(&transcript)
            .arg("--out")
            .arg(&summary)
            .output()
            .unwrap();
        assert_success(&output);

        let body = fs::read_to_string(&summary).unwrap();
        let expected = "model,mean_turn_duration_s,mean_words_per_turn,\
             mean_turns_per_speaker_per_conversation,mean_interval_ms,prop_negative_intervals\n\
             naturalturn,0.300000,1.000000,0.500000,1600.000000,0.000000\n";
        assert_eq!(body, expected);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_exit_codes_by_failure_class() {
        let dir = scratch_dir("exit");
        let missing = binary()
            .args(["stats", "--input"])
            .arg(dir.join("absent.csv"))
            .arg("--out")
            .arg(dir.join("x.csv"))
            .output()
            .unwrap();
        assert_eq!(exit_code(&missing), 2);

        let config = dir.join("bad.cfg");
        fs::write(&config, "max_pause_s=-1\n").unwrap();
        let invalid = binary()
            .args(["segment", "--model", "naturalturn"])
            .arg("--config")
            .arg(&config)
            .arg("--input")
            .arg(fixture("t1.tsv"))
            .arg("--out")
            .arg(dir.join("y.csv"))
            .output()
            .unwrap();
        assert_eq!(exit_code(&invalid), 1);

        let unknown_key = dir.join("unknown.cfg");
        fs::write(&unknown_key, "max_pause=2\n").unwrap();
        let invalid = binary()
            .args(["segment", "--model", "naturalturn"])
            .arg("--config")
            .arg(&unknown_key)
            .arg("--input")
            .arg(fixture("t1.tsv"))
            .arg("--out")
            .arg(dir.join("z.csv"))
            .output()
            .unwrap();
        assert_eq!(exit_code(&invalid), 1);

        let bad_flag = binary().args(["segment", "--bogus"]).output().unwrap();
        assert_eq!(exit_code(&bad_flag), 1);

        let version = binary().arg("--version").output().unwrap();
        assert_eq!(exit_code(&version), 0);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_synth_segment_verify_round_trip() {
        let dir = scratch_dir("round-trip");
        let corpus = dir.join("corpus");
        let output = binary()
            .arg("synth")
            .arg("--out-dir")
            .arg(&corpus)
            .args(["--n-conversations", "4", "--seed", "9"])
            .output()
            .unwrap();
        assert_success(&output);

        let segmented = dir.join("segmented");
        let output = binary()
            .args(["segment", "--model", "naturalturn"])
            .arg("--input-dir")
            .arg(corpus.join("tokens"))
            .arg("--out-dir")
            .arg(&segmented)
            .env("TURNFORGE_THREADS", "2")
            .output()
            .unwrap();
        assert_success(&output);
        for i in 0..4 {
            let name = format!("conv{i:04}.csv");
            let produced = fs::read_to_string(segmented.join(&name)).unwrap();
            let truth = fs::read_to_string(corpus.join("truth").join(&name)).unwrap();
            assert_eq!(produced, truth, "segmented {name} differs from planted truth");
        }
        assert!(segmented.join("run_manifest.json").exists());

        let report = dir.join("verify.json");
        let output = binary()
            .arg("verify")
            .arg("--input-dir")
            .arg(corpus.join("tokens"))
            .arg("--report")
            .arg(&report)
            .output()
            .unwrap();
        assert_success(&output);
        let parsed: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
        assert_eq!(parsed["files_checked"], 4);
        assert_eq!(parsed["mismatches"].as_array().unwrap().len(), 0);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_analyze_report_shape() {
        let dir = scratch_dir("analyze");
        let corpus = dir.join("corpus");
        let output = binary()
            .arg("synth")
            .arg("--out-dir")
            .arg(&corpus)
            .args(["--n-conversations", "8", "--seed", "3", "--enjoyment-effect", "0.8"])
            .output()
            .unwrap();
        assert_success(&output);

        for model in ["baseline", "naturalturn"] {
            let seg_dir = dir.join(format!("seg_{model}"));
            let output = binary()
                .args(["segment", "--model", model])
                .arg("--input-dir")
                .arg(corpus.join("tokens"))
                .arg("--out-dir")
                .arg(&seg_dir)
                .output()
                .unwrap();
            assert_success(&output);
            let output = binary()
                .args(["stats", "--model", model])
                .arg("--input-dir")
                .arg(&seg_dir)
                .arg("--out")
                .arg(dir.join(format!("summary_{model}.csv")))
                .arg("--aggregates-out")
                .arg(dir.join(format!("agg_{model}.csv")))
                .output()
                .unwrap();
            assert_success(&output);
        }

        let report = dir.join("report.csv");
        let output = binary()
            .arg("analyze")
            .arg("--a")
            .arg(dir.join("agg_baseline.csv"))
            .arg("--b")
            .arg(dir.join("agg_naturalturn.csv"))
            .arg("--surveys")
            .arg(corpus.join("surveys.csv"))
            .arg("--out")
            .arg(&report)
            .args(["--label-a", "baseline", "--label-b", "naturalturn"])
            .output()
            .unwrap();
        assert_success(&output);

        let body = fs::read_to_string(&report).unwrap();
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines[0], "model,outcome,test,n,r,ci_low,ci_high,t,df,p");
        assert_eq!(lines.len(), 10, "header plus three rows per outcome");
        for outcome in ["enjoyment", "affect_overall", "shared_reality"] {
            assert!(lines.iter().any(|l| l.starts_with(&format!("baseline,{outcome},pearson,"))));
            assert!(lines.iter().any(|l| l.starts_with(&format!("naturalturn,{outcome},pearson,"))));
            assert!(lines.iter().any(|l| l.starts_with(&format!("difference,{outcome},williams,"))));
        }
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn test_compare_lists_each_statistic() {
        let dir = scratch_dir("compare");
        for (model, name) in [("baseline", "baseline.csv"), ("naturalturn", "naturalturn.csv")] {
            let output = binary()
                .args(["segment", "--model", model])
                .arg("--input")
                .arg(fixture("t1.tsv"))
                .arg("--out")
                .arg(dir.join(name))
                .output()
                .unwrap();
            assert_success(&output);
        }
        let out = dir.join("comparison.csv");
        let output = binary()
            .arg("compare")
            .arg("--a")
            .arg(dir.join("baseline.csv"))
            .arg("--b")
            .arg(dir.join("naturalturn.csv"))
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_success(&output);
        let body = fs::read_to_string(&out).unwrap();
        assert!(body.starts_with("statistic,baseline,naturalturn\n"));
        assert_eq!(body.lines().count(), 6, "header plus five statistics: {body}");
        fs::remove_dir_all(&dir).unwrap();
    }
}
