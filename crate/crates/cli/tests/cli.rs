use std::path::Path;
use std::process::{Command, Output};

use pacroute_testkit::*;
use pacroute_core::simulation::Scenario;
use pacroute_core::{CalibrationRecord, RoutingDecision, ThresholdPolicy};
use pacroute_cli::RunReport;

fn pacroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pacroute"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn calibrate(dir: &Path, records: &Path, extra: &[&str]) -> (std::process::Output, std::path::PathBuf) {
    let policy = dir.join("policy.json");
    let mut args = vec!["calibrate", "--records", p(records), "--output", p(&policy)];
    args.extend_from_slice(extra);
    (pacroute(&args), policy)
}

#[test]
fn score_empty_input_needs_no_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    std::fs::write(&input, "").unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[nonthinking]\nbase_url = \"http://127.0.0.1:9\"\nmodel_name = \"a\"\n[thinking]\nbase_url = \"http://127.0.0.1:9\"\nmodel_name = \"b\"\n").unwrap();
    let out_path = dir.path().join("out.jsonl");
    let out = pacroute(&["score", "--input", p(&input), "--config", p(&cfg), "--output", p(&out_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&out_path).unwrap(), "");
    assert!(dir.path().join("out.manifest.json").exists());
}

#[test]
fn score_is_byte_identical_from_warm_cache() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    std::fs::write(&input, "{\"id\":\"a\",\"prompt\":\"6*7\",\"gold\":\"42\"}\n{\"id\":\"b\",\"prompt\":\"7*6\"}\n").unwrap();
    let server = FakeEndpoint::chat("0.9");
    let cfg = server.config(dir.path());
    let (first, second) = (dir.path().join("1.jsonl"), dir.path().join("2.jsonl"));
    let out = pacroute(&["score", "--input", p(&input), "--config", p(&cfg), "--output", p(&first)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(server.requests.load(std::sync::atomic::Ordering::SeqCst), 2);
    drop(server);

    let out = pacroute(&["score", "--input", p(&input), "--config", p(&cfg), "--output", p(&second)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());

    let records = pacroute_gateway::read_records(&first).unwrap();
    // mean token probability of exp(-0.1) and exp(-0.3)
    let want = 1.0 - ((-0.1f64).exp() + (-0.3f64).exp()) / 2.0;
    assert!((records[0].uncertainty - want).abs() < 1e-12);
    assert_eq!(records[0].gold.as_deref(), Some("42"));
    assert_eq!(records[1].cheap_answer, "42");
}

#[test]
fn verbalized_scoring_flags_unparseable_trials() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    std::fs::write(&input, "{\"id\":\"a\",\"prompt\":\"q\"}\n").unwrap();
    let server = FakeEndpoint::chat("I think 0.8");
    let cfg = server.config(dir.path());
    let out_path = dir.path().join("out.jsonl");
    let out = pacroute(&[
        "score", "--input", p(&input), "--config", p(&cfg), "--output", p(&out_path), "--score-kind", "verbalized", "--trials", "3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rec = &pacroute_gateway::read_records(&out_path).unwrap()[0];
    assert_eq!(rec.uncertainty, 1.0);
    for k in 0..3 {
        assert!(rec.flags.contains(&format!("verbalized:unparseable:{k}")), "{:?}", rec.flags);
    }
}

#[test]
fn endpoint_and_config_failures_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    std::fs::write(&input, "{\"id\":\"a\",\"prompt\":\"q\"}\n").unwrap();
    let server = FakeEndpoint::start(Box::new(|_| (503, "overloaded".into())));
    let cfg = server.config(dir.path());
    let out_path = dir.path().join("out.jsonl");
    let out = pacroute(&["score", "--input", p(&input), "--config", p(&cfg), "--output", p(&out_path)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`a`"));

    std::fs::write(&cfg, "[nonthinking]\nmodel_name = 1\n").unwrap();
    let out = pacroute(&["score", "--input", p(&input), "--config", p(&cfg), "--output", p(&out_path)]);
    assert_eq!(code(&out), 4);
}

#[test]
fn split_preset_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let lines: String = (0..600).map(|i| format!("{{\"id\":\"q{i}\",\"prompt\":\"p{i}\"}}\n")).collect();
    std::fs::write(&input, lines).unwrap();
    let (cal, test) = (dir.path().join("cal.jsonl"), dir.path().join("test.jsonl"));
    let out = pacroute(&["split", "--input", p(&input), "--preset", "math500", "--seed", "3", "--cal-out", p(&cal), "--test-out", p(&test)]);
    assert_eq!(code(&out), 0);
    assert_eq!(pacroute_gateway::read_input(&cal).unwrap().len(), 300);
    assert_eq!(pacroute_gateway::read_input(&test).unwrap().len(), 200);
    let out = pacroute(&["split", "--input", p(&input), "--cal-size", "500", "--test-size", "500", "--cal-out", p(&cal), "--test-out", p(&test)]);
    assert_eq!(code(&out), 4);
}

#[test]
fn calibrate_prints_curve_and_writes_policy() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("cal.jsonl");
    write_records(&records, &synthetic_records(&Scenario::logistic_beta(), 500, 11, true));
    let (out, policy_path) = calibrate(dir.path(), &records, &["--epsilon", "0.08", "--alpha", "0.05", "--pi", "0.5", "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table = stdout(&out);
    assert!(table.contains("<- threshold"));
    let rows = table
        .lines()
        .filter(|l| l.split_whitespace().take(3).filter(|t| t.parse::<f64>().is_ok()).count() == 3)
        .count();
    assert_eq!(rows, 500);
    let policy = ThresholdPolicy::from_json(&std::fs::read_to_string(&policy_path).unwrap()).unwrap();
    assert!(policy.feasible && policy.threshold > 0.0);
    assert_eq!(policy.m, 1000);
    assert_eq!(policy.seed, 5);

    let manifest: serde_json::Value = read(&dir.path().join("policy.manifest.json"));
    assert_eq!(manifest["command"], "calibrate");
    assert_eq!(manifest["seeds"]["plan"], 5);
    assert_eq!(manifest["args"]["budget"]["epsilon"], 0.08);
    assert_eq!(manifest["policy_digest"], manifest["outputs"][0]["sha256"]);
    assert!(!std::fs::read_to_string(dir.path().join("policy.manifest.json")).unwrap().contains("time"));
}

#[test]
fn calibrate_generous_budget_takes_the_largest_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("cal.jsonl");
    let recs = synthetic_records(&Scenario::logistic_beta(), 300, 12, true);
    let max_u = recs.iter().map(|r| r.uncertainty).fold(0.0, f64::max);
    write_records(&records, &recs);
    let (out, policy_path) = calibrate(dir.path(), &records, &["--epsilon", "1.0"]);
    assert_eq!(code(&out), 0);
    let policy: ThresholdPolicy = read(&policy_path);
    assert_eq!(policy.threshold, max_u);
}

#[test]
fn infeasible_budget_exits_2_and_still_writes_policy() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("cal.jsonl");
    write_records(&records, &synthetic_records(&Scenario::logistic_beta(), 200, 13, true));
    let (out, policy_path) = calibrate(dir.path(), &records, &["--epsilon", "0.03", "--bound", "hoeffding"]);
    assert_eq!(code(&out), 2);
    let policy: ThresholdPolicy = read(&policy_path);
    assert!(!policy.feasible);
    assert_eq!(policy.threshold, 0.0);

    // an infeasible policy sends everything to the expert
    let test = dir.path().join("test.jsonl");
    write_records(&test, &synthetic_records(&Scenario::logistic_beta(), 50, 14, true));
    let (decisions, report) = (dir.path().join("d.jsonl"), dir.path().join("r.json"));
    let out = pacroute(&["route", "--records", p(&test), "--policy", p(&policy_path), "--decisions-out", p(&decisions), "--report-out", p(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: RunReport = read(&report);
    assert_eq!(report.ecp_percent, 100.0);
    assert_eq!(report.empirical_risk, Some(0.0));
}

#[test]
fn calibrate_without_labels_or_endpoint_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("cal.jsonl");
    write_records(&records, &synthetic_records(&Scenario::logistic_beta(), 50, 15, false));
    let (out, _) = calibrate(dir.path(), &records, &["--epsilon", "0.08"]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn calibrate_fetches_missing_labels_from_the_expert() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("cal.jsonl");
    let mut recs = synthetic_records(&Scenario::logistic_beta(), 40, 16, false);
    for (i, r) in recs.iter_mut().enumerate() {
        r.prompt = Some(format!("prompt {i}"));
        r.gold = Some("42".into());
        r.cheap_answer = if i % 4 == 0 { "41".into() } else { "42".into() };
    }
    write_records(&records, &recs);
    let server = FakeEndpoint::chat("0.5");
    let cfg = server.config(dir.path());
    let labeled = dir.path().join("labeled.jsonl");
    let (out, _) = calibrate(dir.path(), &records, &["--epsilon", "0.5", "--config", p(&cfg), "--labels-out", p(&labeled)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let labeled = pacroute_gateway::read_records(&labeled).unwrap();
    let fetched: Vec<&CalibrationRecord> = labeled.iter().filter(|r| r.loss.is_some()).collect();
    assert!(!fetched.is_empty());
    assert_eq!(server.requests.load(std::sync::atomic::Ordering::SeqCst), fetched.len());
    for r in fetched {
        // the expert says 42, so only the wrong cheap answers lose
        let want = if r.cheap_answer == "41" { 1.0 } else { 0.0 };
        assert_eq!(r.loss, Some(want), "{}", r.id);
    }
}

#[test]
fn route_and_evaluate_agree_with_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let s = Scenario::logistic_beta();
    let (cal, test) = (dir.path().join("cal.jsonl"), dir.path().join("test.jsonl"));
    write_records(&cal, &synthetic_records(&s, 500, 21, true));
    let test_recs = synthetic_records(&s, 300, 22, true);
    write_records(&test, &test_recs);
    let (out, policy_path) = calibrate(dir.path(), &cal, &["--epsilon", "0.08"]);
    assert_eq!(code(&out), 0);
    let policy: ThresholdPolicy = read(&policy_path);

    let (decisions_path, report_path) = (dir.path().join("d.jsonl"), dir.path().join("r.json"));
    let out = pacroute(&["route", "--records", p(&test), "--policy", p(&policy_path), "--decisions-out", p(&decisions_path), "--report-out", p(&report_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let decisions = pacroute_gateway::read_decisions(&decisions_path).unwrap();
    let report: RunReport = read(&report_path);

    let n = test_recs.len() as f64;
    let expert: Vec<bool> = test_recs.iter().map(|r| r.uncertainty >= policy.threshold).collect();
    let ecp = 100.0 * expert.iter().filter(|e| **e).count() as f64 / n;
    let ratio: f64 = test_recs
        .iter()
        .zip(&expert)
        .map(|(r, e)| (r.cheap_tokens as f64 + if *e { r.expert_tokens.unwrap() as f64 } else { 0.0 }) / r.expert_tokens.unwrap() as f64)
        .sum::<f64>()
        / n;
    let risk: f64 = test_recs.iter().zip(&expert).filter(|(_, e)| !**e).map(|(r, _)| r.loss.unwrap()).sum::<f64>() / n;
    assert_eq!(decisions.len(), test_recs.len());
    for (d, (r, e)) in decisions.iter().zip(test_recs.iter().zip(&expert)) {
        assert_eq!((&d.id, d.used_expert), (&r.id, *e));
        let want = if *e { r.expert_answer.as_ref().unwrap() } else { &r.cheap_answer };
        assert_eq!(&d.final_answer, want);
    }
    assert!((report.ecp_percent - ecp).abs() < 1e-9);
    assert!((report.stp_percent.unwrap() - 100.0 * (1.0 - ratio)).abs() < 1e-9);
    assert!((report.empirical_risk.unwrap() - risk).abs() < 1e-12);
    assert_eq!(report.threshold, Some(policy.threshold));

    let eval_path = dir.path().join("eval.json");
    let out = pacroute(&["evaluate", "--decisions", p(&decisions_path), "--records", p(&test), "--output", p(&eval_path)]);
    assert_eq!(code(&out), 0);
    let eval: RunReport = read(&eval_path);
    assert_eq!((eval.ecp_percent, eval.stp_percent, eval.empirical_risk), (report.ecp_percent, report.stp_percent, report.empirical_risk));
}

#[test]
fn route_refuses_a_score_kind_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let s = Scenario::logistic_beta();
    let (cal, test) = (dir.path().join("cal.jsonl"), dir.path().join("test.jsonl"));
    write_records(&cal, &synthetic_records(&s, 200, 31, true));
    let mut test_recs = synthetic_records(&s, 20, 32, true);
    for r in &mut test_recs {
        r.score_kind = Some(pacroute_core::ScoreKind::Verbalized);
    }
    write_records(&test, &test_recs);
    let (_, policy_path) = calibrate(dir.path(), &cal, &["--epsilon", "0.1"]);
    let decisions = dir.path().join("d.jsonl");
    let out = pacroute(&["route", "--records", p(&test), "--policy", p(&policy_path), "--decisions-out", p(&decisions), "--report-out", p(&dir.path().join("r.json"))]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("logits"));
    assert!(!decisions.exists());
}

#[test]
fn route_fetches_expert_answers_live() {
    let dir = tempfile::tempdir().unwrap();
    let s = Scenario::logistic_beta();
    let cal = dir.path().join("cal.jsonl");
    write_records(&cal, &synthetic_records(&s, 300, 41, true));
    let (_, policy_path) = calibrate(dir.path(), &cal, &["--epsilon", "0.08"]);
    let policy: ThresholdPolicy = read(&policy_path);
    let test = dir.path().join("test.jsonl");
    let mut recs = synthetic_records(&s, 30, 42, false);
    for r in &mut recs {
        r.prompt = Some(format!("about {}", r.id));
        r.expert_tokens = None;
    }
    write_records(&test, &recs);
    let server = FakeEndpoint::chat("0.5");
    let cfg = server.config(dir.path());
    let (decisions_path, report_path) = (dir.path().join("d.jsonl"), dir.path().join("r.json"));
    let out = pacroute(&["route", "--records", p(&test), "--policy", p(&policy_path), "--config", p(&cfg), "--decisions-out", p(&decisions_path), "--report-out", p(&report_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let decisions: Vec<RoutingDecision> = pacroute_gateway::read_decisions(&decisions_path).unwrap();
    let n_expert = recs.iter().filter(|r| r.uncertainty >= policy.threshold).count();
    assert_eq!(server.requests.load(std::sync::atomic::Ordering::SeqCst), n_expert);
    assert!(decisions.iter().filter(|d| d.used_expert).all(|d| d.final_answer == "42"));
    let report: RunReport = read(&report_path);
    // cheap-routed items have neither expert tokens nor losses
    assert_eq!((report.stp_percent, report.empirical_risk), (None, None));
}

#[test]
fn transductive_label_run() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("data.jsonl");
    let recs = synthetic_records(&Scenario::logistic_beta(), 200, 51, true);
    write_records(&records, &recs);
    let (labels, policy) = (dir.path().join("labels.jsonl"), dir.path().join("policy.json"));
    let out = pacroute(&["label", "--records", p(&records), "--epsilon", "0.08", "--seed", "9", "--output", p(&labels), "--policy-out", p(&policy)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let labels: Vec<pacroute_core::Label> = pacroute_gateway::parse_jsonl(&std::fs::read_to_string(&labels).unwrap()).unwrap();
    let policy: ThresholdPolicy = read(&policy);
    assert_eq!(labels.len(), 200);
    for (l, r) in labels.iter().zip(&recs) {
        assert_eq!(l.from_expert, r.uncertainty >= policy.threshold);
        assert_eq!(&l.text, if l.from_expert { r.expert_answer.as_ref().unwrap() } else { &r.cheap_answer });
    }
}

#[test]
fn simulate_single_rep_skips_assertions() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("sim.json");
    let out = pacroute(&["simulate", "--reps", "1", "--output", p(&report)]);
    assert_eq!(code(&out), 0);
    let r: serde_json::Value = read(&report);
    assert_eq!(r["assertions_skipped"], true);
    assert_eq!(r["reps"], 1);
    assert!(stdout(&out).contains("not enforced"));
}

#[test]
fn simulate_rejects_invalid_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, pacroute_cli::commands::DEFAULT_SCENARIO.replace("pi = 1.0", "pi = 1.5")).unwrap();
    assert_eq!(code(&pacroute(&["simulate", "--scenario", p(&bad)])), 4);
    std::fs::write(&bad, "n_cal = \"many\"").unwrap();
    assert_eq!(code(&pacroute(&["simulate", "--scenario", p(&bad)])), 4);
}

#[test]
fn hoeffding_accepts_no_more_than_clt() {
    let dir = tempfile::tempdir().unwrap();
    let mean_threshold = |bound: &str| {
        let path = dir.path().join(format!("{bound}.json"));
        pacroute(&["simulate", "--bound", bound, "--reps", "200", "--output", p(&path)]);
        read::<serde_json::Value>(&path)["mean_threshold"].as_f64().unwrap()
    };
    let (h, c) = (mean_threshold("hoeffding"), mean_threshold("clt"));
    assert!(h <= c, "hoeffding {h} vs clt {c}");
}

#[test]
fn bundled_scenario_passes_at_full_size() {
    let out = pacroute(&["simulate"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("cal.jsonl");
    write_records(&records, &synthetic_records(&Scenario::logistic_beta(), 300, 4, true));
    let policy = |name: &str| {
        let path = dir.path().join(name);
        let out = pacroute(&["calibrate", "--records", p(&records), "--epsilon", "0.1", "--seed", "9", "--output", p(&path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(&path).unwrap(), out.stdout)
    };
    assert_eq!(policy("a.json"), policy("b.json"));
    let simulate = |name: &str| {
        let path = dir.path().join(name);
        let out = pacroute(&["simulate", "--reps", "50", "--seed", "3", "--output", p(&path)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(&path).unwrap()
    };
    assert_eq!(simulate("a.sim.json"), simulate("b.sim.json"));
}
