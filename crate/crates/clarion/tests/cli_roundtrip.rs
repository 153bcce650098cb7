//! End-to-end runs of the command-line surface, in-process: synthesize a
//! corpus, train, evaluate, analyze, and check the exit-code and manifest
//! contract on the way. Everything happens inside a temp directory.

use std::fs;
use std::path::Path;

use clarion::cli::run_from;
use clarion::environment::EpisodeLog;

fn run(args: &[&str]) -> i32 {
    run_from(std::iter::once("clarion").chain(args.iter().copied()))
}

fn read_json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    // Synthesize the three standard domains.
    let corpus = p("corpus");
    assert_eq!(
        run(&["synth", "--out", &corpus, "--docs", "80", "--cases", "24", "--facets", "1",
              "--seed", "5"]),
        0
    );
    for name in ["ask-helps", "ask-hurts", "mixed"] {
        assert!(Path::new(&corpus).join(format!("{name}.jsonl")).exists());
    }
    let synth_manifest = read_json(Path::new(&corpus).join("manifest.json"));
    assert_eq!(synth_manifest["status"], "ok");
    assert_eq!(synth_manifest["outputs"].as_array().unwrap().len(), 3);

    // Train across all three; keep it short.
    let train_dir = p("train");
    let helps = p("corpus/ask-helps.jsonl");
    let hurts = p("corpus/ask-hurts.jsonl");
    let mixed = p("corpus/mixed.jsonl");
    assert_eq!(
        run(&["train", "--domain", &helps, "--domain", &hurts, "--domain", &mixed,
              "--out", &train_dir, "--set", "episodes=120", "--set", "seed=3"]),
        0
    );
    let checkpoint = p("train/checkpoint.qnet");
    assert!(Path::new(&checkpoint).exists());
    let log_lines = fs::read_to_string(p("train/train.log.jsonl")).unwrap();
    assert_eq!(log_lines.lines().count(), 120, "one record per episode");

    // Evaluate the checkpoint and two baselines on the mixed test split.
    for (policy, out) in [("learned", "eval-learned"), ("never-ask", "eval-never"),
                          ("always-ask", "eval-always")] {
        let out = p(out);
        let mut args = vec!["eval", "--domain", &mixed, "--policy", policy, "--out", &out];
        if policy == "learned" {
            args.extend(["--checkpoint", &checkpoint]);
        }
        assert_eq!(run(&args), 0);
        let metrics = read_json(Path::new(&out).join("metrics.json"));
        assert_eq!(metrics["policy"], policy);
        assert!(metrics["episodes"].as_u64().unwrap() > 0);
    }

    // The saved episodes parse back into logs.
    let episodes_text = fs::read_to_string(p("eval-learned/episodes.jsonl")).unwrap();
    let logs: Vec<EpisodeLog> = episodes_text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(logs.len(), 3, "24 cases split 6:1:1 leave 3 test cases");

    // Analyze the three runs together.
    let analysis = p("analysis");
    let (e1, e2, e3) = (p("eval-learned/episodes.jsonl"), p("eval-never/episodes.jsonl"),
                        p("eval-always/episodes.jsonl"));
    assert_eq!(
        run(&["analyze", "--episodes", &e1, "--episodes", &e2, "--episodes", &e3,
              "--label", "learned", "--label", "never", "--label", "always",
              "--out", &analysis]),
        0
    );
    let trajectory = fs::read_to_string(Path::new(&analysis).join("trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("turn,learned,never,always\n"));
    let gains = fs::read_to_string(Path::new(&analysis).join("gains.csv")).unwrap();
    assert!(gains.starts_with("policy,turn,mean_gain\n"));
    let manifest = read_json(Path::new(&analysis).join("manifest.json"));
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn single_file_synth_matches_the_direct_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d1.jsonl");
    assert_eq!(
        run(&["synth", "--profile", "ask-helps", "--cases", "20", "--docs", "60",
              "--seed", "7", "--out", out.to_str().unwrap()]),
        0
    );
    assert!(out.exists());
    // The manifest sits beside the dataset, named after it.
    assert!(dir.path().join("d1.manifest.json").exists());

    // Asking for several kinds in single-file mode cannot work.
    let bad = dir.path().join("two.jsonl");
    assert_eq!(
        run(&["synth", "--domains", "mixed,ask-hurts", "--out", bad.to_str().unwrap()]),
        1
    );
}

#[test]
fn exit_codes_separate_usage_from_runtime_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out").to_string_lossy().into_owned();

    // Usage problems: unknown subcommand, missing required flag.
    assert_eq!(run(&["frobnicate"]), 2);
    assert_eq!(run(&["train", "--out", &out]), 2);
    assert_eq!(run(&["--help"]), 0);

    // Runtime problem: domain file does not exist. The manifest still
    // appears, recording the failure.
    assert_eq!(
        run(&["train", "--domain", "/nonexistent/d.jsonl", "--out", &out]),
        1
    );
    let manifest = read_json(dir.path().join("out/manifest.json"));
    assert_eq!(manifest["status"], "error");
    assert!(manifest["error"].as_str().unwrap().contains("/nonexistent/d.jsonl"));
}

#[test]
fn eval_split_contract_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let corpus = p("corpus");
    assert_eq!(
        run(&["synth", "--domains", "ask-hurts", "--out", &corpus, "--docs", "40",
              "--cases", "16", "--seed", "2"]),
        0
    );
    let domain = p("corpus/ask-hurts.jsonl");

    // Tagged domain, default split: only the 2 test cases run.
    let out_auto = p("eval-auto");
    assert_eq!(run(&["eval", "--domain", &domain, "--policy", "never-ask",
                     "--out", &out_auto]), 0);
    let metrics = read_json(Path::new(&out_auto).join("metrics.json"));
    assert_eq!(metrics["episodes"], 2);

    // --split all runs everything.
    let out_all = p("eval-all");
    assert_eq!(run(&["eval", "--domain", &domain, "--policy", "never-ask",
                     "--split", "all", "--out", &out_all]), 0);
    assert_eq!(read_json(Path::new(&out_all).join("metrics.json"))["episodes"], 16);

    // never-ask on ask-hurts is exact: every reset rank is 1.
    assert_eq!(read_json(Path::new(&out_all).join("metrics.json"))["success_rate"], 1.0);
    assert_eq!(read_json(Path::new(&out_all).join("metrics.json"))["avg_turns"], 1.0);

    // learned without a checkpoint is a runtime error, not a crash.
    assert_eq!(run(&["eval", "--domain", &domain, "--policy", "learned",
                     "--out", &p("eval-bad")]), 1);
}

#[test]
fn checkpoint_and_config_must_agree() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let corpus = p("corpus");
    assert_eq!(
        run(&["synth", "--domains", "mixed", "--out", &corpus, "--docs", "40",
              "--cases", "12", "--facets", "1", "--seed", "4"]),
        0
    );
    let domain = p("corpus/mixed.jsonl");
    let train_dir = p("train");
    assert_eq!(
        run(&["train", "--domain", &domain, "--out", &train_dir,
              "--set", "episodes=40", "--set", "dim=16"]),
        0
    );

    // Evaluating the dim=16 checkpoint under the default dim=64 config
    // must fail loudly instead of producing silently wrong numbers.
    let checkpoint = p("train/checkpoint.qnet");
    let code = run(&["eval", "--domain", &domain, "--checkpoint", &checkpoint,
                     "--out", &p("eval")]);
    assert_eq!(code, 1);

    // With the matching override it runs.
    assert_eq!(
        run(&["eval", "--domain", &domain, "--checkpoint", &checkpoint,
              "--set", "dim=16", "--out", &p("eval-ok")]),
        0
    );
}
