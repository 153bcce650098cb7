//! The `clarion` command: `synth`, `train`, `eval`, and `analyze`.
//!
//! Exit codes follow the usual convention: 0 on success, 1 when a run
//! fails (missing files, malformed data, diverged training), 2 when the
//! command line itself is invalid. Every subcommand takes an `--out`
//! directory and leaves a `manifest.json` there describing the run — the
//! exact command, SHA-256 digests of every input read and output written,
//! wall-clock duration, and the error text when the run failed. All other
//! outputs are byte-deterministic for a fixed seed and config; the
//! manifest is not (it carries the duration), so compare runs by their
//! data files, never by the manifest.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::{
    load_domain, save_domain, split_dataset, synth_domain, Helpfulness, Split, SynthProfile,
};
use crate::encoder::HashingEncoder;
use crate::environment::{rollout, EpisodeLog};
use crate::error::{Error, Result};
use crate::metrics::{ask_trajectory, compute_report, dtw, mean_gain_by_turn, pearson};
use crate::planner::QNetwork;
use crate::policy::Policy;
use crate::retrieval::build_index;
use crate::trainer::{train, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "clarion",
    version,
    about = "Train and evaluate ask-or-answer policies for conversational search"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic benchmark domains with controllable ambiguity.
    Synth(SynthArgs),
    /// Train a value network on one or more domains.
    Train(TrainArgs),
    /// Play a policy over a case split and write episode logs and metrics.
    Eval(EvalArgs),
    /// Compare asking strategies across evaluation runs.
    Analyze(AnalyzeArgs),
}

/// Built-in synthetic domain flavors. Each gets its own token vocabulary,
/// so multi-domain training cannot lean on shared surface forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainKind {
    /// Vague queries that one clarification resolves.
    AskHelps,
    /// Fully specified queries where asking only burns turns.
    AskHurts,
    /// A per-case coin flip between the two.
    Mixed,
}

impl DomainKind {
    fn name(self) -> &'static str {
        match self {
            DomainKind::AskHelps => "ask-helps",
            DomainKind::AskHurts => "ask-hurts",
            DomainKind::Mixed => "mixed",
        }
    }

    fn helpfulness(self) -> Helpfulness {
        match self {
            DomainKind::AskHelps => Helpfulness::AskHelps,
            DomainKind::AskHurts => Helpfulness::AskHurts,
            DomainKind::Mixed => Helpfulness::Mixed,
        }
    }

    /// Distinct vocabulary index per flavor.
    fn vocabulary(self) -> u64 {
        match self {
            DomainKind::AskHelps => 1,
            DomainKind::AskHurts => 2,
            DomainKind::Mixed => 3,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory with one `<domain>.jsonl` per kind, or a single
    /// `.jsonl` path when exactly one kind is requested. Created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Which domains to generate.
    #[arg(long, alias = "profile", value_enum, value_delimiter = ',',
          default_values_t = [DomainKind::AskHelps, DomainKind::AskHurts, DomainKind::Mixed])]
    domains: Vec<DomainKind>,
    /// Documents per domain.
    #[arg(long, default_value_t = 200)]
    docs: usize,
    /// Search cases per domain.
    #[arg(long, default_value_t = 80)]
    cases: usize,
    /// Hidden intent facets per ambiguous case.
    #[arg(long, default_value_t = 2)]
    facets: usize,
    /// Base vocabulary index; kinds use base, base+1, base+2. Use a fresh
    /// base to synthesize held-out domains that share no tokens with the
    /// defaults.
    #[arg(long, default_value_t = 1)]
    vocab_base: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Domain file; repeat the flag to train across several domains.
    #[arg(long = "domain", required = true)]
    domains: Vec<PathBuf>,
    /// Output directory for checkpoint.qnet, train.log.jsonl, manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline config override (key=value); applied after --config, repeatable.
    #[arg(long = "set")]
    sets: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyKind {
    /// Greedy decisions from a trained checkpoint.
    Learned,
    AlwaysAsk,
    NeverAsk,
    /// Ask for the first --ask-turns turns, then answer.
    AskFirstN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    /// Test split when the domain is tagged, all cases otherwise.
    Auto,
    Train,
    Valid,
    Test,
    All,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Domain file to evaluate on.
    #[arg(long)]
    domain: PathBuf,
    /// Trained checkpoint; required for --policy learned.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PolicyKind::Learned)]
    policy: PolicyKind,
    /// Turns the ask-first-n baseline asks before answering.
    #[arg(long = "ask-turns", default_value_t = 1)]
    ask_turns: usize,
    #[arg(long, value_enum, default_value_t = SplitArg::Auto)]
    split: SplitArg,
    /// Output directory for episodes.jsonl, metrics.json, manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// key=value config file (must match how the checkpoint was trained).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline config override (key=value), repeatable.
    #[arg(long = "set")]
    sets: Vec<String>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// episodes.jsonl from an eval run; repeat the flag to compare runs.
    #[arg(long = "episodes", required = true)]
    episodes: Vec<PathBuf>,
    /// Label per input, in the same order (defaults to the file stems).
    #[arg(long = "label")]
    labels: Vec<String>,
    /// Output directory for trajectory.csv, gains.csv, manifest.json.
    #[arg(long)]
    out: PathBuf,
    /// Horizon for the per-turn series.
    #[arg(long = "max-turns", default_value_t = 10)]
    max_turns: usize,
}

/// Run the CLI on explicit arguments (the first is the program name) and
/// return the process exit code. Factored out of `main` so tests can drive
/// the whole binary in-process.
pub fn run_from<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successful terminations, not errors.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    dispatch(cli)
}

fn dispatch(cli: Cli) -> i32 {
    // Single-file synth puts `<stem>.manifest.json` beside the dataset;
    // every directory-mode command writes `<out>/manifest.json`.
    let (name, manifest_path) = match &cli.command {
        Command::Synth(a) if a.out.extension().is_some_and(|e| e == "jsonl") => {
            ("synth", a.out.with_extension("manifest.json"))
        }
        Command::Synth(a) => ("synth", a.out.join("manifest.json")),
        Command::Train(a) => ("train", a.out.join("manifest.json")),
        Command::Eval(a) => ("eval", a.out.join("manifest.json")),
        Command::Analyze(a) => ("analyze", a.out.join("manifest.json")),
    };
    let mut manifest = ManifestBuilder::new(name);
    let result = match &cli.command {
        Command::Synth(a) => run_synth(a, &mut manifest),
        Command::Train(a) => run_train(a, &mut manifest),
        Command::Eval(a) => run_eval(a, &mut manifest),
        Command::Analyze(a) => run_analyze(a, &mut manifest),
    };
    if let Err(e) = manifest.write(&manifest_path, result.as_ref().err()) {
        eprintln!("warning: could not write manifest: {e}");
    }
    match result {
        Ok(summary) => {
            // Command outputs live in files; the summary is informational,
            // so a closed stdout (`clarion ... | head`) must not fail the
            // command or panic the way `println!` would.
            let _ = writeln!(io::stdout(), "{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

/// Load the config stack: defaults, then the file, then --set overrides.
fn resolve_config(config: &Option<PathBuf>, sets: &[String]) -> Result<TrainConfig> {
    let mut cfg = match config {
        Some(path) => TrainConfig::from_file(path)?,
        None => TrainConfig::default(),
    };
    for s in sets {
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{s}'")))?;
        cfg.set(key.trim(), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_synth(args: &SynthArgs, manifest: &mut ManifestBuilder) -> Result<String> {
    let mut kinds = Vec::new();
    for &k in &args.domains {
        if !kinds.contains(&k) {
            kinds.push(k);
        }
    }
    let single_file = args.out.extension().is_some_and(|e| e == "jsonl");
    if single_file && kinds.len() != 1 {
        return Err(Error::Config(format!(
            "a single .jsonl output holds one domain, but {} kinds were requested",
            kinds.len()
        )));
    }
    if single_file {
        if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
    } else {
        create_dir(&args.out)?;
    }
    let mut lines = Vec::new();
    for kind in kinds {
        // Named by kind in directory mode, by file stem in single-file mode,
        // so a file round-trips through load_domain under the same name.
        let (path, name) = if single_file {
            let stem = args.out.file_stem().map(|s| s.to_string_lossy().to_string());
            (args.out.clone(), stem.unwrap_or_else(|| kind.name().to_string()))
        } else {
            (args.out.join(format!("{}.jsonl", kind.name())), kind.name().to_string())
        };
        let profile = SynthProfile {
            name,
            vocabulary: args.vocab_base + (kind.vocabulary() - 1),
            n_docs: args.docs,
            n_cases: args.cases,
            facet_count: args.facets,
            helpfulness: kind.helpfulness(),
        };
        let mut dataset = synth_domain(&profile, args.seed)?;
        split_dataset(&mut dataset, args.seed)?;
        save_domain(&dataset, &path)?;
        manifest.record_output(&path)?;
        lines.push(format!(
            "wrote {}: {} docs, {} cases (train/valid/test = {}/{}/{})",
            path.display(),
            dataset.documents().len(),
            dataset.cases().len(),
            dataset.splits.train.len(),
            dataset.splits.valid.len(),
            dataset.splits.test.len(),
        ));
    }
    Ok(lines.join("\n"))
}

fn run_train(args: &TrainArgs, manifest: &mut ManifestBuilder) -> Result<String> {
    if let Some(path) = &args.config {
        manifest.record_input(path)?;
    }
    let cfg = resolve_config(&args.config, &args.sets)?;
    let mut datasets = Vec::new();
    for path in &args.domains {
        manifest.record_input(path)?;
        datasets.push(load_domain(path)?);
    }

    let output = train(&datasets, &cfg)?;
    create_dir(&args.out)?;

    let checkpoint = args.out.join("checkpoint.qnet");
    output.network.save(&checkpoint)?;
    manifest.record_output(&checkpoint)?;

    let log_path = args.out.join("train.log.jsonl");
    let mut log_text = String::new();
    for record in &output.records {
        log_text.push_str(&serde_json::to_string(record)?);
        log_text.push('\n');
    }
    write_file(&log_path, &log_text)?;
    manifest.record_output(&log_path)?;

    let successes = output
        .records
        .iter()
        .filter(|r| matches!(r.outcome, crate::environment::Outcome::Success))
        .count();
    Ok(format!(
        "trained {} episodes ({} gradient steps) on {} domain(s); {} successes; checkpoint at {}",
        output.records.len(),
        output.gradient_steps,
        datasets.len(),
        successes,
        checkpoint.display(),
    ))
}

fn run_eval(args: &EvalArgs, manifest: &mut ManifestBuilder) -> Result<String> {
    if let Some(path) = &args.config {
        manifest.record_input(path)?;
    }
    let cfg = resolve_config(&args.config, &args.sets)?;
    manifest.record_input(&args.domain)?;
    let dataset = load_domain(&args.domain)?;
    let index = build_index(dataset.documents(), cfg.bm25)?;
    let encoder = HashingEncoder::new(cfg.dim)?;

    let network = match (args.policy, &args.checkpoint) {
        (PolicyKind::Learned, Some(path)) => {
            manifest.record_input(path)?;
            let net = QNetwork::load(path)?;
            if net.d() != cfg.dim || net.k() != cfg.k {
                return Err(Error::Config(format!(
                    "checkpoint was trained with dim={} k={}, but the config says dim={} k={}",
                    net.d(),
                    net.k(),
                    cfg.dim,
                    cfg.k
                )));
            }
            Some(net)
        }
        (PolicyKind::Learned, None) => {
            return Err(Error::Config(
                "--policy learned needs a --checkpoint".into(),
            ));
        }
        _ => None,
    };
    let policy = match args.policy {
        PolicyKind::Learned => Policy::Greedy(network.as_ref().expect("loaded above")),
        PolicyKind::AlwaysAsk => Policy::AlwaysAsk,
        PolicyKind::NeverAsk => Policy::NeverAsk,
        PolicyKind::AskFirstN => Policy::AskFirstN(args.ask_turns),
    };

    let pool: Vec<&crate::corpus::SearchCase> = match args.split {
        SplitArg::All => dataset.cases().iter().collect(),
        SplitArg::Auto => {
            if dataset.splits.is_empty() {
                dataset.cases().iter().collect()
            } else {
                dataset.split_cases(Split::Test)
            }
        }
        tagged => {
            if dataset.splits.is_empty() {
                return Err(Error::Config(
                    "domain has no split tags; evaluate with --split all".into(),
                ));
            }
            let split = match tagged {
                SplitArg::Train => Split::Train,
                SplitArg::Valid => Split::Valid,
                SplitArg::Test => Split::Test,
                SplitArg::Auto | SplitArg::All => unreachable!("handled above"),
            };
            dataset.split_cases(split)
        }
    };
    if pool.is_empty() {
        return Err(Error::NoCases);
    }

    let mut logs = Vec::with_capacity(pool.len());
    for case in &pool {
        logs.push(rollout(&policy, case, &dataset, &index, &encoder, &cfg)?);
    }

    create_dir(&args.out)?;
    let episodes_path = args.out.join("episodes.jsonl");
    let mut episodes_text = String::new();
    for log in &logs {
        episodes_text.push_str(&serde_json::to_string(log)?);
        episodes_text.push('\n');
    }
    write_file(&episodes_path, &episodes_text)?;
    manifest.record_output(&episodes_path)?;

    let report = compute_report(&policy.name(), &logs, cfg.max_turns)?;
    let metrics_path = args.out.join("metrics.json");
    write_file(
        &metrics_path,
        &format!("{}\n", serde_json::to_string_pretty(&report)?),
    )?;
    manifest.record_output(&metrics_path)?;

    Ok(format!(
        "evaluated {} episodes with {}: success rate {:.3}, avg turns {:.2}, recall@5 {:.3}",
        report.episodes, report.policy, report.success_rate, report.avg_turns, report.recall_at_5,
    ))
}

/// What `analyze` prints: labels in input order, the pairwise
/// trajectory-distance matrix, its mean over unordered pairs (when there
/// are at least two runs), and each run's correlation between per-turn ask
/// rate and per-turn mean rank gain (when it is defined).
#[derive(Debug, Serialize)]
struct AnalysisSummary {
    labels: Vec<String>,
    pairwise_dtw: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    diversity: Option<f64>,
    gain_ask_correlation: Vec<Option<f64>>,
}

fn run_analyze(args: &AnalyzeArgs, manifest: &mut ManifestBuilder) -> Result<String> {
    if args.max_turns == 0 {
        return Err(Error::Config("--max-turns must be positive".into()));
    }
    if !args.labels.is_empty() && args.labels.len() != args.episodes.len() {
        return Err(Error::Config(format!(
            "{} labels for {} episode files",
            args.labels.len(),
            args.episodes.len()
        )));
    }
    let labels: Vec<String> = if args.labels.is_empty() {
        args.episodes
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string())
            })
            .collect()
    } else {
        args.labels.clone()
    };
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::Config(format!(
                "duplicate label '{a}'; disambiguate with --label"
            )));
        }
    }

    let mut trajectories = Vec::new();
    let mut gains = Vec::new();
    for path in &args.episodes {
        manifest.record_input(path)?;
        let logs = load_episode_logs(path)?;
        trajectories.push(ask_trajectory(&logs, args.max_turns)?);
        gains.push(mean_gain_by_turn(&logs, args.max_turns)?);
    }

    create_dir(&args.out)?;

    // trajectory.csv: one row per turn, one ask-rate column per run; cells
    // beyond a run's horizon stay empty.
    let horizon = trajectories.iter().map(Vec::len).max().unwrap_or(0);
    let mut csv = format!("turn,{}\n", labels.join(","));
    for t in 0..horizon {
        csv.push_str(&(t + 1).to_string());
        for traj in &trajectories {
            csv.push(',');
            if let Some(rate) = traj.get(t) {
                csv.push_str(&rate.to_string());
            }
        }
        csv.push('\n');
    }
    let trajectory_path = args.out.join("trajectory.csv");
    write_file(&trajectory_path, &csv)?;
    manifest.record_output(&trajectory_path)?;

    // gains.csv: long form; mean_gain is empty where no episode asked.
    let mut csv = String::from("policy,turn,mean_gain\n");
    for (label, per_turn) in labels.iter().zip(&gains) {
        for (t, gain) in per_turn.iter().enumerate() {
            match gain {
                Some(g) => csv.push_str(&format!("{label},{},{g}\n", t + 1)),
                None => csv.push_str(&format!("{label},{},\n", t + 1)),
            }
        }
    }
    let gains_path = args.out.join("gains.csv");
    write_file(&gains_path, &csv)?;
    manifest.record_output(&gains_path)?;

    let n = trajectories.len();
    let mut matrix = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dtw(&trajectories[i], &trajectories[j])?;
            matrix[i][j] = d;
            matrix[j][i] = d;
            total += d;
            pairs += 1;
        }
    }
    let diversity = (pairs > 0).then(|| total / pairs as f64);

    let gain_ask_correlation = trajectories
        .iter()
        .zip(&gains)
        .map(|(traj, per_turn)| {
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for (t, gain) in per_turn.iter().enumerate() {
                if let (Some(&rate), Some(g)) = (traj.get(t), gain) {
                    xs.push(rate);
                    ys.push(*g);
                }
            }
            if xs.len() < 2 {
                return None;
            }
            pearson(&xs, &ys).ok()
        })
        .collect();

    let summary = AnalysisSummary {
        labels,
        pairwise_dtw: matrix,
        diversity,
        gain_ask_correlation,
    };
    Ok(serde_json::to_string_pretty(&summary)?)
}

/// Parse an episodes.jsonl file (one episode log per line).
fn load_episode_logs(path: &Path) -> Result<Vec<EpisodeLog>> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;
    let mut logs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        logs.push(
            serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                path: display.clone(),
                line: i + 1,
                msg: e.to_string(),
            })?,
        );
    }
    if logs.is_empty() {
        return Err(Error::NoCases);
    }
    Ok(logs)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

/// Accumulates the run description written to `<out>/manifest.json`.
struct ManifestBuilder {
    command: String,
    started: Instant,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    duration_ms: u128,
}

impl ManifestBuilder {
    fn new(command: &str) -> ManifestBuilder {
        ManifestBuilder {
            command: command.to_string(),
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
        Ok(())
    }

    fn record_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
        Ok(())
    }

    /// Write the manifest, marking the run failed when `error` is given.
    /// Called on success and on failure alike so a crash scene still says
    /// what was read and written.
    fn write(self, path: &Path, error: Option<&Error>) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            status: if error.is_some() { "error" } else { "ok" }.to_string(),
            error: error.map(|e| e.to_string()),
            inputs: self.inputs,
            outputs: self.outputs,
            duration_ms: self.started.elapsed().as_millis(),
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        write_file(path, &format!("{}\n", serde_json::to_string_pretty(&manifest)?))
    }
}
