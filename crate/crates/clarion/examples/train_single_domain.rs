//! Train the ask/answer planner on one ask-helps domain and check what it
//! learned on the held-back test split: it should ask exactly once, then
//! present.
//!
//! Run with: `cargo run --release --example train_single_domain`

use clarion::config::TrainConfig;
use clarion::corpus::{split_dataset, synth_domain, Helpfulness, SynthProfile};
use clarion::encoder::HashingEncoder;
use clarion::environment::rollout;
use clarion::metrics::compute_report;
use clarion::policy::Policy;
use clarion::retrieval::build_index;
use clarion::trainer::train;

fn main() -> clarion::Result<()> {
    let profile = SynthProfile {
        name: "ask-helps".into(),
        vocabulary: 1,
        n_docs: 300,
        n_cases: 200,
        facet_count: 1,
        helpfulness: Helpfulness::AskHelps,
    };
    let mut dataset = synth_domain(&profile, 7)?;
    split_dataset(&mut dataset, 7)?;

    let config = TrainConfig { seed: 2024, ..TrainConfig::default() };
    println!(
        "training: {} episodes, replay {} / batch {}, lr {}, discount {}",
        config.episodes, config.buffer_capacity, config.batch_size, config.lr, config.gamma
    );
    let output = train(&[dataset.clone()], &config)?;
    let successes = output
        .records
        .iter()
        .filter(|r| r.outcome == clarion::environment::Outcome::Success)
        .count();
    println!(
        "done: {} gradient steps, {}/{} training episodes succeeded",
        output.gradient_steps,
        successes,
        output.records.len()
    );

    // Evaluate greedily (no exploration) on cases never seen in training.
    let index = build_index(dataset.documents(), config.bm25)?;
    let encoder = HashingEncoder::new(config.dim)?;
    let policy = Policy::Greedy(&output.network);
    let mut logs = Vec::new();
    for &i in &dataset.splits.test {
        logs.push(rollout(&policy, &dataset.cases()[i], &dataset, &index, &encoder, &config)?);
    }

    let report = compute_report(&policy.name(), &logs, config.max_turns)?;
    println!("\ntest split ({} episodes):", report.episodes);
    println!("  success rate         {:.3}", report.success_rate);
    println!("  average turns        {:.2}", report.avg_turns);
    println!("  recall@5 at turn 1   {:.3} (how often answering blind would work)", report.recall_at_5);
    println!("  ask rate by turn     {:?}", report.ask_rate_by_turn);
    Ok(())
}
