//! Compare asking strategies as time series: per-turn ask rates, the
//! dynamic-time-warping distance between them, and the per-turn rank gain
//! that asking actually delivered.
//!
//! Run with: `cargo run --example analyze_strategies`

use clarion::config::TrainConfig;
use clarion::corpus::{synth_domain, Helpfulness, SynthProfile};
use clarion::encoder::HashingEncoder;
use clarion::environment::{rollout, EpisodeLog};
use clarion::metrics::{ask_trajectory, dtw, mean_gain_by_turn, strategy_diversity};
use clarion::policy::Policy;
use clarion::retrieval::build_index;

fn main() -> clarion::Result<()> {
    let dataset = synth_domain(
        &SynthProfile {
            name: "mixed".into(),
            vocabulary: 3,
            n_docs: 120,
            n_cases: 60,
            facet_count: 2,
            helpfulness: Helpfulness::Mixed,
        },
        7,
    )?;
    let config = TrainConfig::default();
    let index = build_index(dataset.documents(), config.bm25)?;
    let encoder = HashingEncoder::new(config.dim)?;

    let policies = [Policy::AlwaysAsk, Policy::AskFirstN(2), Policy::NeverAsk];
    let mut trajectories = Vec::new();
    let mut pools: Vec<Vec<EpisodeLog>> = Vec::new();
    for policy in &policies {
        let mut logs = Vec::new();
        for case in dataset.cases() {
            logs.push(rollout(policy, case, &dataset, &index, &encoder, &config)?);
        }
        trajectories.push(ask_trajectory(&logs, config.max_turns)?);
        pools.push(logs);
    }

    println!("per-turn ask rates (turns with no live episodes are dropped):");
    for (policy, traj) in policies.iter().zip(&trajectories) {
        let cells: Vec<String> = traj.iter().map(|r| format!("{r:.2}")).collect();
        println!("  {:12} [{}]", policy.name(), cells.join(", "));
    }

    println!("\npairwise trajectory distances:");
    for i in 0..policies.len() {
        for j in (i + 1)..policies.len() {
            println!(
                "  {:12} vs {:12} {:.3}",
                policies[i].name(),
                policies[j].name(),
                dtw(&trajectories[i], &trajectories[j])?
            );
        }
    }
    println!(
        "mean over pairs (strategy diversity): {:.3}",
        strategy_diversity(&trajectories)?
    );

    // Did asking actually move the target up the ranking?
    println!("\nmean rank gain per asked turn (None = nobody asked that turn):");
    for (policy, logs) in policies.iter().zip(&pools) {
        let gains = mean_gain_by_turn(logs, config.max_turns)?;
        let cells: Vec<String> = gains
            .iter()
            .map(|g| g.map_or("-".to_string(), |v| format!("{v:.1}")))
            .collect();
        println!("  {:12} [{}]", policy.name(), cells.join(", "));
    }
    Ok(())
}
