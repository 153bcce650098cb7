//! Run the fixed baseline policies over domains with opposite asking
//! economics. No baseline wins everywhere — that gap is exactly what a
//! learned planner is for.
//!
//! Run with: `cargo run --example evaluate_baselines`

use clarion::config::TrainConfig;
use clarion::corpus::{synth_domain, DomainDataset, Helpfulness, SynthProfile};
use clarion::encoder::HashingEncoder;
use clarion::environment::rollout;
use clarion::metrics::compute_report;
use clarion::policy::Policy;
use clarion::retrieval::build_index;

fn main() -> clarion::Result<()> {
    let domains = [
        ("asking pays off", Helpfulness::AskHelps, 1),
        ("asking wastes turns", Helpfulness::AskHurts, 2),
        ("a case-by-case blend", Helpfulness::Mixed, 3),
    ];
    let config = TrainConfig::default();
    let encoder = HashingEncoder::new(config.dim)?;

    for (headline, helpfulness, vocabulary) in domains {
        let dataset: DomainDataset = synth_domain(
            &SynthProfile {
                name: helpfulness.to_string(),
                vocabulary,
                n_docs: 120,
                n_cases: 60,
                facet_count: 1,
                helpfulness,
            },
            7,
        )?;
        let index = build_index(dataset.documents(), config.bm25)?;

        println!("{} ({}):", dataset.name, headline);
        println!("  {:12} {:>7} {:>9} {:>9}", "policy", "SR@5", "avg turns", "recall@5");
        for policy in [Policy::NeverAsk, Policy::AlwaysAsk, Policy::AskFirstN(1)] {
            let mut logs = Vec::new();
            for case in dataset.cases() {
                logs.push(rollout(&policy, case, &dataset, &index, &encoder, &config)?);
            }
            let report = compute_report(&policy.name(), &logs, config.max_turns)?;
            println!(
                "  {:12} {:>7.3} {:>9.2} {:>9.3}",
                report.policy, report.success_rate, report.avg_turns, report.recall_at_5
            );
        }
        println!();
    }
    Ok(())
}
