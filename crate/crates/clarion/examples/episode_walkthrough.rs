//! Step a single episode by hand to watch the mechanics: how retrieval
//! reacts to the conversation, what asking reveals, and how an answer
//! ends (or fails to end) the episode.
//!
//! Run with: `cargo run --example episode_walkthrough`

use clarion::config::TrainConfig;
use clarion::corpus::{Document, DomainDataset, SearchCase};
use clarion::encoder::HashingEncoder;
use clarion::environment::Episode;
use clarion::planner::Action;
use clarion::retrieval::build_index;

fn main() -> clarion::Result<()> {
    // A corpus small enough to eyeball: two fish and a whale.
    let docs = vec![
        Document::new("d1", "red fish"),
        Document::new("d2", "blue fish"),
        Document::new("d3", "green whale"),
    ];
    // The user wants the blue fish but opens with just "fish"; the color
    // is a hidden facet a clarifying question can surface.
    let case = SearchCase {
        user_id: "u1".into(),
        target_doc_id: "d2".into(),
        intent_text: "blue fish".into(),
        initial_query: "fish".into(),
        facets: vec![vec!["blue".into()]],
        ambiguous: true,
    };
    let dataset = DomainDataset::new("aquarium", docs, vec![case.clone()])?;

    let config = TrainConfig {
        max_turns: 3,
        present_count: 1,
        k: 3,
        k_ret: 10,
        dim: 8,
        ..TrainConfig::default()
    };
    let index = build_index(dataset.documents(), config.bm25)?;
    let encoder = HashingEncoder::new(config.dim)?;
    let mut episode = Episode::new(&case, &dataset, &index, &encoder, &config)?;

    println!("turn {}: query {:?}", episode.turn(), episode.retrieval().query_text);
    println!("  ranking: {:?}", ranked(&episode));
    println!("  state scores (min-max normalized): {:?}", episode.state().scores);

    // Presenting now would show the top document only (present_count = 1),
    // and "red fish" ties with "blue fish" — id order puts d1 first. Ask
    // instead; the scripted question picks the term that best splits the
    // candidates, and the simulated user reveals the facet.
    let transition = episode.step(Action::Ask)?;
    println!("\nasked; reward {}", transition.reward);
    println!("turn {}: query {:?}", episode.turn(), episode.retrieval().query_text);
    println!("  ranking: {:?}", ranked(&episode));

    // Now d2 is on top; presenting succeeds and the episode ends.
    let transition = episode.step(Action::Answer)?;
    println!("\nanswered; reward {}, terminal {}", transition.reward, transition.terminal);

    let log = episode.into_log()?;
    println!("\nepisode log:");
    println!("{}", serde_json::to_string_pretty(&log).expect("episode logs serialize"));
    Ok(())
}

fn ranked(episode: &Episode<'_>) -> Vec<(String, f64)> {
    episode
        .retrieval()
        .ranked
        .iter()
        .map(|s| (s.doc_id.clone(), (s.score * 1000.0).round() / 1000.0))
        .collect()
}
