//! Swap the scripted question generator and user simulator for a chat
//! backend. The backend here is canned text, standing in for any LLM
//! endpoint: the point is the seam, not the model. Whatever implements
//! `ChatBackend` — an HTTP client, a local model, a test double — slots
//! into the same episode loop the scripted simulators use.
//!
//! Run with: `cargo run --example custom_simulators`

use std::cell::RefCell;
use std::collections::VecDeque;

use clarion::adapter::{AdapterSimulators, ChatBackend, ChatRequest};
use clarion::config::TrainConfig;
use clarion::corpus::{Document, DomainDataset, SearchCase};
use clarion::encoder::HashingEncoder;
use clarion::environment::Episode;
use clarion::planner::Action;
use clarion::retrieval::build_index;

/// Replays scripted completions and shows each prompt it was sent.
struct CannedBackend {
    replies: RefCell<VecDeque<&'static str>>,
}

impl ChatBackend for CannedBackend {
    fn complete(&self, request: &ChatRequest) -> clarion::Result<String> {
        let prompt = &request.messages.last().expect("one message").content;
        println!("--- prompt sent to the backend ---\n{prompt}\n---");
        let reply = self
            .replies
            .borrow_mut()
            .pop_front()
            .expect("a canned reply per call");
        Ok(reply.to_string())
    }
}

fn main() -> clarion::Result<()> {
    let docs = vec![
        Document::new("d1", "red fish"),
        Document::new("d2", "blue fish"),
        Document::new("d3", "green whale"),
    ];
    let case = SearchCase {
        user_id: "u1".into(),
        target_doc_id: "d2".into(),
        intent_text: "blue fish".into(),
        initial_query: "fish".into(),
        facets: vec![],
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

    // First call generates the clarifying question, second call the
    // simulated user's answer.
    let backend = CannedBackend {
        replies: RefCell::new(VecDeque::from([
            "Which color are you after?",
            "the blue one please",
        ])),
    };
    let simulators = AdapterSimulators::with_default_templates(backend);

    let mut episode = Episode::new(&case, &dataset, &index, &encoder, &config)?;
    episode.step_with(Action::Ask, &simulators)?;
    episode.step_with(Action::Answer, &simulators)?;

    let log = episode.into_log()?;
    match log.success_turn {
        Some(turn) => println!("\noutcome: {:?} at turn {turn}", log.outcome),
        None => println!("\noutcome: {:?}", log.outcome),
    }
    for record in &log.turns {
        println!(
            "  turn {}: {:?}, rank {} -> {}{}",
            record.turn,
            record.action,
            record.rank_before,
            record.rank_after,
            record
                .question
                .as_deref()
                .map(|q| format!(", asked {q:?}"))
                .unwrap_or_default()
        );
    }
    Ok(())
}
