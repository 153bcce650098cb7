//! Corpus-wide guarantees of the synthetic domain generator.
//!
//! The learning experiments lean on these being true for *every* case, not
//! just the sampled hand examples, so this suite sweeps whole domains and
//! property-tests the generator across profile space: reset ranks, facet
//! decisiveness, chatter-document pollution, and baseline consequences.

use clarion::config::TrainConfig;
use clarion::corpus::{
    split_dataset, synth_domain, DomainDataset, Helpfulness, SynthProfile, CHATTER_TEXT,
};
use clarion::encoder::HashingEncoder;
use clarion::environment::{rollout, Outcome, NOTHING_TO_ADD, REJECTION_UTTERANCE};
use clarion::policy::Policy;
use clarion::retrieval::{build_index, full_rank_of, retrieve, Bm25Params, Index};
use proptest::prelude::*;

fn profile(
    name: &str,
    helpfulness: Helpfulness,
    n_docs: usize,
    n_cases: usize,
    facet_count: usize,
) -> SynthProfile {
    SynthProfile {
        name: name.to_string(),
        vocabulary: 1,
        n_docs,
        n_cases,
        facet_count,
        helpfulness,
    }
}

fn index_of(dataset: &DomainDataset) -> Index {
    build_index(dataset.documents(), Bm25Params::default()).unwrap()
}

fn rank(index: &Index, query: &str, target: &str) -> usize {
    full_rank_of(index, query, target).unwrap()
}

fn target_score(index: &Index, query: &str, target: &str) -> f64 {
    let n = index.len();
    retrieve(index, query, n)
        .unwrap()
        .ranked
        .iter()
        .find(|s| s.doc_id == target)
        .unwrap()
        .score
}

/// Check every generated guarantee on every case of one domain. Returns a
/// description of the first violation, if any.
fn check_domain(dataset: &DomainDataset) -> Result<(), String> {
    let index = index_of(dataset);
    let n_docs = dataset.documents().len();
    let chatter: Vec<&str> = dataset
        .documents()
        .iter()
        .filter(|d| d.text == CHATTER_TEXT)
        .map(|d| d.doc_id.as_str())
        .collect();
    if chatter.len() != 6 {
        return Err(format!("expected 6 chatter documents, found {}", chatter.len()));
    }

    for case in dataset.cases() {
        let id = &case.user_id;
        let target = &case.target_doc_id;
        if chatter.contains(&target.as_str()) {
            return Err(format!("{id}: chatter document {target} used as a target"));
        }

        if !case.ambiguous {
            // Fully specified: the target must sit on top immediately.
            let r = rank(&index, &case.initial_query, target);
            if r != 1 {
                return Err(format!("{id}: unambiguous reset rank {r}, want 1"));
            }
            continue;
        }

        // Ambiguous: buried in the weak half of its group at reset ...
        let reset = rank(&index, &case.initial_query, target);
        if !(6..=10).contains(&reset) {
            return Err(format!("{id}: ambiguous reset rank {reset}, want 6..=10"));
        }

        // ... lifted to the top by the first facet, strictly improving,
        // with a BM25 score that never decreases facet over facet.
        let mut query = case.initial_query.clone();
        let mut prev_rank = reset;
        let mut prev_score = target_score(&index, &query, target);
        for (i, facet) in case.facets.iter().enumerate() {
            query = format!("{query} {}", facet.join(" "));
            let r = rank(&index, &query, target);
            let s = target_score(&index, &query, target);
            if s < prev_score {
                return Err(format!("{id}: facet {i} dropped the score {prev_score} -> {s}"));
            }
            if r > prev_rank {
                return Err(format!("{id}: facet {i} worsened the rank {prev_rank} -> {r}"));
            }
            if i == 0 && !(r == 1 && r < prev_rank) {
                return Err(format!(
                    "{id}: first facet gave rank {r} from {prev_rank}, want a strict lift to 1"
                ));
            }
            prev_rank = r;
            prev_score = s;
        }

        // Chatter pollution: once a fixed utterance enters the query, the
        // six chatter documents outscore the target past the presentation
        // cutoff, whether or not a facet was revealed afterwards.
        let first_facet = case.facets[0].join(" ");
        let polluted = [
            format!("{} {NOTHING_TO_ADD}", case.initial_query),
            format!("{} {REJECTION_UTTERANCE}", case.initial_query),
            format!("{} {REJECTION_UTTERANCE} {first_facet}", case.initial_query),
            format!("{} {first_facet} {NOTHING_TO_ADD}", case.initial_query),
        ];
        for q in &polluted {
            let r = rank(&index, q, target);
            if r <= 5 {
                return Err(format!("{id}: polluted query {q:?} leaves rank {r}, want > 5"));
            }
        }
    }

    // Chatter documents score zero against every clean reset query.
    for case in dataset.cases() {
        let result = retrieve(&index, &case.initial_query, n_docs).unwrap();
        for scored in &result.ranked {
            if chatter.contains(&scored.doc_id.as_str()) && scored.score != 0.0 {
                return Err(format!(
                    "chatter {} scores {} on reset query {:?}",
                    scored.doc_id, scored.score, case.initial_query
                ));
            }
        }
    }
    Ok(())
}

#[test]
fn guarantees_hold_at_experiment_scale() {
    for (name, helpfulness) in [
        ("ask-helps", Helpfulness::AskHelps),
        ("ask-hurts", Helpfulness::AskHurts),
        ("mixed", Helpfulness::Mixed),
    ] {
        for facets in [1, 2, 3] {
            let p = profile(name, helpfulness, 300, 200, facets);
            let dataset = synth_domain(&p, 7).unwrap();
            if let Err(msg) = check_domain(&dataset) {
                panic!("{name} with {facets} facet(s): {msg}");
            }
        }
    }
}

#[test]
fn never_ask_is_perfect_exactly_on_unambiguous_cases() {
    // Direct consequence of the reset-rank guarantees: answering
    // immediately succeeds on every unambiguous case and fails on every
    // ambiguous one, so never-ask's success rate is the unambiguous share.
    let config = TrainConfig::default();
    let dataset = synth_domain(&profile("mixed", Helpfulness::Mixed, 120, 40, 1), 3).unwrap();
    let index = index_of(&dataset);
    let encoder = HashingEncoder::new(config.dim).unwrap();

    let mut successes = 0usize;
    let mut unambiguous = 0usize;
    for case in dataset.cases() {
        let log = rollout(&Policy::NeverAsk, case, &dataset, &index, &encoder, &config).unwrap();
        if !case.ambiguous {
            unambiguous += 1;
            let ok = log.outcome == Outcome::Success
                && log.success_turn == Some(1)
                && log.turns.len() == 1;
            assert!(ok, "{}: unambiguous case should succeed at turn 1", case.user_id);
        }
        if log.outcome == Outcome::Success {
            successes += 1;
        }
    }
    assert_eq!(successes, unambiguous);
}

#[test]
fn ask_then_answer_solves_every_ambiguous_case() {
    let config = TrainConfig::default();
    let dataset = synth_domain(&profile("helps", Helpfulness::AskHelps, 120, 40, 1), 5).unwrap();
    let index = index_of(&dataset);
    let encoder = HashingEncoder::new(config.dim).unwrap();

    for case in dataset.cases() {
        let log =
            rollout(&Policy::AskFirstN(1), case, &dataset, &index, &encoder, &config).unwrap();
        assert_eq!(log.outcome, Outcome::Success, "{}", case.user_id);
        assert_eq!(log.success_turn, Some(2), "{}", case.user_id);
    }
}

#[test]
fn splits_partition_the_cases() {
    let mut dataset = synth_domain(&profile("mixed", Helpfulness::Mixed, 60, 33, 1), 9).unwrap();
    split_dataset(&mut dataset, 9).unwrap();
    let s = &dataset.splits;
    let mut all: Vec<usize> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
    all.sort_unstable();
    let expected: Vec<usize> = (0..33).collect();
    assert_eq!(all, expected, "every case lands in exactly one split");
    assert_eq!(s.valid.len(), 4);
    assert_eq!(s.test.len(), 4);
    assert_eq!(s.train.len(), 25);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The full guarantee bundle holds across profile space, not only at
    /// the sizes the experiments use.
    #[test]
    fn guarantees_hold_across_profile_space(
        helpfulness_pick in 0usize..3,
        n_docs in 16usize..140,
        n_cases in 10usize..40,
        facet_count in 1usize..4,
        vocabulary in 1u64..50,
        seed in 0u64..1000,
    ) {
        let helpfulness = match helpfulness_pick {
            0 => Helpfulness::AskHelps,
            1 => Helpfulness::AskHurts,
            _ => Helpfulness::Mixed,
        };
        let p = SynthProfile {
            name: "prop".into(),
            vocabulary,
            n_docs,
            n_cases,
            facet_count,
            helpfulness,
        };
        let dataset = synth_domain(&p, seed).unwrap();
        prop_assert_eq!(dataset.documents().len(), n_docs);
        prop_assert_eq!(dataset.cases().len(), n_cases);
        if let Err(msg) = check_domain(&dataset) {
            return Err(TestCaseError::fail(msg));
        }
    }

    /// Generation is a pure function of (profile, seed).
    #[test]
    fn generation_is_deterministic(seed in 0u64..10_000) {
        let p = profile("det", Helpfulness::Mixed, 40, 12, 2);
        let a = synth_domain(&p, seed).unwrap();
        let b = synth_domain(&p, seed).unwrap();
        prop_assert_eq!(a.documents(), b.documents());
        prop_assert_eq!(a.cases(), b.cases());
    }
}
