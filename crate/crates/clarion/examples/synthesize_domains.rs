//! Generate the three synthetic domain flavors and poke at what makes
//! them different: reset ranks, facet decisiveness, and the chatter
//! documents that make wasted questions costly.
//!
//! Run with: `cargo run --example synthesize_domains`

use clarion::corpus::{split_dataset, synth_domain, Helpfulness, SynthProfile, CHATTER_TEXT};
use clarion::retrieval::{build_index, full_rank_of, Bm25Params};

fn main() -> clarion::Result<()> {
    for (vocabulary, helpfulness) in [
        (1, Helpfulness::AskHelps),
        (2, Helpfulness::AskHurts),
        (3, Helpfulness::Mixed),
    ] {
        let profile = SynthProfile {
            name: helpfulness.to_string(),
            vocabulary,
            n_docs: 80,
            n_cases: 24,
            facet_count: 1,
            helpfulness,
        };
        let mut dataset = synth_domain(&profile, 7)?;
        split_dataset(&mut dataset, 7)?;

        let ambiguous = dataset.cases().iter().filter(|c| c.ambiguous).count();
        let chatter = dataset
            .documents()
            .iter()
            .filter(|d| d.text == CHATTER_TEXT)
            .count();
        println!("domain '{}'", dataset.name);
        println!("  documents: {} ({} chatter)", dataset.documents().len(), chatter);
        println!(
            "  cases: {} ({} ambiguous), splits {}/{}/{}",
            dataset.cases().len(),
            ambiguous,
            dataset.splits.train.len(),
            dataset.splits.valid.len(),
            dataset.splits.test.len(),
        );

        // Where does the target sit before any conversation happens?
        let index = build_index(dataset.documents(), Bm25Params::default())?;
        let case = &dataset.cases()[0];
        let reset_rank = full_rank_of(&index, &case.initial_query, &case.target_doc_id)?;
        println!(
            "  first case: query {:?} puts target {} at rank {}",
            case.initial_query, case.target_doc_id, reset_rank
        );
        if let Some(facet) = case.facets.first() {
            let richer = format!("{} {}", case.initial_query, facet.join(" "));
            let lifted = full_rank_of(&index, &richer, &case.target_doc_id)?;
            println!("  with the hidden facet {:?} appended: rank {}", facet, lifted);
        }
        println!();
    }

    // Same profile, same seed: byte-for-byte the same corpus.
    let p = SynthProfile {
        name: "det".into(),
        vocabulary: 9,
        n_docs: 40,
        n_cases: 12,
        facet_count: 2,
        helpfulness: Helpfulness::Mixed,
    };
    let a = synth_domain(&p, 123)?;
    let b = synth_domain(&p, 123)?;
    println!(
        "determinism: regenerating under the same seed reproduces the corpus: {}",
        a.documents() == b.documents() && a.cases() == b.cases()
    );
    Ok(())
}
