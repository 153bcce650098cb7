//! Lexical retrieval over a document collection with BM25 scoring.
//!
//! One ranking function drives everything: documents are ordered by score
//! descending with ties broken by ascending `doc_id`, and both [`retrieve`]
//! (top-`k_ret` window) and [`full_rank_of`] (position over the whole
//! collection) read from that same order, so they can never disagree.
//!
//! A query that tokenizes to nothing is *degenerate, not an error*: every
//! score is 0 and documents come back in `doc_id` order, flagged via
//! [`RetrievalResult::empty_query`].

use std::collections::HashMap;

use crate::corpus::{tokenize, Document};
use crate::environment::{ConversationHistory, Speaker};
use crate::error::{Error, Result};

/// BM25 scoring constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

/// Inverted index with the statistics BM25 needs.
#[derive(Debug, Clone)]
pub struct Index {
    doc_ids: Vec<String>,
    doc_lens: Vec<usize>,
    /// term -> (doc position, term frequency), doc positions ascending.
    postings: HashMap<String, Vec<(usize, u32)>>,
    avgdl: f64,
    params: Bm25Params,
    /// Doc positions sorted by ascending doc_id; the zero-score order.
    id_order: Vec<usize>,
}

/// One scored entry of a ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// Outcome of one retrieval call.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// Best-first ranking, `min(k_ret, N)` entries.
    pub ranked: Vec<ScoredDoc>,
    pub query_text: String,
    /// Conversation turn this retrieval belongs to; 0 outside an episode.
    pub turn: usize,
    /// True when the query tokenized to nothing (all scores are 0).
    pub empty_query: bool,
}

impl RetrievalResult {
    /// An empty result, useful for state construction edge cases and tests.
    pub fn empty() -> Self {
        RetrievalResult {
            ranked: Vec::new(),
            query_text: String::new(),
            turn: 0,
            empty_query: true,
        }
    }
}

/// Build an index over a collection.
pub fn build_index(documents: &[Document], params: Bm25Params) -> Result<Index> {
    if documents.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let mut seen = HashMap::with_capacity(documents.len());
    for (i, doc) in documents.iter().enumerate() {
        if seen.insert(doc.doc_id.as_str(), i).is_some() {
            return Err(Error::DuplicateDocId(doc.doc_id.clone()));
        }
    }

    let mut postings: HashMap<String, Vec<(usize, u32)>> = HashMap::new();
    let mut doc_lens = Vec::with_capacity(documents.len());
    for (pos, doc) in documents.iter().enumerate() {
        doc_lens.push(doc.tokens().len());
        let mut counts: HashMap<&String, u32> = HashMap::new();
        for token in doc.tokens() {
            *counts.entry(token).or_insert(0) += 1;
        }
        for (token, tf) in counts {
            postings.entry(token.clone()).or_default().push((pos, tf));
        }
    }
    for list in postings.values_mut() {
        list.sort_unstable_by_key(|&(pos, _)| pos);
    }

    let avgdl = doc_lens.iter().sum::<usize>() as f64 / doc_lens.len() as f64;
    let doc_ids: Vec<String> = documents.iter().map(|d| d.doc_id.clone()).collect();
    let mut id_order: Vec<usize> = (0..doc_ids.len()).collect();
    id_order.sort_by(|&a, &b| doc_ids[a].cmp(&doc_ids[b]));

    Ok(Index {
        doc_ids,
        doc_lens,
        postings,
        avgdl,
        params,
        id_order,
    })
}

impl Index {
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    /// Document frequency of a term.
    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Inverse document frequency: `ln(1 + (N - df + 0.5) / (df + 0.5))`.
    /// Strictly positive for every term, including ones in all documents.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.len() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// BM25 scores for every document, indexed by document position.
    /// Each query token occurrence contributes independently.
    fn score_all(&self, query_tokens: &[String]) -> Vec<f64> {
        let Bm25Params { k1, b } = self.params;
        let mut scores = vec![0.0; self.len()];
        for token in query_tokens {
            let Some(list) = self.postings.get(token) else {
                continue;
            };
            let idf = self.idf(token);
            for &(pos, tf) in list {
                let tf = tf as f64;
                let len_norm = 1.0 - b + b * self.doc_lens[pos] as f64 / self.avgdl;
                scores[pos] += idf * (tf * (k1 + 1.0)) / (tf + k1 * len_norm);
            }
        }
        scores
    }

    /// All document positions ordered best-first: score descending, then
    /// doc_id ascending. This is the crate's one ranking order.
    fn ranked_positions(&self, query_tokens: &[String]) -> (Vec<usize>, Vec<f64>) {
        let scores = self.score_all(query_tokens);
        let mut order = self.id_order.clone();
        // Stable sort on descending score keeps the ascending-id order of
        // `id_order` among equal scores.
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
        (order, scores)
    }
}

/// Rank the collection against `query_text` and keep the best
/// `min(k_ret, N)` documents.
pub fn retrieve(index: &Index, query_text: &str, k_ret: usize) -> Result<RetrievalResult> {
    if index.is_empty() {
        return Err(Error::EmptyCollection);
    }
    if k_ret == 0 {
        return Err(Error::InvalidParam("k_ret must be >= 1".into()));
    }
    let tokens = tokenize(query_text);
    let (order, scores) = index.ranked_positions(&tokens);
    let keep = k_ret.min(order.len());
    let ranked = order[..keep]
        .iter()
        .map(|&pos| ScoredDoc {
            doc_id: index.doc_ids[pos].clone(),
            score: scores[pos],
        })
        .collect();
    Ok(RetrievalResult {
        ranked,
        query_text: query_text.to_string(),
        turn: 0,
        empty_query: tokens.is_empty(),
    })
}

/// 1-based rank of `doc_id` in the full-collection ordering for
/// `query_text`.
pub fn full_rank_of(index: &Index, query_text: &str, doc_id: &str) -> Result<usize> {
    if index.is_empty() {
        return Err(Error::EmptyCollection);
    }
    let tokens = tokenize(query_text);
    let (order, _) = index.ranked_positions(&tokens);
    order
        .iter()
        .position(|&pos| index.doc_ids[pos] == doc_id)
        .map(|p| p + 1)
        .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))
}

/// The retrieval query implied by a conversation: all *user* utterances in
/// order, joined with single spaces. System turns (questions, presented-doc
/// summaries) never leak into the query.
pub fn query_from_history(history: &ConversationHistory) -> String {
    history
        .turns()
        .iter()
        .filter(|t| t.speaker == Speaker::User)
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}
