//! Text embeddings and planner-state construction.
//!
//! The planner consumes a fixed-width state: the conversation embedding, the
//! mean embedding of the currently top-ranked documents, and the top-`k`
//! retrieval scores normalized per turn. Text embedding sits behind
//! [`TextEncoder`] so a learned encoder can replace the default without
//! touching anything downstream.
//!
//! The default encoder is signed feature hashing: each token lands in one of
//! `dim` buckets with a ±1 sign, counts accumulate, and the vector is
//! L2-normalized. Its hash constants are frozen — the same text maps to the
//! same vector in every run and build, which is what makes checkpoints
//! portable across processes.

use crate::environment::ConversationHistory;
use crate::error::{Error, Result};
use crate::retrieval::RetrievalResult;

/// Anything that turns text into a fixed-width vector.
pub trait TextEncoder {
    /// Output dimensionality `d`.
    fn dim(&self) -> usize;

    /// Encode one text. Must be deterministic; must return either the zero
    /// vector or a unit vector of length [`dim`](TextEncoder::dim).
    fn encode(&self, text: &str) -> Vec<f64>;
}

// Frozen hash streams. Changing either constant re-maps every embedding and
// silently invalidates existing checkpoints, so they are fixed for the
// lifetime of the checkpoint format.
const BUCKET_STREAM: u64 = 0x7061_6745_6275_636b;
const SIGN_STREAM: u64 = 0x7369_676e_4249_5453;

/// Signed feature hashing over the crate-wide tokenization.
#[derive(Debug, Clone)]
pub struct HashingEncoder {
    dim: usize,
}

impl HashingEncoder {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("encoder dim must be >= 1".into()));
        }
        Ok(HashingEncoder { dim })
    }
}

fn seeded_fnv(stream: u64, token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in token.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl TextEncoder for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for token in crate::corpus::tokenize(text) {
            let bucket = (seeded_fnv(BUCKET_STREAM, &token) % self.dim as u64) as usize;
            let sign = if seeded_fnv(SIGN_STREAM, &token) & 1 == 0 {
                1.0
            } else {
                -1.0
            };
            v[bucket] += sign;
        }
        l2_normalize(&mut v);
        v
    }
}

/// Normalize in place; the zero vector stays zero.
fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Separator token placed between turns when the whole conversation is
/// embedded as one text.
pub const TURN_SEPARATOR: &str = "sep";

/// Planner input for one decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Embedding of the full conversation so far.
    pub history_emb: Vec<f64>,
    /// Renormalized mean embedding of the top-ranked documents; zero when
    /// the retrieval is empty.
    pub docs_emb: Vec<f64>,
    /// Top-`k` retrieval scores min-max normalized within the turn, padded
    /// with zeros up to `k`.
    pub scores: Vec<f64>,
}

impl State {
    /// Total width: `2 * d + k`.
    pub fn dim(&self) -> usize {
        self.history_emb.len() + self.docs_emb.len() + self.scores.len()
    }

    /// The flat vector the planner network consumes:
    /// `history_emb ++ docs_emb ++ scores`.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        out.extend_from_slice(&self.history_emb);
        out.extend_from_slice(&self.docs_emb);
        out.extend_from_slice(&self.scores);
        out
    }
}

/// Min-max normalize the top `min(k, available)` scores into `[0, 1]` and
/// zero-pad to length `k`. All-equal scores (including a singleton) map
/// to 1.0: a lone or flat result is "as good as it gets" this turn.
fn normalize_scores(raw: &[f64], k: usize) -> Vec<f64> {
    let take = raw.len().min(k);
    let mut out = vec![0.0; k];
    if take == 0 {
        return out;
    }
    let window = &raw[..take];
    let min = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        for slot in out.iter_mut().take(take) {
            *slot = 1.0;
        }
    } else {
        for (slot, &s) in out.iter_mut().zip(window) {
            *slot = (s - min) / (max - min);
        }
    }
    out
}

/// Assemble the planner state for one turn.
///
/// `top_texts` must hold the texts of `retrieval.ranked` in rank order, at
/// least the first `min(k, ranked.len())` of them; the caller resolves
/// doc ids to texts.
pub fn build_state(
    encoder: &dyn TextEncoder,
    history: &ConversationHistory,
    retrieval: &RetrievalResult,
    top_texts: &[&str],
    k: usize,
) -> Result<State> {
    if k == 0 {
        return Err(Error::InvalidParam("state score width k must be >= 1".into()));
    }
    let take = retrieval.ranked.len().min(k);
    if top_texts.len() < take {
        return Err(Error::InvalidParam(format!(
            "need texts for the top {take} documents, got {}",
            top_texts.len()
        )));
    }

    let history_text = history
        .turns()
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(&format!(" {TURN_SEPARATOR} "));
    let history_emb = encoder.encode(&history_text);

    let d = encoder.dim();
    let mut docs_emb = vec![0.0; d];
    if take > 0 {
        for text in &top_texts[..take] {
            let e = encoder.encode(text);
            for (acc, x) in docs_emb.iter_mut().zip(&e) {
                *acc += x;
            }
        }
        for x in docs_emb.iter_mut() {
            *x /= take as f64;
        }
        l2_normalize(&mut docs_emb);
    }

    let raw: Vec<f64> = retrieval.ranked.iter().map(|d| d.score).collect();
    let scores = normalize_scores(&raw, k);

    Ok(State {
        history_emb,
        docs_emb,
        scores,
    })
}
