//! Learning **when to ask a clarifying question** in conversational search.
//!
//! A searcher types a short, often underspecified query. The system can
//! either present its current best-matching documents or spend a turn
//! asking a clarifying question first. Asking when the ranking is already
//! confident wastes the user's time; answering when it is ambiguous buries
//! the target. This crate trains and evaluates policies for that
//! ask-or-answer decision:
//!
//! - [`corpus`] — documents, search cases with hidden intent facets,
//!   dataset splits, and synthetic domain generators with controllable
//!   ambiguity.
//! - [`retrieval`] — a BM25 index over the collection, plus full-collection
//!   rank lookup for the hidden target.
//! - [`encoder`] — a hashing text encoder and the fixed-width state layout
//!   (history embedding ∥ top-document embedding ∥ normalized scores).
//! - [`environment`] — the turn-taking episode: scripted question and user
//!   simulators, rewards, termination, and complete episode logs.
//! - [`planner`] — a dueling two-head value network trained by gradient
//!   descent with Adam, plus epsilon-greedy action selection and a text
//!   checkpoint format.
//! - [`trainer`] — replay-buffer Q-learning across one or many domains,
//!   with named random-number streams for exact reproducibility.
//! - [`policy`] — the learned policy and the fixed baselines it is
//!   measured against.
//! - [`metrics`] — success rate, turn counts, first-turn recall, per-turn
//!   asking trajectories, dynamic-time-warping strategy distances, and
//!   rank-gain analysis.
//! - [`adapter`] — the seam for swapping the scripted simulators for an
//!   external chat model.
//! - [`cli`] — the `clarion` command: `synth`, `train`, `eval`, `analyze`.
//!
//! Everything is deterministic under a fixed seed: same inputs, same
//! bytes — checkpoints, logs, and reports alike.

pub mod adapter;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod environment;
pub mod error;
pub mod metrics;
pub mod planner;
pub mod policy;
pub mod retrieval;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
