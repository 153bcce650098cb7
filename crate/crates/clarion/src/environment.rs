//! The conversational search environment.
//!
//! One episode = one search case played against a document collection. Each
//! turn the system either **asks** a clarifying question (a scripted user
//! reveals the next unrevealed facet, the query grows, retrieval re-runs) or
//! **answers** by presenting the current top documents (success if the
//! target is among them, otherwise the user rejects and the episode goes
//! on). Rewards: success pays `reward_success`, running out of turns pays
//! `reward_timeout`, every other decision pays `step_penalty`.
//!
//! The turn counter `t` equals the number of system decisions taken plus
//! one; an action taken at `t == max_turns` that does not succeed ends the
//! episode as a timeout.
//!
//! User and question simulation sit behind [`Simulators`] so the scripted
//! defaults can be swapped for an external chat backend (see
//! [`crate::adapter`]); simulator failures surface as episode errors, never
//! as silent fallbacks.

use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::corpus::{tokenize, DomainDataset, SearchCase};
use crate::encoder::{build_state, State, TextEncoder};
use crate::error::{Error, Result};
use crate::planner::Action;
use crate::policy::Policy;
use crate::retrieval::{full_rank_of, query_from_history, retrieve, Index, RetrievalResult};

/// Fixed utterance when the presented list does not contain what the user
/// wants.
pub const REJECTION_UTTERANCE: &str = "none of these match";

/// Fixed utterance when the user has no facets left to reveal.
pub const NOTHING_TO_ADD: &str = "I have nothing to add";

/// Clarifying question asked when no term splits the candidate documents.
pub const GENERIC_QUESTION: &str = "Could you tell me more about what you need?";

/// Who said a turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    System,
}

/// One utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

/// Strictly alternating conversation starting from the user.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConversationHistory {
    turns: Vec<Turn>,
}

impl ConversationHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    /// Append a turn. Panics if alternation is violated — the environment
    /// never produces two consecutive turns by the same speaker, so a
    /// violation is a caller bug, not an input condition.
    pub fn push(&mut self, speaker: Speaker, text: impl Into<String>) {
        match self.turns.last() {
            None => assert_eq!(
                speaker,
                Speaker::User,
                "conversations start with the user"
            ),
            Some(last) => assert_ne!(
                last.speaker, speaker,
                "speakers must alternate, got two {speaker:?} turns"
            ),
        }
        self.turns.push(Turn {
            speaker,
            text: text.into(),
        });
    }
}

/// How an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    MaxTurns,
}

/// What happened at one decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub action: Action,
    pub reward: f64,
    /// Target's full-collection rank under the query in force when the
    /// decision was made.
    pub rank_before: usize,
    /// Target's rank after the turn's effects (new user text and
    /// re-retrieval); equals `rank_before` on a successful answer.
    pub rank_after: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presented: Option<Vec<String>>,
}

/// Full record of one played episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub user_id: String,
    pub target_doc_id: String,
    pub domain: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success_turn: Option<usize>,
    pub turns: Vec<TurnRecord>,
}

impl EpisodeLog {
    /// Target rank under the initial query (before any decision).
    pub fn rank_at_reset(&self) -> Option<usize> {
        self.turns.first().map(|t| t.rank_before)
    }

    pub fn total_reward(&self) -> f64 {
        self.turns.iter().map(|t| t.reward).sum()
    }
}

/// One step of experience for the replay buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: Action,
    pub reward: f64,
    /// State after the step; ignored by learning targets when `terminal`.
    pub next_state: State,
    pub terminal: bool,
}

/// Inputs to question generation: the conversation and the current ranked
/// documents as `(doc_id, text)` pairs.
pub struct QuestionRequest<'a> {
    pub history: &'a ConversationHistory,
    pub top_docs: &'a [(&'a str, &'a str)],
}

/// Inputs to user simulation: the case being played, the question just
/// asked, how many facets are already revealed, and the conversation.
pub struct UserReplyRequest<'a> {
    pub case: &'a SearchCase,
    pub question: &'a str,
    pub revealed_count: usize,
    pub history: &'a ConversationHistory,
}

/// A simulated user's reply plus the updated facet cursor.
#[derive(Debug, Clone, PartialEq)]
pub struct UserReply {
    pub text: String,
    pub revealed_count: usize,
}

/// Question generation and user simulation, pluggable per rollout.
pub trait Simulators {
    fn question(&self, request: &QuestionRequest<'_>) -> Result<String>;
    fn user_reply(&self, request: &UserReplyRequest<'_>) -> Result<UserReply>;
}

/// The deterministic, corpus-only simulators used by training, evaluation,
/// and every test.
#[derive(Debug, Clone, Copy, Default)]
pub struct Scripted;

impl Simulators for Scripted {
    fn question(&self, request: &QuestionRequest<'_>) -> Result<String> {
        let texts: Vec<&str> = request.top_docs.iter().map(|&(_, text)| text).collect();
        Ok(scripted_question(&texts))
    }

    fn user_reply(&self, request: &UserReplyRequest<'_>) -> Result<UserReply> {
        Ok(scripted_user_reply(
            request.case,
            request.question,
            request.revealed_count,
        ))
    }
}

/// Pick the term that best splits the candidate documents (document
/// frequency closest to half of them, ties to the lexicographically
/// smallest term) and wrap it in a fixed question template. Terms present
/// in every candidate or in none split nothing; with no splitting term at
/// all the generic question is asked.
pub fn scripted_question(candidate_texts: &[&str]) -> String {
    use std::collections::{BTreeMap, BTreeSet};

    let n = candidate_texts.len();
    if n < 2 {
        return GENERIC_QUESTION.to_string();
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for text in candidate_texts {
        let unique: BTreeSet<String> = tokenize(text).into_iter().collect();
        for term in unique {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let half = n as f64 / 2.0;
    let mut best: Option<(&str, f64)> = None;
    for (term, &count) in &df {
        if count == 0 || count >= n {
            continue;
        }
        let gap = (count as f64 - half).abs();
        // Strict improvement keeps the lexicographically smallest term on
        // ties because iteration is in ascending term order.
        if best.is_none_or(|(_, b)| gap < b) {
            best = Some((term, gap));
        }
    }
    match best {
        Some((term, _)) => format!("Are you interested in something related to {term}?"),
        None => GENERIC_QUESTION.to_string(),
    }
}

/// Reveal the next unrevealed facet (tokens joined by spaces) or state that
/// nothing is left. The question text never changes what gets revealed —
/// facets come out in order.
pub fn scripted_user_reply(
    case: &SearchCase,
    _question: &str,
    revealed_count: usize,
) -> UserReply {
    if revealed_count < case.facets.len() {
        UserReply {
            text: case.facets[revealed_count].join(" "),
            revealed_count: revealed_count + 1,
        }
    } else {
        UserReply {
            text: NOTHING_TO_ADD.to_string(),
            revealed_count,
        }
    }
}

/// One in-flight episode.
pub struct Episode<'a> {
    case: &'a SearchCase,
    dataset: &'a DomainDataset,
    index: &'a Index,
    encoder: &'a dyn TextEncoder,
    config: &'a TrainConfig,
    history: ConversationHistory,
    retrieval: RetrievalResult,
    state: State,
    rank: usize,
    turn: usize,
    revealed: usize,
    terminal: bool,
    outcome: Option<Outcome>,
    success_turn: Option<usize>,
    records: Vec<TurnRecord>,
}

impl<'a> Episode<'a> {
    /// Reset: the history holds exactly the user's initial query and the
    /// first retrieval is in force.
    pub fn new(
        case: &'a SearchCase,
        dataset: &'a DomainDataset,
        index: &'a Index,
        encoder: &'a dyn TextEncoder,
        config: &'a TrainConfig,
    ) -> Result<Episode<'a>> {
        let mut history = ConversationHistory::new();
        history.push(Speaker::User, &case.initial_query);
        let mut episode = Episode {
            case,
            dataset,
            index,
            encoder,
            config,
            history,
            retrieval: RetrievalResult::empty(),
            state: State {
                history_emb: Vec::new(),
                docs_emb: Vec::new(),
                scores: Vec::new(),
            },
            rank: 0,
            turn: 1,
            revealed: 0,
            terminal: false,
            outcome: None,
            success_turn: None,
            records: Vec::new(),
        };
        episode.refresh_retrieval()?;
        Ok(episode)
    }

    /// Re-run retrieval for the current history and rebuild state and rank.
    fn refresh_retrieval(&mut self) -> Result<()> {
        let query = query_from_history(&self.history);
        let mut retrieval = retrieve(self.index, &query, self.config.k_ret)?;
        retrieval.turn = self.turn;
        self.rank = full_rank_of(self.index, &query, &self.case.target_doc_id)?;
        let texts = self.ranked_texts(self.config.k.min(retrieval.ranked.len()), &retrieval)?;
        self.state = build_state(
            self.encoder,
            &self.history,
            &retrieval,
            &texts,
            self.config.k,
        )?;
        self.retrieval = retrieval;
        Ok(())
    }

    fn ranked_texts<'r>(
        &self,
        count: usize,
        retrieval: &'r RetrievalResult,
    ) -> Result<Vec<&'a str>> {
        retrieval.ranked[..count]
            .iter()
            .map(|entry| {
                self.dataset
                    .doc_by_id(&entry.doc_id)
                    .map(|d| d.text.as_str())
                    .ok_or_else(|| Error::UnknownDoc(entry.doc_id.clone()))
            })
            .collect()
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn retrieval(&self) -> &RetrievalResult {
        &self.retrieval
    }

    /// Current turn `t` (decisions taken + 1).
    pub fn turn(&self) -> usize {
        self.turn
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }

    pub fn revealed_count(&self) -> usize {
        self.revealed
    }

    /// Take one decision with the scripted simulators.
    pub fn step(&mut self, action: Action) -> Result<Transition> {
        self.step_with(action, &Scripted)
    }

    /// Take one decision with caller-supplied simulators.
    pub fn step_with(&mut self, action: Action, sims: &dyn Simulators) -> Result<Transition> {
        if self.terminal {
            return Err(Error::EpisodeTerminal);
        }
        let t = self.turn;
        let state_before = self.state.clone();
        let rank_before = self.rank;
        let out_of_turns = t + 1 > self.config.max_turns;

        let mut question = None;
        let mut presented = None;
        let reward;
        let terminal;

        match action {
            Action::Ask => {
                let pairs: Vec<(&str, &str)> = self
                    .retrieval
                    .ranked
                    .iter()
                    .map(|e| {
                        let doc = self.dataset.doc_by_id(&e.doc_id).expect("indexed doc");
                        (doc.doc_id.as_str(), doc.text.as_str())
                    })
                    .collect();
                let q = sims.question(&QuestionRequest {
                    history: &self.history,
                    top_docs: &pairs,
                })?;
                self.history.push(Speaker::System, &q);
                let reply = sims.user_reply(&UserReplyRequest {
                    case: self.case,
                    question: &q,
                    revealed_count: self.revealed,
                    history: &self.history,
                })?;
                self.history.push(Speaker::User, &reply.text);
                self.revealed = reply.revealed_count;
                question = Some(q);

                self.turn += 1;
                self.refresh_retrieval()?;
                terminal = out_of_turns;
                reward = if terminal {
                    self.config.reward_timeout
                } else {
                    self.config.step_penalty
                };
                if terminal {
                    self.outcome = Some(Outcome::MaxTurns);
                }
            }
            Action::Answer => {
                let count = self.config.present_count.min(self.retrieval.ranked.len());
                let ids: Vec<String> = self.retrieval.ranked[..count]
                    .iter()
                    .map(|e| e.doc_id.clone())
                    .collect();
                let summary = format!("presented: {}", ids.join(" "));
                self.history.push(Speaker::System, summary);
                let hit = ids.contains(&self.case.target_doc_id);
                presented = Some(ids);

                if hit {
                    reward = self.config.reward_success;
                    terminal = true;
                    self.outcome = Some(Outcome::Success);
                    self.success_turn = Some(t);
                    self.turn += 1;
                    // No re-retrieval: the ranking that produced the answer
                    // stays in force for the terminal state.
                } else {
                    self.history.push(Speaker::User, REJECTION_UTTERANCE);
                    self.turn += 1;
                    self.refresh_retrieval()?;
                    terminal = out_of_turns;
                    reward = if terminal {
                        self.config.reward_timeout
                    } else {
                        self.config.step_penalty
                    };
                    if terminal {
                        self.outcome = Some(Outcome::MaxTurns);
                    }
                }
            }
        }

        self.terminal = terminal;
        let rank_after = self.rank;
        self.records.push(TurnRecord {
            turn: t,
            action,
            reward,
            rank_before,
            rank_after,
            question,
            presented,
        });
        Ok(Transition {
            state: state_before,
            action,
            reward,
            next_state: self.state.clone(),
            terminal,
        })
    }

    /// The finished episode's record.
    pub fn into_log(self) -> Result<EpisodeLog> {
        let outcome = self
            .outcome
            .ok_or_else(|| Error::InvalidParam("episode is not finished".into()))?;
        Ok(EpisodeLog {
            user_id: self.case.user_id.clone(),
            target_doc_id: self.case.target_doc_id.clone(),
            domain: self.dataset.name.clone(),
            outcome,
            success_turn: self.success_turn,
            turns: self.records,
        })
    }
}

/// Play one case to completion under a fixed policy with the scripted
/// simulators.
pub fn rollout(
    policy: &Policy<'_>,
    case: &SearchCase,
    dataset: &DomainDataset,
    index: &Index,
    encoder: &dyn TextEncoder,
    config: &TrainConfig,
) -> Result<EpisodeLog> {
    let mut episode = Episode::new(case, dataset, index, encoder, config)?;
    while !episode.is_terminal() {
        let action = policy.decide(episode.state(), episode.turn())?;
        episode.step(action)?;
    }
    episode.into_log()
}
