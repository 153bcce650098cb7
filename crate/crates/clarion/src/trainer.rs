//! The training loop: play episodes with epsilon-greedy exploration, store
//! transitions in a replay buffer, and regress the value network toward
//! bootstrapped targets from a periodically synced copy of itself.
//!
//! Training may mix several domains. `per-episode` sampling draws the domain
//! uniformly at random before every episode; `per-epoch` plays each domain
//! in a contiguous block of as many episodes as it has training cases, then
//! moves to the next domain, cycling round-robin until the episode budget
//! is spent. Cases are drawn uniformly from the domain's training pool in
//! both modes (its tagged train split if there is one, otherwise all cases).
//!
//! Every random choice comes from its own named stream (`mdt.domain`,
//! `mdt.case`, `explore`, `replay`, `net.init`), so each kind of draw is
//! reproducible independently of the others: two runs with the same seed
//! and config produce identical networks and logs byte for byte.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::config::{DomainSampling, TrainConfig};

use crate::corpus::{DomainDataset, SearchCase};
use crate::encoder::HashingEncoder;
use crate::environment::{Episode, Outcome, Transition};
use crate::error::{Error, Result};
use crate::planner::{select_action, QNetwork, TrainExample};
use crate::retrieval::{build_index, Index};
use crate::rng::{stream, uniform_index};

/// Bounded FIFO store of transitions with seeded uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<ReplayBuffer> {
        if capacity == 0 {
            return Err(Error::InvalidParam("replay capacity must be positive".into()));
        }
        Ok(ReplayBuffer {
            items: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Contents oldest-first, for inspection; sampling goes through
    /// [`ReplayBuffer::sample`].
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append a transition, evicting the oldest one when full.
    pub fn push(&mut self, transition: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(transition);
    }

    /// Draw `batch` transitions uniformly at random, with replacement.
    pub fn sample(&self, batch: usize, rng: &mut ChaCha8Rng) -> Result<Vec<&Transition>> {
        if self.items.len() < batch {
            return Err(Error::UnderfullBuffer {
                have: self.items.len(),
                need: batch,
            });
        }
        Ok((0..batch)
            .map(|_| &self.items[uniform_index(rng, self.items.len())])
            .collect())
    }
}

/// One-step bootstrapped regression target: the immediate reward, plus the
/// discounted best next-state value unless the transition ended the episode.
pub fn bellman_target(reward: f64, next_q_max: f64, terminal: bool, gamma: f64) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * next_q_max
    }
}

/// Exploration rate for a 0-based episode index: linear from
/// `epsilon_start` down to `epsilon_end` over the first
/// `epsilon_decay_fraction` of the episode budget, then flat.
pub fn epsilon_for_episode(config: &TrainConfig, episode: usize) -> f64 {
    let decay_len = ((config.episodes as f64) * config.epsilon_decay_fraction).floor() as usize;
    let decay_len = decay_len.max(1);
    if episode >= decay_len {
        config.epsilon_end
    } else {
        let frac = episode as f64 / decay_len as f64;
        config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac
    }
}

/// One line of the training log (serialized as JSON-lines by the caller).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    /// 0-based episode index.
    pub episode: usize,
    pub domain: String,
    pub outcome: Outcome,
    pub turns: usize,
    pub total_reward: f64,
    /// Mean regression loss over this episode's gradient steps; absent
    /// before the buffer first fills to a batch.
    pub mean_loss: Option<f64>,
    pub epsilon: f64,
}

/// Everything a finished training run produces.
pub struct TrainOutput {
    pub network: QNetwork,
    pub records: Vec<TrainLogRecord>,
    pub gradient_steps: usize,
}

/// A domain prepared for playing episodes: its dataset, a built retrieval
/// index, and the indices of the cases to train on.
struct Arena<'a> {
    dataset: &'a DomainDataset,
    index: Index,
    pool: Vec<&'a SearchCase>,
}

impl<'a> Arena<'a> {
    fn new(dataset: &'a DomainDataset, config: &TrainConfig) -> Result<Arena<'a>> {
        let index = build_index(dataset.documents(), config.bm25)?;
        let pool: Vec<&SearchCase> = if dataset.splits.is_empty() {
            dataset.cases().iter().collect()
        } else {
            dataset.split_cases(crate::corpus::Split::Train)
        };
        if pool.is_empty() {
            return Err(Error::NoCases);
        }
        Ok(Arena { dataset, index, pool })
    }
}

/// Deterministic schedule of which domain plays which episode.
struct DomainSchedule {
    mode: DomainSampling,
    rng: ChaCha8Rng,
    /// per-epoch state: current domain and episodes left in its block.
    current: usize,
    remaining: usize,
}

impl DomainSchedule {
    fn new(config: &TrainConfig) -> DomainSchedule {
        DomainSchedule {
            mode: config.domain_sampling,
            rng: stream(config.seed, "mdt.domain"),
            current: 0,
            remaining: 0,
        }
    }

    fn next(&mut self, arenas: &[Arena<'_>]) -> usize {
        match self.mode {
            DomainSampling::PerEpisode => uniform_index(&mut self.rng, arenas.len()),
            DomainSampling::PerEpoch => {
                if self.remaining == 0 {
                    // Block length = one nominal pass over the domain's pool.
                    self.remaining = arenas[self.current].pool.len();
                }
                let chosen = self.current;
                self.remaining -= 1;
                if self.remaining == 0 {
                    self.current = (self.current + 1) % arenas.len();
                }
                chosen
            }
        }
    }
}

/// Train a value network on one or more domains.
pub fn train(datasets: &[DomainDataset], config: &TrainConfig) -> Result<TrainOutput> {
    config.validate()?;
    if datasets.is_empty() {
        return Err(Error::InvalidParam("training needs at least one domain".into()));
    }
    let arenas: Vec<Arena<'_>> = datasets
        .iter()
        .map(|d| Arena::new(d, config))
        .collect::<Result<_>>()?;
    let encoder = HashingEncoder::new(config.dim)?;

    let mut net_rng = stream(config.seed, "net.init");
    let mut case_rng = stream(config.seed, "mdt.case");
    let mut explore_rng = stream(config.seed, "explore");
    let mut replay_rng = stream(config.seed, "replay");
    let mut schedule = DomainSchedule::new(config);

    let mut net = QNetwork::init(config.dim, config.k, config.hidden, &mut net_rng)?;
    let mut target_net = net.clone();
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let mut records = Vec::with_capacity(config.episodes);
    let mut gradient_steps = 0usize;

    for e in 0..config.episodes {
        let arena = &arenas[schedule.next(&arenas)];
        let case = arena.pool[uniform_index(&mut case_rng, arena.pool.len())];
        let epsilon = epsilon_for_episode(config, e);

        let mut episode = Episode::new(case, arena.dataset, &arena.index, &encoder, config)?;
        let mut losses = Vec::new();
        while !episode.is_terminal() {
            let action = select_action(&net, episode.state(), epsilon, &mut explore_rng)?;
            let transition = episode.step(action)?;
            buffer.push(transition);

            if buffer.len() >= config.batch_size {
                let batch = buffer.sample(config.batch_size, &mut replay_rng)?;
                let targets: Vec<f64> = batch
                    .iter()
                    .map(|t| {
                        let next_max = if t.terminal {
                            0.0
                        } else {
                            let q = target_net.q_values(&t.next_state)?;
                            q[0].max(q[1])
                        };
                        Ok(bellman_target(t.reward, next_max, t.terminal, config.gamma))
                    })
                    .collect::<Result<_>>()?;
                let examples: Vec<TrainExample<'_>> = batch
                    .iter()
                    .zip(&targets)
                    .map(|(t, &target)| TrainExample {
                        state: &t.state,
                        action: t.action,
                        target,
                    })
                    .collect();
                let loss = net.gradient_step(&examples, config.lr)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { episode: e });
                }
                losses.push(loss);
                gradient_steps += 1;
                if gradient_steps.is_multiple_of(config.target_sync_every) {
                    target_net.copy_params_from(&net)?;
                }
            }
        }

        let log = episode.into_log()?;
        let mean_loss = if losses.is_empty() {
            None
        } else {
            Some(losses.iter().sum::<f64>() / losses.len() as f64)
        };
        records.push(TrainLogRecord {
            episode: e,
            domain: log.domain,
            outcome: log.outcome,
            turns: log.turns.len(),
            total_reward: log.turns.iter().map(|t| t.reward).sum(),
            mean_loss,
            epsilon,
        });
    }

    Ok(TrainOutput {
        network: net,
        records,
        gradient_steps,
    })
}
