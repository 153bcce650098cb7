//! Run configuration and the flat `key=value` config-file format.
//!
//! One struct carries every knob a run needs: episode budget and rewards,
//! replay and optimizer settings, retrieval and state widths, and network
//! shape. Files are plain text, one `key=value` per line, `#` comments and
//! blank lines allowed. Unknown keys are errors — silently ignoring a typo
//! in an experiment config is how results stop meaning anything.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::Bm25Params;

/// How the trainer spreads episodes across multiple domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainSampling {
    /// Draw a domain uniformly at random for every episode (default).
    PerEpisode,
    /// Shuffle the domain list each pass and take one episode per domain.
    PerEpoch,
}

impl fmt::Display for DomainSampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainSampling::PerEpisode => "per-episode",
            DomainSampling::PerEpoch => "per-epoch",
        })
    }
}

/// Everything a training or evaluation run needs to know.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Turn cap `T`: the system gets at most this many decisions per episode.
    pub max_turns: usize,
    /// Training episodes.
    pub episodes: usize,
    /// Replay buffer capacity (FIFO eviction beyond it).
    pub buffer_capacity: usize,
    /// Replay sample size per gradient step.
    pub batch_size: usize,
    /// Adam learning rate.
    pub lr: f64,
    /// Discount factor.
    pub gamma: f64,
    /// Reward for presenting a list that contains the target.
    pub reward_success: f64,
    /// Reward when the turn cap runs out.
    pub reward_timeout: f64,
    /// Reward for every non-final decision (asking, failed presentation).
    pub step_penalty: f64,
    /// `x`: how many documents an answer presents.
    pub present_count: usize,
    /// `k`: how many top retrieval scores enter the state.
    pub k: usize,
    /// Retrieval window size per turn.
    pub k_ret: usize,
    /// Exploration schedule: linear from `epsilon_start` to `epsilon_end`
    /// over the first `epsilon_decay_fraction` of episodes, then flat.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_fraction: f64,
    /// Hard-sync the frozen target network every this many gradient steps.
    pub target_sync_every: usize,
    /// Master seed; every named random stream derives from it.
    pub seed: u64,
    /// Text-embedding width `d`.
    pub dim: usize,
    /// Planner hidden-layer width.
    pub hidden: usize,
    pub bm25: Bm25Params,
    pub domain_sampling: DomainSampling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_turns: 10,
            episodes: 1800,
            buffer_capacity: 10_000,
            batch_size: 32,
            lr: 1e-4,
            gamma: 0.99,
            reward_success: 1.0,
            reward_timeout: -0.5,
            step_penalty: 0.0,
            present_count: 5,
            k: 5,
            k_ret: 50,
            epsilon_start: 1.0,
            epsilon_end: 0.1,
            epsilon_decay_fraction: 0.5,
            target_sync_every: 20,
            seed: 0,
            dim: 64,
            hidden: 128,
            bm25: Bm25Params::default(),
            domain_sampling: DomainSampling::PerEpisode,
        }
    }
}

impl TrainConfig {
    /// Parse a config file on top of the defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<TrainConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut config = TrainConfig::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    /// Apply `key=value` lines to this config.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected key=value, got {raw:?}",
                    lineno + 1
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Set one key. Dotted module-style keys and their short forms are
    /// both accepted.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
        }
        match key {
            "T" | "max_turns" => self.max_turns = parse(key, value)?,
            "episodes" => self.episodes = parse(key, value)?,
            "buffer_capacity" => self.buffer_capacity = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "reward_success" => self.reward_success = parse(key, value)?,
            "reward_timeout" => self.reward_timeout = parse(key, value)?,
            "step_penalty" => self.step_penalty = parse(key, value)?,
            "x" | "present_count" => self.present_count = parse(key, value)?,
            "k" | "state.k" => self.k = parse(key, value)?,
            "k_ret" | "retrieve.k_ret" => self.k_ret = parse(key, value)?,
            "epsilon_start" => self.epsilon_start = parse(key, value)?,
            "epsilon_end" => self.epsilon_end = parse(key, value)?,
            "epsilon_decay_fraction" => self.epsilon_decay_fraction = parse(key, value)?,
            "target_sync_every" => self.target_sync_every = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "dim" | "encoder.dim" => self.dim = parse(key, value)?,
            "hidden" | "planner.hidden" => self.hidden = parse(key, value)?,
            "bm25.k1" => self.bm25.k1 = parse(key, value)?,
            "bm25.b" => self.bm25.b = parse(key, value)?,
            "mdt.scheme" => {
                self.domain_sampling = match value {
                    "per-episode" => DomainSampling::PerEpisode,
                    "per-epoch" => DomainSampling::PerEpoch,
                    _ => {
                        return Err(Error::Config(format!(
                            "bad value for mdt.scheme: {value:?} (expected per-episode or per-epoch)"
                        )))
                    }
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Reject incoherent settings before a run starts.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.max_turns == 0 {
            return bad("T must be >= 1".into());
        }
        if self.episodes == 0 {
            return bad("episodes must be >= 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.buffer_capacity < self.batch_size {
            return bad(format!(
                "buffer_capacity {} is smaller than batch_size {}",
                self.buffer_capacity, self.batch_size
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must be in [0, 1], got {}", self.gamma));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(self.epsilon_decay_fraction > 0.0 && self.epsilon_decay_fraction <= 1.0) {
            return bad(format!(
                "epsilon_decay_fraction must be in (0, 1], got {}",
                self.epsilon_decay_fraction
            ));
        }
        if self.target_sync_every == 0 {
            return bad("target_sync_every must be >= 1".into());
        }
        if self.present_count == 0 || self.k == 0 || self.k_ret == 0 {
            return bad("x, k, and k_ret must all be >= 1".into());
        }
        if self.dim == 0 || self.hidden == 0 {
            return bad("dim and hidden must be >= 1".into());
        }
        if !(self.bm25.k1 >= 0.0 && self.bm25.b >= 0.0 && self.bm25.b <= 1.0) {
            return bad(format!(
                "bm25 parameters out of range: k1={} b={}",
                self.bm25.k1, self.bm25.b
            ));
        }
        Ok(())
    }
}

// Bm25Params serializes as `{"k1": ..., "b": ...}` inside the config.
impl Serialize for Bm25Params {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Bm25Params", 2)?;
        st.serialize_field("k1", &self.k1)?;
        st.serialize_field("b", &self.b)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Bm25Params {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            k1: f64,
            b: f64,
        }
        let raw = Raw::deserialize(d)?;
        Ok(Bm25Params {
            k1: raw.k1,
            b: raw.b,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_pass_validation() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn file_text_overrides_defaults() {
        let mut c = TrainConfig::default();
        c.apply_text(
            "# comment\n\nepisodes=200\nT=6\nlr=0.001\nbm25.k1=1.5\nmdt.scheme=per-epoch\nencoder.dim=32\n",
        )
        .unwrap();
        assert_eq!(c.episodes, 200);
        assert_eq!(c.max_turns, 6);
        assert_eq!(c.lr, 0.001);
        assert_eq!(c.bm25.k1, 1.5);
        assert_eq!(c.domain_sampling, DomainSampling::PerEpoch);
        assert_eq!(c.dim, 32);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_errors() {
        let mut c = TrainConfig::default();
        assert!(c.apply_text("episodez=200\n").is_err());
        assert!(c.apply_text("episodes=many\n").is_err());
        assert!(c.apply_text("no equals sign\n").is_err());
        assert!(c.apply_text("mdt.scheme=sometimes\n").is_err());
    }

    #[test]
    fn validation_catches_incoherent_settings() {
        let c = TrainConfig {
            buffer_capacity: 8,
            batch_size: 32,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());

        let c = TrainConfig {
            gamma: 1.5,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());

        let c = TrainConfig {
            epsilon_decay_fraction: 0.0,
            ..TrainConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let c = TrainConfig::default();
        let json = serde_json::to_string(&c).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(c, back);
    }
}
