//! Evaluation metrics and strategy analysis over played episode logs.
//!
//! Retrieval-facing numbers (success rate, turns to success, first-turn
//! recall) summarize *whether* a policy works; the trajectory tools (ask
//! rate by turn, dynamic-time-warping distance, per-turn rank gains)
//! describe *how* it behaves and how differently two policies behave.

use serde::{Deserialize, Serialize};

use crate::environment::{EpisodeLog, Outcome};
use crate::error::{Error, Result};
use crate::planner::Action;

/// Fraction of episodes that ended in success.
pub fn success_rate(logs: &[EpisodeLog]) -> Result<f64> {
    if logs.is_empty() {
        return Err(Error::NoCases);
    }
    let hits = logs.iter().filter(|l| l.outcome == Outcome::Success).count();
    Ok(hits as f64 / logs.len() as f64)
}

/// Mean number of decisions per episode. A success at turn `t` took `t`
/// decisions; a timeout took the full turn budget, so an episode's decision
/// count is simply the length of its turn record.
pub fn avg_turns(logs: &[EpisodeLog]) -> Result<f64> {
    if logs.is_empty() {
        return Err(Error::NoCases);
    }
    let total: usize = logs.iter().map(|l| l.turns.len()).sum();
    Ok(total as f64 / logs.len() as f64)
}

/// Fraction of episodes whose target ranked within the top `k` under the
/// initial query, before any interaction. Measures how much work the
/// conversation has left to do.
pub fn first_turn_recall(logs: &[EpisodeLog], k: usize) -> Result<f64> {
    if logs.is_empty() {
        return Err(Error::NoCases);
    }
    if k == 0 {
        return Err(Error::InvalidParam("recall cutoff must be positive".into()));
    }
    let hits = logs
        .iter()
        .filter(|l| l.rank_at_reset().is_some_and(|r| r <= k))
        .count();
    Ok(hits as f64 / logs.len() as f64)
}

/// Length of the longest episode, capped at `max_turns`.
fn effective_horizon(logs: &[EpisodeLog], max_turns: usize) -> usize {
    logs.iter()
        .map(|l| l.turns.len())
        .max()
        .unwrap_or(0)
        .min(max_turns)
}

/// Per-turn asking rate: entry `t - 1` is the fraction of episodes still
/// active at turn `t` that chose to ask. The vector stops at the last turn
/// any episode reached, so denominators are always the *active* episodes,
/// never the full set.
pub fn ask_trajectory(logs: &[EpisodeLog], max_turns: usize) -> Result<Vec<f64>> {
    if logs.is_empty() {
        return Err(Error::NoCases);
    }
    let horizon = effective_horizon(logs, max_turns);
    let mut rates = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let active: Vec<&EpisodeLog> = logs.iter().filter(|l| l.turns.len() >= t).collect();
        if active.is_empty() {
            break;
        }
        let asks = active
            .iter()
            .filter(|l| l.turns[t - 1].action == Action::Ask)
            .count();
        rates.push(asks as f64 / active.len() as f64);
    }
    Ok(rates)
}

/// One clarification turn's effect on the target's rank. `gain` is
/// rank-before minus rank-after: positive means the question helped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskGain {
    pub user_id: String,
    pub turn: usize,
    pub rank_before: usize,
    pub rank_after: usize,
    pub gain: f64,
}

/// Every ask turn across the logs, in episode order.
pub fn ask_gains(logs: &[EpisodeLog]) -> Vec<AskGain> {
    let mut gains = Vec::new();
    for log in logs {
        for turn in &log.turns {
            if turn.action == Action::Ask {
                gains.push(AskGain {
                    user_id: log.user_id.clone(),
                    turn: turn.turn,
                    rank_before: turn.rank_before,
                    rank_after: turn.rank_after,
                    gain: turn.rank_before as f64 - turn.rank_after as f64,
                });
            }
        }
    }
    gains
}

/// Mean rank gain of the ask turns at each turn position; `None` where no
/// episode asked (no asks is not the same as zero gain). Same horizon as
/// [`ask_trajectory`].
pub fn mean_gain_by_turn(logs: &[EpisodeLog], max_turns: usize) -> Result<Vec<Option<f64>>> {
    if logs.is_empty() {
        return Err(Error::NoCases);
    }
    let horizon = effective_horizon(logs, max_turns);
    let mut out = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let gains: Vec<f64> = logs
            .iter()
            .filter_map(|l| l.turns.get(t - 1))
            .filter(|turn| turn.action == Action::Ask)
            .map(|turn| turn.rank_before as f64 - turn.rank_after as f64)
            .collect();
        if gains.is_empty() {
            out.push(None);
        } else {
            out.push(Some(gains.iter().sum::<f64>() / gains.len() as f64));
        }
    }
    Ok(out)
}

/// Dynamic-time-warping distance between two sequences under absolute
/// difference cost, with unconstrained monotone alignment and no length
/// normalization. Zero iff the sequences are equal.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParam(
            "dynamic time warping needs non-empty sequences".into(),
        ));
    }
    let (n, m) = (a.len(), b.len());
    // dp[j] carries row i-1; classic O(n·m) time, O(m) space.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr[0] = f64::INFINITY;
        for j in 1..=m {
            let cost = (a[i - 1] - b[j - 1]).abs();
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

/// Mean pairwise DTW distance over all unordered pairs of trajectories:
/// how differently a set of policies paces its questions.
pub fn strategy_diversity(trajectories: &[Vec<f64>]) -> Result<f64> {
    if trajectories.len() < 2 {
        return Err(Error::InvalidParam(
            "diversity needs at least two trajectories".into(),
        ));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..trajectories.len() {
        for j in (i + 1)..trajectories.len() {
            total += dtw(&trajectories[i], &trajectories[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Pearson correlation coefficient. Errors on mismatched or too-short
/// inputs and when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParam(
            "correlation needs at least two points".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidParam(
            "correlation is undefined for a constant sequence".into(),
        ));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// The headline evaluation numbers for one policy on one case set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub avg_turns: f64,
    pub recall_at_5: f64,
    pub ask_rate_by_turn: Vec<f64>,
    pub mean_gain_by_turn: Vec<Option<f64>>,
}

/// Compute the full report for one batch of episode logs.
pub fn compute_report(
    policy: &str,
    logs: &[EpisodeLog],
    max_turns: usize,
) -> Result<MetricsReport> {
    Ok(MetricsReport {
        policy: policy.to_string(),
        episodes: logs.len(),
        success_rate: success_rate(logs)?,
        avg_turns: avg_turns(logs)?,
        recall_at_5: first_turn_recall(logs, 5)?,
        ask_rate_by_turn: ask_trajectory(logs, max_turns)?,
        mean_gain_by_turn: mean_gain_by_turn(logs, max_turns)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::TurnRecord;
    use proptest::prelude::*;

    /// Build a log from (action, reward, rank_before, rank_after) rows.
    fn log(rows: &[(Action, f64, usize, usize)], outcome: Outcome) -> EpisodeLog {
        let turns: Vec<TurnRecord> = rows
            .iter()
            .enumerate()
            .map(|(i, &(action, reward, rank_before, rank_after))| TurnRecord {
                turn: i + 1,
                action,
                reward,
                rank_before,
                rank_after,
                question: None,
                presented: None,
            })
            .collect();
        let success_turn = match outcome {
            Outcome::Success => Some(turns.len()),
            Outcome::MaxTurns => None,
        };
        EpisodeLog {
            user_id: "u".into(),
            target_doc_id: "d".into(),
            domain: "dom".into(),
            outcome,
            success_turn,
            turns,
        }
    }

    #[test]
    fn headline_rates_match_hand_counts() {
        let logs = vec![
            log(&[(Action::Answer, 1.0, 3, 3)], Outcome::Success),
            log(
                &[(Action::Ask, 0.0, 7, 2), (Action::Answer, 1.0, 2, 2), (Action::Answer, 1.0, 2, 2)],
                Outcome::Success,
            ),
            log(
                &[
                    (Action::Ask, 0.0, 9, 9),
                    (Action::Ask, 0.0, 9, 9),
                    (Action::Ask, 0.0, 9, 9),
                    (Action::Ask, -0.5, 9, 9),
                ],
                Outcome::MaxTurns,
            ),
        ];
        assert!((success_rate(&logs).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        // Decision counts 1, 3, 4.
        assert!((avg_turns(&logs).unwrap() - 8.0 / 3.0).abs() < 1e-12);
        // Reset ranks 3, 7, 9 → only the first is within top 5.
        assert!((first_turn_recall(&logs, 5).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((first_turn_recall(&logs, 9).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_log_sets_are_rejected() {
        assert!(matches!(success_rate(&[]), Err(Error::NoCases)));
        assert!(matches!(avg_turns(&[]), Err(Error::NoCases)));
        assert!(matches!(first_turn_recall(&[], 5), Err(Error::NoCases)));
        assert!(matches!(ask_trajectory(&[], 10), Err(Error::NoCases)));
    }

    #[test]
    fn ask_trajectory_uses_active_episode_denominators() {
        let logs = vec![
            // Asks at t1, answers (success) at t2.
            log(&[(Action::Ask, 0.0, 6, 2), (Action::Answer, 1.0, 2, 2)], Outcome::Success),
            // Answers (fails) t1, asks t2, answers t3.
            log(
                &[
                    (Action::Answer, 0.0, 6, 6),
                    (Action::Ask, 0.0, 6, 1),
                    (Action::Answer, 1.0, 1, 1),
                ],
                Outcome::Success,
            ),
            // Immediate success.
            log(&[(Action::Answer, 1.0, 1, 1)], Outcome::Success),
        ];
        let traj = ask_trajectory(&logs, 10).unwrap();
        // t1: 1 ask of 3 active; t2: 1 of 2; t3: 0 of 1. Truncated at 3.
        assert_eq!(traj.len(), 3);
        assert!((traj[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((traj[1] - 0.5).abs() < 1e-12);
        assert_eq!(traj[2], 0.0);
    }

    #[test]
    fn trajectory_is_capped_by_the_turn_budget() {
        let logs = vec![log(
            &[(Action::Ask, 0.0, 5, 5), (Action::Ask, 0.0, 5, 5), (Action::Answer, 1.0, 5, 5)],
            Outcome::Success,
        )];
        assert_eq!(ask_trajectory(&logs, 2).unwrap().len(), 2);
    }

    #[test]
    fn gains_cover_only_ask_turns() {
        let logs = vec![log(
            &[
                (Action::Ask, 0.0, 8, 2),
                (Action::Answer, 0.0, 2, 2),
                (Action::Ask, 0.0, 2, 3),
                (Action::Answer, 1.0, 3, 3),
            ],
            Outcome::Success,
        )];
        let gains = ask_gains(&logs);
        assert_eq!(gains.len(), 2);
        assert_eq!(gains[0].turn, 1);
        assert_eq!(gains[0].gain, 6.0);
        assert_eq!(gains[1].turn, 3);
        assert_eq!(gains[1].gain, -1.0);

        let by_turn = mean_gain_by_turn(&logs, 10).unwrap();
        assert_eq!(by_turn.len(), 4);
        assert_eq!(by_turn[0], Some(6.0));
        assert_eq!(by_turn[1], None); // an answer turn, not zero gain
        assert_eq!(by_turn[2], Some(-1.0));
        assert_eq!(by_turn[3], None);
    }

    #[test]
    fn dtw_matches_hand_dynamic_program() {
        // Worked 3×2 table: optimal alignment warps 2 against 1 or 3.
        assert!((dtw(&[1.0, 2.0, 3.0], &[1.0, 3.0]).unwrap() - 1.0).abs() < 1e-12);
        // Equal sequences are distance zero.
        assert_eq!(dtw(&[0.5, 0.25], &[0.5, 0.25]).unwrap(), 0.0);
        // Constant sequences: every cell costs |c−d|, path length max(n,m).
        assert_eq!(dtw(&[2.0, 2.0, 2.0], &[5.0]).unwrap(), 9.0);
        assert!(dtw(&[], &[1.0]).is_err());
    }

    /// Exhaustive minimum over all monotone alignment paths — the oracle
    /// the dynamic program must agree with.
    fn dtw_by_enumeration(a: &[f64], b: &[f64]) -> f64 {
        fn go(a: &[f64], b: &[f64], i: usize, j: usize) -> f64 {
            let cost = (a[i] - b[j]).abs();
            if i == 0 && j == 0 {
                return cost;
            }
            let mut best = f64::INFINITY;
            if i > 0 {
                best = best.min(go(a, b, i - 1, j));
            }
            if j > 0 {
                best = best.min(go(a, b, i, j - 1));
            }
            if i > 0 && j > 0 {
                best = best.min(go(a, b, i - 1, j - 1));
            }
            cost + best
        }
        go(a, b, a.len() - 1, b.len() - 1)
    }

    #[test]
    fn dtw_agrees_with_path_enumeration_on_fixed_cases() {
        let cases: &[(&[f64], &[f64])] = &[
            (&[1.0, 2.0, 3.0], &[1.0, 3.0]),
            (&[0.0, 1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]),
            (&[3.0], &[1.0, 2.0, 3.0, 4.0]),
            (&[0.2, 0.9, 0.9, 0.1], &[0.8, 0.2]),
        ];
        for (a, b) in cases {
            let fast = dtw(a, b).unwrap();
            let slow = dtw_by_enumeration(a, b);
            assert!((fast - slow).abs() < 1e-12, "{a:?} vs {b:?}: {fast} != {slow}");
        }
    }

    #[test]
    fn diversity_is_the_mean_of_pairwise_distances() {
        let t1 = vec![0.0, 0.0];
        let t2 = vec![1.0, 1.0];
        let t3 = vec![0.0, 1.0];
        // dtw pairs: (t1,t2)=2, (t1,t3)=1, (t2,t3)=1.
        let d = strategy_diversity(&[t1, t2, t3]).unwrap();
        assert!((d - 4.0 / 3.0).abs() < 1e-12);
        assert!(strategy_diversity(&[vec![1.0]]).is_err());
    }

    #[test]
    fn pearson_matches_hand_cases_and_guards() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn report_serializes_round_trip() {
        let logs = vec![
            log(&[(Action::Ask, 0.0, 7, 2), (Action::Answer, 1.0, 2, 2)], Outcome::Success),
            log(&[(Action::Answer, 1.0, 1, 1)], Outcome::Success),
        ];
        let report = compute_report("learned", &logs, 10).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
        assert_eq!(report.episodes, 2);
        assert_eq!(report.success_rate, 1.0);
    }

    proptest! {
        #[test]
        fn dtw_agrees_with_enumeration(
            a in proptest::collection::vec(0u8..4, 1..5),
            b in proptest::collection::vec(0u8..4, 1..5),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let fast = dtw(&a, &b).unwrap();
            let slow = dtw_by_enumeration(&a, &b);
            prop_assert!((fast - slow).abs() < 1e-9);
        }

        #[test]
        fn dtw_is_symmetric_nonnegative_and_zero_on_self(
            a in proptest::collection::vec(0u8..4, 1..6),
            b in proptest::collection::vec(0u8..4, 1..6),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = dtw(&a, &b).unwrap();
            let ba = dtw(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(dtw(&a, &a).unwrap(), 0.0);
        }
    }
}
