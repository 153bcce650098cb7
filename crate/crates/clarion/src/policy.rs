//! Decision policies: the learned planner plus the fixed baselines it is
//! compared against.

use crate::encoder::State;
use crate::error::Result;
use crate::planner::{Action, QNetwork};

/// A rule mapping (state, turn) to ask-or-answer.
///
/// The fixed baselines ignore the state; the learned policy ignores the
/// turn. Keeping them behind one type lets evaluation and analysis treat
/// every strategy identically.
pub enum Policy<'a> {
    /// Ask every turn, never present.
    AlwaysAsk,
    /// Present immediately, every turn.
    NeverAsk,
    /// Ask for the first `n` turns, then present.
    AskFirstN(usize),
    /// Greedy ask-or-answer from a trained value network.
    Greedy(&'a QNetwork),
}

impl Policy<'_> {
    /// Decide the action for the current turn (1-based).
    pub fn decide(&self, state: &State, turn: usize) -> Result<Action> {
        match self {
            Policy::AlwaysAsk => Ok(Action::Ask),
            Policy::NeverAsk => Ok(Action::Answer),
            Policy::AskFirstN(n) => Ok(if turn <= *n { Action::Ask } else { Action::Answer }),
            Policy::Greedy(net) => net.greedy_action(state),
        }
    }

    /// Stable name used in report rows and file columns.
    pub fn name(&self) -> String {
        match self {
            Policy::AlwaysAsk => "always-ask".to_string(),
            Policy::NeverAsk => "never-ask".to_string(),
            Policy::AskFirstN(n) => format!("ask-first-{n}"),
            Policy::Greedy(_) => "learned".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn dummy_state(d: usize, k: usize) -> State {
        State {
            history_emb: vec![0.0; d],
            docs_emb: vec![0.0; d],
            scores: vec![0.0; k],
        }
    }

    #[test]
    fn fixed_baselines_ignore_the_state() {
        let s = dummy_state(4, 3);
        assert_eq!(Policy::AlwaysAsk.decide(&s, 1).unwrap(), Action::Ask);
        assert_eq!(Policy::AlwaysAsk.decide(&s, 99).unwrap(), Action::Ask);
        assert_eq!(Policy::NeverAsk.decide(&s, 1).unwrap(), Action::Answer);
    }

    #[test]
    fn ask_first_n_switches_after_n_turns() {
        let s = dummy_state(4, 3);
        let p = Policy::AskFirstN(2);
        assert_eq!(p.decide(&s, 1).unwrap(), Action::Ask);
        assert_eq!(p.decide(&s, 2).unwrap(), Action::Ask);
        assert_eq!(p.decide(&s, 3).unwrap(), Action::Answer);
        // n = 0 degenerates to never asking.
        assert_eq!(Policy::AskFirstN(0).decide(&s, 1).unwrap(), Action::Answer);
    }

    #[test]
    fn greedy_policy_follows_the_network() {
        let mut rng = stream(7, "net.init");
        let net = QNetwork::init(4, 3, 8, &mut rng).unwrap();
        let s = dummy_state(4, 3);
        let expected = net.greedy_action(&s).unwrap();
        assert_eq!(Policy::Greedy(&net).decide(&s, 1).unwrap(), expected);
        assert_eq!(Policy::Greedy(&net).decide(&s, 10).unwrap(), expected);
    }

    #[test]
    fn names_are_stable() {
        assert_eq!(Policy::AlwaysAsk.name(), "always-ask");
        assert_eq!(Policy::NeverAsk.name(), "never-ask");
        assert_eq!(Policy::AskFirstN(3).name(), "ask-first-3");
    }
}
