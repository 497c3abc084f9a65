//! The two state updates that drive online play.
//!
//! During play each side compresses the history into one sufficient
//! statistic. The informed player tracks the opponent's posterior over
//! states: his own mixed actions leak information, and [`belief_update`] is
//! the Bayes step `pi^k = p^k x^k(a) / xbar(a)` after his action `a` is
//! observed, where `xbar` is the action marginal the opponent actually sees
//! ([`weighted_action_marginal`]). The uninformed player tracks a per-state
//! regret vector instead: how much each state's informed opponent has
//! collected so far against her replies, rescaled each stage by `1/(1 - l)`
//! so the remaining discounted game always looks like a fresh unit-weight
//! one ([`regret_update`]).
//!
//! Both maps are exact recursions, not approximations. The approximation in
//! [`crate::discounted_play`] comes only from truncating the value function
//! these statistics index into.

use crate::game_model::{Belief, GameSpec, RegretVector, BELIEF_TOLERANCE};
use crate::{Error, Result};

/// An observed action whose marginal probability is at or below this is
/// treated as impossible under the declared strategy.
pub const ZERO_ACTION_THRESHOLD: f64 = 1e-12;

/// One stage of informed-player behavior: a mixed action over `A` per state.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyMatrix {
    num_actions: usize,
    probs: Vec<f64>,
}

impl StrategyMatrix {
    /// Builds from one distribution per state, validating each.
    pub fn new(per_state: Vec<Vec<f64>>) -> Result<StrategyMatrix> {
        let num_actions = per_state
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Validation("strategy matrix has no states".into()))?;
        if num_actions == 0 {
            return Err(Error::Validation("strategy matrix has no actions".into()));
        }
        let mut probs = Vec::with_capacity(per_state.len() * num_actions);
        for (k, mix) in per_state.iter().enumerate() {
            if mix.len() != num_actions {
                return Err(Error::Validation(format!(
                    "state {k} has {} action probabilities, expected {num_actions}",
                    mix.len()
                )));
            }
            let sum: f64 = mix.iter().sum();
            if (sum - 1.0).abs() > BELIEF_TOLERANCE
                || mix.iter().any(|&v| !v.is_finite() || v < -1e-12)
            {
                return Err(Error::Validation(format!(
                    "state {k} does not carry a distribution (sum {sum})"
                )));
            }
            probs.extend(mix.iter().map(|&v| v.max(0.0)));
        }
        Ok(StrategyMatrix {
            num_actions,
            probs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.probs.len() / self.num_actions
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// The mixed action played when the state is `k`.
    pub fn state_mix(&self, k: usize) -> &[f64] {
        &self.probs[k * self.num_actions..(k + 1) * self.num_actions]
    }
}

/// The action distribution an observer with belief `p` expects:
/// `xbar(a) = sum_k p^k x^k(a)`.
pub fn weighted_action_marginal(p: &Belief, x: &StrategyMatrix) -> Vec<f64> {
    assert_eq!(p.len(), x.num_states(), "belief/strategy state mismatch");
    let mut out = vec![0.0; x.num_actions()];
    for k in 0..p.len() {
        let pk = p.get(k);
        if pk == 0.0 {
            continue;
        }
        for (slot, &prob) in out.iter_mut().zip(x.state_mix(k)) {
            *slot += pk * prob;
        }
    }
    out
}

/// Bayes update of the state posterior after action `a` is observed.
///
/// States the prior already excludes stay at exactly zero. Observing an
/// action the strategy gives (numerically) zero probability is an error:
/// in self-play it cannot happen, and in replay it means the log and the
/// declared strategy do not belong together.
pub fn belief_update(p: &Belief, x: &StrategyMatrix, a: usize) -> Result<Belief> {
    if a >= x.num_actions() {
        return Err(Error::IndexOutOfRange {
            what: "informed action",
            index: a,
            bound: x.num_actions(),
        });
    }
    let marginal = weighted_action_marginal(p, x);
    if marginal[a] <= ZERO_ACTION_THRESHOLD {
        return Err(Error::ZeroProbabilityAction { action: a });
    }
    let posterior = (0..p.len())
        .map(|k| p.get(k) * x.state_mix(k)[a] / marginal[a])
        .collect();
    Belief::new(posterior)
}

/// Anti-discounted regret step after the informed player played `a` against
/// the reply mix `y`: `w'^k = (w^k + l * M^k[a] . y) / (1 - l)`.
pub fn regret_update(
    w: &RegretVector,
    y: &[f64],
    a: usize,
    lambda: f64,
    g: &GameSpec,
) -> Result<RegretVector> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "discount rate {lambda} outside (0, 1)"
        )));
    }
    if w.len() != g.num_states() {
        return Err(Error::Validation(format!(
            "regret vector has {} entries but the game has {} states",
            w.len(),
            g.num_states()
        )));
    }
    if y.len() != g.num_actions_uninformed() {
        return Err(Error::Validation(format!(
            "reply mix has {} entries but the game has {} replies",
            y.len(),
            g.num_actions_uninformed()
        )));
    }
    let sum: f64 = y.iter().sum();
    if (sum - 1.0).abs() > BELIEF_TOLERANCE || y.iter().any(|&v| v < -1e-12) {
        return Err(Error::Validation(format!(
            "reply mix is not a distribution (sum {sum})"
        )));
    }
    let updated = (0..g.num_states())
        .map(|k| {
            let row = g.payoff_row(k, a)?;
            let stage: f64 = row.iter().zip(y).map(|(m, yb)| m * yb).sum();
            Ok((w.get(k) + lambda * stage) / (1.0 - lambda))
        })
        .collect::<Result<Vec<f64>>>()?;
    RegretVector::new(updated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game_model::fixtures::network_game;
    use proptest::prelude::*;

    fn table_two_stage_one() -> StrategyMatrix {
        StrategyMatrix::new(vec![vec![0.64, 0.36], vec![0.35, 0.65]]).unwrap()
    }

    #[test]
    fn marginal_matches_hand_computation() {
        let p = Belief::new(vec![0.5, 0.5]).unwrap();
        let xbar = weighted_action_marginal(&p, &table_two_stage_one());
        assert!((xbar[0] - 0.495).abs() < 1e-12);
        assert!((xbar[1] - 0.505).abs() < 1e-12);
    }

    #[test]
    fn degenerate_belief_reads_off_one_column() {
        let p = Belief::new(vec![1.0, 0.0]).unwrap();
        let x = table_two_stage_one();
        assert_eq!(weighted_action_marginal(&p, &x), x.state_mix(0));
    }

    #[test]
    fn common_column_is_its_own_marginal() {
        let p = Belief::new(vec![0.3, 0.7]).unwrap();
        let x = StrategyMatrix::new(vec![vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap();
        let xbar = weighted_action_marginal(&p, &x);
        assert!((xbar[0] - 0.2).abs() < 1e-12);
        assert!((xbar[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn posterior_matches_hand_computation() {
        let p = Belief::new(vec![0.5, 0.5]).unwrap();
        let pi = belief_update(&p, &table_two_stage_one(), 0).unwrap();
        assert!((pi.get(0) - 64.0 / 99.0).abs() < 1e-12);
        assert!((pi.get(1) - 35.0 / 99.0).abs() < 1e-12);
    }

    #[test]
    fn non_revealing_strategy_leaves_the_belief_alone() {
        let p = Belief::new(vec![0.3, 0.7]).unwrap();
        let x = StrategyMatrix::new(vec![vec![0.4, 0.6], vec![0.4, 0.6]]).unwrap();
        for a in 0..2 {
            let pi = belief_update(&p, &x, a).unwrap();
            assert!((pi.get(0) - 0.3).abs() < 1e-12);
            assert!((pi.get(1) - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn single_state_belief_is_fixed() {
        let p = Belief::new(vec![1.0]).unwrap();
        let x = StrategyMatrix::new(vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(belief_update(&p, &x, 1).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn impossible_action_is_an_error() {
        let p = Belief::new(vec![0.5, 0.5]).unwrap();
        let x = StrategyMatrix::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            belief_update(&p, &x, 1),
            Err(Error::ZeroProbabilityAction { action: 1 })
        ));
        assert!(matches!(
            belief_update(&p, &x, 7),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn extinguished_states_stay_extinguished() {
        let p = Belief::new(vec![0.0, 1.0]).unwrap();
        let x = table_two_stage_one();
        for a in 0..2 {
            let pi = belief_update(&p, &x, a).unwrap();
            assert_eq!(pi.get(0), 0.0);
        }
    }

    #[test]
    fn regret_step_matches_hand_computation() {
        let g = network_game();
        let w = RegretVector::new(vec![-2.24, -2.24]).unwrap();
        let next = regret_update(&w, &[0.5, 0.5, 0.0], 0, 0.7, &g).unwrap();
        assert!((next.get(0) - (-0.49 / 0.3)).abs() < 1e-12);
        assert!((next.get(1) - (-1.19 / 0.3)).abs() < 1e-12);
    }

    #[test]
    fn zero_payoff_regret_is_pure_rescaling() {
        let mut g = network_game();
        for state in g.payoff.iter_mut() {
            for row in state.iter_mut() {
                row.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let zero = RegretVector::new(vec![0.0, 0.0]).unwrap();
        let next = regret_update(&zero, &[1.0, 0.0, 0.0], 0, 0.5, &g).unwrap();
        assert_eq!(next.as_slice(), &[0.0, 0.0]);
        let ones = RegretVector::new(vec![1.0, 1.0]).unwrap();
        let next = regret_update(&ones, &[1.0, 0.0, 0.0], 0, 0.5, &g).unwrap();
        assert_eq!(next.as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn bad_regret_inputs_are_rejected() {
        let g = network_game();
        let w = RegretVector::new(vec![0.0, 0.0]).unwrap();
        assert!(regret_update(&w, &[0.5, 0.5, 0.0], 0, 1.0, &g).is_err());
        assert!(regret_update(&w, &[0.5, 0.5], 0, 0.7, &g).is_err());
        assert!(regret_update(&w, &[0.9, 0.9, 0.0], 0, 0.7, &g).is_err());
        let short = RegretVector::new(vec![0.0]).unwrap();
        assert!(regret_update(&short, &[0.5, 0.5, 0.0], 0, 0.7, &g).is_err());
    }

    #[test]
    fn regret_update_is_affine_in_the_regret() {
        let g = network_game();
        let y = [0.2, 0.3, 0.5];
        let w1 = RegretVector::new(vec![1.5, -0.25]).unwrap();
        let w2 = RegretVector::new(vec![-3.0, 4.0]).unwrap();
        for i in 0..=10 {
            let alpha = i as f64 / 10.0;
            let blend = RegretVector::new(
                (0..2)
                    .map(|k| alpha * w1.get(k) + (1.0 - alpha) * w2.get(k))
                    .collect(),
            )
            .unwrap();
            let direct = regret_update(&blend, &y, 1, 0.7, &g).unwrap();
            let u1 = regret_update(&w1, &y, 1, 0.7, &g).unwrap();
            let u2 = regret_update(&w2, &y, 1, 0.7, &g).unwrap();
            for k in 0..2 {
                let mixed = alpha * u1.get(k) + (1.0 - alpha) * u2.get(k);
                assert!((direct.get(k) - mixed).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unrolled_updates_match_the_closed_form() {
        let g = network_game();
        let lambda = 0.7;
        let start = vec![-2.24, -2.24];
        let plays: [(usize, [f64; 3]); 4] = [
            (0, [0.5, 0.5, 0.0]),
            (1, [0.2, 0.3, 0.5]),
            (0, [0.0, 0.0, 1.0]),
            (1, [1.0, 0.0, 0.0]),
        ];
        let mut w = RegretVector::new(start.clone()).unwrap();
        for (t, (a, y)) in plays.iter().enumerate() {
            w = regret_update(&w, y, *a, lambda, &g).unwrap();
            let stages_done = t + 1;
            for k in 0..2 {
                let mut acc = start[k];
                for (s, (a_s, y_s)) in plays.iter().take(stages_done).enumerate() {
                    let row = g.payoff_row(k, *a_s).unwrap();
                    let stage: f64 = row.iter().zip(y_s).map(|(m, yb)| m * yb).sum();
                    acc += lambda * (1.0 - lambda).powi(s as i32) * stage;
                }
                let expected = (1.0 - lambda).powi(-(stages_done as i32)) * acc;
                assert!(
                    (w.get(k) - expected).abs() < 1e-8,
                    "stage {stages_done}, state {k}: {} vs {expected}",
                    w.get(k)
                );
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        /// The posterior is a mean-preserving split of the prior: averaging
        /// it over the observed action reproduces the prior exactly.
        #[test]
        fn beliefs_form_a_martingale(
            raw_p in proptest::collection::vec(0.0f64..1.0, 2..5),
            raw_x in proptest::collection::vec(0.001f64..1.0, 20),
        ) {
            let total: f64 = raw_p.iter().map(|v| v + 1e-3).sum();
            let p = Belief::new(raw_p.iter().map(|v| (v + 1e-3) / total).collect()).unwrap();
            let k_count = p.len();
            let a_count = 1 + raw_x.len() % 3;
            let per_state: Vec<Vec<f64>> = (0..k_count)
                .map(|k| {
                    let slice: Vec<f64> = (0..a_count)
                        .map(|a| raw_x[(k * a_count + a) % raw_x.len()])
                        .collect();
                    let s: f64 = slice.iter().sum();
                    slice.iter().map(|v| v / s).collect()
                })
                .collect();
            let x = StrategyMatrix::new(per_state).unwrap();
            let marginal = weighted_action_marginal(&p, &x);
            for k in 0..k_count {
                let mut mean = 0.0;
                for (a, &mass) in marginal.iter().enumerate() {
                    if mass <= ZERO_ACTION_THRESHOLD {
                        continue;
                    }
                    mean += mass * belief_update(&p, &x, a).unwrap().get(k);
                }
                prop_assert!((mean - p.get(k)).abs() < 1e-9);
            }
        }
    }
}
