//! Game descriptions, beliefs over states, and regret vectors.
//!
//! A game is a five-tuple: a state set `K`, action sets `A` (informed
//! player 1, the maximizer) and `B` (uninformed player 2, the minimizer),
//! one payoff matrix per state, and a prior over states. [`GameSpec`] is the
//! JSON-facing carrier of that tuple; everything downstream works with the
//! dense index spaces `0..|K|`, `0..|A|`, `0..|B|` and only touches the
//! string labels at the I/O boundary.
//!
//! The prior must be strictly positive (an impossible state should simply be
//! dropped from the model) and is renormalized exactly once, at validation
//! time. Posterior beliefs produced later by conditioning are allowed to
//! contain exact zeros; [`Belief`] models both.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack allowed on belief entries and sums.
pub const BELIEF_TOLERANCE: f64 = 1e-9;

/// Slack allowed on the prior's sum before renormalization; hand-written
/// documents with entries like `0.333333` should still load.
const PRIOR_SUM_TOLERANCE: f64 = 1e-6;

/// A zero-sum repeated game with one-sided incomplete information.
///
/// `payoff[k][a][b]` is what player 2 pays player 1 when the state is `k`,
/// player 1 plays `a` and player 2 plays `b`. Labels are only used in JSON
/// input and output; all solver code addresses states and actions by index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    /// State labels, one per payoff matrix.
    pub states: Vec<String>,
    /// Action labels for the informed player (matrix rows).
    pub actions_informed: Vec<String>,
    /// Action labels for the uninformed player (matrix columns).
    pub actions_uninformed: Vec<String>,
    /// Payoff matrices indexed `[state][informed action][uninformed action]`.
    pub payoff: Vec<Vec<Vec<f64>>>,
    /// Prior over states; strictly positive, renormalized by [`validate`].
    ///
    /// [`validate`]: GameSpec::validate
    pub initial_probability: Vec<f64>,
}

impl GameSpec {
    /// Parses a JSON game document and validates it.
    pub fn from_json_str(text: &str) -> Result<GameSpec> {
        let mut spec: GameSpec =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Serializes back to JSON. Numbers keep full round-trip precision.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("game spec is always serializable")
    }

    /// Checks every structural invariant and renormalizes the prior.
    ///
    /// This is the one place the prior is rescaled: its sum may drift from 1
    /// by at most `1e-6` (hand-entered thirds and the like), anything larger
    /// is reported as an error carrying the observed sum.
    pub fn validate(&mut self) -> Result<()> {
        check_labels("states", &self.states)?;
        check_labels("actions_informed", &self.actions_informed)?;
        check_labels("actions_uninformed", &self.actions_uninformed)?;

        let (k, a, b) = (
            self.states.len(),
            self.actions_informed.len(),
            self.actions_uninformed.len(),
        );
        if self.payoff.len() != k {
            return Err(Error::Validation(format!(
                "payoff has {} matrices but there are {} states",
                self.payoff.len(),
                k
            )));
        }
        for (ki, matrix) in self.payoff.iter().enumerate() {
            if matrix.len() != a {
                return Err(Error::Validation(format!(
                    "payoff matrix for state \"{}\" has {} rows, expected {}",
                    self.states[ki],
                    matrix.len(),
                    a
                )));
            }
            for (ai, row) in matrix.iter().enumerate() {
                if row.len() != b {
                    return Err(Error::Validation(format!(
                        "payoff row for state \"{}\", action \"{}\" has {} entries, expected {}",
                        self.states[ki],
                        self.actions_informed[ai],
                        row.len(),
                        b
                    )));
                }
                if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "payoff for state \"{}\", action \"{}\" contains non-finite value {}",
                        self.states[ki], self.actions_informed[ai], bad
                    )));
                }
            }
        }

        if self.initial_probability.len() != k {
            return Err(Error::Validation(format!(
                "initial_probability has {} entries but there are {} states",
                self.initial_probability.len(),
                k
            )));
        }
        for (ki, &p) in self.initial_probability.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::Validation(format!(
                    "initial_probability[{}] = {} must be strictly positive",
                    ki, p
                )));
            }
        }
        let sum: f64 = self.initial_probability.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(Error::Validation(format!(
                "initial_probability sums to {}",
                sum
            )));
        }
        for p in &mut self.initial_probability {
            *p /= sum;
        }
        Ok(())
    }

    /// Number of states `|K|`.
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Number of informed-player actions `|A|`.
    pub fn num_actions_informed(&self) -> usize {
        self.actions_informed.len()
    }

    /// Number of uninformed-player actions `|B|`.
    pub fn num_actions_uninformed(&self) -> usize {
        self.actions_uninformed.len()
    }

    /// The payoff row `M^k_{a,:}`, one entry per uninformed action.
    pub fn payoff_row(&self, state: usize, action: usize) -> Result<&[f64]> {
        let matrix = self.payoff.get(state).ok_or(Error::IndexOutOfRange {
            what: "state",
            index: state,
            bound: self.num_states(),
        })?;
        matrix
            .get(action)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                what: "informed action",
                index: action,
                bound: self.num_actions_informed(),
            })
    }

    /// Single payoff entry `M^k_{a,b}`; panics on bad indices, so only for
    /// loops that already validated their ranges.
    pub fn payoff_at(&self, state: usize, action: usize, reply: usize) -> f64 {
        self.payoff[state][action][reply]
    }

    /// Largest absolute payoff across all states and action pairs; zero for
    /// the all-zero game.
    pub fn max_abs_payoff(&self) -> f64 {
        self.payoff
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// The validated prior as a [`Belief`].
    pub fn prior(&self) -> Belief {
        Belief(self.initial_probability.clone())
    }
}

fn check_labels(field: &str, labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Validation(format!("{field} must be non-empty")));
    }
    for (i, label) in labels.iter().enumerate() {
        if label.is_empty() {
            return Err(Error::Validation(format!("{field}[{i}] is empty")));
        }
        if labels[..i].contains(label) {
            return Err(Error::Validation(format!(
                "duplicate {field} label \"{label}\""
            )));
        }
    }
    Ok(())
}

/// Reads and validates a JSON game document from disk.
pub fn load_game(path: impl AsRef<Path>) -> Result<GameSpec> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Parse(format!("{}: {}", path.as_ref().display(), e)))?;
    GameSpec::from_json_str(&text)
}

/// Smallest index whose cumulative probability exceeds `roll`, which should
/// be uniform on `[0, 1)`. The last index absorbs rounding slack so a roll
/// just under 1 cannot fall off the end.
pub(crate) fn sample_index(probs: &[f64], roll: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p.max(0.0);
        if roll < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// A probability vector over states.
///
/// Entries may be exactly zero (a posterior can rule states out), must lie
/// in `[0, 1]` up to [`BELIEF_TOLERANCE`], and must sum to 1 within the same
/// tolerance. Every constructor in the crate goes through [`Belief::new`],
/// so holding a `Belief` means holding a checked distribution.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Validates and wraps a probability vector.
    pub fn new(probabilities: Vec<f64>) -> Result<Belief> {
        Self::check(&probabilities)?;
        Ok(Belief(probabilities))
    }

    /// The shared assertion behind every belief in the crate.
    pub fn check(probabilities: &[f64]) -> Result<()> {
        if probabilities.is_empty() {
            return Err(Error::Validation("belief must be non-empty".into()));
        }
        for (k, &p) in probabilities.iter().enumerate() {
            if !p.is_finite() || p < -BELIEF_TOLERANCE || p > 1.0 + BELIEF_TOLERANCE {
                return Err(Error::Validation(format!(
                    "belief[{k}] = {p} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > BELIEF_TOLERANCE {
            return Err(Error::Validation(format!("belief sums to {sum}, not 1")));
        }
        Ok(())
    }

    /// The uniform belief over `n` states.
    pub fn uniform(n: usize) -> Belief {
        assert!(n > 0, "belief needs at least one state");
        Belief(vec![1.0 / n as f64; n])
    }

    /// Probability of state `k`.
    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True only for an impossible zero-length belief; kept for clippy's sake.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Borrow the raw probabilities.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// A vector payoff over states with free sign, one entry per state.
///
/// The uninformed player's play is steered by such a vector: entry `k` keeps
/// score of how much an omniscient opponent who knew the state was `k` could
/// have gained so far, rescaled each stage. No simplex constraints apply.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RegretVector(Vec<f64>);

impl RegretVector {
    /// Wraps a finite vector; one entry per state.
    pub fn new(values: Vec<f64>) -> Result<RegretVector> {
        if values.is_empty() {
            return Err(Error::Validation("regret vector must be non-empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "regret vector contains non-finite value {bad}"
            )));
        }
        Ok(RegretVector(values))
    }

    /// Entry for state `k`.
    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Number of states.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True only for an impossible zero-length vector.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Borrow the raw values.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::GameSpec;

    /// Two-channel interdiction game shared by tests across the crate.
    pub(crate) const NETWORK_GAME: &str = r#"{
        "states": ["1", "2"],
        "actions_informed": ["1", "2"],
        "actions_uninformed": ["1", "2", "o"],
        "payoff": [[[1, 4, 3], [2, 1, 1]],
                   [[1, 2, 1], [4, 1, 3]]],
        "initial_probability": [0.5, 0.5]
    }"#;

    pub(crate) fn network_game() -> GameSpec {
        GameSpec::from_json_str(NETWORK_GAME).expect("fixture is valid")
    }

    /// One state, one action per side, constant payoff.
    pub(crate) fn singleton_game(payoff: f64) -> GameSpec {
        let mut g = GameSpec {
            states: vec!["s".into()],
            actions_informed: vec!["a".into()],
            actions_uninformed: vec!["b".into()],
            payoff: vec![vec![vec![payoff]]],
            initial_probability: vec![1.0],
        };
        g.validate().expect("singleton fixture is valid");
        g
    }

    /// Deterministic test RNG, xorshift64.
    pub(crate) struct XorShift(pub u64);

    impl XorShift {
        pub(crate) fn next(&mut self) -> u64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            self.0
        }

        pub(crate) fn below(&mut self, n: usize) -> usize {
            (self.next() % n as u64) as usize
        }
    }

    /// Random valid game with payoffs on a grid in [-5, 5] and a strictly
    /// positive prior.
    pub(crate) fn random_game(
        rng: &mut XorShift,
        max_states: usize,
        max_actions: usize,
        max_replies: usize,
    ) -> GameSpec {
        let k_count = 1 + rng.below(max_states);
        let a_count = 1 + rng.below(max_actions);
        let b_count = 1 + rng.below(max_replies);
        let payoff = (0..k_count)
            .map(|_| {
                (0..a_count)
                    .map(|_| {
                        (0..b_count)
                            .map(|_| (rng.below(2001) as f64 - 1000.0) / 200.0)
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let raw: Vec<f64> = (0..k_count).map(|_| 1.0 + rng.below(9) as f64).collect();
        let total: f64 = raw.iter().sum();
        let mut g = GameSpec {
            states: (0..k_count).map(|i| format!("s{i}")).collect(),
            actions_informed: (0..a_count).map(|i| format!("a{i}")).collect(),
            actions_uninformed: (0..b_count).map(|i| format!("b{i}")).collect(),
            payoff,
            initial_probability: raw.iter().map(|v| v / total).collect(),
        };
        g.validate().expect("random game is valid");
        g
    }
}
