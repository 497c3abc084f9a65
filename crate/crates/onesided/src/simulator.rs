//! Seeded Monte Carlo arena for playing strategies against each other.
//!
//! An episode follows the play protocol: the state is drawn once from the
//! prior, each stage both sides commit an action with only their own
//! information, and the informed player's action is then announced to both.
//! Players are anything implementing [`StagePlayer`]; fixed behavior
//! strategies and the replanning controllers from
//! [`crate::discounted_play`] both qualify, so the same arena reproduces
//! finite-horizon averages and discounted online play.
//!
//! Reproducibility is a contract, not an accident: every episode runs on
//! its own counter-based RNG stream derived from one seed, and the
//! aggregate is folded in stream order, so a `(seed, trials)` pair pins the
//! report bit for bit no matter how episodes are scheduled across threads.

use crate::finite_horizon::{InformedStrategy, StageWeights, UninformedStrategy};
use crate::game_model::{sample_index, GameSpec};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// A strategy driven one stage at a time.
///
/// `act` samples this stage's own action; `observe` then delivers the
/// informed player's realized action, the only public part of a stage.
/// The RNG is the arena's concrete stream type so players stay object-safe.
pub trait StagePlayer {
    fn act(&mut self, rng: &mut ChaCha8Rng) -> Result<usize>;
    fn observe(&mut self, informed_action: usize) -> Result<()>;
}

/// Builds the informed seat for one episode after the state is drawn.
pub type InformedSeat<'a> = dyn Fn(usize) -> Result<Box<dyn StagePlayer>> + Sync + 'a;

/// Builds the uninformed seat for one episode.
pub type UninformedSeat<'a> = dyn Fn() -> Result<Box<dyn StagePlayer>> + Sync + 'a;

/// Plays a fixed informed behavior strategy for one realized state,
/// following its own action history down the strategy tree.
pub struct FixedInformedPlayer {
    strategy: Arc<InformedStrategy>,
    state: usize,
    stage: usize,
    code: usize,
}

impl FixedInformedPlayer {
    pub fn new(strategy: Arc<InformedStrategy>, state: usize) -> Result<FixedInformedPlayer> {
        if state >= strategy.num_states() {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: state,
                bound: strategy.num_states(),
            });
        }
        Ok(FixedInformedPlayer {
            strategy,
            state,
            stage: 0,
            code: 0,
        })
    }
}

impl StagePlayer for FixedInformedPlayer {
    fn act(&mut self, rng: &mut ChaCha8Rng) -> Result<usize> {
        if self.stage >= self.strategy.depth() {
            return Err(Error::InvalidArgument(format!(
                "strategy covers {} stages and they are spent",
                self.strategy.depth()
            )));
        }
        let mix = self
            .strategy
            .action_probabilities(self.stage, self.code, self.state);
        Ok(sample_index(mix, rng.gen()))
    }

    fn observe(&mut self, informed_action: usize) -> Result<()> {
        let tree = self.strategy.tree();
        if informed_action >= tree.num_actions() {
            return Err(Error::IndexOutOfRange {
                what: "informed action",
                index: informed_action,
                bound: tree.num_actions(),
            });
        }
        self.code = tree.child_code(self.code, informed_action);
        self.stage += 1;
        Ok(())
    }
}

/// Plays a fixed reply strategy, following the observed informed actions
/// down the strategy tree.
pub struct FixedUninformedPlayer {
    strategy: Arc<UninformedStrategy>,
    stage: usize,
    code: usize,
}

impl FixedUninformedPlayer {
    pub fn new(strategy: Arc<UninformedStrategy>) -> FixedUninformedPlayer {
        FixedUninformedPlayer {
            strategy,
            stage: 0,
            code: 0,
        }
    }
}

impl StagePlayer for FixedUninformedPlayer {
    fn act(&mut self, rng: &mut ChaCha8Rng) -> Result<usize> {
        if self.stage >= self.strategy.depth() {
            return Err(Error::InvalidArgument(format!(
                "strategy covers {} stages and they are spent",
                self.strategy.depth()
            )));
        }
        let mix = self.strategy.reply_probabilities(self.stage, self.code);
        Ok(sample_index(mix, rng.gen()))
    }

    fn observe(&mut self, informed_action: usize) -> Result<()> {
        let tree = self.strategy.tree();
        if informed_action >= tree.num_actions() {
            return Err(Error::IndexOutOfRange {
                what: "informed action",
                index: informed_action,
                bound: tree.num_actions(),
            });
        }
        self.code = tree.child_code(self.code, informed_action);
        self.stage += 1;
        Ok(())
    }
}

impl StagePlayer for crate::discounted_play::InformedController {
    fn act(&mut self, rng: &mut ChaCha8Rng) -> Result<usize> {
        self.step(rng)
    }

    fn observe(&mut self, informed_action: usize) -> Result<()> {
        crate::discounted_play::InformedController::observe(self, informed_action)
    }
}

impl StagePlayer for crate::discounted_play::UninformedController {
    fn act(&mut self, rng: &mut ChaCha8Rng) -> Result<usize> {
        self.step(rng)
    }

    fn observe(&mut self, informed_action: usize) -> Result<()> {
        crate::discounted_play::UninformedController::observe(self, informed_action)
    }
}

/// One stage of one episode.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    /// Stage number, starting at 1.
    pub stage: usize,
    pub action: usize,
    pub reply: usize,
    pub payoff: f64,
    pub weight: f64,
}

/// Complete record of one playthrough.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpisodeLog {
    /// The state drawn at the start and fixed for the whole episode.
    pub state: usize,
    pub stages: Vec<StageRecord>,
    /// Weighted payoff total, `sum_t w_t M(k, a_t, b_t)`.
    pub total: f64,
}

/// Plays one episode: draws the state, then runs one stage per weight,
/// announcing each informed action to both seats.
pub fn run_episode(
    g: &GameSpec,
    weights: &StageWeights,
    informed: &InformedSeat,
    uninformed: &UninformedSeat,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeLog> {
    let state = sample_index(g.prior().as_slice(), rng.gen());
    let mut informed = informed(state)?;
    let mut uninformed = uninformed()?;
    let mut stages = Vec::with_capacity(weights.len());
    let mut total = 0.0;
    for d in 0..weights.len() {
        let action = informed.act(rng)?;
        if action >= g.num_actions_informed() {
            return Err(Error::IndexOutOfRange {
                what: "informed action",
                index: action,
                bound: g.num_actions_informed(),
            });
        }
        let reply = uninformed.act(rng)?;
        if reply >= g.num_actions_uninformed() {
            return Err(Error::IndexOutOfRange {
                what: "uninformed reply",
                index: reply,
                bound: g.num_actions_uninformed(),
            });
        }
        let payoff = g.payoff_at(state, action, reply);
        let weight = weights.get(d);
        total += weight * payoff;
        stages.push(StageRecord {
            stage: d + 1,
            action,
            reply,
            payoff,
            weight,
        });
        informed.observe(action)?;
        uninformed.observe(action)?;
    }
    Ok(EpisodeLog {
        state,
        stages,
        total,
    })
}

/// Aggregate of a Monte Carlo campaign.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub mean: f64,
    /// Sample standard deviation of episode totals.
    pub std_dev: f64,
    /// `1.96 std_dev / sqrt(trials)`.
    pub ci95_halfwidth: f64,
    pub seed: u64,
}

/// Runs `trials` independent episodes and keeps the per-stage logs.
///
/// Episode `i` plays on the RNG stream `i` of a counter-based generator
/// seeded once with `seed`, so trials are independent, parallelizable, and
/// exactly reproducible; logs come back in stream order.
pub fn monte_carlo_with_logs(
    g: &GameSpec,
    weights: &StageWeights,
    informed: &InformedSeat,
    uninformed: &UninformedSeat,
    trials: usize,
    seed: u64,
) -> Result<(MonteCarloReport, Vec<EpisodeLog>)> {
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "a Monte Carlo campaign needs at least one trial".into(),
        ));
    }
    let logs: Vec<EpisodeLog> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            run_episode(g, weights, informed, uninformed, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mean = logs.iter().map(|l| l.total).sum::<f64>() / trials as f64;
    let std_dev = if trials < 2 {
        0.0
    } else {
        let ss: f64 = logs.iter().map(|l| (l.total - mean).powi(2)).sum();
        (ss / (trials - 1) as f64).sqrt()
    };
    let report = MonteCarloReport {
        trials,
        mean,
        std_dev,
        ci95_halfwidth: 1.96 * std_dev / (trials as f64).sqrt(),
        seed,
    };
    Ok((report, logs))
}

/// [`monte_carlo_with_logs`] without keeping the logs.
pub fn monte_carlo(
    g: &GameSpec,
    weights: &StageWeights,
    informed: &InformedSeat,
    uninformed: &UninformedSeat,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    Ok(monte_carlo_with_logs(g, weights, informed, uninformed, trials, seed)?.0)
}
