//! Solvers for two-player zero-sum repeated games in which one player knows
//! which game is being played and the other only knows a prior.
//!
//! A game here is a finite family of payoff matrices `M^k` (one per state
//! `k`), a prior `p` over states, an action set `A` for the informed
//! maximizer and an action set `B` for the uninformed minimizer. Nature draws
//! `k` once, tells only player 1, and the stage game `M^k` is then played
//! repeatedly. Player 1 would like to exploit `k` without giving it away;
//! player 2 watches player 1's actions and updates a belief. Both security
//! levels can be computed exactly for finitely many stages, and approximated
//! with certified error bounds for the infinite discounted game.
//!
//! What the crate provides, module by module:
//!
//! * [`game_model`] — the game description, beliefs, regret vectors, JSON
//!   loading and validation.
//! * [`lp_backend`] — a small dense two-phase simplex solver with Bland's
//!   rule; every optimization in the crate goes through it, so results are
//!   deterministic and dependency-free.
//! * [`finite_horizon`] — security strategies and game values for the
//!   `N`-stage game, built from realization plans over player 1's action
//!   histories (player 2's own actions can be ignored by both players
//!   without loss).
//! * [`dynamics`] — the Bayesian belief update used by the informed player
//!   and the anti-discounted regret update used by the uninformed player.
//! * [`discounted_play`] — truncation-based approximated security strategies
//!   for the discounted infinite game, re-solved stage by stage, plus
//!   certified error bounds.
//! * [`evaluation`] — independent brute-force oracles: best responses
//!   against a fixed strategy and a full-tree value that never uses the
//!   history reduction.
//! * [`simulator`] — seeded, reproducible Monte Carlo play between any two
//!   controllers.
//!
//! # Example
//!
//! Solve a three-stage game from both sides and check the values agree:
//!
//! ```
//! use onesided::finite_horizon::{solve_informed, solve_uninformed, StageWeights};
//! use onesided::game_model::{Belief, GameSpec};
//!
//! let spec = GameSpec::from_json_str(r#"{
//!     "states": ["1", "2"],
//!     "actions_informed": ["1", "2"],
//!     "actions_uninformed": ["1", "2", "o"],
//!     "payoff": [[[1, 4, 3], [2, 1, 1]],
//!                [[1, 2, 1], [4, 1, 3]]],
//!     "initial_probability": [0.5, 0.5]
//! }"#)?;
//!
//! let weights = StageWeights::uniform(3);
//! let p = Belief::new(spec.initial_probability.clone())?;
//! let informed = solve_informed(&spec, &weights, &p)?;
//! let uninformed = solve_uninformed(&spec, &weights, &p)?;
//!
//! assert!((informed.value - uninformed.value).abs() < 1e-6);
//! assert!((informed.value - 6.57).abs() < 0.005);
//! # Ok::<(), onesided::Error>(())
//! ```

pub mod discounted_play;
pub mod dynamics;
pub mod evaluation;
pub mod finite_horizon;
pub mod game_model;
pub mod guide;
pub mod lp_backend;
pub mod simulator;

/// Errors shared across the crate.
///
/// The coarse grouping mirrors how callers react: input problems
/// ([`Error::Parse`], [`Error::Validation`]) are user-fixable, while
/// [`Error::BudgetExceeded`] and [`Error::Solver`] mean the requested
/// computation cannot be carried out as posed.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input document is not valid JSON of the expected shape.
    #[error("parse error: {0}")]
    Parse(String),

    /// The input parsed but violates a game-model invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// An index was out of range for the game's dimensions.
    #[error("{what} index {index} out of range (< {bound} expected)")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    /// A history tree would exceed the configured size budget.
    #[error("history budget exceeded: {required} histories needed, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    /// A linear program that should be solvable came back infeasible,
    /// unbounded, or numerically stuck.
    #[error("LP solve failed: {0}")]
    Solver(String),

    /// A belief update conditioned on an action of probability zero.
    #[error("belief update on zero-probability action {action}")]
    ZeroProbabilityAction { action: usize },

    /// A controller was asked to observe an action before choosing one.
    #[error("observe called before step; the stage strategy is not yet fixed")]
    ObserveBeforeStep,

    /// A numeric argument was outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme_doctest {}
