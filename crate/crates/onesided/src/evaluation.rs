//! Independent oracles that certify solver output.
//!
//! The LP pipeline in [`crate::finite_horizon`] is only trustworthy if
//! something that does not share its code or its assumptions agrees with it.
//! This module provides three such checks.
//!
//! [`best_response_value_vs_uninformed`] plays an unconstrained informed
//! player against a fixed reply strategy by backward induction over the
//! action tree: the opponent's mixes are data, so the best response
//! decomposes into one max per history and state. Conversely,
//! [`best_response_value_vs_informed`] prices a fixed informed strategy by
//! a forward pass with one greedy min per history, exact because the
//! uninformed player controls nothing but the current stage payoff. A
//! security strategy is certified when its oracle value matches the LP value
//! it was extracted from.
//!
//! [`full_tree_value`] is the heavyweight check: it enumerates reduced pure
//! plans of both players over *joint* histories, in particular letting the
//! informed player condition on the opponent's past replies, which the
//! sequence-form LPs never do. A reduced plan fixes a choice only at nodes
//! consistent with its own earlier choices, so an informed plan is a map
//! from reply histories to actions and an uninformed plan a map from
//! informed-action histories to replies. The resulting expected-payoff
//! matrix game is solved as one LP over per-state plan mixtures. Agreement
//! with the reduced formulations is the executable statement that watching
//! the uninformed player's own actions helps neither side. Plan counts grow
//! doubly exponentially, so the oracle enforces a hard size budget and is a
//! test instrument, not a solver.

use crate::finite_horizon::{
    HistoryTree, InformedStrategy, StageWeights, UninformedStrategy,
    DEFAULT_HISTORY_BUDGET,
};
use crate::game_model::{Belief, GameSpec};
use crate::lp_backend::{LinearProgram, LpStatus, Relation, Sense};
use crate::{Error, Result};

/// Cap on `|K| * (informed plans) * (uninformed plans)` payoff entries in
/// [`full_tree_value`].
pub const FULL_TREE_ENTRY_BUDGET: u128 = 10_000_000;

/// Cap on the constraint rows of the plan matrix game, whichever way it is
/// oriented.
pub const FULL_TREE_ROW_BUDGET: u128 = 1024;

/// Best response of the informed player against a fixed reply strategy.
#[derive(Clone, Debug)]
pub struct BestResponseReport {
    /// Value of the best response when the state is `k`.
    pub per_state_values: Vec<f64>,
    /// Prior-weighted value `sum_k p^k nu^k`.
    pub aggregate: f64,
    /// One maximizing terminal history code per state.
    pub argmax_paths: Vec<usize>,
}

/// Exact informed best response against `y` by backward induction.
///
/// `f(k, h) = max_a [ w_t * M^k[a] . y_h + f(k, ha) ]` with `f = 0` past the
/// horizon; returns per-state root values, their `p`-weighted aggregate, and
/// a maximizing terminal history per state.
pub fn best_response_value_vs_uninformed(
    g: &GameSpec,
    weights: &StageWeights,
    y: &UninformedStrategy,
    p: &Belief,
) -> Result<BestResponseReport> {
    let n = weights.len();
    let tree = y.tree();
    if tree.depth() != n {
        return Err(Error::InvalidArgument(format!(
            "strategy depth {} does not cover {n} stages",
            tree.depth()
        )));
    }
    if tree.num_actions() != g.num_actions_informed()
        || y.num_replies() != g.num_actions_uninformed()
        || p.len() != g.num_states()
    {
        return Err(Error::Validation(
            "strategy or belief dimensions do not match the game".into(),
        ));
    }
    let k_count = g.num_states();
    let a_count = g.num_actions_informed();
    let mut f = vec![0.0; tree.num_nodes() * k_count];
    let mut best = vec![0usize; tree.num_internal() * k_count];
    for d in (0..n).rev() {
        for code in 0..tree.level_size(d) {
            let node = tree.node_id(d, code);
            let mix = y.reply_probabilities(d, code);
            for k in 0..k_count {
                let mut best_value = f64::NEG_INFINITY;
                let mut best_action = 0;
                for a in 0..a_count {
                    let row = g.payoff_row(k, a)?;
                    let stage: f64 = row.iter().zip(mix).map(|(m, yb)| m * yb).sum();
                    let child = tree.node_id(d + 1, tree.child_code(code, a));
                    let value = weights.get(d) * stage + f[child * k_count + k];
                    if value > best_value {
                        best_value = value;
                        best_action = a;
                    }
                }
                f[node * k_count + k] = best_value;
                best[node * k_count + k] = best_action;
            }
        }
    }
    let per_state_values: Vec<f64> = (0..k_count).map(|k| f[k]).collect();
    let aggregate = per_state_values
        .iter()
        .enumerate()
        .map(|(k, v)| p.get(k) * v)
        .sum();
    let argmax_paths = (0..k_count)
        .map(|k| {
            let mut code = 0;
            for d in 0..n {
                let a = best[tree.node_id(d, code) * k_count + k];
                code = tree.child_code(code, a);
            }
            code
        })
        .collect();
    Ok(BestResponseReport {
        per_state_values,
        aggregate,
        argmax_paths,
    })
}

/// Exact uninformed best response against `sigma` by a forward pass.
///
/// Reply `b` at history `h` changes nothing but the stage payoff there, so
/// minimizing greedily per history against the reach-probability-weighted
/// stage matrix is an exact best response, and the total is the security
/// level `sigma` guarantees.
pub fn best_response_value_vs_informed(
    g: &GameSpec,
    weights: &StageWeights,
    sigma: &InformedStrategy,
    p: &Belief,
) -> Result<f64> {
    stage_values_vs_informed(g, weights, sigma, p, |_, _, per_b| {
        per_b.iter().copied().fold(f64::INFINITY, f64::min)
    })
}

/// Expected weighted payoff when `sigma` plays against `y`.
///
/// Not a best response on either side; used to certify the simulator's
/// sample means and for mixture arguments in tests.
pub fn strategy_pair_value(
    g: &GameSpec,
    weights: &StageWeights,
    sigma: &InformedStrategy,
    y: &UninformedStrategy,
    p: &Belief,
) -> Result<f64> {
    if y.tree().depth() != sigma.depth()
        || y.tree().num_actions() != g.num_actions_informed()
        || y.num_replies() != g.num_actions_uninformed()
    {
        return Err(Error::Validation(
            "reply strategy dimensions do not match the game".into(),
        ));
    }
    stage_values_vs_informed(g, weights, sigma, p, |d, code, per_b| {
        per_b
            .iter()
            .zip(y.reply_probabilities(d, code))
            .map(|(v, yb)| v * yb)
            .sum()
    })
}

/// Shared forward sweep: maintains scaled reach mass per (history, state)
/// and folds each history's per-reply expected stage payoffs through
/// `stage_value(depth, code, per_reply)`.
fn stage_values_vs_informed(
    g: &GameSpec,
    weights: &StageWeights,
    sigma: &InformedStrategy,
    p: &Belief,
    stage_value: impl Fn(usize, usize, &[f64]) -> f64,
) -> Result<f64> {
    let n = weights.len();
    let tree = sigma.tree();
    if tree.depth() != n {
        return Err(Error::InvalidArgument(format!(
            "strategy depth {} does not cover {n} stages",
            tree.depth()
        )));
    }
    if tree.num_actions() != g.num_actions_informed()
        || sigma.num_states() != g.num_states()
        || p.len() != g.num_states()
    {
        return Err(Error::Validation(
            "strategy or belief dimensions do not match the game".into(),
        ));
    }
    let k_count = g.num_states();
    let a_count = g.num_actions_informed();
    let b_count = g.num_actions_uninformed();
    let mut mass = vec![0.0; tree.num_nodes() * k_count];
    for k in 0..k_count {
        mass[k] = p.get(k);
    }
    let mut total = 0.0;
    for d in 0..n {
        for code in 0..tree.level_size(d) {
            let node = tree.node_id(d, code);
            let mut per_b = vec![0.0; b_count];
            for k in 0..k_count {
                let here = mass[node * k_count + k];
                if here == 0.0 {
                    continue;
                }
                let probs = sigma.action_probabilities(d, code, k);
                for a in 0..a_count {
                    let flow = here * probs[a];
                    if flow == 0.0 {
                        continue;
                    }
                    let child = tree.node_id(d + 1, tree.child_code(code, a));
                    mass[child * k_count + k] += flow;
                    for (slot, &m) in per_b.iter_mut().zip(g.payoff_row(k, a)?) {
                        *slot += flow * m;
                    }
                }
            }
            total += weights.get(d) * stage_value(d, code, &per_b);
        }
    }
    Ok(total)
}

/// Value of the game by brute force over reduced pure plans on joint
/// histories, with no history reduction assumed for either player.
///
/// The informed side mixes per state over plans `i` (maps reply-history to
/// action), the uninformed side over plans `j` (maps action-history to
/// reply); `U_k(i, j)` is the weighted payoff of playing the pair out. The
/// LP is built from whichever side yields fewer rows; both orientations
/// solve the same matrix game.
pub fn full_tree_value(g: &GameSpec, weights: &StageWeights, p: &Belief) -> Result<f64> {
    if p.len() != g.num_states() {
        return Err(Error::Validation(
            "belief dimensions do not match the game".into(),
        ));
    }
    let n = weights.len();
    let k_count = g.num_states();
    let a_count = g.num_actions_informed();
    let b_count = g.num_actions_uninformed();
    let btree = HistoryTree::new(b_count, n - 1, DEFAULT_HISTORY_BUDGET)?;
    let atree = HistoryTree::new(a_count, n - 1, DEFAULT_HISTORY_BUDGET)?;

    let informed_plans = checked_power(a_count, btree.num_nodes(), FULL_TREE_ENTRY_BUDGET)?;
    let uninformed_plans = checked_power(b_count, atree.num_nodes(), FULL_TREE_ENTRY_BUDGET)?;
    let entries = k_count as u128 * informed_plans as u128 * uninformed_plans as u128;
    if entries > FULL_TREE_ENTRY_BUDGET {
        return Err(Error::BudgetExceeded {
            required: entries,
            budget: FULL_TREE_ENTRY_BUDGET,
        });
    }
    let rows_informed = uninformed_plans as u128 + k_count as u128;
    let rows_uninformed = (k_count * informed_plans) as u128 + 1;
    if rows_informed.min(rows_uninformed) > FULL_TREE_ROW_BUDGET {
        return Err(Error::BudgetExceeded {
            required: rows_informed.min(rows_uninformed),
            budget: FULL_TREE_ROW_BUDGET,
        });
    }

    // Digit t of a plan index is its choice at the decision node with flat
    // id t in the respective opponent-history tree.
    let pow_a = power_table(a_count, btree.num_nodes());
    let pow_b = power_table(b_count, atree.num_nodes());
    let playout = |k: usize, i: u64, j: u64| -> f64 {
        let mut code_a = 0;
        let mut code_b = 0;
        let mut total = 0.0;
        for d in 0..n {
            let a = ((i / pow_a[btree.node_id(d, code_b)]) % a_count as u64) as usize;
            let b = ((j / pow_b[atree.node_id(d, code_a)]) % b_count as u64) as usize;
            total += weights.get(d) * g.payoff_at(k, a, b);
            if d + 1 < n {
                code_a = atree.child_code(code_a, a);
                code_b = btree.child_code(code_b, b);
            }
        }
        total
    };

    let sol = if rows_informed <= rows_uninformed {
        // max v  s.t.  sum_{k,i} z_k(i) U_k(i,j) >= v  per j,
        //              sum_i z_k(i) = p^k  per k,  z >= 0, v free.
        let num_z = k_count * informed_plans;
        let mut lp = LinearProgram::new(Sense::Maximize, num_z + 1);
        lp.make_free(num_z);
        lp.set_objective(num_z, 1.0);
        for j in 0..uninformed_plans {
            let mut entries = Vec::with_capacity(num_z + 1);
            for k in 0..k_count {
                for i in 0..informed_plans {
                    let u = playout(k, i as u64, j as u64);
                    if u != 0.0 {
                        entries.push((k * informed_plans + i, u));
                    }
                }
            }
            entries.push((num_z, -1.0));
            lp.add_row(Relation::Ge, 0.0, &entries);
        }
        for k in 0..k_count {
            let entries: Vec<(usize, f64)> = (0..informed_plans)
                .map(|i| (k * informed_plans + i, 1.0))
                .collect();
            lp.add_row(Relation::Eq, p.get(k), &entries);
        }
        lp.solve()?
    } else {
        // min p.l  s.t.  sum_j U_k(i,j) y_j <= l_k  per (k,i),
        //                sum_j y_j = 1,  y >= 0, l free.
        let mut lp = LinearProgram::new(Sense::Minimize, uninformed_plans + k_count);
        for k in 0..k_count {
            lp.make_free(uninformed_plans + k);
            lp.set_objective(uninformed_plans + k, p.get(k));
        }
        for k in 0..k_count {
            for i in 0..informed_plans {
                let mut entries = Vec::with_capacity(uninformed_plans + 1);
                for j in 0..uninformed_plans {
                    let u = playout(k, i as u64, j as u64);
                    if u != 0.0 {
                        entries.push((j, u));
                    }
                }
                entries.push((uninformed_plans + k, -1.0));
                lp.add_row(Relation::Le, 0.0, &entries);
            }
        }
        let simplex: Vec<(usize, f64)> = (0..uninformed_plans).map(|j| (j, 1.0)).collect();
        lp.add_row(Relation::Eq, 1.0, &simplex);
        lp.solve()?
    };
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "plan matrix game ended {:?}; it should always have an optimum",
            sol.status
        )));
    }
    Ok(sol.objective)
}

/// `base^exp` unless it exceeds `budget`, in which case the budget error
/// carries the (saturated) requirement.
fn checked_power(base: usize, exp: usize, budget: u128) -> Result<usize> {
    let mut value: u128 = 1;
    for _ in 0..exp {
        value = value.saturating_mul(base as u128);
        if value > budget {
            return Err(Error::BudgetExceeded {
                required: value,
                budget,
            });
        }
    }
    Ok(value as usize)
}

fn power_table(base: usize, len: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(len);
    let mut value: u64 = 1;
    for _ in 0..len {
        out.push(value);
        value = value.saturating_mul(base as u64);
    }
    out
}
