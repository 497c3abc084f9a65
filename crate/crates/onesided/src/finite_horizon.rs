//! Exact security strategies for the `N`-stage game.
//!
//! Both players can restrict attention to strategies that ignore the
//! uninformed player's own past actions: the informed player's payoff
//! guarantee is driven only by how the state leaks through his actions, and
//! the uninformed player gains nothing from conditioning on moves that carry
//! no information. That reduction makes the planning tree the tree of
//! *informed-player action histories*, of size `|A|^t` per stage instead of
//! `(|A||B|)^t`, and it is what makes the LPs here tractable. The brute-force
//! oracle in [`crate::evaluation`] deliberately skips the reduction and
//! replays the full joint tree to keep this claim checkable.
//!
//! # The two programs
//!
//! Play lasts `N` stages with positive stage weights `w_t` ([`StageWeights`]
//! covers both the unweighted case and discounted prefixes). Histories are
//! encoded as base-`|A|` codes ([`HistoryTree`]), enumerated level by level
//! in lexicographic order.
//!
//! The informed player's plan is a *scaled realization plan*: variables
//! `q(h; k)` carry the probability that history `h` is realized when the
//! state is `k`, pre-multiplied by the prior mass `p^k`, so the root mass is
//! `q(root; k) = p^k` and children sum to their parent. One free variable
//! `l_h` per non-terminal history is the stage value the opponent concedes
//! there, and the LP is
//!
//! ```text
//! maximize   sum_t sum_{h in A^(t-1)} w_t * l_h
//! subject to q(root; k) = p^k
//!            sum_a q(ha; k) = q(h; k)
//!            sum_{k,a} q(ha; k) * M^k[a][b]  >=  l_h     for every b
//!            q >= 0,   l free
//! ```
//!
//! Behavior strategies come back out by dividing child mass by parent mass
//! ([`extract_informed_strategy`]), with a uniform fallback wherever the
//! parent mass is numerically zero (such histories are never reached, any
//! convention works; uniform keeps the output a valid distribution).
//!
//! The uninformed player picks one mixed action `y_h` per history and caps
//! her loss state by state: `u(y; k, h_terminal)` below is the weighted
//! payoff a state-`k` opponent collects along a terminal history
//! ([`u_vector`]), and the LP is
//!
//! ```text
//! minimize   sum_k p^k * l^k
//! subject to u(y; k, h) <= l^k      for every k and terminal h
//!            sum_b y_h[b] = 1,  y >= 0,   l free
//! ```
//!
//! The two optimal values coincide: that is the executable duality check the
//! test suite leans on. The negated caps `-l*` are the initial regret vector
//! for discounted play ([`crate::discounted_play::uninformed_initial_regret`]).
//!
//! # Size-counting convention
//!
//! [`LpSizeReport`] reports sizes two ways. `backend_*` is what
//! [`crate::lp_backend`] actually receives: nonnegativity lives in variable
//! bounds, and the root masses are ordinary pinned columns. The
//! `conventional_*` count instead treats every nonnegativity condition as an
//! explicit row and the pinned root masses as data rather than decision
//! variables; it is the count used when quoting LP sizes for these games.
//! For the bundled case study at `N = 3` the conventional count is 65 rows,
//! 35 columns for the informed program and 44 rows, 23 columns for the
//! uninformed one; the backend sees 37 x 37 and 23 x 23. The deltas are
//! exactly the nonnegativity rows (28 and 21) and the `|K| = 2` root
//! columns.

use serde_json::{json, Map, Value};

use crate::game_model::{Belief, GameSpec};
use crate::lp_backend::{LinearProgram, LpStatus, Relation, Sense};
use crate::{Error, Result};

/// Default cap on history nodes per planning tree.
pub const DEFAULT_HISTORY_BUDGET: usize = 1_000_000;

/// Parent mass at or below this is treated as "history never reached" and
/// the extracted behavior falls back to uniform.
pub const REALIZATION_FALLBACK_THRESHOLD: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Stage weights
// ---------------------------------------------------------------------------

/// Strictly positive per-stage payoff weights.
///
/// `uniform(n)` weights every stage by 1 (plain sums); `discounted(l, n)`
/// weights stage `t` (1-based) by `l * (1 - l)^(t-1)`, the prefix of the
/// discounted series.
#[derive(Clone, Debug, PartialEq)]
pub struct StageWeights {
    weights: Vec<f64>,
}

impl StageWeights {
    pub fn uniform(stages: usize) -> StageWeights {
        assert!(stages > 0, "need at least one stage");
        StageWeights {
            weights: vec![1.0; stages],
        }
    }

    pub fn discounted(lambda: f64, stages: usize) -> Result<StageWeights> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount rate {lambda} outside (0, 1)"
            )));
        }
        if stages == 0 {
            return Err(Error::InvalidArgument("need at least one stage".into()));
        }
        let mut weights = Vec::with_capacity(stages);
        let mut w = lambda;
        for _ in 0..stages {
            weights.push(w);
            w *= 1.0 - lambda;
        }
        Ok(StageWeights { weights })
    }

    /// Number of stages.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight of stage `t`, 0-based.
    pub fn get(&self, t: usize) -> f64 {
        self.weights[t]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

// ---------------------------------------------------------------------------
// History tree
// ---------------------------------------------------------------------------

/// Index arithmetic for informed-player action histories up to a depth.
///
/// A history of `d` actions is the pair `(d, code)` where `code` writes the
/// actions as base-`|A|` digits, first action most significant; appending an
/// action is `code * |A| + a`. Nodes get flat ids level by level, so the ids
/// `0..num_internal()` are exactly the non-terminal histories.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryTree {
    num_actions: usize,
    depth: usize,
    level_start: Vec<usize>,
}

impl HistoryTree {
    /// Builds the tree of histories with at most `depth` actions, erroring
    /// out when the node count would exceed `budget`.
    pub fn new(num_actions: usize, depth: usize, budget: usize) -> Result<HistoryTree> {
        assert!(num_actions > 0, "need at least one action");
        let mut level_start = Vec::with_capacity(depth + 2);
        let mut total: u128 = 0;
        let mut level: u128 = 1;
        for _ in 0..=depth {
            level_start.push(total as usize);
            total += level;
            if total > budget as u128 {
                return Err(Error::BudgetExceeded {
                    required: total,
                    budget: budget as u128,
                });
            }
            level = level.saturating_mul(num_actions as u128);
        }
        level_start.push(total as usize);
        Ok(HistoryTree {
            num_actions,
            depth,
            level_start,
        })
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Maximum history length.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Total node count across levels `0..=depth`.
    pub fn num_nodes(&self) -> usize {
        self.level_start[self.depth + 1]
    }

    /// Nodes with depth `< depth`, i.e. histories that still see a stage.
    pub fn num_internal(&self) -> usize {
        self.level_start[self.depth]
    }

    /// Number of histories of length `d`.
    pub fn level_size(&self, d: usize) -> usize {
        self.level_start[d + 1] - self.level_start[d]
    }

    /// Flat id of history `(d, code)`.
    pub fn node_id(&self, d: usize, code: usize) -> usize {
        debug_assert!(code < self.level_size(d));
        self.level_start[d] + code
    }

    /// Code of the history extended by one action.
    pub fn child_code(&self, code: usize, action: usize) -> usize {
        debug_assert!(action < self.num_actions);
        code * self.num_actions + action
    }

    /// Decodes `(d, code)` into its action sequence.
    pub fn actions(&self, d: usize, code: usize) -> Vec<usize> {
        let mut out = vec![0; d];
        let mut rest = code;
        for slot in out.iter_mut().rev() {
            *slot = rest % self.num_actions;
            rest /= self.num_actions;
        }
        out
    }

    /// The code of the length-`prefix_len` prefix of `(d, code)`.
    pub fn prefix_code(&self, d: usize, code: usize, prefix_len: usize) -> usize {
        debug_assert!(prefix_len <= d);
        code / self.num_actions.pow((d - prefix_len) as u32)
    }

    /// Dot-joined action labels of a history, empty string at the root.
    pub fn label(&self, d: usize, code: usize, action_labels: &[String]) -> String {
        self.actions(d, code)
            .iter()
            .map(|&a| action_labels[a].as_str())
            .collect::<Vec<_>>()
            .join(".")
    }
}

// ---------------------------------------------------------------------------
// LP sizes
// ---------------------------------------------------------------------------

/// Row and column counts of a finite-horizon LP under two conventions.
///
/// See the module docs: `backend_*` counts what the solver receives
/// (nonnegativity as bounds, root masses as pinned columns),
/// `conventional_*` counts nonnegativity as rows and pinned root masses as
/// data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LpSizeReport {
    pub backend_rows: usize,
    pub backend_cols: usize,
    pub conventional_rows: usize,
    pub conventional_cols: usize,
}

/// Size of the informed player's LP for an `N`-stage game.
pub fn informed_lp_size(g: &GameSpec, stages: usize) -> Result<LpSizeReport> {
    let tree = HistoryTree::new(g.num_actions_informed(), stages, DEFAULT_HISTORY_BUDGET)?;
    let k = g.num_states();
    let b = g.num_actions_uninformed();
    let nodes = tree.num_nodes();
    let internal = tree.num_internal();
    Ok(LpSizeReport {
        backend_rows: k + k * internal + b * internal,
        backend_cols: k * nodes + internal,
        conventional_rows: k + k * internal + k * (nodes - 1) + b * internal,
        conventional_cols: k * (nodes - 1) + internal,
    })
}

/// Size of the uninformed player's LP for an `N`-stage game.
pub fn uninformed_lp_size(g: &GameSpec, stages: usize) -> Result<LpSizeReport> {
    let tree = HistoryTree::new(g.num_actions_informed(), stages, DEFAULT_HISTORY_BUDGET)?;
    let k = g.num_states();
    let b = g.num_actions_uninformed();
    let terminal = tree.level_size(stages);
    let internal = tree.num_internal();
    Ok(LpSizeReport {
        backend_rows: k * terminal + internal,
        backend_cols: b * internal + k,
        conventional_rows: k * terminal + internal + b * internal,
        conventional_cols: b * internal + k,
    })
}

// ---------------------------------------------------------------------------
// Informed player
// ---------------------------------------------------------------------------

/// Where each variable of the informed LP lives.
#[derive(Clone, Debug)]
pub struct InformedLpLayout {
    pub tree: HistoryTree,
    num_states: usize,
}

impl InformedLpLayout {
    /// Column of the scaled realization mass of `(d, code)` under state `k`.
    pub fn plan_var(&self, d: usize, code: usize, k: usize) -> usize {
        self.tree.node_id(d, code) * self.num_states + k
    }

    /// Column of the stage-value variable of internal history `(d, code)`.
    pub fn value_var(&self, d: usize, code: usize) -> usize {
        self.tree.num_nodes() * self.num_states + self.tree.node_id(d, code)
    }

    fn num_cols(&self) -> usize {
        self.tree.num_nodes() * self.num_states + self.tree.num_internal()
    }

    /// Reads the realization-plan block out of an LP primal.
    pub fn extract_plan(&self, primal: &[f64]) -> RealizationPlan {
        RealizationPlan {
            tree: self.tree.clone(),
            num_states: self.num_states,
            values: primal[..self.tree.num_nodes() * self.num_states].to_vec(),
        }
    }
}

/// Builds the informed player's LP.
pub fn build_informed_lp(
    g: &GameSpec,
    weights: &StageWeights,
    p: &Belief,
    budget: usize,
) -> Result<(LinearProgram, InformedLpLayout)> {
    check_belief_dimension(g, p)?;
    let n = weights.len();
    let k_count = g.num_states();
    let a_count = g.num_actions_informed();
    let b_count = g.num_actions_uninformed();
    let tree = HistoryTree::new(a_count, n, budget)?;
    let layout = InformedLpLayout {
        tree,
        num_states: k_count,
    };
    let tree = &layout.tree;

    let mut lp = LinearProgram::new(Sense::Maximize, layout.num_cols());
    for d in 0..n {
        for code in 0..tree.level_size(d) {
            let var = layout.value_var(d, code);
            lp.make_free(var);
            lp.set_objective(var, weights.get(d));
        }
    }

    // Root mass is the prior: q(root; k) = p^k.
    for k in 0..k_count {
        lp.add_row(Relation::Eq, p.get(k), &[(layout.plan_var(0, 0, k), 1.0)]);
    }
    // Children split their parent's mass.
    for d in 0..n {
        for code in 0..tree.level_size(d) {
            for k in 0..k_count {
                let mut entries = Vec::with_capacity(a_count + 1);
                for a in 0..a_count {
                    entries.push((layout.plan_var(d + 1, tree.child_code(code, a), k), 1.0));
                }
                entries.push((layout.plan_var(d, code, k), -1.0));
                lp.add_row(Relation::Eq, 0.0, &entries);
            }
        }
    }
    // Every reply b concedes at least the stage value at each history.
    for d in 0..n {
        for code in 0..tree.level_size(d) {
            for b in 0..b_count {
                let mut entries = Vec::with_capacity(k_count * a_count + 1);
                for k in 0..k_count {
                    for a in 0..a_count {
                        let m = g.payoff_at(k, a, b);
                        if m != 0.0 {
                            entries.push((
                                layout.plan_var(d + 1, tree.child_code(code, a), k),
                                m,
                            ));
                        }
                    }
                }
                entries.push((layout.value_var(d, code), -1.0));
                lp.add_row(Relation::Ge, 0.0, &entries);
            }
        }
    }
    Ok((lp, layout))
}

/// A scaled realization plan: per history and state, the probability of
/// reaching that history times the prior mass of the state.
#[derive(Clone, Debug)]
pub struct RealizationPlan {
    tree: HistoryTree,
    num_states: usize,
    values: Vec<f64>,
}

impl RealizationPlan {
    pub fn tree(&self) -> &HistoryTree {
        &self.tree
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Scaled mass of history `(d, code)` under state `k`.
    pub fn mass(&self, d: usize, code: usize, k: usize) -> f64 {
        self.values[self.tree.node_id(d, code) * self.num_states + k]
    }

    /// Verifies root mass, flow conservation, and nonnegativity.
    pub fn check(&self, p: &Belief, tolerance: f64) -> Result<()> {
        for k in 0..self.num_states {
            let root = self.mass(0, 0, k);
            if (root - p.get(k)).abs() > tolerance {
                return Err(Error::Validation(format!(
                    "root mass {root} for state {k} differs from prior {}",
                    p.get(k)
                )));
            }
        }
        for (i, &v) in self.values.iter().enumerate() {
            if v < -tolerance {
                return Err(Error::Validation(format!(
                    "negative realization mass {v} at flat index {i}"
                )));
            }
        }
        for d in 0..self.tree.depth() {
            for code in 0..self.tree.level_size(d) {
                for k in 0..self.num_states {
                    let parent = self.mass(d, code, k);
                    let children: f64 = (0..self.tree.num_actions())
                        .map(|a| self.mass(d + 1, self.tree.child_code(code, a), k))
                        .sum();
                    if (parent - children).abs() > tolerance {
                        return Err(Error::Validation(format!(
                            "flow violated at depth {d} code {code} state {k}: \
                             parent {parent}, children {children}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// A behavior strategy for the informed player: one mixed action per state
/// and non-terminal history.
#[derive(Clone, Debug)]
pub struct InformedStrategy {
    tree: HistoryTree,
    num_states: usize,
    probs: Vec<f64>,
}

impl InformedStrategy {
    pub fn tree(&self) -> &HistoryTree {
        &self.tree
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Stages covered.
    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    /// Mixed action at history `(d, code)` when the state is `k`.
    pub fn action_probabilities(&self, d: usize, code: usize, k: usize) -> &[f64] {
        let a = self.tree.num_actions();
        let base = (self.tree.node_id(d, code) * self.num_states + k) * a;
        &self.probs[base..base + a]
    }

    /// Builds a strategy directly from per-history per-state distributions,
    /// indexed stage, then history, then state. Used by tests and by callers
    /// replaying fixed scenarios; distributions are validated.
    pub fn from_stage_tables(
        num_states: usize,
        tables: &[Vec<Vec<Vec<f64>>>],
    ) -> Result<InformedStrategy> {
        let depth = tables.len();
        let num_actions = tables
            .first()
            .and_then(|t| t.first())
            .and_then(|h| h.first())
            .map(Vec::len)
            .ok_or_else(|| Error::Validation("empty strategy table".into()))?;
        if num_states == 0 || num_actions == 0 {
            return Err(Error::Validation("empty strategy table".into()));
        }
        let tree = HistoryTree::new(num_actions, depth, DEFAULT_HISTORY_BUDGET)?;
        let mut probs = vec![0.0; tree.num_internal() * num_states * num_actions];
        for (d, level) in tables.iter().enumerate() {
            if level.len() != tree.level_size(d) {
                return Err(Error::Validation(format!(
                    "stage {} has {} histories, expected {}",
                    d + 1,
                    level.len(),
                    tree.level_size(d)
                )));
            }
            for (code, per_state) in level.iter().enumerate() {
                if per_state.len() != num_states {
                    return Err(Error::Validation(format!(
                        "history {code} at stage {} covers {} states, expected {num_states}",
                        d + 1,
                        per_state.len()
                    )));
                }
                for (k, dist) in per_state.iter().enumerate() {
                    let sum: f64 = dist.iter().sum();
                    if dist.len() != num_actions
                        || (sum - 1.0).abs() > 1e-9
                        || dist.iter().any(|&v| v < -1e-12)
                    {
                        return Err(Error::Validation(format!(
                            "state {k}, history {code} at stage {} is not a distribution",
                            d + 1
                        )));
                    }
                    let base = (tree.node_id(d, code) * num_states + k) * num_actions;
                    probs[base..base + num_actions].copy_from_slice(dist);
                }
            }
        }
        Ok(InformedStrategy {
            tree,
            num_states,
            probs,
        })
    }

    /// Nested label map `state -> stage -> history -> {action: prob}`.
    pub fn to_json(&self, g: &GameSpec) -> Value {
        let mut by_state = Map::new();
        for k in 0..self.num_states {
            let mut by_stage = Map::new();
            for d in 0..self.tree.depth() {
                let mut by_history = Map::new();
                for code in 0..self.tree.level_size(d) {
                    let probs = self.action_probabilities(d, code, k);
                    let mut dist = Map::new();
                    for (a, &prob) in probs.iter().enumerate() {
                        dist.insert(g.actions_informed[a].clone(), json!(prob));
                    }
                    by_history.insert(
                        self.tree.label(d, code, &g.actions_informed),
                        Value::Object(dist),
                    );
                }
                by_stage.insert((d + 1).to_string(), Value::Object(by_history));
            }
            by_state.insert(g.states[k].clone(), Value::Object(by_stage));
        }
        Value::Object(by_state)
    }
}

/// Divides child mass by parent mass to turn a plan into behavior.
pub fn extract_informed_strategy(plan: &RealizationPlan) -> InformedStrategy {
    let tree = plan.tree().clone();
    let a_count = tree.num_actions();
    let k_count = plan.num_states();
    let mut probs = vec![0.0; tree.num_internal() * k_count * a_count];
    for d in 0..tree.depth() {
        for code in 0..tree.level_size(d) {
            for k in 0..k_count {
                let base = (tree.node_id(d, code) * k_count + k) * a_count;
                let parent = plan.mass(d, code, k);
                let slot = &mut probs[base..base + a_count];
                if parent <= REALIZATION_FALLBACK_THRESHOLD {
                    slot.fill(1.0 / a_count as f64);
                    continue;
                }
                let mut sum = 0.0;
                for (a, value) in slot.iter_mut().enumerate() {
                    *value =
                        (plan.mass(d + 1, tree.child_code(code, a), k) / parent).max(0.0);
                    sum += *value;
                }
                if sum > 0.0 {
                    slot.iter_mut().for_each(|v| *v /= sum);
                } else {
                    slot.fill(1.0 / a_count as f64);
                }
            }
        }
    }
    InformedStrategy {
        tree,
        num_states: k_count,
        probs,
    }
}

/// Value, plan, and strategy of the informed player's `N`-stage program.
#[derive(Clone, Debug)]
pub struct InformedSolution {
    pub value: f64,
    pub plan: RealizationPlan,
    pub strategy: InformedStrategy,
    pub lp_size: LpSizeReport,
}

/// Solves the informed player's program with the default history budget.
pub fn solve_informed(
    g: &GameSpec,
    weights: &StageWeights,
    p: &Belief,
) -> Result<InformedSolution> {
    solve_informed_with_budget(g, weights, p, DEFAULT_HISTORY_BUDGET)
}

pub fn solve_informed_with_budget(
    g: &GameSpec,
    weights: &StageWeights,
    p: &Belief,
    budget: usize,
) -> Result<InformedSolution> {
    let (lp, layout) = build_informed_lp(g, weights, p, budget)?;
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "informed program ended {:?}; it should always have an optimum",
            sol.status
        )));
    }
    let plan = layout.extract_plan(&sol.primal);
    let strategy = extract_informed_strategy(&plan);
    Ok(InformedSolution {
        value: sol.objective,
        plan,
        strategy,
        lp_size: informed_lp_size(g, weights.len())?,
    })
}

// ---------------------------------------------------------------------------
// Uninformed player
// ---------------------------------------------------------------------------

/// Where each variable of the uninformed LP lives.
#[derive(Clone, Debug)]
pub struct UninformedLpLayout {
    pub tree: HistoryTree,
    num_replies: usize,
    num_states: usize,
}

impl UninformedLpLayout {
    /// Column of reply probability `b` at internal history `(d, code)`.
    pub fn reply_var(&self, d: usize, code: usize, b: usize) -> usize {
        self.tree.node_id(d, code) * self.num_replies + b
    }

    /// Column of the loss cap for state `k`.
    pub fn cap_var(&self, k: usize) -> usize {
        self.tree.num_internal() * self.num_replies + k
    }

    pub(crate) fn num_cols(&self) -> usize {
        self.tree.num_internal() * self.num_replies + self.num_states
    }
}

/// Builds the uninformed player's LP.
pub fn build_uninformed_lp(
    g: &GameSpec,
    weights: &StageWeights,
    p: &Belief,
    budget: usize,
) -> Result<(LinearProgram, UninformedLpLayout)> {
    build_uninformed_lp_with_extra_cols(g, weights, p, budget, 0)
}

pub(crate) fn build_uninformed_lp_with_extra_cols(
    g: &GameSpec,
    weights: &StageWeights,
    p: &Belief,
    budget: usize,
    extra_cols: usize,
) -> Result<(LinearProgram, UninformedLpLayout)> {
    check_belief_dimension(g, p)?;
    let n = weights.len();
    let k_count = g.num_states();
    let a_count = g.num_actions_informed();
    let b_count = g.num_actions_uninformed();
    let tree = HistoryTree::new(a_count, n, budget)?;
    let layout = UninformedLpLayout {
        tree,
        num_replies: b_count,
        num_states: k_count,
    };
    let tree = &layout.tree;

    let mut lp = LinearProgram::new(Sense::Minimize, layout.num_cols() + extra_cols);
    for k in 0..k_count {
        lp.make_free(layout.cap_var(k));
        lp.set_objective(layout.cap_var(k), p.get(k));
    }

    // Against every terminal history an informed opponent of each state
    // collects at most that state's cap.
    for k in 0..k_count {
        for terminal in 0..tree.level_size(n) {
            let mut entries = Vec::with_capacity(n * b_count + 1);
            for d in 0..n {
                let prefix = tree.prefix_code(n, terminal, d);
                let action = tree.prefix_code(n, terminal, d + 1) % a_count;
                let row = g.payoff_row(k, action)?;
                for (b, &m) in row.iter().enumerate() {
                    let coeff = weights.get(d) * m;
                    if coeff != 0.0 {
                        entries.push((layout.reply_var(d, prefix, b), coeff));
                    }
                }
            }
            entries.push((layout.cap_var(k), -1.0));
            lp.add_row(Relation::Le, 0.0, &entries);
        }
    }
    // One mixed action per internal history.
    for d in 0..n {
        for code in 0..tree.level_size(d) {
            let entries: Vec<(usize, f64)> = (0..b_count)
                .map(|b| (layout.reply_var(d, code, b), 1.0))
                .collect();
            lp.add_row(Relation::Eq, 1.0, &entries);
        }
    }
    Ok((lp, layout))
}

/// A behavior strategy for the uninformed player: one mixed reply per
/// observed informed-action history.
#[derive(Clone, Debug)]
pub struct UninformedStrategy {
    tree: HistoryTree,
    num_replies: usize,
    probs: Vec<f64>,
}

impl UninformedStrategy {
    pub fn tree(&self) -> &HistoryTree {
        &self.tree
    }

    pub fn num_replies(&self) -> usize {
        self.num_replies
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    /// Mixed reply after observing history `(d, code)`.
    pub fn reply_probabilities(&self, d: usize, code: usize) -> &[f64] {
        let base = self.tree.node_id(d, code) * self.num_replies;
        &self.probs[base..base + self.num_replies]
    }

    /// Builds a strategy directly from per-history distributions, outermost
    /// index is the stage. Used by tests and by callers replaying fixed
    /// scenarios; distributions are validated.
    pub fn from_stage_tables(
        num_actions_informed: usize,
        tables: &[Vec<Vec<f64>>],
    ) -> Result<UninformedStrategy> {
        let depth = tables.len();
        let tree = HistoryTree::new(num_actions_informed, depth, DEFAULT_HISTORY_BUDGET)?;
        let num_replies = tables
            .first()
            .and_then(|t| t.first())
            .map(Vec::len)
            .ok_or_else(|| Error::Validation("empty strategy table".into()))?;
        let mut probs = vec![0.0; tree.num_internal() * num_replies];
        for (d, level) in tables.iter().enumerate() {
            if level.len() != tree.level_size(d) {
                return Err(Error::Validation(format!(
                    "stage {} has {} histories, expected {}",
                    d + 1,
                    level.len(),
                    tree.level_size(d)
                )));
            }
            for (code, dist) in level.iter().enumerate() {
                if dist.len() != num_replies {
                    return Err(Error::Validation(format!(
                        "history {code} at stage {} has {} entries, expected {num_replies}",
                        d + 1,
                        dist.len()
                    )));
                }
                let sum: f64 = dist.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|&v| v < -1e-12) {
                    return Err(Error::Validation(format!(
                        "history {code} at stage {} is not a distribution",
                        d + 1
                    )));
                }
                let base = tree.node_id(d, code) * num_replies;
                probs[base..base + num_replies].copy_from_slice(dist);
            }
        }
        Ok(UninformedStrategy {
            tree,
            num_replies,
            probs,
        })
    }

    /// Nested label map `stage -> history -> {reply: prob}`.
    pub fn to_json(&self, g: &GameSpec) -> Value {
        let mut by_stage = Map::new();
        for d in 0..self.tree.depth() {
            let mut by_history = Map::new();
            for code in 0..self.tree.level_size(d) {
                let probs = self.reply_probabilities(d, code);
                let mut dist = Map::new();
                for (b, &prob) in probs.iter().enumerate() {
                    dist.insert(g.actions_uninformed[b].clone(), json!(prob));
                }
                by_history.insert(
                    self.tree.label(d, code, &g.actions_informed),
                    Value::Object(dist),
                );
            }
            by_stage.insert((d + 1).to_string(), Value::Object(by_history));
        }
        Value::Object(by_stage)
    }
}

/// Normalizes the reply block of an LP primal into a strategy.
pub fn extract_uninformed_strategy(
    layout: &UninformedLpLayout,
    primal: &[f64],
) -> UninformedStrategy {
    let tree = layout.tree.clone();
    let b_count = layout.num_replies;
    let mut probs = vec![0.0; tree.num_internal() * b_count];
    for node in 0..tree.num_internal() {
        let slot = &mut probs[node * b_count..(node + 1) * b_count];
        let mut sum = 0.0;
        for (b, value) in slot.iter_mut().enumerate() {
            *value = primal[node * b_count + b].max(0.0);
            sum += *value;
        }
        if sum > 0.0 {
            slot.iter_mut().for_each(|v| *v /= sum);
        } else {
            slot.fill(1.0 / b_count as f64);
        }
    }
    UninformedStrategy {
        tree,
        num_replies: b_count,
        probs,
    }
}

/// Value, strategy, and per-state loss caps of the uninformed program.
#[derive(Clone, Debug)]
pub struct UninformedSolution {
    pub value: f64,
    pub strategy: UninformedStrategy,
    /// Optimal caps `l*`; their negation seeds discounted regret play.
    /// Among the optimal solutions, the reported one minimizes the largest
    /// cap, so ties across states break toward the balanced guarantee.
    pub per_state_caps: Vec<f64>,
    pub lp_size: LpSizeReport,
}

/// Solves the uninformed player's program with the default history budget.
pub fn solve_uninformed(
    g: &GameSpec,
    weights: &StageWeights,
    p: &Belief,
) -> Result<UninformedSolution> {
    solve_uninformed_with_budget(g, weights, p, DEFAULT_HISTORY_BUDGET)
}

pub fn solve_uninformed_with_budget(
    g: &GameSpec,
    weights: &StageWeights,
    p: &Belief,
    budget: usize,
) -> Result<UninformedSolution> {
    let (lp, layout) = build_uninformed_lp(g, weights, p, budget)?;
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "uninformed program ended {:?}; it should always have an optimum",
            sol.status
        )));
    }

    // The optimal face can be wide, and the per-state caps vary affinely
    // across it while their prior-weighted sum stays put. Re-solve over that
    // face minimizing the largest cap, so the reported solution is the
    // canonical one that spreads the guarantee as evenly as the optimum
    // allows instead of an arbitrary vertex.
    let (mut refine, _) =
        build_uninformed_lp_with_extra_cols(g, weights, p, budget, 1)?;
    let worst = layout.num_cols();
    refine.make_free(worst);
    for k in 0..g.num_states() {
        refine.set_objective(layout.cap_var(k), 0.0);
        refine.add_row(Relation::Le, 0.0, &[(layout.cap_var(k), 1.0), (worst, -1.0)]);
    }
    refine.set_objective(worst, 1.0);
    let value_row: Vec<(usize, f64)> = (0..g.num_states())
        .map(|k| (layout.cap_var(k), p.get(k)))
        .collect();
    refine.add_row(Relation::Eq, sol.objective, &value_row);
    let refined = refine.solve()?;
    if refined.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "cap-balancing refinement ended {:?} on a feasible program",
            refined.status
        )));
    }

    let strategy = extract_uninformed_strategy(&layout, &refined.primal);
    let per_state_caps = (0..g.num_states())
        .map(|k| refined.primal[layout.cap_var(k)])
        .collect();
    Ok(UninformedSolution {
        value: sol.objective,
        strategy,
        per_state_caps,
        lp_size: uninformed_lp_size(g, weights.len())?,
    })
}

/// Weighted payoff a state-`k` opponent collects along a terminal history.
///
/// `terminal_code` encodes the informed actions of all `weights.len()`
/// stages; the reply mix `y` is read off the strategy prefix by prefix.
pub fn u_vector(
    g: &GameSpec,
    weights: &StageWeights,
    y: &UninformedStrategy,
    k: usize,
    terminal_code: usize,
) -> Result<f64> {
    let n = weights.len();
    let tree = y.tree();
    if n != tree.depth() {
        return Err(Error::InvalidArgument(format!(
            "strategy depth {} does not cover {n} stages",
            tree.depth()
        )));
    }
    if k >= g.num_states() {
        return Err(Error::IndexOutOfRange {
            what: "state",
            index: k,
            bound: g.num_states(),
        });
    }
    if terminal_code >= tree.level_size(n) {
        return Err(Error::IndexOutOfRange {
            what: "terminal history",
            index: terminal_code,
            bound: tree.level_size(n),
        });
    }
    let mut total = 0.0;
    for d in 0..n {
        let prefix = tree.prefix_code(n, terminal_code, d);
        let action = tree.prefix_code(n, terminal_code, d + 1) % tree.num_actions();
        let row = g.payoff_row(k, action)?;
        let mix = y.reply_probabilities(d, prefix);
        let stage: f64 = row.iter().zip(mix).map(|(m, yb)| m * yb).sum();
        total += weights.get(d) * stage;
    }
    Ok(total)
}

fn check_belief_dimension(g: &GameSpec, p: &Belief) -> Result<()> {
    if p.len() != g.num_states() {
        return Err(Error::Validation(format!(
            "belief has {} entries but the game has {} states",
            p.len(),
            g.num_states()
        )));
    }
    Ok(())
}
