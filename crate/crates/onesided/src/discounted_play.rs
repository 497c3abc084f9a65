//! Approximated security play for the discounted infinite game.
//!
//! With stage `t` worth `l(1-l)^(t-1)`, the tail after `N` stages carries
//! total weight `(1-l)^N`, so the `N`-stage truncations solved by
//! [`crate::finite_horizon`] approximate the infinite game geometrically
//! fast. This module turns that into playable strategies whose distance to
//! the true value is certified, not merely hoped for.
//!
//! The informed player replans from the posterior: each stage,
//! [`InformedController`] solves the `(N+1)`-stage truncation at its current
//! belief, plays the first stage of the optimal plan, and advances the
//! belief with the publicly observed action.
//!
//! The uninformed player cannot hold a posterior, that would require
//! knowing the opponent's strategy, so it tracks an anti-discounted regret
//! vector: what each state has already conceded, rescaled so the remaining
//! game always looks like a fresh unit-weight one. Its replies come from a
//! dual truncated game played at the current regret ([`dual_value`]), tied
//! to the primal values by the conjugacy
//! `dual(w) = max_p { value(p) + p.w }`. Seeding the recursion with
//! [`uninformed_initial_regret`], the negated per-state loss caps of a
//! security reply strategy, makes that maximum zero at the start of play.
//!
//! [`bound_report`] packages the certificates: either controller forfeits
//! at most `2(1-l)^(N+1) vhat / l` against the infinite-game value, and the
//! realized discounted payoff of the pair is anticipated inside a closed
//! interval built from the truncated value scale.

use crate::dynamics::{belief_update, regret_update, StrategyMatrix};
use crate::finite_horizon::{
    build_uninformed_lp_with_extra_cols, solve_informed_with_budget, solve_uninformed_with_budget,
    StageWeights, DEFAULT_HISTORY_BUDGET,
};
use crate::game_model::{sample_index, Belief, GameSpec, RegretVector};
use crate::lp_backend::{LpStatus, Relation};
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Parameters of truncation-based discounted play.
#[derive(Clone, Copy, Debug)]
pub struct DiscountedConfig {
    lambda: f64,
    truncation: usize,
    history_budget: usize,
    solve_cache: bool,
}

impl DiscountedConfig {
    /// Validates the discount factor (strictly inside `(0, 1)`) and the
    /// truncation depth (at least one stage).
    pub fn new(lambda: f64, truncation: usize) -> Result<DiscountedConfig> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "discount factor must lie strictly inside (0, 1), got {lambda}"
            )));
        }
        if truncation == 0 {
            return Err(Error::InvalidArgument(
                "truncation depth must be at least one stage".into(),
            ));
        }
        Ok(DiscountedConfig {
            lambda,
            truncation,
            history_budget: DEFAULT_HISTORY_BUDGET,
            solve_cache: false,
        })
    }

    /// Replaces the default cap on history-tree nodes.
    pub fn with_history_budget(mut self, budget: usize) -> DiscountedConfig {
        self.history_budget = budget;
        self
    }

    /// Lets controllers memoize stage solves, keyed on their statistic
    /// rounded to [`CACHE_RESOLUTION`]. Off by default because keying on
    /// rounded reals trades exactness for speed; with it on, repeated
    /// histories (across cloned controllers too) reuse one LP solve, which
    /// is what makes large simulated campaigns affordable.
    pub fn with_solve_cache(mut self, enabled: bool) -> DiscountedConfig {
        self.solve_cache = enabled;
        self
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn history_budget(&self) -> usize {
        self.history_budget
    }

    pub fn solve_cache(&self) -> bool {
        self.solve_cache
    }

    fn weights(&self, stages: usize) -> Result<StageWeights> {
        StageWeights::discounted(self.lambda, stages)
    }
}

/// Grid the optional solve cache rounds belief and regret entries to.
pub const CACHE_RESOLUTION: f64 = 1e-6;

type SolveCache<T> = Arc<Mutex<HashMap<Vec<i64>, T>>>;

fn cache_key(values: &[f64]) -> Vec<i64> {
    values.iter().map(|v| (v / CACHE_RESOLUTION).round() as i64).collect()
}

fn cached_solve<T: Clone>(
    cache: &SolveCache<T>,
    values: &[f64],
    solve: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let key = cache_key(values);
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let fresh = solve()?;
    cache.lock().unwrap().insert(key, fresh.clone());
    Ok(fresh)
}

/// Value of the discounted game truncated after `cfg.truncation` stages,
/// starting from belief `p`.
pub fn truncated_value(g: &GameSpec, cfg: &DiscountedConfig, p: &Belief) -> Result<f64> {
    let weights = cfg.weights(cfg.truncation)?;
    Ok(solve_informed_with_budget(g, &weights, p, cfg.history_budget)?.value)
}

/// Stage-one behavior of an optimal plan in the `(truncation + 1)`-stage
/// game at belief `p`: the mass an optimal plan puts on each first action,
/// divided by the state's prior mass (uniform where that mass vanishes).
pub fn informed_policy(g: &GameSpec, cfg: &DiscountedConfig, p: &Belief) -> Result<StrategyMatrix> {
    let weights = cfg.weights(cfg.truncation + 1)?;
    let sol = solve_informed_with_budget(g, &weights, p, cfg.history_budget)?;
    let rows = (0..g.num_states())
        .map(|k| sol.strategy.action_probabilities(0, 0, k).to_vec())
        .collect();
    StrategyMatrix::new(rows)
}

/// Negated per-state loss caps of a security reply strategy in the
/// truncated game at `p`; the uninformed controller's starting regret.
pub fn uninformed_initial_regret(
    g: &GameSpec,
    cfg: &DiscountedConfig,
    p: &Belief,
) -> Result<RegretVector> {
    let weights = cfg.weights(cfg.truncation)?;
    let sol = solve_uninformed_with_budget(g, &weights, p, cfg.history_budget)?;
    RegretVector::new(sol.per_state_caps.iter().map(|c| -c).collect())
}

/// Value and stage-one reply mix of the `depth`-stage dual truncated game
/// at regret `w`.
///
/// The LP minimizes a level `L` over reply strategies `y` and per-state
/// caps `l^k` subject to `w^k + l^k <= L` for every state and to the same
/// per-terminal payoff and simplex rows as the reply-strategy program, so
/// at the optimum `l^k` is the best the informed player can extract from
/// `y` in state `k` and `L = max_k (w^k + l^k)` is minimized. The base case
/// of the recursion, depth zero, is `max_k w^k` and is not an LP; callers
/// needing it should take the maximum directly.
pub fn dual_value(
    g: &GameSpec,
    lambda: f64,
    depth: usize,
    w: &RegretVector,
    history_budget: usize,
) -> Result<(f64, Vec<f64>)> {
    if depth == 0 {
        return Err(Error::InvalidArgument(
            "dual LP needs at least one stage; depth zero is max_k w^k".into(),
        ));
    }
    if w.len() != g.num_states() {
        return Err(Error::Validation(format!(
            "regret has {} entries for a {}-state game",
            w.len(),
            g.num_states()
        )));
    }
    let weights = StageWeights::discounted(lambda, depth)?;
    // The belief argument only sets the objective, overwritten below.
    let (mut lp, layout) =
        build_uninformed_lp_with_extra_cols(g, &weights, &g.prior(), history_budget, 1)?;
    let level = layout.num_cols();
    lp.make_free(level);
    for k in 0..g.num_states() {
        lp.set_objective(layout.cap_var(k), 0.0);
        lp.add_row(
            Relation::Le,
            -w.get(k),
            &[(layout.cap_var(k), 1.0), (level, -1.0)],
        );
    }
    lp.set_objective(level, 1.0);
    let sol = lp.solve()?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver(format!(
            "dual game LP ended {:?}; it should always have an optimum",
            sol.status
        )));
    }
    let b_count = g.num_actions_uninformed();
    let mut mix: Vec<f64> = (0..b_count)
        .map(|b| sol.primal[layout.reply_var(0, 0, b)].max(0.0))
        .collect();
    let total: f64 = mix.iter().sum();
    if total <= 0.0 {
        mix.fill(1.0 / b_count as f64);
    } else {
        for v in &mut mix {
            *v /= total;
        }
    }
    Ok((sol.objective, mix))
}

/// [`dual_value`] one stage beyond the configured truncation, the horizon
/// the uninformed controller replans with each stage.
pub fn dual_truncated_value(
    g: &GameSpec,
    cfg: &DiscountedConfig,
    w: &RegretVector,
) -> Result<(f64, Vec<f64>)> {
    dual_value(g, cfg.lambda, cfg.truncation + 1, w, cfg.history_budget)
}

/// Online play for the informed side: replan at the posterior, act, update.
///
/// `step` solves the stage LP and samples this stage's action for the true
/// state; `observe` feeds back the publicly observed action and advances
/// the belief with the policy the matching `step` actually used. In
/// self-play `observe` receives the action `step` returned.
///
/// Cloning shares the optional solve cache, so one prototype controller can
/// seed a whole campaign of episodes that pool their stage solutions.
#[derive(Clone, Debug)]
pub struct InformedController {
    game: GameSpec,
    config: DiscountedConfig,
    state: usize,
    belief: Belief,
    pending: Option<StrategyMatrix>,
    cache: SolveCache<StrategyMatrix>,
}

impl InformedController {
    pub fn new(
        game: GameSpec,
        config: DiscountedConfig,
        state: usize,
        prior: Belief,
    ) -> Result<InformedController> {
        if state >= game.num_states() {
            return Err(Error::IndexOutOfRange {
                what: "state",
                index: state,
                bound: game.num_states(),
            });
        }
        if prior.len() != game.num_states() {
            return Err(Error::Validation(format!(
                "prior has {} entries for a {}-state game",
                prior.len(),
                game.num_states()
            )));
        }
        Ok(InformedController {
            game,
            config,
            state,
            belief: prior,
            pending: None,
            cache: Arc::default(),
        })
    }

    /// The realized state this controller plays for.
    pub fn state(&self) -> usize {
        self.state
    }

    /// Reuses this controller's game, config, and solve cache for a fresh
    /// episode at another realized state.
    pub fn restarted(&self, state: usize, prior: Belief) -> Result<InformedController> {
        let mut fresh = InformedController::new(self.game.clone(), self.config, state, prior)?;
        fresh.cache = Arc::clone(&self.cache);
        Ok(fresh)
    }

    /// The opponent's current posterior over states.
    pub fn belief(&self) -> &Belief {
        &self.belief
    }

    /// Solves the stage LP at the current belief, caches the policy, and
    /// samples an action for the true state.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Result<usize> {
        let policy = if self.config.solve_cache {
            cached_solve(&self.cache, self.belief.as_slice(), || {
                informed_policy(&self.game, &self.config, &self.belief)
            })?
        } else {
            informed_policy(&self.game, &self.config, &self.belief)?
        };
        let action = sample_index(policy.state_mix(self.state), rng.gen());
        self.pending = Some(policy);
        Ok(action)
    }

    /// Advances the belief with the cached stage policy and the action that
    /// was actually played.
    pub fn observe(&mut self, action: usize) -> Result<()> {
        let policy = self.pending.take().ok_or(Error::ObserveBeforeStep)?;
        self.belief = belief_update(&self.belief, &policy, action)?;
        Ok(())
    }
}

/// Online play for the uninformed side: replan at the regret, act, update.
///
/// `step` solves the dual stage LP at the current regret, caches the reply
/// mix, and samples from it; `observe` folds the opponent's observed action
/// into the regret using that cached mix.
///
/// Cloning shares the optional solve cache, so one prototype controller can
/// seed a whole campaign of episodes that pool their stage solutions.
#[derive(Clone, Debug)]
pub struct UninformedController {
    game: GameSpec,
    config: DiscountedConfig,
    regret: RegretVector,
    pending: Option<Vec<f64>>,
    cache: SolveCache<Vec<f64>>,
}

impl UninformedController {
    pub fn new(
        game: GameSpec,
        config: DiscountedConfig,
        initial_regret: RegretVector,
    ) -> Result<UninformedController> {
        if initial_regret.len() != game.num_states() {
            return Err(Error::Validation(format!(
                "regret has {} entries for a {}-state game",
                initial_regret.len(),
                game.num_states()
            )));
        }
        Ok(UninformedController {
            game,
            config,
            regret: initial_regret,
            pending: None,
            cache: Arc::default(),
        })
    }

    /// Starts from the regret of a security reply strategy at `p`, the
    /// seed that makes the dual value vanish.
    pub fn from_prior(
        game: GameSpec,
        config: DiscountedConfig,
        p: &Belief,
    ) -> Result<UninformedController> {
        let regret = uninformed_initial_regret(&game, &config, p)?;
        UninformedController::new(game, config, regret)
    }

    /// Reuses this controller's game, config, and solve cache for a fresh
    /// episode from another starting regret.
    pub fn restarted(&self, initial_regret: RegretVector) -> Result<UninformedController> {
        let mut fresh =
            UninformedController::new(self.game.clone(), self.config, initial_regret)?;
        fresh.cache = Arc::clone(&self.cache);
        Ok(fresh)
    }

    /// The current anti-discounted regret vector.
    pub fn regret(&self) -> &RegretVector {
        &self.regret
    }

    /// Solves the dual stage LP at the current regret, caches the reply
    /// mix, and samples a reply.
    pub fn step<R: Rng>(&mut self, rng: &mut R) -> Result<usize> {
        let mix = if self.config.solve_cache {
            cached_solve(&self.cache, self.regret.as_slice(), || {
                Ok(dual_truncated_value(&self.game, &self.config, &self.regret)?.1)
            })?
        } else {
            dual_truncated_value(&self.game, &self.config, &self.regret)?.1
        };
        let reply = sample_index(&mix, rng.gen());
        self.pending = Some(mix);
        Ok(reply)
    }

    /// Folds the opponent's observed action into the regret using the reply
    /// mix cached by the matching `step` call.
    pub fn observe(&mut self, informed_action: usize) -> Result<()> {
        let mix = self.pending.take().ok_or(Error::ObserveBeforeStep)?;
        self.regret = regret_update(
            &self.regret,
            &mix,
            informed_action,
            self.config.lambda,
            &self.game,
        )?;
        Ok(())
    }
}

/// Certified error bounds for truncation-based play at one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    /// Worst-case shortfall of the replanning informed controller against
    /// the infinite-game value: `2 (1-l)^(N+1) v_hat / l`.
    pub value_gap_informed: f64,
    /// Worst-case excess of the regret-based uninformed controller, same
    /// form and magnitude as the informed gap.
    pub value_gap_uninformed: f64,
    /// Closed interval the realized discounted payoff is anticipated to
    /// fall in when both sides play their truncation-based strategies.
    pub anticipated_interval: [f64; 2],
    /// Upper bound on the value scale used by the gaps: the largest
    /// absolute payoff entry, sound because stage weights sum below one.
    pub v_hat: f64,
    /// Grid maximum of `|V(p)|` over beliefs, the scale the anticipated
    /// interval is built from.
    pub grid_value_sup: f64,
}

/// Sweeps a belief grid for the truncated value scale and assembles the
/// certified gaps and the anticipated payoff interval.
///
/// With `shrink = (1-l)^N` and `spread = 2 (1-l)^(N+1) / l`, the interval
/// is `[(1 - spread) s / (1 + shrink), (1 + spread) s / (1 - shrink)]`
/// where `s` is the grid maximum of `|V(p)|`. Grid solves run in parallel.
pub fn bound_report(g: &GameSpec, cfg: &DiscountedConfig, grid_points: usize) -> Result<BoundReport> {
    if grid_points < 2 {
        return Err(Error::InvalidArgument(format!(
            "belief grid needs at least two points per edge, got {grid_points}"
        )));
    }
    let grid = belief_grid(g.num_states(), grid_points);
    let s = grid
        .into_par_iter()
        .map(|p| truncated_value(g, cfg, &p).map(f64::abs))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;
    let v_hat = g.max_abs_payoff();
    let shrink = (1.0 - cfg.lambda).powi(cfg.truncation as i32);
    let spread = 2.0 * (1.0 - cfg.lambda).powi(cfg.truncation as i32 + 1) / cfg.lambda;
    Ok(BoundReport {
        value_gap_informed: spread * v_hat,
        value_gap_uninformed: spread * v_hat,
        anticipated_interval: [
            (1.0 - spread) * s / (1.0 + shrink),
            (1.0 + spread) * s / (1.0 - shrink),
        ],
        v_hat,
        grid_value_sup: s,
    })
}

/// Beliefs on the regular simplex grid with `points` marks per edge, in
/// lexicographic order; for two states this is `p^1 = 0, 1/(points-1), ..,
/// 1` read off the first coordinate.
pub fn belief_grid(num_states: usize, points: usize) -> Vec<Belief> {
    assert!(num_states > 0, "need at least one state");
    assert!(points >= 2, "need at least two marks per edge");
    let mut grid = Vec::new();
    let mut counts = vec![0usize; num_states];
    push_compositions(&mut grid, &mut counts, 0, points - 1, points - 1);
    grid
}

fn push_compositions(
    grid: &mut Vec<Belief>,
    counts: &mut [usize],
    index: usize,
    remaining: usize,
    steps: usize,
) {
    if index + 1 == counts.len() {
        counts[index] = remaining;
        let p = counts.iter().map(|&c| c as f64 / steps as f64).collect();
        grid.push(Belief::new(p).expect("grid point is a distribution"));
        return;
    }
    for c in 0..=remaining {
        counts[index] = c;
        push_compositions(grid, counts, index + 1, remaining - c, steps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{best_response_value_vs_informed, best_response_value_vs_uninformed};
    use crate::finite_horizon::{InformedStrategy, UninformedStrategy};
    use crate::game_model::fixtures::network_game;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_half() -> Belief {
        Belief::new(vec![0.5, 0.5]).unwrap()
    }

    fn defended_channel_game() -> GameSpec {
        let mut g = GameSpec {
            states: vec!["1".into()],
            actions_informed: vec!["1".into(), "2".into()],
            actions_uninformed: vec!["1".into(), "2".into(), "o".into()],
            payoff: vec![vec![vec![1.0, 4.0, 3.0], vec![2.0, 1.0, 1.0]]],
            initial_probability: vec![1.0],
        };
        g.validate().unwrap();
        g
    }

    fn zero_game() -> GameSpec {
        let mut g = GameSpec {
            states: vec!["1".into(), "2".into()],
            actions_informed: vec!["a".into(), "b".into()],
            actions_uninformed: vec!["x".into(), "y".into()],
            payoff: vec![vec![vec![0.0; 2]; 2]; 2],
            initial_probability: vec![0.5, 0.5],
        };
        g.validate().unwrap();
        g
    }

    #[test]
    fn config_rejects_bad_parameters() {
        assert!(DiscountedConfig::new(0.0, 4).is_err());
        assert!(DiscountedConfig::new(1.0, 4).is_err());
        assert!(DiscountedConfig::new(-0.2, 4).is_err());
        assert!(DiscountedConfig::new(f64::NAN, 4).is_err());
        assert!(DiscountedConfig::new(0.7, 0).is_err());
        let cfg = DiscountedConfig::new(0.7, 4).unwrap().with_history_budget(99);
        assert_eq!(cfg.lambda(), 0.7);
        assert_eq!(cfg.truncation(), 4);
        assert_eq!(cfg.history_budget(), 99);
    }

    #[test]
    fn truncated_values_match_the_frozen_sequence() {
        let g = network_game();
        let p = half_half();
        let expected = [1.75, 2.1, 2.205, 2.2365, 2.24595, 2.248785];
        for (n, want) in expected.iter().enumerate() {
            let cfg = DiscountedConfig::new(0.7, n + 1).unwrap();
            let got = truncated_value(&g, &cfg, &p).unwrap();
            assert!(
                (got - want).abs() < 1e-9,
                "depth {}: {got} vs {want}",
                n + 1
            );
        }
    }

    #[test]
    fn known_state_value_decouples_into_stage_games() {
        let g = network_game();
        let cfg = DiscountedConfig::new(0.7, 3).unwrap();
        // Both payoff matrices happen to have matrix-game value 5/3, so
        // with the state known the value is the weight sum times 5/3.
        let want = (1.0 - 0.3f64.powi(3)) * 5.0 / 3.0;
        for known in [vec![1.0, 0.0], vec![0.0, 1.0]] {
            let p = Belief::new(known).unwrap();
            let got = truncated_value(&g, &cfg, &p).unwrap();
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn zero_payoff_games_are_degenerate_everywhere() {
        let g = zero_game();
        let p = half_half();
        let cfg = DiscountedConfig::new(0.6, 3).unwrap();
        assert!(truncated_value(&g, &cfg, &p).unwrap().abs() < 1e-12);
        let w = uninformed_initial_regret(&g, &cfg, &p).unwrap();
        assert!(w.as_slice().iter().all(|v| v.abs() < 1e-12));
        let (value, mix) =
            dual_truncated_value(&g, &cfg, &RegretVector::new(vec![3.0, 1.0]).unwrap()).unwrap();
        assert!((value - 3.0).abs() < 1e-9);
        assert!((mix.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let policy = informed_policy(&g, &cfg, &p).unwrap();
        assert_eq!(policy.num_states(), 2);
        let report = bound_report(&g, &cfg, 5).unwrap();
        assert_eq!(report.v_hat, 0.0);
        assert_eq!(report.value_gap_informed, 0.0);
        assert!(report.anticipated_interval[0].abs() < 1e-12);
        assert!(report.anticipated_interval[1].abs() < 1e-12);
    }

    #[test]
    fn initial_regret_matches_the_published_case_study() {
        let g = network_game();
        let cfg = DiscountedConfig::new(0.7, 4).unwrap();
        let w = uninformed_initial_regret(&g, &cfg, &half_half()).unwrap();
        assert!((w.get(0) + 2.24).abs() < 0.005, "w^1 = {}", w.get(0));
        assert!((w.get(1) + 2.24).abs() < 0.005, "w^2 = {}", w.get(1));
    }

    #[test]
    fn known_state_regret_is_minus_the_truncated_value() {
        let g = defended_channel_game();
        let p = Belief::new(vec![1.0]).unwrap();
        let cfg = DiscountedConfig::new(0.7, 3).unwrap();
        let value = truncated_value(&g, &cfg, &p).unwrap();
        let w = uninformed_initial_regret(&g, &cfg, &p).unwrap();
        assert!((w.get(0) + value).abs() < 1e-9);
    }

    #[test]
    fn known_state_policy_is_stage_maximin() {
        let g = defended_channel_game();
        let p = Belief::new(vec![1.0]).unwrap();
        let cfg = DiscountedConfig::new(0.7, 3).unwrap();
        let policy = informed_policy(&g, &cfg, &p).unwrap();
        let mix = policy.state_mix(0);
        let guarantee = (0..3)
            .map(|b| (0..2).map(|a| mix[a] * g.payoff_at(0, a, b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        assert!((guarantee - 5.0 / 3.0).abs() < 1e-6, "guarantee {guarantee}");
    }

    #[test]
    fn policy_reveals_less_as_the_state_becomes_likely() {
        let g = network_game();
        let cfg = DiscountedConfig::new(0.7, 4).unwrap();
        let sweep: Vec<f64> = (1..=9)
            .map(|i| {
                let p = Belief::new(vec![i as f64 / 10.0, 1.0 - i as f64 / 10.0]).unwrap();
                informed_policy(&g, &cfg, &p).unwrap().state_mix(0)[0]
            })
            .collect();
        for pair in sweep.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-9, "sweep not decreasing: {sweep:?}");
        }
        assert!(
            sweep[0] > sweep[8] + 0.05,
            "no end-to-end decrease: {sweep:?}"
        );
    }

    #[test]
    fn dual_value_is_shift_invariant() {
        let g = network_game();
        let w = RegretVector::new(vec![-1.0, 0.5]).unwrap();
        let shifted = RegretVector::new(vec![-0.2, 1.3]).unwrap();
        let (base, _) = dual_value(&g, 0.7, 3, &w, DEFAULT_HISTORY_BUDGET).unwrap();
        let (moved, _) = dual_value(&g, 0.7, 3, &shifted, DEFAULT_HISTORY_BUDGET).unwrap();
        assert!((moved - base - 0.8).abs() < 1e-8, "{moved} vs {base} + 0.8");
    }

    #[test]
    fn known_state_dual_value_is_the_conjugate_form() {
        let g = defended_channel_game();
        let cfg = DiscountedConfig::new(0.7, 3).unwrap();
        let value = truncated_value(&g, &cfg, &Belief::new(vec![1.0]).unwrap()).unwrap();
        for shift in [-2.0, 0.0, 1.5] {
            let w = RegretVector::new(vec![shift]).unwrap();
            let (dual, _) = dual_value(&g, 0.7, 3, &w, DEFAULT_HISTORY_BUDGET).unwrap();
            assert!((dual - value - shift).abs() < 1e-9, "{dual} vs {value} + {shift}");
        }
    }

    #[test]
    fn dual_value_vanishes_at_the_initial_regret() {
        let g = network_game();
        let cfg = DiscountedConfig::new(0.7, 4).unwrap();
        let w = uninformed_initial_regret(&g, &cfg, &half_half()).unwrap();
        let (value, _) = dual_value(&g, 0.7, 4, &w, DEFAULT_HISTORY_BUDGET).unwrap();
        assert!(value.abs() < 1e-6, "dual value at the seed regret: {value}");
    }

    #[test]
    fn dual_and_primal_values_satisfy_the_conjugacy() {
        let g = network_game();
        let cfg = DiscountedConfig::new(0.7, 2).unwrap();
        let grid = belief_grid(2, 11);
        let primal: Vec<f64> = grid
            .iter()
            .map(|p| truncated_value(&g, &cfg, p).unwrap())
            .collect();
        for p in &grid {
            let w = uninformed_initial_regret(&g, &cfg, p).unwrap();
            let (dual, _) = dual_value(&g, 0.7, 2, &w, DEFAULT_HISTORY_BUDGET).unwrap();
            assert!(dual.abs() < 1e-6, "dual at its own seed: {dual}");
            let conjugate = grid
                .iter()
                .zip(&primal)
                .map(|(q, v)| {
                    v + q
                        .as_slice()
                        .iter()
                        .zip(w.as_slice())
                        .map(|(qi, wi)| qi * wi)
                        .sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(conjugate <= dual + 1e-9, "conjugate {conjugate} above dual {dual}");
            assert!((conjugate - dual).abs() < 1e-4, "{conjugate} vs {dual}");
        }
    }

    #[test]
    fn value_differences_contract_geometrically() {
        let g = network_game();
        let grid = belief_grid(2, 51);
        let values: Vec<Vec<f64>> = grid
            .par_iter()
            .map(|p| {
                (1..=5)
                    .map(|n| {
                        let cfg = DiscountedConfig::new(0.7, n).unwrap();
                        truncated_value(&g, &cfg, p).unwrap()
                    })
                    .collect()
            })
            .collect();
        let mut diffs = Vec::new();
        for n in 0..5 {
            let d = values
                .iter()
                .map(|row| {
                    let prev = if n == 0 { 0.0 } else { row[n - 1] };
                    (row[n] - prev).abs()
                })
                .fold(0.0, f64::max);
            diffs.push(d);
        }
        println!("primal increment norms: {diffs:?}");
        for n in 1..5 {
            assert!(
                diffs[n] <= 0.3 * diffs[n - 1] + 1e-6,
                "depth {n}: {} vs 0.3 * {}",
                diffs[n],
                diffs[n - 1]
            );
        }
    }

    #[test]
    fn dual_differences_contract_geometrically() {
        let g = network_game();
        let marks: Vec<f64> = (0..6).map(|i| -5.0 + 2.0 * i as f64).collect();
        let wgrid: Vec<RegretVector> = marks
            .iter()
            .flat_map(|&w1| {
                marks
                    .iter()
                    .map(move |&w2| RegretVector::new(vec![w1, w2]).unwrap())
            })
            .collect();
        let values: Vec<Vec<f64>> = wgrid
            .par_iter()
            .map(|w| {
                let base = w.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut row = vec![base];
                for depth in 1..=5 {
                    let (v, _) = dual_value(&g, 0.7, depth, w, DEFAULT_HISTORY_BUDGET).unwrap();
                    row.push(v);
                }
                row
            })
            .collect();
        let diffs: Vec<f64> = (0..5)
            .map(|n| {
                values
                    .iter()
                    .map(|row| (row[n + 1] - row[n]).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        println!("dual increment norms: {diffs:?}");
        for n in 1..5 {
            assert!(
                diffs[n] <= 0.3 * diffs[n - 1] + 1e-6,
                "depth {n}: {} vs 0.3 * {}",
                diffs[n],
                diffs[n - 1]
            );
        }
    }

    #[test]
    fn bound_report_matches_hand_computed_endpoints() {
        let g = network_game();
        let cfg = DiscountedConfig::new(0.7, 4).unwrap();
        let report = bound_report(&g, &cfg, 101).unwrap();
        assert_eq!(report.v_hat, 4.0);
        assert!((report.value_gap_informed - 0.027771428571428573).abs() < 1e-12);
        assert_eq!(report.value_gap_informed, report.value_gap_uninformed);
        assert!(report.grid_value_sup >= 2.2365 - 1e-9);
        assert!(report.grid_value_sup < 2.24);
        let [lower, upper] = report.anticipated_interval;
        assert!((lower - 2.2031).abs() < 2e-3, "lower {lower}");
        assert!((upper - 2.2704).abs() < 2e-3, "upper {upper}");
        assert!(lower <= upper);

        let next = DiscountedConfig::new(0.7, 5).unwrap();
        let ratio =
            bound_report(&g, &next, 3).unwrap().value_gap_informed / report.value_gap_informed;
        assert!((ratio - 0.3).abs() < 1e-12);
    }

    /// The strategy the replanning informed controller induces on the first
    /// `horizon` stages: beliefs evolve deterministically per action
    /// history, one stage LP each.
    fn informed_replanning_strategy(
        g: &GameSpec,
        cfg: &DiscountedConfig,
        p0: &Belief,
        horizon: usize,
    ) -> InformedStrategy {
        let k_count = g.num_states();
        let a_count = g.num_actions_informed();
        let mut beliefs = vec![p0.clone()];
        let mut tables = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let policies: Vec<StrategyMatrix> = beliefs
                .par_iter()
                .map(|p| informed_policy(g, cfg, p).unwrap())
                .collect();
            tables.push(
                policies
                    .iter()
                    .map(|x| (0..k_count).map(|k| x.state_mix(k).to_vec()).collect())
                    .collect(),
            );
            // Histories the policy never reaches keep the parent belief;
            // their strategy entries carry zero mass in any evaluation.
            beliefs = beliefs
                .iter()
                .zip(&policies)
                .flat_map(|(p, x)| {
                    (0..a_count).map(move |a| belief_update(p, x, a).unwrap_or_else(|_| p.clone()))
                })
                .collect();
        }
        InformedStrategy::from_stage_tables(k_count, &tables).unwrap()
    }

    /// The reply strategy the regret-based controller induces on the first
    /// `horizon` stages: regrets evolve deterministically per action
    /// history, one dual LP each.
    fn uninformed_replanning_strategy(
        g: &GameSpec,
        cfg: &DiscountedConfig,
        p0: &Belief,
        horizon: usize,
    ) -> UninformedStrategy {
        let a_count = g.num_actions_informed();
        let mut regrets = vec![uninformed_initial_regret(g, cfg, p0).unwrap()];
        let mut tables = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let mixes: Vec<Vec<f64>> = regrets
                .par_iter()
                .map(|w| dual_truncated_value(g, cfg, w).unwrap().1)
                .collect();
            tables.push(mixes.clone());
            regrets = regrets
                .iter()
                .zip(&mixes)
                .flat_map(|(w, y)| {
                    (0..a_count).map(move |a| regret_update(w, y, a, cfg.lambda(), g).unwrap())
                })
                .collect();
        }
        UninformedStrategy::from_stage_tables(a_count, &tables).unwrap()
    }

    #[test]
    fn certified_play_stays_inside_the_anticipated_interval() {
        let g = network_game();
        let p = half_half();
        let cfg = DiscountedConfig::new(0.7, 4).unwrap();
        let report = bound_report(&g, &cfg, 101).unwrap();
        let [lower, upper] = report.anticipated_interval;

        let horizon = (1..)
            .find(|&t| 0.3f64.powi(t) * g.max_abs_payoff() < 1e-4)
            .unwrap() as usize;
        assert_eq!(horizon, 9);
        let weights = StageWeights::discounted(0.7, horizon).unwrap();

        let sigma = informed_replanning_strategy(&g, &cfg, &p, horizon);
        let guarantee = best_response_value_vs_informed(&g, &weights, &sigma, &p).unwrap();
        assert!(
            guarantee >= lower - 1e-3,
            "informed guarantee {guarantee} below anticipated lower endpoint {lower}"
        );

        let y = uninformed_replanning_strategy(&g, &cfg, &p, horizon);
        let concession = best_response_value_vs_uninformed(&g, &weights, &y, &p)
            .unwrap()
            .aggregate;
        assert!(
            concession <= upper + 1e-3,
            "uninformed concession {concession} above anticipated upper endpoint {upper}"
        );
    }

    #[test]
    fn controllers_play_a_seeded_match() {
        let g = network_game();
        let p = half_half();
        let cfg = DiscountedConfig::new(0.7, 4).unwrap();
        let mut informed = InformedController::new(g.clone(), cfg, 0, p.clone()).unwrap();
        let mut uninformed = UninformedController::from_prior(g.clone(), cfg, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for stage in 0..10 {
            let a = informed.step(&mut rng).unwrap();
            let b = uninformed.step(&mut rng).unwrap();
            assert!(a < 2 && b < 3, "stage {stage}: action {a}, reply {b}");
            informed.observe(a).unwrap();
            uninformed.observe(a).unwrap();
            assert_eq!(informed.belief().len(), 2);
            assert!(uninformed.regret().as_slice().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn observe_before_step_is_rejected() {
        let g = network_game();
        let p = half_half();
        let cfg = DiscountedConfig::new(0.7, 2).unwrap();
        let mut informed = InformedController::new(g.clone(), cfg, 1, p.clone()).unwrap();
        assert!(matches!(informed.observe(0), Err(Error::ObserveBeforeStep)));
        let w = RegretVector::new(vec![0.0, 0.0]).unwrap();
        let mut uninformed = UninformedController::new(g, cfg, w).unwrap();
        assert!(matches!(uninformed.observe(0), Err(Error::ObserveBeforeStep)));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = informed.step(&mut rng).unwrap();
        informed.observe(a).unwrap();
        assert!(matches!(informed.observe(a), Err(Error::ObserveBeforeStep)));
    }

    #[test]
    fn known_state_controller_keeps_its_belief() {
        let g = defended_channel_game();
        let cfg = DiscountedConfig::new(0.7, 2).unwrap();
        let prior = Belief::new(vec![1.0]).unwrap();
        let mut c = InformedController::new(g, cfg, 0, prior).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..3 {
            let a = c.step(&mut rng).unwrap();
            assert!(a < 2);
            c.observe(a).unwrap();
            assert_eq!(c.belief().as_slice(), &[1.0]);
        }
    }

    #[test]
    fn zero_payoff_regret_rescales_exactly() {
        let g = zero_game();
        let cfg = DiscountedConfig::new(0.5, 2).unwrap();
        let seed = RegretVector::new(vec![0.5, -0.25]).unwrap();
        let mut c = UninformedController::new(g, cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 1..=3 {
            c.step(&mut rng).unwrap();
            c.observe(0).unwrap();
            let scale = 2.0f64.powi(t);
            assert_eq!(c.regret().as_slice(), &[0.5 * scale, -0.25 * scale]);
        }
    }

    #[test]
    fn solve_cache_replays_identically() {
        let g = network_game();
        let p = half_half();
        let base = DiscountedConfig::new(0.7, 2).unwrap();
        let mut plain = InformedController::new(g.clone(), base, 0, p.clone()).unwrap();
        let mut cached =
            InformedController::new(g.clone(), base.with_solve_cache(true), 0, p.clone()).unwrap();
        // Key rounding means cached play tracks uncached play to cache
        // resolution, not bitwise.
        let close = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
        };
        let mut rng_a = ChaCha8Rng::seed_from_u64(42);
        let mut rng_b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..6 {
            let a = plain.step(&mut rng_a).unwrap();
            let b = cached.step(&mut rng_b).unwrap();
            assert_eq!(a, b);
            plain.observe(a).unwrap();
            cached.observe(b).unwrap();
        }
        assert!(close(plain.belief().as_slice(), cached.belief().as_slice()));

        let mut replay = cached.restarted(0, p).unwrap();
        let mut rng_c = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..6 {
            let a = replay.step(&mut rng_c).unwrap();
            replay.observe(a).unwrap();
        }
        assert!(close(replay.belief().as_slice(), plain.belief().as_slice()));
    }

    #[test]
    fn lopsided_regret_defends_the_exposed_channel() {
        let g = network_game();
        let cfg = DiscountedConfig::new(0.7, 4).unwrap();
        let (_, favor_two) =
            dual_truncated_value(&g, &cfg, &RegretVector::new(vec![-5.0, 0.0]).unwrap()).unwrap();
        let (_, favor_one) =
            dual_truncated_value(&g, &cfg, &RegretVector::new(vec![0.0, -5.0]).unwrap()).unwrap();
        assert!(
            favor_two[1] > favor_two[0],
            "state-2 regret should draw defense to channel 2: {favor_two:?}"
        );
        assert!(
            favor_one[0] > favor_one[1],
            "state-1 regret should draw defense to channel 1: {favor_one:?}"
        );
    }
}
