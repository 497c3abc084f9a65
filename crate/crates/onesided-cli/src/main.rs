//! Command-line front end for the solver library.
//!
//! Five subcommands cover the pipeline: `validate` checks a game file,
//! `solve-finite` computes security strategies and values, `bounds` prints
//! the certified interval for truncation-based play, `simulate` runs seeded
//! Monte Carlo matches, and `case-study` reproduces the whole network
//! interdiction analysis from the embedded fixture in one shot.
//!
//! Every command prints one JSON document on stdout (numbers rounded to 12
//! significant digits so outputs diff cleanly) and diagnostics on stderr.
//! Exit codes: 0 success, 1 usage errors (bad flags, unreadable files),
//! 2 validation errors in the game description, 3 solver or budget failures
//! and failed case-study checks.

use clap::{Parser, Subcommand, ValueEnum};
use onesided::discounted_play::{
    bound_report, truncated_value, uninformed_initial_regret, DiscountedConfig,
    InformedController, UninformedController,
};
use onesided::evaluation::{best_response_value_vs_informed, best_response_value_vs_uninformed};
use onesided::finite_horizon::{
    solve_informed, solve_uninformed, InformedSolution, LpSizeReport, StageWeights,
    UninformedSolution,
};
use onesided::game_model::GameSpec;
use onesided::simulator::{
    monte_carlo_with_logs, EpisodeLog, FixedInformedPlayer, FixedUninformedPlayer,
    MonteCarloReport, StagePlayer,
};
use onesided::Error;
use serde_json::{json, Map, Number, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

const NETWORK_FIXTURE: &str = include_str!("../fixtures/network_interdiction.json");

const PUBLISHED_FINITE_VALUE: f64 = 6.57;
const PUBLISHED_FINITE_SIMULATION_MEAN: f64 = 6.58;
const PUBLISHED_DISCOUNTED_VALUE: f64 = 2.24;
const PUBLISHED_INITIAL_REGRET: f64 = -2.24;
const PUBLISHED_INTERVAL: [f64; 2] = [1.96, 2.59];
const PUBLISHED_DISCOUNTED_SIMULATION_MEAN: f64 = 2.35;
const PUBLISHED_INFORMED_LP: (usize, usize) = (65, 35);
const PUBLISHED_UNINFORMED_LP: (usize, usize) = (44, 23);

#[derive(Parser)]
#[command(name = "onesided")]
#[command(about = "Security strategies for repeated games with one-sided incomplete information")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Check a game file and print its normalized form
    Validate {
        /// Path to a JSON game description
        game: PathBuf,
    },

    /// Solve the N-stage game for one player
    SolveFinite {
        /// Path to a JSON game description
        game: PathBuf,

        /// Number of stages
        #[arg(long)]
        stages: usize,

        /// Which player's security strategy to compute
        #[arg(long, value_enum)]
        player: PlayerSide,

        /// Discount rate; stage t then carries weight lambda (1 - lambda)^(t-1)
        /// instead of 1
        #[arg(long)]
        lambda: Option<f64>,
    },

    /// Certified interval for truncation-based play of the discounted game
    Bounds {
        /// Path to a JSON game description
        game: PathBuf,

        /// Discount rate in (0, 1)
        #[arg(long)]
        lambda: f64,

        /// Truncation depth N of the approximating game
        #[arg(long)]
        truncation: usize,

        /// Belief-grid marks per simplex edge
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },

    /// Seeded Monte Carlo matches between security strategies
    Simulate {
        /// Path to a JSON game description
        game: PathBuf,

        /// Play the N-stage game with exact strategies, or the discounted
        /// game with replanning controllers
        #[arg(long, value_enum)]
        mode: SimulationMode,

        /// Stages of the finite game (finite mode)
        #[arg(long, default_value_t = 3)]
        stages: usize,

        /// Discount rate (discounted mode)
        #[arg(long, default_value_t = 0.7)]
        lambda: f64,

        /// Truncation depth of the controllers (discounted mode)
        #[arg(long, default_value_t = 4)]
        truncation: usize,

        /// Stages to play before stopping (discounted mode)
        #[arg(long, default_value_t = 10)]
        horizon: usize,

        /// Number of episodes
        #[arg(long, default_value_t = 1000)]
        trials: usize,

        /// Seed; episode i plays on stream i of this seed
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Also dump every stage of every episode as CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },

    /// Reproduce the network interdiction analysis end to end
    CaseStudy {
        /// Game file overriding the embedded fixture
        #[arg(long)]
        game: Option<PathBuf>,

        /// Episodes for the finite-game simulation; 0 skips both simulations
        #[arg(long, default_value_t = 5000)]
        trials: usize,

        /// Episodes for the discounted-game simulation
        #[arg(long, default_value_t = 100)]
        discounted_trials: usize,

        /// Seed for both simulations
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlayerSide {
    Informed,
    Uninformed,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimulationMode {
    Finite,
    Discounted,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        let code = match &e {
            Error::InvalidArgument(_) => 1,
            Error::Parse(_) | Error::Validation(_) | Error::IndexOutOfRange { .. } => 2,
            Error::BudgetExceeded { .. }
            | Error::Solver(_)
            | Error::ZeroProbabilityAction { .. }
            | Error::ObserveBeforeStep => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

struct CommandOutput {
    payload: Value,
    code: i32,
}

impl CommandOutput {
    fn ok(payload: Value) -> CommandOutput {
        CommandOutput { payload, code: 0 }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let outcome = match cli.command {
        Commands::Validate { game } => cmd_validate(&game),
        Commands::SolveFinite {
            game,
            stages,
            player,
            lambda,
        } => cmd_solve_finite(&game, stages, player, lambda),
        Commands::Bounds {
            game,
            lambda,
            truncation,
            grid,
        } => cmd_bounds(&game, lambda, truncation, grid),
        Commands::Simulate {
            game,
            mode,
            stages,
            lambda,
            truncation,
            horizon,
            trials,
            seed,
            csv,
        } => cmd_simulate(
            &game,
            mode,
            stages,
            lambda,
            truncation,
            horizon,
            trials,
            seed,
            csv.as_deref(),
        ),
        Commands::CaseStudy {
            game,
            trials,
            discounted_trials,
            seed,
        } => cmd_case_study(game.as_deref(), trials, discounted_trials, seed),
    };
    match outcome {
        Ok(output) => {
            emit(output.payload);
            std::process::exit(output.code);
        }
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            std::process::exit(failure.code);
        }
    }
}

/// Prints a JSON document with every float rounded to 12 significant
/// digits. A consumer that stops reading (such as `head`) is not an error.
fn emit(mut payload: Value) {
    round_numbers(&mut payload);
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "{}",
        serde_json::to_string_pretty(&payload).unwrap()
    );
}

fn round_numbers(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                let rounded = round_significant(n.as_f64().unwrap());
                if let Some(replacement) = Number::from_f64(rounded) {
                    *n = replacement;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn round_significant(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let magnitude = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(11 - magnitude);
    (v * scale).round() / scale
}

fn read_game(path: &Path) -> Result<GameSpec, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(GameSpec::from_json_str(&text)?)
}

fn lp_size_json(size: &LpSizeReport) -> Value {
    json!({
        "conventional_rows": size.conventional_rows,
        "conventional_cols": size.conventional_cols,
        "backend_rows": size.backend_rows,
        "backend_cols": size.backend_cols,
    })
}

fn cmd_validate(path: &Path) -> Result<CommandOutput, Failure> {
    let g = read_game(path)?;
    Ok(CommandOutput::ok(json!({
        "game": serde_json::to_value(&g).unwrap(),
        "num_states": g.num_states(),
        "num_actions_informed": g.num_actions_informed(),
        "num_actions_uninformed": g.num_actions_uninformed(),
        "max_abs_payoff": g.max_abs_payoff(),
    })))
}

fn stage_weights(lambda: Option<f64>, stages: usize) -> Result<StageWeights, Failure> {
    match lambda {
        Some(l) => Ok(StageWeights::discounted(l, stages)?),
        None => Ok(StageWeights::uniform(stages)),
    }
}

fn cmd_solve_finite(
    path: &Path,
    stages: usize,
    player: PlayerSide,
    lambda: Option<f64>,
) -> Result<CommandOutput, Failure> {
    if stages == 0 {
        return Err(Failure::usage("--stages must be at least 1"));
    }
    let g = read_game(path)?;
    let weights = stage_weights(lambda, stages)?;
    let p = g.prior();
    let payload = match player {
        PlayerSide::Informed => {
            let InformedSolution {
                value,
                strategy,
                lp_size,
                ..
            } = solve_informed(&g, &weights, &p)?;
            let certificate = best_response_value_vs_informed(&g, &weights, &strategy, &p)?;
            json!({
                "player": "informed",
                "stages": stages,
                "lambda": lambda,
                "value": value,
                "strategy": strategy.to_json(&g),
                "lp_size": lp_size_json(&lp_size),
                "certificates": { "best_response_value": certificate },
            })
        }
        PlayerSide::Uninformed => {
            let UninformedSolution {
                value,
                strategy,
                per_state_caps,
                lp_size,
            } = solve_uninformed(&g, &weights, &p)?;
            let certificate = best_response_value_vs_uninformed(&g, &weights, &strategy, &p)?;
            let mut payload = json!({
                "player": "uninformed",
                "stages": stages,
                "lambda": lambda,
                "value": value,
                "strategy": strategy.to_json(&g),
                "lp_size": lp_size_json(&lp_size),
                "certificates": { "best_response_value": certificate.aggregate },
            });
            if lambda.is_some() {
                let w_star: Vec<f64> = per_state_caps.iter().map(|c| -c).collect();
                payload["w_star"] = json!(w_star);
            }
            payload
        }
    };
    Ok(CommandOutput::ok(payload))
}

fn cmd_bounds(
    path: &Path,
    lambda: f64,
    truncation: usize,
    grid: usize,
) -> Result<CommandOutput, Failure> {
    let g = read_game(path)?;
    let cfg = DiscountedConfig::new(lambda, truncation)?;
    let report = bound_report(&g, &cfg, grid)?;
    let mut payload = serde_json::to_value(&report).unwrap();
    payload["lambda"] = json!(lambda);
    payload["truncation"] = json!(truncation);
    payload["grid"] = json!(grid);
    Ok(CommandOutput::ok(payload))
}

fn finite_seats(
    g: &GameSpec,
    stages: usize,
) -> Result<(Arc<onesided::finite_horizon::InformedStrategy>, Arc<onesided::finite_horizon::UninformedStrategy>), Failure> {
    let weights = StageWeights::uniform(stages);
    let p = g.prior();
    let sigma = Arc::new(solve_informed(g, &weights, &p)?.strategy);
    let tau = Arc::new(solve_uninformed(g, &weights, &p)?.strategy);
    Ok((sigma, tau))
}

fn run_finite_simulation(
    g: &GameSpec,
    stages: usize,
    trials: usize,
    seed: u64,
) -> Result<(MonteCarloReport, Vec<EpisodeLog>), Failure> {
    let weights = StageWeights::uniform(stages);
    let (sigma, tau) = finite_seats(g, stages)?;
    Ok(monte_carlo_with_logs(
        g,
        &weights,
        &|k| Ok(Box::new(FixedInformedPlayer::new(Arc::clone(&sigma), k)?) as Box<dyn StagePlayer>),
        &|| Ok(Box::new(FixedUninformedPlayer::new(Arc::clone(&tau))) as Box<dyn StagePlayer>),
        trials,
        seed,
    )?)
}

fn run_discounted_simulation(
    g: &GameSpec,
    lambda: f64,
    truncation: usize,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<(MonteCarloReport, Vec<EpisodeLog>), Failure> {
    let cfg = DiscountedConfig::new(lambda, truncation)?.with_solve_cache(true);
    let weights = StageWeights::discounted(lambda, horizon)?;
    let p = g.prior();
    let informed_proto = InformedController::new(g.clone(), cfg, 0, p.clone())?;
    let uninformed_proto = UninformedController::from_prior(g.clone(), cfg, &p)?;
    let w_star = uninformed_proto.regret().clone();
    Ok(monte_carlo_with_logs(
        g,
        &weights,
        &|k| Ok(Box::new(informed_proto.restarted(k, p.clone())?) as Box<dyn StagePlayer>),
        &|| Ok(Box::new(uninformed_proto.restarted(w_star.clone())?) as Box<dyn StagePlayer>),
        trials,
        seed,
    )?)
}

fn write_episode_csv(path: &Path, logs: &[EpisodeLog]) -> Result<(), Failure> {
    let mut out = String::from("trial,t,k,a,b,payoff,weight\n");
    for (trial, log) in logs.iter().enumerate() {
        for record in &log.stages {
            out.push_str(&format!(
                "{trial},{},{},{},{},{},{}\n",
                record.stage, log.state, record.action, record.reply, record.payoff, record.weight
            ));
        }
    }
    fs::write(path, out)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    path: &Path,
    mode: SimulationMode,
    stages: usize,
    lambda: f64,
    truncation: usize,
    horizon: usize,
    trials: usize,
    seed: u64,
    csv: Option<&Path>,
) -> Result<CommandOutput, Failure> {
    let g = read_game(path)?;
    let (payload, logs) = match mode {
        SimulationMode::Finite => {
            if stages == 0 {
                return Err(Failure::usage("--stages must be at least 1"));
            }
            let (report, logs) = run_finite_simulation(&g, stages, trials, seed)?;
            (
                json!({
                    "mode": "finite",
                    "stages": stages,
                    "report": serde_json::to_value(&report).unwrap(),
                }),
                logs,
            )
        }
        SimulationMode::Discounted => {
            if horizon == 0 {
                return Err(Failure::usage("--horizon must be at least 1"));
            }
            let (report, logs) =
                run_discounted_simulation(&g, lambda, truncation, horizon, trials, seed)?;
            (
                json!({
                    "mode": "discounted",
                    "lambda": lambda,
                    "truncation": truncation,
                    "horizon": horizon,
                    "report": serde_json::to_value(&report).unwrap(),
                }),
                logs,
            )
        }
    };
    if let Some(csv_path) = csv {
        write_episode_csv(csv_path, &logs)?;
    }
    Ok(CommandOutput::ok(payload))
}

/// One quantitative comparison against a published figure.
fn check(name: &str, computed: f64, published: f64, tolerance: f64) -> Value {
    json!({
        "name": name,
        "computed": computed,
        "published": published,
        "tolerance": tolerance,
        "pass": (computed - published).abs() <= tolerance,
    })
}

fn check_in_interval(name: &str, computed: f64, interval: [f64; 2]) -> Value {
    json!({
        "name": name,
        "computed": computed,
        "published_interval": interval,
        "pass": computed >= interval[0] && computed <= interval[1],
    })
}

fn published_tables() -> Value {
    let histories = ["", "1", "2", "1.1", "1.2", "2.1", "2.2"];
    let channel_one_given_state: [[f64; 7]; 2] = [
        [0.64, 0.56, 0.8, 0.4, 1.0, 1.0, 1.0],
        [0.35, 0.20, 0.44, 0.0, 0.0, 0.0, 0.6],
    ];
    let attacker_rows: [[f64; 7]; 3] = [
        [0.5, 0.54, 0.46, 0.68, 0.49, 0.51, 0.04],
        [0.5, 0.46, 0.54, 0.04, 0.51, 0.49, 0.68],
        [0.0, 0.0, 0.0, 0.28, 0.0, 0.0, 0.28],
    ];
    let mut network = Map::new();
    for (k, row) in channel_one_given_state.iter().enumerate() {
        let mut by_history = Map::new();
        for (h, &prob) in histories.iter().zip(row) {
            by_history.insert(h.to_string(), json!(prob));
        }
        network.insert(format!("{}", k + 1), Value::Object(by_history));
    }
    let mut attacker = Map::new();
    for (h_index, &h) in histories.iter().enumerate() {
        let mut dist = Map::new();
        for (label, row) in ["1", "2", "o"].iter().zip(&attacker_rows) {
            dist.insert(label.to_string(), json!(row[h_index]));
        }
        attacker.insert(h.to_string(), Value::Object(dist));
    }
    json!({
        "note": "informational only; optimal strategies are not unique, so entries are not checked",
        "network_probability_of_channel_1_by_state": Value::Object(network),
        "attacker_strategy_by_history": Value::Object(attacker),
    })
}

fn cmd_case_study(
    game_override: Option<&Path>,
    trials: usize,
    discounted_trials: usize,
    seed: u64,
) -> Result<CommandOutput, Failure> {
    let g = match game_override {
        Some(path) => read_game(path)?,
        None => GameSpec::from_json_str(NETWORK_FIXTURE)?,
    };
    let p = g.prior();
    let mut checks = Vec::new();

    let weights3 = StageWeights::uniform(3);
    let informed = solve_informed(&g, &weights3, &p)?;
    let uninformed = solve_uninformed(&g, &weights3, &p)?;
    checks.push(check(
        "finite_value_informed",
        informed.value,
        PUBLISHED_FINITE_VALUE,
        0.005,
    ));
    checks.push(check(
        "finite_value_uninformed",
        uninformed.value,
        PUBLISHED_FINITE_VALUE,
        0.005,
    ));
    checks.push(check(
        "finite_values_agree",
        informed.value - uninformed.value,
        0.0,
        1e-6,
    ));
    checks.push(check(
        "informed_lp_rows",
        informed.lp_size.conventional_rows as f64,
        PUBLISHED_INFORMED_LP.0 as f64,
        0.0,
    ));
    checks.push(check(
        "informed_lp_cols",
        informed.lp_size.conventional_cols as f64,
        PUBLISHED_INFORMED_LP.1 as f64,
        0.0,
    ));
    checks.push(check(
        "uninformed_lp_rows",
        uninformed.lp_size.conventional_rows as f64,
        PUBLISHED_UNINFORMED_LP.0 as f64,
        0.0,
    ));
    checks.push(check(
        "uninformed_lp_cols",
        uninformed.lp_size.conventional_cols as f64,
        PUBLISHED_UNINFORMED_LP.1 as f64,
        0.0,
    ));
    let finite_section = json!({
        "stages": 3,
        "informed_value": informed.value,
        "uninformed_value": uninformed.value,
        "informed_lp_size": lp_size_json(&informed.lp_size),
        "uninformed_lp_size": lp_size_json(&uninformed.lp_size),
        "informed_strategy": informed.strategy.to_json(&g),
        "uninformed_strategy": uninformed.strategy.to_json(&g),
        "published_tables": published_tables(),
    });

    let cfg = DiscountedConfig::new(0.7, 4)?;
    let value = truncated_value(&g, &cfg, &p)?;
    let w_star = uninformed_initial_regret(&g, &cfg, &p)?;
    let report = bound_report(&g, &cfg, 101)?;
    checks.push(check(
        "discounted_value",
        value,
        PUBLISHED_DISCOUNTED_VALUE,
        0.005,
    ));
    for k in 0..w_star.len() {
        checks.push(check(
            &format!("initial_regret_{}", k + 1),
            w_star.get(k),
            PUBLISHED_INITIAL_REGRET,
            0.005,
        ));
    }
    checks.push(check(
        "interval_lower",
        report.anticipated_interval[0],
        PUBLISHED_INTERVAL[0],
        0.02,
    ));
    checks.push(check(
        "interval_upper",
        report.anticipated_interval[1],
        PUBLISHED_INTERVAL[1],
        0.02,
    ));
    let discounted_section = json!({
        "lambda": 0.7,
        "truncation": 4,
        "value": value,
        "w_star": serde_json::to_value(&w_star).unwrap(),
        "bound_report": serde_json::to_value(&report).unwrap(),
    });

    let simulation_section = if trials == 0 {
        json!({ "skipped": true })
    } else {
        let (finite_report, _) = run_finite_simulation(&g, 3, trials, seed)?;
        checks.push(check(
            "finite_simulation_mean",
            finite_report.mean,
            PUBLISHED_FINITE_VALUE,
            3.0 * finite_report.ci95_halfwidth,
        ));
        let (discounted_report, _) =
            run_discounted_simulation(&g, 0.7, 4, 10, discounted_trials, seed)?;
        checks.push(check_in_interval(
            "discounted_simulation_mean",
            discounted_report.mean,
            PUBLISHED_INTERVAL,
        ));
        json!({
            "finite": {
                "stages": 3,
                "report": serde_json::to_value(&finite_report).unwrap(),
                "published_mean": PUBLISHED_FINITE_SIMULATION_MEAN,
            },
            "discounted": {
                "lambda": 0.7,
                "truncation": 4,
                "horizon": 10,
                "report": serde_json::to_value(&discounted_report).unwrap(),
                "published_mean": PUBLISHED_DISCOUNTED_SIMULATION_MEAN,
            },
        })
    };

    let all_pass = checks
        .iter()
        .all(|c| c["pass"].as_bool().unwrap_or(false));
    let payload = json!({
        "game": serde_json::to_value(&g).unwrap(),
        "finite_horizon": finite_section,
        "discounted": discounted_section,
        "simulation": simulation_section,
        "checks": checks,
        "all_checks_pass": all_pass,
    });
    Ok(CommandOutput {
        payload,
        code: if all_pass { 0 } else { 3 },
    })
}
