use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairlead::env::MatrixGameEnv;
use fairlead::harness::config::{EnvConfig, RunConfig, SelectorConfig};
use fairlead::harness::endgame::{endgame_config, reproduce_endgame_experiment, ENDGAME_EPISODES, ENDGAME_WINDOW};
use fairlead::harness::outputs::emit_outputs;
use fairlead::harness::sweep::sweep;
use fairlead::harness::evaluate_checkpoint;
use fairlead::mediator::TransferRule;
use fairlead::solver::{enumeration_oracle, matrix_model, sequential_jamvi, verify_mpe, ExplicitModel, SolverSettings};
use fairlead::{Error, Result};

/// Fair leader selection in Stackelberg games with dynamic leaders.
#[derive(Parser, Debug)]
#[command(name = "fairlead", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration file. `FAIRLEAD_<KEY>` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    seeds: Option<u64>,
    /// Training episodes per run.
    #[arg(long)]
    episodes: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one selector over the configured seeds.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        selector: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Greedy rollouts of a saved run checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train several selectors (comma separated) over the configured seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "fixed,alternating,vote,jamql-naive,jamql-prefinal,jamql")]
        selector: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Joint value iteration on the configured matrix game or an explicit model.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Explicit model file instead of the configured game.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        rounds: usize,
        /// Writes the explicit model used.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force fairness optimum of the configured game or an explicit model.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Decision depth; defaults to the number of steps.
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Per-step action frequencies with and without the end-game stage.
    Endgame {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = ENDGAME_EPISODES)]
        episodes: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn load_config(common: &Common, selector: Option<&str>) -> Result<RunConfig> {
    let text = match &common.config {
        Some(path) => read(path)?,
        None => String::new(),
    };
    let mut vars: Vec<(String, String)> = std::env::vars().collect();
    if let Some(name) = selector {
        vars.retain(|(k, _)| k != "FAIRLEAD_SELECTOR");
        vars.push(("FAIRLEAD_SELECTOR".into(), format!("\"{name}\"")));
    }
    let mut cfg = RunConfig::parse_with_overrides(&text, vars)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(seeds) = common.seeds {
        cfg.seeds = seeds;
    }
    if let Some(episodes) = common.episodes {
        cfg.episodes = episodes;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_selectors(cfg: &RunConfig, selectors: &[SelectorConfig], out: &Path, parallel: usize) -> Result<()> {
    let runs = sweep(cfg, selectors, parallel)?;
    for run in &runs {
        println!("{} seed {}: {} ({:.1}s)", run.selector, run.seed, run.final_eval.describe(), run.seconds);
    }
    emit_outputs(out, cfg, &runs)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn model_for(cfg: &RunConfig, path: Option<&Path>) -> Result<(ExplicitModel, usize)> {
    if let Some(path) = path {
        let model = ExplicitModel::from_text(&read(path)?)?;
        let horizon = model.states;
        return Ok((model, horizon));
    }
    let EnvConfig::Matrix { kind, agents, steps } = cfg.env else {
        return Err(Error::Usage("explicit models are built for matrix games only; pass --model".into()));
    };
    let env = MatrixGameEnv::new(kind, agents, steps)?;
    let rule = cfg.selector.use_endgame().then(|| TransferRule::new(cfg.fairness.clone(), cfg.endgame_ideal));
    Ok((matrix_model(&env, rule)?, steps))
}

fn settings_for(cfg: &RunConfig) -> SolverSettings {
    let use_history = !matches!(cfg.selector, SelectorConfig::Mediator(v) if !v.use_history);
    SolverSettings {
        phi: cfg.fairness.clone(),
        gamma_agents: cfg.gamma_agents,
        gamma_mediator: cfg.gamma_mediator,
        use_history,
        ..SolverSettings::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, selector, out, parallel } => {
            let cfg = load_config(&common, selector.as_deref())?;
            run_selectors(&cfg, &[cfg.selector], &out, parallel)
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load_config(&common, None)?;
            let episodes = common.episodes.unwrap_or(cfg.eval_episodes);
            let summary = evaluate_checkpoint(&cfg, &read(&checkpoint)?, episodes, cfg.seed)?;
            println!("{}", summary.describe());
            Ok(())
        }
        Command::Sweep { common, selector, out, parallel } => {
            let cfg = load_config(&common, None)?;
            let selectors = selector
                .iter()
                .map(|s| load_config(&common, Some(s)).map(|c| c.selector))
                .collect::<Result<Vec<_>>>()?;
            run_selectors(&cfg, &selectors, &out, parallel)
        }
        Command::Solve { common, model, rounds, out } => {
            let cfg = load_config(&common, None)?;
            let (model, _) = model_for(&cfg, model.as_deref())?;
            if let Some(out) = out {
                std::fs::write(&out, model.to_text())?;
            }
            let settings = settings_for(&cfg);
            let result = sequential_jamvi(&model, rounds, &settings)?;
            let mpe = verify_mpe(&model, &result.profile, &result.mediator, &settings)?;
            println!("states {}", model.states);
            println!("rounds {} converged {}", result.rounds, result.converged);
            println!("returns {:?}", result.returns);
            println!("fairness {}", result.fairness);
            println!("trace {:?}", result.trace);
            println!("mpe {} gap {:e}", mpe.is_mpe, mpe.worst_gap);
            Ok(())
        }
        Command::Oracle { common, model, horizon } => {
            let cfg = load_config(&common, None)?;
            let (model, default_horizon) = model_for(&cfg, model.as_deref())?;
            let result = enumeration_oracle(&model, &cfg.fairness, horizon.unwrap_or(default_horizon))?;
            println!("plans {}", result.plans);
            println!("value {}", result.value);
            println!("returns {:?}", result.returns);
            for (s, l, a) in &result.witness {
                println!("state {s} leader {} action {a}", l + 1);
            }
            Ok(())
        }
        Command::Endgame { seed, episodes, out } => {
            let cfg = endgame_config(episodes);
            let mut text = String::new();
            for endgame in [false, true] {
                let hist = reproduce_endgame_experiment(&cfg, endgame, seed, ENDGAME_WINDOW)?;
                text.push_str(&hist.to_table());
            }
            print!("{text}");
            if let Some(out) = out {
                std::fs::write(&out, &text)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(Error::Usage(String::new()).exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
