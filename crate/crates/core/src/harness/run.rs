//! Seeded runs: training with periodic greedy evaluation, summaries and
//! run checkpoints.
//!
//! A run checkpoint is line based:
//!
//! ```text
//! # fairlead run checkpoint v1
//! env chicken
//! agents 2
//! selector jamql
//! learner tabular
//! agent_view standing
//! episodes 200000
//! section 12
//! ...twelve lines of learner state...
//! section 0
//! ```
//!
//! One section per agent, then one for the selector.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::harness::build::{build_trainer, eval_rng, train_rng};
use crate::harness::config::RunConfig;
use crate::harness::runner::EpisodeRecord;

pub const RUN_HEADER: &str = "# fairlead run checkpoint v1";

/// Mean and sample standard deviation; the deviation of fewer than two
/// values is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub episodes: usize,
    pub min_welfare_mean: f64,
    pub min_welfare_std: f64,
    pub return_mean: Vec<f64>,
    pub return_std: Vec<f64>,
}

impl EvalSummary {
    pub fn from_records(records: &[EpisodeRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::Usage("evaluation needs at least one episode".into()))?;
        let mw: Vec<f64> = records.iter().map(|r| r.min_welfare).collect();
        let (min_welfare_mean, min_welfare_std) = mean_std(&mw);
        let (return_mean, return_std) = (0..first.returns.len())
            .map(|i| mean_std(&records.iter().map(|r| r.returns[i]).collect::<Vec<_>>()))
            .unzip();
        Ok(Self { episodes: records.len(), min_welfare_mean, min_welfare_std, return_mean, return_std })
    }

    pub fn describe(&self) -> String {
        let returns: Vec<String> = self
            .return_mean
            .iter()
            .zip(&self.return_std)
            .map(|(m, s)| format!("{m:.3} ± {s:.3}"))
            .collect();
        format!(
            "min welfare {:.3} ± {:.3} over {} episodes; returns [{}]",
            self.min_welfare_mean,
            self.min_welfare_std,
            self.episodes,
            returns.join(", ")
        )
    }
}

/// Greedy evaluation taken after `episode` training episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub episode: u64,
    pub summary: EvalSummary,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub seed: u64,
    pub selector: String,
    pub agents: usize,
    pub episodes: u64,
    /// Per-episode CSV rows without the header.
    pub csv_rows: String,
    pub min_welfare: Vec<f64>,
    pub evals: Vec<EvalPoint>,
    pub final_eval: EvalSummary,
    pub checkpoint: String,
    pub seconds: f64,
}

pub fn csv_header(agents: usize) -> String {
    let mut h = String::from("episode,seed,selector,min_welfare");
    for i in 1..=agents {
        write!(h, ",ret_{i}").unwrap();
    }
    h.push_str(",leaders,transfers");
    h
}

pub fn csv_row(out: &mut String, seed: u64, selector: &str, r: &EpisodeRecord) {
    write!(out, "{},{seed},{selector},{}", r.episode, r.min_welfare).unwrap();
    for v in &r.returns {
        write!(out, ",{v}").unwrap();
    }
    let leaders: Vec<String> = r.leaders.iter().map(|l| (l + 1).to_string()).collect();
    write!(out, ",{},", leaders.join("-")).unwrap();
    if let Some(t) = &r.transfers {
        let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
        out.push_str(&parts.join(";"));
    }
    out.push('\n');
}

/// Trains one seed of `cfg`, evaluating greedily every `eval_every`
/// episodes and once at the end.
pub fn run_seed(cfg: &RunConfig, seed: u64) -> Result<RunOutput> {
    run_seed_with(cfg, seed, |_| {})
}

/// As [`run_seed`], also handing every training record to `inspect`.
pub fn run_seed_with(cfg: &RunConfig, seed: u64, mut inspect: impl FnMut(&EpisodeRecord)) -> Result<RunOutput> {
    let start = Instant::now();
    let mut trainer = build_trainer(cfg, seed)?;
    let selector = trainer.selector_name();
    let mut rng = train_rng(seed);
    let mut erng = eval_rng(seed);
    let mut csv_rows = String::new();
    let mut min_welfare = Vec::with_capacity(cfg.episodes as usize);
    let mut evals = Vec::new();
    for e in 0..cfg.episodes {
        let record = trainer.run_episode(e, &mut rng)?;
        csv_row(&mut csv_rows, seed, &selector, &record);
        min_welfare.push(record.min_welfare);
        inspect(&record);
        if cfg.eval_every > 0 && (e + 1) % cfg.eval_every == 0 {
            let records = trainer.evaluate(cfg.eval_episodes, &mut erng)?;
            evals.push(EvalPoint { episode: e + 1, summary: EvalSummary::from_records(&records)? });
        }
    }
    let final_eval = EvalSummary::from_records(&trainer.evaluate(cfg.eval_episodes, &mut erng)?)?;
    let checkpoint = encode_checkpoint(cfg, cfg.episodes, &trainer.snapshot());
    Ok(RunOutput {
        seed,
        selector,
        agents: cfg.env.agents(),
        episodes: cfg.episodes,
        csv_rows,
        min_welfare,
        evals,
        final_eval,
        checkpoint,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunCheckpoint {
    pub env: String,
    pub agents: usize,
    pub selector: String,
    pub learner: String,
    pub agent_view: String,
    pub episodes: u64,
    pub parts: Vec<String>,
}

impl RunCheckpoint {
    fn describe(cfg: &RunConfig) -> [(&'static str, String); 5] {
        [
            ("env", cfg.env.name().to_string()),
            ("agents", cfg.env.agents().to_string()),
            ("selector", cfg.selector.name().to_string()),
            ("learner", cfg.learner.name().to_string()),
            ("agent_view", cfg.agent_view.name().to_string()),
        ]
    }

    /// Error unless the checkpoint was written for a run shaped like `cfg`.
    pub fn check_compatible(&self, cfg: &RunConfig) -> Result<()> {
        let ours = [
            self.env.clone(),
            self.agents.to_string(),
            self.selector.clone(),
            self.learner.clone(),
            self.agent_view.clone(),
        ];
        for ((key, want), have) in Self::describe(cfg).iter().zip(&ours) {
            if want != have {
                return Err(Error::Incompatible(format!("checkpoint {key} is `{have}`, config has `{want}`")));
            }
        }
        Ok(())
    }
}

pub fn encode_checkpoint(cfg: &RunConfig, episodes: u64, parts: &[String]) -> String {
    let mut out = String::new();
    writeln!(out, "{RUN_HEADER}").unwrap();
    for (key, value) in RunCheckpoint::describe(cfg) {
        writeln!(out, "{key} {value}").unwrap();
    }
    writeln!(out, "episodes {episodes}").unwrap();
    for part in parts {
        let lines: Vec<&str> = part.lines().collect();
        writeln!(out, "section {}", lines.len()).unwrap();
        for l in lines {
            writeln!(out, "{l}").unwrap();
        }
    }
    out
}

pub fn decode_checkpoint(text: &str) -> Result<RunCheckpoint> {
    let lines: Vec<&str> = text.lines().collect();
    let header = lines.first().map(|l| l.trim()).unwrap_or("");
    if header != RUN_HEADER {
        return Err(if header.starts_with("# fairlead run checkpoint") {
            Error::Incompatible(format!("unsupported run checkpoint version `{header}`"))
        } else {
            Error::parse(1, format!("expected `{RUN_HEADER}`"))
        });
    }
    let field = |idx: usize, key: &str| -> Result<&str> {
        let line = lines.get(idx).ok_or_else(|| Error::parse(idx + 1, format!("missing `{key}`")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::trim)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| Error::parse_key(idx + 1, key, format!("expected `{key} <value>`")))
    };
    let env = field(1, "env")?.to_string();
    let agents = field(2, "agents")?
        .parse::<usize>()
        .map_err(|_| Error::parse_key(3, "agents", "expected a count"))?;
    let selector = field(3, "selector")?.to_string();
    let learner = field(4, "learner")?.to_string();
    let agent_view = field(5, "agent_view")?.to_string();
    let episodes = field(6, "episodes")?
        .parse::<u64>()
        .map_err(|_| Error::parse_key(7, "episodes", "expected a count"))?;
    let mut parts = Vec::new();
    let mut i = 7;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let count = field(i, "section")?
            .parse::<usize>()
            .ok()
            .filter(|c| *c < lines.len() - i)
            .ok_or_else(|| Error::parse_key(i + 1, "section", "line count exceeds the file"))?;
        let mut part = String::new();
        for l in &lines[i + 1..i + 1 + count] {
            part.push_str(l);
            part.push('\n');
        }
        parts.push(part);
        i += 1 + count;
    }
    Ok(RunCheckpoint { env, agents, selector, learner, agent_view, episodes, parts })
}

/// Greedy evaluation of a saved run under `cfg`.
pub fn evaluate_checkpoint(cfg: &RunConfig, text: &str, episodes: u64, seed: u64) -> Result<EvalSummary> {
    if episodes == 0 {
        return Err(Error::Usage("evaluation needs at least one episode".into()));
    }
    let ckpt = decode_checkpoint(text)?;
    ckpt.check_compatible(cfg)?;
    let mut trainer = build_trainer(cfg, seed)?;
    trainer.restore(&ckpt.parts)?;
    EvalSummary::from_records(&trainer.evaluate(episodes, &mut eval_rng(seed))?)
}
