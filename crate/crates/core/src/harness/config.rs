//! Run configuration: a flat `key = value` file.
//!
//! Values are integers, reals, booleans, bare or quoted strings, or
//! bracketed lists. `#` starts a comment. Any key can be overridden by an
//! environment variable named `FAIRLEAD_<KEY>` (upper case).
//!
//! ```text
//! env = chicken
//! agents = 2
//! selector = jamql
//! episodes = 200000
//! seeds = 5
//! ```

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fairness::FairnessMeasure;
use crate::env::{MatrixKind, RcVariant};
use crate::harness::runner::Schedule;
use crate::mediator::{AgentView, IdealRule, MediatorVariant};
use crate::game::TieBreak;

/// A parsed right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    List(Vec<Value>),
}

impl Value {
    pub fn parse(text: &str) -> std::result::Result<Value, String> {
        let text = text.trim();
        if text.is_empty() {
            return Err("missing value".into());
        }
        if let Some(inner) = text.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or("unterminated list")?;
            if inner.trim().is_empty() {
                return Ok(Value::List(Vec::new()));
            }
            return inner
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    if item.starts_with('[') {
                        Err("nested lists are not supported".to_string())
                    } else {
                        Value::parse(item)
                    }
                })
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(Value::List);
        }
        if let Some(inner) = text.strip_prefix('"') {
            let inner = inner.strip_suffix('"').ok_or("unterminated string")?;
            if inner.contains('"') {
                return Err("stray quote in string".into());
            }
            return Ok(Value::Str(inner.to_string()));
        }
        match text {
            "true" => return Ok(Value::Bool(true)),
            "false" => return Ok(Value::Bool(false)),
            _ => {}
        }
        if let Ok(i) = text.parse::<i64>() {
            return Ok(Value::Int(i));
        }
        if let Ok(x) = text.parse::<f64>() {
            if x.is_finite() {
                return Ok(Value::Float(x));
            }
            return Err("non-finite number".into());
        }
        if text.chars().all(|c| c.is_ascii_alphanumeric() || "-_.:,/".contains(c)) {
            return Ok(Value::Str(text.to_string()));
        }
        Err(format!("cannot parse value `{text}`"))
    }

    fn as_str(&self) -> Option<String> {
        match self {
            Value::Str(s) => Some(s.clone()),
            Value::Int(i) => Some(i.to_string()),
            _ => None,
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    fn as_u64(&self) -> Option<u64> {
        match self {
            Value::Int(i) if *i >= 0 => Some(*i as u64),
            _ => None,
        }
    }

}

/// One `key = value` entry with its source line.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: Value,
}

/// Splits a config file into entries without interpreting the keys.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw).trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(Error::parse(line, format!("invalid key `{key}`")));
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(Error::parse_key(line, key, "duplicate key"));
        }
        let value = Value::parse(value).map_err(|m| Error::parse_key(line, key, m))?;
        entries.push(Entry { line, key: key.to_string(), value });
    }
    Ok(entries)
}

fn strip_comment(line: &str) -> &str {
    let mut in_string = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_string = !in_string,
            '#' if !in_string => return &line[..i],
            _ => {}
        }
    }
    line
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnvConfig {
    Matrix { kind: MatrixKind, agents: usize, steps: usize },
    Resource {
        variant: RcVariant,
        agents: usize,
        width: i32,
        height: i32,
        step_limit: usize,
        aux_reward: f64,
        aux_radius: i32,
        green_count: usize,
        unfair_count: usize,
        max_collected: usize,
    },
}

impl EnvConfig {
    pub fn agents(&self) -> usize {
        match self {
            EnvConfig::Matrix { agents, .. } | EnvConfig::Resource { agents, .. } => *agents,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Matrix { kind, .. } => kind.name(),
            EnvConfig::Resource { variant: RcVariant::Rc1, .. } => "rc1",
            EnvConfig::Resource { variant: RcVariant::Rc2, .. } => "rc2",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectorConfig {
    Fixed(usize),
    Alternating,
    Vote,
    Mediator(MediatorVariant),
    Threshold,
}

impl SelectorConfig {
    pub fn parse(name: &str, fixed_leader: usize) -> Result<Self> {
        match name.trim() {
            "fixed" => Ok(SelectorConfig::Fixed(fixed_leader)),
            "alternating" => Ok(SelectorConfig::Alternating),
            "vote" => Ok(SelectorConfig::Vote),
            "threshold" => Ok(SelectorConfig::Threshold),
            other => crate::baselines::make_ablation(other)
                .map(SelectorConfig::Mediator)
                .map_err(|_| Error::Config(format!("unknown selector `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectorConfig::Fixed(_) => "fixed",
            SelectorConfig::Alternating => "alternating",
            SelectorConfig::Vote => "vote",
            SelectorConfig::Threshold => "threshold",
            SelectorConfig::Mediator(v) => v.label(),
        }
    }

    pub fn use_endgame(&self) -> bool {
        matches!(self, SelectorConfig::Mediator(v) if v.use_endgame)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LearnerKind {
    Tabular,
    Dqn,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::Tabular => "tabular",
            LearnerKind::Dqn => "dqn",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DqnConfig {
    pub buffer: usize,
    pub batch: usize,
    pub learning_rate: f64,
    /// Hard target sync period in learner steps; 0 disables the target net.
    pub target_sync: u64,
    pub hidden: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self { buffer: 100_000, batch: 128, learning_rate: 1e-4, target_sync: 500, hidden: 128 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub selector: SelectorConfig,
    pub fairness: FairnessMeasure,
    pub episodes: u64,
    pub seed: u64,
    pub seeds: u64,
    pub schedule: Schedule,
    pub alpha: f64,
    pub gamma_agents: f64,
    pub gamma_mediator: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Annealing length; defaults to `episodes`.
    pub epsilon_episodes: Option<u64>,
    pub learner: LearnerKind,
    pub dqn: DqnConfig,
    pub eval_every: u64,
    pub eval_episodes: u64,
    pub endgame_ideal: IdealRule,
    pub agent_view: AgentView,
    pub tie_break: TieBreak,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvConfig::Matrix { kind: MatrixKind::Chicken, agents: 2, steps: 4 },
            selector: SelectorConfig::Mediator(MediatorVariant::FULL),
            fairness: FairnessMeasure::MinWelfare,
            episodes: 200_000,
            seed: 0,
            seeds: 5,
            schedule: Schedule::Sequential { block: 100 },
            alpha: 0.1,
            gamma_agents: 0.9,
            gamma_mediator: 0.99,
            epsilon_start: 0.5,
            epsilon_end: 0.01,
            epsilon_episodes: None,
            learner: LearnerKind::Tabular,
            dqn: DqnConfig::default(),
            eval_every: 1000,
            eval_episodes: 100,
            endgame_ideal: IdealRule::History,
            agent_view: AgentView::Standing,
            tie_break: TieBreak::Lowest,
        }
    }
}

const KEYS: &[&str] = &[
    "env", "agents", "steps", "grid_width", "grid_height", "step_limit", "aux_reward", "aux_radius",
    "green_count", "unfair_count", "max_collected", "selector", "fixed_leader", "fairness", "episodes",
    "seed", "seeds", "schedule", "block", "alpha", "gamma_agents", "gamma_mediator", "epsilon_start",
    "epsilon_end", "epsilon_episodes", "learner", "buffer", "batch", "learning_rate", "target_sync",
    "hidden", "eval_every", "eval_episodes", "endgame_ideal", "agent_view", "tie_break",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(&parse_entries(text)?)
    }

    /// Parses `text`, then applies `FAIRLEAD_*` overrides from `vars`.
    pub fn parse_with_overrides<I>(text: &str, vars: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut entries = parse_entries(text)?;
        for (name, raw) in vars {
            let Some(key) = name.strip_prefix("FAIRLEAD_") else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown override {name}")));
            }
            let value = Value::parse(&raw).map_err(|m| Error::parse_key(0, &key, m))?;
            entries.retain(|e| e.key != key);
            entries.push(Entry { line: 0, key, value });
        }
        Self::from_entries(&entries)
    }

    pub fn from_entries(entries: &[Entry]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for e in entries {
            if !KEYS.contains(&e.key.as_str()) {
                return Err(Error::parse_key(e.line, &e.key, "unknown key"));
            }
        }
        let find = |key: &str| entries.iter().find(|e| e.key == key);
        let bad = |e: &Entry, what: &str| Error::parse_key(e.line, &e.key, format!("expected {what}"));
        let get_str = |key: &str| -> Result<Option<String>> {
            find(key).map(|e| e.value.as_str().ok_or_else(|| bad(e, "a name"))).transpose()
        };
        let get_f64 = |key: &str, lo: f64, hi: f64| -> Result<Option<f64>> {
            find(key)
                .map(|e| {
                    e.value
                        .as_f64()
                        .filter(|x| *x >= lo && *x <= hi)
                        .ok_or_else(|| bad(e, &format!("a number in [{lo}, {hi}]")))
                })
                .transpose()
        };
        let get_u64 = |key: &str, lo: u64, hi: u64| -> Result<Option<u64>> {
            find(key)
                .map(|e| {
                    e.value
                        .as_u64()
                        .filter(|x| *x >= lo && *x <= hi)
                        .ok_or_else(|| bad(e, &format!("an integer in [{lo}, {hi}]")))
                })
                .transpose()
        };
        let key_err = |key: &str, err: Error| match (find(key), err) {
            (Some(e), Error::Config(m)) => Error::parse_key(e.line, &e.key, m),
            (_, other) => other,
        };

        let env_name = get_str("env")?.unwrap_or_else(|| "chicken".into());
        let agents = get_u64("agents", 2, 16)?.unwrap_or(2) as usize;
        cfg.env = match env_name.as_str() {
            "rc1" | "rc2" => {
                let variant = if env_name == "rc1" { RcVariant::Rc1 } else { RcVariant::Rc2 };
                EnvConfig::Resource {
                    variant,
                    agents,
                    width: get_u64("grid_width", 2, 15)?.unwrap_or(5) as i32,
                    height: get_u64("grid_height", 2, 15)?.unwrap_or(5) as i32,
                    step_limit: get_u64("step_limit", 1, 100_000)?.unwrap_or(50) as usize,
                    aux_reward: get_f64("aux_reward", -1e6, 1e6)?.unwrap_or(0.1),
                    aux_radius: get_u64("aux_radius", 0, 15)?.unwrap_or(1) as i32,
                    green_count: get_u64("green_count", 0, 64)?.unwrap_or(2) as usize,
                    unfair_count: get_u64("unfair_count", 0, 64)?
                        .unwrap_or(if variant == RcVariant::Rc1 { 2 } else { 1 }) as usize,
                    max_collected: get_u64("max_collected", 1, 64)?.unwrap_or(2) as usize,
                }
            }
            other => {
                let kind = MatrixKind::parse(other).map_err(|e| key_err("env", e))?;
                EnvConfig::Matrix { kind, agents, steps: get_u64("steps", 1, 10_000)?.unwrap_or(4) as usize }
            }
        };
        let fixed_leader = get_u64("fixed_leader", 1, agents as u64)?.unwrap_or(1) as usize - 1;
        if let Some(name) = get_str("selector")? {
            cfg.selector = SelectorConfig::parse(&name, fixed_leader).map_err(|e| key_err("selector", e))?;
        } else {
            cfg.selector = SelectorConfig::Mediator(MediatorVariant::FULL);
        }
        if let Some(name) = get_str("fairness")? {
            cfg.fairness = FairnessMeasure::parse(&name, agents).map_err(|e| key_err("fairness", e))?;
        }
        if let Some(v) = get_u64("episodes", 1, u64::MAX / 2)? {
            cfg.episodes = v;
        }
        if let Some(v) = get_u64("seed", 0, u64::MAX / 2)? {
            cfg.seed = v;
        }
        if let Some(v) = get_u64("seeds", 1, 10_000)? {
            cfg.seeds = v;
        }
        let block = get_u64("block", 1, u64::MAX / 2)?.unwrap_or(100);
        cfg.schedule = match get_str("schedule")?.as_deref() {
            None | Some("sequential") => Schedule::Sequential { block },
            Some("simultaneous") | Some("sim") => Schedule::Simultaneous,
            Some(other) => {
                return Err(key_err("schedule", Error::Config(format!("unknown schedule `{other}`"))))
            }
        };
        if let Some(v) = get_f64("alpha", 0.0, 1.0)? {
            cfg.alpha = v;
        }
        if let Some(v) = get_f64("gamma_agents", 0.0, 0.999_999_999)? {
            cfg.gamma_agents = v;
        }
        if let Some(v) = get_f64("gamma_mediator", 0.0, 0.999_999_999)? {
            cfg.gamma_mediator = v;
        }
        if let Some(v) = get_f64("epsilon_start", 0.0, 1.0)? {
            cfg.epsilon_start = v;
        }
        if let Some(v) = get_f64("epsilon_end", 0.0, 1.0)? {
            cfg.epsilon_end = v;
        }
        cfg.epsilon_episodes = get_u64("epsilon_episodes", 1, u64::MAX / 2)?;
        cfg.learner = match get_str("learner")?.as_deref() {
            None | Some("tabular") => LearnerKind::Tabular,
            Some("dqn") => LearnerKind::Dqn,
            Some(other) => {
                return Err(key_err("learner", Error::Config(format!("unknown learner `{other}`"))))
            }
        };
        if let Some(v) = get_u64("buffer", 1, 10_000_000)? {
            cfg.dqn.buffer = v as usize;
        }
        if let Some(v) = get_u64("batch", 1, 65_536)? {
            cfg.dqn.batch = v as usize;
        }
        if let Some(v) = get_f64("learning_rate", 0.0, 10.0)? {
            cfg.dqn.learning_rate = v;
        }
        if let Some(v) = get_u64("target_sync", 0, u64::MAX / 2)? {
            cfg.dqn.target_sync = v;
        }
        if let Some(v) = get_u64("hidden", 1, 4096)? {
            cfg.dqn.hidden = v as usize;
        }
        if let Some(v) = get_u64("eval_every", 0, u64::MAX / 2)? {
            cfg.eval_every = v;
        }
        if let Some(v) = get_u64("eval_episodes", 1, 1_000_000)? {
            cfg.eval_episodes = v;
        }
        if let Some(v) = get_str("endgame_ideal")? {
            cfg.endgame_ideal = IdealRule::parse(&v).map_err(|e| key_err("endgame_ideal", e))?;
        }
        if let Some(v) = get_str("agent_view")? {
            cfg.agent_view = AgentView::parse(&v).map_err(|e| key_err("agent_view", e))?;
        }
        cfg.tie_break = match get_str("tie_break")?.as_deref() {
            None | Some("lowest") => TieBreak::Lowest,
            Some("random") => TieBreak::Random,
            Some(other) => {
                return Err(key_err("tie_break", Error::Config(format!("unknown tie break `{other}`"))))
            }
        };
        cfg.validate().map_err(|e| match e {
            Error::Config(m) => Error::parse_key(0, "env", m),
            other => other,
        })?;
        Ok(cfg)
    }

    /// Cross-field checks.
    pub fn validate(&self) -> Result<()> {
        let n = self.env.agents();
        match &self.env {
            EnvConfig::Matrix { kind, agents, steps } => {
                crate::env::MatrixGameEnv::new(*kind, *agents, *steps)?;
            }
            EnvConfig::Resource { .. } => {
                self.resource_env().expect("resource config")?;
            }
        }
        match self.selector {
            SelectorConfig::Fixed(i) if i >= n => {
                return Err(Error::Config("fixed leader out of range".into()))
            }
            SelectorConfig::Threshold if n != 2 => {
                return Err(Error::Config("the threshold selector needs two agents".into()))
            }
            _ => {}
        }
        if let FairnessMeasure::Ggf(w) = &self.fairness {
            if w.len() != n {
                return Err(Error::Config("GGF weight count must match the agent count".into()));
            }
        }
        Ok(())
    }

    pub fn resource_env(&self) -> Option<Result<crate::env::ResourceCollectionEnv>> {
        match &self.env {
            EnvConfig::Resource {
                variant,
                agents,
                width,
                height,
                step_limit,
                aux_reward,
                aux_radius,
                green_count,
                unfair_count,
                max_collected,
            } => {
                let env = crate::env::ResourceCollectionEnv {
                    width: *width,
                    height: *height,
                    agents: *agents,
                    variant: *variant,
                    max_collected: *max_collected,
                    step_limit: *step_limit,
                    aux_reward: *aux_reward,
                    aux_radius: *aux_radius,
                    green_count: *green_count,
                    unfair_count: *unfair_count,
                };
                Some(env.validate().map(|_| env))
            }
            EnvConfig::Matrix { .. } => None,
        }
    }

    pub fn epsilon(&self) -> crate::schedule::EpsilonSchedule {
        crate::schedule::EpsilonSchedule::new(
            self.epsilon_start,
            self.epsilon_end,
            self.epsilon_episodes.unwrap_or(self.episodes),
        )
    }

    /// Seeds of the configured runs.
    pub fn seed_list(&self) -> Vec<u64> {
        (self.seed..self.seed + self.seeds).collect()
    }

    /// Canonical text with every key spelled out; parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        put("env", self.env.name().into());
        put("agents", self.env.agents().to_string());
        match &self.env {
            EnvConfig::Matrix { steps, .. } => put("steps", steps.to_string()),
            EnvConfig::Resource {
                width,
                height,
                step_limit,
                aux_reward,
                aux_radius,
                green_count,
                unfair_count,
                max_collected,
                ..
            } => {
                put("grid_width", width.to_string());
                put("grid_height", height.to_string());
                put("step_limit", step_limit.to_string());
                put("aux_reward", format!("{aux_reward:?}"));
                put("aux_radius", aux_radius.to_string());
                put("green_count", green_count.to_string());
                put("unfair_count", unfair_count.to_string());
                put("max_collected", max_collected.to_string());
            }
        }
        put("selector", self.selector.name().into());
        if let SelectorConfig::Fixed(i) = self.selector {
            put("fixed_leader", (i + 1).to_string());
        }
        put("fairness", self.fairness.name());
        put("episodes", self.episodes.to_string());
        put("seed", self.seed.to_string());
        put("seeds", self.seeds.to_string());
        match self.schedule {
            Schedule::Sequential { block } => {
                put("schedule", "sequential".into());
                put("block", block.to_string());
            }
            Schedule::Simultaneous => put("schedule", "simultaneous".into()),
        }
        put("alpha", format!("{:?}", self.alpha));
        put("gamma_agents", format!("{:?}", self.gamma_agents));
        put("gamma_mediator", format!("{:?}", self.gamma_mediator));
        put("epsilon_start", format!("{:?}", self.epsilon_start));
        put("epsilon_end", format!("{:?}", self.epsilon_end));
        if let Some(e) = self.epsilon_episodes {
            put("epsilon_episodes", e.to_string());
        }
        put("learner", self.learner.name().into());
        put("buffer", self.dqn.buffer.to_string());
        put("batch", self.dqn.batch.to_string());
        put("learning_rate", format!("{:?}", self.dqn.learning_rate));
        put("target_sync", self.dqn.target_sync.to_string());
        put("hidden", self.dqn.hidden.to_string());
        put("eval_every", self.eval_every.to_string());
        put("eval_episodes", self.eval_episodes.to_string());
        put("endgame_ideal", self.endgame_ideal.name().into());
        put("agent_view", self.agent_view.name().into());
        put(
            "tie_break",
            match self.tie_break {
                TieBreak::Lowest => "lowest".into(),
                TieBreak::Random => "random".into(),
            },
        );
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_setup() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.episodes, 200_000);
        assert_eq!(cfg.seeds, 5);
        assert_eq!(cfg.schedule, Schedule::Sequential { block: 100 });
        assert_eq!((cfg.alpha, cfg.gamma_agents, cfg.gamma_mediator), (0.1, 0.9, 0.99));
        assert_eq!(cfg.epsilon().at(0), 0.5);
    }

    #[test]
    fn parses_typed_values() {
        let text = "# a run\nenv = pd\nagents = 4\nselector = \"vote\"  # trailing\nschedule = simultaneous\nalpha = 0.5\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.env, EnvConfig::Matrix { kind: MatrixKind::PrisonersDilemma, agents: 4, steps: 4 });
        assert_eq!(cfg.selector, SelectorConfig::Vote);
        assert_eq!(cfg.schedule, Schedule::Simultaneous);
        assert_eq!(cfg.alpha, 0.5);
    }

    #[test]
    fn lists_parse() {
        assert_eq!(
            Value::parse("[1, 2.5, x]").unwrap(),
            Value::List(vec![Value::Int(1), Value::Float(2.5), Value::Str("x".into())])
        );
        assert!(Value::parse("[1, 2").is_err());
    }

    #[test]
    fn errors_point_at_line_and_key() {
        match RunConfig::parse("env = pd\n\nalpha = 2\n") {
            Err(Error::Parse { line, key, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(key.as_deref(), Some("alpha"));
            }
            other => panic!("unexpected {other:?}"),
        }
        match RunConfig::parse("env = pd\nbogus = 1\n") {
            Err(Error::Parse { line: 2, key: Some(k), .. }) => assert_eq!(k, "bogus"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(RunConfig::parse("env pd\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(RunConfig::parse("env = go\n"), Err(Error::Parse { line: 1, .. })));
        assert!(RunConfig::parse("a = 1\na = 2\n").is_err());
    }

    #[test]
    fn environment_overrides_win() {
        let vars = vec![("FAIRLEAD_EPISODES".to_string(), "10".to_string()), ("HOME".into(), "/".into())];
        let cfg = RunConfig::parse_with_overrides("episodes = 5\n", vars).unwrap();
        assert_eq!(cfg.episodes, 10);
        let bad = vec![("FAIRLEAD_NOPE".to_string(), "1".to_string())];
        assert!(RunConfig::parse_with_overrides("", bad).is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let texts = [
            "env = rc2\nselector = alternating\nlearner = dqn\n",
            "env = pd\nagents = 4\nselector = fixed\nfixed_leader = 3\nfairness = ggf\n",
            "env = bos\nsteps = 2\nschedule = simultaneous\nepsilon_episodes = 77\n",
        ];
        for text in texts {
            let cfg = RunConfig::parse(text).unwrap();
            let again = RunConfig::parse(&cfg.to_text()).unwrap();
            assert_eq!(again, cfg);
            assert_eq!(again.hash(), cfg.hash());
        }
    }

    #[test]
    fn cross_field_validation() {
        assert!(RunConfig::parse("env = bos\nagents = 4\n").is_err());
        assert!(RunConfig::parse("agents = 4\nselector = threshold\n").is_err());
        assert!(RunConfig::parse("agents = 2\nfixed_leader = 3\nselector = fixed\n").is_err());
    }
}
