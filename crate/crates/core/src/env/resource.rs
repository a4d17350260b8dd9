//! Leader-follower resource collection on a small grid.
//!
//! The leader picks which resource to collect next and walks to it; the
//! followers are scripted to close in on the leader. A collection needs the
//! leader's skill for the resource colour and at least one follower within
//! Chebyshev distance 1.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AgentId, Game, Transition};
use crate::SimRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Red,
    Blue,
    Green,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Red, Color::Blue, Color::Green];

    fn index(self) -> usize {
        match self {
            Color::Red => 0,
            Color::Blue => 1,
            Color::Green => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    North,
    East,
    South,
    West,
}

impl Orientation {
    const ALL: [Orientation; 4] = [
        Orientation::North,
        Orientation::East,
        Orientation::South,
        Orientation::West,
    ];

    /// Unit step; `y` grows southwards.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Orientation::North => (0, -1),
            Orientation::East => (1, 0),
            Orientation::South => (0, 1),
            Orientation::West => (-1, 0),
        }
    }

    pub fn left(self) -> Self {
        match self {
            Orientation::North => Orientation::West,
            Orientation::West => Orientation::South,
            Orientation::South => Orientation::East,
            Orientation::East => Orientation::North,
        }
    }

    pub fn right(self) -> Self {
        match self {
            Orientation::North => Orientation::East,
            Orientation::East => Orientation::South,
            Orientation::South => Orientation::West,
            Orientation::West => Orientation::North,
        }
    }

    fn index(self) -> usize {
        match self {
            Orientation::North => 0,
            Orientation::East => 1,
            Orientation::South => 2,
            Orientation::West => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RcAction {
    Forward,
    Backward,
    TurnLeft,
    TurnRight,
    Collect,
}

impl RcAction {
    /// Leader action indices, in order.
    pub const LEADER_ACTIONS: [RcAction; 5] = [
        RcAction::Forward,
        RcAction::Backward,
        RcAction::TurnLeft,
        RcAction::TurnRight,
        RcAction::Collect,
    ];

    /// Follower tie-break order.
    const FOLLOW_ORDER: [RcAction; 4] = [
        RcAction::Forward,
        RcAction::TurnLeft,
        RcAction::TurnRight,
        RcAction::Backward,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::LEADER_ACTIONS.get(i).copied()
    }

    pub fn index(self) -> usize {
        Self::LEADER_ACTIONS.iter().position(|a| *a == self).expect("listed")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RcVariant {
    /// Green plus one randomly chosen unfair colour.
    Rc1,
    /// Green, red and blue.
    Rc2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Pose {
    pub x: i32,
    pub y: i32,
    pub facing: Orientation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Resource {
    pub x: i32,
    pub y: i32,
    pub color: Color,
    pub collected: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RcState {
    pub agents: Vec<Pose>,
    pub resources: Vec<Resource>,
    pub collected: usize,
    pub step: usize,
    pub selection_due: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResourceCollectionEnv {
    pub width: i32,
    pub height: i32,
    pub agents: usize,
    pub variant: RcVariant,
    pub max_collected: usize,
    pub step_limit: usize,
    pub aux_reward: f64,
    pub aux_radius: i32,
    /// Green resources placed per episode.
    pub green_count: usize,
    /// Resources of each unfair colour placed per episode (RC-1 places this
    /// many of the drawn colour; RC-2 places this many red and this many blue).
    pub unfair_count: usize,
}

fn remaining(state: &RcState) -> impl Iterator<Item = &Resource> + '_ {
    state.resources.iter().filter(|r| !r.collected)
}

fn chebyshev(ax: i32, ay: i32, bx: i32, by: i32) -> i32 {
    (ax - bx).abs().max((ay - by).abs())
}

impl ResourceCollectionEnv {
    pub fn new(variant: RcVariant, agents: usize) -> Result<Self> {
        let env = Self {
            width: 5,
            height: 5,
            agents,
            variant,
            max_collected: 2,
            step_limit: 50,
            aux_reward: 0.1,
            aux_radius: 1,
            green_count: 2,
            unfair_count: match variant {
                RcVariant::Rc1 => 2,
                RcVariant::Rc2 => 1,
            },
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents != 2 && self.agents != 4 {
            return Err(Error::Config("resource collection supports 2 or 4 agents".into()));
        }
        if self.width < 2 || self.height < 2 || self.width > 15 || self.height > 15 {
            return Err(Error::Config("grid sides must lie in 2..=15".into()));
        }
        let placed = self.green_count
            + match self.variant {
                RcVariant::Rc1 => self.unfair_count,
                RcVariant::Rc2 => 2 * self.unfair_count,
            };
        if placed > (self.width * self.height) as usize {
            return Err(Error::Config("more resources than grid cells".into()));
        }
        if self.max_collected == 0 || self.step_limit == 0 {
            return Err(Error::Config("max_collected and step_limit must be positive".into()));
        }
        Ok(())
    }

    /// A & C prefer (and may collect) red, B & D blue.
    pub fn preference(&self, agent: AgentId) -> Color {
        if agent.is_multiple_of(2) {
            Color::Red
        } else {
            Color::Blue
        }
    }

    pub fn can_collect(&self, agent: AgentId, color: Color) -> bool {
        color == Color::Green || color == self.preference(agent)
    }

    /// Resource reward vector for collecting a resource of `color`.
    pub fn resource_rewards(&self, color: Color) -> Vec<f64> {
        (0..self.agents)
            .map(|i| match color {
                Color::Green => 4.0,
                c if self.preference(i) == c => 5.0,
                _ => 1.0,
            })
            .collect()
    }

    fn moved(&self, pose: Pose, action: RcAction) -> Pose {
        let clamp = |p: Pose, dx: i32, dy: i32| {
            let nx = p.x + dx;
            let ny = p.y + dy;
            if nx < 0 || ny < 0 || nx >= self.width || ny >= self.height {
                p
            } else {
                Pose { x: nx, y: ny, ..p }
            }
        };
        match action {
            RcAction::Forward => {
                let (dx, dy) = pose.facing.delta();
                clamp(pose, dx, dy)
            }
            RcAction::Backward => {
                let (dx, dy) = pose.facing.delta();
                clamp(pose, -dx, -dy)
            }
            RcAction::TurnLeft => Pose { facing: pose.facing.left(), ..pose },
            RcAction::TurnRight => Pose { facing: pose.facing.right(), ..pose },
            RcAction::Collect => pose,
        }
    }

    /// Scripted follower move: the action minimising post-move Chebyshev
    /// distance to the leader, then Manhattan distance, then preferring a
    /// heading towards the leader; remaining ties in the order forward,
    /// turn-left, turn-right, backward.
    pub fn rc_follower_policy(&self, state: &RcState, follower: AgentId, leader: AgentId) -> Result<RcAction> {
        if follower == leader {
            return Err(Error::Usage("the leader does not follow itself".into()));
        }
        let (Some(me), Some(lead)) = (state.agents.get(follower), state.agents.get(leader)) else {
            return Err(Error::Usage("agent index out of range".into()));
        };
        let score = |p: Pose| {
            let (dx, dy) = (lead.x - p.x, lead.y - p.y);
            let (fx, fy) = p.facing.delta();
            let heading = fx * dx.signum() + fy * dy.signum();
            (chebyshev(p.x, p.y, lead.x, lead.y), dx.abs() + dy.abs(), -heading)
        };
        let mut best = RcAction::Forward;
        let mut best_score = (i32::MAX, i32::MAX, i32::MAX);
        for action in RcAction::FOLLOW_ORDER {
            let sc = score(self.moved(*me, action));
            if sc < best_score {
                best = action;
                best_score = sc;
            }
        }
        Ok(best)
    }

    /// Plays one step with explicit per-agent actions. Returns the learning
    /// rewards (resource plus auxiliary), the resource-only rewards and the
    /// next state; the next state's `selection_due` flag marks a collection.
    pub fn rc_step(&self, state: &RcState, leader: AgentId, actions: &[RcAction]) -> Result<(Vec<f64>, Vec<f64>, RcState)> {
        if actions.len() != self.agents || leader >= self.agents {
            return Err(Error::Usage("one action per agent and a valid leader are required".into()));
        }
        if actions
            .iter()
            .enumerate()
            .any(|(i, a)| i != leader && *a == RcAction::Collect)
        {
            return Err(Error::Usage("only the leader may collect".into()));
        }
        let mut next = state.clone();
        for (i, a) in actions.iter().enumerate() {
            next.agents[i] = self.moved(state.agents[i], *a);
        }
        let lead = next.agents[leader];
        let mut resource = vec![0.0; self.agents];
        next.selection_due = false;
        if actions[leader] == RcAction::Collect {
            let helped = (0..self.agents).any(|i| {
                i != leader && chebyshev(next.agents[i].x, next.agents[i].y, lead.x, lead.y) <= 1
            });
            let target = next
                .resources
                .iter()
                .position(|r| !r.collected && r.x == lead.x && r.y == lead.y);
            if let Some(idx) = target {
                let color = next.resources[idx].color;
                if helped && self.can_collect(leader, color) {
                    next.resources[idx].collected = true;
                    next.collected += 1;
                    next.selection_due = true;
                    resource = self.resource_rewards(color);
                }
            }
        }
        let mut rewards = resource.clone();
        for (i, r) in rewards.iter_mut().enumerate() {
            if i != leader
                && chebyshev(next.agents[i].x, next.agents[i].y, lead.x, lead.y) <= self.aux_radius
            {
                *r += self.aux_reward;
            }
        }
        next.step += 1;
        Ok((rewards, resource, next))
    }


    /// Egocentric `(forward, right)` offset of a cell relative to a pose.
    fn egocentric(pose: Pose, x: i32, y: i32) -> (i32, i32) {
        let (dx, dy) = (x - pose.x, y - pose.y);
        let (fx, fy) = pose.facing.delta();
        let (rx, ry) = pose.facing.right().delta();
        (dx * fx + dy * fy, dx * rx + dy * ry)
    }

    /// Whether a collect attempted by `leader` now would have help after the
    /// followers' scripted moves.
    fn help_ready(&self, state: &RcState, leader: AgentId) -> bool {
        let lead = state.agents[leader];
        (0..self.agents).any(|i| {
            i != leader
                && self
                    .rc_follower_policy(state, i, leader)
                    .map(|a| {
                        let p = self.moved(state.agents[i], a);
                        chebyshev(p.x, p.y, lead.x, lead.y) <= 1
                    })
                    .unwrap_or(false)
        })
    }
}

impl Game for ResourceCollectionEnv {
    type State = RcState;

    fn agent_count(&self) -> usize {
        self.agents
    }

    fn initial_state(&self, rng: &mut SimRng) -> RcState {
        let mut colors = vec![Color::Green; self.green_count];
        match self.variant {
            RcVariant::Rc1 => {
                let c = if rng.gen_bool(0.5) { Color::Red } else { Color::Blue };
                colors.extend(std::iter::repeat_n(c, self.unfair_count));
            }
            RcVariant::Rc2 => {
                colors.extend(std::iter::repeat_n(Color::Red, self.unfair_count));
                colors.extend(std::iter::repeat_n(Color::Blue, self.unfair_count));
            }
        }
        let mut cells: Vec<(i32, i32)> = (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .collect();
        cells.shuffle(rng);
        let resources = colors
            .into_iter()
            .zip(cells)
            .map(|(color, (x, y))| Resource { x, y, color, collected: false })
            .collect();
        let agents = (0..self.agents)
            .map(|_| Pose {
                x: rng.gen_range(0..self.width),
                y: rng.gen_range(0..self.height),
                facing: Orientation::ALL[rng.gen_range(0..4)],
            })
            .collect();
        RcState {
            agents,
            resources,
            collected: 0,
            step: 0,
            selection_due: true,
        }
    }

    fn leader_action_count(&self, _state: &RcState, _leader: AgentId) -> usize {
        RcAction::LEADER_ACTIONS.len()
    }

    fn follower_response(&self, state: &RcState, leader: AgentId, leader_action: usize) -> Result<Vec<usize>> {
        let lead = RcAction::from_index(leader_action)
            .ok_or_else(|| Error::Usage(format!("unknown resource-collection action {leader_action}")))?;
        (0..self.agents)
            .map(|i| {
                if i == leader {
                    Ok(lead.index())
                } else {
                    self.rc_follower_policy(state, i, leader).map(|a| a.index())
                }
            })
            .collect()
    }

    fn step(&self, state: &RcState, leader: AgentId, leader_action: usize, _rng: &mut SimRng) -> Result<Transition<RcState>> {
        let joint_action = self.follower_response(state, leader, leader_action)?;
        let actions: Vec<RcAction> = joint_action
            .iter()
            .map(|a| RcAction::from_index(*a).expect("valid index"))
            .collect();
        let (rewards, metric_rewards, next) = self.rc_step(state, leader, &actions)?;
        Ok(Transition {
            joint_action,
            rewards,
            metric_rewards,
            transfer: None,
            next,
        })
    }

    fn is_terminal(&self, state: &RcState) -> bool {
        state.collected >= self.max_collected || state.step >= self.step_limit
    }

    fn selection_due(&self, state: &RcState) -> bool {
        state.selection_due
    }

    /// Egocentric offset (clamped to ±2) of the nearest remaining resource
    /// of each colour, whether help is in place for a collect, and how many
    /// resources are already gone. Packed without collisions.
    fn agent_key(&self, state: &RcState, agent: AgentId) -> u64 {
        let pose = state.agents[agent];
        let mut key: u64 = 0;
        for color in Color::ALL {
            let nearest = remaining(state)
                .filter(|r| r.color == color)
                .min_by_key(|r| (r.x - pose.x).abs() + (r.y - pose.y).abs());
            let slot = match nearest {
                None => 0,
                Some(r) => {
                    let (f, s) = Self::egocentric(pose, r.x, r.y);
                    1 + (f.clamp(-2, 2) + 2) as u64 * 5 + (s.clamp(-2, 2) + 2) as u64
                }
            };
            key = key * 32 + slot;
        }
        key = key * 2 + self.help_ready(state, agent) as u64;
        key * 8 + state.collected.min(7) as u64
    }

    /// Remaining resource counts per colour and the number collected.
    fn mediator_key(&self, state: &RcState) -> u64 {
        let mut counts = [0u64; 3];
        for r in remaining(state) {
            counts[r.color.index()] += 1;
        }
        counts
            .iter()
            .fold(state.collected as u64, |acc, c| acc * 16 + (*c).min(15))
    }

    fn agent_features(&self, state: &RcState, agent: AgentId) -> Vec<f64> {
        let mut v = self.mediator_features(state);
        v.extend((0..self.agents).map(|i| if i == agent { 1.0 } else { 0.0 }));
        v
    }

    /// Normalised agent positions with orientation one-hots, then one slot
    /// per resource: position, colour one-hot and collected flag.
    fn mediator_features(&self, state: &RcState) -> Vec<f64> {
        let sx = (self.width - 1).max(1) as f64;
        let sy = (self.height - 1).max(1) as f64;
        let mut v = Vec::new();
        for p in &state.agents {
            v.push(p.x as f64 / sx);
            v.push(p.y as f64 / sy);
            let mut one_hot = [0.0; 4];
            one_hot[p.facing.index()] = 1.0;
            v.extend(one_hot);
        }
        for r in &state.resources {
            v.push(r.x as f64 / sx);
            v.push(r.y as f64 / sy);
            let mut one_hot = [0.0; 3];
            one_hot[r.color.index()] = 1.0;
            v.extend(one_hot);
            v.push(if r.collected { 1.0 } else { 0.0 });
        }
        v
    }

    /// The resources the leader could collect instead, as reward vectors.
    fn leader_alternatives(&self, state: &RcState, leader: AgentId) -> Vec<Vec<f64>> {
        let mut seen: Vec<Color> = Vec::new();
        for r in remaining(state) {
            if self.can_collect(leader, r.color) && !seen.contains(&r.color) {
                seen.push(r.color);
            }
        }
        seen.into_iter().map(|c| self.resource_rewards(c)).collect()
    }

    fn max_steps(&self) -> usize {
        self.step_limit
    }
}
