//! Small grid worlds with a single terminal reward: slippery FrozenLake and a
//! one-box Sokoban.
//!
//! States are values. [`EnvState::step`] consumes nothing and returns the
//! successor, so independent rollouts only need independent rng streams.
//! Layouts are generated deterministically from `EnvConfig::seed` and
//! serialize to a one-character-per-cell text grid.

mod frozen_lake;
mod sokoban;
pub mod solver;

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::advantage::{StateKey, Trajectory};
use crate::error::{invalid, EvpoError, Result};

/// Number of actions in both environments.
pub const NUM_ACTIONS: usize = 4;

/// Bounded re-rolls before layout generation gives up.
pub const MAX_LAYOUT_ATTEMPTS: usize = 200;

/// Task seeds must fit below this so state keys stay collision free.
pub const MAX_TASK_SEED: u64 = 1 << 47;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    FrozenLakeSlippery,
    MiniSokoban,
}

impl EnvKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::FrozenLakeSlippery => "frozenlake",
            EnvKind::MiniSokoban => "sokoban",
        }
    }

    pub fn parse(s: &str) -> Option<EnvKind> {
        match s {
            "frozenlake" | "frozen_lake" | "FrozenLakeSlippery" => Some(EnvKind::FrozenLakeSlippery),
            "sokoban" | "mini_sokoban" | "MiniSokoban" => Some(EnvKind::MiniSokoban),
            _ => None,
        }
    }
}

/// Action ids follow the FrozenLake convention: 0 left, 1 down, 2 right, 3 up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Left = 0,
    Down = 1,
    Right = 2,
    Up = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Left, Direction::Down, Direction::Right, Direction::Up];

    pub fn from_index(i: usize) -> Option<Direction> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Neighbours on the ring left, down, right, up are perpendicular.
    pub fn rotate(self, quarter_turns: usize) -> Direction {
        Self::ALL[(self.index() + quarter_turns) % 4]
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Direction::Left => (0, -1),
            Direction::Down => (1, 0),
            Direction::Right => (0, 1),
            Direction::Up => (-1, 0),
        }
    }
}

/// `(row, col)`.
pub type Pos = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Start,
    Frozen,
    Hole,
    Goal,
    Floor,
    Wall,
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    pub grid_size: usize,
    pub max_steps: usize,
    /// FrozenLake only.
    pub hole_count: usize,
    /// Interior walls, Sokoban only.
    pub wall_count: usize,
    pub seed: u64,
}

impl EnvConfig {
    /// 4x4 slippery lake, 3 holes, 10 actions.
    pub fn frozen_lake(seed: u64) -> Self {
        Self { kind: EnvKind::FrozenLakeSlippery, grid_size: 4, max_steps: 10, hole_count: 3, wall_count: 0, seed }
    }

    /// 5x5 room, one box, one target, 2 interior walls, 20 actions.
    pub fn mini_sokoban(seed: u64) -> Self {
        Self { kind: EnvKind::MiniSokoban, grid_size: 5, max_steps: 20, hole_count: 0, wall_count: 2, seed }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=15).contains(&self.grid_size) {
            return Err(invalid(format!("grid_size must be in 2..=15, got {}", self.grid_size)));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps must be positive"));
        }
        if self.seed >= MAX_TASK_SEED {
            return Err(invalid(format!("seed must be below 2^47, got {}", self.seed)));
        }
        Ok(())
    }
}

/// Static part of a task: the grid plus where the agent (and box) start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub kind: EnvKind,
    pub size: usize,
    pub cells: Vec<Cell>,
    pub start: Pos,
    pub box_start: Option<Pos>,
    pub seed: u64,
}

impl Layout {
    pub fn cell(&self, (r, c): Pos) -> Cell {
        self.cells[r * self.size + c]
    }

    fn offset(&self, (r, c): Pos, d: Direction) -> Option<Pos> {
        let (dr, dc) = d.delta();
        let nr = r.checked_add_signed(dr)?;
        let nc = c.checked_add_signed(dc)?;
        (nr < self.size && nc < self.size).then_some((nr, nc))
    }

    fn blocked(&self, p: Option<Pos>) -> bool {
        p.is_none_or(|p| self.cell(p) == Cell::Wall)
    }

    /// One character per cell, rows separated by newlines.
    ///
    /// FrozenLake: `S` start, `F` frozen, `H` hole, `G` goal.
    /// Sokoban: `#` wall, `_` floor, `.` target, `$` box, `@` player,
    /// `*` box on target, `+` player on target.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.size * (self.size + 1));
        for r in 0..self.size {
            for c in 0..self.size {
                out.push(self.glyph((r, c)));
            }
            out.push('\n');
        }
        out
    }

    fn glyph(&self, p: Pos) -> char {
        let cell = self.cell(p);
        match self.kind {
            EnvKind::FrozenLakeSlippery => match cell {
                Cell::Start => 'S',
                Cell::Hole => 'H',
                Cell::Goal => 'G',
                _ => 'F',
            },
            EnvKind::MiniSokoban => {
                let on_target = cell == Cell::Target;
                if Some(p) == self.box_start {
                    if on_target {
                        '*'
                    } else {
                        '$'
                    }
                } else if p == self.start {
                    if on_target {
                        '+'
                    } else {
                        '@'
                    }
                } else {
                    match cell {
                        Cell::Wall => '#',
                        Cell::Target => '.',
                        _ => '_',
                    }
                }
            }
        }
    }

    /// Inverse of [`Layout::to_text`]. `seed` becomes the layout's identity
    /// in state keys.
    pub fn from_text(kind: EnvKind, text: &str, seed: u64) -> Result<Layout> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let size = rows.len();
        if size < 2 || rows.iter().any(|r| r.chars().count() != size) {
            return Err(invalid("layout text must be a square grid of at least 2x2"));
        }
        let mut cells = Vec::with_capacity(size * size);
        let mut start = None;
        let mut box_start = None;
        for (r, row) in rows.iter().enumerate() {
            for (c, ch) in row.chars().enumerate() {
                let cell = match (kind, ch) {
                    (EnvKind::FrozenLakeSlippery, 'S') => {
                        start = Some((r, c));
                        Cell::Start
                    }
                    (EnvKind::FrozenLakeSlippery, 'F') => Cell::Frozen,
                    (EnvKind::FrozenLakeSlippery, 'H') => Cell::Hole,
                    (EnvKind::FrozenLakeSlippery, 'G') => Cell::Goal,
                    (EnvKind::MiniSokoban, '#') => Cell::Wall,
                    (EnvKind::MiniSokoban, '_') => Cell::Floor,
                    (EnvKind::MiniSokoban, '.') => Cell::Target,
                    (EnvKind::MiniSokoban, '$' | '*') => {
                        box_start = Some((r, c));
                        if ch == '*' {
                            Cell::Target
                        } else {
                            Cell::Floor
                        }
                    }
                    (EnvKind::MiniSokoban, '@' | '+') => {
                        start = Some((r, c));
                        if ch == '+' {
                            Cell::Target
                        } else {
                            Cell::Floor
                        }
                    }
                    _ => {
                        return Err(EvpoError::Config {
                            line: r + 1,
                            column: c + 1,
                            message: format!("unexpected cell character {ch:?}"),
                        })
                    }
                };
                cells.push(cell);
            }
        }
        let start = start.ok_or_else(|| invalid("layout has no start position"))?;
        if kind == EnvKind::MiniSokoban && box_start.is_none() {
            return Err(invalid("sokoban layout has no box"));
        }
        Ok(Layout { kind, size, cells, start, box_start, seed })
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A point in an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub layout: Arc<Layout>,
    pub agent_pos: Pos,
    /// Box position (Sokoban).
    pub aux_pos: Option<Pos>,
    pub step_count: usize,
    pub max_steps: usize,
    pub done: bool,
    pub terminal_reward: Option<f64>,
}

impl EnvState {
    fn initial(layout: Layout, max_steps: usize) -> Self {
        let agent_pos = layout.start;
        let aux_pos = layout.box_start;
        Self {
            layout: Arc::new(layout),
            agent_pos,
            aux_pos,
            step_count: 0,
            max_steps,
            done: false,
            terminal_reward: None,
        }
    }

    /// Tabular identity: layout seed, agent cell and box cell.
    pub fn key(&self) -> StateKey {
        let n = self.layout.size;
        let agent = (self.agent_pos.0 * n + self.agent_pos.1) as u64;
        let aux = self.aux_pos.map_or(255, |(r, c)| (r * n + c) as u64);
        (self.layout.seed << 16) | (agent << 8) | aux
    }

    /// Advances one action. FrozenLake draws its slip from `rng`; Sokoban is
    /// deterministic.
    pub fn step<R: Rng + ?Sized>(&self, action: usize, rng: &mut R) -> Result<EnvState> {
        let executed = match self.layout.kind {
            EnvKind::FrozenLakeSlippery => frozen_lake::slip(self.direction(action)?, rng),
            EnvKind::MiniSokoban => self.direction(action)?,
        };
        self.step_exact(action, executed)
    }

    fn direction(&self, action: usize) -> Result<Direction> {
        if self.done {
            return Err(EvpoError::InvalidTransition(format!(
                "episode already finished after {} steps",
                self.step_count
            )));
        }
        Direction::from_index(action).ok_or_else(|| invalid(format!("action {action} out of range 0..{NUM_ACTIONS}")))
    }

    /// Successor when `executed` is the move that actually happens.
    pub(crate) fn step_exact(&self, action: usize, executed: Direction) -> Result<EnvState> {
        self.direction(action)?;
        let mut next = match self.layout.kind {
            EnvKind::FrozenLakeSlippery => frozen_lake::apply(self, executed),
            EnvKind::MiniSokoban => sokoban::apply(self, executed),
        };
        next.step_count = self.step_count + 1;
        if !next.done && next.step_count >= next.max_steps {
            next.done = true;
            next.terminal_reward = Some(0.0);
        }
        Ok(next)
    }

    /// Every successor with its probability.
    pub fn transitions(&self, action: usize) -> Result<Vec<(f64, EnvState)>> {
        let intended = self.direction(action)?;
        match self.layout.kind {
            EnvKind::FrozenLakeSlippery => [3, 0, 1]
                .into_iter()
                .map(|turn| Ok((1.0 / 3.0, self.step_exact(action, intended.rotate(turn))?)))
                .collect(),
            EnvKind::MiniSokoban => Ok(vec![(1.0, self.step_exact(action, intended)?)]),
        }
    }
}

/// Generates the task layout for `config.seed` and places the agent at start.
pub fn reset(config: &EnvConfig) -> Result<EnvState> {
    config.validate()?;
    let layout = match config.kind {
        EnvKind::FrozenLakeSlippery => frozen_lake::generate(config)?,
        EnvKind::MiniSokoban => sokoban::generate(config)?,
    };
    Ok(EnvState::initial(layout, config.max_steps))
}

/// Starts an episode on a fixed layout.
pub fn start_from_layout(layout: Layout, max_steps: usize) -> EnvState {
    EnvState::initial(layout, max_steps)
}

/// Draws an index from a probability vector.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

fn check_distribution(probs: &[f64]) -> Result<()> {
    let total: f64 = probs.iter().sum();
    if probs.len() != NUM_ACTIONS || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("policy returned an invalid distribution {probs:?}")));
    }
    Ok(())
}

/// Plays one episode from `start`. Critic values are left at 0 for the
/// caller to fill in.
pub fn rollout_from<R, P>(start: &EnvState, mut policy: P, rng: &mut R) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    P: FnMut(&EnvState) -> Vec<f64>,
{
    let mut state = start.clone();
    let mut states = Vec::with_capacity(start.max_steps);
    let mut actions = Vec::with_capacity(start.max_steps);
    while !state.done {
        let probs = policy(&state);
        check_distribution(&probs)?;
        let action = sample_action(&probs, rng);
        states.push(state.key());
        actions.push(action);
        state = state.step(action, rng)?;
    }
    let n = states.len();
    let mut rewards = vec![0.0; n];
    rewards[n - 1] = state.terminal_reward.unwrap_or(0.0);
    Trajectory::new(states, actions, rewards, vec![0.0; n])
}

/// [`reset`] followed by [`rollout_from`].
pub fn rollout<R, P>(config: &EnvConfig, policy: P, rng: &mut R) -> Result<Trajectory>
where
    R: Rng + ?Sized,
    P: FnMut(&EnvState) -> Vec<f64>,
{
    rollout_from(&reset(config)?, policy, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn uniform(_: &EnvState) -> Vec<f64> {
        vec![0.25; 4]
    }

    #[test]
    fn reset_is_deterministic() {
        for cfg in [EnvConfig::frozen_lake(0), EnvConfig::mini_sokoban(7)] {
            let a = reset(&cfg).unwrap();
            let b = reset(&cfg).unwrap();
            assert_eq!(a.layout.to_text(), b.layout.to_text());
            assert!(!a.done);
            assert_eq!(a.agent_pos, a.layout.start);
        }
    }

    #[test]
    fn different_seeds_give_different_maps() {
        let maps: std::collections::HashSet<String> =
            (0..20).map(|s| reset(&EnvConfig::frozen_lake(s)).unwrap().layout.to_text()).collect();
        assert!(maps.len() > 5);
    }

    #[test]
    fn text_round_trip() {
        for cfg in [EnvConfig::frozen_lake(3), EnvConfig::mini_sokoban(3)] {
            let layout = reset(&cfg).unwrap().layout;
            let parsed = Layout::from_text(cfg.kind, &layout.to_text(), cfg.seed).unwrap();
            assert_eq!(&parsed, layout.as_ref());
        }
    }

    #[test]
    fn text_parse_errors_carry_position() {
        let err = Layout::from_text(EnvKind::FrozenLakeSlippery, "SF\nFX\n", 0).unwrap_err();
        assert_eq!(err, EvpoError::Config { line: 2, column: 2, message: "unexpected cell character 'X'".into() });
    }

    #[test]
    fn stepping_a_finished_episode_fails() {
        let mut rng = seed::stream(1, &[]);
        let mut s = reset(&EnvConfig::frozen_lake(0)).unwrap();
        while !s.done {
            s = s.step(0, &mut rng).unwrap();
        }
        assert!(matches!(s.step(0, &mut rng), Err(EvpoError::InvalidTransition(_))));
        assert!(s.terminal_reward.is_some());
    }

    #[test]
    fn trajectories_have_terminal_only_reward() {
        let mut rng = seed::stream(2, &[]);
        for s in 0..8 {
            for cfg in [EnvConfig::frozen_lake(s), EnvConfig::mini_sokoban(s)] {
                for _ in 0..50 {
                    let t = rollout(&cfg, uniform, &mut rng).unwrap();
                    assert!(t.len() <= cfg.max_steps);
                    assert!(t.rewards[..t.len() - 1].iter().all(|&r| r == 0.0));
                    assert!(t.terminal_return == 0.0 || t.terminal_return == 1.0);
                }
            }
        }
    }

    #[test]
    fn rollouts_reproduce_bit_for_bit() {
        let cfg = EnvConfig::frozen_lake(5);
        let run = || {
            let mut rng = seed::stream(11, &[3]);
            (0..20).map(|_| rollout(&cfg, uniform, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn invalid_policy_is_rejected() {
        let mut rng = seed::stream(0, &[]);
        let cfg = EnvConfig::frozen_lake(0);
        assert!(rollout(&cfg, |_| vec![0.5, 0.5, 0.5, 0.5], &mut rng).is_err());
        assert!(rollout(&cfg, |_| vec![1.0], &mut rng).is_err());
    }

    #[test]
    fn sample_action_respects_zero_mass() {
        let mut rng = seed::stream(4, &[]);
        for _ in 0..1000 {
            assert_eq!(sample_action(&[0.0, 0.0, 1.0, 0.0], &mut rng), 2);
        }
    }
}
