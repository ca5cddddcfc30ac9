use rand::seq::SliceRandom;

use super::{solver, Cell, Direction, EnvConfig, EnvKind, EnvState, Layout, Pos, MAX_LAYOUT_ATTEMPTS};
use crate::error::{EvpoError, Result};
use crate::seed;

/// A box off-target with a blocked side on both axes can never move again.
pub(super) fn dead_corner(layout: &Layout, b: Pos) -> bool {
    if layout.cell(b) == Cell::Target {
        return false;
    }
    let vertical = layout.blocked(layout.offset(b, Direction::Up)) || layout.blocked(layout.offset(b, Direction::Down));
    let horizontal =
        layout.blocked(layout.offset(b, Direction::Left)) || layout.blocked(layout.offset(b, Direction::Right));
    vertical && horizontal
}

pub(super) fn apply(state: &EnvState, d: Direction) -> EnvState {
    let layout = &state.layout;
    let mut next = state.clone();
    let Some(target) = layout.offset(state.agent_pos, d) else {
        return next;
    };
    if layout.cell(target) == Cell::Wall {
        return next;
    }
    let box_pos = state.aux_pos.expect("sokoban state always has a box");
    if target != box_pos {
        next.agent_pos = target;
        return next;
    }
    let Some(pushed) = layout.offset(box_pos, d).filter(|&p| layout.cell(p) != Cell::Wall) else {
        return next;
    };
    next.agent_pos = target;
    next.aux_pos = Some(pushed);
    if layout.cell(pushed) == Cell::Target {
        next.done = true;
        next.terminal_reward = Some(1.0);
    } else if dead_corner(layout, pushed) {
        next.done = true;
        next.terminal_reward = Some(0.0);
    }
    next
}

/// Random walls, target, box and player on an open `n x n` room whose edge
/// acts as the outer wall. Layouts that start solved, start dead, or cannot
/// be solved within the step budget are re-rolled.
pub(super) fn generate(config: &EnvConfig) -> Result<Layout> {
    let n = config.grid_size;
    if config.wall_count + 3 > n * n {
        return Err(EvpoError::Generation(format!(
            "{} walls leave no room for player, box and target in a {n}x{n} room",
            config.wall_count
        )));
    }
    let mut rng = seed::stream(config.seed, &[seed::tag::LAYOUT]);
    let mut order: Vec<usize> = (0..n * n).collect();
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        order.shuffle(&mut rng);
        let mut cells = vec![Cell::Floor; n * n];
        let (walls, rest) = order.split_at(config.wall_count);
        for &w in walls {
            cells[w] = Cell::Wall;
        }
        cells[rest[0]] = Cell::Target;
        let pos = |i: usize| (i / n, i % n);
        let layout = Layout {
            kind: EnvKind::MiniSokoban,
            size: n,
            cells,
            start: pos(rest[2]),
            box_start: Some(pos(rest[1])),
            seed: config.seed,
        };
        if dead_corner(&layout, pos(rest[1])) {
            continue;
        }
        let start = EnvState::initial(layout.clone(), config.max_steps);
        if solver::optimal_success(&start) > 0.0 {
            return Ok(layout);
        }
    }
    Err(EvpoError::Generation(format!(
        "no solvable {n}x{n} room with {} walls after {MAX_LAYOUT_ATTEMPTS} attempts",
        config.wall_count
    )))
}
