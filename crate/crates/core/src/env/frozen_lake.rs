use rand::seq::SliceRandom;
use rand::Rng;

use super::{solver, Cell, Direction, EnvConfig, EnvKind, EnvState, Layout, MAX_LAYOUT_ATTEMPTS};
use crate::error::{EvpoError, Result};
use crate::seed;

/// Executed move for a commanded one: intended, or either perpendicular,
/// each with probability 1/3.
pub(super) fn slip<R: Rng + ?Sized>(intended: Direction, rng: &mut R) -> Direction {
    match rng.random_range(0..3u8) {
        0 => intended.rotate(3),
        1 => intended,
        _ => intended.rotate(1),
    }
}

pub(super) fn apply(state: &EnvState, executed: Direction) -> EnvState {
    let layout = &state.layout;
    let pos = layout.offset(state.agent_pos, executed).unwrap_or(state.agent_pos);
    let mut next = state.clone();
    next.agent_pos = pos;
    match layout.cell(pos) {
        Cell::Hole => {
            next.done = true;
            next.terminal_reward = Some(0.0);
        }
        Cell::Goal => {
            next.done = true;
            next.terminal_reward = Some(1.0);
        }
        _ => {}
    }
    next
}

/// Start top-left, goal bottom-right, `hole_count` holes placed uniformly
/// among the remaining cells. Layouts whose goal cannot be reached within
/// the step budget are re-rolled.
pub(super) fn generate(config: &EnvConfig) -> Result<Layout> {
    let n = config.grid_size;
    let free = n * n - 2;
    if config.hole_count > free {
        return Err(EvpoError::Generation(format!("{} holes do not fit in a {n}x{n} lake", config.hole_count)));
    }
    let mut rng = seed::stream(config.seed, &[seed::tag::LAYOUT]);
    let mut interior: Vec<usize> = (1..n * n - 1).collect();
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        interior.shuffle(&mut rng);
        let mut cells = vec![Cell::Frozen; n * n];
        cells[0] = Cell::Start;
        cells[n * n - 1] = Cell::Goal;
        for &i in &interior[..config.hole_count] {
            cells[i] = Cell::Hole;
        }
        let layout = Layout {
            kind: EnvKind::FrozenLakeSlippery,
            size: n,
            cells,
            start: (0, 0),
            box_start: None,
            seed: config.seed,
        };
        let start = EnvState::initial(layout.clone(), config.max_steps);
        if solver::optimal_success(&start) > 0.0 {
            return Ok(layout);
        }
    }
    Err(EvpoError::Generation(format!(
        "no solvable {n}x{n} lake with {} holes after {MAX_LAYOUT_ATTEMPTS} attempts",
        config.hole_count
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::reset;

    #[test]
    fn slip_frequencies_are_uniform_thirds() {
        let mut rng = seed::stream(17, &[]);
        let n = 200_000;
        let mut counts = [0usize; 3];
        for i in 0..n {
            let d = Direction::ALL[i % 4];
            let e = slip(d, &mut rng);
            let k = if e == d.rotate(3) {
                0
            } else if e == d {
                1
            } else {
                2
            };
            assert!(e == d || e == d.rotate(1) || e == d.rotate(3));
            counts[k] += 1;
        }
        for c in counts {
            let f = c as f64 / n as f64;
            assert!((f - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn impossible_hole_count_fails() {
        let mut cfg = EnvConfig::frozen_lake(0);
        cfg.hole_count = 14;
        assert!(matches!(reset(&cfg), Err(EvpoError::Generation(_))));
        cfg.hole_count = 15;
        assert!(matches!(reset(&cfg), Err(EvpoError::Generation(_))));
    }

    #[test]
    fn walls_are_no_ops() {
        let layout = Layout::from_text(EnvKind::FrozenLakeSlippery, "SFFF\nFFFF\nFFFF\nFFFG\n", 0).unwrap();
        let s = EnvState::initial(layout, 10);
        let next = s.step_exact(0, Direction::Left).unwrap();
        assert_eq!(next.agent_pos, (0, 0));
        assert_eq!(next.step_count, 1);
        assert!(!next.done);
    }

    #[test]
    fn hole_and_goal_terminate() {
        let layout = Layout::from_text(EnvKind::FrozenLakeSlippery, "SH\nFG\n", 0).unwrap();
        let s = EnvState::initial(layout, 10);
        let hole = s.step_exact(2, Direction::Right).unwrap();
        assert!(hole.done && hole.terminal_reward == Some(0.0));
        let mid = s.step_exact(1, Direction::Down).unwrap();
        let goal = mid.step_exact(2, Direction::Right).unwrap();
        assert!(goal.done && goal.terminal_reward == Some(1.0));
    }

    #[test]
    fn budget_exhaustion_ends_with_zero() {
        let layout = Layout::from_text(EnvKind::FrozenLakeSlippery, "SF\nFG\n", 0).unwrap();
        let mut s = EnvState::initial(layout, 3);
        for _ in 0..3 {
            s = s.step_exact(3, Direction::Up).unwrap();
        }
        assert!(s.done);
        assert_eq!(s.terminal_reward, Some(0.0));
    }

    #[test]
    fn one_third_success_next_to_goal() {
        // Agent one step left of the goal, holes above and below it are absent,
        // so only the intended move reaches the goal on this step.
        let layout = Layout::from_text(EnvKind::FrozenLakeSlippery, "FFF\nFSG\nFFF\n", 0).unwrap();
        let s = EnvState::initial(layout, 10);
        let mut rng = seed::stream(23, &[]);
        let n = 60_000;
        let hits =
            (0..n).filter(|_| s.step(Direction::Right.index(), &mut rng).unwrap().terminal_reward == Some(1.0)).count();
        let p = hits as f64 / n as f64;
        let se = (1.0f64 / 3.0 * 2.0 / 3.0 / n as f64).sqrt();
        assert!((p - 1.0 / 3.0).abs() < 4.0 * se, "p = {p}");
    }
}
