use evpo::env::{reset, solver, EnvConfig, EnvKind, Layout};

fn golden(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn frozen_lake_seed_zero_is_pinned() {
    let start = reset(&EnvConfig::frozen_lake(0)).unwrap();
    let text = golden("frozenlake_seed0.layout");
    assert_eq!(start.layout.to_text(), text);
    assert_eq!(text.matches('H').count(), 3);
    assert_eq!(text.matches('G').count(), 1);
    assert_eq!(Layout::from_text(EnvKind::FrozenLakeSlippery, &text, 0).unwrap(), *start.layout);
    assert!(solver::optimal_success(&start) > 0.0);
}

#[test]
fn sokoban_seed_zero_is_pinned() {
    let start = reset(&EnvConfig::mini_sokoban(0)).unwrap();
    let text = golden("sokoban_seed0.layout");
    assert_eq!(start.layout.to_text(), text);
    assert_eq!(text.matches('#').count(), 2);
    assert_eq!(Layout::from_text(EnvKind::MiniSokoban, &text, 0).unwrap(), *start.layout);
    assert_eq!(solver::optimal_success(&start), 1.0);
}
