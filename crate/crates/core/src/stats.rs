//! Variance decomposition, explained variance and the scalar Kalman fusion
//! of a critic estimate with a batch-mean estimate.
//!
//! Everything here is a pure function of its inputs.
//!
//! Variances use the population denominator (divide by `n`). Explained
//! variance is a ratio of two such variances, so the choice only matters for
//! consistency between numerator and denominator.

use crate::error::{invalid, EvpoError, Result};

/// Return variance below this (value-units², rewards in `[-0.1, 1]`) is
/// treated as zero: the group carries no signal and EV is defined as 0.
pub const DEGENERATE_VAR: f64 = 1e-12;

/// `|ev|` at or below this is snapped to exactly 0. A constant critic gives
/// `Var(G - c) == Var(G)` mathematically but not always bit-for-bit, and the
/// gate must not flip on rounding noise.
pub const EV_TIE_TOL: f64 = 1e-12;

/// Which baseline a group's advantages were computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    /// Per-state critic prediction (PPO extreme, gain 0).
    CriticMode,
    /// Group mean return (GRPO extreme, gain 1).
    BatchMeanMode,
}

impl Gate {
    /// Switching rule: trust the critic only when EV is strictly above the threshold.
    pub fn select(ev: f64, threshold: f64) -> Gate {
        if ev > threshold {
            Gate::CriticMode
        } else {
            Gate::BatchMeanMode
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Gate::CriticMode => "critic",
            Gate::BatchMeanMode => "batch_mean",
        }
    }
}

/// Per-group scalar record that drives the gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchDiagnostics {
    /// Explained variance, `(-inf, 1]`.
    pub ev: f64,
    /// Mean return over trajectories.
    pub return_mean: f64,
    /// Population standard deviation of returns over trajectories.
    pub return_std: f64,
    /// Variance of `G - V(s)` pooled over every (trajectory, step) pair.
    pub residual_var: f64,
    /// Variance of `G` pooled over every (trajectory, step) pair.
    pub return_var: f64,
    pub gate: Gate,
}

/// Arithmetic mean. Returns 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Two-pass population variance. Returns 0 for an empty slice.
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// `1 - residual_var / return_var`, with the degenerate-group rule and tie
/// snapping applied.
pub fn ev_from_variances(residual_var: f64, return_var: f64) -> f64 {
    if return_var < DEGENERATE_VAR {
        return 0.0;
    }
    let ev = 1.0 - residual_var / return_var;
    if ev.abs() <= EV_TIE_TOL {
        0.0
    } else {
        ev
    }
}

/// Fraction of return variance accounted for by `values`.
///
/// `returns` and `values` are paired samples (one per state visit). Errors on
/// a length mismatch or fewer than two samples.
pub fn explained_variance(returns: &[f64], values: &[f64]) -> Result<f64> {
    if returns.len() != values.len() {
        return Err(invalid(format!("returns has {} entries but values has {}", returns.len(), values.len())));
    }
    if returns.len() < 2 {
        return Err(invalid("explained variance needs at least two samples"));
    }
    let residuals: Vec<f64> = returns.iter().zip(values).map(|(g, v)| g - v).collect();
    Ok(ev_from_variances(population_variance(&residuals), population_variance(returns)))
}

/// `(P_A, P_B, R)`: critic error variance, cross-state value variance and
/// return sampling noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRegime {
    pub p_a: f64,
    pub p_b: f64,
    pub r: f64,
}

impl GaussianRegime {
    pub fn new(p_a: f64, p_b: f64, r: f64) -> Result<Self> {
        for (name, v) in [("p_a", p_a), ("p_b", p_b), ("r", r)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { p_a, p_b, r })
    }
}

/// MSE-optimal weight on the batch mean, `P_A / (P_A + P_B)`.
pub fn kalman_gain(regime: &GaussianRegime) -> Result<f64> {
    let denom = regime.p_a + regime.p_b;
    if denom <= 0.0 {
        return Err(EvpoError::UndefinedGain);
    }
    Ok(regime.p_a / denom)
}

/// Population explained variance of the regime, `(P_B - P_A) / (P_B + R)`.
pub fn population_ev(regime: &GaussianRegime) -> Result<f64> {
    let denom = regime.p_b + regime.r;
    if denom <= 0.0 {
        return Err(EvpoError::UndefinedEv);
    }
    Ok((regime.p_b - regime.p_a) / denom)
}

/// `(1 - gain) * critic + gain * batch_mean`.
pub fn fused_baseline(critic_value: f64, batch_mean: f64, gain: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gain) {
        return Err(invalid(format!("gain must lie in [0, 1], got {gain}")));
    }
    Ok((1.0 - gain) * critic_value + gain * batch_mean)
}

/// The three statements whose equivalence marks the collapse boundary,
/// each computed by its own route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollapsePredicates {
    /// `population_ev <= 0`
    pub ev_nonpositive: bool,
    /// `P_A >= P_B`
    pub pa_ge_pb: bool,
    /// `kalman_gain >= 1/2`
    pub gain_ge_half: bool,
}

impl CollapsePredicates {
    pub fn consistent(&self) -> bool {
        self.ev_nonpositive == self.pa_ge_pb && self.pa_ge_pb == self.gain_ge_half
    }
}

pub fn theorem1_predicates(regime: &GaussianRegime) -> Result<CollapsePredicates> {
    let ev = population_ev(regime)?;
    let gain = kalman_gain(regime)?;
    Ok(CollapsePredicates { ev_nonpositive: ev <= 0.0, pa_ge_pb: regime.p_a >= regime.p_b, gain_ge_half: gain >= 0.5 })
}
