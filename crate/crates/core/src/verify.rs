//! Monte Carlo certification of the explained-variance identities on the
//! Gaussian model `G = V + eps`, `V_hat = V + delta`, with
//! `V ~ N(0, P_B)`, `delta ~ N(0, P_A)`, `eps ~ N(0, R)` mutually independent.
//!
//! Every suite returns a report that renders to line records of the form
//! `kind<TAB>key=value<TAB>...`; [`parse_records`] reads them back.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::seed::{self, tag};
use crate::stats::{
    explained_variance, fused_baseline, kalman_gain, mean, population_ev, population_variance, theorem1_predicates,
    Gate, GaussianRegime,
};

/// Regimes with `|P_A - P_B|` below this fraction of `P_A + P_B` are too close
/// to the boundary for a finite-sample sign test.
pub const BAND_FRACTION: f64 = 0.05;

/// A sign test needs `|population ev|` at least this many standard errors.
pub const RESOLVE_SIGMAS: f64 = 6.0;

/// Closed-form EV tolerance at `n = 10^6`.
pub const EV_ABS_TOL: f64 = 0.01;

/// Standard errors of slack allowed in the variance dominance check.
pub const VARIANCE_SE_SLACK: f64 = 3.0;

/// Relative tolerance for `Var(EVPO) ~ R + min(P_A, P_B)`.
pub const VARIANCE_REL_TOL: f64 = 0.05;

/// The match check only applies when `|P_A - P_B|` is at least this fraction
/// of `P_A + P_B`.
pub const VARIANCE_MATCH_BAND: f64 = 0.2;

const SUITE_THEOREM1: u64 = 1;
const SUITE_CLOSED_FORM: u64 = 2;
const SUITE_VARIANCE: u64 = 3;
const SUITE_GAIN: u64 = 4;
const SUITE_GRID: u64 = 5;

/// One draw of the generative model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticDraw {
    pub true_value: f64,
    pub critic_value: f64,
    pub observed_return: f64,
}

/// Test-only mutations that a correct verifier must catch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// Negates every explained variance the verifier computes.
    FlipEvSign,
}

impl Fault {
    fn ev(self, ev: f64) -> f64 {
        match self {
            Fault::None => ev,
            Fault::FlipEvSign => -ev,
        }
    }
}

/// `n` independent draws with `mu_V = 0`.
pub fn sample_batch<R: Rng + ?Sized>(regime: &GaussianRegime, n: usize, rng: &mut R) -> Result<Vec<SyntheticDraw>> {
    if n < 2 {
        return Err(invalid(format!("sample_batch needs n >= 2, got {n}")));
    }
    let (sa, sb, sr) = (regime.p_a.sqrt(), regime.p_b.sqrt(), regime.r.sqrt());
    Ok((0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            let d: f64 = StandardNormal.sample(rng);
            let e: f64 = StandardNormal.sample(rng);
            let true_value = sb * v;
            SyntheticDraw { true_value, critic_value: true_value + sa * d, observed_return: true_value + sr * e }
        })
        .collect())
}

/// Explained variance of the critic values against the observed returns.
pub fn sample_ev(draws: &[SyntheticDraw]) -> Result<f64> {
    let (g, v): (Vec<f64>, Vec<f64>) = draws.iter().map(|d| (d.observed_return, d.critic_value)).unzip();
    explained_variance(&g, &v)
}

/// Delta-method standard error of the sample EV at `n` draws.
pub fn sample_ev_se(regime: &GaussianRegime, n: usize) -> f64 {
    let GaussianRegime { p_a, p_b, r } = *regime;
    let q = (r + p_a) / (p_b + r);
    let rho2 = if r == 0.0 { 0.0 } else { r * r / ((r + p_a) * (r + p_b)) };
    q * (4.0 * (1.0 - rho2) / n as f64).sqrt()
}

fn in_band(regime: &GaussianRegime, fraction: f64) -> bool {
    (regime.p_a - regime.p_b).abs() < fraction * (regime.p_a + regime.p_b)
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    10f64.powf(rng.random_range(-3.0..=3.0))
}

/// `count` regimes with each parameter log-uniform in `[1e-3, 1e3]`, drawn by
/// rejection so none falls inside the boundary band.
pub fn theorem1_grid(count: usize, seed: u64) -> Vec<GaussianRegime> {
    let mut rng = seed::stream(seed, &[tag::SYNTHETIC, SUITE_GRID]);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r = GaussianRegime { p_a: log_uniform(&mut rng), p_b: log_uniform(&mut rng), r: log_uniform(&mut rng) };
        if !in_band(&r, BAND_FRACTION) {
            out.push(r);
        }
    }
    out
}

/// `P_A, P_B` in `{0.2, 0.4, ..., 1.0}`, `R` in `{1, 3, 9}`.
pub fn closed_form_grid() -> Vec<GaussianRegime> {
    let ps = [0.2, 0.4, 0.6, 0.8, 1.0];
    let mut out = Vec::new();
    for &p_a in &ps {
        for &p_b in &ps {
            for r in [1.0, 3.0, 9.0] {
                out.push(GaussianRegime { p_a, p_b, r });
            }
        }
    }
    out
}

/// Regimes whose optimal gain sits on the 0.05 grid.
pub fn gain_regimes() -> Vec<GaussianRegime> {
    [(1.0, 3.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0), (3.0, 1.0), (1.0, 4.0), (2.0, 3.0)]
        .into_iter()
        .map(|(p_a, p_b)| GaussianRegime { p_a, p_b, r: 1.0 })
        .collect()
}

pub fn variance_regimes() -> Vec<GaussianRegime> {
    [
        (4.0, 1.0, 1.0),
        (0.0, 1.0, 1.0),
        (1.0, 1.0, 1.0),
        (1.0, 4.0, 1.0),
        (2.0, 0.5, 3.0),
        (0.3, 2.0, 0.5),
        (9.0, 1.0, 0.2),
    ]
    .into_iter()
    .map(|(p_a, p_b, r)| GaussianRegime { p_a, p_b, r })
    .collect()
}

/// `[0, 0.05, ..., 1]`.
pub fn gain_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

fn fields(kind: &str, pairs: &[(&str, String)]) -> String {
    let mut s = kind.to_string();
    for (k, v) in pairs {
        s.push('\t');
        s.push_str(k);
        s.push('=');
        s.push_str(v);
    }
    s
}

fn regime_fields(r: &GaussianRegime) -> Vec<(&'static str, String)> {
    vec![("p_a", r.p_a.to_string()), ("p_b", r.p_b.to_string()), ("r", r.r.to_string())]
}

fn verdict(passed: bool) -> String {
    if passed { "PASS" } else { "FAIL" }.to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Row {
    pub regime: GaussianRegime,
    pub population_ev: f64,
    pub gain: f64,
    /// `None` when the regime is inside the band or too close to it for `n`.
    pub sample_ev: Option<f64>,
    pub se: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Report {
    pub n: usize,
    pub regimes: usize,
    /// Inside the band; checked in closed form only.
    pub band_excluded: usize,
    /// Outside the band but `|ev|` below the resolution limit.
    pub unresolved: usize,
    pub mc_tested: usize,
    pub violations: Vec<Theorem1Row>,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for Theorem1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}",
            fields(
                "suite",
                &[
                    ("name", "theorem1".into()),
                    ("regimes", self.regimes.to_string()),
                    ("n", self.n.to_string()),
                    ("band_fraction", BAND_FRACTION.to_string()),
                    ("band_excluded", self.band_excluded.to_string()),
                    ("unresolved", self.unresolved.to_string()),
                    ("mc_tested", self.mc_tested.to_string()),
                    ("violations", self.violations.len().to_string()),
                    ("assumption", "delta_independent_of_eps".into()),
                    ("result", verdict(self.passed())),
                ]
            )
        )?;
        for v in &self.violations {
            let mut p = regime_fields(&v.regime);
            p.push(("population_ev", v.population_ev.to_string()));
            p.push(("gain", v.gain.to_string()));
            p.push(("sample_ev", v.sample_ev.map(|x| x.to_string()).unwrap_or_else(|| "-".into())));
            p.push(("se", v.se.to_string()));
            writeln!(f, "{}", fields("violation", &p))?;
        }
        Ok(())
    }
}

/// Checks `ev <= 0 <=> P_A >= P_B <=> K >= 1/2` on every regime: in closed
/// form always, and by the sign of a sample EV when `n` draws can resolve it.
pub fn verify_theorem1(regimes: &[GaussianRegime], n: usize, seed: u64, fault: Fault) -> Result<Theorem1Report> {
    let rows: Vec<(Theorem1Row, u8)> = regimes
        .par_iter()
        .enumerate()
        .map(|(i, regime)| -> Result<(Theorem1Row, u8)> {
            let pred = theorem1_predicates(regime)?;
            let population_ev = fault.ev(population_ev(regime)?);
            let gain = kalman_gain(regime)?;
            let se = sample_ev_se(regime, n);
            let closed = (population_ev <= 0.0) == pred.pa_ge_pb && pred.pa_ge_pb == pred.gain_ge_half;
            let (sample, status) = if in_band(regime, BAND_FRACTION) {
                (None, 0)
            } else if population_ev.abs() < RESOLVE_SIGMAS * se {
                (None, 1)
            } else {
                let mut rng = seed::stream(seed, &[tag::SYNTHETIC, SUITE_THEOREM1, i as u64]);
                let ev = fault.ev(sample_ev(&sample_batch(regime, n, &mut rng)?)?);
                (Some(ev), 2)
            };
            let mc = sample.is_none_or(|ev| (ev <= 0.0) == pred.pa_ge_pb && pred.pa_ge_pb == pred.gain_ge_half);
            let row =
                Theorem1Row { regime: *regime, population_ev, gain, sample_ev: sample, se, consistent: closed && mc };
            Ok((row, status))
        })
        .collect::<Result<_>>()?;
    let count = |s| rows.iter().filter(|(_, st)| *st == s).count();
    Ok(Theorem1Report {
        n,
        regimes: regimes.len(),
        band_excluded: count(0),
        unresolved: count(1),
        mc_tested: count(2),
        violations: rows.iter().filter(|(r, _)| !r.consistent).map(|(r, _)| r.clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormRow {
    pub regime: GaussianRegime,
    pub closed_form: f64,
    pub sample_ev: f64,
}

impl ClosedFormRow {
    pub fn error(&self) -> f64 {
        (self.sample_ev - self.closed_form).abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormReport {
    pub n: usize,
    pub rows: Vec<ClosedFormRow>,
}

impl ClosedFormReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.error() < EV_ABS_TOL)
    }

    pub fn max_error(&self) -> f64 {
        self.rows.iter().map(ClosedFormRow::error).fold(0.0, f64::max)
    }
}

impl fmt::Display for ClosedFormReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}",
            fields(
                "suite",
                &[
                    ("name", "ev_closed_form".into()),
                    ("regimes", self.rows.len().to_string()),
                    ("n", self.n.to_string()),
                    ("tolerance", EV_ABS_TOL.to_string()),
                    ("max_error", self.max_error().to_string()),
                    ("result", verdict(self.passed())),
                ]
            )
        )?;
        for r in &self.rows {
            let mut p = regime_fields(&r.regime);
            p.push(("closed_form", r.closed_form.to_string()));
            p.push(("sample_ev", r.sample_ev.to_string()));
            p.push(("ok", (r.error() < EV_ABS_TOL).to_string()));
            writeln!(f, "{}", fields("regime", &p))?;
        }
        Ok(())
    }
}

/// Sample EV against `(P_B - P_A) / (P_B + R)` on each regime.
pub fn verify_ev_closed_form(
    regimes: &[GaussianRegime],
    n: usize,
    seed: u64,
    fault: Fault,
) -> Result<ClosedFormReport> {
    let rows = regimes
        .par_iter()
        .enumerate()
        .map(|(i, regime)| {
            let mut rng = seed::stream(seed, &[tag::SYNTHETIC, SUITE_CLOSED_FORM, i as u64]);
            Ok(ClosedFormRow {
                regime: *regime,
                closed_form: population_ev(regime)?,
                sample_ev: fault.ev(sample_ev(&sample_batch(regime, n, &mut rng)?)?),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ClosedFormReport { n, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    pub regime: GaussianRegime,
    pub group_size: usize,
    pub n_groups: usize,
    pub var_ppo: f64,
    pub var_batch_mean: f64,
    /// Batch-mean variance scaled by `M / (M - 1)`.
    pub var_batch_mean_corrected: f64,
    pub var_evpo: f64,
    /// EVPO variance with batch-mean groups scaled by `M / (M - 1)`.
    pub var_evpo_corrected: f64,
    /// Standard error of the larger of the EVPO and best-fixed estimates.
    pub se: f64,
    pub predicted: f64,
    pub critic_fraction: f64,
}

impl VarianceReport {
    pub fn dominance_ok(&self) -> bool {
        self.var_evpo <= self.var_ppo.min(self.var_batch_mean) + VARIANCE_SE_SLACK * self.se
    }

    /// `None` when the regime is too close to the boundary for the check.
    pub fn match_ok(&self) -> Option<bool> {
        if in_band(&self.regime, VARIANCE_MATCH_BAND) {
            return None;
        }
        Some((self.var_evpo_corrected - self.predicted).abs() <= VARIANCE_REL_TOL * self.predicted)
    }

    pub fn passed(&self) -> bool {
        self.dominance_ok() && self.match_ok().unwrap_or(true)
    }

    fn record(&self) -> String {
        let mut p = regime_fields(&self.regime);
        p.extend([
            ("group_size", self.group_size.to_string()),
            ("n_groups", self.n_groups.to_string()),
            ("var_ppo", self.var_ppo.to_string()),
            ("var_batch_mean", self.var_batch_mean.to_string()),
            ("var_batch_mean_corrected", self.var_batch_mean_corrected.to_string()),
            ("var_evpo", self.var_evpo.to_string()),
            ("var_evpo_corrected", self.var_evpo_corrected.to_string()),
            ("correction", format!("{}/{}", self.group_size, self.group_size - 1)),
            ("predicted", self.predicted.to_string()),
            ("se", self.se.to_string()),
            ("critic_fraction", self.critic_fraction.to_string()),
            ("dominance", self.dominance_ok().to_string()),
            ("match", self.match_ok().map(|b| b.to_string()).unwrap_or_else(|| "skipped".into())),
        ]);
        fields("regime", &p)
    }
}

/// Simulates `n_groups` groups of `group_size` single-state rollouts and
/// compares the pooled advantage variance of the three baselines.
pub fn verify_variance_guarantee(
    regime: &GaussianRegime,
    group_size: usize,
    n_groups: usize,
    seed: u64,
    fault: Fault,
) -> Result<VarianceReport> {
    if group_size < 2 || n_groups == 0 {
        return Err(invalid("variance guarantee needs group_size >= 2 and n_groups >= 1"));
    }
    let regime_seed = seed::derive(seed, &[regime.p_a.to_bits(), regime.p_b.to_bits(), regime.r.to_bits()]);
    // Per group: (ppo, batch mean, evpo, evpo corrected) sums of squares and
    // sums, plus whether the critic was chosen.
    let per_group: Vec<([f64; 4], [f64; 3], bool)> = (0..n_groups)
        .into_par_iter()
        .map(|g| {
            let mut rng = seed::stream(regime_seed, &[tag::SYNTHETIC, SUITE_VARIANCE, g as u64]);
            let draws = sample_batch(regime, group_size, &mut rng)?;
            let returns: Vec<f64> = draws.iter().map(|d| d.observed_return).collect();
            let values: Vec<f64> = draws.iter().map(|d| d.critic_value).collect();
            let g_mean = mean(&returns);
            let ppo: Vec<f64> = draws.iter().map(|d| d.observed_return - d.critic_value).collect();
            let bm: Vec<f64> = returns.iter().map(|x| x - g_mean).collect();
            let gate = Gate::select(fault.ev(explained_variance(&returns, &values)?), 0.0);
            let scale = group_size as f64 / (group_size - 1) as f64;
            let (evpo, corr) = match gate {
                Gate::CriticMode => (&ppo, 1.0),
                Gate::BatchMeanMode => (&bm, scale),
            };
            let sq = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>();
            let sm = |xs: &[f64]| xs.iter().sum::<f64>();
            Ok((
                [sq(&ppo), sq(&bm), sq(evpo), corr * sq(evpo)],
                [sm(&ppo), sm(&bm), sm(evpo)],
                gate == Gate::CriticMode,
            ))
        })
        .collect::<Result<_>>()?;
    let total = (group_size * n_groups) as f64;
    let pooled = |k: usize, s: Option<usize>| {
        let ss: f64 = per_group.iter().map(|p| p.0[k]).sum::<f64>() / total;
        let m = s.map(|s| per_group.iter().map(|p| p.1[s]).sum::<f64>() / total).unwrap_or(0.0);
        ss - m * m
    };
    // Group-level mean squares are i.i.d. across groups, so their spread
    // gives the Monte Carlo error of each pooled variance.
    let se_of = |k: usize| {
        let ms: Vec<f64> = per_group.iter().map(|p| p.0[k] / group_size as f64).collect();
        (population_variance(&ms) / n_groups as f64).sqrt()
    };
    let var_ppo = pooled(0, Some(0));
    let var_batch_mean = pooled(1, Some(1));
    let var_evpo = pooled(2, Some(2));
    let evpo_mean = per_group.iter().map(|p| p.1[2]).sum::<f64>() / total;
    let var_evpo_corrected = pooled(3, None) - evpo_mean * evpo_mean;
    let best = if var_ppo <= var_batch_mean { 0 } else { 1 };
    let scale = group_size as f64 / (group_size - 1) as f64;
    Ok(VarianceReport {
        regime: *regime,
        group_size,
        n_groups,
        var_ppo,
        var_batch_mean,
        var_batch_mean_corrected: var_batch_mean * scale,
        var_evpo,
        var_evpo_corrected,
        se: se_of(2).max(se_of(best)),
        predicted: regime.r + regime.p_a.min(regime.p_b),
        critic_fraction: per_group.iter().filter(|p| p.2).count() as f64 / n_groups as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainRow {
    pub regime: GaussianRegime,
    pub optimal_gain: f64,
    /// Grid point closest to the optimal gain.
    pub nearest: f64,
    /// Grid point with the smallest empirical MSE.
    pub argmin: f64,
    pub mse: Vec<f64>,
}

impl GainRow {
    pub fn passed(&self) -> bool {
        self.nearest == self.argmin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub n: usize,
    pub grid: Vec<f64>,
    pub rows: Vec<GainRow>,
}

impl GainReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(GainRow::passed)
    }
}

impl fmt::Display for GainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}",
            fields(
                "suite",
                &[
                    ("name", "gain".into()),
                    ("regimes", self.rows.len().to_string()),
                    ("n", self.n.to_string()),
                    ("grid_points", self.grid.len().to_string()),
                    ("result", verdict(self.passed())),
                ]
            )
        )?;
        for r in &self.rows {
            let mut p = regime_fields(&r.regime);
            p.push(("optimal_gain", r.optimal_gain.to_string()));
            p.push(("nearest", r.nearest.to_string()));
            p.push(("argmin", r.argmin.to_string()));
            let curve: Vec<String> = r.mse.iter().map(|m| format!("{m:.6}")).collect();
            p.push(("mse", curve.join(";")));
            p.push(("ok", r.passed().to_string()));
            writeln!(f, "{}", fields("regime", &p))?;
        }
        Ok(())
    }
}

fn nearest(grid: &[f64], x: f64) -> f64 {
    grid.iter().copied().min_by(|a, b| (a - x).abs().total_cmp(&(b - x).abs())).unwrap_or(x)
}

/// Empirical MSE of the fused baseline against the true value at each grid
/// gain. The batch-mean estimate is the mean observed return over all draws.
pub fn verify_gain_optimality(regimes: &[GaussianRegime], grid: &[f64], n: usize, seed: u64) -> Result<GainReport> {
    if grid.is_empty() || grid.iter().any(|k| !(0.0..=1.0).contains(k)) {
        return Err(invalid("gain grid must be non-empty and inside [0, 1]"));
    }
    let rows = regimes
        .par_iter()
        .enumerate()
        .map(|(i, regime)| {
            let mut rng = seed::stream(seed, &[tag::SYNTHETIC, SUITE_GAIN, i as u64]);
            let draws = sample_batch(regime, n, &mut rng)?;
            let batch_mean = mean(&draws.iter().map(|d| d.observed_return).collect::<Vec<_>>());
            let mse = grid
                .iter()
                .map(|&k| {
                    let mut acc = 0.0;
                    for d in &draws {
                        let e = fused_baseline(d.critic_value, batch_mean, k)? - d.true_value;
                        acc += e * e;
                    }
                    Ok(acc / n as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            let best = mse.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(j, _)| j).unwrap_or(0);
            let optimal_gain = kalman_gain(regime)?;
            Ok(GainRow { regime: *regime, optimal_gain, nearest: nearest(grid, optimal_gain), argmin: grid[best], mse })
        })
        .collect::<Result<_>>()?;
    Ok(GainReport { n, grid: grid.to_vec(), rows })
}

/// Which checks a run covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Theorem1,
    Variance,
    Gain,
    All,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theorem1" => Ok(Suite::Theorem1),
            "variance" => Ok(Suite::Variance),
            "gain" => Ok(Suite::Gain),
            "all" => Ok(Suite::All),
            other => Err(invalid(format!("unknown suite {other:?}, expected theorem1, variance, gain or all"))),
        }
    }
}

/// Sizes for the default suites.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub fault: Fault,
    pub theorem1_regimes: usize,
    pub theorem1_n: usize,
    pub closed_form_n: usize,
    pub gain_n: usize,
    pub group_size: usize,
    pub n_groups: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            fault: Fault::None,
            theorem1_regimes: 10_000,
            theorem1_n: 20_000,
            closed_form_n: 1_000_000,
            gain_n: 1_000_000,
            group_size: 64,
            n_groups: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub passed: bool,
    pub text: String,
}

/// Runs the requested suite on the default grids. `theorem1` also covers the
/// closed-form EV grid.
pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<SuiteOutcome> {
    let mut text = String::new();
    let mut passed = true;
    if matches!(suite, Suite::Theorem1 | Suite::All) {
        let grid = theorem1_grid(opts.theorem1_regimes, opts.seed);
        let t1 = verify_theorem1(&grid, opts.theorem1_n, opts.seed, opts.fault)?;
        let cf = verify_ev_closed_form(&closed_form_grid(), opts.closed_form_n, opts.seed, opts.fault)?;
        passed &= t1.passed() && cf.passed();
        text.push_str(&t1.to_string());
        text.push_str(&cf.to_string());
    }
    if matches!(suite, Suite::Variance | Suite::All) {
        let reports = variance_regimes()
            .iter()
            .map(|r| verify_variance_guarantee(r, opts.group_size, opts.n_groups, opts.seed, opts.fault))
            .collect::<Result<Vec<_>>>()?;
        let ok = reports.iter().all(VarianceReport::passed);
        passed &= ok;
        text.push_str(&fields(
            "suite",
            &[
                ("name", "variance".into()),
                ("regimes", reports.len().to_string()),
                ("slack_se", VARIANCE_SE_SLACK.to_string()),
                ("rel_tol", VARIANCE_REL_TOL.to_string()),
                ("result", verdict(ok)),
            ],
        ));
        text.push('\n');
        for r in &reports {
            text.push_str(&r.record());
            text.push('\n');
        }
    }
    if matches!(suite, Suite::Gain | Suite::All) {
        let g = verify_gain_optimality(&gain_regimes(), &gain_grid(), opts.gain_n, opts.seed)?;
        passed &= g.passed();
        text.push_str(&g.to_string());
    }
    Ok(SuiteOutcome { passed, text })
}

/// One parsed report line.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub kind: String,
    pub fields: Vec<(String, String)>,
}

impl Record {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Reads report text back into records. Blank lines are skipped.
pub fn parse_records(text: &str) -> Result<Vec<Record>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let mut parts = line.split('\t');
            let kind = parts.next().unwrap_or_default().to_string();
            let fields = parts
                .map(|p| {
                    p.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .ok_or_else(|| invalid(format!("line {}: field {p:?} has no '='", i + 1)))
                })
                .collect::<Result<_>>()?;
            Ok(Record { kind, fields })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regime(p_a: f64, p_b: f64, r: f64) -> GaussianRegime {
        GaussianRegime::new(p_a, p_b, r).unwrap()
    }

    #[test]
    fn perfect_critic_and_constant_values() {
        let mut rng = seed::stream(1, &[]);
        let draws = sample_batch(&regime(0.0, 1.0, 0.0), 100_000, &mut rng).unwrap();
        assert!(draws.iter().all(|d| d.critic_value == d.true_value));
        let draws = sample_batch(&regime(1.0, 0.0, 0.0), 1000, &mut rng).unwrap();
        assert!(draws.iter().all(|d| d.true_value == 0.0));
        assert!(sample_batch(&regime(1.0, 1.0, 1.0), 1, &mut rng).is_err());
    }

    #[test]
    fn sample_ev_matches_half() {
        let mut rng = seed::stream(2, &[]);
        let draws = sample_batch(&regime(1.0, 3.0, 1.0), 1_000_000, &mut rng).unwrap();
        assert!((sample_ev(&draws).unwrap() - 0.5).abs() < 0.01);
    }

    #[test]
    fn standard_error_matches_replicates() {
        let r = regime(0.5, 2.0, 1.0);
        let n = 2000;
        let evs: Vec<f64> = (0..400)
            .map(|i| {
                let mut rng = seed::stream(3, &[i]);
                sample_ev(&sample_batch(&r, n, &mut rng).unwrap()).unwrap()
            })
            .collect();
        let empirical = population_variance(&evs).sqrt();
        let predicted = sample_ev_se(&r, n);
        assert!((empirical / predicted - 1.0).abs() < 0.15, "{empirical} vs {predicted}");
    }

    #[test]
    fn theorem1_examples() {
        let regs = [regime(2.0, 1.0, 1.0), regime(1.0, 2.0, 1.0), regime(1.0, 1.0, 1.0)];
        let rep = verify_theorem1(&regs, 1_000_000, 4, Fault::None).unwrap();
        assert!(rep.passed());
        assert_eq!((rep.mc_tested, rep.band_excluded), (2, 1));
        assert!(verify_theorem1(&regs, 1_000_000, 4, Fault::FlipEvSign).unwrap().violations.len() >= 2);
    }

    #[test]
    fn grid_avoids_band_and_is_reproducible() {
        let g = theorem1_grid(500, 9);
        assert_eq!(g, theorem1_grid(500, 9));
        assert!(g.iter().all(|r| !in_band(r, BAND_FRACTION)));
        assert!(g.iter().all(|r| [r.p_a, r.p_b, r.r].iter().all(|x| (1e-3..=1e3).contains(x))));
    }

    #[test]
    fn variance_examples() {
        let rep = verify_variance_guarantee(&regime(4.0, 1.0, 1.0), 64, 4000, 5, Fault::None).unwrap();
        assert!((rep.var_ppo - 5.0).abs() < 0.15, "{rep:?}");
        assert!((rep.var_batch_mean_corrected - 2.0).abs() < 0.06, "{rep:?}");
        assert!(rep.critic_fraction < 0.01);
        assert!(rep.passed());
        let rep = verify_variance_guarantee(&regime(0.0, 1.0, 1.0), 64, 4000, 5, Fault::None).unwrap();
        assert!((rep.var_evpo - 1.0).abs() < 0.03 && rep.critic_fraction > 0.99, "{rep:?}");
        let rep = verify_variance_guarantee(&regime(1.0, 1.0, 1.0), 64, 4000, 5, Fault::None).unwrap();
        assert!(rep.dominance_ok() && rep.match_ok().is_none(), "{rep:?}");
    }

    #[test]
    fn flipped_gate_breaks_dominance() {
        let rep = verify_variance_guarantee(&regime(4.0, 1.0, 1.0), 64, 2000, 5, Fault::FlipEvSign).unwrap();
        assert!(!rep.passed());
    }

    #[test]
    fn gain_minimum_lands_on_optimum() {
        let regs = [regime(1.0, 3.0, 1.0), regime(0.0, 1.0, 1.0), regime(1.0, 0.0, 1.0)];
        let rep = verify_gain_optimality(&regs, &gain_grid(), 200_000, 6).unwrap();
        let argmins: Vec<f64> = rep.rows.iter().map(|r| r.argmin).collect();
        assert_eq!(argmins, vec![0.25, 0.0, 1.0]);
        assert!(verify_gain_optimality(&regs, &[1.5], 10, 6).is_err());
    }

    #[test]
    fn records_round_trip() {
        let rep = verify_gain_optimality(&[regime(1.0, 3.0, 1.0)], &gain_grid(), 1000, 7).unwrap();
        let recs = parse_records(&rep.to_string()).unwrap();
        assert_eq!(recs[0].kind, "suite");
        assert_eq!(recs[0].get("name"), Some("gain"));
        assert_eq!(recs[1].get("optimal_gain"), Some("0.25"));
        assert!(parse_records("suite\tbroken").is_err());
        assert!(Suite::parse("everything").is_err());
    }
}
