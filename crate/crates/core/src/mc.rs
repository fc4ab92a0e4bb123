//! Feynman–Kac Monte Carlo for travel costs.
//!
//! The travel cost to `u·y` is
//!
//! ```text
//! a(u, V, ω) = −ln E₀[exp(−∫₀^{H₁(u y)} V_ω(Z_s) ds)]
//! ```
//!
//! and `a(u)/u` tends to the Lyapunov exponent. Paths are Euler–Maruyama
//! Brownian paths carrying the Feynman–Kac weight (soft killing); hitting is
//! checked at grid times only.
//!
//! Weights that fall below `roulette_weight` play Russian roulette: the path
//! survives with probability `w / roulette_weight` and continues with weight
//! `roulette_weight`. This is unbiased and bounds the work spent on paths
//! that can no longer contribute. The roulette uniforms are indexed by
//! `(path, step)` so that paths driven by the same increments stay coupled
//! across potentials.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{mix64, stream_key, uniform_at, CounterRng};
use crate::stats::{fit_line, mean_and_stderr, pairwise_sum};

/// A potential evaluated along paths in `R^D`.
pub trait PotentialField<const D: usize>: Sync {
    fn value(&self, x: &[f64; D]) -> f64;
}

/// `V ≡ c` in any dimension.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub f64);

impl<const D: usize> PotentialField<D> for ConstantField {
    fn value(&self, _: &[f64; D]) -> f64 {
        self.0
    }
}

/// Wraps a closure as a field.
pub struct FnField<F>(pub F);

impl<const D: usize, F: Fn(&[f64; D]) -> f64 + Sync> PotentialField<D> for FnField<F> {
    fn value(&self, x: &[f64; D]) -> f64 {
        (self.0)(x)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),
    #[error("target at distance {u} must lie outside the radius-{radius} ball around the start")]
    TargetTooClose { u: f64, radius: f64 },
    #[error("direction has dimension {got}, simulation runs in dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("only {usable} usable travel-cost estimates, need at least 3")]
    TooFewPoints { usable: usize },
}

fn default_radius() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub t_max: f64,
    #[serde(default)]
    pub seed: u64,
    /// Unit direction of travel; its length fixes the dimension.
    pub y: Vec<f64>,
    pub u_grid: Vec<f64>,
    /// Radius of the target ball.
    #[serde(default = "default_radius")]
    pub target_radius: f64,
    /// Russian-roulette threshold; `0` disables roulette.
    #[serde(default)]
    pub roulette_weight: f64,
    /// Paths farther than this from the origin are truncated.
    #[serde(default)]
    pub escape_radius: Option<f64>,
    /// Truncated paths keep their accumulated weight (otherwise they count 0).
    #[serde(default = "default_true")]
    pub keep_truncated: bool,
    /// Each step sums `2^k` unit normals, so a run at `dt` shares its
    /// Brownian paths with a run at `dt / 2^k` and the same seed.
    #[serde(default)]
    pub coarse_levels: u32,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            n_paths: 10_000,
            t_max: 50.0,
            seed: 1,
            y: vec![1.0],
            u_grid: vec![3.0, 4.0, 5.0, 6.0],
            target_radius: 1.0,
            roulette_weight: 0.0,
            escape_radius: None,
            keep_truncated: true,
            coarse_levels: 0,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<(), McError> {
        let bad = |m: &str| Err(McError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1");
        }
        if !(self.t_max > 0.0) {
            return bad("t_max must be positive");
        }
        if self.u_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("u_grid must be strictly increasing");
        }
        if self.u_grid.iter().any(|u| !(*u > 0.0)) {
            return bad("u_grid entries must be positive");
        }
        let norm = self.y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if self.y.is_empty() || (norm - 1.0).abs() > 1e-9 {
            return bad("y must be a unit vector");
        }
        if !(self.target_radius > 0.0) {
            return bad("target_radius must be positive");
        }
        if !(0.0..1.0).contains(&self.roulette_weight) {
            return bad("roulette_weight must lie in [0, 1)");
        }
        if self.coarse_levels > 16 {
            return bad("coarse_levels must be at most 16");
        }
        Ok(())
    }

    fn direction<const D: usize>(&self) -> Result<[f64; D], McError> {
        if self.y.len() != D {
            return Err(McError::DimensionMismatch {
                got: self.y.len(),
                want: D,
            });
        }
        let mut y = [0.0; D];
        y.copy_from_slice(&self.y);
        Ok(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateIssue {
    /// Every path was truncated before reaching the target.
    AllTruncated,
    /// The mean weight is zero; use more paths or a smaller `u`.
    Underflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelCostEstimate {
    pub u: f64,
    pub a_hat: f64,
    /// Delta method: standard error of the weights over their mean.
    pub stderr_a: f64,
    /// Kish effective sample size of the weights.
    pub n_effective: usize,
    pub truncated_fraction: f64,
    pub hit_fraction: f64,
    pub mean_weight: f64,
    pub n_paths: usize,
    pub issue: Option<EstimateIssue>,
}

impl TravelCostEstimate {
    pub fn usable(&self) -> bool {
        self.issue.is_none() && self.a_hat.is_finite() && self.stderr_a.is_finite()
    }

    pub fn csv_header() -> &'static str {
        "u,a_hat,stderr_a,n_effective,truncated_fraction"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.u, self.a_hat, self.stderr_a, self.n_effective, self.truncated_fraction
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PathEnd {
    Hit,
    Truncated,
    Exited,
    Killed,
}

/// Geometry of one travel-cost problem.
struct Problem<const D: usize> {
    center: [f64; D],
    target_radius: f64,
    /// Paths with `|x[1]| ≥ halfwidth` leave the stripe and contribute 0.
    stripe_halfwidth: Option<f64>,
}

const ROULETTE_SALT: u64 = 0x5eed_0f_7011e77e;

fn stream_seed(seed: u64, u: f64) -> u64 {
    mix64(seed ^ mix64(u.to_bits()))
}

fn run_path<const D: usize, F: PotentialField<D>>(
    field: &F,
    problem: &Problem<D>,
    cfg: &McConfig,
    seed: u64,
    path: u64,
) -> (f64, PathEnd) {
    let mut rng = CounterRng::new(seed, path);
    let roulette_key = stream_key(seed ^ ROULETTE_SALT, path);
    let substeps = 1u32 << cfg.coarse_levels;
    let scale = (cfg.dt / substeps as f64).sqrt();
    let r2 = problem.target_radius * problem.target_radius;
    let escape2 = cfg.escape_radius.map(|r| r * r);
    let log_threshold = if cfg.roulette_weight > 0.0 {
        cfg.roulette_weight.ln()
    } else {
        f64::NEG_INFINITY
    };
    let max_steps = (cfg.t_max / cfg.dt).ceil() as u64;

    let mut x = [0.0; D];
    // log weight = boost − integral
    let mut integral = 0.0f64;
    let mut boost = 0.0f64;
    let mut step: u64 = 0;
    loop {
        let d2: f64 = (0..D).map(|k| (x[k] - problem.center[k]).powi(2)).sum();
        if d2 <= r2 {
            return ((boost - integral).exp(), PathEnd::Hit);
        }
        if let Some(h) = problem.stripe_halfwidth {
            if x[1].abs() >= h {
                return (0.0, PathEnd::Exited);
            }
        }
        let escaped = escape2.is_some_and(|e| x.iter().map(|v| v * v).sum::<f64>() > e);
        if step >= max_steps || escaped {
            let w = if cfg.keep_truncated { (boost - integral).exp() } else { 0.0 };
            return (w, PathEnd::Truncated);
        }
        integral += field.value(&x) * cfg.dt;
        let lw = boost - integral;
        if lw < log_threshold {
            let u = uniform_at(roulette_key, step << cfg.coarse_levels);
            if u < (lw - log_threshold).exp() {
                boost = log_threshold + integral;
            } else {
                return (0.0, PathEnd::Killed);
            }
        }
        for _ in 0..substeps {
            for xk in x.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *xk += scale * z;
            }
        }
        step += 1;
    }
}

fn estimate<const D: usize, F: PotentialField<D>>(
    field: &F,
    problem: &Problem<D>,
    u: f64,
    cfg: &McConfig,
) -> TravelCostEstimate {
    let seed = stream_seed(cfg.seed, u);
    let outcomes: Vec<(f64, PathEnd)> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| run_path(field, problem, cfg, seed, p))
        .collect();
    let weights: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let n = cfg.n_paths as f64;
    let truncated = outcomes.iter().filter(|o| o.1 == PathEnd::Truncated).count();
    let hits = outcomes.iter().filter(|o| o.1 == PathEnd::Hit).count();
    let (mean, stderr_w) = mean_and_stderr(&weights);
    let squares: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let sum_sq = pairwise_sum(&squares);
    let n_effective = if sum_sq > 0.0 {
        ((mean * n).powi(2) / sum_sq).round() as usize
    } else {
        0
    };
    let issue = if truncated == cfg.n_paths {
        Some(EstimateIssue::AllTruncated)
    } else if mean <= 0.0 {
        Some(EstimateIssue::Underflow)
    } else {
        None
    };
    let stderr_a = if cfg.n_paths < 2 { f64::NAN } else { stderr_w / mean };
    TravelCostEstimate {
        u,
        a_hat: -mean.ln(),
        stderr_a,
        n_effective,
        truncated_fraction: truncated as f64 / n,
        hit_fraction: hits as f64 / n,
        mean_weight: mean,
        n_paths: cfg.n_paths,
        issue,
    }
}

/// Travel cost from the origin to the ball of radius `cfg.target_radius`
/// around `u·y`, in the dimension of `cfg.y`.
pub fn simulate_travel_cost<const D: usize, F: PotentialField<D>>(
    field: &F,
    u: f64,
    cfg: &McConfig,
) -> Result<TravelCostEstimate, McError> {
    cfg.validate()?;
    let y = cfg.direction::<D>()?;
    if !(u > cfg.target_radius) {
        return Err(McError::TargetTooClose {
            u,
            radius: cfg.target_radius,
        });
    }
    let problem = Problem {
        center: y.map(|c| c * u),
        target_radius: cfg.target_radius,
        stripe_halfwidth: None,
    };
    Ok(estimate(field, &problem, u, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub table: Vec<TravelCostEstimate>,
}

/// Slope of `a(u)` against `u` over `cfg.u_grid` (intercept free), weighted
/// by the inverse squared standard errors.
pub fn estimate_alpha<const D: usize, F: PotentialField<D>>(field: &F, cfg: &McConfig) -> Result<AlphaEstimate, McError> {
    let table = cfg
        .u_grid
        .iter()
        .map(|&u| simulate_travel_cost(field, u, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    fit_table(table)
}

pub fn fit_table(table: Vec<TravelCostEstimate>) -> Result<AlphaEstimate, McError> {
    let usable: Vec<&TravelCostEstimate> = table.iter().filter(|e| e.usable()).collect();
    if usable.len() < 3 {
        return Err(McError::TooFewPoints { usable: usable.len() });
    }
    let x: Vec<f64> = usable.iter().map(|e| e.u).collect();
    let y: Vec<f64> = usable.iter().map(|e| e.a_hat).collect();
    let s: Vec<f64> = usable.iter().map(|e| e.stderr_a).collect();
    let fit = fit_line(&x, &y, Some(&s));
    Ok(AlphaEstimate {
        slope: fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
        table,
    })
}

/// `E₀[exp(−c·H_R(u e₁)); τ_R(ℓ₀) > H_R(u e₁)]` for planar paths confined to
/// the stripe `|x₂| < R` around the `x₁`-axis. Reported as a travel cost, so
/// the estimate itself is `exp(−a_hat)`. Truncated paths count as failures.
pub fn travel_cost_in_stripe(c: f64, r: f64, u: f64, cfg: &McConfig) -> Result<TravelCostEstimate, McError> {
    confined_travel_cost(c, r, r, u, cfg)
}

/// Stripe-confined travel cost with separate stripe half-width and target radius.
pub fn confined_travel_cost(
    c: f64,
    halfwidth: f64,
    target_radius: f64,
    u: f64,
    cfg: &McConfig,
) -> Result<TravelCostEstimate, McError> {
    let cfg = McConfig {
        y: vec![1.0, 0.0],
        keep_truncated: false,
        ..cfg.clone()
    };
    cfg.validate()?;
    if !(c >= 0.0) || !(halfwidth > 0.0) || !(target_radius > 0.0) {
        return Err(McError::InvalidConfig("need c ≥ 0 and positive radii".into()));
    }
    if !(u > target_radius) {
        return Err(McError::TargetTooClose {
            u,
            radius: target_radius,
        });
    }
    let problem = Problem {
        center: [u, 0.0],
        target_radius,
        stripe_halfwidth: Some(halfwidth),
    };
    Ok(estimate(&ConstantField(c), &problem, u, &cfg))
}
