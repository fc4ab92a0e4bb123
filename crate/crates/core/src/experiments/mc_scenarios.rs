//! Monte Carlo scenarios.

use serde::{Deserialize, Serialize};

use super::{config_err, row, Check, ExperimentConfig, ExperimentError, Report, Table};
use crate::mc::{
    estimate_alpha, simulate_travel_cost, travel_cost_in_stripe, AlphaEstimate, ConstantField, McConfig,
    TravelCostEstimate,
};
use crate::potential::{PotentialKind, TorusPotential};
use crate::special::{bessel_j0, j0_first_zero, lambda2, planar_constant_travel_cost};
use crate::stats::fit_line;
use crate::varform::gamma;

/// Unweighted regression slope of the exact planar travel cost for `V ≡ c`
/// over `u_grid`; its distance from `√(2c)` is the finite-`u` bias of the
/// slope estimator.
pub fn finite_u_planar_slope(c: f64, u_grid: &[f64]) -> f64 {
    let a: Vec<f64> = u_grid.iter().map(|&u| planar_constant_travel_cost(c, u)).collect();
    fit_line(u_grid, &a, None).slope
}

fn estimates_table(file: &str, table: &[TravelCostEstimate]) -> Table {
    let mut t = Table::new(file, &["u", "a_hat", "stderr_a", "n_effective", "truncated_fraction"]);
    for e in table {
        t.push(row![e.u, e.a_hat, e.stderr_a, e.n_effective, e.truncated_fraction]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McCrossParams {
    /// Shift `ω` of the realization.
    pub omega: f64,
    /// Relative tolerance on the slope for constant potentials.
    pub constant_rel_tol: f64,
    /// Regression standard errors allowed between slope and solver value.
    pub stderr_factor: f64,
    /// Repeat constant potentials at `dt/2` on shared Brownian paths.
    pub dt_halving: bool,
    pub dt_rel_tol: f64,
}

impl Default for McCrossParams {
    fn default() -> Self {
        Self {
            omega: 0.0,
            constant_rel_tol: 0.05,
            stderr_factor: 3.0,
            dt_halving: true,
            dt_rel_tol: 0.02,
        }
    }
}

pub fn mc_default() -> McConfig {
    McConfig {
        dt: 1e-3,
        n_paths: 200_000,
        t_max: 50.0,
        y: vec![1.0],
        u_grid: vec![3.0, 4.0, 5.0, 6.0],
        roulette_weight: 1e-2,
        ..McConfig::default()
    }
}

/// Slope fit for a one-dimensional torus potential; constants skip the
/// periodic lookup.
fn alpha_1d(v: &TorusPotential, omega: f64, cfg: &McConfig) -> Result<AlphaEstimate, ExperimentError> {
    Ok(match *v.kind() {
        PotentialKind::Constant(c) => estimate_alpha::<1, _>(&ConstantField(c), cfg)?,
        _ => estimate_alpha::<1, _>(&v.realization(omega), cfg)?,
    })
}

pub(super) fn mc_cross_check(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), ExperimentError> {
    let p: McCrossParams = cfg.params()?;
    let mut mc = cfg.mc_or(mc_default());
    if mc.y.len() != 1 {
        return Err(config_err("mc-cross-check runs in one dimension; y must have length 1"));
    }
    let vs = if cfg.potentials.is_empty() {
        vec![
            TorusPotential::constant(1.0)?,
            TorusPotential::trig(2.0, vec![1.0], vec![0.0])?,
        ]
    } else {
        cfg.potentials()?
    };
    if p.dt_halving {
        mc.coarse_levels = 1;
    }
    let y = mc.y[0];
    let mut summary = Table::new("mc_slopes.csv", &["potential", "dt", "slope", "stderr", "reference"]);
    for (i, v) in vs.iter().enumerate() {
        let label = format!("V{i}");
        let fit = alpha_1d(v, p.omega, &mc)?;
        report.table(estimates_table(&format!("mc_{label}.csv"), &fit.table));
        for e in &fit.table {
            report.check(Check::at_least(
                "mc.nonnegative_cost",
                format!("{label}: a_hat ≥ 0 at u={}", e.u),
                e.a_hat,
                0.0,
                0.0,
            ));
        }
        if let PotentialKind::Constant(c) = *v.kind() {
            let exact = (2.0 * c).sqrt() * y.abs();
            summary.push(row![label, mc.dt, fit.slope, fit.stderr, exact]);
            report.check(Check::within(
                "mc.constant_slope",
                format!("{label}: MC slope vs √(2c), c={c}"),
                fit.slope,
                exact,
                p.constant_rel_tol * exact,
            ));
            if p.dt_halving {
                let fine_cfg = McConfig {
                    dt: mc.dt / 2.0,
                    coarse_levels: 0,
                    ..mc.clone()
                };
                let fine = alpha_1d(v, p.omega, &fine_cfg)?;
                report.table(estimates_table(&format!("mc_{label}_half_dt.csv"), &fine.table));
                summary.push(row![label, fine_cfg.dt, fine.slope, fine.stderr, exact]);
                report.check(Check::within(
                    "mc.dt_refinement",
                    format!("{label}: slope at dt/2 vs dt"),
                    fine.slope,
                    fit.slope,
                    p.dt_rel_tol * fit.slope.abs(),
                ));
                let worst = fit
                    .table
                    .iter()
                    .zip(&fine.table)
                    .map(|(a, b)| (a.a_hat - b.a_hat).abs() / a.a_hat.abs().max(1e-300))
                    .fold(0.0, f64::max);
                report.check(Check::at_most(
                    "mc.dt_refinement",
                    format!("{label}: largest relative change of a_hat at dt/2"),
                    worst,
                    0.0,
                    p.dt_rel_tol,
                ));
            }
        } else {
            let g = gamma(v, y, &cfg.solver)?.gamma;
            summary.push(row![label, mc.dt, fit.slope, fit.stderr, g]);
            report.check(Check::within(
                "mc.varform_agreement",
                format!("{label}: MC slope vs variational Γ, ω={}", p.omega),
                fit.slope,
                g,
                p.stderr_factor * fit.stderr,
            ));
        }
    }
    report.table(summary);
    report.note("Slopes are finite-u regressions of a_hat on u; they are consistency checks, not certificates of the limit.");
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LargeStripe {
    #[serde(rename = "R")]
    pub r: f64,
    pub u: f64,
    pub rel_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StripeLemmaParams {
    pub c: f64,
    #[serde(rename = "R")]
    pub r: f64,
    /// Finite-`u` allowance on the rate.
    pub slack: f64,
    /// Wide-stripe comparison against the unconfined run.
    pub large: Option<LargeStripe>,
}

impl Default for StripeLemmaParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            r: 2.0,
            slack: 0.25,
            large: Some(LargeStripe {
                r: 20.0,
                u: 25.0,
                rel_tol: 0.1,
            }),
        }
    }
}

pub fn stripe_mc_default() -> McConfig {
    McConfig {
        dt: 1e-3,
        n_paths: 20_000,
        t_max: 50.0,
        y: vec![1.0, 0.0],
        u_grid: vec![3.0, 4.0, 5.0, 6.0],
        roulette_weight: 1e-3,
        ..McConfig::default()
    }
}

pub(super) fn stripe_lemma(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), ExperimentError> {
    let p: StripeLemmaParams = cfg.params()?;
    let mut mc = cfg.mc_or(stripe_mc_default());
    mc.y = vec![1.0, 0.0];
    if mc.u_grid.iter().any(|&u| u <= p.r) {
        return Err(config_err("stripe-lemma needs every u > R"));
    }
    let l2 = lambda2();
    let j = j0_first_zero();
    report.check(Check::at_most(
        "lines.lambda2_residual",
        "|J₀(j₀,₁)| at the bisection root",
        bessel_j0(j).abs(),
        0.0,
        1e-9,
    ));
    report.check(Check::within("lines.lambda2_scaling", "2λ₂ = j₀,₁²", 2.0 * l2, j * j, 1e-12));
    let rate_bound = (2.0 * (p.c + l2 / (p.r * p.r))).sqrt();
    let mut table = Table::new("stripe.csv", &["u", "a_hat", "stderr_a", "rate", "rate_bound", "success_fraction"]);
    let mut last = None;
    for &u in &mc.u_grid {
        let e = travel_cost_in_stripe(p.c, p.r, u, &mc)?;
        table.push(row![u, e.a_hat, e.stderr_a, e.a_hat / u, rate_bound, e.hit_fraction]);
        report.check(Check::holds(
            "mc.stripe_usable",
            format!("some path reaches B_R(u e₁) inside the stripe, u={u}"),
            e.usable(),
        ));
        last = Some(e);
    }
    report.table(table);
    if let Some(e) = last {
        report.check(Check::at_most(
            "mc.stripe_rate",
            format!("−(1/u) ln E[e^{{−cH}}; stays in stripe] ≤ √(2(c+λ₂/R²)), u={}", e.u),
            e.a_hat / e.u,
            rate_bound,
            p.slack,
        ));
    }
    if let Some(large) = &p.large {
        let confined = travel_cost_in_stripe(p.c, large.r, large.u, &mc)?;
        let free_cfg = McConfig {
            target_radius: large.r,
            ..mc.clone()
        };
        let free = simulate_travel_cost::<2, _>(&ConstantField(p.c), large.u, &free_cfg)?;
        let (rc, rf) = (confined.a_hat / large.u, free.a_hat / large.u);
        let mut t = Table::new("stripe_wide.csv", &["R", "u", "rate_confined", "rate_free"]);
        t.push(row![large.r, large.u, rc, rf]);
        report.table(t);
        report.check(Check::within(
            "mc.stripe_wide",
            format!("wide stripe R={} matches the unconfined rate, u={}", large.r, large.u),
            rc,
            rf,
            large.rel_tol * rf,
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_u_bias_is_positive_and_shrinks() {
        let near = finite_u_planar_slope(2.0, &[3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let far = finite_u_planar_slope(2.0, &[30.0, 40.0, 50.0, 60.0]);
        assert!(near > 2.0 && far > 2.0 && far < near);
        // ½ ln u prefactor: slope excess ≈ 1/(2u)
        assert!((far - 2.0 - 0.5 / 45.0).abs() < 2e-3);
    }
}
