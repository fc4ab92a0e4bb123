//! Inequality suite for the variational solver.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::solver_scenarios::l1_constants;
use super::{rel_tol, row, Check, ExperimentConfig, ExperimentError, Report, Table};
use crate::potential::TorusPotential;
use crate::varform::{
    b_functional, fp_density, gamma, gamma_upper_fp, h_functional, inverse_holder_sides, k_functional,
    objective_and_gradient, SolverOptions,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropsParams {
    pub tau: f64,
    pub y: f64,
}

impl Default for PropsParams {
    fn default() -> Self {
        Self { tau: 1e-3, y: 1.0 }
    }
}

/// Constant, `2 + cos 2πx`, a two-mode trigonometric potential, a seeded
/// eight-mode trigonometric potential with `v_min ≥ 0.5`, and a grid potential.
pub fn default_corpus() -> Vec<(String, TorusPotential)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cos: Vec<f64> = (1..=8).map(|k| rng.random_range(-1.0..1.0) / k as f64).collect();
    let mut sin: Vec<f64> = (1..=8).map(|k| rng.random_range(-1.0..1.0) / k as f64).collect();
    let spread: f64 = cos.iter().chain(&sin).map(|v| v.abs()).sum();
    for v in cos.iter_mut().chain(sin.iter_mut()) {
        *v *= 1.2 / spread;
    }
    let grid: Vec<f64> = (0..64)
        .map(|i| {
            let x = i as f64 / 64.0;
            2.0 + 0.8 * (TAU * x).sin() + 0.3 * (3.0 * TAU * x).cos() + 0.1 * rng.random::<f64>()
        })
        .collect();
    vec![
        ("constant".into(), TorusPotential::constant(2.0).expect("valid")),
        ("cos".into(), TorusPotential::trig(2.0, vec![1.0], vec![0.0]).expect("valid")),
        (
            "two-mode".into(),
            TorusPotential::trig(2.0, vec![0.9, 0.0], vec![0.0, 0.3]).expect("valid"),
        ),
        ("random-8".into(), TorusPotential::trig(2.0, cos, sin).expect("valid")),
        ("grid".into(), TorusPotential::grid(grid).expect("valid")),
    ]
}

/// Grid potential with node values `V(x_i) + h(x_i)` on the solver grid.
fn perturbed(v: &TorusPotential, n: usize, h: impl Fn(f64) -> f64) -> Result<TorusPotential, ExperimentError> {
    let nodes = v.sample_nodes(n);
    let vals = nodes
        .iter()
        .enumerate()
        .map(|(i, x)| x + h(i as f64 / n as f64))
        .collect();
    Ok(TorusPotential::grid(vals)?)
}

/// Smallest `Γ` over the `f_p` family: the analytic bound for
/// differentiable potentials, the discrete trial density otherwise.
fn best_fp_gamma(v: &TorusPotential, y: f64, opts: &SolverOptions) -> Result<f64, ExperimentError> {
    let mut best = f64::INFINITY;
    for &p in &opts.p_scan {
        let g = if v.has_exact_gradient() {
            gamma_upper_fp(v, y, p)?
        } else {
            let f = fp_density(v, p, opts.grid_n)?;
            2.0 * (k_functional(&f, v) * b_functional(&f, y)).sqrt()
        };
        best = best.min(g);
    }
    Ok(best)
}

/// Largest relative gap between the solver gradient and central differences
/// along random directions at `points` random positive `ψ`.
fn gradient_check(v: &TorusPotential, y: f64, n: usize, points: usize, seed: u64) -> f64 {
    let nodes = v.sample_nodes(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let psi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = objective_and_gradient(&psi, &nodes, y);
        let analytic: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let h = 1e-5;
        let shifted = |s: f64| -> Vec<f64> { psi.iter().zip(&dir).map(|(p, d)| p + s * d).collect() };
        let fp = objective_and_gradient(&shifted(h), &nodes, y).0;
        let fm = objective_and_gradient(&shifted(-h), &nodes, y).0;
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(1e-12));
    }
    worst
}

/// All solver inequalities for one potential. `others` supplies partners
/// for the convex combinations.
pub fn props_checks(
    label: &str,
    v: &TorusPotential,
    others: &[TorusPotential],
    opts: &SolverOptions,
    params: &PropsParams,
    seed: u64,
) -> Result<Vec<Check>, ExperimentError> {
    let tau = params.tau;
    let y = params.y;
    let n = opts.grid_n;
    let g = |w: &TorusPotential, y: f64| -> Result<f64, ExperimentError> { Ok(gamma(w, y, opts)?.gamma) };
    let mut out = Vec::new();
    let base = gamma(v, y, opts)?;
    let g1 = base.gamma;
    let g1s = g1 * g1;
    let y2 = y * y;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for c in [0.0, 0.5, 2.0, 7.0] {
        let m = g(v, c * y)?;
        out.push(Check::within(
            "varform.homogeneity",
            format!("{label}: Γ(c·y) = c·Γ(y), c={c}"),
            m,
            c * g1,
            rel_tol(tau, c * g1),
        ));
    }
    out.push(Check::within(
        "varform.symmetry",
        format!("{label}: Γ(−y) = Γ(y)"),
        g(v, -y)?,
        g1,
        rel_tol(tau, g1),
    ));
    if base.sigma_s0 > 0.0 {
        for (a, b) in [(1.0, 2.0), (-1.0, 3.0), (0.5, -2.0), (2.0, -0.5)] {
            let lhs = g(v, (a + b) * y)?;
            let rhs = g(v, a * y)? + g(v, b * y)?;
            out.push(Check::at_most(
                "varform.triangle",
                format!("{label}: Γ(x+y) ≤ Γ(x) + Γ(y), x={a}, y={b}"),
                lhs,
                rhs,
                rel_tol(tau, rhs),
            ));
        }
    }
    for c in [1.0, 2.0, 5.0] {
        let m = g(&v.scaled(c)?, y)?.powi(2);
        out.push(Check::at_most(
            "varform.scaling_up",
            format!("{label}: Γ²(cV) ≤ cΓ²(V), c={c}"),
            m,
            c * g1s,
            rel_tol(tau, c * g1s),
        ));
    }
    for c in [0.1, 0.5] {
        let m = g(&v.scaled(c)?, y)?.powi(2);
        out.push(Check::at_least(
            "varform.scaling_down",
            format!("{label}: Γ²(cV) ≥ cΓ²(V), c={c}"),
            m,
            c * g1s,
            rel_tol(tau, c * g1s),
        ));
    }
    for k in 0..3 {
        let mut parts = vec![v.clone()];
        if !others.is_empty() {
            parts.push(others[k % others.len()].clone());
            parts.push(others[(k + 1) % others.len()].clone());
        }
        let raw: Vec<f64> = parts.iter().map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mix = TorusPotential::combination(&w, &parts, n)?;
        let lhs = g(&mix, y)?.powi(2);
        let mut rhs = 0.0;
        for (wi, p) in w.iter().zip(&parts) {
            rhs += wi * g(p, y)?.powi(2);
        }
        out.push(Check::at_least(
            "varform.concavity",
            format!("{label}: Γ²(Σλ_iV_i) ≥ Σλ_iΓ²(V_i), draw {k}"),
            lhs,
            rhs,
            rel_tol(tau, rhs),
        ));
    }
    for c in [0.5, 1.0, 3.0] {
        let m = g(&v.shifted(c)?, y)?.powi(2);
        let rhs = g1s + 2.0 * c * y2;
        out.push(Check::at_least(
            "varform.shifted",
            format!("{label}: Γ²(c+V) ≥ Γ²(V) + 2c|y|², c={c}"),
            m,
            rhs,
            rel_tol(tau, rhs),
        ));
    }
    let larger = perturbed(v, n, |x| 0.2 * (1.0 + (TAU * x).cos()))?;
    out.push(Check::at_most(
        "varform.monotonicity",
        format!("{label}: Γ(V) ≤ Γ(V + 0.2(1 + cos 2πx))"),
        g1,
        g(&larger, y)?,
        rel_tol(tau, g1),
    ));
    let smaller = v.scaled(0.7)?;
    out.push(Check::at_most(
        "varform.monotonicity",
        format!("{label}: Γ(0.7V) ≤ Γ(V)"),
        g(&smaller, y)?,
        g1,
        rel_tol(tau, g1),
    ));
    let yhat = g(v, 1.0)?;
    out.push(Check::at_least(
        "varform.sigma_comparison",
        format!("{label}: Γ²(y/|y|) ≥ 2σ_s(0)"),
        yhat * yhat,
        2.0 * base.sigma_s0,
        rel_tol(tau, 2.0 * base.sigma_s0),
    ));
    out.push(Check::at_least(
        "varform.b_lower_bound",
        format!("{label}: B(f) ≥ y²/2"),
        base.b_value,
        y2 / 2.0,
        1e-10,
    ));
    out.push(Check::within(
        "varform.gamma_kb",
        format!("{label}: Γ = 2√(KB)"),
        base.gamma,
        2.0 * (base.k_value * base.b_value).sqrt(),
        1e-12 * base.gamma.max(1.0),
    ));
    let f = &base.minimizer;
    let h = h_functional(f, 1.0);
    let four_kb = 4.0 * k_functional(f, v) * b_functional(f, y);
    out.push(Check::within(
        "varform.h_identity",
        format!("{label}: 2K y²/H(1,f) = 4KB"),
        2.0 * k_functional(f, v) * y2 / h,
        four_kb,
        1e-10 * four_kb.max(1.0),
    ));
    for m in [2, 3, 4] {
        let s = g(&v.symmetrize(m)?, y)?;
        out.push(Check::at_most(
            "potential.symmetrize_order",
            format!("{label}: Γ(V) ≤ Γ(E[V|G_{m}])"),
            g1,
            s,
            rel_tol(tau, s),
        ));
    }
    let mean = v.mean();
    let flat = (2.0 * mean).sqrt() * y.abs();
    if !v.is_constant() && v.v_min() > 0.0 {
        let delta = flat - best_fp_gamma(v, y, opts)?;
        out.push(Check::above(
            "varform.strict_gap",
            format!("{label}: δ = √(2E[V]) − min_p Γ_fp > 10τ"),
            delta,
            10.0 * tau,
        ));
        out.push(Check::at_most(
            "varform.strict_inequality",
            format!("{label}: Γ(V) ≤ √(2E[V]) − δ"),
            g1,
            flat - delta,
            rel_tol(tau, g1),
        ));
        out.push(Check::below(
            "varform.strict_inequality",
            format!("{label}: Γ(V) < Γ(E[V])"),
            g1,
            flat,
        ));
    }
    if v.v_min() > 0.0 {
        let eps = 0.5 * v.v_min();
        let near = perturbed(v, n, |x| eps * (TAU * x).sin())?;
        let diff = (g(&near, y)?.powi(2) - g1s).abs();
        let bound = eps * g1s / v.v_min();
        out.push(Check::at_most(
            "varform.sup_continuity",
            format!("{label}: |Γ²(V') − Γ²(V)| ≤ ‖V'−V‖∞ Γ²(V)/v_min"),
            diff,
            bound,
            rel_tol(tau, bound),
        ));
        let consts = l1_constants(mean, v.v_min());
        for k in [10.0, 100.0, 1000.0] {
            let vn = perturbed(v, n, |x| (TAU * x).cos() / k)?;
            let l1 = (0..n).map(|i| (TAU * i as f64 / n as f64).cos().abs()).sum::<f64>() / n as f64 / k;
            let diff = (g(&vn, y)?.powi(2) - g1s).abs();
            out.push(Check::at_most(
                "varform.l1_continuity",
                format!("{label}: |Γ²(V_n) − Γ²(V)| ≤ C‖V_n−V‖₁|y|², n={k}"),
                diff,
                consts.c * l1 * y2,
                rel_tol(tau, g1s),
            ));
        }
    }
    let mut last = f64::INFINITY;
    let mut decreasing = true;
    for k in [1.0, 10.0, 100.0, 1000.0] {
        let gk = g(&v.shifted(1.0 / k)?, y)?;
        decreasing &= gk <= last + rel_tol(tau, gk);
        last = gk;
    }
    out.push(Check::holds(
        "varform.usc_monotone",
        format!("{label}: Γ(V + 1/n) nonincreasing in n"),
        decreasing,
    ));
    out.push(Check::at_most(
        "varform.upper_semicontinuity",
        format!("{label}: limsup Γ(V + 1/n) ≤ Γ(V)"),
        last,
        g1,
        rel_tol(tau, g1),
    ));
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let gv: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let hv: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
        let (lhs, rhs) = inverse_holder_sides(&gv, &hv, 2.0);
        worst = worst.max(lhs - rhs);
    }
    out.push(Check::at_most(
        "varform.inverse_holder",
        format!("{label}: max E[g^½]² E[h⁻¹]⁻¹ − E[gh] over 20 draws"),
        worst,
        0.0,
        1e-10,
    ));
    out.push(Check::at_most(
        "varform.gradient",
        format!("{label}: solver gradient vs central differences, 100 points"),
        gradient_check(v, y, n, 100, seed ^ 0x9),
        0.0,
        1e-6,
    ));
    Ok(out)
}

pub(super) fn run(cfg: &ExperimentConfig, report: &mut Report) -> Result<(), ExperimentError> {
    let params: PropsParams = cfg.params()?;
    let corpus: Vec<(String, TorusPotential)> = if cfg.potentials.is_empty() {
        default_corpus()
    } else {
        cfg.potentials()?
            .into_iter()
            .enumerate()
            .map(|(i, v)| (format!("V{i}"), v))
            .collect()
    };
    let mut table = Table::new("props_gamma.csv", &["potential", "gamma", "K", "B", "sigma_s0", "iterations", "converged"]);
    for (i, (label, v)) in corpus.iter().enumerate() {
        let others: Vec<TorusPotential> = corpus
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (_, w))| w.clone())
            .collect();
        let r = gamma(v, params.y, &cfg.solver)?;
        table.push(row![label, r.gamma, r.k_value, r.b_value, r.sigma_s0, r.iterations, r.converged]);
        report.extend(props_checks(label, v, &others, &cfg.solver, &params, cfg.seed.wrapping_add(i as u64))?);
    }
    report.table(table);
    report.note("The solver value is an upper bound on the discrete infimum; checks compare it with independent upper-bound families and exact cases.");
    Ok(())
}
