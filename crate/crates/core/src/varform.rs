//! Variational expression for the Lyapunov exponent on the 1-D torus.
//!
//! In one dimension the only divergence-free field with mean `y` is the
//! constant `y`, so
//!
//! ```text
//! Γ_V(y) = 2 inf_f sqrt(K(f) B(f)),   K(f) = E[f'²/(8f) + V f],   B(f) = y² E[1/(2f)].
//! ```
//!
//! `K` is homogeneous of degree 1 and `B` of degree −1 in `f`, so the mean-one
//! constraint can be dropped and `2 sqrt(K B) = inf_t (K(t f) + B(t f))`. With
//! `f = ψ²` this turns the problem into the minimization of
//!
//! ```text
//! F(ψ) = E[ψ'²/2 + V ψ² + y²/(2ψ²)]
//! ```
//!
//! which is strictly convex on `ψ > 0`. The solver runs damped Newton on the
//! grid version of `F`; the periodic Laplacian makes the Hessian cyclic
//! tridiagonal. The reported `Γ` is `2 sqrt(K B)` of the normalized minimizer,
//! which is a feasible upper bound at every iterate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potential::{PotentialError, TorusPotential};

/// Quadrature nodes for continuum expectations of smooth potentials.
pub const QUADRATURE_NODES: usize = 4096;

#[derive(Debug, Error, PartialEq)]
pub enum VarformError {
    #[error("operation needs v_min > 0, potential has v_min = {0}")]
    NonPositivePotential(f64),
    #[error("operation needs an exactly differentiable potential (constant or trigonometric kind)")]
    NotDifferentiable,
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("grid needs at least 4 nodes, got {0}")]
    GridTooSmall(usize),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Trial density on the uniform grid `x_i = i/N`: mean one, bounded below by
/// `floor > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField {
    values: Vec<f64>,
    floor: f64,
}

impl DensityField {
    pub fn uniform(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
            floor: 1.0,
        }
    }

    /// Normalizes positive values to mean one.
    pub fn from_unnormalized(values: Vec<f64>) -> Result<Self, VarformError> {
        if values.len() < 4 {
            return Err(VarformError::GridTooSmall(values.len()));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(VarformError::InvalidDensity(format!("value {v} is not positive and finite")));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let values: Vec<f64> = values.into_iter().map(|v| v / mean).collect();
        let floor = values.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self { values, floor })
    }

    /// `f = exp(g) / mean(exp(g))`.
    pub fn from_log(g: &[f64]) -> Result<Self, VarformError> {
        let top = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::from_unnormalized(g.iter().map(|v| (v - top).exp()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The lower bound `c_f`.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// `E[f'²/(8f) + V f]` on the grid of `f`.
///
/// The gradient term is the Dirichlet form of `sqrt f` with forward
/// differences, `(1/N) Σ (sqrt f_{i+1} − sqrt f_i)² N² / 2`.
pub fn k_functional(f: &DensityField, v: &TorusPotential) -> f64 {
    let nodes = v.sample_nodes(f.len());
    k_on_nodes(f.values(), &nodes)
}

fn k_on_nodes(f: &[f64], v: &[f64]) -> f64 {
    let n = f.len();
    let nf = n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        let d = f[j].sqrt() - f[i].sqrt();
        acc += 0.5 * d * d * nf * nf + v[i] * f[i];
    }
    acc / nf
}

/// `inf_φ E[φ²/(2f)] = y² E[1/(2f)]`.
pub fn b_functional(f: &DensityField, y: f64) -> f64 {
    let n = f.len() as f64;
    y * y * f.values().iter().map(|v| 0.5 / v).sum::<f64>() / n
}

/// `inf_w E[(w' − η)² f] = η² / E[1/f]`, attained at `w' = η − η/(f E[1/f])`.
pub fn h_functional(f: &DensityField, eta: f64) -> f64 {
    let n = f.len() as f64;
    let inv_mean = f.values().iter().map(|v| 1.0 / v).sum::<f64>() / n;
    eta * eta / inv_mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub grid_n: usize,
    pub max_iter: usize,
    /// Stop once the Newton decrement falls below `tol` relative to the objective.
    pub tol: f64,
    /// Also start from the best member of the `f_p` family and keep the better run.
    pub restarts: bool,
    pub p_scan: Vec<f64>,
    /// Re-solve at `2N` and report the value alongside.
    pub refine: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid_n: 512,
            max_iter: 5000,
            tol: 1e-10,
            restarts: true,
            p_scan: (0..=20).map(|i| i as f64 * 0.05).collect(),
            refine: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaResult {
    pub gamma: f64,
    #[serde(rename = "K_value")]
    pub k_value: f64,
    #[serde(rename = "B_value")]
    pub b_value: f64,
    /// Principal eigenvalue of `−½Δ + V` on the grid, i.e. `inf_f K(f)`.
    pub sigma_s0: f64,
    pub minimizer: DensityField,
    pub iterations: usize,
    pub converged: bool,
    pub grid_n: usize,
    pub y: f64,
    /// Objective `F` after each accepted step (nonincreasing).
    pub history: Vec<f64>,
    /// `Γ` recomputed on a `2N` grid when requested.
    pub refined_gamma: Option<f64>,
}

/// Computes `Γ_V(y)` on the torus grid.
pub fn gamma(v: &TorusPotential, y: f64, opts: &SolverOptions) -> Result<GammaResult, VarformError> {
    let n = opts.grid_n;
    if n < 4 {
        return Err(VarformError::GridTooSmall(n));
    }
    let nodes = v.sample_nodes(n);
    let mut result = if y == 0.0 || nodes.iter().all(|&x| x == 0.0) {
        // f ≡ 1 gives K·B = 0 in both cases.
        let f = DensityField::uniform(n);
        let k = k_on_nodes(f.values(), &nodes);
        GammaResult {
            gamma: 0.0,
            k_value: k,
            b_value: b_functional(&f, y),
            sigma_s0: principal_eigenvalue(&nodes, &vec![1.0; n]),
            minimizer: f,
            iterations: 0,
            converged: true,
            grid_n: n,
            y,
            history: vec![],
            refined_gamma: None,
        }
    } else {
        solve_nodes(&nodes, v, y, opts)?
    };
    if opts.refine {
        let fine = SolverOptions {
            grid_n: 2 * n,
            refine: false,
            ..opts.clone()
        };
        result.refined_gamma = Some(gamma(v, y, &fine)?.gamma);
    }
    Ok(result)
}

fn solve_nodes(nodes: &[f64], v: &TorusPotential, y: f64, opts: &SolverOptions) -> Result<GammaResult, VarformError> {
    let n = nodes.len();
    let mean_v = nodes.iter().sum::<f64>() / n as f64;
    let level = (y * y / (2.0 * mean_v)).powf(0.25);
    let mut starts = vec![vec![level; n]];
    if opts.restarts && v.v_min() > 0.0 && !v.is_constant() {
        let best_p = opts
            .p_scan
            .iter()
            .copied()
            .filter(|p| *p > 0.0)
            .map(|p| {
                let f = fp_density_nodes(nodes, p);
                (p, k_on_nodes(f.values(), nodes) * b_functional(&f, y))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((p, _)) = best_p {
            let f = fp_density_nodes(nodes, p);
            let scale = (b_functional(&f, y) / k_on_nodes(f.values(), nodes)).sqrt();
            starts.push(f.values().iter().map(|x| (scale * x).sqrt()).collect());
        }
    }

    let mut best: Option<GammaResult> = None;
    for start in starts {
        let run = newton(nodes, y, start, opts);
        let f = DensityField::from_unnormalized(run.psi.iter().map(|p| p * p).collect())?;
        let k = k_on_nodes(f.values(), nodes);
        let b = b_functional(&f, y);
        let g = 2.0 * (k * b).sqrt();
        if best.as_ref().is_none_or(|r| g < r.gamma) {
            let sqrt_f: Vec<f64> = f.values().iter().map(|x| x.sqrt()).collect();
            best = Some(GammaResult {
                gamma: g,
                k_value: k,
                b_value: b,
                sigma_s0: principal_eigenvalue(nodes, &sqrt_f).min(k),
                minimizer: f,
                iterations: run.iterations,
                converged: run.converged,
                grid_n: n,
                y,
                history: run.history,
                refined_gamma: None,
            });
        }
    }
    Ok(best.expect("at least one start"))
}

struct NewtonRun {
    psi: Vec<f64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Grid objective `F(ψ)` and its gradient.
pub(crate) fn objective_and_gradient(psi: &[f64], v: &[f64], y: f64) -> (f64, Vec<f64>) {
    let n = psi.len();
    let nf = n as f64;
    let n2 = nf * nf;
    let y2 = y * y;
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let next = psi[(i + 1) % n];
        let prev = psi[(i + n - 1) % n];
        let d = next - psi[i];
        let p2 = psi[i] * psi[i];
        value += 0.5 * n2 * d * d + v[i] * p2 + 0.5 * y2 / p2;
        grad[i] = (n2 * (2.0 * psi[i] - prev - next) + 2.0 * v[i] * psi[i] - y2 / (p2 * psi[i])) / nf;
    }
    (value / nf, grad)
}

fn objective(psi: &[f64], v: &[f64], y: f64) -> f64 {
    if psi.iter().any(|p| *p <= 0.0) {
        return f64::INFINITY;
    }
    objective_and_gradient(psi, v, y).0
}

fn newton(v: &[f64], y: f64, mut psi: Vec<f64>, opts: &SolverOptions) -> NewtonRun {
    let n = psi.len();
    let nf = n as f64;
    let n2 = nf * nf;
    let y2 = y * y;
    let (mut value, mut grad) = objective_and_gradient(&psi, v, y);
    let mut history = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        // Hessian of N·F: N²·L + diag(2V + 3y²/ψ⁴), right-hand side −N·∇F.
        let diag: Vec<f64> = (0..n)
            .map(|i| 2.0 * n2 + 2.0 * v[i] + 3.0 * y2 / psi[i].powi(4))
            .collect();
        let rhs: Vec<f64> = grad.iter().map(|g| -nf * g).collect();
        let step = solve_cyclic_tridiagonal(&diag, -n2, &rhs);
        let decrement: f64 = -grad.iter().zip(&step).map(|(g, s)| g * s).sum::<f64>();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = psi.iter().zip(&step).map(|(p, s)| p + t * s).collect();
            let f_trial = objective(&trial, v, y);
            if f_trial <= value - 1e-4 * t * decrement {
                accepted = Some((trial, f_trial));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((trial, f_trial)) => {
                psi = trial;
                value = f_trial;
                grad = objective_and_gradient(&psi, v, y).1;
                history.push(value);
            }
            None => {
                // No further decrease representable in floating point.
                converged = decrement <= 1e3 * f64::EPSILON * value.abs();
                break;
            }
        }
        if 0.5 * decrement <= opts.tol * value.abs() {
            converged = true;
            break;
        }
    }
    NewtonRun {
        psi,
        iterations,
        converged,
        history,
    }
}

/// Solves `A x = rhs` for the symmetric cyclic tridiagonal matrix with
/// diagonal `diag` and every off-diagonal (corners included) equal to `off`.
fn solve_cyclic_tridiagonal(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Sherman–Morrison: A = T + u vᵀ with u = (γ, 0, …, 0, off), v = (1, 0, …, 0, off/γ).
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= off * off / gamma;
    let x = solve_tridiagonal(&b, off, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = off;
    let z = solve_tridiagonal(&b, off, &u);
    let fact = (x[0] + off * x[n - 1] / gamma) / (1.0 + z[0] + off * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}

fn solve_tridiagonal(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * c[i - 1];
        c[i] = off / m;
        d[i] = (rhs[i] - off * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Smallest eigenvalue of `(N²/2) L + diag(V)` by shifted inverse iteration
/// started from `start`.
fn principal_eigenvalue(v: &[f64], start: &[f64]) -> f64 {
    let n = v.len();
    let nf = n as f64;
    let n2 = nf * nf;
    let shift = 1.0;
    let diag: Vec<f64> = v.iter().map(|x| n2 + x + shift).collect();
    let rayleigh = |x: &[f64]| {
        let mut num = 0.0;
        for i in 0..n {
            let d = x[(i + 1) % n] - x[i];
            num += 0.5 * n2 * d * d + v[i] * x[i] * x[i];
        }
        num / x.iter().map(|a| a * a).sum::<f64>()
    };
    let mut x = start.to_vec();
    let mut best = rayleigh(&x);
    for _ in 0..500 {
        let mut y = solve_cyclic_tridiagonal(&diag, -0.5 * n2, &x);
        let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        y.iter_mut().for_each(|a| *a /= norm);
        let q = rayleigh(&y);
        let done = (best - q).abs() <= 1e-14 * best.abs().max(1e-300);
        best = best.min(q);
        x = y;
        if done {
            break;
        }
    }
    best
}

/// `f_p = V^{-p} / E[V^{-p}]` on the nodes `i/n`.
pub fn fp_density(v: &TorusPotential, p: f64, n: usize) -> Result<DensityField, VarformError> {
    if v.v_min() <= 0.0 {
        return Err(VarformError::NonPositivePotential(v.v_min()));
    }
    if n < 4 {
        return Err(VarformError::GridTooSmall(n));
    }
    Ok(fp_density_nodes(&v.sample_nodes(n), p))
}

fn fp_density_nodes(nodes: &[f64], p: f64) -> DensityField {
    DensityField::from_unnormalized(nodes.iter().map(|x| x.powf(-p)).collect())
        .expect("positive potential gives a positive density")
}

/// `sqrt(2 y² E[p²|V'|²/(8V^{p+2}) + V^{1−p}] E[V^p])`, the upper bound on
/// `Γ_V(y)` obtained from the trial density `f_p ∝ V^{-p}`.
pub fn gamma_upper_fp(v: &TorusPotential, y: f64, p: f64) -> Result<f64, VarformError> {
    if v.v_min() <= 0.0 {
        return Err(VarformError::NonPositivePotential(v.v_min()));
    }
    if !v.has_exact_gradient() {
        return Err(VarformError::NotDifferentiable);
    }
    let q = QUADRATURE_NODES;
    let (mut first, mut second) = (0.0, 0.0);
    for i in 0..q {
        let x = i as f64 / q as f64;
        let val = v.eval(x);
        let d = v.grad(x);
        first += p * p * d * d / (8.0 * val.powf(p + 2.0)) + val.powf(1.0 - p);
        second += val.powf(p);
    }
    let qf = q as f64;
    Ok((2.0 * y * y * (first / qf) * (second / qf)).sqrt())
}

/// Values used for continuum expectations: grid nodes for grid kind, a fine
/// uniform grid otherwise.
fn quadrature_values(v: &TorusPotential) -> Vec<f64> {
    match v.kind() {
        crate::potential::PotentialKind::Grid(s) => s.clone(),
        _ => v.sample_nodes(QUADRATURE_NODES),
    }
}

/// `Cov(V, ln V) = E[V ln V] − E[V] E[ln V]`.
pub fn cov_v_ln_v(v: &TorusPotential) -> Result<f64, VarformError> {
    if v.v_min() <= 0.0 {
        return Err(VarformError::NonPositivePotential(v.v_min()));
    }
    if v.is_constant() {
        return Ok(0.0);
    }
    let vals = quadrature_values(v);
    let n = vals.len() as f64;
    let ev = vals.iter().sum::<f64>() / n;
    let eln = vals.iter().map(|x| x.ln()).sum::<f64>() / n;
    let evln = vals.iter().map(|x| x * x.ln()).sum::<f64>() / n;
    Ok(evln - ev * eln)
}

/// `ψ(p) = E[V^{1−p}] E[V^p]`.
pub fn fp_psi(v: &TorusPotential, p: f64) -> Result<f64, VarformError> {
    if v.v_min() <= 0.0 {
        return Err(VarformError::NonPositivePotential(v.v_min()));
    }
    let vals = quadrature_values(v);
    let n = vals.len() as f64;
    let a = vals.iter().map(|x| x.powf(1.0 - p)).sum::<f64>() / n;
    let b = vals.iter().map(|x| x.powf(p)).sum::<f64>() / n;
    Ok(a * b)
}

/// Both sides of the inverse Hölder inequality
/// `E[|g|^{1/r}]^r E[|h|^{−1/(r−1)}]^{−(r−1)} ≤ E[|gh|]` for grid functions.
pub fn inverse_holder_sides(g: &[f64], h: &[f64], r: f64) -> (f64, f64) {
    assert!(r > 1.0 && g.len() == h.len() && !g.is_empty());
    let n = g.len() as f64;
    let a = g.iter().map(|x| x.abs().powf(1.0 / r)).sum::<f64>() / n;
    let b = h.iter().map(|x| x.abs().powf(-1.0 / (r - 1.0))).sum::<f64>() / n;
    let rhs = g.iter().zip(h).map(|(x, z)| (x * z).abs()).sum::<f64>() / n;
    (a.powf(r) * b.powf(-(r - 1.0)), rhs)
}
