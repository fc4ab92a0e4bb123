//! Potentials on the one-dimensional torus.
//!
//! The torus `[0, 1)` with the shift `τ_x ω = ω + x mod 1` and Lebesgue
//! measure is the dynamical system the variational solver works on. A
//! potential is a nonnegative function on it; its realization at `ω` is the
//! function `x ↦ V(ω + x)` on the real line.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::mc::PotentialField;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("potential must be nonnegative, certified lower bound is {0}")]
    Negative(f64),
    #[error("grid potential needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} = {value} lies outside the certified range [{v_min}, {v_max}]")]
    OutsideBounds {
        index: usize,
        value: f64,
        v_min: f64,
        v_max: f64,
    },
    #[error("cosine and sine coefficient lists differ in length ({cos} vs {sin})")]
    CoefficientMismatch { cos: usize, sin: usize },
    #[error("non-finite value in potential description")]
    NonFinite,
    #[error("symmetrization order must be at least 1")]
    ZeroOrder,
}

/// How a torus potential is represented.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialSpec {
    Constant {
        c: f64,
    },
    /// `a0 + Σ_k cos[k-1]·cos(2πkx) + sin[k-1]·sin(2πkx)`.
    Trig {
        a0: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// Samples at `x_i = i/N`, periodic linear interpolation in between.
    Grid {
        samples: Vec<f64>,
        #[serde(default)]
        v_min: Option<f64>,
        #[serde(default)]
        v_max: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PotentialKind {
    Constant(f64),
    Trig {
        a0: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
    },
    Grid(Vec<f64>),
}

/// A nonnegative periodic potential with certified bounds `v_min ≤ V ≤ v_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusPotential {
    kind: PotentialKind,
    v_min: f64,
    v_max: f64,
}

impl TorusPotential {
    pub fn constant(c: f64) -> Result<Self, PotentialError> {
        if !c.is_finite() {
            return Err(PotentialError::NonFinite);
        }
        if c < 0.0 {
            return Err(PotentialError::Negative(c));
        }
        Ok(Self {
            kind: PotentialKind::Constant(c),
            v_min: c,
            v_max: c,
        })
    }

    /// Trigonometric polynomial. Bounds are `a0 ± Σ(|a_k| + |b_k|)`.
    pub fn trig(a0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self, PotentialError> {
        let mut cos = cos;
        let mut sin = sin;
        let k = cos.len().max(sin.len());
        cos.resize(k, 0.0);
        sin.resize(k, 0.0);
        if !a0.is_finite() || cos.iter().chain(&sin).any(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        let spread: f64 = cos.iter().chain(&sin).map(|v| v.abs()).sum();
        let v_min = a0 - spread;
        if v_min < 0.0 {
            return Err(PotentialError::Negative(v_min));
        }
        if spread == 0.0 {
            return Self::constant(a0);
        }
        Ok(Self {
            kind: PotentialKind::Trig { a0, cos, sin },
            v_min,
            v_max: a0 + spread,
        })
    }

    /// Grid potential with bounds taken from the samples. Exact for the
    /// linear interpolant, whose extrema sit on nodes.
    pub fn grid(samples: Vec<f64>) -> Result<Self, PotentialError> {
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::grid_certified(samples, lo, hi)
    }

    /// Grid potential with user-supplied bounds, checked against the samples.
    pub fn grid_certified(samples: Vec<f64>, v_min: f64, v_max: f64) -> Result<Self, PotentialError> {
        if samples.len() < 2 {
            return Err(PotentialError::TooFewSamples(samples.len()));
        }
        if !v_min.is_finite() || !v_max.is_finite() || samples.iter().any(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        if v_min < 0.0 {
            return Err(PotentialError::Negative(v_min));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, &v)| v < v_min || v > v_max)
        {
            return Err(PotentialError::OutsideBounds {
                index,
                value,
                v_min,
                v_max,
            });
        }
        Ok(Self {
            kind: PotentialKind::Grid(samples),
            v_min,
            v_max,
        })
    }

    pub fn from_spec(spec: &PotentialSpec) -> Result<Self, PotentialError> {
        match spec {
            PotentialSpec::Constant { c } => Self::constant(*c),
            PotentialSpec::Trig { a0, cos, sin } => {
                if !cos.is_empty() && !sin.is_empty() && cos.len() != sin.len() {
                    return Err(PotentialError::CoefficientMismatch {
                        cos: cos.len(),
                        sin: sin.len(),
                    });
                }
                Self::trig(*a0, cos.clone(), sin.clone())
            }
            PotentialSpec::Grid {
                samples,
                v_min,
                v_max,
            } => match (v_min, v_max) {
                (Some(lo), Some(hi)) => Self::grid_certified(samples.clone(), *lo, *hi),
                _ => Self::grid(samples.clone()),
            },
        }
    }

    pub fn to_spec(&self) -> PotentialSpec {
        match &self.kind {
            PotentialKind::Constant(c) => PotentialSpec::Constant { c: *c },
            PotentialKind::Trig { a0, cos, sin } => PotentialSpec::Trig {
                a0: *a0,
                cos: cos.clone(),
                sin: sin.clone(),
            },
            PotentialKind::Grid(s) => PotentialSpec::Grid {
                samples: s.clone(),
                v_min: Some(self.v_min),
                v_max: Some(self.v_max),
            },
        }
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn is_constant(&self) -> bool {
        match &self.kind {
            PotentialKind::Constant(_) => true,
            PotentialKind::Trig { .. } => false,
            PotentialKind::Grid(s) => s.iter().all(|&v| v == s[0]),
        }
    }

    /// Evaluate at a torus point (any real, reduced mod 1).
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Constant(c) => *c,
            PotentialKind::Trig { a0, cos, sin } => {
                let mut acc = *a0;
                for (k, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let arg = TAU * (k + 1) as f64 * x;
                    let (s, c) = arg.sin_cos();
                    acc += a * c + b * s;
                }
                acc
            }
            PotentialKind::Grid(s) => {
                let n = s.len();
                let t = (x - x.floor()) * n as f64;
                let i = (t.floor() as usize).min(n - 1);
                let frac = t - i as f64;
                let j = (i + 1) % n;
                s[i] + frac * (s[j] - s[i])
            }
        }
    }

    /// Derivative at a torus point. Exact for constant and trigonometric
    /// kinds; a central difference at grid scale for grid kind (not certified).
    pub fn grad(&self, x: f64) -> f64 {
        match &self.kind {
            PotentialKind::Constant(_) => 0.0,
            PotentialKind::Trig { cos, sin, .. } => {
                let mut acc = 0.0;
                for (k, (a, b)) in cos.iter().zip(sin).enumerate() {
                    let w = TAU * (k + 1) as f64;
                    let (s, c) = (w * x).sin_cos();
                    acc += w * (b * c - a * s);
                }
                acc
            }
            PotentialKind::Grid(s) => {
                let h = 1.0 / s.len() as f64;
                (self.eval(x + h) - self.eval(x - h)) / (2.0 * h)
            }
        }
    }

    /// Whether `grad` is the exact derivative.
    pub fn has_exact_gradient(&self) -> bool {
        !matches!(self.kind, PotentialKind::Grid(_))
    }

    /// `E[V] = ∫₀¹ V dx`; the periodic trapezoid rule for grid kind.
    pub fn mean(&self) -> f64 {
        match &self.kind {
            PotentialKind::Constant(c) => *c,
            PotentialKind::Trig { a0, .. } => *a0,
            PotentialKind::Grid(s) => s.iter().sum::<f64>() / s.len() as f64,
        }
    }

    /// Values at the nodes `i/n`.
    pub fn sample_nodes(&self, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.eval(i as f64 / n as f64)).collect()
    }

    pub fn realization(&self, omega: f64) -> Realization<'_> {
        Realization::new(self, omega)
    }

    /// `W(ω) = (1/m) Σ_j V(ω + j/m)`, the conditional expectation of `V`
    /// given the σ-algebra generated by `ω ↦ mω mod 1`.
    pub fn symmetrize(&self, m: usize) -> Result<Self, PotentialError> {
        if m == 0 {
            return Err(PotentialError::ZeroOrder);
        }
        if m == 1 {
            return Ok(self.clone());
        }
        match &self.kind {
            PotentialKind::Constant(_) => Ok(self.clone()),
            PotentialKind::Trig { a0, cos, sin } => {
                let keep = |k: usize, v: f64| if (k + 1) % m == 0 { v } else { 0.0 };
                let cos: Vec<f64> = cos.iter().enumerate().map(|(k, &v)| keep(k, v)).collect();
                let sin: Vec<f64> = sin.iter().enumerate().map(|(k, &v)| keep(k, v)).collect();
                let last = cos
                    .iter()
                    .zip(&sin)
                    .rposition(|(a, b)| *a != 0.0 || *b != 0.0)
                    .map_or(0, |p| p + 1);
                Self::trig(*a0, cos[..last].to_vec(), sin[..last].to_vec())
            }
            PotentialKind::Grid(s) => {
                let n = s.len();
                let w: Vec<f64> = (0..n)
                    .map(|i| {
                        let x = i as f64 / n as f64;
                        (0..m).map(|j| self.eval(x + j as f64 / m as f64)).sum::<f64>() / m as f64
                    })
                    .collect();
                let lo = w.iter().copied().fold(f64::INFINITY, f64::min).max(self.v_min);
                let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max).min(self.v_max);
                Self::grid_certified(w, lo, hi)
            }
        }
    }

    /// `c·V`.
    pub fn scaled(&self, c: f64) -> Result<Self, PotentialError> {
        self.affine(c, 0.0)
    }

    /// `V + c`.
    pub fn shifted(&self, c: f64) -> Result<Self, PotentialError> {
        self.affine(1.0, c)
    }

    /// `scale·V + offset`.
    pub fn affine(&self, scale: f64, offset: f64) -> Result<Self, PotentialError> {
        if scale < 0.0 {
            return Err(PotentialError::Negative(scale));
        }
        match &self.kind {
            PotentialKind::Constant(c) => Self::constant(scale * c + offset),
            PotentialKind::Trig { a0, cos, sin } => Self::trig(
                scale * a0 + offset,
                cos.iter().map(|v| scale * v).collect(),
                sin.iter().map(|v| scale * v).collect(),
            ),
            PotentialKind::Grid(s) => Self::grid_certified(
                s.iter().map(|v| scale * v + offset).collect(),
                scale * self.v_min + offset,
                scale * self.v_max + offset,
            ),
        }
    }

    /// `Σ λ_i V_i` for trigonometric/constant potentials, or on an `n`-node
    /// grid when any summand is a grid potential.
    pub fn combination(weights: &[f64], parts: &[TorusPotential], n: usize) -> Result<Self, PotentialError> {
        let any_grid = parts.iter().any(|p| matches!(p.kind, PotentialKind::Grid(_)));
        if any_grid {
            let mut acc = vec![0.0; n];
            for (w, p) in weights.iter().zip(parts) {
                for (a, v) in acc.iter_mut().zip(p.sample_nodes(n)) {
                    *a += w * v;
                }
            }
            return Self::grid(acc);
        }
        let modes = parts
            .iter()
            .map(|p| match &p.kind {
                PotentialKind::Trig { cos, .. } => cos.len(),
                _ => 0,
            })
            .max()
            .unwrap_or(0);
        let (mut a0, mut cos, mut sin) = (0.0, vec![0.0; modes], vec![0.0; modes]);
        for (w, p) in weights.iter().zip(parts) {
            match &p.kind {
                PotentialKind::Constant(c) => a0 += w * c,
                PotentialKind::Trig { a0: b, cos: pc, sin: ps } => {
                    a0 += w * b;
                    for k in 0..pc.len() {
                        cos[k] += w * pc[k];
                        sin[k] += w * ps[k];
                    }
                }
                PotentialKind::Grid(_) => unreachable!(),
            }
        }
        Self::trig(a0, cos, sin)
    }
}

/// The function `x ↦ V(ω + x mod 1)` on the real line.
#[derive(Debug, Clone, Copy)]
pub struct Realization<'a> {
    base: &'a TorusPotential,
    omega: f64,
}

impl<'a> Realization<'a> {
    pub fn new(base: &'a TorusPotential, omega: f64) -> Self {
        Self {
            base,
            omega: omega.rem_euclid(1.0),
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.base.eval(self.omega + x)
    }

    pub fn grad(&self, x: f64) -> f64 {
        self.base.grad(self.omega + x)
    }
}

impl PotentialField<1> for Realization<'_> {
    #[inline]
    fn value(&self, x: &[f64; 1]) -> f64 {
        self.eval(x[0])
    }
}

pub fn eval_realization(v: &TorusPotential, omega: f64, x: f64) -> f64 {
    Realization::new(v, omega).eval(x)
}

pub fn grad_realization(v: &TorusPotential, omega: f64, x: f64) -> f64 {
    Realization::new(v, omega).grad(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cos1() -> TorusPotential {
        TorusPotential::trig(2.0, vec![1.0], vec![]).unwrap()
    }

    #[test]
    fn eval_realization_examples() {
        assert!((eval_realization(&cos1(), 0.25, 0.25) - 1.0).abs() < 1e-15);
        let c = TorusPotential::constant(3.5).unwrap();
        assert_eq!(eval_realization(&c, 0.77, -12.3), 3.5);
        let g = TorusPotential::grid(vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        // between nodes 1/4 (3.0) and 2/4 (2.0), 30% of the way
        let x = 0.25 + 0.3 * 0.25;
        assert!((eval_realization(&g, 0.0, x) - (3.0 - 0.3)).abs() < 1e-12);
        // wrap-around segment from node 3/4 (0.0) to node 0 (1.0)
        assert!((g.eval(0.875) - 0.5).abs() < 1e-12);
        assert!((g.eval(-0.125) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(TorusPotential::constant(3.0).unwrap().mean(), 3.0);
        assert_eq!(cos1().mean(), 2.0);
        assert_eq!(TorusPotential::grid(vec![1.0, 2.0, 3.0, 2.0]).unwrap().mean(), 2.0);
    }

    #[test]
    fn grid_mean_matches_fine_quadrature_of_interpolant() {
        let g = TorusPotential::grid(vec![1.0, 2.5, 3.0, 0.5, 2.0]).unwrap();
        let m = 100_000;
        let q: f64 = (0..m).map(|i| g.eval((i as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
        assert!((q - g.mean()).abs() < 1e-9);
    }

    #[test]
    fn symmetrize_examples() {
        let s = cos1().symmetrize(2).unwrap();
        assert!(s.is_constant());
        assert_eq!(s.mean(), 2.0);
        assert_eq!(cos1().symmetrize(1).unwrap(), cos1());
        let v = TorusPotential::trig(2.0, vec![0.0, 1.0], vec![]).unwrap();
        let s = v.symmetrize(2).unwrap();
        for i in 0..50 {
            let x = i as f64 / 50.0;
            assert!((s.eval(x) - v.eval(x)).abs() < 1e-12);
        }
        assert_eq!(cos1().symmetrize(0), Err(PotentialError::ZeroOrder));
    }

    #[test]
    fn symmetrize_trig_matches_direct_average() {
        let v = TorusPotential::trig(3.0, vec![0.4, -0.3, 0.2, 0.1], vec![0.1, 0.25, -0.2, 0.05]).unwrap();
        for m in 1..=5 {
            let w = v.symmetrize(m).unwrap();
            assert!(w.v_min() >= v.v_min() && w.v_max() <= v.v_max());
            assert!((w.mean() - v.mean()).abs() < 1e-12);
            for i in 0..37 {
                let x = i as f64 / 37.0;
                let direct: f64 = (0..m).map(|j| v.eval(x + j as f64 / m as f64)).sum::<f64>() / m as f64;
                assert!((w.eval(x) - direct).abs() < 1e-12, "m={m} x={x}");
                // (1/m)-periodic
                assert!((w.eval(x + 1.0 / m as f64) - w.eval(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetrize_composes_for_coprime_orders() {
        let v = TorusPotential::trig(3.0, vec![0.4, -0.3, 0.2, 0.1, 0.2, 0.1], vec![0.1, 0.25, -0.2, 0.05, 0.0, 0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<f64> = (0..24).map(|_| rng.random_range(0.5..3.0)).collect();
        let g = TorusPotential::grid(samples).unwrap();
        for (m, k) in [(2, 3), (3, 4), (3, 2)] {
            for p in [&v, &g] {
                let a = p.symmetrize(m).unwrap().symmetrize(k).unwrap();
                let b = p.symmetrize(m * k).unwrap();
                for i in 0..24 {
                    let x = i as f64 / 24.0;
                    assert!((a.eval(x) - b.eval(x)).abs() < 1e-12);
                }
                assert!((b.mean() - p.mean()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grad_examples() {
        assert!(grad_realization(&cos1(), 0.0, 0.0).abs() < 1e-12);
        assert!((grad_realization(&cos1(), 0.0, 0.25) + TAU).abs() < 1e-12);
        let g = TorusPotential::grid(vec![1.0, 3.0, 2.0, 0.0]).unwrap();
        // central difference at grid scale across node 1/4: (2 - 1) / (2/4)
        assert!((g.grad(0.25) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trig_gradient_matches_finite_differences() {
        let v = TorusPotential::trig(2.0, vec![0.9, 0.0], vec![0.0, 0.3]).unwrap();
        for i in 0..20 {
            let x = i as f64 * 0.049;
            let h = 1e-5;
            let fd = (v.eval(x + h) - v.eval(x - h)) / (2.0 * h);
            assert!((fd - v.grad(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn shift_covariance() {
        let v = TorusPotential::trig(2.0, vec![0.9, 0.0, 0.2], vec![0.1, 0.3, -0.1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let omega: f64 = rng.random();
            let x: f64 = rng.random_range(-5.0..5.0);
            let s: f64 = rng.random_range(-5.0..5.0);
            let lhs = eval_realization(&v, omega, x + s);
            let rhs = eval_realization(&v, (omega + s).rem_euclid(1.0), x);
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn bounds_hold_on_fine_grid() {
        let corpus = [
            TorusPotential::constant(1.5).unwrap(),
            cos1(),
            TorusPotential::trig(2.0, vec![0.9, 0.0], vec![0.0, 0.3]).unwrap(),
            TorusPotential::grid(vec![0.6, 1.4, 2.2, 1.0, 0.9]).unwrap(),
        ];
        for v in &corpus {
            for i in 0..10_000 {
                let y = v.eval(i as f64 / 10_000.0);
                assert!(y >= v.v_min() - 1e-12 && y <= v.v_max() + 1e-12);
            }
            assert!(v.v_min() >= 0.0);
            assert!((v.eval(0.3) - v.eval(1.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_invalid_potentials() {
        assert!(matches!(TorusPotential::constant(-1.0), Err(PotentialError::Negative(_))));
        assert!(matches!(
            TorusPotential::trig(0.5, vec![1.0], vec![]),
            Err(PotentialError::Negative(_))
        ));
        assert!(matches!(
            TorusPotential::grid_certified(vec![1.0, 5.0], 0.0, 2.0),
            Err(PotentialError::OutsideBounds { index: 1, .. })
        ));
        assert_eq!(TorusPotential::grid(vec![1.0]), Err(PotentialError::TooFewSamples(1)));
    }

    #[test]
    fn spec_json_roundtrip() {
        let json = r#"[{"kind":"constant","c":2},{"kind":"trig","a0":2,"cos":[1.0]},{"kind":"grid","samples":[1,2,3,2]}]"#;
        let specs: Vec<PotentialSpec> = serde_json::from_str(json).unwrap();
        let pots: Vec<_> = specs.iter().map(|s| TorusPotential::from_spec(s).unwrap()).collect();
        assert_eq!(pots[0].mean(), 2.0);
        assert_eq!(pots[1], cos1());
        assert_eq!(pots[2].v_max(), 3.0);
        let back = TorusPotential::from_spec(&pots[1].to_spec()).unwrap();
        assert_eq!(back, pots[1]);
    }
}
