//! Poisson line process, stripe potentials and the cheap path.
//!
//! A line is stored as `(r, θ)` with `θ ∈ (0, π]` and is the set
//! `{p : p·n(θ) = r}` for the unit normal `n(θ) = (−sin θ, cos θ)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mc::PotentialField;
use crate::special::lambda2;

#[derive(Debug, Error, PartialEq)]
pub enum LineError {
    #[error("window half-width must be positive, got {0}")]
    BadWindow(f64),
    #[error("intensity must be nonnegative and finite, got {0}")]
    BadIntensity(f64),
    #[error("sample carries no marks")]
    MissingMarks,
    #[error("thinning level {kappa} exceeds the mark range {kappa_max}")]
    ThinningAboveRange { kappa: f64, kappa_max: f64 },
    #[error("no line with angle in [π − φ, π) crosses the positive e₂-axis")]
    NoQualifyingLine,
    #[error("angle bound φ must lie in (0, π/2), got {0}")]
    BadAngle(f64),
    #[error("D must be positive, got {0}")]
    NonPositiveD(f64),
    #[error("query at distance {distance} needs window ≥ {needed}, have {window}")]
    OutsideWindow { distance: f64, needed: f64, window: f64 },
    #[error("stripe radius must be positive and c, M nonnegative")]
    BadStripe,
    #[error("malformed CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineRep {
    pub r: f64,
    pub theta: f64,
}

impl LineRep {
    pub fn normal(&self) -> [f64; 2] {
        [-self.theta.sin(), self.theta.cos()]
    }

    pub fn distance(&self, x: &[f64; 2]) -> f64 {
        let n = self.normal();
        (x[0] * n[0] + x[1] * n[1] - self.r).abs()
    }

    /// Height `t` where the line meets the e₂-axis, if it does.
    pub fn e2_intercept(&self) -> Option<f64> {
        let c = self.theta.cos();
        (c != 0.0).then(|| self.r / c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineProcessSample {
    pub lines: Vec<LineRep>,
    pub window_l: f64,
    pub kappa: f64,
    pub marks: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripeParams {
    pub c: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "M")]
    pub m: f64,
}

impl StripeParams {
    pub fn new(c: f64, r: f64, m: f64) -> Result<Self, LineError> {
        if !(r > 0.0 && c >= 0.0 && m >= 0.0) {
            return Err(LineError::BadStripe);
        }
        Ok(Self { c, r, m })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheapPath {
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    pub theta_gamma: f64,
    pub u: f64,
}

impl CheapPath {
    pub fn segment_length(&self) -> f64 {
        ((self.p2[0] - self.p1[0]).powi(2) + (self.p2[1] - self.p1[1]).powi(2)).sqrt()
    }

    /// `u / cos(π − θ_γ)`.
    pub fn predicted_length(&self) -> f64 {
        self.u / (PI - self.theta_gamma).cos()
    }
}

fn check_window(l: f64) -> Result<(), LineError> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(LineError::BadWindow(l));
    }
    Ok(())
}

fn draw_lines(rng: &mut ChaCha8Rng, mean: f64, l: f64) -> Vec<LineRep> {
    if mean <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    (0..count)
        .map(|_| {
            let r = l * (2.0 * rng.random::<f64>() - 1.0);
            // (0, π]
            let theta = PI * (1.0 - rng.random::<f64>());
            LineRep { r, theta }
        })
        .collect()
}

/// Lines of intensity `κ` with `|r| ≤ L`.
pub fn sample(kappa: f64, window_l: f64, seed: u64) -> Result<LineProcessSample, LineError> {
    check_window(window_l)?;
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(LineError::BadIntensity(kappa));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(LineProcessSample {
        lines: draw_lines(&mut rng, kappa * 2.0 * window_l, window_l),
        window_l,
        kappa,
        marks: None,
    })
}

/// Marked lines of intensity `κ_max` with marks uniform on `[0, κ_max]`.
pub fn sample_extended(kappa_max: f64, window_l: f64, seed: u64) -> Result<LineProcessSample, LineError> {
    check_window(window_l)?;
    if !(kappa_max > 0.0 && kappa_max.is_finite()) {
        return Err(LineError::BadIntensity(kappa_max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = draw_lines(&mut rng, kappa_max * 2.0 * window_l, window_l);
    let marks = (0..lines.len()).map(|_| kappa_max * rng.random::<f64>()).collect();
    Ok(LineProcessSample {
        lines,
        window_l,
        kappa: kappa_max,
        marks: Some(marks),
    })
}

/// Keeps the lines with mark below `κ`.
pub fn thin(sample: &LineProcessSample, kappa: f64) -> Result<LineProcessSample, LineError> {
    let marks = sample.marks.as_ref().ok_or(LineError::MissingMarks)?;
    if kappa > sample.kappa {
        return Err(LineError::ThinningAboveRange {
            kappa,
            kappa_max: sample.kappa,
        });
    }
    if !(kappa >= 0.0) {
        return Err(LineError::BadIntensity(kappa));
    }
    let lines = sample
        .lines
        .iter()
        .zip(marks)
        .filter(|(_, s)| **s < kappa)
        .map(|(l, _)| *l)
        .collect();
    Ok(LineProcessSample {
        lines,
        window_l: sample.window_l,
        kappa,
        marks: None,
    })
}

pub fn nearest_line_distance(x: &[f64; 2], sample: &LineProcessSample) -> f64 {
    sample
        .lines
        .iter()
        .map(|l| l.distance(x))
        .fold(f64::INFINITY, f64::min)
}

/// `c` within distance `R` of some line, `c + M` elsewhere.
pub fn eval_stripe(x: &[f64; 2], sample: &LineProcessSample, params: &StripeParams) -> f64 {
    if sample.lines.iter().any(|l| l.distance(x) < params.r) {
        params.c
    } else {
        params.c + params.m
    }
}

/// As [`eval_stripe`], refusing queries closer than `10R` to the window edge.
pub fn eval_stripe_checked(x: &[f64; 2], sample: &LineProcessSample, params: &StripeParams) -> Result<f64, LineError> {
    let distance = x[0].hypot(x[1]);
    let needed = distance + 10.0 * params.r;
    if needed > sample.window_l {
        return Err(LineError::OutsideWindow {
            distance,
            needed,
            window: sample.window_l,
        });
    }
    Ok(eval_stripe(x, sample, params))
}

#[derive(Debug, Clone)]
enum Cell {
    Inside,
    Outside,
    Mixed(Vec<u32>),
}

/// Stripe potential with a cell list over `[−E, E]²`, for repeated queries
/// along Monte Carlo paths. Queries outside the grid fall back to a scan.
#[derive(Debug, Clone)]
pub struct StripeField {
    params: StripeParams,
    lines: Vec<LineRep>,
    extent: f64,
    h: f64,
    cells_per_side: usize,
    cells: Vec<Cell>,
}

impl StripeField {
    pub fn new(sample: &LineProcessSample, params: StripeParams, extent: f64) -> Self {
        let h = (params.r / 4.0).max(extent / 512.0);
        let cells_per_side = ((2.0 * extent / h).ceil() as usize).max(1);
        let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
        let mut cells = Vec::with_capacity(cells_per_side * cells_per_side);
        for j in 0..cells_per_side {
            for i in 0..cells_per_side {
                let center = [-extent + (i as f64 + 0.5) * h, -extent + (j as f64 + 0.5) * h];
                let mut near = Vec::new();
                let mut inside = false;
                for (k, l) in sample.lines.iter().enumerate() {
                    let d = l.distance(&center);
                    if d + half_diag < params.r {
                        inside = true;
                        break;
                    }
                    if d - half_diag < params.r {
                        near.push(k as u32);
                    }
                }
                cells.push(if inside {
                    Cell::Inside
                } else if near.is_empty() {
                    Cell::Outside
                } else {
                    Cell::Mixed(near)
                });
            }
        }
        Self {
            params,
            lines: sample.lines.clone(),
            extent,
            h,
            cells_per_side,
            cells,
        }
    }

    pub fn params(&self) -> &StripeParams {
        &self.params
    }

    pub fn eval(&self, x: &[f64; 2]) -> f64 {
        let fi = (x[0] + self.extent) / self.h;
        let fj = (x[1] + self.extent) / self.h;
        let n = self.cells_per_side as f64;
        let inside = if fi >= 0.0 && fj >= 0.0 && fi < n && fj < n {
            match &self.cells[fj as usize * self.cells_per_side + fi as usize] {
                Cell::Inside => true,
                Cell::Outside => false,
                Cell::Mixed(ids) => ids.iter().any(|&k| self.lines[k as usize].distance(x) < self.params.r),
            }
        } else {
            self.lines.iter().any(|l| l.distance(x) < self.params.r)
        };
        if inside {
            self.params.c
        } else {
            self.params.c + self.params.m
        }
    }
}

impl PotentialField<2> for StripeField {
    fn value(&self, x: &[f64; 2]) -> f64 {
        self.eval(x)
    }
}

/// Starting upward from the origin, the first line with angle in
/// `[π − φ, π)` met on the positive e₂-axis, followed to the vertical
/// line through `u·e₁`.
pub fn construct_cheap_path(sample: &LineProcessSample, u: f64, phi: f64) -> Result<CheapPath, LineError> {
    if !(phi > 0.0 && phi < PI / 2.0) {
        return Err(LineError::BadAngle(phi));
    }
    let best = sample
        .lines
        .iter()
        .filter(|l| l.theta >= PI - phi && l.theta < PI)
        .filter_map(|l| l.e2_intercept().filter(|t| *t > 0.0).map(|t| (t, *l)))
        .min_by(|a, b| a.0.total_cmp(&b.0));
    let (t, line) = best.ok_or(LineError::NoQualifyingLine)?;
    let p1 = [0.0, t];
    // p·n = r at x = u
    let s = (line.r + u * line.theta.sin()) / line.theta.cos();
    Ok(CheapPath {
        p1,
        p2: [u, s],
        theta_gamma: line.theta,
        u,
    })
}

/// `4√λ₂ / D + 1`.
pub fn r0_for(d: f64) -> Result<f64, LineError> {
    if !(d > 0.0) {
        return Err(LineError::NonPositiveD(d));
    }
    Ok(4.0 * lambda2().sqrt() / d + 1.0)
}

/// CSV with columns `r,theta` or `r,theta,s`.
pub fn to_csv(sample: &LineProcessSample) -> String {
    let mut out = String::new();
    match &sample.marks {
        Some(marks) => {
            out.push_str("r,theta,s\n");
            for (l, s) in sample.lines.iter().zip(marks) {
                let _ = writeln!(out, "{},{},{}", l.r, l.theta, s);
            }
        }
        None => {
            out.push_str("r,theta\n");
            for l in &sample.lines {
                let _ = writeln!(out, "{},{}", l.r, l.theta);
            }
        }
    }
    out
}

/// Reads the output of [`to_csv`]; window and intensity are not stored in
/// the file and must be supplied.
pub fn from_csv(text: &str, window_l: f64, kappa: f64) -> Result<LineProcessSample, LineError> {
    let mut rows = text.lines();
    let header = rows.next().unwrap_or("");
    let marked = match header.trim() {
        "r,theta" => false,
        "r,theta,s" => true,
        other => {
            return Err(LineError::Csv {
                line: 1,
                reason: format!("unexpected header {other:?}"),
            })
        }
    };
    let mut lines = Vec::new();
    let mut marks = Vec::new();
    for (i, row) in rows.enumerate().filter(|(_, r)| !r.trim().is_empty()) {
        let fields: Result<Vec<f64>, _> = row.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let fields = fields.map_err(|e| LineError::Csv {
            line: i + 2,
            reason: e.to_string(),
        })?;
        if fields.len() != if marked { 3 } else { 2 } {
            return Err(LineError::Csv {
                line: i + 2,
                reason: "wrong number of fields".into(),
            });
        }
        lines.push(LineRep {
            r: fields[0],
            theta: fields[1],
        });
        if marked {
            marks.push(fields[2]);
        }
    }
    Ok(LineProcessSample {
        lines,
        window_l,
        kappa,
        marks: marked.then_some(marks),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(r: f64, theta: f64) -> LineProcessSample {
        LineProcessSample {
            lines: vec![LineRep { r, theta }],
            window_l: 100.0,
            kappa: 1.0,
            marks: None,
        }
    }

    #[test]
    fn stripe_examples() {
        let p = StripeParams::new(1.0, 1.0, 10.0).unwrap();
        let empty = sample(0.0, 10.0, 1).unwrap();
        assert!(empty.lines.is_empty());
        assert_eq!(eval_stripe(&[0.3, 0.2], &empty, &p), 11.0);
        // vertical line through the origin
        let s = single(0.0, PI / 2.0);
        assert!(s.lines[0].distance(&[0.0, 5.0]).abs() < 1e-15);
        assert_eq!(eval_stripe(&[0.0, 5.0], &s, &p), 1.0);
        assert_eq!(eval_stripe(&[1.5, 5.0], &s, &p), 11.0);
        // horizontal line at height 2: n(π) = (0, −1), r = −2
        let h = single(-2.0, PI);
        assert!(h.lines[0].distance(&[7.0, 2.0]).abs() < 1e-12);
    }

    #[test]
    fn checked_queries_respect_margin() {
        let p = StripeParams::new(1.0, 1.0, 1.0).unwrap();
        let s = sample(1.0, 20.0, 3).unwrap();
        assert!(eval_stripe_checked(&[5.0, 0.0], &s, &p).is_ok());
        assert!(matches!(
            eval_stripe_checked(&[11.0, 0.0], &s, &p),
            Err(LineError::OutsideWindow { .. })
        ));
    }

    #[test]
    fn cell_list_matches_scan() {
        let p = StripeParams::new(1.0, 2.0, 3.0).unwrap();
        let s = sample(0.3, 60.0, 11).unwrap();
        let field = StripeField::new(&s, p, 30.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            let x = [rng.random_range(-35.0..35.0), rng.random_range(-35.0..35.0)];
            assert_eq!(field.eval(&x), eval_stripe(&x, &s, &p));
        }
    }

    #[test]
    fn cheap_path_geometry() {
        let s = single(-(0.5f64.sqrt()), 3.0 * PI / 4.0);
        let path = construct_cheap_path(&s, 4.0, PI / 3.0).unwrap();
        assert!(path.p1[0] == 0.0 && (path.p1[1] - 1.0).abs() < 1e-12);
        assert!((path.p2[0] - 4.0).abs() < 1e-15 && (path.p2[1] + 3.0).abs() < 1e-12);
        assert!((path.segment_length() - 4.0 * 2.0f64.sqrt()).abs() < 1e-12);
        assert!((path.segment_length() - path.predicted_length()).abs() < 1e-12);
        assert_eq!(
            construct_cheap_path(&sample(0.0, 5.0, 0).unwrap(), 4.0, 0.5),
            Err(LineError::NoQualifyingLine)
        );
        // angle outside the cone
        assert_eq!(
            construct_cheap_path(&single(-0.5, PI / 2.0 + 0.1), 4.0, 0.5),
            Err(LineError::NoQualifyingLine)
        );
        // lowest intercept wins
        let two = LineProcessSample {
            lines: vec![
                LineRep { r: -3.0, theta: 3.0 },
                LineRep { r: -1.0, theta: 3.0 },
            ],
            ..single(0.0, 1.0)
        };
        let path = construct_cheap_path(&two, 2.0, 0.5).unwrap();
        assert!((path.p1[1] + 1.0 / 3.0f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn r0_examples() {
        let l2 = lambda2();
        assert!((r0_for(4.0 * l2.sqrt()).unwrap() - 2.0).abs() < 1e-14);
        assert!((r0_for(1e12).unwrap() - 1.0).abs() < 1e-10);
        assert!((r0_for(0.5).unwrap() - (1.0 + 8.0 * l2.sqrt())).abs() < 1e-12);
        assert_eq!(r0_for(0.0), Err(LineError::NonPositiveD(0.0)));
    }

    #[test]
    fn thinning_is_nested_and_exact() {
        let s = sample_extended(1.0, 5.0, 9).unwrap();
        assert!(thin(&s, 0.0).unwrap().lines.is_empty());
        assert_eq!(thin(&s, 1.0).unwrap().lines.len(), s.lines.len());
        let a = thin(&s, 0.3).unwrap();
        let b = thin(&s, 0.6).unwrap();
        assert!(a.lines.iter().all(|l| b.lines.contains(l)));
        assert_eq!(thin(&sample(1.0, 5.0, 1).unwrap(), 0.5), Err(LineError::MissingMarks));
        assert!(matches!(thin(&s, 2.0), Err(LineError::ThinningAboveRange { .. })));
    }

    #[test]
    fn sample_respects_window_and_angles() {
        let s = sample(2.0, 7.0, 4).unwrap();
        assert!(!s.lines.is_empty());
        assert!(s.lines.iter().all(|l| l.r.abs() <= 7.0 && l.theta > 0.0 && l.theta <= PI));
        assert_eq!(s, sample(2.0, 7.0, 4).unwrap());
        assert!(sample(1.0, 0.0, 1).is_err());
        assert!(sample(-1.0, 1.0, 1).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let s = sample_extended(0.5, 4.0, 2).unwrap();
        let back = from_csv(&to_csv(&s), 4.0, 0.5).unwrap();
        assert_eq!(back, s);
        assert!(from_csv("x,y\n", 1.0, 1.0).is_err());
    }
}
