use std::f64::consts::PI;

use lyapunov_core::lines::{
    construct_cheap_path, nearest_line_distance, sample, sample_extended, thin, LineError, LineProcessSample, LineRep,
};
use lyapunov_core::rng::stream_key;
use lyapunov_core::stats::mean_and_stderr;
use proptest::prelude::*;

fn variance(xs: &[f64]) -> f64 {
    let (m, _) = mean_and_stderr(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// One-sample Kolmogorov–Smirnov distance against `cdf`.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// KS critical value at level 0.001.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

#[test]
fn counts_are_poisson_with_mean_two_kappa_l() {
    let (kappa, l) = (0.4, 25.0);
    let counts: Vec<f64> = (0..4000)
        .map(|i| sample(kappa, l, stream_key(3, i)).unwrap().lines.len() as f64)
        .collect();
    let (m, se) = mean_and_stderr(&counts);
    let expected = 2.0 * kappa * l;
    assert!((m - expected).abs() < 4.0 * se, "{m} vs {expected}");
    // dispersion index of a Poisson law is 1
    assert!((variance(&counts) / m - 1.0).abs() < 0.1);
}

#[test]
fn angles_are_uniform_on_zero_pi() {
    let thetas: Vec<f64> = (0..200)
        .flat_map(|i| sample(1.0, 20.0, stream_key(5, i)).unwrap().lines)
        .map(|l| l.theta)
        .collect();
    assert!(thetas.iter().all(|&t| t > 0.0 && t <= PI));
    let d = ks_distance(thetas.clone(), |t| t / PI);
    assert!(d < ks_critical(thetas.len()), "KS {d}");
}

#[test]
fn nearest_line_distance_is_exponential_everywhere() {
    // P(no line within r of x) = e^{−2κr} at every point
    let (kappa, l) = (0.3, 60.0);
    for x in [[0.0, 0.0], [12.0, -9.0], [-5.0, 14.0]] {
        let d: Vec<f64> = (0..3000)
            .map(|i| nearest_line_distance(&x, &sample(kappa, l, stream_key(7, i)).unwrap()))
            .collect();
        let ks = ks_distance(d.clone(), |r| 1.0 - (-2.0 * kappa * r).exp());
        assert!(ks < ks_critical(d.len()), "x={x:?}: KS {ks}");
    }
}

fn crossings(s: &LineProcessSample, a: [f64; 2], b: [f64; 2]) -> usize {
    s.lines
        .iter()
        .filter(|line| {
            let n = line.normal();
            let sa = a[0] * n[0] + a[1] * n[1] - line.r;
            let sb = b[0] * n[0] + b[1] * n[1] - line.r;
            sa * sb < 0.0
        })
        .count()
}

#[test]
fn segment_crossings_do_not_depend_on_direction() {
    // mean number of lines crossing a segment of length ℓ is 2κℓ/π
    let (kappa, len) = (0.5, 6.0);
    let expected = 2.0 * kappa * len / PI;
    for phi in [0.0, PI / 3.0, 1.2 * PI] {
        let b = [len * phi.cos(), len * phi.sin()];
        let counts: Vec<f64> = (0..6000)
            .map(|i| crossings(&sample(kappa, 20.0, stream_key(11, i)).unwrap(), [0.0, 0.0], b) as f64)
            .collect();
        let (m, se) = mean_and_stderr(&counts);
        assert!((m - expected).abs() < 4.0 * se, "φ={phi}: {m} vs {expected}");
    }
}

#[test]
fn thinned_counts_match_direct_intensity() {
    let (kappa, kappa_max, l) = (0.3, 0.9, 15.0);
    let counts: Vec<f64> = (0..4000)
        .map(|i| {
            let ext = sample_extended(kappa_max, l, stream_key(13, i)).unwrap();
            thin(&ext, kappa).unwrap().lines.len() as f64
        })
        .collect();
    let (m, se) = mean_and_stderr(&counts);
    assert!((m - 2.0 * kappa * l).abs() < 4.0 * se);
    assert!((variance(&counts) / m - 1.0).abs() < 0.1);
}

#[test]
fn thinning_rejects_bad_requests() {
    let plain = sample(1.0, 5.0, 1).unwrap();
    assert!(matches!(thin(&plain, 0.5), Err(LineError::MissingMarks)));
    let ext = sample_extended(1.0, 5.0, 1).unwrap();
    assert!(matches!(thin(&ext, 1.5), Err(LineError::ThinningAboveRange { .. })));
    assert_eq!(thin(&ext, 1.0).unwrap().lines.len(), ext.lines.len());
    assert!(thin(&ext, 0.0).unwrap().lines.is_empty());
}

proptest! {
    #[test]
    fn cheap_path_length_is_u_over_cos(t in 0.01f64..10.0, alpha in 0.001f64..0.5, u in 0.5f64..50.0) {
        // line through (0, t) at angle θ = π − α
        let theta = PI - alpha;
        let line = LineRep { r: t * theta.cos(), theta };
        let s = LineProcessSample { lines: vec![line], window_l: 100.0, kappa: 1.0, marks: None };
        let path = construct_cheap_path(&s, u, alpha + 1e-9).unwrap();
        prop_assert!((path.p1[1] - t).abs() < 1e-9 * (1.0 + t));
        let len = ((path.p2[0] - path.p1[0]).powi(2) + (path.p2[1] - path.p1[1]).powi(2)).sqrt();
        prop_assert!((len - u / alpha.cos()).abs() < 1e-9 * len);
        prop_assert!(line.distance(&path.p2) < 1e-9 * (1.0 + len));
    }

    #[test]
    fn lines_outside_the_cone_are_ignored(t in 0.01f64..10.0, alpha in 0.2f64..1.5, u in 0.5f64..50.0) {
        let theta = PI - alpha;
        let line = LineRep { r: t * theta.cos(), theta };
        let s = LineProcessSample { lines: vec![line], window_l: 100.0, kappa: 1.0, marks: None };
        prop_assert!(matches!(construct_cheap_path(&s, u, alpha * 0.9), Err(LineError::NoQualifyingLine)));
    }
}
