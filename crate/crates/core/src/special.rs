//! Bessel functions needed by the line-process geometry.

/// Bessel function `J₀` by its power series. Accurate to ~1e-15 for
/// `|x| ≤ 8`, which covers the first zero.
pub fn bessel_j0(x: f64) -> f64 {
    let q = -(x * x) / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / ((k * k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// First positive zero `j₀,₁` of `J₀`, by bisection on `[2, 3]`.
pub fn j0_first_zero() -> f64 {
    let (mut lo, mut hi) = (2.0f64, 3.0f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if bessel_j0(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Principal Dirichlet eigenvalue of `−½Δ` on the unit disk, `j₀,₁²/2`.
pub fn lambda2() -> f64 {
    let j = j0_first_zero();
    j * j / 2.0
}

/// Modified Bessel function `K₀(z) = ∫₀^∞ exp(−z cosh t) dt`, `z > 0`.
pub fn bessel_k0(z: f64) -> f64 {
    assert!(z > 0.0);
    // the integrand is below 1e-300 once z cosh t > 700
    let t_max = (700.0 / z).max(1.0).acosh() + 1.0;
    let n = 20_000;
    let h = t_max / n as f64;
    // Simpson
    let f = |t: f64| (-z * t.cosh()).exp();
    let mut s = f(0.0) + f(t_max);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

/// Exact planar travel cost for `V ≡ c`: the Laplace transform of the
/// hitting time of the unit disk at distance `u` is `K₀(√(2c)·u)/K₀(√(2c))`.
pub fn planar_constant_travel_cost(c: f64, u: f64) -> f64 {
    let k = (2.0 * c).sqrt();
    bessel_k0(k).ln() - bessel_k0(k * u).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_values() {
        assert_eq!(bessel_j0(0.0), 1.0);
        // tabulated values
        assert!((bessel_j0(1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j0(5.0) + 0.177_596_771_314_338_3).abs() < 1e-14);
    }

    #[test]
    fn first_zero_and_residual() {
        let j = j0_first_zero();
        assert!((j - 2.404_825_557_695_772_4).abs() < 1e-12);
        assert!(bessel_j0(j).abs() < 1e-9);
        assert!((2.0 * lambda2() - j * j).abs() < 1e-15);
    }

    #[test]
    fn k0_values() {
        assert!((bessel_k0(1.0) - 0.421_024_438_240_708_3).abs() < 1e-12);
        assert!((bessel_k0(0.1) - 2.427_069_024_702_017).abs() < 1e-10);
        assert!((bessel_k0(5.0) - 0.003_691_098_334_042_594).abs() < 1e-14);
    }

    #[test]
    fn planar_cost_rate() {
        let c = 2.0;
        let slope = planar_constant_travel_cost(c, 40.0) - planar_constant_travel_cost(c, 39.0);
        assert!((slope - 2.0).abs() < 0.02);
        assert!(planar_constant_travel_cost(c, 1.0).abs() < 1e-12);
    }
}
