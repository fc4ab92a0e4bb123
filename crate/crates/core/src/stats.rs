//! Small numerical helpers shared by the estimators.

/// Pairwise summation in fixed index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Least-squares line through `(x_i, y_i)`.
///
/// With standard errors `sigma_i` all positive this is the weighted fit with
/// weights `1/σ²` and the slope error is the known-variance one. Otherwise
/// an ordinary fit with the residual-based error.
pub fn fit_line(x: &[f64], y: &[f64], sigma: Option<&[f64]>) -> LineFit {
    assert!(x.len() == y.len() && x.len() >= 2);
    let weighted = sigma.filter(|s| s.iter().all(|v| *v > 0.0 && v.is_finite()));
    let w: Vec<f64> = match weighted {
        Some(s) => s.iter().map(|v| 1.0 / (v * v)).collect(),
        None => vec![1.0; x.len()],
    };
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - xm) * (a - xm)).sum();
    let sxy: f64 = x.iter().zip(y).zip(&w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let slope_stderr = if weighted.is_some() {
        (1.0 / sxx).sqrt()
    } else if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, c)| (c - intercept - slope * a).powi(2))
            .sum();
        (rss / (x.len() as f64 - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    LineFit {
        slope,
        intercept,
        slope_stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
    }

    #[test]
    fn exact_line_is_recovered() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let fit = fit_line(&x, &y, Some(&[0.1, 0.2, 0.3, 0.4]));
        assert!((fit.slope - 3.0).abs() < 1e-12 && (fit.intercept + 1.0).abs() < 1e-12);
        let ols = fit_line(&x, &y, None);
        assert!(ols.slope_stderr.abs() < 1e-12);
        // zero errors fall back to the ordinary fit
        let zero = fit_line(&x, &y, Some(&[0.0; 4]));
        assert_eq!(zero.slope, ols.slope);
    }

    #[test]
    fn known_variance_slope_error() {
        let x = [0.0, 1.0, 2.0];
        let fit = fit_line(&x, &[0.0, 1.0, 2.0], Some(&[1.0, 1.0, 1.0]));
        // Σ(x − x̄)² = 2
        assert!((fit.slope_stderr - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
