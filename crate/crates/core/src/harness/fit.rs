use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Least-squares fit of `log error = intercept + slope · log N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Whether points were weighted by their standard errors.
    pub weighted: bool,
}

/// Fits `(N, error, stderr)` points. With every `stderr > 0` the fit is
/// weighted by `(error / stderr)²` (delta method on the log) and the slope
/// variance is the known-variance one; with every `stderr = 0` it is ordinary
/// least squares with the residual variance.
pub fn fit_rate(points: &[(usize, f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return invalid(format!("rate fit needs at least 3 points, got {}", points.len()));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
        return invalid(format!("error {} at N = {} is not positive", p.1, p.0));
    }
    if points.iter().any(|p| !(p.2 >= 0.0) || !p.2.is_finite() || p.0 == 0) {
        return invalid("levels must be positive and standard errors finite and nonnegative");
    }
    let all_zero = points.iter().all(|p| p.2 == 0.0);
    let all_positive = points.iter().all(|p| p.2 > 0.0);
    if !all_zero && !all_positive {
        return invalid("standard errors must be all zero or all positive");
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let ws: Vec<f64> = points
        .iter()
        .map(|p| if all_zero { 1.0 } else { (p.1 / p.2).powi(2) })
        .collect();
    let sw: f64 = ws.iter().sum();
    let xbar = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ybar = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xbar).powi(2)).sum();
    if !(sxx > 0.0) {
        return invalid("rate fit needs at least two distinct levels");
    }
    let sxy: f64 = (0..xs.len()).map(|i| ws[i] * (xs[i] - xbar) * (ys[i] - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let variance = if all_zero {
        let rss: f64 = (0..xs.len())
            .map(|i| (ys[i] - intercept - slope * xs[i]).powi(2))
            .sum();
        rss / (xs.len() - 2) as f64 / sxx
    } else {
        1.0 / sxx
    };
    let se = variance.sqrt();
    Ok(RateFit {
        slope,
        intercept,
        slope_stderr: se,
        ci_low: slope - Z95 * se,
        ci_high: slope + Z95 * se,
        weighted: all_positive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [4usize, 8, 16, 32].iter().map(|&n| (n, 3.0 * (n as f64).powf(-0.5), 0.0)).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-12);
        assert!(!f.weighted);
    }

    #[test]
    fn constant_errors() {
        let pts = [(4, 0.2, 0.01), (8, 0.2, 0.01), (16, 0.2, 0.01)];
        let f = fit_rate(&pts).unwrap();
        assert!(f.slope.abs() < 1e-14);
        assert!(f.weighted);
    }

    #[test]
    fn leverage_of_one_point() {
        let ns = [4usize, 8, 16, 32, 64];
        let base: Vec<_> = ns.iter().map(|&n| (n, (n as f64).powf(-0.4), 0.0)).collect();
        let s0 = fit_rate(&base).unwrap().slope;
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let xbar = xs.iter().sum::<f64>() / xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
        for i in 0..ns.len() {
            let mut p = base.clone();
            p[i].1 *= 1.1;
            let s1 = fit_rate(&p).unwrap().slope;
            let oracle = (xs[i] - xbar) / sxx * 1.1f64.ln();
            assert!((s1 - s0 - oracle).abs() < 1e-13, "point {i}: {} vs {oracle}", s1 - s0);
        }
        // Scaling error and stderr together keeps the weights, so the same oracle holds.
        let weighted: Vec<_> = ns.iter().map(|&n| (n, (n as f64).powf(-0.4), 0.05 * (n as f64).powf(-0.4) * (1.0 + n as f64 / 64.0))).collect();
        let fit0 = fit_rate(&weighted).unwrap();
        let ws: Vec<f64> = weighted.iter().map(|p| (p.1 / p.2).powi(2)).collect();
        let sw: f64 = ws.iter().sum();
        let xw = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
        let sxxw: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xw).powi(2)).sum();
        let mut p = weighted.clone();
        p[2].1 *= 1.1;
        p[2].2 *= 1.1;
        let moved = fit_rate(&p).unwrap().slope - fit0.slope;
        let oracle = ws[2] * (xs[2] - xw) / sxxw * 1.1f64.ln();
        assert!((moved - oracle).abs() < 1e-13);
    }

    #[test]
    fn stderr_scales_with_inputs() {
        let pts: Vec<_> = [4usize, 8, 16, 32].iter().map(|&n| (n, 1.0 / n as f64, 0.02 / n as f64)).collect();
        let halved: Vec<_> = pts.iter().map(|&(n, e, s)| (n, e, s / 2f64.sqrt())).collect();
        let a = fit_rate(&pts).unwrap().slope_stderr;
        let b = fit_rate(&halved).unwrap().slope_stderr;
        assert!((a / b - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_points() {
        assert!(fit_rate(&[(4, 1.0, 0.0), (8, 0.5, 0.0)]).is_err());
        assert!(fit_rate(&[(4, 1.0, 0.0), (8, 0.0, 0.0), (16, 0.5, 0.0)]).is_err());
        assert!(fit_rate(&[(4, 1.0, 0.0), (8, -1.0, 0.0), (16, 0.5, 0.0)]).is_err());
        assert!(fit_rate(&[(4, 1.0, 0.1), (8, 0.7, 0.0), (16, 0.5, 0.1)]).is_err());
        assert!(fit_rate(&[(4, 1.0, 0.0), (4, 0.7, 0.0), (4, 0.5, 0.0)]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_any_power_law(slope in -2.0f64..1.0, c in 0.01f64..100.0) {
            let pts: Vec<_> = [3usize, 7, 20, 55].iter().map(|&n| (n, c * (n as f64).powf(slope), 0.0)).collect();
            let f = fit_rate(&pts).unwrap();
            prop_assert!((f.slope - slope).abs() < 1e-10);
            prop_assert!(f.ci_low <= f.slope && f.slope <= f.ci_high);
        }
    }
}
