//! Ordinary least squares for log-log slopes.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact fit or two points.
    pub stderr: f64,
    /// Residual standard deviation.
    pub residual: f64,
    pub n: usize,
}

/// Fits `y = intercept + slope x`. Needs at least two distinct `x`.
pub fn ols(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let (stderr, residual) = if n > 2 {
        let s2 = sse / (nf - 2.0);
        ((s2 / sxx).sqrt(), s2.sqrt())
    } else {
        (0.0, 0.0)
    };
    Some(LinearFit {
        slope,
        intercept,
        stderr,
        residual,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = ols(&x, &y).unwrap();
        assert_relative_eq!(f.slope, -0.5, epsilon = 1e-14);
        assert_relative_eq!(f.intercept, 3.0, epsilon = 1e-14);
        assert!(f.stderr < 1e-14);
    }

    #[test]
    fn known_stderr() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 0.0, 3.0, 2.0];
        let f = ols(&x, &y).unwrap();
        assert_relative_eq!(f.slope, 0.6, epsilon = 1e-14);
        let resid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| b - f.intercept - f.slope * a).collect();
        let s2 = resid.iter().map(|r| r * r).sum::<f64>() / 2.0;
        assert_relative_eq!(f.stderr, (s2 / 5.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(ols(&[1.0], &[2.0]).is_none());
        assert!(ols(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }
}
