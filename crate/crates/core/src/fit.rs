//! Log-log least squares for scaling exponents.

use serde::Serialize;

use crate::error::{Error, Result};

/// Values below this are treated as numerically zero.
pub const DEGENERATE_FLOOR: f64 = 1e-14;

/// Plain least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope (0 for an exact or two-point fit).
    pub slope_se: f64,
}

pub fn line_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::DegenerateFit(format!("need at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::DegenerateFit("abscissae have zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit { slope, intercept, r2, slope_se })
}

/// Power-law fit `value ≈ C·scale^slope` over a window of a scale sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    /// Strictly decreasing.
    pub scales: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    /// Half-open index range `[start, end)` into `scales` used by the fit.
    pub window: (usize, usize),
    /// All values below [`DEGENERATE_FLOOR`]; slope and intercept are 0.
    pub degenerate: bool,
}

impl ExponentFit {
    /// Slope ± 2 standard errors.
    pub fn band(&self) -> (f64, f64) {
        (self.slope - 2.0 * self.slope_se, self.slope + 2.0 * self.slope_se)
    }
}

/// Fit `log value` against `log scale`. Scales may come in any order; they
/// are sorted decreasing. When `r² < 0.98` and at least six scales are
/// available the largest and smallest scales are dropped and the fit redone.
pub fn fit_power_law(scales: &[f64], values: &[f64]) -> Result<ExponentFit> {
    if scales.len() != values.len() {
        return Err(Error::ShapeMismatch("scales and values differ in length".into()));
    }
    if scales.len() < 4 {
        return Err(Error::DegenerateFit(format!("need at least 4 scales, got {}", scales.len())));
    }
    let mut pairs: Vec<(f64, f64)> = scales.iter().copied().zip(values.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    if pairs.windows(2).any(|w| w[0].0 <= w[1].0) || pairs.iter().any(|p| p.0 <= 0.0) {
        return Err(Error::InvalidParameter("scales must be positive and distinct".into()));
    }
    let (scales, values): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    if values.iter().all(|v| v.abs() < DEGENERATE_FLOOR) {
        let n = scales.len();
        return Ok(ExponentFit {
            scales,
            values,
            slope: 0.0,
            intercept: 0.0,
            r2: 0.0,
            slope_se: 0.0,
            window: (0, n),
            degenerate: true,
        });
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateFit("non-positive value in a log-log fit".into()));
    }
    let mut window = (0, scales.len());
    let mut fit = fit_window(&scales, &values, window)?;
    if fit.r2 < 0.98 && scales.len() >= 6 {
        window = (1, scales.len() - 1);
        fit = fit_window(&scales, &values, window)?;
    }
    Ok(ExponentFit {
        scales,
        values,
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        slope_se: fit.slope_se,
        window,
        degenerate: false,
    })
}

/// Fit over an explicit window without the end-dropping rule.
pub fn fit_power_law_window(scales: &[f64], values: &[f64], window: (usize, usize)) -> Result<ExponentFit> {
    let mut fit = fit_power_law(scales, values)?;
    if fit.degenerate {
        return Ok(fit);
    }
    if window.1 > fit.scales.len() || window.1 < window.0 + 2 {
        return Err(Error::InvalidParameter(format!("window {window:?} invalid")));
    }
    let line = fit_window(&fit.scales, &fit.values, window)?;
    fit.slope = line.slope;
    fit.intercept = line.intercept;
    fit.r2 = line.r2;
    fit.slope_se = line.slope_se;
    fit.window = window;
    Ok(fit)
}

fn fit_window(scales: &[f64], values: &[f64], window: (usize, usize)) -> Result<LineFit> {
    let x: Vec<f64> = scales[window.0..window.1].iter().map(|s| s.ln()).collect();
    let y: Vec<f64> = values[window.0..window.1].iter().map(|v| v.ln()).collect();
    line_fit(&x, &y)
}

/// Check that a scale list is (approximately) dyadic: consecutive ratios of 2.
pub fn is_dyadic(scales: &[f64]) -> bool {
    let mut s = scales.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s.windows(2).all(|w| ((w[1] / w[0]) - 2.0).abs() < 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let scales: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let values: Vec<f64> = scales.iter().map(|s| 3.0 * s.powf(0.7)).collect();
        let f = fit_power_law(&scales, &values).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.r2 > 1.0 - 1e-12);
        assert_eq!(f.window, (0, 6));
    }

    #[test]
    fn sorts_scales_decreasing() {
        let scales = [0.125, 0.25, 0.5, 1.0];
        let values: Vec<f64> = scales.iter().map(|s: &f64| s * s).collect();
        let f = fit_power_law(&scales, &values).unwrap();
        assert_eq!(f.scales, vec![1.0, 0.5, 0.25, 0.125]);
        assert!((f.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_errors() {
        let scales = [1.0, 0.5, 0.25, 0.125];
        let f = fit_power_law(&scales, &[0.0, 1e-16, 0.0, 0.0]).unwrap();
        assert!(f.degenerate);
        assert!(fit_power_law(&scales[..3], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_power_law(&scales, &[1.0, -1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn drops_ends_on_poor_fit() {
        let scales: Vec<f64> = (0..7).map(|k| 0.5f64.powi(k)).collect();
        let mut values: Vec<f64> = scales.iter().map(|s| s.powf(0.5)).collect();
        values[0] *= 20.0;
        values[6] *= 0.01;
        let f = fit_power_law(&scales, &values).unwrap();
        assert_eq!(f.window, (1, 6));
        assert!((f.slope - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dyadic_detection() {
        assert!(is_dyadic(&[0.1, 0.2, 0.4, 0.8]));
        assert!(!is_dyadic(&[0.1, 0.2, 0.3]));
    }
}
