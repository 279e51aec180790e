//! Least-squares rate fits on `log y` against `t`.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// Slope of `log y` in `t`.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Ordinary least squares of `log y` on `t` over the samples with
/// `lo <= t <= hi` and `y > 0`. `None` with fewer than two usable points or
/// no spread in `t`.
pub fn fit_log_rate(t: &[f64], y: &[f64], lo: f64, hi: f64) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(&t, &y)| lo <= t && t <= hi && y > 0.0 && y.is_finite())
        .map(|(&t, &y)| (t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let rate = sty / stt;
    let intercept = my - rate * mt;
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - rate * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(RateFit {
        rate,
        intercept,
        r_squared,
        points: pts.len(),
    })
}
