//! Polynomial vs exponential growth fits.
//!
//! Polynomial: `ln v = ln K + ℓ ln n`, scored by R² of that line.
//! Exponential: scored by R² of `ln v` against `n`; the exponent is fitted
//! separately from `log₂ v = log₂ C + n^ν`.

use serde::Serialize;
use thiserror::Error;

use crate::numfmt::f17;

/// Scores closer than this are a tie.
pub const SCORE_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least two points with distinct n, got {0}")]
    TooFewPoints(usize),
    #[error("lengths and values differ in count ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("value {value} at n = {n} is not positive")]
    NonPositive { n: f64, value: f64 },
    #[error("n = {0} is not positive")]
    BadLength(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Polynomial,
    Exponential,
    Inconclusive,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Polynomial => "polynomial",
            Classification::Exponential => "exponential",
            Classification::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    #[serde(serialize_with = "f17::serialize")]
    pub ell: f64,
    #[serde(serialize_with = "f17::serialize")]
    pub k_prefactor: f64,
    #[serde(serialize_with = "f17::serialize")]
    pub poly_score: f64,
    #[serde(serialize_with = "f17::serialize")]
    pub nu: f64,
    #[serde(serialize_with = "f17::serialize")]
    pub c_prefactor: f64,
    /// Slope of `ln v` against `n`.
    #[serde(serialize_with = "f17::serialize")]
    pub semilog_rate: f64,
    #[serde(serialize_with = "f17::serialize")]
    pub exp_score: f64,
    pub classification: Classification,
}

struct Line {
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Line { slope, intercept, r2 }
}

/// Best `(ν, c)` for `y ≈ c + n^ν`, `ν ∈ [1e-3, 4]`: a coarse grid, then
/// bisection on the sign of the cost derivative. Shifting `y` only moves
/// `c`, so `ν` comes out the same to rounding.
fn fit_nu(ns: &[f64], y: &[f64]) -> (f64, f64) {
    let residuals = |nu: f64| {
        let shifted: Vec<f64> = ns.iter().zip(y).map(|(n, v)| v - n.powf(nu)).collect();
        let c = shifted.iter().sum::<f64>() / shifted.len() as f64;
        (shifted.into_iter().map(|s| s - c).collect::<Vec<f64>>(), c)
    };
    let cost = |nu: f64| residuals(nu).0.iter().map(|r| r * r).sum::<f64>();
    // proportional to -d(cost)/dν; c drops out because the residuals sum to zero
    let slope = |nu: f64| -> f64 { residuals(nu).0.iter().zip(ns).map(|(r, n)| r * n.powf(nu) * n.ln()).sum() };
    let (lo, hi) = (1e-3, 4.0);
    let steps = 400;
    let h = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + h * i as f64)
        .min_by(|a, b| cost(*a).total_cmp(&cost(*b)))
        .unwrap();
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let nu = if slope(a) > 0.0 && slope(b) < 0.0 {
        while b - a > 0.0 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if slope(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    } else {
        best
    };
    (nu, residuals(nu).1)
}

pub fn classify(poly_score: f64, exp_score: f64) -> Classification {
    if poly_score > exp_score + SCORE_MARGIN {
        Classification::Polynomial
    } else if exp_score > poly_score + SCORE_MARGIN {
        Classification::Exponential
    } else {
        Classification::Inconclusive
    }
}

pub fn fit_scaling(ns: &[f64], values: &[f64]) -> Result<FitReport, FitError> {
    if ns.len() != values.len() {
        return Err(FitError::LengthMismatch(ns.len(), values.len()));
    }
    for (&n, &v) in ns.iter().zip(values) {
        if !(n > 0.0) {
            return Err(FitError::BadLength(n));
        }
        if !(v > 0.0) {
            return Err(FitError::NonPositive { n, value: v });
        }
    }
    let mut distinct = ns.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(FitError::TooFewPoints(distinct.len()));
    }
    let ln_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ln_v: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let poly = least_squares(&ln_n, &ln_v);
    let semi = least_squares(ns, &ln_v);
    let constant = values.iter().all(|&v| v == values[0]);
    // flat data is n^0; a zero growth rate is no evidence for an exponential
    let (poly_score, exp_score) = if constant { (1.0, 0.0) } else { (poly.r2, semi.r2) };
    let log2_v: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    let (nu, c) = fit_nu(ns, &log2_v);
    Ok(FitReport {
        ell: poly.slope,
        k_prefactor: poly.intercept.exp(),
        poly_score,
        nu,
        c_prefactor: c.exp2(),
        semilog_rate: semi.slope,
        exp_score,
        classification: classify(poly_score, exp_score),
    })
}
