//! Rates with binomial errors, scaling-law fits and the distillation projection.

use std::fmt;

use thiserror::Error;

use crate::noise::ModelKind;
use crate::sim::{LogicalClass, Tally};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no trials were recorded")]
    NoShots,
    #[error("no trials were accepted, so conditional rates are undefined")]
    NoAccepted,
    #[error("fit needs at least 2 points with positive error bars, found {0}")]
    DegenerateWeights(usize),
}

/// A probability with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateEstimate {
    pub value: f64,
    pub sem: f64,
}

impl RateEstimate {
    /// `k` successes out of `n` trials.
    pub fn binomial(k: u64, n: u64) -> Self {
        let value = k as f64 / n as f64;
        Self { value, sem: (value * (1.0 - value) / n as f64).sqrt() }
    }
}

/// Rates conditioned on acceptance; `None` when nothing was accepted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRates {
    pub total: RateEstimate,
    pub xl: RateEstimate,
    pub zl: RateEstimate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub success: RateEstimate,
    pub errors: Option<ErrorRates>,
}

impl Rates {
    pub fn errors(&self) -> Result<ErrorRates, AnalysisError> {
        self.errors.ok_or(AnalysisError::NoAccepted)
    }
}

/// Success rate and logical error rates of a tally.
pub fn rates(t: &Tally) -> Result<Rates, AnalysisError> {
    if t.shots == 0 {
        return Err(AnalysisError::NoShots);
    }
    let success = RateEstimate::binomial(t.accepted, t.shots);
    let errors = (t.accepted > 0).then(|| {
        let c = |k: LogicalClass| t.count(k);
        ErrorRates {
            total: RateEstimate::binomial(t.accepted - c(LogicalClass::I), t.accepted),
            xl: RateEstimate::binomial(c(LogicalClass::XL) + c(LogicalClass::YL), t.accepted),
            zl: RateEstimate::binomial(c(LogicalClass::ZL) + c(LogicalClass::YL), t.accepted),
        }
    });
    Ok(Rates { success, errors })
}

/// One sweep point entering a fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitPoint {
    pub p: f64,
    pub y: f64,
    pub sem: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub coefficient: f64,
    pub stderr: f64,
    pub exponent: i32,
    pub points: usize,
    /// Chi-square per degree of freedom; `NaN` with a single usable point.
    pub reduced_chi2: f64,
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "coefficient {:.6e} stderr {:.6e} exponent {} points {} reduced_chi2 {:.4}",
            self.coefficient, self.stderr, self.exponent, self.points, self.reduced_chi2
        )
    }
}

/// Weighted least squares for `y = c · p^e` with weights `1 / sem²`.
fn fit_power(points: &[FitPoint], e: i32) -> Result<FitResult, AnalysisError> {
    let used: Vec<&FitPoint> = points.iter().filter(|q| q.sem > 0.0 && q.sem.is_finite()).collect();
    if used.len() < 2 {
        return Err(AnalysisError::DegenerateWeights(used.len()));
    }
    let w = |q: &FitPoint| 1.0 / (q.sem * q.sem);
    let sxx: f64 = used.iter().map(|q| w(q) * q.p.powi(2 * e)).sum();
    let sxy: f64 = used.iter().map(|q| w(q) * q.y * q.p.powi(e)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(AnalysisError::DegenerateWeights(used.len()));
    }
    let coefficient = sxy / sxx;
    let chi2: f64 = used.iter().map(|q| w(q) * (q.y - coefficient * q.p.powi(e)).powi(2)).sum();
    Ok(FitResult {
        coefficient,
        stderr: (1.0 / sxx).sqrt(),
        exponent: e,
        points: used.len(),
        reduced_chi2: chi2 / (used.len() - 1) as f64,
    })
}

/// `y = A p²`.
pub fn fit_quadratic(points: &[FitPoint]) -> Result<FitResult, AnalysisError> {
    fit_power(points, 2)
}

/// `y = c p`.
pub fn fit_linear(points: &[FitPoint]) -> Result<FitResult, AnalysisError> {
    fit_power(points, 1)
}

/// Fitted exponent of `y = c p^k` on log-log axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub points: usize,
}

/// Weighted straight line through `(ln p, ln y)` with `sem(ln y) = sem / y`.
pub fn loglog_slope(points: &[FitPoint]) -> Result<SlopeFit, AnalysisError> {
    let used: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|q| q.y > 0.0 && q.p > 0.0 && q.sem > 0.0 && q.sem.is_finite())
        .map(|q| (q.p.ln(), q.y.ln(), (q.y / q.sem).powi(2)))
        .collect();
    if used.len() < 2 {
        return Err(AnalysisError::DegenerateWeights(used.len()));
    }
    let sw: f64 = used.iter().map(|u| u.2).sum();
    let mx = used.iter().map(|u| u.2 * u.0).sum::<f64>() / sw;
    let my = used.iter().map(|u| u.2 * u.1).sum::<f64>() / sw;
    let sxx: f64 = used.iter().map(|u| u.2 * (u.0 - mx).powi(2)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(AnalysisError::DegenerateWeights(used.len()));
    }
    let slope = used.iter().map(|u| u.2 * (u.0 - mx) * (u.1 - my)).sum::<f64>() / sxx;
    Ok(SlopeFit { slope, stderr: sxx.sqrt().recip(), points: used.len() })
}

/// Re-express a coefficient of `p^e` as one of `p_CX^e`, with `p_CX ≈ a p`.
pub fn convert_axis(coefficient: f64, exponent: i32, model: ModelKind) -> f64 {
    coefficient / model.cx_axis_factor().powi(exponent)
}

/// Output error of 15-to-1 distillation fed with raw error `eps`.
pub fn distill_15to1(eps: f64) -> f64 {
    (35.0 * eps.powi(3)).min(1.0)
}
