//! Scalar risk of a single observable y = cᵀx.
//!
//! Three measures are provided, each in transient and steady form:
//! value-at-risk R_ε(|y|), and risk-in-expectation T_ε(|y|) under the
//! quadratic and the exponential utility. A risk is `Infinite` when the
//! defining inequality has no solution.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::dde::{steady_energy, steady_energy_tau_derivative, DdeError, HistoryFunction, TransientEngine};
use crate::graph::{GraphError, Spectrum};
use crate::linalg::{inverse, symmetric_eigen, LinalgError, Matrix};
use crate::observables::{Observable, ObservableError};
use crate::special::{erf, folded_moments, kappa_exp, s_epsilon, NumericError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("delay tau = {tau} is not below the stability margin tau_max = {tau_max}")]
    Unstable { tau: f64, tau_max: f64 },
    #[error("invalid risk parameters: {0}")]
    InvalidParams(String),
    #[error("the exponential measure needs beta > 0")]
    MissingBeta,
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// ε (probability level for VaR, utility threshold for expectation risks),
/// noise intensity b, delay τ and the exponential rate β.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    pub eps: f64,
    pub b: f64,
    pub tau: f64,
    pub beta: Option<f64>,
}

impl RiskParams {
    pub fn new(eps: f64, b: f64, tau: f64) -> Self {
        Self { eps, b, tau, beta: None }
    }

    pub fn with_beta(self, beta: f64) -> Self {
        Self { beta: Some(beta), ..self }
    }

    pub fn with_tau(self, tau: f64) -> Self {
        Self { tau, ..self }
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(RiskError::InvalidParams(format!("eps = {} must be positive", self.eps)));
        }
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(RiskError::InvalidParams(format!("b = {} must be non-negative", self.b)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(RiskError::InvalidParams(format!("tau = {} must be non-negative", self.tau)));
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(RiskError::InvalidParams(format!("beta = {beta} must be positive")));
            }
        }
        Ok(())
    }

    /// Parameter validity plus strict stability τ < π/(2λ_n).
    pub fn validate_for(&self, s: &Spectrum) -> Result<(), RiskError> {
        self.validate()?;
        check_stable(self.tau, s.lambda_max())
    }

    fn beta(&self) -> Result<f64, RiskError> {
        self.beta.ok_or(RiskError::MissingBeta)
    }
}

fn check_stable(tau: f64, lambda_max: f64) -> Result<(), RiskError> {
    if tau * lambda_max >= FRAC_PI_2 {
        return Err(RiskError::Unstable { tau, tau_max: FRAC_PI_2 / lambda_max });
    }
    Ok(())
}

fn check_probability(eps: f64) -> Result<(), RiskError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(RiskError::InvalidParams(format!("eps = {eps} must lie in (0, 1) for value-at-risk")))
    }
}

// ============================================================================
// Risk values
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    Safe,
    Marginal,
    Unsafe,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Safe => "safe",
            Self::Marginal => "marginal",
            Self::Unsafe => "unsafe",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskValue {
    Finite(f64),
    Infinite,
}

impl RiskValue {
    pub fn classification(&self) -> Classification {
        match *self {
            Self::Finite(v) if v < 0.0 => Classification::Safe,
            Self::Finite(_) => Classification::Marginal,
            Self::Infinite => Classification::Unsafe,
        }
    }

    /// The value, with `Infinite` mapped to +∞.
    pub fn value(&self) -> f64 {
        match *self {
            Self::Finite(v) => v,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Self::Finite(_))
    }

    fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            Self::Finite(v)
        } else {
            Self::Infinite
        }
    }
}

impl fmt::Display for RiskValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for RiskValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => s.serialize_f64(*v),
            Self::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Measure {
    #[serde(rename = "var")]
    ValueAtRisk,
    #[serde(rename = "quad")]
    Quadratic,
    #[serde(rename = "exp")]
    Exponential,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ValueAtRisk => "var",
            Self::Quadratic => "quad",
            Self::Exponential => "exp",
        })
    }
}

/// One line of a risk report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub tau: f64,
    pub t: Option<f64>,
    pub observable: String,
    pub measure: Measure,
    pub value: RiskValue,
    pub classification: Classification,
}

impl RiskRow {
    pub const CSV_HEADER: &'static str = "tau,t,observable,measure,value,classification";

    pub fn new(tau: f64, t: Option<f64>, observable: String, measure: Measure, value: RiskValue) -> Self {
        Self { tau, t, observable, measure, value, classification: value.classification() }
    }

    pub fn csv(&self) -> String {
        let t = self.t.map(|t| t.to_string()).unwrap_or_default();
        format!("{},{},{},{},{},{}", self.tau, t, self.observable, self.measure, self.value, self.classification)
    }
}

// ============================================================================
// Risk of a Gaussian y ~ N(μ, σ²)
// ============================================================================

/// R_ε(|y|) = √2·σ·S_ε(|μ|/(√2σ)) + |μ|; |μ| when σ = 0.
pub fn var_of_gaussian(mu: f64, sigma: f64, eps: f64) -> Result<RiskValue, RiskError> {
    check_probability(eps)?;
    if sigma.is_infinite() {
        return Ok(RiskValue::Infinite);
    }
    // |y| has the same law for μ and −μ.
    let m = mu.abs();
    if sigma <= 0.0 {
        return Ok(RiskValue::Finite(m));
    }
    Ok(RiskValue::Finite(SQRT_2 * sigma * s_epsilon(eps, m / (SQRT_2 * sigma))? + m))
}

/// T_ε(|y|) for v(z) = z²: μ_{|y|} − √(ε² − σ²_{|y|}), infinite when ε < σ_{|y|}.
pub fn quad_of_gaussian(mu: f64, sigma: f64, eps: f64) -> RiskValue {
    if sigma.is_infinite() {
        return RiskValue::Infinite;
    }
    let fm = folded_moments(mu, sigma);
    let disc = eps * eps - fm.variance;
    if disc < 0.0 {
        RiskValue::Infinite
    } else {
        RiskValue::Finite(fm.mean - disc.sqrt())
    }
}

/// T_ε(|y|) for v(z) = e^{βz}: βσ²/2 + ln(κ/2)/β − ε.
pub fn exp_of_gaussian(mu: f64, sigma: f64, eps: f64, beta: f64) -> Result<RiskValue, RiskError> {
    if !(beta > 0.0) {
        return Err(RiskError::MissingBeta);
    }
    if sigma.is_infinite() {
        return Ok(RiskValue::Infinite);
    }
    if sigma <= 0.0 {
        return Ok(RiskValue::Finite(mu.abs() - eps));
    }
    match kappa_exp(mu, sigma, beta) {
        Ok(k) => Ok(RiskValue::from_f64(beta * sigma * sigma / 2.0 + (k / 2.0).ln() / beta - eps)),
        Err(NumericError::Overflow { .. }) => Ok(RiskValue::Infinite),
        Err(e) => Err(e.into()),
    }
}

/// Steady VaR √2·S_ε(0)·σ̄.
pub fn var_from_sigma(sigma: f64, eps: f64) -> Result<RiskValue, RiskError> {
    check_probability(eps)?;
    Ok(RiskValue::from_f64(SQRT_2 * s_epsilon(eps, 0.0)? * sigma))
}

/// Steady quadratic risk √(2/π)σ̄ − √(ε² − (1 − 2/π)σ̄²).
pub fn quad_from_sigma(sigma: f64, eps: f64) -> RiskValue {
    if sigma.is_infinite() {
        return RiskValue::Infinite;
    }
    let disc = eps * eps - (1.0 - 2.0 / PI) * sigma * sigma;
    if disc < 0.0 {
        RiskValue::Infinite
    } else {
        RiskValue::Finite((2.0 / PI).sqrt() * sigma - disc.sqrt())
    }
}

/// Steady exponential risk βσ̄²/2 + ln(1 + erf(βσ̄/√2))/β − ε.
pub fn exp_from_sigma(sigma: f64, eps: f64, beta: f64) -> RiskValue {
    if sigma.is_infinite() {
        return RiskValue::Infinite;
    }
    RiskValue::from_f64(beta * sigma * sigma / 2.0 + (erf(beta * sigma / SQRT_2)).ln_1p() / beta - eps)
}

/// The steady exponential form with erf(βσ̄/2), kept for side-by-side reports.
pub fn exp_from_sigma_half_argument(sigma: f64, eps: f64, beta: f64) -> RiskValue {
    if sigma.is_infinite() {
        return RiskValue::Infinite;
    }
    RiskValue::from_f64(beta * sigma * sigma / 2.0 + (erf(beta * sigma / 2.0)).ln_1p() / beta - eps)
}

// ============================================================================
// Steady state
// ============================================================================

/// σ̄ = b·√(Σ_{k≥2} (c_k^Q)²·τf(λ_kτ)); +∞ when c violates the kernel condition.
pub fn steady_sigma(s: &Spectrum, obs: &Observable, p: &RiskParams) -> Result<f64, RiskError> {
    p.validate_for(s)?;
    let cq = obs.coefficients(s)?;
    if !obs.in_kernel() {
        return Ok(f64::INFINITY);
    }
    Ok(p.b * steady_sum(s, &cq, p.tau)?.sqrt())
}

fn steady_sum(s: &Spectrum, cq: &[f64], tau: f64) -> Result<f64, RiskError> {
    let lambdas = s.eigenvalues();
    let mut acc = 0.0;
    for k in 1..s.n() {
        acc += cq[k] * cq[k] * steady_energy(lambdas[k], tau)?;
    }
    Ok(acc)
}

/// σ̄² from the matrix form (b²/2)·cᵀ L† cos(τL) (M_n − sin τL)† c.
///
/// Pseudo-inverses use (A + J/n)⁻¹ − J/n and the matrix sine/cosine come
/// from their power series, so no eigendecomposition enters the value.
pub fn steady_sigma_trace(l: &Matrix, c: &[f64], p: &RiskParams) -> Result<f64, RiskError> {
    p.validate()?;
    let n = l.rows();
    if c.len() != n {
        return Err(ObservableError::Dimension { expected: n, got: c.len() }.into());
    }
    check_stable(p.tau, symmetric_eigen(l)?.values[n - 1])?;
    let sum: f64 = c.iter().sum();
    let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (sum / (n as f64).sqrt()).abs() >= crate::observables::KERNEL_TOL * cn.max(1.0) {
        return Ok(f64::INFINITY);
    }
    let j = Matrix::from_fn(n, n, |_, _| 1.0 / n as f64);
    let pinv = |a: &Matrix| -> Result<Matrix, LinalgError> { Ok(inverse(&a.add(&j))?.sub(&j)) };
    let tl = l.scale(p.tau);
    let (cos, sin) = cos_sin_series(&tl);
    let m = Matrix::identity(n).sub(&j);
    let product = pinv(l)?.matmul(&cos)?.matmul(&pinv(&m.sub(&sin))?)?;
    let quad: f64 = (0..n).map(|a| c[a] * (0..n).map(|b| product[(a, b)] * c[b]).sum::<f64>()).sum();
    Ok(0.5 * p.b * p.b * quad)
}

fn cos_sin_series(a: &Matrix) -> (Matrix, Matrix) {
    let n = a.rows();
    let mut cos = Matrix::identity(n);
    let mut sin = a.clone();
    let mut term = a.clone(); // a^k / k!
    let mut k = 1usize;
    loop {
        k += 1;
        term = term.matmul(a).expect("square").scale(1.0 / k as f64);
        let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
        if k.is_multiple_of(2) {
            cos = cos.add(&term.scale(sign));
        } else {
            sin = sin.add(&term.scale(sign));
        }
        if term.frobenius() < 1e-18 || k > 200 {
            break;
        }
    }
    (cos, sin)
}

/// All steady measures of one observable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyRisks {
    pub sigma: f64,
    pub var: RiskValue,
    pub quad: RiskValue,
    pub exp: Option<RiskValue>,
}

pub fn steady_risks(s: &Spectrum, obs: &Observable, p: &RiskParams) -> Result<SteadyRisks, RiskError> {
    let sigma = steady_sigma(s, obs, p)?;
    let var = if p.eps < 1.0 { var_from_sigma(sigma, p.eps)? } else { RiskValue::Infinite };
    Ok(SteadyRisks {
        sigma,
        var,
        quad: quad_from_sigma(sigma, p.eps),
        exp: p.beta.map(|beta| exp_from_sigma(sigma, p.eps, beta)),
    })
}

pub fn var_risk_steady(s: &Spectrum, obs: &Observable, p: &RiskParams) -> Result<RiskValue, RiskError> {
    var_from_sigma(steady_sigma(s, obs, p)?, p.eps)
}

pub fn quad_risk_steady(s: &Spectrum, obs: &Observable, p: &RiskParams) -> Result<RiskValue, RiskError> {
    Ok(quad_from_sigma(steady_sigma(s, obs, p)?, p.eps))
}

pub fn exp_risk_steady(s: &Spectrum, obs: &Observable, p: &RiskParams) -> Result<RiskValue, RiskError> {
    Ok(exp_from_sigma(steady_sigma(s, obs, p)?, p.eps, p.beta()?))
}

// ============================================================================
// Transient
// ============================================================================

/// Moments and risks of y_t at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientRisks {
    pub t: f64,
    pub mu: f64,
    pub sigma: f64,
    pub var: RiskValue,
    pub quad: RiskValue,
    pub exp: Option<RiskValue>,
}

/// Evaluates every measure at each time in `ts`, sharing mode solutions.
pub fn transient_risks(
    s: &Spectrum,
    obs: &Observable,
    h: &HistoryFunction,
    p: &RiskParams,
    ts: &[f64],
) -> Result<Vec<TransientRisks>, RiskError> {
    p.validate_for(s)?;
    if (h.tau() - p.tau).abs() > 1e-12 * p.tau.max(1.0) {
        return Err(RiskError::InvalidParams("history length differs from tau".into()));
    }
    obs.coefficients(s)?;
    let mut engine = TransientEngine::new(s, p.tau)?;
    ts.iter()
        .map(|&t| {
            let mu = engine.mean(obs.vector(), h, t)?;
            let sigma = engine.variance(obs.vector(), p.b, t)?.sqrt();
            Ok(TransientRisks {
                t,
                mu,
                sigma,
                var: if p.eps < 1.0 { var_of_gaussian(mu, sigma, p.eps)? } else { RiskValue::Infinite },
                quad: quad_of_gaussian(mu, sigma, p.eps),
                exp: p.beta.map(|beta| exp_of_gaussian(mu, sigma, p.eps, beta)).transpose()?,
            })
        })
        .collect()
}

pub fn var_risk_transient(
    s: &Spectrum,
    obs: &Observable,
    h: &HistoryFunction,
    p: &RiskParams,
    t: f64,
) -> Result<RiskValue, RiskError> {
    Ok(transient_risks(s, obs, h, p, &[t])?[0].var)
}

// ============================================================================
// Delay monotonicity
// ============================================================================

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityRow {
    pub tau: f64,
    pub sigma2: f64,
    pub var: RiskValue,
    pub quad: RiskValue,
    pub exp: Option<RiskValue>,
    pub dsigma2_analytic: f64,
    pub dsigma2_numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub rows: Vec<MonotonicityRow>,
    /// Every measure column strictly increases (an infinite entry may only be
    /// followed by infinite entries).
    pub strictly_increasing: bool,
    /// Largest relative gap between the analytic and finite-difference slope.
    pub max_derivative_rel_err: f64,
}

/// ∂σ̄²/∂τ = (b²/2)·Σ_{k≥2} (c_k^Q)²/(1 − sin λ_kτ).
pub fn steady_variance_tau_derivative(s: &Spectrum, obs: &Observable, p: &RiskParams) -> Result<f64, RiskError> {
    p.validate_for(s)?;
    let cq = obs.coefficients(s)?;
    if !obs.in_kernel() {
        return Ok(f64::INFINITY);
    }
    let lambdas = s.eigenvalues();
    let mut acc = 0.0;
    for k in 1..s.n() {
        acc += cq[k] * cq[k] * steady_energy_tau_derivative(lambdas[k], p.tau)?;
    }
    Ok(p.b * p.b * acc)
}

pub fn delay_monotonicity_report(
    s: &Spectrum,
    obs: &Observable,
    p: &RiskParams,
    tau_grid: &[f64],
) -> Result<MonotonicityReport, RiskError> {
    let tau_max = s.stability_margin();
    let mut rows = Vec::with_capacity(tau_grid.len());
    for &tau in tau_grid {
        let pt = p.with_tau(tau);
        let r = steady_risks(s, obs, &pt)?;
        let h = (1e-4 * tau).min(0.25 * (tau_max - tau)).max(1e-9);
        let sig2 = |t: f64| -> Result<f64, RiskError> { Ok(steady_sigma(s, obs, &p.with_tau(t))?.powi(2)) };
        // Richardson-extrapolated central difference; forward near τ = 0.
        let central = |h: f64| -> Result<f64, RiskError> { Ok((sig2(tau + h)? - sig2(tau - h)?) / (2.0 * h)) };
        let numeric = if tau - h >= 0.0 {
            (4.0 * central(h / 2.0)? - central(h)?) / 3.0
        } else {
            (-sig2(tau + 2.0 * h)? + 4.0 * sig2(tau + h)? - 3.0 * sig2(tau)?) / (2.0 * h)
        };
        rows.push(MonotonicityRow {
            tau,
            sigma2: r.sigma * r.sigma,
            var: r.var,
            quad: r.quad,
            exp: r.exp,
            dsigma2_analytic: steady_variance_tau_derivative(s, obs, &pt)?,
            dsigma2_numeric: numeric,
        });
    }
    let increasing = |col: &dyn Fn(&MonotonicityRow) -> Option<RiskValue>| {
        rows.windows(2).all(|w| match (col(&w[0]), col(&w[1])) {
            (Some(RiskValue::Finite(a)), Some(RiskValue::Finite(b))) => b > a,
            (Some(RiskValue::Finite(_)), Some(RiskValue::Infinite)) => true,
            (Some(RiskValue::Infinite), Some(RiskValue::Infinite)) => true,
            (Some(RiskValue::Infinite), Some(RiskValue::Finite(_))) => false,
            _ => true,
        })
    };
    let strictly_increasing = increasing(&|r| Some(r.var)) && increasing(&|r| Some(r.quad)) && increasing(&|r| r.exp);
    let max_derivative_rel_err = rows
        .iter()
        .filter(|r| r.dsigma2_analytic.is_finite())
        .map(|r| (r.dsigma2_analytic - r.dsigma2_numeric).abs() / r.dsigma2_analytic.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(MonotonicityReport { rows, strictly_increasing, max_derivative_rel_err })
}
