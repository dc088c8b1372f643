//! The scalar delay equation φ̇(t) = −λ φ(t − τ).
//!
//! The fundamental solution (φ = 0 on [−τ, 0), φ(0) = 1) is integrated by
//! RK4 on a grid aligned with multiples of τ, with cubic Hermite
//! interpolation of the delayed term. On that grid RK4 collapses to Simpson's
//! rule for the delayed right-hand side, and every derivative jump of φ
//! (at t = kτ) falls on a grid node.
//!
//! On top of it sit the energy integral ∫φ², the autocorrelation functional
//! V(ρ) = ∫φ(t)φ(t − ρ)dt, and the transient mean/variance of a network
//! observable.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::graph::Spectrum;
use crate::special::{f_energy, NumericError};

/// Default RK4 steps per delay window.
pub const DEFAULT_STEPS_PER_TAU: usize = 256;
/// Coarsest admissible step is τ/64.
pub const MIN_STEPS_PER_TAU: usize = 64;
/// Adaptive-Simpson tolerance for energy quadrature.
pub const ENERGY_TOL: f64 = 1e-9;
/// |φ| below this over a full delay window counts as decayed.
pub const DECAY_THRESHOLD: f64 = 1e-8;
/// Decay horizon cap, in units of 1/λ.
pub const DECAY_CAP_LAMBDA_UNITS: f64 = 200.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdeError {
    #[error("unstable mode: lambda*tau = {0} is not below pi/2")]
    Unstable(f64),
    #[error("step {step} is larger than tau/64 for tau = {tau}")]
    InvalidStep { step: f64, tau: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fundamental solution for lambda = {lambda}, tau = {tau} has not decayed below 1e-8 by t = {cap}")]
    SlowDecay { lambda: f64, tau: f64, cap: f64 },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

fn check_mode(lambda: f64, tau: f64) -> Result<(), DdeError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(DdeError::InvalidArgument(format!("lambda = {lambda}")));
    }
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(DdeError::InvalidArgument(format!("tau = {tau}")));
    }
    if lambda * tau >= FRAC_PI_2 {
        return Err(DdeError::Unstable(lambda * tau));
    }
    Ok(())
}

// ============================================================================
// Fundamental solution
// ============================================================================

/// Fundamental solution sampled on t_i = i·h, h = τ/m.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    lambda: f64,
    tau: f64,
    m: usize,
    h: f64,
    values: Vec<f64>,
}

/// RK4 method of steps up to `horizon`. The step is rounded down to τ/m with
/// m an integer so the grid contains every multiple of τ.
pub fn fundamental_solution(lambda: f64, tau: f64, horizon: f64, step: f64) -> Result<ModeSolution, DdeError> {
    check_mode(lambda, tau)?;
    if tau <= 0.0 {
        return Err(DdeError::InvalidArgument("fundamental_solution needs tau > 0".into()));
    }
    if !(step > 0.0 && step <= tau / MIN_STEPS_PER_TAU as f64 * (1.0 + 1e-12)) {
        return Err(DdeError::InvalidStep { step, tau });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(DdeError::InvalidArgument(format!("horizon = {horizon}")));
    }
    let m = (tau / step - 1e-9).ceil() as usize;
    let mut sol = ModeSolution { lambda, tau, m, h: tau / m as f64, values: vec![1.0] };
    sol.extend_to(horizon);
    Ok(sol)
}

impl ModeSolution {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.h
    }

    /// φ at grid node k, right limit (φ(0⁺) = 1).
    fn right(&self, k: isize) -> f64 {
        if k >= 0 {
            self.values[k as usize]
        } else {
            0.0
        }
    }

    /// φ at grid node k, left limit (φ(0⁻) = 0).
    fn left(&self, k: isize) -> f64 {
        if k > 0 {
            self.values[k as usize]
        } else {
            0.0
        }
    }

    /// Hermite data (y0, y1, d0, d1) on grid cell [t_j, t_{j+1}].
    fn cell(&self, j: isize) -> (f64, f64, f64, f64) {
        if j < 0 {
            return (0.0, 0.0, 0.0, 0.0);
        }
        let m = self.m as isize;
        (
            self.right(j),
            self.left(j + 1),
            -self.lambda * self.right(j - m),
            -self.lambda * self.left(j + 1 - m),
        )
    }

    fn hermite(&self, j: isize, s: f64) -> f64 {
        let (y0, y1, d0, d1) = self.cell(j);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * self.h * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * self.h * d1
    }

    /// Extends the grid so that it covers [0, horizon].
    pub fn extend_to(&mut self, horizon: f64) {
        let target = (horizon / self.h - 1e-9).ceil().max(0.0) as usize;
        let m = self.m as isize;
        while self.values.len() <= target {
            let i = (self.values.len() - 1) as isize;
            let k1 = -self.lambda * self.right(i - m);
            let km = -self.lambda * self.hermite(i - m, 0.5);
            let k4 = -self.lambda * self.left(i + 1 - m);
            let next = self.values[i as usize] + self.h / 6.0 * (k1 + 4.0 * km + k4);
            self.values.push(next);
        }
    }

    /// φ(t); zero for t < 0. Panics beyond the computed horizon.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let x = t / self.h;
        let j = x.floor();
        let last = (self.values.len() - 1) as f64;
        assert!(x <= last + 1e-9, "t = {t} beyond horizon {}", self.horizon());
        if j >= last {
            return self.values[self.values.len() - 1];
        }
        self.hermite(j as isize, x - j)
    }

    /// Extends in chunks until |φ| < 1e-8 over a whole delay window or the
    /// cap (in absolute time) is reached.
    pub fn extend_until_decayed(&mut self, cap: f64) -> Result<(), DdeError> {
        let mut horizon = self.horizon().max(20.0 * self.tau);
        loop {
            self.extend_to(horizon.min(cap));
            let n = self.values.len();
            let window = &self.values[n.saturating_sub(self.m + 1)..];
            if window.iter().all(|v| v.abs() < DECAY_THRESHOLD) {
                return Ok(());
            }
            if horizon >= cap {
                return Err(DdeError::SlowDecay { lambda: self.lambda, tau: self.tau, cap });
            }
            horizon *= 2.0;
        }
    }

    /// Breakpoints kτ inside [a, b], with both ends.
    fn breakpoints(&self, a: f64, b: f64, shift: f64) -> Vec<f64> {
        let mut pts = vec![a];
        let first = ((a - shift) / self.tau).floor() as i64 + 1;
        let mut k = first;
        loop {
            let p = shift + k as f64 * self.tau;
            if p >= b {
                break;
            }
            if p > a {
                pts.push(p);
            }
            k += 1;
        }
        pts.push(b);
        pts
    }
}

/// Exact method-of-steps series Σ_j (−λ)^j (t − jτ)^j / j!, j ≤ ⌊t/τ⌋.
/// Accurate for moderate t/τ only (alternating cancellation).
pub fn fundamental_series(lambda: f64, tau: f64, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let jmax = (t / tau).floor() as usize;
    let mut sum = 0.0;
    let mut fact = 1.0;
    for j in 0..=jmax {
        if j > 0 {
            fact *= j as f64;
        }
        sum += (-lambda * (t - j as f64 * tau)).powi(j as i32) / fact;
    }
    sum
}

// ============================================================================
// Quadrature
// ============================================================================

/// Adaptive Simpson on [a, b] with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn piecewise_simpson(f: &impl Fn(f64) -> f64, pts: &[f64], tol: f64) -> f64 {
    let per = tol / pts.len().max(2) as f64;
    pts.windows(2).map(|w| adaptive_simpson(f, w[0], w[1], per)).sum()
}

// ============================================================================
// Energy and autocorrelation
// ============================================================================

/// ∫₀ᵀ φ²(t) dt. λ = 0 gives T; τ = 0 gives the exponential closed form.
pub fn energy_integral(lambda: f64, tau: f64, t_end: f64) -> Result<f64, DdeError> {
    check_mode(lambda, tau)?;
    if !(t_end >= 0.0) {
        return Err(DdeError::InvalidArgument(format!("T = {t_end}")));
    }
    if lambda == 0.0 {
        return Ok(t_end);
    }
    if tau == 0.0 {
        return Ok(-(-2.0 * lambda * t_end).exp_m1() / (2.0 * lambda));
    }
    let sol = fundamental_solution(lambda, tau, t_end, tau / DEFAULT_STEPS_PER_TAU as f64)?;
    Ok(mode_energy(&sol, t_end))
}

fn mode_energy(sol: &ModeSolution, t_end: f64) -> f64 {
    let pts = sol.breakpoints(0.0, t_end, 0.0);
    piecewise_simpson(&|t| sol.value(t).powi(2), &pts, ENERGY_TOL)
}

/// ∫₀^∞ φ² = τ·f(λτ); the τ → 0 limit 1/(2λ) is returned for τ = 0.
pub fn steady_energy(lambda: f64, tau: f64) -> Result<f64, DdeError> {
    check_mode(lambda, tau)?;
    if lambda <= 0.0 {
        return Err(DdeError::InvalidArgument("steady energy needs lambda > 0".into()));
    }
    if tau == 0.0 {
        return Ok(0.5 / lambda);
    }
    Ok(tau * f_energy(lambda * tau)?)
}

/// d/dτ of τ·f(λτ), which simplifies to 1/(2(1 − sin λτ)).
pub fn steady_energy_tau_derivative(lambda: f64, tau: f64) -> Result<f64, DdeError> {
    check_mode(lambda, tau)?;
    Ok(0.5 / (1.0 - (lambda * tau).sin()))
}

/// V(ρ) = ∫ φ(t)φ(t − ρ) dt over t ≥ max(0, ρ), truncated once |φ| < 1e-8.
pub fn autocorrelation_v(lambda: f64, tau: f64, rho: f64) -> Result<f64, DdeError> {
    check_mode(lambda, tau)?;
    if !(lambda > 0.0 && tau > 0.0) {
        return Err(DdeError::InvalidArgument("V(rho) needs lambda > 0 and tau > 0".into()));
    }
    let mut sol = fundamental_solution(lambda, tau, 20.0 * tau, tau / DEFAULT_STEPS_PER_TAU as f64)?;
    sol.extend_until_decayed(DECAY_CAP_LAMBDA_UNITS / lambda)?;
    let end = sol.horizon() - rho.abs();
    let start = rho.max(0.0);
    let mut pts = sol.breakpoints(start, end, 0.0);
    pts.extend(sol.breakpoints(start, end, rho));
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    Ok(piecewise_simpson(&|t| sol.value(t) * sol.value(t - rho), &pts, 1e-10))
}

// ============================================================================
// Network transients
// ============================================================================

/// Initial segment ϕ on [−τ, 0], sampled per node on a uniform grid and
/// linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFunction {
    tau: f64,
    samples: Vec<Vec<f64>>,
}

impl HistoryFunction {
    /// `samples[g]` holds the node values at t = −τ + g·τ/(len − 1).
    pub fn new(tau: f64, samples: Vec<Vec<f64>>) -> Result<Self, DdeError> {
        if !(tau >= 0.0 && tau.is_finite()) {
            return Err(DdeError::InvalidArgument(format!("history tau = {tau}")));
        }
        if samples.is_empty() || (tau > 0.0 && samples.len() < 2) {
            return Err(DdeError::InvalidArgument("history grid needs at least two samples".into()));
        }
        let n = samples[0].len();
        if n == 0 || samples.iter().any(|s| s.len() != n || s.iter().any(|v| !v.is_finite())) {
            return Err(DdeError::InvalidArgument("history samples must be finite and rectangular".into()));
        }
        Ok(Self { tau, samples })
    }

    /// Constant history ϕ(t) = values.
    pub fn constant(tau: f64, values: Vec<f64>) -> Result<Self, DdeError> {
        Self::new(tau, vec![values.clone(), values])
    }

    pub fn zero(tau: f64, n: usize) -> Self {
        Self::constant(tau, vec![0.0; n]).expect("zero history is valid")
    }

    /// Samples `f` at `points` uniformly spaced times covering [−τ, 0].
    pub fn from_fn(tau: f64, points: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self, DdeError> {
        let points = points.max(2);
        let samples = (0..points).map(|g| f(-tau + tau * g as f64 / (points - 1) as f64)).collect();
        Self::new(tau, samples)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.samples[0].len()
    }

    /// Sample times (ascending, ending at 0).
    pub fn grid(&self) -> Vec<f64> {
        let g = self.samples.len();
        if g == 1 {
            return vec![0.0];
        }
        (0..g).map(|k| -self.tau + self.tau * k as f64 / (g - 1) as f64).collect()
    }

    /// ϕ(t) for t ∈ [−τ, 0].
    pub fn value(&self, t: f64) -> Vec<f64> {
        let g = self.samples.len();
        if g == 1 || self.tau == 0.0 {
            return self.samples[g - 1].clone();
        }
        let x = ((t + self.tau) / self.tau * (g - 1) as f64).clamp(0.0, (g - 1) as f64);
        let k = (x.floor() as usize).min(g - 2);
        let s = x - k as f64;
        self.samples[k].iter().zip(&self.samples[k + 1]).map(|(a, b)| a + s * (b - a)).collect()
    }

    /// Projection of every sample onto the eigenbasis: ϕ^Q on the grid.
    fn projected(&self, s: &Spectrum) -> Vec<Vec<f64>> {
        self.samples.iter().map(|v| s.coefficients(v)).collect()
    }
}

/// Mode solutions for every eigenvalue of a spectrum at one delay, extended
/// on demand. Reused across evaluation times.
#[derive(Debug, Clone)]
pub struct TransientEngine<'a> {
    spectrum: &'a Spectrum,
    tau: f64,
    modes: Vec<Option<ModeSolution>>,
}

impl<'a> TransientEngine<'a> {
    pub fn new(spectrum: &'a Spectrum, tau: f64) -> Result<Self, DdeError> {
        check_mode(spectrum.lambda_max(), tau)?;
        let modes = spectrum
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(k, &lam)| {
                if k == 0 || tau == 0.0 {
                    Ok(None)
                } else {
                    fundamental_solution(lam, tau, 0.0, tau / DEFAULT_STEPS_PER_TAU as f64).map(Some)
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { spectrum, tau, modes })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn ensure(&mut self, t: f64) {
        for sol in self.modes.iter_mut().flatten() {
            if sol.horizon() < t {
                sol.extend_to(t.max(2.0 * sol.horizon()));
            }
        }
    }

    /// Mean of cᵀx_t for a deterministic history.
    ///
    /// Mode k contributes φ_k(t)ϕ_k(0) − λ_k ∫_{−τ}^{0} φ_k(t − s − τ) ϕ_k(s) ds.
    pub fn mean(&mut self, c: &[f64], h: &HistoryFunction, t: f64) -> Result<f64, DdeError> {
        if !(t >= 0.0) {
            return Err(DdeError::InvalidArgument(format!("t = {t}")));
        }
        if h.n() != self.spectrum.n() {
            return Err(DdeError::InvalidArgument("history dimension does not match the graph".into()));
        }
        if (h.tau() - self.tau).abs() > 1e-12 * self.tau.max(1.0) {
            return Err(DdeError::InvalidArgument("history covers a different delay".into()));
        }
        self.ensure(t);
        let cq = self.spectrum.coefficients(c);
        let hq = h.projected(self.spectrum);
        let grid = h.grid();
        let last = hq.len() - 1;
        let lambdas = self.spectrum.eigenvalues();
        let mut mu = cq[0] * hq[last][0];
        for k in 1..self.spectrum.n() {
            if cq[k] == 0.0 {
                continue;
            }
            let Some(sol) = &self.modes[k] else {
                // τ = 0: x_k(t) = e^{−λt} ϕ_k(0)
                mu += cq[k] * (-lambdas[k] * t).exp() * hq[last][k];
                continue;
            };
            let phi_k = |s: f64| -> f64 {
                let x = (s + self.tau) / self.tau * last as f64;
                let j = (x.floor() as usize).min(last.saturating_sub(1));
                let w = x - j as f64;
                if last == 0 {
                    hq[0][k]
                } else {
                    hq[j][k] + w * (hq[j + 1][k] - hq[j][k])
                }
            };
            let upper = (t - self.tau).min(0.0);
            let mut pts: Vec<f64> = grid.iter().copied().filter(|&g| g > -self.tau && g < upper).collect();
            pts.insert(0, -self.tau);
            pts.push(upper);
            // φ_k(t − s − τ) has derivative jumps where t − s − τ is a multiple of τ.
            let mut j = 0.0;
            loop {
                let s = t - self.tau - j * self.tau;
                if s <= -self.tau {
                    break;
                }
                if s < upper {
                    pts.push(s);
                }
                j += 1.0;
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let integral = piecewise_simpson(&|s| sol.value(t - s - self.tau) * phi_k(s), &pts, 1e-11);
            mu += cq[k] * (sol.value(t) * hq[last][k] - lambdas[k] * integral);
        }
        Ok(mu)
    }

    /// b²·Σ_k (c_k^Q)²·∫₀ᵗ φ_k², with the null mode contributing (c_1^Q)²·t.
    pub fn variance(&mut self, c: &[f64], b: f64, t: f64) -> Result<f64, DdeError> {
        if !(t >= 0.0) {
            return Err(DdeError::InvalidArgument(format!("t = {t}")));
        }
        self.ensure(t);
        let cq = self.spectrum.coefficients(c);
        let lambdas = self.spectrum.eigenvalues();
        let mut acc = cq[0] * cq[0] * t;
        for k in 1..self.spectrum.n() {
            if cq[k] == 0.0 {
                continue;
            }
            let e = match &self.modes[k] {
                Some(sol) => mode_energy(sol, t),
                None => -(-2.0 * lambdas[k] * t).exp_m1() / (2.0 * lambdas[k]),
            };
            acc += cq[k] * cq[k] * e;
        }
        Ok(b * b * acc)
    }
}

/// Mean of cᵀx_t; see [`TransientEngine::mean`].
pub fn transient_mean(s: &Spectrum, c: &[f64], h: &HistoryFunction, t: f64) -> Result<f64, DdeError> {
    TransientEngine::new(s, h.tau())?.mean(c, h, t)
}

/// Variance of cᵀx_t; see [`TransientEngine::variance`].
pub fn transient_variance(s: &Spectrum, c: &[f64], b: f64, tau: f64, t: f64) -> Result<f64, DdeError> {
    TransientEngine::new(s, tau)?.variance(c, b, t)
}
