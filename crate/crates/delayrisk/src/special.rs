//! Scalar special functions behind the risk formulas.
//!
//! * `erf`, `erfc`, `erf_inv`
//! * the delay energy function `f_energy(x) = cos x / (2x(1 - sin x))`
//! * `z_plus`, the fixed point of cos
//! * `s_epsilon`, the folded Gaussian quantile helper
//! * folded-normal moments and the exponential-utility factor `kappa_exp`
//! * `p_k` minimisation used by the risk/connectivity tradeoff

use std::collections::HashMap;
use std::f64::consts::{FRAC_2_SQRT_PI, FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

/// Absolute tolerance for every bisection in this module.
pub const BISECTION_TOL: f64 = 1e-11;
/// Iteration cap for every bisection in this module.
pub const BISECTION_MAX_ITER: usize = 200;
/// Golden-section tolerance in x for the `p_k` minimisation.
pub const GOLDEN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("{what}: argument {value} outside the domain {domain}")]
    Domain { what: &'static str, value: f64, domain: &'static str },
    #[error("{what}: floating-point overflow")]
    Overflow { what: &'static str },
}

fn domain(what: &'static str, value: f64, domain: &'static str) -> NumericError {
    NumericError::Domain { what, value, domain }
}

// ============================================================================
// Error function
// ============================================================================

const SERIES_CUTOFF: f64 = 2.5;

/// Error function, absolute error below 1e-15 on the real line.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    let v = if ax < SERIES_CUTOFF { erf_series(ax) } else { 1.0 - erfc_cf(ax) };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Complementary error function with full relative accuracy in the right tail.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= SERIES_CUTOFF {
        erfc_cf(x)
    } else if x > -SERIES_CUTOFF {
        1.0 - erf(x)
    } else {
        2.0 - erfc_cf(-x)
    }
}

/// erf(x) = (2/√π) e^{-x²} Σ 2^k x^{2k+1} / (2k+1)!!, all terms positive.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term > 1e-17 * sum {
        k += 1.0;
        term *= 2.0 * x2 / (2.0 * k + 1.0);
        sum += term;
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// Continued fraction erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))),
/// evaluated by the modified Lentz method; valid for x > 0.
fn erfc_cf(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// Inverse error function on (−1, 1).
pub fn erf_inv(p: f64) -> Result<f64, NumericError> {
    if !(p > -1.0 && p < 1.0) {
        return Err(domain("erf_inv", p, "(-1, 1)"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let mut x = erf_inv_guess(p);
    // Newton on erfc for the tails keeps the residual relative.
    for _ in 0..4 {
        let r = if p.abs() > 0.5 {
            let q = 1.0 - p.abs();
            -(erfc(x.abs()) - q) * p.signum()
        } else {
            erf(x) - p
        };
        let step = r / (FRAC_2_SQRT_PI * (-x * x).exp());
        x -= step;
        if step.abs() <= 1e-16 * x.abs() {
            break;
        }
    }
    Ok(x)
}

/// Single-precision starting point (Giles).
fn erf_inv_guess(x: f64) -> f64 {
    let mut w = -((1.0 - x) * (1.0 + x)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        let mut p = 2.810_226_36e-08;
        for c in [
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ] {
            p = c + p * w;
        }
        p
    } else {
        w = w.sqrt() - 3.0;
        let mut p = -0.000_200_214_257;
        for c in [
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ] {
            p = c + p * w;
        }
        p
    };
    p * x
}

// ============================================================================
// Delay energy function and its minimiser
// ============================================================================

/// f(x) = cos x / (2x(1 − sin x)) on (0, π/2).
///
/// Evaluated as tan(π/4 + x/2)/(2x), which is the same function without the
/// cancellation in 1 − sin x near π/2.
pub fn f_energy(x: f64) -> Result<f64, NumericError> {
    if !(x > 0.0 && x < FRAC_PI_2) {
        return Err(domain("f_energy", x, "(0, pi/2)"));
    }
    Ok((FRAC_PI_4 + 0.5 * x).tan() / (2.0 * x))
}

/// Positive root of cos z = z.
pub fn z_plus() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| bisect(|z| z.cos() - z, 0.0, 1.0, 1e-15))
}

/// 1 − sin z⁺.
pub fn one_minus_sin_z_plus() -> f64 {
    1.0 - z_plus().sin()
}

/// Plain bisection for a sign change of `g` on [lo, hi].
fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let glo = g(lo);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == (glo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tol {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ============================================================================
// Folded Gaussian helpers
// ============================================================================

/// Smallest δ ≥ 0 with (erf(δ) + erf(δ + 2α))/2 ≥ 1 − ε.
///
/// The condition is evaluated in the equivalent complementary form
/// (erfc(δ) + erfc(δ + 2α))/2 ≤ ε so small ε keeps full precision.
pub fn s_epsilon(eps: f64, alpha: f64) -> Result<f64, NumericError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain("s_epsilon", eps, "eps in (0, 1)"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(domain("s_epsilon", alpha, "alpha >= 0"));
    }
    let excess = |d: f64| 0.5 * (erfc(d) + erfc(d + 2.0 * alpha)) - eps;
    if excess(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while excess(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_TOL {
            break;
        }
    }
    Ok(hi)
}

/// Mean and variance of |y| for y ~ N(μ, σ²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedMoments {
    pub mean: f64,
    pub variance: f64,
}

impl FoldedMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

pub fn folded_moments(mu: f64, sigma: f64) -> FoldedMoments {
    if sigma <= 0.0 {
        return FoldedMoments { mean: mu.abs(), variance: 0.0 };
    }
    let z = mu / (SQRT_2 * sigma);
    let mean = sigma * (2.0 / PI).sqrt() * (-z * z).exp() + mu * erf(z);
    let variance = (mu * mu + sigma * sigma - mean * mean).max(0.0);
    FoldedMoments { mean, variance }
}

/// κ(μ, σ, β), defined so that E[e^{β|y|}] = e^{β²σ²/2}·κ/2 for y ~ N(μ, σ²).
pub fn kappa_exp(mu: f64, sigma: f64, beta: f64) -> Result<f64, NumericError> {
    if !(sigma > 0.0) {
        return Err(domain("kappa_exp", sigma, "sigma > 0"));
    }
    if !(beta > 0.0) {
        return Err(domain("kappa_exp", beta, "beta > 0"));
    }
    let a = mu / (SQRT_2 * sigma);
    let s = beta * sigma / SQRT_2;
    // 1 − erf(−a − s) = erfc(−a − s); 1 + erf(−a + s) = erfc(a − s).
    let k = erfc(-a - s) * (beta * mu).exp() + erfc(a - s) * (-beta * mu).exp();
    if k.is_finite() {
        Ok(k)
    } else {
        Err(NumericError::Overflow { what: "kappa_exp" })
    }
}

// ============================================================================
// p_k minimisation
// ============================================================================

/// p_k(x) = [(k−1) + 2(n−k)x/π]·cos x/(x²(1 − sin x)).
pub fn p_k(k: usize, n: usize, x: f64) -> f64 {
    let lead = (k as f64 - 1.0) + 2.0 * (n as f64 - k as f64) * x / PI;
    lead * (FRAC_PI_4 + 0.5 * x).tan() / (x * x)
}

/// Minimum of p_k over (0, π/2) by golden-section search.
pub fn p_k_minimum(k: usize, n: usize) -> Result<f64, NumericError> {
    if !(k >= 2 && k <= n) {
        return Err(domain("p_k_minimum", k as f64, "2 <= k <= n"));
    }
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (1e-8, FRAC_PI_2 - 1e-8);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (p_k(k, n, c), p_k(k, n, d));
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = p_k(k, n, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = p_k(k, n, d);
        }
    }
    Ok(p_k(k, n, 0.5 * (a + b)))
}

/// p† = min over k = 2..n of the p_k minima; cached per n.
pub fn p_dagger(n: usize) -> Result<f64, NumericError> {
    if n < 2 {
        return Err(domain("p_dagger", n as f64, "n >= 2"));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&v) = cache.lock().expect("p_dagger cache poisoned").get(&n) {
        return Ok(v);
    }
    let mut best = f64::INFINITY;
    for k in 2..=n {
        best = best.min(p_k_minimum(k, n)?);
    }
    cache.lock().expect("p_dagger cache poisoned").insert(n, best);
    Ok(best)
}
