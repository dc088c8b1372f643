//! Risk of several observables at once, ȳ = Cx̄ ~ N(0, Σ̄).
//!
//! The exact joint value-at-risk is a Pareto set and is not computed.
//! Instead this module brackets it (Fréchet floors, Bonferroni ceilings),
//! evaluates the quadratic and exponential expectation constraints, and
//! estimates joint probabilities by Monte Carlo.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dde::steady_energy;
use crate::graph::Spectrum;
use crate::linalg::{symmetric_eigen, LinalgError, Matrix};
use crate::observables::{ObservableError, ObservableSet};
use crate::risk::{RiskError, RiskParams, RiskValue};
use crate::rng::NormalRng;
use crate::special::{s_epsilon, NumericError};

/// Monte Carlo samples per block. Each block has its own random stream.
pub const MC_BLOCK: usize = 4096;
/// Eigenvalues of Σ̄ in [−PSD_TOL, 0) are clamped to zero.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JointError {
    #[error("observable {0} violates the kernel condition; the steady output is unbounded")]
    Unbounded(String),
    #[error("invalid eps split: {0}")]
    InvalidSplit(String),
    #[error("covariance is not positive semidefinite (eigenvalue {0})")]
    NotPsd(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Steady output law: covariance and per-row standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyOutput {
    covariance: Matrix,
    sigmas: Vec<f64>,
}

impl SteadyOutput {
    /// Wraps a symmetric PSD covariance (checked to 1e-9 symmetry and
    /// eigenvalues ≥ −1e-10).
    pub fn from_covariance(covariance: Matrix) -> Result<Self, JointError> {
        if !covariance.is_square() || covariance.rows() == 0 {
            return Err(JointError::InvalidArgument("covariance must be a non-empty square matrix".into()));
        }
        let q = covariance.rows();
        let scale = covariance.frobenius().max(1.0);
        for i in 0..q {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-9 * scale {
                    return Err(JointError::InvalidArgument("covariance is not symmetric".into()));
                }
            }
        }
        let min = symmetric_eigen(&covariance)?.values[0];
        if min < -PSD_TOL * scale {
            return Err(JointError::NotPsd(min));
        }
        let sigmas = (0..q).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
        Ok(Self { covariance, sigmas })
    }

    pub fn covariance(&self) -> &Matrix {
        &self.covariance
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn q(&self) -> usize {
        self.sigmas.len()
    }
}

/// Σ̄ = b²·Σ_{k≥2} τf(λ_kτ)·(Cq_k)(Cq_k)ᵀ.
pub fn steady_covariance(s: &Spectrum, set: &ObservableSet, p: &RiskParams) -> Result<SteadyOutput, JointError> {
    p.validate_for(s)?;
    if set.n() != s.n() {
        return Err(ObservableError::Dimension { expected: s.n(), got: set.n() }.into());
    }
    let q = set.len();
    let mut coeffs = Vec::with_capacity(q);
    for obs in set.rows() {
        let cq = obs.coefficients(s)?;
        if !obs.in_kernel() {
            return Err(JointError::Unbounded(obs.label()));
        }
        coeffs.push(cq);
    }
    let lambdas = s.eigenvalues();
    let weights: Vec<f64> = (1..s.n()).map(|k| steady_energy(lambdas[k], p.tau)).collect::<Result<_, _>>().map_err(RiskError::from)?;
    let b2 = p.b * p.b;
    let cov = Matrix::from_fn(q, q, |i, j| {
        b2 * (1..s.n()).map(|k| weights[k - 1] * coeffs[i][k] * coeffs[j][k]).sum::<f64>()
    });
    // exact symmetry
    let cov = cov.add(&cov.transpose()).scale(0.5);
    SteadyOutput::from_covariance(cov)
}

// ============================================================================
// Probability risk bounds
// ============================================================================

/// Equal split ε/q.
pub fn equal_split(eps: f64, q: usize) -> Vec<f64> {
    vec![eps / q as f64; q]
}

fn check_split(eps: f64, split: &[f64], q: usize) -> Result<(), JointError> {
    if split.len() != q {
        return Err(JointError::InvalidSplit(format!("{} parts for {q} observables", split.len())));
    }
    if split.iter().any(|e| !(*e > 0.0)) {
        return Err(JointError::InvalidSplit("every part must be positive".into()));
    }
    let sum: f64 = split.iter().sum();
    if (sum - eps).abs() > 1e-9 * eps {
        return Err(JointError::InvalidSplit(format!("parts sum to {sum}, expected {eps}")));
    }
    Ok(())
}

/// Per-coordinate floors √2·S_ε(0)·σ̄_i with ceilings available for any split.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskBox {
    eps: f64,
    sigmas: Vec<f64>,
    lower: Vec<f64>,
}

impl RiskBox {
    pub fn new(out: &SteadyOutput, eps: f64) -> Result<Self, JointError> {
        let s0 = s_epsilon(eps, 0.0)?;
        let lower = out.sigmas().iter().map(|s| SQRT_2 * s0 * s).collect();
        Ok(Self { eps, sigmas: out.sigmas().to_vec(), lower })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Bonferroni ceilings √2·S_{ε_i}(0)·σ̄_i.
    pub fn upper(&self, split: &[f64]) -> Result<Vec<f64>, JointError> {
        check_split(self.eps, split, self.sigmas.len())?;
        self.sigmas
            .iter()
            .zip(split)
            .map(|(s, e)| Ok(SQRT_2 * s_epsilon(*e, 0.0)? * s))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub p: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub split: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McEstimate>,
}

pub fn probability_risk_bounds(out: &SteadyOutput, eps: f64, split: &[f64]) -> Result<JointBounds, JointError> {
    let rb = RiskBox::new(out, eps)?;
    let upper = rb.upper(split)?;
    Ok(JointBounds { lower: rb.lower, upper, split: split.to_vec(), mc: None })
}

/// Bracket for the scalar joint risk of max_i |ȳ_i|: lo = max_i R_ε(|ȳ_i|),
/// hi = max_i υ_i·R_ε(|ȳ_i|) with υ_i = S_{ε/q}(0)/S_ε(0).
pub fn scalar_joint_var_bounds(out: &SteadyOutput, eps: f64) -> Result<(f64, f64), JointError> {
    let q = out.q();
    let s0 = s_epsilon(eps, 0.0)?;
    let sq = s_epsilon(eps / q as f64, 0.0)?;
    let smax = out.sigmas().iter().cloned().fold(0.0, f64::max);
    Ok((SQRT_2 * s0 * smax, SQRT_2 * sq * smax))
}

// ============================================================================
// Expectation risks
// ============================================================================

/// Joint quadratic risk set: points center + z with z ⪯ 0 and ‖z‖ = radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadRiskSphere {
    pub feasible: bool,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl QuadRiskSphere {
    pub fn contains(&self, delta: &[f64], tol: f64) -> bool {
        if !self.feasible || delta.len() != self.center.len() {
            return false;
        }
        let z: Vec<f64> = delta.iter().zip(&self.center).map(|(d, c)| d - c).collect();
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        z.iter().all(|v| *v <= tol) && (r - self.radius).abs() <= tol
    }
}

pub fn joint_quad_risk(out: &SteadyOutput, eps: f64) -> Result<QuadRiskSphere, JointError> {
    if !(eps > 0.0) {
        return Err(JointError::InvalidArgument(format!("eps = {eps} must be positive")));
    }
    let r = eps * eps - (1.0 - 2.0 / PI) * out.sigmas().iter().map(|s| s * s).sum::<f64>();
    let center = out.sigmas().iter().map(|s| (2.0 / PI).sqrt() * s).collect();
    Ok(QuadRiskSphere { feasible: r > 0.0, center, radius: r.max(0.0).sqrt() })
}

/// Per-coordinate scalar quadratic risks for a split with Σε_i² = ε².
pub fn quad_split_point(out: &SteadyOutput, eps_split: &[f64]) -> Result<Vec<RiskValue>, JointError> {
    if eps_split.len() != out.q() {
        return Err(JointError::InvalidSplit(format!("{} parts for {} observables", eps_split.len(), out.q())));
    }
    Ok(out.sigmas().iter().zip(eps_split).map(|(s, e)| crate::risk::quad_from_sigma(*s, *e)).collect())
}

/// Common δ solving E[Σ_j(|ȳ_j| − δ)²] = ε², the smaller root of
/// qδ² − 2Bδ + (A − ε²) = 0 with B = √(2/π)Σσ̄_j and A = Σσ̄_j².
pub fn homogeneous_quad_joint(out: &SteadyOutput, eps: f64) -> RiskValue {
    let q = out.q() as f64;
    let b = (2.0 / PI).sqrt() * out.sigmas().iter().sum::<f64>();
    let a: f64 = out.sigmas().iter().map(|s| s * s).sum();
    let disc = b * b - q * (a - eps * eps);
    if disc < 0.0 {
        RiskValue::Infinite
    } else {
        RiskValue::Finite((b - disc.sqrt()) / q)
    }
}

/// √(2/π)Σσ̄_j − √(ε² − Σσ̄_j² + (2/π)(Σσ̄_j)²), which agrees with
/// [`homogeneous_quad_joint`] only for q = 1.
pub fn homogeneous_quad_joint_printed(out: &SteadyOutput, eps: f64) -> RiskValue {
    let s: f64 = out.sigmas().iter().sum();
    let a: f64 = out.sigmas().iter().map(|s| s * s).sum();
    let disc = eps * eps - a + 2.0 / PI * s * s;
    if disc < 0.0 {
        RiskValue::Infinite
    } else {
        RiskValue::Finite((2.0 / PI).sqrt() * s - disc.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpJointSum {
    /// Σδ_i = ln(E[e^{βΣ|ȳ_i|}])/β − ε.
    pub sum: RiskValue,
    /// Standard error of the estimate of Σδ_i (delta method).
    pub se: f64,
}

pub fn exp_joint_sum(out: &SteadyOutput, eps: f64, beta: f64, samples: usize, seed: u64) -> Result<ExpJointSum, JointError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(JointError::InvalidArgument(format!("beta = {beta} must be positive")));
    }
    let sampler = Sampler::new(out)?;
    // Per block: running max m, Σe^{v−m}, Σe^{2(v−m)}.
    let blocks = sampler.run(samples, seed, |ys| {
        let vs: Vec<f64> = ys.iter().map(|y| beta * y.iter().map(|v| v.abs()).sum::<f64>()).collect();
        let m = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (s1, s2) = vs.iter().fold((0.0, 0.0), |(a, b), v| {
            let e = (v - m).exp();
            (a + e, b + e * e)
        });
        (m, s1, s2)
    });
    let m = blocks.iter().map(|b| b.0).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return Ok(ExpJointSum { sum: RiskValue::Infinite, se: f64::NAN });
    }
    let (s1, s2) = blocks.iter().fold((0.0, 0.0), |(a, b), blk| {
        let r = (blk.0 - m).exp();
        (a + blk.1 * r, b + blk.2 * r * r)
    });
    let nf = samples as f64;
    let mean = s1 / nf;
    let var = (s2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0).max(1.0);
    let log_mean = m + mean.ln();
    let sum = log_mean / beta - eps;
    let se = (var / nf).sqrt() / mean / beta;
    Ok(ExpJointSum { sum: if sum.is_finite() { RiskValue::Finite(sum) } else { RiskValue::Infinite }, se })
}

// ============================================================================
// Monte Carlo
// ============================================================================

/// Estimate of ℙ(|ȳ| ⪯ δ) with its binomial standard error.
pub fn mc_joint_probability(out: &SteadyOutput, delta: &[f64], samples: usize, seed: u64) -> Result<McEstimate, JointError> {
    if delta.len() != out.q() {
        return Err(JointError::InvalidArgument(format!("delta has {} entries, expected {}", delta.len(), out.q())));
    }
    let sampler = Sampler::new(out)?;
    let hits: usize = sampler
        .run(samples, seed, |ys| ys.iter().filter(|y| y.iter().zip(delta).all(|(v, d)| v.abs() <= *d)).count())
        .into_iter()
        .sum();
    let p = hits as f64 / samples as f64;
    Ok(McEstimate { p, se: (p * (1.0 - p) / samples as f64).sqrt() })
}

/// Draws ȳ = Σ̄^{1/2} z in fixed-size blocks; block k uses stream k.
pub struct Sampler {
    root: Matrix,
}

impl Sampler {
    pub fn new(out: &SteadyOutput) -> Result<Self, JointError> {
        Ok(Self { root: symmetric_sqrt(out.covariance())? })
    }

    pub fn q(&self) -> usize {
        self.root.rows()
    }

    /// Applies `f` to each block of samples and returns per-block results in
    /// block order. The split into blocks is independent of the thread count.
    pub fn run<T: Send>(&self, samples: usize, seed: u64, f: impl Fn(&[Vec<f64>]) -> T + Sync) -> Vec<T> {
        let blocks = samples.div_ceil(MC_BLOCK);
        let q = self.q();
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let len = MC_BLOCK.min(samples - b * MC_BLOCK);
                let mut rng = NormalRng::new(seed, b as u64);
                let mut z = vec![0.0; q];
                let ys: Vec<Vec<f64>> = (0..len)
                    .map(|_| {
                        rng.fill_normal(&mut z);
                        self.root.matvec(&z)
                    })
                    .collect();
                f(&ys)
            })
            .collect()
    }
}

/// Symmetric square root through the eigen-decomposition, clamping
/// eigenvalues in [−1e-10, 0) to zero.
pub fn symmetric_sqrt(a: &Matrix) -> Result<Matrix, JointError> {
    let eig = symmetric_eigen(a)?;
    let scale = a.frobenius().max(1.0);
    let n = a.rows();
    let mut roots = Vec::with_capacity(n);
    for &v in &eig.values {
        if v < -PSD_TOL * scale {
            return Err(JointError::NotPsd(v));
        }
        roots.push(v.max(0.0).sqrt());
    }
    let u = &eig.vectors;
    Ok(Matrix::from_fn(n, n, |i, j| (0..n).map(|k| u[(i, k)] * roots[k] * u[(j, k)]).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_topology, TopologyKind};
    use crate::observables::Observable;
    use crate::risk::{quad_from_sigma, steady_sigma};
    use crate::special::erf;

    fn diag(sig: &[f64]) -> SteadyOutput {
        SteadyOutput::from_covariance(Matrix::from_fn(sig.len(), sig.len(), |i, j| if i == j { sig[i] * sig[i] } else { 0.0 }))
            .unwrap()
    }

    #[test]
    fn covariance_diagonal_matches_scalar() {
        let s = generate_topology(TopologyKind::Path(4), 1.0).unwrap().spectrum().unwrap();
        let set = ObservableSet::new(vec![Observable::pairwise(0, 3, 4).unwrap(), Observable::deviation_from_average(1, 4).unwrap()]).unwrap();
        let p = RiskParams::new(0.1, 0.8, 0.3);
        let out = steady_covariance(&s, &set, &p).unwrap();
        for (i, obs) in set.rows().iter().enumerate() {
            let sig = steady_sigma(&s, obs, &p).unwrap();
            assert!((out.covariance()[(i, i)] - sig * sig).abs() < 1e-10);
        }
        let avg = ObservableSet::new(vec![Observable::average_state(4)]).unwrap();
        assert!(matches!(steady_covariance(&s, &avg, &p), Err(JointError::Unbounded(_))));
    }

    #[test]
    fn bonferroni_ratio() {
        let out = diag(&[1.0, 1.0]);
        let b = probability_risk_bounds(&out, 0.1, &[0.05, 0.05]).unwrap();
        assert!((b.upper[0] / b.lower[0] - 1.191_57).abs() < 1e-4);
        assert!(probability_risk_bounds(&out, 0.1, &[0.05, 0.06]).is_err());
        assert!(probability_risk_bounds(&out, 0.1, &[0.1, 0.0]).is_err());
        let one = diag(&[0.7]);
        let b1 = probability_risk_bounds(&one, 0.2, &[0.2]).unwrap();
        assert!((b1.lower[0] - b1.upper[0]).abs() < 1e-15);
    }

    #[test]
    fn scalar_bounds_order() {
        let out = diag(&[1.0, 0.3, 2.0]);
        let (lo, hi) = scalar_joint_var_bounds(&out, 0.1).unwrap();
        assert!(lo <= hi);
        let ratio = s_epsilon(0.1 / 3.0, 0.0).unwrap() / s_epsilon(0.1, 0.0).unwrap();
        assert!(hi / lo <= ratio + 1e-12);
    }

    #[test]
    fn quad_sphere_cases() {
        let zero = diag(&[0.0, 0.0]);
        let sph = joint_quad_risk(&zero, 0.5).unwrap();
        assert_eq!(sph.center, vec![0.0, 0.0]);
        assert!((sph.radius - 0.5).abs() < 1e-15);
        let one = diag(&[0.8]);
        let sph = joint_quad_risk(&one, 1.0).unwrap();
        assert!((sph.center[0] - sph.radius - quad_from_sigma(0.8, 1.0).value()).abs() < 1e-14);
        let out = diag(&[0.5, 0.9]);
        let eps: f64 = 1.5;
        let split = [eps * 0.6, eps * 0.8];
        let pt: Vec<f64> = quad_split_point(&out, &split).unwrap().iter().map(|r| r.value()).collect();
        assert!(joint_quad_risk(&out, eps).unwrap().contains(&pt, 1e-9));
    }

    #[test]
    fn homogeneous_quad_roots() {
        let one = diag(&[0.8]);
        let a = homogeneous_quad_joint(&one, 1.0).value();
        assert!((a - quad_from_sigma(0.8, 1.0).value()).abs() < 1e-14);
        assert!((homogeneous_quad_joint_printed(&one, 1.0).value() - a).abs() < 1e-14);
        // qδ² = ε² at σ̄ = 0
        assert!((homogeneous_quad_joint(&diag(&[0.0, 0.0]), 0.3).value() + 0.3 / SQRT_2).abs() < 1e-15);
        assert_eq!(homogeneous_quad_joint_printed(&diag(&[0.0, 0.0]), 0.3), RiskValue::Finite(-0.3));
        // root satisfies the quadratic
        let out = diag(&[0.4, 1.1, 0.7]);
        let d = homogeneous_quad_joint(&out, 2.0).value();
        let e: f64 = out
            .sigmas()
            .iter()
            .map(|s| s * s - 2.0 * d * (2.0 / PI).sqrt() * s + d * d)
            .sum();
        assert!((e - 4.0).abs() < 1e-12);
    }

    #[test]
    fn mc_probability_and_edges() {
        let one = diag(&[1.3]);
        let delta = 1.1;
        let est = mc_joint_probability(&one, &[delta], 100_000, 7).unwrap();
        let exact = erf(delta / (1.3 * SQRT_2));
        assert!((est.p - exact).abs() < 3.0 * est.se, "{} vs {exact}", est.p);
        assert_eq!(mc_joint_probability(&one, &[1e9], 1000, 1).unwrap().p, 1.0);
        assert_eq!(mc_joint_probability(&one, &[0.0], 1000, 1).unwrap().p, 0.0);
    }

    #[test]
    fn exp_sum_cases() {
        let zero = diag(&[0.0, 0.0]);
        assert_eq!(exp_joint_sum(&zero, 0.4, 1.0, 1000, 3).unwrap().sum, RiskValue::Finite(-0.4));
        let one = diag(&[0.9]);
        let est = exp_joint_sum(&one, 0.2, 1.5, 200_000, 9).unwrap();
        let exact = crate::risk::exp_from_sigma(0.9, 0.2, 1.5).value();
        assert!((est.sum.value() - exact).abs() < 4.0 * est.se, "{:?} vs {exact}", est);
    }

    #[test]
    fn sampler_reproducible() {
        let out = diag(&[1.0, 2.0]);
        let a = mc_joint_probability(&out, &[1.0, 1.0], 10_000, 5).unwrap();
        let b = mc_joint_probability(&out, &[1.0, 1.0], 10_000, 5).unwrap();
        assert_eq!(a, b);
        let bad = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(SteadyOutput::from_covariance(bad), Err(JointError::NotPsd(_))));
    }
}
