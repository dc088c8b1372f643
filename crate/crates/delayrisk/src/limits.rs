//! Hard limits and risk/connectivity tradeoffs.
//!
//! Floors are derived from σ̄² ≥ σ*² = b²‖c‖²τ/(2(1 − sin z⁺)) and
//! σ̄²·Ξ_G ≥ (n b² τ²/2)‖c‖² p†. The `*_printed` variants evaluate the
//! alternative closed forms ϑ*√(nτ) and friends, which lack one factor of
//! √τ and are not valid floors in general; they are kept for comparison.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rayon::prelude::*;
use serde::Serialize;

use crate::graph::{random_connected_graph, GraphError, Spectrum, WeightedGraph};
use crate::joint::{steady_covariance, JointError};
use crate::observables::{Observable, ObservableSet};
use crate::risk::{exp_from_sigma, quad_from_sigma, steady_sigma, var_from_sigma, RiskError, RiskParams, RiskValue};
use crate::rng::NormalRng;
use crate::special::{erf, one_minus_sin_z_plus, p_dagger, s_epsilon};

/// Relative slack for `≥` comparisons, so that a family attaining a limit
/// exactly is not flagged by rounding.
pub const LIMIT_RTOL: f64 = 1e-12;

/// 2n(n − 1)τ/π, the lower bound on Ξ_G implied by stability.
pub fn resistance_floor(n: usize, tau: f64) -> f64 {
    2.0 * n as f64 * (n as f64 - 1.0) * tau / PI
}

/// σ* = b‖c‖√(τ/(2(1 − sin z⁺))).
pub fn sigma_star(c_norm: f64, p: &RiskParams) -> f64 {
    p.b * c_norm * (p.tau / (2.0 * one_minus_sin_z_plus())).sqrt()
}

/// κ* = ‖c‖·b·S_ε(0)/√(1 − sin z⁺).
pub fn kappa_star(c_norm: f64, p: &RiskParams) -> Result<f64, RiskError> {
    Ok(c_norm * p.b * s_epsilon(p.eps, 0.0)? / one_minus_sin_z_plus().sqrt())
}

/// κ*√τ.
pub fn var_hard_limit(c_norm: f64, p: &RiskParams) -> Result<f64, RiskError> {
    Ok(kappa_star(c_norm, p)? * p.tau.sqrt())
}

pub fn quad_hard_limit(c_norm: f64, p: &RiskParams) -> RiskValue {
    quad_from_sigma(sigma_star(c_norm, p), p.eps)
}

pub fn exp_hard_limit(c_norm: f64, p: &RiskParams, beta: f64) -> RiskValue {
    exp_from_sigma(sigma_star(c_norm, p), p.eps, beta)
}

/// ϑ* = ‖c‖·b·S_ε(0)·√p†.
pub fn theta_star(c_norm: f64, p: &RiskParams, n: usize) -> Result<f64, RiskError> {
    Ok(c_norm * p.b * s_epsilon(p.eps, 0.0)? * p_dagger(n)?.sqrt())
}

/// ϑ*·τ·√n, the floor on R_ε·√Ξ_G.
pub fn var_tradeoff_floor(c_norm: f64, p: &RiskParams, n: usize) -> Result<f64, RiskError> {
    Ok(theta_star(c_norm, p, n)? * p.tau * (n as f64).sqrt())
}

/// ϑ*·√(nτ).
pub fn var_tradeoff_floor_printed(c_norm: f64, p: &RiskParams, n: usize) -> Result<f64, RiskError> {
    Ok(theta_star(c_norm, p, n)? * (n as f64 * p.tau).sqrt())
}

/// ϱ* = ‖c‖·b·τ·√(n p†/2), the floor on σ̄·√Ξ_G.
pub fn rho_star(c_norm: f64, p: &RiskParams, n: usize) -> Result<f64, RiskError> {
    Ok(c_norm * p.b * p.tau * (n as f64 * p_dagger(n)? / 2.0).sqrt())
}

/// ‖c‖·b·√(nτp†/2).
pub fn rho_star_printed(c_norm: f64, p: &RiskParams, n: usize) -> Result<f64, RiskError> {
    Ok(c_norm * p.b * (n as f64 * p.tau * p_dagger(n)? / 2.0).sqrt())
}

/// Δ(τ) = (√(2/π) + (1 − 2/π)σ*/(2ε))·ϱ*, the floor on (T_ε + ε)√Ξ_G.
pub fn quad_tradeoff_delta(c_norm: f64, p: &RiskParams, n: usize) -> Result<f64, RiskError> {
    let s = sigma_star(c_norm, p);
    Ok(((2.0 / PI).sqrt() + (1.0 - 2.0 / PI) * s / (2.0 * p.eps)) * rho_star(c_norm, p, n)?)
}

pub fn quad_tradeoff_delta_printed(c_norm: f64, p: &RiskParams, n: usize) -> Result<f64, RiskError> {
    let s = sigma_star(c_norm, p);
    Ok(((2.0 / PI).sqrt() + (1.0 - 2.0 / PI) * s / (2.0 * p.eps)) * rho_star_printed(c_norm, p, n)?)
}

/// Δ(τ) = (β/2)σ*ϱ* + erf(βσ*/√2)/(2β)·√(2n(n − 1)τ/π).
pub fn exp_tradeoff_delta(c_norm: f64, p: &RiskParams, n: usize, beta: f64) -> Result<f64, RiskError> {
    let s = sigma_star(c_norm, p);
    Ok(beta / 2.0 * s * rho_star(c_norm, p, n)? + erf(beta * s / SQRT_2) / (2.0 * beta) * resistance_floor(n, p.tau).sqrt())
}

/// (β/2)σ*ϱ*′ + erf(βσ*/2)/β·n(n − 1)τ/π with the printed ϱ*.
pub fn exp_tradeoff_delta_printed(c_norm: f64, p: &RiskParams, n: usize, beta: f64) -> Result<f64, RiskError> {
    let s = sigma_star(c_norm, p);
    let nf = n as f64;
    Ok(beta / 2.0 * s * rho_star_printed(c_norm, p, n)? + erf(beta * s / 2.0) / beta * nf * (nf - 1.0) * p.tau / PI)
}

fn at_least(actual: f64, floor: f64) -> bool {
    actual >= floor - LIMIT_RTOL * floor.abs()
}

fn risk_at_least(actual: RiskValue, floor: RiskValue) -> bool {
    match (actual, floor) {
        (RiskValue::Infinite, _) => true,
        (RiskValue::Finite(_), RiskValue::Infinite) => false,
        (RiskValue::Finite(a), RiskValue::Finite(f)) => at_least(a, f),
    }
}

fn risk_above(actual: RiskValue, shift: f64, factor: f64, floor: f64) -> bool {
    match actual {
        RiskValue::Infinite => true,
        RiskValue::Finite(a) => (a + shift) * factor > floor,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitFlags {
    pub resistance: bool,
    pub var_hard: bool,
    pub quad_hard: bool,
    pub exp_hard: bool,
    pub var_tradeoff: bool,
    pub quad_tradeoff: bool,
    pub exp_tradeoff: bool,
}

impl LimitFlags {
    pub fn all(&self) -> bool {
        self.resistance && self.var_hard && self.quad_hard && self.exp_hard && self.var_tradeoff && self.quad_tradeoff && self.exp_tradeoff
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrintedFlags {
    pub var_tradeoff: bool,
    pub quad_tradeoff: bool,
    pub exp_tradeoff: bool,
}

/// Every floor next to the value it bounds, for one scalar observable.
/// Exponential entries are `None` when β is not set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub n: usize,
    pub tau: f64,
    pub resistance_floor: f64,
    pub resistance: f64,
    pub sigma_star: f64,
    pub sigma: f64,
    pub var_hard_limit: f64,
    pub var_risk: RiskValue,
    pub quad_hard_limit: RiskValue,
    pub quad_risk: RiskValue,
    pub exp_hard_limit: Option<RiskValue>,
    pub exp_risk: Option<RiskValue>,
    pub tradeoff_floor: f64,
    pub tradeoff_floor_printed: f64,
    pub tradeoff_actual: f64,
    pub quad_delta: f64,
    pub quad_delta_printed: f64,
    pub exp_delta: Option<f64>,
    pub exp_delta_printed: Option<f64>,
    pub flags: LimitFlags,
    pub printed: PrintedFlags,
}

pub fn limit_report(s: &Spectrum, obs: &Observable, p: &RiskParams) -> Result<LimitReport, RiskError> {
    let n = s.n();
    let cn = obs.norm();
    let sigma = steady_sigma(s, obs, p)?;
    let xi = s.total_effective_resistance()?;
    let sx = xi.sqrt();
    let var_risk = var_from_sigma(sigma, p.eps)?;
    let quad_risk = quad_from_sigma(sigma, p.eps);
    let exp_risk = p.beta.map(|beta| exp_from_sigma(sigma, p.eps, beta));
    let var_hard = var_hard_limit(cn, p)?;
    let quad_hard = quad_hard_limit(cn, p);
    let exp_hard = p.beta.map(|beta| exp_hard_limit(cn, p, beta));
    let tradeoff_floor = var_tradeoff_floor(cn, p, n)?;
    let tradeoff_floor_printed = var_tradeoff_floor_printed(cn, p, n)?;
    let tradeoff_actual = var_risk.value() * sx;
    let quad_delta = quad_tradeoff_delta(cn, p, n)?;
    let quad_delta_printed = quad_tradeoff_delta_printed(cn, p, n)?;
    let exp_delta = p.beta.map(|beta| exp_tradeoff_delta(cn, p, n, beta)).transpose()?;
    let exp_delta_printed = p.beta.map(|beta| exp_tradeoff_delta_printed(cn, p, n, beta)).transpose()?;
    let resistance_floor = resistance_floor(n, p.tau);
    let exp_ok = |delta: Option<f64>| match (exp_risk, delta) {
        (Some(r), Some(d)) => risk_above(r, p.eps, sx, d),
        _ => true,
    };
    let flags = LimitFlags {
        resistance: xi > resistance_floor,
        var_hard: risk_at_least(var_risk, RiskValue::Finite(var_hard)),
        quad_hard: risk_at_least(quad_risk, quad_hard),
        exp_hard: match (exp_risk, exp_hard) {
            (Some(r), Some(h)) => risk_at_least(r, h),
            _ => true,
        },
        var_tradeoff: tradeoff_actual > tradeoff_floor,
        quad_tradeoff: risk_above(quad_risk, p.eps, sx, quad_delta),
        exp_tradeoff: exp_ok(exp_delta),
    };
    let printed = PrintedFlags {
        var_tradeoff: tradeoff_actual > tradeoff_floor_printed,
        quad_tradeoff: risk_above(quad_risk, p.eps, sx, quad_delta_printed),
        exp_tradeoff: exp_ok(exp_delta_printed),
    };
    Ok(LimitReport {
        n,
        tau: p.tau,
        resistance_floor,
        resistance: xi,
        sigma_star: sigma_star(cn, p),
        sigma,
        var_hard_limit: var_hard,
        var_risk,
        quad_hard_limit: quad_hard,
        quad_risk,
        exp_hard_limit: exp_hard,
        exp_risk,
        tradeoff_floor,
        tradeoff_floor_printed,
        tradeoff_actual,
        quad_delta,
        quad_delta_printed,
        exp_delta,
        exp_delta_printed,
        flags,
        printed,
    })
}

// ============================================================================
// Vector observables
// ============================================================================

/// Θ*·τ·√n componentwise, Θ*_i = b·S_ε(0)·√p†·‖c_i‖.
pub fn vector_tradeoff(set: &ObservableSet, p: &RiskParams, n: usize) -> Result<Vec<f64>, RiskError> {
    set.rows().iter().map(|o| var_tradeoff_floor(o.norm(), p, n)).collect()
}

/// Θ*·√(nτ) componentwise.
pub fn vector_tradeoff_printed(set: &ObservableSet, p: &RiskParams, n: usize) -> Result<Vec<f64>, RiskError> {
    set.rows().iter().map(|o| var_tradeoff_floor_printed(o.norm(), p, n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorHardLimits {
    /// κ*_i√τ per observable.
    pub var: Vec<f64>,
    /// √(2/π)σ*_i − √(ε² − (1 − 2/π)‖σ*‖²), infinite when the root is complex.
    pub quad: Vec<RiskValue>,
    /// b√(τ/(π(1 − sin z⁺)))·Σ‖c_i‖ − ε, a floor on the sum of the exponential vector risk.
    pub exp_sum: f64,
}

pub fn vector_hard_limits(set: &ObservableSet, p: &RiskParams) -> Result<VectorHardLimits, RiskError> {
    let norms: Vec<f64> = set.rows().iter().map(|o| o.norm()).collect();
    let stars: Vec<f64> = norms.iter().map(|c| sigma_star(*c, p)).collect();
    let disc = p.eps * p.eps - (1.0 - 2.0 / PI) * stars.iter().map(|s| s * s).sum::<f64>();
    let quad = stars
        .iter()
        .map(|s| if disc < 0.0 { RiskValue::Infinite } else { RiskValue::Finite((2.0 / PI).sqrt() * s - disc.sqrt()) })
        .collect();
    Ok(VectorHardLimits {
        var: norms.iter().map(|c| var_hard_limit(*c, p)).collect::<Result<_, _>>()?,
        quad,
        exp_sum: p.b * (p.tau / (PI * one_minus_sin_z_plus())).sqrt() * norms.iter().sum::<f64>() - p.eps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VectorLimitReport {
    pub sigmas: Vec<f64>,
    pub var_risks: Vec<RiskValue>,
    pub tradeoff_floor: Vec<f64>,
    pub tradeoff_floor_printed: Vec<f64>,
    pub tradeoff_actual: Vec<f64>,
    pub hard: VectorHardLimits,
    /// Smallest coordinate over the joint quadratic risk set, center_i − radius.
    pub quad_set_min: Vec<RiskValue>,
    /// Σ_i of the scalar steady exponential risks at threshold ε/q; the
    /// exponential vector sum is bounded below by the same floor.
    pub exp_sum_scalar: Option<f64>,
    pub var_hard_ok: bool,
    pub tradeoff_ok: bool,
    pub tradeoff_printed_ok: bool,
    pub quad_hard_ok: bool,
    pub exp_hard_ok: bool,
}

pub fn vector_limit_report(s: &Spectrum, set: &ObservableSet, p: &RiskParams) -> Result<VectorLimitReport, JointError> {
    let n = s.n();
    let out = steady_covariance(s, set, p)?;
    let sx = s.total_effective_resistance().map_err(RiskError::from)?.sqrt();
    let sigmas = out.sigmas().to_vec();
    let var_risks: Vec<RiskValue> = sigmas.iter().map(|sg| var_from_sigma(*sg, p.eps)).collect::<Result<_, _>>()?;
    let tradeoff_floor = vector_tradeoff(set, p, n)?;
    let tradeoff_floor_printed = vector_tradeoff_printed(set, p, n)?;
    let tradeoff_actual: Vec<f64> = var_risks.iter().map(|r| r.value() * sx).collect();
    let hard = vector_hard_limits(set, p)?;
    let sphere = crate::joint::joint_quad_risk(&out, p.eps)?;
    let quad_set_min: Vec<RiskValue> = sphere
        .center
        .iter()
        .map(|c| if sphere.feasible { RiskValue::Finite(c - sphere.radius) } else { RiskValue::Infinite })
        .collect();
    let q = set.len() as f64;
    let exp_sum_scalar = p.beta.map(|beta| sigmas.iter().map(|sg| exp_from_sigma(*sg, p.eps / q, beta).value()).sum::<f64>());
    Ok(VectorLimitReport {
        var_hard_ok: var_risks.iter().zip(&hard.var).all(|(r, h)| risk_at_least(*r, RiskValue::Finite(*h))),
        tradeoff_ok: tradeoff_actual.iter().zip(&tradeoff_floor).all(|(a, f)| a > f),
        tradeoff_printed_ok: tradeoff_actual.iter().zip(&tradeoff_floor_printed).all(|(a, f)| a > f),
        quad_hard_ok: quad_set_min.iter().zip(&hard.quad).all(|(a, f)| risk_at_least(*a, *f)),
        exp_hard_ok: exp_sum_scalar.is_none_or(|e| at_least(e, hard.exp_sum)),
        sigmas,
        var_risks,
        tradeoff_floor,
        tradeoff_floor_printed,
        tradeoff_actual,
        hard,
        quad_set_min,
        exp_sum_scalar,
    })
}

// ============================================================================
// Random instances and the tradeoff scatter
// ============================================================================

/// A random connected graph scaled so that λ_nτ = u·π/2 with
/// u ~ U(0.02, 0.98), and a unit-norm observable orthogonal to 1.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub graph: WeightedGraph,
    pub spectrum: Spectrum,
    pub c: Vec<f64>,
}

impl RandomInstance {
    pub fn generate(n: usize, tau: f64, seed: u64, index: u64) -> Result<Self, RiskError> {
        let mut rng = NormalRng::new(seed, index);
        // sparse draws on small n can exhaust the connectivity retries; redraw the density
        let base = loop {
            let edge_prob = 0.2 + 0.8 * rng.uniform();
            let graph_seed = (rng.uniform() * u64::MAX as f64) as u64;
            match random_connected_graph(n, edge_prob, 0.1, 1.0, None, graph_seed) {
                Err(GraphError::ConnectivityNotReached(_)) => continue,
                other => break other?,
            }
        };
        let lam = base.spectrum()?.lambda_max();
        let u = 0.02 + 0.96 * rng.uniform();
        let graph = base.scaled(u * FRAC_PI_2 / (lam * tau));
        let spectrum = graph.spectrum()?;
        let c = random_unit_kernel_vector(n, &mut rng);
        Ok(Self { graph, spectrum, c })
    }

    /// `q` further unit-norm observables from the same stream.
    pub fn extra_observables(n: usize, q: usize, seed: u64, index: u64) -> Vec<Vec<f64>> {
        let mut rng = NormalRng::new(seed ^ 0x9e37_79b9_7f4a_7c15, index);
        (0..q).map(|_| random_unit_kernel_vector(n, &mut rng)).collect()
    }
}

fn random_unit_kernel_vector(n: usize, rng: &mut NormalRng) -> Vec<f64> {
    let mut c = vec![0.0; n];
    rng.fill_normal(&mut c);
    let mean = c.iter().sum::<f64>() / n as f64;
    c.iter_mut().for_each(|v| *v -= mean);
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.iter_mut().for_each(|v| *v /= norm);
    c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub sqrt_resistance: f64,
    /// R_ε/(√2·S_ε(0)), i.e. σ̄.
    pub risk: f64,
    pub passes_hard: bool,
    pub passes_tradeoff: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterTable {
    pub n: usize,
    pub tau: f64,
    pub eps: f64,
    pub points: Vec<ScatterPoint>,
    /// Normalized hard limit κ*√τ/(√2 S_ε(0)) (horizontal line).
    pub hard_risk: f64,
    /// √(2n(n − 1)τ/π) (vertical line).
    pub hard_sqrt_resistance: f64,
    /// Normalized tradeoff constant: the curve is risk = tradeoff / sqrt_resistance.
    pub tradeoff: f64,
    /// (sqrt_resistance, risk) along the complete graph with equal weights.
    pub complete_family: Vec<(f64, f64)>,
}

impl ScatterTable {
    pub const CSV_HEADER: &'static str = "sqrt_resistance,risk,passes_hard,passes_tradeoff";

    pub fn csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            s.push_str(&format!("{},{},{},{}\n", p.sqrt_resistance, p.risk, p.passes_hard, p.passes_tradeoff));
        }
        s
    }

    pub fn violations(&self) -> usize {
        self.points.iter().filter(|p| !(p.passes_hard && p.passes_tradeoff)).count()
    }
}

/// `count` random unit-norm instances on n nodes (b = 1), normalized by
/// √2·S_ε(0), with the limit curves.
pub fn tradeoff_scatter(n: usize, count: usize, tau: f64, eps: f64, seed: u64) -> Result<ScatterTable, RiskError> {
    let p = RiskParams::new(eps, 1.0, tau);
    p.validate()?;
    let norm = SQRT_2 * s_epsilon(eps, 0.0)?;
    let hard = var_hard_limit(1.0, &p)?;
    let trade = var_tradeoff_floor(1.0, &p, n)?;
    let points = (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let inst = RandomInstance::generate(n, tau, seed, k)?;
            let obs = Observable::custom(inst.c.clone())?;
            let sigma = steady_sigma(&inst.spectrum, &obs, &p)?;
            let r = norm * sigma;
            let sx = inst.spectrum.total_effective_resistance()?.sqrt();
            Ok(ScatterPoint {
                sqrt_resistance: sx,
                risk: sigma,
                passes_hard: at_least(r, hard) && sx * sx > resistance_floor(n, tau),
                passes_tradeoff: r * sx > trade,
            })
        })
        .collect::<Result<Vec<_>, RiskError>>()?;
    let complete_family = (1..200)
        .map(|j| {
            // λτ = x on K_n: Ξ = n(n − 1)τ/x, σ̄² = τf(x) for a unit kernel c.
            let x = FRAC_PI_2 * j as f64 / 200.0;
            let sig = (tau * crate::special::f_energy(x)?).sqrt();
            Ok(((n as f64 * (n as f64 - 1.0) * tau / x).sqrt(), sig))
        })
        .collect::<Result<Vec<_>, RiskError>>()?;
    Ok(ScatterTable {
        n,
        tau,
        eps,
        points,
        hard_risk: hard / norm,
        hard_sqrt_resistance: resistance_floor(n, tau).sqrt(),
        tradeoff: trade / norm,
        complete_family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_topology, TopologyKind};
    use crate::special::z_plus;

    #[test]
    fn resistance_floor_values() {
        assert!((resistance_floor(2, PI / 4.0) - 1.0).abs() < 1e-15);
        assert_eq!(resistance_floor(5, 0.0), 0.0);
    }

    #[test]
    fn limits_scale_with_c() {
        let p = RiskParams::new(0.05, 0.7, 0.3);
        assert!((var_hard_limit(2.5, &p).unwrap() - 2.5 * var_hard_limit(1.0, &p).unwrap()).abs() < 1e-14);
        assert!((sigma_star(2.5, &p) - 2.5 * sigma_star(1.0, &p)).abs() < 1e-14);
        let tiny = RiskParams::new(0.2, 0.0, 0.3);
        assert_eq!(quad_hard_limit(1.0, &tiny), RiskValue::Finite(-0.2));
        assert_eq!(exp_hard_limit(1.0, &tiny, 1.0), RiskValue::Finite(-0.2));
    }

    #[test]
    fn complete_family_attains_hard_limit() {
        for n in [3usize, 5, 8] {
            let tau = 0.4;
            let g = generate_topology(TopologyKind::Complete(n), z_plus() / (n as f64 * tau)).unwrap();
            let s = g.spectrum().unwrap();
            let c = Observable::deviation_from_average(0, n).unwrap();
            let p = RiskParams::new(0.05, 1.0, tau);
            let rep = limit_report(&s, &c, &p).unwrap();
            assert!((rep.var_risk.value() / rep.var_hard_limit - 1.0).abs() < 1e-9);
            assert!(rep.flags.var_hard);
        }
    }

    #[test]
    fn random_instances_satisfy_limits() {
        for k in 0..40 {
            let n = 3 + (k % 8) as usize;
            let inst = RandomInstance::generate(n, 0.4, 17, k).unwrap();
            let obs = Observable::custom(inst.c.clone()).unwrap();
            let p = RiskParams::new(0.1, 1.3, 0.4).with_beta(0.8);
            let rep = limit_report(&inst.spectrum, &obs, &p).unwrap();
            assert!(rep.flags.all(), "{k}: {:?}", rep.flags);
            assert!((obs.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vector_q1_matches_scalar() {
        let s = generate_topology(TopologyKind::Path(5), 1.0).unwrap().spectrum().unwrap();
        let obs = Observable::pairwise(0, 4, 5).unwrap();
        let p = RiskParams::new(0.1, 1.0, 0.2).with_beta(1.0);
        let set = ObservableSet::new(vec![obs.clone()]).unwrap();
        let v = vector_limit_report(&s, &set, &p).unwrap();
        let sc = limit_report(&s, &obs, &p).unwrap();
        assert!((v.tradeoff_floor[0] - sc.tradeoff_floor).abs() < 1e-14);
        assert_eq!(v.hard.quad[0], sc.quad_hard_limit);
        assert!((v.hard.var[0] - sc.var_hard_limit).abs() < 1e-14);
        assert!(v.var_hard_ok && v.tradeoff_ok && v.quad_hard_ok && v.exp_hard_ok);
    }

    #[test]
    fn scatter_reproducible_and_clean() {
        let a = tradeoff_scatter(6, 25, 0.4, 0.05, 3).unwrap();
        let b = tradeoff_scatter(6, 25, 0.4, 0.05, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.violations(), 0);
        assert!(a.csv().starts_with(ScatterTable::CSV_HEADER));
        let best = a.complete_family.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert!((best / a.hard_risk - 1.0).abs() < 0.01);
    }
}
