//! Closed-form steady value-at-risk of the deviation from average for the
//! standard graph families, delay crossings and ordering checks.
//!
//! Each formula follows the eigenstructure of `graph::families` and is
//! guarded by [`cross_validate`]. Node indices are 0-based (hub = 0 for the
//! wheel, group G1 first for the bipartite graph, centre = 0 for the star).

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::Serialize;

use crate::graph::{generate_topology, TopologyKind};
use crate::observables::Observable;
use crate::risk::{var_risk_steady, RiskError, RiskParams};
use crate::special::{f_energy, s_epsilon};

/// Grid resolution used to bracket sign changes before bisection.
pub const CROSSING_GRID: usize = 2000;
/// Bisection tolerance on τ*.
pub const CROSSING_TOL: f64 = 1e-8;

fn validate(kind: TopologyKind) -> Result<(), RiskError> {
    kind.validate().map_err(RiskError::from)
}

/// Largest Laplacian eigenvalue of the unit-weight family.
pub fn family_lambda_max(kind: TopologyKind) -> f64 {
    match kind {
        TopologyKind::Complete(n) | TopologyKind::Star(n) => n as f64,
        TopologyKind::Wheel(m) => (m + 1) as f64,
        TopologyKind::CompleteBipartite(a, b) => (a + b) as f64,
        TopologyKind::Path(n) => 2.0 * (1.0 - (PI * (n - 1) as f64 / n as f64).cos()),
        TopologyKind::Ring(n) => 2.0 - 2.0 * (2.0 * PI * (n / 2) as f64 / n as f64).cos(),
    }
}

/// π/(2λ_max) for edge weight `weight`.
pub fn family_stability_bound(kind: TopologyKind, weight: f64) -> f64 {
    FRAC_PI_2 / (weight * family_lambda_max(kind))
}

fn energy(lambda: f64, tau: f64) -> Result<f64, RiskError> {
    if tau == 0.0 {
        return Ok(0.5 / lambda);
    }
    Ok(tau * f_energy(lambda * tau)?)
}

/// σ̄²/b² of x_i − mean(x) for the family with uniform edge weight `weight`.
pub fn table_sigma2(kind: TopologyKind, weight: f64, tau: f64, node: usize) -> Result<f64, RiskError> {
    validate(kind)?;
    let n = kind.node_count();
    if node >= n {
        return Err(RiskError::InvalidParams(format!("node {} out of range for {kind}", node + 1)));
    }
    if !(tau >= 0.0 && tau < family_stability_bound(kind, weight)) {
        return Err(RiskError::Unstable { tau, tau_max: family_stability_bound(kind, weight) });
    }
    let w = weight;
    let e = |lambda: f64| energy(w * lambda, tau);
    let nf = n as f64;
    Ok(match kind {
        TopologyKind::Complete(_) => (1.0 - 1.0 / nf) * e(nf)?,
        TopologyKind::Wheel(m) => {
            let mf = m as f64;
            if node == 0 {
                mf / (mf + 1.0) * e(mf + 1.0)?
            } else {
                let mut acc = 0.0;
                for j in 1..m {
                    acc += e(3.0 - 2.0 * (2.0 * PI * j as f64 / mf).cos())?;
                }
                acc / mf + e(mf + 1.0)? / (mf * (mf + 1.0))
            }
        }
        TopologyKind::CompleteBipartite(a, b) => bipartite_sigma2(a, b, node, e)?,
        TopologyKind::Star(_) => bipartite_sigma2(1, n - 1, node, e)?,
        TopologyKind::Path(_) => {
            // cos² is symmetric under i ↦ n − 1 − i; folding makes the mirror exact.
            let i = node.min(n - 1 - node) as f64;
            let mut acc = 0.0;
            for m in 1..n {
                let mf = m as f64;
                acc += (PI * mf * (2.0 * i + 1.0) / (2.0 * nf)).cos().powi(2) * e(2.0 * (1.0 - (PI * mf / nf).cos()))?;
            }
            2.0 * acc / nf
        }
        TopologyKind::Ring(_) => {
            let mut acc = 0.0;
            for j in 1..n {
                acc += e(2.0 - 2.0 * (2.0 * PI * j as f64 / nf).cos())?;
            }
            acc / nf
        }
    })
}

fn bipartite_sigma2(a: usize, b: usize, node: usize, e: impl Fn(f64) -> Result<f64, RiskError>) -> Result<f64, RiskError> {
    let (af, bf) = (a as f64, b as f64);
    let nf = af + bf;
    Ok(if node < a {
        (1.0 - 1.0 / af) * e(bf)? + bf / (af * nf) * e(nf)?
    } else {
        (1.0 - 1.0 / bf) * e(af)? + af / (bf * nf) * e(nf)?
    })
}

/// √2·S_ε(0)·b·√σ̄² for unit weights.
pub fn table_risk(kind: TopologyKind, p: &RiskParams, node: usize) -> Result<f64, RiskError> {
    table_risk_weighted(kind, 1.0, p, node)
}

pub fn table_risk_weighted(kind: TopologyKind, weight: f64, p: &RiskParams, node: usize) -> Result<f64, RiskError> {
    p.validate()?;
    Ok(SQRT_2 * s_epsilon(p.eps, 0.0)? * p.b * table_sigma2(kind, weight, p.tau, node)?.sqrt())
}

/// The alternative closed forms as typeset in the original table (wheel
/// hub/rim, swapped bipartite groups, path index variant, ring without 1/n).
/// These do not match the network; they exist for side-by-side reports.
pub fn table_risk_printed(kind: TopologyKind, p: &RiskParams, node: usize) -> Result<f64, RiskError> {
    validate(kind)?;
    p.validate()?;
    let n = kind.node_count();
    let tau = p.tau;
    let f = |x: f64| -> Result<f64, RiskError> { Ok(f_energy(x)?) };
    let nf = n as f64;
    let s2 = match kind {
        TopologyKind::Complete(_) => tau * (1.0 - 1.0 / nf) * f(nf * tau)?,
        TopologyKind::Wheel(m) => {
            let mf = m as f64;
            if node == 0 {
                mf * tau * f((mf + 1.0) * tau)?
            } else {
                let mut acc = 0.0;
                for k in 2..=m + 1 {
                    acc += f(3.0 - 2.0 * (2.0 * PI * (k - 1) as f64 * tau / mf).cos())?;
                }
                tau / mf * acc
            }
        }
        TopologyKind::CompleteBipartite(..) | TopologyKind::Star(_) => {
            let (a, b) = match kind {
                TopologyKind::CompleteBipartite(a, b) => (a, b),
                _ => (1, n - 1),
            };
            let (af, bf) = (a as f64, b as f64);
            if node < a {
                (1.0 - 1.0 / bf) * tau * f(bf * tau)? + bf / (af * nf) * tau * f(nf * tau)?
            } else {
                (1.0 - 1.0 / af) * tau * f(af * tau)? + af / (bf * nf) * tau * f(nf * tau)?
            }
        }
        TopologyKind::Path(_) => {
            let i = (node + 1) as f64;
            let mut acc = 0.0;
            for k in 2..=n {
                let kf = k as f64;
                acc += (PI * (nf - kf + 1.0) * (2.0 * i - 1.0) / (2.0 * nf)).cos().powi(2)
                    * f(2.0 * (1.0 - (PI * (kf - 1.0) / nf).cos()) * tau)?;
            }
            2.0 * tau / nf * acc
        }
        TopologyKind::Ring(_) => {
            let mut acc = 0.0;
            for k in 2..=n {
                acc += f(2.0 * (1.0 - (2.0 * PI * (k - 1) as f64 / nf).cos()) * tau)?;
            }
            tau * acc
        }
    };
    Ok(SQRT_2 * s_epsilon(p.eps, 0.0)? * p.b * s2.sqrt())
}

/// Largest |table_risk − generic pipeline| over all nodes.
pub fn cross_validate(kind: TopologyKind, p: &RiskParams) -> Result<f64, RiskError> {
    let s = generate_topology(kind, 1.0)?.spectrum()?;
    let n = kind.node_count();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let generic = var_risk_steady(&s, &Observable::deviation_from_average(i, n)?, p)?.value();
        worst = worst.max((table_risk(kind, p, i)? - generic).abs());
    }
    Ok(worst)
}

// ============================================================================
// Profiles
// ============================================================================

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeGroup {
    pub label: String,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyRiskProfile {
    pub kind: String,
    pub n: usize,
    pub tau: f64,
    pub risks: Vec<f64>,
    pub groups: Vec<NodeGroup>,
}

impl TopologyRiskProfile {
    pub const CSV_HEADER: &'static str = "kind,n,node,tau,risk,group";

    /// One line per node, 1-based.
    pub fn csv_rows(&self) -> Vec<String> {
        let mut rows = Vec::with_capacity(self.n);
        for (i, r) in self.risks.iter().enumerate() {
            let group = self.groups.iter().find(|g| g.nodes.contains(&i)).map(|g| g.label.as_str()).unwrap_or("");
            rows.push(format!("{},{},{},{},{},{}", self.kind, self.n, i + 1, self.tau, r, group));
        }
        rows
    }
}

/// Node classes on which the closed form is constant.
pub fn node_groups(kind: TopologyKind) -> Vec<NodeGroup> {
    let n = kind.node_count();
    let g = |label: &str, nodes: Vec<usize>| NodeGroup { label: label.to_string(), nodes };
    match kind {
        TopologyKind::Complete(_) | TopologyKind::Ring(_) => vec![g("all", (0..n).collect())],
        TopologyKind::Wheel(_) => vec![g("hub", vec![0]), g("rim", (1..n).collect())],
        TopologyKind::Star(_) => vec![g("centre", vec![0]), g("leaf", (1..n).collect())],
        TopologyKind::CompleteBipartite(a, _) => vec![g("G1", (0..a).collect()), g("G2", (a..n).collect())],
        TopologyKind::Path(_) => (0..n.div_ceil(2))
            .map(|i| {
                let mut nodes = vec![i];
                if n - 1 - i != i {
                    nodes.push(n - 1 - i);
                }
                g(&format!("pair{}", i + 1), nodes)
            })
            .collect(),
    }
}

pub fn profile(kind: TopologyKind, p: &RiskParams) -> Result<TopologyRiskProfile, RiskError> {
    let n = kind.node_count();
    let risks = (0..n).map(|i| table_risk(kind, p, i)).collect::<Result<_, _>>()?;
    Ok(TopologyRiskProfile { kind: kind.to_string(), n, tau: p.tau, risks, groups: node_groups(kind) })
}

// ============================================================================
// Crossings
// ============================================================================

/// Two steady risk curves compared over their common stability interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingPair {
    /// K_{n1} against K_{n2}, every node.
    Complete(usize, usize),
    /// Group G1 against group G2 of K_{n1,n2}.
    Bipartite(usize, usize),
    /// Hub against rim of the wheel with the given rim size.
    WheelHubRim(usize),
    /// Centre against leaf of the star.
    StarCentreLeaf(usize),
    /// Two nodes of the same path.
    PathNodes { n: usize, a: usize, b: usize },
}

impl CrossingPair {
    /// Upper end of the common stability interval.
    pub fn tau_limit(&self) -> f64 {
        match *self {
            Self::Complete(a, b) => family_stability_bound(TopologyKind::Complete(a), 1.0)
                .min(family_stability_bound(TopologyKind::Complete(b), 1.0)),
            Self::Bipartite(a, b) => family_stability_bound(TopologyKind::CompleteBipartite(a, b), 1.0),
            Self::WheelHubRim(m) => family_stability_bound(TopologyKind::Wheel(m), 1.0),
            Self::StarCentreLeaf(n) => family_stability_bound(TopologyKind::Star(n), 1.0),
            Self::PathNodes { n, .. } => family_stability_bound(TopologyKind::Path(n), 1.0),
        }
    }

    /// σ̄²(first) − σ̄²(second) at delay τ, with b = 1.
    pub fn difference(&self, tau: f64) -> Result<f64, RiskError> {
        let s = |k: TopologyKind, i: usize| table_sigma2(k, 1.0, tau, i);
        Ok(match *self {
            Self::Complete(a, b) => s(TopologyKind::Complete(a), 0)? - s(TopologyKind::Complete(b), 0)?,
            Self::Bipartite(a, b) => {
                let k = TopologyKind::CompleteBipartite(a, b);
                s(k, 0)? - s(k, a)?
            }
            Self::WheelHubRim(m) => s(TopologyKind::Wheel(m), 0)? - s(TopologyKind::Wheel(m), 1)?,
            Self::StarCentreLeaf(n) => s(TopologyKind::Star(n), 0)? - s(TopologyKind::Star(n), 1)?,
            Self::PathNodes { n, a, b } => s(TopologyKind::Path(n), a)? - s(TopologyKind::Path(n), b)?,
        })
    }
}

/// Every sign change of the difference on (0, τ_limit), each refined by
/// bisection to 1e-8.
pub fn crossing_delays(pair: CrossingPair) -> Result<Vec<f64>, RiskError> {
    let hi = pair.tau_limit() * (1.0 - 1e-9);
    let grid: Vec<f64> = (1..=CROSSING_GRID).map(|k| hi * k as f64 / CROSSING_GRID as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&t| pair.difference(t)).collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for k in 1..grid.len() {
        if vals[k - 1] == 0.0 {
            out.push(grid[k - 1]);
        } else if vals[k - 1].signum() != vals[k].signum() && vals[k] != 0.0 {
            let (mut lo, mut up, mut flo) = (grid[k - 1], grid[k], vals[k - 1]);
            while up - lo > CROSSING_TOL {
                let mid = 0.5 * (lo + up);
                let fm = pair.difference(mid)?;
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    up = mid;
                }
            }
            out.push(0.5 * (lo + up));
        }
    }
    Ok(out)
}

/// The first crossing delay, if the curves cross at all. ε only enters
/// through S_ε(0), a common factor, and is validated for consistency.
pub fn crossing_delay(pair: CrossingPair, eps: f64) -> Result<Option<f64>, RiskError> {
    s_epsilon(eps, 0.0)?;
    Ok(crossing_delays(pair)?.first().copied())
}

// ============================================================================
// Ordering claims
// ============================================================================

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub kind: String,
    pub claim: String,
    pub passed: bool,
    pub tau_star: Option<f64>,
    pub detail: String,
}

/// Evaluates the qualitative ordering usually stated for the family.
pub fn ordering_checks(kind: TopologyKind, p: &RiskParams) -> Result<OrderingReport, RiskError> {
    p.validate()?;
    s_epsilon(p.eps, 0.0)?;
    let report = |claim: &str, passed: bool, tau_star: Option<f64>, detail: String| OrderingReport {
        kind: kind.to_string(),
        claim: claim.to_string(),
        passed,
        tau_star,
        detail,
    };
    Ok(match kind {
        TopologyKind::Wheel(m) => {
            let pair = CrossingPair::WheelHubRim(m);
            let crossings = crossing_delays(pair)?;
            let small = pair.difference(1e-3 * pair.tau_limit())?;
            report(
                "hub riskier than rim for every stable delay",
                crossings.is_empty() && small > 0.0,
                crossings.first().copied(),
                format!("hub - rim variance at small delay: {small:.3e}; sign changes: {}", crossings.len()),
            )
        }
        TopologyKind::Star(n) => {
            let pair = CrossingPair::StarCentreLeaf(n);
            let crossings = crossing_delays(pair)?;
            let small = pair.difference(1e-3 * pair.tau_limit())?;
            report(
                "centre riskier than leaves for every stable delay",
                crossings.is_empty() && small > 0.0,
                crossings.first().copied(),
                format!("centre - leaf variance at small delay: {small:.3e}; sign changes: {}", crossings.len()),
            )
        }
        TopologyKind::CompleteBipartite(a, b) => {
            let pair = CrossingPair::Bipartite(a, b);
            let crossings = crossing_delays(pair)?;
            let small = pair.difference(1e-3 * pair.tau_limit())?;
            let safer = if small < 0.0 { "G1 (smaller group)" } else { "G2 (larger group)" };
            report(
                "group risks cross inside the stable range",
                crossings.len() == 1,
                crossings.first().copied(),
                format!("{safer} is safer at small delay; sign changes: {}", crossings.len()),
            )
        }
        TopologyKind::Path(n) => {
            let pair = CrossingPair::PathNodes { n, a: 0, b: (n - 1) / 2 };
            let crossings = crossing_delays(pair)?;
            let small = pair.difference(1e-3 * pair.tau_limit())?;
            let near = pair.difference(0.999 * pair.tau_limit())?;
            report(
                "end and centre nodes swap order at some delay",
                !crossings.is_empty() && small.signum() != near.signum(),
                crossings.first().copied(),
                format!("end - centre variance: {small:.3e} at small delay, {near:.3e} near the limit"),
            )
        }
        TopologyKind::Ring(n) | TopologyKind::Complete(n) => {
            let risks: Vec<f64> = (0..n).map(|i| table_risk(kind, p, i)).collect::<Result<_, _>>()?;
            let (lo, hi) = risks.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), r| (l.min(*r), h.max(*r)));
            report(
                "all nodes carry the same risk",
                hi - lo <= 1e-12 * hi.abs().max(1.0),
                None,
                format!("spread {:.3e}", hi - lo),
            )
        }
    })
}

/// Compares two rings at `fraction` of the smaller stability bound.
/// Passes when the odd ring is safer.
pub fn ring_parity_check(n_odd: usize, n_even: usize, fraction: f64, p: &RiskParams) -> Result<OrderingReport, RiskError> {
    if n_odd.is_multiple_of(2) || !n_even.is_multiple_of(2) {
        return Err(RiskError::InvalidParams("expected an odd and an even ring size".into()));
    }
    let (ko, ke) = (TopologyKind::Ring(n_odd), TopologyKind::Ring(n_even));
    let tau = fraction * family_stability_bound(ko, 1.0).min(family_stability_bound(ke, 1.0));
    let pt = p.with_tau(tau);
    let ro = table_risk(ko, &pt, 0)?;
    let re = table_risk(ke, &pt, 0)?;
    Ok(OrderingReport {
        kind: format!("{ko} vs {ke}"),
        claim: "odd ring safer than even ring near the critical delay".into(),
        passed: ro < re,
        tau_star: None,
        detail: format!("tau = {tau:.6}: odd {ro:.6}, even {re:.6}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_value() {
        let r = table_risk(TopologyKind::Complete(4), &RiskParams::new(0.05, 1.0, 0.1), 2).unwrap();
        assert!((r - 0.737_06).abs() < 1e-4);
    }

    #[test]
    fn cross_validation_all_families() {
        let kinds = [
            TopologyKind::Complete(6),
            TopologyKind::Wheel(7),
            TopologyKind::CompleteBipartite(2, 5),
            TopologyKind::Star(6),
            TopologyKind::Path(7),
            TopologyKind::Ring(8),
            TopologyKind::Ring(9),
        ];
        for k in kinds {
            let tau = 0.6 * family_stability_bound(k, 1.0);
            let dev = cross_validate(k, &RiskParams::new(0.1, 1.2, tau)).unwrap();
            assert!(dev < 1e-8, "{k}: {dev}");
        }
    }

    #[test]
    fn weighted_complete_scales() {
        let p = RiskParams::new(0.1, 1.0, 0.05);
        let w = 1.7;
        let g = generate_topology(TopologyKind::Complete(5), w).unwrap().spectrum().unwrap();
        let generic = var_risk_steady(&g, &Observable::deviation_from_average(0, 5).unwrap(), &p).unwrap().value();
        let table = table_risk_weighted(TopologyKind::Complete(5), w, &p, 0).unwrap();
        assert!((generic - table).abs() < 1e-10);
    }

    #[test]
    fn symmetries() {
        let p = RiskParams::new(0.1, 1.0, 0.3);
        for n in [6, 7] {
            let k = TopologyKind::Path(n);
            for i in 0..n {
                assert_eq!(table_risk(k, &p, i).unwrap(), table_risk(k, &p, n - 1 - i).unwrap());
            }
        }
        assert!(ordering_checks(TopologyKind::Ring(9), &p).unwrap().passed);
        assert!(table_risk(TopologyKind::Complete(4), &RiskParams::new(0.1, 1.0, 0.4), 0).is_err());
    }

    #[test]
    fn groups_cover_nodes() {
        for k in [TopologyKind::Path(7), TopologyKind::Path(6), TopologyKind::Wheel(5), TopologyKind::CompleteBipartite(2, 3)] {
            let mut all: Vec<usize> = node_groups(k).into_iter().flat_map(|g| g.nodes).collect();
            all.sort();
            assert_eq!(all, (0..k.node_count()).collect::<Vec<_>>());
        }
        let prof = profile(TopologyKind::Wheel(4), &RiskParams::new(0.1, 1.0, 0.1)).unwrap();
        assert_eq!(prof.csv_rows()[0].split(',').next_back(), Some("hub"));
    }

    #[test]
    fn complete_pair_crossing() {
        let t = crossing_delay(CrossingPair::Complete(3, 6), 0.1).unwrap().expect("crossing");
        let pair = CrossingPair::Complete(3, 6);
        assert!(pair.difference(t).unwrap().abs() < 1e-6);
        // beyond τ* the smaller complete graph is safer
        assert!(pair.difference(0.5 * (t + pair.tau_limit())).unwrap() < 0.0);
    }

    #[test]
    fn printed_and_derived_agree_where_expected() {
        let p = RiskParams::new(0.1, 1.0, 0.1);
        let k = TopologyKind::Complete(5);
        assert_eq!(table_risk_printed(k, &p, 0).unwrap(), table_risk(k, &p, 0).unwrap());
        let b = TopologyKind::CompleteBipartite(3, 3);
        assert!((table_risk_printed(b, &p, 0).unwrap() - table_risk(b, &p, 0).unwrap()).abs() < 1e-14);
    }
}
