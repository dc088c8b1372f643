//! Closed-form graph families: generators with canonical labelling and
//! their analytic eigenstructure.
//!
//! Labelling (0-based):
//! - Wheel: hub is node 0, rim nodes 1..=n in cyclic order.
//! - Complete bipartite: group G1 (size n1) first, then G2.
//! - Star(n) is K_{1,n-1} with the centre at node 0.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use super::{GraphError, Spectrum, WeightedGraph};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    Complete(usize),
    /// Wheel with `n` rim nodes (n + 1 nodes in total).
    Wheel(usize),
    CompleteBipartite(usize, usize),
    Path(usize),
    Ring(usize),
    /// Star on `n` nodes, K_{1,n-1}.
    Star(usize),
}

impl TopologyKind {
    pub fn node_count(&self) -> usize {
        match *self {
            Self::Complete(n) | Self::Path(n) | Self::Ring(n) | Self::Star(n) => n,
            Self::Wheel(n) => n + 1,
            Self::CompleteBipartite(a, b) => a + b,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let ok = match *self {
            Self::Complete(n) | Self::Path(n) | Self::Star(n) => n >= 2,
            Self::Wheel(n) | Self::Ring(n) => n >= 3,
            Self::CompleteBipartite(a, b) => a >= 1 && a <= b,
        };
        if ok {
            Ok(())
        } else {
            Err(GraphError::InvalidTopology(format!("{self} is below the family minimum")))
        }
    }

    /// Short family name used in reports.
    pub fn family(&self) -> &'static str {
        match self {
            Self::Complete(_) => "complete",
            Self::Wheel(_) => "wheel",
            Self::CompleteBipartite(..) => "bipartite",
            Self::Path(_) => "path",
            Self::Ring(_) => "ring",
            Self::Star(_) => "star",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CompleteBipartite(a, b) => write!(f, "bipartite:{a},{b}"),
            Self::Complete(n) | Self::Wheel(n) | Self::Path(n) | Self::Ring(n) | Self::Star(n) => {
                write!(f, "{}:{n}", self.family())
            }
        }
    }
}

impl FromStr for TopologyKind {
    type Err = GraphError;

    /// `complete:4`, `wheel:6`, `bipartite:2,8`, `path:7`, `ring:9`, `star:5`.
    fn from_str(s: &str) -> Result<Self, GraphError> {
        let bad = || GraphError::InvalidTopology(format!("cannot parse `{s}` (expected KIND:PARAMS)"));
        let (kind, params) = s.split_once(':').ok_or_else(bad)?;
        let nums: Vec<usize> =
            params.split(',').map(|p| p.trim().parse::<usize>()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let one = || if nums.len() == 1 { Ok(nums[0]) } else { Err(bad()) };
        let k = match kind.trim().to_ascii_lowercase().as_str() {
            "complete" | "k" => Self::Complete(one()?),
            "wheel" | "w" => Self::Wheel(one()?),
            "bipartite" => match nums.as_slice() {
                &[a, b] => Self::CompleteBipartite(a, b),
                _ => return Err(bad()),
            },
            "path" | "p" => Self::Path(one()?),
            "ring" | "cycle" | "r" => Self::Ring(one()?),
            "star" => Self::Star(one()?),
            _ => return Err(bad()),
        };
        k.validate()?;
        Ok(k)
    }
}

/// Graph of the family with every edge weight equal to `weight`.
pub fn generate_topology(kind: TopologyKind, weight: f64) -> Result<WeightedGraph, GraphError> {
    kind.validate()?;
    if !(weight > 0.0 && weight.is_finite()) {
        return Err(GraphError::InvalidParameter(format!("weight must be positive, got {weight}")));
    }
    let mut edges = Vec::new();
    match kind {
        TopologyKind::Complete(n) => {
            for i in 0..n {
                for j in (i + 1)..n {
                    edges.push((i, j, weight));
                }
            }
        }
        TopologyKind::Wheel(n) => {
            for l in 0..n {
                edges.push((0, 1 + l, weight));
                edges.push((1 + l, 1 + (l + 1) % n, weight));
            }
        }
        TopologyKind::CompleteBipartite(a, b) => {
            for i in 0..a {
                for j in a..(a + b) {
                    edges.push((i, j, weight));
                }
            }
        }
        TopologyKind::Star(n) => return generate_topology(TopologyKind::CompleteBipartite(1, n - 1), weight),
        TopologyKind::Path(n) => edges.extend((0..n - 1).map(|i| (i, i + 1, weight))),
        TopologyKind::Ring(n) => edges.extend((0..n).map(|i| (i, (i + 1) % n, weight))),
    }
    WeightedGraph::new(kind.node_count(), edges)
}

/// Closed-form eigenpairs of the unit-weight family.
pub fn analytic_spectrum(kind: TopologyKind) -> Result<Spectrum, GraphError> {
    kind.validate()?;
    let n = kind.node_count();
    let mut pairs: Vec<(f64, Vec<f64>)> = vec![(0.0, vec![1.0 / (n as f64).sqrt(); n])];
    match kind {
        TopologyKind::Complete(m) => {
            for v in helmert(m) {
                pairs.push((m as f64, v));
            }
        }
        TopologyKind::Wheel(m) => {
            for (lam, rim) in circulant_modes(m, 3.0) {
                let mut v = vec![0.0];
                v.extend(rim);
                pairs.push((lam, v));
            }
            let s = ((m * (m + 1)) as f64).sqrt();
            let mut hub = vec![-1.0 / s; m + 1];
            hub[0] = m as f64 / s;
            pairs.push(((m + 1) as f64, hub));
        }
        TopologyKind::CompleteBipartite(a, b) => pairs.extend(bipartite_modes(a, b)),
        TopologyKind::Star(m) => pairs.extend(bipartite_modes(1, m - 1)),
        TopologyKind::Path(m) => {
            let scale = (2.0 / m as f64).sqrt();
            for k in 1..m {
                let lam = 2.0 * (1.0 - (PI * k as f64 / m as f64).cos());
                let v = (0..m)
                    .map(|l| scale * (PI * (k * (2 * l + 1)) as f64 / (2 * m) as f64).cos())
                    .collect();
                pairs.push((lam, v));
            }
        }
        TopologyKind::Ring(m) => pairs.extend(circulant_modes(m, 2.0)),
    }
    let values = pairs.iter().map(|p| p.0).collect();
    let basis = Matrix::from_fn(n, n, |i, k| pairs[k].1[i]);
    Ok(Spectrum::from_parts(values, basis))
}

/// Orthonormal basis of 1^⊥ in R^m (Helmert vectors).
fn helmert(m: usize) -> Vec<Vec<f64>> {
    (1..m)
        .map(|k| {
            let s = ((k * (k + 1)) as f64).sqrt();
            let mut v = vec![0.0; m];
            v[..k].iter_mut().for_each(|x| *x = 1.0 / s);
            v[k] = -(k as f64) / s;
            v
        })
        .collect()
}

/// Real cosine/sine eigenpairs of `diag·I − A_ring` on m nodes, excluding the
/// constant mode. Eigenvalue diag − 2cos(2πj/m).
fn circulant_modes(m: usize, diag: f64) -> Vec<(f64, Vec<f64>)> {
    let mf = m as f64;
    let scale = (2.0 / mf).sqrt();
    let mut out = Vec::with_capacity(m - 1);
    for j in 1..=(m - 1) / 2 {
        let theta = 2.0 * PI * j as f64 / mf;
        let lam = diag - 2.0 * theta.cos();
        out.push((lam, (0..m).map(|l| scale * (theta * l as f64).cos()).collect()));
        out.push((lam, (0..m).map(|l| scale * (theta * l as f64).sin()).collect()));
    }
    if m.is_multiple_of(2) {
        let s = 1.0 / mf.sqrt();
        out.push((diag + 2.0, (0..m).map(|l| if l % 2 == 0 { s } else { -s }).collect()));
    }
    out
}

fn bipartite_modes(a: usize, b: usize) -> Vec<(f64, Vec<f64>)> {
    let n = a + b;
    let mut out = Vec::with_capacity(n - 1);
    for h in helmert(a) {
        let mut v = h;
        v.resize(n, 0.0);
        out.push((b as f64, v));
    }
    for h in helmert(b) {
        let mut v = vec![0.0; a];
        v.extend(h);
        out.push((a as f64, v));
    }
    let (nf, af, bf) = (n as f64, a as f64, b as f64);
    let pa = (bf / (nf * af)).sqrt();
    let pb = -(af / (nf * bf)).sqrt();
    out.push((nf, (0..n).map(|i| if i < a { pa } else { pb }).collect()));
    out
}
