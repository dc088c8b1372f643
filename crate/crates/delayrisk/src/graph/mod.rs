//! Weighted undirected coupling graphs, their Laplacians and spectra.
//!
//! Node indices are 0-based throughout the API. The text and JSON file
//! formats use 1-based indices.

mod families;
mod random;

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, symmetric_eigen, LinalgError, Matrix};

pub use families::{analytic_spectrum, generate_topology, TopologyKind};
pub use random::random_connected_graph;

/// λ₂ below this is treated as a disconnected spectrum.
pub const NEAR_DISCONNECTION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("a graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("node {node} out of range for n = {n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({i}, {j}) has invalid weight {w}")]
    InvalidWeight { i: usize, j: usize, w: f64 },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("spectrum is nearly disconnected: lambda_2 = {0:e}")]
    NearlyDisconnected(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read graph: {0}")]
    Io(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("no connected sample after {0} attempts")]
    ConnectivityNotReached(usize),
    #[error("invalid generator parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Undirected edge with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

/// Connected weighted graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    /// Validates and stores the edge list. Zero-weight edges are dropped.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut stored: Vec<Edge> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (a, b, w) in edges {
            for node in [a, b] {
                if node >= n {
                    return Err(GraphError::NodeOutOfRange { node, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(GraphError::InvalidWeight { i: a, j: b, w });
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((i, j)) {
                return Err(GraphError::DuplicateEdge(i, j));
            }
            if w > 0.0 {
                stored.push(Edge { i, j, w });
            }
        }
        let components = count_components(n, &stored);
        if components > 1 {
            return Err(GraphError::Disconnected { components });
        }
        Ok(Self { n, edges: stored })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.iter().find(|e| e.i == a && e.j == b).map_or(0.0, |e| e.w)
    }

    /// Neighbours of `i` with the connecting weights.
    pub fn neighbors(&self, i: usize) -> Vec<(usize, f64)> {
        self.edges
            .iter()
            .filter_map(|e| match (e.i == i, e.j == i) {
                (true, _) => Some((e.j, e.w)),
                (_, true) => Some((e.i, e.w)),
                _ => None,
            })
            .collect()
    }

    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.neighbors(i).iter().map(|(_, w)| w).sum()
    }

    /// Same graph with every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0 && factor.is_finite(), "scale factor must be positive");
        let edges = self.edges.iter().map(|e| Edge { w: e.w * factor, ..*e }).collect();
        Self { n: self.n, edges }
    }

    /// l_ij = −w_ij off the diagonal, weighted degree on it.
    pub fn laplacian(&self) -> Matrix {
        let mut l = Matrix::zeros(self.n, self.n);
        for e in &self.edges {
            l[(e.i, e.j)] -= e.w;
            l[(e.j, e.i)] -= e.w;
            l[(e.i, e.i)] += e.w;
            l[(e.j, e.j)] += e.w;
        }
        l
    }

    pub fn spectrum(&self) -> Result<Spectrum, GraphError> {
        Spectrum::from_laplacian(&self.laplacian())
    }

    /// Effective resistance between `i` and `j`.
    pub fn pairwise_effective_resistance(&self, i: usize, j: usize) -> Result<f64, GraphError> {
        self.spectrum()?.pairwise_effective_resistance(i, j)
    }

    /// Parses the text format (`n` then `i j w` lines, `#` comments) or, if
    /// the content starts with `{`, the JSON format.
    pub fn parse(content: &str) -> Result<Self, GraphError> {
        if content.trim_start().starts_with('{') {
            Self::from_json(content)
        } else {
            Self::from_text(content)
        }
    }

    pub fn from_text(content: &str) -> Result<Self, GraphError> {
        let mut lines = content
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, first) = lines.next().ok_or(GraphError::Parse { line: 1, msg: "empty graph file".into() })?;
        let n: usize = first
            .parse()
            .map_err(|_| GraphError::Parse { line, msg: format!("expected node count, got `{first}`") })?;
        let mut edges = Vec::new();
        for (line, text) in lines {
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(GraphError::Parse { line, msg: format!("expected `i j w`, got `{text}`") });
            }
            let idx = |s: &str| -> Result<usize, GraphError> {
                let v: usize =
                    s.parse().map_err(|_| GraphError::Parse { line, msg: format!("bad node index `{s}`") })?;
                v.checked_sub(1).ok_or(GraphError::Parse { line, msg: "node indices are 1-based".into() })
            };
            let w: f64 =
                fields[2].parse().map_err(|_| GraphError::Parse { line, msg: format!("bad weight `{}`", fields[2]) })?;
            edges.push((idx(fields[0])?, idx(fields[1])?, w));
        }
        Self::new(n, edges)
    }

    pub fn from_json(content: &str) -> Result<Self, GraphError> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            edges: Vec<(usize, usize, f64)>,
        }
        let raw: Raw = serde_json::from_str(content).map_err(|e| GraphError::Parse { line: e.line(), msg: e.to_string() })?;
        let mut edges = Vec::with_capacity(raw.edges.len());
        for (i, j, w) in raw.edges {
            if i == 0 || j == 0 {
                return Err(GraphError::Parse { line: 0, msg: "node indices are 1-based".into() });
            }
            edges.push((i - 1, j - 1, w));
        }
        Self::new(raw.n, edges)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|e| GraphError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&content)
    }

    /// Text format with 1-based indices.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for e in &self.edges {
            s.push_str(&format!("{} {} {}\n", e.i + 1, e.j + 1, e.w));
        }
        s
    }
}

fn count_components(n: usize, edges: &[Edge]) -> usize {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut components = n;
    for e in edges {
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components
}

/// Identity token tying spectral coefficients to the spectrum that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpectrumId(u64);

impl SpectrumId {
    fn fresh() -> Self {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        Self(NEXT.fetch_add(1, Ordering::Relaxed))
    }
}

/// Ascending Laplacian eigenvalues with an orthonormal eigenbasis whose first
/// column is exactly (1/√n)·1.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    basis: Matrix,
    id: SpectrumId,
}

impl Spectrum {
    pub fn from_laplacian(l: &Matrix) -> Result<Self, GraphError> {
        let eig = symmetric_eigen(l)?;
        Ok(Self::from_parts(eig.values, eig.vectors))
    }

    /// Builds a spectrum from eigenpairs (columns of `basis`). Pairs are sorted
    /// ascending and the null vector is pinned to the positive constant vector.
    pub fn from_parts(eigenvalues: Vec<f64>, basis: Matrix) -> Self {
        let n = eigenvalues.len();
        assert_eq!(basis.rows(), n);
        assert_eq!(basis.cols(), n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| eigenvalues[k]).collect();
        let mut cols: Vec<Vec<f64>> = order.iter().map(|&k| basis.column(k)).collect();

        let u = 1.0 / (n as f64).sqrt();
        cols[0] = vec![u; n];
        for col in cols.iter_mut().skip(1) {
            let p: f64 = col.iter().sum::<f64>() * u;
            col.iter_mut().for_each(|v| *v -= p * u);
            let nrm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            col.iter_mut().for_each(|v| *v /= nrm);
        }
        let mut values = values;
        values[0] = 0.0;
        let basis = Matrix::from_fn(n, n, |i, k| cols[k][i]);
        Self { eigenvalues: values, basis, id: SpectrumId::fresh() }
    }

    pub fn id(&self) -> SpectrumId {
        self.id
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// Eigenvector q_k (0-based k).
    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.basis.column(k)
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn lambda_2(&self) -> f64 {
        self.eigenvalues[1]
    }

    /// τ_max = π/(2λ_n); stability requires τ < τ_max strictly.
    pub fn stability_margin(&self) -> f64 {
        FRAC_PI_2 / self.lambda_max()
    }

    /// c^Q = Qᵀc.
    pub fn coefficients(&self, c: &[f64]) -> Vec<f64> {
        assert_eq!(c.len(), self.n(), "vector length must match the spectrum");
        (0..self.n()).map(|k| (0..self.n()).map(|i| self.basis[(i, k)] * c[i]).sum()).collect()
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        if self.lambda_2() < NEAR_DISCONNECTION {
            Err(GraphError::NearlyDisconnected(self.lambda_2()))
        } else {
            Ok(())
        }
    }

    /// Ξ = n·Σ_{k≥2} 1/λ_k.
    pub fn total_effective_resistance(&self) -> Result<f64, GraphError> {
        self.check_connected()?;
        Ok(self.n() as f64 * self.eigenvalues[1..].iter().map(|l| 1.0 / l).sum::<f64>())
    }

    /// Σ_{k≥2} (q_k(i) − q_k(j))²/λ_k.
    pub fn pairwise_effective_resistance(&self, i: usize, j: usize) -> Result<f64, GraphError> {
        let n = self.n();
        for node in [i, j] {
            if node >= n {
                return Err(GraphError::NodeOutOfRange { node, n });
            }
        }
        self.check_connected()?;
        Ok((1..n)
            .map(|k| {
                let d = self.basis[(i, k)] - self.basis[(j, k)];
                d * d / self.eigenvalues[k]
            })
            .sum())
    }

    /// Q·diag(λ)·Qᵀ.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.n();
        Matrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| self.basis[(i, k)] * self.eigenvalues[k] * self.basis[(j, k)]).sum()
        })
    }

    /// Σ (c·q_k)² grouped by distinct eigenvalue (within `tol`), ascending.
    /// These sums do not depend on the basis chosen inside an eigenspace.
    pub fn grouped_energy(&self, c: &[f64], tol: f64) -> Vec<(f64, f64)> {
        let coeffs = self.coefficients(c);
        let mut groups: Vec<(f64, f64)> = Vec::new();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            match groups.last_mut() {
                Some((l, s)) if (lam - *l).abs() <= tol => *s += coeffs[k] * coeffs[k],
                _ => groups.push((lam, coeffs[k] * coeffs[k])),
            }
        }
        groups
    }
}

/// Orthonormality defect max |QᵀQ − I|.
pub fn orthonormality_defect(q: &Matrix) -> f64 {
    let n = q.cols();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        let ca = q.column(a);
        for b in a..n {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((dot(&ca, &q.column(b)) - target).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example_one() -> WeightedGraph {
        WeightedGraph::new(5, [(0, 1, 2.0), (0, 2, 3.2), (1, 4, 0.1), (1, 2, 5.0), (2, 3, 0.2), (3, 4, 0.3)]).unwrap()
    }

    #[test]
    fn laplacian_small_cases() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let l = g.laplacian();
        assert_eq!(l, Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap());
        let l = example_one().laplacian();
        assert!((l[(0, 0)] - 5.2).abs() < 1e-15);
        for i in 0..5 {
            assert!(l.row(i).iter().sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_invalid_graphs() {
        assert_eq!(WeightedGraph::new(1, []), Err(GraphError::TooFewNodes(1)));
        assert_eq!(WeightedGraph::new(3, [(0, 0, 1.0)]), Err(GraphError::SelfLoop(0)));
        assert_eq!(WeightedGraph::new(2, [(0, 1, 1.0), (1, 0, 2.0)]), Err(GraphError::DuplicateEdge(0, 1)));
        assert!(matches!(WeightedGraph::new(3, [(0, 1, 1.0)]), Err(GraphError::Disconnected { components: 2 })));
        assert!(matches!(WeightedGraph::new(2, [(0, 1, -1.0)]), Err(GraphError::InvalidWeight { .. })));
        assert!(matches!(WeightedGraph::new(2, [(0, 5, 1.0)]), Err(GraphError::NodeOutOfRange { .. })));
        // a zero weight edge is absent, so this graph is disconnected
        assert!(matches!(WeightedGraph::new(2, [(0, 1, 0.0)]), Err(GraphError::Disconnected { .. })));
    }

    #[test]
    fn small_spectra() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let s = g.spectrum().unwrap();
        assert!((s.eigenvalues()[1] - 2.0).abs() < 1e-14);
        let q2 = s.vector(1);
        assert!((q2[0].abs() - 0.5f64.sqrt()).abs() < 1e-14 && (q2[0] + q2[1]).abs() < 1e-14);

        let p3 = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 1.0)]).unwrap().spectrum().unwrap();
        assert!((p3.eigenvalues()[1] - 1.0).abs() < 1e-13 && (p3.eigenvalues()[2] - 3.0).abs() < 1e-13);
        assert!((p3.total_effective_resistance().unwrap() - 4.0).abs() < 1e-12);
        assert!((p3.pairwise_effective_resistance(0, 2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn example_one_margin() {
        let s = example_one().spectrum().unwrap();
        let expected = [0.0, 0.240_214, 0.756_029, 7.628_555, 12.975_202];
        for (a, b) in s.eigenvalues().iter().zip(expected) {
            assert!((a - b).abs() < 1e-5);
        }
        assert!((s.stability_margin() - 0.121_061_4).abs() < 1e-6);
        assert_eq!(s.vector(0), vec![1.0 / 5f64.sqrt(); 5]);
    }

    #[test]
    fn text_and_json_roundtrip() {
        let g = example_one();
        assert_eq!(WeightedGraph::parse(&g.to_text()).unwrap(), g);
        let json = r#"{"n": 3, "edges": [[1, 2, 1.0], [2, 3, 2.5]]}"#;
        let h = WeightedGraph::parse(json).unwrap();
        assert_eq!(h.weight(1, 2), 2.5);
        let text = "# comment\n3\n1 2 1\n\n# more\n2 3 1\n";
        assert_eq!(WeightedGraph::parse(text).unwrap().edges().len(), 2);
        assert!(matches!(WeightedGraph::parse("3\n1 2\n"), Err(GraphError::Parse { line: 2, .. })));
        assert!(matches!(WeightedGraph::parse("2\n0 1 1\n"), Err(GraphError::Parse { .. })));
    }

    #[test]
    fn grouped_energy_is_basis_free() {
        let s = WeightedGraph::new(4, [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)])
            .unwrap()
            .spectrum()
            .unwrap();
        let c = [1.0, -0.3, 0.2, 0.5];
        let groups = s.grouped_energy(&c, 1e-9);
        assert_eq!(groups.len(), 2);
        let mean = c.iter().sum::<f64>() / 4.0;
        let centred: f64 = c.iter().map(|v| (v - mean) * (v - mean)).sum();
        assert!((groups[1].1 - centred).abs() < 1e-12);
    }
}
