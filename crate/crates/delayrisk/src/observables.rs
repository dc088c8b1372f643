//! Output vectors c (and row sets C) and their spectral coefficients.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Spectrum, SpectrumId, WeightedGraph};
use crate::linalg::{norm, Matrix};

/// |c_1^Q| below this (relative to max(1, ‖c‖)) satisfies the kernel condition.
pub const KERNEL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("node {node} out of range for n = {n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("pairwise observable needs two distinct nodes, got {0} twice")]
    SameNode(usize),
    #[error("node {0} has no neighbours")]
    IsolatedNode(usize),
    #[error("observable vector must be finite and non-zero")]
    Degenerate,
    #[error("observable has {got} entries but the network has {expected} nodes")]
    Dimension { expected: usize, got: usize },
    #[error("coefficients were computed against a different spectrum")]
    SpectrumMismatch,
    #[error("an observable set needs at least one row")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservableKind {
    DeviationFromAverage(usize),
    Pairwise(usize, usize),
    NeighborAverage(usize),
    AverageState,
    Custom,
}

impl ObservableKind {
    /// Short label with 1-based node numbers.
    pub fn label(&self) -> String {
        match *self {
            Self::DeviationFromAverage(i) => format!("m{}", i + 1),
            Self::Pairwise(i, j) => format!("e{}-e{}", i + 1, j + 1),
            Self::NeighborAverage(i) => format!("nbr{}", i + 1),
            Self::AverageState => "average".into(),
            Self::Custom => "custom".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Bound {
    id: SpectrumId,
    coefficients: Arc<Vec<f64>>,
}

/// An output vector c with optional cached coefficients c^Q = Qᵀc.
#[derive(Debug, Clone)]
pub struct Observable {
    kind: ObservableKind,
    c: Vec<f64>,
    bound: Option<Bound>,
}

impl PartialEq for Observable {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.c == other.c
    }
}

fn check_node(node: usize, n: usize) -> Result<(), ObservableError> {
    if node >= n {
        Err(ObservableError::NodeOutOfRange { node, n })
    } else {
        Ok(())
    }
}

impl Observable {
    fn raw(kind: ObservableKind, c: Vec<f64>) -> Self {
        Self { kind, c, bound: None }
    }

    /// m_i = e_i − (1/n)·1.
    pub fn deviation_from_average(i: usize, n: usize) -> Result<Self, ObservableError> {
        check_node(i, n)?;
        let mut c = vec![-1.0 / n as f64; n];
        c[i] += 1.0;
        Ok(Self::raw(ObservableKind::DeviationFromAverage(i), c))
    }

    /// e_i − e_j.
    pub fn pairwise(i: usize, j: usize, n: usize) -> Result<Self, ObservableError> {
        check_node(i, n)?;
        check_node(j, n)?;
        if i == j {
            return Err(ObservableError::SameNode(i));
        }
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        c[j] = -1.0;
        Ok(Self::raw(ObservableKind::Pairwise(i, j), c))
    }

    /// e_i − (1/n_i)·Σ_{j∼i} e_j with n_i the number of neighbours.
    pub fn neighbor_average_deviation(g: &WeightedGraph, i: usize) -> Result<Self, ObservableError> {
        check_node(i, g.n())?;
        let nbrs = g.neighbors(i);
        if nbrs.is_empty() {
            return Err(ObservableError::IsolatedNode(i));
        }
        let mut c = vec![0.0; g.n()];
        c[i] = 1.0;
        for (j, _) in &nbrs {
            c[*j] -= 1.0 / nbrs.len() as f64;
        }
        Ok(Self::raw(ObservableKind::NeighborAverage(i), c))
    }

    /// (1/n)·1. Not in the kernel: its steady risk is infinite.
    pub fn average_state(n: usize) -> Self {
        Self::raw(ObservableKind::AverageState, vec![1.0 / n as f64; n])
    }

    pub fn custom(c: Vec<f64>) -> Result<Self, ObservableError> {
        if c.iter().any(|v| !v.is_finite()) || norm(&c) == 0.0 {
            return Err(ObservableError::Degenerate);
        }
        Ok(Self::raw(ObservableKind::Custom, c))
    }

    pub fn kind(&self) -> ObservableKind {
        self.kind
    }

    pub fn label(&self) -> String {
        self.kind.label()
    }

    pub fn vector(&self) -> &[f64] {
        &self.c
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.c)
    }

    /// Same observable multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self::raw(self.kind, self.c.iter().map(|v| v * alpha).collect())
    }

    /// Caches c^Q for `s`.
    pub fn bind(mut self, s: &Spectrum) -> Result<Self, ObservableError> {
        self.check_dimension(s)?;
        self.bound = Some(Bound { id: s.id(), coefficients: Arc::new(s.coefficients(&self.c)) });
        Ok(self)
    }

    fn check_dimension(&self, s: &Spectrum) -> Result<(), ObservableError> {
        if self.c.len() != s.n() {
            return Err(ObservableError::Dimension { expected: s.n(), got: self.c.len() });
        }
        Ok(())
    }

    /// c^Q relative to `s`; uses the cache when it belongs to `s` and rejects
    /// a cache from a different spectrum.
    pub fn coefficients(&self, s: &Spectrum) -> Result<Arc<Vec<f64>>, ObservableError> {
        self.check_dimension(s)?;
        match &self.bound {
            Some(b) if b.id == s.id() => Ok(Arc::clone(&b.coefficients)),
            Some(_) => Err(ObservableError::SpectrumMismatch),
            None => Ok(Arc::new(s.coefficients(&self.c))),
        }
    }

    /// 1 ∈ ker(c), i.e. c_1^Q = 0 within tolerance.
    pub fn in_kernel(&self) -> bool {
        let s: f64 = self.c.iter().sum::<f64>() / (self.c.len() as f64).sqrt();
        s.abs() < KERNEL_TOL * self.norm().max(1.0)
    }
}

/// c^Q = Qᵀc.
pub fn spectral_coefficients(c: &[f64], s: &Spectrum) -> Result<Vec<f64>, ObservableError> {
    if c.len() != s.n() {
        return Err(ObservableError::Dimension { expected: s.n(), got: c.len() });
    }
    Ok(s.coefficients(c))
}

/// Ordered rows of the output matrix C.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSet {
    rows: Vec<Observable>,
}

impl ObservableSet {
    pub fn new(rows: Vec<Observable>) -> Result<Self, ObservableError> {
        let Some(first) = rows.first() else {
            return Err(ObservableError::Empty);
        };
        let n = first.n();
        if let Some(bad) = rows.iter().find(|r| r.n() != n) {
            return Err(ObservableError::Dimension { expected: n, got: bad.n() });
        }
        Ok(Self { rows })
    }

    /// Rows of the centering matrix M_n.
    pub fn centering(n: usize) -> Self {
        Self { rows: (0..n).map(|i| Observable::deviation_from_average(i, n).expect("valid node")).collect() }
    }

    /// All pairs e_i − e_j, i < j (the complete-graph incidence B_n).
    pub fn all_pairs(n: usize) -> Self {
        let mut rows = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                rows.push(Observable::pairwise(i, j, n).expect("valid pair"));
            }
        }
        Self { rows }
    }

    pub fn rows(&self) -> &[Observable] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n(&self) -> usize {
        self.rows[0].n()
    }

    pub fn matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows.len(), self.n(), |r, c| self.rows[r].c[c])
    }

    pub fn bind(self, s: &Spectrum) -> Result<Self, ObservableError> {
        Ok(Self { rows: self.rows.into_iter().map(|r| r.bind(s)).collect::<Result<_, _>>()? })
    }

    /// True iff every row satisfies the kernel condition.
    pub fn kernel_check(&self) -> bool {
        self.rows.iter().all(Observable::in_kernel)
    }
}

/// M_n = I − (1/n)11ᵀ.
pub fn centering_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64)
}

/// E_n: the identity with its (1, 1) entry zeroed (Qᵀ M_n Q in the eigenbasis).
pub fn e_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| if i == j && i > 0 { 1.0 } else { 0.0 })
}

/// Incidence matrix of `g`: one row e_i − e_j per edge.
pub fn incidence(g: &WeightedGraph) -> Matrix {
    let edges = g.edges();
    let mut b = Matrix::zeros(edges.len(), g.n());
    for (r, e) in edges.iter().enumerate() {
        b[(r, e.i)] = 1.0;
        b[(r, e.j)] = -1.0;
    }
    b
}
