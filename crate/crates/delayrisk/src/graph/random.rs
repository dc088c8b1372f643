use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GraphError, WeightedGraph};

/// Fraction of the stability bound used when a target delay is supplied.
pub const TARGET_MARGIN: f64 = 0.95;

/// Erdős–Rényi graph with uniform weights in [lo, hi], resampled until
/// connected (at most 10·n draws). With `tau_target`, all weights are scaled
/// by one factor so that λ_n·τ = 0.95·π/2.
pub fn random_connected_graph(
    n: usize,
    edge_prob: f64,
    weight_lo: f64,
    weight_hi: f64,
    tau_target: Option<f64>,
    seed: u64,
) -> Result<WeightedGraph, GraphError> {
    if n < 2 {
        return Err(GraphError::TooFewNodes(n));
    }
    if !(edge_prob > 0.0 && edge_prob <= 1.0) {
        return Err(GraphError::InvalidParameter(format!("edge probability {edge_prob} not in (0, 1]")));
    }
    if !(weight_lo > 0.0 && weight_lo <= weight_hi && weight_hi.is_finite()) {
        return Err(GraphError::InvalidParameter(format!("weight range [{weight_lo}, {weight_hi}]")));
    }
    if let Some(t) = tau_target {
        if !(t > 0.0 && t.is_finite()) {
            return Err(GraphError::InvalidParameter(format!("target delay {t}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attempts = 10 * n;
    for _ in 0..attempts {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < edge_prob {
                    edges.push((i, j, rng.gen_range(weight_lo..=weight_hi)));
                }
            }
        }
        let g = match WeightedGraph::new(n, edges) {
            Ok(g) => g,
            Err(GraphError::Disconnected { .. }) => continue,
            Err(e) => return Err(e),
        };
        return match tau_target {
            None => Ok(g),
            Some(tau) => {
                let lam_max = g.spectrum()?.lambda_max();
                Ok(g.scaled(TARGET_MARGIN * FRAC_PI_2 / (lam_max * tau)))
            }
        };
    }
    Err(GraphError::ConnectivityNotReached(attempts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_probability_gives_complete_graph() {
        let g = random_connected_graph(6, 1.0, 1.0, 1.0, None, 1).unwrap();
        assert_eq!(g.edges().len(), 15);
    }

    #[test]
    fn two_nodes_single_edge() {
        let g = random_connected_graph(2, 0.9, 0.5, 2.0, None, 3).unwrap();
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn deterministic_and_rescaled() {
        let a = random_connected_graph(7, 0.5, 0.1, 2.0, Some(0.4), 42).unwrap();
        let b = random_connected_graph(7, 0.5, 0.1, 2.0, Some(0.4), 42).unwrap();
        assert_eq!(a, b);
        let lam = a.spectrum().unwrap().lambda_max();
        assert!((lam * 0.4 - TARGET_MARGIN * FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn impossible_connectivity_fails() {
        let r = random_connected_graph(30, 1e-6, 1.0, 1.0, None, 0);
        assert_eq!(r, Err(GraphError::ConnectivityNotReached(300)));
    }
}
