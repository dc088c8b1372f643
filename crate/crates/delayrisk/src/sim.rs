//! Euler–Maruyama simulation of dx = −L x(t − τ) dt + b dW.
//!
//! Trajectory k draws its noise from stream k of the base seed, so results
//! are bit-identical however trajectories are spread over threads.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dde::{DdeError, HistoryFunction};
use crate::graph::{GraphError, WeightedGraph};
use crate::observables::{ObservableError, ObservableSet};
use crate::risk::{RiskError, RiskParams};
use crate::rng::NormalRng;

/// Default number of steps per delay interval.
pub const STEPS_PER_TAU: usize = 100;
/// Explicit-scheme sanity bound on dt·λ_n.
pub const MAX_DT_LAMBDA: f64 = 0.1;
/// Default burn-in in units of 1/λ_2.
pub const BURN_IN_LAMBDA2_UNITS: f64 = 30.0;
/// Default spacing of steady samples in units of τ.
pub const DECIMATION_TAU_UNITS: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("sample pool has {have} values but eps = {eps} needs at least {need}")]
    PoolTooSmall { have: usize, need: usize, eps: f64 },
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Dde(#[from] DdeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    /// Spacing of steady-pool samples after the burn-in.
    pub decimation: f64,
    pub trajectories: usize,
    pub base_seed: u64,
    /// Times at which per-time ensemble moments are recorded.
    pub record_times: Vec<f64>,
}

impl SimConfig {
    /// dt = τ/100 (0.01/λ_n when τ = 0), burn-in 30/λ_2, decimation 5τ
    /// (5/λ_2 when τ = 0), no transient record times.
    pub fn defaults(g: &WeightedGraph, tau: f64, horizon: f64, trajectories: usize, base_seed: u64) -> Result<Self, SimError> {
        let s = g.spectrum()?;
        let dt = if tau > 0.0 { tau / STEPS_PER_TAU as f64 } else { 0.01 / s.lambda_max() };
        let decimation = if tau > 0.0 { DECIMATION_TAU_UNITS * tau } else { 5.0 / s.lambda_2() };
        Ok(Self {
            dt,
            horizon,
            burn_in: BURN_IN_LAMBDA2_UNITS / s.lambda_2(),
            decimation,
            trajectories,
            base_seed,
            record_times: Vec::new(),
        })
    }

    /// Horizon that yields `per_trajectory` steady samples.
    pub fn with_pool(mut self, per_trajectory: usize) -> Self {
        self.horizon = self.burn_in + per_trajectory as f64 * self.decimation;
        self
    }

    /// Delay in steps; checks the invariants against the graph and delay.
    fn validate(&self, g: &WeightedGraph, tau: f64) -> Result<usize, SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        let d = (tau / self.dt).round();
        if (d * self.dt - tau).abs() > 1e-9 * tau.max(self.dt) {
            return bad(format!("dt = {} does not divide tau = {tau}", self.dt));
        }
        let lam = g.spectrum()?.lambda_max();
        if self.dt * lam >= MAX_DT_LAMBDA {
            return bad(format!("dt * lambda_max = {} must stay below {MAX_DT_LAMBDA}", self.dt * lam));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon = {}", self.horizon));
        }
        if !(self.burn_in >= 0.0 && self.decimation > 0.0) {
            return bad("burn-in must be non-negative and decimation positive".into());
        }
        if self.trajectories == 0 {
            return bad("at least one trajectory is required".into());
        }
        if let Some(t) = self.record_times.iter().find(|t| !(**t >= 0.0 && **t <= self.horizon)) {
            return bad(format!("record time {t} outside [0, horizon]"));
        }
        Ok(d as usize)
    }

    fn step_of(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }
}

/// Sparse Laplacian as adjacency lists.
struct SparseLaplacian {
    adj: Vec<Vec<(usize, f64)>>,
}

impl SparseLaplacian {
    fn new(g: &WeightedGraph) -> Self {
        Self { adj: (0..g.n()).map(|i| g.neighbors(i)).collect() }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.adj.iter().enumerate() {
            out[i] = row.iter().map(|&(j, w)| w * (x[i] - x[j])).sum();
        }
    }
}

struct Stepper<'a> {
    lap: &'a SparseLaplacian,
    n: usize,
    d: usize,
    dt: f64,
    noise_scale: f64,
    /// States x_{m−d}, …, x_m in a ring of d + 1 slots.
    ring: Vec<f64>,
    head: usize,
    lx: Vec<f64>,
    xi: Vec<f64>,
    rng: NormalRng,
}

impl<'a> Stepper<'a> {
    fn new(lap: &'a SparseLaplacian, h: &HistoryFunction, d: usize, dt: f64, b: f64, seed: u64, index: u64) -> Self {
        let n = lap.adj.len();
        let mut ring = vec![0.0; (d + 1) * n];
        // slot k holds x at time (k − d)·dt
        for k in 0..=d {
            let t = (k as f64 - d as f64) * dt;
            ring[k * n..(k + 1) * n].copy_from_slice(&h.value(t));
        }
        Self {
            lap,
            n,
            d,
            dt,
            noise_scale: b * dt.sqrt(),
            ring,
            head: d,
            lx: vec![0.0; n],
            xi: vec![0.0; n],
            rng: NormalRng::new(seed, index),
        }
    }

    fn current(&self) -> &[f64] {
        &self.ring[self.head * self.n..(self.head + 1) * self.n]
    }

    fn step(&mut self) {
        let n = self.n;
        let slots = self.d + 1;
        let delayed = (self.head + 1) % slots;
        self.lap.apply(&self.ring[delayed * n..(delayed + 1) * n], &mut self.lx);
        self.rng.fill_normal(&mut self.xi);
        // with d = 0 the delayed slot is the current one and is overwritten in place
        for i in 0..n {
            let x = self.ring[self.head * n + i];
            self.ring[delayed * n + i] = x - self.dt * self.lx[i] + self.noise_scale * self.xi[i];
        }
        self.head = delayed;
    }
}

/// States of one trajectory every `stride` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl SamplePath {
    pub const CSV_HEADER: &'static str = "trajectory,time,obs_index,value";

    /// Observable values as CSV rows (1-based observable index).
    pub fn csv_rows(&self, trajectory: usize, set: &ObservableSet) -> Vec<String> {
        let mut rows = Vec::new();
        for (t, x) in self.times.iter().zip(&self.states) {
            for (k, obs) in set.rows().iter().enumerate() {
                let y: f64 = obs.vector().iter().zip(x).map(|(c, v)| c * v).sum();
                rows.push(format!("{trajectory},{t},{},{y}", k + 1));
            }
        }
        rows
    }
}

pub fn simulate_trajectory(
    g: &WeightedGraph,
    p: &RiskParams,
    h: &HistoryFunction,
    cfg: &SimConfig,
    index: u64,
    stride: usize,
) -> Result<SamplePath, SimError> {
    let d = check(g, p, h, cfg)?;
    let lap = SparseLaplacian::new(g);
    let mut st = Stepper::new(&lap, h, d, cfg.dt, p.b, cfg.base_seed, index);
    let steps = cfg.step_of(cfg.horizon);
    let stride = stride.max(1);
    let mut path = SamplePath { times: Vec::new(), states: Vec::new() };
    for m in 0..=steps {
        if m % stride == 0 {
            path.times.push(m as f64 * cfg.dt);
            path.states.push(st.current().to_vec());
        }
        if m < steps {
            st.step();
        }
    }
    Ok(path)
}

fn check(g: &WeightedGraph, p: &RiskParams, h: &HistoryFunction, cfg: &SimConfig) -> Result<usize, SimError> {
    p.validate_for(&g.spectrum()?)?;
    if h.n() != g.n() {
        return Err(SimError::InvalidConfig(format!("history has {} nodes, graph has {}", h.n(), g.n())));
    }
    if (h.tau() - p.tau).abs() > 1e-12 * p.tau.max(1.0) {
        return Err(SimError::InvalidConfig("history length differs from tau".into()));
    }
    cfg.validate(g, p.tau)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    /// Record times actually used (snapped to the step grid).
    pub times: Vec<f64>,
    /// mean[t][k], var[t][k] and standard error of the mean for observable k.
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    pub se: Vec<Vec<f64>>,
    /// Steady pool per observable, trajectory-major order.
    pub pool: Vec<Vec<f64>>,
    pub trajectories: usize,
}

impl EnsembleStats {
    /// Sample mean and variance of the steady pool of observable k.
    pub fn pool_moments(&self, k: usize) -> (f64, f64) {
        let v = &self.pool[k];
        let nf = v.len() as f64;
        let mean = v.iter().sum::<f64>() / nf;
        let var = v.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        (mean, var)
    }
}

struct TrajectoryRecord {
    at_times: Vec<Vec<f64>>,
    pool: Vec<Vec<f64>>,
}

pub fn ensemble_stats(
    g: &WeightedGraph,
    p: &RiskParams,
    set: &ObservableSet,
    h: &HistoryFunction,
    cfg: &SimConfig,
) -> Result<EnsembleStats, SimError> {
    let d = check(g, p, h, cfg)?;
    if set.n() != g.n() {
        return Err(ObservableError::Dimension { expected: g.n(), got: set.n() }.into());
    }
    let lap = SparseLaplacian::new(g);
    let steps = cfg.step_of(cfg.horizon);
    let record_steps: Vec<usize> = cfg.record_times.iter().map(|t| cfg.step_of(*t)).collect();
    let burn = cfg.step_of(cfg.burn_in);
    let every = cfg.step_of(cfg.decimation).max(1);
    let rows: Vec<Vec<f64>> = set.rows().iter().map(|o| o.vector().to_vec()).collect();
    let project = |x: &[f64]| -> Vec<f64> { rows.iter().map(|c| c.iter().zip(x).map(|(a, b)| a * b).sum()).collect() };

    let records: Vec<TrajectoryRecord> = (0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|index| {
            let mut st = Stepper::new(&lap, h, d, cfg.dt, p.b, cfg.base_seed, index);
            let mut at_times = vec![Vec::new(); record_steps.len()];
            let mut pool = vec![Vec::new(); rows.len()];
            for m in 0..=steps {
                for (slot, &rs) in record_steps.iter().enumerate() {
                    if rs == m {
                        at_times[slot] = project(st.current());
                    }
                }
                if m >= burn && (m - burn).is_multiple_of(every) && m > burn {
                    for (k, y) in project(st.current()).into_iter().enumerate() {
                        pool[k].push(y);
                    }
                }
                if m < steps {
                    st.step();
                }
            }
            TrajectoryRecord { at_times, pool }
        })
        .collect();

    let q = rows.len();
    let mf = records.len() as f64;
    let mut mean = vec![vec![0.0; q]; record_steps.len()];
    let mut var = vec![vec![0.0; q]; record_steps.len()];
    let mut se = vec![vec![0.0; q]; record_steps.len()];
    for t in 0..record_steps.len() {
        for k in 0..q {
            let mu = records.iter().map(|r| r.at_times[t][k]).sum::<f64>() / mf;
            let v = if records.len() > 1 {
                records.iter().map(|r| (r.at_times[t][k] - mu).powi(2)).sum::<f64>() / (mf - 1.0)
            } else {
                0.0
            };
            mean[t][k] = mu;
            var[t][k] = v;
            se[t][k] = (v / mf).sqrt();
        }
    }
    let mut pool = vec![Vec::new(); q];
    for r in &records {
        for (dst, src) in pool.iter_mut().zip(&r.pool) {
            dst.extend_from_slice(src);
        }
    }
    Ok(EnsembleStats {
        times: record_steps.iter().map(|m| *m as f64 * cfg.dt).collect(),
        mean,
        var,
        se,
        pool,
        trajectories: cfg.trajectories,
    })
}

/// (1 − ε) empirical quantile of |y| (lower order statistic).
pub fn empirical_var_risk(pool: &[f64], eps: f64) -> Result<f64, SimError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SimError::InvalidConfig(format!("eps = {eps} must lie in (0, 1)")));
    }
    let need = (100.0 / eps).ceil() as usize;
    if pool.len() < need {
        return Err(SimError::PoolTooSmall { have: pool.len(), need, eps });
    }
    let mut abs: Vec<f64> = pool.iter().map(|y| y.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let idx = ((1.0 - eps) * (abs.len() - 1) as f64).floor() as usize;
    Ok(abs[idx])
}

/// Fraction of |y| strictly above `delta`, with its binomial standard error.
pub fn exceedance_frequency(pool: &[f64], delta: f64) -> (f64, f64) {
    let nf = pool.len() as f64;
    let p = pool.iter().filter(|y| y.abs() > delta).count() as f64 / nf;
    (p, (p * (1.0 - p) / nf).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::Observable;

    fn example_one() -> WeightedGraph {
        WeightedGraph::new(5, [(0, 1, 2.0), (0, 2, 3.2), (1, 4, 0.1), (1, 2, 5.0), (2, 3, 0.2), (3, 4, 0.3)]).unwrap()
    }

    #[test]
    fn noiseless_consensus() {
        let g = example_one();
        let tau = 0.1;
        let p = RiskParams::new(0.1, 0.0, tau);
        let h = HistoryFunction::constant(tau, vec![2.0; 5]).unwrap();
        let mut cfg = SimConfig::defaults(&g, tau, 5.0, 1, 0).unwrap();
        cfg.dt = tau / 200.0;
        let path = simulate_trajectory(&g, &p, &h, &cfg, 0, 1000).unwrap();
        assert!(path.states.iter().all(|x| x.iter().all(|v| *v == 2.0)));
        let h = HistoryFunction::from_fn(tau, 11, |_| (1..=5).map(|i| i as f64).collect()).unwrap();
        let path = simulate_trajectory(&g, &p, &h, &SimConfig::defaults(&g, tau, 80.0, 1, 0).unwrap(), 0, 100).unwrap();
        let last = path.states.last().unwrap();
        assert!(last.iter().all(|v| (v - 3.0).abs() < 1e-6), "{last:?}");
    }

    #[test]
    fn ou_variance_without_delay() {
        let g = WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap();
        let p = RiskParams::new(0.1, 1.0, 0.0);
        let h = HistoryFunction::zero(0.0, 2);
        let cfg = SimConfig::defaults(&g, 0.0, 0.0, 400, 9).unwrap().with_pool(20);
        let set = ObservableSet::new(vec![Observable::pairwise(0, 1, 2).unwrap()]).unwrap();
        let st = ensemble_stats(&g, &p, &set, &h, &cfg).unwrap();
        let (_, v) = st.pool_moments(0);
        let n = st.pool[0].len() as f64;
        // Var of the sample variance ≈ 2σ⁴/N
        let se = 0.5 * (2.0 / n).sqrt();
        assert!((v - 0.5).abs() < 3.0 * se + 0.005, "{v}");
    }

    #[test]
    fn deterministic_and_config_checks() {
        let g = example_one();
        let tau = 0.1;
        let p = RiskParams::new(0.1, 0.5, tau);
        let h = HistoryFunction::zero(tau, 5);
        let mut cfg = SimConfig::defaults(&g, tau, 2.0, 6, 4).unwrap();
        cfg.record_times = vec![0.5, 2.0];
        let set = ObservableSet::centering(5);
        let a = ensemble_stats(&g, &p, &set, &h, &cfg).unwrap();
        let b = ensemble_stats(&g, &p, &set, &h, &cfg).unwrap();
        assert_eq!(a, b);
        let mut bad = cfg.clone();
        bad.dt = 0.03;
        assert!(matches!(ensemble_stats(&g, &p, &set, &h, &bad), Err(SimError::InvalidConfig(_))));
        let mut coarse = cfg.clone();
        coarse.dt = tau / 2.0;
        assert!(matches!(ensemble_stats(&g, &p, &set, &h, &coarse), Err(SimError::InvalidConfig(_))));
        assert!(matches!(ensemble_stats(&g, &p.with_tau(0.2), &set, &HistoryFunction::zero(0.2, 5), &cfg), Err(SimError::Risk(_))));
    }

    #[test]
    fn empirical_quantile() {
        let mut rng = NormalRng::new(1, 0);
        let pool: Vec<f64> = (0..100_000).map(|_| rng.normal()).collect();
        let r = empirical_var_risk(&pool, 0.05).unwrap();
        assert!((r / 1.959_964 - 1.0).abs() < 0.02);
        assert!(empirical_var_risk(&pool[..100], 0.05).is_err());
        assert!(empirical_var_risk(&pool, 0.999).unwrap() < 0.01);
    }
}
