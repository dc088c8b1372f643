use clap::{Args, ValueEnum};
use delayrisk::graph::{Spectrum, TopologyKind, WeightedGraph};
use delayrisk::limits::{limit_report, tradeoff_scatter, vector_limit_report, ScatterTable};
use delayrisk::observables::{Observable, ObservableKind, ObservableSet};
use delayrisk::risk::{
    exp_risk_steady, quad_risk_steady, steady_risks, steady_sigma_trace, transient_risks, var_risk_steady,
    Classification, Measure, RiskParams, RiskRow,
};
use delayrisk::sim::{ensemble_stats, SimConfig};
use delayrisk::topology::{cross_validate, family_stability_bound, node_groups, table_risk_weighted, TopologyRiskProfile};
use serde_json::{json, Value};

use crate::config::{parse_floats, parse_grid, Common, RunConfig};
use crate::error::CliError;

/// A command result: CSV lines plus the equivalent JSON document.
pub struct Output {
    pub header: String,
    pub rows: Vec<String>,
    pub json: Value,
    /// One-line summary printed to stderr.
    pub note: Option<String>,
}

// ============================================================================
// analyze
// ============================================================================

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Transient evaluation time; repeatable
    #[arg(long = "t")]
    pub times: Vec<f64>,
    /// Transient times as LO:HI:STEP
    #[arg(long)]
    pub t_grid: Option<String>,
    /// Constant initial history, one value per node
    #[arg(long)]
    pub history: Option<String>,
    /// Cross-check σ̄ against the matrix (trace) form
    #[arg(long)]
    pub check_trace: bool,
}

pub fn analyze(a: &AnalyzeArgs) -> Result<Output, CliError> {
    let cfg = a.common.resolve()?;
    let mut times = a.times.clone();
    if let Some(g) = &a.t_grid {
        times.extend(parse_grid(g)?);
    } else if times.is_empty() && a.common.example == Some(1) {
        times = parse_grid("0.1:15:0.1")?;
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(CliError::config(format!("transient time {t} must be non-negative")));
    }
    let mut rows = Vec::new();
    let mut trace_dev: f64 = 0.0;
    for &tau in &cfg.taus {
        let p = cfg.params.with_tau(tau);
        for obs in cfg.observables.rows() {
            let label = obs.label();
            let st = steady_risks(&cfg.spectrum, obs, &p)?;
            rows.push(RiskRow::new(tau, None, label.clone(), Measure::ValueAtRisk, st.var));
            rows.push(RiskRow::new(tau, None, label.clone(), Measure::Quadratic, st.quad));
            if let Some(e) = st.exp {
                rows.push(RiskRow::new(tau, None, label.clone(), Measure::Exponential, e));
            }
            if a.check_trace && obs.in_kernel() {
                let var = steady_sigma_trace(&cfg.graph.laplacian(), obs.vector(), &p)?;
                trace_dev = trace_dev.max((st.sigma * st.sigma - var).abs() / var.max(f64::MIN_POSITIVE));
            }
            if !times.is_empty() {
                let h = cfg.history(tau, a.history.as_deref())?;
                for tr in transient_risks(&cfg.spectrum, obs, &h, &p, &times)? {
                    rows.push(RiskRow::new(tau, Some(tr.t), label.clone(), Measure::ValueAtRisk, tr.var));
                    rows.push(RiskRow::new(tau, Some(tr.t), label.clone(), Measure::Quadratic, tr.quad));
                    if let Some(e) = tr.exp {
                        rows.push(RiskRow::new(tau, Some(tr.t), label.clone(), Measure::Exponential, e));
                    }
                }
            }
        }
    }
    let mut json = json!({
        "tau_max": cfg.spectrum.stability_margin(),
        "eps": cfg.params.eps,
        "b": cfg.params.b,
        "beta": cfg.params.beta,
        "rows": rows,
    });
    let note = a.check_trace.then(|| {
        json["trace_check_max_rel_dev"] = json!(trace_dev);
        format!("trace-form cross-check: max relative deviation of sigma^2 = {trace_dev:.2e}")
    });
    Ok(Output {
        header: RiskRow::CSV_HEADER.into(),
        rows: rows.iter().map(RiskRow::csv).collect(),
        json,
        note,
    })
}

// ============================================================================
// sweep
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Var,
    Quad,
    Exp,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value_t = MeasureArg::Quad)]
    pub measure: MeasureArg,
}

pub const SWEEP_HEADER: &str =
    "tau,safe,marginal,unsafe,safe_connectivity,marginal_connectivity,unsafe_connectivity";

/// Weighted degree for node observables, effective resistance for pairs.
fn connectivity(obs: &Observable, g: &WeightedGraph, s: &Spectrum) -> Result<Option<f64>, CliError> {
    Ok(match obs.kind() {
        ObservableKind::DeviationFromAverage(i) | ObservableKind::NeighborAverage(i) => Some(g.weighted_degree(i)),
        ObservableKind::Pairwise(i, j) => Some(s.pairwise_effective_resistance(i, j)?),
        _ => None,
    })
}

fn class_index(c: Classification) -> usize {
    match c {
        Classification::Safe => 0,
        Classification::Marginal => 1,
        Classification::Unsafe => 2,
    }
}

pub fn sweep(a: &SweepArgs) -> Result<Output, CliError> {
    let cfg = a.common.resolve()?;
    let conn: Vec<Option<f64>> = cfg
        .observables
        .rows()
        .iter()
        .map(|o| connectivity(o, &cfg.graph, &cfg.spectrum))
        .collect::<Result<_, _>>()?;
    let mut last = vec![0usize; cfg.observables.len()];
    let mut staircase = true;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &tau in &cfg.taus {
        let p = cfg.params.with_tau(tau);
        let mut counts = [0usize; 3];
        let mut sums = [0.0f64; 3];
        let mut with_conn = [0usize; 3];
        for (k, obs) in cfg.observables.rows().iter().enumerate() {
            let r = match a.measure {
                MeasureArg::Var => var_risk_steady(&cfg.spectrum, obs, &p)?,
                MeasureArg::Quad => quad_risk_steady(&cfg.spectrum, obs, &p)?,
                MeasureArg::Exp => exp_risk_steady(&cfg.spectrum, obs, &p)?,
            };
            let c = class_index(r.classification());
            staircase &= c >= last[k];
            last[k] = c;
            counts[c] += 1;
            if let Some(v) = conn[k] {
                sums[c] += v;
                with_conn[c] += 1;
            }
        }
        let avg: Vec<Option<f64>> = (0..3).map(|c| (with_conn[c] > 0).then(|| sums[c] / with_conn[c] as f64)).collect();
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        rows.push(format!("{tau},{},{},{},{},{},{}", counts[0], counts[1], counts[2], cell(avg[0]), cell(avg[1]), cell(avg[2])));
        records.push(json!({
            "tau": tau,
            "safe": counts[0], "marginal": counts[1], "unsafe": counts[2],
            "safe_connectivity": avg[0], "marginal_connectivity": avg[1], "unsafe_connectivity": avg[2],
        }));
    }
    let mean_conn = {
        let v: Vec<f64> = conn.iter().flatten().copied().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    Ok(Output {
        header: SWEEP_HEADER.into(),
        rows,
        json: json!({
            "tau_max": cfg.spectrum.stability_margin(),
            "observables": cfg.observables.len(),
            "mean_connectivity": mean_conn,
            "staircase": staircase,
            "rows": records,
        }),
        note: (!staircase).then(|| "warning: a classification moved back towards safe as tau grew".to_string()),
    })
}

// ============================================================================
// tradeoff
// ============================================================================

#[derive(Debug, Clone, Args)]
pub struct TradeoffArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of nodes of each random graph
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    /// Number of random graphs
    #[arg(long, default_value_t = 500)]
    pub count: usize,
    /// Append the equal-weight complete-graph curve
    #[arg(long)]
    pub complete_curve: bool,
}

pub const CURVE_HEADER: &str = "series,sqrt_resistance,risk,passes_hard,passes_tradeoff";

pub fn tradeoff(a: &TradeoffArgs) -> Result<Output, CliError> {
    let c = &a.common;
    let tau = c.tau.unwrap_or(0.4);
    let eps = c.eps.unwrap_or(0.05);
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(CliError::config(format!("tau = {tau} must be positive")));
    }
    if a.n < 2 || a.count == 0 {
        return Err(CliError::config("tradeoff needs --n >= 2 and --count >= 1"));
    }
    let t: ScatterTable = tradeoff_scatter(a.n, a.count, tau, eps, c.seed)?;
    let mut rows: Vec<String> =
        t.points.iter().map(|p| format!("point,{},{},{},{}", p.sqrt_resistance, p.risk, p.passes_hard, p.passes_tradeoff)).collect();
    // limit curves sampled over the observed resistance range
    let xs = t.points.iter().map(|p| p.sqrt_resistance);
    let (lo, hi) = (xs.clone().fold(f64::INFINITY, f64::min).min(t.hard_sqrt_resistance), xs.fold(0.0, f64::max));
    for j in 0..=100 {
        let x = lo + (hi - lo) * j as f64 / 100.0;
        rows.push(format!("hard_limit,{x},{},,", t.hard_risk));
        rows.push(format!("tradeoff,{x},{},,", t.tradeoff / x));
    }
    if a.complete_curve {
        rows.extend(t.complete_family.iter().map(|(x, r)| format!("complete,{x},{r},,")));
    }
    let violations = t.violations();
    let mut json = serde_json::to_value(&t)?;
    json["violations"] = json!(violations);
    if !a.complete_curve {
        json.as_object_mut().expect("object").remove("complete_family");
    }
    Ok(Output {
        header: CURVE_HEADER.into(),
        rows,
        json,
        note: Some(format!("{} graphs, {violations} violations", t.points.len())),
    })
}

// ============================================================================
// table
// ============================================================================

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[command(flatten)]
    pub common: Common,
}

pub fn table(a: &TableArgs) -> Result<Output, CliError> {
    let c = &a.common;
    let kind: TopologyKind = c.topology.ok_or_else(|| CliError::config("table needs --topology KIND:PARAMS"))?;
    kind.validate()?;
    let bound = family_stability_bound(kind, c.weight);
    let taus = match (&c.tau_grid, c.tau) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(t)) => vec![t],
        (None, None) => return Err(CliError::config("--tau or --tau-grid is required")),
    };
    let eps = c.eps.unwrap_or(0.05);
    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    let mut dev: f64 = 0.0;
    for tau in taus {
        if tau >= bound {
            return Err(CliError::Unstable(format!("tau = {tau} is not below the stability margin tau_max = {bound}")));
        }
        let p = RiskParams::new(eps, c.b.unwrap_or(1.0), tau);
        p.validate()?;
        let risks = (0..kind.node_count()).map(|i| table_risk_weighted(kind, c.weight, &p, i)).collect::<Result<Vec<_>, _>>()?;
        if c.weight == 1.0 {
            dev = dev.max(cross_validate(kind, &p)?);
        }
        let prof = TopologyRiskProfile { kind: kind.to_string(), n: kind.node_count(), tau, risks, groups: node_groups(kind) };
        rows.extend(prof.csv_rows());
        profiles.push(prof);
    }
    Ok(Output {
        header: TopologyRiskProfile::CSV_HEADER.into(),
        rows,
        json: json!({ "tau_max": bound, "cross_validation_max_dev": dev, "profiles": profiles }),
        note: None,
    })
}

// ============================================================================
// simulate
// ============================================================================

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 400)]
    pub trajectories: usize,
    /// Simulated time span (default 15 for example 1, else 10)
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Comparison times, comma separated (default: 20 evenly spaced)
    #[arg(long)]
    pub checkpoints: Option<String>,
    /// Constant initial history, one value per node
    #[arg(long)]
    pub history: Option<String>,
    /// Euler-Maruyama step; must divide tau (default tau/100)
    #[arg(long)]
    pub dt: Option<f64>,
}

pub const SIMULATE_HEADER: &str =
    "t,observable,analytic_mean,empirical_mean,z_mean,analytic_var,empirical_var,z_var";

pub fn simulate(a: &SimulateArgs) -> Result<Output, CliError> {
    let cfg: RunConfig = a.common.resolve()?;
    if cfg.taus.len() != 1 {
        return Err(CliError::config("simulate takes a single --tau"));
    }
    if a.trajectories < 2 {
        return Err(CliError::config("simulate needs at least 2 trajectories"));
    }
    let tau = cfg.taus[0];
    let p = cfg.params.with_tau(tau);
    let horizon = a.horizon.unwrap_or(if a.common.example == Some(1) { 15.0 } else { 10.0 });
    let times = match &a.checkpoints {
        Some(s) => parse_floats(s)?,
        None => (1..=20).map(|k| horizon * k as f64 / 20.0).collect(),
    };
    let h = cfg.history(tau, a.history.as_deref())?;
    let mut sc = SimConfig::defaults(&cfg.graph, tau, horizon, a.trajectories, cfg.seed)?;
    if let Some(dt) = a.dt {
        sc.dt = dt;
    }
    sc.record_times = times.clone();
    sc.burn_in = horizon;
    let st = ensemble_stats(&cfg.graph, &p, &cfg.observables, &h, &sc)?;
    let m = a.trajectories as f64;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let (mut within, mut total) = (0usize, 0usize);
    for (k, obs) in cfg.observables.rows().iter().enumerate() {
        let exact = transient_risks(&cfg.spectrum, obs, &h, &p, &st.times)?;
        for (ti, e) in exact.iter().enumerate() {
            let (mean, var, se) = (st.mean[ti][k], st.var[ti][k], st.se[ti][k]);
            let v = e.sigma * e.sigma;
            let z_mean = if se > 0.0 { (mean - e.mu) / se } else { 0.0 };
            let z_var = if v > 0.0 { (var - v) / (v * (2.0 / (m - 1.0)).sqrt()) } else { 0.0 };
            total += 1;
            within += (z_mean.abs() < 3.0 && z_var.abs() < 3.0) as usize;
            rows.push(format!("{},{},{},{mean},{z_mean},{v},{var},{z_var}", e.t, obs.label(), e.mu));
            records.push(json!({
                "t": e.t, "observable": obs.label(),
                "analytic_mean": e.mu, "empirical_mean": mean, "z_mean": z_mean,
                "analytic_var": v, "empirical_var": var, "z_var": z_var,
            }));
        }
    }
    let frac = within as f64 / total.max(1) as f64;
    Ok(Output {
        header: SIMULATE_HEADER.into(),
        rows,
        json: json!({ "trajectories": a.trajectories, "dt": sc.dt, "fraction_within_3": frac, "rows": records }),
        note: Some(format!("{within}/{total} checkpoints with |z| < 3 ({:.1}%)", 100.0 * frac)),
    })
}

// ============================================================================
// limits
// ============================================================================

#[derive(Debug, Clone, Args)]
pub struct LimitsArgs {
    #[command(flatten)]
    pub common: Common,
}

pub const LIMITS_HEADER: &str = "tau,observable,resistance,resistance_floor,sigma,sigma_star,var_risk,var_hard_limit,\
tradeoff_actual,tradeoff_floor,tradeoff_floor_printed,passes,passes_printed";

pub fn limits(a: &LimitsArgs) -> Result<Output, CliError> {
    let cfg = a.common.resolve()?;
    let kernel: Vec<Observable> = cfg.observables.rows().iter().filter(|o| o.in_kernel()).cloned().collect();
    if kernel.is_empty() {
        return Err(CliError::config("limits needs at least one observable orthogonal to the all-ones vector"));
    }
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let mut vectors = Vec::new();
    let mut failed = 0usize;
    for &tau in &cfg.taus {
        let p = cfg.params.with_tau(tau);
        for obs in &kernel {
            let r = limit_report(&cfg.spectrum, obs, &p)?;
            let pass = r.flags.all();
            failed += !pass as usize;
            let printed = r.printed.var_tradeoff && r.printed.quad_tradeoff && r.printed.exp_tradeoff;
            rows.push(format!(
                "{tau},{},{},{},{},{},{},{},{},{},{},{pass},{printed}",
                obs.label(),
                r.resistance,
                r.resistance_floor,
                r.sigma,
                r.sigma_star,
                r.var_risk,
                r.var_hard_limit,
                r.tradeoff_actual,
                r.tradeoff_floor,
                r.tradeoff_floor_printed
            ));
            let mut v = serde_json::to_value(&r)?;
            v["observable"] = json!(obs.label());
            reports.push(v);
        }
        if kernel.len() >= 2 {
            let set = ObservableSet::new(kernel.clone())?;
            vectors.push(serde_json::to_value(vector_limit_report(&cfg.spectrum, &set, &p)?)?);
        }
    }
    Ok(Output {
        header: LIMITS_HEADER.into(),
        rows,
        json: json!({ "reports": reports, "vector": vectors }),
        note: Some(format!("{} observable/delay pairs, {failed} failing a derived limit", reports.len())),
    })
}
