//! Flag parsing shared by every command and the canned example scenarios.

use std::f64::consts::FRAC_PI_2;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use delayrisk::dde::HistoryFunction;
use delayrisk::graph::{random_connected_graph, Spectrum, TopologyKind, WeightedGraph};
use delayrisk::observables::{Observable, ObservableSet};
use delayrisk::risk::RiskParams;
use serde_json::Value;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Graph file: node count then `i j w` lines (1-based), or JSON
    #[arg(long, conflicts_with = "topology")]
    pub graph: Option<PathBuf>,
    /// Topology family, e.g. complete:4, wheel:6, bipartite:2,8, path:7, ring:9, star:5
    #[arg(long)]
    pub topology: Option<TopologyKind>,
    /// Uniform edge weight for --topology
    #[arg(long, default_value_t = 1.0)]
    pub weight: f64,
    /// Canned scenario 1, 2 or 3
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub example: Option<u8>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Delay grid LO:HI:STEP (inclusive of both ends when they fall on the grid)
    #[arg(long)]
    pub tau_grid: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Observable spec; repeatable. JSON ({"kind": "deviation", "node": 1}) or
    /// shorthand: deviation:I, pairwise:I,J, neighbor:I, average, custom:C1,C2,..,
    /// centering, pairs, incidence
    #[arg(long = "obs")]
    pub obs: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Everything a command needs after defaults and the example are applied.
pub struct RunConfig {
    pub graph: WeightedGraph,
    pub spectrum: Spectrum,
    pub observables: ObservableSet,
    pub params: RiskParams,
    pub taus: Vec<f64>,
    pub history: Option<Vec<f64>>,
    pub seed: u64,
}

struct Scenario {
    graph: WeightedGraph,
    tau: Option<f64>,
    grid: Option<Vec<f64>>,
    eps: f64,
    b: f64,
    obs: Vec<String>,
    history: Option<Vec<f64>>,
}

pub const EXAMPLE_ONE_EDGES: [(usize, usize, f64); 6] =
    [(0, 1, 2.0), (0, 2, 3.2), (1, 4, 0.1), (1, 2, 5.0), (2, 3, 0.2), (3, 4, 0.3)];

/// Random 100-node graph rescaled so its stability margin equals `tau_max`.
fn hundred_node_graph(tau_max: f64, seed: u64) -> Result<WeightedGraph, CliError> {
    let g = random_connected_graph(100, 0.3, 0.5, 1.0, None, seed)?;
    let lam = g.spectrum()?.lambda_max();
    Ok(g.scaled(FRAC_PI_2 / (lam * tau_max)))
}

fn scenario(example: u8, seed: u64) -> Result<Scenario, CliError> {
    Ok(match example {
        1 => Scenario {
            graph: WeightedGraph::new(5, EXAMPLE_ONE_EDGES)?,
            tau: Some(0.1),
            grid: None,
            eps: 0.2f64.sqrt(),
            b: 0.3,
            obs: ["average", "deviation:1", "deviation:5", "pairwise:2,3", "pairwise:2,5"].map(String::from).to_vec(),
            history: Some(vec![1.0, 2.0, 3.0, 4.0, 5.0]),
        },
        2 | 3 => {
            let tau_max = if example == 2 { 0.3524 } else { 0.3415 };
            Scenario {
                graph: hundred_node_graph(tau_max, seed)?,
                tau: None,
                grid: Some(grid_range(0.005, 0.35, 0.005)?.into_iter().filter(|t| *t < tau_max).collect()),
                eps: 0.05f64.sqrt(),
                // noise level not given for these scenarios; 0.4 lets all three classes appear
                b: 0.4,
                obs: vec![if example == 2 { "centering" } else { "pairs" }.into()],
                history: None,
            }
        }
        _ => return Err(CliError::config(format!("unknown example {example}"))),
    })
}

impl Common {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let sc = self.example.map(|e| scenario(e, self.seed)).transpose()?;
        let graph = match (&self.graph, self.topology, &sc) {
            (Some(path), _, _) => WeightedGraph::read_file(path)?,
            (None, Some(kind), _) => delayrisk::graph::generate_topology(kind, self.weight)?,
            (None, None, Some(s)) => s.graph.clone(),
            (None, None, None) => return Err(CliError::config("one of --graph, --topology or --example is required")),
        };
        let spectrum = graph.spectrum()?;
        let tau_max = spectrum.stability_margin();
        let taus = match (&self.tau_grid, self.tau) {
            (Some(g), _) => parse_grid(g)?,
            (None, Some(t)) => vec![t],
            (None, None) => match &sc {
                Some(Scenario { tau: Some(t), .. }) => vec![*t],
                Some(Scenario { grid: Some(g), .. }) => g.clone(),
                _ => return Err(CliError::config("--tau or --tau-grid is required")),
            },
        };
        let grid = taus.len() > 1 || self.tau_grid.is_some();
        for &t in &taus {
            if !(t.is_finite() && t >= 0.0) || (grid && t == 0.0) {
                return Err(CliError::config(format!("delay {t} must lie in (0, tau_max)")));
            }
            if t >= tau_max {
                return Err(CliError::Unstable(format!("tau = {t} is not below the stability margin tau_max = {tau_max}")));
            }
        }
        let eps = self.eps.or(sc.as_ref().map(|s| s.eps)).unwrap_or(0.05);
        if !(eps > 0.0 && eps < 1.0) {
            return Err(CliError::config(format!("eps = {eps} must lie in (0, 1)")));
        }
        let b = self.b.or(sc.as_ref().map(|s| s.b)).unwrap_or(1.0);
        let mut params = RiskParams::new(eps, b, taus[0]);
        if let Some(beta) = self.beta {
            params = params.with_beta(beta);
        }
        params.validate()?;
        let specs: Vec<String> = if !self.obs.is_empty() {
            self.obs.clone()
        } else if let Some(s) = &sc {
            s.obs.clone()
        } else {
            vec!["centering".into()]
        };
        let mut rows = Vec::new();
        for spec in &specs {
            rows.extend(parse_observables(spec, &graph)?);
        }
        let observables = ObservableSet::new(rows)?.bind(&spectrum)?;
        Ok(RunConfig {
            graph,
            spectrum,
            observables,
            params,
            taus,
            history: sc.and_then(|s| s.history),
            seed: self.seed,
        })
    }
}

impl RunConfig {
    /// Constant history from `--history` (or the example), else zero.
    pub fn history(&self, tau: f64, explicit: Option<&str>) -> Result<HistoryFunction, CliError> {
        let n = self.graph.n();
        let values = match explicit {
            Some(s) => Some(parse_floats(s)?),
            None => self.history.clone(),
        };
        match values {
            None => Ok(HistoryFunction::zero(tau, n)),
            Some(v) if v.len() == n => Ok(HistoryFunction::constant(tau, v)?),
            Some(v) => Err(CliError::config(format!("history has {} values, graph has {n} nodes", v.len()))),
        }
    }
}

pub fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::config(format!("`{x}` is not a number"))))
        .collect()
}

pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let v = s.split(':').map(str::trim).collect::<Vec<_>>();
    let bad = || CliError::config(format!("cannot parse tau grid `{s}` (expected LO:HI:STEP)"));
    let [lo, hi, step] = v[..] else { return Err(bad()) };
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    grid_range(num(lo)?, num(hi)?, num(step)?)
}

fn grid_range(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && lo <= hi && lo.is_finite() && hi.is_finite()) {
        return Err(CliError::config(format!("tau grid {lo}:{hi}:{step} needs LO <= HI and STEP > 0")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    // rounded to 12 decimals so grid points print as typed (0.145, not 0.14500000000000002)
    Ok((0..=count).map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12).collect())
}

/// 1-based node number to a 0-based index.
fn node(v: &Value, key: &str, n: usize) -> Result<usize, CliError> {
    let i = v.get(key).and_then(Value::as_u64).ok_or_else(|| CliError::config(format!("observable needs `{key}`")))?;
    if i == 0 || i as usize > n {
        return Err(CliError::config(format!("node {i} out of range 1..={n}")));
    }
    Ok(i as usize - 1)
}

fn parse_json_observable(v: &Value, g: &WeightedGraph) -> Result<Vec<Observable>, CliError> {
    let n = g.n();
    let kind = v.get("kind").and_then(Value::as_str).ok_or_else(|| CliError::config("observable needs `kind`"))?;
    Ok(match kind {
        "deviation" => vec![Observable::deviation_from_average(node(v, "node", n)?, n)?],
        "pairwise" => vec![Observable::pairwise(node(v, "i", n)?, node(v, "j", n)?, n)?],
        "neighbor" => vec![Observable::neighbor_average_deviation(g, node(v, "node", n)?)?],
        "average" => vec![Observable::average_state(n)],
        "custom" => {
            let c: Vec<f64> = serde_json::from_value(v.get("c").cloned().unwrap_or(Value::Null))
                .map_err(|_| CliError::config("custom observable needs `c`: [numbers]"))?;
            if c.len() != n {
                return Err(CliError::config(format!("custom observable has {} entries, graph has {n} nodes", c.len())));
            }
            vec![Observable::custom(c)?]
        }
        "centering" => ObservableSet::centering(n).rows().to_vec(),
        "pairs" => ObservableSet::all_pairs(n).rows().to_vec(),
        "incidence" => g.edges().iter().map(|e| Observable::pairwise(e.i, e.j, n)).collect::<Result<_, _>>()?,
        other => return Err(CliError::config(format!("unknown observable kind `{other}`"))),
    })
}

pub fn parse_observables(spec: &str, g: &WeightedGraph) -> Result<Vec<Observable>, CliError> {
    let spec = spec.trim();
    if spec.starts_with('{') || spec.starts_with('[') {
        let v: Value = serde_json::from_str(spec)?;
        return match v {
            Value::Array(items) => {
                let mut out = Vec::new();
                for item in &items {
                    out.extend(parse_json_observable(item, g)?);
                }
                Ok(out)
            }
            obj => parse_json_observable(&obj, g),
        };
    }
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    let ints = || -> Result<Vec<u64>, CliError> {
        args.split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|_| CliError::config(format!("bad observable `{spec}`"))))
            .collect()
    };
    let v = match kind {
        "deviation" | "neighbor" => serde_json::json!({"kind": kind, "node": ints()?[0]}),
        "pairwise" => {
            let ij = ints()?;
            if ij.len() != 2 {
                return Err(CliError::config(format!("pairwise needs two nodes: `{spec}`")));
            }
            serde_json::json!({"kind": "pairwise", "i": ij[0], "j": ij[1]})
        }
        "custom" => serde_json::json!({"kind": "custom", "c": parse_floats(args)?}),
        _ => serde_json::json!({"kind": kind}),
    };
    parse_json_observable(&v, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k4() -> WeightedGraph {
        delayrisk::graph::generate_topology(TopologyKind::Complete(4), 1.0).unwrap()
    }

    #[test]
    fn grid_includes_both_ends() {
        let g = parse_grid("0.1:0.3:0.1").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[2] - 0.3).abs() < 1e-12);
        assert!(parse_grid("0.3:0.1:0.1").is_err());
        assert!(parse_grid("0.1:0.3").is_err());
    }

    #[test]
    fn shorthand_and_json_agree() {
        let g = k4();
        assert_eq!(parse_observables("pairwise:1,3", &g).unwrap(), parse_observables(r#"{"kind":"pairwise","i":1,"j":3}"#, &g).unwrap());
        assert_eq!(parse_observables("centering", &g).unwrap().len(), 4);
        assert_eq!(parse_observables("pairs", &g).unwrap().len(), 6);
        assert_eq!(parse_observables(r#"[{"kind":"average"},{"kind":"deviation","node":2}]"#, &g).unwrap().len(), 2);
    }

    #[test]
    fn bad_specs_are_config_errors() {
        let g = k4();
        for s in ["deviation:9", "deviation:0", "custom:1,2", "frobnicate", "pairwise:1"] {
            assert_eq!(parse_observables(s, &g).unwrap_err().exit_code(), 2, "{s}");
        }
    }

    #[test]
    fn example_two_graph_has_requested_margin() {
        let g = hundred_node_graph(0.3524, 1).unwrap();
        assert!((g.spectrum().unwrap().stability_margin() - 0.3524).abs() < 1e-9);
    }
}
