//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed; exits non-zero when any line fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use delayrisk::dde::{energy_integral, HistoryFunction};
use delayrisk::graph::{analytic_spectrum, generate_topology, random_connected_graph, Spectrum, TopologyKind, WeightedGraph};
use delayrisk::joint::{
    equal_split, exp_joint_sum, joint_quad_risk, mc_joint_probability, probability_risk_bounds, quad_split_point,
    steady_covariance,
};
use delayrisk::limits::{limit_report, var_hard_limit, vector_limit_report, RandomInstance};
use delayrisk::observables::{Observable, ObservableSet};
use delayrisk::risk::{
    delay_monotonicity_report, exp_from_sigma, exp_of_gaussian, quad_from_sigma, quad_of_gaussian, steady_sigma,
    var_risk_steady, RiskParams, RiskValue,
};
use delayrisk::rng::NormalRng;
use delayrisk::sim::{ensemble_stats, exceedance_frequency, SimConfig};
use delayrisk::special::{f_energy, z_plus};
use delayrisk::topology::{
    cross_validate, crossing_delays, family_stability_bound, ordering_checks, ring_parity_check, CrossingPair,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Runner {
    failures: usize,
}

impl Runner {
    fn run(&mut self, id: &str, title: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let pass = out.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        let timing = if in_time { String::new() } else { format!(" [over budget {:.0?}]", budget) };
        println!(
            "{} {id:>4} {title}: {} ({:.2?}){timing}",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed
        );
    }
}

fn example_one() -> WeightedGraph {
    WeightedGraph::new(5, [(0, 1, 2.0), (0, 2, 3.2), (1, 4, 0.1), (1, 2, 5.0), (2, 3, 0.2), (3, 4, 0.3)]).unwrap()
}

fn main() {
    let mut r = Runner { failures: 0 };
    r.run("1", "energy identity", Duration::from_secs(5), criterion_1);
    r.run("2", "eigenstructure of graph families", Duration::from_secs(10), criterion_2);
    r.run("3", "Example 1 stability margin", Duration::from_secs(1), criterion_3);
    r.run("4", "steady VaR vs Monte Carlo", Duration::from_secs(300), criterion_4);
    r.run("5", "quadratic/exponential defining properties", Duration::from_secs(60), criterion_5);
    r.run("6", "closed-form topology table vs spectral pipeline", Duration::from_secs(30), criterion_6);
    r.run("7a", "limits and tradeoffs, derived floors", Duration::from_secs(120), || criterion_7(false));
    r.run("7b", "limits and tradeoffs, printed floors", Duration::from_secs(120), || criterion_7(true));
    r.run("8", "tightness of the hard limit", Duration::from_secs(5), criterion_8);
    r.run("9", "delay monotonicity", Duration::from_secs(30), criterion_9);
    r.run("10", "joint risk bounds", Duration::from_secs(120), criterion_10);
    let start = Instant::now();
    let subs = criterion_11();
    let all = subs.iter().all(|s| s.pass);
    for (k, s) in subs.iter().enumerate() {
        println!("     11.{} {}: {}", k + 1, if s.pass { "PASS" } else { "FAIL" }, s.detail);
    }
    r.run("11", "qualitative topology claims", Duration::from_secs(60).saturating_sub(start.elapsed()), || {
        outcome(all, format!("{}/{} sub-checks pass", subs.iter().filter(|s| s.pass).count(), subs.len()))
    });
    println!("acceptance: {} failing line(s)", r.failures);
    if r.failures > 0 {
        std::process::exit(1);
    }
}

fn criterion_1() -> Outcome {
    const TOL: f64 = 1e-4;
    let mut worst: f64 = 0.0;
    for tau in [1.0, 0.25] {
        for x in [0.1, 0.5, 1.0, 1.4] {
            let lambda = x / tau;
            // The slowest case (x = 1.4) decays to 1e-8 after about 225τ.
            let q = energy_integral(lambda, tau, 300.0 * tau).unwrap();
            worst = worst.max((q - tau * f_energy(x).unwrap()).abs());
        }
    }
    outcome(worst < TOL, format!("max |quadrature - tau f| = {worst:.2e} (tol {TOL:.0e})"))
}

fn criterion_2() -> Outcome {
    const TOL: f64 = 1e-8;
    let mut kinds = Vec::new();
    for n in 3..=20 {
        kinds.push(TopologyKind::Complete(n));
        kinds.push(TopologyKind::Path(n));
        kinds.push(TopologyKind::Ring(n));
        kinds.push(TopologyKind::Star(n));
        if n < 20 {
            kinds.push(TopologyKind::Wheel(n));
        }
        for a in 1..=n / 2 {
            kinds.push(TopologyKind::CompleteBipartite(a, n - a));
        }
    }
    let (mut ev, mut sums) = (0.0f64, 0.0f64);
    for &k in &kinds {
        let exact = analytic_spectrum(k).unwrap();
        let numeric = generate_topology(k, 1.0).unwrap().spectrum().unwrap();
        for (a, b) in exact.eigenvalues().iter().zip(numeric.eigenvalues()) {
            ev = ev.max((a - b).abs());
        }
        let n = k.node_count();
        for i in 0..n {
            let c = Observable::deviation_from_average(i, n).unwrap();
            let ga = exact.grouped_energy(c.vector(), 1e-7);
            let gb = numeric.grouped_energy(c.vector(), 1e-7);
            if ga.len() != gb.len() {
                return outcome(false, format!("{k}: eigenvalue groups differ ({} vs {})", ga.len(), gb.len()));
            }
            for (x, y) in ga.iter().zip(&gb) {
                sums = sums.max((x.1 - y.1).abs());
            }
        }
    }
    outcome(
        ev < TOL && sums < TOL,
        format!("{} graphs; eigenvalue dev {ev:.1e}, coefficient-sum dev {sums:.1e} (tol {TOL:.0e})", kinds.len()),
    )
}

fn criterion_3() -> Outcome {
    let tm = example_one().spectrum().unwrap().stability_margin();
    outcome((tm - 0.1211).abs() <= 5e-4, format!("tau_max = {tm:.6} (target 0.1211 +- 5e-4)"))
}

/// Random graph whose λ_nτ lies in [0.6, 1.2] and λ_2 ≥ λ_n/4, so the
/// slowest mode decorrelates within a few delays.
fn mc_instance(index: u64) -> (WeightedGraph, Vec<f64>, f64) {
    let mut rng = NormalRng::new(404, index);
    loop {
        let n = 3 + (rng.uniform() * 6.0) as usize;
        let seed = (rng.uniform() * 1e12) as u64;
        let g = random_connected_graph(n, 0.6, 0.2, 1.0, None, seed).unwrap();
        let s = g.spectrum().unwrap();
        if s.lambda_2() < 0.25 * s.lambda_max() {
            continue;
        }
        let tau = (0.6 + 0.6 * rng.uniform()) / s.lambda_max();
        let mut c: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mean = c.iter().sum::<f64>() / n as f64;
        c.iter_mut().for_each(|v| *v -= mean);
        return (g, c, tau);
    }
}

fn criterion_4() -> Outcome {
    const EPS: f64 = 0.05;
    const N: usize = 100_000;
    const TRAJ: usize = 200;
    let band = 3.0 * (EPS * (1.0 - EPS) / N as f64).sqrt();
    let mut worst: f64 = 0.0;
    let mut fails = 0;
    for k in 0..10 {
        let (g, c, tau) = mc_instance(k);
        let s = g.spectrum().unwrap();
        let obs = Observable::custom(c).unwrap();
        let p = RiskParams::new(EPS, 1.0, tau);
        let risk = var_risk_steady(&s, &obs, &p).unwrap().value();
        let mut cfg = SimConfig::defaults(&g, tau, 0.0, TRAJ, 1000 + k).unwrap();
        cfg.decimation = cfg.decimation.max(1.5 / s.lambda_2());
        let cfg = cfg.with_pool(N / TRAJ);
        let set = ObservableSet::new(vec![obs]).unwrap();
        let h = HistoryFunction::zero(tau, g.n());
        let st = ensemble_stats(&g, &p, &set, &h, &cfg).unwrap();
        let (freq, _) = exceedance_frequency(&st.pool[0], risk);
        let dev = (freq - EPS).abs();
        worst = worst.max(dev);
        if dev > band {
            fails += 1;
        }
    }
    outcome(fails == 0, format!("10 graphs, worst |freq - eps| = {worst:.5} (band {band:.5}), {fails} outside"))
}

fn criterion_5() -> Outcome {
    const N: usize = 1_000_000;
    let mut rng = NormalRng::new(55, 0);
    // steady observable: K_4 deviation from average, τ = 0.1, b = 1
    let s = generate_topology(TopologyKind::Complete(4), 1.0).unwrap().spectrum().unwrap();
    let sigma = steady_sigma(&s, &Observable::deviation_from_average(0, 4).unwrap(), &RiskParams::new(0.5, 1.0, 0.1)).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    // (μ, σ, ε, β): the steady case and a transient case with non-zero mean
    for (mu, sg, eps, beta) in [(0.0, sigma, 0.5, 1.5), (0.7, 0.9, 1.2, 0.8)] {
        let ys: Vec<f64> = (0..N).map(|_| (mu + sg * rng.normal()).abs()).collect();
        let dq = if mu == 0.0 { quad_from_sigma(sg, eps) } else { quad_of_gaussian(mu, sg, eps) };
        let de = if mu == 0.0 { exp_from_sigma(sg, eps, beta) } else { exp_of_gaussian(mu, sg, eps, beta).unwrap() };
        let (RiskValue::Finite(dq), RiskValue::Finite(de)) = (dq, de) else {
            return outcome(false, "risk unexpectedly infinite");
        };
        let (mq, sq) = mean_se(ys.iter().map(|y| (y - dq).powi(2)));
        let (me, se) = mean_se(ys.iter().map(|y| (beta * (y - de)).exp()));
        let zq = (mq - eps * eps) / sq;
        let ze = (me - (beta * eps).exp()) / se;
        ok &= zq.abs() < 3.0 && ze.abs() < 3.0;
        lines.push(format!("mu={mu}: z_quad={zq:+.2}, z_exp={ze:+.2}"));
    }
    outcome(ok, lines.join("; "))
}

fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn criterion_6() -> Outcome {
    const TOL: f64 = 1e-8;
    let mut kinds = Vec::new();
    for n in 2..=12 {
        kinds.push(TopologyKind::Complete(n));
        kinds.push(TopologyKind::Path(n));
        kinds.push(TopologyKind::Star(n));
        if n >= 3 {
            kinds.push(TopologyKind::Ring(n));
        }
        if (3..12).contains(&n) {
            kinds.push(TopologyKind::Wheel(n));
        }
        for a in 1..=n / 2 {
            kinds.push(TopologyKind::CompleteBipartite(a, n - a));
        }
    }
    let mut worst: f64 = 0.0;
    for &k in &kinds {
        for frac in [0.1, 0.5, 0.95] {
            let p = RiskParams::new(0.05, 1.0, frac * family_stability_bound(k, 1.0));
            worst = worst.max(cross_validate(k, &p).unwrap());
        }
    }
    outcome(worst < TOL, format!("{} graphs x 3 delays, max deviation {worst:.2e} (tol {TOL:.0e})", kinds.len()))
}

fn criterion_7(printed: bool) -> Outcome {
    const INSTANCES: u64 = 500;
    let mut v = [0usize; 8];
    for k in 0..INSTANCES {
        let n = 3 + (k % 8) as usize;
        let mut rng = NormalRng::new(77, k);
        let tau = 0.05 + 0.95 * rng.uniform();
        let b = 0.5 + 1.5 * rng.uniform();
        let inst = RandomInstance::generate(n, tau, 7, k).unwrap();
        let scale = 0.5 + 2.0 * rng.uniform();
        let obs = Observable::custom(inst.c.iter().map(|x| x * scale).collect()).unwrap();
        if !obs.in_kernel() {
            return outcome(false, format!("instance {k}: observable left the consensus kernel"));
        }
        let s = &inst.spectrum;
        let var = limit_report(s, &obs, &RiskParams::new(0.05, b, tau)).unwrap();
        let expect = RiskParams::new(0.3 + 0.65 * rng.uniform(), b, tau).with_beta(0.2 + 2.0 * rng.uniform());
        let ex = limit_report(s, &obs, &expect).unwrap();
        v[0] += !var.flags.resistance as usize;
        v[1] += !var.flags.var_hard as usize;
        v[4] += !(ex.flags.quad_hard && ex.flags.exp_hard) as usize;
        if printed {
            v[2] += !var.printed.var_tradeoff as usize;
            v[3] += !(ex.printed.quad_tradeoff && ex.printed.exp_tradeoff) as usize;
        } else {
            v[2] += !var.flags.var_tradeoff as usize;
            v[3] += !(ex.flags.quad_tradeoff && ex.flags.exp_tradeoff) as usize;
        }
        let q = 2 + (k % 2) as usize;
        let rows: Vec<Observable> = RandomInstance::extra_observables(n, q, 7, k)
            .into_iter()
            .map(|c| Observable::custom(c).unwrap())
            .collect();
        let set = ObservableSet::new(rows).unwrap();
        let vr = vector_limit_report(s, &set, &RiskParams::new(0.05, b, tau)).unwrap();
        let ve = vector_limit_report(s, &set, &expect).unwrap();
        v[5] += !(if printed { vr.tradeoff_printed_ok } else { vr.tradeoff_ok }) as usize;
        v[6] += !(vr.var_hard_ok && ve.quad_hard_ok && ve.exp_hard_ok) as usize;
        // exponential vector sum from Monte Carlo, checked every 10th instance
        if k % 10 == 0 {
            let out = steady_covariance(s, &set, &expect).unwrap();
            let est = exp_joint_sum(&out, expect.eps, expect.beta.unwrap(), 20_000, k).unwrap();
            v[7] += !(est.sum.value() + 3.0 * est.se >= ve.hard.exp_sum) as usize;
        }
    }
    let names = ["resistance", "var hard", "var tradeoff", "quad/exp tradeoff", "quad/exp hard", "vector tradeoff", "vector hard", "exp vector sum"];
    let total: usize = v.iter().sum();
    let detail = names.iter().zip(v).map(|(n, c)| format!("{n} {c}")).collect::<Vec<_>>().join(", ");
    outcome(total == 0, format!("{INSTANCES} instances; violations: {detail}"))
}

fn criterion_8() -> Outcome {
    const TOL: f64 = 0.005;
    let mut worst: f64 = 0.0;
    for n in 2..=12 {
        for tau in [0.1, 0.4, 1.0] {
            let g = generate_topology(TopologyKind::Complete(n), 0.7391 / (n as f64 * tau)).unwrap();
            let s = g.spectrum().unwrap();
            let c = Observable::deviation_from_average(0, n).unwrap();
            let p = RiskParams::new(0.05, 1.0, tau);
            let r = var_risk_steady(&s, &c, &p).unwrap().value();
            let lim = var_hard_limit(c.norm(), &p).unwrap();
            worst = worst.max((r / lim - 1.0).abs());
        }
    }
    outcome(worst < TOL, format!("max relative gap {worst:.2e} (tol {TOL}); z+ = {:.7}", z_plus()))
}

fn criterion_9() -> Outcome {
    const TOL: f64 = 1e-5;
    let mut worst: f64 = 0.0;
    let mut mono_fail = 0;
    for k in 0..20u64 {
        let n = 3 + (k % 6) as usize;
        let inst = RandomInstance::generate(n, 1.0, 9, k).unwrap();
        let s: &Spectrum = &inst.spectrum;
        let obs = Observable::custom(inst.c.clone()).unwrap();
        let tmax = s.stability_margin();
        let grid: Vec<f64> = (1..=50).map(|j| tmax * j as f64 / 51.0).collect();
        for eps in [0.05, 0.8] {
            let p = RiskParams::new(eps, 1.0, 0.0).with_beta(1.0);
            let rep = delay_monotonicity_report(s, &obs, &p, &grid).unwrap();
            mono_fail += !rep.strictly_increasing as usize;
            worst = worst.max(rep.max_derivative_rel_err);
        }
    }
    outcome(
        mono_fail == 0 && worst < TOL,
        format!("20 instances x 2 eps: {mono_fail} non-monotone, max derivative rel err {worst:.2e} (tol {TOL:.0e})"),
    )
}

fn criterion_10() -> Outcome {
    const EPS: f64 = 0.1;
    const N: usize = 100_000;
    let mut lines = Vec::new();
    let mut ok = true;
    for (k, q) in [(0u64, 2usize), (1, 3), (2, 2), (3, 3)] {
        let n = 6;
        let inst = RandomInstance::generate(n, 0.3, 10, k).unwrap();
        let rows = RandomInstance::extra_observables(n, q, 10, k).into_iter().map(|c| Observable::custom(c).unwrap()).collect();
        let set = ObservableSet::new(rows).unwrap();
        let out = steady_covariance(&inst.spectrum, &set, &RiskParams::new(EPS, 1.0, 0.3)).unwrap();
        let bounds = probability_risk_bounds(&out, EPS, &equal_split(EPS, q)).unwrap();
        let up = mc_joint_probability(&out, &bounds.upper, N, 100 + k).unwrap();
        let shrunk: Vec<f64> = bounds.lower.iter().map(|l| l * (1.0 - 1e-3)).collect();
        let lo = mc_joint_probability(&out, &shrunk, N, 200 + k).unwrap();
        let cover = up.p >= 1.0 - EPS - 3.0 * up.se;
        let fails = lo.p + 3.0 * lo.se < 1.0 - EPS;
        // random splits with Σε_i² = ε² that keep every coordinate feasible
        let eq = 2.5;
        let sphere = joint_quad_risk(&out, eq).unwrap();
        let mut rng = NormalRng::new(31, k);
        let mut on_sphere = true;
        for _ in 0..100 {
            let floor: Vec<f64> = out.sigmas().iter().map(|s| s * s * (1.0 - 2.0 / PI)).collect();
            let spare = eq * eq - floor.iter().sum::<f64>();
            let w: Vec<f64> = (0..q).map(|_| rng.uniform() + 1e-3).collect();
            let ws: f64 = w.iter().sum();
            let split: Vec<f64> = floor.iter().zip(&w).map(|(f, wi)| (f + spare * wi / ws).sqrt()).collect();
            let pt: Vec<f64> = quad_split_point(&out, &split).unwrap().iter().map(|r| r.value()).collect();
            on_sphere &= sphere.contains(&pt, 1e-8);
        }
        ok &= cover && fails && on_sphere;
        lines.push(format!("q={q}: upper {:.4}+-{:.4}, lower {:.4}, sphere {}", up.p, up.se, lo.p, on_sphere));
    }
    outcome(ok, lines.join("; "))
}

fn criterion_11() -> Vec<Outcome> {
    let p = RiskParams::new(0.05, 1.0, 0.0);
    let mut out = Vec::new();
    let wheel: Vec<_> = (4..=12).map(|m| ordering_checks(TopologyKind::Wheel(m), &p).unwrap()).collect();
    let crossings: Vec<String> =
        wheel.iter().filter_map(|r| r.tau_star.map(|t| format!("{}:{t:.4}", r.kind))).collect();
    out.push(outcome(
        wheel.iter().all(|r| r.passed),
        format!("wheel hub riskier than rim for all stable tau (rim 4..12); crossings at {}", crossings.join(" ")),
    ));
    let star = ordering_checks(TopologyKind::Star(5), &p).unwrap();
    out.push(outcome(
        star.passed,
        format!("star K_1,4 centre riskier than leaves for all tau; tau* = {:?}, {}", star.tau_star, star.detail),
    ));
    let bip = ordering_checks(TopologyKind::CompleteBipartite(2, 8), &p).unwrap();
    out.push(outcome(bip.passed, format!("K_2,8 group crossing at tau* = {:?}; {}", bip.tau_star, bip.detail)));
    let mut path_ok = true;
    let mut path_detail = Vec::new();
    for n in [6, 7] {
        let r = ordering_checks(TopologyKind::Path(n), &p).unwrap();
        path_ok &= r.passed;
        path_detail.push(format!("P{n} tau* = {:?}", r.tau_star));
    }
    out.push(outcome(path_ok, format!("path ordering flips: {}", path_detail.join(", "))));
    let mut ring_ok = true;
    for n in 3..=12 {
        let tau = 0.5 * family_stability_bound(TopologyKind::Ring(n), 1.0);
        ring_ok &= ordering_checks(TopologyKind::Ring(n), &p.with_tau(tau)).unwrap().passed;
    }
    let parity = ring_parity_check(9, 10, 0.99, &p).unwrap();
    out.push(outcome(
        ring_ok && parity.passed,
        format!("ring risks node-uniform (n 3..12); R9 vs R10: {}", parity.detail),
    ));
    // guard: the complete-graph pair used for the size comparison has a single crossing
    let kc = crossing_delays(CrossingPair::Complete(4, 8)).unwrap();
    out.push(outcome(kc.len() == 1, format!("K4 vs K8 single crossing at {:?}", kc.first())));
    out
}
