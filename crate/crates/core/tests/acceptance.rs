//! Acceptance checks, one test per criterion. Every check prints a line
//!
//!     [criterion N] PASS|FAIL|SKIP  what: measured (tolerance)
//!
//! and a criterion fails if any of its checks fail. Checks that need the
//! reference datasets skip with a notice when the files are not installed
//! (see DATASETS.md). Set `HOPE_ACCEPTANCE_DRAWS=500` for the full ranking
//! run; the default of 100 draws checks the ranking only.

use std::collections::HashMap;
use std::sync::OnceLock;

use ergm_hope::datasets::{self, Dataset};
use ergm_hope::estimation::exact::{conditional_pmf, ExactLikelihood};
use ergm_hope::estimation::mcmle::mcmle;
use ergm_hope::estimation::path::loglik_path_sampling;
use ergm_hope::graph::all_dyads;
use ergm_hope::harness::{build_partition, run_hope, HopeConfig, HopeReport, NamedModel, Strategy};
use ergm_hope::metrics::{
    betweenness_centrality, centralization, reliability_rho, CentralizationKind,
};
use ergm_hope::rng::{derive_seed, rng_from_seed, Rng};
use ergm_hope::sampler::{sample_conditional, sample_with};
use ergm_hope::{fit, Dyad, DyadSet, EstimatorConfig, Graph, Method, ModelSpec, PartialGraph, SamplerConfig};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

struct Criterion {
    id: u8,
    failed: Vec<String>,
}

impl Criterion {
    fn new(id: u8) -> Self {
        Criterion { id, failed: Vec::new() }
    }

    fn check(&mut self, what: &str, pass: bool, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("[criterion {}] {tag}  {what}: {detail}", self.id);
        if !pass {
            self.failed.push(format!("{what}: {detail}"));
        }
    }

    fn within(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let pass = (got - want).abs() <= tol;
        self.check(what, pass, format!("{got:.4} vs {want} (tolerance {tol})"));
    }

    fn skip(&self, what: &str, why: &str) {
        println!("[criterion {}] SKIP  {what}: {why}", self.id);
    }

    fn finish(self) {
        assert!(self.failed.is_empty(), "criterion {} failed:\n{}", self.id, self.failed.join("\n"));
    }
}

/// `n` nodes with exactly `m` edges placed uniformly at random.
fn random_graph(n: usize, m: usize, seed: u64) -> Graph {
    let mut dyads: Vec<Dyad> = all_dyads(n).collect();
    dyads.shuffle(&mut rng_from_seed(seed));
    let mut g = Graph::new(n);
    for d in &dyads[..m] {
        g.set_edge(*d, true);
    }
    g
}

fn installed(ds: &Dataset) -> Option<Graph> {
    let root = datasets::data_root();
    if !ds.is_installed(&root) {
        return None;
    }
    Some(ds.load(&root).expect("installed dataset fails to load"))
}

fn not_installed(ds: &Dataset) -> String {
    format!(
        "dataset `{}` not installed under {}",
        ds.name,
        datasets::data_root().display()
    )
}

fn edges_model() -> ModelSpec {
    ModelSpec::parse("edges").unwrap()
}

fn model1_checks(c: &mut Criterion, label: &str, g: &Graph, ds: &Dataset, theta_tol: f64) {
    let m = edges_model().compile(g).unwrap();
    let f = fit(&PartialGraph::fully_observed(g), &m, &EstimatorConfig::default(), None).unwrap();
    let r = &ds.fits[0];
    c.within(&format!("{label} Model 1 edges"), f.theta()[0], r.estimates[0], theta_tol);
    c.within(&format!("{label} Model 1 AIC"), f.aic.unwrap(), r.aic, 0.1);
    c.within(&format!("{label} Model 1 BIC"), f.bic.unwrap(), r.bic, 0.1);
}

#[test]
fn criterion_1_edges_model_closed_form() {
    let mut c = Criterion::new(1);
    // Model 1 depends on the graph only through n and the edge count.
    for (ds, tol) in [(datasets::lazega(), 0.001), (datasets::teenage(), 0.01)] {
        let g = random_graph(ds.table1.size, ds.table1.edges, 11);
        model1_checks(&mut c, &format!("{} (n, edges)", ds.name), &g, &ds, tol);
        match installed(&ds) {
            Some(g) => model1_checks(&mut c, ds.name, &g, &ds, tol),
            None => c.skip(&format!("{} data", ds.name), &not_installed(&ds)),
        }
    }
    c.finish();
}

fn coefficient_checks(c: &mut Criterion, label: &str, got: &[f64], want: &[f64], tols: &[f64]) {
    for (k, ((g, w), t)) in got.iter().zip(want).zip(tols).enumerate() {
        c.within(&format!("{label} coefficient {}", k + 1), *g, *w, *t);
    }
}

#[test]
fn criterion_2_dyadic_independence_models() {
    let mut c = Criterion::new(2);
    for ds in [datasets::lazega(), datasets::teenage()] {
        let Some(g) = installed(&ds) else {
            c.skip(&format!("{} Model 3", ds.name), &not_installed(&ds));
            continue;
        };
        let m = ds.model(3).unwrap().compile(&g).unwrap();
        let cfg = EstimatorConfig {
            method: Some(Method::Mple),
            ..EstimatorConfig::default()
        };
        let f = fit(&PartialGraph::fully_observed(&g), &m, &cfg, None).unwrap();
        let r = &ds.fits[2];
        let label = format!("{} Model 3", ds.name);
        coefficient_checks(&mut c, &label, &f.theta(), &r.estimates, &vec![0.02; r.estimates.len()]);
        c.within(&format!("{label} AIC"), f.aic.unwrap(), r.aic, 0.3);
        c.within(&format!("{label} BIC"), f.bic.unwrap(), r.bic, 0.3);
    }
    c.finish();
}

#[test]
fn criterion_3_dependence_models() {
    let mut c = Criterion::new(3);
    for ds in [datasets::lazega(), datasets::teenage()] {
        let Some(g) = installed(&ds) else {
            c.skip(&format!("{} Models 2, 4, 5", ds.name), &not_installed(&ds));
            continue;
        };
        for k in [2, 4, 5] {
            let m = ds.model(k).unwrap().compile(&g).unwrap();
            let cfg = EstimatorConfig {
                mc_samples: 4096,
                path_samples: 2000,
                ..EstimatorConfig::default()
            };
            let label = format!("{} Model {k}", ds.name);
            match fit(&PartialGraph::fully_observed(&g), &m, &cfg, None) {
                Ok(f) => {
                    let r = &ds.fits[k - 1];
                    let tols: Vec<f64> = r.std_errors.iter().map(|s| 2.0 * s).collect();
                    coefficient_checks(&mut c, &label, &f.theta(), &r.estimates, &tols);
                    match f.aic {
                        Some(aic) => c.within(&format!("{label} AIC"), aic, r.aic, 2.0),
                        None => c.check(&format!("{label} AIC"), false, "no log-likelihood".into()),
                    }
                }
                Err(e) => c.check(&label, false, format!("fit failed: {e}")),
            }
        }
    }
    c.finish();
}

fn loo_report(g: &Graph, draws: usize) -> HopeReport {
    let plan = build_partition(g.n(), &Strategy::LeaveOneOut, 1, None).unwrap();
    let models = vec![NamedModel {
        name: "Model 1".into(),
        spec: edges_model(),
    }];
    let cfg = HopeConfig {
        draws,
        seed: 1,
        structural_metrics: false,
        ..HopeConfig::default()
    };
    run_hope(g, &models, &plan, &cfg).unwrap()
}

fn lazega_like_loo() -> &'static HopeReport {
    static REPORT: OnceLock<HopeReport> = OnceLock::new();
    REPORT.get_or_init(|| loo_report(&random_graph(36, 115, 11), 500))
}

fn dyad_row_checks(c: &mut Criterion, label: &str, report: &HopeReport, ds: &Dataset, full: bool) {
    let row = &report.models[0].row;
    let r = &ds.hope[0];
    if full {
        c.within(&format!("{label} LOO Model 1 Edge ACC"), row.edge_acc.unwrap(), r.edge_acc, 0.015);
        c.within(&format!("{label} LOO Model 1 Null ACC"), row.null_acc.unwrap(), r.null_acc, 0.01);
    }
    c.within(&format!("{label} LOO Model 1 Overall ACC"), row.overall_acc.unwrap(), r.overall_acc, 0.01);
    if full {
        c.within(&format!("{label} LOO Model 1 TSL"), row.tsl, r.tsl, 3.0);
    }
}

fn acceptance_draws() -> usize {
    std::env::var("HOPE_ACCEPTANCE_DRAWS")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(100)
}

fn ranking_checks(c: &mut Criterion, ds: &Dataset, g: &Graph) {
    let draws = acceptance_draws();
    let models: Vec<NamedModel> = (1..=5)
        .map(|k| NamedModel {
            name: format!("Model {k}"),
            spec: ds.model(k).unwrap(),
        })
        .collect();
    let cfg = HopeConfig {
        draws,
        seed: 1,
        structural_metrics: false,
        full_fit: false,
        ..HopeConfig::default()
    };
    let round = |x: f64| (x * 1000.0).round();
    let mut wins = 0;
    for strategy in [
        Strategy::LeaveOneOut,
        Strategy::LeaveMOut { folds: Some(ds.lmo_folds) },
        Strategy::NodeHeldOut,
    ] {
        let plan = build_partition(g.n(), &strategy, 1, None).unwrap();
        let report = match run_hope(g, &models, &plan, &cfg) {
            Ok(r) => r,
            Err(e) => {
                c.check(&format!("{} {} HOPE", ds.name, strategy.label()), false, e.to_string());
                continue;
            }
        };
        let acc: Vec<f64> = report.models.iter().map(|m| m.row.overall_acc.unwrap_or(0.0)).collect();
        let tsl: Vec<f64> = report.models.iter().map(|m| m.row.tsl).collect();
        let best_acc = acc.iter().cloned().fold(f64::MIN, f64::max);
        let best_tsl = tsl.iter().cloned().fold(f64::MAX, f64::min);
        let m4 = round(acc[3]) >= round(best_acc) && round(tsl[3]) <= round(best_tsl);
        wins += usize::from(m4);
        println!(
            "[criterion 4] info  {} {} B={draws}: overall {:?} tsl {:?}",
            ds.name,
            strategy.label(),
            acc.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>(),
            tsl.iter().map(|t| format!("{t:.2}")).collect::<Vec<_>>(),
        );
    }
    c.check(
        &format!("{} Model 4 best-or-tied in Overall ACC and TSL", ds.name),
        wins >= 2,
        format!("{wins} of 3 strategies (need 2)"),
    );
}

#[test]
fn criterion_4_hope_tables() {
    let mut c = Criterion::new(4);
    let lazega = datasets::lazega();
    let teenage = datasets::teenage();
    dyad_row_checks(&mut c, "lazega (n, edges)", lazega_like_loo(), &lazega, true);
    let teen = loo_report(&random_graph(50, 74, 12), 500);
    dyad_row_checks(&mut c, "teenage (n, edges)", &teen, &teenage, false);
    for (ds, full) in [(lazega, true), (teenage, false)] {
        match installed(&ds) {
            Some(g) => {
                let report = loo_report(&g, 500);
                dyad_row_checks(&mut c, ds.name, &report, &ds, full);
                ranking_checks(&mut c, &ds, &g);
            }
            None => c.skip(&format!("{} data and model ranking", ds.name), &not_installed(&ds)),
        }
    }
    c.finish();
}

fn tiny_model(g: &Graph) -> ergm_hope::Model {
    ModelSpec::parse("edges + gwesp(0.5)").unwrap().compile(g).unwrap()
}

fn random_bits(n: usize, rng: &mut Rng, p: f64) -> Graph {
    let mut g = Graph::new(n);
    for d in all_dyads(n) {
        g.set_edge(d, rng.random_bool(p));
    }
    g
}

#[test]
fn criterion_5_oracle_equivalence() {
    let mut c = Criterion::new(5);
    let graphs = 50;

    // (a) sampler against the exact conditional distribution
    let tv: Vec<(f64, usize, usize)> = (0..graphs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(500, &[i as u64]));
            let n = if i % 5 == 0 { 3 } else { 4 };
            let g = random_bits(n, &mut rng, 0.5);
            let mut dyads: Vec<Dyad> = all_dyads(n).collect();
            dyads.shuffle(&mut rng);
            let k = rng.random_range(1..=dyads.len());
            dyads.truncate(k);
            let pg = PartialGraph::new(&g, DyadSet::new(dyads).unwrap()).unwrap();
            let theta = [rng.random_range(-1.5..1.0), rng.random_range(-0.5..1.0)];
            let m = tiny_model(&g);
            let exact = conditional_pmf(&pg, &m, &theta).unwrap();
            let draws = 100_000;
            let cfg = SamplerConfig {
                seed: derive_seed(501, &[i as u64]),
                ..SamplerConfig::default()
            };
            let masks = sample_with(&pg, &theta, &m, draws, &cfg, |ch| ch.graph().dyad_mask()).unwrap();
            let mut freq: HashMap<u64, f64> = HashMap::new();
            for mask in masks {
                *freq.entry(mask).or_default() += 1.0 / draws as f64;
            }
            let mut keys: Vec<u64> = exact.keys().chain(freq.keys()).copied().collect();
            keys.sort_unstable();
            keys.dedup();
            let tv = 0.5
                * keys
                    .iter()
                    .map(|k| (exact.get(k).copied().unwrap_or(0.0) - freq.get(k).copied().unwrap_or(0.0)).abs())
                    .sum::<f64>();
            (tv, n, k)
        })
        .collect();
    let worst = tv.iter().map(|t| t.0).fold(0.0, f64::max);
    let ok = tv.iter().filter(|t| t.0 < 0.02).count();
    c.check(
        "(a) sampler TV distance at 1e5 draws",
        ok == graphs,
        format!("{ok}/{graphs} graphs below 0.02, worst {worst:.4}"),
    );

    // (b) and (c) on graphs whose exact MLE exists
    let mut cases = Vec::new();
    let mut rng = rng_from_seed(502);
    let mut tried = 0;
    while cases.len() < graphs && tried < 10_000 {
        tried += 1;
        let n = 4;
        let density = rng.random_range(0.3..0.8);
        let g = random_bits(n, &mut rng, density);
        let free = if tried % 2 == 0 {
            let d: Vec<Dyad> = all_dyads(n).collect();
            DyadSet::new(vec![d[rng.random_range(0..d.len())]]).unwrap()
        } else {
            DyadSet::empty()
        };
        let pg = PartialGraph::new(&g, free).unwrap();
        let m = tiny_model(&g);
        if let Ok(f) = ExactLikelihood::new(&pg, &m).unwrap().fit() {
            cases.push((pg, f.theta()));
        }
    }
    println!(
        "[criterion 5] info  {} of {tried} random 4-node graphs have an interior MLE",
        cases.len()
    );
    c.check("interior-MLE graphs found", cases.len() >= graphs, format!("{}", cases.len()));

    let results: Vec<(f64, f64)> = cases
        .par_iter()
        .enumerate()
        .map(|(i, (pg, exact_theta))| {
            let m = tiny_model(pg.base());
            let cfg = EstimatorConfig {
                mc_samples: 20_000,
                grad_tol: 0.01,
                max_iter: 100,
                compute_loglik: false,
                seed: derive_seed(503, &[i as u64]),
                path_samples: 4000,
                ..EstimatorConfig::default()
            };
            let theta_err = match mcmle(pg, &m, &cfg, None) {
                Ok(f) => f
                    .theta()
                    .iter()
                    .zip(exact_theta)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max),
                Err(_) => f64::INFINITY,
            };
            let exact_ll = ExactLikelihood::new(pg, &m).unwrap().loglik(exact_theta);
            let path = loglik_path_sampling(exact_theta, &m, pg, &cfg).unwrap();
            (theta_err, (path.loglik - exact_ll).abs())
        })
        .collect();
    let worst_theta = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let ok_theta = results.iter().filter(|r| r.0 < 0.05).count();
    c.check(
        "(b) MCMLE vs exact MLE",
        ok_theta == results.len(),
        format!("{ok_theta}/{} within 0.05, worst {worst_theta:.4}", results.len()),
    );
    let worst_ll = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let ok_ll = results.iter().filter(|r| r.1 < 0.05).count();
    c.check(
        "(c) path-sampled log-likelihood vs exact",
        ok_ll == results.len(),
        format!("{ok_ll}/{} within 0.05, worst {worst_ll:.4}", results.len()),
    );
    c.finish();
}

/// Betweenness by listing every geodesic explicitly.
fn geodesic_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let inf = usize::MAX / 4;
    let mut dist = vec![vec![inf; n]; n];
    for (a, row) in dist.iter_mut().enumerate() {
        row[a] = 0;
        for b in 0..n {
            if g.has_edge(a, b) {
                row[b] = 1;
            }
        }
    }
    for k in 0..n {
        for a in 0..n {
            for b in 0..n {
                if dist[a][k] + dist[k][b] < dist[a][b] {
                    dist[a][b] = dist[a][k] + dist[k][b];
                }
            }
        }
    }
    fn paths(g: &Graph, dist: &[Vec<usize>], cur: usize, t: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur == t {
            out.push(path.clone());
            return;
        }
        for v in 0..g.n() {
            if g.has_edge(cur, v) && dist[v][t] + 1 == dist[cur][t] {
                path.push(v);
                paths(g, dist, v, t, path, out);
                path.pop();
            }
        }
    }
    let mut b = vec![0.0; n];
    for s in 0..n {
        for t in s + 1..n {
            if dist[s][t] >= inf {
                continue;
            }
            let mut all = Vec::new();
            paths(g, &dist, s, t, &mut vec![s], &mut all);
            for p in &all {
                for &v in &p[1..p.len() - 1] {
                    b[v] += 1.0 / all.len() as f64;
                }
            }
        }
    }
    b
}

#[test]
fn criterion_6_property_suites() {
    let mut c = Criterion::new(6);
    let mut rng = rng_from_seed(600);

    let spec = ModelSpec::parse(
        "edges + gwesp(0.5) + gwdegree(0.8) + nodematch(\"cat\") + nodematch(\"cat\", diff=T) \
         + nodematch(\"cat\", diff=T, keep=1) + nodecov(\"real\") + edgecov(\"w\")",
    )
    .unwrap();
    let mut worst = 0.0f64;
    let mut graphs = 0;
    for _ in 0..200 {
        let n = rng.random_range(3..=8);
        let density = rng.random_range(0.1..0.9);
        let mut g = random_bits(n, &mut rng, density);
        let cat: Vec<f64> = (0..n).map(|v| if v == 0 { 1.0 } else { rng.random_range(1..4) as f64 }).collect();
        let real: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut w = vec![0.0; n * n];
        for d in all_dyads(n) {
            let x = rng.random_range(-1.0..1.0);
            w[d.i() * n + d.j()] = x;
            w[d.j() * n + d.i()] = x;
        }
        g = g
            .with_node_attr("cat", cat)
            .unwrap()
            .with_node_attr("real", real)
            .unwrap()
            .with_dyad_covariate("w", w)
            .unwrap();
        let m = spec.compile(&g).unwrap();
        for d in all_dyads(n) {
            let mut on = g.clone();
            on.set_edge(d, true);
            let mut off = g.clone();
            off.set_edge(d, false);
            let (a, b) = (m.stats(&on), m.stats(&off));
            for (k, delta) in m.change_stats(&g, d).iter().enumerate() {
                worst = worst.max((delta - (a[k] - b[k])).abs());
            }
        }
        graphs += 1;
    }
    c.check(
        "change scores equal statistic differences, all term families",
        worst <= 1e-10,
        format!("{graphs} graphs, every dyad, worst {worst:.2e} (tolerance 1e-10)"),
    );

    let mut worst = 0.0f64;
    for _ in 0..300 {
        let n = rng.random_range(2..=7);
        let density = rng.random_range(0.1..0.9);
        let g = random_bits(n, &mut rng, density);
        let (a, b) = (betweenness_centrality(&g), geodesic_betweenness(&g));
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    c.check(
        "betweenness vs exhaustive geodesic listing",
        worst <= 1e-9,
        format!("300 graphs n <= 7, worst {worst:.2e}"),
    );

    let observed = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0];
    let perfect = reliability_rho(&observed, &vec![observed.clone(); 5]).unwrap();
    c.check(
        "rho = 1 for a perfect predictor",
        perfect.rho.is_some_and(|r| (r - 1.0).abs() < 1e-12),
        format!("{:?}", perfect.rho),
    );
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let flat = reliability_rho(&observed, &vec![vec![mean; observed.len()]; 5]).unwrap();
    c.check(
        "rho = 0 for the constant-mean predictor",
        flat.rho.is_some_and(|r| r.abs() < 1e-12),
        format!("{:?}", flat.rho),
    );

    let mut star_ok = true;
    let mut complete_ok = true;
    for n in 3..=12 {
        for kind in [CentralizationKind::Degree, CentralizationKind::Betweenness] {
            star_ok &= centralization(&Graph::star(n), kind).is_some_and(|x| (x - 1.0).abs() < 1e-12);
            complete_ok &= centralization(&Graph::complete(n), kind).is_some_and(|x| x.abs() < 1e-12);
        }
    }
    c.check("star centralization = 1 (degree, betweenness, n = 3..12)", star_ok, String::new());
    c.check("complete graph centralization = 0", complete_ok, String::new());

    let mut draws_checked = 0;
    let mut violations = 0;
    for i in 0..40 {
        let n = rng.random_range(4..=10);
        let g = random_bits(n, &mut rng, 0.3);
        let mut dyads: Vec<Dyad> = all_dyads(n).collect();
        dyads.shuffle(&mut rng);
        dyads.truncate(rng.random_range(1..=dyads.len()));
        let pg = PartialGraph::new(&g, DyadSet::new(dyads).unwrap()).unwrap();
        let m = ModelSpec::parse("edges + gwesp(0.5) + gwdegree(0.8)").unwrap().compile(&g).unwrap();
        let cfg = SamplerConfig {
            seed: i,
            proposal: if i % 2 == 0 { ergm_hope::Proposal::UniformDyad } else { ergm_hope::Proposal::TieNoTie },
            ..SamplerConfig::default()
        };
        for draw in sample_conditional(&pg, &[-1.0, 0.5, 0.3], &m, 50, &cfg).unwrap() {
            draws_checked += 1;
            violations += usize::from(!pg.agrees_with(&draw));
        }
    }
    c.check(
        "conditional draws keep every observed dyad",
        violations == 0,
        format!("{violations} violations in {draws_checked} draws"),
    );

    let g = random_graph(12, 20, 601);
    let models = vec![
        NamedModel {
            name: "edges".into(),
            spec: edges_model(),
        },
        NamedModel {
            name: "gwesp".into(),
            spec: ModelSpec::parse("edges + gwesp(0.5)").unwrap(),
        },
    ];
    let plan = build_partition(12, &Strategy::LeaveMOut { folds: Some(6) }, 3, None).unwrap();
    let run = |workers| {
        let cfg = HopeConfig {
            draws: 40,
            seed: 5,
            workers: Some(workers),
            estimator: EstimatorConfig {
                mc_samples: 256,
                compute_loglik: false,
                ..EstimatorConfig::default()
            },
            full_fit: false,
            ..HopeConfig::default()
        };
        serde_json::to_string(&run_hope(&g, &models, &plan, &cfg).unwrap().without_timing()).unwrap()
    };
    let one = run(1);
    let same = [2, 4].iter().all(|&w| run(w) == one);
    c.check("HOPE report identical for 1, 2 and 4 workers", same, String::new());
    c.finish();
}

#[test]
fn criterion_7_closed_form_cross_checks() {
    let mut c = Criterion::new(7);
    let mut rng = rng_from_seed(700);

    let mut worst = 0.0f64;
    for i in 0..20 {
        let n = rng.random_range(6..=20);
        let g = random_bits(n, &mut rng, 0.3)
            .with_node_attr("a", (0..n).map(|v| (v % 3) as f64).collect())
            .unwrap()
            .with_node_attr("x", (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let spec = ["edges", "edges + nodecov(\"x\")", "edges + nodematch(\"a\", diff=T) + nodecov(\"x\")"][i % 3];
        let m = ModelSpec::parse(spec).unwrap().compile(&g).unwrap();
        let pg = if i % 2 == 0 {
            PartialGraph::fully_observed(&g)
        } else {
            let d: Vec<Dyad> = all_dyads(n).take(3).collect();
            PartialGraph::new(&g, DyadSet::new(d).unwrap()).unwrap()
        };
        let Ok(f) = fit(&pg, &m, &EstimatorConfig::default(), None) else {
            continue;
        };
        let p = f.dim() as f64;
        let nobs = pg.num_observed() as f64;
        worst = worst.max((f.bic.unwrap() - f.aic.unwrap() - p * (nobs.ln() - 2.0)).abs());
    }
    c.check("BIC - AIC = p (ln N - 2)", worst < 1e-9, format!("worst deviation {worst:.2e}"));

    let report = lazega_like_loo();
    let acc = report.models[0].row.overall_acc.unwrap();
    let p: f64 = 115.0 / 630.0;
    let analytic = p * p + (1.0 - p) * (1.0 - p);
    let se = (analytic * (1.0 - analytic) / (630.0 * 500.0)).sqrt();
    c.within("lazega (n, edges) Model 1 Overall ACC vs p^2 + (1-p)^2", acc, 0.7015, 3.0 * se + 5e-5);
    println!("[criterion 7] info  analytic p^2 + (1-p)^2 = {analytic:.5}");

    let n = 9;
    let g = random_graph(n, 14, 701)
        .with_node_attr("a", (0..n).map(|v| (v % 2) as f64).collect())
        .unwrap()
        .with_node_attr("x", (0..n).map(|v| v as f64 / n as f64).collect())
        .unwrap();
    let models = vec![NamedModel {
        name: "independent".into(),
        spec: ModelSpec::parse("edges + nodematch(\"a\") + nodecov(\"x\")").unwrap(),
    }];
    let plan = build_partition(n, &Strategy::LeaveOneOut, 7, None).unwrap();
    let draws = 4000;
    let cfg = |exact| HopeConfig {
        draws,
        seed: 7,
        exact_loo_marginals: exact,
        structural_metrics: false,
        full_fit: false,
        ..HopeConfig::default()
    };
    let simulated = run_hope(&g, &models, &plan, &cfg(false)).unwrap();
    let exact = run_hope(&g, &models, &plan, &cfg(true)).unwrap();
    let mut outside = 0;
    let mut compared = 0;
    let mut worst_z = 0.0f64;
    for (fs, fe) in simulated.models[0].folds.iter().zip(&exact.models[0].folds) {
        for (ps, pe) in fs.predictions.iter().zip(&fe.predictions) {
            let q = pe.yhat;
            let z = (ps.yhat - q).abs() / (q * (1.0 - q) / draws as f64).sqrt();
            worst_z = worst_z.max(z);
            outside += usize::from(z > 3.0);
            compared += 1;
        }
    }
    c.check(
        "leave-1-out simulated marginal vs exact change-score marginal",
        outside == 0 && compared == plan.folds.len(),
        format!("{compared} dyads, {outside} beyond 3 binomial SE, largest {worst_z:.2} SE"),
    );
    c.finish();
}
