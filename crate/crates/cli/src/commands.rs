use std::fmt::Write as _;
use std::io::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ergm_hope::datasets::{self, RowCheck};
use ergm_hope::harness::{
    build_partition, run_hope, write_metric_csv, write_plot_csv, HopeConfig, HopeReport, NamedModel,
    SCHEMA_VERSION,
};
use ergm_hope::io::{read_edgelist, write_edgelist_to, IndexBase, LoadOptions};
use ergm_hope::sampler::sample_with;
use ergm_hope::{descriptives, Dyad, DyadSet, FitResult, Method, PartialGraph};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;

const DEFAULT_SIM_DRAWS: usize = 100;
const DEFAULT_HOPE_DRAWS: usize = 500;

fn out_dir(cfg: &RunConfig) -> Result<Option<PathBuf>, CliError> {
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_run_config(dir: &Path, cfg: &RunConfig) -> Result<(), CliError> {
    write_json(&dir.join("run_config.json"), cfg)
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    match x {
        Some(v) => format!("{v:.digits$}"),
        None => "NA".into(),
    }
}

pub fn coefficient_table(name: &str, fit: &FitResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Model: {name}");
    let method = match fit.method {
        Method::Mple => "MPLE",
        Method::Mcmle => "MCMLE",
        Method::Exact => "exact MLE",
    };
    let _ = writeln!(s, "Method: {method}   observed dyads: {}", fit.n_observed_dyads);
    let width = fit.coefficients.iter().map(|c| c.name.len()).max().unwrap_or(4).max(4);
    let _ = writeln!(s, "{:<width$}  {:>10}  {:>10}  {:>8}", "term", "estimate", "std.err", "z");
    for c in &fit.coefficients {
        let z = c.std_err.filter(|se| *se > 0.0).map(|se| c.estimate / se);
        let _ = writeln!(
            s,
            "{:<width$}  {:>10.4}  {:>10}  {:>8}",
            c.name,
            c.estimate,
            fmt_opt(c.std_err, 4),
            fmt_opt(z, 2)
        );
    }
    let _ = writeln!(s, "log-likelihood: {}", fmt_opt(fit.loglik, 2));
    let _ = writeln!(s, "AIC: {}   BIC: {}", fmt_opt(fit.aic, 2), fmt_opt(fit.bic, 2));
    match (&fit.diagnostics.loglik_method, fit.diagnostics.loglik_mc_se) {
        (Some(m), Some(se)) => {
            let _ = writeln!(s, "log-likelihood by {m}, MC SE {se:.3}");
        }
        (Some(m), None) => {
            let _ = writeln!(s, "log-likelihood by {m}");
        }
        _ => {}
    }
    for w in &fit.diagnostics.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

pub fn fit(cfg: &RunConfig) -> Result<(), CliError> {
    let specs = cfg.model_specs()?;
    if specs.len() != 1 {
        return Err(CliError::Usage(format!("fit takes one --model, got {}", specs.len())));
    }
    let (name, spec) = &specs[0];
    let g = cfg.load_graph()?;
    let model = spec.compile(&g)?;
    let mut est = cfg.estimator.clone();
    est.method = cfg.method.or(est.method);
    est.seed = cfg.seed;
    let result = ergm_hope::fit(&PartialGraph::fully_observed(&g), &model, &est, None)?;
    let table = coefficient_table(name, &result);
    print!("{table}");
    if let Some(dir) = out_dir(cfg)? {
        write_json(
            &dir.join("fit.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "seed": cfg.seed,
                "config": cfg,
                "name": name,
                "fit": result,
            }),
        )?;
        fs::write(dir.join("fit.txt"), table)?;
        write_run_config(&dir, cfg)?;
    }
    Ok(())
}

fn read_fit(path: &Path) -> Result<FitResult, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read fit {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad fit file {}: {e}", path.display())))?;
    let value = value.get("fit").cloned().unwrap_or(value);
    serde_json::from_value(value).map_err(|e| CliError::Usage(format!("bad fit file {}: {e}", path.display())))
}

fn free_dyads(cfg: &RunConfig, n: usize) -> Result<DyadSet, CliError> {
    match cfg.free.as_deref() {
        None | Some("all") => Ok(DyadSet::all(n)),
        Some("none") => Err(CliError::Usage(
            "the free dyad set is empty; nothing to simulate".into(),
        )),
        Some(path) => {
            let opts = LoadOptions {
                n: Some(n),
                index_base: cfg.index_base.and_then(IndexBase::from_offset),
            };
            let listed = read_edgelist(Path::new(path), opts)?;
            let dyads = listed
                .edge_list()
                .into_iter()
                .map(|(i, j)| Dyad::new(i, j))
                .collect::<Result<Vec<_>, _>>()?;
            if dyads.is_empty() {
                return Err(CliError::Usage(format!("free dyad file {path} lists no dyads")));
            }
            Ok(DyadSet::new(dyads)?)
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let specs = cfg.model_specs()?;
    if specs.len() != 1 {
        return Err(CliError::Usage(format!("simulate takes one --model, got {}", specs.len())));
    }
    let g = cfg.load_graph()?;
    let model = specs[0].1.compile(&g)?;
    let theta = match (&cfg.theta, &cfg.fit) {
        (Some(t), _) => t.clone(),
        (None, Some(p)) => read_fit(p)?.theta(),
        (None, None) => return Err(CliError::Usage("simulate needs --theta or --fit".into())),
    };
    if theta.len() != model.dim() {
        return Err(CliError::Usage(format!(
            "model has {} coefficients ({}), got {}",
            model.dim(),
            model.coef_names().join(", "),
            theta.len()
        )));
    }
    let free = free_dyads(cfg, g.n())?;
    let pg = PartialGraph::new(&g, free)?;
    let draws = cfg.draws.unwrap_or(DEFAULT_SIM_DRAWS);
    let mut sampler = cfg.sampler.clone();
    sampler.seed = cfg.seed;
    let sims = sample_with(&pg, &theta, &model, draws, &sampler, |c| (c.graph().clone(), c.stats().to_vec()))?;

    let p = model.dim();
    let mut mean = vec![0.0; p];
    for (_, s) in &sims {
        for k in 0..p {
            mean[k] += s[k] / draws as f64;
        }
    }
    let mut sd = vec![0.0; p];
    for (_, s) in &sims {
        for k in 0..p {
            sd[k] += (s[k] - mean[k]).powi(2) / (draws.max(2) - 1) as f64;
        }
    }
    let sd: Vec<f64> = sd.into_iter().map(f64::sqrt).collect();
    let observed = model.stats(&g);
    println!("{:<24}  {:>12}  {:>12}  {:>12}", "statistic", "observed", "mean", "sd");
    for k in 0..p {
        println!(
            "{:<24}  {:>12.4}  {:>12.4}  {:>12.4}",
            model.coef_names()[k],
            observed[k],
            mean[k],
            sd[k]
        );
    }

    if let Some(dir) = out_dir(cfg)? {
        let draws_dir = dir.join("draws");
        fs::create_dir_all(&draws_dir)?;
        let base = cfg.index_base.and_then(IndexBase::from_offset).unwrap_or_default();
        let config_line = serde_json::to_string(cfg)?;
        for (b, (graph, _)) in sims.iter().enumerate() {
            let mut buf = Vec::new();
            buf.extend_from_slice(format!("# draw: {}\n# seed: {}\n# config: {config_line}\n", b + 1, cfg.seed).as_bytes());
            write_edgelist_to(graph, &mut buf, base)?;
            fs::write(draws_dir.join(format!("draw_{:05}.txt", b + 1)), buf)?;
        }
        let mut w = csv::Writer::from_path(dir.join("stats.csv"))?;
        let mut header = vec!["draw".to_string()];
        header.extend(model.coef_names().iter().cloned());
        w.write_record(&header)?;
        for (b, (_, s)) in sims.iter().enumerate() {
            let mut rec = vec![(b + 1).to_string()];
            rec.extend(s.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        write_json(
            &dir.join("simulate.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "seed": cfg.seed,
                "config": cfg,
                "coef_names": model.coef_names(),
                "theta": theta,
                "free_dyads": pg.free().len(),
                "draws": draws,
                "observed": observed,
                "mean": mean,
                "sd": sd,
            }),
        )?;
        write_run_config(&dir, cfg)?;
    }
    Ok(())
}

fn verify_rows(cfg: &RunConfig) -> Result<(String, Vec<RowCheck>), CliError> {
    let ds = cfg.registered().ok_or_else(|| {
        CliError::Usage(format!(
            "no reference values for `{}`; expected lazega or teenage",
            cfg.dataset.as_deref().unwrap_or("")
        ))
    })?;
    let g = cfg.load_graph()?;
    Ok((ds.name.to_string(), datasets::verify(&ds.table1, &descriptives(&g))))
}

fn check_table(name: &str, checks: &[RowCheck]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Dataset: {name}");
    let _ = writeln!(s, "{:<20}  {:>10}  {:>10}  {:>10}  result", "row", "expected", "actual", "delta");
    for c in checks {
        let delta = c.actual.map(|a| a - c.expected);
        let _ = writeln!(
            s,
            "{:<20}  {:>10.4}  {:>10}  {:>10}  {}",
            c.row,
            c.expected,
            fmt_opt(c.actual, 4),
            fmt_opt(delta, 4),
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    s
}

pub fn verify_dataset(cfg: &RunConfig) -> Result<(), CliError> {
    let (name, checks) = verify_rows(cfg)?;
    print!("{}", check_table(&name, &checks));
    if let Some(dir) = out_dir(cfg)? {
        write_json(
            &dir.join("verify.json"),
            &json!({ "schema_version": SCHEMA_VERSION, "config": cfg, "dataset": name, "checks": checks }),
        )?;
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.row).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{name} differs from its reference on: {}", failed.join(", "))))
    }
}

fn strategies(cfg: &RunConfig) -> Vec<String> {
    if cfg.strategies.is_empty() {
        vec!["loo".into(), "lmo".into(), "node".into()]
    } else {
        cfg.strategies.clone()
    }
}

pub fn partition(cfg: &RunConfig) -> Result<(), CliError> {
    let n = match (cfg.nodes, cfg.registered()) {
        (Some(n), _) => n,
        (None, Some(ds)) => ds.table1.size,
        (None, None) => cfg.load_graph()?.n(),
    };
    let plans = strategies(cfg)
        .iter()
        .map(|s| Ok(build_partition(n, &cfg.strategy(s)?, cfg.seed, cfg.subset)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    let doc = json!({ "schema_version": SCHEMA_VERSION, "seed": cfg.seed, "config": cfg, "plans": plans });
    match out_dir(cfg)? {
        Some(dir) => {
            write_json(&dir.join("partition.json"), &doc)?;
            for p in &plans {
                println!("{}: {} folds over {} nodes", p.strategy.label(), p.folds.len(), n);
            }
        }
        None => {
            let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&doc)?);
        }
    }
    Ok(())
}

fn summary_table(reports: &[HopeReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<12}  {:<10}  {:>8}  {:>8}  {:>8}  {:>9}  {:>9}  {:>6}",
        "strategy", "model", "edge", "null", "overall", "tsl", "rho_deg", "failed"
    );
    for r in reports {
        for m in &r.models {
            let _ = writeln!(
                s,
                "{:<12}  {:<10}  {:>8}  {:>8}  {:>8}  {:>9.3}  {:>9}  {:>6}",
                r.strategy,
                m.name,
                fmt_opt(m.row.edge_acc, 3),
                fmt_opt(m.row.null_acc, 3),
                fmt_opt(m.row.overall_acc, 3),
                m.row.tsl,
                fmt_opt(m.row.rho_degree, 3),
                m.failed_folds
            );
        }
    }
    s
}

pub fn hope(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.check_fixtures {
        let (name, checks) = verify_rows(cfg)?;
        if checks.iter().any(|c| !c.pass) {
            eprint!("{}", check_table(&name, &checks));
            return Err(CliError::Data(format!("{name} does not match its reference descriptives")));
        }
    }
    let specs = cfg.model_specs()?;
    let g = cfg.load_graph()?;
    let models: Vec<NamedModel> = specs
        .into_iter()
        .map(|(name, spec)| NamedModel { name, spec })
        .collect();
    let mut estimator = cfg.estimator.clone();
    estimator.method = cfg.method.or(estimator.method);
    let hc = HopeConfig {
        draws: cfg.draws.unwrap_or(DEFAULT_HOPE_DRAWS),
        seed: cfg.seed,
        workers: cfg.workers,
        estimator,
        sampler: cfg.sampler.clone(),
        warm_start: cfg.warm_start,
        exact_loo_marginals: cfg.exact_loo_marginals,
        structural_metrics: cfg.structural_metrics,
        full_fit: true,
    };
    let mut reports = Vec::new();
    for s in strategies(cfg) {
        let plan = build_partition(g.n(), &cfg.strategy(&s)?, cfg.seed, cfg.subset)?;
        let report = run_hope(&g, &models, &plan, &hc)?;
        for m in &report.models {
            if m.failed_folds > 0 {
                eprintln!(
                    "warning: {} / {}: {} of {} folds failed and were excluded",
                    report.strategy,
                    m.name,
                    m.failed_folds,
                    plan.folds.len()
                );
            }
            if let Some(e) = &m.full_fit_error {
                eprintln!("warning: full-data fit of {} failed: {e}", m.name);
            }
        }
        reports.push(report);
    }
    print!("{}", summary_table(&reports));
    if let Some(dir) = out_dir(cfg)? {
        write_metric_csv(&reports, fs::File::create(dir.join("metrics.csv"))?)?;
        write_plot_csv(&reports, fs::File::create(dir.join("plot.csv"))?)?;
        write_json(
            &dir.join("report.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "seed": cfg.seed,
                "config": cfg,
                "reports": reports,
            }),
        )?;
        write_run_config(&dir, cfg)?;
    }
    Ok(())
}
