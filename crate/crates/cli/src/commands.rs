//! One function per subcommand. Each writes `config.echo.txt` into the
//! output directory before doing any real work.

use std::collections::BTreeMap;
use std::path::Path;

use geomix::adaptive::AttentionParams;
use geomix::augment::{run_mixup, MixVariant};
use geomix::gradcheck::{check_gcn, check_geomix3, worst_over_seeds, TensorCheck};
use geomix::graph::{Graph, MaskKind};
use geomix::io::dataset::format_matrix;
use geomix::io::export::{CONFIG_ECHO, METRICS, SUMMARY};
use geomix::io::{
    knn_graph, load_dataset, make_splits, parse_features, save_dataset, write_config_echo, write_metrics,
    write_summary, write_table,
};
use geomix::rng;
use geomix::theory::regularizer::{verify_theorem3, THEOREM3_TOLERANCE};
use geomix::theory::{erdos_renyi, verify_theorem1, verify_theorem2, SyntheticSpec, TheoremReport};
use geomix::trainer::{propagation_weights, pseudo_labels, train, ModelParams, TrainConfig};
use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::{CliError, Command};

pub const BOUNDS: &str = "bounds.csv";
pub const EXPECTATIONS: &str = "expectations.csv";
pub const DESCENT: &str = "descent.csv";
pub const GRADCHECK: &str = "gradcheck.csv";
pub const SOFT_LABELS: &str = "soft_labels.csv";

pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<(), CliError> {
    let out = cfg.out_dir()?;
    let mut echo = vec![("command".to_string(), command.name().to_string())];
    echo.extend(cfg.entries());
    write_config_echo(&out.join(CONFIG_ECHO), &echo)?;
    match command {
        Command::Train => cmd_train(cfg, &out),
        Command::Augment => cmd_augment(cfg, &out),
        Command::Verify => cmd_verify(cfg, &out),
        Command::Gradcheck => cmd_gradcheck(cfg, &out),
        Command::Knn => cmd_knn(cfg, &out),
    }
}

/// Dataset with masks: a named split from disk, or a fresh seeded split.
pub fn load_graph(cfg: &RunConfig) -> Result<Graph, CliError> {
    let dir = cfg.path("data.dir")?;
    let split_cfg = cfg.split_config()?;
    let split_seed: u64 = cfg.get("data.split_seed")?;
    let bundle = load_dataset(&dir, cfg.split_name())?;
    if cfg.split_name().is_some() {
        return Ok(bundle.graph);
    }
    let masks = make_splits(&bundle.graph, &split_cfg, split_seed)?;
    Ok(bundle.graph.with_masks(masks)?)
}

pub fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let base = cfg.train()?;
    let seeds: Vec<u64> = cfg.list("run.seeds")?;
    let graph = load_graph(cfg)?;
    let outcomes: Vec<_> = seeds
        .par_iter()
        .map(|&seed| train(&graph, &TrainConfig { seed, ..base }).map(|o| (seed, o)))
        .collect::<Result<_, _>>()?;
    let mut runs = Vec::with_capacity(outcomes.len());
    for (seed, o) in &outcomes {
        write_metrics(&out.join(format!("seed-{seed}")).join(METRICS), &o.history)?;
        println!("seed {seed}: best epoch {}, val {:.4}, test {:.4}", o.best_epoch, o.best_val_acc, o.test_acc);
        runs.push((*seed, o.test_acc));
    }
    write_summary(&out.join(SUMMARY), base.mix.variant.name(), &runs)?;
    let (mean, std) = geomix::io::mean_std(&runs.iter().map(|r| r.1).collect::<Vec<_>>());
    println!("{}: test accuracy {:.4} ± {:.4} over {} seeds", base.mix.variant, mean, std, runs.len());
    Ok(())
}

fn check_simplex(y: &Array2<f64>) -> Result<(), CliError> {
    for (v, row) in y.rows().into_iter().enumerate() {
        if row.iter().any(|&p| p < 0.0) || (row.sum() - 1.0).abs() > 1e-6 {
            return Err(geomix::Error::invalid(format!("pseudo-label row {v} is not a distribution")).into());
        }
    }
    Ok(())
}

pub fn cmd_augment(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let train_cfg = cfg.train()?;
    let mix = train_cfg.mix;
    let seed = cfg.list::<u64>("run.seeds")?[0];
    let graph = load_graph(cfg)?;
    let (n, c) = (graph.num_nodes(), graph.num_classes());
    let source = cfg.raw("augment.pseudo_labels").unwrap_or("zero");
    let pseudo = if source == "zero" {
        let zero = ModelParams::zeros(graph.feature_dim(), train_cfg.hidden, c);
        pseudo_labels(&zero, &graph, &propagation_weights(&graph))?
    } else {
        let text = std::fs::read_to_string(source).map_err(|e| geomix::Error::io(source, e))?;
        let mut y = parse_features(&text, source)?;
        if y.dim() != (n, c) {
            return Err(
                geomix::Error::dims("augment", format!("{n} × {c} pseudo-labels"), format!("{:?}", y.dim())).into()
            );
        }
        for (v, mut row) in y.rows_mut().into_iter().enumerate() {
            if graph.mask(MaskKind::Train)[v] {
                row.fill(0.0);
                row[graph.labels()[v]] = 1.0;
            }
        }
        check_simplex(&y)?;
        y
    };
    let attention = (mix.variant == MixVariant::GeoMixIII).then(|| {
        AttentionParams::init(
            graph.feature_dim(),
            train_cfg.projection_dim,
            mix.hops,
            &mut rng::substream(seed, rng::INIT),
        )
    });
    let state = run_mixup(&graph, &pseudo, &mix, attention.as_ref())?;
    let mixed = graph.clone().with_features(state.features)?;
    let mut params = BTreeMap::new();
    params.insert("mix.variant".to_string(), mix.variant.name().to_string());
    params.insert("mix.alpha".to_string(), mix.alpha.to_string());
    params.insert("mix.hops".to_string(), mix.hops.to_string());
    save_dataset(&mixed, out, &params, "augment")?;
    std::fs::write(out.join(SOFT_LABELS), format_matrix(&state.soft_labels))
        .map_err(|e| geomix::Error::io(out.join(SOFT_LABELS), e))?;
    println!("{}: {} hops of {} on {n} nodes written to {}", source, mix.hops, mix.variant, out.display());
    Ok(())
}

fn bound_rows(r: &TheoremReport, spec: &SyntheticSpec, rows: &mut Vec<Vec<String>>) {
    for b in &r.bounds {
        rows.push(vec![
            r.quantity.name().to_string(),
            spec.homophily.to_string(),
            spec.label_noise.to_string(),
            spec.num_classes.to_string(),
            b.degree.to_string(),
            spec.feature_dim().to_string(),
            format!("{:.6}", b.threshold),
            format!("{:.6}", b.empirical),
            format!("{:.6e}", b.bound),
            format!("{:.6}", b.slack),
            b.violated.to_string(),
        ]);
    }
}

fn expectation_row(r: &TheoremReport, spec: &SyntheticSpec) -> Vec<String> {
    vec![
        r.quantity.name().to_string(),
        spec.homophily.to_string(),
        spec.label_noise.to_string(),
        spec.num_classes.to_string(),
        spec.degree.to_string(),
        spec.feature_dim().to_string(),
        format!("{:.4}", r.mean.max_z),
        r.mean.passed().to_string(),
    ]
}

pub fn cmd_verify(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let trials: usize = cfg.get("verify.trials")?;
    let seed: u64 = cfg.get("verify.seed")?;
    let ps: Vec<f64> = cfg.list("verify.homophily")?;
    let eps: Vec<f64> = cfg.list("verify.label_noise")?;
    let cs: Vec<usize> = cfg.list("verify.classes")?;
    let ds: Vec<usize> = cfg.list("verify.degrees")?;
    let fs: Vec<usize> = cfg.list("verify.dims")?;
    let graphs: usize = cfg.get("verify.graphs")?;
    let alphas: Vec<f64> = cfg.list("verify.alphas")?;

    let mut bounds = Vec::new();
    let mut expectations = Vec::new();
    let (mut mean_failures, mut violations) = (0usize, 0usize);
    let mut index = 0u64;
    let mut record = |r: TheoremReport, spec: &SyntheticSpec, bounds: &mut Vec<Vec<String>>| {
        mean_failures += usize::from(!r.mean.passed());
        violations += r.violations();
        bound_rows(&r, spec, bounds);
        expectations.push(expectation_row(&r, spec));
    };
    for &p in &ps {
        for &c in &cs {
            for &d in &ds {
                for &f in &fs {
                    index += 1;
                    let spec = SyntheticSpec::with_random_means(c, f, p, 0.0, d, seed.wrapping_add(index));
                    record(verify_theorem1(&spec, trials)?, &spec, &mut bounds);
                }
                for &e in &eps {
                    index += 1;
                    let spec = SyntheticSpec::with_random_means(c, 1, p, e, d, seed.wrapping_add(index));
                    record(verify_theorem2(&spec, trials)?, &spec, &mut bounds);
                }
            }
        }
    }
    let header = ["quantity", "homophily", "label_noise", "classes", "degree", "dim"];
    let mut bh = header.to_vec();
    bh.extend(["threshold", "empirical", "bound", "slack", "violated"]);
    write_table(&out.join(BOUNDS), &bh, &bounds)?;
    let mut eh = header.to_vec();
    eh.extend(["max_z", "passed"]);
    write_table(&out.join(EXPECTATIONS), &eh, &expectations)?;

    let mut r = rng::substream(seed, rng::SYNTHETIC);
    let mut descent = Vec::new();
    let mut worst: f64 = 0.0;
    for gi in 0..graphs {
        let n = r.random_range(3..=100);
        let prob = r.random_range(0.02..0.3);
        let dim = r.random_range(1..=6);
        let g = erdos_renyi(&mut r, n, prob, dim, 3)?;
        for &alpha in &alphas {
            for v in [MixVariant::GeoMixI, MixVariant::GeoMixII] {
                let dev = verify_theorem3(&g, alpha, v)?.max_deviation();
                worst = worst.max(dev);
                descent.push(vec![
                    gi.to_string(),
                    n.to_string(),
                    alpha.to_string(),
                    v.name().to_string(),
                    format!("{dev:.3e}"),
                ]);
            }
        }
    }
    write_table(&out.join(DESCENT), &["graph", "nodes", "alpha", "variant", "max_deviation"], &descent)?;

    println!(
        "expectations: {} checks, {mean_failures} outside 4 standard errors; tail bounds: {} checks, {violations} violations",
        expectations.len(),
        bounds.len()
    );
    println!("descent steps: {} checks, max deviation {worst:.2e} (tolerance {THEOREM3_TOLERANCE:e})", descent.len());
    if mean_failures > 0 || violations > 0 || worst > THEOREM3_TOLERANCE {
        return Err(CliError::CheckFailed(format!(
            "{mean_failures} expectation failures, {violations} bound violations, max descent deviation {worst:.2e}"
        )));
    }
    Ok(())
}

pub fn cmd_gradcheck(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let reps: u64 = cfg.get("gradcheck.reps")?;
    let nodes: usize = cfg.get("gradcheck.nodes")?;
    let seed: u64 = cfg.get("gradcheck.seed")?;
    if reps == 0 || nodes < 2 {
        return Err(CliError::Config("gradcheck needs reps ≥ 1 and nodes ≥ 2".into()));
    }
    let mut checks: Vec<(&str, TensorCheck)> = Vec::new();
    for (model, f) in [("gcn", check_gcn as fn(u64, usize) -> _), ("geomix3", check_geomix3)] {
        checks.extend(worst_over_seeds(seed, reps, nodes, f)?.into_iter().map(|c| (model, c)));
    }
    let mut rows = Vec::new();
    println!("{:<8} {:<8} {:>8} {:>12} {:>12}  ok", "model", "tensor", "entries", "max rel", "max abs");
    for (model, c) in &checks {
        println!(
            "{model:<8} {:<8} {:>8} {:>12.3e} {:>12.3e}  {}",
            c.tensor,
            c.entries,
            c.max_rel_error,
            c.max_abs_error,
            if c.passed() { "yes" } else { "NO" }
        );
        rows.push(vec![
            model.to_string(),
            c.tensor.clone(),
            c.entries.to_string(),
            format!("{:.6e}", c.max_rel_error),
            format!("{:.6e}", c.max_abs_error),
            c.passed().to_string(),
        ]);
    }
    write_table(
        &out.join(GRADCHECK),
        &["model", "tensor", "entries", "max_rel_error", "max_abs_error", "passed"],
        &rows,
    )?;
    let failed: Vec<String> =
        checks.iter().filter(|(_, c)| !c.passed()).map(|(m, c)| format!("{m}/{}", c.tensor)).collect();
    if !failed.is_empty() {
        return Err(CliError::CheckFailed(format!("relative error above tolerance in {}", failed.join(", "))));
    }
    Ok(())
}

pub fn cmd_knn(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let k: usize = cfg.get("knn.k")?;
    let metric = cfg.metric()?;
    let dir = cfg.path("data.dir")?;
    let path = dir.join(geomix::io::dataset::FEATURES);
    let text = std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => geomix::Error::MissingFile(path.clone()),
        _ => geomix::Error::io(&path, e),
    })?;
    let x = parse_features(&text, geomix::io::dataset::FEATURES)?;
    let edges = knn_graph(&x, k, metric)?;
    let target = out.join(geomix::io::dataset::EDGES);
    let body: String = edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect();
    std::fs::create_dir_all(out).map_err(|e| geomix::Error::io(out, e))?;
    std::fs::write(&target, body).map_err(|e| geomix::Error::io(&target, e))?;
    println!("{} undirected edges ({} neighbors, {}) written to {}", edges.len(), k, metric.name(), target.display());
    Ok(())
}
