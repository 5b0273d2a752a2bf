use std::path::{Path, PathBuf};

use maxplus_core::maxplus::{build_pwl_block, detect_collisions, select_filters, PwlSpec};
use maxplus_core::pruning::{equivalence_check, prune_block, prune_cnn_head, EvalSet, SweepRow};
use maxplus_core::train::{evaluate, init_model, train_model};
use maxplus_core::{gradcheck, Dataset, MaxPlusBlock, Model, SeededRng, Tensor};

use super::config::config_entries;
use super::data::{DataArgs, Splits};
use super::manifest::{ensure_dir, RunManifest};
use super::{CliError, Command, PwlKind};
use crate::io::{export_csv, export_pgm, load_model, save_model, square_image, wm_column_image, Cell, Table};
use crate::study::parallel_seed_study;

pub(super) fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Train { train, data, init_trunk, out } => cmd_train(&train, &data, init_trunk.as_deref(), &out),
        Command::Eval { model, split, data } => {
            let file = load_model(&model)?;
            let splits = data.load()?;
            let set = splits.get(split);
            let acc = evaluate(&file.model, set)?;
            println!("accuracy {acc:.4} ({split:?} split, {} samples, {})", set.len(), file.model.arch());
            Ok(())
        }
        Command::Prune { model, threshold, out, no_eval, data } => cmd_prune(&model, threshold, &out, no_eval, &data),
        Command::Sweep { model, grid, baseline, out, data } => cmd_sweep(&model, &grid, &baseline, &out, &data),
        Command::SeedStudy { seeds, ratios, threads, train, data, out } => {
            cmd_seed_study(&seeds, &ratios, threads, &train, &data, &out)
        }
        Command::Viz { model, out } => cmd_viz(&model, &out),
        Command::Approx { pwl, grid_steps, pieces, inputs, seed, out } => {
            cmd_approx(pwl, grid_steps, pieces, inputs, seed, out.as_deref())
        }
        Command::Gradcheck { seed, instances } => cmd_gradcheck(seed, instances),
    }
}

fn parse_list<T: std::str::FromStr>(flag: &str, text: &str) -> Result<Vec<T>, CliError> {
    let items: Result<Vec<T>, _> = text.split(',').map(|s| s.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(CliError::Usage(format!("--{flag}: expected a comma-separated list, got `{text}`"))),
    }
}

fn add_sources(manifest: &mut RunManifest, splits: &Splits) {
    for (k, p) in &splits.sources {
        manifest.add_path(&format!("data.{k}"), p);
    }
    manifest.add("data.train_samples", splits.train.len());
    manifest.add("data.val_samples", splits.val.len());
    manifest.add("data.test_samples", splits.test.len());
}

fn cmd_train(
    args: &super::TrainArgs,
    data: &DataArgs,
    init_trunk: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = args.resolve()?;
    let splits = data.load()?;
    ensure_dir(out)?;
    let mut model = init_model(&cfg, splits.train.dims())?;
    if let Some(p) = init_trunk {
        model.adopt_trunk(&load_model(p)?.model)?;
    }
    let mut manifest = RunManifest::start("train");
    manifest.add_all("config", &config_entries(&cfg));
    if let Some(p) = init_trunk {
        manifest.add_path("init_trunk", p);
    }
    add_sources(&mut manifest, &splits);
    let (model, log) = train_model(model, &cfg, &splits.train, &splits.val, &mut |r| {
        eprintln!(
            "epoch {:>3}  step {:>6}  lr {:.6}  loss {:.5}  val {:.4}",
            r.epoch, r.step, r.lr, r.train_loss, r.val_accuracy
        );
    })?;
    let model_path = out.join("model.mxpl");
    save_model(&model, &config_entries(&cfg), &model_path)?;
    let mut table = Table::new(&["epoch", "step", "lr", "train_loss", "val_accuracy"]);
    for r in log.records() {
        table.push(vec![r.epoch.into(), r.step.into(), r.lr.into(), r.train_loss.into(), r.val_accuracy.into()]);
    }
    let metrics_path = out.join("metrics.csv");
    export_csv(&table, &metrics_path)?;
    manifest.add_path("output.model", &model_path);
    manifest.add_path("output.metrics", &metrics_path);
    if let Some(last) = log.last() {
        manifest.add("final_val_accuracy", last.val_accuracy);
        println!("final validation accuracy {:.4}", last.val_accuracy);
    }
    manifest.write(out)
}

fn head_inputs(model: &Model, data: &Dataset) -> Result<Tensor, CliError> {
    Ok(model.head_inputs(data.images())?)
}

fn require_block(model: &Model) -> Result<&MaxPlusBlock, CliError> {
    model
        .maxplus_block()
        .ok_or_else(|| CliError::Usage(format!("model `{}` has no max-plus head", model.arch())))
}

fn cmd_prune(model_path: &Path, s: f64, out: &Path, no_eval: bool, data: &DataArgs) -> Result<(), CliError> {
    let file = load_model(model_path)?;
    let model = file.model;
    let block = require_block(&model)?;
    let (pruned, mut report, reduction) = match &model {
        Model::CnnMaxPlus { .. } => {
            let (p, stats) = prune_cnn_head(&model, s)?;
            (p, stats.report.clone(), Some(stats.reduction))
        }
        _ => {
            let (head, report) = prune_block(block, s)?;
            (Model::Pruned { trunk: None, head }, report, None)
        }
    };
    ensure_dir(out)?;
    let mut manifest = RunManifest::start("prune");
    manifest.add_path("model", model_path);
    manifest.add("threshold", s);
    manifest.add_all("source_config", &file.config);
    if !no_eval {
        let splits = data.load()?;
        add_sources(&mut manifest, &splits);
        report.val_accuracy_before = Some(evaluate(&model, &splits.val)?);
        report.val_accuracy_after = Some(evaluate(&pruned, &splits.val)?);
        report.test_accuracy_before = Some(evaluate(&model, &splits.test)?);
        report.test_accuracy_after = Some(evaluate(&pruned, &splits.test)?);
        let Model::Pruned { head, .. } = &pruned else { unreachable!() };
        let eq = equivalence_check(block, head, &head_inputs(&model, &splits.test)?)?;
        report.exact_agreement = Some(eq.exact_fraction());
        println!(
            "test samples {}: covered {}, bitwise identical {}, decisions agree {}, max |dz| {:.3e}",
            eq.samples, eq.covered, eq.exact, eq.decisions_agree, eq.max_abs_diff
        );
    }
    let partition: Vec<String> = report.partition.iter().map(usize::to_string).collect();
    let opt = |v: Option<f64>| v.map_or(Cell::Text(String::new()), Cell::Float);
    let mut table = Table::new(&[
        "threshold",
        "retained",
        "units",
        "group_total",
        "partition",
        "reduction",
        "val_before",
        "val_after",
        "test_before",
        "test_after",
        "exact_agreement",
    ]);
    let group_total: usize = report.partition.iter().sum();
    table.push(vec![
        s.into(),
        report.retained.into(),
        report.units.into(),
        group_total.into(),
        partition.join(" ").into(),
        opt(reduction.or(Some(1.0 - report.retained as f64 / report.units as f64))),
        opt(report.val_accuracy_before),
        opt(report.val_accuracy_after),
        opt(report.test_accuracy_before),
        opt(report.test_accuracy_after),
        opt(report.exact_agreement),
    ]);
    let report_path = out.join("prune_report.csv");
    export_csv(&table, &report_path)?;
    let pruned_path = out.join("pruned.mxpl");
    save_model(&pruned, &file.config, &pruned_path)?;
    println!(
        "threshold {s}: {} of {} filters retained, partition [{}]",
        report.retained,
        report.units,
        partition.join(", ")
    );
    if let (Some(b), Some(a)) = (report.test_accuracy_before, report.test_accuracy_after) {
        println!("test accuracy {b:.4} -> {a:.4}");
    }
    manifest.add_path("output.report", &report_path);
    manifest.add_path("output.model", &pruned_path);
    manifest.write(out)
}

fn cmd_sweep(model_path: &Path, grid: &str, baselines: &[String], out: &Path, data: &DataArgs) -> Result<(), CliError> {
    let grid: Vec<f64> = parse_list("grid", grid)?;
    let model = load_model(model_path)?.model;
    let block = require_block(&model)?;
    let splits = data.load()?;
    let (xv, xt) = (head_inputs(&model, &splits.val)?, head_inputs(&model, &splits.test)?);
    let sets = [
        EvalSet { name: "val", inputs: &xv, labels: splits.val.labels() },
        EvalSet { name: "test", inputs: &xt, labels: splits.test.labels() },
    ];
    let mut table = maxplus_core::pruning::sweep(block, &sets, &grid)?;
    let mut manifest = RunManifest::start("sweep");
    manifest.add_path("model", model_path);
    manifest.add("grid", grid.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    for spec in baselines {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--baseline expects NAME=MODEL_FILE, got `{spec}`")))?;
        let m = load_model(Path::new(path))?.model;
        table.add_baseline(name, vec![evaluate(&m, &splits.val)?, evaluate(&m, &splits.test)?])?;
        manifest.add(&format!("baseline.{name}"), path);
    }
    add_sources(&mut manifest, &splits);
    let mut csv = Table::new(&["model", "threshold", "retained", "group_total", "partition", "val_accuracy", "test_accuracy"]);
    let row = |name: &str, r: &SweepRow, threshold: Cell| {
        let partition: Vec<String> = r.partition.iter().map(usize::to_string).collect();
        vec![
            name.into(),
            threshold,
            r.retained.into(),
            r.group_total.into(),
            partition.join(" ").into(),
            r.accuracy[0].into(),
            r.accuracy[1].into(),
        ]
    };
    for r in &table.rows {
        csv.push(row("pruned", r, r.threshold.into()));
    }
    csv.push(row("unpruned", &table.unpruned, Cell::Text(String::new())));
    for b in &table.baselines {
        let blank = || Cell::Text(String::new());
        csv.push(vec![b.name.clone().into(), blank(), blank(), blank(), blank(), b.accuracy[0].into(), b.accuracy[1].into()]);
    }
    ensure_dir(out)?;
    let path = out.join("sweep.csv");
    export_csv(&csv, &path)?;
    for r in &table.rows {
        println!(
            "s {:<5} J_r {:>4}  val {:.4}  test {:.4}",
            r.threshold, r.retained, r.accuracy[0], r.accuracy[1]
        );
    }
    println!(
        "unpruned J {:>4}  val {:.4}  test {:.4}",
        table.unpruned.retained, table.unpruned.accuracy[0], table.unpruned.accuracy[1]
    );
    manifest.add_path("output.sweep", &path);
    manifest.write(out)
}

fn cmd_seed_study(
    seeds: &str,
    ratios: &str,
    threads: Option<usize>,
    train: &super::TrainArgs,
    data: &DataArgs,
    out: &Path,
) -> Result<(), CliError> {
    let seeds: Vec<u64> = parse_list("seeds", seeds)?;
    let ratios: Vec<f64> = parse_list("ratios", ratios)?;
    if let Some(r) = ratios.iter().find(|r| !(0.0..1.0).contains(*r)) {
        return Err(CliError::Usage(format!("--ratios: {r} is outside [0, 1)")));
    }
    let base = train.resolve()?;
    let splits = data.load()?;
    let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let study = parallel_seed_study(&base, &seeds, &ratios, &splits.train, &splits.val, threads, &|s, r, a| {
        eprintln!("seed {s} dropout {r}: val {a:.4}");
    })?;
    ensure_dir(out)?;
    let mut cells = Table::new(&["dropout", "seed", "val_accuracy"]);
    for (r, row) in study.ratios.iter().zip(&study.accuracy) {
        for (s, a) in study.seeds.iter().zip(row) {
            cells.push(vec![(*r).into(), (*s).into(), (*a).into()]);
        }
    }
    let mut summary = Table::new(&["dropout", "runs", "mean", "min", "max", "std"]);
    for s in &study.summary {
        summary.push(vec![s.ratio.into(), study.seeds.len().into(), s.mean.into(), s.min.into(), s.max.into(), s.std.into()]);
        println!(
            "dropout {:<4}  mean {:.4}  min {:.4}  max {:.4}  std {:.4}",
            s.ratio, s.mean, s.min, s.max, s.std
        );
    }
    let (cells_path, summary_path) = (out.join("seed_study.csv"), out.join("seed_study_summary.csv"));
    export_csv(&cells, &cells_path)?;
    export_csv(&summary, &summary_path)?;
    let mut manifest = RunManifest::start("seed-study");
    manifest.add_all("config", &config_entries(&base));
    manifest.add("seeds", seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    manifest.add("ratios", ratios.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    manifest.add("threads", threads);
    add_sources(&mut manifest, &splits);
    manifest.add_path("output.cells", &cells_path);
    manifest.add_path("output.summary", &summary_path);
    manifest.write(out)
}

/// A filter as an image: `28 x 28` for MNIST-sized inputs, otherwise the
/// smallest square.
fn filter_image(column: &[f64]) -> Result<(Tensor, bool), CliError> {
    let min = column.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(square_image(column, min)?)
}

fn cmd_viz(model_path: &Path, out: &Path) -> Result<(), CliError> {
    let model = load_model(model_path)?.model;
    let block = require_block(&model)?;
    ensure_dir(out)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let mut save = |img: &Tensor, name: String| -> Result<(), CliError> {
        let p = out.join(name);
        export_pgm(img, &p)?;
        written.push(p);
        Ok(())
    };
    save(block.wm(), "wm.pgm".into())?;
    let selection = select_filters(block)?;
    for k in 0..block.outputs() {
        let column = block.wm().column(k)?;
        let (img, padded) = wm_column_image(&column)?;
        let side = img.shape()[0];
        let name = if padded {
            format!("wm_class{k}_padded{side}x{side}.pgm")
        } else {
            format!("wm_class{k}.pgm")
        };
        save(&img, name)?;
        let j = selection.indices[k];
        save(&filter_image(&block.wf().column(j)?)?.0, format!("filter_class{k}_j{j}.pgm"))?;
        let low = column
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .unwrap_or(0);
        save(&filter_image(&block.wf().column(low)?)?.0, format!("lowfilter_class{k}_j{low}.pgm"))?;
    }
    let mut collisions = Table::new(&["filter", "classes"]);
    for c in detect_collisions(block)? {
        let classes: Vec<String> = c.classes.iter().map(usize::to_string).collect();
        collisions.push(vec![c.filter.into(), classes.join(" ").into()]);
        println!("collision: classes {} share filter {}", classes.join(", "), c.filter);
    }
    let collisions_path = out.join("collisions.csv");
    export_csv(&collisions, &collisions_path)?;
    let mut manifest = RunManifest::start("viz");
    manifest.add_path("model", model_path);
    manifest.add("images", written.len());
    manifest.add_path("output.collisions", &collisions_path);
    println!("wrote {} images to {}", written.len(), out.display());
    manifest.write(out)
}

fn cmd_approx(
    kind: PwlKind,
    steps: usize,
    pieces: usize,
    inputs: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if steps < 2 {
        return Err(CliError::Usage("--grid-steps must be at least 2".into()));
    }
    let mut rng = SeededRng::new(seed);
    let spec = match kind {
        PwlKind::Abs => PwlSpec::abs(),
        PwlKind::Relu => PwlSpec::relu(),
        PwlKind::Random => {
            if pieces == 0 || inputs == 0 {
                return Err(CliError::Usage("--pieces and --inputs must be positive".into()));
            }
            PwlSpec::random(&mut rng, pieces, inputs)?
        }
    };
    let block = build_pwl_block(&spec)?;
    let dim = spec.inputs();
    // one input: an even grid over [-2, 2]; more: uniform draws from the cube
    let points: Vec<Vec<f64>> = if dim == 1 {
        (0..steps).map(|i| vec![-2.0 + 4.0 * i as f64 / (steps - 1) as f64]).collect()
    } else {
        (0..steps)
            .map(|_| (0..dim).map(|_| rng.uniform(-2.0, 2.0)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?
    };
    let x = Tensor::new(vec![points.len(), dim], points.concat())?;
    let got = block.evaluate_batch(&x)?;
    let mut header: Vec<String> = (0..dim).map(|d| format!("x{d}")).collect();
    header.extend(["block", "direct", "abs_error"].map(String::from));
    let mut table = Table { header, rows: Vec::new() };
    let mut worst: f64 = 0.0;
    for (p, g) in points.iter().zip(&got) {
        let want = spec.eval(p)?;
        let err = (g - want).abs();
        worst = worst.max(err);
        let mut row: Vec<Cell> = p.iter().map(|&v| v.into()).collect();
        row.extend([(*g).into(), want.into(), err.into()]);
        table.push(row);
    }
    if let Some(path) = out {
        export_csv(&table, path)?;
    }
    println!(
        "{kind:?}: {} points, k = {}, I = {dim}, max |block - direct| = {worst:e}",
        points.len(),
        spec.pieces()
    );
    if worst > 1e-12 {
        return Err(CliError::Numeric(format!("approximation error {worst:e} exceeds 1e-12")));
    }
    Ok(())
}

fn cmd_gradcheck(seed: u64, instances: usize) -> Result<(), CliError> {
    let reports = gradcheck::run_all(seed, instances)?;
    let mut failed = 0;
    for r in &reports {
        let need = if r.name.starts_with("model") { r.instances.min(instances) } else { instances };
        let ok = r.passed(need);
        failed += usize::from(!ok);
        println!(
            "{} {:<26} instances {:>3}  skipped {:>4}  max rel err {:.3e}  (tol {:.0e})",
            if ok { "PASS" } else { "FAIL" },
            r.name,
            r.instances,
            r.skipped,
            r.max_rel_error,
            r.tolerance
        );
    }
    if failed > 0 {
        return Err(CliError::Numeric(format!("{failed} gradient suite(s) failed")));
    }
    Ok(())
}
