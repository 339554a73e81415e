use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use ponwatch::config::{KvConfig, KNOWN_KEYS};
use ponwatch::dataset::io::{decode_dataset, encode_dataset, peek_kind, write_csv, Codec};
use ponwatch::dataset::{
    build_generic_dataset, build_network_dataset, Dataset, GenericRecipe, NetworkRecipe, NetworkSample, SplitTag,
    WindowSample,
};
use ponwatch::models::{
    evaluate_branch, evaluate_model_a, evaluate_model_b, train, BranchClassifier, EpochStats, GenericModelA,
    GenericModelB, TrainConfig, TrainOutcome, Trainable, DEFAULT_GRU_WIDTHS, DEFAULT_LEVEL_EDGES,
    DEFAULT_POSITION_EDGES,
};
use ponwatch::monitor::{
    any_fault, build_reference, build_reference_blind, measure, monitor_with_model_a, monitor_with_model_b,
    render_monitor_region, write_reports_csv, write_reports_text, FaultReport, MonitorConfig, ReferenceMap,
    DEFAULT_REGION_LEN,
};
use ponwatch::otdr::{add_awgn, render_region_db, FaultScenario, OtdrTrace, PonTopology, SimConfig};
use ponwatch::rng::{derive_seed, stream_rng};
use ponwatch::Scalar;

use crate::stamp::{render, Stamp};
use crate::{Cli, Command, Common, DatasetKind, ModelKind, Precision};

pub fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let c = &cli.common;
    match &cli.command {
        Command::Simulate { pnr, full } => simulate(c, *pnr, *full),
        Command::GenDataset { kind, per_class, target, csv } => gen_dataset(c, *kind, *per_class, *target, *csv),
        Command::Train { model, dataset, precision } => train_cmd(c, *model, dataset, *precision),
        Command::Eval { model, checkpoint, dataset } => eval_cmd(c, *model, checkpoint, dataset),
        Command::Monitor { model, checkpoint, threshold, trace, pnr, blind_reference } => {
            monitor_cmd(c, *model, checkpoint, *threshold, trace.as_deref(), *pnr, blind_reference.as_deref())
        }
        Command::Report { metrics } => report(c, metrics),
    }
}

/// Config file plus flag overrides, checked against the known keys.
fn load_config(c: &Common) -> anyhow::Result<KvConfig> {
    let mut cfg = match &c.config {
        Some(p) => KvConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => KvConfig::new(),
    };
    for o in &c.overrides {
        cfg.set_override(o)?;
    }
    if let Some(v) = c.pnr_min {
        cfg.set("pnr_min", v);
    }
    if let Some(v) = c.pnr_max {
        cfg.set("pnr_max", v);
    }
    cfg.check_known(KNOWN_KEYS)?;
    Ok(cfg)
}

fn out_dir(c: &Common) -> anyhow::Result<&Path> {
    fs::create_dir_all(&c.out).with_context(|| format!("creating output dir {}", c.out.display()))?;
    Ok(&c.out)
}

fn network(cfg: &KvConfig) -> anyhow::Result<(PonTopology, SimConfig)> {
    Ok((PonTopology::from_config(cfg)?, SimConfig::from_config(cfg)?))
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn simulate(c: &Common, pnr: Option<f64>, full: bool) -> anyhow::Result<ExitCode> {
    let cfg = load_config(c)?;
    let stamp = Stamp::new(&cfg, c.seed);
    let (topo, sim) = network(&cfg)?;
    let scen = FaultScenario::from_config(&cfg)?;
    scen.validate(&topo)?;
    let mut trace = if full {
        render_region_db(&topo, &scen, &sim, 0, sim.trace_len)?
    } else {
        render_monitor_region(&topo, &scen, &sim, cfg.get_or("region_len", DEFAULT_REGION_LEN)?)?
    };
    if let Some(p) = pnr {
        if full {
            bail!("--pnr applies to the normalized monitor region, not to --full traces");
        }
        trace = add_awgn(&trace, p, derive_seed(c.seed, "simulate"))?;
    }
    let dir = out_dir(c)?;
    stamp.write(&dir.join("trace.csv"), &render(|b| trace.write_csv(b))?)?;
    let mut truth = String::from("branch_id,peak_index,peak_height\n");
    for p in &trace.ground_truth {
        truth.push_str(&format!("{},{},{:.9}\n", p.branch_id, trace.start_index + p.peak_index, p.peak_height));
    }
    stamp.write(&dir.join("ground_truth.csv"), truth.as_bytes())?;
    println!(
        "trace of {} samples from index {} with {} reflections -> {}",
        trace.len(),
        trace.start_index,
        trace.ground_truth.len(),
        dir.join("trace.csv").display()
    );
    for n in &trace.notes {
        println!("note: {n}");
    }
    Ok(ExitCode::SUCCESS)
}

fn write_dataset_files<R: Codec>(ds: &Dataset<R>, dir: &Path, name: &str, csv: bool, stamp: &Stamp) -> anyhow::Result<()> {
    let path = dir.join(format!("{name}.ponds"));
    fs::write(&path, encode_dataset(ds)?).with_context(|| format!("writing {}", path.display()))?;
    if csv {
        stamp.write(&dir.join(format!("{name}.csv")), &render(|b| write_csv(ds, b))?)?;
    }
    let counts: Vec<String> = ds.class_counts().iter().map(|n| n.to_string()).collect();
    println!(
        "{} records ({} rejected windows), per class [{}] -> {}",
        ds.len(),
        ds.rejected,
        counts.join(", "),
        path.display()
    );
    Ok(())
}

fn gen_dataset(
    c: &Common,
    kind: DatasetKind,
    per_class: Option<usize>,
    target: Option<usize>,
    csv: bool,
) -> anyhow::Result<ExitCode> {
    let mut cfg = load_config(c)?;
    if let Some(n) = per_class {
        cfg.set("per_class_count", n);
    }
    if let Some(n) = target {
        cfg.set("target_count", n);
    }
    let stamp = Stamp::new(&cfg, c.seed);
    let (topo, sim) = network(&cfg)?;
    let dir = out_dir(c)?;
    match kind {
        DatasetKind::Network => {
            if target.is_some() {
                bail!("--target applies to generic datasets; use --per-class");
            }
            let ds = build_network_dataset(&topo, &sim, &NetworkRecipe::from_config(&cfg, c.seed)?)?;
            write_dataset_files(&ds, dir, "network", csv, &stamp)?;
        }
        DatasetKind::Generic => {
            if per_class.is_some() {
                bail!("--per-class applies to network datasets; use --target");
            }
            let ds = build_generic_dataset(&topo, &sim, &GenericRecipe::from_config(&cfg, c.seed)?)?;
            write_dataset_files(&ds, dir, "generic", csv, &stamp)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn load_dataset<R: Codec>(path: &Path) -> anyhow::Result<Dataset<R>> {
    let bytes = read(path)?;
    let kind = peek_kind(&bytes)?;
    if kind != R::KIND {
        bail!("{} is not a {} dataset (kind {kind})", path.display(), R::KIND_NAME);
    }
    let ds: Dataset<R> = decode_dataset(&bytes)?;
    if !ds.is_split() {
        bail!("{} has no train/val/test split", path.display());
    }
    Ok(ds)
}

fn model_name(m: ModelKind) -> &'static str {
    match m {
        ModelKind::Branch => "branch",
        ModelKind::A => "model_a",
        ModelKind::B => "model_b",
    }
}

fn progress(e: &EpochStats) {
    eprintln!(
        "epoch {:>3}  train {:.5}  val {:.5}  val accuracy {:.4}",
        e.epoch, e.train_loss, e.val_loss, e.val_accuracy
    );
}

fn fit<T: Scalar, M: Trainable<T>>(model: M, train_set: &[&M::Sample], val: &[&M::Sample], cfg: &TrainConfig) -> anyhow::Result<TrainOutcome<M>> {
    Ok(train(model, train_set, val, cfg, progress)?)
}

fn train_typed<T: Scalar>(
    c: &Common,
    cfg: &KvConfig,
    model: ModelKind,
    dataset: &Path,
    stamp: &Stamp,
) -> anyhow::Result<(String, Vec<u8>, usize, f64)> {
    let mut meta = stamp.meta();
    let mut rng = stream_rng(derive_seed(c.seed, "init"), 0);
    let summary = |o: &[EpochStats], best: usize| o.get(best - 1).map_or(f64::NAN, |e| e.val_loss);
    match model {
        ModelKind::Branch => {
            let ds: Dataset<NetworkSample> = load_dataset(dataset)?;
            meta.insert("dataset_digest".into(), ds.digest_hex());
            let tc = TrainConfig::from_config(cfg, 1, c.seed)?;
            let widths = cfg.get_list("gru_widths")?.unwrap_or_else(|| DEFAULT_GRU_WIDTHS.to_vec());
            let len = ds.records[0].values.len();
            let m = BranchClassifier::<T>::new(&widths, len, ds.num_classes, &mut rng)?;
            let out = fit(m, &ds.split(SplitTag::Train), &ds.split(SplitTag::Val), &tc)?;
            let hist = render(|b| out.write_history_csv(b))?;
            Ok((out.model.to_checkpoint(&meta), hist, out.best_epoch, summary(&out.history, out.best_epoch)))
        }
        ModelKind::A | ModelKind::B => {
            let ds: Dataset<WindowSample> = load_dataset(dataset)?;
            meta.insert("dataset_digest".into(), ds.digest_hex());
            let hidden = cfg.get_or("lstm_hidden", 16usize)?;
            let len = ds.records[0].values.len();
            let (tr, va) = (ds.split(SplitTag::Train), ds.split(SplitTag::Val));
            if model == ModelKind::A {
                let tc = TrainConfig::from_config(cfg, 3, c.seed)?;
                let out = fit(GenericModelA::<T>::new(hidden, len, &mut rng)?, &tr, &va, &tc)?;
                let hist = render(|b| out.write_history_csv(b))?;
                Ok((out.model.to_checkpoint(&meta), hist, out.best_epoch, summary(&out.history, out.best_epoch)))
            } else {
                let tc = TrainConfig::from_config(cfg, 2, c.seed)?;
                let out = fit(GenericModelB::<T>::new(hidden, len, &mut rng)?, &tr, &va, &tc)?;
                let hist = render(|b| out.write_history_csv(b))?;
                Ok((out.model.to_checkpoint(&meta), hist, out.best_epoch, summary(&out.history, out.best_epoch)))
            }
        }
    }
}

fn train_cmd(c: &Common, model: ModelKind, dataset: &Path, precision: Precision) -> anyhow::Result<ExitCode> {
    let cfg = load_config(c)?;
    let stamp = Stamp::new(&cfg, c.seed);
    let (ckpt, hist, best, val) = match precision {
        Precision::F32 => train_typed::<f32>(c, &cfg, model, dataset, &stamp)?,
        Precision::F64 => train_typed::<f64>(c, &cfg, model, dataset, &stamp)?,
    };
    let dir = out_dir(c)?;
    let name = model_name(model);
    let path = dir.join(format!("{name}.ckpt"));
    fs::write(&path, ckpt).with_context(|| format!("writing {}", path.display()))?;
    stamp.write(&dir.join(format!("{name}_history.csv")), &hist)?;
    println!("best epoch {best} (validation loss {val:.5}) -> {}", path.display());
    Ok(ExitCode::SUCCESS)
}

/// Scalar type recorded in a checkpoint.
fn checkpoint_scalar(text: &str) -> anyhow::Result<Precision> {
    match text.lines().find_map(|l| l.strip_prefix("scalar ")).map(str::trim) {
        Some("f32") => Ok(Precision::F32),
        Some("f64") => Ok(Precision::F64),
        other => bail!("checkpoint names no supported scalar type ({other:?})"),
    }
}

fn metrics_text(pairs: &[(&str, String)]) -> Vec<u8> {
    pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect::<String>().into_bytes()
}

fn eval_typed<T: Scalar>(c: &Common, model: ModelKind, text: &str, dataset: &Path, stamp: &Stamp) -> anyhow::Result<()> {
    let dir = out_dir(c)?;
    let name = model_name(model);
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}"));
    let mut pairs: Vec<(&str, String)> = Vec::new();
    match model {
        ModelKind::Branch => {
            let (m, _) = BranchClassifier::<T>::from_checkpoint(text)?;
            let ds: Dataset<NetworkSample> = load_dataset(dataset)?;
            let test = ds.split(SplitTag::Test);
            let cm = evaluate_branch(&m, &test)?;
            stamp.write(&file("confusion.csv"), &render(|b| cm.write_csv(b))?)?;
            stamp.write(&file("confusion_counts.csv"), &render(|b| cm.write_counts_csv(b))?)?;
            pairs.push(("records", test.len().to_string()));
            pairs.push(("accuracy", format!("{:.6}", cm.accuracy())));
            pairs.push(("normal_row_rate", format!("{:.6}", cm.row_rate(0))));
        }
        ModelKind::A => {
            let (m, _) = GenericModelA::<T>::from_checkpoint(text)?;
            let ds: Dataset<WindowSample> = load_dataset(dataset)?;
            let test = ds.split(SplitTag::Test);
            let (cm, rep) = evaluate_model_a(&m, &test, &DEFAULT_POSITION_EDGES, &DEFAULT_LEVEL_EDGES)?;
            let lvl = rep.level.as_ref().expect("model A reports levels");
            stamp.write(&file("confusion.csv"), &render(|b| cm.write_csv(b))?)?;
            stamp.write(&file("confusion_counts.csv"), &render(|b| cm.write_counts_csv(b))?)?;
            stamp.write(&file("position_hist.csv"), &render(|b| rep.position.histogram.write_csv(b))?)?;
            stamp.write(&file("level_hist.csv"), &render(|b| lvl.histogram.write_csv(b))?)?;
            pairs.push(("records", test.len().to_string()));
            pairs.push(("accuracy", format!("{:.6}", cm.accuracy())));
            pairs.push(("position_mae", format!("{:.6}", rep.position.mae)));
            pairs.push(("position_rmse", format!("{:.6}", rep.position.rmse)));
            pairs.push(("level_mae", format!("{:.6}", lvl.mae)));
            pairs.push(("level_rmse", format!("{:.6}", lvl.rmse)));
        }
        ModelKind::B => {
            let (m, _) = GenericModelB::<T>::from_checkpoint(text)?;
            let ds: Dataset<WindowSample> = load_dataset(dataset)?;
            let test = ds.split(SplitTag::Test);
            let (cm, rep) = evaluate_model_b(&m, &test, &DEFAULT_POSITION_EDGES)?;
            stamp.write(&file("confusion.csv"), &render(|b| cm.write_csv(b))?)?;
            stamp.write(&file("confusion_counts.csv"), &render(|b| cm.write_counts_csv(b))?)?;
            stamp.write(&file("location_hist.csv"), &render(|b| rep.position.histogram.write_csv(b))?)?;
            pairs.push(("records", test.len().to_string()));
            pairs.push(("accuracy", format!("{:.6}", cm.accuracy())));
            pairs.push(("location_mae", format!("{:.6}", rep.position.mae)));
            pairs.push(("location_rmse", format!("{:.6}", rep.position.rmse)));
        }
    }
    stamp.write(&file("metrics.txt"), &metrics_text(&pairs))?;
    for (k, v) in &pairs {
        println!("{name} {k} {v}");
    }
    Ok(())
}

fn eval_cmd(c: &Common, model: ModelKind, checkpoint: &Path, dataset: &Path) -> anyhow::Result<ExitCode> {
    let cfg = load_config(c)?;
    let stamp = Stamp::new(&cfg, c.seed);
    let text = String::from_utf8(read(checkpoint)?).context("checkpoint is not text")?;
    match checkpoint_scalar(&text)? {
        Precision::F32 => eval_typed::<f32>(c, model, &text, dataset, &stamp)?,
        Precision::F64 => eval_typed::<f64>(c, model, &text, dataset, &stamp)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn load_model_a<T: Scalar>(text: &str) -> anyhow::Result<GenericModelA<T>> {
    Ok(GenericModelA::<T>::from_checkpoint(text)?.0)
}

fn blind_reference(
    path: &Path,
    clean: &OtdrTrace,
    topo: &PonTopology,
    sim: &SimConfig,
    mc: &MonitorConfig,
) -> anyhow::Result<ReferenceMap> {
    let text = String::from_utf8(read(path)?).context("checkpoint is not text")?;
    Ok(match checkpoint_scalar(&text)? {
        Precision::F32 => build_reference_blind(clean, topo, sim, &load_model_a::<f32>(&text)?, mc)?,
        Precision::F64 => build_reference_blind(clean, topo, sim, &load_model_a::<f64>(&text)?, mc)?,
    })
}

fn diagnose<T: Scalar>(
    model: ModelKind,
    text: &str,
    trace: &OtdrTrace,
    reference: &ReferenceMap,
    threshold: f64,
    sim: &SimConfig,
) -> anyhow::Result<Vec<FaultReport>> {
    Ok(match model {
        ModelKind::A => monitor_with_model_a(trace, &load_model_a::<T>(text)?, reference, threshold, sim)?,
        ModelKind::B => monitor_with_model_b(trace, &GenericModelB::<T>::from_checkpoint(text)?.0, reference, sim)?,
        ModelKind::Branch => bail!("monitoring uses the generic models; pass --model a or --model b"),
    })
}

fn monitor_cmd(
    c: &Common,
    model: ModelKind,
    checkpoint: &Path,
    threshold: Option<f64>,
    trace_path: Option<&Path>,
    pnr: f64,
    blind: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let mut cfg = load_config(c)?;
    if let Some(t) = threshold {
        cfg.set("threshold", t);
    }
    let stamp = Stamp::new(&cfg, c.seed);
    let (topo, sim) = network(&cfg)?;
    let mc = MonitorConfig::from_config(&cfg)?;
    let region_len = cfg.get_or("region_len", DEFAULT_REGION_LEN)?;
    let clean = render_monitor_region(&topo, &FaultScenario::healthy(), &sim, region_len)?;
    let reference = match blind {
        Some(p) => blind_reference(p, &clean, &topo, &sim, &mc)?,
        None => build_reference(&clean, &topo, &sim, &mc)?,
    };
    let trace = match trace_path {
        Some(p) => OtdrTrace::read_csv(fs::File::open(p).with_context(|| format!("opening {}", p.display()))?, sim.sample_interval_ns)?,
        None => {
            let scen = FaultScenario::from_config(&cfg)?;
            scen.validate(&topo)?;
            measure(&topo, &scen, &sim, region_len, pnr, &mut stream_rng(derive_seed(c.seed, "monitor"), 0))?
        }
    };
    let text = String::from_utf8(read(checkpoint)?).context("checkpoint is not text")?;
    let reports = match checkpoint_scalar(&text)? {
        Precision::F32 => diagnose::<f32>(model, &text, &trace, &reference, mc.threshold, &sim)?,
        Precision::F64 => diagnose::<f64>(model, &text, &trace, &reference, mc.threshold, &sim)?,
    };

    let dir = out_dir(c)?;
    let mut refs = String::from("branch_id,peak_index,level,window_start,distance_m\n");
    for e in &reference.entries {
        refs.push_str(&format!("{},{},{:.6},{},{:.4}\n", e.branch_id, e.index, e.level, e.window_start, e.distance_m));
    }
    stamp.write(&dir.join("reference.csv"), refs.as_bytes())?;
    let text_report = render(|b| write_reports_text(&reports, b))?;
    stamp.write(&dir.join("monitor_report.txt"), &text_report)?;
    stamp.write(&dir.join("monitor_report.csv"), &render(|b| write_reports_csv(&reports, b))?)?;
    print!("{}", String::from_utf8_lossy(&text_report));
    Ok(if any_fault(&reports) { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

/// Metric files `report` looks for, with the model each belongs to.
const METRIC_FILES: [(&str, &str); 3] =
    [("branch", "branch_metrics.txt"), ("model_a", "model_a_metrics.txt"), ("model_b", "model_b_metrics.txt")];

fn parse_metrics(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

fn report(c: &Common, metrics: &Path) -> anyhow::Result<ExitCode> {
    if !metrics.is_dir() {
        bail!("metrics dir {} does not exist", metrics.display());
    }
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for (model, file) in METRIC_FILES {
        let path = metrics.join(file);
        match fs::read_to_string(&path) {
            Ok(text) => rows.extend(parse_metrics(&text).into_iter().map(|(k, v)| (model, k, v))),
            Err(_) => missing.push(file),
        }
    }
    if missing.len() == METRIC_FILES.len() {
        let expected: Vec<&str> = METRIC_FILES.iter().map(|m| m.1).collect();
        return Err(anyhow!("no metric files in {}; expected any of: {}", metrics.display(), expected.join(", ")));
    }
    let hists: Vec<PathBuf> = {
        let mut v: Vec<PathBuf> = fs::read_dir(metrics)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("_hist.csv")))
            .collect();
        v.sort();
        v
    };

    let cfg = load_config(c)?;
    let stamp = Stamp::new(&cfg, c.seed);
    let mut text = String::new();
    for (model, k, v) in &rows {
        text.push_str(&format!("{model:<8} {k:<16} {v}\n"));
    }
    for f in &missing {
        text.push_str(&format!("missing  {f}\n"));
    }
    for h in &hists {
        text.push_str(&format!("histogram {}\n", h.display()));
    }
    let mut csv = String::from("model,metric,value\n");
    for (model, k, v) in &rows {
        csv.push_str(&format!("{model},{k},{v}\n"));
    }
    let dir = out_dir(c)?;
    stamp.write(&dir.join("summary.txt"), text.as_bytes())?;
    stamp.write(&dir.join("summary.csv"), csv.as_bytes())?;
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}
