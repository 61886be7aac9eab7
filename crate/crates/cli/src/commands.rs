use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use neuroalign::align::{fit, ModelCheckpoint, TrainConfig};
use neuroalign::data::{
    read_bank, read_neural, synth::default_schedule, synth_generate, EmbeddingBank, NeuralDataset, PairManifest,
    PairedData, Split, SynthSpec,
};
use neuroalign::eval::{
    evaluate, layer_sweep_threads, read_table, regress_table, write_embeddings_csv, write_table, ReportDocument,
    RetrievalReport, SweepResult, TableRow,
};
use serde_json::{Map, Value};

use crate::cli::*;
use crate::exit::usage;
use crate::provenance::{write_json, RunRecord};

pub const CHECKPOINT_FILE: &str = "checkpoint.nck";
pub const LOSSES_FILE: &str = "losses.json";
pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const EVAL_JSON: &str = "report.json";
pub const EVAL_CSV: &str = "report.csv";
pub const TABLE_FILE: &str = "table.csv";
pub const REGRESSION_FILE: &str = "regression.json";
pub const EXPORT_FILE: &str = "embeddings.csv";
pub const THREADS_ENV: &str = "NEUROALIGN_THREADS";

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Sweep(a) => sweep(a),
        Command::Eval(a) => eval(a),
        Command::Report(a) => report(a),
        Command::Export(a) => export(a),
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{what} {} does not exist", path.display()),
        )
        .into());
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut layers = default_schedule(a.layers);
    if let Some(last) = layers.last_mut() {
        last.detail = a.final_detail;
    }
    let spec = SynthSpec {
        num_concepts: a.concepts,
        test_concepts: a.test_concepts,
        images_per_concept: a.images_per,
        layers,
        embed_dim: a.embed_dim,
        channels: a.channels,
        time_points: a.time_points,
        repetitions: a.repetitions,
        seed: a.seed,
        ..SynthSpec::default()
    };
    let data = synth_generate(&spec)?;
    create_dir(&a.out)?;
    let manifest = data.write(&a.out)?;
    RunRecord::new("synth", Some(a.seed), serde_json::to_value(&spec)?)?.write(&a.out)?;
    println!("{}", manifest.display());
    Ok(())
}

fn train_config(a: &ConfigArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            require_file(path, "config")?;
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {$(
            if let Some(v) = a.$flag { cfg.$field = v; }
        )*};
    }
    set!(epochs => epochs, lr => learning_rate, weight_decay => weight_decay, batch_size => batch_size,
         embed_dim => embed_dim, shared_dim => shared_dim, dropout => dropout_p, tau => initial_tau,
         arch => arch, projector => projector, seed => seed);
    cfg.validate()?;
    Ok(cfg)
}

/// Manifest plus the selected subject's recordings.
struct Loaded {
    manifest: PairManifest,
    dataset: NeuralDataset,
}

impl Loaded {
    fn split(&self, split: Split) -> Result<NeuralDataset> {
        Ok(self.manifest.split_dataset(&self.dataset, split)?)
    }
}

fn load_manifest(a: &DataArgs) -> Result<PairManifest> {
    require_file(&a.manifest, "manifest")?;
    PairManifest::load(&a.manifest).with_context(|| format!("loading {}", a.manifest.display()))
}

fn neural_path(a: &DataArgs, manifest: &PairManifest) -> Result<PathBuf> {
    let subject = match &a.subject {
        Some(s) => s.clone(),
        None => manifest
            .subjects
            .first()
            .cloned()
            .ok_or_else(|| usage("manifest lists no subjects"))?,
    };
    let source = manifest.source_for(&subject)?;
    let path = PairManifest::resolve(&a.manifest, &source.path);
    require_file(&path, "neural file")?;
    Ok(path)
}

fn load_neural(a: &DataArgs, manifest: PairManifest, path: &Path) -> Result<Loaded> {
    let mut dataset = read_neural(path).with_context(|| format!("reading {}", path.display()))?;
    if a.zscore {
        dataset = dataset.zscore_channels()?;
    }
    Ok(Loaded { manifest, dataset })
}

fn bank_path(a: &BankArgs, data: &DataArgs, manifest: &PairManifest) -> Result<PathBuf> {
    let path = match (&a.bank, a.layer) {
        (Some(p), _) => p.clone(),
        (None, Some(layer)) => {
            let hits: Vec<_> = manifest.banks.iter().filter(|b| b.layer_index == layer).collect();
            match hits.as_slice() {
                [one] => PairManifest::resolve(&data.manifest, &one.path),
                [] => return Err(usage(format!("manifest has no bank for layer {layer}"))),
                _ => return Err(usage(format!("several manifest banks have layer {layer}; pass --bank"))),
            }
        }
        (None, None) => return Err(usage("pass --bank or --layer")),
    };
    require_file(&path, "bank")?;
    Ok(path)
}

fn load_bank(path: &Path, layer: Option<usize>) -> Result<EmbeddingBank> {
    let bank = read_bank(path).with_context(|| format!("reading {}", path.display()))?;
    if let Some(l) = layer {
        if bank.layer_index != l {
            return Err(usage(format!(
                "{} holds layer {}, not {l}",
                path.display(),
                bank.layer_index
            )));
        }
    }
    Ok(bank)
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a.config)?;
    let manifest = load_manifest(&a.data)?;
    let neural = neural_path(&a.data, &manifest)?;
    let bank_file = bank_path(&a.bank, &a.data, &manifest)?;
    let loaded = load_neural(&a.data, manifest, &neural)?;
    let bank = load_bank(&bank_file, a.bank.layer)?;
    let train_ds = loaded.split(Split::Train)?;
    let test_ds = loaded.split(Split::Test)?;
    let train_pairs = PairedData::new(&train_ds, &bank)?;
    let test_pairs = if test_ds.is_empty() {
        None
    } else {
        Some(PairedData::new(&test_ds, &bank)?)
    };

    create_dir(&a.out)?;
    let ckpt = fit(&train_pairs, test_pairs.as_ref(), &cfg, |log| {
        eprintln!(
            "epoch {:>3}  train {:.5}  test {}  tau {:.4}",
            log.epoch,
            log.train_loss,
            log.test_loss.map_or("-".into(), |v| format!("{v:.5}")),
            log.tau
        )
    })?;
    ckpt.save(a.out.join(CHECKPOINT_FILE))?;
    write_json(&a.out.join(LOSSES_FILE), &ckpt.log)?;
    RunRecord::new("train", Some(cfg.seed), serde_json::to_value(&cfg)?)?.write(&a.out)?;
    if let Some(last) = ckpt.log.last() {
        println!("final train loss {:.6}", last.train_loss);
    }
    Ok(())
}

fn sweep_banks(a: &SweepArgs, manifest: &PairManifest) -> Result<Vec<PathBuf>> {
    let mut paths = match &a.banks_dir {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("banks directory {} does not exist", dir.display()),
                )
                .into());
            }
            fs::read_dir(dir)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .filter(|p| p.extension().is_some_and(|x| x == "neb"))
                .collect()
        }
        None => manifest
            .banks
            .iter()
            .map(|b| PairManifest::resolve(&a.data.manifest, &b.path))
            .collect::<Vec<_>>(),
    };
    paths.sort();
    if paths.is_empty() {
        return Err(usage("no banks to sweep"));
    }
    for p in &paths {
        require_file(p, "bank")?;
    }
    Ok(paths)
}

fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(1),
    }
}

fn sweep(a: SweepArgs) -> Result<()> {
    let cfg = train_config(&a.config)?;
    let threads = thread_count()?;
    let manifest = load_manifest(&a.data)?;
    let neural = neural_path(&a.data, &manifest)?;
    let bank_files = sweep_banks(&a, &manifest)?;
    let loaded = load_neural(&a.data, manifest, &neural)?;
    let banks = bank_files
        .iter()
        .map(|p| load_bank(p, None))
        .collect::<Result<Vec<_>>>()?;
    if banks.iter().any(|b| b.backbone_name != banks[0].backbone_name) {
        return Err(usage("banks come from more than one backbone"));
    }
    let train_ds = loaded.split(Split::Train)?;
    let test_ds = loaded.split(Split::Test)?;
    let categories = loaded.manifest.category_of_image();

    create_dir(&a.out)?;
    let ckpt_dir = a.out.join("checkpoints");
    if a.save_checkpoints {
        create_dir(&ckpt_dir)?;
    }
    let mut save_err = None;
    let result = layer_sweep_threads(&train_ds, &test_ds, &banks, &cfg, &categories, threads, |ckpt, r| {
        eprintln!(
            "layer {:>2}/{}  top1 {:.4}  top5 {:.4}  concept {:.4}",
            r.layer_index, r.num_layers, r.top1, r.top5, r.concept_accuracy
        );
        if a.save_checkpoints && save_err.is_none() {
            let path = ckpt_dir.join(format!("layer_{:02}.nck", r.layer_index));
            save_err = ckpt.save(path).err();
        }
    })?;
    if let Some(e) = save_err {
        return Err(e.into());
    }
    match a.format {
        Format::Json => write_json(
            &a.out.join(SWEEP_JSON),
            &ReportDocument {
                sweep: Some(result.clone()),
                ..Default::default()
            },
        )?,
        Format::Csv => write_reports_csv(&a.out.join(SWEEP_CSV), &result.reports)?,
    }
    RunRecord::new("sweep", Some(cfg.seed), serde_json::to_value(&cfg)?)?.write(&a.out)?;
    println!(
        "best layer {} top1 {:.4}; final layer {} top1 {:.4}; delta {:+.4}",
        result.best_layer, result.best_top1, result.final_layer, result.final_top1, result.delta
    );
    Ok(())
}

fn write_reports_csv(path: &Path, reports: &[RetrievalReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in reports {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

const METRIC_KEYS: [(Metric, &str); 3] = [
    (Metric::Top1, "top1"),
    (Metric::Top5, "top5"),
    (Metric::Concept, "concept_accuracy"),
];

/// Report fields in declaration order, without unrequested metrics.
fn filtered_fields(report: &RetrievalReport, metrics: &[Metric]) -> Result<Vec<(String, Value)>> {
    let Value::Object(map) = serde_json::to_value(report)? else {
        unreachable!("reports serialize as objects")
    };
    let dropped: Vec<&str> = METRIC_KEYS
        .iter()
        .filter(|(m, _)| !metrics.contains(m))
        .map(|(_, k)| *k)
        .collect();
    let order = [
        "subject_id",
        "backbone",
        "layer_index",
        "num_layers",
        "relative_depth",
        "top1",
        "top5",
        "concept_accuracy",
        "num_queries",
    ];
    Ok(order
        .iter()
        .filter(|k| !dropped.contains(k))
        .map(|k| (k.to_string(), map[*k].clone()))
        .collect())
}

fn eval(a: EvalArgs) -> Result<()> {
    require_file(&a.ckpt, "checkpoint")?;
    let manifest = load_manifest(&a.data)?;
    let neural = neural_path(&a.data, &manifest)?;
    let bank_file = bank_path(&a.bank, &a.data, &manifest)?;
    let ckpt = ModelCheckpoint::load(&a.ckpt).with_context(|| format!("reading {}", a.ckpt.display()))?;
    let loaded = load_neural(&a.data, manifest, &neural)?;
    let bank = load_bank(&bank_file, a.bank.layer)?;
    let test_ds = loaded.split(Split::Test)?;
    let pairs = PairedData::new(&test_ds, &bank)?;
    let report = evaluate(&ckpt.model, &pairs, &loaded.manifest.category_of_image())?;
    let fields = filtered_fields(&report, &a.metrics)?;

    create_dir(&a.out)?;
    match a.format {
        Format::Json => {
            let record: Map<String, Value> = fields.iter().cloned().collect();
            write_json(&a.out.join(EVAL_JSON), &serde_json::json!({ "reports": [record] }))?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_path(a.out.join(EVAL_CSV))?;
            w.write_record(fields.iter().map(|(k, _)| k.as_str()))?;
            w.write_record(fields.iter().map(|(_, v)| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))?;
            w.flush()?;
        }
    }
    let metrics: Vec<&str> = METRIC_KEYS
        .iter()
        .filter(|(m, _)| a.metrics.contains(m))
        .map(|(_, k)| *k)
        .collect();
    RunRecord::new(
        "eval",
        Some(ckpt.config.seed),
        serde_json::json!({ "train_config": ckpt.config, "metrics": metrics }),
    )?
    .write(&a.out)?;
    for (k, v) in &fields {
        match v {
            Value::String(s) => println!("{k}: {s}"),
            other => println!("{k}: {other}"),
        }
    }
    Ok(())
}

fn parse_params(specs: &[String]) -> Result<HashMap<String, String>> {
    specs
        .iter()
        .map(|s| {
            let (name, count) = s
                .split_once('=')
                .ok_or_else(|| usage(format!("--params expects BACKBONE=COUNT, got {s:?}")))?;
            neuroalign::eval::parse_param_count(count)?;
            Ok((name.to_string(), count.to_string()))
        })
        .collect()
}

fn rows_from(path: &Path, params: &HashMap<String, String>) -> Result<Vec<TableRow>> {
    let ctx = || format!("reading {}", path.display());
    if path.extension().is_some_and(|x| x == "csv") {
        return read_table(fs::File::open(path)?).with_context(ctx);
    }
    let text = fs::read_to_string(path)?;
    let sweep = match serde_json::from_str::<ReportDocument>(&text).with_context(ctx)? {
        ReportDocument { sweep: Some(s), .. } => s,
        ReportDocument { reports, .. } if !reports.is_empty() => SweepResult::from_reports(reports)?,
        _ => return Err(usage(format!("{} holds no sweep or per-layer reports", path.display()))),
    };
    let backbone = &sweep.reports[0].backbone;
    Ok(vec![TableRow::from_sweep(&sweep, params.get(backbone).cloned())?])
}

fn report(a: ReportArgs) -> Result<()> {
    for p in &a.results {
        require_file(p, "results file")?;
    }
    let params = parse_params(&a.params)?;
    let mut rows = Vec::new();
    for p in &a.results {
        rows.extend(rows_from(p, &params)?);
    }
    if rows.is_empty() {
        return Err(usage("no result rows"));
    }
    create_dir(&a.out)?;
    let mut table = Vec::new();
    write_table(&rows, &mut table)?;
    fs::write(a.out.join(TABLE_FILE), &table)?;
    let regression = if a.regress {
        if let Some(r) = rows.iter().find(|r| r.params.is_none()) {
            return Err(usage(format!("no parameter count for {}; pass --params", r.backbone)));
        }
        let block = regress_table(&rows)?;
        write_json(
            &a.out.join(REGRESSION_FILE),
            &ReportDocument {
                regression: Some(block.clone()),
                ..Default::default()
            },
        )?;
        Some(block)
    } else {
        None
    };
    let inputs: Vec<String> = a.results.iter().map(|p| p.display().to_string()).collect();
    RunRecord::new(
        "report",
        None,
        serde_json::json!({ "results": inputs, "regress": a.regress, "params": params }),
    )?
    .write(&a.out)?;
    print!("{}", String::from_utf8_lossy(&table));
    if let Some(b) = regression {
        for (name, r) in [("best", b.best), ("final", b.final_output)] {
            println!(
                "{name}: slope {:.4} intercept {:.4} r2 {:.4} p {:.3e} (n={})",
                r.slope, r.intercept, r.r2, r.p_value, r.n
            );
        }
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    require_file(&a.ckpt, "checkpoint")?;
    let manifest = load_manifest(&a.data)?;
    let neural = neural_path(&a.data, &manifest)?;
    let bank_file = bank_path(&a.bank, &a.data, &manifest)?;
    let ckpt = ModelCheckpoint::load(&a.ckpt).with_context(|| format!("reading {}", a.ckpt.display()))?;
    let loaded = load_neural(&a.data, manifest, &neural)?;
    let bank = load_bank(&bank_file, a.bank.layer)?;
    let split = match a.split {
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    let ds = loaded.split(split)?;
    let pairs = PairedData::new(&ds, &bank)?;
    create_dir(&a.out)?;
    let file = fs::File::create(a.out.join(EXPORT_FILE))?;
    let rows = write_embeddings_csv(
        &ckpt.model,
        &pairs,
        &loaded.manifest.concept_of_image(),
        std::io::BufWriter::new(file),
    )?;
    RunRecord::new(
        "export",
        Some(ckpt.config.seed),
        serde_json::json!({ "train_config": ckpt.config, "split": format!("{:?}", a.split).to_lowercase() }),
    )?
    .write(&a.out)?;
    println!("{rows} rows");
    Ok(())
}
