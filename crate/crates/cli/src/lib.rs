//! The `ppgstress` command-line pipeline:
//! `synth → featurize → train → prune → quantize → infer → evaluate → budget → report`.
//!
//! Every stage reads and writes files, so each can be rerun on its own.
//! Exit status is 0 on success, 1 when a stage ran but a gate failed, and 2
//! for usage errors or unreadable inputs.

pub mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ppgstress::compress::{calibrate, load_any, prune_dense_units, quantize_ptq, AnyModel};
use ppgstress::eval::{pr_curve_csv, MetricsReport};
use ppgstress::model::{default_builder, load_model, save_model};
use ppgstress::qengine::{check_budget, plan_memory, plan_memory_float, Engine};
use ppgstress::scalogram::{featurize_record, read_sclg, write_sclg, ScalogramImage};
use ppgstress::signal::{load_ppg_csv, synth_ppg, Class, SynthParams};
use ppgstress::train::train;
use rayon::prelude::*;

pub use config::PipelineConfig;
use config::{derive_seed, Stream};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] ppgstress::Error),
    /// The stage completed but its result failed a check.
    #[error("gate failed: {0}")]
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Gate(_) => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ppgstress", version, about = "PPG stress detection pipeline")]
pub struct Cli {
    /// Seed for every random stage; overrides the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pipeline config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InOut {
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write labeled synthetic PPG records as CSV files into a directory.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Records per class.
        #[arg(long)]
        records: Option<usize>,
    },
    /// Turn a CSV record, or a directory of them, into a scalogram file.
    Featurize(InOut),
    /// Train the float model on a scalogram file.
    Train {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Remove the weakest hidden dense units.
    Prune {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        keep_units: Option<usize>,
    },
    /// Int8 post-training quantization.
    Quantize {
        #[command(flatten)]
        io: InOut,
        /// Scalogram file with calibration images.
        #[arg(long)]
        calib: Option<PathBuf>,
    },
    /// Score a scalogram file with a float or quantized model.
    Infer {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Metrics from a predictions CSV.
    Evaluate {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        pr_csv: Option<PathBuf>,
        /// Fail (exit 1) below this accuracy.
        #[arg(long)]
        min_accuracy: Option<f64>,
    },
    /// Check a model against the flash and RAM budget.
    Budget {
        #[command(flatten)]
        io: InOut,
        #[arg(long)]
        flash_budget: Option<usize>,
        #[arg(long)]
        ram_budget: Option<usize>,
    },
    /// Merge JSON reports into one summary.
    Report {
        #[arg(long = "in", num_args = 1.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn pick(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Usage(format!("no {what} path given")))
}

fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input not found: {}", path.display())))
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ppgstress::Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| ppgstress::Error::io(path, e).into())
}

fn class_slug(c: Class) -> &'static str {
    match c {
        Class::NonStress => "nonstress",
        Class::Stress => "stress",
    }
}

/// Runs one subcommand. Progress goes to stderr.
pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let paths = cfg.paths.clone();
    match cli.command {
        Command::Synth { out, records } => {
            let out = pick(&out, &paths.records, "output directory")?;
            synth(&cfg, &out, records.unwrap_or(cfg.synth.records_per_class))
        }
        Command::Featurize(io) => {
            let input = pick(&io.input, &paths.records, "input")?;
            let out = pick(&io.out, &paths.scalograms, "output")?;
            featurize(&cfg, &input, &out)
        }
        Command::Train {
            io,
            history,
            epochs,
        } => {
            let input = pick(&io.input, &paths.scalograms, "input")?;
            let out = pick(&io.out, &paths.model, "output")?;
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            fit(&cfg, &input, &out, history.or(paths.history).as_deref())
        }
        Command::Prune { io, keep_units } => {
            let input = pick(&io.input, &paths.model, "input")?;
            let out = pick(&io.out, &paths.pruned, "output")?;
            if let Some(k) = keep_units {
                cfg.prune.keep = k;
            }
            require_exists(&input)?;
            let pruned = prune_dense_units(&load_model(&input)?, &cfg.prune)?;
            save_model(&pruned, &out)?;
            eprintln!("pruned to {} parameters -> {}", pruned.param_count(), out.display());
            Ok(())
        }
        Command::Quantize { io, calib } => {
            let input = pick(&io.input, &paths.pruned, "input")?;
            let out = pick(&io.out, &paths.quantized, "output")?;
            let calib = pick(&calib, &paths.scalograms, "calibration")?;
            quantize(&cfg, &input, &calib, &out)
        }
        Command::Infer { io, model } => {
            let model = pick(&model, &paths.quantized, "model")?;
            let input = pick(&io.input, &paths.scalograms, "input")?;
            let out = pick(&io.out, &paths.predictions, "output")?;
            infer(&model, &input, &out)
        }
        Command::Evaluate {
            io,
            pr_csv,
            min_accuracy,
        } => {
            let input = pick(&io.input, &paths.predictions, "input")?;
            let out = pick(&io.out, &paths.metrics, "output")?;
            evaluate(&input, &out, pr_csv.or(paths.pr_curve).as_deref(), min_accuracy)
        }
        Command::Budget {
            io,
            flash_budget,
            ram_budget,
        } => {
            let input = pick(&io.input, &paths.quantized, "model")?;
            if let Some(f) = flash_budget {
                cfg.budget.flash_bytes = f;
            }
            if let Some(r) = ram_budget {
                cfg.budget.ram_bytes = r;
            }
            budget(&cfg, &input, io.out.or(paths.budget).as_deref())
        }
        Command::Report { inputs, out } => {
            let out = pick(&out, &paths.report, "output")?;
            report(&inputs, &out)
        }
    }
}

fn synth(cfg: &PipelineConfig, out: &Path, per_class: usize) -> Result<()> {
    if per_class == 0 {
        return Err(CliError::Usage("need at least one record per class".into()));
    }
    let mut k = 0u64;
    for i in 0..per_class {
        for class in [Class::NonStress, Class::Stress] {
            let mut p = SynthParams::preset(class, cfg.synth.duration_s, derive_seed(cfg.seed, Stream::Synth, k));
            p.sample_rate_hz = cfg.windowing.sample_rate_hz;
            let record = synth_ppg(&p)?;
            write(
                &out.join(format!("rec{i:03}_{}.csv", class_slug(class))),
                record.to_csv_string(),
            )?;
            k += 1;
        }
    }
    eprintln!("wrote {k} records to {}", out.display());
    Ok(())
}

fn csv_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    require_exists(input)?;
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(input)
        .map_err(|e| ppgstress::Error::io(input, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!("no .csv files in {}", input.display())));
    }
    Ok(files)
}

fn featurize(cfg: &PipelineConfig, input: &Path, out: &Path) -> Result<()> {
    let w = &cfg.windowing;
    let mut images = Vec::new();
    for (id, path) in csv_inputs(input)?.iter().enumerate() {
        let record = load_ppg_csv(path, w.sample_rate_hz)?;
        images.extend(featurize_record(&record, w.window_s, w.stride_s, &cfg.cwt, id as u32)?);
    }
    write_sclg(out, &images)?;
    eprintln!("{} scalograms -> {}", images.len(), out.display());
    Ok(())
}

fn read_images(path: &Path) -> Result<Vec<ScalogramImage>> {
    require_exists(path)?;
    Ok(read_sclg(path)?)
}

fn fit(cfg: &PipelineConfig, input: &Path, out: &Path, history: Option<&Path>) -> Result<()> {
    let images = read_images(input)?;
    let model = default_builder(cfg.model.hidden_units).build(derive_seed(cfg.seed, Stream::Init, 0))?;
    let mut tc = cfg.train.clone();
    tc.seed = derive_seed(cfg.seed, Stream::Train, 0);
    tc.augment.seed = derive_seed(cfg.seed, Stream::Augment, 0);
    let outcome = train(model, &images, &tc)?;
    for e in &outcome.history.epochs {
        eprintln!(
            "epoch {}: loss {:.4} train_acc {:.3} val_acc {:.3}",
            e.epoch, e.loss, e.train_acc, e.val_acc
        );
    }
    save_model(&outcome.model, out)?;
    if let Some(h) = history {
        write(h, outcome.history.to_csv())?;
    }
    Ok(())
}

/// `n` indices spread evenly over `0..len`.
fn spread(len: usize, n: usize) -> Vec<usize> {
    if n >= len {
        return (0..len).collect();
    }
    (0..n).map(|i| i * len / n).collect()
}

fn quantize(cfg: &PipelineConfig, input: &Path, calib: &Path, out: &Path) -> Result<()> {
    require_exists(input)?;
    let model = load_model(input)?;
    let images = read_images(calib)?;
    let chosen: Vec<ScalogramImage> = spread(images.len(), cfg.quantize.calibration_images)
        .into_iter()
        .map(|i| images[i].clone())
        .collect();
    let q = quantize_ptq(&model, &calibrate(&model, &chosen)?)?;
    q.save(out)?;
    eprintln!(
        "quantized with {} calibration images: {} payload bytes -> {}",
        chosen.len(),
        q.payload_bytes(),
        out.display()
    );
    Ok(())
}

fn infer(model: &Path, input: &Path, out: &Path) -> Result<()> {
    require_exists(model)?;
    let images = read_images(input)?;
    let probs = match load_any(model)? {
        AnyModel::Float(m) => images
            .par_iter()
            .map(|img| m.predict_image(img))
            .collect::<ppgstress::Result<Vec<_>>>()?,
        AnyModel::Quant(q) => Engine::new(&q)?.predict_all(&images)?,
    };
    let mut csv = String::from("index,score,pred,label\n");
    for (i, (p, img)) in probs.iter().zip(&images).enumerate() {
        let pred = (p[1] > p[0]) as usize;
        let label = img.label.map(|c| c.index().to_string()).unwrap_or_default();
        csv.push_str(&format!("{i},{},{pred},{label}\n", p[1]));
    }
    write(out, csv)?;
    eprintln!("{} predictions -> {}", images.len(), out.display());
    Ok(())
}

struct Predictions {
    scores: Vec<f64>,
    preds: Vec<usize>,
    labels: Vec<usize>,
}

fn read_predictions(path: &Path) -> Result<Predictions> {
    require_exists(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| ppgstress::Error::io(path, e))?;
    let bad = |row: usize, what: &str| {
        CliError::Usage(format!("{}: row {row}: {what}", path.display()))
    };
    let mut lines = text.lines();
    if lines.next() != Some("index,score,pred,label") {
        return Err(bad(1, "expected header index,score,pred,label"));
    }
    let mut p = Predictions {
        scores: vec![],
        preds: vec![],
        labels: vec![],
    };
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad(row, "expected 4 fields"));
        }
        p.scores.push(f[1].parse().map_err(|_| bad(row, "bad score"))?);
        p.preds.push(f[2].parse().map_err(|_| bad(row, "bad prediction"))?);
        p.labels.push(f[3].parse().map_err(|_| bad(row, "missing or bad label"))?);
    }
    Ok(p)
}

fn evaluate(input: &Path, out: &Path, pr_csv: Option<&Path>, min_accuracy: Option<f64>) -> Result<()> {
    let p = read_predictions(input)?;
    let report = MetricsReport::new(&p.scores, &p.preds, &p.labels)?;
    write(out, report.to_json() + "\n")?;
    if let Some(path) = pr_csv {
        write(path, pr_curve_csv(&report.pr_curve))?;
    }
    eprintln!("accuracy {:.4} auc {:.4} -> {}", report.accuracy, report.auc, out.display());
    match min_accuracy {
        Some(floor) if report.accuracy < floor => Err(CliError::Gate(format!(
            "accuracy {} below {floor}",
            report.accuracy
        ))),
        _ => Ok(()),
    }
}

fn budget(cfg: &PipelineConfig, input: &Path, out: Option<&Path>) -> Result<()> {
    require_exists(input)?;
    cfg.budget.validate()?;
    let plan = match load_any(input)? {
        AnyModel::Float(m) => plan_memory_float(&m)?,
        AnyModel::Quant(q) => plan_memory(&q),
    };
    let report = check_budget(&plan, &cfg.budget);
    let json = report.to_json() + "\n";
    match out {
        Some(p) => write(p, &json)?,
        None => print!("{json}"),
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Gate(format!(
            "over budget: flash margin {} B, ram margin {} B",
            report.margins.flash, report.margins.ram
        )))
    }
}

fn report(inputs: &[PathBuf], out: &Path) -> Result<()> {
    let mut artifacts = BTreeMap::new();
    let mut pass = true;
    for path in inputs {
        require_exists(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| ppgstress::Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if value.get("pass").and_then(|v| v.as_bool()) == Some(false) {
            pass = false;
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if artifacts.insert(name.clone(), value).is_some() {
            return Err(CliError::Usage(format!("two inputs named {name}")));
        }
    }
    let summary = serde_json::json!({ "pass": pass, "artifacts": artifacts });
    write(out, serde_json::to_string_pretty(&summary).expect("json") + "\n")?;
    eprintln!("report of {} artifacts -> {}", inputs.len(), out.display());
    Ok(())
}
