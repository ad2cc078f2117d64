//! Command-line front end: `gen`, `train`, `eval`, `rf`, `vonfrey`, `infer`
//! and the end-to-end `report`.
//!
//! Configuration resolves as defaults < `--config` file < `--set key=value`
//! < dedicated flags. `OUT_DIR` supplies the output directory when neither
//! the config nor `--out` does.

mod config;
mod dataset_csv;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use dataset_csv::{load_dataset_csv, save_dataset_csv};

use crate::error::{Error, Result};
use crate::evaluation::{evaluate, make_split, receptive_field_report, write_receptive, write_report, SplitPlan};
use crate::geometry::SENSOR_COUNT;
use crate::pipeline::{train_pipeline, ContactEstimate, PipelineModel};
use crate::psychometrics::{fit_sigmoid_with, run_vonfrey_protocol, threshold_at, FitOptions};
use crate::simulator::{generate_dataset, Dataset};
use crate::textfmt::{cell, key_values};

#[derive(Debug, Parser)]
#[command(name = "fbg-skin", version, about = "Simulate, train and evaluate a curved FBG tactile skin")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory (falls back to OUT_DIR).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic indentation dataset.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Number of indentations.
        #[arg(long)]
        n: Option<usize>,
        /// Write dataset.csv.gz instead of dataset.csv.
        #[arg(long)]
        gzip: bool,
    },
    /// Train the force and localization networks on the training split.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Evaluate a trained model (test metrics, 5-fold CV) and write the report bundle.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Receptive-field maps, hot-spot areas and lobe counts.
    Rf {
        #[command(flatten)]
        common: Common,
    },
    /// Simulated Von Frey protocol with sigmoid fit.
    Vonfrey {
        #[command(flatten)]
        common: Common,
    },
    /// Run the gated pipeline over a CSV of frames (columns dl01_nm..dl16_nm).
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
    },
    /// End to end: gen, train and eval into data/, model/ and report/.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
    },
}

fn resolve(common: &Common, extra: &[(&str, Option<String>)]) -> Result<(RunConfig, PathBuf)> {
    let mut c = match &common.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for pair in &common.set {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        c.set(k.trim(), v)?;
    }
    if let Some(seed) = common.seed {
        c.seed = seed;
    }
    for (k, v) in extra {
        if let Some(v) = v {
            c.set(k, v)?;
        }
    }
    if let Some(out) = &common.out {
        c.out = Some(out.clone());
    }
    if c.out.is_none() {
        c.out = std::env::var_os("OUT_DIR").map(PathBuf::from);
    }
    let out = c.out.clone().ok_or_else(|| Error::Config("no output directory: pass --out or set OUT_DIR".into()))?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok((c, out))
}

fn path_arg(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Run manifest: command, version, config hash and the full config echo.
fn write_manifest(dir: &Path, command: &str, c: &RunConfig) -> Result<()> {
    let mut text = key_values([
        ("command", command.to_string()),
        ("version", env!("CARGO_PKG_VERSION").to_string()),
        ("config_hash", c.hash()),
        ("seed", c.seed.to_string()),
    ]);
    for line in c.to_text().lines() {
        text.push_str("config.");
        text.push_str(line);
        text.push('\n');
    }
    write_text(&dir.join("manifest.txt"), &text)
}

fn require(p: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| Error::Config(format!("no {what} given")))
}

fn load_dataset(c: &RunConfig) -> Result<Dataset> {
    let path = require(&c.dataset, "dataset path")?;
    if !path.exists() {
        return Err(Error::Validation(format!("dataset not found: {}", path.display())));
    }
    let layout = c.layout()?;
    let params = c.field_params(&layout)?;
    load_dataset_csv(&path, &layout, &params, c.seed)
}

fn load_model(c: &RunConfig) -> Result<PipelineModel> {
    let dir = require(&c.model, "model directory")?;
    if !dir.join("model_manifest.txt").is_file() {
        return Err(Error::Validation(format!("model bundle not found: {}", dir.display())));
    }
    PipelineModel::load(&dir)
}

fn plan_for(dataset: &Dataset, c: &RunConfig) -> Result<SplitPlan> {
    make_split(dataset, c.test_frac, c.folds, c.split_seed)
}

fn split_text(plan: &SplitPlan) -> String {
    let ids = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
    let mut pairs = vec![
        ("seed".to_string(), plan.seed.to_string()),
        ("train".to_string(), ids(&plan.train)),
        ("test".to_string(), ids(&plan.test)),
    ];
    for (k, f) in plan.folds.iter().enumerate() {
        pairs.push((format!("fold{}", k + 1), ids(f)));
    }
    key_values(pairs.iter().map(|(k, v)| (k.as_str(), v.clone())))
}

fn gen(c: &RunConfig, out: &Path) -> Result<(PathBuf, Dataset)> {
    let layout = c.layout()?;
    let params = c.field_params(&layout)?;
    let dataset = generate_dataset(&layout, &params, &c.protocol(), c.n, c.seed)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(if c.gzip { "dataset.csv.gz" } else { "dataset.csv" });
    save_dataset_csv(&dataset, &path)?;
    write_text(&out.join("layout.tsv"), &layout.to_table())?;
    Ok((path, dataset))
}

fn train(c: &RunConfig, dataset: &Dataset, out: &Path) -> Result<PipelineModel> {
    let plan = plan_for(dataset, c)?;
    let model = train_pipeline(dataset, &plan.final_split(), &c.pipeline()?)?;
    model.save(out)?;
    write_text(&out.join("split.txt"), &split_text(&plan))?;
    Ok(model)
}

fn eval(c: &RunConfig, dataset: &Dataset, model: &PipelineModel, out: &Path) -> Result<String> {
    let plan = plan_for(dataset, c)?;
    let report = evaluate(model, dataset, &plan, &c.pipeline()?)?;
    write_report(&report, out)?;
    let t = &report.test;
    Ok(format!(
        "force median error {:.1} mN (RG {:.1} mN); UNION localization median error {:.2} mm (RG {:.2} mm)",
        t.force.median * 1000.0,
        t.rg_force_error.median * 1000.0,
        t.loc[4].median,
        t.rg_loc_error.median
    ))
}

/// Published sigmoid coefficients and stated threshold, echoed next to the fit.
const PUBLISHED_A: f64 = 2.2;
const PUBLISHED_B: f64 = 12.4;
const PUBLISHED_THRESHOLD75_MN: f64 = 50.6;

fn vonfrey(c: &RunConfig, out: &Path) -> Result<String> {
    let layout = c.layout()?;
    let params = c.field_params(&layout)?;
    let result = run_vonfrey_protocol(&layout, &params, &c.vonfrey(), c.seed)?;
    let mut trials = String::from("subject,filament_g,force_mN,x_mm,y_mm,detected\n");
    for t in &result.trials {
        let _ = writeln!(
            trials,
            "{},{},{},{},{},{}",
            t.subject,
            t.filament_g,
            cell(t.force_mn, 6),
            cell(t.location.x, 6),
            cell(t.location.y, 6),
            u8::from(t.detected)
        );
    }
    write_text(&out.join("trials.csv"), &trials)?;
    let mut rates = String::from("filament_g,force_mN,trials,rate\n");
    for r in &result.rates {
        let _ = writeln!(rates, "{},{},{},{}", r.filament_g, cell(r.force_mn, 6), r.trials, cell(r.rate, 6));
    }
    write_text(&out.join("rates.csv"), &rates)?;

    let forces: Vec<f64> = result.rates.iter().map(|r| r.force_mn).collect();
    let values: Vec<f64> = result.rates.iter().map(|r| r.rate).collect();
    let fit = fit_sigmoid_with(&forces, &values, FitOptions { fit_on_log_force: c.fit_on_log_force })?;
    let t75 = if fit.identifiable { threshold_at(&fit, 0.75).map(|v| cell(v, 6))? } else { String::new() };
    let published = SigmoidAb { a: PUBLISHED_A, b: PUBLISHED_B };
    let text = key_values([
        ("a", cell(fit.a, 6)),
        ("b", cell(fit.b, 6)),
        ("residual", format!("{:.6e}", fit.residual)),
        ("converged", fit.converged.to_string()),
        ("identifiable", fit.identifiable.to_string()),
        ("log_axis", fit.log_axis.to_string()),
        ("threshold75_mN", t75.clone()),
        ("published.a", PUBLISHED_A.to_string()),
        ("published.b", PUBLISHED_B.to_string()),
        ("published.threshold75_from_ab_mN", cell(published.threshold75(), 6)),
        ("published.threshold75_stated_mN", PUBLISHED_THRESHOLD75_MN.to_string()),
    ]);
    write_text(&out.join("fit.txt"), &text)?;
    Ok(format!("sigmoid a={:.4} b={:.3} threshold75={t75} mN", fit.a, fit.b))
}

struct SigmoidAb {
    a: f64,
    b: f64,
}

impl SigmoidAb {
    fn threshold75(&self) -> f64 {
        self.b + 3f64.ln() / self.a
    }
}

/// Reads the 16 shift columns of a frames CSV, in row order.
pub fn load_frames_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |row: usize, message: String| Error::Parse { path: path.to_path_buf(), row, message };
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().ok_or_else(|| perr(1, "empty file".into()))?.split(',').map(str::trim).collect();
    let idx = (1..=SENSOR_COUNT)
        .map(|i| {
            let name = format!("dl{i:02}_nm");
            head.iter().position(|h| *h == name).ok_or_else(|| perr(1, format!("missing column {name}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut frames = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let frame = idx
            .iter()
            .map(|&k| {
                let cell = cells.get(k).ok_or_else(|| perr(i + 2, format!("missing column {}", head[k])))?;
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| perr(i + 2, format!("column {}: non-numeric cell {cell:?}", head[k])))
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(frame);
    }
    Ok(frames)
}

fn infer(model: &PipelineModel, frames: &[Vec<f64>]) -> Result<String> {
    let w = model.window;
    let mut windows = Vec::with_capacity(frames.len() * w * SENSOR_COUNT);
    for f in 0..frames.len() {
        for k in 0..w {
            windows.extend_from_slice(&frames[(f + k + 1).saturating_sub(w)]);
        }
    }
    let estimates = if frames.is_empty() { Vec::new() } else { model.infer_batch(&windows)? };
    let mut out = String::from("row,contact,force_n,x_mm,y_mm\n");
    for (i, e) in estimates.iter().enumerate() {
        match e {
            ContactEstimate::NoContact => {
                let _ = writeln!(out, "{},0,,,", i + 1);
            }
            ContactEstimate::Contact { force, point } => {
                let _ = writeln!(out, "{},1,{},{},{}", i + 1, cell(*force, 6), cell(point.x, 6), cell(point.y, 6));
            }
        }
    }
    Ok(out)
}

/// Executes a parsed command; returns a one-line summary for stdout.
pub fn execute(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Gen { common, n, gzip } => {
            let (mut c, out) = resolve(&common, &[("n", n.map(|v| v.to_string()))])?;
            c.gzip |= gzip;
            let (path, d) = gen(&c, &out)?;
            write_manifest(&out, "gen", &c)?;
            Ok(format!(
                "wrote {} indentations ({} frames) to {}",
                d.indentations.len(),
                d.frame_count(),
                path.display()
            ))
        }
        Command::Train { common, dataset } => {
            let (c, out) = resolve(&common, &[("dataset", path_arg(&dataset))])?;
            let d = load_dataset(&c)?;
            train(&c, &d, &out)?;
            write_manifest(&out, "train", &c)?;
            Ok(format!("model bundle written to {}", out.display()))
        }
        Command::Eval { common, dataset, model } => {
            let (c, out) = resolve(&common, &[("dataset", path_arg(&dataset)), ("model", path_arg(&model))])?;
            let m = load_model(&c)?;
            let d = load_dataset(&c)?;
            let summary = eval(&c, &d, &m, &out)?;
            write_manifest(&out, "eval", &c)?;
            Ok(summary)
        }
        Command::Rf { common } => {
            let (c, out) = resolve(&common, &[])?;
            let layout = c.layout()?;
            let rf = receptive_field_report(&layout, &c.field_params(&layout)?)?;
            write_receptive(&rf, &out)?;
            write_manifest(&out, "rf", &c)?;
            Ok(format!("median hot-spot area {:.2} mm², lobes {:?}", rf.median_area, rf.lobe_counts))
        }
        Command::Vonfrey { common } => {
            let (c, out) = resolve(&common, &[])?;
            let s = vonfrey(&c, &out)?;
            write_manifest(&out, "vonfrey", &c)?;
            Ok(s)
        }
        Command::Infer { common, model, input } => {
            let (c, out) = resolve(&common, &[("model", path_arg(&model))])?;
            let m = load_model(&c)?;
            let frames = load_frames_csv(&input)?;
            write_text(&out.join("predictions.csv"), &infer(&m, &frames)?)?;
            write_manifest(&out, "infer", &c)?;
            Ok(format!("{} frames processed", frames.len()))
        }
        Command::Report { common, n } => {
            let (mut c, out) = resolve(&common, &[("n", n.map(|v| v.to_string()))])?;
            let (path, d) = gen(&c, &out.join("data"))?;
            c.dataset = Some(path);
            let model_dir = out.join("model");
            let m = train(&c, &d, &model_dir)?;
            c.model = Some(model_dir);
            let summary = eval(&c, &d, &m, &out.join("report"))?;
            write_manifest(&out, "report", &c)?;
            Ok(summary)
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 success, 1 validation/usage error, 2 I/O error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
