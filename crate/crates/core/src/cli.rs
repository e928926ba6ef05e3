//! Command-line front end.
//!
//! Every command writes its files and a `manifest.json` (argv, resolved
//! config, seed, versions) into `--out`. `pfformer rerun <manifest>` replays
//! the recorded argv, optionally into another directory.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::config::{PfConfig, KEYS};
use crate::dataio::{compute_stats, gen_synthetic, load_csv, write_csv, AlignedSeries, ColumnMap, SynthParams};
use crate::error::{Error, Result};
use crate::evalkit::{plot_tsv, sweep, SweepAxis};
use crate::model::CHECKPOINT_VERSION;
use crate::pipeline::{evaluate, load_series, resolve, run_training, test_segment, train_and_evaluate, TrainedModel};
use crate::sampler::{fit_gmm, GmmOptions};

pub const MANIFEST: &str = "manifest.json";

#[derive(Parser, Debug)]
#[command(name = "pfformer", version, about = "Position-free transformer forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic rain/stream dataset as one CSV per series.
    GenSynth(GenSynthArgs),
    /// Moment statistics of one CSV series.
    Stats(StatsArgs),
    /// Fit the oversampling mixture to one CSV series.
    FitGmm(FitGmmArgs),
    /// Train, checkpoint and evaluate on the test segment.
    Train(TrainArgs),
    /// Forecast from a checkpoint at one issue point.
    Predict(PredictArgs),
    /// Rolling evaluation of a checkpoint on the test segment.
    Evaluate(EvaluateArgs),
    /// One training run per value of a config axis.
    Sweep(SweepArgs),
    /// Replay the command recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Config file of `dotted.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set train.alpha=2.0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Target series CSV.
    #[arg(long)]
    target: PathBuf,
    /// Auxiliary series CSV. Repeatable; order is preserved.
    #[arg(long = "aux")]
    aux: Vec<PathBuf>,
    #[arg(long, default_value = "timestamp")]
    timestamp_column: String,
    #[arg(long, default_value = "value")]
    value_column: String,
}

#[derive(Args, Debug)]
struct GenSynthArgs {
    #[arg(long, default_value_t = 50_000)]
    length: usize,
    /// Series count including the target.
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.002)]
    peak_rate: f64,
    #[arg(long, default_value_t = 0.95)]
    decay: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct StatsArgs {
    input: PathBuf,
    #[arg(long, default_value = "timestamp")]
    timestamp_column: String,
    #[arg(long, default_value = "value")]
    value_column: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct FitGmmArgs {
    input: PathBuf,
    #[arg(long, default_value = "timestamp")]
    timestamp_column: String,
    #[arg(long, default_value = "value")]
    value_column: String,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Dataset name recorded in the report.
    #[arg(long, default_value = "data")]
    dataset: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Grid index of the issue point; defaults to the last one.
    #[arg(long)]
    issue: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Issue forecasts a full horizon apart.
    #[arg(long)]
    single_shot: bool,
    #[arg(long, default_value = "data")]
    dataset: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// One of os_pct, s_efe, alpha, embedding_mode.
    #[arg(long)]
    axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "data")]
    dataset: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct RerunArgs {
    manifest: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::GenSynth(a) => gen_synth_cmd(a, argv),
        Command::Stats(a) => stats_cmd(a, argv),
        Command::FitGmm(a) => fit_gmm_cmd(a, argv),
        Command::Train(a) => train_cmd(a, argv),
        Command::Predict(a) => predict_cmd(a, argv),
        Command::Evaluate(a) => evaluate_cmd(a, argv),
        Command::Sweep(a) => sweep_cmd(a, argv),
        Command::Rerun(a) => rerun_cmd(a),
    }
}

impl ConfigArgs {
    fn build(&self) -> Result<PfConfig> {
        let mut cfg = PfConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg.apply_text(&text).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?;
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl DataArgs {
    fn columns(&self) -> ColumnMap {
        ColumnMap {
            timestamp: self.timestamp_column.clone(),
            value: self.value_column.clone(),
        }
    }

    fn load(&self) -> Result<AlignedSeries> {
        load_series(&self.target, &self.aux, &self.columns())
    }
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

fn write(out: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(out.join(name), contents)?;
    Ok(())
}

fn config_json(cfg: &PfConfig) -> Value {
    let map: Map<String, Value> = KEYS
        .iter()
        .map(|k| (k.to_string(), Value::String(cfg.get(k).unwrap_or_default())))
        .collect();
    Value::Object(map)
}

fn write_manifest(out: &Path, argv: &[String], cfg: Option<&PfConfig>, seed: u64, outputs: &[&str]) -> Result<()> {
    let manifest = json!({
        "argv": argv,
        "seed": seed,
        "config": cfg.map(config_json),
        "outputs": outputs,
        "versions": {
            "pfformer": env!("CARGO_PKG_VERSION"),
            "checkpoint_format": CHECKPOINT_VERSION,
        },
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Data(e.to_string()))?;
    write(out, MANIFEST, &(text + "\n"))
}

fn values_of(path: &Path, timestamp: &str, value: &str) -> Result<Vec<f64>> {
    let columns = ColumnMap {
        timestamp: timestamp.into(),
        value: value.into(),
    };
    let raw = load_csv(path, &columns)?;
    let values: Vec<f64> = raw.records.iter().filter_map(|(_, v)| *v).collect();
    if values.is_empty() {
        return Err(Error::Data(format!("{} has no readings", path.display())));
    }
    Ok(values)
}

fn gen_synth_cmd(a: GenSynthArgs, argv: &[String]) -> Result<()> {
    let out = &a.out.out;
    prepare_out(out)?;
    let s = gen_synthetic(&SynthParams {
        seed: a.seed,
        length: a.length,
        m: a.m,
        peak_rate: a.peak_rate,
        decay: a.decay,
        ..Default::default()
    })?;
    let mut outputs = vec!["target.csv".to_string()];
    write_csv(&out.join("target.csv"), s.start, s.step, &s.target)?;
    for i in 1..s.m() {
        let name = format!("aux_{i}.csv");
        write_csv(&out.join(&name), s.start, s.step, s.series(i))?;
        outputs.push(name);
    }
    let names: Vec<&str> = outputs.iter().map(String::as_str).collect();
    write_manifest(out, argv, None, a.seed, &names)?;
    println!("wrote {} series of {} points to {}", s.m(), s.len(), out.display());
    Ok(())
}

fn stats_cmd(a: StatsArgs, argv: &[String]) -> Result<()> {
    let values = values_of(&a.input, &a.timestamp_column, &a.value_column)?;
    let report = format!("{}\n", compute_stats(&values)?);
    prepare_out(&a.out.out)?;
    write(&a.out.out, "stats.txt", &report)?;
    write_manifest(&a.out.out, argv, None, 0, &["stats.txt"])?;
    print!("{report}");
    Ok(())
}

fn fit_gmm_cmd(a: FitGmmArgs, argv: &[String]) -> Result<()> {
    let cfg = a.config.build()?;
    let values = values_of(&a.input, &a.timestamp_column, &a.value_column)?;
    let opts = GmmOptions {
        max_iter: cfg.sampler.max_iter,
        tol: cfg.sampler.tol,
        seed: cfg.seed,
    };
    let gmm = fit_gmm(&values, cfg.sampler.components, opts)?;
    let z = gmm.highest_mean();
    let report = format!(
        "{gmm}\nz\t{z:.6}\neta\t{}\nthreshold\t{:.6}\n",
        cfg.sampler.policy.eta,
        cfg.sampler.policy.eta * z
    );
    prepare_out(&a.out.out)?;
    write(&a.out.out, "gmm.txt", &report)?;
    write_manifest(&a.out.out, argv, Some(&cfg), cfg.seed, &["gmm.txt"])?;
    print!("{report}");
    Ok(())
}

fn train_cmd(a: TrainArgs, argv: &[String]) -> Result<()> {
    let series = a.data.load()?;
    let cfg = resolve(&a.config.build()?, &series)?;
    let out = &a.out.out;
    prepare_out(out)?;
    let (run, report) = train_and_evaluate(&series, &cfg, &a.dataset)?;
    run.trained.save(&out.join("model.ckpt"))?;
    write(out, "history.tsv", &run.history.to_tsv())?;
    write(out, "report.txt", &report.to_text())?;
    write(out, "issuances.tsv", &report.issuances_tsv())?;
    write(out, "config.txt", &cfg.to_text())?;
    write_manifest(
        out,
        argv,
        Some(&cfg),
        cfg.seed,
        &["model.ckpt", "history.tsv", "report.txt", "issuances.tsv", "config.txt"],
    )?;
    print!("{}", report.to_text());
    Ok(())
}

fn predict_cmd(a: PredictArgs, argv: &[String]) -> Result<()> {
    let trained = TrainedModel::load(&a.checkpoint)?;
    let series = a.data.load()?;
    if series.is_empty() {
        return Err(Error::Data("empty series".into()));
    }
    let issue = a.issue.unwrap_or(series.len() - 1);
    if issue >= series.len() {
        return Err(Error::Index {
            index: issue,
            len: series.len(),
        });
    }
    let forecast = trained.forecast_at(&series, issue)?;
    let out = &a.out.out;
    prepare_out(out)?;
    let first = series.timestamp(issue) + series.step;
    write_csv(&out.join("forecast.csv"), first, series.step, &forecast)?;
    write_manifest(out, argv, Some(&trained.cfg), trained.cfg.seed, &["forecast.csv"])?;
    println!("issued at index {issue}; wrote {} steps", forecast.len());
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, argv: &[String]) -> Result<()> {
    let mut trained = TrainedModel::load(&a.checkpoint)?;
    if a.single_shot {
        trained.cfg.eval.single_shot = true;
    }
    let series = a.data.load()?;
    let report = evaluate(&trained, &test_segment(&series, &trained.cfg), &a.dataset)?;
    let out = &a.out.out;
    prepare_out(out)?;
    write(out, "report.txt", &report.to_text())?;
    write(out, "issuances.tsv", &report.issuances_tsv())?;
    write_manifest(out, argv, Some(&trained.cfg), trained.cfg.seed, &["report.txt", "issuances.tsv"])?;
    print!("{}", report.to_text());
    Ok(())
}

fn sweep_cmd(a: SweepArgs, argv: &[String]) -> Result<()> {
    let axis: SweepAxis = a.axis.parse()?;
    let series = a.data.load()?;
    let base = resolve(&a.config.build()?, &series)?;
    let out = &a.out.out;
    prepare_out(out)?;
    let rows = sweep(axis, &a.values, &base, |cfg| {
        let run = run_training(&series, cfg)?;
        evaluate(&run.trained, &test_segment(&series, &run.trained.cfg), &a.dataset)
    })?;
    let table = plot_tsv(&rows);
    write(out, "sweep.tsv", &table)?;
    write_manifest(out, argv, Some(&base), base.seed, &["sweep.tsv"])?;
    print!("{table}");
    Ok(())
}

/// `argv` with its `--out` value replaced, or appended when absent.
fn redirect(argv: &[String], out: &Path) -> Vec<String> {
    let out = out.display().to_string();
    let mut result = Vec::with_capacity(argv.len() + 2);
    let mut replaced = false;
    let mut iter = argv.iter();
    while let Some(arg) = iter.next() {
        if arg == "--out" {
            iter.next();
            result.push("--out".to_string());
            result.push(out.clone());
            replaced = true;
        } else if arg.starts_with("--out=") {
            result.push(format!("--out={out}"));
            replaced = true;
        } else {
            result.push(arg.clone());
        }
    }
    if !replaced {
        result.push("--out".to_string());
        result.push(out);
    }
    result
}

fn rerun_cmd(a: RerunArgs) -> Result<()> {
    let text = fs::read_to_string(&a.manifest)?;
    let manifest: Value = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", a.manifest.display())))?;
    let argv: Vec<String> = manifest["argv"]
        .as_array()
        .and_then(|v| v.iter().map(|s| s.as_str().map(String::from)).collect())
        .ok_or_else(|| Error::Data(format!("{}: argv missing or malformed", a.manifest.display())))?;
    if argv.get(1).map(String::as_str) == Some("rerun") {
        return Err(Error::Data("manifest records a rerun".into()));
    }
    let argv = match &a.out {
        Some(out) => redirect(&argv, out),
        None => argv,
    };
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::Config(format!("recorded argv: {e}")))?;
    dispatch(cli.command, &argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn redirect_replaces_or_appends_out() {
        let p = Path::new("/tmp/x");
        assert_eq!(
            redirect(&strings(&["pf", "stats", "a.csv", "--out", "old"]), p),
            strings(&["pf", "stats", "a.csv", "--out", "/tmp/x"])
        );
        assert_eq!(
            redirect(&strings(&["pf", "stats", "--out=old", "a.csv"]), p),
            strings(&["pf", "stats", "--out=/tmp/x", "a.csv"])
        );
        assert_eq!(
            redirect(&strings(&["pf", "stats", "a.csv"]), p),
            strings(&["pf", "stats", "a.csv", "--out", "/tmp/x"])
        );
    }

    #[test]
    fn usage_errors_exit_1_and_help_exits_0() {
        assert_eq!(run(strings(&["pfformer", "no-such-command"])), 1);
        assert_eq!(run(strings(&["pfformer", "train"])), 1);
        assert_eq!(run(strings(&["pfformer", "--help"])), 0);
    }

    #[test]
    fn bad_set_syntax_is_a_config_error() {
        let args = ConfigArgs {
            config: None,
            overrides: vec!["model.d_model".into()],
        };
        assert!(matches!(args.build(), Err(Error::Config(_))));
    }
}
