mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use cfprobe::eval::{self, curve_to_csv, load_dataset, EvalError, Method};
use cfprobe::{BackendKind, DocumentReport, Pipeline, ProbeKind};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use toml::Value;

use config::{apply_override, read_table, set_path, CliConfig};

#[derive(Parser, Debug)]
#[command(name = "cfprobe", version, about = "Detect and hedge hallucinated statements with counterfactual probes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every statement of a plain-text document.
    Detect(Common),
    /// Hedge the flagged statements of a detect report and rescore them.
    Mitigate(Common),
    /// Metrics with bootstrap intervals on a labelled JSON-lines dataset.
    Evaluate(Common),
    /// Full-model F1 and the F1 with each probe kind disabled.
    Ablate(Common),
    /// Grid-search the threshold and sensitivity weight on a labelled dataset.
    Calibrate(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    input: PathBuf,
    /// Write the report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// TOML file mirroring the run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set weights.threshold=0.6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = ["mock", "remote"])]
    backend: Option<String>,
    /// Mock knowledge base (JSON lines).
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Probes per statement.
    #[arg(long)]
    k: Option<usize>,
    /// Decision threshold.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long = "disable-kind", value_name = "KIND")]
    disable_kind: Vec<ProbeKind>,
    /// Evaluate a baseline instead of the detector.
    #[arg(long, value_name = "METHOD")]
    baseline: Option<Method>,
    /// Calibration curve CSV (evaluate only).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{stage}: {source:#}")]
    Runtime { stage: &'static str, source: anyhow::Error },
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(stage: &'static str) -> impl FnOnce(anyhow::Error) -> CliError {
    move |source| CliError::Runtime { stage, source }
}

impl Common {
    fn resolve(&self) -> Result<CliConfig, CliError> {
        let mut table = CliConfig::default().to_table();
        if let Some(path) = &self.config {
            merge(&mut table, read_table(path).map_err(usage)?);
        }
        for assignment in &self.set {
            apply_override(&mut table, assignment).map_err(usage)?;
        }
        let mut flags: Vec<(&str, Value)> = Vec::new();
        if let Some(seed) = self.seed {
            let seed = i64::try_from(seed).map_err(|_| usage("--seed must fit in a signed 64-bit integer"))?;
            flags.push(("seed", Value::Integer(seed)));
        }
        if let Some(b) = &self.backend {
            flags.push(("backend.kind", Value::String(b.clone())));
        }
        if let Some(kb) = &self.kb {
            flags.push(("backend.mock.kb_path", Value::String(kb.display().to_string())));
        }
        if let Some(k) = self.k {
            flags.push(("probes_per_statement", Value::Integer(k as i64)));
        }
        if let Some(tau) = self.tau {
            flags.push(("weights.threshold", Value::Float(tau)));
        }
        if !self.disable_kind.is_empty() {
            let kinds = self.disable_kind.iter().map(|k| Value::String(k.as_str().into())).collect();
            flags.push(("disabled_kinds", Value::Array(kinds)));
        }
        if let Some(m) = self.baseline {
            flags.push(("evaluation.method", Value::String(m.as_str().into())));
        }
        if let Some(c) = &self.curve {
            flags.push(("evaluation.curve_path", Value::String(c.display().to_string())));
        }
        for (key, value) in flags {
            set_path(&mut table, key, value).map_err(usage)?;
        }
        let config = CliConfig::from_table(table).map_err(usage)?;
        config.run.validate().map_err(usage)?;
        Ok(config)
    }
}

/// Recursive merge; tables combine, everything else is replaced.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("cannot write {}", p.display()))
            .map_err(runtime("output")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn pipeline(config: &CliConfig) -> Result<Pipeline, CliError> {
    if config.run.backend.kind == BackendKind::Remote && std::env::var(cfprobe::backend::API_KEY_ENV).is_err() {
        log::warn!("{} is not set; remote requests will be sent without credentials", cfprobe::backend::API_KEY_ENV);
    }
    Pipeline::new(config.run.clone()).map_err(|e| runtime("backend setup")(e.into()))
}

fn document_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "document".into())
}

fn finish_report(report: &DocumentReport, output: Option<&Path>, stage: &'static str) -> Result<(), CliError> {
    write_output(output, &to_json(report))?;
    if report.partial {
        let reason = report
            .statements
            .iter()
            .filter_map(|s| s.error.as_deref())
            .chain(report.mitigations.iter().filter_map(|m| m.error.as_deref()))
            .last()
            .unwrap_or("backend failure");
        return Err(runtime(stage)(anyhow::anyhow!("run aborted, partial report written: {reason}")));
    }
    Ok(())
}

fn dataset(path: &Path) -> Result<Vec<eval::LabeledExample>, CliError> {
    load_dataset(path).map_err(|e| match e {
        EvalError::MalformedRecord { .. } | EvalError::MissingFile(_) => usage(e),
        other => runtime("load dataset")(other.into()),
    })
}

fn run(command: &Command) -> Result<(), CliError> {
    let (Command::Detect(c) | Command::Mitigate(c) | Command::Evaluate(c) | Command::Ablate(c) | Command::Calibrate(c)) =
        command;
    let config = c.resolve()?;
    if c.dry_run {
        print!("{}", config.to_toml());
        return Ok(());
    }
    if !c.input.exists() {
        return Err(usage(format!("input {} does not exist", c.input.display())));
    }
    let output = c.output.as_deref();
    match command {
        Command::Detect(_) => {
            let text = std::fs::read_to_string(&c.input)
                .with_context(|| format!("cannot read {}", c.input.display()))
                .map_err(runtime("read input"))?;
            let p = pipeline(&config)?;
            let report = p.run(&document_id(&c.input), &text).map_err(|e| runtime("mitigate")(e.into()))?;
            finish_report(&report, output, "detect")
        }
        Command::Mitigate(_) => {
            let text = std::fs::read_to_string(&c.input)
                .with_context(|| format!("cannot read {}", c.input.display()))
                .map_err(runtime("read input"))?;
            let report: DocumentReport =
                serde_json::from_str(&text).map_err(|e| usage(format!("{} is not a detect report: {e}", c.input.display())))?;
            let p = pipeline(&config)?;
            let report = p.run_mitigate(report).map_err(|e| runtime("mitigate")(e.into()))?;
            finish_report(&report, output, "mitigate")
        }
        Command::Evaluate(_) => {
            let examples = dataset(&c.input)?;
            let p = pipeline(&config)?;
            let result = eval::evaluate(&examples, &p, config.evaluation.method, &config.evaluation.settings())
                .map_err(|e| runtime("evaluate")(e.into()))?;
            if let Some(path) = &config.evaluation.curve_path {
                std::fs::write(path, curve_to_csv(&result.curve))
                    .with_context(|| format!("cannot write {}", path.display()))
                    .map_err(runtime("output"))?;
            }
            write_output(output, &to_json(&result))
        }
        Command::Ablate(_) => {
            let examples = dataset(&c.input)?;
            let p = pipeline(&config)?;
            let report = eval::run_ablation(&examples, &p).map_err(|e| runtime("ablate")(e.into()))?;
            for (name, f1, delta) in report.table() {
                match delta {
                    Some(d) => log::info!("{name}: F1 {f1:.3} ({d:+.3})"),
                    None => log::info!("{name}: F1 {f1:.3}"),
                }
            }
            write_output(output, &to_json(&report))
        }
        Command::Calibrate(_) => {
            let examples = dataset(&c.input)?;
            let p = pipeline(&config)?;
            let scored = eval::score_examples(&examples, &p).map_err(|e| runtime("score")(e.into()))?;
            let calibration = eval::calibrate(&scored).map_err(|e| match e {
                EvalError::SingleClassValidation => usage(e),
                other => runtime("calibrate")(other.into()),
            })?;
            write_output(output, &to_json(&calibration))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("error: {e}");
            eprintln!("usage: cfprobe <detect|mitigate|evaluate|ablate|calibrate> --input <PATH> [OPTIONS]");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
