//! `mpqc`: runs configured experiments on the multiparty delegated
//! computing simulator and writes transcripts, a JSON report and a summary.

mod config;
mod modes;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::Parser;

use config::{validate, ExperimentConfig};
use modes::RunOutput;

const EXIT_CONFIG: u8 = 1;
const EXIT_THRESHOLD: u8 = 2;
const EXIT_ABORT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "mpqc", version, about = "Multiparty delegated quantum computing experiments")]
struct Args {
    /// Experiment description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out`, then `./out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Log amplitudes and reconstructed client secrets. Not blind.
    #[arg(long)]
    debug_secrets: bool,
    /// Worker threads for trials.
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(args: &Args) -> Result<ExperimentConfig, Vec<String>> {
    let text = fs::read_to_string(&args.config).map_err(|e| vec![format!("{}: {e}", args.config.display())])?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| vec![format!("{}: {e}", args.config.display())])?;
    if args.seed.is_some() {
        config.seed = args.seed;
    }
    let violations = validate(&config);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(violations)
    }
}

fn summary(config: &ExperimentConfig, out: &RunOutput, debug: bool) -> String {
    let r = &out.report;
    let q = config.n_clients * (config.n_columns - 1);
    let mut s = String::new();
    if debug {
        s.push_str("!! DEBUG SECRETS ENABLED: transcript and secrets.json reveal client data !!\n\n");
    }
    let header = ["mode", "n", "q", "trials", "metric", "value", "threshold", "pass"];
    let row = [
        r.mode.to_string(),
        config.n_clients.to_string(),
        q.to_string(),
        r.trials.to_string(),
        r.metric.clone(),
        format!("{:.6}", r.value),
        r.threshold.clone(),
        if r.passed { "PASS" } else { "FAIL" }.to_string(),
    ];
    let widths: Vec<usize> = header.iter().zip(&row).map(|(h, v)| h.len().max(v.len())).collect();
    for cells in [header.map(String::from).to_vec(), row.to_vec()] {
        let line: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        writeln!(s, "{}", line.join("  ").trim_end()).unwrap();
    }
    writeln!(s, "\nscenarios: {}", r.scenario_ids.join(" | ")).unwrap();
    writeln!(s, "seed: {}  confidence radius: {:.6}", r.seed, r.confidence_radius).unwrap();
    for (k, v) in &out.details {
        writeln!(s, "  {k}: {v}").unwrap();
    }
    s
}

fn write_artifacts(dir: &Path, config: &ExperimentConfig, out: &RunOutput, args: &Args) -> std::io::Result<String> {
    fs::create_dir_all(dir)?;
    let mut transcript = out.transcript.join("\n");
    if !transcript.is_empty() {
        transcript.push('\n');
    }
    fs::write(dir.join("transcript.jsonl"), transcript)?;
    let report = serde_json::to_string_pretty(&out.report).expect("report serializes");
    fs::write(dir.join("report.json"), report + "\n")?;
    let text = summary(config, out, args.debug_secrets);
    fs::write(dir.join("summary.txt"), &text)?;
    if let Some(secrets) = &out.secrets {
        fs::write(
            dir.join("secrets.json"),
            serde_json::to_string_pretty(secrets).expect("json") + "\n",
        )?;
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let metadata = serde_json::json!({
        "timestamp_unix": timestamp,
        "version": env!("CARGO_PKG_VERSION"),
        "config": args.config,
        "jobs": args.jobs,
        "debug_secrets": args.debug_secrets,
    });
    fs::write(
        dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata).expect("json") + "\n",
    )?;
    Ok(text)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load(&args) {
        Ok(c) => c,
        Err(violations) => {
            for v in violations {
                eprintln!("config error: {v}");
            }
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = args.jobs {
        pool = pool.num_threads(jobs);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: --jobs: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out = match pool.install(|| modes::run(&config, args.debug_secrets)) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let dir = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match write_artifacts(&dir, &config, &out, &args) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("cannot write to {}: {e}", dir.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    if out.aborted {
        ExitCode::from(EXIT_ABORT)
    } else if !out.report.passed {
        ExitCode::from(EXIT_THRESHOLD)
    } else {
        ExitCode::SUCCESS
    }
}
