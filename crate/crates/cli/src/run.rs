//! Runs one experiment and writes `<study>.csv`, `<study>.json` and
//! `manifest.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{self, Experiment};
use crate::error::CliError;
use crate::studies::{execute, StudyOutput};

#[derive(Debug, Clone, Serialize)]
pub struct Phase {
    pub phase: &'static str,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub outputs: Vec<OutputFile>,
    pub failures: Vec<String>,
    pub output: StudyOutput,
}

pub const DEFAULT_OUT_DIR: &str = "out";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<OutputFile, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(OutputFile { file: name.into(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) })
}

/// Loads, validates and runs `config_path`. Study check failures still
/// write every output and are returned as [`CliError::Assertion`] after.
pub fn run(config_path: &Path, out: Option<&Path>, threads: Option<usize>) -> Result<RunSummary, CliError> {
    let t0 = Instant::now();
    let exp = config::load(config_path)?;
    let validate = t0.elapsed().as_secs_f64();
    run_experiment(&exp, config_path, out, threads, validate)
}

pub fn run_experiment(
    exp: &Experiment,
    config_path: &Path,
    out: Option<&Path>,
    threads: Option<usize>,
    validate_seconds: f64,
) -> Result<RunSummary, CliError> {
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| exp.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));

    let t1 = Instant::now();
    let (output, workers) = match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            pool.install(|| (execute(exp), rayon::current_num_threads()))
        }
        None => (execute(exp), rayon::current_num_threads()),
    };
    let output = output?;
    let compute = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let name = exp.study.name();
    let report = serde_json::to_string_pretty(&output.report).expect("reports serialize") + "\n";
    let outputs = vec![
        write(&out_dir, &format!("{name}.csv"), output.csv.as_bytes())?,
        write(&out_dir, &format!("{name}.json"), report.as_bytes())?,
    ];
    let write_seconds = t2.elapsed().as_secs_f64();

    let phases = [
        Phase { phase: "validate", seconds: validate_seconds },
        Phase { phase: "compute", seconds: compute },
        Phase { phase: "write", seconds: write_seconds },
    ];
    let manifest: Value = json!({
        "config_path": config_path.display().to_string(),
        "config": exp.echo,
        "study": name,
        "seed": exp.seed,
        "versions": {
            "mtrace-cli": env!("CARGO_PKG_VERSION"),
            "mtrace-core": mtrace_core::VERSION,
        },
        "threads": workers,
        "phases": phases,
        "outputs": outputs,
        "status": if output.failures.is_empty() { "ok" } else { "assertion_failed" },
        "failures": output.failures,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    write(&out_dir, "manifest.json", text.as_bytes())?;

    let failures = output.failures.clone();
    let summary = RunSummary { out_dir, outputs, failures, output };
    if !summary.failures.is_empty() {
        return Err(CliError::Assertion(summary.failures.join("; ")));
    }
    Ok(summary)
}
