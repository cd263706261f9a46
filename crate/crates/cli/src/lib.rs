//! Command-line driver: argument resolution, run execution and manifests.

pub mod args;
pub mod config;
pub mod error;
pub mod manifest;
pub mod parse;
pub mod run;

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

pub use args::Cli;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use manifest::RunManifest;

use manifest::{digest_file, sha256_hex, FileDigest, Versions};

pub const MANIFEST_NAME: &str = "manifest.json";

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

/// Makes input paths absolute so a manifest can be replayed from anywhere.
fn absolutize(config: &mut RunConfig) -> CliResult<()> {
    let fix = |p: &mut PathBuf| -> CliResult<()> {
        *p = std::fs::canonicalize(&*p).map_err(|e| CliError::io(&*p, e))?;
        Ok(())
    };
    match config {
        RunConfig::NoisePeriodogram(c) => c.inputs.iter_mut().try_for_each(fix),
        RunConfig::Fit(c) => fix(&mut c.measured),
        _ => Ok(()),
    }
}

/// Executes `config`, writes its outputs and manifest into `out_dir`, and
/// returns the manifest with the run summary.
pub fn run_and_record(mut config: RunConfig, out_dir: &Path) -> CliResult<(RunManifest, Value)> {
    absolutize(&mut config)?;
    let started_at = now();
    let inputs = config.inputs().iter().map(|p| digest_file(p)).collect::<CliResult<Vec<_>>>()?;
    let outputs = run::execute(&config)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut digests = Vec::new();
    for (name, bytes) in &outputs.files {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        digests.push(FileDigest { path: PathBuf::from(name), sha256: sha256_hex(bytes) });
    }
    let manifest = RunManifest {
        seed: config.seed(),
        run: config,
        versions: Versions::current(),
        inputs,
        outputs: digests,
        started_at,
        finished_at: now(),
    };
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| CliError::io(&path, e))?;
    Ok((manifest, outputs.summary))
}

/// Re-executes a manifest into `out_dir` and checks inputs and outputs
/// against the recorded digests.
pub fn replay(manifest: &RunManifest, out_dir: &Path) -> CliResult<Value> {
    for input in &manifest.inputs {
        let now = digest_file(&input.path)?;
        if now.sha256 != input.sha256 {
            return Err(CliError::Replay(format!("input {} changed since the recorded run", input.path.display())));
        }
    }
    let (fresh, summary) = run_and_record(manifest.run.clone(), out_dir)?;
    let mismatched: Vec<String> = manifest
        .outputs
        .iter()
        .filter(|o| !fresh.outputs.iter().any(|f| f.path == o.path && f.sha256 == o.sha256))
        .map(|o| o.path.display().to_string())
        .collect();
    if !mismatched.is_empty() || fresh.outputs.len() != manifest.outputs.len() {
        return Err(CliError::Replay(format!("outputs differ: {}", mismatched.join(", "))));
    }
    Ok(json!({ "replayed": manifest.run.name(), "outputs_identical": fresh.outputs.len(), "summary": summary }))
}

/// Runs an already-parsed command line.
pub fn dispatch(cli: &Cli) -> CliResult<Value> {
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("ddsim-out"));
    if let Some(path) = &cli.manifest {
        if cli.command.is_some() {
            return Err(CliError::Usage("--manifest replays a recorded run; do not pass a subcommand".into()));
        }
        return replay(&RunManifest::read(path)?, &out_dir);
    }
    let command = cli.command.as_ref().ok_or_else(|| CliError::Usage("missing subcommand (see --help)".into()))?;
    let file = match &cli.config {
        Some(p) => args::read_config_file(p)?,
        None => Default::default(),
    };
    let config = args::resolve(command, file, cli.seed)?;
    let (manifest, summary) = run_and_record(config, &out_dir)?;
    Ok(json!({
        "command": manifest.run.name(),
        "out": out_dir,
        "outputs": manifest.outputs.iter().map(|o| o.path.clone()).collect::<Vec<_>>(),
        "summary": summary,
    }))
}
