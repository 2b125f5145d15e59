//! The `run`, `replicate` and `sequence` commands.

use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use gtmcmc::io::{format_float, write_ensemble_csv, write_stages_csv};
use gtmcmc::sampler::ReplicateSummary;
use gtmcmc::{
    run_gtmcmc, run_replicates, run_sequence, run_sequence_independent, RunResult, SamplerConfig, SequenceOutcome,
    StageRecord,
};
use serde_json::{json, Value};

use crate::config::{Baseline, ExperimentConfig, OutputSection};
use crate::{exit_code, CliError};

/// Overrides taken from the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub replicates: Option<usize>,
    pub baseline: Option<Baseline>,
}

/// Exclusive claim on an output directory; released on drop.
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::other(format!(
                "output directory {} is in use (remove {} if no other run is active)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::other(format!("{}: {e}", path.display())))
}

fn write_stages(dir: &Path, stages: &[StageRecord<f64>]) -> Result<(), CliError> {
    let mut w = create(&dir.join("stages.csv"))?;
    write_stages_csv(&mut w, stages)?;
    w.flush()?;
    Ok(())
}

fn write_run_csvs(dir: &Path, run: &RunResult<f64>) -> Result<(), CliError> {
    write_stages(dir, &run.stages)?;
    let mut w = create(&dir.join("samples.csv"))?;
    write_ensemble_csv(&mut w, &run.final_ensemble)?;
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v).map_err(|e| CliError::other(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn metadata(started: Instant) -> Value {
    let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    json!({
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "finished_unix_seconds": now.as_secs(),
    })
}

fn json_float(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(format_float(v))
    }
}

fn config_echo(cfg: &ExperimentConfig, sampler: &SamplerConfig<f64>) -> Value {
    let mut echo = serde_json::to_value(cfg).unwrap_or(Value::Null);
    echo["sampler"]["seed"] = json!(sampler.seed);
    echo
}

fn output_dir(cfg: &ExperimentConfig, ov: &Overrides, base_dir: &Path) -> PathBuf {
    match &ov.out {
        Some(p) => p.clone(),
        None if cfg.output.dir.is_absolute() => cfg.output.dir.clone(),
        None => base_dir.join(&cfg.output.dir),
    }
}

fn run_summary(run: &RunResult<f64>) -> Value {
    json!({
        "log_evidence": json_float(run.log_evidence),
        "stages": run.stages.len(),
        "density_evaluations": run.total_density_evaluations,
    })
}

/// Single run: stages.csv, samples.csv and summary.json in the output directory.
pub fn cmd_run(cfg: &ExperimentConfig, ov: &Overrides, base_dir: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let problem = cfg.resolve_problem(base_dir)?;
    let sampler = cfg.sampler_config(ov.seed);
    let dir = output_dir(cfg, ov, base_dir);
    let _lock = OutputLock::acquire(&dir)?;
    let out = &cfg.output;

    match run_gtmcmc(&problem.spec, &sampler) {
        Ok(run) => {
            if out.csv() {
                write_run_csvs(&dir, &run)?;
            }
            if out.json() {
                let mut s = run_summary(&run);
                s["command"] = json!("run");
                s["status"] = json!("ok");
                s["seed"] = json!(sampler.seed);
                s["config"] = config_echo(cfg, &sampler);
                s["metadata"] = metadata(started);
                write_json(&dir.join("summary.json"), &s)?;
            }
            Ok(dir)
        }
        Err(e) => {
            write_failure(out, &dir, &e.stages, &e.error, cfg, &sampler, started)?;
            Err(e.error.into())
        }
    }
}

fn write_failure(
    out: &OutputSection,
    dir: &Path,
    stages: &[StageRecord<f64>],
    error: &gtmcmc::Error,
    cfg: &ExperimentConfig,
    sampler: &SamplerConfig<f64>,
    started: Instant,
) -> Result<(), CliError> {
    if out.csv() {
        write_stages(dir, stages)?;
    }
    if out.json() {
        let s = json!({
            "command": cfg.mode.name(),
            "status": "failed",
            "error": error.to_string(),
            "exit_code": exit_code(error),
            "stages": stages.len(),
            "seed": sampler.seed,
            "config": config_echo(cfg, sampler),
            "metadata": metadata(started),
        });
        write_json(&dir.join("summary.json"), &s)?;
    }
    Ok(())
}

fn floats(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|&x| format_float(x))
}

fn write_replicates_csv(path: &Path, s: &ReplicateSummary<f64>, dim: usize) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut header = vec!["index".to_string(), "seed".into(), "stages".into(), "log_evidence".into()];
    header.extend((0..dim).map(|i| format!("mean_{i}")));
    header.extend((0..dim).map(|i| format!("var_{i}")));
    header.push("density_evaluations".into());
    writeln!(w, "{}", header.join(","))?;
    for r in &s.records {
        let mut row = vec![
            r.index.to_string(),
            r.seed.to_string(),
            r.stages.to_string(),
            format_float(r.log_evidence),
        ];
        row.extend(floats(&r.mean));
        row.extend(floats(&r.variance));
        row.push(r.density_evaluations.to_string());
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Replicated runs: replicates.csv plus replicate_summary.json with error metrics.
pub fn cmd_replicate(cfg: &ExperimentConfig, ov: &Overrides, base_dir: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let r = ov.replicates.unwrap_or(cfg.replicates);
    if r < 2 {
        return Err(CliError::config(format!("replicate count must be >= 2, got {r}")));
    }
    let problem = cfg.resolve_problem(base_dir)?;
    let sampler = cfg.sampler_config(ov.seed);
    let dir = output_dir(cfg, ov, base_dir);
    let _lock = OutputLock::acquire(&dir)?;

    let s = run_replicates(&problem.spec, &sampler, r, &problem.truth)?;
    if cfg.output.csv() {
        write_replicates_csv(&dir.join("replicates.csv"), &s, problem.spec.dim())?;
    }
    let mut seeds: Vec<u64> = s
        .records
        .iter()
        .map(|x| x.seed)
        .chain(s.failures.iter().map(|f| f.1))
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    let seeds_distinct = seeds.len() == r;
    if !seeds_distinct {
        return Err(CliError::other("replicate seeds collided"));
    }
    if cfg.output.json() {
        let opt = |v: Option<f64>| v.map(json_float).unwrap_or(Value::Null);
        let summary = json!({
            "command": "replicate",
            "status": "ok",
            "replicates": r,
            "succeeded": s.records.len(),
            "failures": s.failures.iter().map(|(i, seed, e)| json!({
                "index": i, "seed": seed, "error": e.to_string(), "exit_code": exit_code(e),
            })).collect::<Vec<_>>(),
            "seeds_distinct": seeds_distinct,
            "base_seed": sampler.seed,
            "mean_stages": s.mean_stages,
            "mean_log_evidence": json_float(s.mean_log_evidence),
            "truth": {
                "mean": problem.truth.mean,
                "log_evidence": opt(problem.truth.log_evidence),
            },
            "mean_rmse": s.mean_rmse.as_ref().map(|v| v.iter().map(|&x| json_float(x)).collect::<Vec<_>>()),
            "mean_rmse_overall": opt(s.mean_rmse_overall),
            "evidence_nrmse": opt(s.evidence_nrmse),
            "config": config_echo(cfg, &sampler),
            "metadata": metadata(started),
        });
        write_json(&dir.join("replicate_summary.json"), &summary)?;
    }
    Ok(dir)
}

fn write_sequence_outputs(
    dir: &Path,
    out: &OutputSection,
    outcome: &SequenceOutcome<f64>,
    summary_name: &str,
) -> Result<(), CliError> {
    for (i, run) in outcome.results.iter().enumerate() {
        let sub = dir.join(format!("{i:03}"));
        fs::create_dir_all(&sub)?;
        if out.csv() {
            write_run_csvs(&sub, run)?;
        }
        if out.json() {
            write_json(&sub.join("summary.json"), &run_summary(run))?;
        }
    }
    if let Some((i, e)) = &outcome.failure {
        let sub = dir.join(format!("{i:03}"));
        fs::create_dir_all(&sub)?;
        if out.csv() {
            write_stages(&sub, &e.stages)?;
        }
    }
    let mut w = create(&dir.join(summary_name))?;
    writeln!(w, "index,stages,log_evidence,cumulative_density_evaluations")?;
    let mut cumulative = 0usize;
    for (i, run) in outcome.results.iter().enumerate() {
        cumulative += run.total_density_evaluations;
        writeln!(
            w,
            "{i},{},{},{cumulative}",
            run.stages.len(),
            format_float(run.log_evidence)
        )?;
    }
    w.flush()?;
    Ok(())
}

fn sequence_totals(o: &SequenceOutcome<f64>) -> Value {
    json!({
        "completed": o.results.len(),
        "total_stages": o.results.iter().map(|r| r.stages.len()).sum::<usize>(),
        "total_density_evaluations": o.results.iter().map(|r| r.total_density_evaluations).sum::<usize>(),
        "failure": o.failure.as_ref().map(|(i, e)| json!({
            "index": i, "error": e.error.to_string(), "exit_code": exit_code(&e.error),
        })),
    })
}

/// Chained sequence: numbered subdirectories plus sequence_summary.csv; with
/// the TMCMC baseline, the same under `baseline/`.
pub fn cmd_sequence(cfg: &ExperimentConfig, ov: &Overrides, base_dir: &Path) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let problems = cfg.resolve_sequence()?;
    let sampler = cfg.sampler_config(ov.seed);
    let dir = output_dir(cfg, ov, base_dir);
    let _lock = OutputLock::acquire(&dir)?;
    let baseline = ov.baseline.unwrap_or(cfg.sequence.baseline);

    let chained = run_sequence(&problems, &sampler, cfg.sequence.inflation)?;
    write_sequence_outputs(&dir, &cfg.output, &chained, "sequence_summary.csv")?;
    let base = match baseline {
        Baseline::Tmcmc => {
            let b = run_sequence_independent(&problems, &sampler)?;
            let bdir = dir.join("baseline");
            fs::create_dir_all(&bdir)?;
            write_sequence_outputs(&bdir, &cfg.output, &b, "sequence_summary.csv")?;
            Some(b)
        }
        Baseline::None => None,
    };
    if cfg.output.json() {
        let summary = json!({
            "command": "sequence",
            "status": if chained.failure.is_none() { "ok" } else { "failed" },
            "problems": problems.len(),
            "seed": sampler.seed,
            "chained": sequence_totals(&chained),
            "baseline": base.as_ref().map(sequence_totals),
            "config": config_echo(cfg, &sampler),
            "metadata": metadata(started),
        });
        write_json(&dir.join("sequence_summary.json"), &summary)?;
    }
    match chained.failure {
        Some((i, e)) => Err(CliError {
            code: exit_code(&e.error),
            message: format!("sequence problem {i} failed: {}", e.error),
        }),
        None => Ok(dir),
    }
}
