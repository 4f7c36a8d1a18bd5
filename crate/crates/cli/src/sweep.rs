//! Concurrent batch of runs, one worker per run.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use qhd_core::Execution;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, FieldError, Result};
use crate::run::{run, RunStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Ok,
    Aborted,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub config: PathBuf,
    pub output: PathBuf,
    pub status: SweepStatus,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub runs: Vec<SweepEntry>,
    pub failures: Vec<PathBuf>,
}

impl SweepSummary {
    pub fn exit_code(&self) -> u8 {
        if self.runs.iter().any(|r| r.status == SweepStatus::Failed) {
            1
        } else if self.runs.iter().any(|r| r.status == SweepStatus::Aborted) {
            3
        } else {
            0
        }
    }
}

/// `*.toml` files of a directory, sorted by name. Every config is parsed and
/// validated; problems from all files are reported together.
pub fn load_dir(dir: &Path) -> Result<Vec<(PathBuf, RunConfig)>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    let mut errs = Vec::new();
    for p in paths {
        match RunConfig::load(&p) {
            Ok(c) => out.push((p, c)),
            Err(CliError::Validation(v)) => errs.extend(
                v.into_iter()
                    .map(|e| FieldError::new(format!("{}: {}", p.display(), e.field), e.reason)),
            ),
            Err(e) => errs.push(FieldError::new(p.display().to_string(), e.to_string())),
        }
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Validation(errs))
    }
}

/// Output directories must be distinct; checked before anything runs.
pub fn check_outputs(configs: &[(PathBuf, RunConfig)]) -> Result<()> {
    let mut seen: HashMap<PathBuf, &Path> = HashMap::new();
    let mut errs = Vec::new();
    for (p, c) in configs {
        let out = c.output_dir();
        if let Some(first) = seen.get(&out) {
            errs.push(FieldError::new(
                format!("{}: output.directory", p.display()),
                format!("{} is also used by {}", out.display(), first.display()),
            ));
        } else {
            seen.insert(out, p);
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(errs))
    }
}

/// Run every config on a pool of `workers` threads. Each run is sequential
/// inside; a failing run does not affect the others.
pub fn sweep(configs: &[(PathBuf, RunConfig)], workers: usize) -> Result<SweepSummary> {
    if workers == 0 {
        return Err(CliError::Validation(vec![FieldError::new(
            "workers",
            "must be at least 1",
        )]));
    }
    for (p, c) in configs {
        c.validate().map_err(|e| match e {
            CliError::Validation(v) => CliError::Validation(
                v.into_iter()
                    .map(|e| FieldError::new(format!("{}: {}", p.display(), e.field), e.reason))
                    .collect(),
            ),
            other => other,
        })?;
    }
    check_outputs(configs)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::input("workers", e.to_string()))?;
    let runs: Vec<SweepEntry> = pool.install(|| {
        configs
            .par_iter()
            .map(|(p, c)| {
                let (status, error) = match run(c, Execution::Sequential) {
                    Ok(a) if a.status == RunStatus::Ok => (SweepStatus::Ok, None),
                    Ok(a) => (SweepStatus::Aborted, a.summary.error.map(|e| e.message)),
                    Err(e) => (SweepStatus::Failed, Some(e.to_string())),
                };
                if let Some(msg) = &error {
                    log::error!("{}: {msg}", p.display());
                }
                SweepEntry {
                    config: p.clone(),
                    output: c.output_dir(),
                    status,
                    error,
                }
            })
            .collect()
    });
    let failures = runs
        .iter()
        .filter(|r| r.status != SweepStatus::Ok)
        .map(|r| r.config.clone())
        .collect();
    Ok(SweepSummary { runs, failures })
}
