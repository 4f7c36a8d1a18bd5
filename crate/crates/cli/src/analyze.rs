//! Recompute diagnostics from the fields files of a finished run.

use std::path::{Path, PathBuf};

use qhd_core::functionals::Snapshot;
use qhd_core::{Complex64, Execution, GammaLaw, HydroState, VacuumMask};

use crate::artifacts::{self, Table};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::run::{report, Summary};

/// Subdirectory of the run that receives the recomputed artifacts.
pub const REANALYSIS_DIR: &str = "reanalysis";

/// Rebuild a snapshot from a fields file; wave-function columns are used when
/// present, the hydrodynamic ones otherwise.
pub fn snapshot_from_table(t: &Table, law: GammaLaw, tau_rel: f64) -> Result<Snapshot> {
    let grid = t.infer_grid()?;
    let time = t
        .tag_value("t")
        .ok_or_else(|| CliError::input(&t.path, "comment line carries no t="))?;
    let re = t.column("psi_re")?;
    if re.iter().all(|v| v.is_finite()) {
        let im = t.column("psi_im")?;
        let psi: Vec<Complex64> = re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect();
        return Ok(Snapshot::from_psi(&grid, &psi, time, law, tau_rel)?);
    }
    let h = HydroState::new(
        &grid,
        t.column("sqrt_rho")?,
        t.column("Lambda")?,
        t.column("dx_sqrt_rho")?,
    )?;
    let mask = VacuumMask::from_amplitude(&h.sqrt_rho, tau_rel)?;
    Ok(Snapshot::from_hydro(&grid, h, mask, time, law)?)
}

fn fields_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("fields_") && n.ends_with(".csv"))
        })
        .collect();
    v.sort();
    Ok(v)
}

/// Reads `config.toml` and `fields_*.csv` from `run_dir` and writes
/// `diagnostics.csv` and `summary.json` under `run_dir/reanalysis`.
pub fn analyze(run_dir: &Path, exec: Execution) -> Result<Summary> {
    let cfg_path = run_dir.join("config.toml");
    let text = std::fs::read_to_string(&cfg_path).map_err(|e| CliError::io(&cfg_path, e))?;
    let cfg = RunConfig::from_toml(&text, &cfg_path)?;
    cfg.validate()?;
    let law = GammaLaw::new(cfg.params.gamma)?;
    let files = fields_files(run_dir)?;
    if files.is_empty() {
        return Err(CliError::input(run_dir, "no fields_*.csv files"));
    }
    let snaps = files
        .iter()
        .map(|p| Table::read(p).and_then(|t| snapshot_from_table(&t, law, cfg.diagnostics.tau_rel)))
        .collect::<Result<Vec<_>>>()?;
    let grid = files
        .first()
        .map(|p| Table::read(p).and_then(|t| t.infer_grid()))
        .expect("non-empty")?;

    let out = run_dir.join(REANALYSIS_DIR);
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let mut cfg = cfg;
    // the stored files are the new snapshot sequence; do not rewrite them
    cfg.diagnostics.fields = false;
    let (_, summary) = report(&cfg, &grid, &snaps, None, &out, exec)?;
    artifacts::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
