//! One configured run: initial data, evolution, diagnostics, artifacts.

use std::path::{Path, PathBuf};

use qhd_core::decay_fit::{dispersive_from_snapshots, DispersiveReport, WindowOptions};
use qhd_core::functionals::{
    analyze_snapshots, trajectory_snapshots, GronwallReport, RunAnalysis, Snapshot, SpaceTimeReport,
};
use qhd_core::initial::{self, GaussianParams};
use qhd_core::lifting::{gcp_check, lift_h2, GcpReport};
use qhd_core::nls::evolve_until_abort;
use qhd_core::vacuum_measure::{decompose_vacuum, lambda_measure, Atom};
use qhd_core::{
    Complex64, ComplexField, Execution, GammaLaw, Grid, HydroState, NlsParams, QhdError, VacuumMask,
};
use serde::Serialize;

use crate::artifacts::{self, check_x, Table};
use crate::config::{Family, Format, GridConfig, Kind, RunConfig};
use crate::error::{CliError, Result};

pub const SUMMARY_SCHEMA: &str = "qhd-summary v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub message: String,
    pub step: Option<usize>,
    pub last_valid_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationSummary {
    pub mass_drift: f64,
    pub energy_drift: f64,
    /// Relative to `||psi||_2 ||d_x psi||_2` at `t = 0`.
    pub momentum_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencySummary {
    pub h_form_gap: f64,
    pub xi_mismatch: f64,
    pub i_mismatch: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PcSummary {
    pub right: f64,
    pub margin: f64,
    pub relative_margin: f64,
    pub identity_residual: f64,
    pub f_growth_slope: Option<f64>,
    pub f_growth_envelope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MorawetzSummary {
    pub max_abs_residual: f64,
    pub relative_residual: f64,
    pub offset: f64,
    pub g_sup: f64,
    pub accumulated_dx_rho_sq: f64,
    pub accumulated_rho_gp1: f64,
    pub combined: f64,
    pub bound: f64,
    pub combined_ok: bool,
    pub gradient_ok: bool,
    pub mass_energy_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropySummary {
    pub max_l2_interior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasureEntry {
    pub snapshot: usize,
    pub t: f64,
    pub file: String,
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub schema: String,
    pub status: RunStatus,
    pub error: Option<ErrorRecord>,
    pub gamma: f64,
    pub sigma: f64,
    pub grid: GridConfig,
    pub snapshots: usize,
    pub t_last: f64,
    pub conservation: ConservationSummary,
    pub consistency: ConsistencySummary,
    pub pseudo_conformal: Option<PcSummary>,
    pub morawetz: Option<MorawetzSummary>,
    pub entropy: Option<EntropySummary>,
    pub gronwall: GronwallReport,
    pub space_time: SpaceTimeReport,
    pub dispersive: Option<DispersiveReport>,
    pub gcp: Option<GcpReport>,
    pub lambda_measure: Vec<MeasureEntry>,
    pub fields_files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub status: RunStatus,
    pub summary: Summary,
}

fn grid_of(cfg: &RunConfig) -> Result<Grid> {
    Ok(Grid::new(cfg.grid.half_length, cfg.grid.n)?)
}

fn custom_table(cfg: &RunConfig, grid: &Grid) -> Result<Table> {
    let path = cfg
        .initial_data
        .path
        .as_deref()
        .expect("validated: custom_file has a path");
    let t = Table::read(path)?;
    check_x(path, grid, &t.column("x")?)?;
    Ok(t)
}

fn initial_hydro(cfg: &RunConfig, grid: &Grid) -> Result<HydroState> {
    let i = &cfg.initial_data;
    let h = match i.family {
        Family::Gaussian => {
            let env = |x: f64| i.background + i.amplitude * (-((x - i.center) / i.width).powi(2)).exp();
            let s = grid.sample(env);
            let d = grid.sample(|x| {
                let y = (x - i.center) / i.width;
                -2.0 * i.amplitude * y / i.width * (-y * y).exp()
            });
            let lam = s.iter().map(|s| i.momentum * s).collect();
            HydroState::new(grid, s, lam, d)?
        }
        Family::PlaneWave => {
            let k = initial::plane_wave_k(grid, i.mode);
            let n = grid.len();
            HydroState::new(grid, vec![i.amplitude; n], vec![k * i.amplitude; n], vec![0.0; n])?
        }
        Family::AbsXBump => initial::abs_x_bump(grid, i.amplitude, i.width, i.center)?,
        Family::CustomFile => {
            let t = custom_table(cfg, grid)?;
            let s = t.column("sqrt_rho")?;
            let lam = t.column("Lambda")?;
            if t.has("dx_sqrt_rho") {
                HydroState::new(grid, s, lam, t.column("dx_sqrt_rho")?)?
            } else {
                let tau = cfg.lifting.unwrap_or_default().tau_rel;
                let mask = VacuumMask::from_amplitude(&s, tau)?;
                HydroState::from_amplitude(grid, s, lam, &mask)?
            }
        }
    };
    Ok(h)
}

fn initial_wave(cfg: &RunConfig, grid: &Grid) -> Result<ComplexField> {
    let i = &cfg.initial_data;
    Ok(match i.family {
        Family::Gaussian => initial::gaussian(
            grid,
            &GaussianParams {
                amplitude: i.amplitude,
                width: i.width,
                center: i.center,
                momentum: i.momentum,
                background: i.background,
            },
        )?,
        Family::PlaneWave => initial::plane_wave(grid, i.amplitude, i.mode),
        Family::AbsXBump => initial::abs_x_bump(grid, i.amplitude, i.width, i.center)?
            .sqrt_rho
            .iter()
            .map(|&s| Complex64::new(s, 0.0))
            .collect(),
        Family::CustomFile => {
            let t = custom_table(cfg, grid)?;
            let re = t.column("psi_re")?;
            let im = t.column("psi_im")?;
            re.into_iter().zip(im).map(|(r, i)| Complex64::new(r, i)).collect()
        }
    })
}

/// Initial wave function, plus the lifting report for hydrodynamic data.
pub fn initial_state(cfg: &RunConfig, grid: &Grid, law: GammaLaw) -> Result<(ComplexField, Option<GcpReport>)> {
    match cfg.initial_data.kind {
        Kind::Wavefunction => Ok((initial_wave(cfg, grid)?, None)),
        Kind::Hydrodynamic => {
            let h = initial_hydro(cfg, grid)?;
            let opts = cfg.lifting.expect("validated: hydrodynamic has lifting").options();
            let (psi, report) = lift_h2(grid, &h, law, &opts)?;
            Ok((psi, Some(report)))
        }
    }
}

/// Indices of the snapshots that get fields and lambda-measure files.
pub fn field_indices(count: usize, every: usize) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    let last = count - 1;
    let mut idx: Vec<usize> = if every == 0 {
        vec![0]
    } else {
        (0..count).step_by(every).collect()
    };
    if idx.last() != Some(&last) {
        idx.push(last);
    }
    idx
}

fn conservation(snaps: &[Snapshot]) -> ConservationSummary {
    let Some(s0) = snaps.first().map(|s| s.scalars) else {
        return ConservationSummary {
            mass_drift: 0.0,
            energy_drift: 0.0,
            momentum_drift: 0.0,
        };
    };
    let rel = |v: f64, v0: f64, scale: f64| {
        let d = (v - v0).abs();
        if scale > 0.0 {
            d / scale
        } else {
            d
        }
    };
    let dpsi_sq = s0.grad_l2 * s0.grad_l2 + 2.0 * s0.kinetic;
    let p_scale = (s0.mass * dpsi_sq).sqrt().max(s0.momentum.abs());
    let max = |f: &dyn Fn(&Snapshot) -> f64| snaps.iter().map(f).fold(0.0, f64::max);
    ConservationSummary {
        mass_drift: max(&|s| rel(s.scalars.mass, s0.mass, s0.mass.abs())),
        energy_drift: max(&|s| rel(s.scalars.energy, s0.energy, s0.energy.abs())),
        momentum_drift: max(&|s| rel(s.scalars.momentum, s0.momentum, p_scale)),
    }
}

/// Everything derived from a snapshot sequence: analysis, summary, and the
/// artifacts written into `dir`.
pub fn report(
    cfg: &RunConfig,
    grid: &Grid,
    snaps: &[Snapshot],
    gcp: Option<GcpReport>,
    dir: &Path,
    exec: Execution,
) -> Result<(RunAnalysis, Summary)> {
    let law = GammaLaw::new(cfg.params.gamma)?;
    let d = &cfg.diagnostics;
    let analysis = analyze_snapshots(grid, snaps, law, exec)?;

    let mut fields_files = Vec::new();
    let mut measures = Vec::new();
    for i in field_indices(snaps.len(), d.fields_every) {
        let s = &snaps[i];
        let name = artifacts::fields_name(i);
        if d.fields && cfg.writes(Format::Csv) {
            artifacts::write_fields(&dir.join(&name), grid, i, s)?;
            fields_files.push(name.clone());
        }
        if d.lambda_measure {
            let dec = decompose_vacuum(grid, &s.hydro, &s.energy_density, &s.mask)?;
            let m = lambda_measure(&s.hydro, &s.chem, &dec);
            let file = format!("lambda_measure_{i:04}.json");
            if cfg.writes(Format::Json) {
                artifacts::write_json(&dir.join(&file), &m.record(name))?;
            }
            measures.push(MeasureEntry {
                snapshot: i,
                t: s.t,
                file,
                atoms: m.atoms,
            });
        }
    }

    let pc = &analysis.pseudo_conformal;
    let mw = &analysis.morawetz;
    let window = WindowOptions {
        t_lo: d.t_lo,
        t_hi: d.t_hi,
        ..WindowOptions::default()
    };
    let gcp = match (d.gcp, gcp, snaps.first()) {
        (false, _, _) => None,
        (true, Some(g), _) => Some(g),
        (true, None, Some(s0)) => Some(gcp_check(grid, &s0.hydro, law, &Default::default())?),
        (true, None, None) => None,
    };
    let summary = Summary {
        schema: SUMMARY_SCHEMA.into(),
        status: RunStatus::Ok,
        error: None,
        gamma: law.gamma(),
        sigma: law.dispersive_sigma(),
        grid: cfg.grid,
        snapshots: snaps.len(),
        t_last: snaps.last().map_or(0.0, |s| s.t),
        conservation: conservation(snaps),
        consistency: ConsistencySummary {
            h_form_gap: analysis.h_form_gap,
            xi_mismatch: analysis.xi_mismatch,
            i_mismatch: analysis.i_mismatch,
        },
        pseudo_conformal: d.pseudo_conformal.then_some(PcSummary {
            right: pc.right,
            margin: pc.margin,
            relative_margin: pc.relative_margin,
            identity_residual: pc.identity_residual,
            f_growth_slope: pc.f_growth_slope,
            f_growth_envelope: pc.f_growth_envelope,
        }),
        morawetz: d.morawetz.then_some(MorawetzSummary {
            max_abs_residual: mw.max_abs_residual,
            relative_residual: mw.relative_residual,
            offset: mw.offset,
            g_sup: mw.g_sup,
            accumulated_dx_rho_sq: mw.accumulated_dx_rho_sq,
            accumulated_rho_gp1: mw.accumulated_rho_gp1,
            combined: mw.combined,
            bound: mw.bound,
            combined_ok: mw.combined_ok,
            gradient_ok: mw.gradient_ok,
            mass_energy_bound: mw.mass_energy_bound,
        }),
        entropy: d.entropy.then_some(EntropySummary {
            max_l2_interior: analysis.entropy.max_l2_interior,
        }),
        gronwall: analysis.gronwall.clone(),
        space_time: analysis.space_time,
        dispersive: d.dispersive.then(|| dispersive_from_snapshots(snaps, law, &window)),
        gcp,
        lambda_measure: measures,
        fields_files,
    };
    if cfg.writes(Format::Csv) {
        artifacts::write_diagnostics(&dir.join("diagnostics.csv"), &analysis.frames)?;
    }
    Ok((analysis, summary))
}

/// Validate, evolve, analyze and write all artifacts. A mid-run blowup still
/// writes what was computed and returns `RunStatus::Aborted`.
pub fn run(cfg: &RunConfig, exec: Execution) -> Result<RunArtifacts> {
    cfg.validate()?;
    let grid = grid_of(cfg)?;
    let law = GammaLaw::new(cfg.params.gamma)?;
    let (psi0, gcp) = initial_state(cfg, &grid, law)?;

    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|e| CliError::io(&dir, e))?;

    let params = NlsParams {
        dealias: cfg.params.dealias,
        ..NlsParams::new(cfg.params.gamma, cfg.params.dt, cfg.params.t_end)
    };
    let (traj, abort) = evolve_until_abort(&grid, &psi0, &params, cfg.params.save_every)?;
    let snaps = trajectory_snapshots(&traj, cfg.diagnostics.tau_rel, exec)?;
    let (_, mut summary) = report(cfg, &grid, &snaps, gcp, &dir, exec)?;

    let status = match &abort {
        None => RunStatus::Ok,
        Some(e) => {
            let (step, last_valid_time) = match e {
                QhdError::NumericalAbort { step, last_valid_time } => (Some(*step), Some(*last_valid_time)),
                _ => (None, None),
            };
            summary.error = Some(ErrorRecord {
                message: e.to_string(),
                step,
                last_valid_time,
            });
            RunStatus::Aborted
        }
    };
    summary.status = status;
    if cfg.writes(Format::Json) {
        artifacts::write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(RunArtifacts { dir, status, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_index_selection() {
        assert_eq!(field_indices(0, 0), Vec::<usize>::new());
        assert_eq!(field_indices(1, 0), vec![0]);
        assert_eq!(field_indices(5, 0), vec![0, 4]);
        assert_eq!(field_indices(5, 2), vec![0, 2, 4]);
        assert_eq!(field_indices(6, 2), vec![0, 2, 4, 5]);
        assert_eq!(field_indices(3, 1), vec![0, 1, 2]);
    }
}
