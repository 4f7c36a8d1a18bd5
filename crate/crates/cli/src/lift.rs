//! Standalone lifting of a hydrodynamic CSV to a wave function.

use std::path::Path;

use qhd_core::lifting::{lift_h2, GcpReport, LiftOptions};
use qhd_core::{GammaLaw, HydroState, VacuumMask};

use crate::artifacts::{write_table, Table, PSI_TAG};
use crate::error::Result;

/// Reads `x, sqrt_rho, Lambda[, dx_sqrt_rho]` and writes `x, psi_re, psi_im`.
pub fn lift_file(input: &Path, output: &Path, law: GammaLaw, opts: &LiftOptions) -> Result<GcpReport> {
    let t = Table::read(input)?;
    let grid = t.infer_grid()?;
    let s = t.column("sqrt_rho")?;
    let lam = t.column("Lambda")?;
    let h = if t.has("dx_sqrt_rho") {
        HydroState::new(&grid, s, lam, t.column("dx_sqrt_rho")?)?
    } else {
        let mask = VacuumMask::from_amplitude(&s, opts.tau_rel)?;
        HydroState::from_amplitude(&grid, s, lam, &mask)?
    };
    let (psi, report) = lift_h2(&grid, &h, law, opts)?;
    let rows: Vec<Vec<f64>> = grid
        .x()
        .iter()
        .zip(&psi)
        .map(|(&x, p)| vec![x, p.re, p.im])
        .collect();
    write_table(output, PSI_TAG, &["x", "psi_re", "psi_im"], &rows)?;
    Ok(report)
}
