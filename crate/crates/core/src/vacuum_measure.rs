//! Non-vacuum components, one-sided boundary values, and the measure
//! `lambda~ = lambda dx + 1/2 sum_j (d_x sqrt_rho(b_j-) delta_{b_j} - d_x sqrt_rho(a_j+) delta_{a_j})`.

use serde::{Deserialize, Serialize};

use crate::decay_fit::{fit_decay, FitResult};
use crate::error::{QhdError, Result};
use crate::functionals::ChemicalFields;
use crate::grid::{sup_norm, Grid, RealField};
use crate::polar::{HydroState, VacuumMask};

/// Samples used by the one-sided quadratic extrapolation.
pub const STENCIL: usize = 4;
/// Vacuum runs up to this many samples count as isolated vacuum points.
pub const ISOLATED_MAX: usize = 2;
/// Atoms lighter than this fraction of `max |d_x sqrt_rho|` are dropped.
pub const ATOM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    /// Vacuum run of at most [`ISOLATED_MAX`] samples between two components.
    Isolated,
    Fat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub kind: BoundaryKind,
    /// Boundary point: midpoint of an isolated vacuum run, otherwise the
    /// vacuum sample adjacent to the component.
    pub location: f64,
    /// Width of the neighbouring vacuum run in samples.
    pub gap: usize,
    /// One-sided limits; `None` when the component is too narrow.
    pub dx_sqrt_rho: Option<f64>,
    pub sqrt_e: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    /// Sample range `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// `None` where the component runs into the box edge.
    pub left: Option<Boundary>,
    pub right: Option<Boundary>,
    /// At least [`STENCIL`] samples wide.
    pub reliable: bool,
}

impl Component {
    pub fn width(&self) -> usize {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacuumDecomposition {
    pub components: Vec<Component>,
}

/// Value at `x0` of the least-squares quadratic through the points.
pub(crate) fn extrapolate_quadratic(xs: &[f64], ys: &[f64], x0: f64, scale: f64) -> f64 {
    // normal equations in u = (x - x0) / scale
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for (&x, &y) in xs.iter().zip(ys) {
        let u = (x - x0) / scale;
        let p = [1.0, u, u * u];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += p[r] * p[c];
            }
            b[r] += p[r] * y;
        }
    }
    solve3(a, b)[0]
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let s: f64 = (r + 1..3).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// One-sided limit of `f` at `location` from the `STENCIL` samples of the
/// component nearest that side.
pub(crate) fn one_sided(
    grid: &Grid,
    f: &[f64],
    start: usize,
    end: usize,
    from_left_edge: bool,
    location: f64,
) -> Option<f64> {
    if end - start < STENCIL {
        return None;
    }
    let idx: Vec<usize> = if from_left_edge {
        (start..start + STENCIL).collect()
    } else {
        (end - STENCIL..end).collect()
    };
    let xs: Vec<f64> = idx.iter().map(|&i| grid.x()[i]).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| f[i]).collect();
    Some(extrapolate_quadratic(&xs, &ys, location, grid.dx()))
}

/// Split the grid into maximal non-vacuum components with one-sided
/// boundary limits of `d_x sqrt_rho` and `sqrt(e)`.
pub fn decompose_vacuum(
    grid: &Grid,
    h: &HydroState,
    energy_density: &[f64],
    mask: &VacuumMask,
) -> Result<VacuumDecomposition> {
    grid.check_len(h.len())?;
    grid.check_len(mask.len())?;
    grid.check_len(energy_density.len())?;
    let sqrt_e: Vec<f64> = energy_density.iter().map(|e| e.max(0.0).sqrt()).collect();
    let runs = mask.nonvacuum_runs();
    let x = grid.x();
    let mut components = Vec::with_capacity(runs.len());
    for (k, r) in runs.iter().enumerate() {
        let reliable = r.len() >= STENCIL;
        let left = (r.start > 0).then(|| {
            let prev_end = if k > 0 { runs[k - 1].end } else { 0 };
            let gap = r.start - prev_end;
            let (kind, location) = if k > 0 && gap <= ISOLATED_MAX {
                (BoundaryKind::Isolated, 0.5 * (x[prev_end] + x[r.start - 1]))
            } else {
                (BoundaryKind::Fat, x[r.start - 1])
            };
            Boundary {
                kind,
                location,
                gap,
                dx_sqrt_rho: one_sided(grid, &h.dx_sqrt_rho, r.start, r.end, true, location),
                sqrt_e: one_sided(grid, &sqrt_e, r.start, r.end, true, location),
            }
        });
        let right = (r.end < grid.len()).then(|| {
            let next_start = runs.get(k + 1).map_or(grid.len(), |n| n.start);
            let gap = next_start - r.end;
            let (kind, location) = if k + 1 < runs.len() && gap <= ISOLATED_MAX {
                (BoundaryKind::Isolated, 0.5 * (x[r.end] + x[next_start - 1]))
            } else {
                (BoundaryKind::Fat, x[r.end])
            };
            Boundary {
                kind,
                location,
                gap,
                dx_sqrt_rho: one_sided(grid, &h.dx_sqrt_rho, r.start, r.end, false, location),
                sqrt_e: one_sided(grid, &sqrt_e, r.start, r.end, false, location),
            }
        });
        components.push(Component {
            start: r.start,
            end: r.end,
            left,
            right,
            reliable,
        });
    }
    Ok(VacuumDecomposition { components })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomFlag {
    Ok,
    /// Comes from a component narrower than the extrapolation stencil.
    Unreliable,
    /// Neighbouring components are at most `STENCIL` samples apart; a
    /// possible unresolved accumulation of vacuum boundaries.
    CloseComponents,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub w: f64,
    pub flag: AtomFlag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMeasure {
    pub density: RealField,
    pub atoms: Vec<Atom>,
}

/// Serialized form; the density lives in a fields CSV referenced by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaMeasureRecord {
    pub density_csv_ref: String,
    pub atoms: Vec<Atom>,
}

impl LambdaMeasure {
    pub fn record(&self, density_csv_ref: impl Into<String>) -> LambdaMeasureRecord {
        LambdaMeasureRecord {
            density_csv_ref: density_csv_ref.into(),
            atoms: self.atoms.clone(),
        }
    }
}

pub fn lambda_measure(
    h: &HydroState,
    chem: &ChemicalFields,
    dec: &VacuumDecomposition,
) -> LambdaMeasure {
    let floor = ATOM_FLOOR * sup_norm(&h.dx_sqrt_rho);
    let mut raw: Vec<Atom> = Vec::new();
    let flag_for = |c: &Component, b: &Boundary| {
        if !c.reliable || b.dx_sqrt_rho.is_none() {
            AtomFlag::Unreliable
        } else if b.kind == BoundaryKind::Fat && b.gap <= STENCIL {
            AtomFlag::CloseComponents
        } else {
            AtomFlag::Ok
        }
    };
    for c in &dec.components {
        if let Some(b) = &c.left {
            raw.push(Atom {
                x: b.location,
                w: -0.5 * b.dx_sqrt_rho.unwrap_or(0.0),
                flag: flag_for(c, b),
            });
        }
        if let Some(b) = &c.right {
            raw.push(Atom {
                x: b.location,
                w: 0.5 * b.dx_sqrt_rho.unwrap_or(0.0),
                flag: flag_for(c, b),
            });
        }
    }
    raw.sort_by(|a, b| a.x.total_cmp(&b.x));
    let mut atoms: Vec<Atom> = Vec::new();
    for a in raw {
        match atoms.last_mut() {
            Some(last) if last.x == a.x => {
                last.w += a.w;
                if a.flag != AtomFlag::Ok {
                    last.flag = a.flag;
                }
            }
            _ => atoms.push(a),
        }
    }
    atoms.retain(|a| a.w.abs() >= floor && (a.w != 0.0 || a.flag != AtomFlag::Ok));
    LambdaMeasure {
        density: chem.lambda.clone(),
        atoms,
    }
}

/// Linear interpolation of grid samples at `x` (periodic).
fn interpolate(grid: &Grid, f: &[f64], x: f64) -> f64 {
    let n = grid.len();
    let s = (x + grid.half_length()) / grid.dx();
    let i = s.floor();
    let frac = s - i;
    let i0 = (i as i64).rem_euclid(n as i64) as usize;
    let i1 = (i0 + 1) % n;
    (1.0 - frac) * f[i0] + frac * f[i1]
}

/// `<eta, lambda~> = int eta lambda + sum_j w_j eta(x_j)`.
pub fn test_against(grid: &Grid, measure: &LambdaMeasure, eta: &[f64]) -> Result<f64> {
    grid.check_len(eta.len())?;
    grid.check_len(measure.density.len())?;
    let dens: Vec<f64> = eta.iter().zip(&measure.density).map(|(e, l)| e * l).collect();
    let atoms: f64 = measure
        .atoms
        .iter()
        .map(|a| a.w * interpolate(grid, eta, a.x))
        .sum();
    Ok(grid.integrate(&dens)? + atoms)
}

/// `||sqrt(e)||_inf` over one component.
pub fn component_sqrt_e_sup(c: &Component, energy_density: &[f64]) -> f64 {
    energy_density[c.start..c.end]
        .iter()
        .fold(0.0_f64, |m, e| m.max(e.max(0.0).sqrt()))
}

/// Log-log fit of `||sqrt(e)||_inf` against component width.
pub fn sqrt_e_width_fit(widths: &[f64], sups: &[f64]) -> Result<FitResult> {
    let (lo, hi) = widths
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &w| (lo.min(w), hi.max(w)));
    if !(lo > 0.0) {
        return Err(QhdError::Fit("component widths must be positive".into()));
    }
    fit_decay(widths, sups, (lo, hi))
}
