//! From hydrodynamic data back to a wave function.
//!
//! `lift_h1` regularizes the amplitude only inside the velocity, so the output
//! modulus is exactly `sqrt_rho`. `lift_h2` lifts each non-vacuum component
//! separately and rotates it by a constant phase so that `d_x psi` is
//! continuous through isolated vacuum points.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eos::GammaLaw;
use crate::error::{QhdError, Result};
use crate::functionals::compute_lambda;
use crate::grid::{l2_norm, ComplexField, Grid};
use crate::polar::{energy_density, HydroState, DEFAULT_TAU_REL};
use crate::vacuum_measure::{decompose_vacuum, one_sided, BoundaryKind};

/// Default amplitude regularization relative to `max sqrt_rho`.
pub const DEFAULT_DELTA_REL: f64 = 1e-8;

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && delta > 0.0 {
        Ok(())
    } else {
        Err(QhdError::InvalidParameter {
            name: "delta",
            reason: format!("regularization must be positive, got {delta}"),
        })
    }
}

/// Regularized velocity `v = J / (sqrt_rho + delta e^{-x^2/2})^2`.
fn regularized_velocity(grid: &Grid, h: &HydroState, delta: f64) -> Vec<f64> {
    grid.x()
        .iter()
        .zip(&h.sqrt_rho)
        .zip(&h.j)
        .map(|((&x, &s), &j)| {
            let sd = s + delta * (-0.5 * x * x).exp();
            j / (sd * sd)
        })
        .collect()
}

/// Phase `S` with `S' = v`, `S = 0` at the left edge.
///
/// When the density does not vanish at the box edges the periodic seam is
/// part of the domain, so the total increment of `S` is rounded to a multiple
/// of `2 pi` by a uniform shift of `v`; otherwise the seam lies in vacuum and
/// `S` is left untouched.
fn phase_from_velocity(grid: &Grid, h: &HydroState, v: &[f64], tau_rel: f64) -> Result<Vec<f64>> {
    let mut s = grid.spectral_antiderivative(v, 0)?;
    let mask = h.mask(tau_rel)?;
    let n = grid.len();
    if !mask.is_vacuum[0] && !mask.is_vacuum[n - 1] {
        let increment = grid.sum(v);
        let two_pi = 2.0 * std::f64::consts::PI;
        let excess = increment - two_pi * (increment / two_pi).round();
        let per_length = excess / (2.0 * grid.half_length());
        if excess.abs() > 1e-3 {
            log::warn!("phase increment across the box is {increment}, not a multiple of 2 pi");
        }
        for (p, &x) in s.iter_mut().zip(grid.x()) {
            *p -= per_length * (x + grid.half_length());
        }
    }
    Ok(s)
}

/// `psi = sqrt_rho e^{iS}` with `S' = J / rho_delta`, `S = 0` at the left edge.
pub fn lift_h1(grid: &Grid, h: &HydroState, delta: f64) -> Result<ComplexField> {
    grid.check_len(h.len())?;
    check_delta(delta)?;
    let v = regularized_velocity(grid, h, delta);
    let s = phase_from_velocity(grid, h, &v, DEFAULT_TAU_REL)?;
    Ok(h.sqrt_rho
        .iter()
        .zip(&s)
        .map(|(&a, &ph)| Complex64::from_polar(a, ph))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMatching {
    /// Rotate components so `d_x psi` matches across isolated vacuum points.
    #[default]
    Aligned,
    /// Every component keeps `theta = 0`.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftOptions {
    pub tau_rel: f64,
    /// Absolute amplitude regularization; `None` means `1e-8 max sqrt_rho`.
    pub delta: Option<f64>,
    /// Junctions with `|d_x psi|` below this fraction of `max |d_x psi|` are
    /// not phase-matched.
    pub conditioning_floor: f64,
    /// Allowed relative mismatch of `|d_x psi|` across an isolated vacuum point.
    pub mismatch_tol: f64,
    pub matching: PhaseMatching,
    /// Bound on the GCP norms; `None` checks finiteness only.
    pub gcp_bound: Option<f64>,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self {
            tau_rel: DEFAULT_TAU_REL,
            delta: None,
            conditioning_floor: 1e-6,
            mismatch_tol: 0.05,
            matching: PhaseMatching::Aligned,
            gcp_bound: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionRecord {
    pub location: f64,
    pub kind: BoundaryKind,
    /// One-sided `|d_x psi|` from the left and right components.
    pub left_abs: Option<f64>,
    pub right_abs: Option<f64>,
    /// Phase of the component to the right of the junction.
    pub theta: f64,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcpReport {
    pub lambda_l2: f64,
    /// `||(d_x J / sqrt_rho) 1_{rho > 0}||_2`
    pub dx_j_over_sqrt_rho_l2: f64,
    pub dt_sqrt_rho_l2: f64,
    pub bound: Option<f64>,
    pub gcp_ok: bool,
    /// Per-junction phase choices made by `lift_h2`.
    pub junctions: Vec<JunctionRecord>,
}

pub fn gcp_check(grid: &Grid, h: &HydroState, law: GammaLaw, opts: &LiftOptions) -> Result<GcpReport> {
    let mask = h.mask(opts.tau_rel)?;
    let chem = compute_lambda(grid, h, &mask, law)?;
    let lambda_l2 = l2_norm(grid, &chem.lambda);
    let dt_sqrt_rho_l2 = l2_norm(grid, &chem.dt_sqrt_rho);
    let dx_j_over_sqrt_rho_l2 = 2.0 * dt_sqrt_rho_l2;
    let finite = lambda_l2.is_finite() && dt_sqrt_rho_l2.is_finite();
    let gcp_ok = finite
        && opts
            .gcp_bound
            .is_none_or(|m| lambda_l2 <= m && dx_j_over_sqrt_rho_l2 <= m);
    Ok(GcpReport {
        lambda_l2,
        dx_j_over_sqrt_rho_l2,
        dt_sqrt_rho_l2,
        bound: opts.gcp_bound,
        gcp_ok,
        junctions: Vec::new(),
    })
}

/// Component-wise lift with phase alignment at isolated vacuum points.
pub fn lift_h2(
    grid: &Grid,
    h: &HydroState,
    law: GammaLaw,
    opts: &LiftOptions,
) -> Result<(ComplexField, GcpReport)> {
    grid.check_len(h.len())?;
    let mask = h.mask(opts.tau_rel)?;
    h.check_vacuum_momentum(&mask)?;
    let amax = h.sqrt_rho.iter().copied().fold(0.0, f64::max);
    let delta = opts.delta.unwrap_or(DEFAULT_DELTA_REL * amax.max(f64::MIN_POSITIVE));
    check_delta(delta)?;

    let e = energy_density(h, law);
    let dec = decompose_vacuum(grid, h, &e, &mask)?;
    let v = regularized_velocity(grid, h, delta);
    let mut phase = phase_from_velocity(grid, h, &v, opts.tau_rel)?;
    for c in &dec.components {
        let base = phase[c.start];
        for p in &mut phase[c.start..c.end] {
            *p -= base;
        }
    }

    let grad_max = h
        .dx_sqrt_rho
        .iter()
        .zip(&h.root_momentum)
        .map(|(d, l)| d.hypot(*l))
        .fold(0.0, f64::max);
    let floor = opts.conditioning_floor * grad_max;

    // one-sided d_x psi = (d_x sqrt_rho + i Lambda) e^{iS} at a boundary
    let one_sided_dpsi = |start: usize, end: usize, from_left: bool, at: f64| {
        let d = one_sided(grid, &h.dx_sqrt_rho, start, end, from_left, at)?;
        let l = one_sided(grid, &h.root_momentum, start, end, from_left, at)?;
        let s = one_sided(grid, &phase, start, end, from_left, at)?;
        Some(Complex64::new(d, l) * Complex64::from_polar(1.0, s))
    };

    let mut thetas = vec![0.0; dec.components.len()];
    let mut junctions = Vec::new();
    for k in 0..dec.components.len() {
        let c = &dec.components[k];
        let Some(b) = c.left else { continue };
        if b.kind == BoundaryKind::Fat || k == 0 {
            junctions.push(JunctionRecord {
                location: b.location,
                kind: b.kind,
                left_abs: None,
                right_abs: None,
                theta: 0.0,
                matched: false,
            });
            continue;
        }
        let p = &dec.components[k - 1];
        let left = one_sided_dpsi(p.start, p.end, false, b.location)
            .map(|z| z * Complex64::from_polar(1.0, thetas[k - 1]));
        let right = one_sided_dpsi(c.start, c.end, true, b.location);
        let mut theta = 0.0;
        let mut matched = false;
        if let (Some(l), Some(r)) = (left, right) {
            let scale = l.norm().max(r.norm());
            if scale >= floor && scale > 0.0 {
                if (l.norm() - r.norm()).abs() > opts.mismatch_tol * scale {
                    let index = (c.start - 1).min(grid.len() - 1);
                    return Err(QhdError::BoundaryMismatch {
                        index,
                        location: b.location,
                        left: l.norm(),
                        right: r.norm(),
                    });
                }
                if opts.matching == PhaseMatching::Aligned {
                    theta = l.arg() - r.arg();
                    matched = true;
                }
            }
        }
        thetas[k] = theta;
        junctions.push(JunctionRecord {
            location: b.location,
            kind: b.kind,
            left_abs: left.map(|z| z.norm()),
            right_abs: right.map(|z| z.norm()),
            theta,
            matched,
        });
    }

    // vacuum samples carry the phase of the component before them (the first
    // component's phase for leading vacuum) so psi stays continuous there
    let mut total = vec![0.0; grid.len()];
    let mut current = dec
        .components
        .first()
        .map_or(0.0, |c| phase[c.start] + thetas[0]);
    let mut k = 0;
    for (i, t) in total.iter_mut().enumerate() {
        if let Some(c) = dec.components.get(k) {
            if i >= c.start && i < c.end {
                current = phase[i] + thetas[k];
                if i + 1 == c.end {
                    k += 1;
                }
            }
        }
        *t = current;
    }
    let psi: ComplexField = h
        .sqrt_rho
        .iter()
        .zip(&total)
        .map(|(&a, &ph)| Complex64::from_polar(a, ph))
        .collect();
    let mut report = gcp_check(grid, h, law, opts)?;
    report.junctions = junctions;
    Ok((psi, report))
}
