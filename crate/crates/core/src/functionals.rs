//! Scalar functionals and identity residuals of the hydrodynamic flow.
//!
//! Per-snapshot work ([`Snapshot`]) is independent and runs through
//! [`crate::par`]; the trajectory-level reports (time derivatives, time
//! integrals) are assembled sequentially afterwards.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::decay_fit::fit_decay;
use crate::eos::GammaLaw;
use crate::error::Result;
use crate::grid::{l2_norm, sup_norm, ComplexField, Grid, RealField};
use crate::nls::{dt_psi, Trajectory};
use crate::par::{map_range, Execution};
use crate::polar::{energy_density, polar_factorize, HydroState, VacuumMask};

/// Samples with `|x| > BOUNDARY_FRAC * L` are monitored for density leaking
/// into the periodic images.
pub const BOUNDARY_FRAC: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct ChemicalFields {
    /// Generalized chemical potential, zero on vacuum.
    pub lambda: RealField,
    /// `xi = sqrt_rho * lambda`.
    pub xi: RealField,
    /// `d_t sqrt_rho = -d_x J / (2 sqrt_rho)`, zero on vacuum.
    pub dt_sqrt_rho: RealField,
    /// `Lambda lambda - d_t sqrt_rho d_x sqrt_rho`.
    pub entropy_flux: RealField,
}

impl ChemicalFields {
    pub fn zeros(n: usize) -> Self {
        Self {
            lambda: vec![0.0; n],
            xi: vec![0.0; n],
            dt_sqrt_rho: vec![0.0; n],
            entropy_flux: vec![0.0; n],
        }
    }
}

/// `lambda = -1/2 d_x^2 sqrt_rho + 1/2 Lambda^2 / sqrt_rho + f'(rho) sqrt_rho`
/// off vacuum, with `d_x^2 sqrt_rho = (1/2 d_x^2 rho - (d_x sqrt_rho)^2) / sqrt_rho`.
pub fn compute_lambda(
    grid: &Grid,
    h: &HydroState,
    mask: &VacuumMask,
    law: GammaLaw,
) -> Result<ChemicalFields> {
    grid.check_len(h.len())?;
    grid.check_len(mask.len())?;
    let d2rho = grid.deriv_real(&h.rho, 2)?;
    let dj = grid.deriv_real(&h.j, 1)?;
    let n = h.len();
    let mut out = ChemicalFields::zeros(n);
    for i in 0..n {
        if mask.is_vacuum[i] {
            continue;
        }
        let s = h.sqrt_rho[i];
        let ds = h.dx_sqrt_rho[i];
        let lam_big = h.root_momentum[i];
        let d2s = (0.5 * d2rho[i] - ds * ds) / s;
        let lam = -0.5 * d2s + 0.5 * lam_big * lam_big / s + law.enthalpy(h.rho[i]) * s;
        let dts = -dj[i] / (2.0 * s);
        out.lambda[i] = lam;
        out.xi[i] = s * lam;
        out.dt_sqrt_rho[i] = dts;
        out.entropy_flux[i] = lam_big * lam - dts * ds;
    }
    Ok(out)
}

/// The second route to `xi`: `-1/4 d_x^2 rho + e + p(rho)`, evaluated without
/// dividing by the amplitude.
pub fn xi_direct(grid: &Grid, h: &HydroState, law: GammaLaw) -> Result<RealField> {
    let d2rho = grid.deriv_real(&h.rho, 2)?;
    let e = energy_density(h, law);
    Ok(d2rho
        .iter()
        .zip(&e)
        .zip(&h.rho)
        .map(|((d2, e), &r)| -0.25 * d2 + e + law.pressure(r))
        .collect())
}

/// `I = int lambda^2 + (d_t sqrt_rho)^2`.
pub fn functional_i(grid: &Grid, chem: &ChemicalFields) -> f64 {
    let dens: Vec<f64> = chem
        .lambda
        .iter()
        .zip(&chem.dt_sqrt_rho)
        .map(|(l, d)| l * l + d * d)
        .collect();
    grid.sum(&dens)
}

/// `int |d_t psi|^2` with `d_t psi` taken from the equation.
pub fn functional_i_schrodinger(grid: &Grid, psi: &[Complex64], law: GammaLaw) -> Result<f64> {
    let d = dt_psi(grid, psi, law.gamma())?;
    Ok(grid.sum(&d.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>()))
}

pub fn hydro_energy(grid: &Grid, h: &HydroState, law: GammaLaw) -> f64 {
    grid.sum(&energy_density(h, law))
}

pub fn moment_inertia(grid: &Grid, h: &HydroState) -> f64 {
    let dens: Vec<f64> = grid.x().iter().zip(&h.rho).map(|(x, r)| 0.5 * x * x * r).collect();
    grid.sum(&dens)
}

/// `(H, H_alt)`: `H = int x^2 rho / 2 - t int x J + t^2 E` and the
/// sum-of-squares form `int t^2/2 (d_x sqrt_rho)^2 + t^2/2 (Lambda - x sqrt_rho / t)^2 + t^2 f`.
/// At `t = 0` the second form is defined as `int x^2 rho / 2`.
pub fn functional_h(grid: &Grid, h: &HydroState, t: f64, energy: f64, law: GammaLaw) -> (f64, f64) {
    let x = grid.x();
    let mut m2 = 0.0;
    let mut xj = 0.0;
    for i in 0..h.len() {
        m2 += 0.5 * x[i] * x[i] * h.rho[i];
        xj += x[i] * h.j[i];
    }
    let dx = grid.dx();
    let big_h = m2 * dx - t * xj * dx + t * t * energy;
    if t == 0.0 {
        return (big_h, m2 * dx);
    }
    let mut alt = 0.0;
    for i in 0..h.len() {
        let ds = h.dx_sqrt_rho[i];
        let w = h.root_momentum[i] - x[i] / t * h.sqrt_rho[i];
        alt += 0.5 * ds * ds + 0.5 * w * w + law.internal_energy(h.rho[i]);
    }
    (big_h, t * t * alt * dx)
}

/// Per-snapshot scalars used by the frames and the trajectory reports.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SnapshotScalars {
    pub mass: f64,
    pub energy: f64,
    pub momentum: f64,
    pub i_functional: f64,
    /// `int |d_t psi|^2`, when the snapshot came from a wave function.
    pub i_schrodinger: Option<f64>,
    pub h: f64,
    pub h_alt: f64,
    pub moment_inertia: f64,
    pub boundary_rho: f64,
    pub rho_max: f64,
    pub sqrt_rho_max: f64,
    /// `||d_x sqrt_rho||_2`
    pub grad_l2: f64,
    /// `1/2 ||Lambda||_2^2`
    pub kinetic: f64,
    /// `int (Lambda - x sqrt_rho / t)^2`, zero at `t = 0`.
    pub pc_kinetic: f64,
    /// `int rho^gamma`
    pub rho_gamma_int: f64,
    /// `int rho p(rho)`
    pub rho_p_int: f64,
    /// `int (d_x rho)^2`
    pub dx_rho_sq_int: f64,
    /// `int rho^(gamma+1)`
    pub rho_gp1_int: f64,
    pub j_l1: f64,
    pub e_l2_sq: f64,
    pub d2rho_l2_sq: f64,
    pub dx_j_l2: f64,
    /// `sup |sqrt_rho lambda - (-1/4 d_x^2 rho + e + p)|`
    pub xi_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub psi: Option<ComplexField>,
    pub hydro: HydroState,
    pub mask: VacuumMask,
    pub chem: ChemicalFields,
    pub energy_density: RealField,
    pub scalars: SnapshotScalars,
}

impl Snapshot {
    pub fn from_psi(
        grid: &Grid,
        psi: &[Complex64],
        t: f64,
        law: GammaLaw,
        tau_rel: f64,
    ) -> Result<Self> {
        let (h, mask) = polar_factorize(grid, psi, tau_rel)?;
        let mut s = Self::from_hydro(grid, h, mask, t, law)?;
        s.scalars.i_schrodinger = Some(functional_i_schrodinger(grid, psi, law)?);
        s.psi = Some(psi.to_vec());
        Ok(s)
    }

    pub fn from_hydro(
        grid: &Grid,
        h: HydroState,
        mask: VacuumMask,
        t: f64,
        law: GammaLaw,
    ) -> Result<Self> {
        let chem = compute_lambda(grid, &h, &mask, law)?;
        let e = energy_density(&h, law);
        let dx = grid.dx();
        let x = grid.x();
        let dxrho = grid.deriv_real(&h.rho, 1)?;
        let d2rho = grid.deriv_real(&h.rho, 2)?;
        let dxj = grid.deriv_real(&h.j, 1)?;
        let xi2 = xi_direct(grid, &h, law)?;

        let energy = grid.sum(&e);
        let (big_h, h_alt) = functional_h(grid, &h, t, energy, law);
        let mut sc = SnapshotScalars {
            mass: grid.sum(&h.rho),
            energy,
            momentum: grid.sum(&h.j),
            i_functional: functional_i(grid, &chem),
            i_schrodinger: None,
            h: big_h,
            h_alt,
            moment_inertia: moment_inertia(grid, &h),
            boundary_rho: grid
                .edge_indices(BOUNDARY_FRAC)
                .map(|i| h.rho[i])
                .fold(0.0, f64::max),
            rho_max: sup_norm(&h.rho),
            sqrt_rho_max: sup_norm(&h.sqrt_rho),
            grad_l2: l2_norm(grid, &h.dx_sqrt_rho),
            kinetic: 0.5 * l2_norm(grid, &h.root_momentum).powi(2),
            dx_j_l2: l2_norm(grid, &dxj),
            ..Default::default()
        };
        for i in 0..h.len() {
            let r = h.rho[i];
            let rg = r * law.rho_pow_gm1(r);
            sc.rho_gamma_int += rg;
            sc.rho_p_int += r * law.pressure(r);
            sc.dx_rho_sq_int += dxrho[i] * dxrho[i];
            sc.rho_gp1_int += rg * r;
            sc.j_l1 += h.j[i].abs();
            sc.e_l2_sq += e[i] * e[i];
            sc.d2rho_l2_sq += d2rho[i] * d2rho[i];
            if t > 0.0 {
                let w = h.root_momentum[i] - x[i] / t * h.sqrt_rho[i];
                sc.pc_kinetic += w * w;
            }
            sc.xi_mismatch = sc.xi_mismatch.max((chem.xi[i] - xi2[i]).abs());
        }
        for v in [
            &mut sc.rho_gamma_int,
            &mut sc.rho_p_int,
            &mut sc.dx_rho_sq_int,
            &mut sc.rho_gp1_int,
            &mut sc.j_l1,
            &mut sc.e_l2_sq,
            &mut sc.d2rho_l2_sq,
            &mut sc.pc_kinetic,
        ] {
            *v *= dx;
        }
        Ok(Self {
            t,
            psi: None,
            hydro: h,
            mask,
            chem,
            energy_density: e,
            scalars: sc,
        })
    }
}

/// Compute snapshots for every stored state of a trajectory.
pub fn trajectory_snapshots(
    traj: &Trajectory,
    tau_rel: f64,
    exec: Execution,
) -> Result<Vec<Snapshot>> {
    let law = traj.law();
    map_range(traj.len(), exec, |i| {
        Snapshot::from_psi(&traj.grid, &traj.states[i], traj.times[i], law, tau_rel)
    })
    .into_iter()
    .collect()
}

/// Weights of the three-point (second-order) first derivative at `times[i]`
/// on a possibly non-uniform time grid; one-sided at the ends.
fn time_derivative_weights(times: &[f64], i: usize) -> [(usize, f64); 3] {
    let n = times.len();
    let (a, b, c) = if i == 0 {
        (0, 1, 2)
    } else if i == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (i - 1, i, i + 1)
    };
    let t = times[i];
    let (ta, tb, tc) = (times[a], times[b], times[c]);
    // derivative of the Lagrange interpolant through (a, b, c) at t
    let wa = ((t - tb) + (t - tc)) / ((ta - tb) * (ta - tc));
    let wb = ((t - ta) + (t - tc)) / ((tb - ta) * (tb - tc));
    let wc = ((t - ta) + (t - tb)) / ((tc - ta) * (tc - tb));
    [(a, wa), (b, wb), (c, wc)]
}

fn time_derivative(times: &[f64], values: &[f64], i: usize) -> f64 {
    time_derivative_weights(times, i)
        .iter()
        .map(|&(k, w)| w * values[k])
        .sum()
}

/// Cumulative trapezoid of `values` over `times`, starting at 0.
fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcReport {
    pub times: Vec<f64>,
    /// `L(t) = H(t) + int_0^t s int (1 - 3/gamma) rho^gamma dx ds`
    pub left: Vec<f64>,
    /// `R = int x^2 rho_0 / 2`
    pub right: f64,
    /// `max_t (L(t) - R)`
    pub margin: f64,
    /// `margin / R` (or `margin` when `R = 0`).
    pub relative_margin: f64,
    /// `max_t |L(t) - R| / (1 + R)`; for energy-conserving flows the
    /// inequality is an equality.
    pub identity_residual: f64,
    /// Log-log slope of `F(t) = t^2/gamma int rho^gamma` over the later half
    /// of the run.
    pub f_growth_slope: Option<f64>,
    /// `3 - gamma`, the envelope exponent for `F` when `gamma < 3`.
    pub f_growth_envelope: f64,
}

pub fn pc_report(snaps: &[Snapshot], law: GammaLaw) -> PcReport {
    let g = law.gamma();
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let integrand: Vec<f64> = snaps
        .iter()
        .map(|s| s.t * (1.0 - 3.0 / g) * s.scalars.rho_gamma_int)
        .collect();
    let acc = cumulative_trapezoid(&times, &integrand);
    let right = snaps.first().map_or(0.0, |s| s.scalars.moment_inertia);
    let left: Vec<f64> = snaps.iter().zip(&acc).map(|(s, a)| s.scalars.h + a).collect();
    let margin = left.iter().map(|l| l - right).fold(f64::NEG_INFINITY, f64::max);
    let margin = if margin.is_finite() { margin } else { 0.0 };
    let identity_residual = left
        .iter()
        .map(|l| (l - right).abs() / (1.0 + right))
        .fold(0.0, f64::max);

    let half = times.len() / 2;
    let (ft, fv): (Vec<f64>, Vec<f64>) = snaps[half..]
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| (s.t, s.t * s.t / g * s.scalars.rho_gamma_int))
        .unzip();
    let f_growth_slope = match (ft.first(), ft.last()) {
        (Some(&a), Some(&b)) => fit_decay(&ft, &fv, (a, b)).ok().map(|f| f.slope),
        _ => None,
    };
    PcReport {
        times,
        left,
        right,
        margin,
        relative_margin: if right > 0.0 { margin / right } else { margin },
        identity_residual,
        f_growth_slope,
        f_growth_envelope: 3.0 - g,
    }
}

/// Pseudo-conformal inequality terms along a trajectory.
pub fn pseudo_conformal_check(traj: &Trajectory, tau_rel: f64) -> Result<PcReport> {
    let snaps = trajectory_snapshots(traj, tau_rel, Execution::default_mode())?;
    Ok(pc_report(&snaps, traj.law()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorawetzReport {
    pub times: Vec<f64>,
    /// `int rho G` per snapshot.
    pub functional: Vec<f64>,
    /// `int rho p(rho) + 1/2 int (d_x rho)^2` per snapshot.
    pub dissipation: Vec<f64>,
    /// `d/dt int rho G + dissipation`, at interior snapshots only.
    pub residual: Vec<f64>,
    pub residual_times: Vec<f64>,
    pub max_abs_residual: f64,
    /// `max_abs_residual / dissipation(0)`
    pub relative_residual: f64,
    /// Offset `C` in `G = int_{-L}^x J + C`, chosen above `sup_t ||J||_1`.
    pub offset: f64,
    pub g_sup: f64,
    pub mass: f64,
    /// `int int (d_x rho)^2 dx dt`
    pub accumulated_dx_rho_sq: f64,
    /// `int int rho^(gamma+1) dx dt`
    pub accumulated_rho_gp1: f64,
    /// `(1 - 1/gamma) int int rho^(gamma+1) + 1/2 int int (d_x rho)^2`
    pub combined: f64,
    /// `2 M sup ||G||_inf`
    pub bound: f64,
    pub combined_ok: bool,
    /// `int int (d_x rho)^2 < 2 M sup ||G||_inf`
    pub gradient_ok: bool,
    /// `2 (M + E)^2`, a bound in terms of conserved quantities only.
    pub mass_energy_bound: f64,
}

pub fn morawetz_report(grid: &Grid, snaps: &[Snapshot], law: GammaLaw) -> Result<MorawetzReport> {
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let j_l1_max = snaps.iter().map(|s| s.scalars.j_l1).fold(0.0, f64::max);
    let offset = 1.001 * j_l1_max;
    let mut functional = Vec::with_capacity(snaps.len());
    let mut g_sup: f64 = 0.0;
    for s in snaps {
        let g = grid.antiderivative(&s.hydro.j, offset)?;
        g_sup = g_sup.max(sup_norm(&g));
        let dens: Vec<f64> = s.hydro.rho.iter().zip(&g).map(|(r, g)| r * g).collect();
        functional.push(grid.sum(&dens));
    }
    let dissipation: Vec<f64> = snaps
        .iter()
        .map(|s| s.scalars.rho_p_int + 0.5 * s.scalars.dx_rho_sq_int)
        .collect();

    let mut residual = Vec::new();
    let mut residual_times = Vec::new();
    if snaps.len() >= 3 {
        for i in 1..snaps.len() - 1 {
            residual.push(time_derivative(&times, &functional, i) + dissipation[i]);
            residual_times.push(times[i]);
        }
    }
    let max_abs_residual = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let d0 = dissipation.first().copied().unwrap_or(0.0);

    let dxr: Vec<f64> = snaps.iter().map(|s| s.scalars.dx_rho_sq_int).collect();
    let rgp: Vec<f64> = snaps.iter().map(|s| s.scalars.rho_gp1_int).collect();
    let accumulated_dx_rho_sq = cumulative_trapezoid(&times, &dxr).last().copied().unwrap_or(0.0);
    let accumulated_rho_gp1 = cumulative_trapezoid(&times, &rgp).last().copied().unwrap_or(0.0);
    let g = law.gamma();
    let combined = (1.0 - 1.0 / g) * accumulated_rho_gp1 + 0.5 * accumulated_dx_rho_sq;
    let mass = snaps.first().map_or(0.0, |s| s.scalars.mass);
    let energy = snaps.first().map_or(0.0, |s| s.scalars.energy);
    let bound = 2.0 * mass * g_sup;
    Ok(MorawetzReport {
        times,
        functional,
        dissipation,
        residual,
        residual_times,
        max_abs_residual,
        relative_residual: if d0 > 0.0 { max_abs_residual / d0 } else { max_abs_residual },
        offset,
        g_sup,
        mass,
        accumulated_dx_rho_sq,
        accumulated_rho_gp1,
        combined,
        bound,
        combined_ok: combined.is_finite() && combined <= bound,
        gradient_ok: accumulated_dx_rho_sq.is_finite()
            && (accumulated_dx_rho_sq < bound || bound == 0.0 && accumulated_dx_rho_sq == 0.0),
        mass_energy_bound: 2.0 * (mass + energy).powi(2),
    })
}

pub fn morawetz_residual(traj: &Trajectory, tau_rel: f64) -> Result<MorawetzReport> {
    let snaps = trajectory_snapshots(traj, tau_rel, Execution::default_mode())?;
    morawetz_report(&traj.grid, &snaps, traj.law())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub times: Vec<f64>,
    /// `||R||_1` per snapshot (one-sided time differences at the ends).
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    /// Largest `||R||_2` over interior snapshots.
    pub max_l2_interior: f64,
}

/// Pointwise residual `d_t e + d_x(Lambda lambda - d_t sqrt_rho d_x sqrt_rho)`
/// at snapshot `i`.
pub fn entropy_residual_field(grid: &Grid, snaps: &[Snapshot], i: usize) -> Result<RealField> {
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let w = time_derivative_weights(&times, i);
    let dflux = grid.deriv_real(&snaps[i].chem.entropy_flux, 1)?;
    Ok((0..grid.len())
        .map(|x| {
            w.iter()
                .map(|&(k, wk)| wk * snaps[k].energy_density[x])
                .sum::<f64>()
                + dflux[x]
        })
        .collect())
}

pub fn entropy_residual(grid: &Grid, snaps: &[Snapshot], exec: Execution) -> Result<EntropyReport> {
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    if snaps.len() < 3 {
        return Ok(EntropyReport {
            l1: vec![0.0; times.len()],
            l2: vec![0.0; times.len()],
            times,
            max_l2_interior: 0.0,
        });
    }
    let norms: Vec<(f64, f64)> = map_range(snaps.len(), exec, |i| {
        entropy_residual_field(grid, snaps, i)
            .map(|r| (grid.sum(&r.iter().map(|v| v.abs()).collect::<Vec<_>>()), l2_norm(grid, &r)))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (l1, l2): (Vec<f64>, Vec<f64>) = norms.into_iter().unzip();
    let max_l2_interior = l2[1..l2.len() - 1].iter().copied().fold(0.0, f64::max);
    Ok(EntropyReport {
        times,
        l1,
        l2,
        max_l2_interior,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    /// `max_t I(t) / I(0)`
    pub max_ratio: f64,
    /// Rate constant fitted at `t = 0`:
    /// `c = (gamma - 1) ||rho(0)||_inf^(gamma-1) / (M + E)^((gamma-1)/2)`.
    /// Not an a priori constant.
    pub c_fitted: f64,
    /// `exp(int_0^T c (M+E)^((gamma-1)/2) ds)` at the final time.
    pub envelope_final: f64,
    /// `exp((gamma - 1) (M + E)^(gamma-1) T)`, from `||rho||_inf <= M + E`.
    pub rigorous_envelope_final: f64,
    pub all_finite: bool,
    pub exceeded: bool,
    pub first_exceed_time: Option<f64>,
}

/// Tolerance on `I(t) <= envelope(t) I(0)`.
pub const GRONWALL_TOL: f64 = 1e-3;

pub fn i_growth_check(frames: &[DiagnosticsFrame], law: GammaLaw) -> GronwallReport {
    let g = law.gamma();
    let Some(f0) = frames.first() else {
        return GronwallReport {
            max_ratio: 1.0,
            c_fitted: 0.0,
            envelope_final: 1.0,
            rigorous_envelope_final: 1.0,
            all_finite: true,
            exceeded: false,
            first_exceed_time: None,
        };
    };
    let i0 = f0.i_functional;
    let me0 = f0.mass + f0.energy;
    let c = if me0 > 0.0 {
        (g - 1.0) * f0.rho_max.powf(g - 1.0) / me0.powf(0.5 * (g - 1.0))
    } else {
        0.0
    };
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let rate: Vec<f64> = frames
        .iter()
        .map(|f| c * (f.mass + f.energy).max(0.0).powf(0.5 * (g - 1.0)))
        .collect();
    let acc = cumulative_trapezoid(&times, &rate);
    let mut max_ratio: f64 = 1.0;
    let mut first_exceed_time = None;
    let mut all_finite = true;
    for (f, a) in frames.iter().zip(&acc) {
        all_finite &= f.i_functional.is_finite();
        let ratio = if i0 > 0.0 { f.i_functional / i0 } else { 1.0 };
        max_ratio = max_ratio.max(ratio);
        if i0 > 0.0 && ratio > a.exp() * (1.0 + GRONWALL_TOL) && first_exceed_time.is_none() {
            first_exceed_time = Some(f.t);
        }
    }
    let t_end = times.last().copied().unwrap_or(0.0);
    GronwallReport {
        max_ratio,
        c_fitted: c,
        envelope_final: acc.last().copied().unwrap_or(0.0).exp(),
        rigorous_envelope_final: ((g - 1.0) * me0.powf(g - 1.0) * t_end).exp(),
        all_finite,
        exceeded: first_exceed_time.is_some() || !all_finite,
        first_exceed_time,
    }
}

/// Space-time norms of the energy estimate, against the `(1 + T)^(1/2)` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeReport {
    pub horizon: f64,
    pub e_l2tx: f64,
    pub d2rho_l2tx: f64,
    pub dx_j_linf_l2: f64,
    pub scale: f64,
}

pub fn space_time_report(snaps: &[Snapshot]) -> SpaceTimeReport {
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let e2: Vec<f64> = snaps.iter().map(|s| s.scalars.e_l2_sq).collect();
    let r2: Vec<f64> = snaps.iter().map(|s| s.scalars.d2rho_l2_sq).collect();
    let last = |v: Vec<f64>| v.last().copied().unwrap_or(0.0);
    let horizon = times.last().copied().unwrap_or(0.0);
    SpaceTimeReport {
        horizon,
        e_l2tx: last(cumulative_trapezoid(&times, &e2)).sqrt(),
        d2rho_l2tx: last(cumulative_trapezoid(&times, &r2)).sqrt(),
        dx_j_linf_l2: snaps.iter().map(|s| s.scalars.dx_j_l2).fold(0.0, f64::max),
        scale: (1.0 + horizon).sqrt(),
    }
}

/// One row of `diagnostics.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsFrame {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub momentum: f64,
    pub i_functional: f64,
    pub h: f64,
    pub h_alt: f64,
    pub moment_inertia: f64,
    /// `int rho G`
    pub morawetz: f64,
    pub entropy_residual_norm: f64,
    pub boundary_rho: f64,
    /// `||rho||_inf`; not part of the CSV schema.
    pub rho_max: f64,
}

impl DiagnosticsFrame {
    pub const CSV_COLUMNS: [&'static str; 11] = [
        "t",
        "M",
        "E",
        "P",
        "I",
        "H",
        "H_alt",
        "moment_inertia",
        "morawetz",
        "entropy_residual_norm",
        "boundary_rho",
    ];

    pub fn csv_values(&self) -> [f64; 11] {
        [
            self.t,
            self.mass,
            self.energy,
            self.momentum,
            self.i_functional,
            self.h,
            self.h_alt,
            self.moment_inertia,
            self.morawetz,
            self.entropy_residual_norm,
            self.boundary_rho,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAnalysis {
    pub frames: Vec<DiagnosticsFrame>,
    pub pseudo_conformal: PcReport,
    pub morawetz: MorawetzReport,
    pub entropy: EntropyReport,
    pub gronwall: GronwallReport,
    pub space_time: SpaceTimeReport,
    /// `max_t |H - H_alt| / (1 + |H|)` over `t > 0`.
    pub h_form_gap: f64,
    /// `max_t sup |sqrt_rho lambda - (-1/4 d_x^2 rho + e + p)|`
    pub xi_mismatch: f64,
    /// `max_t |I - int |d_t psi|^2| / I`, when wave functions are available.
    pub i_mismatch: Option<f64>,
}

/// Frames and all trajectory-level reports for a list of snapshots.
pub fn analyze_snapshots(
    grid: &Grid,
    snaps: &[Snapshot],
    law: GammaLaw,
    exec: Execution,
) -> Result<RunAnalysis> {
    let morawetz = morawetz_report(grid, snaps, law)?;
    let entropy = entropy_residual(grid, snaps, exec)?;
    let frames: Vec<DiagnosticsFrame> = snaps
        .iter()
        .enumerate()
        .map(|(i, s)| DiagnosticsFrame {
            t: s.t,
            mass: s.scalars.mass,
            energy: s.scalars.energy,
            momentum: s.scalars.momentum,
            i_functional: s.scalars.i_functional,
            h: s.scalars.h,
            h_alt: s.scalars.h_alt,
            moment_inertia: s.scalars.moment_inertia,
            morawetz: morawetz.functional[i],
            entropy_residual_norm: entropy.l2[i],
            boundary_rho: s.scalars.boundary_rho,
            rho_max: s.scalars.rho_max,
        })
        .collect();
    let h_form_gap = snaps
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| (s.scalars.h - s.scalars.h_alt).abs() / (1.0 + s.scalars.h.abs()))
        .fold(0.0, f64::max);
    let xi_mismatch = snaps.iter().map(|s| s.scalars.xi_mismatch).fold(0.0, f64::max);
    let i_mismatch = snaps
        .iter()
        .map(|s| {
            s.scalars.i_schrodinger.map(|is| {
                let i = s.scalars.i_functional;
                if i > 0.0 {
                    (i - is).abs() / i
                } else {
                    is.abs()
                }
            })
        })
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max));
    Ok(RunAnalysis {
        gronwall: i_growth_check(&frames, law),
        pseudo_conformal: pc_report(snaps, law),
        space_time: space_time_report(snaps),
        frames,
        morawetz,
        entropy,
        h_form_gap,
        xi_mismatch,
        i_mismatch,
    })
}

pub fn analyze_trajectory(
    traj: &Trajectory,
    tau_rel: f64,
    exec: Execution,
) -> Result<(Vec<Snapshot>, RunAnalysis)> {
    let snaps = trajectory_snapshots(traj, tau_rel, exec)?;
    let analysis = analyze_snapshots(&traj.grid, &snaps, traj.law(), exec)?;
    Ok((snaps, analysis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nls::{energy, evolve, NlsParams};
    use crate::polar::DEFAULT_TAU_REL;
    use std::f64::consts::PI;

    fn law(g: f64) -> GammaLaw {
        GammaLaw::new(g).unwrap()
    }

    #[test]
    fn time_weights_exact_for_quadratics() {
        let times = [0.0, 0.1, 0.25, 0.3, 0.5];
        let f: Vec<f64> = times.iter().map(|t| 3.0 * t * t - t + 2.0).collect();
        for i in 0..times.len() {
            let d = time_derivative(&times, &f, i);
            assert!((d - (6.0 * times[i] - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_state_lambda() {
        let g = Grid::new(5.0, 32).unwrap();
        let h = HydroState::new(&g, vec![1.0; 32], vec![0.0; 32], vec![0.0; 32]).unwrap();
        let m = h.mask(DEFAULT_TAU_REL).unwrap();
        let c = compute_lambda(&g, &h, &m, law(2.0)).unwrap();
        assert!(c.lambda.iter().all(|l| (l - 1.0).abs() < 1e-14));
        assert!(c.xi.iter().all(|l| (l - 1.0).abs() < 1e-14));
        assert!((functional_i(&g, &c) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn plane_wave_lambda_includes_kinetic_term() {
        let l = 5.0;
        let g = Grid::new(l, 32).unwrap();
        let k = 2.0 * PI / l;
        let h = HydroState::new(&g, vec![1.0; 32], vec![k; 32], vec![0.0; 32]).unwrap();
        let m = h.mask(DEFAULT_TAU_REL).unwrap();
        let c = compute_lambda(&g, &h, &m, law(2.0)).unwrap();
        assert!(c.lambda.iter().all(|v| (v - (0.5 * k * k + 1.0)).abs() < 1e-12));
        assert!(c.dt_sqrt_rho.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn vacuum_state_everything_zero() {
        let g = Grid::new(5.0, 32).unwrap();
        let h = HydroState::vacuum(&g);
        let m = h.mask(DEFAULT_TAU_REL).unwrap();
        let c = compute_lambda(&g, &h, &m, law(2.0)).unwrap();
        assert!(c.lambda.iter().chain(&c.xi).all(|&v| v == 0.0));
        assert_eq!(functional_i(&g, &c), 0.0);
        assert_eq!(functional_h(&g, &h, 1.0, 0.0, law(2.0)), (0.0, 0.0));
    }

    #[test]
    fn gaussian_routes_agree() {
        let g = Grid::new(10.0, 256).unwrap();
        let psi = g.sample_complex(|x| Complex64::from_polar((-x * x).exp(), 0.4 * x));
        let s = Snapshot::from_psi(&g, &psi, 0.0, law(2.0), DEFAULT_TAU_REL).unwrap();
        assert!(s.scalars.xi_mismatch < 1e-8, "{}", s.scalars.xi_mismatch);
        let is = s.scalars.i_schrodinger.unwrap();
        assert!((s.scalars.i_functional - is).abs() / is < 1e-8);
        let e_nls = energy(&g, &psi, law(2.0)).unwrap();
        assert!((s.scalars.energy - e_nls).abs() / e_nls < 1e-10);
        let (h, h_alt) = functional_h(&g, &s.hydro, 0.7, s.scalars.energy, law(2.0));
        assert!((h - h_alt).abs() < 1e-8 * (1.0 + h.abs()));
        assert_eq!(s.scalars.h, s.scalars.moment_inertia);
    }

    #[test]
    fn short_run_reports() {
        let g = Grid::new(10.0, 256).unwrap();
        let psi = g.sample_complex(|x| Complex64::new((-x * x).exp(), 0.0));
        let traj = evolve(&g, &psi, &NlsParams::new(2.0, 1e-3, 0.2), 10).unwrap();
        let (snaps, a) = analyze_trajectory(&traj, DEFAULT_TAU_REL, Execution::Sequential).unwrap();
        assert_eq!(snaps.len(), a.frames.len());
        assert!(a.h_form_gap < 1e-8);
        assert!(a.morawetz.relative_residual < 2e-3);
        assert!(a.morawetz.combined_ok && a.morawetz.gradient_ok);
        assert!(!a.gronwall.exceeded);
        assert!(a.pseudo_conformal.identity_residual < 1e-6);
        let (_, b) = analyze_trajectory(&traj, DEFAULT_TAU_REL, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gronwall_trivial_cases() {
        let r = i_growth_check(&[], law(2.0));
        assert!(!r.exceeded);
        let f = DiagnosticsFrame {
            t: 0.0,
            mass: 1.0,
            energy: 1.0,
            momentum: 0.0,
            i_functional: 2.0,
            h: 0.0,
            h_alt: 0.0,
            moment_inertia: 0.0,
            morawetz: 0.0,
            entropy_residual_norm: 0.0,
            boundary_rho: 0.0,
            rho_max: 1.0,
        };
        let frames: Vec<_> = (0..5).map(|i| DiagnosticsFrame { t: i as f64 * 0.1, ..f }).collect();
        let r = i_growth_check(&frames, law(2.0));
        assert_eq!(r.max_ratio, 1.0);
        assert!(!r.exceeded);
    }
}
