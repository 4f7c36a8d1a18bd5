//! Strang split-step solver for the defocusing NLS
//! `i d_t psi = -1/2 d_x^2 psi + |psi|^(2(gamma-1)) psi` on the periodic grid.
//!
//! The nonlinear substep is an exact pointwise phase rotation (|psi| does not
//! change during it) and the linear substep is exact in Fourier space, so each
//! substep preserves the discrete L2 norm up to roundoff.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eos::GammaLaw;
use crate::error::{check_finite_complex, QhdError, Result};
use crate::grid::{ComplexField, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NlsParams {
    pub gamma: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub dealias: bool,
}

impl NlsParams {
    pub fn new(gamma: f64, dt: f64, t_end: f64) -> Self {
        Self {
            gamma,
            dt,
            t_end,
            dealias: false,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<GammaLaw> {
        let law = GammaLaw::new(self.gamma)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(QhdError::InvalidParameter {
                name: "dt",
                reason: format!("time step must be positive, got {}", self.dt),
            });
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(QhdError::InvalidParameter {
                name: "t_end",
                reason: format!("t_end must be >= dt, got {}", self.t_end),
            });
        }
        if self.dt >= grid.dx() * grid.dx() {
            log::warn!(
                "dt = {} is not below dx^2 = {}; splitting accuracy may degrade",
                self.dt,
                grid.dx() * grid.dx()
            );
        }
        Ok(law)
    }

    /// Number of steps needed to reach `t_end`.
    pub fn step_count(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

/// Reusable stepper holding the linear propagator for one fixed `dt`.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    grid: Grid,
    law: GammaLaw,
    half_dt: f64,
    propagator: Vec<Complex64>,
    dealias: bool,
}

impl SplitStepper {
    pub fn new(grid: &Grid, law: GammaLaw, dt: f64, dealias: bool) -> Self {
        let propagator = grid
            .wavenumbers()
            .iter()
            .map(|&k| Complex64::from_polar(1.0, -0.5 * k * k * dt))
            .collect();
        Self {
            grid: grid.clone(),
            law,
            half_dt: 0.5 * dt,
            propagator,
            dealias,
        }
    }

    fn nonlinear_half(&self, psi: &mut [Complex64]) {
        for c in psi.iter_mut() {
            let phase = -self.law.rho_pow_gm1(c.norm_sqr()) * self.half_dt;
            *c *= Complex64::from_polar(1.0, phase);
        }
    }

    /// One Strang step in place.
    pub fn step(&self, psi: &mut [Complex64]) {
        self.nonlinear_half(psi);
        self.grid.fft(psi);
        for (c, p) in psi.iter_mut().zip(&self.propagator) {
            *c *= p;
        }
        if self.dealias {
            self.grid.dealias_spectrum(psi);
        }
        self.grid.ifft(psi);
        self.nonlinear_half(psi);
    }
}

/// Advance `psi` by a single Strang step of size `dt`.
pub fn nls_step(grid: &Grid, psi: &[Complex64], dt: f64, gamma: f64) -> Result<ComplexField> {
    grid.check_len(psi.len())?;
    check_finite_complex(psi, "psi")?;
    let law = GammaLaw::new(gamma)?;
    let mut out = psi.to_vec();
    SplitStepper::new(grid, law, dt, false).step(&mut out);
    check_finite_complex(&out, "psi after step").map_err(|_| QhdError::NumericalAbort {
        step: 1,
        last_valid_time: 0.0,
    })?;
    Ok(out)
}

/// Conserved quantities of the NLS flow at one snapshot, computed from psi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub momentum: f64,
    /// `||psi||_2 ||d_x psi||_2`, the Cauchy-Schwarz scale for `|momentum|`.
    pub momentum_scale: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub params: NlsParams,
    pub times: Vec<f64>,
    pub states: Vec<ComplexField>,
    pub conservation: Vec<ConservationRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn law(&self) -> GammaLaw {
        GammaLaw::new(self.params.gamma).expect("trajectory params were validated")
    }

    /// Largest relative mass drift over the snapshots.
    pub fn max_mass_drift(&self) -> f64 {
        self.max_drift(|r| r.mass, |r0| r0.mass)
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.max_drift(|r| r.energy, |r0| r0.energy)
    }

    pub fn max_momentum_drift(&self) -> f64 {
        self.max_drift(|r| r.momentum, |r0| r0.momentum_scale.max(r0.momentum.abs()))
    }

    fn max_drift(
        &self,
        value: impl Fn(&ConservationRecord) -> f64,
        scale: impl Fn(&ConservationRecord) -> f64,
    ) -> f64 {
        let Some(first) = self.conservation.first() else {
            return 0.0;
        };
        let v0 = value(first);
        let s = scale(first).abs();
        self.conservation
            .iter()
            .map(|r| {
                let d = (value(r) - v0).abs();
                if s > 0.0 {
                    d / s
                } else {
                    d
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn mass(grid: &Grid, psi: &[Complex64]) -> f64 {
    grid.sum(&psi.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>())
}

/// `E = int 1/2 |d_x psi|^2 + |psi|^(2 gamma) / gamma`.
pub fn energy(grid: &Grid, psi: &[Complex64], law: GammaLaw) -> Result<f64> {
    let d = grid.deriv(psi, 1)?;
    let dens: Vec<f64> = psi
        .iter()
        .zip(&d)
        .map(|(p, dp)| 0.5 * dp.norm_sqr() + law.internal_energy(p.norm_sqr()))
        .collect();
    Ok(grid.sum(&dens))
}

/// `P = int Im(conj(psi) d_x psi)`.
pub fn momentum(grid: &Grid, psi: &[Complex64]) -> Result<f64> {
    let d = grid.deriv(psi, 1)?;
    let dens: Vec<f64> = psi.iter().zip(&d).map(|(p, dp)| (p.conj() * dp).im).collect();
    Ok(grid.sum(&dens))
}

pub fn conservation_record(
    grid: &Grid,
    psi: &[Complex64],
    law: GammaLaw,
    t: f64,
) -> Result<ConservationRecord> {
    let d = grid.deriv(psi, 1)?;
    let mut m = 0.0;
    let mut e = 0.0;
    let mut p = 0.0;
    let mut grad = 0.0;
    for (c, dc) in psi.iter().zip(&d) {
        let rho = c.norm_sqr();
        m += rho;
        e += 0.5 * dc.norm_sqr() + law.internal_energy(rho);
        p += (c.conj() * dc).im;
        grad += dc.norm_sqr();
    }
    let dx = grid.dx();
    Ok(ConservationRecord {
        t,
        mass: m * dx,
        energy: e * dx,
        momentum: p * dx,
        momentum_scale: ((m * dx) * (grad * dx)).sqrt(),
    })
}

/// Instantaneous `d_t psi = -i(-1/2 d_x^2 psi + |psi|^(2(gamma-1)) psi)`.
pub fn dt_psi(grid: &Grid, psi: &[Complex64], gamma: f64) -> Result<ComplexField> {
    let law = GammaLaw::new(gamma)?;
    let d2 = grid.deriv(psi, 2)?;
    let minus_i = Complex64::new(0.0, -1.0);
    Ok(psi
        .iter()
        .zip(&d2)
        .map(|(p, d2p)| minus_i * (-0.5 * d2p + law.rho_pow_gm1(p.norm_sqr()) * p))
        .collect())
}

/// Evolve to `t_end`, keeping every `save_every`-th state plus the final one.
pub fn evolve(
    grid: &Grid,
    psi0: &[Complex64],
    params: &NlsParams,
    save_every: usize,
) -> Result<Trajectory> {
    let (traj, abort) = evolve_until_abort(grid, psi0, params, save_every)?;
    match abort {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Like [`evolve`], but a mid-run blowup returns the snapshots gathered so far
/// together with the abort error instead of discarding them.
pub fn evolve_until_abort(
    grid: &Grid,
    psi0: &[Complex64],
    params: &NlsParams,
    save_every: usize,
) -> Result<(Trajectory, Option<QhdError>)> {
    grid.check_len(psi0.len())?;
    check_finite_complex(psi0, "initial psi")?;
    if save_every == 0 {
        return Err(QhdError::InvalidParameter {
            name: "save_every",
            reason: "must be at least 1".into(),
        });
    }
    let law = params.validate(grid)?;
    let n_steps = params.step_count();
    let stepper = SplitStepper::new(grid, law, params.dt, params.dealias);

    let mut traj = Trajectory {
        grid: grid.clone(),
        params: *params,
        times: vec![0.0],
        states: vec![psi0.to_vec()],
        conservation: vec![conservation_record(grid, psi0, law, 0.0)?],
    };
    let first = traj.conservation[0];

    let mut psi = psi0.to_vec();
    for step in 1..=n_steps {
        stepper.step(&mut psi);
        if psi.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            let last_valid_time = (step - 1) as f64 * params.dt;
            log::error!("non-finite state at step {step}; last valid t = {last_valid_time}");
            return Ok((
                traj,
                Some(QhdError::NumericalAbort {
                    step,
                    last_valid_time,
                }),
            ));
        }
        if step % save_every == 0 || step == n_steps {
            let t = step as f64 * params.dt;
            let rec = conservation_record(grid, &psi, law, t)?;
            log::debug!(
                "t = {t:.6}: mass drift {:.3e}, energy drift {:.3e}",
                rel(rec.mass, first.mass),
                rel(rec.energy, first.energy)
            );
            traj.times.push(t);
            traj.states.push(psi.clone());
            traj.conservation.push(rec);
        }
    }
    Ok((traj, None))
}

fn rel(a: f64, b: f64) -> f64 {
    if b != 0.0 {
        (a - b).abs() / b.abs()
    } else {
        (a - b).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{l2_norm_complex, sup_norm_complex};

    #[test]
    fn zero_stays_zero() {
        let g = Grid::new(5.0, 64).unwrap();
        let z = vec![Complex64::new(0.0, 0.0); 64];
        assert!(nls_step(&g, &z, 0.1, 2.0).unwrap().iter().all(|c| c.norm() == 0.0));
        let traj = evolve(&g, &z, &NlsParams::new(2.0, 0.01, 0.05), 1).unwrap();
        assert_eq!(traj.len(), 6);
        assert!(traj.states.iter().flatten().all(|c| c.norm() == 0.0));
        assert!(sup_norm_complex(&dt_psi(&g, &z, 2.0).unwrap()) == 0.0);
    }

    #[test]
    fn constant_state_rotates_by_omega() {
        let g = Grid::new(5.0, 64).unwrap();
        let one = vec![Complex64::new(1.0, 0.0); 64];
        let out = nls_step(&g, &one, 0.1, 2.0).unwrap();
        let expect = Complex64::from_polar(1.0, -0.1);
        assert!(out.iter().all(|c| (c - expect).norm() < 1e-12));
        let d = dt_psi(&g, &one, 2.0).unwrap();
        assert!(d.iter().all(|c| (c - Complex64::new(0.0, -1.0)).norm() < 1e-12));
    }

    #[test]
    fn step_preserves_norm() {
        let g = Grid::new(10.0, 128).unwrap();
        let psi = g.sample_complex(|x| Complex64::from_polar((-x * x).exp(), 0.3 * x));
        let out = nls_step(&g, &psi, 0.05, 2.0).unwrap();
        let a = l2_norm_complex(&g, &psi);
        let b = l2_norm_complex(&g, &out);
        assert!((a - b).abs() / a < 1e-14);
    }

    #[test]
    fn invalid_inputs() {
        let g = Grid::new(5.0, 64).unwrap();
        let z = vec![Complex64::new(0.0, 0.0); 64];
        assert!(nls_step(&g, &z, 0.1, 1.0).is_err());
        assert!(evolve(&g, &z, &NlsParams::new(2.0, 0.01, 0.05), 0).is_err());
        assert!(evolve(&g, &z, &NlsParams::new(2.0, 0.1, 0.05), 1).is_err());
        let mut bad = z.clone();
        bad[0] = Complex64::new(f64::NAN, 0.0);
        assert!(nls_step(&g, &bad, 0.1, 2.0).is_err());
    }

    #[test]
    fn blowup_reports_step() {
        // Huge amplitude with gamma large overflows the phase; the stepper must
        // stop with the step index rather than return garbage.
        let g = Grid::new(5.0, 64).unwrap();
        let psi = vec![Complex64::new(1e200, 0.0); 64];
        let (traj, abort) =
            evolve_until_abort(&g, &psi, &NlsParams::new(3.0, 0.01, 0.1), 1).unwrap();
        assert_eq!(traj.len(), 1);
        assert!(matches!(abort, Some(QhdError::NumericalAbort { step: 1, .. })));
    }

    #[test]
    fn snapshot_cadence() {
        let g = Grid::new(5.0, 64).unwrap();
        let psi = g.sample_complex(|x| Complex64::new((-x * x).exp(), 0.0));
        let traj = evolve(&g, &psi, &NlsParams::new(2.0, 0.01, 0.1), 3).unwrap();
        let expect = [0.0, 0.03, 0.06, 0.09, 0.1];
        assert_eq!(traj.times.len(), expect.len());
        for (a, b) in traj.times.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
