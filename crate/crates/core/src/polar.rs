//! Polar factorization `psi = sqrt(rho) phi` and the hydrodynamic state it
//! produces. Vacuum is the thresholded set `sqrt_rho < tau_rel * max sqrt_rho`.

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eos::GammaLaw;
use crate::error::{check_finite_complex, check_finite_real, QhdError, Result};
use crate::grid::{Grid, RealField};

pub const DEFAULT_TAU_REL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VacuumMask {
    pub is_vacuum: Vec<bool>,
    pub tau_rel: f64,
}

impl VacuumMask {
    pub fn from_amplitude(sqrt_rho: &[f64], tau_rel: f64) -> Result<Self> {
        check_tau(tau_rel)?;
        let max = sqrt_rho.iter().copied().fold(0.0, f64::max);
        let cut = tau_rel * max;
        let is_vacuum = sqrt_rho
            .iter()
            .map(|&s| max == 0.0 || s < cut)
            .collect();
        Ok(Self { is_vacuum, tau_rel })
    }

    pub fn len(&self) -> usize {
        self.is_vacuum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_vacuum.is_empty()
    }

    pub fn vacuum_count(&self) -> usize {
        self.is_vacuum.iter().filter(|&&v| v).count()
    }

    /// Maximal runs of non-vacuum samples, in index order, without wrapping
    /// around the periodic seam.
    pub fn nonvacuum_runs(&self) -> Vec<Range<usize>> {
        let mut runs = Vec::new();
        let mut start = None;
        for (i, &v) in self.is_vacuum.iter().enumerate() {
            match (v, start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    runs.push(s..i);
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push(s..self.is_vacuum.len());
        }
        runs
    }
}

fn check_tau(tau_rel: f64) -> Result<()> {
    if tau_rel > 0.0 && tau_rel < 1.0 {
        Ok(())
    } else {
        Err(QhdError::InvalidParameter {
            name: "tau_rel",
            reason: format!("vacuum threshold must lie in (0, 1), got {tau_rel}"),
        })
    }
}

/// Hydrodynamic state `(sqrt_rho, Lambda)` with derived `rho = sqrt_rho^2`,
/// `J = sqrt_rho Lambda` and the amplitude gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct HydroState {
    pub sqrt_rho: RealField,
    /// `Lambda = J / sqrt_rho`, the square-root momentum.
    pub root_momentum: RealField,
    pub rho: RealField,
    pub j: RealField,
    pub dx_sqrt_rho: RealField,
}

impl HydroState {
    /// Build from amplitude, root momentum and a known amplitude gradient.
    pub fn new(
        grid: &Grid,
        sqrt_rho: RealField,
        root_momentum: RealField,
        dx_sqrt_rho: RealField,
    ) -> Result<Self> {
        grid.check_len(sqrt_rho.len())?;
        grid.check_len(root_momentum.len())?;
        grid.check_len(dx_sqrt_rho.len())?;
        check_finite_real(&sqrt_rho, "sqrt_rho")?;
        check_finite_real(&root_momentum, "Lambda")?;
        check_finite_real(&dx_sqrt_rho, "dx_sqrt_rho")?;
        if let Some((index, &value)) = sqrt_rho.iter().enumerate().find(|(_, &s)| s < 0.0) {
            return Err(QhdError::NegativeAmplitude { index, value });
        }
        let rho = sqrt_rho.iter().map(|s| s * s).collect();
        let j = sqrt_rho
            .iter()
            .zip(&root_momentum)
            .map(|(s, l)| s * l)
            .collect();
        Ok(Self {
            sqrt_rho,
            root_momentum,
            rho,
            j,
            dx_sqrt_rho,
        })
    }

    /// Build from amplitude and root momentum only. The gradient is taken by
    /// finite differences inside each non-vacuum run, never across vacuum.
    pub fn from_amplitude(
        grid: &Grid,
        sqrt_rho: RealField,
        root_momentum: RealField,
        mask: &VacuumMask,
    ) -> Result<Self> {
        grid.check_len(sqrt_rho.len())?;
        grid.check_len(mask.len())?;
        let d = component_gradient(grid, &sqrt_rho, mask);
        Self::new(grid, sqrt_rho, root_momentum, d)
    }

    pub fn vacuum(grid: &Grid) -> Self {
        let z = vec![0.0; grid.len()];
        Self {
            sqrt_rho: z.clone(),
            root_momentum: z.clone(),
            rho: z.clone(),
            j: z.clone(),
            dx_sqrt_rho: z,
        }
    }

    pub fn len(&self) -> usize {
        self.sqrt_rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sqrt_rho.is_empty()
    }

    /// Fails if some vacuum sample carries nonzero `Lambda`.
    pub fn check_vacuum_momentum(&self, mask: &VacuumMask) -> Result<()> {
        for (index, (&v, &l)) in mask.is_vacuum.iter().zip(&self.root_momentum).enumerate() {
            if v && l != 0.0 {
                return Err(QhdError::MomentumOnVacuum { index, value: l });
            }
        }
        Ok(())
    }

    pub fn mask(&self, tau_rel: f64) -> Result<VacuumMask> {
        VacuumMask::from_amplitude(&self.sqrt_rho, tau_rel)
    }
}

/// `sqrt_rho = |psi|`, `Lambda = Im(conj(phi) psi')`, `d_x sqrt_rho = Re(conj(phi) psi')`;
/// both gradients are zero on vacuum.
pub fn polar_factorize(
    grid: &Grid,
    psi: &[Complex64],
    tau_rel: f64,
) -> Result<(HydroState, VacuumMask)> {
    grid.check_len(psi.len())?;
    check_finite_complex(psi, "psi")?;
    check_tau(tau_rel)?;
    let dpsi = grid.deriv(psi, 1)?;
    let sqrt_rho: RealField = psi.iter().map(|c| c.norm()).collect();
    let mask = VacuumMask::from_amplitude(&sqrt_rho, tau_rel)?;
    let n = psi.len();
    let mut lam = vec![0.0; n];
    let mut dsr = vec![0.0; n];
    for i in 0..n {
        if mask.is_vacuum[i] {
            continue;
        }
        let phi = psi[i] / sqrt_rho[i];
        let w = phi.conj() * dpsi[i];
        lam[i] = w.im;
        dsr[i] = w.re;
    }
    let h = HydroState::new(grid, sqrt_rho, lam, dsr)?;
    Ok((h, mask))
}

/// `e = 1/2 (d_x sqrt_rho)^2 + 1/2 Lambda^2 + rho^gamma / gamma`.
pub fn energy_density(h: &HydroState, law: GammaLaw) -> RealField {
    h.dx_sqrt_rho
        .iter()
        .zip(&h.root_momentum)
        .zip(&h.rho)
        .map(|((d, l), &r)| 0.5 * d * d + 0.5 * l * l + law.internal_energy(r))
        .collect()
}

/// Unit-modulus polar factor, set to 1 on vacuum.
pub fn polar_factor(psi: &[Complex64], mask: &VacuumMask) -> Vec<Complex64> {
    psi.iter()
        .zip(&mask.is_vacuum)
        .map(|(c, &v)| if v { Complex64::new(1.0, 0.0) } else { c / c.norm() })
        .collect()
}

/// Finite-difference weights for the first derivative at offset 0 on the
/// given stencil offsets (Fornberg's recursion).
fn fd_weights(offsets: &[i64]) -> Vec<f64> {
    let m = offsets.len();
    // c[j][k]: weight of node j for derivative k
    let mut c = vec![[0.0f64; 2]; m];
    let mut c1 = 1.0;
    let mut c4 = offsets[0] as f64;
    c[0][0] = 1.0;
    for i in 1..m {
        let xi = offsets[i] as f64;
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xi;
        for j in 0..i {
            let xj = offsets[j] as f64;
            let c3 = xi - xj;
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|w| w[1]).collect()
}

/// Fourth-order finite-difference gradient of `f` inside each non-vacuum run.
/// Stencils stay within the run (wrapping the periodic seam only when the
/// neighbours there are non-vacuum); vacuum samples get 0.
pub fn component_gradient(grid: &Grid, f: &[f64], mask: &VacuumMask) -> RealField {
    let n = f.len() as i64;
    let nonvac = |i: i64| !mask.is_vacuum[i.rem_euclid(n) as usize];
    let mut out = vec![0.0; f.len()];
    for i in 0..n {
        if !nonvac(i) {
            continue;
        }
        let mut left = 0;
        while left < 4 && left + 1 < n && nonvac(i - left - 1) {
            left += 1;
        }
        let mut right = 0;
        while right < 4 && right + 1 < n && nonvac(i + right + 1) {
            right += 1;
        }
        let width = (left + right + 1).min(5);
        if width < 2 {
            continue;
        }
        // centre the stencil as far as the run allows
        let lo = (-(width / 2)).clamp(-left, right - width + 1);
        let offsets: Vec<i64> = (lo..lo + width).collect();
        let w = fd_weights(&offsets);
        let d: f64 = offsets
            .iter()
            .zip(&w)
            .map(|(&o, &wk)| wk * f[(i + o).rem_euclid(n) as usize])
            .sum();
        out[i as usize] = d / grid.dx();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn fd_weights_known_stencils() {
        let w = fd_weights(&[-2, -1, 0, 1, 2]);
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let w = fd_weights(&[0, 1]);
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn plane_wave_factorizes() {
        let l = 5.0;
        let g = Grid::new(l, 64).unwrap();
        let k = 2.0 * PI / l;
        let psi = g.sample_complex(|x| Complex64::from_polar(1.0, k * x));
        let (h, mask) = polar_factorize(&g, &psi, DEFAULT_TAU_REL).unwrap();
        assert_eq!(mask.vacuum_count(), 0);
        for i in 0..64 {
            assert!((h.sqrt_rho[i] - 1.0).abs() < 1e-14);
            assert!((h.root_momentum[i] - k).abs() < 1e-12);
            assert!(h.dx_sqrt_rho[i].abs() < 1e-12);
        }
        let e = energy_density(&h, GammaLaw::new(2.0).unwrap());
        assert!(e.iter().all(|v| (v - (0.5 * k * k + 0.5)).abs() < 1e-12));
    }

    #[test]
    fn real_psi_has_no_momentum() {
        let g = Grid::new(8.0, 128).unwrap();
        let psi = g.sample_complex(|x| Complex64::new((x - 1.0) * (-x * x).exp(), 0.0));
        let (h, _) = polar_factorize(&g, &psi, DEFAULT_TAU_REL).unwrap();
        assert!(h.root_momentum.iter().all(|l| l.abs() < 1e-12));
    }

    #[test]
    fn vacuum_state_and_mask() {
        let g = Grid::new(5.0, 32).unwrap();
        let z = vec![Complex64::new(0.0, 0.0); 32];
        let (h, mask) = polar_factorize(&g, &z, DEFAULT_TAU_REL).unwrap();
        assert_eq!(mask.vacuum_count(), 32);
        assert!(mask.nonvacuum_runs().is_empty());
        assert!(energy_density(&h, GammaLaw::new(2.0).unwrap())
            .iter()
            .all(|&v| v == 0.0));
        assert!(polar_factorize(&g, &z, 0.0).is_err());
        assert!(polar_factorize(&g, &z, 1.0).is_err());
    }

    #[test]
    fn runs_split_at_vacuum() {
        let mask = VacuumMask {
            is_vacuum: vec![true, false, false, true, false, true, true, false],
            tau_rel: 0.5,
        };
        assert_eq!(mask.nonvacuum_runs(), vec![1..3, 4..5, 7..8]);
    }

    #[test]
    fn rejects_bad_states() {
        let g = Grid::new(5.0, 16).unwrap();
        let mut s = vec![1.0; 16];
        s[3] = -0.5;
        let err = HydroState::new(&g, s, vec![0.0; 16], vec![0.0; 16]).unwrap_err();
        assert!(matches!(err, QhdError::NegativeAmplitude { index: 3, .. }));
        assert!(HydroState::new(&g, vec![1.0; 8], vec![0.0; 16], vec![0.0; 16]).is_err());
        let mut s = vec![1.0; 16];
        s[0] = 0.0;
        let mut lam = vec![0.0; 16];
        lam[0] = 2.0;
        let h = HydroState::new(&g, s, lam, vec![0.0; 16]).unwrap();
        let mask = h.mask(DEFAULT_TAU_REL).unwrap();
        assert!(matches!(
            h.check_vacuum_momentum(&mask),
            Err(QhdError::MomentumOnVacuum { index: 0, .. })
        ));
    }

    #[test]
    fn component_gradient_of_abs_profile() {
        let l = 8.0;
        let g = Grid::new(l, 1024).unwrap();
        let f = g.sample(|x| x.abs() * (-x * x / 2.0).exp());
        let mask = VacuumMask::from_amplitude(&f, DEFAULT_TAU_REL).unwrap();
        let d = component_gradient(&g, &f, &mask);
        let exact = |x: f64| x.signum() * (1.0 - x * x) * (-x * x / 2.0).exp();
        let err = g
            .x()
            .iter()
            .zip(&d)
            .zip(&mask.is_vacuum)
            .filter(|(_, &v)| !v)
            .map(|((&x, dv), _)| (dv - exact(x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "err = {err}");
    }
}
