//! Initial-data families shared by the runner and the tests.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QhdError, Result};
use crate::grid::{ComplexField, Grid};
use crate::polar::HydroState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub amplitude: f64,
    /// `psi = A exp(-(x - x0)^2 / width^2) e^{ikx}`
    pub width: f64,
    pub center: f64,
    pub momentum: f64,
    /// Constant added to the envelope, e.g. to keep the density positive.
    pub background: f64,
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            width: 1.0,
            center: 0.0,
            momentum: 0.0,
            background: 0.0,
        }
    }
}

pub fn gaussian(grid: &Grid, p: &GaussianParams) -> Result<ComplexField> {
    if !(p.width.is_finite() && p.width > 0.0) {
        return Err(QhdError::InvalidParameter {
            name: "width",
            reason: format!("gaussian width must be positive, got {}", p.width),
        });
    }
    Ok(grid.sample_complex(|x| {
        let env = p.background + p.amplitude * (-((x - p.center) / p.width).powi(2)).exp();
        Complex64::from_polar(env, p.momentum * x)
    }))
}

/// `A e^{ikx}` with `k = 2 pi m / L`, so `m` full periods fit in half the box.
pub fn plane_wave(grid: &Grid, amplitude: f64, mode: i32) -> ComplexField {
    let k = plane_wave_k(grid, mode);
    grid.sample_complex(|x| Complex64::from_polar(amplitude, k * x))
}

pub fn plane_wave_k(grid: &Grid, mode: i32) -> f64 {
    2.0 * std::f64::consts::PI * mode as f64 / grid.half_length()
}

/// Hydrodynamic state `sqrt_rho = A |x - x0| exp(-(x - x0)^2 / (2 w^2))`,
/// `Lambda = 0`, with the exact one-sided gradient.
pub fn abs_x_bump(grid: &Grid, amplitude: f64, width: f64, center: f64) -> Result<HydroState> {
    if !(width.is_finite() && width > 0.0) {
        return Err(QhdError::InvalidParameter {
            name: "width",
            reason: format!("bump width must be positive, got {width}"),
        });
    }
    let s = grid.sample(|x| {
        let y = x - center;
        amplitude * y.abs() * (-0.5 * (y / width).powi(2)).exp()
    });
    let d = grid.sample(|x| {
        let y = x - center;
        if y == 0.0 {
            0.0
        } else {
            amplitude * y.signum() * (1.0 - (y / width).powi(2)) * (-0.5 * (y / width).powi(2)).exp()
        }
    });
    HydroState::new(grid, s, vec![0.0; grid.len()], d)
}
