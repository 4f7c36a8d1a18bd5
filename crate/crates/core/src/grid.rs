//! Periodic grid on `[-L, L)` with FFT-based differentiation and quadrature.
//!
//! Every other module goes through these kernels. The grid owns immutable FFT
//! plans behind an `Arc`, so cloning a [`Grid`] is cheap and the plans can be
//! shared across worker threads.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_finite_complex, check_finite_real, QhdError, Result};

/// Real samples on a grid.
pub type RealField = Vec<f64>;
/// Complex samples on a grid.
pub type ComplexField = Vec<Complex64>;

const MIN_POINTS: usize = 16;

#[derive(Clone)]
pub struct Grid {
    half_length: f64,
    n: usize,
    dx: f64,
    x: Arc<[f64]>,
    k: Arc<[f64]>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("n", &self.n)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.half_length == other.half_length
    }
}

impl Grid {
    pub fn new(half_length: f64, n: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(QhdError::InvalidGrid(format!(
                "half length must be positive and finite, got {half_length}"
            )));
        }
        if n < MIN_POINTS || !n.is_power_of_two() {
            return Err(QhdError::InvalidGrid(format!(
                "point count must be a power of two >= {MIN_POINTS}, got {n}"
            )));
        }
        let dx = 2.0 * half_length / n as f64;
        let x: Vec<f64> = (0..n).map(|j| -half_length + j as f64 * dx).collect();
        let k: Vec<f64> = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
                PI * m as f64 / half_length
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            half_length,
            n,
            dx,
            x: x.into(),
            k: k.into(),
            forward,
            inverse,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Sample coordinates `x_j = -L + j dx`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Angular wavenumbers in standard FFT order; index `n/2` is the Nyquist mode.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(QhdError::LengthMismatch {
                expected: self.n,
                got: len,
            });
        }
        Ok(())
    }

    /// Unnormalized forward transform in place.
    pub fn fft(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// Normalized inverse transform in place.
    pub fn ifft(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
    }

    /// Spectral derivative of order 1, 2 or 3.
    ///
    /// Odd orders drop the Nyquist mode so that real input stays real.
    pub fn deriv(&self, f: &[Complex64], order: u32) -> Result<ComplexField> {
        self.check_len(f.len())?;
        if !(1..=3).contains(&order) {
            return Err(QhdError::InvalidParameter {
                name: "order",
                reason: format!("derivative order must be 1, 2 or 3, got {order}"),
            });
        }
        check_finite_complex(f, "deriv input")?;
        let mut buf = f.to_vec();
        self.fft(&mut buf);
        let nyq = self.nyquist_index();
        for (j, (c, &k)) in buf.iter_mut().zip(self.k.iter()).enumerate() {
            if order % 2 == 1 && j == nyq {
                *c = Complex64::new(0.0, 0.0);
                continue;
            }
            *c *= Complex64::new(0.0, k).powu(order);
        }
        self.ifft(&mut buf);
        Ok(buf)
    }

    /// Spectral derivative of a real field.
    pub fn deriv_real(&self, f: &[f64], order: u32) -> Result<RealField> {
        let c: ComplexField = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Ok(self.deriv(&c, order)?.into_iter().map(|c| c.re).collect())
    }

    /// Rectangle rule `sum f_i dx`; spectrally accurate on periodic data.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        check_finite_real(f, "integrand")?;
        Ok(self.sum(f))
    }

    /// Quadrature without validation, for internal hot paths on trusted data.
    pub(crate) fn sum(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.dx
    }

    /// Cumulative trapezoid from the left edge plus `offset`; `G[0] = offset`.
    pub fn antiderivative(&self, f: &[f64], offset: f64) -> Result<RealField> {
        self.check_len(f.len())?;
        check_finite_real(f, "antiderivative input")?;
        let mut out = Vec::with_capacity(self.n);
        let mut acc = offset;
        out.push(acc);
        for w in f.windows(2) {
            acc += 0.5 * self.dx * (w[0] + w[1]);
            out.push(acc);
        }
        Ok(out)
    }

    /// Antiderivative through the trigonometric interpolant, pinned to zero at
    /// sample `pin`.
    ///
    /// The mean of `f` is integrated exactly as a linear ramp; the zero-mean
    /// remainder is divided by `ik` in Fourier space. Exact for band-limited
    /// input, unlike the trapezoid sum.
    pub fn spectral_antiderivative(&self, f: &[f64], pin: usize) -> Result<RealField> {
        self.check_len(f.len())?;
        check_finite_real(f, "antiderivative input")?;
        let mean = f.iter().sum::<f64>() / self.n as f64;
        let mut buf: ComplexField = f.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
        self.fft(&mut buf);
        let nyq = self.nyquist_index();
        for (j, (c, &k)) in buf.iter_mut().zip(self.k.iter()).enumerate() {
            if j == 0 || j == nyq {
                *c = Complex64::new(0.0, 0.0);
            } else {
                *c /= Complex64::new(0.0, k);
            }
        }
        self.ifft(&mut buf);
        let pin = pin.min(self.n - 1);
        let x0 = self.x[pin];
        let base = buf[pin].re;
        Ok(buf
            .iter()
            .zip(self.x.iter())
            .map(|(c, &x)| c.re - base + mean * (x - x0))
            .collect())
    }

    /// Zero every mode with `|k| > (2/3) k_max` (Fourier-space buffer).
    pub fn dealias_spectrum(&self, spectrum: &mut [Complex64]) {
        let cut = 2.0 / 3.0 * self.k_max();
        for (c, &k) in spectrum.iter_mut().zip(self.k.iter()) {
            if k.abs() > cut {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Index set of samples with `|x| > frac * L`, used for boundary monitoring.
    pub fn edge_indices(&self, frac: f64) -> impl Iterator<Item = usize> + '_ {
        let lim = frac * self.half_length;
        self.x
            .iter()
            .enumerate()
            .filter(move |(_, &x)| x.abs() > lim)
            .map(|(i, _)| i)
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> RealField {
        self.x.iter().map(|&x| f(x)).collect()
    }

    pub fn sample_complex<F: Fn(f64) -> Complex64>(&self, f: F) -> ComplexField {
        self.x.iter().map(|&x| f(x)).collect()
    }
}

/// Discrete L2 norm `sqrt(sum |f|^2 dx)`.
pub fn l2_norm(grid: &Grid, f: &[f64]) -> f64 {
    (f.iter().map(|v| v * v).sum::<f64>() * grid.dx()).sqrt()
}

pub fn l2_norm_complex(grid: &Grid, f: &[Complex64]) -> f64 {
    (f.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx()).sqrt()
}

pub fn sup_norm(f: &[f64]) -> f64 {
    f.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

pub fn sup_norm_complex(f: &[Complex64]) -> f64 {
    f.iter().fold(0.0_f64, |m, v| m.max(v.norm()))
}
