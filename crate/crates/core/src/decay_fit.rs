//! Log-log power-law fits for dispersive decay and the windowing that keeps
//! them away from the initial transient and from boundary contamination.

use serde::{Deserialize, Serialize};

use crate::eos::GammaLaw;
use crate::error::{QhdError, Result};
use crate::functionals::{trajectory_snapshots, Snapshot, SnapshotScalars};
use crate::nls::Trajectory;
use crate::par::Execution;

pub const MIN_FIT_SAMPLES: usize = 8;
/// Fitted exponents up to `target + EXPONENT_TOL` count as consistent.
pub const EXPONENT_TOL: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares line through `(ln t, ln value)` for `t` in `[t_lo, t_hi]`.
pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<FitResult> {
    if times.len() != values.len() {
        return Err(QhdError::Fit(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    let (lo, hi) = window;
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0 && v.is_finite()) {
            return Err(QhdError::Fit(format!("nonpositive value {v} at t = {t}")));
        }
        if t <= 0.0 {
            return Err(QhdError::Fit(format!("window contains t = {t} <= 0")));
        }
        pts.push((t.ln(), v.ln()));
    }
    let n = pts.len();
    if n < MIN_FIT_SAMPLES {
        return Err(QhdError::Fit(format!(
            "{n} samples in window [{lo}, {hi}], need {MIN_FIT_SAMPLES}"
        )));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(QhdError::Fit("window has a single distinct time".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(FitResult {
        slope,
        intercept,
        stderr,
        r_squared,
        samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowOptions {
    /// Explicit window start; otherwise the time `||sqrt_rho||_inf` has
    /// dropped by `amplitude_drop`.
    pub t_lo: Option<f64>,
    /// Explicit window end; otherwise the last snapshot before `boundary_rho`
    /// exceeds `boundary_rel * ||rho||_inf`.
    pub t_hi: Option<f64>,
    pub amplitude_drop: f64,
    pub boundary_rel: f64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        Self {
            t_lo: None,
            t_hi: None,
            amplitude_drop: 0.3,
            boundary_rel: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Decays faster than the bound by more than the tolerance.
    Faster,
    Consistent,
    Slower,
    Inconclusive,
}

impl Verdict {
    pub fn from_exponent(fitted: f64, target: f64) -> Self {
        if !fitted.is_finite() {
            Verdict::Inconclusive
        } else if fitted < target - EXPONENT_TOL {
            Verdict::Faster
        } else if fitted <= target + EXPONENT_TOL {
            Verdict::Consistent
        } else {
            Verdict::Slower
        }
    }

    pub fn passes(self) -> bool {
        matches!(self, Verdict::Faster | Verdict::Consistent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityFit {
    pub name: String,
    pub fitted: f64,
    pub target: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersiveReport {
    pub gamma: f64,
    pub sigma: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    /// First snapshot time with boundary density above threshold.
    pub boundary_time: Option<f64>,
    pub inconclusive: bool,
    pub reason: Option<String>,
    pub quantities: Vec<QuantityFit>,
    /// `1/2 ||Lambda||^2 / E(0)` at the last snapshot inside the window.
    pub kinetic_ratio: f64,
    /// Kinetic ratio non-decreasing after `t_lo`, up to `KINETIC_SLACK`.
    pub kinetic_monotone: bool,
}

pub const KINETIC_SLACK: f64 = 0.02;
pub const KINETIC_TARGET: f64 = 0.8;

impl DispersiveReport {
    pub fn quantity(&self, name: &str) -> Option<&QuantityFit> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn kinetic_ok(&self) -> bool {
        self.kinetic_ratio >= KINETIC_TARGET && self.kinetic_monotone
    }
}

/// Names and theoretical exponents of the four decaying quantities.
pub fn decay_targets(sigma: f64) -> [(&'static str, f64); 4] {
    [
        ("grad_sqrt_rho_l2", -sigma),
        ("pc_kinetic", -2.0 * sigma),
        ("rho_gamma_int", -2.0 * sigma),
        ("sqrt_rho_sup", -sigma / 2.0),
    ]
}

fn quantity_value(name: &str, s: &SnapshotScalars) -> f64 {
    match name {
        "grad_sqrt_rho_l2" => s.grad_l2,
        "pc_kinetic" => s.pc_kinetic,
        "rho_gamma_int" => s.rho_gamma_int,
        "sqrt_rho_sup" => s.sqrt_rho_max,
        _ => f64::NAN,
    }
}

/// Decay fits from per-snapshot scalars.
pub fn dispersive_report(
    times: &[f64],
    scalars: &[SnapshotScalars],
    law: GammaLaw,
    opts: &WindowOptions,
) -> DispersiveReport {
    let sigma = law.dispersive_sigma();
    let boundary_time = times
        .iter()
        .zip(scalars)
        .find(|(_, s)| s.boundary_rho > opts.boundary_rel * s.rho_max)
        .map(|(&t, _)| t);
    let last = times.last().copied().unwrap_or(0.0);
    let t_hi = opts.t_hi.unwrap_or_else(|| match boundary_time {
        Some(tb) => times
            .iter()
            .copied()
            .filter(|&t| t < tb)
            .fold(0.0, f64::max),
        None => last,
    });
    let a0 = scalars.first().map_or(0.0, |s| s.sqrt_rho_max);
    let t_lo = opts.t_lo.unwrap_or_else(|| {
        times
            .iter()
            .zip(scalars)
            .find(|(_, s)| s.sqrt_rho_max <= (1.0 - opts.amplitude_drop) * a0)
            .map_or(f64::INFINITY, |(&t, _)| t)
    });

    let mut reason = None;
    if !t_lo.is_finite() {
        reason = Some("amplitude never dropped enough to start the window".to_string());
    } else if t_hi < 4.0 * t_lo {
        reason = Some(format!(
            "window collapsed: t_hi = {t_hi} < 4 t_lo = {}; boundary reached at {boundary_time:?}",
            4.0 * t_lo
        ));
    }

    let mut quantities = Vec::new();
    for (name, target) in decay_targets(sigma) {
        let values: Vec<f64> = scalars.iter().map(|s| quantity_value(name, s)).collect();
        let fit = if reason.is_none() {
            fit_decay(times, &values, (t_lo, t_hi)).ok()
        } else {
            None
        };
        quantities.push(match fit {
            Some(f) => QuantityFit {
                name: name.to_string(),
                fitted: f.slope,
                target,
                stderr: f.stderr,
                r_squared: f.r_squared,
                verdict: Verdict::from_exponent(f.slope, target),
            },
            None => QuantityFit {
                name: name.to_string(),
                fitted: f64::NAN,
                target,
                stderr: f64::NAN,
                r_squared: f64::NAN,
                verdict: Verdict::Inconclusive,
            },
        });
    }
    if reason.is_none() && quantities.iter().any(|q| q.verdict == Verdict::Inconclusive) {
        reason = Some(format!(
            "fewer than {MIN_FIT_SAMPLES} usable snapshots in [{t_lo}, {t_hi}]"
        ));
    }

    let e0 = scalars.first().map_or(0.0, |s| s.energy);
    let ratio = |s: &SnapshotScalars| if e0 > 0.0 { s.kinetic / e0 } else { 0.0 };
    let in_window: Vec<f64> = times
        .iter()
        .zip(scalars)
        .filter(|(&t, _)| t <= t_hi)
        .map(|(_, s)| ratio(s))
        .collect();
    let kinetic_ratio = in_window.last().copied().unwrap_or(0.0);
    let after: Vec<f64> = times
        .iter()
        .zip(scalars)
        .filter(|(&t, _)| t >= t_lo && t <= t_hi)
        .map(|(_, s)| ratio(s))
        .collect();
    let kinetic_monotone = after.windows(2).all(|w| w[1] >= w[0] - KINETIC_SLACK);

    DispersiveReport {
        gamma: law.gamma(),
        sigma,
        t_lo,
        t_hi,
        boundary_time,
        inconclusive: reason.is_some(),
        reason,
        quantities,
        kinetic_ratio,
        kinetic_monotone,
    }
}

pub fn dispersive_from_snapshots(
    snaps: &[Snapshot],
    law: GammaLaw,
    opts: &WindowOptions,
) -> DispersiveReport {
    let times: Vec<f64> = snaps.iter().map(|s| s.t).collect();
    let scalars: Vec<SnapshotScalars> = snaps.iter().map(|s| s.scalars).collect();
    dispersive_report(&times, &scalars, law, opts)
}

pub fn dispersive_suite(
    traj: &Trajectory,
    tau_rel: f64,
    opts: &WindowOptions,
) -> Result<DispersiveReport> {
    let snaps = trajectory_snapshots(traj, tau_rel, Execution::default_mode())?;
    Ok(dispersive_from_snapshots(&snaps, traj.law(), opts))
}
