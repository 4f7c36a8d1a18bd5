//! Batch driver for `qhd-core`: TOML run configs, concurrent sweeps, and the
//! CSV/JSON artifacts consumed by the plotting tools.

pub mod analyze;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod lift;
pub mod run;
pub mod sweep;

pub use config::RunConfig;
pub use error::{CliError, FieldError, Result};
pub use run::{run, RunArtifacts, RunStatus, Summary};
pub use sweep::{sweep, SweepSummary};

use qhd_core::lifting::{LiftOptions, PhaseMatching};

/// Lifting options from command-line values, with the same checks as the
/// `[lifting]` config section.
pub fn lifting_options(delta: Option<f64>, tau_rel: f64, matching: PhaseMatching) -> Result<LiftOptions> {
    let mut errs = Vec::new();
    if let Some(d) = delta {
        if !(d.is_finite() && d > 0.0) {
            errs.push(FieldError::new("delta", format!("must be positive, got {d}")));
        }
    }
    if !(tau_rel > 0.0 && tau_rel < 1.0) {
        errs.push(FieldError::new("tau_rel", format!("must lie in (0, 1), got {tau_rel}")));
    }
    if !errs.is_empty() {
        return Err(CliError::Validation(errs));
    }
    Ok(LiftOptions {
        delta,
        tau_rel,
        matching,
        ..LiftOptions::default()
    })
}
