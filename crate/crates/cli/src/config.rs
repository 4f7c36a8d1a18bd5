//! Run configuration: TOML with dotted sections, validated field by field.
//!
//! ```toml
//! [grid]
//! L = 10.0
//! N = 512
//!
//! [params]
//! gamma = 2.0
//! dt = 1e-3
//! t_end = 1.0
//! save_every = 10
//!
//! [initial_data]
//! kind = "wavefunction"
//! family = "gaussian"
//!
//! [output]
//! directory = "runs/gaussian"
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use qhd_core::lifting::{LiftOptions, PhaseMatching};
use qhd_core::polar::DEFAULT_TAU_REL;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, FieldError, Result};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "QHD_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    pub params: ParamsConfig,
    pub initial_data: InitialDataConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifting: Option<LiftingConfig>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Half-length; the box is `[-L, L)`.
    #[serde(rename = "L")]
    pub half_length: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub gamma: f64,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub save_every: usize,
    #[serde(default)]
    pub dealias: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Wavefunction,
    Hydrodynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    PlaneWave,
    AbsXBump,
    CustomFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDataConfig {
    pub kind: Kind,
    pub family: Family,
    #[serde(default = "one_f")]
    pub amplitude: f64,
    #[serde(default = "one_f")]
    pub width: f64,
    #[serde(default)]
    pub center: f64,
    /// Wave number of the `e^{ikx}` factor (gaussian).
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub background: f64,
    /// Number of periods over half the box (plane_wave).
    #[serde(default = "one_i")]
    pub mode: i32,
    /// CSV for `custom_file`: columns `x, psi_re, psi_im` or
    /// `x, sqrt_rho, Lambda[, dx_sqrt_rho]`. Relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftingConfig {
    /// Absolute regularization; relative `1e-8 max sqrt_rho` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_tau")]
    pub tau_rel: f64,
    #[serde(default = "default_floor")]
    pub conditioning_floor: f64,
    #[serde(default = "default_mismatch")]
    pub mismatch_tol: f64,
    #[serde(default)]
    pub matching: PhaseMatching,
}

impl Default for LiftingConfig {
    fn default() -> Self {
        Self {
            delta: None,
            tau_rel: DEFAULT_TAU_REL,
            conditioning_floor: default_floor(),
            mismatch_tol: default_mismatch(),
            matching: PhaseMatching::default(),
        }
    }
}

impl LiftingConfig {
    pub fn options(&self) -> LiftOptions {
        LiftOptions {
            tau_rel: self.tau_rel,
            delta: self.delta,
            conditioning_floor: self.conditioning_floor,
            mismatch_tol: self.mismatch_tol,
            matching: self.matching,
            gcp_bound: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Vacuum threshold for factorizing snapshots.
    #[serde(default = "default_tau")]
    pub tau_rel: f64,
    /// Write `fields_XXXX.csv` files.
    #[serde(default = "yes")]
    pub fields: bool,
    /// Every k-th saved snapshot gets a fields file; 0 keeps only the first
    /// and the last.
    #[serde(default)]
    pub fields_every: usize,
    #[serde(default = "yes")]
    pub pseudo_conformal: bool,
    #[serde(default = "yes")]
    pub morawetz: bool,
    #[serde(default = "yes")]
    pub entropy: bool,
    #[serde(default = "yes")]
    pub dispersive: bool,
    #[serde(default = "yes")]
    pub lambda_measure: bool,
    #[serde(default = "yes")]
    pub gcp: bool,
    /// Decay-fit window; automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_hi: Option<f64>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            tau_rel: DEFAULT_TAU_REL,
            fields: true,
            fields_every: 0,
            pseudo_conformal: true,
            morawetz: true,
            entropy: true,
            dispersive: true,
            lambda_measure: true,
            gcp: true,
            t_lo: None,
            t_hi: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    /// `diagnostics.csv` and fields files.
    Csv,
    /// `summary.json` and lambda-measure files.
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn one_i() -> i32 {
    1
}
fn yes() -> bool {
    true
}
fn default_tau() -> f64 {
    DEFAULT_TAU_REL
}
fn default_floor() -> f64 {
    1e-6
}
fn default_mismatch() -> f64 {
    0.05
}
fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Read, parse and validate; a relative `initial_data.path` is resolved
    /// against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text, path)?;
        if let Some(p) = &cfg.initial_data.path {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.initial_data.path = Some(base.join(p));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// All problems at once; an empty list means the config is usable.
    pub fn problems(&self) -> Vec<FieldError> {
        let mut errs = Vec::new();
        let mut need = |ok: bool, field: &str, reason: String| {
            if !ok {
                errs.push(FieldError::new(field, reason));
            }
        };
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;

        let g = &self.grid;
        need(finite_pos(g.half_length), "grid.L", format!("must be a positive number, got {}", g.half_length));
        need(
            g.n >= 16 && g.n.is_power_of_two(),
            "grid.N",
            format!("must be a power of two >= 16, got {}", g.n),
        );

        let p = &self.params;
        need(
            p.gamma.is_finite() && p.gamma > 1.0,
            "params.gamma",
            format!("must satisfy gamma > 1, got {}", p.gamma),
        );
        need(finite_pos(p.dt), "params.dt", format!("must be positive, got {}", p.dt));
        need(
            p.t_end.is_finite() && p.t_end >= p.dt,
            "params.t_end",
            format!("must satisfy t_end >= dt, got t_end = {} with dt = {}", p.t_end, p.dt),
        );
        need(p.save_every >= 1, "params.save_every", "must be at least 1".into());

        let i = &self.initial_data;
        need(
            i.amplitude.is_finite() && i.amplitude >= 0.0,
            "initial_data.amplitude",
            format!("must be finite and non-negative, got {}", i.amplitude),
        );
        need(finite_pos(i.width), "initial_data.width", format!("must be positive, got {}", i.width));
        need(i.center.is_finite(), "initial_data.center", format!("must be finite, got {}", i.center));
        need(
            i.momentum.is_finite(),
            "initial_data.momentum",
            format!("must be finite, got {}", i.momentum),
        );
        need(
            i.background.is_finite() && i.background >= 0.0,
            "initial_data.background",
            format!("must be finite and non-negative, got {}", i.background),
        );
        need(
            i.family != Family::CustomFile || i.path.is_some(),
            "initial_data.path",
            "required when family = \"custom_file\"".into(),
        );
        need(
            i.kind != Kind::Hydrodynamic || self.lifting.is_some(),
            "lifting",
            "section required when initial_data.kind = \"hydrodynamic\"".into(),
        );

        if let Some(l) = &self.lifting {
            if let Some(d) = l.delta {
                need(finite_pos(d), "lifting.delta", format!("must be positive, got {d}"));
            }
            need(
                l.tau_rel > 0.0 && l.tau_rel < 1.0,
                "lifting.tau_rel",
                format!("must lie in (0, 1), got {}", l.tau_rel),
            );
            need(
                (0.0..1.0).contains(&l.conditioning_floor),
                "lifting.conditioning_floor",
                format!("must lie in [0, 1), got {}", l.conditioning_floor),
            );
            need(
                finite_pos(l.mismatch_tol),
                "lifting.mismatch_tol",
                format!("must be positive, got {}", l.mismatch_tol),
            );
        }

        let d = &self.diagnostics;
        need(
            d.tau_rel > 0.0 && d.tau_rel < 1.0,
            "diagnostics.tau_rel",
            format!("must lie in (0, 1), got {}", d.tau_rel),
        );
        for (name, v) in [("diagnostics.t_lo", d.t_lo), ("diagnostics.t_hi", d.t_hi)] {
            if let Some(v) = v {
                need(finite_pos(v), name, format!("must be positive, got {v}"));
            }
        }
        if let (Some(lo), Some(hi)) = (d.t_lo, d.t_hi) {
            need(lo < hi, "diagnostics.t_hi", format!("must exceed t_lo = {lo}, got {hi}"));
        }

        let o = &self.output;
        need(
            !o.directory.as_os_str().is_empty(),
            "output.directory",
            "must not be empty".into(),
        );
        need(!o.formats.is_empty(), "output.formats", "must list at least one format".into());
        let distinct: HashSet<_> = o.formats.iter().collect();
        need(
            distinct.len() == o.formats.len(),
            "output.formats",
            "lists a format twice".into(),
        );
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.problems();
        if errs.is_empty() {
            let dx = 2.0 * self.grid.half_length / self.grid.n as f64;
            if self.params.dt >= dx * dx {
                log::warn!("dt = {} is not below dx^2 = {}", self.params.dt, dx * dx);
            }
            Ok(())
        } else {
            Err(CliError::Validation(errs))
        }
    }

    /// Output directory after applying the output-root override to relative
    /// paths.
    pub fn output_dir(&self) -> PathBuf {
        resolve_output(&self.output.directory)
    }

    pub fn writes(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() && !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}
